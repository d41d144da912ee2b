"""Command-line front end.

Every command prints one JSON report (or CSV with ``--format csv`` where a
table is the natural output)::

    {"system_digest": ..., "command": ..., "parameters": {...},
     "results": {...}, "warnings": [...], "timings": {...}}

Exit codes: 0 success, 1 computation failure, 2 input or parse failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import backward, holes, model, spectral, symbolic, thermo
from .exceptions import GDMSError, HoleValidationError, SystemParseError
from .render import encode_ppm, render_cloud

EXIT_OK, EXIT_COMPUTE, EXIT_INPUT = 0, 1, 2
IDENTITY_TEMPERATURES = (0.5, 1.0, 2.0)


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def to_jsonable(obj):
    """Recursively convert numpy values, complex numbers and dataclasses."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


class RunReport:
    def __init__(self, command, parameters):
        self.system_digest = None
        self.command = command
        self.parameters = parameters
        self.results = {}
        self.warnings = []
        self.timings = {}
        self.error = None

    def stage(self, name):
        return _Stage(self, name)

    def warn(self, message):
        if message not in self.warnings:
            self.warnings.append(message)

    def to_dict(self):
        out = {
            "system_digest": self.system_digest,
            "command": self.command,
            "parameters": to_jsonable(self.parameters),
            "results": to_jsonable(self.results),
            "warnings": list(self.warnings),
        }
        if self.error is not None:
            out["error"] = self.error
        out["timings"] = self.timings
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


class _Stage:
    def __init__(self, report, name):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        self.catcher = warnings.catch_warnings(record=True)
        self.caught = self.catcher.__enter__()
        warnings.simplefilter("always")
        return self

    def __exit__(self, exc_type, exc, tb):
        self.catcher.__exit__(None, None, None)
        for w in self.caught:
            self.report.warn(f"{self.name}: {w.message}")
        self.report.timings[self.name] = round((time.perf_counter() - self.t0) * 1000.0, 3)
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


# --------------------------------------------------------------------------
# argument parsing


def _window(text):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("window must look like LO:HI") from None
    return lo, hi


def _threads(args):
    env = os.environ.get("GDMS_THREADS")
    if env:
        return max(1, int(env))
    return args.threads or os.cpu_count() or 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, metavar="PATH", help="system JSON document")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--budget", type=int, default=holes.PREIMAGE_BUDGET)

    parser = argparse.ArgumentParser(prog="gdms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="structural and heuristic checks")
    p.add_argument("--depth", type=int, default=12, help="random-walk depth for Julia clouds")
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--max-loop-len", type=int, default=model.DEFAULT_MAX_LOOP_LEN)

    p = sub.add_parser("entropy", parents=[common], help="degree matrix and topological entropy")
    p.add_argument("--depth", type=int, default=12, help="rows of the (1/n) log N_n table")
    p.add_argument("--t", type=float, default=1.0)

    p = sub.add_parser("report", parents=[common], help="full pipeline up to the decay exponent")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=thermo.DEFAULT_DEPTH)
    p.add_argument("--window", type=_window, default=(4, 10))

    p = sub.add_parser("pressure", parents=[common], help="rows n, u, log_Z, pressure_hat")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--u", type=float, default=1.0)

    p = sub.add_parser("atoms", parents=[common], help="hole-preimage atoms with Koebe radii")
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=3, help="word length n")
    p.add_argument("--u", type=float, default=None, help="exponent for the weights (default: Bowen estimate)")

    p = sub.add_parser("cloud", parents=[common], help="Julia cloud as CSV re,im")
    p.add_argument("--vertex", default="0")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--samples", type=int, default=2048)

    p = sub.add_parser("render", parents=[common], help="PPM image of a Julia cloud")
    p.add_argument("--vertex", default="0")
    p.add_argument("--depth", type=int, default=12, help="random-walk depth")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="overlay atoms of this word length")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    return parser


def _vertex(system, text):
    if text in system.vertices:
        return system.vertex_index(text)
    try:
        return system.vertex_index(int(text))
    except (ValueError, IndexError):
        raise SystemParseError(f"unknown vertex {text!r}") from None


# --------------------------------------------------------------------------
# commands


def _validate_results(system, args, report):
    diag = model.diagnose(system, args.max_loop_len)
    res = {
        "irreducible": diag.irreducible,
        "has_degree_ge2": diag.has_degree_ge2,
        "n_vertices": system.n_vertices,
        "n_edges": len(system.edges),
        "n_generators": system.n_generators,
        "degrees": [g.degree for g in system.generators],
        "period": model.graph_period(system) if diag.irreducible else None,
        "mobius_loops": [
            {"word": system.word_label(r.word), "trace_sq": r.trace_sq, "loxodromic": r.loxodromic}
            for r in diag.mobius_loop_report
        ],
    }
    for w in diag.warnings:
        report.warn(w)
    if diag.irreducible:
        try:
            vsc = backward.vsc_check(system, args.samples, args.depth, args.seed)
            res["vsc"] = {"passed": vsc.passed, "label": vsc.label, "per_vertex": vsc.per_vertex}
        except GDMSError as exc:
            res["vsc"] = None
            report.warn(f"VSC check skipped: {exc}")
    return res


def cmd_validate(system, args, report):
    with report.stage("validate"):
        report.results.update(_validate_results(system, args, report))
    return EXIT_OK if report.results["irreducible"] else EXIT_COMPUTE


def _entropy_results(system, t, n_max):
    M = spectral.degree_matrix(system, t)
    pd = spectral.perron(M)
    seq, limit = symbolic.pressure_deg(system, t, max(2, n_max))
    return {
        "t": t,
        "matrix": M.entries,
        "rho": pd.rho,
        "log_rho": math.log(pd.rho),
        "left_eigenvector": pd.left,
        "right_eigenvector": pd.right,
        "table": [{"n": n, "rate": r} for n, r in enumerate(seq, start=1)],
        "limit": limit,
    }


def cmd_entropy(system, args, report):
    with report.stage("entropy"):
        if not model.check_irreducible(system):
            raise GDMSError("system is not irreducible")
        report.results.update(_entropy_results(system, args.t, args.depth))
    return EXIT_OK


def cmd_report(system, args, report):
    threads = _threads(args)
    lo, hi = args.window
    try:
        with report.stage("validate"):
            val = _validate_results(system, argparse.Namespace(
                max_loop_len=model.DEFAULT_MAX_LOOP_LEN, samples=512, depth=12, seed=args.seed), report)
            report.results["validate"] = val
            if not val["irreducible"]:
                raise GDMSError("system is not irreducible")
        with report.stage("entropy"):
            report.results["entropy"] = _entropy_results(system, 1.0, hi)
        with report.stage("expansion_estimate"):
            lam = backward.expansion_estimate(system, max(2, args.depth, hi))
            report.results["expansion"] = {"lambda_hat": lam}
        with report.stage("build_hole_family"):
            hf = holes.build_hole_family(system, args.radius, seed=args.seed)
            report.results["holes"] = hf
        with report.stage("bowen_parameter"):
            bw = thermo.bowen_parameter(system, hf, args.depth, budget=args.budget, threads=threads)
            report.results["bowen"] = bw
        with report.stage("decay_exponent"):
            lam_top = lam[hi - 1]
            dec = thermo.decay_exponent(
                system, hf, bw.delta_hat, (lo, hi), lambda_hat=lam_top, budget=args.budget, threads=threads
            )
            report.results["geom_pressure"] = dec.geom
            report.results["decay"] = {
                "exponent": dec.exponent,
                "entropy": dec.entropy,
                "geom_pressure": dec.geom.slope,
                "tail_exponent": dec.tail_exponent,
                "lambda_hat": dec.lambda_hat,
                "floor": dec.floor,
                "positive": dec.exponent > 0,
                "note": dec.note,
            }
            for w in dec.warnings:
                report.warn(w)
        with report.stage("entropy_identity"):
            report.results["entropy_identity"] = [
                spectral.entropy_identity_terms(system, t) for t in IDENTITY_TEMPERATURES
            ]
        heuristics = list(hf.notes)
        if report.results["validate"].get("vsc"):
            heuristics.append(report.results["validate"]["vsc"]["label"])
        report.results["heuristics"] = heuristics
    except StageError as err:
        report.error = {"stage": err.stage, "type": type(err.exc).__name__, "message": str(err.exc)}
        if isinstance(err.exc, HoleValidationError):
            report.error["best_clearance"] = err.exc.best_clearance
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_pressure(system, args, report):
    with report.stage("build_hole_family"):
        hf = holes.build_hole_family(system, args.radius, seed=args.seed)
    with report.stage("pressure"):
        got = thermo.collect_log_derivs(
            system, hf, range(1, args.depth + 1), budget=args.budget, threads=_threads(args)
        )
        rows = []
        for n in range(1, args.depth + 1):
            row = thermo.GeomPartitionRow(n, args.u, thermo._log_z(got[n], args.u))
            rows.append({"n": n, "u": args.u, "log_Z": row.log_Z, "pressure_hat": row.pressure_hat})
    report.results["holes"] = hf
    report.results["rows"] = rows
    report.results["note"] = thermo.R_FREE_NOTE
    report.csv = "n,u,log_Z,pressure_hat\n" + "".join(
        f"{r['n']},{r['u']!r},{r['log_Z']!r},{r['pressure_hat']!r}\n" for r in rows
    )
    return EXIT_OK


def cmd_atoms(system, args, report):
    with report.stage("build_hole_family"):
        hf = holes.build_hole_family(system, args.radius, seed=args.seed)
    delta = args.u
    if delta is None:
        with report.stage("bowen_parameter"):
            delta = thermo.bowen_parameter(system, hf, budget=args.budget).delta_hat
    with report.stage("atoms"):
        atoms = holes.hole_preimages(system, hf, delta, args.depth, budget=args.budget)
        bracket = holes.measure_bracket_report(atoms)
    report.results.update(
        {
            "delta": delta,
            "n": args.depth,
            "koebe_K": holes.KOEBE_K,
            "count": len(atoms),
            "bracket": bracket,
            "atoms": [
                {
                    "word": system.word_label(a.word),
                    "center": a.center,
                    "r_inner": a.r_inner,
                    "r_outer": a.r_outer,
                    "weight": a.weight,
                }
                for a in atoms
            ],
        }
    )
    report.csv = holes.atoms_to_csv(system, atoms)
    return EXIT_OK


def cmd_cloud(system, args, report):
    with report.stage("cloud"):
        cloud = backward.julia_cloud(system, _vertex(system, args.vertex), args.samples, args.depth, args.seed)
    report.results.update({"vertex": cloud.vertex, "count": cloud.points.size, "points": cloud.points})
    report.csv = cloud.to_csv()
    return EXIT_OK


def cmd_render(system, args, report):
    if args.out is None:
        raise SystemParseError("render needs --out PATH")
    v = _vertex(system, args.vertex)
    with report.stage("cloud"):
        cloud = backward.julia_cloud(system, v, args.samples, args.depth, args.seed)
    atoms = []
    if args.radius is not None and args.n is not None:
        with report.stage("atoms"):
            hf = holes.build_hole_family(system, args.radius, seed=args.seed)
            atoms = [a for a in holes.hole_preimages(system, hf, 1.0, args.n, budget=args.budget)
                     if a.word and system.generators[a.word[0]].source == v]
    with report.stage("render"):
        img, vp = render_cloud(cloud.points, args.width, args.height, atoms)
        Path(args.out).write_bytes(encode_ppm(img))
    report.results.update(
        {
            "out": str(args.out),
            "width": args.width,
            "height": args.height,
            "viewport": {"center": vp.center, "scale": vp.scale},
            "points": cloud.points.size,
            "atoms": [a.center for a in atoms],
        }
    )
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "entropy": cmd_entropy,
    "report": cmd_report,
    "pressure": cmd_pressure,
    "atoms": cmd_atoms,
    "cloud": cmd_cloud,
    "render": cmd_render,
}


def _emit(report, args, stdout):
    if args.format == "csv" and getattr(report, "csv", None) is not None and report.error is None:
        text = report.csv
    else:
        text = report.to_json() + "\n"
    if args.out and args.command != "render":
        Path(args.out).write_text(text)
    else:
        stdout.write(text)


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    params = {k: v for k, v in vars(args).items() if k not in ("command", "threads", "out", "format")}
    report = RunReport(args.command, params)
    try:
        system = model.load_system(args.system)
    except (OSError, SystemParseError) as exc:
        stderr.write(f"gdms: cannot read system: {exc}\n")
        return EXIT_INPUT
    report.system_digest = system.digest()
    try:
        code = COMMANDS[args.command](system, args, report)
    except SystemParseError as exc:
        stderr.write(f"gdms: {exc}\n")
        return EXIT_INPUT
    except StageError as err:
        report.error = {"stage": err.stage, "type": type(err.exc).__name__, "message": str(err.exc)}
        code = EXIT_INPUT if isinstance(err.exc, SystemParseError) else EXIT_COMPUTE
    except (GDMSError, ValueError, ArithmeticError) as exc:
        report.error = {"stage": args.command, "type": type(exc).__name__, "message": str(exc)}
        code = EXIT_COMPUTE
    try:
        _emit(report, args, stdout)
    except OSError as exc:
        stderr.write(f"gdms: cannot write output: {exc}\n")
        return EXIT_COMPUTE
    if report.error is not None:
        stderr.write(f"gdms: {report.error['stage']} failed: {report.error['message']}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
