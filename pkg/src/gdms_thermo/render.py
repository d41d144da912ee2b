"""Binary PPM (P6) rendering of Julia clouds with optional atom overlays."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BACKGROUND = 255
CLOUD = 0
OVERLAY = 128


@dataclass(frozen=True)
class Viewport:
    """Affine map from the plane to pixel coordinates (row 0 at the top)."""

    center: complex
    scale: float  # pixels per unit
    width: int
    height: int

    @classmethod
    def fit(cls, points, width, height, margin=0.05):
        pts = np.asarray(points, dtype=complex)
        xmin, xmax = pts.real.min(), pts.real.max()
        ymin, ymax = pts.imag.min(), pts.imag.max()
        dx = max(xmax - xmin, 1e-12)
        dy = max(ymax - ymin, 1e-12)
        usable = 1.0 - 2 * margin
        scale = min((width - 1) * usable / dx, (height - 1) * usable / dy)
        return cls(complex((xmin + xmax) / 2, (ymin + ymax) / 2), float(scale), width, height)

    def to_pixel(self, z):
        z = np.asarray(z, dtype=complex)
        col = (z.real - self.center.real) * self.scale + (self.width - 1) / 2
        row = (self.height - 1) / 2 - (z.imag - self.center.imag) * self.scale
        return row, col

    def to_plane(self, row, col):
        x = (col - (self.width - 1) / 2) / self.scale + self.center.real
        y = ((self.height - 1) / 2 - row) / self.scale + self.center.imag
        return x + 1j * y


def _plot(img, row, col, value):
    r = np.rint(row).astype(int)
    c = np.rint(col).astype(int)
    ok = (r >= 0) & (r < img.shape[0]) & (c >= 0) & (c < img.shape[1])
    img[r[ok], c[ok]] = value


def render_cloud(points, width, height, atoms=()):
    """Rasterise a cloud; atoms are drawn as outer-radius circles plus a 3x3 center mark.

    Returns ``(image, viewport)`` with ``image`` a ``(height, width)`` uint8 array.
    """
    if width < 2 or height < 2:
        raise ValueError("image must be at least 2x2")
    vp = Viewport.fit(points, width, height)
    img = np.full((height, width), BACKGROUND, dtype=np.uint8)
    for a in atoms:
        r_px = a.r_outer * vp.scale
        n = int(min(max(16, 2 * math.pi * r_px), 20000))
        ring = a.center + a.r_outer * np.exp(2j * np.pi * np.arange(n) / n)
        _plot(img, *vp.to_pixel(ring), OVERLAY)
    _plot(img, *vp.to_pixel(points), CLOUD)
    for a in atoms:
        row, col = vp.to_pixel(a.center)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                _plot(img, np.array([row + dr]), np.array([col + dc]), OVERLAY)
    return img, vp


def encode_ppm(img) -> bytes:
    """Grayscale image as binary P6 (RGB channels equal)."""
    h, w = img.shape
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    return f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    """Inverse of :func:`encode_ppm` (first channel only)."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = map(int, parts[1].split())
    rgb = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
    return rgb[:, :, 0].copy()
