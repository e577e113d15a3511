"""Strip-flow rendering on the plane and the sphere, level curves, phase portraits.

A strip flow is the set of points whose ``rho`` lies in one interval; the
borders between strips are trajectories.  All angle comparisons use
differences wrapped into (-pi, pi] so that branch cuts of ``arg`` leave no
trace.
"""
from __future__ import annotations

import colorsys
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .expr import POINT_AT_INFINITY, ExprNode, evaluate_array
from .formats import atomic_write, ply_bytes, ppm_bytes
from .newton import FieldSpec

__all__ = [
    "SENTINEL",
    "RasterRegion",
    "StripPartition",
    "Image",
    "SphereMesh",
    "two_tone_palette",
    "hue_palette",
    "render_strips_plane",
    "render_level_curve",
    "overlay",
    "build_sphere_mesh",
    "stereographic_to_plane",
    "plane_to_sphere",
    "render_strips_sphere",
    "render_phase_portrait",
]

SENTINEL = (0, 0, 0)
BLOCK_ROWS = 32
GAP_COLOR = (255, 255, 255)


# ----------------------------------------------------------------------------
# regions, palettes, images
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RasterRegion:
    """``[x_min, x_max] x [y_min, y_max]`` split into ``N`` columns and ``M`` rows."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    N: int
    M: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("region bounds must satisfy min < max")
        if self.N < 1 or self.M < 1:
            raise ValueError("resolution must be at least 1x1")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.N

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.M

    def centers(self, row_start: int = 0, row_stop: Optional[int] = None) -> np.ndarray:
        """Pixel centres for image rows ``[row_start, row_stop)``; row 0 is the top."""
        row_stop = self.M if row_stop is None else row_stop
        x = self.x_min + (np.arange(self.N) + 0.5) * self.dx
        rows = np.arange(row_start, row_stop)
        y = self.y_min + (self.M - 1 - rows + 0.5) * self.dy
        return x[None, :] + 1j * y[:, None]

    def pixel_of(self, z: complex) -> tuple[int, int]:
        """``(row, col)`` of the pixel containing ``z``."""
        col = int(math.floor((z.real - self.x_min) / self.dx))
        row = self.M - 1 - int(math.floor((z.imag - self.y_min) / self.dy))
        return row, col


def two_tone_palette(n: int) -> list[tuple[int, int, int]]:
    light, dark = (238, 214, 140), (52, 96, 160)
    return [light if k % 2 == 0 else dark for k in range(n)]


def hue_palette(n: int, hues: int = 12) -> list[tuple[int, int, int]]:
    cols = []
    for k in range(n):
        r, g, b = colorsys.hsv_to_rgb((k % hues) / hues, 0.8, 0.95)
        cols.append((round(255 * r), round(255 * g), round(255 * b)))
    return cols


PALETTES = {"two-tone": two_tone_palette, "hue12": hue_palette}


@dataclass(frozen=True)
class StripPartition:
    """Colour classes for rho.

    ``cyclic`` mode splits (-pi, pi] into ``n`` equal bins of the wrapped
    angle.  ``fixed`` mode uses the given half-open ``intervals`` of raw rho;
    points in no interval get ``GAP_COLOR``.
    """

    n: int = 24
    palette: tuple = ()
    mode: str = "cyclic"
    intervals: tuple = ()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a partition needs at least 2 bins")
        if self.mode not in ("cyclic", "fixed"):
            raise ValueError("mode must be 'cyclic' or 'fixed'")
        if self.mode == "fixed" and len(self.intervals) != self.n:
            raise ValueError("fixed mode needs exactly n intervals")
        pal = tuple(tuple(int(c) for c in col) for col in (self.palette or two_tone_palette(self.n)))
        if len(pal) < self.n:
            raise ValueError("palette has fewer colours than bins")
        if any(col == SENTINEL for col in pal):
            raise ValueError("black is reserved for singular points")
        object.__setattr__(self, "palette", pal)

    @classmethod
    def named(cls, n: int, name: str) -> "StripPartition":
        try:
            return cls(n, tuple(PALETTES[name](n)))
        except KeyError:
            raise ValueError(f"unknown palette {name!r}; choose from {sorted(PALETTES)}") from None

    def bins(self, rho: np.ndarray) -> np.ndarray:
        """Bin index per value; -1 for singular values, -2 for gaps (fixed mode)."""
        if self.mode == "cyclic":
            return kernels.strip_bins(rho, self.n)
        idx = np.full(rho.shape, -2, dtype=np.int32)
        for k, (a, b) in enumerate(self.intervals):
            idx[(rho >= a) & (rho < b) & (idx == -2)] = k
        idx[~np.isfinite(rho)] = -1
        return idx

    def colors(self, idx: np.ndarray) -> np.ndarray:
        n = len(self.palette)
        lut = np.array(list(self.palette) + [GAP_COLOR, SENTINEL], dtype=np.uint8)
        return lut[np.select([idx == -1, idx == -2], [n + 1, n], idx)]


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)  # (height, width, 3) uint8, row 0 at the top

    def to_ppm(self) -> bytes:
        return ppm_bytes(self.pixels)

    def save(self, path) -> None:
        atomic_write(path, self.to_ppm())


def _blocks(M: int):
    return [(r, min(r + BLOCK_ROWS, M)) for r in range(0, M, BLOCK_ROWS)]


def _run_blocks(fn, M: int, workers: int):
    blocks = _blocks(M)
    if workers <= 1:
        return [fn(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), blocks))


# ----------------------------------------------------------------------------
# plane
# ----------------------------------------------------------------------------

def render_strips_plane(spec: FieldSpec, region: RasterRegion, part: StripPartition, workers: int = 1) -> Image:
    """Colour every pixel by the strip containing rho at its centre.

    Rows are processed in fixed blocks, so the result does not depend on the
    number of workers.
    """

    def block(a, b):
        rho = spec.rho_array(region.centers(a, b))
        return part.colors(part.bins(rho))

    pixels = np.concatenate(_run_blocks(block, region.M, workers), axis=0)
    return Image(region.N, region.M, pixels)


def render_level_curve(
    spec: FieldSpec,
    z0: complex,
    region: RasterRegion,
    reach: float = 0.5,
    workers: int = 1,
) -> np.ndarray:
    """Boolean mask of pixels crossed by the level set ``rho = rho(z0)``.

    From each centre step ``delta = reach * pixel diagonal`` both ways along
    the unit vector of the orthogonal field ``i*f``; the pixel is marked when
    the wrapped differences to ``rho(z0)`` have opposite signs there.
    """
    rho0 = spec.rho(z0)
    if not math.isfinite(rho0):
        raise ValueError("z0 must be a regular point")
    delta = reach * math.hypot(region.dx, region.dy)

    def block(a, b):
        z = region.centers(a, b)
        f = spec.f_array(z)
        with np.errstate(all="ignore"):
            e = 1j * f / np.abs(f)
        ok = np.isfinite(e)
        e = np.where(ok, e, 0)
        rp = spec.rho_array(z + delta * e)
        rm = spec.rho_array(z - delta * e)
        return kernels.level_mask(rp, rm, rho0) & ok

    return np.concatenate(_run_blocks(block, region.M, workers), axis=0)


def overlay(image: Image, mask: np.ndarray, color=(255, 0, 0)) -> Image:
    pixels = image.pixels.copy()
    pixels[mask] = color
    return Image(image.width, image.height, pixels)


def mask_image(mask: np.ndarray, color=(255, 0, 0), background=(255, 255, 255)) -> Image:
    pixels = np.empty(mask.shape + (3,), dtype=np.uint8)
    pixels[...] = background
    pixels[mask] = color
    return Image(mask.shape[1], mask.shape[0], pixels)


# ----------------------------------------------------------------------------
# sphere
# ----------------------------------------------------------------------------

@dataclass
class SphereMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (F, 3), counter-clockwise seen from outside
    depth: int

    def to_ply(self, colors: Optional[np.ndarray] = None) -> bytes:
        return ply_bytes(self.vertices, self.triangles, colors)


_OCTA_V = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
_OCTA_F = np.array(
    [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
)


def build_sphere_mesh(depth: int) -> SphereMesh:
    """Octahedron refined ``depth`` times by splitting each triangle into four.

    Edge midpoints are shared between neighbouring triangles and pushed onto
    the unit sphere.
    """
    if not 0 <= depth <= 8:
        raise ValueError("depth must be between 0 and 8")
    verts = [tuple(v) for v in _OCTA_V]
    faces = [tuple(f) for f in _OCTA_F]
    for _ in range(depth):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = np.add(verts[a], verts[b])
                verts.append(tuple(p / np.linalg.norm(p)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new
    return SphereMesh(np.array(verts), np.array(faces, dtype=np.int64), depth)


def stereographic_to_plane(p) -> complex | np.ndarray:
    """Projection from the north pole: ``(x + i y) / (1 - z)``; the pole maps to infinity."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    with np.errstate(all="ignore"):
        w = (x + 1j * y) / (1 - z)
    w = np.where(1 - z <= 1e-15, POINT_AT_INFINITY, w)
    return complex(w) if p.ndim == 1 else w


def plane_to_sphere(w) -> np.ndarray:
    """Inverse projection; infinity maps to the north pole."""
    w = np.asarray(w, dtype=np.complex128)
    r2 = np.abs(w) ** 2
    with np.errstate(all="ignore"):
        out = np.stack([2 * w.real, 2 * w.imag, r2 - 1], axis=-1) / (r2 + 1)[..., None]
    out[~np.isfinite(w)] = (0.0, 0.0, 1.0)
    return out


def render_strips_sphere(spec: FieldSpec, mesh: SphereMesh, part: StripPartition, workers: int = 1) -> np.ndarray:
    """Colour per triangle from rho at its projected, renormalized barycentre."""
    tri = mesh.vertices[mesh.triangles]
    bary = tri.mean(axis=1)
    bary /= np.linalg.norm(bary, axis=1)[:, None]
    at_pole = np.any(tri[:, :, 2] >= 1 - 1e-12, axis=1)
    z = stereographic_to_plane(bary)
    chunk = 4096

    def block(a, b):
        return part.bins(spec.rho_array(z[a:b]))

    starts = range(0, len(z), chunk)
    if workers <= 1:
        parts = [block(a, min(a + chunk, len(z))) for a in starts]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: block(a, min(a + chunk, len(z))), starts))
    idx = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int32)
    idx[at_pole] = -1
    return part.colors(idx)


# ----------------------------------------------------------------------------
# domain colouring
# ----------------------------------------------------------------------------

def _hsv_to_rgb(h: np.ndarray) -> np.ndarray:
    """Fully saturated, full value colours for hues in [0, 1)."""
    h6 = h * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    one, zero = np.ones_like(f), np.zeros_like(f)
    q, t = 1 - f, f
    table = [(one, t, zero), (q, one, zero), (zero, one, t), (zero, q, one), (t, zero, one), (one, zero, q)]
    rgb = np.zeros(h.shape + (3,))
    for k, (r, g, b) in enumerate(table):
        sel = i == k
        rgb[sel] = np.stack([r[sel], g[sel], b[sel]], axis=-1)
    return np.round(255 * rgb).astype(np.uint8)


def render_phase_portrait(fn: ExprNode, region: RasterRegion, workers: int = 1) -> Image:
    """Hue of each pixel is ``arg fn(z)`` on the colour wheel (red at arg 0)."""

    def block(a, b):
        w = evaluate_array(fn, region.centers(a, b))
        hue = np.mod(np.angle(w) / (2 * np.pi), 1.0)
        rgb = _hsv_to_rgb(hue)
        rgb[~np.isfinite(w) | (w == 0)] = SENTINEL
        return rgb

    pixels = np.concatenate(_run_blocks(block, region.M, workers), axis=0)
    return Image(region.N, region.M, pixels)
