import colorsys
import hashlib
import math
import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonflow.expr import parse
from newtonflow.formats import read_ppm
from newtonflow.newton import FieldSpec, field_from_phi
from newtonflow.render import (
    GAP_COLOR,
    SENTINEL,
    RasterRegion,
    StripPartition,
    build_sphere_mesh,
    hue_palette,
    mask_image,
    overlay,
    plane_to_sphere,
    render_level_curve,
    render_phase_portrait,
    render_strips_plane,
    render_strips_sphere,
    stereographic_to_plane,
)

from conftest import rational_spec

# sha256 of renders frozen after checking both kernel backends agree
GOLDEN_RATIONAL_PLANE = "ad36b774b9ddbc4b622f6e94786ba639f40bc2a391169b378879b36441a11d98"
GOLDEN_PHASE_Z2 = "3a2cbaac921848771d10f72818ce17546791a547f199962d2d30e96a21f7fb63"
GOLDEN_MESH_DEPTH1 = "f44b656d4f0600b3d80ea95bb9122cf7ef73473e45c73b2a46de3b4b437a059c"


def sha(data):
    return hashlib.sha256(data).hexdigest()


def runs(column):
    """Lengths of runs of identical colours down a pixel column."""
    change = np.nonzero(np.any(column[1:] != column[:-1], axis=1))[0]
    return np.diff(np.r_[-1, change, len(column) - 1])


class ConstantRho:
    """Stand-in spec whose first integral vanishes identically."""

    def rho_array(self, z):
        return np.zeros(np.shape(z))


# -- raster geometry ---------------------------------------------------------------

def test_pixel_centres_and_orientation():
    region = RasterRegion(0, 4, 0, 2, 4, 2)
    c = region.centers()
    assert c[0, 0] == pytest.approx(0.5 + 1.5j)
    assert c[-1, -1] == pytest.approx(3.5 + 0.5j)
    assert region.pixel_of(0.5 + 1.5j) == (0, 0)


def test_invalid_region_rejected():
    with pytest.raises(ValueError):
        RasterRegion(1, 0, 0, 1, 4, 4)
    with pytest.raises(ValueError):
        RasterRegion(0, 1, 0, 1, 0, 4)


def test_partition_validation():
    with pytest.raises(ValueError):
        StripPartition(1)
    with pytest.raises(ValueError):
        StripPartition(2, ((0, 0, 0), (1, 1, 1)))
    with pytest.raises(ValueError):
        StripPartition.named(4, "plaid")


def test_cyclic_bins_cover_circle():
    part = StripPartition(8, tuple(hue_palette(8)))
    rho = np.linspace(-math.pi + 1e-9, math.pi, 8001)
    counts = Counter(part.bins(rho).tolist())
    assert sorted(counts) == list(range(8))
    assert max(counts.values()) - min(counts.values()) <= 2
    # bins depend only on rho mod 2 pi
    assert np.array_equal(part.bins(rho), part.bins(rho + 6 * math.pi))


def test_fixed_intervals_and_gap_colour():
    part = StripPartition(2, ((10, 10, 10), (20, 20, 20)), "fixed", ((0.0, 1.0), (1.0, 2.0)))
    idx = part.bins(np.array([0.5, 1.5, 5.0, np.nan]))
    assert idx.tolist() == [0, 1, -2, -1]
    cols = part.colors(idx)
    assert [tuple(c) for c in cols] == [(10, 10, 10), (20, 20, 20), GAP_COLOR, SENTINEL]


# -- plane strips ------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 6, 24])
def test_unit_field_gives_equal_bands(n):
    spec = rational_spec("1", 0)
    region = RasterRegion(-1, 1, -math.pi, math.pi, 7, 10 * n + 3)
    image = render_strips_plane(spec, region, StripPartition.named(n, "hue12"))
    heights = runs(image.pixels[:, 3])
    assert len(heights) in (n, n + 1)
    inner = heights[1:-1] if len(heights) == n + 1 else heights
    assert np.ptp(inner) <= 1
    # each row is a single colour
    assert np.all(image.pixels == image.pixels[:, :1])


def test_linear_field_gives_angular_sectors():
    # Phi = 1/z, so rho = -arg z: bins are sectors around 0
    spec = field_from_phi(parse("1/z"))
    n = 8
    region = RasterRegion(-1, 1, -1, 1, 201, 201)
    part = StripPartition(n, tuple(hue_palette(n, hues=n)))
    image = render_strips_plane(spec, region, part)
    z = region.centers()
    expected = part.colors(part.bins(-np.angle(z)))
    ring = (np.abs(z) > 0.2) & (np.abs(z) < 0.95)
    agree = np.all(image.pixels == expected, axis=-1)
    assert agree[ring].mean() > 0.999
    assert len({tuple(c) for c in image.pixels[ring]}) == n


def test_singular_pixels_get_sentinel():
    spec = rational_spec("z", 1)
    region = RasterRegion(-1, 1, -1, 1, 3, 3)  # centre pixel sits on the zero, where Psi = log z
    assert tuple(render_strips_plane(spec, region, StripPartition()).pixels[1, 1]) == SENTINEL


def test_rational_example_sector_structure():
    # double pole at -i/2 (zeros at 0 and i/2)
    spec = rational_spec("z*(2*z-i)^2/(2*z+i)^2", 1.0)
    from newtonflow.flow import count_level_crossings

    # separatrices of the double pole: the level of rho at the pole itself
    for r in (0.05, 0.1, 0.2):
        assert count_level_crossings(spec, -0.5j, r, spec.rho(-0.5j)) == 2 * (2 + 1)


def test_plane_render_deterministic_across_workers():
    spec = rational_spec("z*(2*z-i)^2/(2*z+i)^2")
    region = RasterRegion(-2, 2, -2, 2, 120, 100)
    part = StripPartition.named(24, "two-tone")
    images = [render_strips_plane(spec, region, part, workers=w).to_ppm() for w in (1, 2, 4, 7)]
    assert len(set(images)) == 1


def test_plane_golden_hash():
    spec = rational_spec("z*(2*z-i)^2/(2*z+i)^2")
    image = render_strips_plane(spec, RasterRegion(-2, 2, -2, 2, 64, 48), StripPartition.named(24, "two-tone"))
    assert sha(image.to_ppm()) == GOLDEN_RATIONAL_PLANE


def test_ppm_round_trip(tmp_path):
    spec = rational_spec("z^2-1", 0.5j)
    image = render_strips_plane(spec, RasterRegion(-2, 2, -1, 1, 30, 17), StripPartition())
    path = tmp_path / "out.ppm"
    image.save(path)
    data = path.read_bytes()
    assert data.startswith(b"P6\n30 17\n255\n")
    assert np.array_equal(read_ppm(data), image.pixels)


def test_large_render_fast_enough():
    spec = rational_spec("z*(2*z-i)^2/(2*z+i)^2")
    t = time.perf_counter()
    render_strips_plane(spec, RasterRegion(-2, 2, -2, 2, 800, 800), StripPartition())
    assert time.perf_counter() - t < 5


# -- level curves ------------------------------------------------------------------

def test_unit_field_level_curve_single_row():
    spec = rational_spec("1", 0)
    region = RasterRegion(-2, 2, -2.05, 1.95, 40, 40)  # y = 1 runs through row centres
    mask = render_level_curve(spec, 1j, region)
    row = region.pixel_of(0.3 + 1j)[0]
    assert mask[row].all()
    assert mask.sum() == region.N


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.9, 1.9))
def test_unit_field_level_curve_soundness(y0):
    spec = rational_spec("1", 0)
    region = RasterRegion(-2, 2, -2, 2, 40, 40)
    mask = render_level_curve(spec, complex(0, y0), region)
    ys = region.centers().imag[:, 0]
    straddle = np.abs(ys - y0) <= region.dy / 2
    assert np.all(mask[straddle])
    near = np.abs(ys - y0) < 1.5 * region.dy
    assert not mask[~near].any()


def test_pole_separatrices_form_six_rays():
    spec = rational_spec("1/z^2", 0)
    region = RasterRegion(-1, 1, -1, 1, 201, 201)
    mask = render_level_curve(spec, 0.5, region)
    z = region.centers()[mask]
    ring = z[(np.abs(z) > 0.4) & (np.abs(z) < 0.9)]
    # rho = -Im(z^3)/3 vanishes on the rays arg z = k pi/3
    angles = np.mod(np.angle(ring), 2 * math.pi)
    clusters = {int(round(a / (math.pi / 3))) % 6 for a in angles}
    assert clusters == set(range(6))
    # distance to the level set ~ |rho - rho0| / |grad rho| = |Im z^3| / (3 |z|^2)
    diag = math.hypot(region.dx, region.dy)
    assert np.all(np.abs((ring**3).imag) / (3 * np.abs(ring) ** 2) <= diag)


def test_tangent_field_alternates_along_real_axis():
    spec = field_from_phi(parse("sin(z)"))
    region = RasterRegion(-4, 4, -1, 1, 161, 41)
    mask = render_level_curve(spec, 0.02 + 0.5j, region)
    assert mask.any()


def test_overlay_and_mask_image():
    mask = np.zeros((3, 4), bool)
    mask[1, 2] = True
    img = mask_image(mask)
    assert tuple(img.pixels[1, 2]) == (255, 0, 0) and tuple(img.pixels[0, 0]) == (255, 255, 255)
    over = overlay(img, ~mask, (0, 0, 255))
    assert tuple(over.pixels[0, 0]) == (0, 0, 255)


# -- sphere ------------------------------------------------------------------------

@pytest.mark.parametrize("depth", range(7))
def test_sphere_mesh_invariants(depth):
    mesh = build_sphere_mesh(depth)
    assert len(mesh.triangles) == 8 * 4**depth
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1, atol=1e-12)
    # closed: every edge is shared by exactly two faces, in opposite directions
    edges = Counter()
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            edges[e] += 1
    assert all(v == 1 for v in edges.values())
    assert all((b, a) in edges for a, b in edges)
    # Euler characteristic of the sphere
    assert len(mesh.vertices) - len(edges) // 2 + len(mesh.triangles) == 2
    # outward orientation
    tri = mesh.vertices[mesh.triangles]
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    assert np.all(np.einsum("ij,ij->i", normal, tri.mean(axis=1)) > 0)


def test_octahedron_and_valence():
    mesh = build_sphere_mesh(0)
    assert len(mesh.vertices) == 6 and len(mesh.triangles) == 8
    valence = Counter(build_sphere_mesh(3).triangles.ravel().tolist())
    assert set(valence.values()) <= {4, 5, 6}
    assert sum(1 for v in valence.values() if v == 4) == 6


def test_mesh_depth_bounds():
    with pytest.raises(ValueError):
        build_sphere_mesh(9)


def test_mesh_golden_hash():
    assert sha(build_sphere_mesh(1).to_ply()) == GOLDEN_MESH_DEPTH1


def test_stereographic_examples():
    assert stereographic_to_plane((0, 0, -1)) == 0
    assert stereographic_to_plane((1, 0, 0)) == pytest.approx(1)
    assert np.isinf(stereographic_to_plane((0, 0, 1)).real)
    assert np.allclose(plane_to_sphere(complex("inf+infj")), (0, 0, 1))


def test_stereographic_round_trip(rng):
    p = rng.normal(size=(1000, 3))
    p /= np.linalg.norm(p, axis=1)[:, None]
    p = p[p[:, 2] < 0.999]
    back = plane_to_sphere(stereographic_to_plane(p))
    assert np.max(np.abs(back - p)) < 1e-12


def sphere_rings(mesh):
    bary = mesh.vertices[mesh.triangles].mean(axis=1)
    return bary[:, 2] / np.linalg.norm(bary, axis=1)


def test_sphere_unit_field_dipole_at_infinity():
    spec = rational_spec("1", 0)
    mesh = build_sphere_mesh(5)
    n = 12
    part = StripPartition(n, tuple(hue_palette(n, hues=n)))
    cols = render_strips_sphere(spec, mesh, part)
    height = sphere_rings(mesh)
    assert np.any(np.all(cols == SENTINEL, axis=1))
    for lo in (0.9, 0.95, 0.98):
        ring = (height > lo) & ~np.all(cols == SENTINEL, axis=1)
        assert len({tuple(c) for c in cols[ring]}) == n


def test_sphere_constant_rho_single_bin():
    mesh = build_sphere_mesh(3)
    cols = render_strips_sphere(ConstantRho(), mesh, StripPartition())
    regular = ~np.all(cols == SENTINEL, axis=1)
    assert len({tuple(c) for c in cols[regular]}) == 1


def test_sphere_exponential_strips_cluster_at_infinity():
    spec = FieldSpec.from_expression(parse("exp(z)"), 0)
    mesh = build_sphere_mesh(5)
    n = 24
    part = StripPartition(n, tuple(hue_palette(n, hues=n)))
    cols = render_strips_sphere(spec, mesh, part)
    height = sphere_rings(mesh)
    cap = {tuple(c) for c in cols[(height > 0.8) & ~np.all(cols == SENTINEL, axis=1)]}
    band = {tuple(c) for c in cols[np.abs(height) < 0.1]}
    assert len(cap) > len(band)


def test_sphere_render_deterministic():
    spec = rational_spec("z*(2*z-i)^2/(2*z+i)^2")
    mesh = build_sphere_mesh(6)
    a = render_strips_sphere(spec, mesh, StripPartition(), workers=1)
    b = render_strips_sphere(spec, mesh, StripPartition(), workers=4)
    assert np.array_equal(a, b)


def test_colored_ply_layout():
    mesh = build_sphere_mesh(0)
    cols = render_strips_sphere(rational_spec("1", 0), mesh, StripPartition())
    text = mesh.to_ply(cols).decode().splitlines()
    assert text[:3] == ["ply", "format ascii 1.0", "element vertex 6"]
    assert "property uchar red" in text and text[text.index("end_header") + 7].count(" ") == 6
    assert len(text) == text.index("end_header") + 1 + 6 + 8


# -- phase portraits ------------------------------------------------------------------

def winding(image, region, radius=1.0, samples=720):
    """Net number of hue-wheel turns along a circle about 0."""
    t = 2 * np.pi * np.arange(samples) / samples
    hues = []
    for z in radius * np.exp(1j * t):
        r, c = region.pixel_of(z)
        rgb = image.pixels[r, c] / 255.0
        hues.append(colorsys.rgb_to_hsv(*rgb)[0])
    d = np.diff(np.r_[hues, hues[0]])
    d = (d + 0.5) % 1.0 - 0.5
    return int(round(d.sum()))


@pytest.mark.parametrize("text,turns", [("z", 1), ("z^2", 2), ("1/z", -1), ("z^3", 3)])
def test_phase_portrait_winding(text, turns):
    region = RasterRegion(-2, 2, -2, 2, 401, 401)
    image = render_phase_portrait(parse(text), region)
    assert winding(image, region) == turns


def test_phase_portrait_colours():
    region = RasterRegion(-1, 1, -1, 1, 3, 3)
    image = render_phase_portrait(parse("z"), region)
    assert tuple(image.pixels[1, 2]) == (255, 0, 0)  # arg 0 is red
    assert tuple(image.pixels[1, 1]) == SENTINEL  # zero of fn


def test_phase_golden_hash():
    image = render_phase_portrait(parse("z^2"), RasterRegion(-2, 2, -2, 2, 32, 32))
    assert sha(image.to_ppm()) == GOLDEN_PHASE_Z2


def test_phase_deterministic_across_workers():
    region = RasterRegion(-2, 2, -2, 2, 90, 70)
    a = render_phase_portrait(parse("(z^2-1)/(z+i)"), region, workers=1).to_ppm()
    b = render_phase_portrait(parse("(z^2-1)/(z+i)"), region, workers=3).to_ppm()
    assert a == b
