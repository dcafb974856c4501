import csv
import itertools

import numpy as np
import pytest

from gigaqbx.mesh import (DegenerateElementError, SurfaceDiscretization, bisect, gen_sphere,
                          gen_urchin, load_mesh, make_quadrature, principal_curvatures,
                          save_mesh, stretch_factor, upsample, write_element_diagnostics)
from gigaqbx.mesh.discretization import affine_from_vertices, child_vertices
from gigaqbx.mesh.generators import RefinementDidNotConverge, urchin_radius
from gigaqbx.mesh.reference import (EQ_VERTICES, biunit_to_eq, eq_to_biunit, quadrature_rule,
                                    reference_element, vandermonde)

BIUNIT = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])


def element_from_map(fn, verts, order):
    """Nodes of the degree-``order`` interpolant of ``fn`` over the flat triangle ``verts``."""
    flat = affine_from_vertices(np.asarray(verts, dtype=np.float64), reference_element(order).nodes)
    return fn(flat)


def sphere_cap(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def cylinder(x, radius=2.0):
    u, v = x[..., 0], x[..., 1]
    return np.stack([radius * np.cos(u / radius), radius * np.sin(u / radius), v], axis=-1)


CAP = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) * 0.3 + [0.4, 0.4, 0.4]


def random_ref_points(rng, n):
    """Uniform random points inside the equilateral reference triangle."""
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    v = EQ_VERTICES
    return v[0] + u[:, :1] * (v[1] - v[0]) + u[:, 1:] * (v[2] - v[0])


# {{{ stretch factor

@pytest.mark.parametrize("s", [0.1, 1.0, 3.7])
def test_stretch_scaled_reference(s, rng):
    verts = np.c_[s * EQ_VERTICES, np.zeros(3)]
    nodes = element_from_map(lambda x: x, verts, 3)
    for pt in random_ref_points(rng, 10):
        assert stretch_factor(nodes, pt, 3) == pytest.approx(2 * s, rel=1e-12)


def test_stretch_affine_constant(rng):
    verts = rng.normal(size=(3, 3))
    nodes = element_from_map(lambda x: x, verts, 4)
    vals = [stretch_factor(nodes, pt, 4) for pt in random_ref_points(rng, 20)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)


def test_stretch_finite_difference(rng):
    order = 6
    nodes = element_from_map(sphere_cap, CAP, order)
    disc = SurfaceDiscretization(order, nodes[None])
    h = 1e-6
    for pt in random_ref_points(rng, 10) * 0.9:
        cols = []
        for e in np.eye(2):
            xp = disc.map_points(eq_to_biunit(pt + h * e)[None])[0, 0]
            xm = disc.map_points(eq_to_biunit(pt - h * e)[None])[0, 0]
            cols.append((xp - xm) / (2 * h))
        want = 2 * np.linalg.svd(np.array(cols).T, compute_uv=False)[0]
        assert stretch_factor(nodes, pt, order) == pytest.approx(want, rel=1e-6)


def _permuted(fn, verts, perm, order):
    return element_from_map(fn, np.asarray(verts)[list(perm)], order)


def _bary_to_eq(b):
    return b @ EQ_VERTICES


@pytest.mark.parametrize("perm", list(itertools.permutations(range(3))))
def test_stretch_vertex_order_invariant(perm, rng):
    order = 5
    base = element_from_map(sphere_cap, CAP, order)
    other = _permuted(sphere_cap, CAP, perm, order)
    for b in rng.dirichlet(np.ones(3), 5):
        # the same physical point has permuted barycentric coordinates
        b2 = np.empty(3)
        b2[np.arange(3)] = b[list(perm)]
        assert stretch_factor(other, _bary_to_eq(b2), order) == pytest.approx(
            stretch_factor(base, _bary_to_eq(b), order), rel=1e-8)


def test_stretch_degenerate():
    nodes = element_from_map(lambda x: x, [[0, 0, 0], [1, 0, 0], [2, 0, 0]], 2)
    with pytest.raises(DegenerateElementError):
        stretch_factor(nodes, [0.0, 0.0], 2)

# }}}


# {{{ curvature

def test_curvature_unit_sphere():
    disc = gen_sphere(1.0, 3, order=8)
    for k in (0, 100, 700):
        k1, k2 = principal_curvatures(disc.nodes[k], [0.1, 0.05], 8)
        assert k1 == pytest.approx(1.0, abs=1e-6) and k2 == pytest.approx(1.0, abs=1e-6)


def test_curvature_flat(rng):
    nodes = element_from_map(lambda x: x, rng.normal(size=(3, 3)), 3)
    k1, k2 = principal_curvatures(nodes, [0.0, 0.0], 3)
    assert abs(k1) < 1e-10 and abs(k2) < 1e-10


def test_curvature_cylinder():
    verts = np.array([[0.0, 0.0, 0], [0.3, 0.0, 0], [0.1, 0.3, 0]])
    nodes = element_from_map(cylinder, verts, 8)
    k = sorted(abs(v) for v in principal_curvatures(nodes, [0.0, 0.0], 8))
    assert k[0] == pytest.approx(0.0, abs=1e-6) and k[1] == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("perm", list(itertools.permutations(range(3))))
def test_curvature_parametrization_invariant(perm, rng):
    order = 6
    verts = np.array([[0.0, 0.0, 0], [0.4, 0.1, 0], [0.1, 0.4, 0]])
    base = element_from_map(cylinder, verts, order)
    other = _permuted(cylinder, verts, perm, order)
    for b in rng.dirichlet(np.ones(3), 4):
        b2 = b[list(perm)]
        # odd permutations flip the normal and hence the curvature signs
        a = sorted(np.abs(principal_curvatures(base, _bary_to_eq(b), order)))
        c = sorted(np.abs(principal_curvatures(other, _bary_to_eq(b2), order)))
        np.testing.assert_allclose(c, a, atol=1e-8)


def test_curvature_needs_quadratic():
    nodes = element_from_map(lambda x: x, CAP, 1)
    with pytest.raises(ValueError):
        principal_curvatures(nodes, [0.0, 0.0], 1)


def test_sphere_curvature_sign_outward():
    disc = gen_sphere(2.0, 1, order=4)
    k1, k2 = disc.curvatures_at()
    assert np.all(k1 > 0) and np.all(k2 > 0)
    n = disc.normals()
    assert np.all(np.einsum("kpd,kpd->kp", n, disc.nodes) > 0)

# }}}


# {{{ bisection

def test_bisect_no_flags():
    disc = gen_sphere(1.0, 0, 3)
    assert bisect(disc, np.zeros(disc.nelements, bool)) is disc


def test_bisect_flat_halves_eta():
    verts = np.c_[EQ_VERTICES, np.zeros(3)]
    disc = SurfaceDiscretization(4, element_from_map(lambda x: x, verts, 4)[None])
    kids = bisect(disc, [True])
    assert kids.nelements == 4
    np.testing.assert_allclose(kids.eta, disc.eta[0] / 2, rtol=1e-13)
    assert list(kids.parent) == [0, 0, 0, 0] and list(kids.root) == [0, 0, 0, 0]


def test_bisect_curved_eta_within_ten_percent():
    disc = gen_sphere(1.0, 0, 6)
    kids = bisect(disc, np.ones(disc.nelements, bool))
    ratio = kids.eta / disc.eta[kids.parent]
    assert np.all(np.abs(ratio - 0.5) <= 0.05)


def _locate(verts2d, pts):
    """Bi-unit coordinates of ``pts`` with respect to the triangle ``verts2d``."""
    v0, v1, v2 = verts2d
    A = np.c_[v1 - v0, v2 - v0] / 2
    return np.linalg.solve(A, (pts - v0).T).T - 1


def test_bisect_reproduces_parent(rng):
    order = 5
    disc = SurfaceDiscretization(order, element_from_map(sphere_cap, CAP, order)[None])
    kids = bisect(disc, [True])
    pts = eq_to_biunit(random_ref_points(rng, 50))
    parent_vals = disc.map_points(pts)[0]
    for i, x in enumerate(pts):
        for c, cv in enumerate(child_vertices(BIUNIT)):
            loc = _locate(cv, x)
            if loc.min() >= -1 - 1e-12 and loc.sum() <= 1e-12:
                got = kids.map_points(loc[None], elements=[c])[0, 0]
                np.testing.assert_allclose(got, parent_vals[i], atol=1e-10)
                break
        else:
            pytest.fail("point not covered by any child")


def test_bisect_partial_genealogy():
    disc = gen_sphere(1.0, 0, 2)
    flags = np.zeros(20, bool)
    flags[[3, 7]] = True
    kids = bisect(disc, flags)
    assert kids.nelements == 26
    assert sorted(np.bincount(kids.parent)) == [1] * 18 + [4, 4]
    again = bisect(kids, kids.parent == 3)
    assert set(again.root[again.parent < 0]) == set()
    assert np.all(np.isin(again.root[again.parent >= 0], np.arange(20)))


def test_bisect_flag_length():
    with pytest.raises(ValueError):
        bisect(gen_sphere(1.0, 0, 2), [True])

# }}}


# {{{ interpolation and quadrature

def test_vandermonde_condition():
    for order in range(1, 11):
        assert reference_element(order).condition_number() <= 1e6


@pytest.mark.parametrize("q", [1, 4, 9, 21, 35])
def test_quadrature_rule_exactness(q):
    rs, w = quadrature_rule(q)
    assert w.sum() == pytest.approx(2.0, rel=1e-14)
    # integral over the bi-unit triangle of (1+r)^a (1+s)^b is 2^(a+b+2) a! b! / (a+b+2)!
    from math import factorial
    for a in range(q):
        for b in range(q - a):
            want = 2 ** (a + b + 2) * factorial(a) * factorial(b) / factorial(a + b + 2)
            got = w @ ((1 + rs[:, 0]) ** a * (1 + rs[:, 1]) ** b)
            assert got == pytest.approx(want, rel=1e-12)


def test_upsample_constant():
    disc = gen_sphere(1.0, 1, 4)
    out = upsample(disc, np.ones(disc.nnodes), 9)
    np.testing.assert_allclose(out, 1.0, rtol=1e-13)


def test_upsample_polynomial_exact(rng):
    order = 5
    disc = gen_sphere(1.0, 0, order)
    deg = [(a, b) for a in range(order + 1) for b in range(order + 1 - a)]
    coef = rng.normal(size=len(deg))

    def poly(rs):
        return sum(c * rs[..., 0] ** a * rs[..., 1] ** b for c, (a, b) in zip(coef, deg))

    vals = np.tile(poly(disc.ref.nodes), (disc.nelements, 1))
    rs, _ = quadrature_rule(13)
    np.testing.assert_allclose(upsample(disc, vals, 13), np.tile(poly(rs), (disc.nelements, 1)),
                               atol=1e-12 * np.abs(coef).sum())


def test_upsample_ill_conditioned():
    disc = gen_sphere(1.0, 0, 4)
    with pytest.raises(np.linalg.LinAlgError):
        upsample(disc, np.ones(disc.nnodes), 5, vdm_cond_max=1.0)


def test_upsampled_sphere_area():
    disc = gen_sphere(1.0, 3, 6)
    quad = make_quadrature(disc, 15)
    assert quad.weights.sum() == pytest.approx(4 * np.pi, rel=1e-8)


def test_biunit_eq_roundtrip(rng):
    pts = rng.normal(size=(20, 2))
    np.testing.assert_allclose(eq_to_biunit(biunit_to_eq(pts)), pts, atol=1e-14)
    np.testing.assert_allclose(biunit_to_eq(BIUNIT), EQ_VERTICES, atol=1e-15)


def test_vandermonde_orthonormal():
    order = 6
    rs, w = quadrature_rule(2 * order + 1)
    V = vandermonde(order, rs)
    np.testing.assert_allclose(V.T @ (w[:, None] * V), np.eye(V.shape[1]), atol=1e-12)

# }}}


# {{{ generators

@pytest.mark.parametrize("level, count", [(0, 20), (1, 80), (2, 320)])
def test_sphere_counts(level, count):
    assert gen_sphere(1.0, level, 4).nelements == count


def test_sphere_area():
    quad = make_quadrature(gen_sphere(1.0, 2, 4), 11)
    assert quad.weights.sum() == pytest.approx(4 * np.pi, abs=1e-6 * 4 * np.pi)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_urchin_radius_range(k, rng):
    d = rng.normal(size=(200_000, 3))
    r = urchin_radius(k, d)
    assert r.min() == pytest.approx(0.2, abs=1e-3)
    assert r.max() == pytest.approx(1.2, abs=1e-3)
    assert r.min() >= 0.2 - 1e-12 and r.max() <= 1.2 + 1e-12


def test_urchin_gamma2_fixpoint():
    disc = gen_urchin(2, 1e-10)
    # regression baseline for the degree-8 adaptive urchin
    assert disc.nelements == 4856



@pytest.mark.parametrize("k", [2, 3])
def test_urchin_normals_outward(k):
    # a radial graph with positive radius has n . x > 0 everywhere, troughs included
    disc = gen_urchin(k, 1e-4, order=4)
    for rs in (None, disc.sample_points()):
        n = disc.normals(rs)
        x = disc.nodes if rs is None else disc.map_points(rs)
        assert np.all(np.einsum("kpd,kpd->kp", n, x) > 0)

def test_urchin_tolerance_monotone():
    counts = [gen_urchin(2, tol).nelements for tol in (1e-2, 1e-4, 1e-6, 1e-10)]
    assert counts == sorted(counts)


def test_urchin_errors():
    with pytest.raises(ValueError):
        gen_urchin(0)
    with pytest.raises(RefinementDidNotConverge) as err:
        gen_urchin(3, 1e-14, max_depth=1)
    assert err.value.elements.size > 0


def test_urchin_on_surface():
    disc = gen_urchin(3, 1e-6)
    pts = disc.points
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), urchin_radius(3, pts), rtol=1e-12)

# }}}


# {{{ container

def test_mesh_roundtrip(tmp_path):
    disc = bisect(gen_sphere(1.5, 1, 3), np.arange(80) % 7 == 0)
    path = tmp_path / "m.gqbx"
    save_mesh(path, disc)
    back = load_mesh(path)
    assert back.order == disc.order and back.stage == disc.stage
    np.testing.assert_array_equal(back.nodes, disc.nodes)
    np.testing.assert_array_equal(back.parent, disc.parent)
    np.testing.assert_array_equal(back.root, disc.root)
    np.testing.assert_array_equal(back.ref_vertices, disc.ref_vertices)


def test_mesh_bad_magic(tmp_path):
    p = tmp_path / "junk"
    p.write_bytes(b"notamesh" + bytes(16))
    with pytest.raises(ValueError):
        load_mesh(p)


def test_element_diagnostics(tmp_path):
    disc = gen_sphere(1.0, 1, 4)
    path = tmp_path / "el.csv"
    write_element_diagnostics(path, disc)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 80
    np.testing.assert_allclose([float(r["eta"]) for r in rows], disc.eta, rtol=1e-15)

# }}}
