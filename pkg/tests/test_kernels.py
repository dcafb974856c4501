import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gigaqbx.kernels import (CoincidentPointError, SourceEnsemble, direct_sum,
                             laplace_dipole, laplace_green)

INV_4PI = 1 / (4 * np.pi)

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


@pytest.mark.parametrize("x, y, expected", [
    ((0, 0, 0), (0, 0, 1), 1 / (4 * np.pi)),
    ((0, 0, 0), (0, 0, 2), 1 / (8 * np.pi)),
    ((1, 1, 1), (2, 3, 3), 1 / (12 * np.pi)),
])
def test_green_values(x, y, expected):
    assert laplace_green(x, y) == pytest.approx(expected, rel=1e-15)


def test_green_hand_distance():
    # |(2,3,3) - (1,1,1)| = sqrt(1 + 4 + 4) = 3
    assert laplace_green((1, 1, 1), (2, 3, 3)) == pytest.approx(INV_4PI / 3, rel=1e-15)
    assert laplace_green((0, 0, 0), (0, 0, 1)) == pytest.approx(0.0795775, abs=1e-7)


def test_green_coincident():
    with pytest.raises(CoincidentPointError):
        laplace_green((1, 2, 3), (1, 2, 3))
    with pytest.raises(CoincidentPointError):
        laplace_dipole((1, 2, 3), (1, 2, 3), (0, 0, 1))


def test_green_symmetry(rng):
    x = rng.normal(size=(10_000, 3))
    y = rng.normal(size=(10_000, 3))
    for a, b in zip(x, y):
        assert laplace_green(a, b) == laplace_green(b, a)


def _stencil(x, y, h):
    """Undivided 7-point Laplacian stencil of ``G(., y)`` at ``x``."""
    lap = -6 * laplace_green(x, y)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        lap += laplace_green(x + e, y) + laplace_green(x - e, y)
    return lap


def test_green_harmonic(rng):
    y = rng.normal(size=3)
    for _ in range(200):
        d = rng.normal(size=3)
        x = y + d / np.linalg.norm(d) * rng.uniform(0.5, 3)
        assert abs(_stencil(x, y, 1e-3)) <= 1e-6


def test_green_harmonic_second_order(rng):
    # the scaled stencil is pure truncation error: O(h^2), vanishing as h -> 0
    y = np.zeros(3)
    for _ in range(20):
        d = rng.normal(size=3)
        x = d / np.linalg.norm(d) * rng.uniform(0.5, 3)
        coarse = _stencil(x, y, 2e-2) / 2e-2**2
        fine = _stencil(x, y, 1e-2) / 1e-2**2
        assert fine / coarse == pytest.approx(0.25, abs=0.01)


def test_dipole_axial():
    assert laplace_dipole((0, 0, 1), (0, 0, 0), (0, 0, 1)) == pytest.approx(INV_4PI, rel=1e-15)


def test_dipole_orthogonal():
    assert laplace_dipole((0, 0, 1), (0, 0, 0), (1, 0, 0)) == 0.0


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec)
def test_dipole_finite_difference(x, y, m):
    if np.linalg.norm(x - y) < 0.5 or np.linalg.norm(m) < 1e-3:
        return
    h = 1e-5
    fd = (laplace_green(x, y + h * m) - laplace_green(x, y - h * m)) / (2 * h)
    exact = laplace_dipole(x, y, m)
    assert exact == pytest.approx(fd, rel=1e-6, abs=1e-12 * np.linalg.norm(m))


def test_direct_sum_unit():
    src = SourceEnsemble([[0, 0, 0]], [1.0])
    assert direct_sum(src, [[0, 0, 1]])[0] == pytest.approx(0.0795775, abs=1e-7)


def test_direct_sum_zero_weights(rng):
    src = SourceEnsemble(rng.normal(size=(20, 3)), np.zeros(20))
    assert np.all(direct_sum(src, rng.normal(size=(7, 3)) + 5) == 0)


def test_direct_sum_pairwise(rng):
    pos = rng.normal(size=(10, 3))
    w = rng.normal(size=10)
    dip = rng.normal(size=(10, 3))
    tgt = rng.normal(size=(5, 3)) + 4
    got = direct_sum(SourceEnsemble(pos, w, dip), tgt)
    want = [sum(w[j] * laplace_green(t, pos[j]) + laplace_dipole(t, pos[j], dip[j]) for j in range(10))
            for t in tgt]
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_direct_sum_superposition(rng):
    pos = rng.normal(size=(50, 3))
    tgt = rng.normal(size=(30, 3)) + 3
    w1, w2 = rng.normal(size=50), rng.normal(size=50)
    a, b = 0.7, -1.3
    lhs = direct_sum(SourceEnsemble(pos, a * w1 + b * w2), tgt)
    rhs = a * direct_sum(SourceEnsemble(pos, w1), tgt) + b * direct_sum(SourceEnsemble(pos, w2), tgt)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-13 * np.abs(lhs).max())


def test_direct_sum_reports_pair(rng):
    pos = rng.normal(size=(6, 3))
    tgt = np.vstack([rng.normal(size=(3, 3)) + 10, pos[4]])
    with pytest.raises(CoincidentPointError) as err:
        direct_sum(SourceEnsemble(pos, np.ones(6)), tgt)
    assert err.value.pair == (3, 4)


@pytest.mark.parametrize("bad", [
    dict(positions=[[0, 0, np.nan]], weights=[1.0]),
    dict(positions=[[0, 0, 0]], weights=[np.inf]),
    dict(positions=[[0, 0, 0]], weights=[1.0, 2.0]),
    dict(positions=[[0, 0, 0]], weights=[1.0], dipole_moments=[[0, 0, 1], [0, 0, 1]]),
])
def test_source_ensemble_invariants(bad):
    with pytest.raises(ValueError):
        SourceEnsemble(**bad)


def test_total_strength():
    assert SourceEnsemble(np.zeros((3, 3)), [1.0, -2.0, 0.5]).total_strength() == 3.5
