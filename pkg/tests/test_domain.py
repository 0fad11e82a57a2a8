import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tetra.domain import (
    Status,
    TetraPoint,
    boundary_samples,
    criterion_slack,
    inscribed_polydisk_radius,
    member,
    on_distinguished_boundary,
    polydisk_inside,
    polydisk_spot_check,
    sample_distinguished_boundary,
    witness_search,
    worst_torus_point,
)
from tetra.errors import InvalidInputError
from tetra.linalg import operator_norm, random_unitary

coord = st.complex_numbers(max_magnitude=1.2, allow_nan=False, allow_infinity=False)


def test_origin_is_interior():
    v = member(TetraPoint(0, 0, 0))
    assert v.status is Status.INTERIOR
    assert v.margin == pytest.approx(1.0)
    np.testing.assert_allclose(v.witness, np.zeros((2, 2)))


def test_unit_x3_is_boundary_with_unitary_witness():
    v = member(TetraPoint(0, 0, 1))
    assert v.status is Status.BOUNDARY
    W = v.witness
    np.testing.assert_allclose(W, [[0, 1], [-1, 0]], atol=1e-9)
    assert abs(W[0, 0] * W[1, 1] - W[0, 1] * W[1, 0] - 1) < 1e-12


def test_far_point_is_outside():
    v = member(TetraPoint(0.9, 0.9, 0))
    assert v.status is Status.OUTSIDE
    assert v.witness is None
    assert 1.0 - v.margin >= 1.8 - 1e-9


def test_nonfinite_point_rejected():
    with pytest.raises(InvalidInputError):
        TetraPoint(float("nan"), 0, 0)


@given(coord, coord, coord)
def test_witness_realises_the_point(x1, x2, x3):
    v = member(TetraPoint(x1, x2, x3))
    if v.witness is not None:
        W = v.witness
        assert abs(W[0, 0] - x1) < 1e-12 and abs(W[1, 1] - x2) < 1e-12
        assert abs(W[0, 0] * W[1, 1] - W[0, 1] * W[1, 0] - x3) < 1e-9
        assert operator_norm(W) == pytest.approx(1.0 - v.margin, abs=1e-9)


@given(coord, coord, coord)
def test_status_invariant_under_swap(x1, x2, x3):
    p = TetraPoint(x1, x2, x3)
    a, b = member(p), member(p.swapped())
    assert a.margin == pytest.approx(b.margin, abs=1e-9)
    assert criterion_slack(x1, x2, x3) == pytest.approx(criterion_slack(x2, x1, x3), abs=1e-12)


@given(coord, coord, coord)
def test_criterion_matches_witness_away_from_boundary(x1, x2, x3):
    v = member(TetraPoint(x1, x2, x3))
    if abs(v.margin) > 1e-6:
        assert (v.criterion_slack > 0) == (v.status is Status.INTERIOR)


def test_witness_search_vectorised_matches_scalar(rng):
    z = rng.standard_normal((50, 3)) * 0.5 + 1j * rng.standard_normal((50, 3)) * 0.5
    norms, _ = witness_search(z[:, 0], z[:, 1], z[:, 2])
    for k in range(0, 50, 7):
        single, _ = witness_search(*z[k])
        assert float(single) == pytest.approx(norms[k], abs=1e-13)


def test_witness_min_is_global(rng):
    # the minimiser over t is unique; a coarse scan must not beat it
    x1, x2, x3 = 0.3 + 0.1j, -0.2j, 0.4
    best, _ = witness_search(x1, x2, x3)
    p = x1 * x2 - x3
    for t in np.geomspace(1e-3, 1e3, 2001):
        assert operator_norm([[x1, t], [p / t, x2]]) >= float(best) - 1e-12


def test_distinguished_boundary_examples():
    assert on_distinguished_boundary(TetraPoint(0, 0, 1))
    assert not on_distinguished_boundary(TetraPoint(0, 0, 0))
    for seed in range(5):
        U = random_unitary(2, seed)
        assert on_distinguished_boundary(TetraPoint(U[0, 0], U[1, 1], np.linalg.det(U)))


def test_boundary_samples_shape_and_geometry():
    pts = sample_distinguished_boundary(100, 4)
    assert len(pts) == 100
    for p in pts:
        assert abs(abs(p.x3) - 1) <= 1e-10
        assert member(p).in_closure
        assert abs(p.x2 - np.conj(p.x1) * p.x3) <= 1e-12


def test_boundary_samples_reach_the_rim():
    pts = boundary_samples(10_000, 0)
    assert np.max(np.abs(pts[:, 0])) >= 0.99


def test_boundary_samples_are_prefix_consistent():
    a = boundary_samples(3000, 9)
    b = boundary_samples(1500, 9)
    np.testing.assert_array_equal(a[:1500], b)
    assert not np.array_equal(boundary_samples(10, 10), b[:10])


def test_inscribed_radius_is_one_third():
    r = inscribed_polydisk_radius(1e-6)
    assert abs(r - 1.0 / 3.0) <= 1e-6
    assert r <= 1.0 / 3.0


def test_polydisk_below_radius_fits():
    r = inscribed_polydisk_radius(1e-6)
    assert polydisk_inside(r - 1e-6)
    assert polydisk_spot_check(r - 1e-6, 100_000, seed=1) == 0


def test_half_radius_rejected_with_witness():
    assert not polydisk_inside(0.5)
    v = member(TetraPoint(0.5, -0.5, 0.5))
    assert v.status is Status.OUTSIDE
    viol, phases = worst_torus_point(0.5)
    assert viol > 0


def test_worst_direction_is_r_minus_r_r():
    r = 1.0 / 3.0
    assert criterion_slack(r, -r, r) == pytest.approx(0.0, abs=1e-15)
    viol, _ = worst_torus_point(r)
    assert abs(viol) < 1e-9


def test_radius_tolerance_validated():
    with pytest.raises(InvalidInputError):
        inscribed_polydisk_radius(0.5)
