import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import inverse_norm_by_subsets, is_frame_by_subsets
from phaseless.errors import CandidatesInsufficient, LocalDependence, UnsupportedGenerator
from phaseless.fixtures import PHI1_FRAME_SCALED, gamma0, phi1_frame, synthetic_system
from phaseless.generators import bspline, fixture, k_set, overlap_set, phi_matrix, tensor, zwart_powell
from phaseless.regions import interval, lower_triangle, unit_cube, upper_triangle
from phaseless.sampling import (
    build_patch_system,
    check_coverage,
    covered_shifts,
    default_regions,
    edge_witness,
    grid_candidates,
    is_phase_retrievable_frame,
    local_complement_property,
    outer_products_span,
    outer_space_dim,
    outer_vectors,
    phi_inverse_norm,
    reproduction_weights,
    sampling_density,
    select_spanning_offsets,
)

# regression pins of values computed by this implementation
GAMMA0_NORM = 2796.1946332977855
ZP_SPANNING_NORM = 87.9419147144889


def test_outer_vectors_span_matches_matrix_span():
    rng = np.random.default_rng(0)
    V = rng.standard_normal((8, 3))
    W = outer_vectors(V)
    assert W.shape == (8, 6)
    flat = np.array([np.outer(v, v).ravel() for v in V])
    assert np.linalg.matrix_rank(W) == np.linalg.matrix_rank(flat) == 6


def test_outer_space_dims():
    assert outer_space_dim(tensor(3, 3), unit_cube(2)) == 25
    assert outer_space_dim(zwart_powell(), upper_triangle()) == 13
    assert outer_space_dim(zwart_powell(), lower_triangle()) == 13
    # quadratic B-spline on (0,1): three shifts, polynomials of degree <= 4
    assert outer_space_dim(bspline(3), interval(0, 1)) == 5


def test_phi1_frame():
    M = phi1_frame()
    np.testing.assert_array_equal(M, PHI1_FRAME_SCALED / 250)
    assert is_phase_retrievable_frame(M.T)
    assert not outer_products_span(M.T, 6)


@pytest.mark.parametrize(
    "vectors, expected",
    [
        ([[1, 0], [0, 1], [1, 1]], True),
        ([[1, 0], [0, 1]], False),
        ([[1, 0], [2, 0], [0, 1], [0, 3]], False),
        ([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1]], False),
        ([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1], [1, 0, 1], [1, 1, 1]], True),
    ],
)
def test_frame_small_cases(vectors, expected):
    assert is_phase_retrievable_frame(np.array(vectors, dtype=float)) is expected


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 2**32 - 1), st.booleans())
def test_frame_matches_subset_oracle(d, extra, seed, degenerate):
    rng = np.random.default_rng(seed)
    V = rng.integers(-2, 3, (d + extra, d)).astype(float)
    if degenerate and d > 1:
        V[:, -1] = 0.0
    assert is_phase_retrievable_frame(V) is is_frame_by_subsets(V)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_inverse_norm_matches_subset_oracle(c, extra, seed):
    M = np.random.default_rng(seed).standard_normal((c + extra, c))
    expected = inverse_norm_by_subsets(M)
    got = phi_inverse_norm([M])
    if np.isinf(expected):
        assert np.isinf(got)
    else:
        assert got == pytest.approx(expected, rel=1e-9)


def test_inverse_norm_is_max_over_patches():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    b = 2 * a
    assert phi_inverse_norm([a, b]) == pytest.approx(max(phi_inverse_norm([a]), phi_inverse_norm([b])))
    assert phi_inverse_norm([b]) == pytest.approx(phi_inverse_norm([a]) / 2)
    assert phi_inverse_norm(synthetic_system(a)) == pytest.approx(inverse_norm_by_subsets(a))
    # a repeated basis is not phase retrievable: some split leaves both sides singular
    assert np.isinf(phi_inverse_norm([np.eye(2)[[0, 1, 0, 1]]]))


def test_gamma0_norm(g0_system):
    assert phi_inverse_norm(g0_system) == pytest.approx(2796.2, rel=1e-2)
    assert phi_inverse_norm(g0_system) == pytest.approx(GAMMA0_NORM, rel=1e-6)
    assert sampling_density(g0_system) == 25
    assert len(g0_system.patches[0].omega) == 9


def test_zp_spanning_design():
    P = build_patch_system(zwart_powell())
    assert [p.rows for p in P.patches] == [13, 13]
    assert phi_inverse_norm(P) == pytest.approx(ZP_SPANNING_NORM, rel=1e-6)
    assert phi_inverse_norm(P) == pytest.approx(87.9420, abs=1e-3)


def test_spanning_selection_needs_enough_candidates():
    with pytest.raises(CandidatesInsufficient):
        select_spanning_offsets(tensor(3, 3), unit_cube(2), gamma0()[:10])
    gam = select_spanning_offsets(tensor(3, 3), unit_cube(2), grid_candidates(unit_cube(2), 6))
    assert len(gam) == 25


def test_default_regions():
    assert [A.name for A in default_regions(tensor(3, 3))] == [unit_cube(2).name]
    assert {A for A in default_regions(zwart_powell())} == {upper_triangle(), lower_triangle()}
    with pytest.raises(UnsupportedGenerator):
        default_regions(fixture("phi0"))


def test_coverage():
    check_coverage(zwart_powell(), [upper_triangle(), lower_triangle()])
    check_coverage(tensor(3, 3), [unit_cube(2)])
    assert covered_shifts(zwart_powell(), default_regions(zwart_powell())) >= set(overlap_set(zwart_powell()).shifts)


def test_frame_design_is_seeded_and_phase_retrievable(zp_frame_system):
    P = zp_frame_system
    Q = build_patch_system(zwart_powell(), mode="frame", seed=0)
    for p, q in zip(P.patches, Q.patches):
        np.testing.assert_array_equal(p.gamma, q.gamma)
        assert is_phase_retrievable_frame(p.matrix)
        assert p.region.contains(p.gamma).all()
    assert np.isfinite(P.phi_inv_norm)


def test_edge_witness(g0_system):
    y = edge_witness(g0_system, (0, 0), (2, 1))
    assert y is not None
    vals = phi_matrix(tensor(3, 3), y, [(0, 0), (2, 1)])
    assert np.all(np.abs(vals) > 0)
    assert edge_witness(g0_system, (0, 0), (3, 0)) is None


def test_reproduction_identity(g0_system):
    rng = np.random.default_rng(4)
    p = g0_system.patches[0]
    G = p.matrix
    for _ in range(20):
        x = rng.uniform(0, 1, (1, 2))
        c = rng.standard_normal(len(p.omega))
        d = reproduction_weights(g0_system, x)
        fx = phi_matrix(tensor(3, 3), x, p.omega)[0] @ c
        assert fx**2 == pytest.approx(np.dot(d, (G @ c) ** 2), abs=1e-8)


@pytest.mark.parametrize(
    "g, A, expected",
    [
        (tensor(3, 3), unit_cube(2), True),
        (zwart_powell(), unit_cube(2), False),
        (zwart_powell(), upper_triangle(), True),
        (bspline(3), interval(0, 1), True),
        (fixture("phi0"), interval(0, 1), False),
        (fixture("phi0"), interval(0, 0.5), True),
        (fixture("phi0_dilated"), interval(-0.5, 0.5), False),
    ],
)
def test_local_complement_property(g, A, expected):
    assert local_complement_property(g, A) is expected


def test_local_dependence_rejected_for_spanning_design():
    with pytest.raises((LocalDependence, UnsupportedGenerator)):
        build_patch_system(fixture("phi0"))


def test_k_set_matches_design_windows(zp_frame_system):
    for p in zp_frame_system.patches:
        assert sorted(p.omega) == sorted(k_set(zwart_powell(), p.region))
