import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import min_sign_residual
from phaseless.errors import NonFiniteInput, PhaseConflict, RankDeficientPatch
from phaseless.fixtures import synthetic_system
from phaseless.generators import bspline, k_set, phi_matrix, tensor, zwart_powell
from phaseless.harness import box_shifts, random_signal, sample_with_noise
from phaseless.mapset import (
    LocalSolver,
    NoisySamples,
    PatchSolution,
    ReconstructionConfig,
    adjust_phases,
    check_preconditions,
    hard_threshold,
    local_minimize,
    mapset_reconstruct,
    sew,
    stability_bound,
)
from phaseless.regions import interval, unit_cube, upper_triangle


def _patch(seed, g=zwart_powell(), A=upper_triangle(), rows=11):
    rng = np.random.default_rng(seed)
    ks = k_set(g, A)
    return phi_matrix(g, A.random(rng, rows, 1e-3), ks), rng


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(6, 12), st.sampled_from([0.0, 1e-3, 1e-1]))
def test_local_solver_reaches_enumerated_optimum(seed, rows, eps):
    Phi, rng = _patch(seed, rows=rows)
    z = np.abs(Phi @ rng.standard_normal(Phi.shape[1])) + rng.uniform(-eps, eps, rows)
    zc = np.maximum(z, 0)
    c, res = local_minimize(Phi, z)
    assert res == pytest.approx(float(np.sum((np.abs(Phi @ c) - z) ** 2)))
    # clipped data: the objective on zc equals the enumerated least-squares optimum
    assert float(np.sum((np.abs(Phi @ c) - zc) ** 2)) == pytest.approx(min_sign_residual(Phi, zc), abs=1e-10)


@pytest.mark.parametrize("solver", ["exact", "branch", "altmin"])
def test_noiseless_local_recovery(solver):
    Phi, rng = _patch(1, rows=14)
    c0 = rng.uniform(0.1, 1, Phi.shape[1]) * rng.choice([-1, 1], Phi.shape[1])
    z = np.abs(Phi @ c0)
    S = LocalSolver(Phi)
    c = {"exact": S.solve_exact, "branch": lambda z: S.solve_branch(z, rng), "altmin": lambda z: S.solve_altmin(z, rng)}[solver](z)
    assert min(np.abs(c - c0).max(), np.abs(c + c0).max()) < 1e-10


def test_global_sign_normalised():
    Phi, rng = _patch(2)
    c0 = rng.standard_normal(Phi.shape[1])
    c, _ = local_minimize(Phi, np.abs(Phi @ c0))
    v = Phi @ c
    assert v[np.flatnonzero(np.abs(v) > 0)[0]] > 0


def test_solver_input_validation():
    with pytest.raises(RankDeficientPatch):
        LocalSolver(np.ones((4, 2)))
    with pytest.raises(RankDeficientPatch):
        LocalSolver(np.ones((1, 2)))
    with pytest.raises(NonFiniteInput):
        LocalSolver(np.array([[1.0], [np.nan]]))
    S = LocalSolver(np.eye(3)[:, :2])
    with pytest.raises(ValueError):
        S.solve(np.ones(2))
    with pytest.raises(NonFiniteInput):
        S.solve(np.array([1.0, np.inf, 0.0]))
    with pytest.raises(ValueError):
        ReconstructionConfig(m0=-1)


def _sol(key, shifts, coeffs):
    return PatchSolution(key, tuple((k,) for k in shifts), np.array(coeffs, float), 0.0)


def test_adjust_phases_propagates_signs():
    a = _sol(("a",), [0, 1], [1.0, 2.0])
    b = _sol(("b",), [1, 2], [-2.0, -1.0])
    c = _sol(("c",), [2, 3], [1.0, 5.0])
    info = adjust_phases([a, b, c], m0=0.1)
    assert (a.sign, b.sign, c.sign) == (1, -1, 1)
    assert info == {"pairs": 2, "edges": 2, "components": 1}
    d, uncovered = sew([a, b, c], index_set=[(k,) for k in range(5)])
    assert d == {(0,): 1.0, (1,): 2.0, (2,): 1.0, (3,): 5.0, (4,): 0.0}
    assert uncovered == [(4,)]


def test_adjust_phases_detects_conflict():
    a = _sol(("a",), [0, 1, 2], [1.0, 1.0, 0.0])
    b = _sol(("b",), [1, 2], [1.0, 1.0])
    c = _sol(("c",), [0, 2], [-1.0, 1.0])
    with pytest.raises(PhaseConflict) as info:
        adjust_phases([a, b, c], m0=0.01)
    assert info.value.inner < 0


def test_small_overlaps_below_m0_are_ignored():
    a = _sol(("a",), [0, 1], [1.0, 0.01])
    b = _sol(("b",), [1, 2], [-0.01, 1.0])
    info = adjust_phases([a, b], m0=0.01)
    assert info["edges"] == 0 and info["components"] == 2


def test_hard_threshold():
    assert hard_threshold({(0,): 0.05, (1,): -0.2}, 0.1) == {(0,): 0.0, (1,): -0.2}
    np.testing.assert_array_equal(hard_threshold(np.array([0.1, -0.09, 0.0]), 0.1), [0.1, 0.0, 0.0])
    with pytest.raises(ValueError):
        hard_threshold({}, -1)


def test_stability_bound_and_preconditions():
    M = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    P = synthetic_system(M).with_norm(3.0)
    assert stability_bound(P, 1e-3) == pytest.approx(2 * 2 * 3.0 * 1e-3)
    assert check_preconditions(P, F0=0.09, m0=0.02, eps_inf=1e-3) == (True, True)
    assert check_preconditions(P, F0=0.09, m0=0.03, eps_inf=1e-3) == (False, True)
    assert check_preconditions(P, F0=0.09, m0=1e-5, eps_inf=1e-3) == (True, False)


def test_samples_validation():
    with pytest.raises(ValueError):
        NoisySamples(((0,), (1,)), [np.zeros((3, 4))])
    with pytest.raises(NonFiniteInput):
        NoisySamples(((0,),), [np.array([[np.nan]])])


def test_reconstruct_one_dimensional():
    from phaseless.sampling import build_patch_system

    P = build_patch_system(bspline(3), mode="frame", seed=0)
    f = random_signal(bspline(3), ((0,), (12,)), seed=3)
    S = sample_with_noise(f, P, box_shifts((0,), (12,)), 0.0)
    fe = mapset_reconstruct(S, P).signal
    delta = 1 if fe.coeffs[(0,)] * f.coeffs[(0,)] > 0 else -1
    for k, v in f.coeffs.items():
        assert fe.coeffs[k] == pytest.approx(delta * v, abs=1e-10)


def test_reconstruct_is_deterministic_and_thread_invariant(g0_system, monkeypatch):
    K = ((0, 0), (3, 3))
    f = random_signal(tensor(3, 3), K, seed=5)
    S = sample_with_noise(f, g0_system, box_shifts(*K), 1e-4, seed=6)
    cfg = ReconstructionConfig(m0=0.01, seed=7)
    a = mapset_reconstruct(S, g0_system, cfg).to_dict()
    monkeypatch.setenv("SIV_THREADS", "4")
    b = mapset_reconstruct(S, g0_system, cfg).to_dict()
    assert a == b
    assert a["bound"] == pytest.approx(stability_bound(g0_system, 1e-4))


def test_reconstruct_rejects_mismatched_samples(g0_system):
    S = NoisySamples(((0, 0),), [np.zeros((1, 3))])
    with pytest.raises(ValueError):
        mapset_reconstruct(S, g0_system)
