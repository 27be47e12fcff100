import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import inverse_norm_by_subsets, min_sign_residual
from phaseless import kernels
from phaseless.kernels import fallback

BACKENDS = [fallback] + ([kernels.compiled] if kernels.compiled is not None else [])
ids = [b.__name__.rsplit(".", 1)[-1] for b in BACKENDS]

# entries on a 1/16 grid: keeps the oracle's exact ties exact and avoids subnormal scales
finite = st.integers(-48, 48).map(lambda v: v / 16)


def _projector(Phi):
    Q, _ = np.linalg.qr(Phi)
    return np.eye(len(Phi)) - Q @ Q.T


def _matrix_and_z(draw, rmin=3, rmax=9):
    r = draw(st.integers(rmin, rmax))
    c = draw(st.integers(1, max(1, r - 2)))
    Phi = draw(arrays(float, (r, c), elements=finite))
    z = draw(arrays(float, (r,), elements=st.integers(0, 48).map(lambda v: v / 16)))
    # the kernels assume full column rank, as the local solver guarantees
    assume(np.linalg.cond(Phi) < 1e6)
    return Phi, z


@st.composite
def problems(draw):
    return _matrix_and_z(draw)


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
@settings(max_examples=60, deadline=None)
@given(problems())
def test_sign_scan_matches_enumeration(mod, prob):
    Phi, z = prob
    best, signs = mod.sign_scan(_projector(Phi), z)
    assert signs[0] == 1
    assert best == pytest.approx(min_sign_residual(Phi, z), abs=1e-9)
    resid = _projector(Phi) @ (signs * z)
    assert float(resid @ resid) == pytest.approx(best, abs=1e-9)


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
@settings(max_examples=60, deadline=None)
@given(problems())
def test_sign_branch_matches_enumeration(mod, prob):
    Phi, z = prob
    best, signs, nodes, complete = mod.sign_branch(Phi, z, math.inf, 1 << 30)
    assert complete and signs is not None and signs[0] == 1
    expected = min_sign_residual(Phi, z)
    assert best == pytest.approx(expected, abs=1e-8 * (1 + float(z @ z)))


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_sign_branch_respects_bound(mod):
    Phi = np.array([[1.0], [1.0], [1.0]])
    z = np.array([1.0, 1.0, 1.0])
    best, signs, _, complete = mod.sign_branch(Phi, z, 0.0, 1 << 20)
    assert signs is None and complete and best == 0.0


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_split_search_matches_enumeration(mod, c, extra, seed):
    M = np.random.default_rng(seed).standard_normal((c + extra + 1, c))
    best, mask, _, complete = mod.split_search(M, math.inf, 1 << 30)
    assert complete
    expected = inverse_norm_by_subsets(M)
    if math.isinf(expected):
        assert best == 0.0
    else:
        assert 1.0 / math.sqrt(best) == pytest.approx(expected, rel=1e-9)


@pytest.mark.skipif(kernels.compiled is None, reason="extension not built")
@settings(max_examples=40, deadline=None)
@given(problems())
def test_backends_agree(prob):
    Phi, z = prob
    P = _projector(Phi)
    a = kernels.compiled.sign_scan(P, z)
    b = fallback.sign_scan(P, z)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    # patterns may differ only between numerically tied optima
    rb = P @ (a[1] * z)
    assert float(rb @ rb) == pytest.approx(b[0], abs=1e-12)
    sa = kernels.compiled.split_search(Phi, math.inf, 1 << 20)
    sb = fallback.split_search(Phi, math.inf, 1 << 20)
    assert sa[0] == pytest.approx(sb[0], rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("mod", BACKENDS, ids=ids)
def test_node_budget_reports_incomplete(mod):
    M = np.random.default_rng(0).standard_normal((16, 3))
    *_, complete = mod.split_search(M, math.inf, 5)
    assert not complete
    *_, complete = mod.sign_branch(M, np.abs(M[:, 0]), math.inf, 5)
    assert not complete


def test_read_only_inputs_accepted():
    M = np.random.default_rng(1).standard_normal((6, 2))
    M.setflags(write=False)
    z = np.abs(M[:, 0]).copy()
    z.setflags(write=False)
    for mod in BACKENDS:
        mod.split_search(M, math.inf, 1 << 20)
        mod.sign_branch(M, z, math.inf, 1 << 20)
