import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bspline_truncated_power
from phaseless.errors import InvalidOrder, PhaselessError
from phaseless.generators import (
    XI_ZP,
    Generator,
    box,
    bspline,
    eval_bspline,
    eval_generator,
    fixture,
    k_set,
    local_linear_independence,
    overlap_set,
    phi_matrix,
    tensor,
    zwart_powell,
)
from phaseless.regions import interval, lower_triangle, unit_cube, upper_triangle


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_bspline_matches_truncated_powers(N):
    t = np.linspace(-1.0, N + 1.0, 2001)
    np.testing.assert_allclose(eval_bspline(N, t), bspline_truncated_power(N, t), atol=1e-12)


def test_bspline_rejects_bad_order():
    with pytest.raises(InvalidOrder):
        eval_bspline(0, 0.5)


@given(st.integers(2, 6), st.floats(-3.0, 3.0))
def test_bspline_partition_of_unity(N, x):
    ks = np.arange(-N - 4, 5)
    assert abs(eval_bspline(N, x - ks).sum() - 1.0) < 1e-12


def test_order_one_is_half_open_indicator():
    np.testing.assert_array_equal(eval_bspline(1, [-0.5, 0.0, 0.5, 1.0]), [0.0, 1.0, 1.0, 0.0])


@pytest.mark.parametrize("g", [tensor(3, 3), tensor(2, 4), zwart_powell(), box([[1, 0, 1], [0, 1, 1]])])
def test_two_dimensional_partition_of_unity(g):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 1.0, (40, 2))
    ks = [(i, j) for i in range(-6, 3) for j in range(-6, 3)]
    np.testing.assert_allclose(phi_matrix(g, x, ks).sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("g", [zwart_powell(), box([[1, 0, 1], [0, 1, 1]])])
def test_box_spline_integrates_to_one(g):
    lo, hi = g.support_box()
    h = 1.0 / 64
    axes = [np.arange(a + h / 2, b, h) for a, b in zip(lo, hi)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    assert abs(eval_generator(g, X).sum() * h * h - 1.0) < 1e-3


def test_zwart_powell_known_values():
    # direction matrix has columns (1,0), (1,0), (0,1), (1,1); support [0,3] x [0,2]
    g = zwart_powell()
    assert np.asarray(g.xi).tolist() == [list(r) for r in XI_ZP]
    lo, hi = g.support_box()
    assert lo.tolist() == [0.0, 0.0] and hi.tolist() == [3.0, 2.0]
    vals = eval_generator(g, np.array([[1.5, 1.0], [1.0, 1.0], [2.0, 1.0], [4.0, 1.0]]))
    np.testing.assert_allclose(vals, [0.75, 0.5, 0.5, 0.0], atol=1e-14)


def test_box_spline_symmetry():
    # M_Xi(x) = M_Xi(sum of columns - x)
    g = zwart_powell()
    rng = np.random.default_rng(1)
    x = rng.uniform([0, 0], [3, 2], (50, 2))
    np.testing.assert_allclose(eval_generator(g, x), eval_generator(g, np.array([3.0, 2.0]) - x), atol=1e-13)


def test_tensor_is_product():
    g = tensor(3, 2)
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.5, 3.5, (30, 2))
    np.testing.assert_allclose(eval_generator(g, x), eval_bspline(3, x[:, 0]) * eval_bspline(2, x[:, 1]))


def test_spec_round_trip():
    for g in [bspline(4), tensor(3, 3), zwart_powell(), fixture("phi0"), fixture("cubic_phi1")]:
        h = Generator.from_spec(g.to_spec())
        assert h.to_spec() == g.to_spec()
        assert h.id == g.id


def test_dimension_mismatch_raises():
    with pytest.raises(PhaselessError):
        phi_matrix(tensor(3, 3), np.array([[0.5]]), [(0, 0)])


def test_overlap_set_bspline():
    assert sorted(overlap_set(bspline(3)).shifts) == [(-2,), (-1,), (0,), (1,), (2,)]
    assert (3,) not in overlap_set(bspline(3))


def test_overlap_set_tensor_is_box():
    S = set(overlap_set(tensor(3, 3)).shifts)
    assert S == {(i, j) for i in range(-2, 3) for j in range(-2, 3)}


def test_k_sets():
    assert len(k_set(tensor(3, 3), unit_cube(2))) == 9
    assert set(k_set(zwart_powell(), upper_triangle())) == {(0, 0), (-1, 0), (-2, 0), (-1, -1), (-2, -1)}
    assert len(k_set(zwart_powell(), lower_triangle())) == 5
    assert set(k_set(bspline(3), interval(0, 1))) == {(-2,), (-1,), (0,)}


def test_local_linear_independence():
    assert local_linear_independence(tensor(3, 3), unit_cube(2))
    assert local_linear_independence(zwart_powell(), upper_triangle())
    assert local_linear_independence(bspline(4), interval(0.2, 0.7))
