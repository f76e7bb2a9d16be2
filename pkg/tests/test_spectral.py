import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypalg.builders import preset
from hypalg.core import FLOAT, RATIONAL, SequenceMeasure
from hypalg.errors import InvalidParameter, OrderTooSmall
from hypalg.spectral import (dual_measure, estimate_support, fourier, is_isolated,
                             minimal_solution, orthonormal_values, orthonormalize,
                             plancherel_check, quadrature, support_for, tridiagonal_eigen)

from oracles import jacobi_eigenvalues

ROOT3 = math.sqrt(3.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-3, 3), min_size=n, max_size=n),
    st.lists(st.floats(0.01, 2), min_size=n - 1, max_size=n - 1))))
def test_ql_matches_numpy(args):
    diag, off = args
    ev, first = tridiagonal_eigen(diag, off)
    assert np.allclose(ev, jacobi_eigenvalues(diag, off), atol=1e-10)
    assert sum(first ** 2) == pytest.approx(1.0)


def test_chebyshev_t_gauss_nodes():
    m = quadrature(orthonormalize(preset("chebyshev-t")), 8)
    k = np.arange(1, 9)
    assert np.allclose(m.nodes, np.sort(np.cos((2 * k - 1) * np.pi / 16)))
    assert np.allclose(m.weights, 1 / 8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.sampled_from(["chebyshev-t",
                                                                              "chebyshev-u"]))
def test_plancherel_random(values, name):
    fam = preset(name)
    haar = fam.haar(64, FLOAT)
    f = SequenceMeasure(np.array(values))
    lhs, rhs = plancherel_check(f, dual_measure(fam, 64), fam, haar)
    assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), 1e-300)


def test_plancherel_order_guard():
    fam = preset("chebyshev-t")
    f = SequenceMeasure(np.ones(30))
    with pytest.raises(OrderTooSmall):
        plancherel_check(f, dual_measure(fam, 8), fam, fam.haar(40, FLOAT))


def test_symmetric_plancherel_exact():
    fam = preset("symmetric", {"b": ["1/2"], "tail": "constant"})
    haar = fam.haar(20, RATIONAL)
    f = SequenceMeasure.from_mapping({0: 1, 2: -3, 5: 2}, RATIONAL)
    lhs, rhs = plancherel_check(f, dual_measure(fam, 20, RATIONAL), fam, haar)
    assert lhs == rhs


def test_fourier_of_point_mass():
    fam = preset("chebyshev-t")
    haar = fam.haar(10, FLOAT)
    f = SequenceMeasure.point(3, haar)
    # sum_n delta_3(n)/h(3) * p_n(x) * h(n) = p_3(x) = T_3(x)
    x = 0.2
    assert fourier(f, fam, haar, x) == pytest.approx(4 * x ** 3 - 3 * x)


def test_perturbed_mass_points():
    fam = preset("perturbed-chebyshev")
    sup = support_for(fam, [200, 400])
    stable = sup.stable_points()
    assert len(stable) == 2
    assert stable[0].x == pytest.approx(-2 / ROOT3, abs=1e-10)
    assert stable[1].x == pytest.approx(2 / ROOT3, abs=1e-10)
    for mp in stable:
        assert mp.weight == pytest.approx(1 / 3, abs=1e-8)
    assert sup.essential_interval == (-1.0, 1.0)
    assert is_isolated(stable[0].x, sup)
    assert not is_isolated(0.5, sup)


def test_chebyshev_has_no_mass_points():
    for name in ("chebyshev-t", "chebyshev-u"):
        assert support_for(preset(name), [128, 256]).mass_points == []


def test_minimal_solution_closed_form():
    # at x* = -2/sqrt(3) the orthonormal values are q_n = 2 (-1/sqrt(3))^n for n >= 1
    system = orthonormalize(preset("perturbed-chebyshev"))
    q, residual = minimal_solution(system, -2 / ROOT3, 60)
    expected = np.array([1.0] + [2 * (-1 / ROOT3) ** n for n in range(1, 61)])
    assert np.allclose(q, expected, atol=1e-12)
    assert abs(residual) < 1e-12


def test_forward_values_are_orthonormal_polynomials():
    system = orthonormalize(preset("chebyshev-t"))
    x = 0.4
    q = orthonormal_values(system, x, 10)
    th = math.acos(x)
    expected = [1.0] + [math.sqrt(2) * math.cos(n * th) for n in range(1, 11)]
    assert np.allclose(q, expected)


def test_support_needs_two_truncations():
    with pytest.raises(InvalidParameter):
        estimate_support(orthonormalize(preset("chebyshev-t")), [100])


def test_symmetric_support_is_exact():
    fam = preset("symmetric", {"b": ["1"], "tail": "constant"})
    sup = support_for(fam, [30, 60])
    assert sup.exact and sup.essential_interval == (1.0, 1.0)
    assert is_isolated(0.5, sup)
    # Plancherel mass of the k-th character is 1/(b(1+b)c_k) = 1/2^k for b = 1
    assert sup.mass_points[2].weight == pytest.approx(1 / 8)


def test_compact_type_mass_points():
    fam = preset("geometric-compact", {"q": "1/4"})
    sup = support_for(fam, [64, 128])
    assert sup.essential_interval == (1.0, 1.0)
    assert len(sup.stable_points()) >= 3


def test_quadrature_orthogonality_chebyshev_u():
    fam = preset("chebyshev-u")
    order = 24
    m = dual_measure(fam, order)
    assert m.weights.sum() == pytest.approx(1.0)
    h = fam.haar(order, FLOAT).values
    vals = np.array([fam.character(x, order // 2) for x in m.nodes])
    gram = (vals * m.weights[:, None]).T @ vals
    assert np.allclose(gram, np.diag(1 / h[: order // 2 + 1]), atol=1e-12)
