from fractions import Fraction

import numpy as np
import pytest

from hypalg.builders import PRESETS, build_table, from_jacobi, preset
from hypalg.core import FLOAT, RATIONAL
from hypalg.errors import InvalidParameter, UnknownPreset
from hypalg.spectral import orthonormalize

from oracles import chebyshev_u_normalized


def test_chebyshev_coefficients():
    a, b, c = preset("chebyshev-t").exact(4)
    assert a == [1] + [Fraction(1, 2)] * 4
    assert b == [0] * 5
    assert c == [0] + [Fraction(1, 2)] * 4
    a, b, c = preset("chebyshev-u").exact(4)
    assert a[3] == Fraction(5, 8) and c[3] == Fraction(3, 8)


def test_geometric_compact_coefficients():
    a, b, c = preset("geometric-compact", {"q": "1/3"}).exact(3)
    assert a == [1, Fraction(1, 3), Fraction(1, 9), Fraction(1, 27)]
    assert b[2] == 1 - Fraction(2, 9)
    with pytest.raises(InvalidParameter):
        preset("geometric-compact", {"q": "1"})
    with pytest.raises(InvalidParameter):
        preset("geometric-compact", {})


def test_characters_are_chebyshev():
    x = 0.37
    th = np.arccos(x)
    t = preset("chebyshev-t").character(x, 30)
    assert np.allclose(t, np.cos(np.arange(31) * th), atol=1e-13)
    u = preset("chebyshev-u").character(x, 30)
    assert np.allclose(u, chebyshev_u_normalized(30, x), atol=1e-13)


@pytest.mark.parametrize("name,params", [
    ("chebyshev-t", {}), ("chebyshev-u", {}), ("geometric-compact", {"q": "1/5"}),
])
def test_normalized_at_one(name, params):
    p = preset(name, params).character(1, 40, RATIONAL)
    assert all(v == 1 for v in p)


def test_explicit_requires_tail():
    with pytest.raises(InvalidParameter):
        preset("explicit", {"a": ["1", "1/2"], "b": ["0", "0"], "c": ["1/2"]})


def test_explicit_normalization_enforced():
    fam = preset("explicit", {"a": ["1", "1/2"], "b": ["0", "0"], "c": ["1/3"],
                              "tail": "constant"})
    with pytest.raises(InvalidParameter):
        build_table(fam, 4, RATIONAL)


def test_explicit_geometric_tail():
    fam = preset("explicit", {"a": ["1", "1/4"], "b": ["0", "1/2"], "c": ["1/4"],
                              "tail": {"rule": "geometric", "ratio": "1/2"}})
    a, b, c = fam.exact(4)
    assert a[3] == Fraction(1, 16) and c[3] == Fraction(1, 16)
    assert all(a[n] + b[n] + c[n] == 1 for n in range(1, 5))


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        preset("legendre")
    assert "perturbed-chebyshev" in PRESETS


def test_symmetric_c_sequence():
    fam = preset("symmetric", {"b": ["1/2"], "tail": "constant"})
    b, c = fam.exact(4)
    # c_n = (c_0 + ... + c_{n-1}) / b_n with c_0 = 1
    assert c == [1, 2, 6, 18, 54]
    assert fam.label(3) == 1 - 2 ** -3
    assert fam.index_of(0.875) == 3 and fam.index_of(1.0) == 0 and fam.index_of(0.3) is None


def test_symmetric_table_rule():
    fam = preset("symmetric", {"b": ["1/2"], "tail": "constant"})
    table = build_table(fam, 6, RATIONAL)
    _, c = fam.exact(6)
    assert table.as_dict(2, 5) == {5: 1}
    sq = table.as_dict(3, 3)
    for i in range(3):
        assert sq[i] == c[i] / c[3]
    assert sq[3] == Fraction(1, 2)


def test_jacobi_round_trip():
    lam = [Fraction(9, 10), Fraction(3, 5), Fraction(1, 2)]
    beta = [Fraction(1, 10), Fraction(-1, 5), Fraction(0)]
    fam = from_jacobi(lam, beta, {"rule": "constant"})
    system = orthonormalize(fam)
    system.ensure(6)
    assert np.allclose(system.lam[1:4], [0.9, 0.6, 0.5])
    assert np.allclose(system.beta[:3], [0.1, -0.2, 0.0])
    assert np.allclose(fam.haar(6, FLOAT).values, 1.0)


def test_chebyshev_t_orthonormal_coefficients():
    system = orthonormalize(preset("chebyshev-t"))
    system.ensure(5)
    assert system.lam[1] == pytest.approx(np.sqrt(0.5))
    assert np.allclose(system.lam[2:6], 0.5)
    assert np.allclose(system.beta[:6], 0.0)
