"""Independent reference computations used by the tests.

Nothing here calls the package's table or spectral code: linearization comes
from exact polynomial multiplication, eigenvalues from numpy.
"""
from fractions import Fraction

import numpy as np


def poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def monomial_basis(a, b, c, n):
    """Monomial coefficient lists of ``p_0..p_n`` from the recurrence, exactly."""
    ps = [[Fraction(1)]]
    if n >= 1:
        ps.append([-b(0) / a(0), 1 / a(0)])
    p1 = ps[1] if n >= 1 else None
    for i in range(1, n):
        prod = poly_mul(p1, ps[i])
        nxt = list(prod)
        for d, v in enumerate(ps[i]):
            nxt[d] -= b(i) * v
        for d, v in enumerate(ps[i - 1]):
            nxt[d] -= c(i) * v
        ps.append([v / a(i) for v in nxt[: i + 2]])
    return ps


def linearize(ps, j, k):
    """Coefficients ``g(j, k, n)`` of ``p_j p_k`` in the basis ``ps`` by back substitution."""
    rest = poly_mul(ps[j], ps[k])
    rest += [Fraction(0)] * (j + k + 1 - len(rest))
    g = {}
    for n in range(j + k, -1, -1):
        coef = rest[n] / ps[n][n]
        if coef:
            g[n] = coef
            for d, v in enumerate(ps[n]):
                rest[d] -= coef * v
    assert all(v == 0 for v in rest)
    return g


def jacobi_eigenvalues(diag, off):
    n = len(diag)
    m = np.diag(np.asarray(diag, float))
    if n > 1:
        m += np.diag(np.asarray(off, float), 1) + np.diag(np.asarray(off, float), -1)
    return np.linalg.eigvalsh(m)


def chebyshev_u_normalized(n, x):
    """``U_n(x)/(n+1)`` via the trigonometric closed form, ``|x| < 1``."""
    th = np.arccos(x)
    return np.array([np.sin((k + 1) * th) / ((k + 1) * np.sin(th)) for k in range(n + 1)])
