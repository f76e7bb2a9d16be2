"""Hypergroup structures from recurrence coefficients or symmetric parameters.

Coefficients are held as exact :class:`~fractions.Fraction` generators; the
arithmetic backend is chosen only when arrays are materialized.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (FLOAT, RATIONAL, ConvolutionTable, HaarWeights, as_array, check_backend,
                   coerce, to_fraction, zeros)
from .errors import InvalidParameter, TableExhausted, UnknownPreset

CoefficientRule = Callable[[int], Fraction]

TAIL_RULES = ("constant", "geometric")


def _tail_dict(tail) -> dict:
    """Accept ``"constant"`` as shorthand for ``{"rule": "constant"}``."""
    if isinstance(tail, str):
        return {"rule": tail}
    if not isinstance(tail, dict):
        raise InvalidParameter(f"tail must be a rule name or a mapping, got {tail!r}")
    return tail


def _tail_sequence(values: Sequence[Fraction], tail: dict, start: int, name: str) -> CoefficientRule:
    """Extend a finite list (first index ``start``) by a constant or geometric tail."""
    if not values:
        raise InvalidParameter(f"{name}: empty coefficient list")
    tail = _tail_dict(tail)
    rule = tail.get("rule")
    if rule not in TAIL_RULES:
        raise InvalidParameter(f"{name}: tail rule must be one of {TAIL_RULES}, got {rule!r}")
    vals = list(values)
    last = len(vals) - 1 + start
    ratio = to_fraction(tail.get("ratio", 1)) if rule == "geometric" else Fraction(1)

    def seq(n: int) -> Fraction:
        if n < start:
            return Fraction(0)
        if n <= last:
            return vals[n - start]
        return vals[-1] * ratio ** (n - last)

    return seq


@dataclass
class RecurrenceCoefficients:
    """Coefficients of ``p_1 p_n = a_n p_{n+1} + b_n p_n + c_n p_{n-1}``.

    ``p_0 = 1`` and ``p_1(x) = (x - b_0)/a_0``.  When ``normalized`` is true
    the family satisfies ``p_n(1) = 1``, i.e. ``a_n + b_n + c_n = 1`` and
    ``a_0 + b_0 = 1``.  Families given in orthonormal gauge (from Jacobi data)
    are not normalized and have no identity character at ``x = 1``.
    """

    name: str
    a: CoefficientRule
    b: CoefficientRule
    c: CoefficientRule
    params: dict = field(default_factory=dict)
    normalized: bool = True
    tail: str = "closed-form"
    # Limits of (a_n, b_n, c_n) implied by the declared tail rule, if known.
    tail_limits: Optional[tuple[Fraction, Fraction, Fraction]] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    kind = "polynomial"

    def exact(self, n: int) -> tuple[list[Fraction], list[Fraction], list[Fraction]]:
        """Exact coefficient lists for indices ``0..n`` (``c_0 = 0``)."""
        with self._lock:
            cached = self._cache.get("exact")
            if cached is None or len(cached[0]) <= n:
                size = max(n + 1, 2 * len(cached[0]) if cached else 0)
                a = [to_fraction(self.a(i)) for i in range(size)]
                b = [to_fraction(self.b(i)) for i in range(size)]
                c = [Fraction(0)] + [to_fraction(self.c(i)) for i in range(1, size)]
                cached = (a, b, c)
                self._cache = {"exact": cached}
        a, b, c = cached
        return a[: n + 1], b[: n + 1], c[: n + 1]

    def arrays(self, n: int, backend: str = FLOAT) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = (backend, n)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        a, b, c = self.exact(n)
        out = (as_array(a, backend), as_array(b, backend), as_array(c, backend))
        with self._lock:
            self._cache[key] = out
        return out

    def validate(self, n: int) -> None:
        """Raise :class:`InvalidParameter` if the type invariants fail up to ``n``."""
        a, b, c = self.exact(n)
        for i in range(n + 1):
            if a[i] <= 0:
                raise InvalidParameter(f"{self.name}: a_{i} = {a[i]} must be positive")
            if i >= 1 and c[i] <= 0:
                raise InvalidParameter(f"{self.name}: c_{i} = {c[i]} must be positive")
        if self.normalized:
            if a[0] + b[0] != 1:
                raise InvalidParameter(f"{self.name}: a_0 + b_0 = {a[0] + b[0]} != 1")
            for i in range(1, n + 1):
                if a[i] + b[i] + c[i] != 1:
                    raise InvalidParameter(f"{self.name}: a_{i} + b_{i} + c_{i} != 1")

    def haar(self, n: int, backend: str = FLOAT) -> HaarWeights:
        """Product form ``h(n) = (a_1 ... a_{n-1}) / (c_1 ... c_n)``, ``h(0) = 1``."""
        a, _, c = self.exact(n)
        h = zeros(n + 1, backend)
        h[0] = coerce(1, backend)
        if n >= 1:
            h[1] = coerce(1 / c[1], backend)
        # ratios are formed exactly: a_i and c_{i+1} may both underflow in float
        with np.errstate(over="ignore"):
            for i in range(1, n):
                h[i + 1] = h[i] * coerce(a[i] / c[i + 1], backend)
        return HaarWeights(h)

    def character(self, x, n: int, backend: str = FLOAT) -> np.ndarray:
        """``p_0(x), ..., p_n(x)`` by the forward three-term recurrence."""
        a, b, c = self.arrays(n, backend)
        x = coerce(x, backend)
        p = zeros(n + 1, backend)
        p[0] = coerce(1, backend)
        if n >= 1:
            p[1] = (x - b[0]) / a[0]
        p1 = p[1] if n >= 1 else (x - b[0]) / a[0]
        # outside the dual the values grow without bound; inf/nan is the signal
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(1, n):
                p[i + 1] = ((p1 - b[i]) * p[i] - c[i] * p[i - 1]) / a[i]
        return p

    def is_identity(self, x) -> bool:
        return self.normalized and float(x) == 1.0


@dataclass
class SymmetricParams:
    """Parameters ``b_n in (0, 1]`` (``n >= 1``) of a symmetric hypergroup.

    ``c_0 = 1`` and ``c_n = (c_0 + ... + c_{n-1}) / b_n``.  The nontrivial
    characters are ``alpha_k = (1, ..., 1, -b_k, 0, 0, ...)`` with ``-b_k`` at
    index ``k``; they accumulate at the identity.  ``alpha_k`` is addressed by
    the real label ``x_k = 1 - 2**-k`` and the identity by ``x = 1``.
    """

    name: str
    b: CoefficientRule
    params: dict = field(default_factory=dict)
    tail: str = "constant"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    kind = "symmetric"
    normalized = True

    def exact(self, n: int) -> tuple[list[Fraction], list[Fraction]]:
        """Exact ``b_0..b_n`` (``b_0`` unused, stored as 1) and ``c_0..c_n``."""
        with self._lock:
            cached = self._cache.get("exact")
            if cached is None or len(cached[0]) <= n:
                size = max(n + 1, 2 * len(cached[0]) if cached else 0)
                b = [Fraction(1)] + [to_fraction(self.b(i)) for i in range(1, size)]
                c = [Fraction(1)]
                running = Fraction(1)
                for i in range(1, size):
                    c.append(running / b[i])
                    running += c[-1]
                cached = (b, c)
                self._cache = {"exact": cached}
        return cached[0][: n + 1], cached[1][: n + 1]

    def arrays(self, n: int, backend: str = FLOAT) -> tuple[np.ndarray, np.ndarray]:
        b, c = self.exact(n)
        return as_array(b, backend), as_array(c, backend)

    def validate(self, n: int) -> None:
        b, _ = self.exact(n)
        for i in range(1, n + 1):
            if not 0 < b[i] <= 1:
                raise InvalidParameter(f"{self.name}: b_{i} = {b[i]} outside (0, 1]")

    def haar(self, n: int, backend: str = FLOAT) -> HaarWeights:
        _, c = self.arrays(n, backend)
        return HaarWeights(c)

    @staticmethod
    def label(k: int) -> float:
        return 1.0 - 2.0 ** (-k)

    @staticmethod
    def index_of(x) -> Optional[int]:
        """Character index ``k`` for label ``x``; 0 for the identity; None otherwise."""
        fr = to_fraction(x)
        if fr == 1:
            return 0
        if not 0 < fr < 1:
            return None
        gap = 1 - fr
        k = -math.log2(float(gap))
        kr = round(k)
        if kr >= 1 and abs(k - kr) < 1e-9 and abs(float(gap) * 2.0 ** kr - 1.0) < 1e-9:
            return kr
        return None

    def character(self, x, n: int, backend: str = FLOAT) -> Optional[np.ndarray]:
        """Values ``alpha(0..n)`` of the character labelled ``x``, None if not a label."""
        k = self.index_of(x)
        if k is None:
            return None
        out = zeros(n + 1, backend)
        one = coerce(1, backend)
        if k == 0:
            out[:] = [one] * (n + 1)
            return out
        b, _ = self.arrays(max(k, 1), backend)
        for i in range(min(k, n + 1)):
            out[i] = one
        if k <= n:
            out[k] = -b[k]
        return out

    def is_identity(self, x) -> bool:
        return self.index_of(x) == 0


class PolynomialTable(ConvolutionTable):
    """Linearization coefficients of a recurrence family by iterated re-expansion.

    For fixed ``k`` the rows ``g(j, k, .)`` for ``j = 0..k`` are produced by
    ``p_{j+1} p_k = (p_1 (p_j p_k) - b_j p_j p_k - c_j p_{j-1} p_k) / a_j``,
    with ``p_1 p_n`` re-expanded by the recurrence.  Row ``(j, k)`` has
    support in ``[k - j, k + j]`` for ``j <= k``; ``g(k, j) = g(j, k)``.
    Chains with ``k <= cache_level`` are memoized; larger ones are streamed.
    """

    kind = "polynomial"
    independent_transpose = False

    def __init__(self, coeffs: RecurrenceCoefficients, max_level: int,
                 backend: str = FLOAT, cache_level: int = 160):
        super().__init__(max_level, backend)
        self.coeffs = coeffs
        self.cache_level = cache_level
        self._a, self._b, self._c = coeffs.arrays(2 * max_level + 1, backend)

    def chain(self, k: int):
        """Yield ``(lo, values)`` of ``g(j, k, .)`` for ``j = 0, ..., k``."""
        a, b, c = self._a, self._b, self._c
        cur = zeros(1, self.backend)
        cur[0] = coerce(1, self.backend)
        prev = None
        yield k, cur
        for j in range(k):
            lo = k - j
            idx = np.arange(lo, lo + len(cur))
            new = zeros(len(cur) + 2, self.backend)
            new[2:] += cur * a[idx]
            new[:-2] += cur * c[idx]
            if j == 0:
                # p_1 p_0 = p_1: plain re-expansion
                new[1:-1] += cur * b[idx]
            else:
                new[1:-1] += cur * (b[idx] - b[j])
                new[2:-2] -= c[j] * prev
                new = new / a[j]
            prev, cur = cur, new
            yield lo - 1, cur

    def _compute_row(self, j: int, k: int):
        lo_idx, hi_idx = min(j, k), max(j, k)
        if hi_idx <= self.cache_level:
            with self._lock:
                for i, row in enumerate(self.chain(hi_idx)):
                    self._rows[(i, hi_idx)] = row
                    self._rows[(hi_idx, i)] = row
                return self._rows[(j, k)]
        for i, row in enumerate(self.chain(hi_idx)):
            if i == lo_idx:
                return row
        raise AssertionError("unreachable")

    def iter_rows(self, level=None):
        level = self.max_level if level is None else level
        self._check(level, level)
        for k in range(level + 1):
            for j, (lo, vals) in enumerate(self.chain(k)):
                yield j, k, lo, vals

    def identity_mass(self, n: int):
        self._check(n, n)
        if (n, n) in self._rows:
            return self.entry(n, n, 0)
        for lo, vals in self.chain(n):
            pass
        return vals[0] if lo == 0 else coerce(0, self.backend)


class SymmetricTable(ConvolutionTable):
    """``eps_n * eps_m = eps_max(n,m)`` for ``n != m``; the square of ``eps_n`` is
    ``sum_{i<n} (c_i/c_n) eps_i + (1 - b_n) eps_n``."""

    kind = "symmetric"
    independent_transpose = True

    def __init__(self, params: SymmetricParams, max_level: int, backend: str = FLOAT):
        super().__init__(max_level, backend)
        self.params = params
        self._b, self._c = params.arrays(max_level, backend)

    def _compute_row(self, j: int, k: int):
        one = coerce(1, self.backend)
        if j != k:
            row = zeros(1, self.backend)
            row[0] = one
            return max(j, k), row
        n = j
        row = zeros(n + 1, self.backend)
        if n == 0:
            row[0] = one
            return 0, row
        row[:n] = self._c[:n] / self._c[n]
        row[n] = one - self._b[n]
        return 0, row


def build_polynomial(coeffs: RecurrenceCoefficients, max_level: int,
                     backend: str = FLOAT) -> PolynomialTable:
    """Convolution table of a recurrence family; negative entries are kept."""
    check_backend(backend)
    coeffs.validate(2 * max_level + 1)
    return PolynomialTable(coeffs, max_level, backend)


def build_symmetric(params: SymmetricParams, max_level: int,
                    backend: str = FLOAT) -> SymmetricTable:
    check_backend(backend)
    params.validate(max_level)
    return SymmetricTable(params, max_level, backend)


def build_table(family, max_level: int, backend: str = FLOAT) -> ConvolutionTable:
    if family.kind == "symmetric":
        return build_symmetric(family, max_level, backend)
    return build_polynomial(family, max_level, backend)


# ---------------------------------------------------------------- presets

def chebyshev_t() -> RecurrenceCoefficients:
    half = Fraction(1, 2)
    return RecurrenceCoefficients(
        "chebyshev-t",
        a=lambda n: Fraction(1) if n == 0 else half,
        b=lambda n: Fraction(0),
        c=lambda n: half,
    )


def chebyshev_u() -> RecurrenceCoefficients:
    """``p_n = U_n / (n + 1)``; Haar weights ``(n + 1)^2``."""
    return RecurrenceCoefficients(
        "chebyshev-u",
        a=lambda n: Fraction(1) if n == 0 else Fraction(n + 2, 2 * n + 2),
        b=lambda n: Fraction(0),
        c=lambda n: Fraction(n, 2 * n + 2),
    )


def geometric_compact(q) -> RecurrenceCoefficients:
    """``a_n = c_n = q^n``, ``b_n = 1 - 2 q^n`` for ``n >= 1``; ``a_0 = 1``."""
    q = to_fraction(q)
    if not 0 < q < 1:
        raise InvalidParameter(f"geometric-compact: q = {q} must lie in (0, 1)")
    return RecurrenceCoefficients(
        "geometric-compact",
        a=lambda n: Fraction(1) if n == 0 else q ** n,
        b=lambda n: Fraction(0) if n == 0 else 1 - 2 * q ** n,
        c=lambda n: q ** n,
        params={"q": str(q)},
        tail="geometric",
        tail_limits=(Fraction(0), Fraction(1), Fraction(0)),
    )


def explicit(a: Sequence, b: Sequence, c: Sequence, tail: Optional[dict]) -> RecurrenceCoefficients:
    """Listed coefficients: ``a`` and ``b`` from ``n = 0``, ``c`` from ``n = 1``.

    A tail rule is mandatory.  ``constant`` repeats the last listed values;
    ``geometric`` multiplies ``a_n`` and ``c_n`` by ``ratio`` per step and
    fills ``b_n = 1 - a_n - c_n``.
    """
    if not tail:
        raise InvalidParameter("explicit coefficients need a tail rule")
    tail = _tail_dict(tail)
    a = [to_fraction(v) for v in a]
    b = [to_fraction(v) for v in b]
    c = [to_fraction(v) for v in c]
    aseq = _tail_sequence(a, tail, 0, "a")
    cseq = _tail_sequence(c, tail, 1, "c")
    if tail["rule"] == "geometric":
        listed_b = _tail_sequence(b, {"rule": "constant"}, 0, "b")
        last_b = len(b) - 1

        def bseq(n):
            return listed_b(n) if n <= last_b else 1 - aseq(n) - cseq(n)
    else:
        bseq = _tail_sequence(b, tail, 0, "b")
    limits = None
    if tail["rule"] == "geometric" and abs(to_fraction(tail.get("ratio", 1))) < 1:
        limits = (Fraction(0), Fraction(1), Fraction(0))
    elif tail["rule"] == "constant":
        limits = (a[-1], b[-1], c[-1])
    return RecurrenceCoefficients("explicit", aseq, bseq, cseq,
                                  params={"a": [str(v) for v in a], "b": [str(v) for v in b],
                                          "c": [str(v) for v in c]},
                                  tail=tail["rule"], tail_limits=limits)


def from_jacobi(lam: Sequence, beta: Sequence, tail: Optional[dict],
                name: str = "jacobi") -> RecurrenceCoefficients:
    """Family in orthonormal gauge from Jacobi data.

    ``lam`` lists ``lambda_1, lambda_2, ...`` and ``beta`` lists
    ``beta_0, beta_1, ...``.  The resulting ``p_n`` equal the orthonormal
    ``q_n``, so ``h = 1``; the family is not normalized at ``x = 1``.
    """
    if not tail:
        raise InvalidParameter("jacobi coefficients need a tail rule")
    tail = _tail_dict(tail)
    lam = [to_fraction(v) for v in lam]
    beta = [to_fraction(v) for v in beta]
    if any(v <= 0 for v in lam):
        raise InvalidParameter("jacobi: off-diagonal entries must be positive")
    lseq = _tail_sequence(lam, tail, 1, "lambda")
    bseq = _tail_sequence(beta, {"rule": "constant"}, 0, "beta")
    l1 = lam[0]
    b0 = beta[0]
    return RecurrenceCoefficients(
        name,
        a=lambda n: l1 if n == 0 else lseq(n + 1) / l1,
        b=lambda n: b0 if n == 0 else (bseq(n) - b0) / l1,
        c=lambda n: lseq(n) / l1,
        params={"lambda": [str(v) for v in lam], "beta": [str(v) for v in beta]},
        normalized=False,
        tail=tail["rule"],
    )


def perturbed_chebyshev(lambda1="1") -> RecurrenceCoefficients:
    """Chebyshev-T Jacobi matrix with its first off-diagonal entry replaced."""
    fam = from_jacobi([lambda1, Fraction(1, 2)], [0], {"rule": "constant"},
                      name="perturbed-chebyshev")
    fam.params = {"lambda1": str(to_fraction(lambda1))}
    return fam


def symmetric(b: Sequence, tail: Optional[dict]) -> SymmetricParams:
    """Symmetric hypergroup from ``b_1, b_2, ...`` with a declared tail rule."""
    if not tail:
        raise InvalidParameter("symmetric parameters need a tail rule")
    tail = _tail_dict(tail)
    vals = [to_fraction(v) for v in b]
    seq = _tail_sequence(vals, tail, 1, "b")
    return SymmetricParams("symmetric", seq, params={"b": [str(v) for v in vals]},
                           tail=tail["rule"])


PRESETS = ("chebyshev-t", "chebyshev-u", "geometric-compact", "symmetric", "explicit",
           "jacobi", "perturbed-chebyshev")


def preset(name: str, params: Optional[dict] = None):
    """Family for a preset name and its parameter map."""
    params = dict(params or {})
    if name == "chebyshev-t":
        return chebyshev_t()
    if name == "chebyshev-u":
        return chebyshev_u()
    if name == "geometric-compact":
        if "q" not in params:
            raise InvalidParameter("geometric-compact needs parameter q")
        return geometric_compact(params["q"])
    if name == "symmetric":
        return symmetric(params.get("b", []), params.get("tail"))
    if name == "explicit":
        return explicit(params.get("a", []), params.get("b", []), params.get("c", []),
                        params.get("tail"))
    if name == "jacobi":
        return from_jacobi(params.get("lambda", []), params.get("beta", [0]), params.get("tail"))
    if name == "perturbed-chebyshev":
        return perturbed_chebyshev(params.get("lambda1", "1"))
    raise UnknownPreset(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
