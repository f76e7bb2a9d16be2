"""Discrete commutative hypergroups on the non-negative integers.

A hypergroup structure is carried by its convolution table: for every pair
``(j, k)`` a finitely supported sequence ``g(j, k, .)`` with
``eps_j * eps_k = sum_n g(j, k, n) eps_n``.  Functions on the hypergroup are
densities against the Haar weights ``h``, so a density ``f`` represents the
measure ``sum_n f(n) h(n) eps_n``.

Two arithmetic backends are supported.  ``float`` stores ``numpy.float64``
arrays; ``rational`` stores object arrays of ``gmpy2.mpq`` so that axiom
checks at small levels are exact.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import gmpy2
import numpy as np

from .errors import DegenerateTable, InvalidParameter, TableExhausted

FLOAT = "float"
RATIONAL = "rational"
BACKENDS = (FLOAT, RATIONAL)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_LEVEL = 512


def check_backend(backend: str) -> str:
    if backend not in BACKENDS:
        raise InvalidParameter(f"unknown arithmetic backend {backend!r}")
    return backend


def to_fraction(value) -> Fraction:
    """Exact conversion of ints, floats, strings (``'0.1'``, ``'3/7'``) and mpq."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, type(gmpy2.mpq())):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, bool):
        raise InvalidParameter(f"not a number: {value!r}")
    if isinstance(value, (int, float, str)):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"not a number: {value!r}") from exc
    raise InvalidParameter(f"not a number: {value!r}")


def coerce(value, backend: str):
    """Convert a scalar to the representation used by ``backend``."""
    if backend == RATIONAL:
        fr = to_fraction(value)
        return gmpy2.mpq(fr.numerator, fr.denominator)
    return float(value)


def as_array(values, backend: str) -> np.ndarray:
    if backend == RATIONAL:
        return np.array([coerce(v, RATIONAL) for v in values], dtype=object)
    return np.asarray([float(v) for v in values], dtype=float)


def zeros(n: int, backend: str) -> np.ndarray:
    if backend == RATIONAL:
        out = np.empty(n, dtype=object)
        out[:] = [gmpy2.mpq(0)] * n
        return out
    return np.zeros(n, dtype=float)


def backend_of(arr: np.ndarray) -> str:
    return RATIONAL if arr.dtype == object else FLOAT


def _common_backend(*arrays: np.ndarray) -> str:
    return RATIONAL if all(a.dtype == object for a in arrays) else FLOAT


def _cast(arr: np.ndarray, backend: str) -> np.ndarray:
    if backend == FLOAT and arr.dtype == object:
        return arr.astype(float)
    return arr


@dataclass(frozen=True)
class HaarWeights:
    """Haar mass ``h(n)`` of the singleton ``{n}``, normalized by ``h(0) = 1``."""

    values: np.ndarray

    def __post_init__(self):
        if len(self.values) == 0 or self.values[0] != 1:
            raise InvalidParameter("Haar weights must start with h(0) = 1")

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def backend(self) -> str:
        return backend_of(self.values)

    def upto(self, n: int, backend: Optional[str] = None) -> np.ndarray:
        """Weights ``h(0..n-1)``; raises when fewer are available."""
        if n > len(self.values):
            raise TableExhausted(f"Haar weights known up to {len(self.values) - 1}, need {n - 1}")
        return _cast(self.values[:n], backend or self.backend)


@dataclass
class SequenceMeasure:
    """Finitely supported density ``f(n)``; ``density[n]`` for ``n < len(density)``."""

    density: np.ndarray

    @classmethod
    def from_mapping(cls, values: dict, backend: str = FLOAT) -> "SequenceMeasure":
        length = max(values) + 1 if values else 1
        arr = zeros(length, backend)
        for n, v in values.items():
            arr[n] = coerce(v, backend)
        return cls(arr)

    @classmethod
    def point(cls, n: int, haar: HaarWeights, backend: str = FLOAT) -> "SequenceMeasure":
        """Density of the point mass ``eps_n`` (value ``1/h(n)`` at ``n``)."""
        arr = zeros(n + 1, backend)
        arr[n] = coerce(1, backend) / haar.upto(n + 1, backend)[n]
        return cls(arr)

    @classmethod
    def indicator(cls, n: int, backend: str = FLOAT) -> "SequenceMeasure":
        return cls.from_mapping({n: 1}, backend)

    @property
    def support(self) -> list[int]:
        return [int(n) for n in np.nonzero(self.density != 0)[0]]

    @property
    def top(self) -> int:
        supp = self.support
        return supp[-1] if supp else 0

    def __len__(self) -> int:
        return len(self.density)

    def padded(self, n: int) -> np.ndarray:
        out = zeros(n, backend_of(self.density))
        m = min(n, len(self.density))
        out[:m] = self.density[:m]
        return out

    def l1(self, haar: HaarWeights) -> float:
        h = haar.upto(len(self.density), FLOAT)
        return float(np.sum(np.abs(self.density.astype(float)) * h))


class ConvolutionTable:
    """Lazily materialized linearization coefficients up to ``max_level``.

    Subclasses implement :meth:`_compute_row`.  Rows are returned as
    ``(lo, values)`` with ``values[i] = g(j, k, lo + i)``.  Memoization is
    guarded by a lock so one table can be shared between worker threads.
    """

    kind = "generic"
    # Whether g(j,k,.) and g(k,j,.) are computed independently.
    independent_transpose = True

    def __init__(self, max_level: int, backend: str = FLOAT):
        if max_level < 0:
            raise InvalidParameter("max_level must be non-negative")
        self.max_level = int(max_level)
        self.backend = check_backend(backend)
        self._rows: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
        self._lock = threading.RLock()

    def _check(self, j: int, k: int) -> None:
        if j < 0 or k < 0:
            raise IndexError("hypergroup indices are non-negative")
        if max(j, k) > self.max_level:
            raise TableExhausted(f"pair ({j}, {k}) beyond max_level {self.max_level}")

    def _compute_row(self, j: int, k: int) -> tuple[int, np.ndarray]:
        raise NotImplementedError

    def row(self, j: int, k: int, backend: Optional[str] = None) -> tuple[int, np.ndarray]:
        self._check(j, k)
        key = (j, k)
        with self._lock:
            if key not in self._rows:
                self._rows[key] = self._compute_row(j, k)
            lo, vals = self._rows[key]
        return lo, _cast(vals, backend or self.backend)

    def entry(self, j: int, k: int, n: int):
        lo, vals = self.row(j, k)
        if lo <= n < lo + len(vals):
            return vals[n - lo]
        return coerce(0, self.backend)

    def as_dict(self, j: int, k: int) -> dict:
        lo, vals = self.row(j, k)
        return {lo + i: v for i, v in enumerate(vals) if v != 0}

    def iter_rows(self, level: Optional[int] = None) -> Iterator[tuple[int, int, int, np.ndarray]]:
        """Yield ``(j, k, lo, values)`` for all ``0 <= j <= k <= level``."""
        level = self.max_level if level is None else level
        self._check(level, level)
        for k in range(level + 1):
            for j in range(k + 1):
                lo, vals = self.row(j, k)
                yield j, k, lo, vals

    def identity_mass(self, n: int):
        """``g(n, n, 0)``, the mass the square of ``eps_n`` puts on the identity."""
        return self.entry(n, n, 0)


def _pair_terms(f: np.ndarray, g: np.ndarray, hf: np.ndarray, hg: np.ndarray):
    """Coefficients of eps_j * eps_k in (f h) * (g h), canonical order j <= k."""
    fw = f * hf
    gw = g * hg
    fs = [int(i) for i in np.nonzero(f != 0)[0]]
    gs = [int(i) for i in np.nonzero(g != 0)[0]]
    pairs = sorted({(min(j, k), max(j, k)) for j in fs for k in gs})
    nf, ng = len(f), len(g)
    for j, k in pairs:
        def at(arr, n, size):
            return arr[n] if n < size else 0
        if j == k:
            coef = fw[j] * gw[j]
        else:
            coef = at(fw, j, nf) * at(gw, k, ng) + at(fw, k, nf) * at(gw, j, ng)
        if coef != 0:
            yield j, k, coef


def convolve(f: SequenceMeasure, g: SequenceMeasure, table: ConvolutionTable,
             haar: HaarWeights) -> SequenceMeasure:
    """Density of the convolution ``f * g``.

    ``(f*g)(n) = sum_{j,k} f(j) g(k) h(j) h(k) g(j,k,n) / h(n)``.  Summation
    runs over unordered pairs so the result is bit-identical under swapping
    the arguments.
    """
    backend = _common_backend(f.density, g.density, haar.values,
                              np.empty(0, dtype=object if table.backend == RATIONAL else float))
    size = f.top + g.top + 1
    if max(f.top, g.top) > table.max_level:
        raise TableExhausted(f"support reaches {max(f.top, g.top)} beyond max_level {table.max_level}")
    h = haar.upto(size, backend)
    fd = _cast(f.density[: f.top + 1], backend)
    gd = _cast(g.density[: g.top + 1], backend)
    out = zeros(size, backend)
    for j, k, coef in _pair_terms(fd, gd, h[: len(fd)], h[: len(gd)]):
        lo, vals = table.row(j, k, backend)
        out[lo:lo + len(vals)] += coef * vals
    return SequenceMeasure(out / h)


def translate(x: int, f: SequenceMeasure, table: ConvolutionTable,
              haar: Optional[HaarWeights] = None) -> SequenceMeasure:
    """Translate ``T_x f(y) = sum_t f(t) g(x, y, t)``."""
    backend = table.backend if f.density.dtype == object else FLOAT
    fd = _cast(f.density, backend)
    size = f.top + x + 1
    if size - 1 > table.max_level:
        raise TableExhausted(f"translation reaches {size - 1} beyond max_level {table.max_level}")
    out = zeros(size, backend)
    supp = f.support
    for y in range(size):
        lo, vals = table.row(x, y, backend)
        acc = out[y]
        for t in supp:
            if lo <= t < lo + len(vals):
                acc = acc + fd[t] * vals[t - lo]
        out[y] = acc
    return SequenceMeasure(out)


def haar_from_table(table: ConvolutionTable, level: Optional[int] = None) -> HaarWeights:
    """Haar weights ``h(0) = 1``, ``h(n) = 1 / g(n, n, 0)``."""
    level = table.max_level if level is None else level
    one = coerce(1, table.backend)
    h = zeros(level + 1, table.backend)
    h[0] = one
    for n in range(1, level + 1):
        mass = table.identity_mass(n)
        if not mass > 0:
            raise DegenerateTable(f"g({n},{n},0) = {mass} is not positive")
        h[n] = one / mass
    return HaarWeights(h)


@dataclass
class AxiomReport:
    passed: bool
    level: int
    tol: float
    pairs_checked: int = 0
    failure: Optional[dict] = None
    notes: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"level: {self.level}", f"tolerance: {self.tol!r}",
               f"pairs_checked: {self.pairs_checked}",
               f"result: {'PASS' if self.passed else 'FAIL'}"]
        if self.failure:
            w = self.failure
            out.append(f"witness: check={w['check']} j={w['j']} k={w['k']} n={w['n']} value={w['value']}")
        out.extend(f"note: {n}" for n in self.notes)
        return out


def verify_axioms(table: ConvolutionTable, tol: float = DEFAULT_TOL,
                  level: Optional[int] = None) -> AxiomReport:
    """Check the hypergroup axioms on every materialized pair ``j <= k``.

    Failures are report content: the first counterexample is returned as the
    witness.  Under the rational backend comparisons are exact.
    """
    level = table.max_level if level is None else level
    exact = table.backend == RATIONAL
    eps = 0 if exact else tol
    report = AxiomReport(passed=True, level=level, tol=0.0 if exact else tol)
    one = coerce(1, table.backend)

    def fail(check, j, k, n, value):
        report.passed = False
        report.failure = {"check": check, "j": j, "k": k, "n": n, "value": str(value)}

    for j, k, lo, vals in table.iter_rows(level):
        report.pairs_checked += 1
        if len(vals):
            i = int(np.argmin(vals))
            if vals[i] < -eps:
                fail("nonnegative", j, k, lo + i, vals[i])
                return report
        total = vals.sum() if len(vals) else coerce(0, table.backend)
        if abs(total - one) > eps:
            fail("total_mass", j, k, -1, total)
            return report
        if j == 0:
            for i, v in enumerate(vals):
                expected = one if lo + i == k else 0
                if abs(v - expected) > eps:
                    fail("identity", j, k, lo + i, v)
                    return report
        if table.kind == "polynomial":
            for i, v in enumerate(vals):
                n = lo + i
                if not (k - j <= n <= j + k) and abs(v) > eps:
                    fail("support", j, k, n, v)
                    return report
        if table.independent_transpose and j != k:
            lo2, vals2 = table.row(k, j)
            if lo2 != lo or len(vals2) != len(vals) or (
                    len(vals) and max(abs(a - b) for a, b in zip(vals, vals2)) > eps):
                fail("commutative", j, k, -1, "transpose differs")
                return report
    if not table.independent_transpose:
        report.notes.append("commutativity holds by construction (rows stored for j <= k)")
    return report
