"""Characters, Jacobi matrices, Gaussian quadrature and support estimation.

The orthonormal polynomials ``q_n = sqrt(h(n)) p_n`` satisfy

    x q_n = lambda_{n+1} q_{n+1} + beta_n q_n + lambda_n q_{n-1}

with ``lambda_1 = a_0 sqrt(c_1)``, ``lambda_n = a_0 sqrt(c_n a_{n-1})`` and
``beta_0 = b_0``, ``beta_n = a_0 b_n + b_0``.  Spectral work (eigenvalues,
quadrature, mass points) is done in floating point on the truncated Jacobi
matrix; characters are reported in the ``p`` normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import FLOAT, HaarWeights, SequenceMeasure, coerce, backend_of, zeros
from .errors import EigensolverFailure, InvalidParameter, OrderTooSmall, OutsideDual

DEFAULT_EPS = 1e-3
DEFAULT_MATCH_TOL = 1e-6
EIG_TOL = 1e-12


# ------------------------------------------------------------ eigensolver

def tridiagonal_eigen(diag: Sequence[float], off: Sequence[float], tol: float = EIG_TOL,
                      max_iter: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and first eigenvector components of a symmetric tridiagonal matrix.

    Implicit-shift QL with Wilkinson shifts.  Only the first row of the
    eigenvector matrix is accumulated, which is all Gaussian quadrature
    needs.  An off-diagonal entry is treated as zero once it falls below
    ``tol * (|d_m| + |d_{m+1}|)``.  Results are sorted by eigenvalue.
    """
    d = [float(v) for v in diag]
    n = len(d)
    if n == 0:
        return np.empty(0), np.empty(0)
    if len(off) != n - 1:
        raise ValueError("off-diagonal must have length len(diag) - 1")
    e = [float(v) for v in off] + [0.0]
    z = [0.0] * n
    z[0] = 1.0
    anorm = max(abs(v) for v in d) + 2.0 * max((abs(v) for v in e), default=0.0)
    floor = 2.220446049250313e-16 * anorm

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= tol * dd + floor:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise EigensolverFailure(f"QL iteration did not converge for eigenvalue {l}")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zf = z[i + 1]
                z[i + 1] = s * z[i] + c * zf
                z[i] = c * z[i] - s * zf
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = sorted(range(n), key=lambda k: (d[k], k))
    return np.array([d[k] for k in order]), np.array([z[k] for k in order])


# ------------------------------------------------------------ orthonormal data

@dataclass
class OrthonormalSystem:
    """Jacobi data ``(lambda_n, beta_n)`` of a recurrence family, grown on demand."""

    coeffs: object
    lam: np.ndarray = field(default_factory=lambda: np.empty(0))
    beta: np.ndarray = field(default_factory=lambda: np.empty(0))

    def ensure(self, n: int) -> None:
        """Make ``lam[0..n]`` and ``beta[0..n]`` available."""
        if len(self.lam) > n:
            return
        size = max(n + 1, 2 * len(self.lam))
        a, b, c = self.coeffs.arrays(size, FLOAT)
        lam = np.zeros(size + 1)
        beta = np.zeros(size + 1)
        beta[0] = b[0]
        beta[1:] = a[0] * b[1:size + 1] + b[0]
        if size >= 1:
            lam[1] = a[0] * math.sqrt(c[1])
        ca, _, cc = self.coeffs.exact(size)
        if any(ca[k - 1] * cc[k] <= 0 for k in range(2, size + 1)):
            raise InvalidParameter("c_n a_{n-1} must be positive for an orthonormal system")
        # exact products are positive; float underflow is clamped
        prod = np.maximum(c[2:size + 1] * a[1:size], 5e-324)
        lam[2:] = a[0] * np.sqrt(prod)
        self.lam, self.beta = lam, beta

    def jacobi(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal ``beta_0..beta_{n-1}`` and off-diagonal ``lambda_1..lambda_{n-1}``."""
        self.ensure(n)
        return self.beta[:n].copy(), self.lam[1:n].copy()

    def tail_limits(self, n: int) -> tuple[float, float, float, float]:
        """Mean and spread of ``lambda`` and ``beta`` over indices ``3n/4..n``."""
        self.ensure(n)
        lo = max(1, (3 * n) // 4)
        lam = self.lam[lo:n + 1]
        beta = self.beta[lo:n + 1]
        return (float(lam.mean()), float(lam.max() - lam.min()),
                float(beta.mean()), float(beta.max() - beta.min()))


def orthonormalize(coeffs) -> OrthonormalSystem:
    if getattr(coeffs, "kind", None) != "polynomial":
        raise InvalidParameter("orthonormalization needs a recurrence family")
    system = OrthonormalSystem(coeffs)
    system.ensure(1)
    return system


def orthonormal_values(system: OrthonormalSystem, x: float, n: int) -> np.ndarray:
    """``q_0(x)..q_n(x)`` from the orthonormal recurrence."""
    system.ensure(n + 1)
    lam, beta = system.lam, system.beta
    q = np.zeros(n + 1)
    q[0] = 1.0
    if n >= 1:
        q[1] = (x - beta[0]) / lam[1]
    for i in range(1, n):
        q[i + 1] = ((x - beta[i]) * q[i] - lam[i] * q[i - 1]) / lam[i + 1]
    return q


def minimal_solution(system: OrthonormalSystem, x: float, n: int,
                     depth: Optional[int] = None) -> tuple[np.ndarray, float]:
    """Minimal solution of the orthonormal recurrence at ``x``, normalized ``q_0 = 1``.

    Ratios ``rho_k = q_{k+1}/q_k`` are computed by backward recurrence from
    ``rho_M = 0`` (``M = n + depth``).  Outside the essential spectrum this is
    the only candidate for a bounded eigenvector; it satisfies the first row of
    the Jacobi matrix, and hence is a character, exactly when ``x`` is a mass
    point.  Returns the values and that first-row residual.
    """
    depth = max(n, 64) if depth is None else depth
    top = n + depth
    system.ensure(top + 1)
    lam, beta = system.lam, system.beta
    rho = np.zeros(top + 1)
    r = 0.0
    for k in range(top, 0, -1):
        denom = x - beta[k] - lam[k + 1] * r
        if denom == 0.0:
            raise OutsideDual(f"backward recurrence breaks down at x = {x!r}")
        r = lam[k] / denom
        rho[k - 1] = r
    q = np.zeros(n + 1)
    q[0] = 1.0
    for k in range(n):
        q[k + 1] = q[k] * rho[k]
    residual = x - beta[0] - lam[1] * rho[0]
    return q, float(residual)


def evaluate_character(coeffs, x, n: int, backend: str = FLOAT) -> np.ndarray:
    """``p_0(x)..p_n(x)``; exact under the rational backend for rational ``x``."""
    if n < 0:
        raise InvalidParameter("truncation must be non-negative")
    values = coeffs.character(x, n, backend)
    if values is None:
        raise OutsideDual(f"{x!r} does not label a character of {coeffs.name}")
    return values


# ------------------------------------------------------------ quadrature

@dataclass
class SpectralMeasure:
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    exact: bool = False


def quadrature(system: OrthonormalSystem, order: int) -> SpectralMeasure:
    """Gauss rule of ``order`` nodes for the orthogonality measure (Golub-Welsch)."""
    if order < 1:
        raise InvalidParameter("quadrature order must be at least 1")
    diag, off = system.jacobi(order)
    nodes, first = tridiagonal_eigen(diag, off)
    return SpectralMeasure(nodes, first ** 2, order)


def symmetric_measure(params, order: int, backend: str = FLOAT) -> SpectralMeasure:
    """Plancherel measure of a symmetric hypergroup, lumped for densities on ``0..order-1``.

    ``pi({alpha_k}) = 1 / ||alpha_k||_2^2 = 1 / (b_k (1 + b_k) c_k)``.  For
    ``k >= order`` the character agrees with the identity on ``0..order-1``,
    so the remaining mass is placed at ``x = 1``; the rule is then exact.
    """
    if order < 1:
        raise InvalidParameter("order must be at least 1")
    b, c = params.arrays(order, backend)
    one = coerce(1, backend)
    weights = [one / (b[k] * (one + b[k]) * c[k]) for k in range(1, order)]
    rest = one - sum(weights, coerce(0, backend))
    nodes = [params.label(k) for k in range(1, order)] + [1.0]
    w = np.array(weights + [rest], dtype=object if backend != FLOAT else float)
    return SpectralMeasure(np.array(nodes), w, order, exact=True)


def dual_measure(family, order: int, backend: str = FLOAT) -> SpectralMeasure:
    if family.kind == "symmetric":
        return symmetric_measure(family, order, backend)
    return quadrature(orthonormalize(family), order)


def fourier(f: SequenceMeasure, coeffs, haar: HaarWeights, x) -> float:
    """``f^(x) = sum_n f(n) p_n(x) h(n)``."""
    top = f.top
    backend = backend_of(f.density)
    p = evaluate_character(coeffs, x, top, backend)
    h = haar.upto(top + 1, backend)
    return (f.density[: top + 1] * p * h).sum()


def plancherel_check(f: SequenceMeasure, measure: SpectralMeasure, coeffs,
                     haar: HaarWeights) -> tuple[float, float]:
    """Both sides of ``sum |f|^2 h = int |f^|^2 dpi``."""
    if measure.order < f.top + 1:
        raise OrderTooSmall(f"order {measure.order} cannot integrate degree {2 * f.top}")
    h = haar.upto(f.top + 1, backend_of(f.density))
    d = f.density[: f.top + 1]
    lhs = (d * d * h).sum()
    rhs = 0
    for node, w in zip(measure.nodes, measure.weights):
        fh = fourier(f, coeffs, haar, node)
        rhs = rhs + w * fh * fh
    return lhs, rhs


# ------------------------------------------------------------ support

@dataclass
class MassPoint:
    x: float
    weight: float
    stable: bool


@dataclass
class SupportEstimate:
    essential_interval: tuple[float, float]
    mass_points: list[MassPoint]
    resolution: tuple[int, ...]
    eps: float = DEFAULT_EPS
    match_tol: float = DEFAULT_MATCH_TOL
    exact: bool = False
    interval_source: str = "hull"
    max_gaps: dict = field(default_factory=dict)
    eigenvalues: dict = field(default_factory=dict)

    def stable_points(self) -> list[MassPoint]:
        return [mp for mp in self.mass_points if mp.stable]

    def distance_to_interval(self, x: float) -> float:
        lo, hi = self.essential_interval
        if x < lo:
            return lo - x
        if x > hi:
            return x - hi
        return 0.0

    def find(self, x: float) -> Optional[MassPoint]:
        tol = 1e-12 if self.exact else self.match_tol
        best = None
        for mp in self.stable_points():
            if abs(mp.x - x) <= tol and (best is None or abs(mp.x - x) < abs(best.x - x)):
                best = mp
        return best


def essential_interval(system: OrthonormalSystem, n: int, ctol: float,
                       eigenvalues: Optional[np.ndarray] = None) -> tuple[tuple[float, float], str]:
    """Essential spectrum ``[beta - 2 lambda, beta + 2 lambda]`` from tail limits.

    Falls back to the eigenvalue hull when the tail does not settle.
    """
    lam, lam_spread, beta, beta_spread = system.tail_limits(n)
    if abs(lam - 0.5) <= ctol and abs(beta) <= ctol and lam_spread <= ctol and beta_spread <= ctol:
        return (-1.0, 1.0), "nevai"
    if lam_spread <= ctol and beta_spread <= ctol:
        return (beta - 2.0 * lam, beta + 2.0 * lam), "tail-limits"
    if eigenvalues is None:
        diag, off = system.jacobi(n)
        eigenvalues, _ = tridiagonal_eigen(diag, off)
    return (float(eigenvalues[0]), float(eigenvalues[-1])), "hull"


def estimate_support(system: OrthonormalSystem, truncations: Sequence[int],
                     eps: float = DEFAULT_EPS, match_tol: float = DEFAULT_MATCH_TOL,
                     ctol: float = 1e-4) -> SupportEstimate:
    """Mass points stable across truncations of the Jacobi matrix."""
    truncations = sorted({int(t) for t in truncations})
    if len(truncations) < 2:
        raise InvalidParameter("support estimation needs at least two truncation sizes")
    spectra = {}
    for n in truncations:
        diag, off = system.jacobi(n)
        spectra[n] = tridiagonal_eigen(diag, off)
    big = truncations[-1]
    nodes, first = spectra[big]
    interval, source = essential_interval(system, big, ctol, nodes)
    lo, hi = interval
    est = SupportEstimate(interval, [], tuple(truncations), eps, match_tol,
                          interval_source=source)
    for n in truncations:
        ev = spectra[n][0]
        est.eigenvalues[n] = ev
        inside = ev[(ev >= lo - eps) & (ev <= hi + eps)]
        pts = np.concatenate(([lo], inside, [hi]))
        est.max_gaps[n] = float(np.max(np.diff(np.sort(pts)))) if len(pts) > 1 else 0.0
    for x, z in zip(nodes, first):
        if lo - eps <= x <= hi + eps:
            continue
        stable = all(np.min(np.abs(spectra[n][0] - x)) <= match_tol for n in truncations[:-1])
        est.mass_points.append(MassPoint(float(x), float(z * z), bool(stable)))
    return est


def symmetric_support(params, count: int = 50) -> SupportEstimate:
    """Exact dual of a symmetric hypergroup: labels ``1 - 2**-k`` accumulating at 1."""
    b, c = params.arrays(count, FLOAT)
    points = [MassPoint(params.label(k), float(1.0 / (b[k] * (1 + b[k]) * c[k])), True)
              for k in range(1, count + 1)]
    return SupportEstimate((1.0, 1.0), points, (count,), eps=0.0, match_tol=0.0,
                           exact=True, interval_source="accumulation")


def support_for(family, truncations: Sequence[int], eps: float = DEFAULT_EPS,
                match_tol: float = DEFAULT_MATCH_TOL, ctol: float = 1e-4) -> SupportEstimate:
    if family.kind == "symmetric":
        return symmetric_support(family, min(50, max(truncations)))
    return estimate_support(orthonormalize(family), truncations, eps, match_tol, ctol)


def is_isolated(x: float, estimate: SupportEstimate, sep: float = DEFAULT_EPS) -> bool:
    """Whether ``x`` is a stable mass point separated from the rest of the support.

    For exactly known duals any positive separation counts.
    """
    mp = estimate.find(float(x))
    if mp is None:
        return False
    need = 0.0 if estimate.exact else sep

    def far(dist):
        return dist > need if estimate.exact else dist >= need

    if not far(estimate.distance_to_interval(mp.x)):
        return False
    return all(far(abs(other.x - mp.x)) for other in estimate.mass_points if other is not mp)


def character_values(family, x, n: int, support: Optional[SupportEstimate] = None,
                     backend: str = FLOAT) -> tuple[np.ndarray, str]:
    """Character values at ``x`` and how they were obtained.

    At a stable mass point of a recurrence family the minimal solution is
    used (forward recurrence amplifies the dominant solution there);
    elsewhere the forward recurrence, or the closed form for symmetric
    hypergroups.
    """
    if family.kind == "symmetric":
        return evaluate_character(family, x, n, backend), "closed-form"
    if support is not None and not support.exact and float(x) != 1.0:
        if support.distance_to_interval(float(x)) > 0 and support.find(float(x)) is not None:
            system = orthonormalize(family)
            q, _ = minimal_solution(system, float(x), n)
            h = family.haar(n, FLOAT).values
            return q / np.sqrt(h), "minimal-solution"
    return evaluate_character(family, x, n, backend), "forward"
