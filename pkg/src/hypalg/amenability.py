"""Alpha-amenability classification and explicit unique alpha-means.

A character ``alpha`` has a unique alpha-mean exactly when ``alpha`` lies in
``l1(h) ∩ l2(h)`` and is isolated in the dual; the mean is then the density
``alpha / ||alpha||_2^2``.  For Nevai-class families of bounded variation the
interior of ``[-1, 1]`` is decided by whether the Haar weights are bounded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .builders import build_table
from .core import (FLOAT, RATIONAL, ConvolutionTable, HaarWeights, SequenceMeasure, backend_of,
                   coerce, convolve)
from .errors import NotL2, OutsideDual, WindowTooSmall
from .spectral import (DEFAULT_EPS, SupportEstimate, character_values, is_isolated,
                       orthonormalize)

DIVERGENT = math.inf

IDENTITY_ALWAYS_AMENABLE = "IDENTITY_ALWAYS_AMENABLE"
UNIQUE_MEAN = "UNIQUE_MEAN"
AMENABLE = "AMENABLE"
NOT_AMENABLE = "NOT_AMENABLE"
OUTSIDE_DUAL = "OUTSIDE_DUAL"
INCONCLUSIVE = "INCONCLUSIVE"

CLAUSES = {
    "identity": "identity character: commutative hypergroups are always 1-amenable",
    "outside": "character unbounded over the window: point is not in the dual",
    "unique": "alpha in l1 and l2 and isolated: unique mean alpha/||alpha||_2^2",
    "nevai-unbounded": "BV and Nevai M(0,1), |x~|<1, h unbounded: not alpha-amenable",
    "nevai-bounded": "BV and Nevai M(0,1), |x~|<1, h bounded: alpha-amenable",
    "positive": "positive isolated character: only the identity can carry a unique mean",
    "unverified": "candidate mean failed verification",
    "undecided": "no classification rule applies",
}

DEFAULT_CTOL = 1e-4
DEFAULT_MARGIN = 0.05
DEFAULT_BOUND = 1e3
MEAN_TAIL = 1e-10
NORMALIZATION_TOL = 1e-9
IDEMPOTENCY_TOL = 1e-8
EIGEN_TOL = 1e-8
EIGEN_RANGE = 10


@dataclass
class ClassFlags:
    compact_type: bool
    nevai_M01: bool
    bounded_variation: bool
    haar_bounded: bool
    lambda_limit: Optional[float] = None
    beta_limit: Optional[float] = None
    window: int = 0
    ctol: float = DEFAULT_CTOL
    evidence: dict = field(default_factory=dict)

    def x_tilde(self, x: float) -> Optional[float]:
        """Orthonormal-variable position of ``x`` relative to the essential interval."""
        if self.nevai_M01:
            return float(x)
        if self.lambda_limit is None or self.lambda_limit <= self.ctol:
            return None
        return (float(x) - self.beta_limit) / (2.0 * self.lambda_limit)


def classify_family(family, window: int = 512, ctol: float = DEFAULT_CTOL) -> ClassFlags:
    """Compact type, Nevai M(0,1), bounded variation and bounded Haar weights."""
    if window < 16:
        raise WindowTooSmall(f"window {window} < 16")
    h = family.haar(window, FLOAT).values
    half = window // 2
    with np.errstate(over="ignore", invalid="ignore"):
        sup_full = float(np.max(h))
        sup_half = float(np.max(h[: half + 1]))
    haar_bounded = bool(np.isfinite(sup_full) and sup_full <= (1 + ctol) * sup_half)
    evidence = {"haar_sup_window": sup_full, "haar_sup_half": sup_half}
    if family.kind == "symmetric":
        evidence["note"] = "symmetric hypergroup: recurrence classes do not apply"
        return ClassFlags(False, False, False, haar_bounded, window=window, ctol=ctol,
                          evidence=evidence)

    lo = (3 * window) // 4
    a, b, c = family.arrays(window, FLOAT)
    tail_a = a[lo:window + 1]
    tail_b = b[lo:window + 1]
    tail_c = c[lo:window + 1]
    compact_numeric = bool(max(tail_a.max(), tail_c.max()) <= ctol
                           and np.max(np.abs(1 - tail_b)) <= ctol)
    compact_tail = family.tail_limits is not None and tuple(family.tail_limits) == (0, 1, 0)
    evidence.update({
        "a_tail_max": float(tail_a.max()), "c_tail_max": float(tail_c.max()),
        "b_tail_dev_from_1": float(np.max(np.abs(1 - tail_b))),
        "compact_by_tail_rule": bool(compact_tail),
    })

    system = orthonormalize(family)
    system.ensure(window + 1)
    lam = system.lam[: window + 1]
    beta = system.beta[: window + 1]
    nevai = bool(np.max(np.abs(lam[lo:] - 0.5)) <= ctol and np.max(np.abs(beta[lo:])) <= ctol)
    var = np.abs(np.diff(lam[1:])) + np.abs(np.diff(beta[1:]))
    partial = np.concatenate(([0.0], np.cumsum(var)))
    bv_increment = float(partial[window - 1] - partial[half - 1])
    lam_lim = float(lam[lo:].mean())
    beta_lim = float(beta[lo:].mean())
    evidence.update({
        "lambda_limit": lam_lim, "beta_limit": beta_lim,
        "lambda_tail_dev_from_half": float(np.max(np.abs(lam[lo:] - 0.5))),
        "beta_tail_max_abs": float(np.max(np.abs(beta[lo:]))),
        "bv_partial_sum": float(partial[window - 1]), "bv_increment": bv_increment,
    })
    return ClassFlags(
        compact_type=compact_numeric or compact_tail,
        nevai_M01=nevai,
        bounded_variation=bv_increment <= ctol,
        haar_bounded=haar_bounded,
        lambda_limit=lam_lim,
        beta_limit=beta_lim,
        window=window,
        ctol=ctol,
        evidence=evidence,
    )


@dataclass
class CharacterNorms:
    x: float
    l1: float
    l2sq: float
    ratio_estimate: float
    closed_form_ratio: Optional[float]
    l1_tail: float
    l2_tail: float
    truncation: int
    source: str
    values: np.ndarray = field(repr=False, default=None)
    exact_l1: object = field(repr=False, default=None)
    exact_l2sq: object = field(repr=False, default=None)

    @property
    def l1_converged(self) -> bool:
        return self.l1 != DIVERGENT

    @property
    def l2_converged(self) -> bool:
        return self.l2sq != DIVERGENT


def _decay(terms: np.ndarray, margin: float) -> tuple[bool, float, float, float]:
    """Partial sum, geometric rate over the last two blocks and tail bound.

    Returns ``(converged, partial, rate, tail)``.  Terms that vanish (finite
    support or underflow) give rate 0 and a zero tail.
    """
    if not np.all(np.isfinite(terms)):
        return False, math.inf, math.inf, math.inf
    partial = float(np.sum(terms))
    live = np.nonzero(terms > 1e-290)[0]
    if len(live) == 0:
        return True, partial, 0.0, 0.0
    end = int(live[-1])
    vanished = end < len(terms) - 1
    block = max(end // 4, 2)
    last = terms[max(end - block + 1, 0):end + 1]
    prev = terms[max(end - 2 * block + 1, 0):max(end - block + 1, 0)]
    m_last = float(np.max(last))
    m_prev = float(np.max(prev)) if len(prev) else 0.0
    if m_prev > 0:
        rate = (m_last / m_prev) ** (1.0 / block)
    else:
        rate = 0.0
    if vanished:
        return True, partial, rate, 0.0
    if rate <= 1.0 - margin:
        return True, partial, rate, m_last * rate / (1.0 - rate)
    return False, partial, rate, math.inf


def closed_form_ratio(x_tilde: Optional[float]) -> Optional[float]:
    """``(|x| + sqrt(x^2 - 1))^{-1}``, equal to 1 on ``[-1, 1]``."""
    if x_tilde is None:
        return None
    ax = abs(x_tilde)
    if ax <= 1.0:
        return 1.0
    return 1.0 / (ax + math.sqrt(ax * ax - 1.0))


def character_norms(x, family, haar: HaarWeights, N: int = 512,
                    margin: float = DEFAULT_MARGIN, support: Optional[SupportEstimate] = None,
                    flags: Optional[ClassFlags] = None, backend: str = FLOAT) -> CharacterNorms:
    """``||alpha_x||_1`` and ``||alpha_x||_2^2`` against the Haar weights.

    Norms are certified only when the terms decay geometrically with rate at
    most ``1 - margin``; otherwise the norm is reported as ``DIVERGENT``.
    """
    if N < 32:
        raise WindowTooSmall(f"character norms need N >= 32, got {N}")
    values, source = character_values(family, x, N, support, backend)
    if values is None:
        raise OutsideDual(f"{x!r} does not label a character")
    h = haar.upto(N + 1, backend_of(values) if haar.backend == RATIONAL else FLOAT)
    vf = values.astype(float) if values.dtype == object else values
    hf = h.astype(float) if h.dtype == object else h
    with np.errstate(over="ignore", invalid="ignore"):
        t1 = np.where(vf == 0, 0.0, np.abs(vf) * hf)
        t2 = np.where(vf == 0, 0.0, vf * vf * hf)
    ok1, s1, rate1, tail1 = _decay(t1, margin)
    ok2, s2, rate2, tail2 = _decay(t2, margin)
    xt = flags.x_tilde(float(x)) if flags is not None else None
    norms = CharacterNorms(
        x=float(x),
        l1=s1 + tail1 if ok1 else DIVERGENT,
        l2sq=s2 if ok2 else DIVERGENT,
        ratio_estimate=rate1,
        closed_form_ratio=closed_form_ratio(xt),
        l1_tail=tail1,
        l2_tail=tail2,
        truncation=N,
        source=source,
        values=values,
    )
    if values.dtype == object and ok1 and ok2 and tail1 == 0 and tail2 == 0:
        hv = h if h.dtype == object else np.array([coerce(v, RATIONAL) for v in h], dtype=object)
        norms.exact_l1 = sum((abs(v) * w for v, w in zip(values, hv)), coerce(0, RATIONAL))
        norms.exact_l2sq = sum((v * v * w for v, w in zip(values, hv)), coerce(0, RATIONAL))
    return norms


@dataclass
class AlphaMean:
    x: float
    density: SequenceMeasure
    l1_norm: float
    l2_norm_sq: object
    truncation: int
    tail_bound: float
    residuals: dict
    source: str

    @property
    def verified(self) -> bool:
        r = self.residuals
        return (r["normalization"] <= NORMALIZATION_TOL and r["idempotency"] <= IDEMPOTENCY_TOL
                and r["eigen"] <= EIGEN_TOL)


def _mean_truncation(terms: np.ndarray, scale: float, tail: float) -> tuple[int, float]:
    """Smallest M with l1(h) mass of the mean beyond M at most MEAN_TAIL."""
    after = np.concatenate((np.cumsum(terms[::-1])[::-1][1:], [0.0])) / scale + tail / scale
    ok = np.nonzero(after <= MEAN_TAIL)[0]
    if len(ok) == 0:
        return len(terms) - 1, float(after[-1])
    m = int(ok[0])
    return m, float(after[m])


def construct_mean(x, family, haar: HaarWeights, table: ConvolutionTable, N: int = 512,
                   support: Optional[SupportEstimate] = None,
                   norms: Optional[CharacterNorms] = None,
                   margin: float = DEFAULT_MARGIN) -> AlphaMean:
    """The candidate unique mean ``alpha_x / ||alpha_x||_2^2`` with its checks.

    Attached residuals: ``|<m, alpha> - 1|``, ``||m*m - m||_{l1(h)}`` and
    ``max |<m, T_y f> - alpha(y) <m, f>|`` over indicator densities ``f`` of
    ``{0..10}`` and ``y <= 10``.
    """
    backend = table.backend
    if norms is None:
        norms = character_norms(x, family, haar, N, margin, support, backend=backend)
    if not norms.l2_converged:
        raise NotL2(f"||alpha_x||_2 diverges at x = {x!r}: no mean alpha/||alpha||_2^2")
    values = norms.values
    exact = values.dtype == object and norms.exact_l2sq is not None
    hf = haar.upto(len(values), FLOAT)
    vf = values.astype(float) if values.dtype == object else values
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.where(vf == 0, 0.0, np.abs(vf) * hf)
    if exact:
        l2sq = norms.exact_l2sq
        nz = [i for i, v in enumerate(values) if v != 0]
        M, tail = (nz[-1] if nz else 0), 0.0
        dens = values[: M + 1] / l2sq
        if haar.backend != RATIONAL:
            exact = False
            dens = dens.astype(float)
    else:
        l2sq = norms.l2sq
        M, tail = _mean_truncation(terms, l2sq, norms.l1_tail)
        dens = vf[: M + 1] / l2sq
    if M > table.max_level:
        from .errors import TableExhausted
        raise TableExhausted(f"mean support {M} exceeds table max_level {table.max_level}")
    mean = SequenceMeasure(dens)
    work = RATIONAL if exact and haar.backend == RATIONAL else FLOAT
    hw = haar.upto(min(len(haar), max(2 * M + 1, 2 * EIGEN_RANGE + 1)), work)
    vals_w = values if work == RATIONAL else vf

    pairing = (dens * vals_w[: M + 1] * hw[: M + 1]).sum()
    res_norm = abs(pairing - 1)

    square = convolve(mean, mean, table, HaarWeights(hw))
    diff = square.padded(len(square)) - mean.padded(len(square))
    res_idem = (abs(diff) * hw[: len(square)]).sum()

    res_eigen = 0
    for y in range(EIGEN_RANGE + 1):
        for t in range(EIGEN_RANGE + 1):
            lhs = 0
            for n in range(abs(t - y), min(t + y, M) + 1):
                g = table.entry(y, n, t)
                if work == FLOAT:
                    g = float(g)
                lhs = lhs + dens[n] * hw[n] * g
            m_t = dens[t] if t <= M else 0
            rhs = vals_w[y] * m_t * hw[t]
            res_eigen = max(res_eigen, abs(lhs - rhs))

    residuals = {"normalization": res_norm, "idempotency": res_idem, "eigen": res_eigen}
    return AlphaMean(
        x=float(x), density=mean, l1_norm=norms.l1, l2_norm_sq=l2sq, truncation=M,
        tail_bound=tail, residuals=residuals, source=norms.source,
    )



def resolve_character(x, family, support: SupportEstimate, window: int = 512,
                      bound: float = DEFAULT_BOUND, backend: str = FLOAT,
                      evidence: Optional[dict] = None) -> tuple[float, np.ndarray, str]:
    """Character values at ``x`` after the dual-membership test.

    Points within ``match_tol`` of a stable mass point are snapped onto it.
    Raises ``OutsideDual`` when ``x`` labels no character or the values exceed
    ``bound`` over the last quarter of the window.
    """
    evidence = {} if evidence is None else evidence
    x = float(x)
    if family.kind == "polynomial" and not support.exact:
        snap = support.find(x)
        if snap is not None and snap.x != x:
            evidence["snapped_to_mass_point"] = snap.x
            x = snap.x
    if family.kind == "symmetric" and family.index_of(x) is None:
        evidence["reason"] = "not the label of a character"
        raise OutsideDual(f"x = {x!r} labels no character of this symmetric hypergroup")
    values, source = character_values(family, x, window, support, backend)
    evidence["character_source"] = source
    vf = values.astype(float) if values.dtype == object else values
    tail = np.abs(vf[(3 * window) // 4:])
    sup_tail = float(np.max(tail)) if np.all(np.isfinite(tail)) else math.inf
    evidence["sup_last_quarter"] = sup_tail
    if not sup_tail <= bound:
        evidence["reason"] = f"sup over the last quarter of the window exceeds B = {bound!r}"
        raise OutsideDual(f"x = {x!r}: character values grow past B = {bound!r} (OUTSIDE_DUAL)")
    return x, values, source


@dataclass
class AmenabilityReport:
    x: float
    verdict: str
    clause: str
    evidence: dict = field(default_factory=dict)
    mean: Optional[AlphaMean] = None
    isolated: bool = False
    norms: Optional[CharacterNorms] = None


def _is_positive(values: np.ndarray) -> bool:
    vf = values.astype(float) if values.dtype == object else values
    live = vf[np.abs(vf) > 1e-290]
    return bool(len(live) and np.all(live > 0))


def verdict(x, family, flags: ClassFlags, support: SupportEstimate,
            norms: Optional[CharacterNorms] = None, *, haar: Optional[HaarWeights] = None,
            table: Optional[ConvolutionTable] = None, window: int = 512,
            bound: float = DEFAULT_BOUND, sep: float = DEFAULT_EPS,
            margin: float = DEFAULT_MARGIN, backend: str = FLOAT) -> AmenabilityReport:
    """Classify alpha-amenability at the character labelled ``x``.

    Rules are applied in order: identity, dual membership, unique mean
    (converged norms and isolation, mean verified), the Nevai/BV interior
    rules, otherwise inconclusive.
    """
    x = float(x)
    evidence: dict = {"window": window, "bound": bound, "sep": sep}

    if family.is_identity(x):
        return AmenabilityReport(x, IDENTITY_ALWAYS_AMENABLE, CLAUSES["identity"], evidence)

    haar = haar or family.haar(window, backend)
    try:
        x, values, _ = resolve_character(x, family, support, window, bound, backend, evidence)
    except OutsideDual:
        return AmenabilityReport(x, OUTSIDE_DUAL, CLAUSES["outside"], evidence)

    if norms is None:
        norms = character_norms(x, family, haar, window, margin, support, flags, backend)
    isolated = is_isolated(x, support, sep)
    xt = flags.x_tilde(x)
    evidence.update({"l1": norms.l1, "l2sq": norms.l2sq, "ratio_estimate": norms.ratio_estimate,
                     "closed_form_ratio": norms.closed_form_ratio, "x_tilde": xt,
                     "isolated": isolated})
    report = AmenabilityReport(x, INCONCLUSIVE, CLAUSES["undecided"], evidence,
                               isolated=isolated, norms=norms)

    if norms.l1_converged and norms.l2_converged and isolated:
        if _is_positive(values):
            report.clause = CLAUSES["positive"]
            return report
        if table is None:
            table = build_table(family, min(window, 256), backend)
        mean = construct_mean(x, family, haar, table, window, support, norms, margin)
        evidence["residuals"] = {k: float(v) for k, v in mean.residuals.items()}
        report.mean = mean
        if mean.verified:
            report.verdict = UNIQUE_MEAN
            report.clause = CLAUSES["unique"]
        else:
            report.clause = CLAUSES["unverified"]
        return report

    if (flags.nevai_M01 and flags.bounded_variation and xt is not None and -1.0 < xt < 1.0):
        if flags.haar_bounded:
            report.verdict, report.clause = AMENABLE, CLAUSES["nevai-bounded"]
        else:
            report.verdict, report.clause = NOT_AMENABLE, CLAUSES["nevai-unbounded"]
    return report


def corollary_check(reports: Sequence[AmenabilityReport], support: SupportEstimate,
                    tol: float = 1e-10) -> bool:
    """If every sampled nontrivial character has a unique mean, 1 is in the support."""
    nontrivial = [r for r in reports if r.verdict not in (IDENTITY_ALWAYS_AMENABLE, OUTSIDE_DUAL)]
    if not nontrivial or any(r.verdict != UNIQUE_MEAN for r in nontrivial):
        return True
    if support.distance_to_interval(1.0) <= tol:
        return True
    return any(abs(mp.x - 1.0) <= tol for mp in support.mass_points)


def dual_points(family, support: SupportEstimate) -> list[float]:
    """Detected nontrivial dual points: stable mass points other than the identity."""
    return [mp.x for mp in support.stable_points() if not family.is_identity(mp.x)]
