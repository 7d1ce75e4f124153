"""One-way repeated-measures ANOVA with partial eta squared, Holm-adjusted
post-hoc paired t-tests, Cohen's d, and fatigue questionnaire scoring.

p-values come from an in-package regularized incomplete beta (continued
fraction), so the distribution code is independently checkable against
tabulated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InputError

# conventional 18-item split: items 6-10 (1-based) probe energy, the rest fatigue
ENERGY_ITEMS_DEFAULT = (5, 6, 7, 8, 9)


@dataclass(frozen=True)
class RmAnovaResult:
    F: float
    df1: int
    df2: int
    p: float
    eta_sq_partial: float


@dataclass(frozen=True)
class PairedTResult:
    t: float
    df: int
    p: float
    cohen_d: float


@dataclass(frozen=True)
class VasfScore:
    fatigue: float
    energy: float
    baseline_corrected: bool = False


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise InputError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(F: float, df1: int, df2: int) -> float:
    """Upper tail P(F' >= F) for the F distribution."""
    if F < 0:
        return 1.0
    return betainc_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * F))


def t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p for a t statistic."""
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def rm_anova(data) -> RmAnovaResult:
    """One-way within-subjects ANOVA on a subjects x conditions matrix."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise InputError("data must be a subjects x conditions matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise InputError(f"need >= 2 subjects and >= 2 conditions, got {n} x {k}")
    if not np.all(np.isfinite(x)):
        raise InputError("data matrix must be complete (finite values only)")
    grand = x.mean()
    ss_total = float(np.sum((x - grand) ** 2))
    ss_subject = float(k * np.sum((x.mean(axis=1) - grand) ** 2))
    ss_cond = float(n * np.sum((x.mean(axis=0) - grand) ** 2))
    ss_err = ss_total - ss_subject - ss_cond
    df1 = k - 1
    df2 = (n - 1) * (k - 1)
    if ss_err <= 1e-12 * max(ss_total, 1e-30):
        raise DegenerateDataError(
            "zero within-subject error term; F is undefined for this design"
        )
    F = (ss_cond / df1) / (ss_err / df2)
    return RmAnovaResult(
        F=F,
        df1=df1,
        df2=df2,
        p=f_sf(F, df1, df2),
        eta_sq_partial=ss_cond / (ss_cond + ss_err),
    )


def holm_posthoc(pvals) -> list[float]:
    """Holm step-down adjustment; output matches input order."""
    p = [float(v) for v in pvals]
    if any(not 0.0 <= v <= 1.0 for v in p):
        raise InputError("p-values must lie in [0, 1]")
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


def paired_t(a, b) -> PairedTResult:
    """Two-sided paired t-test with Cohen's d on the differences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("paired_t expects two equal-length vectors")
    n = len(a)
    if n < 2:
        raise InputError("need at least 2 pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateDataError("differences have zero variance")
    mean = float(np.mean(d))
    t = mean / (sd / math.sqrt(n))
    return PairedTResult(
        t=t, df=n - 1, p=t_sf_two_sided(t, n - 1), cohen_d=mean / sd
    )


def score_vasf(
    items,
    baseline: VasfScore | None = None,
    energy_items: tuple[int, ...] = ENERGY_ITEMS_DEFAULT,
) -> VasfScore:
    """Average the 13 fatigue and 5 energy items; optionally baseline-correct."""
    vals = [float(v) for v in items]
    if len(vals) != 18:
        raise InputError(f"VAS-F has 18 items, got {len(vals)}")
    energy_idx = set(energy_items)
    if len(energy_idx) != 5 or not all(0 <= i < 18 for i in energy_idx):
        raise InputError("energy_items must be 5 distinct indices in 0..17")
    fatigue_idx = [i for i in range(18) if i not in energy_idx]
    fatigue = float(np.mean([vals[i] for i in fatigue_idx]))
    energy = float(np.mean([vals[i] for i in energy_idx]))
    if baseline is None:
        return VasfScore(fatigue=fatigue, energy=energy)
    return VasfScore(
        fatigue=fatigue - baseline.fatigue,
        energy=energy - baseline.energy,
        baseline_corrected=True,
    )
