"""Sample-based auction learning.

Every learner reads a sample matrix row by row (one row is one joint draw of
all buyers' values), never reusing a row across phases.  Sample-count formulas
are the asymptotic expressions with leading constant 1, multiplied by
``LearnerConfig.constant_scale`` so desk-scale experiments can use small ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import (
    DiscreteDistribution,
    DomainError,
    ProductDistribution,
    ValueGrid,
    empirical_from,
)
from .mechanisms import RankMechanism, build_myerson, expected_revenue_exact

VARIANTS = ("finite", "bounded_additive", "bounded_multiplicative", "regular", "mhr")
GRID_VARIANTS = VARIANTS[1:] + ("signals",)


def as_sample_matrix(samples) -> np.ndarray:
    """Validate an ``(m, n)`` array of non-negative values (a 1-D input is one buyer)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError("samples must be a rectangular (m, n) matrix")
    if arr.size and (np.any(arr < 0) or not np.all(np.isfinite(arr))):
        raise DomainError("sample values must be finite and non-negative")
    return arr


@dataclass(frozen=True)
class LearnerConfig:
    eps: float
    variant: str = "regular"
    h: Optional[float] = None
    constant_scale: float = 1.0
    gamma: float = 0.1
    # explicit sizes for the constant-approximation phase (override the formulas)
    srev_rows: Optional[int] = None
    vcg_runs: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant.startswith("bounded") and (self.h is None or self.h <= 0):
            raise DomainError(f"variant {self.variant!r} needs a positive value bound h")
        if self.variant == "bounded_multiplicative" and self.h < 1:
            raise DomainError("multiplicative rounding needs h >= 1 (values live in [1, h])")
        if self.constant_scale <= 0:
            raise DomainError("constant_scale must be positive")
        if not (0 < self.gamma < 1):
            raise DomainError("gamma must lie in (0, 1)")
        if self.srev_rows is not None and self.srev_rows < 2:
            raise DomainError("srev_rows must be >= 2")
        if self.vcg_runs is not None and self.vcg_runs < 1:
            raise DomainError("vcg_runs must be >= 1")


# ---------------------------------------------------------------------------
# Constant-factor revenue estimate
# ---------------------------------------------------------------------------


def srev_estimate(samples_i) -> float:
    """Median-guarded empirical reserve revenue for one buyer.

    Maximizes ``v * P_hat(X >= v)`` over sampled values whose empirical sale
    probability is at least one half; ties go to the smaller price.
    """
    vals = np.sort(np.asarray(samples_i, dtype=np.float64).ravel())
    m = vals.size
    if m < 2:
        raise DomainError(f"srev_estimate needs at least 2 samples, got {m}")
    uniq = np.unique(vals)
    tail = (m - np.searchsorted(vals, uniq, side="left")) / m
    ok = tail >= 0.5 - 1e-12
    rev = np.where(ok, uniq * tail, -np.inf)
    best = rev.max()
    k = int(np.argmax(rev >= best - 1e-12 * max(1.0, best)))
    return float(rev[k])


def srev_rows_required(n: int, eps: float, scale: float = 1.0) -> int:
    return max(2, math.ceil(scale * math.log(n / eps)))


def vcg_runs_required(n: int, eps: float, scale: float = 1.0) -> int:
    return max(1, math.ceil(scale * n / eps * math.log(1.0 / eps)))


@dataclass(frozen=True)
class ApproxResult:
    srev_per_buyer: tuple[float, ...]
    srev: float
    cap: float
    apx: float
    rows_used: int


def approx_opt(
    samples,
    eps: float,
    srev_rows: Optional[int] = None,
    vcg_runs: Optional[int] = None,
    constant_scale: float = 1.0,
) -> ApproxResult:
    """Constant-factor estimate ``Apx`` of the optimal revenue.

    The first ``srev_rows`` rows give per-buyer single-buyer estimates whose sum
    is ``SRev``; each of the next ``vcg_runs`` row pairs runs a second-price
    auction among two copies of every buyer, values capped at ``SRev / eps``.
    """
    arr = as_sample_matrix(samples)
    m, n = arr.shape
    if not (0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    a = srev_rows if srev_rows is not None else srev_rows_required(n, eps, constant_scale)
    b = vcg_runs if vcg_runs is not None else vcg_runs_required(n, eps, constant_scale)
    need = a + 2 * b
    if m < need:
        raise DomainError(f"approx_opt needs {need} rows ({a} for SRev + 2 x {b} VCG runs), got {m}")
    per = tuple(srev_estimate(arr[:a, i]) for i in range(n))
    srev = float(sum(per))
    cap = srev / eps
    vcg = np.minimum(arr[a:need], cap).reshape(b, 2 * n)
    payments = np.partition(vcg, -2, axis=1)[:, -2] if 2 * n >= 2 else np.zeros(b)
    return ApproxResult(per, srev, cap, float(payments.mean()), need)


# ---------------------------------------------------------------------------
# Value grids
# ---------------------------------------------------------------------------


def power_grid(eps: float, low: float, high: float, include_zero: bool = False) -> ValueGrid:
    """Integer powers of ``(1 - eps)`` (anchored at 1) covering ``[low, high]``.

    The top element is the largest power not exceeding ``high``; the bottom is
    the largest power not exceeding ``low``, so every value in the range has a
    grid point at most one factor ``(1 - eps)`` below it.
    """
    if not (0 < low <= high):
        raise DomainError("power grid needs 0 < low <= high")
    base = -math.log1p(-eps)
    k_top = math.floor(math.log(high) / base + 1e-9)
    k_bot = math.floor(math.log(low) / base + 1e-9)
    vals = (1.0 - eps) ** -np.arange(k_top, k_bot - 1, -1, dtype=np.float64)
    if include_zero:
        vals = np.append(vals, 0.0)
    return ValueGrid(vals)


def build_value_grid(anchor: float, eps: float, n: int = 1, variant: str = "regular") -> ValueGrid:
    """Rounding grid for a learner variant.

    ``anchor`` is the revenue estimate ``Apx`` for the anchored variants
    (regular, mhr, signals) and the value bound ``h`` for the bounded ones.
    """
    if anchor <= 0:
        raise DomainError(f"grid anchor must be positive, got {anchor}")
    if not (0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    ratio = 1.0 - eps
    if variant == "regular":
        return ValueGrid.geometric(8.0 / eps * anchor, ratio, eps / 8.0 * anchor)
    if variant == "mhr":
        top = max(8.0 * math.log(1.0 / eps), eps / 8.0) * anchor
        return ValueGrid.geometric(top, ratio, eps / 8.0 * anchor)
    if variant == "signals":
        return ValueGrid.geometric(2.0 / eps * anchor, ratio, eps / n**2 * anchor)
    if variant == "bounded_additive":
        return ValueGrid.arithmetic(eps, anchor)
    if variant == "bounded_multiplicative":
        return power_grid(eps, 1.0, max(anchor, 1.0), include_zero=True)
    raise DomainError(f"variant {variant!r} has no value grid")


def empirical_on_grid(values, grid: ValueGrid) -> DiscreteDistribution:
    """Empirical distribution of values rounded down to ``grid``, keeping every grid point.

    Unobserved grid points carry zero mass so a learned mechanism has a cell
    for every value a future bidder can be rounded to.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise DomainError("need at least one sample")
    asc = grid.ascending
    tol = 1e-12 * np.maximum(1.0, vals)
    idx = np.searchsorted(asc, vals + tol, side="right") - 1
    if np.any(idx < 0):
        raise DomainError(f"value {vals[idx < 0][0]:g} lies below every grid point")
    counts = np.bincount(idx, minlength=asc.size)
    return DiscreteDistribution(asc, counts / vals.size)


# ---------------------------------------------------------------------------
# Sample counts
# ---------------------------------------------------------------------------


def main_rows_required(cfg: LearnerConfig, n: int, support_size: Optional[int] = None) -> int:
    """Rows of the main (empirical Myerson) phase for ``cfg.variant``."""
    e, g, s = cfg.eps, cfg.gamma, cfg.constant_scale
    log_g = math.log(1.0 / g)
    if cfg.variant == "finite":
        # alpha = h, beta = eps h: alpha h / beta^2 = eps^-2, log(h / (gamma beta)) = log(1 / (gamma eps))
        nv = n * max(1, support_size or 1)
        core = e**-2 * (nv * math.log(max(nv, 2)) + math.log(1.0 / (g * e)))
    elif cfg.variant == "bounded_additive":
        h = cfg.h
        core = h**2 * e**-2 * (n * h / e * math.log(max(n * h / e, 2.0)) + log_g)
    elif cfg.variant == "bounded_multiplicative":
        lh = max(math.log(cfg.h), 1.0)
        core = cfg.h * e**-2 * (n / e * lh * math.log(max(n * lh / e, 2.0)) + log_g)
    else:
        body = n / e * math.log(1.0 / e) * math.log(max(n / e, 2.0)) + log_g
        core = (e**-3 if cfg.variant == "regular" else e**-2 * math.log(1.0 / e)) * body
    return max(1, math.ceil(s * core))


def required_rows(cfg: LearnerConfig, n: int, support_size: Optional[int] = None) -> dict:
    """Row budget per phase: ``{"srev", "vcg", "main", "total"}``."""
    srev = vcg = 0
    if cfg.variant in ("regular", "mhr"):
        srev = cfg.srev_rows if cfg.srev_rows is not None else srev_rows_required(n, cfg.eps, cfg.constant_scale)
        runs = cfg.vcg_runs if cfg.vcg_runs is not None else vcg_runs_required(n, cfg.eps, cfg.constant_scale)
        vcg = 2 * runs
    main = main_rows_required(cfg, n, support_size)
    return {"srev": srev, "vcg": vcg, "main": main, "total": srev + vcg + main}


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LearnResult:
    mechanism: RankMechanism
    rows: dict
    approx: Optional[ApproxResult] = None
    grid: Optional[ValueGrid] = None
    empirical: Optional[ProductDistribution] = field(default=None, repr=False)


def learn(samples, cfg: LearnerConfig) -> LearnResult:
    """Run the learner selected by ``cfg.variant`` and report what it consumed."""
    arr = as_sample_matrix(samples)
    m, n = arr.shape
    support = max(np.unique(arr[:, i]).size for i in range(n)) if m else 1
    need = required_rows(cfg, n, support)
    if m < need["total"]:
        raise DomainError(
            f"variant {cfg.variant!r} needs {need['total']} sample rows "
            f"(srev {need['srev']}, vcg {need['vcg']}, main {need['main']}), got {m}"
        )
    approx = None
    if cfg.variant == "finite":
        emp = ProductDistribution(tuple(empirical_from(arr[:, i]) for i in range(n)))
        mech = build_myerson(emp)
        return LearnResult(mech, {**need, "used": m}, None, None, emp)
    if cfg.variant in ("regular", "mhr"):
        approx = approx_opt(arr, cfg.eps, need["srev"], need["vcg"] // 2)
        if approx.apx <= 0:
            raise DomainError("revenue estimate is zero; the value grid cannot be anchored")
        grid = build_value_grid(approx.apx, cfg.eps, n, cfg.variant)
        main = arr[approx.rows_used :]
    else:
        grid = build_value_grid(cfg.h, cfg.eps, n, cfg.variant)
        main = arr
    emp = ProductDistribution(tuple(empirical_on_grid(main[:, i], grid) for i in range(n)))
    mech = build_myerson(emp, grid)
    return LearnResult(mech, {**need, "used": m}, approx, grid, emp)


def learn_empirical_myerson(samples, cfg: LearnerConfig) -> RankMechanism:
    """Empirical Myerson auction learned from ``samples``.

    The returned mechanism treats any future value as the closest cell value
    from below; evaluate it with ``round_down=True``.
    """
    return learn(samples, cfg).mechanism


def learned_revenue(mech: RankMechanism, D: ProductDistribution) -> float:
    """Exact revenue of a learned mechanism on the true distribution."""
    return expected_revenue_exact(mech, D, round_down=True)


__all__ = [
    "ApproxResult",
    "LearnResult",
    "LearnerConfig",
    "VARIANTS",
    "approx_opt",
    "as_sample_matrix",
    "build_value_grid",
    "empirical_on_grid",
    "learn",
    "learn_empirical_myerson",
    "learned_revenue",
    "main_rows_required",
    "power_grid",
    "required_rows",
    "srev_estimate",
]
