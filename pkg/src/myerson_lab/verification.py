"""Executable checks of the structural facts the learning results rely on.

Each suite draws its random instances from a per-trial stream
``make_rng(seed, tag, trial)`` so any reported violation can be replayed from
its trial index alone.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    REV_TOL,
    ContinuousFamily,
    DiscreteDistribution,
    DomainError,
    ProductDistribution,
    ValueGrid,
    dominates,
    round_down_to_grid,
    truncate_at,
)
from .learning import power_grid
from .mechanisms import (
    ORACLE_MAX_PROFILES,
    brute_force_opt,
    build_myerson,
    check_dsic_ir,
    expected_revenue_exact,
    optimal_revenue,
    outcomes_by_index,
)
from .rng import make_rng


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_buyer(rng: np.random.Generator, size: int, max_value: int = 10, integer: bool = True) -> DiscreteDistribution:
    """Random finite distribution; a third of the draws use equal masses to provoke ties."""
    if integer:
        sup = np.sort(rng.choice(np.arange(1, max_value + 1), size=size, replace=False)).astype(np.float64)
    else:
        sup = np.sort(rng.uniform(0.0, max_value, size=size))
        sup = np.unique(sup)
        size = sup.size
    style = rng.integers(3)
    if style == 0:
        probs = np.full(size, 1.0 / size)
    else:
        probs = rng.dirichlet(np.ones(size))
        if style == 2 and size > 1:
            probs[rng.integers(size)] = 0.0
            probs = probs / probs.sum()
    return DiscreteDistribution(sup, probs)


def random_product(
    rng: np.random.Generator,
    max_n: int,
    max_support: int,
    max_profiles: Optional[int] = None,
    max_value: int = 10,
    integer: bool = True,
) -> ProductDistribution:
    """Random product with ``1..max_n`` buyers of ``1..max_support`` atoms each.

    With probability one half all buyers share one support, which makes ironed
    value ties (and hence the tie-breaking rule) matter.
    """
    n = int(rng.integers(1, max_n + 1))
    cap = max_profiles or max_support**max_n
    sizes = []
    for _ in range(n):
        budget = cap // max(1, math.prod(sizes))
        sizes.append(int(rng.integers(1, min(max_support, max(1, budget)) + 1)))
    if rng.random() < 0.5 and integer:
        k = min(sizes)
        shared = np.sort(rng.choice(np.arange(1, max_value + 1), size=k, replace=False)).astype(np.float64)
        buyers = []
        for _ in range(n):
            b = random_buyer(rng, k, max_value, integer)
            buyers.append(DiscreteDistribution(shared, b.probs))
        return ProductDistribution(tuple(buyers))
    return ProductDistribution(tuple(random_buyer(rng, s, max_value, integer) for s in sizes))


def dominating_perturbation(
    D: ProductDistribution,
    strength: float,
    rng: np.random.Generator,
    moves: int = 3,
) -> ProductDistribution:
    """Shift mass upward within each buyer's support; at most ``strength`` moves per buyer.

    The result has the same supports and dominates ``D`` componentwise.
    """
    if not (0 <= strength <= 1):
        raise DomainError(f"strength must lie in [0, 1], got {strength}")
    if strength == 0:
        return D
    out = []
    for d in D:
        probs = d.probs.copy()
        budget = strength
        for _ in range(moves):
            src_ok = np.flatnonzero(probs[:-1] > 0)
            if src_ok.size == 0 or budget <= 0:
                break
            src = int(rng.choice(src_ok))
            dst = int(rng.integers(src + 1, probs.size))
            amount = min(probs[src], budget) * rng.random()
            probs[src] -= amount
            probs[dst] += amount
            budget -= amount
        out.append(DiscreteDistribution(d.support, np.maximum(probs, 0.0)))
    return ProductDistribution(tuple(out))


def _extend_support_upward(D: ProductDistribution, rng: np.random.Generator) -> ProductDistribution:
    """Add a zero-mass atom above each buyer's top value (so perturbations can move mass there)."""
    out = []
    for d in D:
        top = float(d.support[-1]) + float(rng.integers(1, 4))
        out.append(DiscreteDistribution(np.append(d.support, top), np.append(d.probs, 0.0)))
    return ProductDistribution(tuple(out))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    trials: int
    violations: int
    worst_gap: float
    violator_seeds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class SuiteReport:
    """Zero-violation report shared by the verification suites."""

    suite: str
    trials: int
    violations: int
    worst_gap: float
    violator_seeds: list[int] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass(frozen=True)
class ConcentrationCell:
    m: int
    delta: float
    p: float
    frequency: float
    bound: float
    stderr: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + 3 * self.stderr


@dataclass
class ConcentrationReport:
    f_kind: str
    cells: list[ConcentrationCell]

    def to_dict(self) -> dict:
        return {"f_kind": self.f_kind, "cells": [dict(asdict(c), passed=c.passed) for c in self.cells]}

    def rows(self) -> list[dict]:
        return [
            {"m": c.m, "delta": c.delta, "frequency": c.frequency, "bound": c.bound, "stderr": c.stderr}
            for c in self.cells
        ]

    @property
    def violations(self) -> int:
        return sum(not c.passed for c in self.cells)

    @property
    def passed(self) -> bool:
        return self.violations == 0


# ---------------------------------------------------------------------------
# Revenue monotonicity
# ---------------------------------------------------------------------------


def monotonicity_suite(
    n: int,
    support_size: int,
    trials: int,
    seed: int = 0,
    strength: float = 0.5,
) -> MonotonicityReport:
    """Fix the optimal auction of a random ``D0`` and push ``D0`` upward.

    Each trial draws ``1..n`` buyers with ``1..support_size`` atoms.  The gap is
    ``Rev(M0, D) - Rev(M0, D0)`` and must be non-negative.
    """
    violations, worst, bad = 0, math.inf, []
    for t in range(trials):
        rng = make_rng(seed, "monotonicity", t)
        D0 = random_product(rng, n, support_size)
        m0 = build_myerson(D0)
        D = dominating_perturbation(D0, strength, rng)
        gap = expected_revenue_exact(m0, D) - expected_revenue_exact(m0, D0)
        worst = min(worst, gap)
        if gap < -REV_TOL:
            violations += 1
            bad.append(t)
    return MonotonicityReport(trials, violations, 0.0 if trials == 0 else worst, bad)


def opt_dominance_check(
    trials: int,
    seed: int = 0,
    max_n: int = 3,
    max_support: int = 3,
    strength: float = 0.5,
    oracle: bool = True,
) -> SuiteReport:
    """``Opt`` never drops when buyers' distributions move up (a fresh auction is built).

    Half of the trials first add a new top atom, so dominance can enlarge the
    support.  When both instances fit the oracle, the two optima are also
    recomputed by brute force.
    """
    violations, worst, bad = 0, math.inf, []
    mismatches = 0
    for t in range(trials):
        rng = make_rng(seed, "optdom", t)
        D = random_product(rng, max_n, max_support, max_profiles=ORACLE_MAX_PROFILES)
        base = _extend_support_upward(D, rng) if rng.random() < 0.5 else D
        Dhat = dominating_perturbation(base, strength, rng)
        if not all(dominates(a, b) for a, b in zip(Dhat, D)):
            raise AssertionError("perturbation failed to dominate")
        before, after = optimal_revenue(D), optimal_revenue(Dhat)
        gap = after - before
        if oracle:
            for inst, val in ((D, before), (Dhat, after)):
                if inst.num_profiles <= ORACLE_MAX_PROFILES and abs(brute_force_opt(inst) - val) > REV_TOL * max(1.0, val):
                    mismatches += 1
                    bad.append(t)
        worst = min(worst, gap)
        if gap < -REV_TOL:
            violations += 1
            bad.append(t)
    return SuiteReport(
        "optdom",
        trials,
        violations + mismatches,
        0.0 if trials == 0 else worst,
        sorted(set(bad)),
        {"dominance_violations": violations, "oracle_mismatches": mismatches},
    )


@dataclass(frozen=True)
class SequentialResult:
    rev_base: float
    rev_first: float
    rev_second: float

    @property
    def rise(self) -> float:
        return self.rev_first - self.rev_base

    @property
    def fall(self) -> float:
        return self.rev_first - self.rev_second

    @property
    def net(self) -> float:
        return self.rev_second - self.rev_base

    def to_dict(self) -> dict:
        return {
            "rev_base": self.rev_base,
            "rev_first": self.rev_first,
            "rev_second": self.rev_second,
            "rise": self.rise,
            "fall": self.fall,
            "net": self.net,
            "rise_then_fall": self.rise > REV_TOL and self.fall > REV_TOL,
        }


def sequential_example(atoms: int = 10) -> SequentialResult:
    """Two bidders, values uniform on ``[0, 100]`` and ``[0, 1]``, fixed optimal auction.

    Both are discretized at ``atoms`` equal-mass points ``{k/atoms}`` scaled to
    the range (``k = 1..atoms``).  The auction stays the one built for this base
    instance.  First bidder 1 moves to the upper half of its range, then bidder
    2 becomes a point mass at its top value.
    """
    if atoms < 2 or atoms % 2:
        raise DomainError("atoms must be an even integer >= 2")
    b1 = ContinuousFamily.uniform(0.0, 100.0).discretize(atoms, "upper")
    b2 = ContinuousFamily.uniform(0.0, 1.0).discretize(atoms, "upper")
    D0 = ProductDistribution((b1, b2))
    m0 = build_myerson(D0)
    upper = b1.support[b1.support >= 50.0 - 1e-9]
    b1_hi = DiscreteDistribution(b1.support, np.where(b1.support >= 50.0 - 1e-9, 1.0 / upper.size, 0.0))
    D1 = ProductDistribution((b1_hi, b2))
    b2_top = DiscreteDistribution(b2.support, np.eye(atoms)[-1])
    D2 = ProductDistribution((b1_hi, b2_top))
    return SequentialResult(
        expected_revenue_exact(m0, D0), expected_revenue_exact(m0, D1), expected_revenue_exact(m0, D2)
    )


# ---------------------------------------------------------------------------
# Concentration of the empirical product
# ---------------------------------------------------------------------------

F_KINDS = ("indicator", "revenue", "constant")


def concentration_bound(m: int, delta: float, p: float) -> float:
    return 2.0 * math.exp(-2.0 * m * delta**2 / (4.0 * p + delta) - math.log(delta))


def profile_function(f_kind: str, D: ProductDistribution, threshold: Optional[float] = None) -> np.ndarray:
    """Values in ``[0, 1]`` of ``f`` on every profile of ``D`` (``profile_grid`` order).

    ``indicator``: every buyer's value is at least ``threshold`` (default: its
    top atom).  ``revenue``: payment of the optimal auction of ``D`` divided by
    the largest support value.  ``constant``: one half.
    """
    grid, _ = D.profile_grid()
    if f_kind == "indicator":
        vals = np.column_stack([D[i].support[grid[:, i]] for i in range(D.n)])
        thr = np.array([d.support[-1] if threshold is None else threshold for d in D])
        return np.all(vals >= thr - 1e-12, axis=1).astype(np.float64)
    if f_kind == "revenue":
        _, pay = outcomes_by_index(build_myerson(D), grid)
        return pay / max(float(d.support[-1]) for d in D)
    if f_kind == "constant":
        return np.full(grid.shape[0], 0.5)
    raise DomainError(f"unknown f_kind {f_kind!r}; expected one of {F_KINDS}")


def concentration_experiment(
    f_kind: str,
    D: ProductDistribution,
    m_grid: Sequence[int],
    delta_grid: Sequence[float],
    trials: int,
    seed: int = 0,
    threshold: Optional[float] = None,
) -> ConcentrationReport:
    """Failure frequency of ``|E_emp[f] - E_D[f]| >= 2 delta`` against the stated bound.

    ``E_emp`` is the exact expectation under the product of the per-buyer
    empirical distributions (equivalently the average of ``f`` over all
    ``m^n`` cross combinations of the samples).  Because each empirical
    distribution lives on the finite support of ``D``, this sum has at most
    ``|profiles of D|`` terms regardless of ``m``.
    """
    fvals = profile_function(f_kind, D, threshold)
    grid, prob = D.profile_grid()
    p = float(prob @ fvals)
    cdfs = [np.cumsum(d.probs) for d in D]
    cells = []
    for m in m_grid:
        if m < 1:
            raise DomainError("m must be >= 1")
        for delta in delta_grid:
            fails = 0
            for t in range(trials):
                rng = make_rng(seed, f"concentration/{m}/{delta!r}", t)
                weight = np.ones(grid.shape[0])
                for i, c in enumerate(cdfs):
                    idx = np.minimum(np.searchsorted(c, rng.random(m), side="right"), c.size - 1)
                    freq = np.bincount(idx, minlength=c.size) / m
                    weight *= freq[grid[:, i]]
                if abs(float(weight @ fvals) - p) >= 2 * delta:
                    fails += 1
            freq_fail = fails / trials if trials else 0.0
            stderr = math.sqrt(freq_fail * (1 - freq_fail) / trials) if trials else 0.0
            cells.append(ConcentrationCell(int(m), float(delta), p, freq_fail, concentration_bound(m, delta, p), stderr, trials))
    return ConcentrationReport(f_kind, cells)


# ---------------------------------------------------------------------------
# Discretization and truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretizationResult:
    opt_before: float
    opt_after: float
    passed: bool


def rounding_grid(D: ProductDistribution, eps: float, mode: str) -> ValueGrid:
    top = max(float(d.support[-1]) for d in D)
    if mode == "additive":
        return ValueGrid.arithmetic(eps, top)
    if mode == "multiplicative":
        positive = [float(v) for d in D for v in d.support if v > 0]
        low = min(positive) if positive else 1.0
        return power_grid(eps, min(low, 1.0), max(top, 1.0), include_zero=True)
    raise DomainError(f"unknown rounding mode {mode!r}")


def discretization_check(D: ProductDistribution, eps: float, mode: str) -> DiscretizationResult:
    """Round every value down to the grid and compare optimal revenues.

    ``additive`` rounds to multiples of ``eps`` and allows a loss of ``eps``;
    ``multiplicative`` rounds to powers of ``1 - eps`` and allows a factor
    ``1 - eps``.
    """
    grid = rounding_grid(D, eps, mode)
    rounded = ProductDistribution(tuple(round_down_to_grid(d, grid) for d in D))
    before, after = optimal_revenue(D), optimal_revenue(rounded)
    floor = before - eps if mode == "additive" else (1 - eps) * before
    return DiscretizationResult(before, after, after >= floor - REV_TOL)


def discretization_suite(trials: int, seed: int, eps_values: Sequence[float] = (0.1, 0.3)) -> SuiteReport:
    violations, worst, bad = 0, math.inf, []
    for mode in ("additive", "multiplicative"):
        for eps in eps_values:
            for t in range(trials):
                rng = make_rng(seed, f"discretize/{mode}/{eps!r}", t)
                D = random_product(rng, 2, 3, max_value=10, integer=False)
                res = discretization_check(D, eps, mode)
                floor = res.opt_before - eps if mode == "additive" else (1 - eps) * res.opt_before
                worst = min(worst, res.opt_after - floor)
                if not res.passed:
                    violations += 1
                    bad.append(t)
    total = 2 * len(eps_values) * trials
    return SuiteReport("discretize", total, violations, 0.0 if total == 0 else worst, sorted(set(bad)))


def high_value_bounds(q: Sequence[float], eps: float) -> tuple[bool, bool]:
    """``(eps >= P(any), P(any) >= (1 - eps) sum q)`` where ``P(any) = 1 - prod(1 - q)``."""
    q = np.asarray(q, dtype=np.float64)
    p_any = 1.0 - float(np.prod(1.0 - q))
    return p_any <= eps + 1e-12, p_any >= (1 - eps) * float(q.sum()) - 1e-12


@dataclass(frozen=True)
class TailBoundResult:
    opt: float
    cap: float
    q: tuple[float, ...]
    q_ok: bool
    upper_ok: bool
    lower_ok: bool
    opt_truncated: float
    headline_ok: bool

    @property
    def passed(self) -> bool:
        return self.q_ok and self.upper_ok and self.lower_ok and self.headline_ok

    def to_dict(self) -> dict:
        return dict(asdict(self), passed=self.passed)


def tail_bound_check(D: ProductDistribution, eps: float) -> TailBoundResult:
    """Truncate every buyer at ``Opt / eps`` and check the high-value and revenue bounds."""
    if not (0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    opt = optimal_revenue(D)
    cap = opt / eps
    q = tuple(float(d.tail(cap)) for d in D)
    q_ok = all(x <= eps + 1e-12 for x in q)
    upper_ok, lower_ok = high_value_bounds(q, eps)
    trunc = ProductDistribution(tuple(truncate_at(d, cap) for d in D))
    opt_t = optimal_revenue(trunc)
    return TailBoundResult(opt, cap, q, q_ok, upper_ok, lower_ok, opt_t, opt_t >= (1 - 4 * eps) * opt - REV_TOL)


def tail_suite(eps_values: Sequence[float] = (0.1, 0.25), atoms: int = 50, scales: Sequence[float] = (1.0,)) -> SuiteReport:
    results = {}
    violations = 0
    worst = math.inf
    for n in (1, 2):
        for c in scales:
            D = ProductDistribution.iid(ContinuousFamily.lb_type1(c).discretize(atoms), n)
            for eps in eps_values:
                r = tail_bound_check(D, eps)
                results[f"n={n},c={c:g},eps={eps:g}"] = r.to_dict()
                worst = min(worst, r.opt_truncated - (1 - 4 * eps) * r.opt)
                violations += not r.passed
    return SuiteReport("tail", len(results), violations, worst, [], results)


# ---------------------------------------------------------------------------
# Oracle regression
# ---------------------------------------------------------------------------


def oracle_suite(trials: int, seed: int = 0, max_n: int = 3, max_support: int = 3) -> SuiteReport:
    """Myerson revenue equals the brute-force optimum, and the auction is DSIC and IR."""
    mismatches = dsic = 0
    worst, bad = 0.0, []
    for t in range(trials):
        rng = make_rng(seed, "oracle", t)
        D = random_product(rng, max_n, max_support, max_profiles=ORACLE_MAX_PROFILES)
        mech = build_myerson(D)
        rev = expected_revenue_exact(mech, D)
        brute = brute_force_opt(D)
        diff = rev - brute
        if abs(diff) > REV_TOL * max(1.0, brute):
            mismatches += 1
            bad.append(t)
        worst = diff if abs(diff) > abs(worst) else worst
        chk = check_dsic_ir(mech)
        if chk["ic_violations"] or chk["ir_violations"]:
            dsic += 1
            bad.append(t)
    return SuiteReport(
        "oracle",
        trials,
        mismatches + dsic,
        worst,
        sorted(set(bad)),
        {"oracle_mismatches": mismatches, "dsic_ir_failures": dsic},
    )


__all__ = [
    "ConcentrationCell",
    "ConcentrationReport",
    "DiscretizationResult",
    "MonotonicityReport",
    "SequentialResult",
    "SuiteReport",
    "TailBoundResult",
    "concentration_bound",
    "concentration_experiment",
    "discretization_check",
    "discretization_suite",
    "dominating_perturbation",
    "high_value_bounds",
    "monotonicity_suite",
    "opt_dominance_check",
    "oracle_suite",
    "profile_function",
    "random_product",
    "rounding_grid",
    "sequential_example",
    "tail_bound_check",
    "tail_suite",
]
