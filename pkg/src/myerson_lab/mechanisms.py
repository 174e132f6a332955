"""Myerson auctions over finite product distributions.

A :class:`RankMechanism` stores, for every (buyer, support value) cell, an
ironed virtual value and a position in a total order.  The item goes to the
best-ranked cell among those with non-negative ironed value, and the winner
pays the smallest of its support values that would still win.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    PROB_TOL,
    DiscreteDistribution,
    DomainError,
    ProductDistribution,
    ValueGrid,
    posted_price_revenue,
    revenue_curve,
)

DEFAULT_PROFILE_CAP = 10**6
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Outcome:
    winner: Optional[int]
    payment: float = 0.0


@dataclass(frozen=True, eq=False)
class RankMechanism:
    supports: tuple[np.ndarray, ...]
    ironed: tuple[np.ndarray, ...]
    ranks: tuple[np.ndarray, ...]
    grid: Optional[ValueGrid] = None

    @property
    def n(self) -> int:
        return len(self.supports)

    def effective_ranks(self) -> list[np.ndarray]:
        """Ranks with never-selling cells (negative ironed value) mapped to ``inf``."""
        return [np.where(phi >= 0, r.astype(np.float64), np.inf) for phi, r in zip(self.ironed, self.ranks)]

    def cells(self) -> list[dict]:
        out = []
        for i, (sup, phi, r) in enumerate(zip(self.supports, self.ironed, self.ranks)):
            for v, f, k in zip(sup, phi, r):
                out.append({"buyer": i, "value": float(v), "ironed_value": float(f), "rank": int(k)})
        return sorted(out, key=lambda c: c["rank"])

    def same_as(self, other: "RankMechanism") -> bool:
        """Same cells, same order, same reserve decisions."""
        if self.n != other.n:
            return False
        for a, b, ra, rb, pa, pb in zip(self.supports, other.supports, self.ranks, other.ranks, self.ironed, other.ironed):
            if a.shape != b.shape or not np.array_equal(a, b) or not np.array_equal(ra, rb):
                return False
            if not np.array_equal(pa >= 0, pb >= 0):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "cells": self.cells(),
            "grid": None if self.grid is None else self.grid.values.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "RankMechanism":
        n = int(data["n"])
        per = [[] for _ in range(n)]
        for c in data["cells"]:
            per[int(c["buyer"])].append((float(c["value"]), float(c["ironed_value"]), int(c["rank"])))
        sups, phis, ranks = [], [], []
        for cells in per:
            cells.sort()
            sups.append(np.array([c[0] for c in cells]))
            phis.append(np.array([c[1] for c in cells]))
            ranks.append(np.array([c[2] for c in cells], dtype=np.int64))
        grid = None if data.get("grid") is None else ValueGrid(data["grid"])
        return cls(tuple(sups), tuple(phis), tuple(ranks), grid)

    @classmethod
    def from_json(cls, text: str) -> "RankMechanism":
        return cls.from_dict(json.loads(text))


def _snap_ties(values: np.ndarray, scale: float) -> np.ndarray:
    """Merge ironed values that differ only by rounding noise, and snap near-zeros to 0."""
    tol = TIE_TOL * max(1.0, scale)
    out = values.copy()
    finite = np.isfinite(values)
    order = np.argsort(-values[finite], kind="stable")
    fin_idx = np.flatnonzero(finite)[order]
    rep = None
    for k in fin_idx:
        if rep is None or rep - values[k] > tol:
            rep = values[k]
        out[k] = rep
    out[finite & (np.abs(out) <= tol)] = 0.0
    return out


def rank_cells(supports: Sequence[np.ndarray], ironed: Sequence[np.ndarray], grid=None) -> RankMechanism:
    """Order cells: higher ironed value first, then lower buyer index, then higher value."""
    sizes = [len(s) for s in supports]
    buyer = np.repeat(np.arange(len(supports)), sizes)
    value = np.concatenate(supports)
    scale = float(np.max(value)) if value.size else 1.0
    phi = _snap_ties(np.concatenate(ironed), scale)
    order = np.lexsort((-value, buyer, -phi))
    rank = np.empty(value.size, dtype=np.int64)
    rank[order] = np.arange(1, value.size + 1)
    cuts = np.cumsum(sizes)[:-1]
    return RankMechanism(
        tuple(np.array(s, dtype=np.float64) for s in supports),
        tuple(np.split(phi, cuts)),
        tuple(np.split(rank, cuts)),
        grid,
    )


def build_myerson(D: ProductDistribution, grid: Optional[ValueGrid] = None) -> RankMechanism:
    """Optimal (lexicographically tie-broken) auction for a finite product distribution."""
    curves = [revenue_curve(d) for d in D]
    return rank_cells([d.support for d in D], [c.ironed_values for c in curves], grid)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _locate(support: np.ndarray, values, round_down: bool) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    tol = 1e-12 * np.maximum(1.0, np.abs(values))
    if round_down:
        return np.searchsorted(support, values + tol, side="right") - 1
    idx = np.searchsorted(support, values - tol, side="left")
    ok = (idx < support.size) & (np.abs(support[np.minimum(idx, support.size - 1)] - values) <= tol)
    if not np.all(ok):
        bad = values[~ok].ravel()[0]
        raise DomainError(f"value {bad:g} is not in the buyer's support")
    return idx


def outcomes_by_index(m: RankMechanism, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Winner (``-1`` for none) and payment for an ``(P, n)`` matrix of support indices.

    Index ``-1`` marks a buyer whose value lies below its whole support; such a
    buyer cannot win.
    """
    idx = np.atleast_2d(idx)
    P = idx.shape[0]
    eff = m.effective_ranks()
    R = np.empty((P, m.n))
    for i, er in enumerate(eff):
        col = idx[:, i]
        R[:, i] = np.where(col >= 0, er[np.maximum(col, 0)], np.inf)
    winner = np.argmin(R, axis=1)
    best = R[np.arange(P), winner]
    sold = np.isfinite(best)
    payment = np.zeros(P)
    if m.n == 1:
        others = np.full(P, np.inf)
    else:
        masked = R.copy()
        masked[np.arange(P), winner] = np.inf
        others = masked.min(axis=1)
    for i, er in enumerate(eff):
        rows = sold & (winner == i)
        if not rows.any():
            continue
        # er is non-increasing along the support; first cell beating every rival
        k = np.searchsorted(-er, -others[rows], side="right")
        payment[rows] = m.supports[i][k]
    return np.where(sold, winner, -1), payment


def run(m: RankMechanism, profile: Sequence[float], round_down: bool = False) -> Outcome:
    """Execute the mechanism on one reported profile.

    With ``round_down`` (learned mechanisms) each report is treated as the
    closest support value from below; otherwise reports must be in the support.
    """
    if len(profile) != m.n:
        raise DomainError(f"profile has {len(profile)} values, mechanism has {m.n} buyers")
    idx = np.array([[_locate(s, v, round_down) for s, v in zip(m.supports, profile)]])
    w, p = outcomes_by_index(m, idx)
    return Outcome(None, 0.0) if w[0] < 0 else Outcome(int(w[0]), float(p[0]))


def _index_table(m: RankMechanism, D: ProductDistribution, round_down: bool) -> list[np.ndarray]:
    if D.n != m.n:
        raise DomainError(f"distribution has {D.n} buyers, mechanism has {m.n}")
    tables = []
    for s, d in zip(m.supports, D):
        if round_down:
            tables.append(_locate(s, d.support, True))
        else:
            pos = d.probs > 0
            tab = np.full(len(d), -1)
            tab[pos] = _locate(s, d.support[pos], False)
            tables.append(tab)
    return tables


def expected_revenue_exact(
    m: RankMechanism,
    D: ProductDistribution,
    cap: int = DEFAULT_PROFILE_CAP,
    round_down: bool = False,
) -> float:
    """Exact ``E_D[payment]`` by enumerating every profile."""
    if D.num_profiles > cap:
        raise DomainError(
            f"{D.num_profiles} profiles exceed the exact-evaluation cap of {cap}; use expected_revenue_mc"
        )
    tables = _index_table(m, D, round_down)
    grid, prob = D.profile_grid()
    idx = np.column_stack([tables[i][grid[:, i]] for i in range(D.n)])
    _, pay = outcomes_by_index(m, idx)
    return float(prob @ pay)


def expected_revenue_mc(
    m: RankMechanism,
    D: ProductDistribution,
    trials: int,
    rng: np.random.Generator,
    round_down: bool = False,
) -> tuple[float, float]:
    """Monte Carlo revenue and its standard error."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    values = D.sample(rng, trials)
    idx = np.column_stack([_locate(s, values[:, i], round_down) for i, s in enumerate(m.supports)])
    _, pay = outcomes_by_index(m, idx)
    stderr = float(pay.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(pay.mean()), stderr


def optimal_revenue(D: ProductDistribution, cap: int = DEFAULT_PROFILE_CAP) -> float:
    """``Opt(D)`` via the Myerson auction."""
    return expected_revenue_exact(build_myerson(D), D, cap)


def virtual_surplus(m: RankMechanism, D: ProductDistribution) -> float:
    """``E[max(0, max_i ironed_i(v_i))]`` under ``D``."""
    tables = _index_table(m, D, False)
    grid, prob = D.profile_grid()
    best = np.zeros(grid.shape[0])
    for i, phi in enumerate(m.ironed):
        col = tables[i][grid[:, i]]
        best = np.maximum(best, np.where(col >= 0, phi[np.maximum(col, 0)], -np.inf))
    return float(prob @ best)


def check_dsic_ir(m: RankMechanism) -> dict:
    """Exhaustive truthfulness and participation check over the mechanism's own supports."""
    sizes = [len(s) for s in m.supports]
    grid = np.indices(sizes).reshape(m.n, -1).T
    winner, pay = outcomes_by_index(m, grid)
    ic = ir = 0
    worst = 0.0
    for i, sup in enumerate(m.supports):
        v = sup[grid[:, i]]
        truthful = np.where(winner == i, v - pay, 0.0)
        ir += int(np.sum(truthful < -1e-9))
        worst = min(worst, float(truthful.min()))
        for w in range(sizes[i]):
            dev = grid.copy()
            dev[:, i] = w
            dw, dp = outcomes_by_index(m, dev)
            deviating = np.where(dw == i, v - dp, 0.0)
            gap = truthful - deviating
            ic += int(np.sum(gap < -1e-9))
            worst = min(worst, float(gap.min()))
    return {"profiles": int(grid.shape[0]), "ic_violations": ic, "ir_violations": ir, "worst_gap": worst}


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_BUYERS = 3
ORACLE_MAX_PROFILES = 27


def brute_force_opt(D: ProductDistribution) -> float:
    """Best expected revenue over all deterministic DSIC + IR single-item mechanisms.

    A deterministic truthful mechanism is a threshold function per buyer: given
    the others' values, buyer ``i`` wins exactly when its value reaches
    ``tau_i(others)`` and then pays that threshold.  Revenue is additive over
    the thresholds, feasibility says no profile has two winners.  The search is
    exhaustive branch-and-bound with forward checking; it never looks at
    virtual values.
    """
    if D.n > ORACLE_MAX_BUYERS or D.num_profiles > ORACLE_MAX_PROFILES:
        raise DomainError(
            f"oracle limited to n <= {ORACLE_MAX_BUYERS} and <= {ORACLE_MAX_PROFILES} profiles "
            f"(got n={D.n}, {D.num_profiles} profiles)"
        )
    n = D.n
    sizes = [len(d) for d in D]
    # posted-price revenue per threshold index; index k_i means "never wins"
    rev = [np.append(d.support * d.sale_probs(), 0.0) for d in D]
    suffix_max = [np.maximum.accumulate(r[::-1])[::-1] for r in rev]

    contexts = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for ctx in np.ndindex(*[sizes[j] for j in others]):
            p = math.prod(D[j].probs[c] for j, c in zip(others, ctx))
            contexts.append((i, tuple(ctx), p))
    var_of = {(i, ctx): k for k, (i, ctx, _) in enumerate(contexts)}
    weight = np.array([p for _, _, p in contexts])
    nvar = len(contexts)

    def other_ctx(profile, j):
        return profile[:j] + profile[j + 1 :]

    # for each variable and threshold t: the (var, min threshold) implications
    implications = []
    for i, ctx, _ in contexts:
        per_t = []
        for t in range(sizes[i] + 1):
            req = []
            for a in range(t, sizes[i]):
                profile = ctx[:i] + (a,) + ctx[i:]
                for j in range(n):
                    if j != i:
                        req.append((var_of[(j, other_ctx(profile, j))], profile[j] + 1))
            per_t.append(req)
        implications.append(per_t)

    order = sorted(range(nvar), key=lambda k: -weight[k] * suffix_max[contexts[k][0]][0])
    lb = [0] * nvar
    assigned = [-1] * nvar
    # posting a single price to one buyer is feasible and seeds the incumbent
    best = [max(float(r.max()) for r in rev)]

    # profile-level data for a bound that respects "one winner per profile"
    profiles = list(np.ndindex(*sizes))
    prof_prob = np.array([math.prod(D[j].probs[a] for j, a in enumerate(x)) for x in profiles])
    prof_var = np.array([[var_of[(j, other_ctx(x, j))] for j in range(n)] for x in profiles])
    prof_idx = np.array(profiles)
    prof_val = np.column_stack([D[j].support[prof_idx[:, j]] for j in range(n)])
    padded = [np.append(d.support, 0.0) for d in D]

    def optimistic(pos):
        total = 0.0
        for k in order[pos:]:
            i = contexts[k][0]
            total += weight[k] * suffix_max[i][lb[k]]
        return total

    def exclusive_bound():
        lb_arr = np.asarray(lb)[prof_var]
        asg = np.asarray(assigned)[prof_var]
        fixed = asg >= 0
        pay = np.where(prof_idx >= lb_arr, prof_val, 0.0)
        fixed_pay = np.column_stack([padded[j][np.where(fixed[:, j], asg[:, j], sizes[j])] for j in range(n)])
        fixed_pay = np.where(fixed & (prof_idx >= asg), fixed_pay, 0.0)
        pay = np.where(fixed, fixed_pay, pay)
        return float(prof_prob @ pay.max(axis=1))

    def search(pos, value):
        if pos == nvar:
            if value > best[0]:
                best[0] = value
            return
        if value + optimistic(pos) <= best[0] + 1e-15:
            return
        if exclusive_bound() <= best[0] + 1e-15:
            return
        k = order[pos]
        i = contexts[k][0]
        choices = sorted(range(lb[k], sizes[i] + 1), key=lambda t: -rev[i][t])
        for t in choices:
            changed = []
            ok = True
            for var, need in implications[k][t]:
                if assigned[var] >= 0:
                    if assigned[var] < need:
                        ok = False
                        break
                elif lb[var] < need:
                    changed.append((var, lb[var]))
                    lb[var] = need
            if ok:
                assigned[k] = t
                search(pos + 1, value + weight[k] * rev[i][t])
                assigned[k] = -1
            for var, old in reversed(changed):
                lb[var] = old

    search(0, 0.0)
    return float(best[0])


# ---------------------------------------------------------------------------
# Simple benchmarks
# ---------------------------------------------------------------------------


def vcg_duplicates_payment(values: np.ndarray, cap: float = math.inf) -> float:
    """Second-highest of the capped values of a second-price auction."""
    vals = np.minimum(np.asarray(values, dtype=np.float64).ravel(), cap)
    if vals.size < 2:
        raise DomainError("need at least two bidders")
    return float(np.partition(vals, -2)[-2])


def vcg_duplicates_revenue(D: ProductDistribution, cap: float, rng: np.random.Generator) -> float:
    """One run of VCG with two iid copies of each buyer, values capped at ``cap``."""
    if cap <= 0:
        raise DomainError("cap must be positive")
    values = D.sample(rng, 2)
    return vcg_duplicates_payment(values, cap)


__all__ = [
    "Outcome",
    "RankMechanism",
    "brute_force_opt",
    "build_myerson",
    "check_dsic_ir",
    "expected_revenue_exact",
    "expected_revenue_mc",
    "optimal_revenue",
    "outcomes_by_index",
    "posted_price_revenue",
    "rank_cells",
    "run",
    "vcg_duplicates_payment",
    "vcg_duplicates_revenue",
    "virtual_surplus",
]
