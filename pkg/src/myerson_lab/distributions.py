"""Finite and parametric value distributions.

Two quantile conventions live side by side here and are never mixed:

* ``quantile_value`` takes a CDF level ``q`` and returns ``inf{v : F(v) >= q}``.
* revenue curves are indexed by the *sale probability* ``s = P(X >= v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

PROB_TOL = 1e-12
REV_TOL = 1e-9


class DomainError(ValueError):
    """Input outside the domain of an operation."""


# ---------------------------------------------------------------------------
# Discrete distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite distribution over a strictly ascending support.

    Zero-probability atoms are allowed; they matter for mechanisms that must
    be run on values the distribution never produces.
    """

    support: np.ndarray
    probs: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)
    _sf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        support = np.array(self.support, dtype=np.float64).ravel()
        probs = np.array(self.probs, dtype=np.float64).ravel()
        if support.size == 0:
            raise DomainError("distribution needs at least one atom")
        if support.shape != probs.shape:
            raise DomainError("support and probs must have equal length")
        if not np.all(np.isfinite(support)):
            raise DomainError("support values must be finite")
        if np.any(support < 0):
            raise DomainError("support values must be non-negative")
        if np.any(np.diff(support) <= 0):
            raise DomainError("support must be strictly ascending")
        if np.any(probs < -PROB_TOL):
            raise DomainError("probabilities must be non-negative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {total!r}, expected 1")
        probs = np.clip(probs, 0.0, None) / probs.clip(0.0, None).sum()
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        # tails summed from the top keep full relative precision for tiny upper tails
        sf = np.cumsum(probs[::-1])[::-1]
        sf[0] = 1.0
        for arr in (support, probs, cdf, sf):
            arr.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_sf", sf)

    @classmethod
    def from_atoms(cls, values: Iterable[float], probs: Iterable[float]) -> "DiscreteDistribution":
        """Build from unsorted, possibly repeated atoms; duplicate masses are summed."""
        values = np.asarray(list(values), dtype=np.float64)
        probs = np.asarray(list(probs), dtype=np.float64)
        if values.shape != probs.shape:
            raise DomainError("values and probs must have equal length")
        uniq, inv = np.unique(values, return_inverse=True)
        return cls(uniq, np.bincount(inv, weights=probs, minlength=uniq.size))

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls([value], [1.0])

    @classmethod
    def uniform_over(cls, values: Sequence[float]) -> "DiscreteDistribution":
        return cls.from_atoms(values, np.full(len(values), 1.0 / len(values)))

    def __len__(self) -> int:
        return self.support.size

    def __repr__(self) -> str:
        body = ", ".join(f"{v:g}: {p:.6g}" for v, p in zip(self.support, self.probs))
        return f"DiscreteDistribution({{{body}}})"

    @property
    def cdf_values(self) -> np.ndarray:
        return self._cdf

    def atoms(self) -> dict[float, float]:
        return {float(v): float(p) for v, p in zip(self.support, self.probs)}

    def cdf(self, v):
        idx = np.searchsorted(self.support, v, side="right")
        out = np.where(idx > 0, self._cdf[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(v) == 0 else out

    def tail(self, v):
        """``P(X >= v)``."""
        idx = np.searchsorted(self.support, v, side="left")
        out = np.where(idx < self.support.size, self._sf[np.minimum(idx, self.support.size - 1)], 0.0)
        return float(out) if np.ndim(v) == 0 else out

    def sale_probs(self) -> np.ndarray:
        """``P(X >= v)`` for every support atom."""
        return self._sf

    def quantile(self, q):
        q_arr = np.asarray(q, dtype=np.float64)
        if np.any((q_arr < 0) | (q_arr > 1)) or np.any(np.isnan(q_arr)):
            raise DomainError(f"quantile level must lie in [0, 1], got {q}")
        idx = np.searchsorted(self._cdf, q_arr - PROB_TOL, side="left")
        idx = np.minimum(idx, self.support.size - 1)
        out = self.support[idx]
        return float(out) if np.ndim(q) == 0 else out

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        out = self.support[np.minimum(idx, self.support.size - 1)]
        return float(out) if size is None else out

    def scaled(self, factor: float) -> "DiscreteDistribution":
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        return DiscreteDistribution(self.support * factor, self.probs)

    def equals(self, other: "DiscreteDistribution", tol: float = PROB_TOL, drop_zero: bool = True) -> bool:
        a, b = (_drop_zero(self), _drop_zero(other)) if drop_zero else (self, other)
        return (
            a.support.shape == b.support.shape
            and np.allclose(a.support, b.support, rtol=0, atol=tol)
            and np.allclose(a.probs, b.probs, rtol=0, atol=tol)
        )


def _drop_zero(d: DiscreteDistribution) -> DiscreteDistribution:
    keep = d.probs > PROB_TOL
    return DiscreteDistribution(d.support[keep], d.probs[keep])


# ---------------------------------------------------------------------------
# Parametric families
# ---------------------------------------------------------------------------

FAMILY_KINDS = ("uniform", "exponential", "lb1", "lb2")


@dataclass(frozen=True)
class ContinuousFamily:
    """Closed-form CDF/quantile family.

    ``lb1(c)`` has ``F(x) = 1 - c/(x + c)``.  ``lb2(c, eps0)`` agrees with it up
    to ``x* = (1 - 2 eps0) c / (2 eps0)`` and has a lighter tail above, which
    caps its optimal posted-price revenue at ``c (1 - 2 eps0)``.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "uniform":
            a, b = p
            if not (0 <= a < b):
                raise DomainError("uniform(a, b) needs 0 <= a < b")
        elif self.kind == "exponential":
            if p[0] <= 0:
                raise DomainError("exponential rate must be positive")
        elif self.kind == "lb1":
            if p[0] <= 0:
                raise DomainError("lb1 scale c must be positive")
        else:
            c, eps0 = p
            if c <= 0 or not (0 < eps0 < 0.5):
                raise DomainError("lb2 needs c > 0 and 0 < eps0 < 1/2")

    @classmethod
    def uniform(cls, a: float, b: float) -> "ContinuousFamily":
        return cls("uniform", (a, b))

    @classmethod
    def exponential(cls, rate: float) -> "ContinuousFamily":
        return cls("exponential", (rate,))

    @classmethod
    def lb_type1(cls, c: float) -> "ContinuousFamily":
        return cls("lb1", (c,))

    @classmethod
    def lb_type2(cls, c: float, eps0: float) -> "ContinuousFamily":
        return cls("lb2", (c, eps0))

    @property
    def breakpoint(self) -> float:
        """Where ``lb2`` leaves the ``lb1`` curve."""
        c, eps0 = self.params
        return (1 - 2 * eps0) * c / (2 * eps0)

    @property
    def upper(self) -> float:
        return self.params[1] if self.kind == "uniform" else math.inf

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        k, p = self.kind, self.params
        if k == "uniform":
            out = np.clip((x - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        elif k == "exponential":
            out = np.where(x > 0, -np.expm1(-p[0] * np.maximum(x, 0.0)), 0.0)
        elif k == "lb1":
            c = p[0]
            xx = np.maximum(x, 0.0)
            out = np.where(x > 0, 1.0 - c / (xx + c), 0.0)
        else:
            c, eps0 = p
            shrink = 1 - 2 * eps0
            xx = np.maximum(x, 0.0)
            low = 1.0 - c / (xx + c)
            with np.errstate(divide="ignore", invalid="ignore"):
                high = 1.0 - c * shrink**2 / (xx - c * shrink)
            out = np.where(x <= 0, 0.0, np.where(xx <= self.breakpoint, low, high))
        return float(out) if out.ndim == 0 else out

    def tail(self, x):
        """``P(X >= x)``; equals ``1 - F(x)`` because every family is atomless."""
        x = np.asarray(x, dtype=np.float64)
        k, p = self.kind, self.params
        xx = np.maximum(x, 0.0)
        if k == "exponential":
            out = np.exp(-p[0] * xx)
        elif k == "lb1":
            out = p[0] / (xx + p[0])
        elif k == "lb2":
            c, eps0 = p
            shrink = 1 - 2 * eps0
            with np.errstate(divide="ignore", invalid="ignore"):
                high = c * shrink**2 / (xx - c * shrink)
            out = np.where(xx <= self.breakpoint, c / (xx + c), high)
        else:
            out = 1.0 - np.asarray(self.cdf(x))
        return float(out) if out.ndim == 0 else out

    def quantile(self, q):
        q_arr = np.asarray(q, dtype=np.float64)
        if np.any((q_arr < 0) | (q_arr > 1)) or np.any(np.isnan(q_arr)):
            raise DomainError(f"quantile level must lie in [0, 1], got {q}")
        k, p = self.kind, self.params
        with np.errstate(divide="ignore"):
            if k == "uniform":
                out = p[0] + q_arr * (p[1] - p[0])
            elif k == "exponential":
                out = -np.log1p(-q_arr) / p[0]
            elif k == "lb1":
                out = np.where(q_arr < 1, p[0] * q_arr / (1 - q_arr), np.inf)
            else:
                c, eps0 = p
                shrink = 1 - 2 * eps0
                low = c * q_arr / np.where(q_arr < 1, 1 - q_arr, 1.0)
                high = c * shrink + c * shrink**2 / np.where(q_arr < 1, 1 - q_arr, 1.0)
                out = np.where(q_arr >= 1, np.inf, np.where(q_arr <= 1 - 2 * eps0, low, high))
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        # u < 1 always, so unbounded families stay finite
        return self.quantile(u)

    def discretize(self, grid_size: int, rule: str = "lower") -> DiscreteDistribution:
        """Equal-mass atoms at CDF levels ``k/grid_size``.

        ``rule="lower"`` uses ``k = 0..G-1`` (dominated by the family, finite for
        unbounded tails); ``rule="upper"`` uses ``k = 1..G`` (dominates it,
        bounded families only).
        """
        if grid_size < 1:
            raise DomainError("grid_size must be >= 1")
        if rule == "lower":
            levels = np.arange(grid_size) / grid_size
        elif rule == "upper":
            if math.isinf(self.upper):
                raise DomainError(f"{self.kind} is unbounded; use rule='lower'")
            levels = np.arange(1, grid_size + 1) / grid_size
        else:
            raise DomainError(f"unknown discretization rule {rule!r}")
        return DiscreteDistribution.from_atoms(self.quantile(levels), np.full(grid_size, 1.0 / grid_size))


Distribution = Union[DiscreteDistribution, ContinuousFamily]


# ---------------------------------------------------------------------------
# Products and grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductDistribution:
    """Independent per-buyer distributions, buyer indices ``0..n-1``."""

    buyers: tuple[DiscreteDistribution, ...]

    def __post_init__(self):
        buyers = tuple(self.buyers)
        if not buyers:
            raise DomainError("a product distribution needs at least one buyer")
        for b in buyers:
            if not isinstance(b, DiscreteDistribution):
                raise DomainError("product components must be DiscreteDistribution")
        object.__setattr__(self, "buyers", buyers)

    @classmethod
    def iid(cls, d: DiscreteDistribution, n: int) -> "ProductDistribution":
        return cls((d,) * n)

    @property
    def n(self) -> int:
        return len(self.buyers)

    @property
    def num_profiles(self) -> int:
        return math.prod(len(b) for b in self.buyers)

    def __getitem__(self, i: int) -> DiscreteDistribution:
        return self.buyers[i]

    def __iter__(self):
        return iter(self.buyers)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """``(m, n)`` matrix of iid value profiles."""
        return np.column_stack([b.sample(rng, m) for b in self.buyers])

    def profile_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Index grid ``(P, n)`` over all profiles and the matching probabilities."""
        sizes = [len(b) for b in self.buyers]
        idx = np.indices(sizes).reshape(self.n, -1).T
        prob = np.ones(idx.shape[0])
        for i, b in enumerate(self.buyers):
            prob = prob * b.probs[idx[:, i]]
        return idx, prob

    def expectation(self, f) -> float:
        """Exact ``E[f(v)]`` for a vectorized ``f`` mapping ``(P, n)`` values to ``(P,)``."""
        idx, prob = self.profile_grid()
        values = np.column_stack([b.support[idx[:, i]] for i, b in enumerate(self.buyers)])
        return float(prob @ np.asarray(f(values), dtype=np.float64))

    def scaled(self, factor: float) -> "ProductDistribution":
        return ProductDistribution(tuple(b.scaled(factor) for b in self.buyers))


@dataclass(frozen=True, eq=False)
class ValueGrid:
    """Strictly descending non-negative price list."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).ravel()
        if vals.size == 0:
            raise DomainError("grid must be non-empty")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise DomainError("grid values must be finite and non-negative")
        if np.any(np.diff(vals) >= 0):
            raise DomainError("grid must be strictly descending")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "ValueGrid":
        return cls(np.unique(np.asarray(list(values), dtype=np.float64))[::-1])

    @classmethod
    def arithmetic(cls, step: float, top: float) -> "ValueGrid":
        """``{0, step, 2 step, ...}`` up to ``top``."""
        if step <= 0:
            raise DomainError("step must be positive")
        k = int(math.floor(top / step * (1 + 1e-12)))
        return cls(step * np.arange(k, -1, -1))

    @classmethod
    def geometric(cls, top: float, ratio: float, bottom: float, include_zero: bool = True) -> "ValueGrid":
        """``top * ratio**k`` for every ``k`` keeping the value ``>= bottom``."""
        if not (0 < ratio < 1) or top <= 0 or bottom <= 0 or bottom > top:
            raise DomainError("geometric grid needs 0 < ratio < 1 and 0 < bottom <= top")
        k = int(math.floor(math.log(bottom / top) / math.log(ratio) + 1e-9))
        vals = top * ratio ** np.arange(k + 1)
        if include_zero:
            vals = np.append(vals, 0.0)
        return cls(vals)

    @property
    def ascending(self) -> np.ndarray:
        return self.values[::-1]

    def __len__(self) -> int:
        return self.values.size

    def __contains__(self, v: float) -> bool:
        return bool(np.any(self.values == v))

    def floor(self, x):
        """Largest grid value ``<= x`` (``nan`` where none exists)."""
        asc = self.ascending
        x_arr = np.asarray(x, dtype=np.float64)
        tol = 1e-12 * np.maximum(1.0, np.abs(x_arr))
        idx = np.searchsorted(asc, x_arr + tol, side="right") - 1
        out = np.where(idx >= 0, asc[np.maximum(idx, 0)], np.nan)
        return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def cdf(d: Distribution, v):
    if not np.all(np.isfinite(np.asarray(v, dtype=float))):
        raise DomainError("cdf argument must be finite")
    return d.cdf(v)


def quantile_value(d: Distribution, q):
    return d.quantile(q)


def truncate_at(d: DiscreteDistribution, cap: float) -> DiscreteDistribution:
    """Move all mass above ``cap`` onto ``cap``."""
    if cap <= 0:
        raise DomainError("truncation point must be positive")
    above = d.support > cap
    if not above.any():
        return d
    values = np.append(d.support[~above], cap)
    probs = np.append(d.probs[~above], d.probs[above].sum())
    return DiscreteDistribution.from_atoms(values, probs)


def truncate_top_mass(d: DiscreteDistribution, delta: float) -> DiscreteDistribution:
    """Collapse everything at or above ``F^{-1}(1 - delta)`` into a point mass there."""
    if not (0 < delta < 1):
        raise DomainError("delta must lie in (0, 1)")
    t = d.quantile(1.0 - delta)
    keep = d.support < t
    values = np.append(d.support[keep], t)
    probs = np.append(d.probs[keep], d.probs[~keep].sum())
    return DiscreteDistribution(values, probs)


def round_down_to_grid(d: DiscreteDistribution, grid: ValueGrid) -> DiscreteDistribution:
    """Map every atom to the largest grid value not above it and merge masses."""
    mapped = grid.floor(d.support)
    if np.any(np.isnan(mapped)):
        low = d.support[np.isnan(mapped)].min()
        raise DomainError(f"atom {low:g} lies below every grid value and 0 is not in the grid")
    # a grid point a rounding error above the atom must not move mass upward
    return DiscreteDistribution.from_atoms(np.minimum(mapped, d.support), d.probs)


def dominates(d1: DiscreteDistribution, d2: DiscreteDistribution, tol: float = PROB_TOL) -> bool:
    """First-order stochastic dominance of ``d1`` over ``d2``."""
    pts = np.union1d(d1.support, d2.support)
    return bool(np.all(d1.cdf(pts) <= d2.cdf(pts) + tol))


def mixture(ds: Sequence[DiscreteDistribution], weights: Sequence[float]) -> DiscreteDistribution:
    weights = np.asarray(weights, dtype=np.float64)
    if len(ds) != weights.size or not ds:
        raise DomainError("need one weight per component")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise DomainError(f"mixture weights must be non-negative and sum to 1, got {weights.sum()!r}")
    values = np.concatenate([d.support for d in ds])
    probs = np.concatenate([w * d.probs for d, w in zip(ds, weights)])
    return DiscreteDistribution.from_atoms(values, probs)


def empirical_from(samples: Iterable[float]) -> DiscreteDistribution:
    samples = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.float64)
    if samples.size == 0:
        raise DomainError("cannot build an empirical distribution from no samples")
    uniq, counts = np.unique(samples, return_counts=True)
    return DiscreteDistribution(uniq, counts / samples.size)


def shift_mass(d: DiscreteDistribution, src: float, dst: float, amount: float) -> DiscreteDistribution:
    """Move ``amount`` of probability from atom ``src`` to atom ``dst`` (both in the support)."""
    i = int(np.searchsorted(d.support, src))
    j = int(np.searchsorted(d.support, dst))
    if i >= len(d) or j >= len(d) or d.support[i] != src or d.support[j] != dst:
        raise DomainError("both atoms must be in the support")
    if amount < 0 or amount > d.probs[i] + PROB_TOL:
        raise DomainError("cannot move more mass than the source atom holds")
    probs = d.probs.copy()
    probs[i] -= amount
    probs[j] += amount
    return DiscreteDistribution(d.support, np.clip(probs, 0.0, None))


# ---------------------------------------------------------------------------
# Revenue curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RevenueCurve:
    """Revenue ``R = v * s`` against sale probability ``s`` and its concave envelope.

    ``breakpoints`` starts with ``(0, 0)`` followed by one point per atom, highest
    value first.  ``ironed_values`` is aligned with the distribution's ascending
    support.
    """

    breakpoints: np.ndarray
    hull: np.ndarray
    ironed_values: np.ndarray

    def hull_at(self, s):
        return np.interp(s, self.hull[:, 0], self.hull[:, 1])

    def is_concave(self, tol: float = REV_TOL) -> bool:
        """True when ironing changes nothing (our operational notion of regular)."""
        raw = self.breakpoints
        return bool(np.all(self.hull_at(raw[:, 0]) <= raw[:, 1] + tol))


def _upper_hull(points: np.ndarray) -> np.ndarray:
    # points sorted by x ascending with unique x
    hull: list[tuple[float, float]] = []
    for x, y in points:
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    return np.array(hull)


def revenue_curve(d: DiscreteDistribution) -> RevenueCurve:
    s = d.sale_probs()
    rev = d.support * s
    desc = np.arange(len(d))[::-1]
    breakpoints = np.vstack([[0.0, 0.0], np.column_stack([s[desc], rev[desc]])])

    # zero-mass atoms share an s with a neighbour; the envelope keeps the larger R
    xs, inv = np.unique(breakpoints[:, 0], return_inverse=True)
    ys = np.full(xs.size, -np.inf)
    np.maximum.at(ys, inv, breakpoints[:, 1])
    hull = _upper_hull(np.column_stack([xs, ys]))

    hx = hull[:, 0]
    slopes = np.diff(hull[:, 1]) / np.diff(hx)
    # a positive-mass atom covers (s - p, s]; evaluate the slope at its midpoint.
    # A zero-mass atom takes the segment just to its right, so it never outranks
    # the positive-mass atom below it; with nothing below it never sells.
    positive = d.probs > PROB_TOL
    mid = np.where(positive, s - d.probs / 2, s + PROB_TOL)
    seg = np.clip(np.searchsorted(hx, mid) - 1, 0, slopes.size - 1)
    ironed = slopes[seg]
    ironed[~positive & (s >= hx[-1])] = -np.inf
    for arr in (breakpoints, hull, ironed):
        arr.setflags(write=False)
    return RevenueCurve(breakpoints, hull, ironed)


def ironed_values(d: DiscreteDistribution) -> np.ndarray:
    return revenue_curve(d).ironed_values


def is_regular(d: DiscreteDistribution) -> bool:
    return revenue_curve(d).is_concave()


def single_buyer_opt(d: DiscreteDistribution) -> tuple[float, float]:
    """Best posted price among support atoms and its revenue (smallest price on ties)."""
    rev = d.support * d.sale_probs()
    best = rev.max()
    k = int(np.argmax(rev >= best - PROB_TOL * max(1.0, best)))
    return float(d.support[k]), float(best)


def posted_price_revenue(price: float, d: Distribution) -> float:
    """``p * P(X >= p)``."""
    if price < 0:
        raise DomainError("price must be non-negative")
    if price == 0 or math.isinf(price):
        return 0.0
    return float(price * d.tail(price))


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------


def dist_from_spec(spec: dict) -> Distribution:
    """Parse ``{"kind": "discrete"|"uniform"|"exponential"|"lb1"|"lb2", ...}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise DomainError("distribution spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "discrete":
            if "probs" in spec:
                return DiscreteDistribution.from_atoms(spec["support"], spec["probs"])
            return DiscreteDistribution.uniform_over(spec["support"])
        if kind == "point":
            return DiscreteDistribution.point_mass(spec["value"])
        if kind == "uniform":
            return ContinuousFamily.uniform(spec.get("a", 0.0), spec.get("b", 1.0))
        if kind == "exponential":
            return ContinuousFamily.exponential(spec.get("rate", 1.0))
        if kind == "lb1":
            return ContinuousFamily.lb_type1(spec["c"])
        if kind == "lb2":
            return ContinuousFamily.lb_type2(spec["c"], spec["eps0"])
    except KeyError as exc:
        raise DomainError(f"distribution spec of kind {kind!r} is missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown distribution kind {kind!r}")


def dist_to_spec(d: Distribution) -> dict:
    if isinstance(d, DiscreteDistribution):
        return {"kind": "discrete", "support": d.support.tolist(), "probs": d.probs.tolist()}
    names = {"uniform": ("a", "b"), "exponential": ("rate",), "lb1": ("c",), "lb2": ("c", "eps0")}
    return {"kind": d.kind, **dict(zip(names[d.kind], d.params))}


def as_discrete(d: Distribution, atoms: int = 50, rule: str = "lower") -> DiscreteDistribution:
    return d if isinstance(d, DiscreteDistribution) else d.discretize(atoms, rule)


def product_from_spec(spec: dict, atoms: int = 50) -> ProductDistribution:
    """``{"buyers": [spec, ...]}`` or ``{"n": k, "buyer": spec}``; families are discretized."""
    if "buyers" in spec:
        parts = spec["buyers"]
    elif "n" in spec and "buyer" in spec:
        parts = [spec["buyer"]] * int(spec["n"])
    else:
        parts = [spec]
    atoms = int(spec.get("atoms", atoms))
    return ProductDistribution(tuple(as_discrete(dist_from_spec(p), atoms) for p in parts))
