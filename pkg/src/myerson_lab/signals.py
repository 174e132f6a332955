"""Auctions when each value comes with a public signal.

A :class:`SignalModel` couples a marginal over signals in ``[0, 1]`` with a
conditional value distribution per signal; higher signals mean stochastically
higher values.  Learners see only ``(value, signal)`` samples and, for a new
bidder with signal ``s``, use the samples whose signals lie immediately below
``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .distributions import (
    ContinuousFamily,
    DiscreteDistribution,
    Distribution,
    DomainError,
    ProductDistribution,
    ValueGrid,
    as_discrete,
    dist_from_spec,
    dominates,
)
from .learning import build_value_grid, empirical_on_grid, srev_estimate
from .mechanisms import RankMechanism, build_myerson, optimal_revenue


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Signal marginal plus conditional value distributions.

    ``marginal`` is a distribution on ``[0, 1]``.  ``conditional`` maps a signal
    to its value distribution.  ``atoms`` controls how continuous conditionals
    are discretized for exact revenue computations.
    """

    marginal: Distribution
    conditional: Callable[[float], Distribution]
    name: str = "model"
    atoms: int = 50
    constant: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.marginal, DiscreteDistribution):
            sup = self.marginal.support
            if sup[0] < 0 or sup[-1] > 1:
                raise DomainError("signals must lie in [0, 1]")
        elif not (self.marginal.kind == "uniform" and self.marginal.params[1] <= 1):
            raise DomainError("a continuous signal marginal must be uniform on a sub-interval of [0, 1]")
        object.__setattr__(self, "_cache", {})

    @classmethod
    def constant_model(cls, dist: Distribution, atoms: int = 50) -> "SignalModel":
        """Values independent of a uniform signal."""
        return cls(ContinuousFamily.uniform(0.0, 1.0), lambda s: dist, "constant", atoms, True)

    def signal_cdf(self, sigma):
        return self.marginal.cdf(sigma)

    def discrete_conditional(self, sigma: float) -> DiscreteDistribution:
        key = 0.0 if self.constant else float(sigma)
        cache = self._cache
        if key not in cache:
            cache[key] = as_discrete(self.conditional(key), self.atoms)
        return cache[key]

    def sample_signals(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.asarray(self.marginal.sample(rng, size), dtype=np.float64)

    def sample_values(self, rng: np.random.Generator, signals) -> np.ndarray:
        sig = np.asarray(signals, dtype=np.float64)
        if self.constant:
            return np.asarray(self.conditional(0.0).sample(rng, sig.shape), dtype=np.float64)
        out = np.empty(sig.shape)
        flat_sig, flat_out = sig.ravel(), out.reshape(-1)
        # one stream per distinct signal, drawn in ascending signal order
        for s in np.unique(flat_sig):
            mask = flat_sig == s
            flat_out[mask] = self.conditional(float(s)).sample(rng, int(mask.sum()))
        return out

    def sample(self, rng: np.random.Generator, m: int) -> "SignalSamples":
        sig = self.sample_signals(rng, m)
        return SignalSamples(self.sample_values(rng, sig), sig)

    def profile_opt(self, signals: Sequence[float]) -> float:
        """``Opt`` of the product of (discretized) conditionals for one signal profile."""
        key = ("opt",) + tuple(sorted(0.0 if self.constant else float(s) for s in signals))
        cache = self._cache
        if key not in cache:
            D = ProductDistribution(tuple(self.discrete_conditional(s) for s in key[1:]))
            cache[key] = optimal_revenue(D)
        return cache[key]

    def dominance_violations(self, sigmas: Sequence[float]) -> list[tuple[float, float]]:
        """Pairs ``(lo, hi)`` of the given signals where ``hi`` fails to dominate ``lo``."""
        pts = sorted(set(float(s) for s in sigmas))
        bad = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            if not dominates(self.discrete_conditional(hi), self.discrete_conditional(lo), 1e-12):
                bad.append((lo, hi))
        return bad


@dataclass(frozen=True)
class SignalSample:
    value: float
    signal: float

    def __post_init__(self):
        if not (0 <= self.signal <= 1):
            raise DomainError(f"signal must lie in [0, 1], got {self.signal}")
        if self.value < 0:
            raise DomainError(f"value must be non-negative, got {self.value}")


@dataclass(frozen=True, eq=False)
class SignalSamples:
    """Value/signal pairs kept sorted by signal, highest first (stable on ties)."""

    values: np.ndarray
    signals: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        s = np.asarray(self.signals, dtype=np.float64).ravel()
        if v.shape != s.shape:
            raise DomainError("values and signals must have the same length")
        if np.any((s < 0) | (s > 1)):
            raise DomainError("signals must lie in [0, 1]")
        if np.any(v < 0):
            raise DomainError("values must be non-negative")
        order = np.argsort(-s, kind="stable")
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "signals", s[order])

    @classmethod
    def from_pairs(cls, pairs: Sequence[SignalSample]) -> "SignalSamples":
        return cls([p.value for p in pairs], [p.signal for p in pairs])

    def __len__(self) -> int:
        return self.values.size

    def window(self, sigma: float, ell: int) -> np.ndarray:
        """Values of the ``ell`` samples whose signals are closest to ``sigma`` from below.

        Samples whose signal equals ``sigma`` count as below.
        """
        k = int(np.sum(self.signals > sigma))
        return self.values[k : k + ell]

    def available_below(self, sigma: float) -> int:
        return int(np.sum(self.signals <= sigma))


# ---------------------------------------------------------------------------
# Single agent
# ---------------------------------------------------------------------------


def guarded_reserve_price(values, eps: float) -> float:
    """Empirical reserve price that ignores the top ``ceil(eps * l) - 1`` value ranks.

    Candidates are the values at ranks ``ceil(eps l)..l`` (1-based, descending).
    The winner maximizes ``v * #{values >= v}``; ties go to the smaller price.
    """
    vals = np.sort(np.asarray(values, dtype=np.float64).ravel())[::-1]
    ell = vals.size
    if ell == 0:
        raise DomainError("guarded_reserve_price needs at least one value")
    if not (0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    first = max(1, math.ceil(eps * ell - 1e-9))
    cand = vals[first - 1 :]
    asc = vals[::-1]
    counts = ell - np.searchsorted(asc, cand, side="left")
    rev = cand * counts
    best = rev.max()
    ties = rev >= best - 1e-12 * max(1.0, best)
    return float(cand[ties].min())


def single_agent_window_size(eps: float, constant_scale: float = 1.0) -> int:
    return max(1, math.ceil(constant_scale * eps**-3 * math.log(1.0 / eps)))


def single_agent_signal_price(
    samples: SignalSamples,
    sigma: float,
    eps: float,
    ell: Optional[int] = None,
    constant_scale: float = 1.0,
) -> float:
    """Guarded reserve price learned from the samples with signals just below ``sigma``.

    Returns ``inf`` (no sale) when no sample has a signal at or below ``sigma``.
    """
    if not (0 <= sigma <= 1):
        raise DomainError(f"signal must lie in [0, 1], got {sigma}")
    c = ell if ell is not None else single_agent_window_size(eps, constant_scale)
    window = samples.window(sigma, c)
    if window.size == 0:
        return math.inf
    return guarded_reserve_price(window, eps)


# ---------------------------------------------------------------------------
# Multiple agents
# ---------------------------------------------------------------------------


def multi_agent_window_size(n: int, eps: float, constant_scale: float = 1.0) -> int:
    return max(2, math.ceil(constant_scale * n**2 / eps**4 * math.log(n / eps) ** 2))


def multi_agent_signal_auction(
    samples: SignalSamples,
    signals: Sequence[float],
    eps: float,
    ell: Optional[int] = None,
    constant_scale: float = 1.0,
) -> RankMechanism:
    """Empirical Myerson auction on the signal-nearest windows of each bidder.

    Windows may overlap across bidders.  Window values are rounded down to a
    geometric grid anchored at the summed single-buyer estimates; the result
    prices any future value as the closest grid point below it.
    """
    n = len(signals)
    if n < 1:
        raise DomainError("need at least one bidder signal")
    if not (0 < eps < 1):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    size = ell if ell is not None else multi_agent_window_size(n, eps, constant_scale)
    if size < 2:
        raise DomainError("window size must be >= 2")
    short = {i: size - samples.available_below(s) for i, s in enumerate(signals) if samples.available_below(s) < size}
    if short:
        detail = ", ".join(f"bidder {i} short by {k}" for i, k in short.items())
        raise DomainError(f"not enough samples below the bidders' signals for windows of {size}: {detail}")
    windows = [samples.window(float(s), size) for s in signals]
    apx = sum(srev_estimate(w) for w in windows)
    if apx <= 0:
        raise DomainError("window revenue estimate is zero; the value grid cannot be anchored")
    grid = build_value_grid(apx, eps, n, "signals")
    emp = ProductDistribution(tuple(empirical_on_grid(w, grid) for w in windows))
    return build_myerson(emp, grid)


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------


def opt_signals_estimate(model: SignalModel, n: int, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``Opt`` over random signal profiles."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    sig = model.sample_signals(rng, (trials, n))
    opts = np.array([model.profile_opt(row) for row in sig])
    stderr = float(opts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(opts.mean()), stderr


def q_tail_estimate(
    model: SignalModel,
    eps: float,
    n: int,
    trials: int,
    rng: np.random.Generator,
    resolution: int = 100,
) -> float:
    """Largest grid ``q`` whose signal tail can be dropped at revenue loss at most ``eps``.

    Estimates ``E[1{all F(s_i) <= 1 - q} Opt(profile)]`` and compares it with
    ``(1 - eps)`` times the estimated unrestricted benchmark, for ``q`` on the
    grid ``{0, 1/resolution, ..., 1}``.
    """
    if trials < 100:
        raise DomainError("q_tail_estimate needs at least 100 trials")
    if not (0 < eps <= 1):
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    sig = model.sample_signals(rng, (trials, n))
    opts = np.array([model.profile_opt(row) for row in sig])
    top = np.asarray(model.signal_cdf(sig)).reshape(trials, n).max(axis=1)
    target = (1.0 - eps) * opts.mean()
    best = 0.0
    for q in np.arange(resolution + 1) / resolution:
        kept = np.where(top <= 1.0 - q + 1e-12, opts, 0.0).mean()
        if kept >= target - 1e-12 * max(1.0, target):
            best = float(q)
    return best


# ---------------------------------------------------------------------------
# Lower-bound family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowerBoundInstance:
    eps: float
    eps0: float
    scales: np.ndarray  # c_i
    weights: np.ndarray  # p_i
    gamma: float
    bits: tuple[int, ...]
    model: SignalModel

    @property
    def N(self) -> int:
        return self.scales.size - 1

    def family(self, i: int) -> ContinuousFamily:
        c = float(self.scales[i])
        return ContinuousFamily.lb_type2(c, self.eps0) if self.bits[i] else ContinuousFamily.lb_type1(c)

    def signal(self, i: int) -> float:
        return i / self.N

    def optimum(self, i: int) -> float:
        """Closed-form single-buyer optimum of conditional ``i``."""
        c = float(self.scales[i])
        return c * (1 - 2 * self.eps0) if self.bits[i] else c


def lower_bound_instance(eps: float, N: int, bits: Optional[Sequence[int]] = None, atoms: int = 50) -> LowerBoundInstance:
    """Signal model with ``N + 1`` signal atoms ``i / N`` and heavy-tailed conditionals.

    Conditional ``i`` has scale ``c_i = (1 - 2 eps0)^(-2 i)`` with ``eps0 = 9 eps``;
    bit ``i`` selects the lighter-tailed variant.  Signal ``i`` has probability
    proportional to ``1 / c_i``.
    """
    if not (0 < eps < 1.0 / 18):
        raise DomainError(f"eps must lie in (0, 1/18), got {eps}")
    if N < 1:
        raise DomainError("N must be >= 1")
    bits = tuple(int(b) for b in (bits if bits is not None else [0] * (N + 1)))
    if len(bits) != N + 1 or any(b not in (0, 1) for b in bits):
        raise DomainError(f"bits must be N + 1 = {N + 1} zeros/ones")
    eps0 = 9 * eps
    scales = (1 - 2 * eps0) ** (-2.0 * np.arange(N + 1))
    gamma = 1.0 / float(np.sum(1.0 / scales))
    weights = gamma / scales
    signals = np.arange(N + 1) / N
    marginal = DiscreteDistribution(signals, weights)

    families = {}
    for i in range(N + 1):
        c = float(scales[i])
        families[float(signals[i])] = ContinuousFamily.lb_type2(c, eps0) if bits[i] else ContinuousFamily.lb_type1(c)

    def conditional(s: float) -> Distribution:
        # round to the nearest signal atom at or below s
        i = int(np.searchsorted(signals, s + 1e-12, side="right")) - 1
        if i < 0:
            raise DomainError(f"signal {s} lies below every signal atom")
        return families[float(signals[i])]

    info = {"eps": eps, "N": N, "bits": bits}
    model = SignalModel(marginal, conditional, "lowerbound", atoms, False, info)
    return LowerBoundInstance(eps, eps0, scales, weights, gamma, bits, model)


def model_from_spec(spec, atoms: int = 50) -> SignalModel:
    """``"lb:eps,N[,bits]"`` or ``{"kind": "constant", "dist": {...}}`` / ``{"kind": "lowerbound", ...}``."""
    if isinstance(spec, str):
        if not spec.startswith("lb:"):
            raise DomainError(f"unknown model string {spec!r}; expected 'lb:eps,N[,bits]'")
        parts = spec[3:].split(",")
        if len(parts) not in (2, 3):
            raise DomainError("model string must be 'lb:eps,N' or 'lb:eps,N,bits'")
        eps, N = float(parts[0]), int(parts[1])
        bits = [int(ch) for ch in parts[2]] if len(parts) == 3 else None
        return lower_bound_instance(eps, N, bits, atoms).model
    kind = spec.get("kind")
    if kind == "constant":
        return SignalModel.constant_model(dist_from_spec(spec["dist"]), int(spec.get("atoms", atoms)))
    if kind == "lowerbound":
        return lower_bound_instance(float(spec["eps"]), int(spec["N"]), spec.get("bits"), int(spec.get("atoms", atoms))).model
    raise DomainError(f"unknown signal model kind {kind!r}")


__all__ = [
    "LowerBoundInstance",
    "SignalModel",
    "SignalSample",
    "SignalSamples",
    "guarded_reserve_price",
    "lower_bound_instance",
    "model_from_spec",
    "multi_agent_signal_auction",
    "multi_agent_window_size",
    "opt_signals_estimate",
    "q_tail_estimate",
    "single_agent_signal_price",
    "single_agent_window_size",
]
