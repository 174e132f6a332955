"""Optimal single-item auctions over finite product distributions, learned from samples."""

from .distributions import (
    ContinuousFamily,
    DiscreteDistribution,
    DomainError,
    ProductDistribution,
    RevenueCurve,
    ValueGrid,
    cdf,
    dominates,
    empirical_from,
    mixture,
    quantile_value,
    revenue_curve,
    round_down_to_grid,
    single_buyer_opt,
    truncate_at,
    truncate_top_mass,
)
from .learning import LearnerConfig, approx_opt, build_value_grid, learn_empirical_myerson, srev_estimate
from .mechanisms import (
    Outcome,
    RankMechanism,
    brute_force_opt,
    build_myerson,
    expected_revenue_exact,
    expected_revenue_mc,
    optimal_revenue,
    posted_price_revenue,
    run,
    vcg_duplicates_revenue,
)
from .rng import make_rng
from .signals import (
    SignalModel,
    SignalSamples,
    guarded_reserve_price,
    lower_bound_instance,
    multi_agent_signal_auction,
    opt_signals_estimate,
    q_tail_estimate,
    single_agent_signal_price,
)

__version__ = "0.1.0"
