import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from myerson_lab.distributions import (
    DiscreteDistribution,
    ProductDistribution,
    ValueGrid,
    cdf,
    dominates,
    quantile_value,
    revenue_curve,
    round_down_to_grid,
    single_buyer_opt,
    truncate_at,
    truncate_top_mass,
)
from myerson_lab.mechanisms import (
    build_myerson,
    check_dsic_ir,
    expected_revenue_exact,
    posted_price_revenue,
    virtual_surplus,
)
from myerson_lab.verification import high_value_bounds

SETTINGS = settings(max_examples=150, deadline=None)


@st.composite
def discrete(draw, max_atoms=5, max_value=10):
    values = draw(st.lists(st.integers(1, max_value), min_size=1, max_size=max_atoms, unique=True))
    weights = draw(st.lists(st.integers(1, 20), min_size=len(values), max_size=len(values)))
    w = np.asarray(weights, dtype=float)
    return DiscreteDistribution(sorted(values), (w / w.sum())[np.argsort(values)])


@st.composite
def product(draw, max_n=3, max_atoms=3):
    n = draw(st.integers(1, max_n))
    return ProductDistribution(tuple(draw(discrete(max_atoms)) for _ in range(n)))


class TestQuantiles:
    @SETTINGS
    @given(discrete(), st.floats(1e-9, 1), st.floats(0, 12))
    def test_galois_connection(self, d, q, v):
        # q = 0 is pinned to the lowest atom, so the connection is checked away from it
        assert (quantile_value(d, q) <= v) == (q <= cdf(d, v) + 1e-12)

    @SETTINGS
    @given(discrete())
    def test_quantile_of_cdf_is_atom(self, d):
        for v, F in zip(d.support, d.cdf_values):
            assert quantile_value(d, F) <= v


class TestRevenueCurve:
    @SETTINGS
    @given(discrete())
    def test_hull_dominates_raw_points(self, d):
        rc = revenue_curve(d)
        raw = rc.breakpoints
        assert np.all(rc.hull_at(raw[:, 0]) >= raw[:, 1] - 1e-12)

    @SETTINGS
    @given(discrete())
    def test_ironed_values_monotone(self, d):
        iv = revenue_curve(d).ironed_values
        assert np.all(np.diff(iv) >= -1e-9)

    @SETTINGS
    @given(discrete())
    def test_opt_is_best_posted_price(self, d):
        price, rev = single_buyer_opt(d)
        assert rev == pytest.approx(max(posted_price_revenue(v, d) for v in d.support), abs=1e-12)
        assert posted_price_revenue(price, d) == pytest.approx(rev, abs=1e-12)


class TestDominance:
    @SETTINGS
    @given(discrete(), discrete(), discrete())
    def test_transitivity(self, a, b, c):
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)

    @SETTINGS
    @given(discrete(), st.floats(0.5, 12))
    def test_truncation_is_dominated(self, d, cap):
        assert dominates(d, truncate_at(d, cap))

    @SETTINGS
    @given(discrete(), st.floats(0, 1, exclude_min=True, exclude_max=True))
    def test_top_mass_truncation_is_dominated(self, d, delta):
        assert dominates(d, truncate_top_mass(d, delta))

    @SETTINGS
    @given(discrete(), st.floats(0.1, 3))
    def test_rounding_is_dominated(self, d, step):
        rounded = round_down_to_grid(d, ValueGrid.arithmetic(step, 12))
        assert dominates(d, rounded)
        assert rounded.mean() <= d.mean() + 1e-12


class TestMechanism:
    @SETTINGS
    @given(product())
    def test_revenue_equals_virtual_surplus(self, D):
        m = build_myerson(D)
        assert abs(expected_revenue_exact(m, D) - virtual_surplus(m, D)) <= 1e-9

    @settings(max_examples=60, deadline=None)
    @given(product())
    def test_truthful(self, D):
        chk = check_dsic_ir(build_myerson(D))
        assert chk["ic_violations"] == 0 and chk["ir_violations"] == 0


class TestHighValueBounds:
    @SETTINGS
    @given(st.lists(st.floats(0, 0.3), min_size=1, max_size=6), st.floats(0.01, 0.5))
    def test_two_sided_bound_under_precondition(self, q, eps):
        # the bound assumes every buyer, and the union, stays within eps
        q = [min(x, eps) for x in q]
        if 1 - np.prod(1 - np.asarray(q)) > eps:
            return
        assert high_value_bounds(q, eps) == (True, True)
