import math

import numpy as np
import pytest

from myerson_lab.distributions import (
    ContinuousFamily,
    DiscreteDistribution,
    DomainError,
    ProductDistribution,
    ValueGrid,
    as_discrete,
    cdf,
    dist_from_spec,
    dist_to_spec,
    dominates,
    empirical_from,
    is_regular,
    mixture,
    posted_price_revenue,
    product_from_spec,
    quantile_value,
    revenue_curve,
    round_down_to_grid,
    shift_mass,
    single_buyer_opt,
    truncate_at,
    truncate_top_mass,
)
from myerson_lab.rng import make_rng

U123 = DiscreteDistribution.uniform_over([1, 2, 3])
SKEW = DiscreteDistribution([1, 2, 10], [0.9, 0.05, 0.05])


def atoms_close(d, expected, tol=1e-12):
    got = {v: p for v, p in d.atoms().items() if p > 0}
    assert sorted(got) == pytest.approx(sorted(expected), abs=tol)
    for (v, p), (ev, ep) in zip(sorted(got.items()), sorted(expected.items())):
        assert p == pytest.approx(ep, abs=tol)


class TestConstruction:
    def test_rejects_bad_sum(self):
        with pytest.raises(DomainError):
            DiscreteDistribution([1, 2], [0.5, 0.6])

    def test_rejects_unsorted_support(self):
        with pytest.raises(DomainError):
            DiscreteDistribution([2, 1], [0.5, 0.5])

    def test_rejects_negative_values(self):
        with pytest.raises(DomainError):
            DiscreteDistribution([-1, 1], [0.5, 0.5])

    def test_zero_probability_atoms_allowed(self):
        d = DiscreteDistribution([1, 2, 3], [0.5, 0.0, 0.5])
        assert d.cdf(2) == pytest.approx(0.5)

    def test_from_atoms_merges_duplicates(self):
        d = DiscreteDistribution.from_atoms([3, 1, 3], [0.25, 0.5, 0.25])
        atoms_close(d, {1: 0.5, 3: 0.5})

    def test_arrays_are_read_only(self):
        with pytest.raises(ValueError):
            U123.probs[0] = 1.0


class TestCdfQuantile:
    def test_uniform_cdf(self):
        assert cdf(U123, 2) == pytest.approx(2 / 3)

    def test_lb1_cdf(self):
        assert cdf(ContinuousFamily.lb_type1(1.0), 1.0) == pytest.approx(0.5)

    def test_cdf_below_support(self):
        assert cdf(U123, 0.5) == 0.0

    def test_cdf_right_continuous(self):
        assert cdf(U123, 1.0) == pytest.approx(1 / 3)
        assert cdf(U123, 1.0 - 1e-9) == 0.0

    def test_quantile_uniform(self):
        assert quantile_value(U123, 0.5) == 2.0

    def test_quantile_lb1(self):
        assert quantile_value(ContinuousFamily.lb_type1(1.0), 0.5) == pytest.approx(1.0)

    def test_quantile_zero_is_min_support(self):
        assert quantile_value(U123, 0.0) == 1.0

    @pytest.mark.parametrize("q", [-0.1, 1.1])
    def test_quantile_domain(self, q):
        with pytest.raises(DomainError):
            quantile_value(U123, q)

    def test_non_finite_cdf_argument(self):
        with pytest.raises(DomainError):
            cdf(U123, math.inf)

    def test_tail_matches_sale_probs(self):
        np.testing.assert_allclose(U123.tail(U123.support), U123.sale_probs())
        assert U123.tail(4.0) == 0.0

    def test_upper_tail_keeps_relative_precision(self):
        d = ContinuousFamily.lb_type1(1.0).discretize(2_000_000)
        assert d.sale_probs()[-1] == pytest.approx(5e-7, rel=1e-9)


class TestFamilies:
    def test_lb2_agrees_with_lb1_below_breakpoint(self):
        f1, f2 = ContinuousFamily.lb_type1(2.0), ContinuousFamily.lb_type2(2.0, 0.1)
        x = np.linspace(0, f2.breakpoint, 50)
        np.testing.assert_allclose(f1.cdf(x), f2.cdf(x), atol=1e-15)

    def test_lb2_continuous_at_breakpoint(self):
        f2 = ContinuousFamily.lb_type2(1.5, 0.2)
        b = f2.breakpoint
        assert f2.cdf(b) == pytest.approx(f2.cdf(b * (1 + 1e-12)), abs=1e-9)

    def test_lb2_quantile_inverts_cdf(self):
        f2 = ContinuousFamily.lb_type2(1.0, 0.15)
        q = np.linspace(0.01, 0.99, 99)
        np.testing.assert_allclose(f2.cdf(f2.quantile(q)), q, atol=1e-12)

    def test_lb1_posted_price(self):
        assert posted_price_revenue(1.0, ContinuousFamily.lb_type1(1.0)) == pytest.approx(0.5)

    def test_discretize_lower_is_dominated(self):
        fam = ContinuousFamily.uniform(0, 1)
        lo, hi = fam.discretize(10, "lower"), fam.discretize(10, "upper")
        assert dominates(hi, lo)
        np.testing.assert_allclose(hi.support, np.arange(1, 11) / 10)

    def test_upper_rule_rejects_unbounded(self):
        with pytest.raises(DomainError):
            ContinuousFamily.lb_type1(1.0).discretize(10, "upper")

    def test_lb1_discretized_optimum(self):
        d = ContinuousFamily.lb_type1(3.0).discretize(40)
        assert single_buyer_opt(d)[1] == pytest.approx(3.0 * (1 - 1 / 40))

    def test_bad_params(self):
        with pytest.raises(DomainError):
            ContinuousFamily.lb_type2(1.0, 0.5)
        with pytest.raises(DomainError):
            ContinuousFamily.uniform(2.0, 1.0)

    def test_sampling_matches_cdf(self):
        fam = ContinuousFamily.exponential(2.0)
        x = fam.sample(make_rng(0), 20000)
        assert np.mean(x <= 0.5) == pytest.approx(fam.cdf(0.5), abs=0.02)


class TestTruncation:
    def test_truncate_at(self):
        atoms_close(truncate_at(U123, 2), {1: 1 / 3, 2: 2 / 3})

    def test_truncate_at_identity(self):
        assert truncate_at(U123, 5).equals(U123)

    def test_truncate_at_mass_arithmetic(self):
        d = DiscreteDistribution([1, 4, 5], [0.4, 0.3, 0.3])
        atoms_close(truncate_at(d, 4), {1: 0.4, 4: 0.6})

    def test_truncate_top_mass(self):
        d = DiscreteDistribution.uniform_over([1, 2, 3, 4])
        atoms_close(truncate_top_mass(d, 0.25), {1: 0.25, 2: 0.25, 3: 0.5})

    def test_truncate_top_mass_at_boundary(self):
        d = DiscreteDistribution.uniform_over([1, 2])
        atoms_close(truncate_top_mass(d, 0.5), {1: 1.0})

    def test_truncate_top_mass_point(self):
        d = DiscreteDistribution.point_mass(3.0)
        assert truncate_top_mass(d, 0.3).equals(d)

    def test_truncate_top_mass_domain(self):
        with pytest.raises(DomainError):
            truncate_top_mass(U123, 0.0)


class TestRounding:
    def test_floor_arithmetic(self):
        d = DiscreteDistribution([1.3, 2.7], [0.5, 0.5])
        atoms_close(round_down_to_grid(d, ValueGrid.arithmetic(0.5, 3.0)), {1.0: 0.5, 2.5: 0.5})

    def test_on_grid_identity(self):
        grid = ValueGrid([3, 2, 1])
        assert round_down_to_grid(U123, grid).equals(U123)

    def test_floor_to_zero(self):
        d = DiscreteDistribution.point_mass(0.9)
        atoms_close(round_down_to_grid(d, ValueGrid([2, 1, 0])), {0.0: 1.0})

    def test_below_grid_without_zero(self):
        with pytest.raises(DomainError):
            round_down_to_grid(DiscreteDistribution.point_mass(0.5), ValueGrid([2, 1]))

    def test_geometric_grid(self):
        g = ValueGrid.geometric(16, 0.5, 1 / 16)
        np.testing.assert_allclose(g.values, [16, 8, 4, 2, 1, 0.5, 0.25, 0.125, 0.0625, 0])

    def test_grid_must_descend(self):
        with pytest.raises(DomainError):
            ValueGrid([1, 2])


class TestDominanceAndMixtures:
    def test_reflexive(self):
        assert dominates(U123, U123)

    def test_direction(self):
        hi = DiscreteDistribution([1, 2], [0.5, 0.5])
        lo = DiscreteDistribution([1, 2], [0.9, 0.1])
        assert dominates(hi, lo)
        assert not dominates(lo, hi)

    def test_mixture_idempotent(self):
        assert mixture([U123, U123], [0.5, 0.5]).equals(U123)

    def test_mixture_of_points(self):
        pts = [DiscreteDistribution.point_mass(v) for v in (1, 2, 3)]
        assert mixture(pts, [1 / 3] * 3).equals(U123)
        atoms_close(mixture(pts[:2], [0.5, 0.5]), {1: 0.5, 2: 0.5})

    def test_mixture_weight_check(self):
        with pytest.raises(DomainError):
            mixture([U123, U123], [0.5, 0.6])

    def test_empirical(self):
        atoms_close(empirical_from([2, 2, 5]), {2: 2 / 3, 5: 1 / 3})
        atoms_close(empirical_from([7]), {7: 1.0})
        with pytest.raises(DomainError):
            empirical_from([])

    def test_empirical_convergence(self):
        d = DiscreteDistribution.uniform_over([1, 2])
        emp = empirical_from(d.sample(make_rng(0), 1000))
        for p in emp.probs:
            assert abs(p - 0.5) <= 0.05

    def test_shift_mass(self):
        d = DiscreteDistribution([1, 2], [0.5, 0.5])
        atoms_close(shift_mass(d, 1, 2, 0.2), {1: 0.3, 2: 0.7})


class TestRevenueCurve:
    def test_uniform(self):
        rc = revenue_curve(U123)
        np.testing.assert_allclose(rc.breakpoints[1:], [[1 / 3, 1], [2 / 3, 4 / 3], [1, 1]])
        np.testing.assert_allclose(rc.ironed_values, [-1, 1, 3])
        assert rc.is_concave()

    def test_ironing(self):
        rc = revenue_curve(SKEW)
        np.testing.assert_allclose(rc.hull, [[0, 0], [0.05, 0.5], [1, 1]])
        np.testing.assert_allclose(rc.ironed_values, [10 / 19, 10 / 19, 10])
        assert rc.ironed_values[0] == rc.ironed_values[1]
        assert not is_regular(SKEW)

    def test_point_mass(self):
        rc = revenue_curve(DiscreteDistribution.point_mass(5.0))
        np.testing.assert_allclose(rc.ironed_values, [5.0])

    def test_zero_mass_bottom_atom_never_sells(self):
        d = DiscreteDistribution([1, 2, 3], [0.0, 0.5, 0.5])
        assert revenue_curve(d).ironed_values[0] == -np.inf

    def test_single_buyer_opt(self):
        assert single_buyer_opt(U123) == pytest.approx((2, 4 / 3))
        assert single_buyer_opt(SKEW) == pytest.approx((1, 1))
        assert single_buyer_opt(DiscreteDistribution.point_mass(5)) == (5, 5)

    def test_posted_price_edges(self):
        assert posted_price_revenue(0.0, U123) == 0.0
        assert posted_price_revenue(4.0, U123) == 0.0
        with pytest.raises(DomainError):
            posted_price_revenue(-1.0, U123)


class TestSpecs:
    def test_round_trip(self):
        for d in (U123, ContinuousFamily.lb_type2(1.0, 0.1), ContinuousFamily.exponential(0.5)):
            back = dist_from_spec(dist_to_spec(d))
            if isinstance(d, DiscreteDistribution):
                assert back.equals(d)
            else:
                assert back == d

    def test_product_forms(self):
        D = product_from_spec({"n": 2, "buyer": {"kind": "uniform", "a": 0, "b": 1}, "atoms": 5})
        assert D.n == 2 and len(D[0]) == 5
        D = product_from_spec({"buyers": [{"kind": "point", "value": 3}, {"kind": "discrete", "support": [1, 2]}]})
        assert D.num_profiles == 2

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            dist_from_spec({"kind": "pareto"})

    def test_missing_field(self):
        with pytest.raises(DomainError, match="'c'"):
            dist_from_spec({"kind": "lb1"})

    def test_as_discrete_passthrough(self):
        assert as_discrete(U123) is U123


class TestProduct:
    def test_profile_grid(self):
        D = ProductDistribution((U123, DiscreteDistribution.uniform_over([5, 6])))
        idx, prob = D.profile_grid()
        assert idx.shape == (6, 2)
        assert prob.sum() == pytest.approx(1.0)

    def test_expectation(self):
        D = ProductDistribution.iid(U123, 2)
        assert D.expectation(lambda v: v.sum(axis=1)) == pytest.approx(4.0)

    def test_sample_shape(self):
        D = ProductDistribution.iid(U123, 3)
        assert D.sample(make_rng(1), 7).shape == (7, 3)
