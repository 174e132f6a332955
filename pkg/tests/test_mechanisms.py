import numpy as np
import pytest

from myerson_lab.distributions import DiscreteDistribution, DomainError, ProductDistribution
from myerson_lab.mechanisms import (
    Outcome,
    RankMechanism,
    brute_force_opt,
    build_myerson,
    check_dsic_ir,
    expected_revenue_exact,
    expected_revenue_mc,
    optimal_revenue,
    posted_price_revenue,
    run,
    vcg_duplicates_payment,
    vcg_duplicates_revenue,
    virtual_surplus,
)
from myerson_lab.rng import make_rng
from myerson_lab.verification import random_product

U12 = DiscreteDistribution.uniform_over([1, 2])
U123 = DiscreteDistribution.uniform_over([1, 2, 3])
TWO_U12 = ProductDistribution.iid(U12, 2)


class TestBuildMyerson:
    def test_two_uniform_buyers_rank_order(self):
        m = build_myerson(TWO_U12)
        order = [(c["buyer"], c["value"]) for c in m.cells()]
        assert order == [(0, 2.0), (1, 2.0), (0, 1.0), (1, 1.0)]
        np.testing.assert_allclose(m.ironed[0], [0.0, 2.0], atol=1e-15)

    def test_ironed_single_buyer(self):
        m = build_myerson(ProductDistribution((DiscreteDistribution([1, 2, 10], [0.9, 0.05, 0.05]),)))
        assert np.all(m.ironed[0] >= 0)
        assert run(m, [1]).winner == 0

    def test_reserve_excludes_low_value(self):
        m = build_myerson(ProductDistribution((U123,)))
        assert run(m, [1]) == Outcome(None, 0.0)
        assert run(m, [2]) == Outcome(0, 2.0)
        assert run(m, [3]) == Outcome(0, 2.0)

    def test_ranks_are_a_permutation(self):
        rng = make_rng(5)
        for _ in range(20):
            D = random_product(rng, 3, 3)
            m = build_myerson(D)
            ranks = np.sort(np.concatenate(m.ranks))
            np.testing.assert_array_equal(ranks, np.arange(1, ranks.size + 1))
            for r in m.ranks:
                assert np.all(np.diff(r) < 0)


class TestRun:
    @pytest.mark.parametrize(
        "profile, expected",
        [((1, 1), Outcome(0, 1.0)), ((1, 2), Outcome(1, 2.0)), ((2, 2), Outcome(0, 2.0)), ((2, 1), Outcome(0, 1.0))],
    )
    def test_two_uniform(self, profile, expected):
        assert run(build_myerson(TWO_U12), profile) == expected

    def test_value_outside_support(self):
        with pytest.raises(DomainError):
            run(build_myerson(TWO_U12), (1.5, 1))

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            run(build_myerson(TWO_U12), (1,))

    def test_round_down(self):
        m = build_myerson(TWO_U12)
        assert run(m, (1.5, 1.2), round_down=True) == Outcome(0, 1.0)
        assert run(m, (0.5, 0.5), round_down=True) == Outcome(None, 0.0)

    def test_payment_not_above_value(self):
        rng = make_rng(11)
        for _ in range(30):
            D = random_product(rng, 3, 3)
            m = build_myerson(D)
            prof = [d.support[rng.integers(len(d))] for d in D]
            out = run(m, prof)
            if out.winner is not None:
                assert out.payment <= prof[out.winner] + 1e-12


class TestRevenue:
    def test_exact_two_uniform(self):
        assert expected_revenue_exact(build_myerson(TWO_U12), TWO_U12) == pytest.approx(1.5)

    def test_exact_single(self):
        D = ProductDistribution((U123,))
        assert optimal_revenue(D) == pytest.approx(4 / 3)

    def test_exact_point_mass_equals_run(self):
        D = ProductDistribution((DiscreteDistribution.point_mass(3), DiscreteDistribution.point_mass(5)))
        m = build_myerson(D)
        assert expected_revenue_exact(m, D) == run(m, (3, 5)).payment == 5

    def test_cap(self):
        with pytest.raises(DomainError, match="Monte Carlo|expected_revenue_mc"):
            expected_revenue_exact(build_myerson(TWO_U12), TWO_U12, cap=3)

    def test_mc_matches_exact(self):
        rev, se = expected_revenue_mc(build_myerson(TWO_U12), TWO_U12, 100_000, make_rng(0))
        assert abs(rev - 1.5) <= 3 * se

    def test_mc_single_trial(self):
        m = build_myerson(TWO_U12)
        rev, se = expected_revenue_mc(m, TWO_U12, 1, make_rng(3))
        vals = TWO_U12.sample(make_rng(3), 1)[0]
        assert rev == run(m, vals).payment and se == 0.0

    def test_mc_point_mass(self):
        D = ProductDistribution.iid(DiscreteDistribution.point_mass(2), 2)
        assert expected_revenue_mc(build_myerson(D), D, 50, make_rng(0)) == (2.0, 0.0)

    def test_virtual_surplus_identity(self):
        rng = make_rng(2)
        for _ in range(50):
            D = random_product(rng, 3, 4)
            m = build_myerson(D)
            assert expected_revenue_exact(m, D) == pytest.approx(virtual_surplus(m, D), abs=1e-9)

    def test_scaling(self):
        rng = make_rng(4)
        for _ in range(20):
            D = random_product(rng, 3, 3)
            lam = float(rng.uniform(0.1, 10))
            m, ms = build_myerson(D), build_myerson(D.scaled(lam))
            assert expected_revenue_exact(ms, D.scaled(lam)) == pytest.approx(lam * expected_revenue_exact(m, D), rel=1e-9)
            prof = [d.support[rng.integers(len(d))] for d in D]
            assert run(m, prof).winner == run(ms, [lam * v for v in prof]).winner


class TestOracle:
    def test_two_uniform(self):
        assert brute_force_opt(TWO_U12) == pytest.approx(1.5)

    def test_single(self):
        assert brute_force_opt(ProductDistribution((U123,))) == pytest.approx(4 / 3)

    def test_point_mass(self):
        assert brute_force_opt(ProductDistribution((DiscreteDistribution.point_mass(5),))) == pytest.approx(5)

    def test_too_large(self):
        with pytest.raises(DomainError):
            brute_force_opt(ProductDistribution.iid(DiscreteDistribution.uniform_over([1, 2, 3, 4]), 3))

    def test_agrees_with_myerson(self):
        rng = make_rng(9)
        for _ in range(60):
            D = random_product(rng, 3, 3, max_profiles=27)
            assert optimal_revenue(D) == pytest.approx(brute_force_opt(D), abs=1e-9)

    def test_irregular_instance(self):
        d = DiscreteDistribution([1, 2, 10], [0.9, 0.05, 0.05])
        D = ProductDistribution((d, U12))
        assert optimal_revenue(D) == pytest.approx(brute_force_opt(D), abs=1e-9)


class TestTruthfulness:
    def test_exhaustive(self):
        rng = make_rng(21)
        for _ in range(40):
            D = random_product(rng, 3, 4, max_profiles=64)
            chk = check_dsic_ir(build_myerson(D))
            assert chk["ic_violations"] == 0 and chk["ir_violations"] == 0


class TestSerialization:
    def test_round_trip(self):
        rng = make_rng(8)
        D = random_product(rng, 3, 3)
        m = build_myerson(D)
        back = RankMechanism.from_json(m.to_json())
        assert back.same_as(m)
        assert back.to_json() == m.to_json()

    def test_cells_fields(self):
        cell = build_myerson(TWO_U12).cells()[0]
        assert set(cell) == {"buyer", "value", "ironed_value", "rank"}


class TestBenchmarks:
    def test_vcg_duplicates(self):
        assert vcg_duplicates_payment(np.array([[3, 1], [2, 5]])) == 3
        assert vcg_duplicates_payment(np.array([[3, 1], [2, 5]]), cap=2.5) == 2.5
        assert vcg_duplicates_payment(np.zeros((2, 2))) == 0

    def test_vcg_revenue_run(self):
        D = ProductDistribution.iid(DiscreteDistribution.point_mass(4), 2)
        assert vcg_duplicates_revenue(D, 10.0, make_rng(0)) == 4.0
        with pytest.raises(DomainError):
            vcg_duplicates_revenue(D, 0.0, make_rng(0))

    def test_posted_price_monotone_under_dominance(self):
        lo = DiscreteDistribution([1, 2, 3], [0.5, 0.3, 0.2])
        hi = DiscreteDistribution([1, 2, 3], [0.2, 0.3, 0.5])
        for p in (0.5, 1, 1.5, 2, 3):
            assert posted_price_revenue(p, hi) >= posted_price_revenue(p, lo)
