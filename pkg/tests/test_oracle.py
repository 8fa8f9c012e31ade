import math
import unittest

import numpy as np
from scipy import integrate, stats
from scipy.special import expit, logit

from fasi_sdk.constants import INDECISION, SCENARIO_MU_2
from fasi_sdk.core.errors import DegeneratePointError, ValidationError
from fasi_sdk.metrics import fsp
from fasi_sdk.oracle import (
    MixtureSpec,
    QCurve,
    analytic_q_curve,
    default_grid,
    mfsr,
    oracle_rule,
    oracle_rvalues,
    posterior_score,
    q_curve,
    rcc_score,
    scenario_one,
    scenario_two,
    supports_analytic,
    theoretical_rvalue,
)


def one_dim(mu2=2.0, pi2=0.5):
    return MixtureSpec(
        groups=("a",),
        classes=("1", "2"),
        group_priors={"a": 1.0},
        class_priors={"a": {"1": 1.0 - pi2, "2": pi2}},
        means={"a": {"1": (0.0,), "2": (mu2,)}},
        variances={"a": {"1": (1.0,), "2": (1.0,)}},
    )


def quadrature_q(t, mu2=2.0):
    # S >= t  <=>  x >= mu2/2 + logit(t)/mu2 for N(0,1) vs N(mu2,1), equal priors
    cut = mu2 / 2 + logit(t) / mu2
    false, _ = integrate.quad(stats.norm.pdf, cut, np.inf)
    true, _ = integrate.quad(lambda x: stats.norm.pdf(x, loc=mu2), cut, np.inf)
    return false / (false + true)


class TestMixtureSpec(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ValidationError):
            MixtureSpec(("a",), ("1", "2"), {"a": 0.9}, {"a": {"1": 0.5, "2": 0.5}},
                        {"a": {"1": (0.0,), "2": (1.0,)}}, {"a": {"1": (1.0,), "2": (1.0,)}})
        with self.assertRaises(ValidationError):
            MixtureSpec(("a",), ("1", "2"), {"a": 1.0}, {"a": {"1": 0.5, "2": 0.5}},
                        {"a": {"1": (0.0,), "2": (1.0,)}}, {"a": {"1": (1.0,), "2": (0.0,)}})

    def test_dict_round_trip(self):
        spec = scenario_two(0.35)
        again = MixtureSpec.from_dict(spec.to_dict())
        self.assertEqual(again.to_dict(), spec.to_dict())
        self.assertEqual(again.dim, 3)

    def test_from_dict_missing_key(self):
        data = scenario_one(0.5).to_dict()
        del data["means"]
        with self.assertRaises(ValidationError):
            MixtureSpec.from_dict(data)

    def test_draw_shapes_and_group_share(self):
        x, groups, labels = scenario_one(0.2).draw(20000, np.random.default_rng(1))
        self.assertEqual(x.shape, (20000, 3))
        self.assertAlmostEqual(np.mean(groups == "F"), 0.5, delta=0.02)
        in_f = groups == "F"
        self.assertAlmostEqual(np.mean(labels[in_f] == "2"), 0.2, delta=0.02)


class TestPosterior(unittest.TestCase):
    def test_classes_sum_to_one(self):
        spec = scenario_one(0.3)
        x = np.random.default_rng(0).normal(3.0, 2.0, size=(50, 3))
        groups = np.array(["F", "M"] * 25, dtype=object)
        total = posterior_score(x, groups, "1", spec) + posterior_score(x, groups, "2", spec)
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_closed_form_log_odds(self):
        spec = scenario_one(0.3)
        expected = expit(9.0 / 4.0)
        self.assertAlmostEqual(posterior_score(np.array(SCENARIO_MU_2), "M", "2", spec), expected, places=12)

    def test_against_density_ratio(self):
        spec = scenario_one(0.3)
        x = np.array([1.0, 2.0, 6.5])
        f1 = np.prod(stats.norm.pdf(x, loc=spec.means["F"]["1"], scale=math.sqrt(2.0)))
        f2 = np.prod(stats.norm.pdf(x, loc=spec.means["F"]["2"], scale=math.sqrt(2.0)))
        expected = 0.3 * f2 / (0.3 * f2 + 0.7 * f1)
        self.assertAlmostEqual(posterior_score(x, "F", "2", spec), expected, places=10)

    def test_degenerate_prior(self):
        spec = one_dim(pi2=1.0)
        self.assertEqual(posterior_score(np.array([0.0]), "a", "2", spec), 1.0)
        self.assertEqual(posterior_score(np.array([0.0]), "a", "1", spec), 0.0)

    def test_vanishing_densities(self):
        with self.assertRaises(DegeneratePointError):
            posterior_score(np.array([[np.inf]]), "a", "2", one_dim())

    def test_rcc_matches_group_posterior_when_groups_agree(self):
        spec = scenario_one(0.5)
        x = np.random.default_rng(3).normal(3.0, 2.0, size=(20, 3))
        np.testing.assert_allclose(rcc_score(x, "2", spec), posterior_score(x, "F", "2", spec), atol=1e-12)

    def test_rcc_uses_marginal_prior(self):
        spec = scenario_one(0.2)
        # pooled prior of class 2 is (0.2 + 0.5) / 2
        expected = expit(9.0 / 4.0 + math.log(0.35 / 0.65))
        self.assertAlmostEqual(rcc_score(np.array(SCENARIO_MU_2), "2", spec), expected, places=12)


class TestQCurve(unittest.TestCase):
    def test_analytic_against_quadrature(self):
        spec = one_dim()
        grid = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
        curve = analytic_q_curve(spec, "a", "2", grid)
        self.assertAlmostEqual(curve.q[2], stats.norm.sf(1.0), places=12)
        for t, q in zip(grid, curve.q):
            self.assertAlmostEqual(q, quadrature_q(t), places=7)

    def test_analytic_other_class(self):
        spec = one_dim()
        curve = analytic_q_curve(spec, "a", "1", [0.5])
        self.assertAlmostEqual(curve.q[0], stats.norm.sf(1.0), places=12)

    def test_monte_carlo_within_three_se(self):
        spec = one_dim()
        grid = np.array([0.25, 0.5, 0.75])
        mc = q_curve(spec, "a", "2", grid, mc_n=200_000, seed=11, chunk_size=50_000)
        exact = analytic_q_curve(spec, "a", "2", grid)
        self.assertEqual(mc.chunks, 4)
        self.assertTrue(np.all(np.abs(mc.q - exact.q) <= 3 * mc.se))

    def test_chunks_deterministic_across_threads(self):
        spec = one_dim()
        a = q_curve(spec, "a", "2", [0.5], mc_n=40_000, seed=2, chunk_size=10_000, threads=1)
        b = q_curve(spec, "a", "2", [0.5], mc_n=40_000, seed=2, chunk_size=10_000, threads=4)
        np.testing.assert_array_equal(a.n_selected, b.n_selected)
        np.testing.assert_array_equal(a.q, b.q)

    def test_too_few_draws(self):
        with self.assertRaises(ValidationError):
            q_curve(one_dim(), "a", "2", [0.5], mc_n=100)

    def test_undefined_points_flagged(self):
        with self.assertLogs("fasi_sdk.oracle", level="WARNING"):
            curve = q_curve(one_dim(), "a", "2", [0.5, 1.0], mc_n=10_000, seed=0)
        self.assertEqual(list(curve.defined), [True, False])

    def test_bad_grid(self):
        with self.assertRaises(ValidationError):
            analytic_q_curve(one_dim(), "a", "2", [0.5, 1.5])

    def test_supports_analytic(self):
        self.assertTrue(supports_analytic(scenario_one(0.2), "F"))
        self.assertFalse(supports_analytic(one_dim(pi2=1.0), "a"))

    def test_monte_carlo_curve_non_increasing(self):
        spec = scenario_two(0.35)
        grid = np.round(np.arange(0.05, 0.96, 0.05), 2)
        for a in spec.groups:
            for c in spec.classes:
                curve = q_curve(spec, a, c, grid, mc_n=100_000, seed=4, chunk_size=25_000)
                step = np.diff(curve.q)
                slack = 3 * np.sqrt(curve.se[1:] ** 2 + curve.se[:-1] ** 2)
                self.assertTrue(np.all(step <= slack), (a, c, step, slack))


def _curve(grid, q):
    grid = np.asarray(grid, dtype=float)
    return QCurve(
        group="a", cls="2", grid=grid, q=np.asarray(q, dtype=float), se=np.zeros(len(grid)),
        n_selected=np.ones(len(grid), dtype=int), mc_n=0, seed=None, chunks=0, method="fixed",
    )


class TestTheoreticalRValue(unittest.TestCase):
    def test_running_minimum_flattens_bump(self):
        curve = _curve([0.0, 0.25, 0.5, 0.75, 1.0], [0.6, 0.4, 0.5, 0.2, 0.3])
        r = theoretical_rvalue(curve, np.array([0.1, 0.3, 0.6, 0.8, 1.0]))
        np.testing.assert_allclose(r, [0.6, 0.4, 0.4, 0.2, 0.2])

    def test_undefined_points_skipped(self):
        curve = _curve([0.0, 0.5, 1.0], [0.6, np.nan, 0.3])
        self.assertEqual(theoretical_rvalue(curve, 0.7), 0.6)
        self.assertEqual(theoretical_rvalue(curve, 1.0), 0.3)

    def test_scalar_and_cap(self):
        curve = _curve([0.0, 1.0], [np.nan, np.nan])
        self.assertEqual(theoretical_rvalue(curve, 0.4), 1.0)

    def test_oracle_rvalues_fill_cache(self):
        spec = one_dim()
        cache = {}
        x = np.array([[0.0], [2.0], [4.0]])
        r = oracle_rvalues(spec, x, ["a", "a", "a"], "2", grid=default_grid(0.01), curves=cache)
        self.assertIn(("a", "2"), cache)
        self.assertTrue(r[0] >= r[1] >= r[2])


class TestOracleRule(unittest.TestCase):
    def test_decisions(self):
        out = oracle_rule([0.05, 0.5, 0.03], [0.5, 0.5, 0.02], 0.1, 0.1)
        self.assertEqual(list(out.decisions), ["1", INDECISION, "2"])
        self.assertEqual(out.n_overlap, 1)

    def test_class_specific_levels(self):
        out = oracle_rule([0.15], [0.5], 0.2, 0.01)
        self.assertEqual(out.decisions[0], "1")


class TestMarginalFSR(unittest.TestCase):
    def test_pooled_ratio(self):
        value = mfsr(["2", "2", "1", "2"], ["2", "1", "1", "2"], ["F", "F", "F", "M"], "F", "2")
        self.assertEqual(value, 0.5)

    def test_nothing_selected(self):
        self.assertIsNone(mfsr(["1", INDECISION], ["1", "2"], ["F", "F"], "F", "2"))


class TestOracleGuarantees(unittest.TestCase):
    spec = one_dim(mu2=1.0)
    grid = default_grid()

    def _decide(self, n, seed, alpha):
        x, groups, labels = self.spec.draw(n, np.random.default_rng(seed))
        curves = {}
        r1 = oracle_rvalues(self.spec, x, groups, "1", grid=self.grid, curves=curves)
        r2 = oracle_rvalues(self.spec, x, groups, "2", grid=self.grid, curves=curves)
        return oracle_rule(r1, r2, alpha, alpha).decisions, labels, groups

    def test_conditional_error_below_level(self):
        spec = scenario_one(0.35)
        x, groups, labels = spec.draw(400_000, np.random.default_rng(8))
        curves = {}
        for alpha in (0.05, 0.1, 0.25):
            for c in spec.classes:
                r = oracle_rvalues(spec, x, groups, c, grid=self.grid, curves=curves)
                decisions = np.where(r <= alpha, c, INDECISION).astype(object)
                for a in spec.groups:
                    err = mfsr(decisions, labels, groups, a, c)
                    n_sel = int(np.count_nonzero((decisions == c) & (groups == a)))
                    self.assertIsNotNone(err)
                    se = math.sqrt(alpha * (1 - alpha) / n_sel)
                    self.assertLessEqual(err, alpha + 3 * se, (alpha, a, c))

    def test_fsr_approaches_mfsr_with_test_size(self):
        def gap(m, reps, seed):
            decisions, labels, groups = self._decide(m * reps, seed, 0.05)
            fsps = [
                fsp(decisions[k * m:(k + 1) * m], labels[k * m:(k + 1) * m], "2")
                for k in range(reps)
            ]
            pooled = mfsr(decisions, labels, groups, "a", "2")
            return abs(float(np.mean(fsps)) - pooled)

        small = gap(100, 10_000, 21)
        large = gap(10_000, 50, 22)
        # about a third of the size-100 test sets select nothing
        self.assertGreater(small, 0.01)
        self.assertLess(large, 0.008)
        self.assertGreater(small, large)


if __name__ == "__main__":
    unittest.main()
