import math

import numpy as np
import pytest

from mtbounds.bounds import (
    BAYES,
    MINIMAX,
    METHODS,
    BoundConfig,
    BoundResult,
    PhiFunction,
    applicable_methods,
    birge_bound,
    check_soundness,
    compare_all,
    evaluate_bound,
    fano_ih_bound,
    fano_new_bound,
    invert_phi,
    optimize_lambda,
    phi_bound,
    phi_moment,
    two_point_bound,
    vj_bound,
    vj_constant,
)
from mtbounds.errors import (
    ArityError,
    ParameterError,
    PhiPropertyError,
    TheoremViolationError,
)
from mtbounds.family import ReferenceSpec, make_finite_family, make_gaussian_family, mixture
from mtbounds.risk import RiskReport, exact_bayes_success


def binary_kl(a, b):
    return sum(x * math.log(x / y) for x, y in ((a, b), (1 - a, 1 - b)) if x > 0)


# hand-computed quantities for the Bernoulli(0.3) / (0.5) / (0.7) triple
TRIPLE_K_TILDE = (binary_kl(0.3, 0.5) + binary_kl(0.7, 0.5)) / 3
TRIPLE_K_BAR = (binary_kl(0.5, 0.3) + binary_kl(0.7, 0.3)) / 3
TRIPLE_POWER_SUM = 2 * (0.7**2 + 0.3**2) * 2 + 1.0  # sum_j sum_x p_j^2 / 0.5


class TestPhiFunction:
    def test_values(self):
        u = np.array([0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(PhiFunction.hinge()(u), [0, 0, 0, 1])
        np.testing.assert_allclose(PhiFunction.truncated_entropy()(u),
                                   [0, 0, 0, 2 * math.log(2) - 1])
        np.testing.assert_allclose(PhiFunction.power(1.0)(u), u**2)

    def test_custom_accepted(self):
        phi = PhiFunction.custom(lambda u: np.maximum(u - 1, 0) ** 2, monotone=True, convex=True)
        assert invert_phi(phi, 0.25, 3) == pytest.approx(1.5, abs=1e-10)

    def test_custom_concave_rejected(self):
        with pytest.raises(PhiPropertyError):
            PhiFunction.custom(np.sqrt, monotone=True, convex=True)

    def test_custom_decreasing_rejected(self):
        with pytest.raises(PhiPropertyError):
            PhiFunction.custom(lambda u: (u - 1) ** 2, monotone=True, convex=True)

    def test_custom_undeclared_rejected(self):
        with pytest.raises(PhiPropertyError):
            PhiFunction.custom(lambda u: u, monotone=True, convex=False)

    def test_negative_rejected(self):
        with pytest.raises(PhiPropertyError):
            PhiFunction.custom(lambda u: u - 1, monotone=True, convex=True)

    @pytest.mark.parametrize("lam", [0.0, -0.5, np.nan])
    def test_power_lambda(self, lam):
        with pytest.raises(ParameterError):
            PhiFunction.power(lam)


class TestInvertPhi:
    def test_hinge(self):
        assert invert_phi(PhiFunction.hinge(), 0.4, 2) == pytest.approx(1.4)

    def test_clipped_to_n_plus_one(self):
        assert invert_phi(PhiFunction.hinge(), 10.0, 2) == 3.0
        assert invert_phi(PhiFunction.truncated_entropy(), 10.0, 2) == 3.0

    def test_infinite_budget(self):
        assert invert_phi(PhiFunction.power(2.0), math.inf, 4) == 5.0

    def test_zero_budget(self):
        # phi vanishes on [0, 1] for the hinge, so the largest u is 1
        assert invert_phi(PhiFunction.hinge(), 0.0, 2) == 1.0

    def test_entropy_inverse_is_largest(self):
        phi = PhiFunction.truncated_entropy()
        for S in (1e-4, 0.07, 0.5):
            u = invert_phi(phi, S, 10)
            assert float(phi(u)) == pytest.approx(S, abs=1e-10)
            assert float(phi(u + 1e-9)) > S

    def test_power_floor_at_one(self):
        # S < 1 would give u < 1; phi(1) = 1 already exceeds it
        assert invert_phi(PhiFunction.power(1.0), 0.25, 3) == 1.0

    def test_negative_budget(self):
        with pytest.raises(ParameterError):
            invert_phi(PhiFunction.hinge(), -1.0, 2)


class TestBoundResult:
    def test_clamping_and_flags(self):
        r = BoundResult("x", BAYES, 1.3, 4)
        assert r.value == 1.0 and r.vacuous and r.minimax_risk_lower_bound == 0.0
        r = BoundResult("x", BAYES, 0.1, 4)
        assert r.value == 0.25 and not r.vacuous and r.minimax_risk_lower_bound == 0.75

    def test_vacuous_tolerance(self):
        assert BoundResult("x", BAYES, 1 - 1e-13, 2).vacuous
        assert not BoundResult("x", BAYES, 1 - 1e-6, 2).vacuous


class TestTwoPoint:
    def test_pair(self, pair):
        assert two_point_bound(pair).value == pytest.approx(0.6)
        assert two_point_bound(pair[0], pair[1]).value == pytest.approx(0.6)

    def test_disjoint(self, point_masses):
        r = two_point_bound(point_masses)
        assert r.value == 1.0 and r.vacuous

    def test_arity(self, triple):
        with pytest.raises(ArityError):
            two_point_bound(triple)


class TestFano:
    def test_triple_new(self, triple):
        r = evaluate_bound("fano_new", triple, BoundConfig())
        expected = (TRIPLE_K_TILDE + 2 / 3) / math.log(3)
        assert r.raw_value == pytest.approx(expected, abs=1e-12)
        assert r.divergence_inputs["K_tilde"] == pytest.approx(TRIPLE_K_TILDE, abs=1e-14)
        assert r.divergence_inputs["loose_variant"] > r.raw_value
        assert r.target == BAYES

    def test_triple_ih_vacuous(self, triple):
        r = evaluate_bound("fano_ih", triple, BoundConfig())
        assert r.raw_value == pytest.approx(1 + TRIPLE_K_TILDE / math.log(2), abs=1e-12)
        assert r.vacuous and r.target == MINIMAX

    def test_ih_needs_three_members(self):
        with pytest.raises(ArityError):
            fano_ih_bound(0.1, 1)

    def test_new_at_n_one(self):
        assert fano_new_bound(0.0, 1).raw_value == pytest.approx(0.5 / math.log(2))


class TestBirge:
    def test_kappa_floor(self, triple):
        r = evaluate_bound("birge", triple, BoundConfig())
        assert r.divergence_inputs["K_bar"] == pytest.approx(TRIPLE_K_BAR, abs=1e-14)
        assert 1.5 * TRIPLE_K_BAR / math.log(3) < 0.7
        assert r.raw_value == 0.7

    def test_massart(self, triple):
        assert evaluate_bound("birge_massart", triple, BoundConfig()).raw_value == 0.84

    def test_divergence_term(self):
        assert birge_bound(3.0, 2).raw_value == pytest.approx(4.5 / math.log(3))

    def test_bad_kappa(self):
        with pytest.raises(ParameterError):
            birge_bound(0.1, 2, kappa=1.2)


class TestVJ:
    def test_constant(self):
        assert vj_constant(1.0) == pytest.approx(2.0, abs=1e-15)
        for lam in (0.1, 1.0, 10.0):
            expected = (1 + lam) / lam ** (lam / (1 + lam))
            assert vj_constant(lam) / expected == pytest.approx(1.0, abs=1e-12)
        assert min(vj_constant(l) for l in np.logspace(-3, 3, 200)) >= 1.0

    def test_triple(self, triple):
        r = evaluate_bound("vj_improved", triple, BoundConfig())
        assert r.raw_value == pytest.approx(math.sqrt(TRIPLE_POWER_SUM) / 3, abs=1e-12)
        loose = evaluate_bound("vj", triple, BoundConfig())
        assert loose.raw_value == pytest.approx(2 * r.raw_value, abs=1e-12)

    def test_log_input_large_lambda(self):
        r = vj_bound(None, 100.0, 2, log_power_sum=3000.0)
        assert r.raw_value == pytest.approx(math.exp(3000 / 101) / 3)

    def test_needs_input(self):
        with pytest.raises(ParameterError):
            vj_bound(None, 1.0, 2)


class TestPhiBound:
    def test_hinge_triple_is_tight(self, triple):
        r = phi_bound(triple, PhiFunction.hinge())
        assert r.raw_value == pytest.approx(7 / 15, abs=1e-14)
        assert r.method == "phi_hinge"

    def test_entropy_triple(self, triple):
        phi = PhiFunction.truncated_entropy()
        r = phi_bound(triple, phi)
        S = 1.4 * math.log(1.4) - 0.4  # only the ratios 1.4 contribute, each with Q-mass 1/2
        assert r.divergence_inputs["phi_moment"] == pytest.approx(S, abs=1e-14)
        assert float(phi(3 * r.raw_value)) == pytest.approx(S, abs=1e-10)
        assert r.method == "phi_entropy"

    def test_power_matches_vj_improved(self, triple):
        a = phi_bound(triple, PhiFunction.power(1.0)).raw_value
        b = evaluate_bound("vj_improved", triple, BoundConfig()).raw_value
        assert a == pytest.approx(b, abs=1e-12)

    def test_master_inequality(self, rng):
        phis = [PhiFunction.hinge(), PhiFunction.truncated_entropy(), PhiFunction.power(0.5)]
        for _ in range(30):
            fam = make_finite_family(None, None, rng.dirichlet(np.ones(5), size=4))
            Q = mixture(fam, rng.dirichlet(np.ones(4)))
            B = exact_bayes_success(fam)
            for phi in phis:
                assert float(phi(4 * B)) <= phi_moment(fam, phi, Q) + 1e-12

    def test_non_dominating_reference(self, point_masses):
        r = phi_bound(point_masses, PhiFunction.hinge(), ReferenceSpec.indexed(0))
        assert r.raw_value == math.inf and r.value == 1.0 and r.vacuous and r.notes


class TestOptimizeLambda:
    def test_not_worse_than_one(self, triple):
        lam, r = optimize_lambda(triple)
        fixed = evaluate_bound("vj_improved", triple, BoundConfig()).raw_value
        assert r.raw_value <= fixed + 1e-12
        assert 1e-3 <= lam <= 1e3

    def test_gaussian_dense_grid(self):
        g = make_gaussian_family([[0.0], [1.0]], 1.0)
        lam, r = optimize_lambda(g, ReferenceSpec.indexed(0))
        grid = np.logspace(-3, 3, 10_000)
        dense = np.exp(np.logaddexp(0.0, grid * (1 + grid) / 2) / (1 + grid)) / 2
        assert r.raw_value <= dense.min() * (1 + 1e-5)
        assert r.raw_value == pytest.approx(dense.min(), rel=1e-5)

    def test_bad_range(self, triple):
        with pytest.raises(ParameterError):
            optimize_lambda(triple, lambda_range=(2.0, 1.0))


class TestCompareAll:
    def test_pair_default_methods(self, pair):
        results, report = compare_all(pair)
        assert [r.method for r in results] == list(applicable_methods(pair))
        assert "fano_ih" not in applicable_methods(pair)
        assert report.bayes_success == pytest.approx(0.6)

    def test_order_follows_registry(self, triple):
        cfg = BoundConfig(methods=("phi_hinge", "fano_new", "birge"))
        results, _ = compare_all(triple, cfg)
        assert [r.method for r in results] == ["fano_new", "birge", "phi_hinge"]

    def test_all_sound(self, rng):
        for _ in range(5):
            fam = make_finite_family(None, None, rng.dirichlet(np.ones(4), size=3))
            results, report = compare_all(fam)
            for r in results:
                floor = report.bayes_success if r.target == BAYES else report.minimax_bracket[0]
                assert r.value >= floor - 1e-9

    def test_unknown_method(self, pair):
        with pytest.raises(ParameterError):
            compare_all(pair, BoundConfig(methods=("nope",)))

    def test_inapplicable_requested(self, pair):
        with pytest.raises(ArityError):
            compare_all(pair, BoundConfig(methods=("fano_ih",)))

    def test_gaussian(self):
        g = make_gaussian_family([[0.0], [1.0], [2.0]], 1.0)
        results, report = compare_all(g, BoundConfig(mc_samples=20_000))
        assert report.mc is not None
        assert all(r.value >= report.bayes_lower - 1e-9 for r in results if r.target == BAYES)

    def test_registry(self):
        assert METHODS[0] == "two_point" and len(METHODS) == 10


class TestCheckSoundness:
    def test_violation_raises(self):
        rep = RiskReport(3, 0.5, minimax_bracket=(0.4, 0.41))
        with pytest.raises(TheoremViolationError):
            check_soundness([BoundResult("fake", BAYES, 0.45, 3)], rep)
        with pytest.raises(TheoremViolationError):
            check_soundness([BoundResult("fake", MINIMAX, 0.35, 3)], rep)

    def test_pass(self):
        rep = RiskReport(3, 0.5, minimax_bracket=(0.4, 0.41))
        check_soundness([BoundResult("ok", BAYES, 0.5, 3), BoundResult("ok", MINIMAX, 0.4, 3)], rep)
