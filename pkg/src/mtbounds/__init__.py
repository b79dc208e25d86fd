"""Exact Bayes success probabilities and minimax lower bounds for identifying
one distribution among finitely many candidates."""

from .bounds import (
    BoundConfig,
    BoundResult,
    PhiFunction,
    birge_bound,
    compare_all,
    fano_ih_bound,
    fano_new_bound,
    invert_phi,
    optimize_lambda,
    phi_bound,
    two_point_bound,
    vj_bound,
    vj_constant,
)
from .divergence import (
    avg_kl,
    gaussian_divergences,
    kl,
    power_divergence,
    tensorize,
    total_variation,
)
from .estimators import MaximumLikelihoodTester, MultipleTestingBounds
from .family import (
    FiniteDistribution,
    FiniteFamily,
    GaussianFamily,
    MeasureSpace,
    ReferenceSpec,
    make_finite_family,
    make_gaussian_family,
    mixture,
    product_extend,
    resolve_reference,
)
from .risk import (
    DecisionRule,
    RiskReport,
    bayes_success_via_reference,
    enumerate_deterministic,
    exact_bayes_success,
    mc_bayes_success,
    minimax_success_bracket,
    ml_rule,
)

__version__ = "0.1.0"
