"""scikit-learn compatible front end.

The density matrix of a finite family plays the role of ``X`` in ``fit``
(one row per candidate distribution, one column per atom). Estimators carry
their configuration as constructor parameters, so ``get_params``,
``set_params`` and ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_non_negative

from .bounds import BoundConfig, compare_all
from .family import FiniteFamily, GaussianFamily, ReferenceSpec, make_finite_family
from .risk import exact_bayes_success, ml_rule


def check_density_matrix(X) -> np.ndarray:
    """Validate a ``(N + 1, n_atoms)`` density matrix with ``N + 1 >= 2``."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=2, ensure_all_finite=True)
    check_non_negative(X, "density matrix")
    return X


def as_family(X, atom_weights=None):
    if isinstance(X, (FiniteFamily, GaussianFamily)):
        return X
    return make_finite_family(None, atom_weights, check_density_matrix(X))


def as_reference(reference) -> ReferenceSpec:
    """Accept a :class:`ReferenceSpec`, a kind name or a member index."""
    if isinstance(reference, ReferenceSpec):
        return reference
    if isinstance(reference, (int, np.integer)):
        return ReferenceSpec.indexed(int(reference))
    return ReferenceSpec(str(reference))


def _atom_indices(X) -> np.ndarray:
    idx = np.asarray(X)
    if idx.ndim == 2 and idx.shape[1] == 1:
        idx = idx[:, 0]
    if idx.ndim != 1:
        raise ValueError(f"expected a column of atom indices, got shape {idx.shape}")
    return idx.astype(np.intp)


class MaximumLikelihoodTester(ClassifierMixin, BaseEstimator):
    """Maximum-likelihood identification of the member that generated an atom.

    ``fit`` takes the density matrix; ``predict`` maps atom indices to the
    member of largest density (ties to the lowest index). The rule attains
    the Bayes success stored in ``bayes_success_``.
    """

    def __init__(self, atom_weights=None):
        self.atom_weights = atom_weights

    def fit(self, X, y=None):
        self.family_ = as_family(X, self.atom_weights)
        self.rule_ = ml_rule(self.family_)
        self.classes_ = np.arange(self.family_.n_members)
        self.bayes_success_ = exact_bayes_success(self.family_)
        return self

    def predict(self, X):
        check_is_fitted(self, "rule_")
        return self.rule_.assignment[_atom_indices(X)]

    def predict_proba(self, X):
        """Posterior over members under the uniform prior."""
        check_is_fitted(self, "rule_")
        cols = self.family_.densities[:, _atom_indices(X)].T
        tot = cols.sum(axis=1, keepdims=True)
        return np.where(tot > 0, cols / np.where(tot > 0, tot, 1), 1.0 / cols.shape[1])

    def success_probabilities(self):
        check_is_fitted(self, "rule_")
        return self.rule_.success_probabilities(self.family_)


class MultipleTestingBounds(BaseEstimator):
    """Evaluate every applicable upper bound on the success probabilities.

    Fitted attributes: ``bounds_`` (method name to ``BoundResult``),
    ``bayes_success_``, ``minimax_bracket_`` (finite families) and
    ``report_``.
    """

    def __init__(self, reference="uniform_mixture", methods=None, lam=1.0,
                 optimize_lambda=False, atom_weights=None, mc_samples=100_000,
                 random_state=42, minimax_iters=100_000, check_soundness=True):
        self.reference = reference
        self.methods = methods
        self.lam = lam
        self.optimize_lambda = optimize_lambda
        self.atom_weights = atom_weights
        self.mc_samples = mc_samples
        self.random_state = random_state
        self.minimax_iters = minimax_iters
        self.check_soundness = check_soundness

    def fit(self, X, y=None):
        family = as_family(X, self.atom_weights)
        config = BoundConfig(
            methods=None if self.methods is None else tuple(self.methods),
            reference=as_reference(self.reference),
            lam=self.lam,
            optimize=self.optimize_lambda,
            mc_samples=self.mc_samples,
            mc_seed=self.random_state,
            minimax_iters=self.minimax_iters,
            check_soundness=self.check_soundness,
        )
        results, report = compare_all(family, config)
        self.family_ = family
        self.bounds_ = {r.method: r for r in results}
        self.report_ = report
        self.bayes_success_ = report.bayes_success
        self.minimax_bracket_ = report.minimax_bracket
        return self

    def transform(self, X=None):
        """Bound values as a 1 x n_methods row, in ``bounds_`` order."""
        check_is_fitted(self, "bounds_")
        return np.array([[r.value for r in self.bounds_.values()]])

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "bounds_")
        return np.array(list(self.bounds_), dtype=object)

    def minimax_risk_lower_bound(self) -> float:
        """Tightest ``1 - bound`` over all bounds valid for the minimax success."""
        check_is_fitted(self, "bounds_")
        return max(r.minimax_risk_lower_bound for r in self.bounds_.values())
