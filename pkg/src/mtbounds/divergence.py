"""Total variation, Kullback-Leibler and power divergences.

All logarithms are natural. ``+inf`` is an ordinary return value: it means the
first argument charges an atom the second one does not.

The power divergence is ``D_lam(P, Q) = sum_x p^(1+lam) q^(-lam) mu`` and is
evaluated in log space so large ``lam`` does not overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erf, sqrt

import numpy as np
from scipy.special import logsumexp

from .errors import KindError, ParameterError, SpaceMismatchError, UnsupportedReferenceError
from .family import FiniteDistribution, FiniteFamily, GaussianFamily, ReferenceSpec


def _check_same_space(P: FiniteDistribution, Q: FiniteDistribution):
    if P.space != Q.space:
        raise SpaceMismatchError("distributions live on different measure spaces")


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ParameterError(f"lambda must be a positive real, got {lam!r}")


def total_variation(P0: FiniteDistribution, P1: FiniteDistribution) -> float:
    """``1/2 * sum |p1 - p0| mu``, which equals ``sum (p1 - p0)_+ mu``."""
    _check_same_space(P0, P1)
    return min(0.5 * float(np.abs(P1.masses - P0.masses).sum()), 1.0)


def total_variation_positive_part(P0: FiniteDistribution, P1: FiniteDistribution) -> float:
    _check_same_space(P0, P1)
    return float(np.clip(P1.masses - P0.masses, 0.0, None).sum())


def kl(P: FiniteDistribution, Q: FiniteDistribution) -> float:
    _check_same_space(P, Q)
    pos = P.density > 0
    if np.any(Q.density[pos] == 0):
        return np.inf
    p, q, w = P.density[pos], Q.density[pos], P.space.weights[pos]
    return max(float(np.sum(p * (np.log(p) - np.log(q)) * w)), 0.0)


def log_power_divergence(P: FiniteDistribution, Q: FiniteDistribution, lam: float) -> float:
    _check_same_space(P, Q)
    _check_lambda(lam)
    pos = P.density > 0
    if np.any(Q.density[pos] == 0):
        return np.inf
    lp, lq = np.log(P.density[pos]), np.log(Q.density[pos])
    return float(logsumexp(lp + lam * (lp - lq) + np.log(P.space.weights[pos])))


def power_divergence(P: FiniteDistribution, Q: FiniteDistribution, lam: float) -> float:
    """``sum_x p(x)^(1+lam) q(x)^(-lam) mu(x)``; at least 1 whenever finite."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_power_divergence(P, Q, lam)))


def avg_kl(family: FiniteFamily, Q: FiniteDistribution) -> float:
    """Average ``K(P_j, Q)`` over the members; ``inf`` if any term is."""
    return float(np.mean([kl(P, Q) for P in family.members]))


def tensorize(value: float, kind: str, n: int) -> float:
    """Divergence between n-fold products from the single-copy value.

    KL is additive and the power divergence multiplicative over i.i.d.
    products. Total variation has no such rule and is rejected.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    kind = kind.lower()
    if kind == "kl":
        return n * value
    if kind == "power":
        return value**n
    raise KindError(f"cannot tensorize divergence kind {kind!r}")


# -- Gaussian closed forms ---------------------------------------------------


@dataclass(frozen=True)
class GaussianDivergences:
    kl: np.ndarray
    log_power: np.ndarray | None
    lam: float | None

    @property
    def power(self) -> np.ndarray | None:
        return None if self.log_power is None else np.exp(self.log_power)


def _reference_index(ref, n_members: int) -> int:
    if isinstance(ref, ReferenceSpec):
        if ref.kind != "indexed":
            raise UnsupportedReferenceError(
                f"no closed form for Gaussian reference {ref.label}; use Monte Carlo"
            )
        ref = ref.index
    if int(ref) != ref or not 0 <= ref < n_members:
        raise ParameterError(f"reference index {ref!r} outside 0..{n_members - 1}")
    return int(ref)


def gaussian_divergences(fam: GaussianFamily, ref, lam: float | None = None) -> GaussianDivergences:
    """Closed-form KL and power divergences of every member to member ``ref``.

    ``K = ||d||^2 / (2 sigma^2)`` and ``log D_lam = lam (1 + lam) ||d||^2 / (2 sigma^2)``
    where ``d`` is the mean difference. Mixture references have no closed form
    and raise :class:`UnsupportedReferenceError`.
    """
    k = _reference_index(ref, fam.n_members)
    half_sq = fam.sq_distances(k) / (2 * fam.sigma**2)
    log_power = None
    if lam is not None:
        _check_lambda(lam)
        log_power = lam * (1 + lam) * half_sq
    return GaussianDivergences(kl=half_sq, log_power=log_power, lam=lam)


def gaussian_total_variation(fam: GaussianFamily, i: int, j: int) -> float:
    """``2 Phi(||theta_i - theta_j|| / (2 sigma)) - 1``."""
    dist = float(np.linalg.norm(fam.means[i] - fam.means[j]))
    return erf(dist / (2 * sqrt(2) * fam.sigma))
