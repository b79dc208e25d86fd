"""Bayes and minimax success probabilities.

For a finite family the uniform-prior (Bayes) success probability is an exact
finite sum: ``(N + 1) * B = sum_x max_j p_j(x) mu(x)``, attained by the
maximum-likelihood rule. The minimax success probability ``R`` (over
randomized rules) is bracketed through its prior-simplex dual

    R = min_{pi in simplex} sum_x max_j pi_j p_j(x) mu(x),

which is convex and piecewise linear in ``pi``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import DominationError, ParameterError, SizeCapError
from .family import (
    FiniteDistribution,
    FiniteFamily,
    GaussianFamily,
    ReferenceSpec,
    domination_failures,
)

logger = logging.getLogger(__name__)

MC_CONFIDENCE = 0.99
MC_MIN_SAMPLES = 1000
MC_BATCH = 50_000
DEFAULT_ENUM_CAP = 10**5


# -- exact Bayes success -----------------------------------------------------


def exact_bayes_success(family: FiniteFamily) -> float:
    """Best uniform-prior probability of naming the true member."""
    return float(family.masses.max(axis=0).sum() / family.n_members)


def bayes_success_via_reference(family: FiniteFamily, Q: FiniteDistribution) -> float:
    """Same quantity computed as ``E_Q[max_j p_j / q] / (N + 1)``.

    Independent of the choice of ``Q`` as long as it dominates the family.
    """
    bad = domination_failures(family, Q)
    if bad:
        raise DominationError(f"reference does not dominate member(s) {bad}", offending=bad)
    pos = Q.density > 0
    q = Q.density[pos]
    ratios = family.densities[:, pos] / q
    return float(np.sum(ratios.max(axis=0) * q * family.space.weights[pos]) / family.n_members)


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Deterministic rule sending each atom to a member index."""

    assignment: np.ndarray

    def success_probabilities(self, family: FiniteFamily) -> np.ndarray:
        """``P_j[T = j]`` for every member ``j``."""
        cols = np.arange(family.space.size)
        hits = family.masses[self.assignment, cols]
        return np.bincount(self.assignment, weights=hits, minlength=family.n_members)

    def average_success(self, family: FiniteFamily) -> float:
        return float(self.success_probabilities(family).mean())

    def worst_success(self, family: FiniteFamily) -> float:
        return float(self.success_probabilities(family).min())

    def as_dict(self, family: FiniteFamily) -> dict:
        return dict(zip(family.space.atoms, self.assignment.tolist()))


def ml_rule(family: FiniteFamily) -> DecisionRule:
    """Maximum-likelihood rule; ties go to the lowest index."""
    return DecisionRule(np.argmax(family.densities, axis=0))


# -- Monte Carlo for Gaussian families --------------------------------------


class MCEstimate(NamedTuple):
    estimate: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    kurtosis: float


def _sample_reference(fam: GaussianFamily, w: np.ndarray, size: int, rng) -> np.ndarray:
    comp = rng.choice(fam.n_members, size=size, p=w)
    noise = rng.standard_normal((size, fam.dim))
    return fam.means[comp] + fam.sigma * noise


def mc_bayes_success(
    fam: GaussianFamily,
    ref: ReferenceSpec | None = None,
    samples: int = 100_000,
    seed: int = 42,
) -> MCEstimate:
    """Monte Carlo estimate of the Bayes success of a Gaussian family.

    Draws ``X ~ Q`` and averages ``max_j (p_j / q)(X) / (N + 1)``. ``Q`` is a
    member or a mixture of members. Batches get child seeds spawned from
    ``seed`` and are aggregated in a fixed order, so the result is
    reproducible bit for bit.
    """
    if ref is None:
        ref = ReferenceSpec.uniform()
    if ref.kind == "custom_density":
        raise ParameterError("Gaussian references must be a member or a mixture of members")
    if int(samples) != samples or samples < MC_MIN_SAMPLES:
        raise ParameterError(f"need at least {MC_MIN_SAMPLES} samples, got {samples!r}")
    samples = int(samples)
    w = ref.mixture_weights(fam.n_members)
    log_w = np.log(w, where=w > 0, out=np.full_like(w, -np.inf))
    n_batches = -(-samples // MC_BATCH)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    values = []
    for b, child in enumerate(children):
        size = min(MC_BATCH, samples - b * MC_BATCH)
        x = _sample_reference(fam, w, size, np.random.default_rng(child))
        logp = fam.logpdf(x)
        logq = logsumexp(logp + log_w[:, None], axis=0)
        values.append(np.exp(logp.max(axis=0) - logq) / fam.n_members)
    v = np.concatenate(values)
    mean = float(v.mean())
    half = float(stats.norm.ppf(0.5 + MC_CONFIDENCE / 2) * v.std(ddof=1) / np.sqrt(samples))
    kurt = float(stats.kurtosis(v, fisher=False)) if v.std() > 0 else 0.0
    return MCEstimate(mean, mean - half, mean + half, samples, int(seed), kurt)


# -- minimax success ---------------------------------------------------------


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class MinimaxBracket(NamedTuple):
    lower: float
    upper: float
    iterations: int
    prior: np.ndarray

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _prior_objective(masses: np.ndarray, pi: np.ndarray):
    weighted = pi[:, None] * masses
    assign = np.argmax(weighted, axis=0)
    return float(weighted.max(axis=0).sum()), assign


def _successes(masses: np.ndarray, assign: np.ndarray) -> np.ndarray:
    hits = masses[assign, np.arange(masses.shape[1])]
    return np.bincount(assign, weights=hits, minlength=masses.shape[0])


def _restricted_game(S: np.ndarray):
    """Solve ``max_alpha min_j (alpha @ S)_j`` over mixtures of the rows of S.

    Returns the game value and the minimizing prior read off the duals.
    """
    k, m = S.shape
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-S.T, np.ones((m, 1))])
    A_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    bounds = [(0, None)] * k + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None, None
    alpha = np.clip(res.x[:k], 0.0, None)
    alpha /= alpha.sum()
    value = float((alpha @ S).min())
    pi = np.clip(-res.ineqlin.marginals, 0.0, None)
    if pi.sum() <= 0:
        return value, None
    return value, pi / pi.sum()


def minimax_success_bracket(
    family: FiniteFamily,
    max_iters: int = 100_000,
    tol: float = 1e-6,
    step: float = 1.0,
    polish_every: int = 25,
) -> MinimaxBracket:
    """Two-sided bracket ``lower <= R <= upper`` on the minimax success.

    Projected subgradient descent on the prior simplex, step ``step/sqrt(t)``
    from the uniform prior. ``upper`` is the best objective over visited
    priors (iterates, their running average and restricted-game duals);
    ``lower`` is the best worst-member success over randomized mixtures of
    the weighted-ML rules met along the way. Stops once the width is at most
    ``tol``; non-convergence shows up as a wide bracket, never an error.
    """
    if max_iters < 1:
        raise ParameterError("max_iters must be at least 1")
    masses = family.masses
    m = family.n_members
    pi = np.full(m, 1.0 / m)
    pi_avg = pi.copy()
    upper, lower = np.inf, 0.0
    best_prior = pi.copy()
    rules: dict[bytes, np.ndarray] = {}
    n_seen = 0

    def visit(prior):
        nonlocal upper, lower, best_prior
        f, assign = _prior_objective(masses, prior)
        if f < upper:
            upper, best_prior = f, prior.copy()
        key = assign.astype(np.int32).tobytes()
        if key not in rules:
            rules[key] = _successes(masses, assign)
            lower = max(lower, float(rules[key].min()))
        return rules[key]

    t = 0
    for t in range(1, max_iters + 1):
        g = visit(pi)
        pi = project_simplex(pi - step / np.sqrt(t) * g)
        pi_avg += (pi - pi_avg) / (t + 1)
        if t % polish_every == 0 or t == 1:
            visit(pi_avg)
            if len(rules) > n_seen:
                n_seen = len(rules)
                value, dual_prior = _restricted_game(np.array(list(rules.values())))
                if value is not None:
                    lower = max(lower, value)
                if dual_prior is not None:
                    visit(dual_prior)
        if upper - lower <= tol:
            break
    lower = min(lower, upper)
    return MinimaxBracket(float(lower), float(upper), t, best_prior)


def enumerate_deterministic(family: FiniteFamily, cap: int = DEFAULT_ENUM_CAP) -> float:
    """Exact best worst-member success over all deterministic rules.

    Exhaustive over ``(N + 1)^n_atoms`` assignments, so only for tiny
    instances. A valid lower bound on the (randomized) minimax success.
    """
    m, A = family.n_members, family.space.size
    if m**A > cap:
        raise SizeCapError(f"{m}^{A} = {m**A} deterministic rules exceeds cap {cap}")
    masses = family.masses
    best = 0.0
    chunk = max(1, 20_000 // max(A, 1))
    it = itertools.product(range(m), repeat=A)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        succ = np.stack([((block == j) * masses[j]).sum(axis=1) for j in range(m)], axis=1)
        best = max(best, float(succ.min(axis=1).max()))
    return best


@dataclass
class RiskReport:
    """Bayes success (exact or Monte Carlo) plus an optional minimax bracket."""

    n_members: int
    bayes_success: float
    bayes_method: str = "exact_sum"
    mc: MCEstimate | None = None
    minimax_bracket: tuple[float, float] | None = None
    minimax_iterations: int = 0
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        lo = 1.0 / self.n_members
        if not (lo - 1e-9 <= self.bayes_success <= 1 + 1e-9) and self.mc is None:
            raise ValueError(f"Bayes success {self.bayes_success} outside [{lo}, 1]")
        if self.minimax_bracket is not None:
            a, b = self.minimax_bracket
            if not a <= b <= self.bayes_success + 1e-9:
                raise ValueError(f"inconsistent minimax bracket {self.minimax_bracket}")

    @property
    def bayes_lower(self) -> float:
        """Value every Bayes-success upper bound must clear."""
        return self.mc.ci_low if self.mc is not None else self.bayes_success


def risk_report(
    family,
    *,
    ref: ReferenceSpec | None = None,
    samples: int = 100_000,
    seed: int = 42,
    minimax_iters: int = 100_000,
    minimax_tol: float = 1e-6,
) -> RiskReport:
    if isinstance(family, GaussianFamily):
        mc = mc_bayes_success(family, ref, samples, seed)
        return RiskReport(family.n_members, mc.estimate, "monte_carlo", mc=mc)
    b = exact_bayes_success(family)
    br = minimax_success_bracket(family, max_iters=minimax_iters, tol=minimax_tol)
    return RiskReport(family.n_members, b, minimax_bracket=(br.lower, br.upper),
                      minimax_iterations=br.iterations)
