"""Upper bounds on the Bayes and minimax success probabilities.

Every bound here is an upper bound on a success probability, so one minus it
lower-bounds the corresponding risk. The generic route is the convex-phi
inequality: for phi convex, non-decreasing and non-negative on ``[0, inf)``
and any ``Q`` dominating the family,

    phi((N + 1) * B) <= sum_j E_Q[phi(p_j / q)],

which is inverted for ``(N + 1) * B``. The classical bounds (two-point, both
Fano variants, Birge/Massart and the power-divergence bound with and without
its constant) are exposed as closed-form evaluators as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import divergence as dv
from .errors import (
    ArityError,
    ParameterError,
    PhiPropertyError,
    TheoremViolationError,
)
from .family import (
    FiniteDistribution,
    FiniteFamily,
    GaussianFamily,
    ReferenceSpec,
    domination_failures,
    resolve_reference,
)
from .risk import RiskReport, risk_report

BAYES = "bayes_success"
MINIMAX = "minimax_success"

BIRGE_KAPPA = 0.7
MASSART_KAPPA = 0.84
VACUOUS_TOL = 1e-12
SOUNDNESS_TOL = 1e-9

_GRID = np.linspace(0.0, 10.0, 1000)
PHI_METHOD_NAMES = {"hinge": "phi_hinge", "truncated_entropy": "phi_entropy", "power": "phi_power"}


# -- phi functions -----------------------------------------------------------


def _hinge(u):
    return np.maximum(np.asarray(u, dtype=float) - 1.0, 0.0)


def _truncated_entropy(u):
    u = np.asarray(u, dtype=float)
    v = np.maximum(u, 1.0)
    return np.where(u >= 1.0, v * np.log(v) - v + 1.0, 0.0)


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """A convex, non-decreasing, non-negative function on the half line.

    Use the factories :meth:`hinge`, :meth:`truncated_entropy`,
    :meth:`power` or :meth:`custom`. Each instance is checked on a
    1000-point grid over ``[0, 10]`` when built.
    """

    kind: str
    lam: float | None = None
    func: Callable | None = None
    declared_monotone: bool = True
    declared_convex: bool = True

    def __post_init__(self):
        if self.kind == "power":
            if self.lam is None or not (np.isfinite(self.lam) and self.lam > 0):
                raise ParameterError(f"power phi needs lambda > 0, got {self.lam!r}")
        elif self.kind == "custom":
            if self.func is None:
                raise PhiPropertyError("custom phi needs a pointwise evaluator")
            if not (self.declared_monotone and self.declared_convex):
                raise PhiPropertyError(
                    "custom phi must be declared non-decreasing and convex by the caller"
                )
        elif self.kind not in ("hinge", "truncated_entropy"):
            raise ParameterError(f"unknown phi kind {self.kind!r}")
        self._grid_check()

    @classmethod
    def hinge(cls):
        return cls("hinge")

    @classmethod
    def truncated_entropy(cls):
        return cls("truncated_entropy")

    @classmethod
    def power(cls, lam: float):
        return cls("power", lam=float(lam))

    @classmethod
    def custom(cls, func, *, monotone: bool, convex: bool):
        return cls("custom", func=func, declared_monotone=monotone, declared_convex=convex)

    @property
    def label(self) -> str:
        return f"power({self.lam:g})" if self.kind == "power" else self.kind

    def __call__(self, u):
        if self.kind == "hinge":
            return _hinge(u)
        if self.kind == "truncated_entropy":
            return _truncated_entropy(u)
        if self.kind == "power":
            with np.errstate(over="ignore"):
                return np.asarray(u, dtype=float) ** (1.0 + self.lam)
        return np.asarray(self.func(np.asarray(u, dtype=float)), dtype=float)

    def _grid_check(self):
        with np.errstate(over="ignore", invalid="ignore"):
            vals = self(_GRID)
        ok = np.isfinite(vals)
        u, v = _GRID[ok], vals[ok]
        if u.size < 3:
            raise PhiPropertyError(f"phi {self.label} is not finite on the check grid")
        scale = max(1.0, float(np.abs(v).max()))
        tol = 1e-9 * scale
        if np.any(v < -tol):
            raise PhiPropertyError(f"phi {self.label} takes negative values")
        if np.any(np.diff(v) < -tol):
            raise PhiPropertyError(f"phi {self.label} is not non-decreasing")
        slopes = np.diff(v) / np.diff(u)
        if np.any(np.diff(slopes) < -tol / (u[1] - u[0])):
            raise PhiPropertyError(f"phi {self.label} is not convex (secant slopes decrease)")
        if self.kind != "custom" and float(self(1.0)) > 1.0:
            raise PhiPropertyError(f"phi {self.label} has phi(1) > 1")

    def inverse(self, S: float) -> float:
        """Largest ``u >= 1`` with ``phi(u) <= S`` (uncapped)."""
        if S < 0:
            raise ParameterError(f"phi budget must be non-negative, got {S!r}")
        if math.isinf(S):
            return math.inf
        if self.kind == "hinge":
            return 1.0 + S
        if self.kind == "power":
            return max(1.0, S ** (1.0 / (1.0 + self.lam)))
        return _generalized_inverse(self, S)


def _generalized_inverse(phi: PhiFunction, S: float, lo: float = 1.0, hi: float = 2.0) -> float:
    if float(phi(lo)) > S:
        return lo
    while float(phi(hi)) <= S:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return math.inf
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(phi(mid)) <= S:
            lo = mid
        else:
            hi = mid
    return lo


def invert_phi(phi: PhiFunction, S: float, N: int) -> float:
    """Generalized inverse of ``phi`` at budget ``S``, clipped to ``[1, N + 1]``."""
    if math.isinf(S):
        return float(N + 1)
    if phi.kind == "truncated_entropy":
        if float(phi(N + 1)) <= S:
            return float(N + 1)
        return _generalized_inverse(phi, S, 1.0, float(N + 1))
    return float(min(max(phi.inverse(S), 1.0), N + 1))


# -- results -----------------------------------------------------------------


@dataclass(frozen=True)
class BoundResult:
    """One upper bound on ``B`` (Bayes) or ``R`` (minimax) success."""

    method: str
    target: str
    raw_value: float
    n_members: int
    lambda_used: float | None = None
    reference: ReferenceSpec | None = None
    divergence_inputs: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def value(self) -> float:
        return min(max(self.raw_value, 1.0 / self.n_members), 1.0)

    @property
    def vacuous(self) -> bool:
        return self.raw_value >= 1.0 - VACUOUS_TOL

    @property
    def reference_label(self) -> str:
        return self.reference.label if self.reference is not None else ""

    @property
    def minimax_risk_lower_bound(self) -> float:
        return min(max(1.0 - self.value, 0.0), 1.0)


# -- phi route ---------------------------------------------------------------


def phi_moment(family: FiniteFamily, phi: PhiFunction, Q: FiniteDistribution) -> float:
    """``sum_j E_Q[phi(p_j / q)]``; ``inf`` when ``Q`` misses some member's mass."""
    if domination_failures(family, Q):
        return math.inf
    pos = Q.density > 0
    q = Q.density[pos]
    ratios = family.densities[:, pos] / q
    with np.errstate(over="ignore"):
        return float(np.sum(phi(ratios) * (q * family.space.weights[pos])))


def bound_from_phi_moment(phi: PhiFunction, S: float, n_members: int, **meta) -> BoundResult:
    raw = phi.inverse(S) / n_members
    meta.setdefault("method", PHI_METHOD_NAMES.get(phi.kind, f"phi_{phi.kind}"))
    return BoundResult(target=BAYES, raw_value=raw, n_members=n_members, **meta)


def phi_bound(family: FiniteFamily, phi: PhiFunction, ref: ReferenceSpec | None = None) -> BoundResult:
    """Bound ``B`` by inverting the convex-phi inequality with reference ``ref``."""
    ref = ref or ReferenceSpec.uniform()
    Q = resolve_reference(family, ref, require_domination=False)
    S = phi_moment(family, phi, Q)
    notes = ()
    bad = domination_failures(family, Q)
    if bad:
        notes = (f"reference {ref.label} does not dominate member(s) {bad}",)
    return bound_from_phi_moment(
        phi, S, family.n_members,
        lambda_used=phi.lam, reference=ref, divergence_inputs={"phi_moment": S}, notes=notes,
    )


# -- classical bounds --------------------------------------------------------


def two_point_bound(P0, P1: FiniteDistribution | None = None) -> BoundResult:
    """``(1 + TV(P0, P1)) / 2``; an equality for the Bayes success."""
    if P1 is None:
        family = P0
        if family.n_members != 2:
            raise ArityError(f"two_point needs exactly 2 members, got {family.n_members}")
        P0, P1 = family.members
    tv = dv.total_variation(P0, P1)
    return two_point_from_tv(tv)


def two_point_from_tv(tv: float, **meta) -> BoundResult:
    return BoundResult("two_point", BAYES, 0.5 * (1.0 + tv), 2,
                       divergence_inputs={"tv": tv}, **meta)


def fano_ih_bound(K_tilde: float, N: int, **meta) -> BoundResult:
    """``(K + log 2) / log N`` on the minimax success; needs ``N >= 2``."""
    if N < 2:
        raise ArityError(f"fano_ih needs N >= 2 (log N > 0), got N = {N}")
    raw = (K_tilde + math.log(2)) / math.log(N)
    meta.setdefault("reference", ReferenceSpec.uniform())
    return BoundResult("fano_ih", MINIMAX, raw, N + 1,
                       divergence_inputs={"K_tilde": K_tilde}, **meta)


def fano_new_bound(K_tilde: float, N: int, **meta) -> BoundResult:
    """``(K + N/(N+1)) / log(N+1)`` on the Bayes success; valid for ``N >= 1``."""
    if N < 1:
        raise ArityError(f"fano_new needs N >= 1, got N = {N}")
    raw = (K_tilde + N / (N + 1)) / math.log(N + 1)
    loose = (K_tilde + 1.0) / math.log(N + 1)
    meta.setdefault("reference", ReferenceSpec.uniform())
    return BoundResult("fano_new", BAYES, raw, N + 1,
                       divergence_inputs={"K_tilde": K_tilde, "loose_variant": loose}, **meta)


def birge_bound(K_bar: float, N: int, kappa: float = BIRGE_KAPPA, method: str = "birge",
                **meta) -> BoundResult:
    """``max(kappa, (1 + 1/N) K / log(N + 1))`` with ``K`` averaged against ``P_0``."""
    if N < 1:
        raise ArityError(f"{method} needs N >= 1, got N = {N}")
    if not 0 < kappa < 1:
        raise ParameterError(f"kappa must lie in (0, 1), got {kappa!r}")
    raw = max(kappa, (1.0 + 1.0 / N) * K_bar / math.log(N + 1))
    meta.setdefault("reference", ReferenceSpec.indexed(0))
    return BoundResult(method, MINIMAX, raw, N + 1,
                       divergence_inputs={"K_bar": K_bar, "kappa": kappa}, **meta)


def vj_constant(lam: float) -> float:
    """``(1 + lam) * lam^(-lam / (1 + lam))``; at least 1, equal to 2 at ``lam = 1``."""
    if not (np.isfinite(lam) and lam > 0):
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    return (1.0 + lam) * lam ** (-lam / (1.0 + lam))


def vj_bound(power_sum: float | None, lam: float, N: int, improved: bool = True, *,
             log_power_sum: float | None = None, **meta) -> BoundResult:
    """``C (N+1)^-1 (sum_j D_lam(P_j, Q))^(1/(1+lam))``.

    ``C = 1`` when ``improved`` and ``C(lam)`` from :func:`vj_constant`
    otherwise. Pass ``log_power_sum`` instead of ``power_sum`` to avoid
    overflow at large ``lam``.
    """
    C = 1.0 if improved else vj_constant(lam)
    if log_power_sum is None:
        if power_sum is None:
            raise ParameterError("need power_sum or log_power_sum")
        log_power_sum = math.log(power_sum) if power_sum > 0 else -math.inf
    if math.isinf(log_power_sum) and log_power_sum > 0:
        raw = math.inf
    else:
        raw = C * math.exp(log_power_sum / (1.0 + lam)) / (N + 1)
    inputs = dict(meta.pop("divergence_inputs", {}))
    inputs.update(power_sum=math.exp(log_power_sum) if log_power_sum < 700 else math.inf,
                  C=C)
    return BoundResult("vj_improved" if improved else "vj", BAYES, raw, N + 1,
                       lambda_used=lam, divergence_inputs=inputs, **meta)


# -- divergence plumbing shared with the CLI --------------------------------


def log_power_sum(family, ref: ReferenceSpec, lam: float, n: int = 1) -> tuple[float, tuple]:
    """``log sum_j D_lam(P_j, Q)`` with every divergence tensorized to ``n`` copies.

    Finite families: exact, ``Q`` resolved from ``ref`` (``inf`` without
    domination). Gaussian families: closed form for a member reference;
    a mixture reference gets the convexity upper bound
    ``D(P, sum_k w_k P_k) <= sum_k w_k D(P, P_k)``.
    """
    notes = []
    if isinstance(family, GaussianFamily):
        w = ref.mixture_weights(family.n_members)
        cols = [dv.gaussian_divergences(family, k, lam).log_power for k in np.flatnonzero(w)]
        logD = np.column_stack(cols) * n
        if ref.kind != "indexed":
            notes.append("mixture reference: power divergence bounded by convexity")
            logD = logsumexp(logD + np.log(w[w > 0]), axis=1)
        else:
            logD = logD[:, 0]
    else:
        Q = resolve_reference(family, ref, require_domination=False)
        bad = domination_failures(family, Q)
        if bad:
            return math.inf, (f"reference {ref.label} does not dominate member(s) {bad}",)
        logD = np.array([dv.log_power_divergence(P, Q, lam) for P in family.members]) * n
    return float(logsumexp(logD)), tuple(notes)


def kl_terms(family, ref: ReferenceSpec, n: int = 1) -> tuple[np.ndarray, tuple]:
    """Per-member ``K(P_j, Q)`` (tensorized), with Gaussian mixture upper bounds."""
    if isinstance(family, GaussianFamily):
        w = ref.mixture_weights(family.n_members)
        cols = np.column_stack([dv.gaussian_divergences(family, k).kl
                                for k in range(family.n_members)])
        vals = n * (cols @ w)
        notes = () if ref.kind == "indexed" else (
            "mixture reference: KL bounded by convexity",)
        return vals, notes
    Q = resolve_reference(family, ref, require_domination=False)
    return np.array([n * dv.kl(P, Q) for P in family.members]), ()


def tv_terms(family, ref: ReferenceSpec) -> tuple[np.ndarray, tuple]:
    """Per-member ``TV(P_j, Q) = E_Q[(p_j/q - 1)_+]`` for a dominating ``Q``."""
    if isinstance(family, GaussianFamily):
        w = ref.mixture_weights(family.n_members)
        m = family.n_members
        tv = np.array([[dv.gaussian_total_variation(family, j, k) for k in range(m)]
                       for j in range(m)])
        notes = () if ref.kind == "indexed" else (
            "mixture reference: total variation bounded by convexity",)
        return tv @ w, notes
    Q = resolve_reference(family, ref, require_domination=False)
    if domination_failures(family, Q):
        return np.full(family.n_members, math.inf), ()
    return np.array([dv.total_variation(P, Q) for P in family.members]), ()


# -- lambda optimisation -----------------------------------------------------


def optimize_lambda(
    family,
    ref: ReferenceSpec | None = None,
    lambda_range: tuple[float, float] = (1e-3, 1e3),
    grid_points: int = 61,
    refine_tol: float = 1e-6,
    n: int = 1,
) -> tuple[float, BoundResult]:
    """Minimize the improved power-divergence bound over ``lam``.

    A log-spaced grid scan locates the best cell; golden-section search then
    refines inside the neighbouring grid interval.
    """
    ref = ref or ReferenceSpec.uniform()
    lo, hi = lambda_range
    if not (0 < lo < hi and np.isfinite(hi)) or grid_points < 2:
        raise ParameterError(f"invalid lambda range {lambda_range!r} / {grid_points} points")
    m = family.n_members

    def objective(lam):
        ls, _ = log_power_sum(family, ref, lam, n)
        return ls / (1.0 + lam) - math.log(m)

    grid = np.logspace(math.log10(lo), math.log10(hi), grid_points)
    vals = np.array([objective(l) for l in grid])
    i = int(np.argmin(vals))
    best_lam, best_val = float(grid[i]), float(vals[i])
    if np.isfinite(best_val) and 0 < i < grid_points - 1:
        try:
            res = minimize_scalar(objective, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                  method="golden", tol=refine_tol)
            if lo <= res.x <= hi and res.fun < best_val:
                best_lam, best_val = float(res.x), float(res.fun)
        except ValueError:
            pass  # flat objective: the grid point already is optimal
    ls, notes = log_power_sum(family, ref, best_lam, n)
    result = vj_bound(None, best_lam, m - 1, improved=True, log_power_sum=ls,
                      reference=ref, notes=notes + ("lambda optimized",))
    return best_lam, result


# -- full comparison ---------------------------------------------------------

METHODS = (
    "two_point", "fano_ih", "fano_new", "birge", "birge_massart",
    "vj", "vj_improved", "phi_hinge", "phi_entropy", "phi_power",
)


@dataclass(frozen=True)
class BoundConfig:
    methods: tuple | None = None  # None: every bound applicable to the family
    reference: ReferenceSpec = field(default_factory=ReferenceSpec.uniform)
    lam: float | None = 1.0
    optimize: bool = False
    lambda_range: tuple = (1e-3, 1e3)
    grid_points: int = 61
    refine_tol: float = 1e-6
    mc_samples: int = 100_000
    mc_seed: int = 42
    minimax_iters: int = 100_000
    minimax_tol: float = 1e-6
    check_soundness: bool = True


def _offenders(notes, family, ref_index=0):
    if isinstance(family, FiniteFamily):
        bad = domination_failures(family, family.members[ref_index])
        if bad:
            return notes + (f"P{ref_index} does not dominate member(s) {bad}",)
    return notes


def evaluate_bound(method: str, family, config: BoundConfig, n: int = 1) -> BoundResult:
    """Evaluate one named bound; ``n`` tensorizes divergences to n i.i.d. copies."""
    N = family.n_members - 1
    ref = config.reference
    if method == "two_point":
        if N != 1:
            raise ArityError(f"two_point needs exactly 2 members, got {N + 1}")
        if isinstance(family, GaussianFamily):
            return two_point_from_tv(dv.gaussian_total_variation(
                family if n == 1 else _gauss_power(family, n), 0, 1))
        if n != 1:
            raise ParameterError("total variation does not tensorize")
        return two_point_bound(family)
    if method in ("fano_ih", "fano_new"):
        terms, notes = kl_terms(family, ReferenceSpec.uniform(), n)
        if n > 1 and isinstance(family, FiniteFamily):
            notes += ("product of mixtures used as reference; upper bounds the average KL",)
        fn = fano_ih_bound if method == "fano_ih" else fano_new_bound
        return fn(float(np.mean(terms)), N, notes=notes)
    if method in ("birge", "birge_massart"):
        terms, notes = kl_terms(family, ReferenceSpec.indexed(0), n)
        kappa = BIRGE_KAPPA if method == "birge" else MASSART_KAPPA
        return birge_bound(float(np.mean(terms)), N, kappa, method,
                           notes=_offenders(notes, family))
    if method in ("vj", "vj_improved", "phi_power"):
        if config.optimize:
            lam, opt = optimize_lambda(family, ref, config.lambda_range, config.grid_points,
                                       config.refine_tol, n)
            notes = opt.notes
        else:
            lam = config.lam
            notes = ("lambda fixed",)
        ls, more = log_power_sum(family, ref, lam, n)
        notes = tuple(dict.fromkeys(notes + more))
        if method == "phi_power":
            S = math.exp(ls) if ls < 700 else math.inf
            return bound_from_phi_moment(PhiFunction.power(lam), S, N + 1, lambda_used=lam,
                                         reference=ref, divergence_inputs={"phi_moment": S},
                                         notes=notes)
        return vj_bound(None, lam, N, improved=(method == "vj_improved"),
                        log_power_sum=ls, reference=ref, notes=notes)
    if method == "phi_hinge":
        if n != 1:
            raise ParameterError("phi_hinge needs total variation, which does not tensorize")
        terms, notes = tv_terms(family, ref)
        S = float(terms.sum())
        return bound_from_phi_moment(PhiFunction.hinge(), S, N + 1, reference=ref,
                                     divergence_inputs={"phi_moment": S}, notes=notes)
    if method == "phi_entropy":
        exact = isinstance(family, FiniteFamily) and n == 1
        if exact:
            return phi_bound(family, PhiFunction.truncated_entropy(), ref)
        terms, notes = kl_terms(family, ref, n)
        S = float(terms.sum())
        return bound_from_phi_moment(
            PhiFunction.truncated_entropy(), S, N + 1, reference=ref,
            divergence_inputs={"phi_moment": S},
            notes=notes + ("truncated entropy moment bounded by KL",))
    raise ParameterError(f"unknown bound method {method!r}; valid: {', '.join(METHODS)}")


def _gauss_power(family: GaussianFamily, n: int) -> GaussianFamily:
    return GaussianFamily(np.tile(family.means, (1, n)), family.sigma)


def applicable_methods(family) -> tuple:
    N = family.n_members - 1
    skip = {"two_point"} if N != 1 else {"fano_ih"}
    return tuple(m for m in METHODS if m not in skip)


def check_soundness(results, report: RiskReport) -> None:
    """Raise :class:`TheoremViolationError` if any bound undercuts its target."""
    bad = []
    for r in results:
        if r.target == BAYES and r.value < report.bayes_lower - SOUNDNESS_TOL:
            bad.append(f"{r.method}={r.value!r} < Bayes success {report.bayes_lower!r}")
        if (r.target == MINIMAX and report.minimax_bracket is not None
                and r.value < report.minimax_bracket[0] - SOUNDNESS_TOL):
            bad.append(f"{r.method}={r.value!r} < minimax lower {report.minimax_bracket[0]!r}")
    if bad:
        raise TheoremViolationError("; ".join(bad))


def compare_all(family, config: BoundConfig | None = None) -> tuple[list[BoundResult], RiskReport]:
    """Evaluate the configured bounds together with the Bayes/minimax report.

    Rows follow the fixed registry order of :data:`METHODS`. Unless
    ``config.check_soundness`` is off, a bound below the exact (or Monte
    Carlo lower-confidence) Bayes success, or below the minimax lower
    bracket, raises :class:`TheoremViolationError`.
    """
    config = config or BoundConfig()
    methods = config.methods if config.methods is not None else applicable_methods(family)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ParameterError(f"unknown bound method(s) {unknown}; valid: {', '.join(METHODS)}")
    results = [evaluate_bound(m, family, config) for m in METHODS if m in methods]
    report = risk_report(family, ref=config.reference, samples=config.mc_samples,
                         seed=config.mc_seed, minimax_iters=config.minimax_iters,
                         minimax_tol=config.minimax_tol)
    if config.check_soundness:
        check_soundness(results, report)
    return results, report
