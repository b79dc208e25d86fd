"""Randomized self-check of every inequality and identity the library relies on.

Each invariant is a function ``check(family, rng, ctx) -> str | None`` that
returns ``None`` on success and a short failure message otherwise. The suite
runs them over seeded random families and keeps the smallest failing family
per invariant so it can be written out as a reproducer scenario.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bd
from . import divergence as dv
from .family import (
    FiniteFamily,
    ReferenceSpec,
    make_finite_family,
    product_extend,
    resolve_reference,
)
from .risk import (
    bayes_success_via_reference,
    exact_bayes_success,
    minimax_success_bracket,
    ml_rule,
)

TENSOR_ATOM_CAP = 8000


def random_family(
    rng: np.random.Generator,
    max_members: int = 9,
    max_atoms: int = 20,
    *,
    n_members: int | None = None,
    sparse_prob: float = 0.3,
    weighted: bool = True,
) -> FiniteFamily:
    """Random family with Dirichlet rows, optional zeros and a random measure."""
    m = n_members or int(rng.integers(2, max_members + 1))
    A = int(rng.integers(2, max_atoms + 1))
    while True:
        probs = rng.dirichlet(np.full(A, 0.7), size=m)
        if rng.random() < sparse_prob:
            for j in range(m):
                drop = rng.random(A) < 0.3
                if drop.all():
                    drop[rng.integers(A)] = False
                probs[j, drop] = 0.0
                probs[j] /= probs[j].sum()
        mu = rng.uniform(0.5, 2.0, size=A) if weighted else np.ones(A)
        dens = probs / mu
        # renormalize against mu so rounding never trips the 1e-10 check
        dens /= (dens @ mu)[:, None]
        try:
            return make_finite_family(None, mu, dens)
        except ValueError:
            continue


def dominating_references(family: FiniteFamily, rng) -> list[ReferenceSpec]:
    """Mixture, random positive mixture, random full-support density, full-support members."""
    m, A = family.n_members, family.space.size
    w = rng.dirichlet(np.ones(m))
    w = np.maximum(w, 1e-3)
    w /= w.sum()
    dens = rng.dirichlet(np.ones(A)) / family.space.weights
    dens /= dens @ family.space.weights
    refs = [ReferenceSpec.uniform(), ReferenceSpec.custom_weights(w),
            ReferenceSpec.custom_density(dens)]
    refs += [ReferenceSpec.indexed(j) for j in range(m) if np.all(family.densities[j] > 0)]
    return refs


# -- invariants --------------------------------------------------------------


def check_normalization(family, rng, ctx):
    tot = family.densities @ family.space.weights
    if np.max(np.abs(tot - 1)) > 1e-10:
        return f"row sums {tot}"
    Q = resolve_reference(family, ReferenceSpec.uniform(), require_domination=False)
    if np.any((Q.density == 0) & (family.densities > 0).any(axis=0)):
        return "uniform mixture fails to dominate"


def check_divergence_basics(family, rng, ctx):
    P, Q = family.members[0], family.members[1]
    a, b = dv.total_variation(P, Q), dv.total_variation(Q, P)
    if abs(a - b) > 1e-12 or not 0 <= a <= 1:
        return f"TV asymmetric or out of range: {a}, {b}"
    if abs(a - dv.total_variation_positive_part(P, Q)) > 1e-12:
        return "TV formulas disagree"
    Qm = resolve_reference(family, ReferenceSpec.uniform())
    for j, Pj in enumerate(family.members):
        d = dv.power_divergence(Pj, Qm, 1.0)
        if d < 1 - 1e-12:
            return f"power divergence {d} < 1 for member {j}"


def check_reference_identity(family, rng, ctx):
    b = ctx["bayes"]
    if family.n_members * b < 1 - 1e-12:
        return f"(N+1)B = {family.n_members * b} < 1"
    for ref in ctx["refs"][:3]:
        Q = resolve_reference(family, ref)
        via = bayes_success_via_reference(family, Q)
        if abs(via - b) > 1e-10:
            return f"E_Q form {via} != exact {b} for Q={ref.label}"


def check_ml_rule(family, rng, ctx):
    s = ml_rule(family).average_success(family)
    if abs(s - ctx["bayes"]) > 1e-12:
        return f"ML rule success {s} != {ctx['bayes']}"


REGISTRY_PHIS = (bd.PhiFunction.hinge(), bd.PhiFunction.truncated_entropy(),
                 bd.PhiFunction.power(1.0))


def check_master_inequality(family, rng, ctx):
    u = family.n_members * ctx["bayes"]
    refs = [ReferenceSpec.uniform()] + [r for r in ctx["refs"] if r.kind == "indexed"]
    for phi in REGISTRY_PHIS:
        lhs = float(phi(u))
        for ref in refs:
            S = bd.phi_moment(family, phi, resolve_reference(family, ref))
            if lhs > S + 1e-10:
                return f"phi={phi.label}, Q={ref.label}: {lhs} > {S}"


def check_specialization(family, rng, ctx):
    lam = float(rng.choice([0.3, 1.0, 2.5]))
    ref = ReferenceSpec.uniform()
    a = bd.phi_bound(family, bd.PhiFunction.power(lam), ref).raw_value
    ls, _ = bd.log_power_sum(family, ref, lam)
    b = bd.vj_bound(None, lam, family.N, improved=True, log_power_sum=ls).raw_value
    if abs(a - b) > 1e-12 * abs(b):
        return f"phi power {a} != improved VJ {b} at lambda={lam}"
    if family.n_members == 2:
        h = bd.phi_bound(family, bd.PhiFunction.hinge(), ref).raw_value
        t = bd.two_point_bound(family).raw_value
        if abs(h - t) > 1e-12:
            return f"phi hinge {h} != two-point {t}"


def check_entropy_dominance(family, rng, ctx):
    ent = bd.phi_bound(family, bd.PhiFunction.truncated_entropy(), ReferenceSpec.uniform())
    fano = bd.fano_new_bound(dv.avg_kl(family, ctx["mixture"]), family.N)
    if ent.raw_value > fano.raw_value + 1e-10:
        return f"exact entropy bound {ent.raw_value} > fano_new {fano.raw_value}"


def check_bayes_soundness(family, rng, ctx):
    cfg = bd.BoundConfig(reference=ReferenceSpec.uniform(), lam=float(rng.uniform(0.2, 3)))
    for method in bd.applicable_methods(family):
        r = bd.evaluate_bound(method, family, cfg)
        if r.target != bd.BAYES:
            continue
        raw = r.raw_value * (ctx["fault_vj_scale"] if method.startswith("vj") else 1.0)
        if raw < ctx["bayes"] - bd.SOUNDNESS_TOL:
            return f"{method} = {raw} < Bayes success {ctx['bayes']}"


def check_minimax_soundness(family, rng, ctx):
    br = minimax_success_bracket(family, max_iters=300, tol=1e-9)
    if not br.lower <= br.upper <= ctx["bayes"] + 1e-9:
        return f"bracket ({br.lower}, {br.upper}) not below B = {ctx['bayes']}"
    cfg = bd.BoundConfig()
    for method in ("fano_ih", "birge", "birge_massart"):
        if method not in bd.applicable_methods(family):
            continue
        r = bd.evaluate_bound(method, family, cfg)
        if r.value < br.lower - bd.SOUNDNESS_TOL:
            return f"{method} = {r.value} < minimax lower {br.lower}"


def check_two_point_equality(family, rng, ctx):
    if family.n_members != 2:
        return None
    t = bd.two_point_bound(family).raw_value
    if abs(t - ctx["bayes"]) > 1e-10:
        return f"two-point {t} != Bayes success {ctx['bayes']}"


def check_tensorization(family, rng, ctx):
    Qm = ctx["mixture"]
    prev = ctx["bayes"]
    for n in (2, 3):
        if family.space.size**n > TENSOR_ATOM_CAP:
            break
        big = product_extend(family, n)
        Qn = resolve_reference(big, ReferenceSpec.custom_density(
            _kron_power(Qm.density, n)))
        for j in range(family.n_members):
            k1 = dv.kl(family.members[j], Qm)
            kn = dv.kl(big.members[j], Qn)
            if abs(kn - dv.tensorize(k1, "kl", n)) > 1e-10 * max(1.0, kn):
                return f"KL tensorization fails at n={n}, member {j}"
            d1 = dv.power_divergence(family.members[j], Qm, 1.0)
            dn = dv.power_divergence(big.members[j], Qn, 1.0)
            if abs(dn - dv.tensorize(d1, "power", n)) > 1e-10 * max(1.0, dn):
                return f"power tensorization fails at n={n}, member {j}"
        b = exact_bayes_success(big)
        if b < prev - 1e-12:
            return f"Bayes success decreased from {prev} to {b} at n={n}"
        prev = b


def _kron_power(v, n):
    out = v
    for _ in range(n - 1):
        out = np.kron(out, v)
    return out


def check_vj_constant(family, rng, ctx):
    grid = np.logspace(-2, 2, 41)
    c = np.array([bd.vj_constant(l) for l in grid])
    if np.any(c < 1) or bd.vj_constant(1.0) != 2.0:
        return "C(lambda) below 1 or C(1) != 2"


INVARIANTS = {
    "normalization": check_normalization,
    "divergence_basics": check_divergence_basics,
    "bayes_reference_identity": check_reference_identity,
    "ml_rule_optimality": check_ml_rule,
    "master_inequality": check_master_inequality,
    "phi_specialization": check_specialization,
    "entropy_dominates_fano_new": check_entropy_dominance,
    "bayes_bound_soundness": check_bayes_soundness,
    "minimax_bound_soundness": check_minimax_soundness,
    "two_point_equality": check_two_point_equality,
    "tensorization": check_tensorization,
    "vj_constant": check_vj_constant,
}


@dataclass
class VerifyReport:
    seed: int
    n_families: int
    passed: dict = field(default_factory=dict)
    checked: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def minimal_failure(self):
        """Smallest failing family over all invariants, with its message."""
        if not self.failures:
            return None
        return min(self.failures.values(),
                   key=lambda f: f[0].n_members * f[0].space.size)

    def lines(self) -> list[str]:
        out = []
        for name in INVARIANTS:
            status = "PASS" if name not in self.failures else "FAIL"
            out.append(f"{status} {name}: {self.passed.get(name, 0)}/{self.checked.get(name, 0)}")
            if name in self.failures:
                out.append(f"    first failure: {self.failures[name][1]}")
        return out


def run_suite(seed: int = 42, n_families: int = 200, *, n_two_point: int = 50,
              fault_vj_scale: float = 1.0) -> VerifyReport:
    """Run every invariant on ``n_families`` random families plus N = 1 extras.

    ``fault_vj_scale`` multiplies the power-divergence bounds before the
    soundness check; values below 1 inject a deliberate fault.
    """
    rng = np.random.default_rng(seed)
    report = VerifyReport(seed, n_families)
    t0 = time.perf_counter()
    families = [random_family(rng) for _ in range(n_families)]
    families += [random_family(rng, max_atoms=10, n_members=2) for _ in range(n_two_point)]
    for family in families:
        ctx = {
            "bayes": exact_bayes_success(family),
            "refs": dominating_references(family, rng),
            "mixture": resolve_reference(family, ReferenceSpec.uniform()),
            "fault_vj_scale": fault_vj_scale,
        }
        for name, check in INVARIANTS.items():
            msg = check(family, rng, ctx)
            report.checked[name] = report.checked.get(name, 0) + 1
            if msg is None:
                report.passed[name] = report.passed.get(name, 0) + 1
                continue
            prev = report.failures.get(name)
            size = family.n_members * family.space.size
            if prev is None or size < prev[0].n_members * prev[0].space.size:
                report.failures[name] = (family, msg)
    report.seconds = time.perf_counter() - t0
    return report
