"""Finite measure spaces, candidate families and reference distributions.

Densities are always stored relative to the atom weights of the underlying
measure, so ``density[x] * weight[x]`` is the probability of atom ``x``.
All containers are immutable once built; their arrays are flagged read-only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Hashable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    DistinctnessError,
    DominationError,
    NormalizationError,
    ParameterError,
    SizeCapError,
    WeightError,
)

NORMALIZATION_TOL = 1e-10
DISTINCT_TOL = 1e-12
DEFAULT_SIZE_CAP = 10**6


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MeasureSpace:
    """Ordered atoms with strictly positive weights (the dominating measure)."""

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        weights = _frozen(self.weights)
        if weights.ndim != 1 or len(atoms) != weights.shape[0]:
            raise DimensionError(
                f"{len(atoms)} atoms but weights have shape {weights.shape}"
            )
        if len(set(atoms)) != len(atoms):
            raise DimensionError("atom labels must be unique")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise WeightError("every atom weight must be finite and strictly positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def counting(cls, n_atoms: int) -> "MeasureSpace":
        return cls(tuple(range(n_atoms)), np.ones(n_atoms))

    @property
    def size(self) -> int:
        return len(self.atoms)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, MeasureSpace):
            return NotImplemented
        return self.atoms == other.atoms and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.atoms, self.weights.tobytes()))


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    space: MeasureSpace
    density: np.ndarray

    def __post_init__(self):
        density = _frozen(self.density)
        if density.shape != (self.space.size,):
            raise DimensionError(
                f"density has shape {density.shape}, expected ({self.space.size},)"
            )
        if not np.all(np.isfinite(density)) or np.any(density < 0):
            raise ParameterError("densities must be finite and non-negative")
        total = float(density @ self.space.weights)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"distribution integrates to {total!r}, not 1")
        object.__setattr__(self, "density", density)

    @property
    def masses(self) -> np.ndarray:
        """Probability of each atom, ``p(x) * mu(x)``."""
        return self.density * self.space.weights

    @property
    def support(self) -> np.ndarray:
        return self.density > 0

    def __eq__(self, other):
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.density, other.density)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FiniteFamily:
    """The candidate set ``P_0, ..., P_N`` on a shared finite space."""

    space: MeasureSpace
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 2:
            raise DimensionError("a family needs at least two members")
        for j, member in enumerate(members):
            if member.space != self.space:
                raise DimensionError(f"member {j} lives on a different measure space")
        object.__setattr__(self, "members", members)
        dens = _frozen(np.vstack([m.density for m in members]))
        object.__setattr__(self, "_densities", dens)
        for i, j in itertools.combinations(range(len(members)), 2):
            if np.max(np.abs(dens[i] - dens[j])) <= DISTINCT_TOL:
                raise DistinctnessError(f"members {i} and {j} coincide")

    @property
    def densities(self) -> np.ndarray:
        """Density matrix of shape ``(N + 1, n_atoms)``."""
        return self._densities

    @property
    def masses(self) -> np.ndarray:
        return self._densities * self.space.weights

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def N(self) -> int:
        return len(self.members) - 1

    def __len__(self):
        return len(self.members)

    def __getitem__(self, j) -> FiniteDistribution:
        return self.members[j]


@dataclass(frozen=True, eq=False)
class GaussianFamily:
    """Isotropic Gaussian location family ``N(theta_j, sigma^2 I_d)``."""

    means: np.ndarray
    sigma: float

    def __post_init__(self):
        means = _frozen(self.means)
        if means.ndim == 1:
            means = _frozen(means[:, None])
        if means.ndim != 2:
            raise DimensionError("means must be a list of equal-length vectors")
        if means.shape[0] < 2:
            raise DimensionError("a family needs at least two members")
        if not np.all(np.isfinite(means)):
            raise ParameterError("means must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"sigma must be positive, got {self.sigma!r}")
        for i, j in itertools.combinations(range(means.shape[0]), 2):
            if np.linalg.norm(means[i] - means[j]) <= DISTINCT_TOL:
                raise DistinctnessError(f"means {i} and {j} coincide")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_members(self) -> int:
        return self.means.shape[0]

    @property
    def N(self) -> int:
        return self.means.shape[0] - 1

    def __len__(self):
        return self.n_members

    def sq_distances(self, ref: int) -> np.ndarray:
        """``||theta_j - theta_ref||^2`` for every member j."""
        return np.sum((self.means - self.means[ref]) ** 2, axis=1)

    def logpdf(self, x) -> np.ndarray:
        """Log densities of every member at the rows of ``x``; shape ``(N+1, n)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            x = x.reshape(-1, self.dim)
        sq = ((x[None, :, :] - self.means[:, None, :]) ** 2).sum(axis=2)
        norm = 0.5 * self.dim * np.log(2 * np.pi * self.sigma**2)
        return -sq / (2 * self.sigma**2) - norm


# -- reference distributions -------------------------------------------------


@dataclass(frozen=True)
class ReferenceSpec:
    """How to build the dominating reference ``Q`` from a family."""

    kind: str = "uniform_mixture"
    index: int | None = None
    weights: tuple | None = None
    density: tuple | None = None

    KINDS = ("uniform_mixture", "indexed", "custom_weights", "custom_density")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown reference kind {self.kind!r}; use one of {self.KINDS}")
        if self.kind == "indexed" and (self.index is None or int(self.index) != self.index):
            raise ParameterError("indexed reference needs an integer index")
        if self.kind == "custom_weights":
            if self.weights is None:
                raise ParameterError("custom_weights reference needs weights")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.kind == "custom_density":
            if self.density is None:
                raise ParameterError("custom_density reference needs a density")
            object.__setattr__(self, "density", tuple(float(d) for d in self.density))

    @classmethod
    def uniform(cls):
        return cls("uniform_mixture")

    @classmethod
    def indexed(cls, j: int):
        return cls("indexed", index=int(j))

    @classmethod
    def custom_weights(cls, weights):
        return cls("custom_weights", weights=tuple(weights))

    @classmethod
    def custom_density(cls, density):
        return cls("custom_density", density=tuple(density))

    @property
    def label(self) -> str:
        if self.kind == "indexed":
            return f"P{self.index}"
        return self.kind

    @property
    def is_mixture(self) -> bool:
        return self.kind in ("uniform_mixture", "custom_weights")

    def mixture_weights(self, n_members: int) -> np.ndarray:
        """Weights over members for every kind except ``custom_density``."""
        if self.kind == "uniform_mixture":
            return np.full(n_members, 1.0 / n_members)
        if self.kind == "indexed":
            if not 0 <= self.index < n_members:
                raise ParameterError(
                    f"reference index {self.index} outside 0..{n_members - 1}"
                )
            w = np.zeros(n_members)
            w[self.index] = 1.0
            return w
        if self.kind == "custom_weights":
            return check_mix_weights(self.weights, n_members)
        raise ParameterError("custom_density references have no mixture weights")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "indexed":
            out["index"] = self.index
        elif self.kind == "custom_weights":
            out["weights"] = list(self.weights)
        elif self.kind == "custom_density":
            out["density"] = list(self.density)
        return out


def check_mix_weights(weights, n_members: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_members,):
        raise WeightError(f"expected {n_members} mixture weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise WeightError("mixture weights must be non-negative")
    if abs(w.sum() - 1.0) > NORMALIZATION_TOL:
        raise WeightError(f"mixture weights sum to {w.sum()!r}, not 1")
    return w


# -- constructors ------------------------------------------------------------


def make_finite_family(
    atom_labels: Sequence[Hashable] | None,
    weights,
    density_matrix,
) -> FiniteFamily:
    """Validate and build a :class:`FiniteFamily`.

    Parameters
    ----------
    atom_labels : sequence or None
        One label per column; ``None`` means ``0, 1, ...``.
    weights : array-like or None
        Atom weights of the dominating measure; ``None`` means counting measure.
    density_matrix : array-like of shape (N + 1, n_atoms)
        Row ``j`` is the density of member ``j`` relative to ``weights``.
        Rows are checked for normalization, never renormalized.
    """
    try:
        rows = [np.asarray(r, dtype=float) for r in density_matrix]
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"density matrix is not numeric: {exc}") from exc
    if len(rows) < 2:
        raise DimensionError("need at least two rows (N + 1 >= 2)")
    widths = {r.shape for r in rows}
    if len(widths) != 1 or rows[0].ndim != 1:
        raise DimensionError("density matrix is ragged")
    n_atoms = rows[0].shape[0]
    if atom_labels is None:
        atom_labels = range(n_atoms)
    if weights is None:
        weights = np.ones(n_atoms)
    atom_labels = tuple(atom_labels)
    if len(atom_labels) != n_atoms:
        raise DimensionError(f"{len(atom_labels)} labels for {n_atoms} columns")
    space = MeasureSpace(atom_labels, weights)
    return FiniteFamily(space, tuple(FiniteDistribution(space, r) for r in rows))


def make_gaussian_family(means, sigma) -> GaussianFamily:
    try:
        arr = np.asarray(means, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"means must share one dimension: {exc}") from exc
    return GaussianFamily(arr, sigma)


def mixture(family: FiniteFamily, mix_weights) -> FiniteDistribution:
    """Mixture ``sum_j w_j P_j``; weight ``e_j`` returns member ``j`` itself."""
    w = check_mix_weights(mix_weights, family.n_members)
    nz = np.flatnonzero(w)
    if nz.size == 1 and w[nz[0]] == 1.0:
        return family.members[nz[0]]
    return FiniteDistribution(family.space, w @ family.densities)


def domination_failures(family: FiniteFamily, Q: FiniteDistribution) -> list[int]:
    """Indices of members putting mass where ``Q`` has none."""
    null = Q.density == 0
    return [j for j in range(family.n_members) if np.any(family.densities[j, null] > 0)]


def resolve_reference(
    family: FiniteFamily, spec: ReferenceSpec, *, require_domination: bool = True
) -> FiniteDistribution:
    """Build ``Q`` from ``spec`` and check that it dominates the family.

    Raises :class:`DominationError` (with ``.offending`` member indices) when
    some member charges an atom where ``Q`` vanishes, unless
    ``require_domination`` is false.
    """
    if spec.kind == "custom_density":
        Q = FiniteDistribution(family.space, spec.density)
    else:
        Q = mixture(family, spec.mixture_weights(family.n_members))
    if require_domination:
        bad = domination_failures(family, Q)
        if bad:
            raise DominationError(
                f"reference {spec.label} does not dominate member(s) {bad}", offending=bad
            )
    return Q


def product_extend(family, n: int, size_cap: int = DEFAULT_SIZE_CAP):
    """n-fold i.i.d. extension of a family.

    Finite families are materialized on the product alphabet, whose atoms are
    n-tuples of base labels in lexicographic order. Gaussian families become
    Gaussian families in dimension ``n * d`` with tiled means.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if isinstance(family, GaussianFamily):
        return GaussianFamily(np.tile(family.means, (1, n)), family.sigma)
    if n == 1:
        return family
    size = family.space.size**n
    if size > size_cap:
        raise SizeCapError(
            f"product alphabet has {family.space.size}^{n} = {size} atoms, cap is {size_cap}"
        )
    atoms = tuple(itertools.product(family.space.atoms, repeat=n))
    weights = reduce(np.kron, [family.space.weights] * n)
    rows = [reduce(np.kron, [row] * n) for row in family.densities]
    space = MeasureSpace(atoms, weights)
    return FiniteFamily(space, tuple(FiniteDistribution(space, r) for r in rows))
