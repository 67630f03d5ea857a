"""Trait chains, invasion fitness, and viability-order validation.

The model lives on a finite, totally ordered chain of traits
``x_0 < x_1 < ... < x_L``.  Each trait carries per-capita birth/death
rates and a mutation intensity; a kernel bundle fixes the self and
nearest-neighbor competition weights and the nearest-neighbor migration
weight (all kernels vanish beyond rank distance 1, structurally).

Two scalars defined here drive everything downstream:

* ``n_bar(t, k)`` — the monomorphic equilibrium density (b - d) / alpha_self;
* ``fitness(y, x, k)`` — the invasion fitness of a rare type ``y`` against a
  resident ``x`` sitting at its equilibrium, b(y) - d(y) - alpha(y, x) * n_bar(x).

A chain is *order-valid* when every adjacent pair satisfies
``fitness(higher, lower) > 0`` and ``fitness(lower, higher) < 0`` strictly;
ties are rejected (no tie-breaking rule exists in this model family).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


__all__ = [
    "TraitSpec",
    "KernelSpec",
    "OrderedTraitSpace",
    "OrderViolation",
    "n_bar",
    "fitness",
    "validate_order",
    "check_b3",
]


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class TraitSpec:
    """One trait: identity plus demographic rates.

    Parameters
    ----------
    id : str
        Opaque identifier, unique within a chain.
    b : float
        Per-capita birth rate, > 0.
    d : float
        Per-capita (aging) death rate, >= 0.
    mu : float, optional
        Per-capita mutation intensity, >= 0.  Default 0.
    """

    id: str
    b: float
    d: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        b = _require_finite("b", self.b)
        d = _require_finite("d", self.d)
        mu = _require_finite("mu", self.mu)
        if b <= 0:
            raise ValueError(f"trait {self.id!r}: birth rate must be > 0, got {b}")
        if d < 0:
            raise ValueError(f"trait {self.id!r}: death rate must be >= 0, got {d}")
        if b - d <= 0:
            raise ValueError(
                f"trait {self.id!r}: net growth b - d must be > 0, got {b - d}"
            )
        if mu < 0:
            raise ValueError(f"trait {self.id!r}: mutation intensity must be >= 0")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "mu", mu)

    @property
    def growth(self) -> float:
        """Net per-capita growth rate b - d."""
        return self.b - self.d


@dataclass(frozen=True)
class KernelSpec:
    """Competition/migration kernel weights on the fitness chain.

    ``alpha_self`` is the within-type competition weight (> 0),
    ``alpha_neighbor`` the weight felt from each rank-adjacent type (>= 0),
    ``m_neighbor`` the migration weight toward each rank-adjacent type (>= 0).
    Pairs at rank distance > 1 carry weight 0 for both kernels; that is
    structural, not configurable.
    """

    alpha_self: float
    alpha_neighbor: float
    m_neighbor: float = 0.0

    def __post_init__(self):
        a_s = _require_finite("alpha_self", self.alpha_self)
        a_n = _require_finite("alpha_neighbor", self.alpha_neighbor)
        m_n = _require_finite("m_neighbor", self.m_neighbor)
        if a_s <= 0:
            raise ValueError(f"alpha_self must be > 0, got {a_s}")
        if a_n < 0:
            raise ValueError(f"alpha_neighbor must be >= 0, got {a_n}")
        if m_n < 0:
            raise ValueError(f"m_neighbor must be >= 0, got {m_n}")
        object.__setattr__(self, "alpha_self", a_s)
        object.__setattr__(self, "alpha_neighbor", a_n)
        object.__setattr__(self, "m_neighbor", m_n)

    def alpha(self, rank_i: int, rank_j: int) -> float:
        """Competition weight between chain ranks i and j."""
        dist = abs(rank_i - rank_j)
        if dist == 0:
            return self.alpha_self
        if dist == 1:
            return self.alpha_neighbor
        return 0.0

    def m(self, rank_i: int, rank_j: int) -> float:
        """Migration weight from rank i to rank j."""
        return self.m_neighbor if abs(rank_i - rank_j) == 1 else 0.0


def n_bar(trait: TraitSpec, kernel: KernelSpec) -> float:
    """Monomorphic equilibrium density (b - d) / alpha_self."""
    return trait.growth / kernel.alpha_self


def fitness(
    invader: TraitSpec,
    resident: TraitSpec,
    kernel: KernelSpec,
    *,
    coupling: float | None = None,
) -> float:
    """Invasion fitness of ``invader`` against ``resident`` at equilibrium.

    Returns ``b(y) - d(y) - alpha(y, x) * n_bar(x)``.  The competition
    weight ``alpha(y, x)`` defaults to ``alpha_self`` when the two traits
    are the same object or share an id, and ``alpha_neighbor`` otherwise
    (the chain-aware call sites pass ``coupling`` explicitly; bare pairs
    are treated as adjacent, which is the only case the theory uses).
    """
    if coupling is None:
        same = invader is resident or invader.id == resident.id
        coupling = kernel.alpha_self if same else kernel.alpha_neighbor
    return invader.growth - coupling * n_bar(resident, kernel)


@dataclass(frozen=True)
class OrderViolation:
    """A failed adjacent-pair viability check."""

    lower_rank: int
    upper_rank: int
    fitness_up: float    # f(upper, lower); must be > 0
    fitness_down: float  # f(lower, upper); must be < 0
    reason: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return (
            f"pair ({self.lower_rank}, {self.upper_rank}): "
            f"f(up,low)={self.fitness_up:g}, f(low,up)={self.fitness_down:g} "
            f"- {self.reason}"
        )


@dataclass(frozen=True)
class OrderedTraitSpace:
    """A chain of traits in declared fitness-rank order plus its kernels.

    The declared list order *is* the rank order; it is validated, never
    inferred.  Construction checks only structural facts (unique ids,
    nonempty); call :func:`validate_order` (or :meth:`require_valid`) for
    the viability-order checks.
    """

    traits: tuple[TraitSpec, ...]
    kernel: KernelSpec

    def __init__(self, traits, kernel: KernelSpec):
        traits = tuple(traits)
        if not traits:
            raise ValueError("a trait space needs at least one trait")
        ids = [t.id for t in traits]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate trait ids: {ids}")
        object.__setattr__(self, "traits", traits)
        object.__setattr__(self, "kernel", kernel)

    def __len__(self) -> int:
        return len(self.traits)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.traits)

    @property
    def top_rank(self) -> int:
        return len(self.traits) - 1

    def rank_of(self, trait_id: str) -> int:
        for r, t in enumerate(self.traits):
            if t.id == trait_id:
                return r
        raise KeyError(f"no trait with id {trait_id!r}")

    def n_bar(self, rank: int) -> float:
        return n_bar(self.traits[rank], self.kernel)

    def n_bar_vector(self):
        import numpy as np

        return np.array([self.n_bar(r) for r in range(len(self))])

    def fitness(self, invader_rank: int, resident_rank: int) -> float:
        """Rank-aware invasion fitness f(x_i, x_j); exact 0 for i == j."""
        if invader_rank == resident_rank:
            return 0.0
        coupling = self.kernel.alpha(invader_rank, resident_rank)
        return fitness(
            self.traits[invader_rank],
            self.traits[resident_rank],
            self.kernel,
            coupling=coupling,
        )

    def insert(self, rank: int, trait: TraitSpec) -> "OrderedTraitSpace":
        """New space with ``trait`` spliced at ``rank`` (old ranks >= rank shift up)."""
        if not 0 <= rank <= len(self):
            raise ValueError(f"insertion rank {rank} outside [0, {len(self)}]")
        new = self.traits[:rank] + (trait,) + self.traits[rank:]
        return OrderedTraitSpace(new, self.kernel)

    def require_valid(self) -> "OrderedTraitSpace":
        violations = validate_order(self)
        if violations:
            raise ValueError(
                "trait order invalid: " + "; ".join(str(v) for v in violations)
            )
        return self


def validate_order(space: OrderedTraitSpace) -> list[OrderViolation]:
    """Check the declared order: every adjacent pair must be strictly viable.

    For each adjacent pair (x_i, x_{i+1}) the upper type must invade the
    lower (``f(x_{i+1}, x_i) > 0``) and the lower must not invade the upper
    (``f(x_i, x_{i+1}) < 0``).  Zero fitness anywhere is a violation (strict
    sign antisymmetry).  Returns the empty list when the order is valid.
    """
    out: list[OrderViolation] = []
    for i in range(len(space) - 1):
        f_up = space.fitness(i + 1, i)
        f_down = space.fitness(i, i + 1)
        if f_up <= 0 or f_down >= 0:
            if f_up == 0 or f_down == 0:
                reason = "zero invasion fitness (ties are rejected)"
            elif f_up <= 0:
                reason = "upper type cannot invade the lower resident"
            else:
                reason = "lower type can invade the upper resident"
            out.append(OrderViolation(i, i + 1, f_up, f_down, reason))
    return out


def check_b3(space: OrderedTraitSpace) -> dict[int, bool]:
    """Per-index report of the growth-vs-invasion-path inequality.

    For each rank ``i >= 2`` reports whether

        i / (b_i - d_i)  >=  sum_{j=1}^{i} 1 / f(x_j, x_{j-1})

    computed verbatim on the declared order.  A two-trait chain returns an
    empty report.  The inequality is surfaced as stated; on any order-valid
    chain it is in fact never satisfiable (each f(x_j, x_{j-1}) is strictly
    below g_j = b_j - d_j and g is strictly increasing, so the right side
    strictly exceeds i/g_i), so a ``True`` entry signals that the declared
    order itself is not viability-valid.  The order precondition is therefore
    documented but deliberately not enforced here; pair this check with
    :func:`validate_order`.
    """
    report: dict[int, bool] = {}
    partial = 0.0
    for i in range(1, len(space)):
        partial += 1.0 / space.fitness(i, i - 1)
        if i >= 2:
            lhs = i / space.traits[i].growth
            report[i] = lhs >= partial
    return report
