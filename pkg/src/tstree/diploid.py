"""Diploid layer: alleles, genotypes, and the genotype substitution tree.

A population of diploid individuals over ``n`` alleles has
``h(n) = n(n+1)/2`` unordered genotypes.  A symmetric map Phi assigns
each genotype a trait (birth/death/mutation rates) and a fitness rank,
which induces an ordered trait chain — everything from the haploid
machinery (order validation, equilibria, the event engine) then applies
verbatim to the induced chain.

Sexual reproduction enters as *gamete replacement*: a genotype can turn
into another one only when the two share at least one allele, the target
is fitness-adjacent on the induced chain, and both are currently present
— structurally the occupied-only migration of the haploid model, so
microscopic diploid runs reuse the stochastic engine with
:func:`replacement_edges` as the migration graph (and no trait-level
mutation; allele mutations change the genotype space itself and live in
the jump process below).

Allele mutation adds one allele, hence ``n+1`` brand-new genotypes, and
re-equilibrates the enlarged induced chain.  The per-allele jump rate
doubles on homozygotes (both gamete copies mutate the same allele).
Collapsing genotypes through Phi maps this process exactly onto the
haploid substitution tree with per-trait mutation intensity ``2 * mu_hat``
— asserted exactly in the test suite on small enumerated cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .equilibria import Configuration, equilibrium_configuration
from .traitspace import KernelSpec, OrderedTraitSpace, TraitSpec

__all__ = [
    "AlleleSpace",
    "Genotype",
    "GenotypeSpace",
    "GstState",
    "h",
    "build_genotype_space",
    "replacement_edges",
    "ReplacementEdge",
    "gst_jump_rates",
    "gst_rate_table",
    "sample_gst_path",
    "LadderAlleleLaw",
    "make_allele_law",
    "genotype_micro_scenario",
]


def h(n: int) -> int:
    """Number of unordered allele pairs over n alleles: n(n+1)/2."""
    if n < 0:
        raise ValueError("allele count must be nonnegative")
    return n * (n + 1) // 2


@dataclass(frozen=True)
class AlleleSpace:
    """Ordered list of distinct allele identifiers."""

    alleles: tuple[str, ...]

    def __init__(self, alleles: Sequence[str]):
        alleles = tuple(str(a) for a in alleles)
        if not alleles:
            raise ValueError("an allele space needs at least one allele")
        if len(set(alleles)) != len(alleles):
            raise ValueError(f"duplicate allele ids: {list(alleles)}")
        object.__setattr__(self, "alleles", alleles)

    def __len__(self) -> int:
        return len(self.alleles)

    def extended(self, new_allele: str) -> "AlleleSpace":
        return AlleleSpace(self.alleles + (str(new_allele),))


@dataclass(frozen=True)
class Genotype:
    """Unordered allele pair; stored with the two ids in sorted order."""

    a: str
    b: str

    def __init__(self, a: str, b: str):
        a, b = sorted((str(a), str(b)))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def label(self) -> str:
        return f"{self.a}|{self.b}"

    @property
    def is_homozygous(self) -> bool:
        return self.a == self.b

    def contains(self, allele: str) -> bool:
        return allele == self.a or allele == self.b

    def shares_allele(self, other: "Genotype") -> bool:
        return self.contains(other.a) or self.contains(other.b)

    def copies_of(self, allele: str) -> int:
        return (self.a == allele) + (self.b == allele)


PhiMap = Mapping[tuple[str, str], tuple[TraitSpec, int]]


@dataclass(frozen=True)
class GenotypeSpace:
    """All genotypes over an allele space, with their induced trait chain.

    ``genotypes`` is ordered by fitness rank and aligns index-for-index
    with ``space`` (the induced :class:`OrderedTraitSpace`), so rank r's
    genotype is ``genotypes[r]`` and its trait is ``space.traits[r]``.
    """

    alleles: AlleleSpace
    genotypes: tuple[Genotype, ...]
    space: OrderedTraitSpace

    def __post_init__(self):
        n = len(self.alleles)
        if len(self.genotypes) != h(n):
            raise ValueError(
                f"genotype count {len(self.genotypes)} != h({n}) = {h(n)}"
            )
        if len(self.genotypes) != len(self.space):
            raise ValueError("genotypes and induced chain must align")
        object.__setattr__(
            self, "_rank_index", {g: r for r, g in enumerate(self.genotypes)}
        )

    @property
    def size(self) -> int:
        return len(self.genotypes)

    def rank_of(self, g: Genotype) -> int:
        try:
            return self._rank_index[g]
        except KeyError:
            raise KeyError(f"genotype {g.label} not in this space") from None

    def trait_of(self, g: Genotype) -> TraitSpec:
        return self.space.traits[self.rank_of(g)]

    def genotype_of(self, trait_id: str) -> Genotype:
        return self.genotypes[self.space.rank_of(trait_id)]

    def genotypes_with(self, allele: str) -> list[Genotype]:
        return [g for g in self.genotypes if g.contains(allele)]


def build_genotype_space(
    alleles: AlleleSpace,
    phi: PhiMap | Callable[[str, str], tuple[TraitSpec, int]],
    kernel: KernelSpec,
) -> GenotypeSpace:
    """Assemble the genotype space and validate its induced chain.

    ``phi`` gives, for every unordered pair (callable or mapping keyed by
    the pair in either order), the genotype's trait and its fitness rank.
    Ranks must be a permutation of 0..h(n)-1 — a collision would mean two
    genotypes tie in fitness, which the strict order forbids — and the
    induced chain must pass order validation.
    """
    n = len(alleles)
    pairs = [
        Genotype(alleles.alleles[i], alleles.alleles[j])
        for i in range(n)
        for j in range(i, n)
    ]

    def lookup(g: Genotype) -> tuple[TraitSpec, int]:
        if callable(phi):
            return phi(g.a, g.b)
        for key in ((g.a, g.b), (g.b, g.a)):
            if key in phi:
                return phi[key]
        raise KeyError(f"phi is not defined for genotype {g.label}")

    assigned: dict[int, tuple[Genotype, TraitSpec]] = {}
    for g in pairs:
        trait, rank = lookup(g)
        rank = int(rank)
        if not 0 <= rank < len(pairs):
            raise ValueError(f"rank {rank} for {g.label} outside 0..{len(pairs) - 1}")
        if rank in assigned:
            raise ValueError(
                f"rank collision at {rank}: {assigned[rank][0].label} vs {g.label} "
                "(strict fitness order forbids ties)"
            )
        assigned[rank] = (g, trait)

    ordered = [assigned[r] for r in range(len(pairs))]
    space = OrderedTraitSpace((t for _, t in ordered), kernel)
    space.require_valid()
    return GenotypeSpace(
        alleles=alleles,
        genotypes=tuple(g for g, _ in ordered),
        space=space,
    )


@dataclass(frozen=True)
class ReplacementEdge:
    source: Genotype
    target: Genotype
    weight: float


def replacement_edges(
    gs: GenotypeSpace, support: set[Genotype] | Sequence[Genotype]
) -> list[ReplacementEdge]:
    """Directed gamete-replacement edges active for the given support.

    An edge g1 -> g2 exists when both genotypes are in the support, they
    share at least one allele, and their induced ranks are adjacent.  The
    weight is the chain's neighbor migration kernel.
    """
    support = set(support)
    for g in support:
        gs.rank_of(g)  # raises for foreign genotypes
    edges: list[ReplacementEdge] = []
    w = gs.space.kernel.m_neighbor
    for g1 in gs.genotypes:
        if g1 not in support:
            continue
        r1 = gs.rank_of(g1)
        for r2 in (r1 - 1, r1 + 1):
            if not 0 <= r2 < gs.size:
                continue
            g2 = gs.genotypes[r2]
            if g2 in support and g1 != g2 and g1.shares_allele(g2):
                edges.append(ReplacementEdge(g1, g2, w))
    return edges


@dataclass(frozen=True)
class GstState:
    """A point of the genotype substitution tree: space + equilibrium + time."""

    gs: GenotypeSpace
    config: Configuration
    time: float = 0.0

    @classmethod
    def initial(cls, gs: GenotypeSpace, time: float = 0.0) -> "GstState":
        return cls(gs, equilibrium_configuration(gs.space), float(time))

    @property
    def occupied_genotypes(self) -> list[Genotype]:
        return [
            g
            for g, t in zip(self.gs.genotypes, self.gs.space.traits)
            if self.config.mass(t.id) > 0
        ]


def gst_jump_rates(state: GstState, allele: str) -> float:
    """Jump rate attributed to mutating one allele.

    Sums ``n_bar(Phi(g)) * mu_hat(g) * (1 + [g homozygous in the allele])``
    over occupied genotypes carrying the allele.  The doubling reflects
    that either of a homozygote's two gamete copies can mutate; an allele
    present only in unoccupied genotypes contributes 0.
    """
    if allele not in state.gs.alleles.alleles:
        raise KeyError(f"unknown allele {allele!r}")
    total = 0.0
    for rank, (g, trait) in enumerate(zip(state.gs.genotypes, state.gs.space.traits)):
        if not g.contains(allele):
            continue
        if trait.mu <= 0 or state.config.mass(trait.id) <= 0:
            continue
        contribution = state.gs.space.n_bar(rank) * trait.mu
        if g.is_homozygous:
            contribution = contribution * 2
        total += contribution
    return total


def gst_rate_table(state: GstState) -> dict[str, float]:
    """Per-allele jump rates; all-zero means the state is absorbing."""
    return {a: gst_jump_rates(state, a) for a in state.gs.alleles.alleles}


# An allele mutation law maps (rng, genotype space, source allele) to the
# new allele id plus, for each of the n+1 brand-new genotypes (pairings of
# the new allele with every old allele and with itself), its trait and its
# rank *in the enlarged chain*.  Ranks are final positions: they must be
# distinct, and old genotypes keep their relative order around them.
AlleleMutationLaw = Callable[
    [np.random.RandomState, "GenotypeSpace", str],
    tuple[str, list[tuple[str, TraitSpec, int]]],
]


def _enlarge(gs: GenotypeSpace, new_allele: str, assignments) -> GenotypeSpace:
    n_new = len(gs.alleles) + 1
    new_size = h(n_new)
    expected_partners = set(gs.alleles.alleles) | {new_allele}
    got_partners = [p for p, _, _ in assignments]
    if sorted(got_partners) != sorted(expected_partners):
        raise ValueError(
            "the law must assign exactly one genotype per pairing of the new "
            f"allele with {sorted(expected_partners)}, got {sorted(got_partners)}"
        )
    by_rank: dict[int, tuple[Genotype, TraitSpec]] = {}
    for partner, trait, rank in assignments:
        rank = int(rank)
        if not 0 <= rank < new_size:
            raise ValueError(f"declared rank {rank} outside the enlarged chain")
        if rank in by_rank:
            raise ValueError(f"two new genotypes declared at rank {rank}")
        by_rank[rank] = (Genotype(new_allele, partner), trait)

    old = list(zip(gs.genotypes, gs.space.traits))
    merged: list[tuple[Genotype, TraitSpec]] = []
    old_iter = iter(old)
    for r in range(new_size):
        if r in by_rank:
            merged.append(by_rank[r])
        else:
            merged.append(next(old_iter))

    space = OrderedTraitSpace((t for _, t in merged), gs.space.kernel)
    space.require_valid()
    return GenotypeSpace(
        alleles=gs.alleles.extended(new_allele),
        genotypes=tuple(g for g, _ in merged),
        space=space,
    )


def sample_gst_path(
    initial: GstState,
    horizon: float,
    law: AlleleMutationLaw,
    seed: int | np.random.SeedSequence = 0,
    *,
    max_jumps: int = 500,
) -> list[GstState]:
    """Sample one genotype-substitution-tree path on [initial.time, horizon].

    Exponential waiting at the total per-allele rate; the mutating allele
    is drawn proportionally to :func:`gst_jump_rates`; the law supplies
    the new allele and the placement of its n+1 new genotypes; the
    enlarged chain re-equilibrates instantly.  Right-continuous path,
    initial state first.

    Every jump adds an allele, so the genotype count grows quadratically
    along the path; keep ``max_jumps`` modest and make the law's mutation
    intensities decay fast enough that the total rate stays summable.
    """
    if horizon <= initial.time:
        return [initial]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.RandomState(ss.generate_state(8, dtype=np.uint32))
    path = [initial]
    state = initial
    for _ in range(max_jumps):
        rates = gst_rate_table(state)
        total = sum(rates.values())
        if total <= 0.0:
            break
        t_next = state.time + rng.exponential(1.0 / total)
        if t_next > horizon:
            break
        u = rng.random_sample() * total
        acc = 0.0
        source = next(iter(rates))
        for allele, rate in rates.items():
            acc += rate
            if u < acc:
                source = allele
                break
        new_allele, assignments = law(rng, state.gs, source)
        if new_allele in state.gs.alleles.alleles:
            raise ValueError(f"law produced an existing allele id {new_allele!r}")
        gs2 = _enlarge(state.gs, new_allele, assignments)
        state = GstState(gs2, equilibrium_configuration(gs2.space), t_next)
        path.append(state)
    else:
        raise RuntimeError(f"path exceeded {max_jumps} jumps before the horizon")
    return path


@dataclass(frozen=True)
class LadderAlleleLaw:
    """Built-in allele law: every new genotype lands above the current top.

    The new allele's genotypes are appended in a fixed order (pairings
    with old alleles by their order, the new homozygote last and fittest)
    with growth rates climbing by ``b_increment`` per slot, and mutation
    intensity scaled down by ``mu_hat_factor`` from the previous top —
    geometric decay keeps total jump rates bounded along the path.
    """

    b_increment: float = 2.0
    mu_hat_factor: float = 0.7
    d_value: float = 0.0

    def __call__(self, rng, gs: GenotypeSpace, source_allele: str):
        k = 1
        existing = set(gs.alleles.alleles)
        while f"a{k}" in existing:
            k += 1
        new_id = f"a{k}"
        top = gs.space.traits[-1]
        base = top.growth
        mu_hat = top.mu * self.mu_hat_factor
        start_rank = gs.size
        assignments = []
        partners = list(gs.alleles.alleles) + [new_id]
        for i, partner in enumerate(partners):
            label = Genotype(new_id, partner).label
            trait = TraitSpec(
                id=label,
                b=base + self.b_increment * (i + 1) + self.d_value,
                d=self.d_value,
                mu=mu_hat,
            )
            assignments.append((partner, trait, start_rank + i))
        return new_id, assignments


_ALLELE_LAWS = {"ladder_alleles": LadderAlleleLaw}


def make_allele_law(name: str, **parameters) -> AlleleMutationLaw:
    """Build a named allele mutation law (currently: ``ladder_alleles``)."""
    try:
        factory = _ALLELE_LAWS[name]
    except KeyError:
        raise KeyError(
            f"unknown allele law {name!r}; available: {sorted(_ALLELE_LAWS)}"
        ) from None
    return factory(**parameters)


def genotype_micro_scenario(
    gs: GenotypeSpace,
    *,
    K: int,
    epsilon: float,
    initial: Mapping[str, int] | None = None,
    horizon: float = 0.0,
    seed: int = 0,
    name: str = "",
):
    """Microscopic scenario on the induced chain with gamete-replacement edges.

    Runs the standard event engine in occupied-only mode; the migration
    graph contains exactly the rank-adjacent allele-sharing pairs (both
    directions), so an edge is active precisely while its endpoints are
    both present — the gamete-replacement semantics.  Trait-level
    mutation stays off: allele mutations change the genotype space itself
    and belong to the jump process, not to this engine.
    """
    from .microsim import Scenario

    edges: list[tuple[str, str]] = []
    for r1 in range(gs.size - 1):
        g1, g2 = gs.genotypes[r1], gs.genotypes[r1 + 1]
        if g1.shares_allele(g2):
            edges.append((gs.space.traits[r1].id, gs.space.traits[r1 + 1].id))
            edges.append((gs.space.traits[r1 + 1].id, gs.space.traits[r1].id))
    if initial is None:
        cfg = equilibrium_configuration(gs.space)
        initial = {
            tid: int(round(cfg.mass(tid) * K))
            for tid in (t.id for t in gs.space.traits)
            if cfg.mass(tid) > 0
        }
    return Scenario(
        space=gs.space,
        K=K,
        epsilon=epsilon,
        sigma=0.0,
        mode="occupied_only",
        initial=initial,
        horizon=horizon,
        migration_edges=tuple(edges),
        seed=seed,
        name=name or "diploid-micro",
    )
