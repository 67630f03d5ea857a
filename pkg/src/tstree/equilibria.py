"""Equilibrium configurations and the trait-substitution-tree jump process.

On a validated chain of L+1 traits the stable coexistence configuration
occupies every second rank counting down from the fittest: ranks with the
same parity as L, each at its monomorphic mass ``n_bar``.  A mutation jump
splices one trait into the chain and instantaneously re-equilibrates — the
new configuration is just the parity configuration of the enlarged chain.
That single rule reproduces the case-by-case insertion branches of the
limit process (see the parity property test in the test suite, which pits
a literal branch-by-branch construction against it).

Time for :class:`TstState` is measured in mutation-scale units: one unit
here corresponds to 1/(K*sigma) natural time units of the microscopic
process.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .traitspace import OrderedTraitSpace, TraitSpec

__all__ = [
    "Configuration",
    "TstState",
    "equilibrium_configuration",
    "occupied_ranks",
    "tst_insert",
    "tst_jump_rates",
    "sample_tst_path",
]


@dataclass(frozen=True)
class Configuration:
    """A finite point measure: trait id -> nonnegative mass.

    Only the stored entries exist; absent ids carry mass 0.  Total
    variation distance between two configurations is the sum of absolute
    mass differences over the union of their supports.
    """

    atoms: Mapping[str, float]

    def __init__(self, atoms: Mapping[str, float]):
        cleaned = {}
        for key, mass in atoms.items():
            mass = float(mass)
            if mass < 0:
                raise ValueError(f"negative mass {mass} at {key!r}")
            cleaned[str(key)] = mass
        object.__setattr__(self, "atoms", cleaned)

    def mass(self, trait_id: str) -> float:
        return self.atoms.get(trait_id, 0.0)

    @property
    def support(self) -> set[str]:
        return {k for k, v in self.atoms.items() if v > 0}

    def total_mass(self) -> float:
        return float(sum(self.atoms.values()))

    def tv_distance(self, other: "Configuration") -> float:
        keys = set(self.atoms) | set(other.atoms)
        return float(sum(abs(self.mass(k) - other.mass(k)) for k in keys))

    def as_vector(self, space: OrderedTraitSpace) -> np.ndarray:
        return np.array([self.mass(t.id) for t in space.traits])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        keys = set(self.atoms) | set(other.atoms)
        return all(self.mass(k) == other.mass(k) for k in keys)


def occupied_ranks(n_traits: int) -> list[int]:
    """Ranks occupied in the stable configuration of a chain of n_traits.

    The top rank L = n_traits - 1 is always occupied, and occupation
    alternates downward: ranks L, L-2, L-4, ...
    """
    top = n_traits - 1
    return [r for r in range(n_traits) if r % 2 == top % 2]


def equilibrium_configuration(space: OrderedTraitSpace) -> Configuration:
    """The stable configuration of a validated chain: the parity rule.

    Ranks with the same parity as the top rank carry their full
    monomorphic mass ``n_bar``; the others carry exactly 0.
    """
    space.require_valid()
    atoms = {space.traits[r].id: space.n_bar(r) for r in occupied_ranks(len(space))}
    return Configuration(atoms)


@dataclass(frozen=True)
class TstState:
    """A point of the substitution-tree process.

    ``space`` is the full chain accumulated so far (identities are never
    lost), ``config`` its current equilibrium configuration, ``time`` the
    elapsed mutation-scale time.
    """

    space: OrderedTraitSpace
    config: Configuration
    time: float = 0.0

    @classmethod
    def initial(cls, space: OrderedTraitSpace, time: float = 0.0) -> "TstState":
        return cls(space, equilibrium_configuration(space), float(time))

    @property
    def chain_size(self) -> int:
        return len(self.space)

    @property
    def occupied_count(self) -> int:
        return len(self.config.support)


def tst_insert(
    state: TstState,
    source_rank: int,
    mutant: TraitSpec,
    mutant_rank: int,
) -> TstState:
    """Splice a mutant into the chain and re-equilibrate.

    ``source_rank`` must be occupied in the current configuration (only
    occupied traits mutate); ``mutant_rank`` is the mutant's declared
    position in the enlarged chain (old ranks >= mutant_rank shift up by
    one).  The result's configuration is the parity equilibrium of the
    enlarged chain; its time is unchanged (the sampler advances time).

    Raises ``ValueError`` for an unoccupied source or a declared rank that
    breaks order validity on the enlarged chain.
    """
    space = state.space
    if not 0 <= source_rank < len(space):
        raise ValueError(f"source rank {source_rank} out of range")
    source_id = space.traits[source_rank].id
    if state.config.mass(source_id) <= 0:
        raise ValueError(
            f"source rank {source_rank} ({source_id!r}) is unoccupied and cannot mutate"
        )
    enlarged = space.insert(mutant_rank, mutant)
    enlarged.require_valid()
    return TstState(enlarged, equilibrium_configuration(enlarged), state.time)


def tst_jump_rates(state: TstState) -> dict[int, float]:
    """Mutation rate per occupied rank: n_bar(x_r) * mu(x_r).

    Rates are in mutation-scale time units.  An all-zero report means the
    state is absorbing (no occupied trait carries a positive mutation
    intensity).
    """
    rates: dict[int, float] = {}
    for r, trait in enumerate(state.space.traits):
        if state.config.mass(trait.id) > 0 and trait.mu > 0:
            rates[r] = state.space.n_bar(r) * trait.mu
    return rates


# A mutation law maps (rng, current chain, source rank) to the mutant's
# TraitSpec and its declared rank in the enlarged chain.
MutationLaw = Callable[
    [np.random.RandomState, OrderedTraitSpace, int], tuple[TraitSpec, int]
]


def sample_tst_path(
    initial: TstState,
    horizon: float,
    law: MutationLaw,
    seed: int | np.random.SeedSequence = 0,
    *,
    max_jumps: int = 100_000,
) -> list[TstState]:
    """Sample one substitution-tree path on [initial.time, horizon].

    Waiting times are exponential with the state's total jump rate; the
    mutating source is drawn proportionally to its rate; the mutant comes
    from ``law``.  Returns the right-continuous path as a list of states,
    the initial state first, one entry per jump, each stamped with its
    jump time.  An absorbing state (total rate 0) ends the path early.
    """
    if horizon <= initial.time:
        return [initial]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.RandomState(ss.generate_state(8, dtype=np.uint32))
    path = [initial]
    state = initial
    for _ in range(max_jumps):
        rates = tst_jump_rates(state)
        total = sum(rates.values())
        if total <= 0.0:
            break
        t_next = state.time + rng.exponential(1.0 / total)
        if t_next > horizon:
            break
        u = rng.random_sample() * total
        acc = 0.0
        source = next(iter(rates))
        for rank, rate in rates.items():
            acc += rate
            if u < acc:
                source = rank
                break
        mutant, mutant_rank = law(rng, state.space, source)
        state = tst_insert(state, source, mutant, mutant_rank)
        state = TstState(state.space, state.config, t_next)
        path.append(state)
    else:
        raise RuntimeError(f"path exceeded {max_jumps} jumps before the horizon")
    return path


def state_at(path: Iterable[TstState], t: float) -> TstState:
    """Evaluate a right-continuous jump path at time t."""
    current = None
    for s in path:
        if s.time <= t:
            current = s
        else:
            break
    if current is None:
        raise ValueError("t precedes the path's initial time")
    return current
