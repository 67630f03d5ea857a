"""Pluggable mutant laws.

A mutation law is any callable ``law(rng, space, source_rank) ->
(TraitSpec, declared_rank)``: given the chain as it stands and the rank of
the mutating trait, it produces the mutant's demographic rates and the
rank at which the mutant is declared to sit in the enlarged chain.  The
declared rank is validated downstream (order validity of the enlarged
chain), never inferred from the rates.

Built-ins:

* :class:`AlwaysFitter` — the mutant lands on top of the chain with its
  birth rate raised by a fixed increment over the current top trait.
* :class:`UniformRank` — the insertion slot is uniform over the slots that
  admit a valid mutant, with the mutant's net growth drawn uniformly from
  the slot's admissible interval.

``rng`` is a ``numpy.random.RandomState``; laws that need no randomness
(AlwaysFitter) simply ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .traitspace import KernelSpec, OrderedTraitSpace, TraitSpec

__all__ = ["AlwaysFitter", "UniformRank", "fresh_trait_id", "make_law"]


def fresh_trait_id(space: OrderedTraitSpace, prefix: str = "m") -> str:
    """Smallest unused id of the form ``<prefix><k>``."""
    taken = set(space.ids)
    k = 1
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


@dataclass(frozen=True)
class AlwaysFitter:
    """Every mutant outcompetes the whole chain.

    The mutant copies the top trait's death rate (or ``d_value`` when
    given), raises its birth rate by ``b_increment``, scales its mutation
    intensity by ``mu_factor``, and declares the top rank.
    """

    b_increment: float = 2.0
    mu_factor: float = 1.0
    d_value: float | None = None

    def __call__(self, rng, space: OrderedTraitSpace, source_rank: int):
        top = space.traits[-1]
        d = top.d if self.d_value is None else float(self.d_value)
        mutant = TraitSpec(
            id=fresh_trait_id(space),
            b=top.b - top.d + self.b_increment + d,
            d=d,
            mu=top.mu * self.mu_factor,
        )
        return mutant, len(space)


def _slot_growth_interval(
    space: OrderedTraitSpace, slot: int, top_spread: float
) -> tuple[float, float]:
    """Admissible net-growth interval for a mutant declared at ``slot``.

    With kernel ratio kappa = alpha_neighbor / alpha_self, a valid chain
    needs g_new > g_left * max(kappa, 1/kappa) against the left neighbor
    and g_new < g_right * min(kappa, 1/kappa) against the right one.
    Ends of the chain relax the missing side (the top slot opens an
    interval of relative width ``top_spread`` above its lower bound).
    Returns an (lo, hi) pair; empty when lo >= hi.
    """
    k = space.kernel
    kappa = k.alpha_neighbor / k.alpha_self
    if kappa <= 0:
        return (1.0, 0.0)  # no neighbor competition -> no valid multi-trait order
    widen = max(kappa, 1.0 / kappa)
    if slot > 0:
        lo = space.traits[slot - 1].growth * widen
    else:
        lo = 0.0
    if slot < len(space):
        hi = space.traits[slot].growth / widen
    else:
        hi = lo * (1.0 + top_spread) if lo > 0 else top_spread
    return (lo, hi)


@dataclass(frozen=True)
class UniformRank:
    """Insertion slot uniform over the valid slots of the current chain.

    The mutant's net growth is uniform on the slot's admissible interval
    (:func:`_slot_growth_interval`), its death rate is ``d_value``, and its
    mutation intensity is ``mu_factor`` times the source trait's.  Slots
    whose admissible interval is empty are excluded; the top slot is
    always valid.
    """

    d_value: float = 0.0
    mu_factor: float = 1.0
    top_spread: float = 0.5

    def __call__(self, rng, space: OrderedTraitSpace, source_rank: int):
        slots = []
        intervals = []
        for slot in range(len(space) + 1):
            lo, hi = _slot_growth_interval(space, slot, self.top_spread)
            if lo < hi:
                slots.append(slot)
                intervals.append((lo, hi))
        if not slots:
            raise RuntimeError("no valid insertion slot (degenerate kernel)")
        pick = int(rng.randint(len(slots)))
        slot = slots[pick]
        lo, hi = intervals[pick]
        # keep strictly inside the open interval: a draw landing exactly on
        # an endpoint would tie with a neighbor and fail order validation
        u = min(max(rng.random_sample(), 1e-9), 1.0 - 1e-9)
        g = lo + (hi - lo) * u
        mutant = TraitSpec(
            id=fresh_trait_id(space),
            b=g + self.d_value,
            d=self.d_value,
            mu=space.traits[source_rank].mu * self.mu_factor,
        )
        return mutant, slot


_LAWS = {
    "always_fitter": AlwaysFitter,
    "uniform_rank": UniformRank,
}


def make_law(name: str, **params):
    """Instantiate a built-in law by name (scenario-file plumbing)."""
    try:
        cls = _LAWS[name]
    except KeyError:
        raise ValueError(
            f"unknown mutation law {name!r}; known: {sorted(_LAWS)}"
        ) from None
    return cls(**params)
