"""Stable configurations and the substitution-tree jump process.

The heart of this module is an independent oracle for the insertion
casework: the configuration after a mutant lands is computed literally,
branch by branch (mutant directly above an occupied trait, directly below
one, above the whole chain, below the whole chain), and compared against
the package's parity-rule equilibrium for every insertion position on
chains up to length 12.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tstree import (
    Configuration,
    KernelSpec,
    OrderedTraitSpace,
    TraitSpec,
    TstState,
    equilibrium_configuration,
    occupied_ranks,
    sample_tst_path,
    state_at,
    tst_insert,
    tst_jump_rates,
)
from tstree.mutation import AlwaysFitter

from conftest import make_chain


# ------------------------------------------------------------- parity rule

class TestOccupiedRanks:
    @pytest.mark.parametrize(
        "n,expected",
        [
            (1, [0]),
            (2, [1]),
            (3, [0, 2]),
            (4, [1, 3]),
            (5, [0, 2, 4]),
            (6, [1, 3, 5]),
            (7, [0, 2, 4, 6]),
        ],
    )
    def test_frozen_examples(self, n, expected):
        assert occupied_ranks(n) == expected

    @pytest.mark.parametrize("n", range(1, 30))
    def test_count_and_anchoring(self, n):
        ranks = occupied_ranks(n)
        assert len(ranks) == (n + 1) // 2
        assert ranks[-1] == n - 1  # the top is always occupied
        assert all(r2 - r1 == 2 for r1, r2 in zip(ranks, ranks[1:]))


class TestEquilibriumConfiguration:
    def test_three_trait_chain(self, chain3):
        cfg = equilibrium_configuration(chain3)
        assert cfg.mass("x0") == 3.0
        assert cfg.mass("x1") == 0.0
        assert cfg.mass("x2") == 8.0
        assert cfg.support == {"x0", "x2"}

    def test_four_trait_chain(self, chain4):
        cfg = equilibrium_configuration(chain4)
        assert cfg.support == {"x1", "x3"}
        assert cfg.mass("x1") == 6.0
        assert cfg.mass("x3") == 10.0

    def test_rejects_invalid_order(self, kernel):
        bad = OrderedTraitSpace(
            [TraitSpec("a", b=6.0), TraitSpec("b", b=3.0)], kernel
        )
        with pytest.raises(ValueError):
            equilibrium_configuration(bad)


class TestConfiguration:
    def test_vector_and_total(self, chain3):
        cfg = equilibrium_configuration(chain3)
        np.testing.assert_array_equal(cfg.as_vector(chain3), [3.0, 0.0, 8.0])
        assert cfg.total_mass() == 11.0

    def test_tv_distance(self):
        # variation norm of the difference measure: configurations are
        # unnormalized, so there is no probability-style 1/2 factor
        a = Configuration({"x": 3.0, "y": 8.0})
        b = Configuration({"x": 3.0, "z": 8.0})
        assert a.tv_distance(b) == pytest.approx(16.0)
        assert a.tv_distance(a) == 0.0

    def test_equality_ignores_zero_atoms(self):
        assert Configuration({"x": 3.0, "y": 0.0}) == Configuration({"x": 3.0})

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            Configuration({"x": -1.0})


# -------------------------------------------- literal insertion-branch oracle

def _literal_branch_masses(space, enlarged, pos):
    """Post-insertion configuration computed case by case, not by the rule.

    ``space`` is the pre-insertion chain (old ranks 0..n-1, occupied at the
    top's parity); ``enlarged`` has the mutant spliced at ``pos``.  Returns
    {trait_id: mass} built from the literal branches.  In every branch the
    traits at or above ``pos`` shift one rank up, so an occupied trait
    there stays on the new top's parity; below ``pos`` nothing shifts, so
    occupancy flips to the *opposite* of the old pattern (physically: the
    mutant severs the adjacency between its two neighbors, freeing the
    trait just below it, and the flip cascades to the bottom).

    even-top chain (old occupied = even ranks):
      * pos odd (mutant directly above an occupied rank): old odd ranks
        below pos become occupied, the mutant establishes, old even ranks
        above pos stay occupied;
      * pos even (mutant directly below an occupied rank, or below the
        whole chain): the mutant is suppressed; old odd ranks below pos
        become occupied, old even ranks at/above pos stay occupied.

    odd-top chain (old occupied = odd ranks):
      * pos even, pos >= 2 (mutant directly above an occupied rank): old
        even ranks below pos become occupied, the mutant establishes, old
        odd ranks above pos stay occupied;
      * pos odd (mutant directly below an occupied rank): the mutant is
        suppressed; old even ranks below pos become occupied, old odd
        ranks at/above pos stay occupied;
      * pos = 0 (below the whole chain): not covered by the definition's
        window list; by the look-down construction the mutant sits two
        ranks below the nearest occupied trait, feels no adjacent
        competition, and establishes; everything else is unchanged.
    """
    n = len(space)
    even_top = (n - 1) % 2 == 0
    mutant_id = enlarged.traits[pos].id

    if even_top:
        below_parity, above_parity = 1, 0
        establishes = pos % 2 == 1
    elif pos == 0:
        below_parity, above_parity = None, 1  # nothing below; odds keep
        establishes = True
    else:
        below_parity, above_parity = 0, 1
        establishes = pos % 2 == 0

    survivors = [
        r for r in range(n)
        if (r < pos and below_parity is not None and r % 2 == below_parity)
        or (r >= pos and r % 2 == above_parity)
    ]

    masses = {space.traits[r].id: space.n_bar(r) for r in survivors}
    if establishes:
        masses[mutant_id] = enlarged.n_bar(pos)
    return masses


def _mutant_for_slot(space, pos, widen):
    """A trait whose net growth keeps the enlarged chain order-valid at pos."""
    if pos == 0:
        g = space.traits[0].growth / widen / 2.0
    elif pos == len(space):
        g = space.traits[-1].growth * widen * 1.5
    else:
        lo = space.traits[pos - 1].growth * widen
        hi = space.traits[pos].growth / widen
        assert lo < hi, "chain gaps too narrow for an interior mutant"
        g = math.sqrt(lo * hi)
    return TraitSpec(id="mutant", b=g)


@pytest.mark.parametrize("kappa", [1.0, 0.5])
@pytest.mark.parametrize("n", range(1, 13))
def test_insertion_branches_match_parity_rule(n, kappa):
    # exhaustive over insertion positions for chains up to length 12
    kernel = KernelSpec(alpha_self=1.0, alpha_neighbor=kappa, m_neighbor=0.5)
    widen = max(kappa, 1.0 / kappa)
    factor = widen * widen * 1.7 + 0.3  # growth gap wide enough for interior slots
    growths = [2.0 * factor**i for i in range(n)]
    space = OrderedTraitSpace(
        [TraitSpec(f"t{i}", b=g) for i, g in enumerate(growths)], kernel
    ).require_valid()

    for pos in range(n + 1):
        mutant = _mutant_for_slot(space, pos, widen)
        enlarged = space.insert(pos, mutant).require_valid()
        rule = equilibrium_configuration(enlarged)
        literal = _literal_branch_masses(space, enlarged, pos)
        assert {k: v for k, v in ((t.id, rule.mass(t.id)) for t in enlarged.traits) if v > 0} == literal, (
            f"n={n} pos={pos}: parity rule disagrees with the literal branch"
        )


def test_below_bottom_insertion_establishes_on_odd_top_chain():
    # the exact uncovered-window case, spelled out: four traits (odd top,
    # occupied {x1, x3}), mutant below x0 -> new even ranks {0, 2, 4}
    space = make_chain((3.0, 6.0, 8.0, 10.0))
    mutant = TraitSpec("m", b=1.0)
    enlarged = space.insert(0, mutant).require_valid()
    cfg = equilibrium_configuration(enlarged)
    assert cfg.support == {"m", "x1", "x3"}
    assert cfg.mass("m") == 1.0


# ------------------------------------------------------------------ TstState

class TestTstState:
    def test_initial(self, chain3):
        s = TstState.initial(chain3)
        assert s.chain_size == 3
        assert s.occupied_count == 2
        assert s.time == 0.0
        assert s.config.support == {"x0", "x2"}

    def test_insert_reequilibrates(self, chain3):
        s = TstState.initial(chain3)
        # mutant between x1 and x2: chain (3, 6, 7, 8) -> occupied {x1, x2}
        s2 = tst_insert(s, source_rank=2, mutant=TraitSpec("m", b=7.0), mutant_rank=2)
        assert s2.space.ids == ("x0", "x1", "m", "x2")
        assert s2.config.support == {"x1", "x2"}
        assert s2.config.mass("x1") == 6.0
        assert s2.config.mass("x2") == 8.0
        assert s2.time == s.time

    def test_insert_rejects_unoccupied_source(self, chain3):
        s = TstState.initial(chain3)
        with pytest.raises(ValueError, match="unoccupied"):
            tst_insert(s, source_rank=1, mutant=TraitSpec("m", b=20.0), mutant_rank=3)

    def test_insert_rejects_order_breaking_rank(self, chain3):
        s = TstState.initial(chain3)
        # b = 7 declared between x0 and x1 breaks the declared order
        with pytest.raises(ValueError):
            tst_insert(s, source_rank=0, mutant=TraitSpec("m", b=7.0), mutant_rank=1)

    def test_insert_rejects_bad_source_rank(self, chain3):
        s = TstState.initial(chain3)
        with pytest.raises(ValueError):
            tst_insert(s, source_rank=5, mutant=TraitSpec("m", b=20.0), mutant_rank=3)


# ---------------------------------------------------------------- jump rates

class TestJumpRates:
    def test_canonical_rates(self):
        # occupied {x0: 3, x2: 8} with mu = 1 everywhere: rates 3 and 8
        space = make_chain((3.0, 6.0, 8.0), mu=1.0)
        rates = tst_jump_rates(TstState.initial(space))
        assert rates == {0: 3.0, 2: 8.0}
        assert sum(rates.values()) == 11.0

    def test_zero_mu_traits_excluded(self):
        space = make_chain((3.0, 6.0, 8.0), mu=[1.0, 1.0, 0.0])
        rates = tst_jump_rates(TstState.initial(space))
        assert rates == {0: 3.0}

    def test_all_immutable_is_absorbing(self, chain3):
        assert tst_jump_rates(TstState.initial(chain3)) == {}


# ------------------------------------------------------------- path sampling

class TestSampleTstPath:
    def test_absorbing_state_yields_single_state(self, chain3):
        law = AlwaysFitter()
        path = sample_tst_path(TstState.initial(chain3), 10.0, law, seed=1)
        assert len(path) == 1

    def test_first_jump_time_mean(self):
        # occupied {x0: 3, x2: 8} with mu = 1 on both: total rate 11,
        # mean waiting time 1/11; x1 is immutable so one jump lands the
        # path in an absorbing state (occupied = {x1, mutant}, both mu 0)
        space = make_chain((3.0, 6.0, 8.0), mu=[1.0, 0.0, 1.0])
        initial = TstState.initial(space)
        law = AlwaysFitter(mu_factor=0.0)
        n = 10_000
        waits = np.empty(n)
        for r in range(n):
            path = sample_tst_path(initial, 100.0, law, seed=r)
            assert len(path) == 2
            waits[r] = path[1].time
        mean = waits.mean()
        se = waits.std(ddof=1) / math.sqrt(n)
        assert abs(mean - 1.0 / 11.0) <= 3.0 * se
        # exponential law: sd equals the mean
        assert abs(waits.std(ddof=1) - 1.0 / 11.0) <= 5.0 * se

    def test_source_chosen_proportionally_to_rate(self):
        # P(source = x2) = 8/11 at the canonical start
        space = make_chain((3.0, 6.0, 8.0), mu=[1.0, 0.0, 1.0])
        initial = TstState.initial(space)
        picked = []

        class RecordingLaw:
            def __call__(self, rng, sp, source_rank):
                picked.append(sp.traits[source_rank].id)
                return AlwaysFitter(mu_factor=0.0)(rng, sp, source_rank)

        law = RecordingLaw()
        n = 10_000
        for r in range(n):
            sample_tst_path(initial, 100.0, law, seed=r)
        assert len(picked) == n  # exactly one jump per path
        freq = picked.count("x2") / n
        p = 8.0 / 11.0
        assert abs(freq - p) <= 3.0 * math.sqrt(p * (1 - p) / n)

    def test_jump_times_increase_and_respect_horizon(self):
        space = make_chain((3.0, 6.0, 8.0), mu=1.0)
        path = sample_tst_path(
            TstState.initial(space), 0.8, AlwaysFitter(mu_factor=0.5), seed=42
        )
        times = [s.time for s in path]
        assert times == sorted(times)
        assert all(t <= 0.8 for t in times)

    def test_max_jumps_guard(self):
        space = make_chain((3.0, 6.0, 8.0), mu=1.0)
        with pytest.raises(RuntimeError, match="jumps"):
            sample_tst_path(
                TstState.initial(space), 50.0, AlwaysFitter(), seed=0, max_jumps=5
            )

    def test_reproducible_by_seed(self):
        space = make_chain((3.0, 6.0, 8.0), mu=1.0)
        law = AlwaysFitter(mu_factor=0.5)
        p1 = sample_tst_path(TstState.initial(space), 0.5, law, seed=7)
        p2 = sample_tst_path(TstState.initial(space), 0.5, law, seed=7)
        assert [s.time for s in p1] == [s.time for s in p2]
        assert [s.space.ids for s in p1] == [s.space.ids for s in p2]


def test_always_fitter_occupied_count_walk():
    # after j insertions the chain has j+1 traits and floor((j+2)/2)
    # occupied atoms; the law is deterministic so no sampling is needed
    space = make_chain((3.0,), mu=1.0)
    state = TstState.initial(space)
    law = AlwaysFitter(b_increment=2.0)
    rng = np.random.RandomState(0)
    for j in range(1, 41):
        source = max(r for r, _ in tst_jump_rates(state).items())
        mutant, rank = law(rng, state.space, source)
        state = tst_insert(state, source, mutant, rank)
        assert state.chain_size == j + 1
        assert state.occupied_count == (j + 2) // 2
        # masses follow the parity rule on the grown chain
        expected = {
            state.space.traits[r].id: state.space.n_bar(r)
            for r in occupied_ranks(j + 1)
        }
        assert {
            t.id: state.config.mass(t.id)
            for t in state.space.traits
            if state.config.mass(t.id) > 0
        } == expected


def test_state_at_is_right_continuous():
    space = make_chain((3.0, 6.0, 8.0), mu=1.0)
    path = sample_tst_path(
        TstState.initial(space), 2.0, AlwaysFitter(mu_factor=0.3), seed=3
    )
    assert len(path) >= 2
    t1 = path[1].time
    assert state_at(path, t1) is path[1]
    assert state_at(path, t1 - 1e-12) is path[0]
    assert state_at(path, 0.0) is path[0]


# ------------------------------------------ randomized parity cross-check

@given(
    data=st.data(),
    n=st.integers(min_value=1, max_value=12),
)
@settings(max_examples=40, deadline=None)
def test_random_insertion_position_respects_parity(data, n):
    factor = 2.0
    growths = [1.5 * factor**i for i in range(n)]
    kernel = KernelSpec(alpha_self=1.0, alpha_neighbor=1.0)
    space = OrderedTraitSpace(
        [TraitSpec(f"t{i}", b=g) for i, g in enumerate(growths)], kernel
    )
    pos = data.draw(st.integers(min_value=0, max_value=n))
    mutant = _mutant_for_slot(space, pos, 1.0)
    enlarged = space.insert(pos, mutant).require_valid()
    cfg = equilibrium_configuration(enlarged)
    occ = [r for r in range(n + 1) if cfg.mass(enlarged.traits[r].id) > 0]
    assert occ == occupied_ranks(n + 1)
