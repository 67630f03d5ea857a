"""Individual-based stochastic simulation of competing trait populations.

The population is a point measure on an ordered trait chain: ``K`` scales
both the initial number of individuals and the pairwise competition
pressure, so recorded *masses* (count / K) are O(1).  Events are simulated
exactly, one jump at a time:

* birth of a clonal copy, rate ``b(x) * N_x``
* death, rate ``(d(x) + sum_y alpha(x,y) N_y / K) * N_x``
* migration to an adjacent rank, rate ``eps * m(x,y) * N_x`` per edge
* mutation, rate ``sigma * mu(x) * N_x`` (the mutant trait and its rank
  come from the scenario's mutation law)

Two migration modes are supported: ``all_neighbors`` keeps every allowed
edge active, ``occupied_only`` lets an individual move only onto a rank
that currently carries at least one individual.

:func:`run` drives the compiled loop from :mod:`tstree._engine` segment by
segment (a segment ends at a mutation, which changes the trait chain);
:func:`run_reference` is the same wrapper bound to the pure-Python twin
and replays the identical random stream.  :func:`step` advances a single
event and exists mainly for tests and small demonstrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ._engine import segment_compiled, segment_reference
from .traitspace import OrderedTraitSpace, TraitSpec

__all__ = [
    "Scenario",
    "SimState",
    "EventRates",
    "EventRecord",
    "MutationRecord",
    "RunResult",
    "compute_rates",
    "step",
    "run",
    "run_reference",
]

MutationLaw = Callable[[np.random.RandomState, OrderedTraitSpace, int], tuple[TraitSpec, int]]

_MODES = ("all_neighbors", "occupied_only")

# Hard cap on chain growth within one run; hitting it means the mutation
# law keeps producing viable mutants faster than the run can absorb them.
_MAX_SEGMENTS = 4096


@dataclass(frozen=True)
class Scenario:
    """Complete, immutable description of one simulation setup.

    ``migration_edges`` narrows migration to an explicit set of directed
    trait-id pairs (both endpoints must be rank-adjacent when a segment
    starts).  ``None`` keeps every adjacent edge active in both
    directions, including edges to traits created by later mutations;
    an explicit edge list applies only to the traits it names, so
    mutants get no migration under it.
    """

    space: OrderedTraitSpace
    K: int
    epsilon: float = 0.0
    sigma: float = 0.0
    mode: str = "all_neighbors"
    initial: Mapping[str, int] | None = None
    horizon: float = 0.0
    mutation_law: MutationLaw | None = None
    migration_edges: tuple[tuple[str, str], ...] | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.K, (int, np.integer)) or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.initial is not None:
            for tid, cnt in self.initial.items():
                self.space.rank_of(tid)  # raises on unknown ids
                if int(cnt) != cnt or cnt < 0:
                    raise ValueError(f"initial count for {tid!r} must be a nonnegative integer")
        if self.migration_edges is not None:
            for src, dst in self.migration_edges:
                if abs(self.space.rank_of(src) - self.space.rank_of(dst)) != 1:
                    raise ValueError(f"migration edge ({src!r}, {dst!r}) is not rank-adjacent")
        if self.sigma > 0 and self.mutation_law is None:
            if any(t.mu > 0 for t in self.space.traits):
                raise ValueError("sigma > 0 with mutable traits requires a mutation_law")

    def initial_state(self) -> "SimState":
        counts = np.zeros(len(self.space), dtype=np.int64)
        if self.initial is not None:
            for tid, cnt in self.initial.items():
                counts[self.space.rank_of(tid)] = int(cnt)
        return SimState(space=self.space, counts=counts, time=0.0)

    def with_overrides(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class SimState:
    """Point state of the microscopic process: counts per rank at a time."""

    space: OrderedTraitSpace
    counts: np.ndarray  # int64, aligned with space ranks
    time: float = 0.0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.space),):
            raise ValueError("counts must have one entry per trait in the chain")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    def as_dict(self) -> dict[str, int]:
        return {t.id: int(c) for t, c in zip(self.space.traits, self.counts)}

    def masses(self, K: int) -> np.ndarray:
        return self.counts / float(K)

    def total(self) -> int:
        return int(self.counts.sum())


def _edge_masks(scenario: Scenario, space: OrderedTraitSpace) -> tuple[np.ndarray, np.ndarray]:
    n = len(space)
    if scenario.migration_edges is None:
        allow_down = np.ones(n, dtype=np.bool_)
        allow_up = np.ones(n, dtype=np.bool_)
        allow_down[0] = False
        if n > 0:
            allow_up[n - 1] = False
        return allow_down, allow_up
    allow_down = np.zeros(n, dtype=np.bool_)
    allow_up = np.zeros(n, dtype=np.bool_)
    for src, dst in scenario.migration_edges:
        try:
            rs, rd = space.rank_of(src), space.rank_of(dst)
        except KeyError:
            continue  # edge endpoints that left/never joined this chain
        if rd == rs - 1:
            allow_down[rs] = True
        elif rd == rs + 1:
            allow_up[rs] = True
    return allow_down, allow_up


@dataclass(frozen=True)
class EventRates:
    """Per-rank jump rates, split by event category.

    ``total`` is accumulated rank by rank in the fixed category order
    (birth, death, migration down, migration up, mutation per rank), the
    same order the event loop uses, so categorical selection against it
    reproduces the loop's choices exactly.
    """

    birth: np.ndarray
    death: np.ndarray
    migration_down: np.ndarray
    migration_up: np.ndarray
    mutation: np.ndarray
    total: float

    def concatenated(self) -> np.ndarray:
        """All categories in documented scan order: blocks of each kind by rank."""
        return np.concatenate(
            [self.birth, self.death, self.migration_down, self.migration_up, self.mutation]
        )

    def mean_drift(self, K: int) -> np.ndarray:
        """Expected instantaneous change of the mass vector, d<xi>/dt.

        Mutation rates are excluded: a mutation adds mass at a rank that
        does not exist yet, so it contributes nothing to the drift of the
        current coordinates.
        """
        n = self.birth.shape[0]
        inflow = np.zeros(n)
        inflow[:-1] += self.migration_down[1:]
        inflow[1:] += self.migration_up[:-1]
        return (self.birth - self.death - self.migration_down - self.migration_up + inflow) / K


def compute_rates(state: SimState, scenario: Scenario) -> EventRates:
    """Exact jump rates of every event category at the given state.

    Mirrors the arithmetic of the compiled event loop (same expressions,
    same accumulation order for ``total``).
    """
    space = state.space
    n = len(space)
    counts = state.counts
    kern = space.kernel
    alpha_self = kern.alpha_self
    alpha_nb = kern.alpha_neighbor
    m_nb = kern.m_neighbor
    K = float(scenario.K)
    eps = scenario.epsilon
    sigma = scenario.sigma
    occupied_only = scenario.mode == "occupied_only"
    allow_down, allow_up = _edge_masks(scenario, space)

    birth = np.zeros(n)
    death = np.zeros(n)
    mig_down = np.zeros(n)
    mig_up = np.zeros(n)
    mutation = np.zeros(n)
    total = 0.0
    for i in range(n):
        t = space.traits[i]
        rb = t.b * counts[i]
        comp = alpha_self * counts[i]
        if i > 0:
            comp = comp + alpha_nb * counts[i - 1]
        if i < n - 1:
            comp = comp + alpha_nb * counts[i + 1]
        rd = (t.d + comp / K) * counts[i]
        rmd = 0.0
        if i > 0 and allow_down[i]:
            if (not occupied_only) or counts[i - 1] > 0:
                rmd = eps * m_nb * counts[i]
        rmu = 0.0
        if i < n - 1 and allow_up[i]:
            if (not occupied_only) or counts[i + 1] > 0:
                rmu = eps * m_nb * counts[i]
        rmt = sigma * t.mu * counts[i]
        birth[i] = rb
        death[i] = rd
        mig_down[i] = rmd
        mig_up[i] = rmu
        mutation[i] = rmt
        total += rb
        total += rd
        total += rmd
        total += rmu
        total += rmt

    return EventRates(
        birth=birth,
        death=death,
        migration_down=mig_down,
        migration_up=mig_up,
        mutation=mutation,
        total=total,
    )


@dataclass(frozen=True)
class EventRecord:
    """What happened in one jump: kind, where, and the waiting time used."""

    time: float
    dt: float
    kind: str  # birth | death | migration_down | migration_up | mutation
    rank: int
    trait_id: str
    mutant: TraitSpec | None = None
    mutant_rank: int | None = None


_KIND_NAMES = ("birth", "death", "migration_down", "migration_up", "mutation")


def step(
    state: SimState, scenario: Scenario, rng: np.random.RandomState
) -> tuple[SimState, EventRecord]:
    """Advance exactly one event, drawing two uniforms from ``rng``.

    The first uniform sets the exponential waiting time, the second picks
    the category by scanning the concatenated rate blocks.  Raises
    ``RuntimeError`` on an absorbed state (total rate zero), since no
    event can ever fire.
    """
    rates = compute_rates(state, scenario)
    if rates.total <= 0.0:
        raise RuntimeError("total jump rate is zero; the state is absorbed")
    u1 = rng.random_sample()
    dt = -np.log(u1) / rates.total
    u2 = rng.random_sample() * rates.total

    flat = rates.concatenated()
    acc = 0.0
    sel = -1
    for k in range(flat.shape[0]):
        acc += flat[k]
        if u2 < acc:
            sel = k
            break
    if sel < 0:
        positive = np.nonzero(flat > 0.0)[0]
        sel = int(positive[-1])

    n = len(state.space)
    kind = sel // n
    i = sel - kind * n
    t_new = state.time + dt
    counts = state.counts.copy()
    space = state.space
    mutant = None
    mutant_rank = None

    if kind == 0:
        counts[i] += 1
    elif kind == 1:
        counts[i] -= 1
    elif kind == 2:
        counts[i] -= 1
        counts[i - 1] += 1
    elif kind == 3:
        counts[i] -= 1
        counts[i + 1] += 1
    else:
        if scenario.mutation_law is None:
            raise RuntimeError("mutation event drawn but scenario has no mutation_law")
        mutant, mutant_rank = scenario.mutation_law(rng, space, i)
        space = space.insert(mutant_rank, mutant)
        space.require_valid()
        counts = np.insert(counts, mutant_rank, 1)

    record = EventRecord(
        time=t_new,
        dt=dt,
        kind=_KIND_NAMES[kind],
        rank=i,
        trait_id=state.space.traits[i].id,
        mutant=mutant,
        mutant_rank=mutant_rank,
    )
    return SimState(space=space, counts=counts, time=t_new), record


@dataclass(frozen=True)
class MutationRecord:
    time: float
    source_id: str
    trait: TraitSpec
    rank: int


@dataclass
class RunResult:
    """Everything one simulation run produced.

    ``grid_mass`` has one row per *filled* grid time and one column per
    trait in ``space`` (traits born later have zero mass before their
    mutation time).  ``probe_times`` aligns with the probes passed to
    :func:`run`; unfilled probes are NaN.
    """

    scenario: Scenario
    status: str
    final_time: float
    space: OrderedTraitSpace
    counts: np.ndarray
    event_counts: dict[str, int]
    mutations: tuple[MutationRecord, ...]
    seed: int
    grid_times: np.ndarray | None = None
    grid_mass: np.ndarray | None = None
    probe_times: np.ndarray | None = None

    def final_masses(self) -> dict[str, float]:
        K = float(self.scenario.K)
        return {t.id: c / K for t, c in zip(self.space.traits, self.counts)}

    def mass_series(self, trait_id: str) -> np.ndarray:
        if self.grid_mass is None:
            raise ValueError("run() was called without a sampling grid")
        return self.grid_mass[:, self.space.rank_of(trait_id)]

    def total_events(self) -> int:
        return sum(self.event_counts.values())


def _normalize_probes(probes: Sequence, scenario: Scenario):
    """Extract (trait, up?, threshold, after) from probe objects.

    Probe objects just need ``trait``, ``level``, ``direction`` ("up" or
    "down"), and optionally ``after`` (index of a prerequisite probe in
    the same sequence, which must come earlier).  Thresholds are in
    counts: upward probes fill when the count first reaches
    ``max(1, ceil(level*K))``, downward ones when it first drops to
    ``floor(level*K)``.
    """
    K = scenario.K
    out = []
    for idx, p in enumerate(probes):
        direction = getattr(p, "direction")
        if direction not in ("up", "down"):
            raise ValueError(f"probe direction must be 'up' or 'down', got {direction!r}")
        up = direction == "up"
        level = float(getattr(p, "level"))
        if level < 0:
            raise ValueError("probe level must be nonnegative")
        if up:
            thresh = max(1, math.ceil(level * K - 1e-9))
        else:
            thresh = math.floor(level * K + 1e-9)
        after = getattr(p, "after", None)
        if after is not None:
            after = int(after)
            if not 0 <= after < idx:
                raise ValueError(
                    "probe 'after' must reference an earlier probe in the same list"
                )
        out.append((str(getattr(p, "trait")), up, thresh, -1 if after is None else after))
    return out


def _eval_probes_now(norm, probe_time, space, counts, t):
    """Fill any probe whose condition already holds at an exact time t.

    Used at run start and right after a mutation splice; the event loop
    handles everything in between.  Probes are scanned in order, so a
    prerequisite listed earlier can fill in the same pass.
    """
    for idx, (tid, up, thresh, after) in enumerate(norm):
        if not np.isnan(probe_time[idx]):
            continue
        try:
            rank = space.rank_of(tid)
        except KeyError:
            continue
        if after >= 0 and np.isnan(probe_time[after]):
            continue
        if up:
            if counts[rank] >= thresh:
                probe_time[idx] = t
        else:
            if counts[rank] <= thresh:
                probe_time[idx] = t


def run(
    scenario: Scenario,
    *,
    grid: int | Sequence[float] | None = None,
    probes: Sequence = (),
    stop_after_mutations: int | None = None,
    stop_when_probes_filled: bool = False,
    max_events: int | None = None,
    _segment_fn=segment_compiled,
) -> RunResult:
    """Simulate one full trajectory of the scenario.

    ``grid`` requests mass snapshots: an int means that many evenly
    spaced times over ``[0, horizon]``, a sequence is used as-is (must be
    nondecreasing, within the horizon).  Snapshots are right-continuous:
    a grid time coinciding with an event reports the post-event state.

    ``probes`` are first-hitting detectors evaluated after every event
    (see :func:`_normalize_probes` for the object contract).  With
    ``stop_when_probes_filled`` the run ends as soon as every probe has
    fired, which can save most of the work in hitting-time studies.

    ``stop_after_mutations=k`` ends the run right after the k-th
    mutation has been spliced into the chain.

    Reproducibility: a root seed sequence derived from ``scenario.seed``
    yields one sub-stream for the event loop (reseeded per segment) and
    an independent stream for mutation-law draws.  Rerunning the same
    scenario reproduces the trajectory bit for bit; :func:`run_reference`
    replays it in pure Python.
    """
    horizon = float(scenario.horizon)
    if stop_after_mutations is not None and stop_after_mutations < 1:
        raise ValueError("stop_after_mutations must be at least 1")
    state = scenario.initial_state()
    space = state.space
    counts = state.counts.copy()

    root = np.random.SeedSequence(scenario.seed)
    kernel_ss, law_ss = root.spawn(2)
    seg_seeds = kernel_ss.generate_state(_MAX_SEGMENTS, np.uint32)
    law_rng = np.random.RandomState(law_ss.generate_state(8, np.uint32))

    if grid is None:
        grid_times = np.empty(0, dtype=np.float64)
    elif isinstance(grid, (int, np.integer)):
        grid_times = np.linspace(0.0, horizon, int(grid))
    else:
        grid_times = np.asarray(grid, dtype=np.float64)
        if grid_times.ndim != 1 or (np.diff(grid_times) < 0).any():
            raise ValueError("grid must be a nondecreasing 1-d sequence of times")
        if grid_times.size and (grid_times[0] < 0 or grid_times[-1] > horizon):
            raise ValueError("grid times must lie within [0, horizon]")
    G = grid_times.shape[0]

    norm = _normalize_probes(probes, scenario)
    P = len(norm)
    probe_time = np.full(P, np.nan)

    counters = np.zeros(4, dtype=np.int64)
    budget = (1 << 62) if max_events is None else int(max_events)

    _eval_probes_now(norm, probe_time, space, counts, 0.0)

    mutations: list[MutationRecord] = []
    blocks: list[tuple[int, int, tuple[str, ...], np.ndarray]] = []
    t = 0.0
    gp = 0
    status = "horizon"

    if (stop_when_probes_filled and P > 0 and not np.isnan(probe_time).any()) or horizon == 0.0:
        # nothing to simulate: snapshot any grid times at t = 0 and stop
        if G:
            block = np.zeros((G, len(space)))
            while gp < G and grid_times[gp] <= 0.0:
                block[gp] = counts / float(scenario.K)
                gp += 1
            blocks.append((0, gp, space.ids, block))
        filled_all = P > 0 and not np.isnan(probe_time).any()
        status = "probes_filled" if (stop_when_probes_filled and filled_all) else "horizon"
    else:
        seg = 0
        while True:
            if seg >= _MAX_SEGMENTS:
                raise RuntimeError(
                    f"chain changed {_MAX_SEGMENTS} times in one run; "
                    "the mutation law is likely runaway"
                )
            if budget - int(counters.sum()) <= 0:
                status = "max_events"
                break
            n = len(space)
            b = np.array([tr.b for tr in space.traits])
            d = np.array([tr.d for tr in space.traits])
            mu = np.array([tr.mu for tr in space.traits])
            allow_down, allow_up = _edge_masks(scenario, space)
            p_rank = np.empty(P, dtype=np.int64)
            for idx, (tid, _, _, _) in enumerate(norm):
                try:
                    p_rank[idx] = space.rank_of(tid)
                except KeyError:
                    p_rank[idx] = -1
            p_up = np.array([u for (_, u, _, _) in norm], dtype=np.bool_)
            p_thresh = np.array([th for (_, _, th, _) in norm], dtype=np.int64)
            p_after = np.array([a for (_, _, _, a) in norm], dtype=np.int64)
            block = np.zeros((G, n))
            gp_start = gp

            t, st, src, gp, ev = _segment_fn(
                int(seg_seeds[seg]),
                t,
                horizon,
                counts,
                b,
                d,
                mu,
                space.kernel.alpha_self,
                space.kernel.alpha_neighbor,
                space.kernel.m_neighbor,
                float(scenario.K),
                scenario.epsilon,
                scenario.sigma,
                scenario.mode == "occupied_only",
                allow_down,
                allow_up,
                grid_times,
                block,
                gp,
                p_rank,
                p_up,
                p_thresh,
                p_after,
                probe_time,
                counters,
                budget - int(counters.sum()),
                bool(stop_when_probes_filled),
            )
            blocks.append((gp_start, gp, space.ids, block))

            if st == 1:
                src_id = space.traits[src].id
                if scenario.mutation_law is None:
                    raise RuntimeError("mutation event drawn but scenario has no mutation_law")
                mutant, rank = scenario.mutation_law(law_rng, space, src)
                space = space.insert(rank, mutant)
                space.require_valid()
                counts = np.insert(counts, rank, 1)
                mutations.append(MutationRecord(time=t, source_id=src_id, trait=mutant, rank=rank))
                _eval_probes_now(norm, probe_time, space, counts, t)
                if stop_when_probes_filled and P > 0 and not np.isnan(probe_time).any():
                    status = "probes_filled"
                    break
                if stop_after_mutations is not None and len(mutations) >= stop_after_mutations:
                    status = "mutation_stop"
                    break
                seg += 1
                continue

            status = {0: "horizon", 2: "absorbed", 3: "max_events", 4: "probes_filled"}[st]
            break

    # assemble the grid across segments, mapping each block's columns
    # into the final chain (trait ids are stable across splices)
    grid_times_out: np.ndarray | None = None
    grid_mass_out: np.ndarray | None = None
    if G:
        final_index = {tid: space.rank_of(tid) for tid in space.ids}
        full = np.zeros((gp, len(space)))
        for s, e, ids, block in blocks:
            hi = min(e, gp)
            if hi <= s:
                continue
            for j, tid in enumerate(ids):
                full[s:hi, final_index[tid]] = block[s:hi, j]
        grid_times_out = grid_times[:gp].copy()
        grid_mass_out = full

    return RunResult(
        scenario=scenario,
        status=status,
        final_time=t,
        space=space,
        counts=counts,
        event_counts={
            "births": int(counters[0]),
            "deaths": int(counters[1]),
            "migrations": int(counters[2]),
            "mutations": int(counters[3]),
        },
        mutations=tuple(mutations),
        seed=scenario.seed,
        grid_times=grid_times_out,
        grid_mass=grid_mass_out,
        probe_times=probe_time if P else None,
    )


def run_reference(scenario: Scenario, **kwargs) -> RunResult:
    """Pure-Python twin of :func:`run`; same stream, same results, slow."""
    return run(scenario, _segment_fn=segment_reference, **kwargs)
