"""Hitting-time estimation, time-scale regression, and cross-model comparison.

This module connects the three dynamical layers:

* first-crossing *probes* measure invasion/recovery times on stochastic
  or deterministic trajectories;
* *ensembles* aggregate probe times over replicas with censoring
  bookkeeping;
* *timescale_fit* regresses mean hitting times against ln(1/eps) to
  compare with the predicted slow-scale slopes;
* *compare_micro_to_tst* observes the microscopic process on the
  mutation time scale and tests its configuration statistics against
  the jump-process limit;
* *first_mutation_statistics* checks the exponential law of the first
  mutation time.

Censored probes (never crossed before the run ended) are excluded from
means and reported separately — the censoring fraction is itself a
useful convergence diagnostic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as _stats

from .equilibria import TstState, sample_tst_path, state_at
from .microsim import RunResult, Scenario, run
from .traitspace import OrderedTraitSpace

__all__ = [
    "HittingProbe",
    "probe_label",
    "default_eta",
    "attach_probes",
    "EnsembleSummary",
    "run_ensemble",
    "TimescaleFit",
    "timescale_fit",
    "FirstMutationStats",
    "first_mutation_statistics",
    "DivergenceReport",
    "compare_micro_to_tst",
]


@dataclass(frozen=True)
class HittingProbe:
    """First-crossing detector for one trait's mass.

    ``direction`` "up" fills at the first time the mass reaches
    ``level`` from below (in counts: ``max(1, ceil(level*K))``), "down"
    at the first time it drops to ``level`` (counts: ``floor(level*K)``).
    ``after`` chains probes: the index of an earlier probe in the same
    list that must fill first — this is how "recover to eta *after*
    having dipped" is expressed.
    """

    trait: str
    level: float
    direction: str  # "up" | "down"
    after: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise ValueError(f"direction must be 'up' or 'down', got {self.direction!r}")
        if self.level < 0:
            raise ValueError("level must be nonnegative")


def probe_label(p: HittingProbe, idx: int | None = None) -> str:
    if getattr(p, "label", ""):
        return p.label
    base = f"{p.trait}:{p.direction}@{p.level:g}"
    if getattr(p, "after", None) is not None:
        base += f"|after{p.after}"
    return base


def default_eta(space: OrderedTraitSpace) -> float:
    """Macroscopic threshold used when none is given: 0.1 * min equilibrium mass."""
    return 0.1 * min(space.n_bar(r) for r in range(len(space)))


def attach_probes(
    times: np.ndarray,
    masses: np.ndarray,
    space,
    probes: Sequence[HittingProbe],
    *,
    K: int | None = None,
) -> np.ndarray:
    """Fill probes against an already-sampled trajectory.

    ``masses`` has one row per time, one column per rank of ``space`` —
    an OrderedTraitSpace or a plain sequence of trait ids in column
    order (as recovered from a trajectory file).  With ``K`` the
    comparison runs in integer counts (masses are assumed exact multiples
    of 1/K, as stochastic snapshots are); without it, thresholds are mass
    levels, and an upward probe at level 0 demands strictly positive
    mass.  Returns fill times aligned with ``probes`` (NaN where
    censored).  Resolution is that of the stream: crossings between
    samples are invisible, so feed event-resolution or dense output when
    exactness matters.
    """
    ids = list(space.ids) if hasattr(space, "ids") else [str(t) for t in space]
    times = np.asarray(times, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    if masses.shape != (times.size, len(ids)):
        raise ValueError("masses must be (len(times), len(ids))")
    out = np.full(len(probes), np.nan)
    for i, p in enumerate(probes):
        try:
            col = masses[:, ids.index(p.trait)]
        except ValueError:
            raise KeyError(f"probe trait {p.trait!r} not in trajectory") from None
        if K is not None:
            counts = np.rint(col * K)
            if p.direction == "up":
                cond = counts >= max(1, math.ceil(p.level * K - 1e-9))
            else:
                cond = counts <= math.floor(p.level * K + 1e-9)
        else:
            if p.direction == "up":
                cond = (col > 0.0) if p.level == 0.0 else (col >= p.level)
            else:
                cond = col <= p.level
        start = 0
        if p.after is not None:
            t_pre = out[p.after]
            if np.isnan(t_pre):
                continue
            start = int(np.searchsorted(times, t_pre, side="left"))
        hits = np.nonzero(cond[start:])[0]
        if hits.size:
            out[i] = times[start + hits[0]]
    return out


@dataclass
class EnsembleSummary:
    """Probe statistics over independent replicas of one scenario.

    ``times`` is the (replicas x probes) matrix of fill times, NaN for
    censored entries.  Means/standard errors are over the uncensored
    subset per probe.
    """

    scenario_name: str
    K: int
    epsilon: float
    sigma: float
    n_replicas: int
    probe_labels: tuple[str, ...]
    times: np.ndarray
    eta: float | None = None
    results: list[RunResult] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.n_replicas < 2:
            raise ValueError("ensemble statistics need at least 2 replicas")
        if self.times.shape != (self.n_replicas, len(self.probe_labels)):
            raise ValueError("times matrix must be (n_replicas, n_probes)")

    def _col(self, probe) -> np.ndarray:
        if isinstance(probe, str):
            probe = self.probe_labels.index(probe)
        return self.times[:, probe]

    def mean(self, probe) -> float:
        col = self._col(probe)
        return float(np.nanmean(col))

    def variance(self, probe) -> float:
        col = self._col(probe)
        good = col[~np.isnan(col)]
        return float(np.var(good, ddof=1)) if good.size > 1 else float("nan")

    def stderr(self, probe) -> float:
        col = self._col(probe)
        good = col[~np.isnan(col)]
        if good.size < 2:
            return float("nan")
        return float(np.std(good, ddof=1) / math.sqrt(good.size))

    def censored(self, probe) -> int:
        return int(np.isnan(self._col(probe)).sum())

    def table(self) -> list[dict]:
        """Flat per-probe rows for reporting."""
        rows = []
        for j, lbl in enumerate(self.probe_labels):
            rows.append(
                {
                    "scenario": self.scenario_name,
                    "K": self.K,
                    "epsilon": self.epsilon,
                    "sigma": self.sigma,
                    "probe": lbl,
                    "mean": self.mean(j),
                    "stderr": self.stderr(j),
                    "censored": self.censored(j),
                    "replicas": self.n_replicas,
                }
            )
        return rows


def replica_seeds(base_seed: int, n: int) -> np.ndarray:
    """Deterministic per-replica seeds derived from one base seed."""
    return np.random.SeedSequence(base_seed).generate_state(n, np.uint64)


def run_ensemble(
    scenario: Scenario,
    n_replicas: int,
    *,
    probes: Sequence[HittingProbe] = (),
    grid: int | Sequence[float] | None = None,
    stop_when_probes_filled: bool = False,
    stop_after_mutations: int | None = None,
    max_events: int | None = None,
    keep_results: bool = False,
    eta: float | None = None,
) -> EnsembleSummary:
    """Run independent replicas (serially; replica index fixes the seed split)."""
    if n_replicas < 2:
        raise ValueError("ensemble statistics need at least 2 replicas")
    seeds = replica_seeds(scenario.seed, n_replicas)
    P = len(probes)
    times = np.full((n_replicas, P), np.nan)
    results: list[RunResult] | None = [] if keep_results else None
    for r in range(n_replicas):
        sc_r = scenario.with_overrides(seed=int(seeds[r]))
        res = run(
            sc_r,
            grid=grid,
            probes=probes,
            stop_when_probes_filled=stop_when_probes_filled,
            stop_after_mutations=stop_after_mutations,
            max_events=max_events,
        )
        if P:
            times[r] = res.probe_times
        if results is not None:
            results.append(res)
    return EnsembleSummary(
        scenario_name=scenario.name,
        K=scenario.K,
        epsilon=scenario.epsilon,
        sigma=scenario.sigma,
        n_replicas=n_replicas,
        probe_labels=tuple(probe_label(p, i) for i, p in enumerate(probes)),
        times=times,
        eta=eta,
        results=results,
    )


@dataclass(frozen=True)
class TimescaleFit:
    """OLS fit of mean hitting time against ln(1/eps)."""

    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    residual_rms: float
    n_points: int

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def timescale_fit(
    epsilons: Sequence[float], mean_times: Sequence[float], *, confidence: float = 0.95
) -> TimescaleFit:
    """Regress mean hitting times on ln(1/eps).

    Requires at least 3 distinct eps values; warns (does not fail) when
    the grid spans less than one decade, since the regression is then
    poorly conditioned against the ln scale.
    """
    eps = np.asarray(epsilons, dtype=np.float64)
    ts = np.asarray(mean_times, dtype=np.float64)
    if eps.ndim != 1 or eps.shape != ts.shape:
        raise ValueError("epsilons and mean_times must be matching 1-d sequences")
    if np.unique(eps).size < 3:
        raise ValueError("timescale_fit needs at least 3 distinct eps values")
    if (eps <= 0).any() or (eps >= 1).any():
        raise ValueError("eps values must lie in (0, 1)")
    if np.isnan(ts).any():
        raise ValueError("mean_times contains NaN (fully censored probe?)")
    x = np.log(1.0 / eps)
    if x.max() - x.min() < 1e-12:
        raise ValueError("degenerate eps grid: all values equal")
    if eps.max() / eps.min() < 10.0:
        import warnings

        warnings.warn(
            "eps grid spans less than one decade; slope estimate may be fragile",
            stacklevel=2,
        )
    fit = _stats.linregress(x, ts)
    n = x.size
    resid = ts - (fit.intercept + fit.slope * x)
    rms = float(np.sqrt(np.mean(resid**2)))
    if n > 2 and fit.stderr > 0:
        tq = _stats.t.ppf(0.5 + confidence / 2.0, n - 2)
        lo, hi = fit.slope - tq * fit.stderr, fit.slope + tq * fit.stderr
    else:
        lo = hi = fit.slope
    return TimescaleFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        stderr=float(fit.stderr),
        ci_low=float(lo),
        ci_high=float(hi),
        residual_rms=rms,
        n_points=int(n),
    )


@dataclass
class FirstMutationStats:
    """Sample law of the first mutation time and its source trait."""

    n_replicas: int
    times: np.ndarray  # natural time units; NaN where censored
    sources: tuple[str, ...]
    K: int
    sigma: float

    @property
    def scaled_times(self) -> np.ndarray:
        """First-mutation times on the mutation scale (multiplied by K*sigma)."""
        return self.times * (self.K * self.sigma)

    @property
    def scaled_mean(self) -> float:
        return float(np.nanmean(self.scaled_times))

    @property
    def scaled_stderr(self) -> float:
        good = self.scaled_times[~np.isnan(self.scaled_times)]
        return float(np.std(good, ddof=1) / math.sqrt(good.size))

    @property
    def censored(self) -> int:
        return int(np.isnan(self.times).sum())

    def source_frequency(self, trait_id: str) -> float:
        if not self.sources:
            return float("nan")
        return sum(1 for s in self.sources if s == trait_id) / len(self.sources)

    def source_frequency_stderr(self, trait_id: str) -> float:
        p = self.source_frequency(trait_id)
        n = len(self.sources)
        return math.sqrt(p * (1 - p) / n) if n else float("nan")


def first_mutation_statistics(scenario: Scenario, n_replicas: int) -> FirstMutationStats:
    """Sample the first mutation time over replicas (each run stops at it).

    The scenario horizon must be long enough for mutations to be likely;
    replicas that never mutate are censored and excluded from the mean.
    """
    if scenario.sigma <= 0:
        raise ValueError("first-mutation statistics need sigma > 0")
    seeds = replica_seeds(scenario.seed, n_replicas)
    times = np.full(n_replicas, np.nan)
    sources: list[str] = []
    for r in range(n_replicas):
        res = run(scenario.with_overrides(seed=int(seeds[r])), stop_after_mutations=1)
        if res.mutations:
            times[r] = res.mutations[0].time
            sources.append(res.mutations[0].source_id)
    return FirstMutationStats(
        n_replicas=n_replicas,
        times=times,
        sources=tuple(sources),
        K=scenario.K,
        sigma=scenario.sigma,
    )


def _count_distribution(values: np.ndarray, n_bins: int) -> np.ndarray:
    freq = np.zeros(n_bins)
    for v in values:
        freq[int(v)] += 1
    return freq / values.size


@dataclass
class DivergenceReport:
    """Comparison of microscopic and jump-limit configuration statistics.

    For each mutation-scale observation time: the distribution of the
    number of occupied atoms on both sides, per-bin absolute frequency
    differences with their 3-standard-error bands, a total-variation
    distance, and the mean number of chain-growth jumps.  ``parity_ok``
    records the structural check that every sampled limit configuration
    occupies exactly floor((L+2)/2) atoms on a chain of L+1 traits.
    """

    t_grid: np.ndarray
    eta: float
    n_micro: int
    n_tst: int
    micro_occupied: np.ndarray  # (n_times, n_bins) frequencies
    tst_occupied: np.ndarray
    bin_diffs: np.ndarray
    bin_bands: np.ndarray  # 3-standard-error allowances, same shape
    tv_distance: np.ndarray  # per time
    micro_mean_jumps: np.ndarray
    tst_mean_jumps: np.ndarray
    jump_band: np.ndarray  # 3 SE band on the jump-count difference
    parity_ok: bool

    @property
    def bins_within_band(self) -> bool:
        return bool((self.bin_diffs <= self.bin_bands + 1e-12).all())

    @property
    def jumps_within_band(self) -> bool:
        return bool(
            (np.abs(self.micro_mean_jumps - self.tst_mean_jumps) <= self.jump_band).all()
        )


def compare_micro_to_tst(
    scenario: Scenario,
    tst_initial: TstState,
    t_grid: Sequence[float],
    *,
    n_micro: int = 200,
    n_tst: int = 2000,
    eta: float | None = None,
    tst_seed: int = 0,
) -> DivergenceReport:
    """Observe the microscopic process on the mutation scale and compare.

    Microscopic replicas are sampled at natural times t/(K*sigma) for
    each mutation-scale t in ``t_grid``; an atom is *occupied* when its
    mass is at least ``eta``.  Limit-process replicas come from the
    configuration-valued jump sampler with the same mutation law.  Both
    sides use ``scenario.mutation_law``.
    """
    if scenario.sigma <= 0 or scenario.K <= 0:
        raise ValueError("comparison needs K > 0 and sigma > 0")
    if scenario.mutation_law is None:
        raise ValueError("scenario must carry a mutation_law")
    if np.isscalar(t_grid):
        # default observation grid: 32 equispaced mutation-scale times
        t_grid = np.linspace(0.0, float(t_grid), 33)[1:]
    t_grid = np.asarray(sorted(float(t) for t in t_grid))
    if t_grid.size == 0 or t_grid[0] < 0:
        raise ValueError("t_grid must be nonempty and nonnegative")
    k_sigma = scenario.K * scenario.sigma
    if scenario.K * scenario.epsilon < 10.0:
        warnings.warn(
            f"K*epsilon = {scenario.K * scenario.epsilon:.4g} is not >> 1; "
            "the separation the comparison probes may not hold",
            stacklevel=2,
        )
    if 0 < scenario.epsilon < 1 and k_sigma * math.log(1 / scenario.epsilon) > 0.1:
        warnings.warn(
            f"K*sigma*ln(1/eps) = {k_sigma * math.log(1 / scenario.epsilon):.4g} "
            "is not << 1; fixation is not fast on the mutation scale",
            stacklevel=2,
        )
    natural_times = t_grid / k_sigma
    if eta is None:
        eta = default_eta(scenario.space)

    horizon = float(natural_times[-1])
    sc = scenario.with_overrides(horizon=horizon)
    summary = run_ensemble(sc, n_micro, grid=natural_times, keep_results=True)
    assert summary.results is not None

    micro_counts = np.zeros((n_micro, t_grid.size), dtype=np.int64)
    micro_jumps = np.zeros((n_micro, t_grid.size), dtype=np.int64)
    for r, res in enumerate(summary.results):
        filled = res.grid_times.size
        for j in range(t_grid.size):
            if j < filled:
                micro_counts[r, j] = int((res.grid_mass[j] >= eta).sum())
            else:  # run ended early (absorbed); state frozen thereafter
                micro_counts[r, j] = micro_counts[r, j - 1] if j else 0
            micro_jumps[r, j] = sum(1 for m in res.mutations if m.time <= natural_times[j])

    tst_states = np.zeros((n_tst, t_grid.size), dtype=np.int64)
    tst_jumps = np.zeros((n_tst, t_grid.size), dtype=np.int64)
    init_size = len(tst_initial.space)
    tseeds = replica_seeds(tst_seed, n_tst)
    parity_ok = True
    for r in range(n_tst):
        path = sample_tst_path(
            tst_initial, float(t_grid[-1]), scenario.mutation_law, seed=int(tseeds[r])
        )
        for state in path:
            size = len(state.space)
            if len(state.config.support) != (size + 1) // 2:
                parity_ok = False
        for j, tj in enumerate(t_grid):
            st = state_at(path, float(tj))
            tst_states[r, j] = len(st.config.support)
            tst_jumps[r, j] = len(st.space) - init_size

    n_bins = int(max(micro_counts.max(), tst_states.max())) + 1
    micro_freq = np.stack(
        [_count_distribution(micro_counts[:, j], n_bins) for j in range(t_grid.size)]
    )
    tst_freq = np.stack(
        [_count_distribution(tst_states[:, j], n_bins) for j in range(t_grid.size)]
    )
    diffs = np.abs(micro_freq - tst_freq)
    bands = 3.0 * np.sqrt(
        micro_freq * (1 - micro_freq) / n_micro + tst_freq * (1 - tst_freq) / n_tst
    )
    tv = 0.5 * np.abs(micro_freq - tst_freq).sum(axis=1)

    mj = micro_jumps.mean(axis=0)
    tj_mean = tst_jumps.mean(axis=0)
    jump_band = 3.0 * np.sqrt(
        micro_jumps.var(axis=0, ddof=1) / n_micro + tst_jumps.var(axis=0, ddof=1) / n_tst
    )

    return DivergenceReport(
        t_grid=t_grid,
        eta=float(eta),
        n_micro=n_micro,
        n_tst=n_tst,
        micro_occupied=micro_freq,
        tst_occupied=tst_freq,
        bin_diffs=diffs,
        bin_bands=bands,
        tv_distance=tv,
        micro_mean_jumps=mj,
        tst_mean_jumps=tj_mean,
        jump_band=jump_band,
        parity_ok=parity_ok,
    )
