"""Compiled event loop plus its pure-Python reference twin.

One *segment* is a maximal stretch of simulation between chain changes:
the trait set is fixed, so all state lives in flat arrays and the loop
compiles.  The wrapper in :mod:`tstree.microsim` re-enters with a fresh
segment seed after every mutation (the chain grows and the arrays are
rebuilt around it).

Random draws: each segment reseeds the generator and consumes exactly two
uniforms per event — ``u1`` for the exponential waiting time, ``u2`` for
the category.  The in-jit generator is the same MT19937 as numpy's legacy
``RandomState``, so :func:`segment_reference` below replays the identical
stream in pure Python; the test suite asserts event-for-event agreement
between the two implementations.

Category scan order (frozen; changing it changes every seeded result):
births by rank, deaths by rank, downward migration edges by source rank,
upward migration edges by source rank, mutations by rank.  The per-rank
rate formulas and the accumulation order of the total are likewise part
of the replay contract.

Segment exit statuses:

====== =========================================================
0      horizon reached (state flushed to ``t_end``)
1      mutation event selected (returned rank = source; the splice
       happens in the wrapper)
2      absorbed: total rate 0 (extinction), grid flushed to ``t_end``
3      event-count guard tripped
4      all hitting probes filled and early stop was requested
====== =========================================================
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["segment_compiled", "segment_reference", "STATUS"]

STATUS = {
    0: "horizon",
    1: "mutation",
    2: "absorbed",
    3: "max_events",
    4: "probes_filled",
}


@njit(cache=True)
def segment_compiled(
    seed,
    t0,
    t_end,
    counts,
    b,
    d,
    mu,
    alpha_self,
    alpha_nb,
    m_nb,
    K,
    eps,
    sigma,
    occupied_only,
    allow_down,
    allow_up,
    grid_times,
    grid_mass,
    grid_pos,
    probe_rank,
    probe_up,
    probe_thresh,
    probe_after,
    probe_time,
    counters,
    max_events,
    stop_on_probes,
):
    np.random.seed(seed)
    n = counts.shape[0]
    G = grid_times.shape[0]
    P = probe_rank.shape[0]
    rates = np.empty(5 * n, dtype=np.float64)
    t = t0
    gp = grid_pos
    ev = 0

    unfilled = 0
    for p in range(P):
        if np.isnan(probe_time[p]):
            unfilled += 1

    while True:
        # --- rates (accumulation order is part of the replay contract) ---
        total = 0.0
        for i in range(n):
            rb = b[i] * counts[i]
            comp = alpha_self * counts[i]
            if i > 0:
                comp = comp + alpha_nb * counts[i - 1]
            if i < n - 1:
                comp = comp + alpha_nb * counts[i + 1]
            rd = (d[i] + comp / K) * counts[i]
            rmd = 0.0
            if i > 0 and allow_down[i]:
                if (not occupied_only) or counts[i - 1] > 0:
                    rmd = eps * m_nb * counts[i]
            rmu_ = 0.0
            if i < n - 1 and allow_up[i]:
                if (not occupied_only) or counts[i + 1] > 0:
                    rmu_ = eps * m_nb * counts[i]
            rmt = sigma * mu[i] * counts[i]
            rates[i] = rb
            rates[n + i] = rd
            rates[2 * n + i] = rmd
            rates[3 * n + i] = rmu_
            rates[4 * n + i] = rmt
            total += rb
            total += rd
            total += rmd
            total += rmu_
            total += rmt

        if total <= 0.0:
            while gp < G and grid_times[gp] <= t_end:
                for i in range(n):
                    grid_mass[gp, i] = counts[i] / K
                gp += 1
            return t_end, 2, -1, gp, ev

        u1 = np.random.random()
        t_next = t - np.log(u1) / total

        while gp < G and grid_times[gp] < t_next and grid_times[gp] <= t_end:
            for i in range(n):
                grid_mass[gp, i] = counts[i] / K
            gp += 1

        if t_next > t_end:
            return t_end, 0, -1, gp, ev

        t = t_next
        u2 = np.random.random() * total
        acc = 0.0
        sel = -1
        for k in range(5 * n):
            acc += rates[k]
            if u2 < acc:
                sel = k
                break
        if sel < 0:
            # top-end roundoff: fall back to the last positive-rate category
            for k in range(5 * n - 1, -1, -1):
                if rates[k] > 0.0:
                    sel = k
                    break

        kind = sel // n
        i = sel - kind * n
        ev += 1

        if kind == 0:
            counts[i] += 1
            counters[0] += 1
        elif kind == 1:
            counts[i] -= 1
            counters[1] += 1
        elif kind == 2:
            counts[i] -= 1
            counts[i - 1] += 1
            counters[2] += 1
        elif kind == 3:
            counts[i] -= 1
            counts[i + 1] += 1
            counters[2] += 1
        else:
            counters[3] += 1
            return t, 1, i, gp, ev

        if unfilled > 0:
            for p in range(P):
                if not np.isnan(probe_time[p]):
                    continue
                pr = probe_rank[p]
                if pr < 0:
                    continue
                a = probe_after[p]
                if a >= 0 and np.isnan(probe_time[a]):
                    continue
                if probe_up[p]:
                    if counts[pr] >= probe_thresh[p]:
                        probe_time[p] = t
                        unfilled -= 1
                else:
                    if counts[pr] <= probe_thresh[p]:
                        probe_time[p] = t
                        unfilled -= 1
            if stop_on_probes and unfilled == 0 and P > 0:
                return t, 4, -1, gp, ev

        if ev >= max_events:
            return t, 3, -1, gp, ev


def segment_reference(
    seed,
    t0,
    t_end,
    counts,
    b,
    d,
    mu,
    alpha_self,
    alpha_nb,
    m_nb,
    K,
    eps,
    sigma,
    occupied_only,
    allow_down,
    allow_up,
    grid_times,
    grid_mass,
    grid_pos,
    probe_rank,
    probe_up,
    probe_thresh,
    probe_after,
    probe_time,
    counters,
    max_events,
    stop_on_probes,
    event_log=None,
):
    """Pure-Python mirror of :func:`segment_compiled`.

    Line-for-line the same arithmetic in the same order, drawing from
    ``RandomState(seed)`` (the same MT19937 stream the compiled kernel
    consumes after ``np.random.seed(seed)``).  Optionally records
    ``(t, kind, rank)`` tuples into ``event_log``.  Slow; exists for unit
    tests and as executable documentation of the replay contract.
    """
    rs = np.random.RandomState(seed)
    n = counts.shape[0]
    G = grid_times.shape[0]
    P = probe_rank.shape[0]
    rates = np.empty(5 * n, dtype=np.float64)
    t = t0
    gp = grid_pos
    ev = 0

    unfilled = 0
    for p in range(P):
        if np.isnan(probe_time[p]):
            unfilled += 1

    while True:
        total = 0.0
        for i in range(n):
            rb = b[i] * counts[i]
            comp = alpha_self * counts[i]
            if i > 0:
                comp = comp + alpha_nb * counts[i - 1]
            if i < n - 1:
                comp = comp + alpha_nb * counts[i + 1]
            rd = (d[i] + comp / K) * counts[i]
            rmd = 0.0
            if i > 0 and allow_down[i]:
                if (not occupied_only) or counts[i - 1] > 0:
                    rmd = eps * m_nb * counts[i]
            rmu_ = 0.0
            if i < n - 1 and allow_up[i]:
                if (not occupied_only) or counts[i + 1] > 0:
                    rmu_ = eps * m_nb * counts[i]
            rmt = sigma * mu[i] * counts[i]
            rates[i] = rb
            rates[n + i] = rd
            rates[2 * n + i] = rmd
            rates[3 * n + i] = rmu_
            rates[4 * n + i] = rmt
            total += rb
            total += rd
            total += rmd
            total += rmu_
            total += rmt

        if total <= 0.0:
            while gp < G and grid_times[gp] <= t_end:
                for i in range(n):
                    grid_mass[gp, i] = counts[i] / K
                gp += 1
            return t_end, 2, -1, gp, ev

        u1 = rs.random_sample()
        t_next = t - np.log(u1) / total

        while gp < G and grid_times[gp] < t_next and grid_times[gp] <= t_end:
            for i in range(n):
                grid_mass[gp, i] = counts[i] / K
            gp += 1

        if t_next > t_end:
            return t_end, 0, -1, gp, ev

        t = t_next
        u2 = rs.random_sample() * total
        acc = 0.0
        sel = -1
        for k in range(5 * n):
            acc += rates[k]
            if u2 < acc:
                sel = k
                break
        if sel < 0:
            for k in range(5 * n - 1, -1, -1):
                if rates[k] > 0.0:
                    sel = k
                    break

        kind = sel // n
        i = sel - kind * n
        ev += 1
        if event_log is not None:
            event_log.append((t, kind, i))

        if kind == 0:
            counts[i] += 1
            counters[0] += 1
        elif kind == 1:
            counts[i] -= 1
            counters[1] += 1
        elif kind == 2:
            counts[i] -= 1
            counts[i - 1] += 1
            counters[2] += 1
        elif kind == 3:
            counts[i] -= 1
            counts[i + 1] += 1
            counters[2] += 1
        else:
            counters[3] += 1
            return t, 1, i, gp, ev

        if unfilled > 0:
            for p in range(P):
                if not np.isnan(probe_time[p]):
                    continue
                pr = probe_rank[p]
                if pr < 0:
                    continue
                a = probe_after[p]
                if a >= 0 and np.isnan(probe_time[a]):
                    continue
                if probe_up[p]:
                    if counts[pr] >= probe_thresh[p]:
                        probe_time[p] = t
                        unfilled -= 1
                else:
                    if counts[pr] <= probe_thresh[p]:
                        probe_time[p] = t
                        unfilled -= 1
            if stop_on_probes and unfilled == 0 and P > 0:
                return t, 4, -1, gp, ev

        if ev >= max_events:
            return t, 3, -1, gp, ev
