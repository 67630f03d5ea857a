"""Deterministic mass-dynamics limit and its phase-time predictions.

For K -> infinity at fixed migration strength the rescaled counts follow
a coupled logistic/migration ODE on the trait chain:

    dxi_i/dt = (b_i - d_i - sum_j alpha(i,j) xi_j) xi_i
               + eps * sum_(allowed edges j->i) m(j,i) xi_j
               - eps * sum_(allowed edges i->j) m(i,j) xi_i

``occupied_only`` mode multiplies each migration term by the indicator
that the *target* coordinate is strictly positive, matching the gated
variant of the microscopic process.

The integrator is an embedded Cash-Karp 4(5) pair with PI step-size
control; the fourth-order solution is propagated.  Negative excursions
are handled by step rejection (tiny ones below the absolute tolerance
are clamped to zero).  Dense output between accepted steps is cubic
Hermite, which also drives first-crossing detection for level probes.

:func:`phase_predictions` packages the invasion/recovery constants of
the slow time scale t * ln(1/eps): per-step invasion slopes, the
recovery slope, corridor exponents c1/c2, and the equilibration
thresholds tbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .traitspace import OrderedTraitSpace

__all__ = [
    "OdeSystem",
    "OdeResult",
    "integrate",
    "PhasePredictions",
    "phase_predictions",
]


@dataclass(frozen=True)
class OdeSystem:
    """Right-hand side of the limiting mass dynamics on a trait chain."""

    space: OrderedTraitSpace
    epsilon: float = 0.0
    mode: str = "all_neighbors"
    migration_edges: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        if self.mode not in ("all_neighbors", "occupied_only"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    @classmethod
    def from_scenario(cls, scenario) -> "OdeSystem":
        """Lift a stochastic scenario to its deterministic limit (mutation drops out)."""
        return cls(
            space=scenario.space,
            epsilon=scenario.epsilon,
            mode=scenario.mode,
            migration_edges=scenario.migration_edges,
        )

    def _masks(self) -> tuple[np.ndarray, np.ndarray]:
        from .microsim import _edge_masks

        class _Holder:
            migration_edges = self.migration_edges

        return _edge_masks(_Holder, self.space)

    def rhs(self, t: float, xi: np.ndarray) -> np.ndarray:
        """Instantaneous drift of the mass vector (time-autonomous)."""
        space = self.space
        kern = space.kernel
        xi = np.asarray(xi, dtype=np.float64)
        n = len(space)
        b = np.array([tr.b for tr in space.traits])
        d = np.array([tr.d for tr in space.traits])

        comp = kern.alpha_self * xi
        if n > 1:
            comp[1:] += kern.alpha_neighbor * xi[:-1]
            comp[:-1] += kern.alpha_neighbor * xi[1:]
        out = (b - d - comp) * xi

        if self.epsilon > 0.0 and kern.m_neighbor > 0.0 and n > 1:
            allow_down, allow_up = self._masks()
            gated = self.mode == "occupied_only"
            rate = self.epsilon * kern.m_neighbor
            for i in range(n):
                if i > 0 and allow_down[i] and ((not gated) or xi[i - 1] > 0.0):
                    flow = rate * xi[i]
                    out[i] -= flow
                    out[i - 1] += flow
                if i < n - 1 and allow_up[i] and ((not gated) or xi[i + 1] > 0.0):
                    flow = rate * xi[i]
                    out[i] -= flow
                    out[i + 1] += flow
        return out


# Cash-Karp tableau
_C = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _hermite(t0, y0, f0, t1, y1, f1, ts):
    h = t1 - t0
    s = (ts - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


@dataclass
class OdeResult:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), n)
    status: str
    probe_times: np.ndarray | None = None
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def series(self, space: OrderedTraitSpace, trait_id: str) -> np.ndarray:
        return self.states[:, space.rank_of(trait_id)]


def integrate(
    system: OdeSystem,
    xi0: Sequence[float],
    horizon: float,
    *,
    grid: int | Sequence[float] | None = None,
    probes: Sequence = (),
    rtol: float = 1e-8,
    atol: float = 1e-12,
    max_step: float = math.inf,
) -> OdeResult:
    """Integrate the mass dynamics over ``[0, horizon]``.

    ``grid`` selects output times exactly as in the stochastic runner
    (int = evenly spaced count, sequence = explicit times, None = the
    accepted step points).  ``probes`` are first-crossing detectors with
    the same object contract as the stochastic side (``trait``,
    ``level``, ``direction``, optional ``after`` back-reference); levels
    are masses here, and crossing times are refined to root-finder
    accuracy on the cubic Hermite interpolant.
    """
    y = np.asarray(xi0, dtype=np.float64).copy()
    n = len(system.space)
    if y.shape != (n,):
        raise ValueError("xi0 must have one mass per trait")
    if (y < 0).any():
        raise ValueError("initial masses must be nonnegative")
    horizon = float(horizon)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")

    if grid is None:
        grid_times = None
    elif isinstance(grid, (int, np.integer)):
        grid_times = np.linspace(0.0, horizon, int(grid))
    else:
        grid_times = np.asarray(grid, dtype=np.float64)
        if grid_times.ndim != 1 or (np.diff(grid_times) < 0).any():
            raise ValueError("grid must be a nondecreasing 1-d sequence")
        if grid_times.size and (grid_times[0] < 0 or grid_times[-1] > horizon):
            raise ValueError("grid times must lie within [0, horizon]")

    # normalize probes: (rank, up?, level, after-index)
    norm = []
    for idx, p in enumerate(probes):
        direction = getattr(p, "direction")
        if direction not in ("up", "down"):
            raise ValueError(f"probe direction must be 'up' or 'down', got {direction!r}")
        after = getattr(p, "after", None)
        if after is not None and not 0 <= int(after) < idx:
            raise ValueError("probe 'after' must reference an earlier probe")
        norm.append(
            (
                system.space.rank_of(str(getattr(p, "trait"))),
                direction == "up",
                float(getattr(p, "level")),
                -1 if after is None else int(after),
            )
        )
    P = len(norm)
    probe_time = np.full(P, np.nan)

    def _check_initial(tval, yval):
        for i, (r, up, level, after) in enumerate(norm):
            if not np.isnan(probe_time[i]):
                continue
            if after >= 0 and np.isnan(probe_time[after]):
                continue
            if (up and yval[r] >= level) or (not up and yval[r] <= level):
                probe_time[i] = tval

    _check_initial(0.0, y)

    out_t: list[float] = []
    out_y: list[np.ndarray] = []
    gi = 0
    if grid_times is None:
        out_t.append(0.0)
        out_y.append(y.copy())
    else:
        while gi < grid_times.size and grid_times[gi] <= 0.0:
            out_t.append(float(grid_times[gi]))
            out_y.append(y.copy())
            gi += 1

    t = 0.0
    f = system.rhs(t, y)
    fnorm = float(np.max(np.abs(f))) if n else 0.0
    h = min(horizon, max_step, 0.01 * horizon if horizon > 0 else 1.0)
    if fnorm > 0:
        h = min(h, 0.1 / fnorm)
    h = max(h, 1e-12)
    err_prev = 1.0
    n_acc = 0
    n_rej = 0
    k = np.empty((6, n))

    while t < horizon:
        h = min(h, horizon - t, max_step)
        # one Cash-Karp attempt
        k[0] = f
        for s in range(1, 6):
            ys = y + h * sum(_A[s][j] * k[j] for j in range(s))
            k[s] = system.rhs(t + _C[s] * h, ys)
        y4 = y + h * (_B4 @ k)
        y5 = y + h * (_B5 @ k)
        err = y4 - y5
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y4))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        neg = float(y4.min()) if n else 0.0
        if neg < -100.0 * atol:
            h *= 0.5
            n_rej += 1
            if h < 1e-14 * max(horizon, 1.0):
                raise RuntimeError("step size underflow while enforcing nonnegativity")
            continue

        if err_norm > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** (-0.2))
            n_rej += 1
            if h < 1e-14 * max(horizon, 1.0):
                raise RuntimeError("step size underflow; the dynamics may be singular")
            continue

        # accepted
        np.clip(y4, 0.0, None, out=y4)
        t_new = t + h
        f_new = system.rhs(t_new, y4)

        # grid output via dense interpolation
        if grid_times is None:
            out_t.append(t_new)
            out_y.append(y4.copy())
        else:
            while gi < grid_times.size and grid_times[gi] <= t_new + 1e-15 * max(1.0, t_new):
                ts = float(grid_times[gi])
                if ts >= t_new:
                    yi = y4.copy()
                else:
                    yi = _hermite(t, y, f, t_new, y4, f_new, ts)
                    np.clip(yi, 0.0, None, out=yi)
                out_t.append(ts)
                out_y.append(yi)
                gi += 1

        # probe crossings inside (t, t_new]
        for i, (r, up, level, after) in enumerate(norm):
            if not np.isnan(probe_time[i]):
                continue
            if after >= 0:
                if np.isnan(probe_time[after]):
                    continue
                lo = max(t, probe_time[after])
            else:
                lo = t

            def g(ts, _r=r, _lvl=level):
                return float(
                    _hermite(t, y[_r], f[_r], t_new, y4[_r], f_new[_r], ts) - _lvl
                )

            satisfied_end = (y4[r] >= level) if up else (y4[r] <= level)
            if not satisfied_end:
                continue
            glo = g(lo)
            if (up and glo >= 0.0) or (not up and glo <= 0.0):
                probe_time[i] = lo
            else:
                ghi = g(t_new)
                if (up and ghi < 0.0) or (not up and ghi > 0.0):
                    probe_time[i] = t_new  # endpoint satisfies by state, interpolant disagrees
                else:
                    probe_time[i] = float(brentq(g, lo, t_new, xtol=1e-13, rtol=1e-13))

        t, y, f = t_new, y4, f_new
        n_acc += 1

        # PI step-size controller
        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err_norm ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        h *= factor
        err_prev = max(err_norm, 1e-10)

    return OdeResult(
        times=np.asarray(out_t),
        states=np.asarray(out_y),
        status="completed",
        probe_times=probe_time if P else None,
        n_accepted=n_acc,
        n_rejected=n_rej,
    )


@dataclass(frozen=True)
class PhasePredictions:
    """Slow-time-scale constants of the invasion/recovery cascade.

    All times are coefficients of ln(1/eps): multiply by ln(1/eps) to get
    model time.  Scaling every demographic rate (b, d, and both
    competition weights) by a factor lambda leaves ``c1`` and ``c2``
    unchanged and divides every time constant by lambda.
    """

    space: OrderedTraitSpace
    c1: float
    c2: float

    @property
    def recovery_slope(self) -> float:
        """Duration coefficient of the bottom trait's recovery, c1 / (b0 - d0)."""
        return self.c1 / self.space.traits[0].growth

    def invasion_slope(self, rank: int) -> float:
        """Time coefficient for the mass at ``rank`` to reach order-1 level.

        Sum of inverse step fitnesses along the chain up to ``rank``:
        each link x_{j-1} -> x_j contributes 1 / f(x_j, x_{j-1}).
        """
        if not 1 <= rank <= self.space.top_rank:
            raise ValueError("rank must point above the bottom of the chain")
        return sum(
            1.0 / self.space.fitness(j, j - 1) for j in range(1, rank + 1)
        )

    def tbar(self, L: int) -> float:
        """Equilibration threshold: settled on the L-th structure after tbar(L)*ln(1/eps).

        ``L == 2`` uses the sharp three-trait constant
        ``1/f(x1,x0) + 1/f(x2,x1) + c1/(b0-d0)``; odd ``L`` uses the
        induction constant ``2 * sum_j 1/f(x_j, x_{j-1})``.  Even ``L >= 4``
        reuses the same doubled-sum structure (the inductive argument is
        symmetric in parity, only the L=2 base case has a sharper form).
        """
        if not 2 <= L <= self.space.top_rank:
            raise ValueError(f"L must lie in [2, {self.space.top_rank}]")
        if L == 2:
            return (
                1.0 / self.space.fitness(1, 0)
                + 1.0 / self.space.fitness(2, 1)
                + self.recovery_slope
            )
        return 2.0 * self.invasion_slope(L)


def phase_predictions(space: OrderedTraitSpace) -> PhasePredictions:
    """Compute the slow-scale constants for an order-valid chain of >= 3 traits.

    ``c1`` is the depth exponent of the bottom trait's transient dip:
    min(|f(x0, x1)| / f(x2, x1), 1).  ``c2`` is the residual exponent of
    the squeezed middle trait: c1 * |f(x1, x2)| / (b0 - d0).
    """
    space.require_valid()
    if len(space) < 3:
        raise ValueError("phase predictions need at least three traits")
    f01 = space.fitness(0, 1)  # negative
    f21 = space.fitness(2, 1)  # positive
    f12 = space.fitness(1, 2)  # negative
    c1 = min(abs(f01) / f21, 1.0)
    c2 = c1 * abs(f12) / space.traits[0].growth
    return PhasePredictions(space=space, c1=c1, c2=c2)
