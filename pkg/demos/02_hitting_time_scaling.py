#!/usr/bin/env python3
"""How long does an invasion take?  Like ln(1/eps), with a known slope.

Migration injects mass eps at a neighbor, and the invader then grows
exponentially at its invasion fitness f, so reaching a visible level
eta takes about ln(eta/eps)/f.  Plotting mean hitting times against
ln(1/eps) should therefore give straight lines whose slopes are sums of
inverse fitnesses -- 1/3 for the first invasion here, and an extra 1/2
for the second.

We estimate both slopes from small ensembles at three values of eps.
"""

import numpy as np

from tstree import (
    HittingProbe,
    KernelSpec,
    OrderedTraitSpace,
    Scenario,
    TraitSpec,
    phase_predictions,
    run_ensemble,
    timescale_fit,
)

space = OrderedTraitSpace(
    [TraitSpec("x0", b=3.0), TraitSpec("x1", b=6.0), TraitSpec("x2", b=8.0)],
    KernelSpec(alpha_self=1.0, alpha_neighbor=1.0, m_neighbor=0.5),
).require_valid()
preds = phase_predictions(space)

# The sequential cascade needs eps in a window: K*eps >> 1 (migration is a
# deterministic trickle, not single lucky migrants) but eps < K^-1/2 (a
# double-step seed eps^2 stays below the one-individual mass 1/K, so x2
# cannot leapfrog x1 by growing from it).  The window is under a decade
# wide at this K, and the fit says so in an advisory.
K = 10_000
probes = [HittingProbe("x1", 0.3, "up"), HittingProbe("x2", 0.3, "up")]
eps_values = [K ** -0.6, K ** -0.7, K ** -0.8]

print(f"K = {K}, 12 replicas per eps, probes: x1 and x2 each reaching mass 0.3\n")
first, gap = [], []
for i, eps in enumerate(eps_values):
    sc = Scenario(space=space, K=K, epsilon=eps, horizon=40.0,
                  initial={"x0": 3 * K}, seed=100 + i, name="scaling-demo")
    ens = run_ensemble(sc, 12, probes=probes, stop_when_probes_filled=True)
    t1, t2 = ens.mean(0), ens.mean(1)
    first.append(t1)
    gap.append(float(np.nanmean(ens.times[:, 1] - ens.times[:, 0])))
    print(f"  eps = {eps:.2e}:  x1 hit at {t1:6.3f}   x2 hit at {t2:6.3f}")

fit1 = timescale_fit(eps_values, first)
fit2 = timescale_fit(eps_values, gap)

print(f"\nslope of the first hitting time :  {fit1.slope:.3f}  "
      f"(prediction 1/(b1-b0) = {preds.invasion_slope(1):.3f})")
print(f"slope of the second minus first :  {fit2.slope:.3f}  "
      f"(prediction 1/(b2-b1) = {preds.invasion_slope(2) - preds.invasion_slope(1):.3f})")
print("""
The first hitting time lands close to its predicted slope.  The
second-step slope is systematically steeper at this population size:
at the large-eps end, migrants that hop two sites while x1 is still
climbing give x2 a head start and compress the gap, while at the
small-eps end the wait for the first lucky migrant stretches it.  Both
distortions shrink as K grows with the same eps exponents -- the slope
predictions are statements about that joint limit, not about any fixed
K.  Rerun with a larger K (and more replicas) to watch the second
slope creep toward 1/2.""")
