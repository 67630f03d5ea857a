#!/usr/bin/env python3
"""A three-trait invasion cascade, three ways.

A chain of traits x0 < x1 < x2 with birth rates (3, 6, 8) starts with
all mass on x0.  Rare migration (epsilon) keeps seeding the neighbors;
each seeded trait that is fitter than the residents invades, and the
population hops through a cascade of invasions until it reaches the
stable configuration the parity rule predicts: alternating occupied
ranks, here (3, 0, 8).

This script computes that configuration three independent ways --
closed form, deterministic mass dynamics, and the exact stochastic
process -- and shows they agree.
"""

import math

import numpy as np

from tstree import (
    KernelSpec,
    OdeSystem,
    OrderedTraitSpace,
    Scenario,
    TraitSpec,
    equilibrium_configuration,
    integrate,
    phase_predictions,
    run,
)

space = OrderedTraitSpace(
    [
        TraitSpec("x0", b=3.0),
        TraitSpec("x1", b=6.0),
        TraitSpec("x2", b=8.0),
    ],
    KernelSpec(alpha_self=1.0, alpha_neighbor=1.0, m_neighbor=0.5),
).require_valid()

print("Trait chain:", ", ".join(f"{t.id} (b={t.b:g})" for t in space.traits))

# --- 1. closed form: the parity rule -------------------------------------
gamma = equilibrium_configuration(space)
print("\n[1] Parity-rule configuration (occupied ranks alternate from the top):")
for t in space.traits:
    print(f"    {t.id}: mass {gamma.mass(t.id):g}")

preds = phase_predictions(space)
print(f"    cascade time constant: {preds.tbar(space.top_rank):.4f} x ln(1/eps)")

# --- 2. deterministic limit ------------------------------------------------
K = 1000
eps = K ** -0.8
horizon = 2.0 * preds.tbar(space.top_rank) * math.log(1.0 / eps)
print(f"\n[2] Mass dynamics with eps = K^-4/5 = {eps:.4g}, horizon {horizon:.2f}:")
ode = integrate(OdeSystem(space, epsilon=eps), [3.0, 0.0, 0.0], horizon)
for t, m in zip(space.traits, ode.final):
    print(f"    {t.id}: mass {m:.4f}")

# --- 3. exact stochastic process -------------------------------------------
print(f"\n[3] One stochastic run at K = {K} (about {3 * K} initial individuals):")
sc = Scenario(space=space, K=K, epsilon=eps, horizon=horizon,
              initial={"x0": 3 * K}, seed=11, name="cascade-demo")
res = run(sc)
for t in space.traits:
    print(f"    {t.id}: mass {res.final_masses()[t.id]:.4f}")
print(f"    ({res.total_events():,} birth/death/migration events)")

final = np.array([res.final_masses()[t.id] for t in space.traits])
target = np.array([gamma.mass(t.id) for t in space.traits])
print(f"\nLargest deviation of the stochastic run from the closed form: "
      f"{np.abs(final - target).max():.3f}")
print("All three roads lead to the same alternating configuration.")
