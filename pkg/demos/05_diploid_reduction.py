#!/usr/bin/env python3
"""Diploid genotypes, haploid bookkeeping.

Genotypes are unordered allele pairs mapped to traits through a table
phi.  On the slow mutation clock the genotype process is again a jump
process; a homozygote's two gamete copies both offer a mutation target,
and a heterozygote exposes each of its alleles once, so every per-trait
jump intensity comes out exactly twice the haploid one.  The genotype
tree therefore reduces to a haploid tree with mu doubled -- not
approximately: genotype by genotype the rates match bit for bit.

This script builds a two-allele space, prints its per-allele rate
table, checks the factor of two against a haploid twin, and samples a
genotype path under a ladder of fresh alleles.
"""

from tstree import (
    AlleleSpace,
    GstState,
    KernelSpec,
    LadderAlleleLaw,
    OrderedTraitSpace,
    TraitSpec,
    TstState,
    build_genotype_space,
    gst_rate_table,
    sample_gst_path,
    tst_jump_rates,
)

kernel = KernelSpec(alpha_self=1.0, alpha_neighbor=1.0, m_neighbor=0.5)
phi = {
    ("A", "A"): (TraitSpec(id="A|A", b=3.0, mu=1.0), 0),
    ("A", "B"): (TraitSpec(id="A|B", b=6.0, mu=0.5), 1),
    ("B", "B"): (TraitSpec(id="B|B", b=8.0, mu=1.0), 2),
}
gs = build_genotype_space(AlleleSpace(["A", "B"]), phi, kernel)

print("Genotype chain (rank order):")
for rank, (g, t) in enumerate(zip(gs.genotypes, gs.space.traits)):
    print(f"    {g.label}  (b={t.b:g}, mu_hat={t.mu:g}, "
          f"equilibrium mass {gs.space.n_bar(rank):g})")

state = GstState.initial(gs)
print("\nOccupied at the stable configuration:",
      ", ".join(g.label for g in state.occupied_genotypes))

print("\nJump intensity attributed to each allele:")
table = gst_rate_table(state)
for allele, rate in table.items():
    print(f"    {allele}: {rate:g}")
gst_total = sum(table.values())
print(f"    total: {gst_total:g}   "
      "(A|A counts twice: either of its two A copies can mutate)")

# the haploid twin carries 2*mu_hat and must reproduce the same rates
twin = OrderedTraitSpace(
    [TraitSpec(t.id, b=t.b, mu=2.0 * t.mu) for t in gs.space.traits], kernel
).require_valid()
twin_rates = tst_jump_rates(TstState.initial(twin))
twin_total = sum(twin_rates.values())
print("\nHaploid twin with mu doubled, per occupied rank:")
for rank, rate in sorted(twin_rates.items()):
    print(f"    rank {rank} ({twin.traits[rank].id}): {rate:g}")
print(f"    total: {twin_total:g}   (matches the genotype total: "
      f"{twin_total == gst_total})")

print("\nOne sampled genotype path under a ladder of new alleles:")
law = LadderAlleleLaw(b_increment=2.0, mu_hat_factor=0.7)
for st in sample_gst_path(GstState.initial(gs), 1.5, law, seed=8):
    occupied = ", ".join(g.label for g in st.occupied_genotypes)
    print(f"    t = {st.time:6.3f}   alleles {'/'.join(st.gs.alleles.alleles)}, "
          f"occupied: {occupied}")
