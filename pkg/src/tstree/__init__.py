"""Multi-time-scale adaptive dynamics: exact simulation and verification.

The package simulates one ecological model at three resolutions and
cross-checks them quantitatively:

- :mod:`tstree.microsim` — the exact individual-based jump process
  (births, deaths, pairwise competition scaled by the system size K,
  rare migration at rate epsilon, rare mutation at rate sigma);
- :mod:`tstree.odelimit` — its deterministic Lotka-Volterra limit with
  migration coupling, plus the closed-form phase constants that predict
  invasion and recovery times on the ln(1/epsilon) scale;
- :mod:`tstree.equilibria` — the substitution-tree limit on the mutation
  time scale 1/(K*sigma): a jump process over equilibrium configurations
  where every alternate trait of the fitness chain is occupied;
- :mod:`tstree.diploid` — the genotype layer that reduces to the same
  machinery through the genotype-to-trait map.

:mod:`tstree.analysis` measures hitting times, fits time-scale slopes,
and compares the stochastic process against the limit processes;
:mod:`tstree.scenario` and :mod:`tstree.trajectory` handle scenario
files, manifests, and trajectory persistence; :mod:`tstree.cli` wraps it
all in subcommands.
"""

__version__ = "0.1.0"

from .traitspace import (
    KernelSpec,
    OrderViolation,
    OrderedTraitSpace,
    TraitSpec,
    check_b3,
    fitness,
    n_bar,
    validate_order,
)
from .equilibria import (
    Configuration,
    TstState,
    equilibrium_configuration,
    occupied_ranks,
    sample_tst_path,
    state_at,
    tst_insert,
    tst_jump_rates,
)
from .mutation import AlwaysFitter, UniformRank, fresh_trait_id, make_law
from .microsim import (
    EventRates,
    EventRecord,
    MutationRecord,
    RunResult,
    Scenario,
    SimState,
    compute_rates,
    run,
    run_reference,
    step,
)
from .odelimit import (
    OdeResult,
    OdeSystem,
    PhasePredictions,
    integrate,
    phase_predictions,
)
from .analysis import (
    DivergenceReport,
    EnsembleSummary,
    FirstMutationStats,
    HittingProbe,
    TimescaleFit,
    attach_probes,
    compare_micro_to_tst,
    default_eta,
    first_mutation_statistics,
    probe_label,
    replica_seeds,
    run_ensemble,
    timescale_fit,
)
from .diploid import (
    AlleleSpace,
    Genotype,
    GenotypeSpace,
    GstState,
    LadderAlleleLaw,
    ReplacementEdge,
    build_genotype_space,
    genotype_micro_scenario,
    gst_jump_rates,
    gst_rate_table,
    h,
    make_allele_law,
    replacement_edges,
    sample_gst_path,
)
from .scenario import (
    LoadedScenario,
    ScenarioError,
    apply_overrides,
    load_manifest,
    load_scenario,
    load_scenario_text,
    manifest_payload,
    regime_report,
    resolve_scaling,
    write_manifest,
)
from .trajectory import (
    TrajectoryTable,
    read_trajectory,
    write_gst_trajectory,
    write_micro_trajectory,
    write_ode_trajectory,
    write_tst_trajectory,
)

__all__ = [
    "__version__",
    # traitspace
    "TraitSpec",
    "KernelSpec",
    "OrderedTraitSpace",
    "OrderViolation",
    "n_bar",
    "fitness",
    "validate_order",
    "check_b3",
    # equilibria
    "Configuration",
    "TstState",
    "equilibrium_configuration",
    "occupied_ranks",
    "tst_insert",
    "tst_jump_rates",
    "sample_tst_path",
    "state_at",
    # mutation
    "AlwaysFitter",
    "UniformRank",
    "make_law",
    "fresh_trait_id",
    # microsim
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
    # odelimit
    "OdeSystem",
    "OdeResult",
    "integrate",
    "PhasePredictions",
    "phase_predictions",
    # analysis
    "HittingProbe",
    "EnsembleSummary",
    "TimescaleFit",
    "FirstMutationStats",
    "DivergenceReport",
    "attach_probes",
    "run_ensemble",
    "timescale_fit",
    "first_mutation_statistics",
    "compare_micro_to_tst",
    "default_eta",
    "replica_seeds",
    "probe_label",
    # diploid
    "AlleleSpace",
    "Genotype",
    "GenotypeSpace",
    "GstState",
    "ReplacementEdge",
    "h",
    "build_genotype_space",
    "replacement_edges",
    "gst_jump_rates",
    "gst_rate_table",
    "sample_gst_path",
    "LadderAlleleLaw",
    "make_allele_law",
    "genotype_micro_scenario",
    # scenario
    "ScenarioError",
    "LoadedScenario",
    "load_scenario",
    "load_scenario_text",
    "apply_overrides",
    "resolve_scaling",
    "regime_report",
    "manifest_payload",
    "write_manifest",
    "load_manifest",
    # trajectory
    "TrajectoryTable",
    "read_trajectory",
    "write_micro_trajectory",
    "write_ode_trajectory",
    "write_tst_trajectory",
    "write_gst_trajectory",
]
