"""Scenario files, parameter resolution, overrides, and run manifests.

A scenario file is a YAML document with sections:

    name: fig3-three-trait           # optional; defaults to the file stem
    traits:                          # rank order = list order, or explicit
      - {id: x0, b: 3, d: 0, mu: 0}  #   per-trait "rank" keys (a permutation)
      - {id: x1, b: 6, d: 0, mu: 0}
      - {id: x2, b: 8, d: 0, mu: 0}
    kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}
    scaling: {K: 1000, epsilon: "K^-4/5", sigma: 0}
    initial: {x0: "3*K"}             # integer counts, or "a*K" (floored)
    mode: all_neighbors              # or occupied_only
    horizon: {value: 2.3333333333333335, units: ln_inv_eps}
    mutation_law: {name: always_fitter, parameters: {b_increment: 2}}
    probes:
      - {trait: x1, level: 0.3, direction: up, label: S-eta-x1}
    seed: 42
    replicas: 50
    grid: 201                        # trajectory sample times (optional)

``epsilon``/``sigma`` (and probe levels) accept literal numbers or the
power form ``"K^-a"`` with a decimal or rational exponent, resolved
against K before anything runs.  ``horizon`` is either a plain number
(natural time units) or ``{value, units}`` with units one of

    natural         use the value as-is
    ln_inv_eps      multiply by ln(1/epsilon)
    mutation_scale  divide by K*sigma

Semantic errors carry the offending file line; resolution is a pure
function of the document and the seed field, so identical inputs always
produce identical resolved scenarios.  An optional ``diploid`` section
(``alleles`` plus a ``phi`` table) builds a genotype space for diploid
runs; see :mod:`tstree.diploid`.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from . import __version__
from .analysis import HittingProbe
from .diploid import AlleleSpace, GenotypeSpace, build_genotype_space, make_allele_law
from .microsim import Scenario
from .mutation import make_law
from .traitspace import KernelSpec, TraitSpec


def _diploid_guard(rng, space, source_rank):
    raise RuntimeError(
        "allele mutations rebuild the genotype space and belong to the "
        "genotype jump process (run-gst / sample_gst_path); microscopic "
        "diploid runs need sigma = 0"
    )

__all__ = [
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
]


class ScenarioError(ValueError):
    """Validation failure, anchored to a file line when one is known."""

    def __init__(self, message: str, *, source: str = "<scenario>", line: int | None = None):
        self.message = message
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")

    def record(self) -> dict:
        """Machine-readable error record (used by the CLI)."""
        return {
            "error": {
                "type": "scenario",
                "message": self.message,
                "file": self.source,
                "line": self.line,
            }
        }


_POWER_RE = re.compile(r"^\s*K\s*\^\s*(-?\d+(?:\.\d+)?)(?:\s*/\s*(\d+(?:\.\d+)?))?\s*$")


def resolve_scaling(value, K: int, *, field: str = "scaling") -> float:
    """Resolve a literal number or a K-power string like ``"K^-4/5"``."""
    if isinstance(value, bool):
        raise ValueError(f"{field}: expected a number or K-power string, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _POWER_RE.match(value)
        if not m:
            raise ValueError(
                f'{field}: bad K-power form {value!r} (expected e.g. "K^-0.8" or "K^-4/5")'
            )
        exponent = float(m.group(1))
        if m.group(2) is not None:
            denom = float(m.group(2))
            if denom == 0:
                raise ValueError(f"{field}: zero denominator in exponent {value!r}")
            exponent = exponent / denom
        return float(K) ** exponent
    raise ValueError(f"{field}: expected a number or K-power string, got {type(value).__name__}")


def _resolve_count(value, K: int, *, field: str) -> int:
    """Initial counts: nonnegative integers or ``"a*K"`` (floored)."""
    if isinstance(value, bool):
        raise ValueError(f"{field}: expected an integer count, got {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise ValueError(f"{field}: counts must be nonnegative, got {value}")
        return value
    if isinstance(value, float):
        if not value.is_integer() or value < 0:
            raise ValueError(f"{field}: counts must be nonnegative integers, got {value}")
        return int(value)
    if isinstance(value, str):
        m = re.match(r"^\s*(\d+(?:\.\d+)?)\s*\*\s*K\s*$", value)
        if not m:
            raise ValueError(f'{field}: bad count form {value!r} (expected an integer or "a*K")')
        return math.floor(float(m.group(1)) * K)
    raise ValueError(f"{field}: expected an integer count, got {type(value).__name__}")


# ---------------------------------------------------------------------------
# YAML loading with per-path line marks


def _collect_marks(node, path: tuple, marks: dict) -> None:
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = str(key_node.value)
            marks[path + (key,)] = key_node.start_mark.line + 1
            _collect_marks(value_node, path + (key,), marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _collect_marks(item, path + (i,), marks)


def _parse_document(text: str, source: str) -> tuple[dict, dict]:
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ScenarioError(f"YAML parse failure: {exc}", source=source, line=line) from exc
    if data is None:
        raise ScenarioError("empty scenario document", source=source, line=1)
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a mapping", source=source, line=1)
    marks: dict = {}
    if node is not None:
        _collect_marks(node, (), marks)
    return data, marks


def _mark_for(marks: dict, path: tuple) -> int | None:
    while path:
        if path in marks:
            return marks[path]
        path = path[:-1]
    return marks.get((), None)


# ---------------------------------------------------------------------------
# Overrides


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``dotted.path=value`` overrides to a parsed document (copy).

    Path components index mappings by key and sequences by integer;
    values are parsed as YAML scalars, so numbers and strings both work.
    """
    result = json.loads(json.dumps(data))  # deep copy of plain data
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, _, raw_value = item.partition("=")
        try:
            value = yaml.safe_load(raw_value) if raw_value != "" else ""
        except yaml.YAMLError:
            value = raw_value
        parts = key.strip().split(".")
        target = result
        for p, part in enumerate(parts[:-1]):
            idx: Any = int(part) if isinstance(target, list) else part
            try:
                target = target[idx]
            except (KeyError, IndexError, TypeError):
                raise ScenarioError(
                    f"override {item!r}: path component {'.'.join(parts[: p + 1])!r} not found"
                ) from None
        last: Any = parts[-1]
        if isinstance(target, list):
            try:
                last = int(last)
                target[last]
            except (ValueError, IndexError):
                raise ScenarioError(f"override {item!r}: bad list index {parts[-1]!r}") from None
        elif not isinstance(target, dict):
            raise ScenarioError(f"override {item!r}: cannot descend into a scalar")
        target[last] = value
    return result


# ---------------------------------------------------------------------------
# Resolution

_TOP_KEYS = {
    "name",
    "traits",
    "kernels",
    "scaling",
    "initial",
    "mode",
    "horizon",
    "mutation_law",
    "probes",
    "seed",
    "replicas",
    "grid",
    "migration_edges",
    "diploid",
    "eta",
}

_HORIZON_UNITS = ("natural", "ln_inv_eps", "mutation_scale")


@dataclass(frozen=True)
class LoadedScenario:
    """A fully resolved scenario plus its run-control fields."""

    scenario: Scenario
    replicas: int
    probes: tuple[HittingProbe, ...]
    grid: int
    eta: float | None
    law_spec: dict | None
    genotype_space: GenotypeSpace | None
    allele_law: object | None
    raw: dict
    source: str

    def describe(self) -> dict:
        """Resolved parameters as plain data (the manifest's scenario block)."""
        sc = self.scenario
        return {
            "name": sc.name,
            "K": sc.K,
            "epsilon": sc.epsilon,
            "sigma": sc.sigma,
            "mode": sc.mode,
            "horizon": sc.horizon,
            "seed": sc.seed,
            "traits": [
                {"id": t.id, "b": t.b, "d": t.d, "mu": t.mu} for t in sc.space.traits
            ],
            "kernels": {
                "alpha_self": sc.space.kernel.alpha_self,
                "alpha_neighbor": sc.space.kernel.alpha_neighbor,
                "m_neighbor": sc.space.kernel.m_neighbor,
            },
            "initial": dict(sc.initial) if sc.initial is not None else None,
            "migration_edges": (
                [list(e) for e in sc.migration_edges]
                if sc.migration_edges is not None
                else None
            ),
            "mutation_law": self.law_spec,
            "probes": [
                {
                    "trait": p.trait,
                    "level": p.level,
                    "direction": p.direction,
                    "after": p.after,
                    "label": p.label,
                }
                for p in self.probes
            ],
            "replicas": self.replicas,
            "grid": self.grid,
            "eta": self.eta,
            "diploid": self.raw.get("diploid"),
        }


def _resolve(data: dict, marks: dict, source: str) -> LoadedScenario:
    def fail(message: str, *path) -> ScenarioError:
        return ScenarioError(message, source=source, line=_mark_for(marks, tuple(path)))

    def need(section: str, typ, where: dict | None = None, *prefix):
        container = data if where is None else where
        if section not in container:
            raise fail(f"missing required section {section!r}", *prefix)
        value = container[section]
        if not isinstance(value, typ):
            raise fail(
                f"section {section!r} must be a {typ.__name__}, got {type(value).__name__}",
                *prefix,
                section,
            )
        return value

    for key in data:
        if key not in _TOP_KEYS:
            raise fail(f"unknown section {key!r}", key)

    # --- scaling ---------------------------------------------------------
    scaling = need("scaling", dict)
    if "K" not in scaling:
        raise fail("scaling needs K", "scaling")
    K = scaling["K"]
    if isinstance(K, bool) or not isinstance(K, int) or K <= 0:
        raise fail(f"K must be a positive integer, got {K!r}", "scaling", "K")
    for key in scaling:
        if key not in ("K", "epsilon", "sigma"):
            raise fail(f"unknown scaling key {key!r}", "scaling", key)
    try:
        epsilon = resolve_scaling(scaling.get("epsilon", 0.0), K, field="epsilon")
        sigma = resolve_scaling(scaling.get("sigma", 0.0), K, field="sigma")
    except ValueError as exc:
        raise fail(str(exc), "scaling") from None

    # --- traits and kernels ----------------------------------------------
    kernels = need("kernels", dict)
    try:
        kernel = KernelSpec(
            alpha_self=float(kernels.get("alpha_self", 1.0)),
            alpha_neighbor=float(kernels.get("alpha_neighbor", 0.0)),
            m_neighbor=float(kernels.get("m_neighbor", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise fail(f"bad kernels: {exc}", "kernels") from None

    # --- diploid (alternative to traits) -----------------------------------
    genotype_space: GenotypeSpace | None = None
    if "diploid" in data:
        if "traits" in data:
            raise fail(
                "give either a traits section or a diploid section, not both "
                "(a diploid scenario's chain is induced by phi)",
                "traits",
            )
        dip = need("diploid", dict)
        for key in dip:
            if key not in ("alleles", "phi"):
                raise fail(f"unknown diploid key {key!r}", "diploid", key)
        alleles_raw = need("alleles", list, dip, "diploid")
        phi_raw = need("phi", list, dip, "diploid")
        phi_map: dict[tuple[str, str], tuple[TraitSpec, int]] = {}
        for i, entry in enumerate(phi_raw):
            if not isinstance(entry, dict) or "pair" not in entry:
                raise fail("each phi row needs a 'pair'", "diploid", "phi", i)
            pair = entry["pair"]
            if not isinstance(pair, list) or len(pair) != 2:
                raise fail("phi 'pair' must be a two-element list", "diploid", "phi", i)
            try:
                trait = TraitSpec(
                    id=str(entry.get("id", f"{min(map(str, pair))}|{max(map(str, pair))}")),
                    b=float(entry.get("b", 1.0)),
                    d=float(entry.get("d", 0.0)),
                    mu=float(entry.get("mu", 0.0)),
                )
                rank = int(entry["rank"])
            except (TypeError, ValueError, KeyError) as exc:
                raise fail(f"bad phi row: {exc}", "diploid", "phi", i) from None
            phi_map[(str(pair[0]), str(pair[1]))] = (trait, rank)
        try:
            genotype_space = build_genotype_space(
                AlleleSpace([str(a) for a in alleles_raw]), phi_map, kernel
            )
        except (ValueError, KeyError) as exc:
            raise fail(f"diploid section rejected: {exc}", "diploid") from None
        space = genotype_space.space
    else:
        traits_raw = need("traits", list)
        if not traits_raw:
            raise fail("traits list is empty", "traits")
        parsed: list[tuple[int, TraitSpec]] = []
        explicit_ranks = any(isinstance(t, dict) and "rank" in t for t in traits_raw)
        for i, entry in enumerate(traits_raw):
            if not isinstance(entry, dict) or "id" not in entry:
                raise fail("each trait needs at least an 'id'", "traits", i)
            for key in entry:
                if key not in ("id", "b", "d", "mu", "rank"):
                    raise fail(f"unknown trait key {key!r}", "traits", i, key)
            try:
                trait = TraitSpec(
                    id=str(entry["id"]),
                    b=float(entry.get("b", 1.0)),
                    d=float(entry.get("d", 0.0)),
                    mu=float(entry.get("mu", 0.0)),
                )
            except (TypeError, ValueError) as exc:
                raise fail(f"bad trait {entry.get('id')!r}: {exc}", "traits", i) from None
            if explicit_ranks:
                if "rank" not in entry:
                    raise fail(
                        "either give every trait a rank or none of them", "traits", i
                    )
            rank = entry.get("rank", i)
            if isinstance(rank, bool) or not isinstance(rank, int):
                raise fail(f"rank must be an integer, got {rank!r}", "traits", i, "rank")
            parsed.append((rank, trait))
        ranks = sorted(r for r, _ in parsed)
        if ranks != list(range(len(parsed))):
            raise fail(
                f"trait ranks must be a permutation of 0..{len(parsed) - 1}, got {ranks}",
                "traits",
            )
        parsed.sort(key=lambda pair: pair[0])

        from .traitspace import OrderedTraitSpace

        try:
            space = OrderedTraitSpace((t for _, t in parsed), kernel)
            space.require_valid()
        except ValueError as exc:
            raise fail(f"trait chain rejected: {exc}", "traits") from None

    # --- horizon -----------------------------------------------------------
    horizon_raw = data.get("horizon", 0.0)
    if isinstance(horizon_raw, dict):
        for key in horizon_raw:
            if key not in ("value", "units"):
                raise fail(f"unknown horizon key {key!r}", "horizon", key)
        if "value" not in horizon_raw:
            raise fail("horizon mapping needs a 'value'", "horizon")
        value = horizon_raw["value"]
        units = horizon_raw.get("units", "natural")
    else:
        value, units = horizon_raw, "natural"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise fail(f"horizon value must be a number, got {value!r}", "horizon")
    if units not in _HORIZON_UNITS:
        raise fail(
            f"horizon units must be one of {_HORIZON_UNITS}, got {units!r}",
            "horizon",
        )
    horizon = float(value)
    if units == "ln_inv_eps":
        if not 0.0 < epsilon < 1.0:
            raise fail(
                f"ln_inv_eps horizon needs 0 < epsilon < 1, have epsilon={epsilon}",
                "horizon",
            )
        horizon = horizon * math.log(1.0 / epsilon)
    elif units == "mutation_scale":
        if K * sigma <= 0.0:
            raise fail(
                f"mutation_scale horizon needs K*sigma > 0, have {K * sigma}",
                "horizon",
            )
        horizon = horizon / (K * sigma)
    if horizon < 0:
        raise fail("horizon must be nonnegative", "horizon")

    # --- initial -----------------------------------------------------------
    initial: dict[str, int] | None = None
    if "initial" in data:
        initial_raw = need("initial", dict)
        initial = {}
        for tid, count in initial_raw.items():
            tid = str(tid)
            if tid not in space.ids and (
                genotype_space is None or tid not in genotype_space.space.ids
            ):
                raise fail(f"initial names unknown trait {tid!r}", "initial", tid)
            try:
                initial[tid] = _resolve_count(count, K, field=f"initial.{tid}")
            except ValueError as exc:
                raise fail(str(exc), "initial", tid) from None

    # --- mode, law, probes, control fields ---------------------------------
    # gamete replacement needs both genotypes present, so diploid scenarios
    # default to occupied-only gating (overridable with an explicit mode)
    default_mode = "all_neighbors" if genotype_space is None else "occupied_only"
    mode = data.get("mode", default_mode)
    if mode not in ("all_neighbors", "occupied_only"):
        raise fail(f"mode must be all_neighbors or occupied_only, got {mode!r}", "mode")

    law = None
    allele_law = None
    law_spec = None
    if data.get("mutation_law") is not None:
        law_raw = need("mutation_law", dict)
        if "name" not in law_raw:
            raise fail("mutation_law needs a 'name'", "mutation_law")
        for key in law_raw:
            if key not in ("name", "parameters"):
                raise fail(f"unknown mutation_law key {key!r}", "mutation_law", key)
        params = law_raw.get("parameters") or {}
        if not isinstance(params, dict):
            raise fail("mutation_law parameters must be a mapping", "mutation_law")
        try:
            if genotype_space is not None:
                allele_law = make_allele_law(str(law_raw["name"]), **params)
            else:
                law = make_law(str(law_raw["name"]), **params)
        except (TypeError, ValueError, KeyError) as exc:
            raise fail(f"bad mutation law: {exc}", "mutation_law") from None
        law_spec = {"name": str(law_raw["name"]), "parameters": dict(params)}
    if genotype_space is not None and sigma > 0 and any(
        t.mu > 0 for t in genotype_space.space.traits
    ):
        # satisfies the engine's law requirement but refuses to fire:
        # allele mutations live in the genotype jump process
        law = _diploid_guard

    probes: list[HittingProbe] = []
    if data.get("probes") is not None:
        probes_raw = need("probes", list)
        chain_ids = space.ids if genotype_space is None else genotype_space.space.ids
        for i, entry in enumerate(probes_raw):
            if not isinstance(entry, dict):
                raise fail("each probe must be a mapping", "probes", i)
            for key in entry:
                if key not in ("trait", "level", "direction", "after", "label"):
                    raise fail(f"unknown probe key {key!r}", "probes", i, key)
            try:
                trait_id = str(entry["trait"])
                level = resolve_scaling(entry["level"], K, field="level")
                direction = str(entry["direction"])
            except (KeyError, ValueError) as exc:
                raise fail(f"bad probe: {exc}", "probes", i) from None
            if trait_id not in chain_ids:
                raise fail(f"probe names unknown trait {trait_id!r}", "probes", i)
            after = entry.get("after")
            if after is not None:
                if isinstance(after, bool) or not isinstance(after, int):
                    raise fail("probe 'after' must be an integer index", "probes", i)
                if not 0 <= after < i:
                    raise fail(
                        f"probe 'after' must reference an earlier probe, got {after}",
                        "probes",
                        i,
                    )
            try:
                probes.append(
                    HittingProbe(
                        trait=trait_id,
                        level=level,
                        direction=direction,  # type: ignore[arg-type]
                        after=after,
                        label=str(entry.get("label", "")),
                    )
                )
            except ValueError as exc:
                raise fail(f"bad probe: {exc}", "probes", i) from None

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise fail(f"seed must be a nonnegative integer, got {seed!r}", "seed")
    replicas = data.get("replicas", 1)
    if isinstance(replicas, bool) or not isinstance(replicas, int) or replicas < 1:
        raise fail(f"replicas must be a positive integer, got {replicas!r}", "replicas")
    grid = data.get("grid", 201)
    if isinstance(grid, bool) or not isinstance(grid, int) or grid < 2:
        raise fail(f"grid must be an integer >= 2, got {grid!r}", "grid")
    eta = data.get("eta")
    if eta is not None:
        try:
            eta = resolve_scaling(eta, K, field="eta")
        except ValueError as exc:
            raise fail(str(exc), "eta") from None
        if eta <= 0:
            raise fail(f"eta must be positive, got {eta}", "eta")

    migration_edges = None
    if data.get("migration_edges") is not None:
        edges_raw = need("migration_edges", list)
        migration_edges = []
        for i, edge in enumerate(edges_raw):
            if not isinstance(edge, list) or len(edge) != 2:
                raise fail("each migration edge is a [src, dst] pair", "migration_edges", i)
            migration_edges.append((str(edge[0]), str(edge[1])))
        migration_edges = tuple(migration_edges)

    name = str(data.get("name", "")) or Path(source).stem

    sim_space = space if genotype_space is None else genotype_space.space
    if genotype_space is not None and migration_edges is None:
        # gamete replacement: rank-adjacent genotypes sharing an allele
        edge_list = []
        for r in range(genotype_space.size - 1):
            g1, g2 = genotype_space.genotypes[r], genotype_space.genotypes[r + 1]
            if g1.shares_allele(g2):
                t1 = genotype_space.space.traits[r].id
                t2 = genotype_space.space.traits[r + 1].id
                edge_list += [(t1, t2), (t2, t1)]
        migration_edges = tuple(edge_list)

    try:
        scenario = Scenario(
            space=sim_space,
            K=K,
            epsilon=epsilon,
            sigma=sigma,
            mode=mode,  # type: ignore[arg-type]
            initial=initial,
            horizon=horizon,
            mutation_law=law,
            migration_edges=migration_edges,
            seed=seed,
            name=name,
        )
    except ValueError as exc:
        raise fail(f"scenario rejected: {exc}") from None

    return LoadedScenario(
        scenario=scenario,
        replicas=replicas,
        probes=tuple(probes),
        grid=grid,
        eta=eta,
        law_spec=law_spec,
        genotype_space=genotype_space,
        allele_law=allele_law,
        raw=data,
        source=source,
    )


def load_scenario_text(
    text: str, *, source: str = "<scenario>", overrides: Sequence[str] = ()
) -> LoadedScenario:
    """Parse and resolve a scenario document given as a string."""
    data, marks = _parse_document(text, source)
    if overrides:
        data = apply_overrides(data, overrides)
        marks = {}  # overridden documents lose their line anchors
    return _resolve(data, marks, source)


def load_scenario(path, *, overrides: Sequence[str] = ()) -> LoadedScenario:
    """Parse and resolve a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", source=str(path)) from exc
    return load_scenario_text(text, source=str(path), overrides=overrides)


# ---------------------------------------------------------------------------
# Advisory regime checks


def regime_report(scenario: Scenario) -> list[str]:
    """Advisory warnings for the asymptotic parameter windows.

    The separation claims live in the window 1 << K*eps << K with, when
    mutation is on, ln(1/eps) << 1/(K*sigma).  These are not sharp at
    finite K, so violations are reported as warnings, never errors.
    """
    notes: list[str] = []
    K, eps, sigma = scenario.K, scenario.epsilon, scenario.sigma
    if eps > 0:
        if K * eps < 10.0:
            notes.append(
                f"K*epsilon = {K * eps:.4g} is not >> 1; migration-driven "
                "invasions may be dominated by demographic noise"
            )
        if eps > 0.1:
            notes.append(
                f"epsilon = {eps:.4g} is not << 1; the migration-rare regime "
                "does not apply"
            )
    if sigma > 0 and 0 < eps < 1:
        product = K * sigma * math.log(1.0 / eps)
        if product > 0.1:
            notes.append(
                f"K*sigma*ln(1/epsilon) = {product:.4g} is not << 1; fixation "
                "is not fast relative to the mutation scale"
            )
    return notes


# ---------------------------------------------------------------------------
# Manifests


def manifest_payload(
    loaded: LoadedScenario,
    *,
    kind: str,
    outputs: Sequence[str],
    walltime: float,
    extra: Mapping[str, Any] | None = None,
) -> dict:
    """Manifest content: resolved parameters, seed, version, wall time."""
    payload = {
        "format": "tstree-manifest/1",
        "kind": kind,
        "version": __version__,
        "walltime_s": walltime,
        "scenario": loaded.describe(),
        "outputs": list(outputs),
        "warnings": regime_report(loaded.scenario),
    }
    if extra:
        payload.update(extra)
    return payload


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> LoadedScenario:
    """Rebuild a fully resolved scenario from a manifest file.

    The manifest stores resolved numbers (shortest round-trip floats), so
    re-running from it reproduces the byte-identical trajectories.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read manifest: {exc}", source=str(path)) from exc
    if payload.get("format") != "tstree-manifest/1":
        raise ScenarioError(
            f"not a manifest (format={payload.get('format')!r})", source=str(path)
        )
    desc = payload.get("scenario")
    if not isinstance(desc, dict):
        raise ScenarioError("manifest has no scenario block", source=str(path))

    data: dict[str, Any] = {
        "name": desc.get("name", ""),
        "kernels": dict(desc.get("kernels", {})),
        "scaling": {
            "K": desc.get("K"),
            "epsilon": desc.get("epsilon", 0.0),
            "sigma": desc.get("sigma", 0.0),
        },
        "mode": desc.get("mode", "all_neighbors"),
        "horizon": desc.get("horizon", 0.0),
        "seed": desc.get("seed", 0),
        "replicas": desc.get("replicas", 1),
        "grid": desc.get("grid", 201),
    }
    if desc.get("initial") is not None:
        data["initial"] = dict(desc["initial"])
    if desc.get("migration_edges") is not None:
        data["migration_edges"] = [list(e) for e in desc["migration_edges"]]
    if desc.get("mutation_law") is not None:
        data["mutation_law"] = dict(desc["mutation_law"])
    if desc.get("probes"):
        data["probes"] = [
            {k: v for k, v in p.items() if v not in (None, "")}
            for p in desc["probes"]
        ]
    if desc.get("eta") is not None:
        data["eta"] = desc["eta"]
    if desc.get("diploid") is not None:
        data["diploid"] = desc["diploid"]
    else:
        data["traits"] = [dict(t) for t in desc.get("traits", [])]

    text = yaml.safe_dump(data, sort_keys=False)
    return load_scenario_text(text, source=str(path))
