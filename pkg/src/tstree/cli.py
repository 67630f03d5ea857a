"""Command-line experiment runner.

Subcommands:

    run-ssa   stochastic replicas -> trajectory files + manifest
    run-ode   deterministic limit -> one trajectory file + manifest
    run-tst   substitution-tree jump paths -> trajectory files + manifest
    run-gst   genotype jump paths (diploid scenarios) -> files + manifest
    analyze   hitting-time summary table from trajectory files
    compare   occupied-atom distributions, micro files vs jump-path files
    check     assumption verdicts (A1/A2/B1/B3/C1) plus regime advisories

``--scenario`` accepts a YAML scenario or a previously written
``manifest.json``; re-running from a manifest reproduces the trajectory
bytes exactly.  Validation and runtime failures exit nonzero with a
machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob as _glob
import json
import math
import sys
import time as _time
from pathlib import Path

import numpy as np

from .analysis import HittingProbe, attach_probes, probe_label, replica_seeds
from .diploid import GstState, sample_gst_path
from .equilibria import TstState, sample_tst_path
from .microsim import run
from .odelimit import OdeSystem, integrate
from .scenario import (
    LoadedScenario,
    ScenarioError,
    load_manifest,
    load_scenario,
    manifest_payload,
    regime_report,
    write_manifest,
)
from .trajectory import (
    read_trajectory,
    write_gst_trajectory,
    write_micro_trajectory,
    write_ode_trajectory,
    write_tst_trajectory,
)
from .traitspace import check_b3

__all__ = ["main"]


def _error(record: dict, code: int) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def _runtime_error(message: str, **fields) -> int:
    return _error({"error": {"type": "runtime", "message": message, **fields}}, 1)


def _usage_error(message: str, **fields) -> int:
    return _error({"error": {"type": "usage", "message": message, **fields}}, 2)


def _load(args) -> LoadedScenario:
    path = Path(args.scenario)
    overrides = list(args.override or [])
    if path.suffix == ".json":
        loaded = load_manifest(path)
        # manifests are already resolved; CLI overrides still apply below
        if overrides:
            from .scenario import apply_overrides, load_scenario_text
            import yaml

            data = apply_overrides(loaded.raw, overrides)
            loaded = load_scenario_text(
                yaml.safe_dump(data, sort_keys=False), source=str(path)
            )
    else:
        loaded = load_scenario(path, overrides=overrides)
    if getattr(args, "seed", None) is not None:
        loaded = dataclasses.replace(
            loaded, scenario=loaded.scenario.with_overrides(seed=args.seed)
        )
    if getattr(args, "replicas", None) is not None:
        if args.replicas < 1:
            raise ScenarioError("--replicas must be >= 1", source=str(path))
        loaded = dataclasses.replace(loaded, replicas=args.replicas)
    return loaded


def _print_advisories(loaded: LoadedScenario) -> None:
    for note in regime_report(loaded.scenario):
        print(f"warning: {note}", file=sys.stderr)


def _probe_times_row(times: np.ndarray) -> list:
    return [None if math.isnan(t) else float(t) for t in np.atleast_1d(times)]


# ---------------------------------------------------------------------------
# run-* subcommands


def cmd_run_ssa(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    if loaded.genotype_space is not None and sc.sigma > 0:
        return _usage_error(
            "microscopic diploid runs need sigma = 0; allele mutations are "
            "the genotype jump process (run-gst)"
        )
    _print_advisories(loaded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = replica_seeds(sc.seed, loaded.replicas)
    t0 = _time.perf_counter()
    files, statuses, probe_rows = [], [], []
    for r in range(loaded.replicas):
        result = run(
            sc.with_overrides(seed=int(seeds[r])),
            grid=loaded.grid,
            probes=loaded.probes or None,
        )
        name = f"{sc.name}_rep{r:04d}.csv"
        write_micro_trajectory(out / name, result)
        files.append(name)
        statuses.append(result.status)
        if loaded.probes:
            probe_rows.append(_probe_times_row(result.probe_times))
    payload = manifest_payload(
        loaded,
        kind="ssa",
        outputs=files,
        walltime=_time.perf_counter() - t0,
        extra={
            "statuses": statuses,
            "probe_labels": [probe_label(p, i) for i, p in enumerate(loaded.probes)],
            "probe_times": probe_rows,
        },
    )
    write_manifest(out / "manifest.json", payload)
    print(f"wrote {len(files)} replica trajectories to {out}")
    return 0


def cmd_run_ode(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    if sc.initial is None:
        return _usage_error("run-ode needs an 'initial' section")
    _print_advisories(loaded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    xi0 = np.array(
        [sc.initial.get(t.id, 0) / sc.K for t in sc.space.traits], dtype=float
    )
    system = OdeSystem.from_scenario(sc)
    t0 = _time.perf_counter()
    result = integrate(
        system, xi0, sc.horizon, grid=loaded.grid, probes=loaded.probes or None
    )
    name = f"{sc.name}_ode.csv"
    write_ode_trajectory(out / name, result, sc.space)
    payload = manifest_payload(
        loaded,
        kind="ode",
        outputs=[name],
        walltime=_time.perf_counter() - t0,
        extra={
            "status": result.status,
            "steps_accepted": result.n_accepted,
            "steps_rejected": result.n_rejected,
            "probe_labels": [probe_label(p, i) for i, p in enumerate(loaded.probes)],
            "probe_times": (
                [_probe_times_row(result.probe_times)] if loaded.probes else []
            ),
        },
    )
    write_manifest(out / "manifest.json", payload)
    print(f"wrote deterministic trajectory to {out / name}")
    return 0


def _never_called_law(rng, space, source_rank):
    raise RuntimeError("jump sampled with no mutation law configured")


def cmd_run_tst(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    if loaded.genotype_space is not None:
        return _usage_error("diploid scenarios use run-gst for jump paths")
    _print_advisories(loaded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    horizon = sc.horizon * sc.K * sc.sigma  # mutation-scale units
    law = sc.mutation_law or _never_called_law
    init = TstState.initial(sc.space)
    seeds = replica_seeds(sc.seed, loaded.replicas)
    t0 = _time.perf_counter()
    files, jumps = [], []
    for r in range(loaded.replicas):
        path = sample_tst_path(init, horizon, law, seed=int(seeds[r]))
        name = f"{sc.name}_tst_rep{r:04d}.csv"
        write_tst_trajectory(out / name, path)
        files.append(name)
        jumps.append(len(path) - 1)
    payload = manifest_payload(
        loaded,
        kind="tst",
        outputs=files,
        walltime=_time.perf_counter() - t0,
        extra={"horizon_mutation_scale": horizon, "jumps": jumps},
    )
    write_manifest(out / "manifest.json", payload)
    print(f"wrote {len(files)} jump paths to {out}")
    return 0


def cmd_run_gst(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    if loaded.genotype_space is None:
        return _usage_error("run-gst needs a diploid section in the scenario")
    _print_advisories(loaded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    horizon = sc.horizon * sc.K * sc.sigma
    law = loaded.allele_law
    if law is None:
        if any(t.mu > 0 for t in loaded.genotype_space.space.traits) and horizon > 0:
            return _usage_error(
                "run-gst needs a mutation_law (allele law) when any mu > 0"
            )
        law = _never_called_law
    init = GstState.initial(loaded.genotype_space)
    seeds = replica_seeds(sc.seed, loaded.replicas)
    t0 = _time.perf_counter()
    files, jumps = [], []
    for r in range(loaded.replicas):
        path = sample_gst_path(init, horizon, law, seed=int(seeds[r]))
        name = f"{sc.name}_gst_rep{r:04d}.csv"
        write_gst_trajectory(out / name, path)
        files.append(name)
        jumps.append(len(path) - 1)
    payload = manifest_payload(
        loaded,
        kind="gst",
        outputs=files,
        walltime=_time.perf_counter() - t0,
        extra={"horizon_mutation_scale": horizon, "jumps": jumps},
    )
    write_manifest(out / "manifest.json", payload)
    print(f"wrote {len(files)} genotype jump paths to {out}")
    return 0


# ---------------------------------------------------------------------------
# analyze


def _parse_probe_spec(spec: str) -> HittingProbe:
    parts = spec.split(":")
    if len(parts) < 3:
        raise ValueError(
            f"probe spec {spec!r} is not trait:level:direction[:after=N][:label=S]"
        )
    trait, level, direction = parts[0], float(parts[1]), parts[2]
    after = None
    label = ""
    for extra in parts[3:]:
        key, _, value = extra.partition("=")
        if key == "after":
            after = int(value)
        elif key == "label":
            label = value
        else:
            raise ValueError(f"probe spec {spec!r}: unknown option {key!r}")
    return HittingProbe(trait=trait, level=level, direction=direction, after=after, label=label)


def _expand_globs(patterns) -> list[str]:
    files: list[str] = []
    for pattern in patterns:
        matches = sorted(_glob.glob(pattern))
        files.extend(m for m in matches if m not in files)
    return files


def _sibling_manifest(path: Path) -> dict | None:
    candidate = path.parent / "manifest.json"
    if candidate.exists():
        try:
            payload = json.loads(candidate.read_text())
        except json.JSONDecodeError:
            return None
        if payload.get("format") == "tstree-manifest/1":
            return payload
    return None


def cmd_analyze(args) -> int:
    files = _expand_globs(args.inputs)
    if not files:
        return _usage_error("no input files match the given globs", globs=args.inputs)
    cli_probes = [_parse_probe_spec(s) for s in (args.probe or [])]

    groups: dict[str, list[str]] = {}
    for f in files:
        groups.setdefault(str(Path(f).parent), []).append(f)

    rows = []
    file_errors = []
    for group_dir, group_files in sorted(groups.items()):
        manifest = _sibling_manifest(Path(group_files[0]))
        desc = (manifest or {}).get("scenario", {})
        kind = (manifest or {}).get("kind", "")
        K = desc.get("K") if kind in ("ssa", "") else None
        probes = cli_probes
        if not probes and desc.get("probes"):
            probes = [
                HittingProbe(
                    trait=p["trait"],
                    level=p["level"],
                    direction=p["direction"],
                    after=p.get("after"),
                    label=p.get("label") or "",
                )
                for p in desc["probes"]
            ]
        if not probes:
            return _usage_error(
                "no probes: pass --probe or point at runs whose manifest has probes",
                group=group_dir,
            )
        collected = np.full((len(group_files), len(probes)), np.nan)
        used = 0
        for f in group_files:
            try:
                table = read_trajectory(f)
                times, ids, masses = table.mass_matrix()
                collected[used] = attach_probes(
                    times, masses, ids, probes, K=args.K if args.K is not None else K
                )
                used += 1
            except (ValueError, KeyError, OSError) as exc:
                file_errors.append({"file": f, "message": str(exc)})
        if used == 0:
            continue
        collected = collected[:used]
        for j, p in enumerate(probes):
            col = collected[:, j]
            filled = col[~np.isnan(col)]
            rows.append(
                {
                    "scenario": desc.get("name", Path(group_dir).name),
                    "K": desc.get("K", ""),
                    "epsilon": desc.get("epsilon", ""),
                    "sigma": desc.get("sigma", ""),
                    "probe": probe_label(p, j),
                    "mean": float(filled.mean()) if filled.size else "",
                    "stderr": (
                        float(filled.std(ddof=1) / math.sqrt(filled.size))
                        if filled.size >= 2
                        else ""
                    ),
                    "censored": int(np.isnan(col).sum()),
                    "replicas": used,
                }
            )

    for err in file_errors:
        print(json.dumps({"file_error": err}, sort_keys=True), file=sys.stderr)
    if not rows:
        return _runtime_error("no readable trajectories", files=len(files))

    header = ["scenario", "K", "epsilon", "sigma", "probe", "mean", "stderr", "censored", "replicas"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} summary rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# compare


def _occupied_at(times: np.ndarray, masses: np.ndarray, when: float, eta: float) -> int:
    idx = int(np.searchsorted(times, when, side="right")) - 1
    idx = max(idx, 0)
    return int((masses[idx] >= eta).sum())


def cmd_compare(args) -> int:
    micro_files = _expand_globs(args.micro)
    tst_files = _expand_globs(args.tst)
    if not micro_files or not tst_files:
        return _usage_error(
            "compare needs at least one file on each side",
            micro=len(micro_files),
            tst=len(tst_files),
        )
    t_grid = [float(t) for t in args.t_grid.split(",") if t.strip()]
    if not t_grid or any(t < 0 for t in t_grid):
        return _usage_error(f"bad --t-grid {args.t_grid!r}")
    t_grid = sorted(t_grid)

    manifest = _sibling_manifest(Path(micro_files[0]))
    desc = (manifest or {}).get("scenario", {})
    K = args.K if args.K is not None else desc.get("K")
    sigma = args.sigma if args.sigma is not None else desc.get("sigma")
    if not K or not sigma:
        return _usage_error(
            "compare needs K and sigma (from the micro manifest or --K/--sigma)"
        )
    k_sigma = float(K) * float(sigma)
    eta = args.eta

    micro_counts = np.zeros((len(micro_files), len(t_grid)), dtype=np.int64)
    for i, f in enumerate(micro_files):
        times, ids, masses = read_trajectory(f).mass_matrix()
        for j, t in enumerate(t_grid):
            micro_counts[i, j] = _occupied_at(times, masses, t / k_sigma, eta)

    tst_counts = np.zeros((len(tst_files), len(t_grid)), dtype=np.int64)
    for i, f in enumerate(tst_files):
        table = read_trajectory(f)
        jump_times = []
        for t in table.columns["time"]:
            if not jump_times or t != jump_times[-1]:
                jump_times.append(t)
        jt = np.asarray(jump_times)
        time_col = np.asarray(table.columns["time"])
        mass_col = np.asarray(table.columns["mass"])
        for j, t in enumerate(t_grid):
            idx = int(np.searchsorted(jt, t, side="right")) - 1
            idx = max(idx, 0)
            block = mass_col[time_col == jt[idx]]
            tst_counts[i, j] = int((block > 0).sum())

    n_bins = int(max(micro_counts.max(), tst_counts.max())) + 1
    report = {
        "t_grid": t_grid,
        "eta": eta,
        "n_micro": len(micro_files),
        "n_tst": len(tst_files),
        "bins": list(range(n_bins)),
    }
    micro_freq, tst_freq, diffs, bands, tv = [], [], [], [], []
    for j in range(len(t_grid)):
        mf = np.bincount(micro_counts[:, j], minlength=n_bins) / len(micro_files)
        tf = np.bincount(tst_counts[:, j], minlength=n_bins) / len(tst_files)
        band = 3.0 * np.sqrt(
            mf * (1 - mf) / len(micro_files) + tf * (1 - tf) / len(tst_files)
        )
        micro_freq.append(mf.tolist())
        tst_freq.append(tf.tolist())
        diffs.append(np.abs(mf - tf).tolist())
        bands.append(band.tolist())
        tv.append(0.5 * float(np.abs(mf - tf).sum()))
    report.update(
        micro_freq=micro_freq,
        tst_freq=tst_freq,
        abs_diff=diffs,
        band_3se=bands,
        tv_distance=tv,
        bins_within_band=bool(
            np.all(np.asarray(diffs) <= np.asarray(bands) + 1e-12)
        ),
    )
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"wrote divergence report to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# check


def cmd_check(args) -> int:
    loaded = _load(args)
    sc = loaded.scenario
    space = sc.space
    verdicts: dict[str, dict] = {}

    a1_bad = [
        t.id
        for t in space.traits
        if not (t.b > 0 and t.d >= 0 and t.b - t.d > 0 and t.mu >= 0)
    ]
    verdicts["A1"] = {
        "pass": not a1_bad,
        "detail": "b > 0, d >= 0, b - d > 0, mu >= 0 for every trait",
        "violations": a1_bad,
    }

    a2_bad, b1_bad = [], []
    for i in range(len(space) - 1):
        up = space.fitness(i + 1, i)
        down = space.fitness(i, i + 1)
        if up == 0.0 or down == 0.0 or (up > 0) == (down > 0):
            a2_bad.append([i, i + 1, up, down])
        if not (up > 0 and down < 0):
            b1_bad.append([i, i + 1, up, down])
    verdicts["A2"] = {
        "pass": not a2_bad,
        "detail": "adjacent invasion fitnesses have strictly opposite signs",
        "violations": a2_bad,
    }
    verdicts["B1"] = {
        "pass": not b1_bad,
        "detail": "declared rank order is a strictly increasing fitness landscape",
        "violations": b1_bad,
    }

    b3 = check_b3(space)
    failing = sorted(i for i, ok in b3.items() if not ok)
    verdicts["B3"] = {
        "pass": not failing,
        "detail": "i/(b_i - d_i) >= sum_j 1/f(x_j, x_{j-1}) for each i >= 2 "
        "(reported verbatim; informational — see check_b3 docs)",
        "failing_indices": failing,
        "per_index": {str(i): ok for i, ok in b3.items()},
        "informational": True,
    }

    verdicts["C1"] = {
        "pass": not b1_bad,
        "detail": "a validated total order exists for the declared chain; "
        "mutant ranks are re-validated at every insertion",
        "violations": b1_bad,
    }

    advisories = regime_report(sc)
    report = {
        "scenario": sc.name,
        "verdicts": verdicts,
        "advisories": advisories,
    }
    for name in ("A1", "A2", "B1", "B3", "C1"):
        v = verdicts[name]
        status = "PASS" if v["pass"] else ("INFO-FAIL" if v.get("informational") else "FAIL")
        print(f"{name}: {status} — {v['detail']}")
    for note in advisories:
        print(f"advisory: {note}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    required_ok = all(
        verdicts[name]["pass"] for name in ("A1", "A2", "B1", "C1")
    )
    return 0 if required_ok else 1


# ---------------------------------------------------------------------------
# wiring


def _add_common(parser, *, scenario=True, out_required=True):
    if scenario:
        parser.add_argument("--scenario", required=True, help="YAML scenario or manifest.json")
        parser.add_argument(
            "--override",
            action="append",
            metavar="KEY=VALUE",
            help="dotted-path override, e.g. scaling.K=500 (repeatable)",
        )
    parser.add_argument("--out", required=out_required, help="output location")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tstree",
        description="Multi-time-scale adaptive-dynamics simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, has_replicas in (
        ("run-ssa", cmd_run_ssa, True),
        ("run-ode", cmd_run_ode, False),
        ("run-tst", cmd_run_tst, True),
        ("run-gst", cmd_run_gst, True),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--seed", type=int, help="override the scenario seed")
        if has_replicas:
            p.add_argument("--replicas", type=int, help="override the replica count")
        p.set_defaults(handler=fn)

    p = sub.add_parser("analyze")
    p.add_argument("inputs", nargs="+", help="trajectory files or globs")
    p.add_argument("--probe", action="append", metavar="TRAIT:LEVEL:DIR[:after=N][:label=S]")
    p.add_argument("--K", type=int, help="population scale for count thresholds")
    p.add_argument("--out", help="write the summary table here (default: stdout)")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("compare")
    p.add_argument("--micro", action="append", required=True, help="micro trajectory glob")
    p.add_argument("--tst", action="append", required=True, help="jump-path trajectory glob")
    p.add_argument("--t-grid", dest="t_grid", required=True, help="mutation-scale times, comma-separated")
    p.add_argument("--eta", type=float, required=True, help="occupation threshold (mass units)")
    p.add_argument("--K", type=int, help="population scale if no manifest")
    p.add_argument("--sigma", type=float, help="mutation parameter if no manifest")
    p.add_argument("--out", help="write the JSON report here (default: stdout)")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("check")
    p.add_argument("--scenario", required=True)
    p.add_argument(
        "--override", action="append", metavar="KEY=VALUE", help="dotted-path override"
    )
    p.add_argument("--out", help="write the JSON verdict report here")
    p.set_defaults(handler=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioError as exc:
        return _error(exc.record(), 2)
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        return _runtime_error(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
