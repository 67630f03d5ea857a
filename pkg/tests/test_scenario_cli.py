"""Scenario files, overrides, manifests, trajectory IO, and the CLI."""

import json
import math

import numpy as np
import pytest

from tstree import (
    OdeSystem,
    Scenario,
    ScenarioError,
    TraitSpec,
    TstState,
    apply_overrides,
    integrate,
    load_manifest,
    load_scenario,
    load_scenario_text,
    manifest_payload,
    read_trajectory,
    regime_report,
    resolve_scaling,
    run,
    tst_insert,
    write_manifest,
    write_micro_trajectory,
    write_ode_trajectory,
    write_tst_trajectory,
)
from tstree.cli import main

from conftest import make_chain

MICRO_DOC = """\
name: demo
traits:
  - {id: x0, b: 3, d: 0, mu: 0}
  - {id: x1, b: 6, d: 0, mu: 0}
  - {id: x2, b: 8, d: 0, mu: 0}
kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}
scaling: {K: 50, epsilon: 0.1}
initial: {x0: "3*K"}
mode: all_neighbors
horizon: 2.0
probes:
  - {trait: x1, level: 0.05, direction: up}
seed: 7
replicas: 2
grid: 5
"""

TST_DOC = """\
name: tstdemo
traits:
  - {id: x0, b: 3, d: 0, mu: 0.3}
kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}
scaling: {K: 100, sigma: 0.01}
horizon: {value: 2.0, units: mutation_scale}
mutation_law: {name: always_fitter, parameters: {mu_factor: 0.5}}
seed: 3
replicas: 2
grid: 5
"""

DIPLOID_DOC = """\
name: dipdemo
diploid:
  alleles: [A, B]
  phi:
    - {pair: [A, A], b: 3, rank: 0, mu: 0.3}
    - {pair: [A, B], b: 6, rank: 1, mu: 0.3}
    - {pair: [B, B], b: 8, rank: 2, mu: 0.3}
kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}
scaling: {K: 100, sigma: 0.01, epsilon: 0.02}
initial: {"A|A": 300, "B|B": 800}
horizon: {value: 0.5, units: mutation_scale}
mutation_law: {name: ladder_alleles, parameters: {mu_hat_factor: 0.5}}
seed: 5
replicas: 2
"""


# ------------------------------------------------------------ resolve_scaling

class TestResolveScaling:
    def test_literals(self):
        assert resolve_scaling(0.25, 1000) == 0.25
        assert resolve_scaling(2, 1000) == 2.0

    def test_power_forms(self):
        K = 1000
        assert resolve_scaling("K^-0.8", K) == pytest.approx(K**-0.8, rel=1e-15)
        assert resolve_scaling("K^-4/5", K) == resolve_scaling("K^-0.8", K)
        assert resolve_scaling("K^-2", K) == pytest.approx(1e-6)
        assert resolve_scaling(" K ^ -4 / 5 ", K) == resolve_scaling("K^-0.8", K)

    def test_bad_forms(self):
        with pytest.raises(ValueError, match="bad K-power"):
            resolve_scaling("K**-0.8", 100)
        with pytest.raises(ValueError, match="zero denominator"):
            resolve_scaling("K^-4/0", 100)
        with pytest.raises(ValueError):
            resolve_scaling(True, 100)
        with pytest.raises(ValueError):
            resolve_scaling([0.1], 100)


# ------------------------------------------------------------------- loading

class TestLoadScenario:
    def test_full_document(self):
        loaded = load_scenario_text(MICRO_DOC)
        sc = loaded.scenario
        assert sc.name == "demo"
        assert sc.K == 50 and sc.epsilon == 0.1 and sc.sigma == 0.0
        assert sc.initial == {"x0": 150}
        assert sc.horizon == 2.0
        assert sc.mode == "all_neighbors"
        assert sc.space.ids == ("x0", "x1", "x2")
        assert loaded.replicas == 2 and loaded.grid == 5
        assert len(loaded.probes) == 1
        assert loaded.probes[0].trait == "x1" and loaded.probes[0].direction == "up"
        assert loaded.genotype_space is None

    def test_horizon_units(self):
        base = MICRO_DOC.replace(
            "horizon: 2.0", "horizon: {value: 3.5, units: ln_inv_eps}"
        )
        loaded = load_scenario_text(base)
        assert loaded.scenario.horizon == pytest.approx(3.5 * math.log(1 / 0.1))

        ms = TST_DOC  # mutation_scale: value / (K * sigma)
        assert load_scenario_text(ms).scenario.horizon == pytest.approx(2.0 / (100 * 0.01))

        with pytest.raises(ScenarioError, match="ln_inv_eps"):
            load_scenario_text(
                MICRO_DOC.replace("epsilon: 0.1", "epsilon: 0")
                .replace("horizon: 2.0", "horizon: {value: 1, units: ln_inv_eps}")
            )

    def test_scaled_fields(self):
        doc = MICRO_DOC.replace("epsilon: 0.1", 'epsilon: "K^-4/5"')
        loaded = load_scenario_text(doc)
        assert loaded.scenario.epsilon == pytest.approx(50**-0.8, rel=1e-15)

        doc = MICRO_DOC.replace("level: 0.05", 'level: "K^-1"')
        assert load_scenario_text(doc).probes[0].level == pytest.approx(1 / 50)

    def test_initial_count_forms(self):
        assert load_scenario_text(
            MICRO_DOC.replace('{x0: "3*K"}', '{x0: "2.5*K", x1: 7}')
        ).scenario.initial == {"x0": 125, "x1": 7}
        with pytest.raises(ScenarioError, match="count"):
            load_scenario_text(MICRO_DOC.replace('{x0: "3*K"}', "{x0: 3.5}"))
        with pytest.raises(ScenarioError, match="unknown trait"):
            load_scenario_text(MICRO_DOC.replace('{x0: "3*K"}', "{zz: 5}"))

    def test_rank_keys_reorder_traits(self):
        doc = """\
name: r
traits:
  - {id: x2, b: 8, rank: 2}
  - {id: x0, b: 3, rank: 0}
  - {id: x1, b: 6, rank: 1}
kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}
scaling: {K: 10}
"""
        assert load_scenario_text(doc).scenario.space.ids == ("x0", "x1", "x2")

    def test_kernels_without_neighbor_coupling_break_the_order(self):
        # alpha_neighbor defaults to 0, under which no pair can have
        # opposite-sign invasion fitnesses: the chain is rejected
        doc = MICRO_DOC.replace(
            "kernels: {alpha_self: 1, alpha_neighbor: 1, m_neighbor: 0.5}",
            "kernels: {alpha_self: 1}",
        )
        with pytest.raises(ScenarioError, match="trait chain rejected"):
            load_scenario_text(doc)

    def test_rank_validation(self):
        doc = MICRO_DOC.replace("{id: x0, b: 3, d: 0, mu: 0}",
                                "{id: x0, b: 3, d: 0, mu: 0, rank: 0}")
        with pytest.raises(ScenarioError, match="every trait a rank"):
            load_scenario_text(doc)
        doc2 = """\
traits:
  - {id: a, b: 3, rank: 0}
  - {id: b, b: 6, rank: 2}
kernels: {alpha_self: 1}
scaling: {K: 10}
"""
        with pytest.raises(ScenarioError, match="permutation"):
            load_scenario_text(doc2)

    def test_unknown_sections_carry_line_numbers(self):
        doc = "name: t\njunk: 1\nscaling: {K: 10}\n"
        with pytest.raises(ScenarioError) as exc:
            load_scenario_text(doc, source="f.yaml")
        assert exc.value.line == 2
        assert exc.value.source == "f.yaml"
        assert "junk" in exc.value.message

    def test_unknown_trait_key_line(self):
        doc = """\
name: t
traits:
  - {id: x0, b: 3}
  - {id: x1, b: 6,
     zap: 1}
kernels: {alpha_self: 1, alpha_neighbor: 1}
scaling: {K: 10}
"""
        with pytest.raises(ScenarioError) as exc:
            load_scenario_text(doc)
        assert "zap" in exc.value.message
        assert exc.value.line == 5

    def test_document_shape_errors(self):
        with pytest.raises(ScenarioError, match="empty"):
            load_scenario_text("")
        with pytest.raises(ScenarioError, match="mapping"):
            load_scenario_text("- 1\n- 2\n")
        with pytest.raises(ScenarioError, match="parse failure"):
            load_scenario_text("a: [unclosed\nb: }{\n")
        with pytest.raises(ScenarioError, match="missing required section"):
            load_scenario_text("name: t\ntraits: [{id: a, b: 1}]\nkernels: {}\n")

    def test_k_validation(self):
        with pytest.raises(ScenarioError, match="positive integer"):
            load_scenario_text(MICRO_DOC.replace("K: 50", "K: 0"))
        with pytest.raises(ScenarioError, match="positive integer"):
            load_scenario_text(MICRO_DOC.replace("K: 50", "K: true"))
        with pytest.raises(ScenarioError, match="unknown scaling key"):
            load_scenario_text(MICRO_DOC.replace("epsilon: 0.1", "epsilon: 0.1, zz: 2"))

    def test_traits_xor_diploid(self):
        doc = DIPLOID_DOC + "traits:\n  - {id: x0, b: 3}\n"
        with pytest.raises(ScenarioError, match="not both"):
            load_scenario_text(doc)

    def test_invalid_chain_rejected(self):
        doc = MICRO_DOC.replace("{id: x1, b: 6", "{id: x1, b: 2")
        with pytest.raises(ScenarioError, match="trait chain rejected"):
            load_scenario_text(doc)

    def test_probe_validation(self):
        doc = MICRO_DOC.replace("direction: up", "direction: up, after: 0")
        with pytest.raises(ScenarioError, match="earlier probe"):
            load_scenario_text(doc)
        doc = MICRO_DOC.replace("direction: up", "direction: sideways")
        with pytest.raises(ScenarioError, match="bad probe"):
            load_scenario_text(doc)
        doc = MICRO_DOC.replace("trait: x1", "trait: zz")
        with pytest.raises(ScenarioError, match="unknown trait"):
            load_scenario_text(doc)

    def test_control_field_validation(self):
        with pytest.raises(ScenarioError, match="replicas"):
            load_scenario_text(MICRO_DOC.replace("replicas: 2", "replicas: 0"))
        with pytest.raises(ScenarioError, match="grid"):
            load_scenario_text(MICRO_DOC.replace("grid: 5", "grid: 1"))
        with pytest.raises(ScenarioError, match="seed"):
            load_scenario_text(MICRO_DOC.replace("seed: 7", "seed: -1"))
        with pytest.raises(ScenarioError, match="eta"):
            load_scenario_text(MICRO_DOC + "eta: -0.5\n")
        assert load_scenario_text(MICRO_DOC + 'eta: "K^-1"\n').eta == pytest.approx(0.02)

    def test_mode_and_law_validation(self):
        with pytest.raises(ScenarioError, match="mode"):
            load_scenario_text(MICRO_DOC.replace("all_neighbors", "sometimes"))
        with pytest.raises(ScenarioError, match="bad mutation law"):
            load_scenario_text(TST_DOC.replace("always_fitter", "unheard_of"))

    def test_migration_edges(self):
        doc = MICRO_DOC + "migration_edges: [[x0, x1], [x1, x0]]\n"
        loaded = load_scenario_text(doc)
        assert loaded.scenario.migration_edges == (("x0", "x1"), ("x1", "x0"))
        bad = MICRO_DOC + "migration_edges: [[x0, x2]]\n"
        with pytest.raises(ScenarioError, match="scenario rejected"):
            load_scenario_text(bad)

    def test_diploid_document(self):
        loaded = load_scenario_text(DIPLOID_DOC)
        gs = loaded.genotype_space
        assert gs is not None
        assert [g.label for g in gs.genotypes] == ["A|A", "A|B", "B|B"]
        # gamete replacement requires both endpoints present
        assert loaded.scenario.mode == "occupied_only"
        explicit = load_scenario_text(DIPLOID_DOC + "mode: all_neighbors\n")
        assert explicit.scenario.mode == "all_neighbors"
        # gamete-replacement edges are auto-derived
        assert set(loaded.scenario.migration_edges) == {
            ("A|A", "A|B"), ("A|B", "A|A"), ("A|B", "B|B"), ("B|B", "A|B"),
        }
        assert loaded.allele_law is not None

    def test_load_scenario_from_file(self, tmp_path):
        p = tmp_path / "demo.yaml"
        p.write_text(MICRO_DOC)
        loaded = load_scenario(p, overrides=["scaling.K=100"])
        assert loaded.scenario.K == 100
        assert loaded.scenario.initial == {"x0": 300}  # "3*K" re-resolved
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(tmp_path / "absent.yaml")

    def test_name_defaults_to_file_stem(self, tmp_path):
        p = tmp_path / "nameless.yaml"
        p.write_text(MICRO_DOC.replace("name: demo\n", ""))
        assert load_scenario(p).scenario.name == "nameless"


class TestOverrides:
    def test_nested_and_indexed_paths(self):
        data = {"scaling": {"K": 50}, "traits": [{"id": "x0", "b": 3}]}
        out = apply_overrides(data, ["scaling.K=500", "traits.0.b=4.5"])
        assert out["scaling"]["K"] == 500
        assert out["traits"][0]["b"] == 4.5
        assert data["scaling"]["K"] == 50  # original untouched

    def test_values_parse_as_yaml_scalars(self):
        out = apply_overrides({"a": {}}, ["a.s=K^-4/5", "a.n=2", "a.f=0.25"])
        assert out["a"] == {"s": "K^-4/5", "n": 2, "f": 0.25}

    def test_errors(self):
        with pytest.raises(ScenarioError, match="key=value"):
            apply_overrides({}, ["oops"])
        with pytest.raises(ScenarioError, match="not found"):
            apply_overrides({"a": {}}, ["b.c=1"])
        with pytest.raises(ScenarioError, match="list index"):
            apply_overrides({"a": [1]}, ["a.9=1"])
        with pytest.raises(ScenarioError, match="scalar"):
            apply_overrides({"a": 1}, ["a.b=1"])


def test_scenario_error_record():
    err = ScenarioError("bad thing", source="f.yaml", line=12)
    assert str(err) == "f.yaml:12: bad thing"
    assert err.record() == {
        "error": {"type": "scenario", "message": "bad thing", "file": "f.yaml", "line": 12}
    }


class TestRegimeReport:
    def test_flags_small_k_epsilon_and_large_epsilon(self):
        sc = load_scenario_text(MICRO_DOC).scenario  # K*eps = 5, eps = 0.1
        notes = regime_report(sc)
        assert any("not >> 1" in n for n in notes)

    def test_quiet_in_the_asymptotic_window(self):
        sc = Scenario(space=make_chain((3.0, 6.0, 8.0)), K=10_000, epsilon=1e-3,
                      horizon=1.0, initial={"x0": 30000})
        assert regime_report(sc) == []

    def test_flags_slow_fixation(self):
        space = make_chain((3.0, 6.0, 8.0), mu=1.0)
        sc = Scenario(space=space, K=1000, epsilon=1e-2, sigma=1e-3,
                      horizon=1.0, initial={"x0": 3000},
                      mutation_law=lambda r, s, k: None)
        notes = regime_report(sc)
        assert any("not << 1" in n for n in notes)


class TestManifests:
    def test_payload_and_round_trip(self, tmp_path):
        loaded = load_scenario_text(MICRO_DOC, source="demo.yaml")
        payload = manifest_payload(
            loaded, kind="ssa", outputs=["a.csv"], walltime=1.25,
            extra={"statuses": ["horizon"]},
        )
        assert payload["format"] == "tstree-manifest/1"
        assert payload["kind"] == "ssa"
        assert payload["outputs"] == ["a.csv"]
        assert payload["statuses"] == ["horizon"]
        assert isinstance(payload["warnings"], list)

        path = tmp_path / "manifest.json"
        write_manifest(path, payload)
        reloaded = load_manifest(path)
        assert reloaded.describe() == loaded.describe()
        assert reloaded.replicas == loaded.replicas
        assert reloaded.grid == loaded.grid

    def test_diploid_round_trip(self, tmp_path):
        loaded = load_scenario_text(DIPLOID_DOC, source="dip.yaml")
        path = tmp_path / "manifest.json"
        write_manifest(path, manifest_payload(loaded, kind="gst", outputs=[], walltime=0.0))
        reloaded = load_manifest(path)
        assert reloaded.describe() == loaded.describe()
        assert reloaded.genotype_space is not None

    def test_rejects_non_manifests(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text(json.dumps({"format": "other"}))
        with pytest.raises(ScenarioError, match="not a manifest"):
            load_manifest(p)
        p2 = tmp_path / "y.json"
        p2.write_text(json.dumps({"format": "tstree-manifest/1"}))
        with pytest.raises(ScenarioError, match="no scenario block"):
            load_manifest(p2)
        with pytest.raises(ScenarioError, match="cannot read"):
            load_manifest(tmp_path / "absent.json")


# -------------------------------------------------------------- trajectory IO

class TestTrajectoryIO:
    def _micro_result(self):
        sc = load_scenario_text(MICRO_DOC).scenario
        return run(sc, grid=5), sc

    def test_micro_round_trip_is_exact(self, tmp_path):
        res, sc = self._micro_result()
        p1 = tmp_path / "a.csv"
        write_micro_trajectory(p1, res)
        assert p1.read_text().splitlines()[0] == "time,trait_id,mass"
        table = read_trajectory(p1)
        times, ids, masses = table.mass_matrix()
        assert ids == ["x0", "x1", "x2"]
        np.testing.assert_array_equal(times, res.grid_times)
        np.testing.assert_array_equal(masses, res.grid_mass)
        # write -> read -> write is byte-identical
        p2 = tmp_path / "b.csv"
        write_micro_trajectory(p2, res)
        assert p1.read_bytes() == p2.read_bytes()

    def test_micro_write_requires_grid(self, tmp_path):
        sc = load_scenario_text(MICRO_DOC).scenario
        res = run(sc)
        with pytest.raises(ValueError, match="grid"):
            write_micro_trajectory(tmp_path / "x.csv", res)

    def test_ode_round_trip(self, tmp_path):
        space = make_chain((3.0,))
        system = OdeSystem(space=space, epsilon=0.0)
        res = integrate(system, np.array([0.5]), 2.0, grid=9)
        p = tmp_path / "ode.csv"
        write_ode_trajectory(p, res, space)
        times, ids, masses = read_trajectory(p).mass_matrix()
        assert ids == ["x0"]
        np.testing.assert_array_equal(times, res.times)
        np.testing.assert_array_equal(masses, res.states)

    def test_tst_file_keeps_chain_attributes(self, tmp_path):
        state0 = TstState.initial(make_chain((3.0,), mu=1.0))
        grown = tst_insert(state0, 0, TraitSpec(id="m1", b=5.0, d=0.0, mu=0.2), 1)
        grown = TstState(grown.space, grown.config, 0.7)
        p = tmp_path / "tst.csv"
        write_tst_trajectory(p, [state0, grown])
        table = read_trajectory(p)
        assert table.header == ("time", "trait_id", "b", "d", "mass")
        assert len(table) == 1 + 2  # one-trait block, then two-trait block
        assert table.columns["b"] == [3.0, 3.0, 5.0]
        assert table.columns["time"] == [0.0, 0.7, 0.7]
        # masses: before the jump x0 holds 3; after it the mutant holds 5
        assert table.columns["mass"] == [3.0, 0.0, 5.0]

    def test_reader_rejects_malformed_files(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,trait_id,mass\n0.0,x0,1.0,9\n")
        with pytest.raises(ValueError, match="expected 3 fields"):
            read_trajectory(p)
        p.write_text("time,trait_id\n")
        with pytest.raises(ValueError, match="lacks required column"):
            read_trajectory(p)
        p.write_text("")
        with pytest.raises(ValueError, match="empty file"):
            read_trajectory(p)

    def test_mass_matrix_rejects_incomplete_blocks(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text(
            "time,trait_id,mass\n0.0,x0,1.0\n0.0,x1,0.0\n1.0,x0,1.0\n"
        )
        with pytest.raises(ValueError, match="complete blocks"):
            read_trajectory(p).mass_matrix()


# ------------------------------------------------------------------------ CLI

def write_doc(tmp_path, doc, name="scenario.yaml"):
    p = tmp_path / name
    p.write_text(doc)
    return p


class TestCliRunSsa:
    def test_run_rerun_and_seed_override(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        out1 = tmp_path / "out1"
        assert main(["run-ssa", "--scenario", str(scen), "--out", str(out1)]) == 0
        files = sorted(f.name for f in out1.iterdir())
        assert files == ["demo_rep0000.csv", "demo_rep0001.csv", "manifest.json"]
        manifest = json.loads((out1 / "manifest.json").read_text())
        assert manifest["format"] == "tstree-manifest/1"
        assert manifest["kind"] == "ssa"
        assert manifest["statuses"] == ["horizon", "horizon"]
        assert manifest["probe_labels"] == ["x1:up@0.05"]
        assert len(manifest["probe_times"]) == 2

        # re-running from the manifest reproduces the trajectory bytes
        out2 = tmp_path / "out2"
        assert main(["run-ssa", "--scenario", str(out1 / "manifest.json"),
                     "--out", str(out2)]) == 0
        for name in ("demo_rep0000.csv", "demo_rep0001.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m2["scenario"] == manifest["scenario"]
        assert m2["probe_times"] == manifest["probe_times"]

        # a different seed changes the sample path
        out3 = tmp_path / "out3"
        assert main(["run-ssa", "--scenario", str(scen), "--out", str(out3),
                     "--seed", "99"]) == 0
        assert (out1 / "demo_rep0000.csv").read_bytes() != \
            (out3 / "demo_rep0000.csv").read_bytes()
        capsys.readouterr()

    def test_replicas_flag(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        out = tmp_path / "out"
        assert main(["run-ssa", "--scenario", str(scen), "--out", str(out),
                     "--replicas", "3"]) == 0
        assert len(list(out.glob("*_rep*.csv"))) == 3
        capsys.readouterr()

    def test_diploid_with_sigma_is_refused(self, tmp_path, capsys):
        scen = write_doc(tmp_path, DIPLOID_DOC)
        code = main(["run-ssa", "--scenario", str(scen), "--out", str(tmp_path / "o")])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "usage"
        assert "run-gst" in err["error"]["message"]

    def test_scenario_error_exits_2(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC.replace("{id: x1, b: 6", "{id: x1, b: 2"))
        code = main(["run-ssa", "--scenario", str(scen), "--out", str(tmp_path / "o")])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "scenario"
        assert err["error"]["file"].endswith("scenario.yaml")


class TestCliRunOde:
    def test_writes_trajectory_and_manifest(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        out = tmp_path / "out"
        assert main(["run-ode", "--scenario", str(scen), "--out", str(out)]) == 0
        csv_path = out / "demo_ode.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "time,trait_id,mass"
        assert len(lines) == 1 + 5 * 3  # grid 5 x 3 traits
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["kind"] == "ode"
        assert manifest["status"] == "completed"
        times, ids, masses = read_trajectory(csv_path).mass_matrix()
        assert ids == ["x0", "x1", "x2"]
        assert masses[0, 0] == pytest.approx(3.0)
        capsys.readouterr()

    def test_needs_initial(self, tmp_path, capsys):
        doc = MICRO_DOC.replace('initial: {x0: "3*K"}\n', "")
        scen = write_doc(tmp_path, doc)
        assert main(["run-ode", "--scenario", str(scen), "--out", str(tmp_path / "o")]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "usage"


class TestCliRunTst:
    def test_jump_paths(self, tmp_path, capsys):
        scen = write_doc(tmp_path, TST_DOC)
        out = tmp_path / "out"
        assert main(["run-tst", "--scenario", str(scen), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["kind"] == "tst"
        assert manifest["horizon_mutation_scale"] == pytest.approx(2.0)
        assert len(manifest["jumps"]) == 2
        table = read_trajectory(out / "tstdemo_tst_rep0000.csv")
        assert table.header == ("time", "trait_id", "b", "d", "mass")
        assert len(table) >= 1
        capsys.readouterr()

    def test_immutable_chain_yields_single_state(self, tmp_path, capsys):
        doc = TST_DOC.replace("mu: 0.3", "mu: 0")
        scen = write_doc(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["run-tst", "--scenario", str(scen), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["jumps"] == [0, 0]
        table = read_trajectory(out / "tstdemo_tst_rep0000.csv")
        assert len(table) == 1  # one block of the one-trait chain
        capsys.readouterr()

    def test_diploid_scenario_redirected(self, tmp_path, capsys):
        scen = write_doc(tmp_path, DIPLOID_DOC)
        assert main(["run-tst", "--scenario", str(scen), "--out", str(tmp_path / "o")]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert "run-gst" in err["error"]["message"]


class TestCliRunGst:
    def test_genotype_paths(self, tmp_path, capsys):
        scen = write_doc(tmp_path, DIPLOID_DOC)
        out = tmp_path / "out"
        assert main(["run-gst", "--scenario", str(scen), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["kind"] == "gst"
        assert manifest["horizon_mutation_scale"] == pytest.approx(0.5)
        table = read_trajectory(out / "dipdemo_gst_rep0000.csv")
        assert table.header == ("time", "genotype", "trait_id", "b", "d", "mass")
        assert table.columns["genotype"][:3] == ["A|A", "A|B", "B|B"]
        capsys.readouterr()

    def test_needs_diploid_section(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        assert main(["run-gst", "--scenario", str(scen), "--out", str(tmp_path / "o")]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert "diploid" in err["error"]["message"]


class TestCliAnalyze:
    def _ssa_dir(self, tmp_path, capsys) -> str:
        scen = write_doc(tmp_path, MICRO_DOC)
        out = tmp_path / "runs"
        assert main(["run-ssa", "--scenario", str(scen), "--out", str(out)]) == 0
        capsys.readouterr()
        return str(out)

    def test_probes_from_manifest(self, tmp_path, capsys):
        rundir = self._ssa_dir(tmp_path, capsys)
        table_path = tmp_path / "summary.csv"
        assert main(["analyze", f"{rundir}/*_rep*.csv", "--out", str(table_path)]) == 0
        capsys.readouterr()
        lines = table_path.read_text().splitlines()
        assert lines[0] == "scenario,K,epsilon,sigma,probe,mean,stderr,censored,replicas"
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[0] == "demo" and row[4] == "x1:up@0.05"
        assert row[8] == "2"
        float(row[5])  # the probe fills in both replicas: mean is numeric

    def test_cli_probe_spec(self, tmp_path, capsys):
        rundir = self._ssa_dir(tmp_path, capsys)
        assert main(["analyze", f"{rundir}/*_rep*.csv",
                     "--probe", "x2:0.1:up:label=rise", "--K", "50"]) == 0
        stdout = capsys.readouterr().out
        assert "rise" in stdout

    def test_bad_probe_spec(self, tmp_path, capsys):
        rundir = self._ssa_dir(tmp_path, capsys)
        assert main(["analyze", f"{rundir}/*_rep*.csv", "--probe", "x1:up"]) == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "runtime"

    def test_empty_glob_is_usage_error(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "nothing*.csv")]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "usage"
        assert "glob" in err["error"]["message"]


class TestCliCompare:
    def test_report(self, tmp_path, capsys):
        micro_scen = write_doc(tmp_path, MICRO_DOC, "micro.yaml")
        tst_scen = write_doc(tmp_path, TST_DOC, "tst.yaml")
        mdir, tdir = tmp_path / "m", tmp_path / "t"
        assert main(["run-ssa", "--scenario", str(micro_scen), "--out", str(mdir)]) == 0
        assert main(["run-tst", "--scenario", str(tst_scen), "--out", str(tdir)]) == 0
        capsys.readouterr()
        report_path = tmp_path / "report.json"
        assert main([
            "compare",
            "--micro", f"{mdir}/*_rep*.csv",
            "--tst", f"{tdir}/*_rep*.csv",
            "--t-grid", "0.5,1.0",
            "--eta", "0.3",
            "--sigma", "0.5",
            "--out", str(report_path),
        ]) == 0
        capsys.readouterr()
        report = json.loads(report_path.read_text())
        assert set(report) == {
            "abs_diff", "band_3se", "bins", "bins_within_band", "eta",
            "micro_freq", "n_micro", "n_tst", "t_grid", "tst_freq", "tv_distance",
        }
        assert report["n_micro"] == 2 and report["n_tst"] == 2
        assert report["t_grid"] == [0.5, 1.0]
        assert isinstance(report["bins_within_band"], bool)
        for freqs in (report["micro_freq"], report["tst_freq"]):
            for row in freqs:
                assert sum(row) == pytest.approx(1.0)

    def test_needs_files_on_both_sides(self, tmp_path, capsys):
        assert main(["compare", "--micro", str(tmp_path / "none*.csv"),
                     "--tst", str(tmp_path / "none*.csv"),
                     "--t-grid", "1.0", "--eta", "0.3"]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "usage"


class TestCliCheck:
    def test_valid_scenario_passes(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        report_path = tmp_path / "check.json"
        assert main(["check", "--scenario", str(scen), "--out", str(report_path)]) == 0
        stdout = capsys.readouterr().out
        for line in ("A1: PASS", "A2: PASS", "B1: PASS", "C1: PASS"):
            assert line in stdout
        # the per-step relaxation bound cannot hold on an order-valid chain;
        # it is reported, not enforced
        assert "B3: INFO-FAIL" in stdout
        report = json.loads(report_path.read_text())
        assert set(report["verdicts"]) == {"A1", "A2", "B1", "B3", "C1"}
        assert report["verdicts"]["B3"]["informational"] is True

    def test_overrides_apply(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC)
        # baseline: K*eps = 5 < 10 draws an advisory
        assert main(["check", "--scenario", str(scen)]) == 0
        assert "advisory:" in capsys.readouterr().out
        # raising K through an override clears it (K*eps = 1000, eps <= 0.1)
        assert main(["check", "--scenario", str(scen),
                     "--override", "scaling.K=10000"]) == 0
        assert "advisory:" not in capsys.readouterr().out

    def test_invalid_chain_fails(self, tmp_path, capsys):
        scen = write_doc(tmp_path, MICRO_DOC.replace("{id: x1, b: 6", "{id: x1, b: 2"))
        assert main(["check", "--scenario", str(scen)]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "scenario"


class TestCliParser:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_missing_required_arguments(self):
        with pytest.raises(SystemExit):
            main(["run-ssa"])
