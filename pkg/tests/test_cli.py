import json

import numpy as np
import pytest

from torusmfg.cli import main as cli_main
from torusmfg.scenario import SchemaError, bundled_scenario, parse_scenario


def minimal_scenario():
    return json.loads(json.dumps(bundled_scenario("separable_affine").raw))


class TestSchema:
    def test_bundled_fixtures_load(self):
        for name in ("separable_affine", "bilinear", "mean_field_attraction",
                     "negative_control"):
            scn = bundled_scenario(name)
            assert scn.spec.d == 1
            assert scn.horizon > 0

    def test_missing_field_pointer(self):
        data = minimal_scenario()
        del data["dynamics"]
        with pytest.raises(SchemaError) as err:
            parse_scenario(data)
        assert err.value.pointer == "/dynamics"

    def test_unknown_family_pointer(self):
        data = minimal_scenario()
        data["dynamics"]["family"] = "warp_drive"
        with pytest.raises(SchemaError) as err:
            parse_scenario(data)
        assert err.value.pointer == "/dynamics/family"

    def test_bad_weight_pointer(self):
        data = minimal_scenario()
        data["initial_measure"]["atoms"][0]["weight"] = 0.9
        with pytest.raises(SchemaError) as err:
            parse_scenario(data)
        assert err.value.pointer.startswith("/initial_measure")

    def test_solver_knob_range(self):
        data = minimal_scenario()
        data["solver"]["dt"] = 100.0
        with pytest.raises(SchemaError) as err:
            parse_scenario(data)
        assert err.value.pointer == "/solver/dt"

    def test_unknown_knob_rejected(self):
        data = minimal_scenario()
        data["solver"]["warp"] = 1
        with pytest.raises(SchemaError) as err:
            parse_scenario(data)
        assert err.value.pointer == "/solver/warp"

    def test_validate_dynamics_constants(self):
        scn = bundled_scenario("separable_affine")
        report = scn.spec.validate(n_probes=50, rng=np.random.default_rng(0),
                                   t_range=(0.0, scn.horizon))
        assert report["lipschitz_margin"] >= -1e-9
        assert report["speed_margin"] >= -1e-9


class TestCliCommands:
    def test_schema_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"name\": 1}")
        code = cli_main(["flow", "--scenario", str(bad), "--out", str(tmp_path)])
        assert code == 1

    def test_missing_scenario_is_structural(self, tmp_path):
        code = cli_main(["flow", "--scenario", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path)])
        assert code == 1

    def test_flow_writes_provenance_and_endpoint(self, tmp_path):
        code = cli_main(["flow", "--scenario", "separable_affine",
                         "--out", str(tmp_path), "--dt", "0.01"])
        assert code == 0
        header = (tmp_path / "flow.csv").read_text().splitlines()[0]
        assert header.startswith("# provenance:")
        prov = json.loads(header.split("# provenance: ")[1])
        assert "scenario_hash" in prov and "knobs" in prov
        summary = json.loads((tmp_path / "flow_summary.json").read_text())
        assert summary["provenance"]["scenario_hash"] == prov["scenario_hash"]

    def test_constant_drift_flow_endpoint_assertion(self, tmp_path):
        # f == c0 scenario: endpoint must equal the shifted start (checked in-run
        # through the inclusion residual staying at mesh scale)
        scenario = {
            "name": "drift", "seed": 5, "dimension": 1, "horizon": 0.5,
            "u_grid": [[0.0]], "v_grid": [[0.0]],
            "dynamics": {"family": "separable_affine",
                         "params": {"c0": [0.25], "bu": [[0.0]], "bv": [[0.0]]}},
            "lipschitz": 1.0,
            "modulus": {"family": "linear", "params": {"scale": 0.0}},
            "speed_bound": 0.25,
            "payoff": {"kind": "cylindrical", "outer": "identity",
                       "integrands": [{"basis": "cos", "wavenumber": 1,
                                       "coordinate": 0, "scale": 1.0}]},
            "initial_measure": {"atoms": [{"point": [0.1], "weight": 0.5},
                                          {"point": [0.7], "weight": 0.5}]},
            "solver": {"dt": 0.005},
        }
        path = tmp_path / "drift.json"
        path.write_text(json.dumps(scenario))
        code = cli_main(["flow", "--scenario", str(path), "--out", str(tmp_path)])
        assert code == 0
        rows = [line.split(",") for line in
                (tmp_path / "flow.csv").read_text().splitlines()[2:]]
        end = [float(r[2]) for r in rows if abs(float(r[1]) - 0.5) < 1e-9]
        assert sorted(np.round(end, 9)) == pytest.approx([0.225, 0.825], abs=1e-9)

    def test_stability_pass_exit_zero(self, tmp_path):
        code = cli_main(["check-stability", "--scenario", "separable_affine",
                         "--side", "v", "--mode", "infinitesimal",
                         "--functional", "payoff", "--s", "0.1",
                         "--out", str(tmp_path)])
        assert code == 0
        report = json.loads(
            (tmp_path / "stability_v_infinitesimal.json").read_text())
        assert report["verdict"] == "pass"
        assert "ladder" in report["witness"]

    def test_ladder_csv_flag(self, tmp_path):
        ladder = tmp_path / "lad.csv"
        code = cli_main(["derivative", "--scenario", "separable_affine",
                         "--side", "v", "--out", str(tmp_path),
                         "--ladder-csv", str(ladder)])
        assert code == 0
        lines = ladder.read_text().splitlines()
        assert lines[1] == "candidate,tau,quotient"
        assert len(lines) > 10

    def test_flow_byte_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert cli_main(["flow", "--scenario", "mean_field_attraction",
                             "--seed", "3", "--out", str(out)]) == 0
        assert (a / "flow.csv").read_bytes() == (b / "flow.csv").read_bytes()
        assert (a / "flow_summary.json").read_bytes() == (
            b / "flow_summary.json").read_bytes()

    def test_oracle_round_trip(self, tmp_path):
        from torusmfg.engine import GridValueFunctional

        code = cli_main(["oracle", "--scenario", "separable_affine",
                         "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "oracle.json").read_text())
        psi = GridValueFunctional.from_json(payload)
        assert psi.particles == 2 and psi.n_cells == 8
        from torusmfg import DiscreteMeasure, measure_space

        m = DiscreteMeasure(measure_space(1), (np.array([[0.2], [0.6]]),),
                            np.array([0.5, 0.5]))
        assert np.isfinite(psi.evaluate(0.1, m))

    def test_play_artifacts(self, tmp_path):
        code = cli_main(["play", "--scenario", "bilinear", "--cells", "4",
                         "--out", str(tmp_path)])
        assert code == 0
        manifest = json.loads((tmp_path / "play_manifest.json").read_text())
        assert manifest["ordering_ok"]
        lines = (tmp_path / "play_results.csv").read_text().splitlines()
        assert lines[1].split(",")[:4] == ["run_id", "side", "outcome", "mesh"]


def test_cli_integral_mode(tmp_path):
    code = cli_main(["check-stability", "--scenario", "separable_affine",
                     "--side", "v", "--mode", "integral", "--s", "0.1",
                     "--r", "0.4", "--budget", "80", "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "stability_v_integral.json").read_text())
    assert report["verdict"] == "pass"
    assert report["mode"] == "integral"
    assert report["details"]["evaluations"] <= 80
