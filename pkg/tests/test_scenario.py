"""Scenario schema, presets, CSV output, sweeps and the CLI."""

import json

import numpy as np
import pytest

import subrad as sr
from subrad.cli import main
from subrad.errors import ParseError, UnknownLabel, ValidationError
from subrad.scenario import format_csv, format_sweep_csv, parse_sweep, run_sweep

TINY_SCENARIO = {
    "name": "tiny",
    "system": {
        "emitters": ["qubit", "qubit"],
        "collective": [{"rate": 0.05, "weights": [1.0, 1.0]}],
        "frame": {"rotating": 1.0},
    },
    "initial": ["10"],
    "time": {"unit": "omega", "horizon": 100.0, "points": 11},
    "observables": ["energy", {"fidelity": {"target": "psi_minus"}}],
}


class TestParsing:
    def test_fig2_preset(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig2"))
        assert len(scenario.system.emitters) == 2
        assert all(e.levels == 2 for e in scenario.system.emitters)
        assert all(
            e.level_frequencies == (0.0, 1.0) for e in scenario.system.emitters
        )
        assert scenario.system.collective_channels[0].rate == pytest.approx(0.001)
        assert [label for label, _ in scenario.initials] == [
            "11", "10", "psi_minus", "psi_plus",
        ]
        assert scenario.time.horizon == pytest.approx(1e4)

    def test_negative_rate_rejected(self):
        bad = json.loads(json.dumps(TINY_SCENARIO))
        bad["system"]["collective"][0]["rate"] = -1.0
        with pytest.raises(ValidationError):
            sr.scenario_from_dict(bad)

    def test_empty_text_is_parse_error(self):
        with pytest.raises(ParseError):
            sr.parse_scenario("")

    def test_unknown_initial_label(self):
        bad = json.loads(json.dumps(TINY_SCENARIO))
        bad["initial"] = ["psi_wrong"]
        with pytest.raises(UnknownLabel):
            sr.scenario_from_dict(bad)

    def test_unknown_keys_rejected(self):
        bad = json.loads(json.dumps(TINY_SCENARIO))
        bad["extra"] = 1
        with pytest.raises(ValidationError):
            sr.scenario_from_dict(bad)

    def test_round_trip_is_identity(self):
        for preset in ("fig2", "fig3a", "fig3c", "fig3e-clockwork", "fig4", "nqubit:3"):
            first = sr.scenario_from_dict(sr.load_preset(preset))
            text = sr.dump_scenario(first)
            second = sr.parse_scenario(text)
            assert sr.dump_scenario(second) == text

    def test_weight_phases(self):
        data = json.loads(json.dumps(TINY_SCENARIO))
        data["system"]["collective"][0]["weights"] = [
            1.0,
            {"magnitude": 1.0, "phase": np.pi},
        ]
        scenario = sr.scenario_from_dict(data)
        assert scenario.system.collective_channels[0].weights[1] == pytest.approx(-1.0)


class TestRunScenario:
    def test_header_and_shape(self):
        scenario = sr.scenario_from_dict(TINY_SCENARIO)
        result = sr.run_scenario(scenario)
        assert result.header[0] == "t"
        assert result.header[-1] == "trace_error"
        assert "energy" in result.header
        assert "fidelity" in result.header
        assert result.rows.shape == (11, len(result.header))
        assert not result.breached

    def test_initial_restriction_and_suffixes(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig2"))
        full = sr.run_scenario(scenario)
        assert "energy:psi_minus" in full.header
        only = sr.run_scenario(scenario, initial="10")
        assert "energy" in only.header
        assert set(only.trajectories) == {"10"}

    def test_kappa_time_unit_rescales_grid(self):
        data = json.loads(json.dumps(TINY_SCENARIO))
        data["time"] = {"unit": "kappa", "horizon": 1.0, "points": 2}
        scenario = sr.scenario_from_dict(data)
        result = sr.run_scenario(scenario)
        # t column is in units of 1/rate; the evolution ran to t = 1/0.05
        assert result.rows[-1, 0] == pytest.approx(1.0)
        traj = result.trajectories["10"]
        assert traj.times[-1] == pytest.approx(1.0 / 0.05)

    def test_fixed_step_csv_is_byte_identical(self):
        scenario = sr.scenario_from_dict(TINY_SCENARIO)
        texts = []
        for _ in range(2):
            result = sr.run_scenario(scenario, fixed_step=1.0)
            texts.append(format_csv(result.header, result.rows))
        assert texts[0] == texts[1]
        assert texts[0].splitlines()[0] == "t,energy,fidelity,trace_error"

    def test_checks_columns(self):
        data = json.loads(json.dumps(TINY_SCENARIO))
        data["observables"] = ["energy", "checks"]
        result = sr.run_scenario(sr.scenario_from_dict(data))
        assert "herm_error" in result.header
        assert "min_eigenvalue" in result.header


class TestPresets:
    def test_listing_contains_required_entries(self):
        names = dict(sr.list_presets())
        for required in ("fig2", "fig3a", "fig3c", "fig3e-clockwork", "fig4", "nqubit"):
            assert required in names

    def test_fig3a_parameters(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig3a"))
        rates = [ch.rate for ch in scenario.system.local_channels]
        assert rates == [pytest.approx(5e-5)] * 2
        kappa = scenario.system.collective_channels[0].rate
        assert rates[0] / kappa == pytest.approx(0.05)

    def test_fig3c_parameters(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig3c"))
        assert not scenario.system.local_channels
        freqs = scenario.system.emitters[1].level_frequencies
        assert freqs[1] - 1.0 == pytest.approx(0.1)

    def test_fig4_parameters(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig4"))
        assert len(scenario.system.emitters) == 3
        assert scenario.system.collective_channels[0].rate == pytest.approx(0.001)

    def test_clockwork_parameters(self):
        scenario = sr.scenario_from_dict(sr.load_preset("fig3e-clockwork"))
        kappa = scenario.system.collective_channels[0].rate
        assert kappa == pytest.approx(1.0)
        local = {ch.emitter_index: ch.rate for ch in scenario.system.local_channels}
        assert local[1] / kappa == pytest.approx(3.0)   # qudit repump
        assert local[0] / kappa == pytest.approx(0.1)   # qubit loss
        assert scenario.system.drives[0].amplitude / kappa == pytest.approx(2.0)
        assert scenario.time.unit == "kappa"

    def test_nqubit_parameterization(self):
        five = sr.scenario_from_dict(sr.load_preset("nqubit:5"))
        assert len(five.system.emitters) == 5
        phased = sr.scenario_from_dict(sr.load_preset("nqubit:2:0,3.14159"))
        w = phased.system.collective_channels[0].weights
        assert w[1].real == pytest.approx(-1.0, abs=1e-4)

    def test_unknown_preset(self):
        with pytest.raises(UnknownLabel):
            sr.load_preset("fig9")


class TestSweeps:
    def make_base(self, horizon, alpha=0.0):
        base = {
            "name": "sweep-base",
            "system": {
                "emitters": ["qubit", "qubit"],
                "collective": [{"rate": 0.001, "weights": [1.0, 1.0]}],
                "local": [
                    {"rate": alpha, "emitter": 0},
                    {"rate": alpha, "emitter": 1},
                ],
                "frame": {"rotating": 1.0},
            },
            "initial": ["10"],
            "time": {"unit": "omega", "horizon": horizon, "points": 51},
            "observables": ["energy", {"fidelity": {"target": "psi_minus"}}],
        }
        return base

    def test_detuning_sweep_final_energy(self):
        sweep = parse_sweep(
            json.dumps(
                {
                    "base": self.make_base(2e4),
                    "axes": {"system.emitters[1].frequencies[1]": [1.0, 1.1]},
                    "reductions": [
                        {"name": "final_energy", "kind": "final", "column": "energy"}
                    ],
                }
            )
        )
        result = run_sweep(sweep)
        assert result.header == (
            "system.emitters[1].frequencies[1]",
            "final_energy",
            "status",
        )
        assert len(result.rows) == 2
        resonant, detuned = result.rows
        assert resonant[1] == pytest.approx(0.5, abs=1e-3)
        assert abs(detuned[1]) < 1e-6
        assert all(row[-1] == "ok" for row in result.rows)

    def test_local_rate_sweep_fitted_slow_rate(self):
        sweep = parse_sweep(
            json.dumps(
                {
                    "base": self.make_base(3e4),
                    "axes": {
                        "system.local[0].rate|system.local[1].rate": [0.0, 5e-5]
                    },
                    "reductions": [
                        {
                            "name": "slow_rate",
                            "kind": "fit_exp_rate",
                            "column": "fidelity",
                            "t_min": 5000.0,
                        }
                    ],
                }
            )
        )
        result = run_sweep(sweep)
        off, on = result.rows
        assert abs(off[1]) < 1e-8
        assert on[1] == pytest.approx(2 * 5e-5, rel=0.05)

    def test_empty_axis_rejected(self):
        with pytest.raises(ValidationError):
            parse_sweep(
                json.dumps({"base": self.make_base(100.0), "axes": {"system.local[0].rate": []}})
            )

    def test_per_point_failure_keeps_sweep_complete(self):
        sweep = parse_sweep(
            json.dumps(
                {
                    "base": self.make_base(100.0),
                    "axes": {"system.collective[0].rate": [0.001, -1.0, 0.002]},
                    "reductions": [
                        {"name": "final_energy", "kind": "final", "column": "energy"}
                    ],
                }
            )
        )
        result = run_sweep(sweep)
        assert len(result.rows) == 3
        statuses = [row[-1] for row in result.rows]
        assert statuses[0] == "ok"
        assert statuses[1].startswith("error:")
        assert statuses[2] == "ok"

    def test_sweep_csv_format(self):
        sweep = parse_sweep(
            json.dumps(
                {
                    "base": self.make_base(100.0),
                    "axes": {"system.collective[0].rate": [0.001]},
                }
            )
        )
        text = format_sweep_csv(run_sweep(sweep))
        lines = text.strip().splitlines()
        assert len(lines) == 2
        assert lines[1].endswith(",ok")


class TestCli:
    def test_presets_and_dump(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "fig3a" in out and "nqubit" in out
        assert main(["dump", "fig2"]) == 0
        dumped = capsys.readouterr().out
        assert sr.dump_scenario(sr.parse_scenario(dumped)) == dumped

    def test_run_writes_csv(self, tmp_path):
        scenario_path = tmp_path / "tiny.json"
        scenario_path.write_text(json.dumps(TINY_SCENARIO))
        out_path = tmp_path / "out.csv"
        assert main(["run", str(scenario_path), "--out", str(out_path)]) == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "t,energy,fidelity,trace_error"
        assert len(lines) == 12

    def test_run_preset_with_initial_flag(self, tmp_path):
        out_path = tmp_path / "fig2.csv"
        assert main(["run", "fig2", "--out", str(out_path), "--initial", "10"]) == 0
        assert out_path.read_text().splitlines()[0] == (
            "t,energy,fidelity,fidelity_sqrt,herm_error,min_eigenvalue,trace_error"
        )

    def test_plot_meta(self, tmp_path):
        scenario_path = tmp_path / "tiny.json"
        scenario_path.write_text(json.dumps(TINY_SCENARIO))
        meta_path = tmp_path / "meta.json"
        out_path = tmp_path / "out.csv"
        assert main([
            "run", str(scenario_path), "--out", str(out_path), "--plot-meta", str(meta_path)
        ]) == 0
        meta = json.loads(meta_path.read_text())
        assert meta["x"]["column"] == "t"
        assert "energy" in meta["series"]

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", str(bad)]) == 2
        assert main(["run", "no-such-preset"]) == 2

    def test_validation_error_exit_code(self, tmp_path):
        bad = json.loads(json.dumps(TINY_SCENARIO))
        bad["system"]["collective"][0]["rate"] = -2.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert main(["run", str(path)]) == 2

    def test_sweep_cli(self, tmp_path):
        sweep = {
            "base": TINY_SCENARIO,
            "axes": {"system.collective[0].rate": [0.05, 0.1]},
            "reductions": [{"name": "E", "kind": "final", "column": "energy"}],
        }
        sweep_path = tmp_path / "sweep.json"
        sweep_path.write_text(json.dumps(sweep))
        out_path = tmp_path / "sweep.csv"
        assert main(["sweep", str(sweep_path), "--out", str(out_path)]) == 0
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "system.collective[0].rate,E,status"
        assert len(lines) == 3

    def test_fixed_step_determinism_via_cli(self, tmp_path):
        scenario_path = tmp_path / "tiny.json"
        scenario_path.write_text(json.dumps(TINY_SCENARIO))
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["run", str(scenario_path), "--out", str(out), "--fixed-step", "0.5"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
