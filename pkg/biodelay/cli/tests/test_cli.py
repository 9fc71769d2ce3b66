"""
End-to-end tests for the biodelay commands
"""

import json
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import solve_ivp
from typer.testing import CliRunner

from ..main import EXIT_INPUT_ERROR, EXIT_NO_EQUILIBRIUM, app, exit_code_for
from ...core.errors import NoEquilibriumError, SimulationBlowUpError, StepSizeError
from ...core.model import ZYMOMONAS_DILUTION, ZYMOMONAS_PARAMS

BUNDLED_DATASET = Path(__file__).resolve().parents[3] / "data" / "zymomonas.csv"


class TestCommands:

    def setup_method(self):
        """Temporary directory for configs and outputs"""
        self.temp_dir = Path(tempfile.mkdtemp())
        self.runner = CliRunner()

    def teardown_method(self):
        shutil.rmtree(self.temp_dir)

    def write_config(self, name: str, command: str, **sections) -> Path:
        path = self.temp_dir / name
        path.write_text(json.dumps({"version": 1, "command": command, **sections}))
        return path

    def invoke(self, *args: str):
        return self.runner.invoke(app, list(args))

    def test_stability_defaults(self):
        out = self.temp_dir / "stability"
        result = self.invoke("stability", "--out", str(out))
        assert result.exit_code == 0
        report = json.loads((out / "stability.json").read_text())
        assert report["metadata"]["tool"] == "biodelay"
        assert report["metadata"]["command"] == "stability"
        assert report["equilibrium"]["x_star"] == pytest.approx(4.813772, abs=1e-5)
        assert report["hurwitz_at_zero_delay"] is True
        assert report["verdict"] == "crossover_window"
        assert report["window"]["upper"] > 1.8

    def test_stability_at_reported_biomass(self):
        config = self.write_config("run.json", "stability", stability={"x_target": 4.77631})
        out = self.temp_dir / "stability"
        result = self.invoke("stability", "--config", str(config), "--out", str(out))
        assert result.exit_code == 0
        report = json.loads((out / "stability.json").read_text())
        assert report["equilibrium"]["input_level"] == pytest.approx(0.148466, abs=1e-5)
        assert report["crossing_coefficient"] == pytest.approx(0.10309, abs=1e-4)
        assert report["window"]["upper"] == pytest.approx(4.932, abs=1e-2)

    def test_no_equilibrium_exit_code(self):
        config = self.write_config("run.json", "stability", stability={"D": 0.0})
        result = self.invoke("stability", "--config", str(config), "--out", str(self.temp_dir))
        assert result.exit_code == EXIT_NO_EQUILIBRIUM

    def test_invalid_config_exit_code(self):
        config = self.write_config("run.json", "simulate", plots={})
        result = self.invoke("simulate", "--config", str(config), "--out", str(self.temp_dir))
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_missing_config_exit_code(self):
        result = self.invoke(
            "simulate", "--config", str(self.temp_dir / "absent.json"), "--out", str(self.temp_dir)
        )
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_coarse_step_exit_code(self):
        config = self.write_config("run.json", "simulate", simulation={"dt": 1.0})
        result = self.invoke("simulate", "--config", str(config), "--out", str(self.temp_dir))
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_simulate_outputs(self):
        config = self.write_config(
            "run.json",
            "simulate",
            history={"s_init": 1.85, "x_init": 4.9},
            simulation={"t_final": 20.0, "dt": 0.1},
        )
        out = self.temp_dir / "simulate"
        result = self.invoke("simulate", "--config", str(config), "--out", str(out))
        assert result.exit_code == 0
        for name in ("trajectory.csv", "phase.csv", "trajectory.json", "simulation.json"):
            assert (out / name).exists()
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0].startswith("# biodelay 0.1.0 command=simulate config_sha256=")
        assert lines[1] == "time,s,x,u"
        assert len(lines) == 2 + 201
        summary = json.loads((out / "simulation.json").read_text())
        assert summary["equilibrium"]["x_star"] == pytest.approx(4.813772, abs=1e-5)
        assert summary["deviation"]["final"] < summary["deviation"]["initial"]

    def test_reruns_are_byte_identical(self):
        config = self.write_config("run.json", "simulate", simulation={"t_final": 10.0})
        first, second = self.temp_dir / "first", self.temp_dir / "second"
        for out in (first, second):
            assert self.invoke("simulate", "--config", str(config), "--out", str(out)).exit_code == 0
        for name in ("trajectory.csv", "trajectory.json", "simulation.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_seed_recorded_in_metadata(self):
        out = self.temp_dir / "seeded"
        config = self.write_config("run.json", "simulate", simulation={"t_final": 5.0})
        result = self.invoke("simulate", "--config", str(config), "--out", str(out), "--seed", "7")
        assert result.exit_code == 0
        summary = json.loads((out / "simulation.json").read_text())
        assert summary["metadata"]["seed"] == 7

    def test_regions_outputs(self):
        config = self.write_config(
            "run.json",
            "regions",
            model={"tau": 7.0},
            stability={"x_target": 4.77631},
            regions={"sigmas": [0.0, 0.1], "omega_points": 200, "h_points": 20},
        )
        out = self.temp_dir / "regions"
        result = self.invoke("regions", "--config", str(config), "--out", str(out))
        assert result.exit_code == 0
        summary = json.loads((out / "regions.json").read_text())
        assert summary["files"] == ["region_sigma_0.json", "region_sigma_0.1.json"]
        assert "max_decay" not in summary
        region = json.loads((out / "region_sigma_0.1.json").read_text())
        assert region["sigma"] == 0.1
        assert (out / "boundaries.csv").read_text().splitlines()[1] == "sigma,type,n,segment,h,k_r"

    def test_fit_without_free_parameters(self):
        config = self.write_config("run.json", "fit", fit={"free": []})
        out = self.temp_dir / "fit"
        result = self.invoke(
            "fit", "--config", str(config), "--out", str(out), "--data", str(BUNDLED_DATASET)
        )
        assert result.exit_code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["iterations"] == 0
        assert fit["eps1_biomass"] == pytest.approx(0.794, abs=0.01)
        overlay = (out / "overlay.csv").read_text().splitlines()
        assert len(overlay) == 2 + 17

    def test_fit_iteration_cap_exit_code(self):
        config = self.write_config("run.json", "fit", fit={"free": ["a"], "max_iter": 0})
        out = self.temp_dir / "fit"
        result = self.invoke(
            "fit", "--config", str(config), "--out", str(out), "--data", str(BUNDLED_DATASET)
        )
        assert result.exit_code == 3
        assert (out / "fit.json").exists()

    def test_fit_missing_dataset(self):
        result = self.invoke(
            "fit", "--out", str(self.temp_dir), "--data", str(self.temp_dir / "absent.csv")
        )
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_regions_files_for_each_decay_rate(self):
        """Each sigma gets its own file and the boundary passes near its controller"""
        controllers = {0.0: 2.89, 0.02: 4.13, 0.05: 5.58, 0.24: 7.38}
        config = self.write_config(
            "run.json",
            "regions",
            model={"tau": 7.0},
            stability={"x_target": 4.77631},
            regions={"sigmas": list(controllers)},
        )
        out = self.temp_dir / "regions"
        result = self.invoke("regions", "--config", str(config), "--out", str(out))
        assert result.exit_code == 0
        summary = json.loads((out / "regions.json").read_text())
        assert summary["files"] == [
            "region_sigma_0.json",
            "region_sigma_0.02.json",
            "region_sigma_0.05.json",
            "region_sigma_0.24.json",
        ]
        for name, (sigma, h) in zip(summary["files"], controllers.items()):
            region = json.loads((out / name).read_text())
            assert region["sigma"] == sigma
            points = [p for curve in region["curves"] for p in curve["points"]]
            assert any(abs(ph - h) <= 0.1 and abs(pk - 0.031) <= 0.005 for ph, pk in points)

    def test_negative_decay_rate_exit_code(self):
        config = self.write_config("run.json", "regions", regions={"sigmas": [0.0, -0.1]})
        result = self.invoke("regions", "--config", str(config), "--out", str(self.temp_dir))
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_single_row_dataset_exit_code(self):
        data = self.temp_dir / "one.csv"
        data.write_text(
            "time,biomass,biomass_err,substrate,substrate_err\n0,0.1,0.005,10.0,0.5\n"
        )
        result = self.invoke("fit", "--out", str(self.temp_dir / "fit"), "--data", str(data))
        assert result.exit_code == EXIT_INPUT_ERROR

    def test_undelayed_simulation_matches_ode_solver(self):
        params = ZYMOMONAS_PARAMS.with_updates(tau=0.0)
        config = self.write_config(
            "run.json",
            "simulate",
            model={"tau": 0.0},
            history={"s_init": 1.85, "x_init": 4.9},
            simulation={"t_final": 20.0, "dt": 0.01},
        )
        out = self.temp_dir / "simulate"
        result = self.invoke("simulate", "--config", str(config), "--out", str(out))
        assert result.exit_code == 0
        frame = pd.read_csv(out / "trajectory.csv", comment="#")

        def rhs(t, y):
            return params.vector_field(y[0], y[1], y[1], ZYMOMONAS_DILUTION)

        reference = solve_ivp(
            rhs, (0.0, 20.0), [1.85, 4.9], t_eval=frame["time"].to_numpy(), rtol=1e-11, atol=1e-12
        )
        assert reference.success
        np.testing.assert_allclose(frame["s"], reference.y[0], rtol=0, atol=1e-6)
        np.testing.assert_allclose(frame["x"], reference.y[1], rtol=0, atol=1e-6)

    @pytest.mark.slow
    def test_default_fit_reaches_efficiency_target(self):
        out = self.temp_dir / "fit"
        result = self.invoke("fit", "--out", str(out), "--data", str(BUNDLED_DATASET))
        assert result.exit_code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["eps1_biomass"] >= 0.80


class TestExitCodes:

    def test_mapping(self):
        assert exit_code_for(NoEquilibriumError("none")) == 4
        assert exit_code_for(StepSizeError("coarse")) == 2
        assert exit_code_for(SimulationBlowUpError(12.0, "overflow")) == 1
