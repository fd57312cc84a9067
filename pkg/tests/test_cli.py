"""
Tests for the command-line interface
"""

import json

import pandas as pd
import pytest

from witten_rates import __version__
from witten_rates.cli import COMMANDS, Check, build_parser, main
from witten_rates.utils.exceptions import ConvergenceError, OutputError

QUADRATIC_RUN = {
    "potential": {"family": "quadratic", "alpha": 1.0},
    "beta": 1.0,
    "grid": {"lo": -8.0, "hi": 8.0, "n": 799},
    "spectrum": {"k": 3},
}


@pytest.fixture
def run_file(tmp_path):
    """Write a run file and return its path"""

    def _write(data, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)

    return _write


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


class TestParser:
    """Test argument parsing"""

    def test_subcommands(self):
        """Test every subcommand parses with the common options"""
        parser = build_parser()
        for name in COMMANDS:
            args = parser.parse_args([name, "--config", "run.json", "--beta", "3", "--threads", "2"])
            assert args.command == name
            assert args.beta == 3.0
            assert args.threads == 2

    def test_config_required(self):
        """Test --config is mandatory"""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["spectrum"])

    def test_version(self, capsys):
        """Test --version prints the package version"""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--version"])
        assert __version__ in capsys.readouterr().out


class TestSpectrumCommand:
    """Test the spectrum subcommand end to end"""

    def test_writes_tables_and_manifest(self, run_file, out_dir, capsys):
        """Test eigenvalues go to stdout and CSV, with a manifest"""
        code = main(["spectrum", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir)])
        assert code == 0
        assert "E1 = " in capsys.readouterr().out
        values = pd.read_csv(out_dir / "eigenvalues.csv")
        assert values["eigenvalue"].iloc[1] == pytest.approx(2.0, rel=5e-3)
        assert values["converged"].all()
        vectors = pd.read_csv(out_dir / "eigenvectors.csv")
        assert list(vectors.columns) == ["x", "psi0", "psi1", "psi2"]
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["subcommand"] == "spectrum"
        assert manifest["config"]["betas"] == [1.0]
        assert len(manifest["summary"]["eigenvalues"]) == 3

    def test_beta_override(self, run_file, out_dir):
        """Test --beta replaces the configured inverse temperature"""
        argv = ["spectrum", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir), "--beta", "2"]
        assert main(argv) == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["config"]["betas"] == [2.0]
        assert pd.read_csv(out_dir / "eigenvalues.csv")["eigenvalue"].iloc[1] == pytest.approx(4.0, rel=5e-3)

    def test_off_centre_table_without_grid(self, run_file, out_dir):
        """Test a tabulated well on [0, 10] runs on its own range by default"""
        nodes = [0.025 * i for i in range(401)]
        data = {
            "potential": {"family": "tabulated", "nodes": nodes, "values": [(x - 5.0) ** 2 for x in nodes]},
            "beta": 1.0,
            "spectrum": {"k": 2},
        }
        assert main(["spectrum", "--config", run_file(data), "--out", str(out_dir)]) == 0
        assert pd.read_csv(out_dir / "eigenvalues.csv")["eigenvalue"].iloc[1] == pytest.approx(2.0, rel=1e-3)
        x = pd.read_csv(out_dir / "eigenvectors.csv")["x"]
        assert x.min() > 0.0 and x.max() < 10.0

    def test_deterministic_output(self, run_file, tmp_path):
        """Test two runs of the same configuration write identical tables"""
        config = run_file(QUADRATIC_RUN)
        main(["spectrum", "--config", config, "--out", str(tmp_path / "a")])
        main(["spectrum", "--config", config, "--out", str(tmp_path / "b")])
        for name in ("eigenvalues.csv", "eigenvectors.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestExitCodes:
    """Test error reporting through exit codes"""

    def test_malformed_json(self, tmp_path, out_dir):
        """Test a syntax error in the run file exits with 2"""
        path = tmp_path / "bad.json"
        path.write_text("{\"beta\": ")
        assert main(["spectrum", "--config", str(path), "--out", str(out_dir)]) == 2

    def test_k_too_large(self, run_file, out_dir):
        """Test k above the matrix size exits with 2"""
        data = dict(QUADRATIC_RUN, spectrum={"k": 5000})
        assert main(["spectrum", "--config", run_file(data), "--out", str(out_dir)]) == 2

    def test_rates_need_double_well(self, run_file, out_dir):
        """Test rates on a single well exits with 2"""
        assert main(["rates", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir)]) == 2

    @pytest.mark.parametrize("error,code", [
        (ConvergenceError("no convergence", best_residual=1e-3), 3),
        (OutputError("disk full"), 4),
        (RuntimeError("boom"), 1),
        (KeyboardInterrupt(), 130),
    ])
    def test_error_mapping(self, mocker, run_file, out_dir, error, code):
        """Test each error class maps to its exit code"""
        mocker.patch.dict(COMMANDS, {"scan": mocker.Mock(side_effect=error)})
        assert main(["scan", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir)]) == code


class TestValidateCommand:
    """Test the invariant suite"""

    def test_quadratic_passes(self, run_file, out_dir, capsys):
        """Test every check passes on the quadratic benchmark"""
        assert main(["validate", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir)]) == 0
        report = pd.read_csv(out_dir / "validation.csv")
        assert report["passed"].all()
        action = report[report["check"].str.startswith("Bohr-Sommerfeld")]
        assert len(action) == 1
        assert "1/2 - 0.05" in action["check"].iloc[0]
        assert action["threshold"].iloc[0] == pytest.approx(0.45)
        assert action["value"].iloc[0] == pytest.approx(0.5, rel=0.01)
        assert "FAIL" not in capsys.readouterr().out

    def test_failed_check_exits_nonzero(self, mocker, run_file, out_dir):
        """Test a failing check makes the command exit with 1"""
        mocker.patch("witten_rates.cli._checks_1d", return_value=[Check("forced", 1.0, 0.0, False)])
        assert main(["validate", "--config", run_file(QUADRATIC_RUN), "--out", str(out_dir)]) == 1
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["summary"]["passed"] is False


class TestOtherCommands:
    """Test rates, scan and evolve end to end on small problems"""

    QUARTIC_RUN = {
        "potential": {"family": "quartic_double_well", "h": 1.0, "a": 1.0},
        "betas": [3.0, 4.0],
        "grid": {"lo": -3.0, "hi": 3.0, "n": 799},
        "scan": {"grid_policy": {"n_min": 399, "points_per_barrier": 1}},
    }

    def test_rates(self, run_file, out_dir, capsys):
        """Test one row of estimates is written"""
        assert main(["rates", "--config", run_file(self.QUARTIC_RUN), "--out", str(out_dir)]) == 0
        frame = pd.read_csv(out_dir / "rates.csv")
        assert len(frame) == 1
        assert frame["beta"].iloc[0] == 3.0
        assert frame["E1_surface"].iloc[0] == pytest.approx(frame["E1_numeric"].iloc[0], rel=0.05)
        assert "E1_numeric" in capsys.readouterr().out

    def test_scan(self, run_file, out_dir, capsys):
        """Test the scan table and fits are written"""
        argv = ["scan", "--config", run_file(self.QUARTIC_RUN), "--out", str(out_dir), "--threads", "2"]
        assert main(argv) == 0
        assert pd.read_csv(out_dir / "scan.csv")["beta"].tolist() == [3.0, 4.0]
        assert "E1_numeric" in pd.read_csv(out_dir / "fits.csv")["column"].tolist()
        assert "implied dU" in capsys.readouterr().out

    def test_evolve(self, run_file, out_dir):
        """Test the relaxation rate of the quadratic benchmark is fitted"""
        data = {
            "potential": {"family": "quadratic", "alpha": 1.0},
            "beta": 1.0,
            "grid": {"lo": -6.0, "hi": 6.0, "n": 199},
            "evolution": {"initial": {"kind": "gaussian", "center": 1.0, "width": 0.3}},
        }
        assert main(["evolve", "--config", run_file(data), "--out", str(out_dir)]) == 0
        trace = pd.read_csv(out_dir / "trace.csv")
        assert trace["mass"].to_numpy() == pytest.approx(trace["mass"].iloc[0], rel=1e-10)
        summary = json.loads((out_dir / "manifest.json").read_text())["summary"]
        assert summary["relaxation_rate"] == pytest.approx(summary["E1"], rel=0.05)
        assert not (out_dir / "snapshots.csv").exists()
