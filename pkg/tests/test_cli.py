"""Tests for the anderson-lab command line."""

import json
from unittest.mock import Mock, patch

import pytest

from anderson_lab.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, main
from anderson_lab.errors import ConfigError
from anderson_lab.selftest import SelfTestReport
from anderson_lab.spectral import DEFAULT_EIGH_TOL


def run_json(capsys, *argv: str) -> tuple[int, dict]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out else {}


class TestExactAndBound:
    """Tests for the closed-form commands."""

    def test_exact_seven(self, capsys):
        """Test exact --L 7 prints 0.78125."""
        code, doc = run_json(capsys, "exact", "--L", "7")
        assert code == EXIT_OK
        assert doc["command"] == "exact"
        assert doc["result"]["bad_probability"] == pytest.approx(0.78125, abs=1e-15)

    def test_exact_from_dims(self, capsys):
        """Test exact accepts a one-dimensional --dims."""
        code, doc = run_json(capsys, "exact", "--dims", "5", "--p", "0.3")
        assert code == EXIT_OK
        assert doc["result"]["L"] == 5

    def test_exact_composite(self, capsys):
        """Test exact --L 9 exits 1."""
        code, _ = run_json(capsys, "exact", "--L", "9")
        assert code == EXIT_ERROR

    def test_bound(self, capsys):
        """Test bound --dims 3,3 prints 7/256."""
        code, doc = run_json(capsys, "bound", "--dims", "3,3")
        assert code == EXIT_OK
        assert doc["result"]["lower_bound"] == pytest.approx(0.02734375, abs=1e-15)

    def test_shift_mass(self, capsys):
        """Test shift-mass matches the bound."""
        code, doc = run_json(capsys, "shift-mass", "--dims", "3,3", "--p", "0.3")
        assert code == EXIT_OK
        result = doc["result"]
        assert result["shift_symmetric_mass"] == pytest.approx(result["lower_bound"], abs=1e-12)


class TestClassifyCommand:
    """Tests for the classify subcommand."""

    def test_constant_bad(self, capsys):
        """Test a constant potential on Z/5 is BadCertified."""
        code, doc = run_json(capsys, "classify", "--dims", "5", "--potential", "1,1,1,1,1")
        assert code == EXIT_OK
        assert doc["result"]["classification"]["verdict"] == "BadCertified"

    def test_witness_good(self, capsys):
        """Test the reflection-free pattern on Z/7 is GoodExact."""
        code, doc = run_json(
            capsys, "classify", "--dims", "7", "--potential=1,1,-1,1,-1,-1,-1"
        )
        assert code == EXIT_OK
        assert doc["result"]["classification"]["verdict"] == "GoodExact"

    def test_potential_file(self, capsys, tmp_path):
        """Test potentials can be read from a newline-separated file."""
        path = tmp_path / "v.txt"
        path.write_text("1\n1\n-1\n-1\n1\n")
        code, doc = run_json(capsys, "classify", "--dims", "5", "--potential-file", str(path))
        assert code == EXIT_OK
        assert doc["result"]["classification"]["verdict"] == "BadCertified"

    def test_length_mismatch(self, capsys):
        """Test a potential of the wrong length exits 1 before computing."""
        code, _ = run_json(capsys, "classify", "--dims", "5", "--potential", "1,1,1,1")
        assert code == EXIT_ERROR

    def test_inconclusive_exit(self, capsys):
        """Test an unmeetable entry tolerance exits 2."""
        code, doc = run_json(
            capsys,
            "classify",
            "--dims",
            "5",
            "--potential=0.1,-0.7,0.4,0.9,-0.3",
            "--entry-tol",
            "1.0",
        )
        assert code == EXIT_INCONCLUSIVE
        assert doc["result"]["classification"]["verdict"] == "Inconclusive"

    def test_seeded_draw(self, capsys):
        """Test classify without --potential draws from the seed."""
        first = run_json(capsys, "classify", "--dims", "3,3", "--seed", "5")[1]
        second = run_json(capsys, "classify", "--dims", "3,3", "--seed", "5")[1]
        assert first == second

    def test_csv_rejected(self, capsys):
        """Test classify refuses CSV output."""
        code, _ = run_json(capsys, "classify", "--dims", "5", "--format", "csv")
        assert code == EXIT_ERROR


class TestHeatmapCommand:
    """Tests for the heatmap subcommand."""

    def test_rows(self, capsys):
        """Test one CSV row per (t, k) after the header."""
        code = main(["heatmap", "--dims", "6", "--t-grid", "0.5:2:4", "--seed", "3"])
        lines = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "t,k,lambda,log_ipr"
        assert len(lines) == 1 + 4 * 6

    def test_reproducible(self, tmp_path):
        """Test reruns with the same seed write identical bytes."""
        outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for out in outs:
            argv = ["heatmap", "--dims", "3,3", "--t-grid", "0.1:5:10", "--seed", "8"]
            assert main([*argv, "--out", str(out)]) == EXIT_OK
        assert outs[0].read_bytes() == outs[1].read_bytes()

    def test_descending_grid(self, capsys):
        """Test a descending --t-grid exits 1."""
        code = main(["heatmap", "--dims", "5", "--t-grid", "5:0.1:50"])
        assert code == EXIT_ERROR

    def test_missing_grid(self, capsys):
        """Test heatmap requires --t-grid."""
        assert main(["heatmap", "--dims", "5"]) == EXIT_ERROR

    def test_json(self, capsys):
        """Test --format json wraps the rows."""
        code, doc = run_json(
            capsys, "heatmap", "--dims", "5", "--t-grid", "1:2:2", "--format", "json"
        )
        assert code == EXIT_OK
        assert len(doc["result"]["rows"]) == 10


class TestEnumerationCommands:
    """Tests for enumerate and mc."""

    def test_enumerate_exact(self, capsys):
        """Test enumerate on Z/7 reproduces 25/32."""
        code, doc = run_json(
            capsys, "enumerate", "--dims", "7", "--classifier", "exact", "--threads", "2"
        )
        assert code == EXIT_OK
        assert doc["result"]["estimate"]["estimate"] == pytest.approx(25 / 32, abs=1e-12)
        assert doc["result"]["bound_gap"] > 0

    def test_enumerate_cap(self, capsys):
        """Test an over-cap enumeration exits 1."""
        code, _ = run_json(capsys, "enumerate", "--dims", "4,4")
        assert code == EXIT_ERROR

    def test_mc_threads(self, capsys):
        """Test Monte Carlo counts do not depend on --threads."""
        argv = ["mc", "--dims", "7", "--trials", "200", "--seed", "4", "--classifier", "exact"]
        one = run_json(capsys, *argv, "--threads", "1")[1]
        many = run_json(capsys, *argv, "--threads", "3")[1]
        assert one["result"]["counts_by_verdict"] == many["result"]["counts_by_verdict"]

    def test_zero_trials(self, capsys):
        """Test --trials 0 fails validation."""
        code, _ = run_json(capsys, "mc", "--dims", "5", "--trials", "0")
        assert code == EXIT_ERROR


class TestPerturbationCommands:
    """Tests for paths and fourier."""

    def test_paths(self, capsys):
        """Test paths on Z/5 with D = diag(0..4)."""
        code, doc = run_json(capsys, "paths", "--dims", "5", "--potential", "0,1,2,3,4")
        assert code == EXIT_OK
        entry = next(e for e in doc["result"]["entries"] if e["i"] == 2)
        assert entry["paths"] == [[2, 1, 0]]
        assert entry["path_sum"] == pytest.approx(0.5)
        assert entry["coefficient"] == pytest.approx(0.5)

    def test_paths_repeated_diagonal(self, capsys):
        """Test repeated diagonal entries exit 1."""
        code, _ = run_json(capsys, "paths", "--dims", "5", "--potential", "0,1,1,3,4")
        assert code == EXIT_ERROR

    def test_fourier(self, capsys):
        """Test fourier on (1,-1,-1,-1,-1) with k = 1."""
        code, doc = run_json(
            capsys, "fourier", "--dims", "5", "--potential=1,-1,-1,-1,-1", "--k", "1"
        )
        assert code == EXIT_OK
        mode = doc["result"]["modes"][0]
        assert mode["eigenvalues"] == pytest.approx([-1.0, -0.2])
        assert mode["vanishing_vertices"] == doc["result"]["reflection_centers"] == [0]

    def test_fourier_needs_cycle(self, capsys):
        """Test fourier on a 2-D grid exits 1."""
        code, _ = run_json(capsys, "fourier", "--dims", "3,3")
        assert code == EXIT_ERROR


class TestUsage:
    """Tests for argument errors."""

    def test_unknown_command(self):
        """Test an unknown subcommand exits 1."""
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == EXIT_ERROR

    def test_both_potentials(self, capsys, tmp_path):
        """Test --potential and --potential-file together exit 1."""
        path = tmp_path / "v.txt"
        path.write_text("1,1,1")
        code, _ = run_json(
            capsys, "classify", "--dims", "3", "--potential", "1,1,1", "--potential-file", str(path)
        )
        assert code == EXIT_ERROR

    def test_logging_configured_before_validation(self):
        """Test the env log level is installed before flags are validated."""
        calls = Mock()
        calls.config_from_args.side_effect = ConfigError("bad flags")
        with (
            patch.dict("os.environ", {"ANDERSON_LAB_LOG_LEVEL": "error"}),
            patch("anderson_lab.cli.configure_logging", calls.configure_logging),
            patch("anderson_lab.cli.config_from_args", calls.config_from_args),
        ):
            assert main(["classify", "--dims", "7"]) == EXIT_ERROR
        names = [name for name, _, _ in calls.mock_calls]
        assert names == ["configure_logging", "config_from_args"]
        calls.configure_logging.assert_called_once_with("ERROR")

    def test_bad_env_log_level_falls_back(self, capsys):
        """Test an unknown env log level logs at WARNING and fails validation."""
        with (
            patch.dict("os.environ", {"ANDERSON_LAB_LOG_LEVEL": "chatty"}),
            patch("anderson_lab.cli.configure_logging") as mock_configure,
        ):
            mock_configure.side_effect = [ValueError("Level 'CHATTY' does not exist"), None]
            code, _ = run_json(capsys, "exact", "--L", "5")
        assert code == EXIT_ERROR
        assert [c.args for c in mock_configure.call_args_list] == [("CHATTY",), ("WARNING",)]

    def test_out_file(self, capsys, tmp_path):
        """Test --out writes the document to a file."""
        out = tmp_path / "exact.json"
        assert main(["exact", "--L", "5", "--out", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())["result"]["L"] == 5
        assert capsys.readouterr().out == ""


class TestSelftestCommand:
    """Tests for the selftest subcommand wiring."""

    def test_passes_through_threads(self, capsys):
        """Test selftest forwards --threads and exits 0 on a passing report."""
        report = SelfTestReport(checks=[])
        with patch("anderson_lab.cli.run_selftest", return_value=report) as mock_run:
            assert main(["selftest", "--threads", "2"]) == EXIT_OK
            mock_run.assert_called_once_with(eigh_tol=DEFAULT_EIGH_TOL, threads=2)
        assert json.loads(capsys.readouterr().out)["result"] == {"checks": []}
