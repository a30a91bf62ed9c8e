import io
import json
from math import pi

import pytest
from pydantic.error_wrappers import ValidationError

from cohpower import cli
from cohpower.cli import (
    CSV_HEADER,
    EXIT_CHECK_FAILED,
    EXIT_INVARIANT,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_OPTIMIZER,
    EXIT_OUTPUT,
    EXIT_PARSE,
    CliSettings,
    ReportFormatError,
    ReportRow,
    main,
    read_report_csv,
    write_report_csv,
)
from cohpower.core import rotation_x
from cohpower.measures import CoherenceMeasureId
from cohpower.optim import OptimizerConfig
from cohpower.power import global_power

from .data.witnesses import DATA_FILES, PHI_COHERENCE_RELENT


def run(capsys, *argv):
    code = main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == EXIT_OK, err
    return json.loads(out)


class TestMeasureCommand:
    def test_diagonal_state(self, capsys):
        assert run(capsys, "measure", DATA_FILES / "diag_state.txt", "--measure", "l1") == (
            EXIT_OK,
            "0\n",
            "",
        )

    def test_maximally_coherent_vector(self, capsys):
        code, out, _ = run(capsys, "measure", DATA_FILES / "max_coherent_3.txt")
        assert code == EXIT_OK
        assert float(out) == pytest.approx(2.0, abs=1e-12)

    def test_witness_relent(self, capsys):
        code, out, _ = run(
            capsys, "measure", DATA_FILES / "phi_witness.txt", "--measure", "relent"
        )
        assert code == EXIT_OK
        assert float(out) == pytest.approx(PHI_COHERENCE_RELENT, abs=1e-4)

    def test_error_parse(self, capsys):
        code, _, err = run(capsys, "measure", DATA_FILES / "malformed.txt")
        assert code == EXIT_PARSE
        assert "line 3, column 2" in err

    def test_error_missing_file(self, capsys):
        code, _, err = run(capsys, "measure", DATA_FILES / "missing.txt")
        assert code == EXIT_PARSE
        assert "Cannot read" in err

    def test_error_invariant(self, capsys):
        code, _, err = run(capsys, "measure", DATA_FILES / "not_hermitian.txt")
        assert code == EXIT_INVARIANT
        assert "hermiticity residual 1.000e-01" in err

    def test_error_unknown_measure(self):
        with pytest.raises(SystemExit) as err:
            main(["measure", str(DATA_FILES / "diag_state.txt"), "--measure", "robustness"])
        assert err.value.code == 2


class TestPowerCommand:
    def test_incoherent(self, capsys):
        report = run_json(
            capsys, "power", DATA_FILES / "rx_pi_4.txt", "--measure", "l1", "--mode", "incoherent"
        )
        assert report["value"] == pytest.approx(1.0, abs=1e-12)
        assert report["method"] == "incoherent_scan"
        assert report["seed"] is None

    def test_global(self, capsys):
        report = run_json(capsys, "power", DATA_FILES / "rx_pi_4.txt", "--mode", "global")
        assert report["value"] >= 1.1470
        assert report["value"] > 1.0
        assert set(report) == {"value", "measure", "method", "achiever", "diagnostics", "seed"}
        assert set(report["diagnostics"]) == {"restarts", "iterations", "converged"}
        assert len(report["achiever"]) == 3
        assert all(len(pair) == 2 for pair in report["achiever"])

    def test_builtin_fourier(self, capsys):
        report = run_json(capsys, "power", "--builtin", "fourier:5", "--mode", "incoherent")
        assert report["value"] == pytest.approx(4.0, abs=1e-9)

    def test_human_output(self, capsys):
        code, out, _ = run(capsys, "power", "--builtin", "rx:pi/4", "--mode", "incoherent")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "value: 1"
        assert lines[1:3] == ["measure: l1", "method: incoherent_scan"]
        assert lines[3] == "achiever: 0,0 1,0 0,0"

    def test_numbers_come_from_the_library(self, capsys):
        report = run_json(
            capsys, "power", "--builtin", "rx:pi/4", "--restarts", "16", "--seed", "3"
        )
        expected = global_power(rotation_x(pi / 4), "l1", OptimizerConfig(restarts=16, seed=3))
        assert report["value"] == expected.value
        assert report["seed"] == 3
        assert report["diagnostics"]["restarts"] == 16

    def test_qubit(self, capsys):
        report = run_json(capsys, "power", DATA_FILES / "hadamard.txt", "--mode", "qubit")
        assert report["value"] == pytest.approx(1.0, abs=1e-12)
        assert report["method"] == "closed_form"

    def test_brute(self, capsys):
        report = run_json(
            capsys, "power", "--builtin", "rx:pi/4", "--mode", "brute", "--grid-steps", "48"
        )
        assert 1.146 <= report["value"] <= 2.0 + 1e-9

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        report = run_json(
            capsys, "power", "--builtin", "fourier:3", "--mode", "incoherent", "--out", target
        )
        assert json.loads(target.read_text()) == report

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("COHPOWER_SEED", "7")
        args = ("power", "--builtin", "rx:pi/4", "--restarts", "8")
        assert run_json(capsys, *args)["seed"] == 7
        assert run_json(capsys, *args, "--seed", "2")["seed"] == 2

    def test_error_non_unitary(self, capsys):
        code, _, err = run(capsys, "power", DATA_FILES / "non_unitary.txt")
        assert code == EXIT_INVARIANT
        assert "unitarity residual" in err

    def test_error_qubit_on_qutrit(self, capsys):
        code, _, _ = run(capsys, "power", DATA_FILES / "rx_pi_4.txt", "--mode", "qubit")
        assert code == EXIT_MISMATCH

    def test_error_qubit_relent(self, capsys):
        code, _, _ = run(
            capsys, "power", DATA_FILES / "hadamard.txt", "--mode", "qubit", "--measure", "relent"
        )
        assert code == EXIT_MISMATCH

    def test_error_brute_dimension(self, capsys):
        code, _, _ = run(capsys, "power", "--builtin", "fourier:4", "--mode", "brute")
        assert code == EXIT_MISMATCH

    def test_error_no_restart_converged(self, capsys):
        code, out, err = run(
            capsys, "power", "--builtin", "rx:pi/4", "--restarts", "4", "--max-iters", "1"
        )
        assert code == EXIT_OPTIMIZER
        assert "None of 4 restarts converged" in err
        assert out.startswith("value: ")

    def test_error_truncated_unitary_file(self, capsys, tmp_path):
        target = tmp_path / "truncated.txt"
        target.write_text("3\n1,0 0,0 0,0\n")
        code, _, err = run(capsys, "power", target, "--mode", "incoherent")
        assert code == EXIT_PARSE
        assert "line 2: expected 3 rows, got 1" in err

    def test_error_no_input(self, capsys):
        code, _, err = run(capsys, "power", "--mode", "incoherent")
        assert code == EXIT_PARSE
        assert "--builtin" in err

    def test_error_bad_builtin(self, capsys):
        code, _, err = run(capsys, "power", "--builtin", "spiral:3")
        assert code == EXIT_PARSE
        assert "Not a valid builtin - spiral:3" in err


class TestGeneratorCommand:
    def test_pauli_x(self, capsys):
        report = run_json(capsys, "generator", "--builtin", "pauli-x", "--restarts", "8")
        assert report["value"] == pytest.approx(2.0, abs=1e-3)
        assert report["method"] == "generator_limit"

    def test_zero(self, capsys):
        report = run_json(capsys, "generator", "--builtin", "zero:3", "--restarts", "8")
        assert report["value"] == 0

    def test_error_bad_builtin(self, capsys):
        code, _, _ = run(capsys, "generator", "--builtin", "diag:1,x")
        assert code == EXIT_PARSE


class TestHaarScanCommand:
    def test_qubit_population(self, capsys, tmp_path):
        target = tmp_path / "scan.csv"
        code, out, _ = run(
            capsys, "haar-scan", "--dim", 2, "--samples", 5, "--restarts", 8, "--out", target
        )
        assert code == EXIT_OK
        assert target.read_text().splitlines()[0] == "label,N,measure,incoherent,global,gap,seed,ms"
        rows = read_report_csv(target)
        assert [row["label"] for row in rows] == [f"haar:2:{i}" for i in range(5)]
        assert all(-1e-4 <= row["gap"] <= 1e-6 for row in rows)
        assert "median=" in out

    def test_rotation_gap(self, capsys, tmp_path):
        target = tmp_path / "scan.csv"
        code, _, _ = run(
            capsys, "haar-scan", "--dim", 3, "--samples", 1,
            "--builtin", "rx:0.7853981633974483", "--restarts", 32, "--out", target,
        )
        assert code == EXIT_OK
        (row,) = read_report_csv(target)
        assert row["gap"] >= 0.147
        assert row["N"] == 3

    def test_csv_round_trip(self, capsys, tmp_path):
        target = tmp_path / "scan.csv"
        run(capsys, "haar-scan", "--dim", 3, "--samples", 3, "--restarts", 8,
            "--measure", "relent", "--out", target)
        buffer = io.StringIO()
        write_report_csv(read_report_csv(target), buffer)
        assert buffer.getvalue() == target.read_text()

    def test_deterministic(self, capsys, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for target in (first, second):
            run(capsys, "haar-scan", "--dim", 3, "--samples", 2, "--restarts", 8,
                "--seed", 11, "--out", target)

        def without_timing(path):
            return [{k: v for k, v in row.items() if k != "ms"} for row in read_report_csv(path)]

        assert without_timing(first) == without_timing(second)

    def test_error_no_samples(self, capsys, tmp_path):
        code, _, _ = run(capsys, "haar-scan", "--samples", 0, "--out", tmp_path / "scan.csv")
        assert code == EXIT_PARSE

    def test_failed_scan_keeps_existing_file(self, capsys, tmp_path):
        target = tmp_path / "scan.csv"
        target.write_text("previous results\n")
        code, _, _ = run(
            capsys, "haar-scan", "--dim", 3, "--samples", 2, "--restarts", 4,
            "--max-iters", 1, "--out", target,
        )
        assert code == EXIT_OPTIMIZER
        assert target.read_text() == "previous results\n"

    def test_error_unwritable(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "haar-scan", "--samples", 1, "--out", tmp_path / "missing" / "scan.csv"
        )
        assert code == EXIT_OUTPUT
        assert "Cannot write" in err


class TestReproduceCommand:
    def test_failed_check(self, capsys, monkeypatch):
        rows = [("Rx(pi/4) incoherent l1 = 1", "1", 0.5, "1e-9", "FAIL")]
        monkeypatch.setattr(cli, "reproduction_checks", lambda cfg: rows)
        code, out, _ = run(capsys, "reproduce")
        assert code == EXIT_CHECK_FAILED
        assert "FAIL" in out
        assert "Rx(pi/4) incoherent l1 = 1" in out

    @pytest.mark.slow
    def test_default_run(self, capsys):
        code, out, _ = run(capsys, "reproduce")
        assert code == EXIT_OK
        assert "Rx(pi/4) global l1 >= 1.1471" in out
        assert "Rx(pi/8) incoherent relent = 0.41650" in out
        assert "FAIL" not in out

    @pytest.mark.slow
    def test_verdicts_do_not_depend_on_seed(self, capsys):
        for seed in range(1, 11):
            code, out, _ = run(capsys, "reproduce", "--seed", seed, "--restarts", 16)
            assert code != EXIT_CHECK_FAILED, out
            assert code == EXIT_OK


class TestReports:
    def test_report_row_gap(self):
        with pytest.raises(ValidationError, match="Not a valid gap"):
            ReportRow(
                label="x", dim=2, measure=CoherenceMeasureId.L1, incoherent=1.0, global_=1.5,
                gap=0.4, achiever=((1.0, 0.0), (0.0, 0.0)), restarts=4, seed=0, ms=1.0,
            )

    def test_error_csv_header(self, tmp_path):
        target = tmp_path / "bad.csv"
        target.write_text("label,N\nx,2\n")
        with pytest.raises(ReportFormatError, match="Unexpected CSV header"):
            read_report_csv(target)

    def test_header(self):
        buffer = io.StringIO()
        write_report_csv([], buffer)
        assert buffer.getvalue() == ",".join(CSV_HEADER) + "\n"

    def test_settings_defaults(self, monkeypatch):
        monkeypatch.delenv("COHPOWER_SEED", raising=False)
        monkeypatch.setenv("COHPOWER_LOG_LEVEL", "DEBUG")
        settings = CliSettings()
        assert (settings.seed, settings.log_level) == (0, "DEBUG")
