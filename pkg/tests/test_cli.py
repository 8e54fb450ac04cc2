import shutil
from pathlib import Path

import numpy as np
import pytest

from uqcal.cli import main

REPO = Path(__file__).resolve().parent.parent


def run(args):
    return main([str(a) for a in args])


def read_all_csvs(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob("*.csv"))}


SMALL_SURV = [
    "surveillance",
    "--simulate",
    "--days", "30",
    "--sampled-days", "18",
    "--replicates", "6",
    "--particles", "600",
    "--population", "100000",
]


class TestPrevalenceCommand:
    def test_default_run_produces_expected_reduction(self, tmp_path, capsys):
        assert run(["prevalence", "--out", tmp_path]) == 0
        eur = (tmp_path / "prevalence_eur.csv").read_text().splitlines()
        m12 = dict(line.split(",") for line in eur[1:])["12"]
        assert float(m12) == pytest.approx(0.0085470, abs=1e-7)
        assert (tmp_path / "prevalence_posterior.csv").exists()
        assert (tmp_path / "prevalence.svg").exists()

    def test_m_grid_contains_zero_row(self, tmp_path):
        assert run(["prevalence", "--out", tmp_path, "--max-additional", "3"]) == 0
        rows = (tmp_path / "prevalence_eur.csv").read_text().splitlines()
        assert rows[1] == "0,0"

    def test_output_directory_created(self, tmp_path):
        nested = tmp_path / "a" / "b"
        assert run(["prevalence", "--out", nested]) == 0
        assert (nested / "prevalence_eur.csv").exists()

    def test_invalid_config_names_field(self, tmp_path, capsys):
        assert run(["prevalence", "--out", tmp_path, "--positives", "11"]) == 2
        assert "positives" in capsys.readouterr().err

    def test_population_adds_finite_model_column(self, tmp_path):
        assert run(["prevalence", "--out", tmp_path, "--population", "40"]) == 0
        header = (tmp_path / "prevalence_posterior.csv").read_text().splitlines()[0]
        assert "hypergeometric_posterior_mass" in header


class TestRenewalCommand:
    def test_shipped_demo_runs(self, tmp_path):
        assert run([
            "renewal", "--config", REPO / "configs" / "renewal_demo.toml",
            "--out", tmp_path, "--replicates", "20", "--particles", "400",
        ]) == 0
        lines = (tmp_path / "renewal_rt.csv").read_text().splitlines()
        assert lines[0].startswith("date,cases,total_infectiousness")
        assert len(lines) > 30
        assert (tmp_path / "renewal_rt.svg").exists()

    def test_perfect_reporting_eur_is_zero(self, tmp_path):
        assert run([
            "renewal",
            "--cases", REPO / "data" / "renewal_cases.csv",
            "--serial", REPO / "data" / "serial_interval.csv",
            "--rho", "1.0", "--out", tmp_path,
            "--replicates", "10", "--particles", "400",
        ]) == 0
        lines = (tmp_path / "renewal_rt.csv").read_text().splitlines()[1:]
        eur_col = [float(line.split(",")[9]) for line in lines]
        assert all(v == 0.0 for v in eur_col)

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "renewal", "--config", REPO / "configs" / "renewal_demo.toml",
            "--replicates", "15", "--particles", "300",
        ]
        assert run(args + ["--out", tmp_path / "one"]) == 0
        assert run(args + ["--out", tmp_path / "two"]) == 0
        assert read_all_csvs(tmp_path / "one") == read_all_csvs(tmp_path / "two")

    def test_malformed_csv_is_a_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,cases\n2023-01-01,x\n")
        code = run([
            "renewal", "--cases", bad,
            "--serial", REPO / "data" / "serial_interval.csv",
            "--out", tmp_path,
        ])
        assert code == 3
        assert "bad.csv:2" in capsys.readouterr().err

    def test_empty_case_file_is_a_data_error(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("date,cases\n")
        assert run([
            "renewal", "--cases", bad,
            "--serial", REPO / "data" / "serial_interval.csv",
            "--out", tmp_path,
        ]) == 3

    def test_missing_inputs_is_usage_error(self, tmp_path):
        assert run(["renewal", "--out", tmp_path]) == 2


class TestSurveillanceCommand:
    def test_small_simulated_run(self, tmp_path):
        assert run(SMALL_SURV + ["--out", tmp_path]) == 0
        for name in ("study_ur.csv", "study_eur.csv", "study_eur_replicates.csv"):
            assert (tmp_path / name).exists()
        assert (tmp_path / "surveillance.svg").exists()
        eur_lines = (tmp_path / "study_eur.csv").read_text().splitlines()
        assert len(eur_lines) == 31

    def test_replicates_below_two_rejected(self, tmp_path):
        assert run(SMALL_SURV[:-4] + ["--replicates", "1", "--out", tmp_path]) == 2

    def test_full_coverage_reduction_is_zero_within_noise(self, tmp_path):
        assert run(SMALL_SURV + ["--coverage-full", "--out", tmp_path]) == 0
        lines = (tmp_path / "study_eur.csv").read_text().splitlines()[1:]
        for line in lines:
            cells = line.split(",")
            eur, se = float(cells[3]), float(cells[5])
            assert abs(eur) <= 3.0 * se + 1e-14

    def test_byte_identical_across_threads_and_reruns(self, tmp_path):
        assert run(SMALL_SURV + ["--out", tmp_path / "one", "--threads", "1"]) == 0
        assert run(SMALL_SURV + ["--out", tmp_path / "two", "--threads", "3"]) == 0
        assert read_all_csvs(tmp_path / "one") == read_all_csvs(tmp_path / "two")

    def test_wastewater_on_first_day_is_numerical_error(self, tmp_path, capsys):
        cases = tmp_path / "cases.csv"
        cases.write_text(
            "date,cases\n" + "\n".join(
                f"2023-01-{d:02d},{c}" for d, c in zip(range(1, 13), [30] * 12)
            ) + "\n"
        )
        ww = tmp_path / "ww.csv"
        ww.write_text(
            "date,concentration,catchment_population\n2023-01-01,0.5,50000\n"
        )
        code = run([
            "surveillance", "--cases", cases, "--wastewater", ww,
            "--population", "100000", "--particles", "600",
            "--replicates", "4", "--out", tmp_path,
        ])
        assert code == 4
        assert "day 1" in capsys.readouterr().err


class TestVoiCommand:
    def test_report_contents(self, tmp_path):
        assert run(["voi", "--out", tmp_path]) == 0
        rows = dict(
            line.split(",")
            for line in (tmp_path / "voi_report.csv").read_text().splitlines()[1:]
        )
        assert float(rows["evsi_quadratic"]) == pytest.approx(0.0085470, abs=1e-7)
        assert rows["evsi_quadratic"] == rows["eur_exact_quadratic"]
        assert float(rows["evpi_quadratic"]) == pytest.approx(0.0170940, abs=1e-7)
        assert rows["eig"] == rows["eur_exact_log"]
        assert float(rows["fisher_information"]) == pytest.approx(4.0)

    def test_byte_identical_reruns(self, tmp_path):
        assert run(["voi", "--out", tmp_path / "one"]) == 0
        assert run(["voi", "--out", tmp_path / "two"]) == 0
        assert read_all_csvs(tmp_path / "one") == read_all_csvs(tmp_path / "two")


class TestUsage:
    def test_unknown_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_config_flag_override(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[prevalence]\nmax-additional = 2\n")
        assert run(["prevalence", "--config", cfg, "--out", tmp_path]) == 0
        assert len((tmp_path / "prevalence_eur.csv").read_text().splitlines()) == 4
        assert run([
            "prevalence", "--config", cfg, "--max-additional", "5", "--out", tmp_path,
        ]) == 0
        assert len((tmp_path / "prevalence_eur.csv").read_text().splitlines()) == 7
