import csv
import io
import subprocess
import sys
from dataclasses import replace

import pytest

from mimocr.cli import evaluate_formula, main
from mimocr.sweep import (PRESETS, ConfigError, SweepSpec, load_config, parse_number, preset,
                          rows_to_csv, run_sweep)
from mimocr.validation import check_outage_closed_form

CONFIG = """
[system]
M = 4
N = 8
p_max = 20 dB
p_p = 10dB

[links]
mean_x = 20 dB

[sweep]
variable = mean_y
grid = 0 dB, 5 dB, 10 dB
outputs = capacity_mc_proposed, capacity_lower_bound, m_eff_alg1, outage_closed
samples = 2000
seed = 5
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(CONFIG)
    return path


def test_db_parsing():
    assert parse_number("20 dB") == pytest.approx(100.0)
    assert parse_number("-15dB") == pytest.approx(10 ** -1.5)
    assert parse_number("3.5") == 3.5


def test_load_config(config_file):
    spec = load_config(config_file)
    assert spec.scenario.cfg.p_max == pytest.approx(100.0)
    assert spec.scenario.stats.mean_x == pytest.approx(100.0)
    assert spec.grid == pytest.approx((1.0, 10 ** 0.5, 10.0))
    assert spec.scenario.n_samples == 2000 and spec.scenario.seed == 5


def test_config_errors_name_the_field(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(CONFIG.replace("M = 4", "M = four"))
    with pytest.raises(ConfigError, match=r"\[system\] M"):
        load_config(path)
    path.write_text(CONFIG.replace("mean_x", "mean_w"))
    with pytest.raises(ConfigError, match="mean_w"):
        load_config(path)
    path.write_text("[system\nM = 4\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(path)


def test_empty_outputs_rejected(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text(CONFIG.replace(
        "outputs = capacity_mc_proposed, capacity_lower_bound, m_eff_alg1, outage_closed",
        "outputs ="))
    with pytest.raises(ConfigError, match="no outputs"):
        load_config(path)
    assert not (tmp_path / "out.csv").exists()


def test_grid_must_increase():
    spec = preset("fig3")
    with pytest.raises(ConfigError):
        replace(spec, grid=(2.0, 1.0))


def test_harvest_outputs_need_harvest_section():
    spec = preset("fig3")
    with pytest.raises(ConfigError):
        replace(spec, outputs=("avg_cap_eq39",))


def test_csv_schema_and_format(config_file):
    spec = load_config(config_file)
    text = rows_to_csv(spec, run_sweep(spec))
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["mean_y", "capacity_mc_proposed", "capacity_mc_proposed_se",
                       "capacity_lower_bound", "capacity_lower_bound_se", "m_eff_alg1",
                       "m_eff_alg1_se", "outage_closed", "feasible"]
    assert len(rows) == 4
    assert rows[2][0] == "3.16227766"               # 10 significant digits
    assert all(r[-1] == "true" for r in rows[1:])


def test_infeasible_point_reported_not_raised():
    spec = preset("fig6", samples=50)
    rows = run_sweep(replace(spec, grid=(8, 16)))
    assert [r["feasible"] for r in rows] == [False, False]


def test_parallel_matches_serial(config_file, monkeypatch):
    spec = load_config(config_file)
    serial = rows_to_csv(spec, run_sweep(spec, workers=1))
    monkeypatch.setenv("MIMOCR_WORKERS", "2")
    assert rows_to_csv(spec, run_sweep(spec)) == serial


def test_presets_cover_all_figures():
    assert PRESETS == ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9")
    for name in PRESETS:
        assert isinstance(preset(name), SweepSpec)
    with pytest.raises(ConfigError):
        preset("fig10")


def test_cli_sweep_writes_file(config_file, tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sweep", str(config_file), "--samples", "500", "--out", str(out)]) == 0
    assert out.read_text().startswith("mean_y,")


def test_cli_sweep_is_deterministic_across_processes(config_file):
    cmd = [sys.executable, "-m", "mimocr", "sweep", str(config_file), "--seed", "42", "--samples", "800"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and len(a) > 0


def test_cli_unknown_target(capsys):
    assert main(["sweep", "no-such-preset"]) == 2
    assert "neither" in capsys.readouterr().err


def test_cli_eval(capsys):
    assert main(["eval", "outage", "p_i=1", "mean_x=1"]) == 0
    value = float(capsys.readouterr().out)
    assert value == pytest.approx(1 - (10 / 11) ** 4 * 2.718281828459045 ** -0.1, rel=1e-9)


def test_eval_formulas():
    assert evaluate_formula("e1", ["x=1"]) == pytest.approx(0.21938393439552, rel=1e-12)
    assert evaluate_formula("phi2", ["b1=1", "b2=2", "c=4", "x1=0.5", "x2=0.5"]) > 1
    assert evaluate_formula("alg2", ["M=16", "N=128", "mean_x=30dB", "mean_y=20dB"]) >= 1
    with pytest.raises(ConfigError):
        evaluate_formula("outage", ["mean_x=1"])


def test_perturbed_closed_form_fails_outage_check():
    passed, *_ = check_outage_closed_form(seed=0, n_samples=200_000, perturb=0.05)
    assert not passed
    passed, *_ = check_outage_closed_form(seed=0, n_samples=200_000)
    assert passed


def test_validation_report_lists_each_criterion_once(monkeypatch):
    import io

    from mimocr import validation

    stub = {k: (name, (lambda **kw: (True, 0.0, 1.0, ""))) for k, (name, _) in validation.CRITERIA.items()}
    monkeypatch.setattr(validation, "CRITERIA", stub)
    buf = io.StringIO()
    results = validation.run_validation(out=buf)
    assert [r.number for r in results] == list(range(1, 12))
    out = buf.getvalue()
    assert out.count("[PASS]") == 11


def test_validate_exit_status_on_failure(monkeypatch):
    from mimocr import cli, validation

    stub = {k: (name, (lambda k=k, **kw: (k != 3, 0.0, 1.0, "")))
            for k, (name, _) in validation.CRITERIA.items()}
    monkeypatch.setattr(validation, "CRITERIA", stub)
    monkeypatch.setattr(cli, "run_validation", validation.run_validation)
    assert cli.main(["validate"]) == 1


def test_readme_scenario_file_parses(tmp_path):
    import re
    from pathlib import Path

    text = (Path(__file__).parents[1] / "README.md").read_text()
    ini = re.search(r"```ini\n(.*?)```", text, re.S).group(1)
    path = tmp_path / "readme.ini"
    path.write_text(ini)
    spec = load_config(path)
    assert spec.variable == "mean_y" and spec.tie_m_to_n is False
    assert spec.scenario.hc is not None and spec.scenario.n_samples == 2000
