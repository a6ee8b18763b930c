import numpy as np
import pytest

from fnclin.data import generate_scenarios, label_dataset, save_dataset
from fnclin.errors import ValidationError
from fnclin.evaluate import (
    ExperimentConfig,
    metrics,
    parse_config,
    parse_report_csv,
    render_report,
    run_experiment,
)
from fnclin.fileio import save_system
from fnclin.margin import MarginSpec


def test_metrics_basic_arithmetic():
    # One prediction 0.001 pu below a 0.1 pu label on a 1000 MVA base:
    # 1 MW absolute, 1% relative.
    mae, mre, worst = metrics([0.099], [0.1], 1000.0)
    assert mae == pytest.approx(1.0)
    assert mre == pytest.approx(1.0)
    assert worst == pytest.approx(-0.001)


def test_metrics_mixed_signs():
    mae, mre, worst = metrics([0.11, 0.095], [0.1, 0.1], 1000.0)
    assert mae == pytest.approx((10.0 + 5.0) / 2)
    assert mre == pytest.approx((10.0 + 5.0) / 2)
    assert worst == pytest.approx(0.01)


def test_metrics_validation():
    with pytest.raises(ValidationError):
        metrics([0.1], [0.1, 0.2], 100.0)
    with pytest.raises(ValidationError):
        metrics([], [], 100.0)
    with pytest.raises(ValidationError):
        metrics([0.1], [0.0], 100.0)


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(model_path="m", dataset_paths=(), trials=1)
    with pytest.raises(ValidationError):
        ExperimentConfig(model_path="m", dataset_paths=("d",), trials=0)


def test_parse_config(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "# comment\n"
        "model = desk.sys\n"
        "datasets = a.ds, b.ds\n"
        "trials = 3\n"
        "L = 2\n"
        "hidden = 5\n"
        "train_count = 30\n"
    )
    parsed = parse_config(cfg)
    assert parsed.model_path == str(tmp_path / "desk.sys")
    assert parsed.dataset_paths == (str(tmp_path / "a.ds"), str(tmp_path / "b.ds"))
    assert parsed.trials == 3
    assert parsed.n_segments == 2
    assert parsed.n_hidden == 5
    assert parsed.train_count == 30
    assert parsed.baseline_segments == 40


def test_parse_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("model = m\ndatasets = d\nbogus = 1\n")
    with pytest.raises(ValidationError):
        parse_config(cfg)
    cfg.write_text("datasets = d\n")
    with pytest.raises(ValidationError):
        parse_config(cfg)


@pytest.fixture(scope="module")
def tiny_experiment(desk, tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    save_system(desk, root / "desk.sys")
    spec = MarginSpec(dt=2e-3, horizon_s=20.0)
    ds = label_dataset(desk, generate_scenarios(desk, 40, seed=2), spec, jobs=4)
    save_dataset(ds, root / "small.ds")
    cfg = root / "exp.cfg"
    cfg.write_text(
        "model = desk.sys\n"
        "datasets = small.ds\n"
        "trials = 2\n"
        "L = 2\n"
        "hidden = 4\n"
        "train_count = 30\n"
        "restarts = 3\n"
        "max_iters = 10\n"
        "baseline_segments = 6\n"
    )
    return cfg


def test_run_experiment_smoke(tiny_experiment):
    report = run_experiment(parse_config(tiny_experiment))
    assert len(report.rows) == 2
    proposed = report.average("proposed")
    baseline = report.average("baseline")
    assert proposed.mae_mw >= 0
    assert baseline.mae_mw >= 0
    # The proposed fit never overestimates any training label.
    assert proposed.max_signed_train_pu <= 1e-9


def test_run_experiment_deterministic(tiny_experiment):
    cfg = parse_config(tiny_experiment)
    r1 = render_report(run_experiment(cfg), fmt="csv")
    r2 = render_report(run_experiment(cfg), fmt="csv")
    # Drop the wall-clock column before comparing.
    def strip(text):
        return [",".join(v for i, v in enumerate(line.split(",")) if i != 7)
                for line in text.splitlines()]
    assert strip(r1) == strip(r2)


def test_report_round_trip(tiny_experiment):
    report = run_experiment(parse_config(tiny_experiment))
    rows = parse_report_csv(render_report(report, fmt="csv"))
    assert len(rows) == 4  # per-dataset rows plus the two averages
    by_key = {(r["dataset"], r["method"]): r for r in rows}
    assert by_key[("small.ds", "proposed")]["mae_mw"] == \
        pytest.approx(report.rows[0].mae_mw, rel=1e-12)
    text = render_report(report, fmt="text")
    assert "MAE(MW)" in text
    with pytest.raises(ValidationError):
        render_report(report, fmt="json")
    with pytest.raises(ValidationError):
        parse_report_csv("bad,header\n1,2\n")
