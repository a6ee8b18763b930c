"""Experiment harness: multi-trial training, MAE/MRE metrics, report rendering.

Mirrors the evaluation protocol at desk scale: per noisy dataset, the
proposed predictor is trained with several random embedding seeds and its
averaged errors are compared against the deterministic two-step baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import LabeledDataset, load_dataset, split
from .errors import ValidationError
from .features import feature_matrix, init_weights
from .fileio import load_system
from .pwl import (
    eval_pwl_batch,
    predict_baseline,
    train_baseline,
    train_elm_pwl,
)
from .sfr import SystemModel


def metrics(predictions, labels, s_base_mva: float) -> tuple[float, float, float]:
    """(MAE in MW, MRE in %, max signed error in pu).

    MRE uses the true label as denominator.
    """
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValidationError("predictions and labels must be equal-length vectors")
    if predictions.size == 0:
        raise ValidationError("empty prediction set")
    if np.any(labels <= 0):
        raise ValidationError("labels must be > 0 for MRE")
    err = predictions - labels
    mae_mw = float(np.mean(np.abs(err)) * s_base_mva)
    mre_pct = float(np.mean(np.abs(err) / labels) * 100.0)
    return mae_mw, mre_pct, float(np.max(err))


@dataclass(frozen=True)
class ExperimentConfig:
    model_path: str
    dataset_paths: tuple[str, ...]
    trials: int = 10
    n_segments: int = 3
    n_hidden: int = 10
    baseline_segments: int = 40
    base_seed: int = 0
    train_count: int = 2000
    restarts: int = 10
    max_iters: int = 30

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.dataset_paths:
            raise ValidationError("at least one dataset required")


_CONFIG_KEYS = {"model", "datasets", "trials", "L", "hidden", "baseline_segments",
                "seeds", "train_count", "restarts", "max_iters"}


def parse_config(path) -> ExperimentConfig:
    """key = value text config; `datasets` is a comma-separated path list."""
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown key '{key}'")
        raw[key] = value
    for required in ("model", "datasets"):
        if required not in raw:
            raise ValidationError(f"{path}: missing '{required}'")
    base = path.parent

    def resolve(p):
        p = Path(p.strip())
        return str(p if p.is_absolute() else base / p)

    return ExperimentConfig(
        model_path=resolve(raw["model"]),
        dataset_paths=tuple(resolve(p) for p in raw["datasets"].split(",") if p.strip()),
        trials=int(raw.get("trials", 10)),
        n_segments=int(raw.get("L", 3)),
        n_hidden=int(raw.get("hidden", 10)),
        baseline_segments=int(raw.get("baseline_segments", 40)),
        base_seed=int(raw.get("seeds", 0)),
        train_count=int(raw.get("train_count", 2000)),
        restarts=int(raw.get("restarts", 10)),
        max_iters=int(raw.get("max_iters", 30)),
    )


@dataclass(frozen=True)
class MethodRow:
    dataset: str
    method: str            # "proposed" or "baseline"
    mae_mw: float
    mre_pct: float
    max_signed_train_pu: float
    train_time_s: float
    mae_spread_mw: float = 0.0   # std over trials (proposed only)
    mre_spread_pct: float = 0.0
    trials: int = 1


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[MethodRow, ...]
    trials: int
    s_base_mva: float
    notes: tuple[str, ...] = ()

    def average(self, method: str) -> MethodRow:
        rows = [r for r in self.rows if r.method == method]
        if not rows:
            raise ValidationError(f"no rows for method {method!r}")
        return MethodRow(
            dataset="average", method=method,
            mae_mw=float(np.mean([r.mae_mw for r in rows])),
            mre_pct=float(np.mean([r.mre_pct for r in rows])),
            max_signed_train_pu=float(np.max([r.max_signed_train_pu for r in rows])),
            train_time_s=float(np.mean([r.train_time_s for r in rows])),
            mae_spread_mw=float(np.mean([r.mae_spread_mw for r in rows])),
            mre_spread_pct=float(np.mean([r.mre_spread_pct for r in rows])),
            trials=rows[0].trials,
        )


def evaluate_dataset(model: SystemModel, dataset: LabeledDataset, config: ExperimentConfig,
                     dataset_name: str) -> tuple[MethodRow, MethodRow, tuple[str, ...]]:
    """(proposed row averaged over trials, baseline row, notes) for one dataset."""
    train, test = split(dataset, config.train_count, seed=config.base_seed + 7919)
    s_base = model.s_base_mva
    notes = []

    maes, mres, max_signed, times = [], [], [], []
    for trial in range(config.trials):
        seed = config.base_seed + trial
        weights = init_weights(config.n_hidden, seed, model)
        z_train = feature_matrix(weights, model, train.scenarios)
        z_test = feature_matrix(weights, model, test.scenarios)
        t0 = time.perf_counter()
        pwl = train_elm_pwl(z_train, train.labels, n_segments=config.n_segments,
                            seed=seed, max_iters=config.max_iters,
                            restarts=config.restarts)
        times.append(time.perf_counter() - t0)
        mae, mre, _ = metrics(eval_pwl_batch(pwl, z_test), test.labels, s_base)
        max_signed.append(float(np.max(eval_pwl_batch(pwl, z_train) - train.labels)))
        maes.append(mae)
        mres.append(mre)
    mae_arr, mre_arr = np.array(maes), np.array(mres)
    if mae_arr.mean() > 0:
        cov = mae_arr.std() / mae_arr.mean()
        if cov >= 0.25:
            notes.append(f"{dataset_name}: proposed MAE coefficient of variation "
                         f"{cov:.2f} >= 0.25 (stability soft gate)")
    proposed = MethodRow(
        dataset=dataset_name, method="proposed",
        mae_mw=float(mae_arr.mean()), mre_pct=float(mre_arr.mean()),
        max_signed_train_pu=float(np.max(max_signed)),
        train_time_s=float(np.mean(times)),
        mae_spread_mw=float(mae_arr.std()), mre_spread_pct=float(mre_arr.std()),
        trials=config.trials,
    )

    t0 = time.perf_counter()
    baseline = train_baseline(model, train.scenarios,
                              dataset.provenance.delta_f_max_pu,
                              n_segments=config.baseline_segments)
    bl_time = time.perf_counter() - t0
    bl_test = np.array([predict_baseline(baseline, model, s) for s in test.scenarios])
    bl_train = np.array([predict_baseline(baseline, model, s) for s in train.scenarios])
    mae, mre, _ = metrics(bl_test, test.labels, s_base)
    baseline_row = MethodRow(
        dataset=dataset_name, method="baseline",
        mae_mw=mae, mre_pct=mre,
        max_signed_train_pu=float(np.max(bl_train - train.labels)),
        train_time_s=bl_time,
    )
    return proposed, baseline_row, tuple(notes)


def run_experiment(config: ExperimentConfig) -> EvalReport:
    model = load_system(config.model_path)
    rows: list[MethodRow] = []
    notes: list[str] = []
    for path in config.dataset_paths:
        dataset = load_dataset(path)
        name = Path(path).name
        proposed, baseline_row, ds_notes = evaluate_dataset(model, dataset, config, name)
        rows += [proposed, baseline_row]
        notes += list(ds_notes)
    return EvalReport(rows=tuple(rows), trials=config.trials,
                      s_base_mva=model.s_base_mva, notes=tuple(notes))


_CSV_FIELDS = ("dataset", "method", "mae_mw", "mre_pct", "mae_spread_mw",
               "mre_spread_pct", "max_signed_train_pu", "train_time_s", "trials")


def render_report(report: EvalReport, fmt: str = "text") -> str:
    """Render the report; 'csv' is exactly parseable by parse_report_csv."""
    all_rows = list(report.rows) + [report.average("proposed"),
                                    report.average("baseline")]
    if fmt == "csv":
        lines = [",".join(_CSV_FIELDS)]
        for r in all_rows:
            lines.append(",".join([r.dataset, r.method, repr(r.mae_mw), repr(r.mre_pct),
                                   repr(r.mae_spread_mw), repr(r.mre_spread_pct),
                                   repr(r.max_signed_train_pu), repr(r.train_time_s),
                                   str(r.trials)]))
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise ValidationError(f"unknown report format {fmt!r}")
    lines = ["Frequency security margin surrogate evaluation",
             f"trials per dataset: {report.trials}; MRE denominator: true label",
             "",
             f"{'dataset':<24}{'method':<10}{'MAE(MW)':>10}{'MRE(%)':>9}"
             f"{'+-MAE':>9}{'maxerr(pu)':>13}{'t_train(s)':>12}"]
    for r in all_rows:
        lines.append(f"{r.dataset:<24}{r.method:<10}{r.mae_mw:>10.4f}{r.mre_pct:>9.3f}"
                     f"{r.mae_spread_mw:>9.4f}{r.max_signed_train_pu:>13.3e}"
                     f"{r.train_time_s:>12.2f}")
    for note in report.notes:
        lines.append(f"note: {note}")
    lines.append("")
    return "\n".join(lines)


def parse_report_csv(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if l.strip()]
    header = lines[0].split(",")
    if tuple(header) != _CSV_FIELDS:
        raise ValidationError("unrecognized report CSV header")
    out = []
    for line in lines[1:]:
        values = line.split(",")
        row = dict(zip(header, values))
        for key in _CSV_FIELDS[2:-1]:
            row[key] = float(row[key])
        row["trials"] = int(row["trials"])
        out.append(row)
    return out
