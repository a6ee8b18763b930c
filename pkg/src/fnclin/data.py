"""Scenario generation, margin labeling, noise replicas, splits and persistence.

The year-long unit-commitment history behind the original experiments is not
available, so scenarios come from a synthetic generator: a random load level
is covered by a randomized merit-order commitment, renewable outputs are
drawn uniformly, and the participation flag follows the 0.3 pu rule.  Labels
always come from the full-order margin oracle so that noisy replicas stay
physically consistent.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import MonotonicityError, ValidationError
from .fileio import dump_system
from .margin import MarginSpec, margin_bisect
from .sfr import (
    CommitmentScenario,
    RES_PARTICIPATION_THRESHOLD,
    SystemModel,
    check_scenario,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenOptions:
    """Synthetic load/commitment generator knobs."""

    load_min_frac: float = 0.35   # of total TG capacity
    load_max_frac: float = 0.85
    reserve_factor: float = 1.1
    min_committed: int = 1


@dataclass(frozen=True)
class DatasetProvenance:
    generator_seed: int
    model_hash: str
    delta_f_max_pu: float
    tol_pu: float
    dp_hi: float
    dt: float
    horizon_s: float
    noise_seed: int | None = None
    flip_prob: float | None = None

    def margin_spec(self) -> MarginSpec:
        return MarginSpec(delta_f_max_pu=self.delta_f_max_pu, tol_pu=self.tol_pu,
                          dp_hi=self.dp_hi, dt=self.dt, horizon_s=self.horizon_s)


@dataclass
class LabeledDataset:
    """Scenarios with oracle margins; features attach at training time."""

    scenarios: list[CommitmentScenario]
    labels: np.ndarray
    provenance: DatasetProvenance
    features: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.scenarios) == 0:
            raise ValidationError("dataset must contain at least one record")
        self.labels = np.asarray(self.labels, dtype=float)
        if self.labels.shape != (len(self.scenarios),):
            raise ValidationError("labels length does not match scenarios")
        if not np.all(np.isfinite(self.labels)) or np.any(self.labels < 0):
            raise ValidationError("labels must be finite and >= 0")

    def __len__(self) -> int:
        return len(self.scenarios)


def model_hash(model: SystemModel) -> str:
    return hashlib.sha256(dump_system(model).encode()).hexdigest()[:16]


def generate_scenarios(model: SystemModel, count: int, seed: int,
                       opts: GenOptions | None = None) -> list[CommitmentScenario]:
    """Draw commitment scenarios under random load with merit-order commitment."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    opts = opts or GenOptions()
    rng = np.random.default_rng(seed)
    caps = np.array([tg.capacity_mva for tg in model.tgs])
    total = caps.sum()
    scenarios = []
    for _ in range(count):
        load = total * rng.uniform(opts.load_min_frac, opts.load_max_frac)
        need = load * opts.reserve_factor
        if need > total:
            raise ValidationError(
                f"load x reserve ({need:.1f} MW) exceeds total TG capacity ({total:.1f} MW)"
            )
        order = rng.permutation(len(model.tgs))
        tg_on = [0] * len(model.tgs)
        committed_cap = 0.0
        committed = 0
        for i in order:
            if committed_cap >= need and committed >= opts.min_committed:
                break
            tg_on[i] = 1
            committed_cap += caps[i]
            committed += 1
        res_power = []
        res_part = []
        for res in model.ress:
            p = float(rng.uniform(0.0, res.capacity_mw))
            res_power.append(p)
            res_part.append(int(p >= RES_PARTICIPATION_THRESHOLD * res.capacity_mw))
        scenarios.append(CommitmentScenario(tg_on=tuple(tg_on),
                                            res_participates=tuple(res_part),
                                            res_power_mw=tuple(res_power)))
    return scenarios


def label_dataset(model: SystemModel, scenarios, spec: MarginSpec,
                  seed: int = 0, jobs: int = 1) -> LabeledDataset:
    """Label scenarios with the full-order margin oracle.

    Records whose margin is unbounded at the cap or fails the monotonicity
    check are excluded and logged.  Results are independent of `jobs`.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ValidationError("no scenarios to label")
    for scenario in scenarios:
        check_scenario(model, scenario)

    def one(scenario):
        try:
            result = margin_bisect(model, scenario, spec)
        except MonotonicityError as exc:
            return ("monotonicity", str(exc))
        if result.unbounded:
            return ("unbounded", None)
        return ("ok", result.margin_pu)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, scenarios))
    else:
        results = [one(s) for s in scenarios]

    kept, labels = [], []
    for scenario, (status, payload) in zip(scenarios, results):
        if status == "ok":
            kept.append(scenario)
            labels.append(payload)
        else:
            log.warning("excluding record (%s)%s", status,
                        f": {payload}" if payload else "")
    if not kept:
        raise ValidationError("all records were excluded during labeling")
    prov = DatasetProvenance(generator_seed=seed, model_hash=model_hash(model),
                             delta_f_max_pu=spec.delta_f_max_pu, tol_pu=spec.tol_pu,
                             dp_hi=spec.dp_hi, dt=spec.dt, horizon_s=spec.horizon_s)
    return LabeledDataset(scenarios=kept, labels=np.array(labels), provenance=prov)


def perturb_dataset(model: SystemModel, dataset: LabeledDataset, noise_seed: int,
                    flip_prob: float = 0.05, jitter_frac: float = 0.1,
                    jobs: int = 1) -> LabeledDataset:
    """Noise replica: flip commitment bits, jitter RES powers, re-label.

    Bit flips honor the participation rule (0 -> 1 only when the jittered
    power clears the threshold); labels are re-simulated for every changed
    scenario so (scenario, label) pairs stay consistent.
    """
    if not 0 <= flip_prob <= 1:
        raise ValidationError("flip_prob must be in [0, 1]")
    if jitter_frac < 0:
        raise ValidationError("jitter_frac must be >= 0")
    rng = np.random.default_rng(noise_seed)
    spec = dataset.provenance.margin_spec()

    perturbed, changed = [], []
    for scenario in dataset.scenarios:
        tg_on = [x ^ int(rng.random() < flip_prob) for x in scenario.tg_on]
        powers, flags = [], []
        for res, p, flag in zip(model.ress, scenario.res_power_mw,
                                scenario.res_participates):
            if jitter_frac > 0:
                p = float(np.clip(p * (1.0 + rng.uniform(-jitter_frac, jitter_frac)),
                                  0.0, res.capacity_mw))
            flag = flag ^ int(rng.random() < flip_prob)
            if p < RES_PARTICIPATION_THRESHOLD * res.capacity_mw:
                flag = 0
            powers.append(p)
            flags.append(flag)
        new = CommitmentScenario(tg_on=tuple(tg_on), res_participates=tuple(flags),
                                 res_power_mw=tuple(powers))
        perturbed.append(new)
        changed.append(new != scenario)

    to_label = [s for s, c in zip(perturbed, changed) if c]
    relabeled_pairs = []
    if to_label:
        relabeled = label_dataset(model, to_label, spec, jobs=jobs)
        relabeled_pairs = list(zip(relabeled.scenarios, relabeled.labels))
    # Walk original order; relabeling preserves order, so dropped records
    # (unbounded/monotonicity failures, already logged) are skipped in step.
    scenarios_out, labels_out = [], []
    pointer = 0
    for scenario, was_changed, old_label in zip(perturbed, changed, dataset.labels):
        if not was_changed:
            scenarios_out.append(scenario)
            labels_out.append(float(old_label))
        elif pointer < len(relabeled_pairs) and relabeled_pairs[pointer][0] == scenario:
            scenarios_out.append(scenario)
            labels_out.append(float(relabeled_pairs[pointer][1]))
            pointer += 1
    prov = replace(dataset.provenance, noise_seed=noise_seed, flip_prob=flip_prob)
    return LabeledDataset(scenarios=scenarios_out, labels=np.array(labels_out),
                          provenance=prov)


def split(dataset: LabeledDataset, train_count: int, seed: int,
          ) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic uniform random partition into (train, test)."""
    n = len(dataset)
    if not 0 < train_count < n:
        raise ValidationError(f"train_count must be in (0, {n}), got {train_count}")
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:train_count])
    test_idx = np.sort(perm[train_count:])

    def take(idx):
        return LabeledDataset(
            scenarios=[dataset.scenarios[i] for i in idx],
            labels=dataset.labels[idx],
            provenance=dataset.provenance,
        )

    return take(train_idx), take(test_idx)


# ---------------------------------------------------------------------------
# Persistence: one record per line, header block with provenance.

_HEADER_KEYS = ("generator_seed", "model_hash", "delta_f_max_pu", "tol_pu",
                "dp_hi", "dt", "horizon_s", "noise_seed", "flip_prob")


def dump_dataset(dataset: LabeledDataset) -> str:
    prov = dataset.provenance
    lines = ["# fnclin dataset v1"]
    for key in _HEADER_KEYS:
        value = getattr(prov, key)
        if value is not None:
            lines.append(f"# {key} = {value!r}")
    for rec_id, (scenario, label) in enumerate(zip(dataset.scenarios, dataset.labels)):
        bits = "".join(str(x) for x in scenario.tg_on)
        res = " ".join(f"{f}:{p!r}" for f, p in zip(scenario.res_participates,
                                                    scenario.res_power_mw))
        parts = [str(rec_id), bits]
        if res:
            parts.append(res)
        parts.append(repr(float(label)))
        lines.append(" ".join(parts))
    lines.append("")
    return "\n".join(lines)


def save_dataset(dataset: LabeledDataset, path) -> None:
    Path(path).write_text(dump_dataset(dataset))


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    header: dict[str, str] = {}
    scenarios, labels = [], []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = (p.strip() for p in body.split("=", 1))
                header[key] = value
            continue
        tokens = line.split()
        if len(tokens) < 3:
            raise ValidationError(f"{path}:{lineno}: malformed record")
        try:
            bits = tuple(int(ch) for ch in tokens[1])
            flags, powers = [], []
            for tok in tokens[2:-1]:
                flag, power = tok.split(":", 1)
                flags.append(int(flag))
                powers.append(float(power))
            label = float(tokens[-1])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: malformed record") from exc
        scenarios.append(CommitmentScenario(tg_on=bits, res_participates=tuple(flags),
                                            res_power_mw=tuple(powers)))
        labels.append(label)
    required = ("generator_seed", "model_hash", "delta_f_max_pu", "tol_pu",
                "dp_hi", "dt", "horizon_s")
    missing = [k for k in required if k not in header]
    if missing:
        raise ValidationError(f"{path}: header missing {missing}")
    prov = DatasetProvenance(
        generator_seed=int(header["generator_seed"]),
        model_hash=header["model_hash"].strip("'\""),
        delta_f_max_pu=float(header["delta_f_max_pu"]),
        tol_pu=float(header["tol_pu"]),
        dp_hi=float(header["dp_hi"]),
        dt=float(header["dt"]),
        horizon_s=float(header["horizon_s"]),
        noise_seed=int(header["noise_seed"]) if "noise_seed" in header else None,
        flip_prob=float(header["flip_prob"]) if "flip_prob" in header else None,
    )
    return LabeledDataset(scenarios=scenarios, labels=np.array(labels), provenance=prov)
