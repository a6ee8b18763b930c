from dataclasses import replace

import numpy as np
import pytest

from fnclin.constraints import (
    audit_constraints,
    block_satisfied,
    dump_constraints,
    emit_constraints,
    evaluate_block,
    save_constraints,
)
from fnclin.data import generate_scenarios, label_dataset
from fnclin.errors import ValidationError
from fnclin.features import feature_matrix, feature_vector, init_weights, layout_for
from fnclin.margin import MarginSpec
from fnclin.pwl import PwlModel, eval_pwl, train_elm_pwl
from fnclin.sfr import CommitmentScenario

FAST_SPEC = MarginSpec(dt=2e-3, horizon_s=20.0)


@pytest.fixture(scope="module")
def weights(desk):
    return init_weights(6, 13, desk)


@pytest.fixture(scope="module")
def random_pwl(desk, weights):
    rng = np.random.default_rng(21)
    dim = layout_for(desk, weights.n_hidden).dim
    return PwlModel(coeffs=rng.normal(size=(3, dim)), intercepts=rng.normal(size=3))


def _random_scenarios(desk, rng, count):
    out = []
    for _ in range(count):
        tg_on = tuple(int(b) for b in rng.integers(0, 2, size=10))
        flags, powers = [], []
        for res in desk.ress:
            if rng.random() < 0.5:
                flags.append(1)
                powers.append(float(rng.uniform(0.3 * res.capacity_mw,
                                                res.capacity_mw)))
            else:
                flags.append(0)
                powers.append(float(rng.uniform(0, res.capacity_mw)))
        out.append(CommitmentScenario(tg_on=tg_on, res_participates=tuple(flags),
                                      res_power_mw=tuple(powers)))
    return out


def test_block_counts(desk, weights, random_pwl):
    blocks = emit_constraints(random_pwl, weights, desk)
    assert len(blocks) == 10
    for i, block in enumerate(blocks):
        assert block.contingency_tg == i
        assert len(block.rows) == 3
        for row in block.rows:
            assert row.tg_coef.shape == (10,)
            assert row.res_coef_per_mw.shape == (4,)
            assert row.tg_coef[i] == 0.0


def test_dim_mismatch_rejected(desk, weights):
    bad = PwlModel(coeffs=np.zeros((2, 7)), intercepts=np.zeros(2))
    with pytest.raises(ValidationError):
        emit_constraints(bad, weights, desk)


def test_rows_reproduce_surrogate_on_random_commitments(desk, weights, random_pwl):
    """Core equivalence: min over a contingency block's rows equals the
    surrogate evaluated on the outage scenario, for 50 random decisions."""
    blocks = emit_constraints(random_pwl, weights, desk)
    rng = np.random.default_rng(77)
    for scenario in _random_scenarios(desk, rng, 50):
        for i in range(10):
            outage = replace(scenario, tg_on=tuple(
                0 if k == i else x for k, x in enumerate(scenario.tg_on)))
            lhs = evaluate_block(blocks[i], scenario)
            direct = random_pwl.coeffs @ feature_vector(weights, desk, outage) \
                + random_pwl.intercepts
            np.testing.assert_allclose(lhs, direct, rtol=1e-10, atol=1e-12)
            assert min(lhs) == pytest.approx(eval_pwl(
                random_pwl, feature_vector(weights, desk, outage)), abs=1e-10)


def test_tripped_unit_decision_has_no_effect(desk, weights, random_pwl):
    blocks = emit_constraints(random_pwl, weights, desk)
    rng = np.random.default_rng(3)
    scenario = _random_scenarios(desk, rng, 1)[0]
    flipped = replace(scenario, tg_on=tuple(
        1 - x if k == 4 else x for k, x in enumerate(scenario.tg_on)))
    np.testing.assert_array_equal(evaluate_block(blocks[4], scenario),
                                  evaluate_block(blocks[4], flipped))


def test_block_satisfied_thresholds(desk, weights, random_pwl):
    blocks = emit_constraints(random_pwl, weights, desk)
    rng = np.random.default_rng(8)
    scenario = _random_scenarios(desk, rng, 1)[0]
    worst = float(min(evaluate_block(blocks[0], scenario)))
    assert block_satisfied(blocks[0], scenario, worst - 1e-9)
    assert not block_satisfied(blocks[0], scenario, worst + 1e-9)


@pytest.fixture(scope="module")
def trained(desk, weights):
    scenarios = generate_scenarios(desk, 40, seed=31)
    ds = label_dataset(desk, scenarios, FAST_SPEC, jobs=4)
    feats = feature_matrix(weights, desk, ds.scenarios)
    pwl = train_elm_pwl(feats, ds.labels, n_segments=3, seed=0, restarts=4,
                        max_iters=15)
    return ds, pwl


def test_audit_zero_output_never_false_safe(desk, weights, trained):
    ds, pwl = trained
    blocks = emit_constraints(pwl, weights, desk)
    report = audit_constraints(blocks, desk, ds.scenarios[:3], FAST_SPEC,
                               loading_factor=0.0)
    assert report.n_checked == sum(sum(s.tg_on) for s in ds.scenarios[:3])
    assert report.n_false_safe == 0
    assert report.false_safe_rate == 0.0


def test_audit_rates_consistent(desk, weights, trained):
    ds, pwl = trained
    blocks = emit_constraints(pwl, weights, desk)
    report = audit_constraints(blocks, desk, ds.scenarios[:4], FAST_SPEC,
                               loading_factor=0.8)
    assert report.n_checked > 0
    assert report.false_safe_rate == report.n_false_safe / report.n_checked
    assert report.conservative_rate == report.n_conservative / report.n_checked
    assert report.n_false_safe + report.n_conservative <= report.n_checked


def test_audit_empty_scenarios(desk, weights, random_pwl):
    blocks = emit_constraints(random_pwl, weights, desk)
    report = audit_constraints(blocks, desk, [], FAST_SPEC)
    assert report.n_checked == 0
    assert report.false_safe_rate == 0.0


def test_dump_and_save(tmp_path, desk, weights, random_pwl):
    blocks = emit_constraints(random_pwl, weights, desk)
    text, csv = dump_constraints(blocks, desk)
    assert "[contingency tg=0]" in text
    lines = csv.strip().splitlines()
    assert len(lines) == 1 + 10 * 3
    path = tmp_path / "blocks.txt"
    save_constraints(blocks, desk, path)
    assert path.exists()
    assert path.with_suffix(".txt.csv").exists()
