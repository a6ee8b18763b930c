"""Per-contingency linear frequency-nadir constraint blocks.

For the loss of TG i the surrogate margin with x_i forced to zero must cover
that unit's scheduled output P_i.  Because the predictor is a minimum of
affine functions of the decision-linear features, "margin >= P_i" expands to
one linear inequality per segment -- no binaries or big-M terms.

Row form per contingency i and segment l:

    sum_{i' != i} tg_coef[i'] * x_g[i'] + sum_j res_coef_per_mw[j] * (x_v[j] * P_j_mw)
        + const  >=  P_i

TG coefficients are per commitment bit; RES coefficients are per MW of
participating renewable power (the feature map scales RES blocks by the
dispatched power, so the natural decision quantity is x_v[j] * P_j).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import ElmWeights, layout_for, unit_blocks
from .margin import MarginSpec, margin_bisect
from .pwl import PwlModel, eval_pwl
from .sfr import CommitmentScenario, SystemModel, check_scenario


@dataclass(frozen=True)
class ConstraintRow:
    tg_coef: np.ndarray          # per TG commitment bit (tripped unit entry = 0)
    res_coef_per_mw: np.ndarray  # per MW of participating RES power
    const: float


@dataclass(frozen=True)
class LinearConstraintBlock:
    contingency_tg: int
    rows: tuple[ConstraintRow, ...]   # all rows must be >= the unit's output P_i (pu)


def emit_constraints(pwl: PwlModel, weights: ElmWeights,
                     model: SystemModel) -> list[LinearConstraintBlock]:
    """One L-row linear block per TG contingency."""
    layout = layout_for(model, weights.n_hidden)
    if pwl.feature_dim != layout.dim:
        raise ValidationError(
            f"model feature dim {layout.dim} does not match surrogate dim {pwl.feature_dim}"
        )
    tg_blocks, res_blocks = unit_blocks(weights, model)
    s_base = model.s_base_mva
    h_idx = layout.inertia_index
    n_tg, n_res = len(model.tgs), len(model.ress)

    # Per-segment coefficient of each decision quantity, before contingency.
    seg_tg = np.zeros((pwl.n_segments, n_tg))
    seg_res = np.zeros((pwl.n_segments, n_res))
    for l in range(pwl.n_segments):
        c = pwl.coeffs[l]
        for i, tg in enumerate(model.tgs):
            seg_tg[l, i] = (tg.capacity_mva / s_base) * (
                c[layout.tg_slice(i)] @ tg_blocks[i] + c[h_idx] * tg.inertia
            )
        for j, res in enumerate(model.ress):
            seg_res[l, j] = (1.0 / s_base) * (
                c[layout.res_slice(j)] @ res_blocks[j] + c[h_idx] * res.inertia
            )
    other_h = sum(dev.inertia * dev.capacity_mva for dev in model.others) / s_base

    blocks = []
    for i in range(n_tg):
        rows = []
        for l in range(pwl.n_segments):
            tg_coef = seg_tg[l].copy()
            tg_coef[i] = 0.0  # tripped unit: x_i = 0 substituted
            rows.append(ConstraintRow(
                tg_coef=tg_coef,
                res_coef_per_mw=seg_res[l].copy(),
                const=float(pwl.coeffs[l, h_idx] * other_h + pwl.intercepts[l]),
            ))
        blocks.append(LinearConstraintBlock(contingency_tg=i, rows=tuple(rows)))
    return blocks


def evaluate_block(block: LinearConstraintBlock,
                   scenario: CommitmentScenario) -> np.ndarray:
    """Left-hand-side value of every row for a concrete commitment."""
    x_g = np.asarray(scenario.tg_on, dtype=float)
    xp = np.array([x * p for x, p in zip(scenario.res_participates,
                                         scenario.res_power_mw)])
    return np.array([row.tg_coef @ x_g + row.res_coef_per_mw @ xp + row.const
                     for row in block.rows])


def block_satisfied(block: LinearConstraintBlock, scenario: CommitmentScenario,
                    p_i_pu: float) -> bool:
    """True when every row covers the tripped unit's output."""
    return bool(np.all(evaluate_block(block, scenario) >= p_i_pu))


@dataclass(frozen=True)
class AuditReport:
    n_checked: int
    n_false_safe: int       # constraint satisfied but true margin below P_i
    n_conservative: int     # constraint violated but true margin above P_i
    false_safe_rate: float
    conservative_rate: float


def audit_constraints(blocks, model: SystemModel, scenarios, spec: MarginSpec,
                      loading_factor: float = 0.8) -> AuditReport:
    """Compare block satisfaction against simulated truth per contingency.

    For each scenario and each committed TG i, the stipulated output is
    loading_factor x capacity; the truth is the full-order margin with unit i
    forced offline.
    """
    n_checked = n_false_safe = n_conservative = 0
    for scenario in scenarios:
        check_scenario(model, scenario)
        for i, on in enumerate(scenario.tg_on):
            if not on:
                continue
            p_i = loading_factor * model.tgs[i].capacity_mva / model.s_base_mva
            outage = replace(scenario, tg_on=tuple(
                0 if k == i else x for k, x in enumerate(scenario.tg_on)))
            predicted_ok = block_satisfied(blocks[i], scenario, p_i)
            truth = margin_bisect(model, outage, spec)
            truth_ok = truth.unbounded or truth.margin_pu >= p_i
            n_checked += 1
            if predicted_ok and not truth_ok:
                n_false_safe += 1
            elif truth_ok and not predicted_ok:
                n_conservative += 1
    if n_checked == 0:
        return AuditReport(0, 0, 0, 0.0, 0.0)
    return AuditReport(n_checked=n_checked, n_false_safe=n_false_safe,
                       n_conservative=n_conservative,
                       false_safe_rate=n_false_safe / n_checked,
                       conservative_rate=n_conservative / n_checked)


def dump_constraints(blocks, model: SystemModel) -> tuple[str, str]:
    """(human-readable text, machine-readable CSV) renderings of the blocks.

    Convention recorded in the header: the aggregate-inertia feature uses the
    committed system with the tripped unit's own term removed (x_i = 0
    substituted into the inertia sum).
    """
    n_tg, n_res = len(model.tgs), len(model.ress)
    text = ["# fnclin frequency nadir constraint export",
            "# one block per single-TG contingency; all rows of a block must hold",
            "# variables: x_g[i] commitment bits; xP_v[j] = x_v[j] * P_j_mw",
            "# tripped unit's inertia and regulation terms removed (x_i = 0)",
            ""]
    csv = ["contingency_tg,row," +
           ",".join(f"x_g[{i}]" for i in range(n_tg)) + ("," if n_res else "") +
           ",".join(f"xP_v[{j}]_per_mw" for j in range(n_res)) + ",const,rhs"]
    for block in blocks:
        text.append(f"[contingency tg={block.contingency_tg}]")
        for r, row in enumerate(block.rows):
            terms = [f"{row.tg_coef[i]:+.12g}*x_g[{i}]" for i in range(n_tg)
                     if i != block.contingency_tg]
            terms += [f"{row.res_coef_per_mw[j]:+.12g}*xP_v[{j}]" for j in range(n_res)]
            text.append("  " + " ".join(terms) +
                        f" {row.const:+.12g} >= P[{block.contingency_tg}]")
            csv.append(
                f"{block.contingency_tg},{r}," +
                ",".join(repr(v) for v in row.tg_coef) + ("," if n_res else "") +
                ",".join(repr(v) for v in row.res_coef_per_mw) +
                f",{row.const!r},P[{block.contingency_tg}]"
            )
        text.append("")
    return "\n".join(text), "\n".join(csv) + "\n"


def save_constraints(blocks, model: SystemModel, path) -> None:
    path = Path(path)
    text, csv = dump_constraints(blocks, model)
    path.write_text(text)
    path.with_suffix(path.suffix + ".csv").write_text(csv)
