"""Random sigmoid embedding of unit parameters and the decision-linear features.

First layer: each unit's raw parameter vector, min-max scaled to [0,1], goes
through a fixed random fully-connected sigmoid layer.  Second layer: embedded
and raw parameters are scaled by the commitment decisions and capacities, and
the aggregate inertia is appended.  For fixed weights the scenario-to-feature
map is affine in (tg_on, res_participates * res_power), which is what makes
the final fitted constraint exactly linear in the scheduling decisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sfr import (
    CommitmentScenario,
    RES_PARAM_NAMES,
    SystemModel,
    TG_PARAM_NAMES,
    check_scenario,
    system_inertia,
)

N_TG_PARAMS = len(TG_PARAM_NAMES)    # (T_r, T_g, T_c, F_hp, droop, inertia)
N_RES_PARAMS = len(RES_PARAM_NAMES)  # (T_v, droop, inertia)


@dataclass(frozen=True)
class ElmWeights:
    """Fixed random embedding weights plus the parameter scaler that feeds them."""

    a_g: np.ndarray        # (n_hidden, 6)
    b_g: np.ndarray        # (n_hidden,)
    a_v: np.ndarray        # (n_hidden, 3)
    b_v: np.ndarray        # (n_hidden,)
    seed: int
    scaler_g: np.ndarray   # (2, 6) rows: min, max over the model's TG parameters
    scaler_v: np.ndarray   # (2, 3) likewise for RES parameters

    @property
    def n_hidden(self) -> int:
        return self.a_g.shape[0]

    def __post_init__(self):
        if self.a_g.shape != (self.n_hidden, N_TG_PARAMS):
            raise ValidationError(f"a_g shape {self.a_g.shape} inconsistent")
        if self.a_v.shape != (self.n_hidden, N_RES_PARAMS):
            raise ValidationError(f"a_v shape {self.a_v.shape} inconsistent")
        if self.b_g.shape != (self.n_hidden,) or self.b_v.shape != (self.n_hidden,):
            raise ValidationError("bias vector shape inconsistent")
        for arr in (self.a_g, self.b_g, self.a_v, self.b_v, self.scaler_g, self.scaler_v):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("weights must be finite")


@dataclass(frozen=True)
class FeatureLayout:
    """Index layout of a feature vector for a fixed model and hidden size."""

    n_tg: int
    n_res: int
    n_hidden: int

    @property
    def tg_block(self) -> int:
        return self.n_hidden + N_TG_PARAMS

    @property
    def res_block(self) -> int:
        return self.n_hidden + N_RES_PARAMS

    @property
    def dim(self) -> int:
        return self.n_tg * self.tg_block + self.n_res * self.res_block + 1

    def tg_slice(self, i: int) -> slice:
        return slice(i * self.tg_block, (i + 1) * self.tg_block)

    def res_slice(self, j: int) -> slice:
        start = self.n_tg * self.tg_block + j * self.res_block
        return slice(start, start + self.res_block)

    @property
    def inertia_index(self) -> int:
        return self.dim - 1


def init_weights(n_hidden: int, seed: int, model: SystemModel) -> ElmWeights:
    """Draw uniform [-1, 1] weights and fit the parameter scaler to the model."""
    if n_hidden < 1:
        raise ValidationError(f"n_hidden must be >= 1, got {n_hidden}")
    rng = np.random.default_rng(seed)
    a_g = rng.uniform(-1.0, 1.0, size=(n_hidden, N_TG_PARAMS))
    b_g = rng.uniform(-1.0, 1.0, size=n_hidden)
    a_v = rng.uniform(-1.0, 1.0, size=(n_hidden, N_RES_PARAMS))
    b_v = rng.uniform(-1.0, 1.0, size=n_hidden)
    tg_raw = np.array([tg.raw_params() for tg in model.tgs])
    scaler_g = np.vstack([tg_raw.min(axis=0), tg_raw.max(axis=0)])
    if model.ress:
        res_raw = np.array([res.raw_params() for res in model.ress])
        scaler_v = np.vstack([res_raw.min(axis=0), res_raw.max(axis=0)])
    else:
        scaler_v = np.vstack([np.zeros(N_RES_PARAMS), np.ones(N_RES_PARAMS)])
    return ElmWeights(a_g=a_g, b_g=b_g, a_v=a_v, b_v=b_v, seed=seed,
                      scaler_g=scaler_g, scaler_v=scaler_v)


def _scale(phi: np.ndarray, scaler: np.ndarray) -> np.ndarray:
    lo, hi = scaler
    span = hi - lo
    out = np.full_like(phi, 0.5, dtype=float)
    ok = span > 0
    out[ok] = (phi[ok] - lo[ok]) / span[ok]
    return out


def embed_unit(weights: ElmWeights, phi, kind: str) -> np.ndarray:
    """Sigmoid embedding of one unit's raw parameter vector."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValidationError("phi must be finite")
    if kind == "tg":
        a, b, scaler = weights.a_g, weights.b_g, weights.scaler_g
    elif kind == "res":
        a, b, scaler = weights.a_v, weights.b_v, weights.scaler_v
    else:
        raise ValidationError(f"kind must be 'tg' or 'res', got {kind!r}")
    if phi.shape != (a.shape[1],):
        raise ValidationError(f"phi shape {phi.shape} does not match weights {a.shape}")
    z = a @ _scale(phi, scaler) + b
    return 1.0 / (1.0 + np.exp(-z))


def unit_blocks(weights: ElmWeights, model: SystemModel):
    """Per-unit feature blocks before decision scaling.

    Returns (tg_blocks, res_blocks): tg_blocks[i] is the unscaled
    [Psi_i, Phi_i] row; multiplying by x_i * S_i / S_base gives the
    contribution of TG i to the feature vector (and similarly for RES with
    x_j * P_j / S_base).
    """
    tg_blocks = np.array([
        np.concatenate([embed_unit(weights, tg.raw_params(), "tg"), tg.raw_params()])
        for tg in model.tgs
    ])
    if model.ress:
        res_blocks = np.array([
            np.concatenate([embed_unit(weights, res.raw_params(), "res"), res.raw_params()])
            for res in model.ress
        ])
    else:
        res_blocks = np.zeros((0, weights.n_hidden + N_RES_PARAMS))
    return tg_blocks, res_blocks


def layout_for(model: SystemModel, n_hidden: int) -> FeatureLayout:
    return FeatureLayout(n_tg=len(model.tgs), n_res=len(model.ress), n_hidden=n_hidden)


def feature_vector(weights: ElmWeights, model: SystemModel,
                   scenario: CommitmentScenario) -> np.ndarray:
    """Decision-scaled feature vector [Psi', Phi', H] in the fixed layout."""
    check_scenario(model, scenario)
    layout = layout_for(model, weights.n_hidden)
    tg_blocks, res_blocks = unit_blocks(weights, model)
    values = np.zeros(layout.dim)
    s_base = model.s_base_mva
    for i, (x, tg) in enumerate(zip(scenario.tg_on, model.tgs)):
        if x:
            values[layout.tg_slice(i)] = (tg.capacity_mva / s_base) * tg_blocks[i]
    for j, (x, p) in enumerate(zip(scenario.res_participates, scenario.res_power_mw)):
        if x:
            values[layout.res_slice(j)] = (p / s_base) * res_blocks[j]
    values[layout.inertia_index] = system_inertia(model, scenario)
    return values


def feature_matrix(weights: ElmWeights, model: SystemModel, scenarios) -> np.ndarray:
    """Stack feature vectors for a list of scenarios."""
    return np.array([feature_vector(weights, model, s) for s in scenarios])
