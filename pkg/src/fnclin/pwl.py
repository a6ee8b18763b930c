"""Min-of-affine margin predictors: safe one-sided fit and two-step baseline.

The proposed surrogate is a concave piecewise-linear (min-of-affine) function
of the decision-linear feature vector, trained so that no training sample is
ever overestimated: an overestimate of the security margin could let a
scheduling model violate the nadir limit.  Training alternates between
assigning samples to their active segment and re-fitting each segment by LP.

The baseline reconstructs the two-step approach it is compared against:
analytic margins from the second-order reduction first, then an unconstrained
least-absolute-error min-of-affine fit on the raw (non-embedded) features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import FitError, ReductionError, UndampedSystemError, ValidationError
from .features import ElmWeights, N_RES_PARAMS, N_TG_PARAMS, feature_vector
from .reduced import aggregate, analytic_margin
from .sfr import CommitmentScenario, SystemModel, check_scenario, system_inertia

log = logging.getLogger(__name__)

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass(frozen=True)
class PwlModel:
    """Min-of-affine predictor: prediction = min_l (coeffs[l] . z + intercepts[l])."""

    coeffs: np.ndarray      # (L, feature_dim)
    intercepts: np.ndarray  # (L,)
    training_meta: dict = field(default_factory=dict)

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.coeffs.shape[1]

    def __post_init__(self):
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] < 1:
            raise ValidationError("coeffs must be a (L, d) matrix with L >= 1")
        if self.intercepts.shape != (self.coeffs.shape[0],):
            raise ValidationError("intercepts length must match segment count")
        if not (np.all(np.isfinite(self.coeffs)) and np.all(np.isfinite(self.intercepts))):
            raise ValidationError("segment coefficients must be finite")


@dataclass(frozen=True)
class BaselineModel:
    """Two-step baseline: min-of-affine fit over raw decision-linear features."""

    coeffs: np.ndarray
    intercepts: np.ndarray
    delta_f_max_pu: float
    training_meta: dict = field(default_factory=dict)

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[0]


def eval_pwl(pwl, features: np.ndarray) -> float:
    """Exact minimum over segments of the affine values."""
    features = np.asarray(features, dtype=float)
    if features.shape != (pwl.coeffs.shape[1],):
        raise ValidationError(
            f"feature dim {features.shape} does not match model dim {pwl.coeffs.shape[1]}"
        )
    return float(np.min(pwl.coeffs @ features + pwl.intercepts))


def eval_pwl_batch(pwl, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[1] != pwl.coeffs.shape[1]:
        raise ValidationError("feature matrix dim mismatch")
    return np.min(z @ pwl.coeffs.T + pwl.intercepts, axis=1)


def fit_segment_lp(samples: np.ndarray, labels: np.ndarray,
                   c_bound: float | None = None) -> tuple[np.ndarray, float]:
    """Max-total-prediction affine underestimator of the given samples.

        max sum_k (c . z_k + h)   s.t.  c . z_k + h <= y_k  for all k

    Summing the constraints bounds the objective by sum(y), so the LP is
    always bounded; with fewer samples than dimensions the optimum is not
    unique but the solver is deterministic.  `c_bound` caps |c| per entry
    (applied automatically as a fallback when the solve fails).
    """
    z = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    n, d = z.shape
    if n == 0:
        raise ValidationError("empty sample set")
    if y.shape != (n,):
        raise ValidationError("labels length does not match samples")
    if n == 1:
        # Bound rule degenerate case: flat segment through the single label.
        return np.zeros(d), float(y[0])

    cost = np.concatenate([-z.sum(axis=0), [-float(n)]])
    a_ub = np.hstack([z, np.ones((n, 1))])
    if c_bound is None:
        bounds = [(None, None)] * (d + 1)
    else:
        bounds = [(-c_bound, c_bound)] * d + [(None, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=y, bounds=bounds, method="highs",
                  options=_LP_OPTIONS)
    if not res.success and c_bound is None:
        log.warning("segment LP failed without bounds (%s); retrying with |c| <= 1e4",
                    res.message)
        return fit_segment_lp(z, y, c_bound=1e4)
    if not res.success:
        raise FitError(f"segment LP failed: {res.message}")
    return res.x[:d].copy(), float(res.x[d])


def _fit_segment_lad(z: np.ndarray, y: np.ndarray, l1_penalty: float = 1e-6,
                     ) -> tuple[np.ndarray, float]:
    """Least-absolute-error affine fit (no one-sided constraint).

    Variables (c, h, t, u): minimize sum(t) + l1_penalty * sum(u) with
    t_k >= |c.z_k + h - y_k| and u >= |c|.  The tiny L1 term pins down the
    null-space freedom left by collinear feature columns.
    """
    n, d = z.shape
    if n == 1:
        return np.zeros(d), float(y[0])
    # columns: c (d), h (1), t (n), u (d)
    cost = np.concatenate([np.zeros(d + 1), np.ones(n), np.full(d, l1_penalty)])
    ones = np.ones((n, 1))
    eye = np.eye(n)
    zer = np.zeros((n, d))
    top = np.hstack([z, ones, -eye, zer])
    bot = np.hstack([-z, -ones, -eye, zer])
    deye = np.eye(d)
    dz = np.zeros((d, n))
    pos = np.hstack([deye, np.zeros((d, 1)), dz, -deye])
    neg = np.hstack([-deye, np.zeros((d, 1)), dz, -deye])
    a_ub = np.vstack([top, bot, pos, neg])
    b_ub = np.concatenate([y, -y, np.zeros(2 * d)])
    bounds = [(None, None)] * (d + 1) + [(0, None)] * (n + d)
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs",
                  options=_LP_OPTIONS)
    if not res.success:
        raise FitError(f"LAD segment fit failed: {res.message}")
    return res.x[:d].copy(), float(res.x[d])


def _reseed_empty(assign: np.ndarray, n_segments: int, residual: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Give every empty segment worst-fit samples stolen from the largest one."""
    assign = assign.copy()
    k = assign.shape[0]
    chunk = max(1, k // (4 * n_segments))
    while True:
        counts = np.bincount(assign, minlength=n_segments)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return assign
        donor = int(np.argmax(counts))
        members = np.flatnonzero(assign == donor)
        take = members[np.argsort(residual[members])[::-1]][:min(chunk, members.size - 1)]
        if take.size == 0:
            take = members[:1]
        assign[take] = empty[0]


def _initial_assignment(z: np.ndarray, n_segments: int, restart: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Quantile split along a projection (spatial), falling back to random.

    A pure random partition makes every segment span the whole sample cloud,
    which traps the alternating scheme in collapsed fits; contiguous spatial
    splits give it distinct facets to start from.
    """
    k, d = z.shape
    if restart % 3 == 2:
        return rng.integers(0, n_segments, size=k)
    if restart == 0:
        centered = z - z.mean(axis=0)
        w = np.linalg.svd(centered, full_matrices=False)[2][0]
    else:
        w = rng.normal(size=d)
        norm = np.linalg.norm(w)
        w = w / norm if norm > 0 else np.ones(d)
    proj = z @ w
    order = np.argsort(proj, kind="stable")
    assign = np.empty(k, dtype=np.int64)
    for l, part in enumerate(np.array_split(order, n_segments)):
        assign[part] = l
    return assign


def _alternating_fit(z, y, n_segments, rng, max_iters, restarts, fit_one,
                     one_sided: bool):
    """Shared alternating-partition loop for both training modes.

    Records the best iterate by objective: total underestimation gap
    sum(y - pred) for the one-sided mode, sum |pred - y| for the LAD mode.
    """
    k, _d = z.shape
    best = None
    for _restart in range(restarts):
        assign = _initial_assignment(z, n_segments, _restart, rng)
        residual = np.abs(y - y.mean())
        prev = None
        for _it in range(max_iters):
            assign = _reseed_empty(assign, n_segments, residual, rng)
            coeffs, intercepts = [], []
            for l in range(n_segments):
                mask = assign == l
                c, h = fit_one(z[mask], y[mask])
                coeffs.append(c)
                intercepts.append(h)
            coeffs = np.array(coeffs)
            intercepts = np.array(intercepts)
            per_seg = z @ coeffs.T + intercepts
            if one_sided:
                # Exact safety: shift everything down by the worst violation.
                viol = float(np.max(np.min(per_seg, axis=1) - y))
                if viol > 0:
                    intercepts = intercepts - (viol + 1e-15)
                    per_seg = per_seg - (viol + 1e-15)
            preds = np.min(per_seg, axis=1)
            residual = np.abs(y - preds)
            obj = float(np.sum(y - preds)) if one_sided else float(np.sum(residual))
            if best is None or obj < best[0]:
                best = (obj, coeffs.copy(), intercepts.copy(), _it, _restart)
            new_assign = np.argmin(per_seg, axis=1)
            if prev is not None and np.array_equal(new_assign, prev):
                break
            prev = assign = new_assign
    return best


def train_elm_pwl(features: np.ndarray, labels: np.ndarray, n_segments: int = 3,
                  seed: int = 0, max_iters: int = 30, restarts: int = 10,
                  c_bound: float | None = None) -> PwlModel:
    """Train the safe min-of-affine margin predictor.

    Every returned model satisfies eval <= label on each training sample
    (checked exactly), while heuristically maximizing the total prediction.
    """
    z = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if z.ndim != 2:
        raise ValidationError("features must be a (K, d) matrix")
    if y.shape[0] != z.shape[0]:
        raise ValidationError("labels length does not match features")
    if not np.all(np.isfinite(y)):
        raise ValidationError("labels must be finite")
    if n_segments < 1:
        raise ValidationError("n_segments must be >= 1")
    if z.shape[0] < n_segments:
        raise ValidationError("need at least as many samples as segments")

    rng = np.random.default_rng(seed)
    obj, coeffs, intercepts, it, restart = _alternating_fit(
        z, y, n_segments, rng, max_iters, restarts,
        lambda zz, yy: fit_segment_lp(zz, yy, c_bound=c_bound), one_sided=True,
    )
    return PwlModel(coeffs=coeffs, intercepts=intercepts, training_meta={
        "seed": seed, "n_segments": n_segments, "objective": obj,
        "best_iteration": it, "best_restart": restart, "restarts": restarts,
        "max_iters": max_iters, "n_samples": z.shape[0],
    })


def baseline_feature_vector(model: SystemModel, scenario: CommitmentScenario) -> np.ndarray:
    """Raw decision-linear features [Phi', H] (no random embedding)."""
    check_scenario(model, scenario)
    n_tg, n_res = len(model.tgs), len(model.ress)
    values = np.zeros(n_tg * N_TG_PARAMS + n_res * N_RES_PARAMS + 1)
    s_base = model.s_base_mva
    for i, (x, tg) in enumerate(zip(scenario.tg_on, model.tgs)):
        if x:
            values[i * N_TG_PARAMS:(i + 1) * N_TG_PARAMS] = \
                (tg.capacity_mva / s_base) * tg.raw_params()
    base = n_tg * N_TG_PARAMS
    for j, (x, p) in enumerate(zip(scenario.res_participates, scenario.res_power_mw)):
        if x:
            values[base + j * N_RES_PARAMS:base + (j + 1) * N_RES_PARAMS] = \
                (p / s_base) * model.ress[j].raw_params()
    values[-1] = system_inertia(model, scenario)
    return values


def train_baseline(model: SystemModel, scenarios, delta_f_max_pu: float,
                   n_segments: int = 40, seed: int = 0, max_iters: int = 15,
                   restarts: int = 2) -> BaselineModel:
    """Reconstruct the two-step baseline.

    Step 1: analytic margin of each scenario from the second-order reduction
    (this bakes in the model-reduction error).  Step 2: unconstrained
    least-absolute-error min-of-affine fit to those analytic margins over the
    raw features.  Scenarios whose reduction has no closed form are skipped.
    """
    z_rows, targets = [], []
    skipped = 0
    for scenario in scenarios:
        try:
            red = aggregate(model, scenario)
            target = analytic_margin(red, delta_f_max_pu)
        except (ReductionError, UndampedSystemError):
            skipped += 1
            continue
        z_rows.append(baseline_feature_vector(model, scenario))
        targets.append(target)
    if skipped:
        log.warning("baseline: skipped %d scenarios without a second-order closed form",
                    skipped)
    if len(z_rows) < n_segments:
        raise ValidationError(
            f"only {len(z_rows)} usable scenarios for {n_segments} baseline segments"
        )
    z = np.array(z_rows)
    y = np.array(targets)
    rng = np.random.default_rng(seed)
    obj, coeffs, intercepts, it, restart = _alternating_fit(
        z, y, n_segments, rng, max_iters, restarts, _fit_segment_lad, one_sided=False,
    )
    return BaselineModel(coeffs=coeffs, intercepts=intercepts,
                         delta_f_max_pu=delta_f_max_pu, training_meta={
                             "seed": seed, "n_segments": n_segments, "objective": obj,
                             "skipped": skipped, "n_samples": z.shape[0],
                         })


def predict_baseline(baseline: BaselineModel, model: SystemModel,
                     scenario: CommitmentScenario) -> float:
    return eval_pwl(baseline, baseline_feature_vector(model, scenario))


def predict_margin(pwl: PwlModel, weights: ElmWeights, model: SystemModel,
                   scenario: CommitmentScenario) -> float:
    """Predicted frequency security margin (pu) for one scenario."""
    return eval_pwl(pwl, feature_vector(weights, model, scenario))
