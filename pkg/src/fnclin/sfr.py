"""Full-order multi-machine system frequency response simulation.

Plant description types plus a fixed-step RK4 integration of the centralized
SFR structure: per-TG droop gain through governor lag, turbine lag and
reheater lead-lag (with a ramp deadband on the governor input), per-RES droop
through a converter lag, all feeding a single swing equation.  Aggregate
inertia includes non-regulating devices (motors, condensers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SimulationError, ValidationError

# Raw parameter ordering for a TG: (T_r, T_g, T_c, F_hp, droop, inertia).
TG_PARAM_NAMES = ("t_reheat", "t_governor", "t_turbine", "hp_fraction", "droop", "inertia")
# Raw parameter ordering for a RES: (T_v, droop, inertia).
RES_PARAM_NAMES = ("t_converter", "droop", "inertia")


@dataclass(frozen=True)
class TgParams:
    """Traditional generator: reheat turbine with droop governor."""

    t_reheat: float
    t_governor: float
    t_turbine: float
    hp_fraction: float
    droop: float
    inertia: float
    capacity_mva: float
    deadband: float = 0.0

    def __post_init__(self):
        for name in ("t_reheat", "t_governor", "t_turbine"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"TG {name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.hp_fraction < 1:
            raise ValidationError(f"TG hp_fraction must be in (0,1), got {self.hp_fraction}")
        if self.droop <= 0:
            raise ValidationError(f"TG droop must be > 0, got {self.droop}")
        if self.inertia < 0:
            raise ValidationError(f"TG inertia must be >= 0, got {self.inertia}")
        if self.capacity_mva <= 0:
            raise ValidationError(f"TG capacity_mva must be > 0, got {self.capacity_mva}")
        if self.deadband < 0:
            raise ValidationError(f"TG deadband must be >= 0, got {self.deadband}")

    def raw_params(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in TG_PARAM_NAMES])


@dataclass(frozen=True)
class ResParams:
    """Converter-based renewable source with optional droop frequency support."""

    t_converter: float
    droop: float
    inertia: float
    capacity_mw: float

    def __post_init__(self):
        if self.t_converter <= 0:
            raise ValidationError(f"RES t_converter must be > 0, got {self.t_converter}")
        if self.droop <= 0:
            raise ValidationError(f"RES droop must be > 0, got {self.droop}")
        if self.inertia < 0:
            raise ValidationError(f"RES inertia must be >= 0, got {self.inertia}")
        if self.capacity_mw <= 0:
            raise ValidationError(f"RES capacity_mw must be > 0, got {self.capacity_mw}")

    def raw_params(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in RES_PARAM_NAMES])


@dataclass(frozen=True)
class OtherInertiaDevice:
    """Non-regulating device that only contributes rotating inertia."""

    capacity_mva: float
    inertia: float

    def __post_init__(self):
        if self.capacity_mva <= 0:
            raise ValidationError(f"device capacity_mva must be > 0, got {self.capacity_mva}")
        if self.inertia < 0:
            raise ValidationError(f"device inertia must be >= 0, got {self.inertia}")


@dataclass(frozen=True)
class SystemModel:
    """Immutable plant description, all per-unit quantities on s_base_mva."""

    tgs: tuple[TgParams, ...]
    ress: tuple[ResParams, ...]
    others: tuple[OtherInertiaDevice, ...]
    damping: float
    s_base_mva: float
    f_base_hz: float = 50.0

    def __post_init__(self):
        if len(self.tgs) == 0:
            raise ValidationError("system needs at least one TG")
        if self.damping < 0:
            raise ValidationError(f"damping must be >= 0, got {self.damping}")
        if self.s_base_mva <= 0:
            raise ValidationError(f"s_base_mva must be > 0, got {self.s_base_mva}")
        if self.f_base_hz <= 0:
            raise ValidationError(f"f_base_hz must be > 0, got {self.f_base_hz}")


@dataclass(frozen=True)
class CommitmentScenario:
    """Decision snapshot: TG on/off, RES participation flag and power."""

    tg_on: tuple[int, ...]
    res_participates: tuple[int, ...]
    res_power_mw: tuple[float, ...]

    def __post_init__(self):
        if len(self.res_participates) != len(self.res_power_mw):
            raise ValidationError("res_participates and res_power_mw lengths differ")
        if any(x not in (0, 1) for x in self.tg_on):
            raise ValidationError("tg_on entries must be 0/1")
        if any(x not in (0, 1) for x in self.res_participates):
            raise ValidationError("res_participates entries must be 0/1")
        if any(p < 0 for p in self.res_power_mw):
            raise ValidationError("res_power_mw entries must be >= 0")


# RES participates in frequency control only above this fraction of capacity.
RES_PARTICIPATION_THRESHOLD = 0.3


def check_scenario(model: SystemModel, scenario: CommitmentScenario) -> None:
    """Validate a scenario against its system model."""
    if len(scenario.tg_on) != len(model.tgs):
        raise ValidationError(
            f"scenario has {len(scenario.tg_on)} TG flags, model has {len(model.tgs)} TGs"
        )
    if len(scenario.res_participates) != len(model.ress):
        raise ValidationError(
            f"scenario has {len(scenario.res_participates)} RES flags, "
            f"model has {len(model.ress)} RESs"
        )
    for j, (flag, p, res) in enumerate(
        zip(scenario.res_participates, scenario.res_power_mw, model.ress)
    ):
        if p > res.capacity_mw + 1e-9:
            raise ValidationError(f"RES {j} power {p} MW exceeds capacity {res.capacity_mw} MW")
        if flag and p < RES_PARTICIPATION_THRESHOLD * res.capacity_mw:
            raise ValidationError(
                f"RES {j} participates at {p} MW < "
                f"{RES_PARTICIPATION_THRESHOLD} x {res.capacity_mw} MW"
            )


@dataclass(frozen=True)
class FrequencyTrace:
    """Sampled frequency deviation after a stepwise disturbance."""

    dt: float
    samples: np.ndarray  # delta_f in pu, samples[0] == 0
    disturbance_pu: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass(frozen=True)
class NadirResult:
    t_nadir: float
    delta_f_nadir: float
    monotone: bool = False


def build_system(tg_list, res_list=(), other_list=(), damping=1.0, s_base=100.0,
                 f_base=50.0) -> SystemModel:
    """Validating constructor for SystemModel."""
    return SystemModel(
        tgs=tuple(tg_list),
        ress=tuple(res_list),
        others=tuple(other_list),
        damping=float(damping),
        s_base_mva=float(s_base),
        f_base_hz=float(f_base),
    )


def system_inertia(model: SystemModel, scenario: CommitmentScenario) -> float:
    """Aggregate inertia constant H in seconds on the system base.

    Committed TGs contribute on capacity, participating RESs on current power,
    non-regulating devices always.
    """
    h = sum(x * tg.inertia * tg.capacity_mva
            for x, tg in zip(scenario.tg_on, model.tgs))
    h += sum(x * res.inertia * p
             for x, p, res in zip(scenario.res_participates, scenario.res_power_mw, model.ress))
    h += sum(dev.inertia * dev.capacity_mva for dev in model.others)
    return h / model.s_base_mva


@njit(cache=True, nogil=True)
def _deriv(y, out, kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping, dp):
    n_tg = kappa.shape[0]
    n_res = lam.shape[0]
    f = y[0]
    p = 0.0
    for i in range(n_tg):
        c = y[2 + 3 * i]
        r = y[3 + 3 * i]
        p += kappa[i] * (f_hp[i] * c + (1.0 - f_hp[i]) * r)
    base = 1 + 3 * n_tg
    for j in range(n_res):
        p += lam[j] * y[base + j]
    out[0] = (p - damping * f - dp) / two_h
    for i in range(n_tg):
        e = -f
        d = db[i]
        if e > d:
            u = e - d
        elif e < -d:
            u = e + d
        else:
            u = 0.0
        g = y[1 + 3 * i]
        c = y[2 + 3 * i]
        r = y[3 + 3 * i]
        out[1 + 3 * i] = (u - g) / t_g[i]
        out[2 + 3 * i] = (g - c) / t_c[i]
        out[3 + 3 * i] = (c - r) / t_r[i]
    for j in range(n_res):
        out[base + j] = (-f - y[base + j]) / t_v[j]


@njit(cache=True, nogil=True)
def _rk4_sim(kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping,
             dp, dt, n_steps, early_stop, stop_after):
    """Fixed-step RK4.  Returns (trace, n_used, blowup_step, min_idx).

    blowup_step is -1 when the run stayed finite.  n_used is the index of the
    last valid sample (trace[0..n_used] filled).
    """
    n_state = 1 + 3 * kappa.shape[0] + lam.shape[0]
    trace = np.zeros(n_steps + 1)
    y = np.zeros(n_state)
    k1 = np.empty(n_state)
    k2 = np.empty(n_state)
    k3 = np.empty(n_state)
    k4 = np.empty(n_state)
    tmp = np.empty(n_state)
    min_val = 0.0
    min_idx = 0
    n_used = n_steps
    for step in range(1, n_steps + 1):
        _deriv(y, k1, kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping, dp)
        for s in range(n_state):
            tmp[s] = y[s] + 0.5 * dt * k1[s]
        _deriv(tmp, k2, kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping, dp)
        for s in range(n_state):
            tmp[s] = y[s] + 0.5 * dt * k2[s]
        _deriv(tmp, k3, kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping, dp)
        for s in range(n_state):
            tmp[s] = y[s] + dt * k3[s]
        _deriv(tmp, k4, kappa, t_g, t_c, t_r, f_hp, db, lam, t_v, two_h, damping, dp)
        for s in range(n_state):
            y[s] = y[s] + (dt / 6.0) * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s])
        fval = y[0]
        if not np.isfinite(fval):
            return trace, step - 1, step, min_idx
        trace[step] = fval
        if fval < min_val:
            min_val = fval
            min_idx = step
        elif early_stop and min_val < 0.0 and (step - min_idx) * dt >= stop_after:
            n_used = step
            break
    return trace, n_used, -1, min_idx


def _scenario_arrays(model: SystemModel, scenario: CommitmentScenario):
    """Per-unit gain and lag arrays for the online units only."""
    tg_on = [i for i, x in enumerate(scenario.tg_on) if x]
    res_on = [j for j, x in enumerate(scenario.res_participates) if x]
    kappa = np.array([(model.tgs[i].capacity_mva / model.s_base_mva) / model.tgs[i].droop
                      for i in tg_on])
    t_g = np.array([model.tgs[i].t_governor for i in tg_on])
    t_c = np.array([model.tgs[i].t_turbine for i in tg_on])
    t_r = np.array([model.tgs[i].t_reheat for i in tg_on])
    f_hp = np.array([model.tgs[i].hp_fraction for i in tg_on])
    db = np.array([model.tgs[i].deadband for i in tg_on])
    lam = np.array([(scenario.res_power_mw[j] / model.s_base_mva) / model.ress[j].droop
                    for j in res_on])
    t_v = np.array([model.ress[j].t_converter for j in res_on])
    return kappa, t_g, t_c, t_r, f_hp, db, lam, t_v


# Early stop: integrate this long past the first local minimum before halting.
EARLY_STOP_TAIL_S = 2.0


def simulate_response(model: SystemModel, scenario: CommitmentScenario,
                      disturbance_pu: float, dt: float = 1e-3,
                      horizon_s: float = 30.0, early_stop: bool = True) -> FrequencyTrace:
    """Simulate delta_f(t) after losing `disturbance_pu` of generation at t=0."""
    check_scenario(model, scenario)
    if disturbance_pu < 0:
        raise ValidationError(f"disturbance_pu must be >= 0, got {disturbance_pu}")
    if not 0 < dt <= 0.01:
        raise ValidationError(f"dt must be in (0, 0.01], got {dt}")
    if horizon_s < 5:
        raise ValidationError(f"horizon_s must be >= 5, got {horizon_s}")

    h = system_inertia(model, scenario)
    if h <= 0:
        raise ValidationError("aggregate inertia must be > 0 to simulate")
    arrays = _scenario_arrays(model, scenario)
    n_steps = int(round(horizon_s / dt))
    trace, n_used, blow_step, _ = _rk4_sim(
        *arrays, 2.0 * h, model.damping, disturbance_pu, dt, n_steps,
        early_stop, EARLY_STOP_TAIL_S,
    )
    if blow_step >= 0:
        raise SimulationError(
            f"integration blew up at step {blow_step} (t={blow_step * dt:.4f} s); "
            f"reduce dt", step_index=blow_step,
        )
    return FrequencyTrace(dt=dt, samples=trace[: n_used + 1].copy(),
                          disturbance_pu=disturbance_pu)


def find_nadir(trace: FrequencyTrace) -> NadirResult:
    """Locate the frequency nadir (deepest excursion) of a trace.

    If the trace is still decreasing at the horizon the endpoint is returned
    with the monotone flag set.
    """
    samples = np.asarray(trace.samples)
    if samples.size == 0:
        raise ValidationError("empty trace")
    idx = int(np.argmin(samples))
    monotone = idx == samples.size - 1 and samples.size > 1 and samples[-1] < samples[-2]
    return NadirResult(t_nadir=idx * trace.dt, delta_f_nadir=float(samples[idx]),
                       monotone=monotone)


def quasi_steady_deviation(model: SystemModel, scenario: CommitmentScenario,
                           disturbance_pu: float) -> float:
    """Deadband-free steady-state deviation -dP/(D + R_total)."""
    kappa, *_rest = _scenario_arrays(model, scenario)
    lam = _rest[5]
    gain = model.damping + float(kappa.sum()) + float(lam.sum())
    if gain <= 0:
        return -math.inf if disturbance_pu > 0 else 0.0
    return -disturbance_pu / gain
