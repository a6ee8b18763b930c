"""Second-order aggregation of a committed system and its closed-form nadir.

The committed plant collapses to the transfer function

    delta_f / delta_P_e = (1 + sT) / (2HT s^2 + (2H + T(D+F)) s + (D+R))

whose denominator, normalized, gives the damping ratio and natural frequency
used by the closed-form nadir and the analytic security margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ReductionError, UndampedSystemError, ValidationError
from .sfr import CommitmentScenario, SystemModel, check_scenario, system_inertia


@dataclass(frozen=True)
class ReducedModel:
    """Aggregated second-order parameters (all pu on the system base)."""

    h: float        # inertia constant, s
    d: float        # load damping
    r: float        # integrated regulation gain
    f: float        # integrated gain-weighted HP fraction
    t: float        # common reheater time constant, s
    zeta: float
    omega_n: float
    degenerate: bool = False  # no online TG: no reheater dynamics, closed form inapplicable


def aggregate(model: SystemModel, scenario: CommitmentScenario) -> ReducedModel:
    """Collapse the committed plant to the second-order model."""
    check_scenario(model, scenario)
    s_base = model.s_base_mva
    kappas = [x * (tg.capacity_mva / s_base) / tg.droop
              for x, tg in zip(scenario.tg_on, model.tgs)]
    lambdas = [x * (p / s_base) / res.droop
               for x, p, res in zip(scenario.res_participates, scenario.res_power_mw,
                                    model.ress)]
    r = sum(kappas) + sum(lambdas)
    f = sum(k * tg.hp_fraction for k, tg in zip(kappas, model.tgs))
    h = system_inertia(model, scenario)
    d = model.damping

    if r == 0 and d == 0:
        raise UndampedSystemError("no online regulation resource and zero damping")

    tg_gain = sum(kappas)
    if tg_gain == 0:
        # RES-only (or empty) commitment: first-order response, no closed form.
        return ReducedModel(h=h, d=d, r=r, f=0.0, t=math.nan, zeta=math.nan,
                            omega_n=math.nan, degenerate=True)

    t = sum(k * tg.t_reheat for k, tg in zip(kappas, model.tgs)) / tg_gain
    if h <= 0:
        raise ReductionError("aggregate inertia must be > 0")
    omega_n = math.sqrt((d + r) / (2.0 * h * t))
    zeta = (2.0 * h + t * (d + f)) / (2.0 * math.sqrt(2.0 * h * t * (d + r)))
    return ReducedModel(h=h, d=d, r=r, f=f, t=t, zeta=zeta, omega_n=omega_n)


def _nadir_factor(reduced: ReducedModel) -> tuple[float, float]:
    """(t_m, overshoot factor) of the step response minimum.

    The minimum of the second-order step response occurs at

        t_m = arctan(omega_d T / (zeta omega_n T - 1)) / omega_d

    (smallest positive branch) and the depth relative to the steady state is
    1 + sqrt(T(R-F)/(2H)) * exp(-zeta omega_n t_m).
    """
    if reduced.degenerate:
        raise ReductionError("degenerate first-order model: closed form inapplicable")
    z, wn, t = reduced.zeta, reduced.omega_n, reduced.t
    if not 0 < z < 1:
        raise ReductionError(f"overdamped (zeta={z:.4f} >= 1): closed form inapplicable")
    wd = wn * math.sqrt(1.0 - z * z)
    t_m = math.atan2(wd * t, z * wn * t - 1.0) / wd
    if t_m <= 0:
        t_m += math.pi / wd
    radicand = reduced.t * (reduced.r - reduced.f) / (2.0 * reduced.h)
    if radicand < 0:
        raise ReductionError("R < F: aggregation produced an invalid overshoot term")
    factor = 1.0 + math.sqrt(radicand) * math.exp(-z * wn * t_m)
    return t_m, factor


def analytic_nadir(reduced: ReducedModel, disturbance_pu: float) -> tuple[float, float]:
    """Closed-form (t_m, delta_f_nadir) for a stepwise generation loss."""
    if disturbance_pu < 0:
        raise ValidationError(f"disturbance_pu must be >= 0, got {disturbance_pu}")
    t_m, factor = _nadir_factor(reduced)
    nadir = -disturbance_pu / (reduced.d + reduced.r) * factor
    return t_m, nadir


def analytic_margin(reduced: ReducedModel, delta_f_max_pu: float) -> float:
    """Largest stepwise loss keeping |nadir| within delta_f_max_pu (exact inverse)."""
    if delta_f_max_pu <= 0:
        raise ValidationError(f"delta_f_max_pu must be > 0, got {delta_f_max_pu}")
    _, factor = _nadir_factor(reduced)
    return delta_f_max_pu * (reduced.d + reduced.r) / factor
