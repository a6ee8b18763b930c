"""Ground-truth frequency security margin by bisection on the full-order model.

The labeler for all training data: finds the largest stepwise generation loss
whose simulated nadir stays within the frequency deviation limit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MonotonicityError, ValidationError
from .sfr import CommitmentScenario, SystemModel, find_nadir, simulate_response


@dataclass(frozen=True)
class MarginSpec:
    """Limit and bisection controls for the margin search."""

    delta_f_max_pu: float = 0.01   # 0.5 Hz on a 50 Hz base
    tol_pu: float = 1e-4
    dp_hi: float = 0.05
    cap_pu: float = 1.0
    dt: float = 1e-3
    horizon_s: float = 30.0

    def __post_init__(self):
        if self.delta_f_max_pu <= 0:
            raise ValidationError("delta_f_max_pu must be > 0")
        if self.tol_pu <= 0:
            raise ValidationError("tol_pu must be > 0")
        if self.dp_hi <= self.tol_pu:
            raise ValidationError("dp_hi must exceed tol_pu")
        if self.cap_pu < self.dp_hi:
            raise ValidationError("cap_pu must be >= dp_hi")


@dataclass(frozen=True)
class MarginResult:
    margin_pu: float
    unbounded: bool = False
    n_sims: int = 0


@dataclass(frozen=True)
class MonotoneReport:
    monotone: bool
    first_violation: tuple[float, float] | None
    nadir_magnitudes: tuple[float, ...]


def _nadir_magnitude(model, scenario, dp, spec) -> float:
    trace = simulate_response(model, scenario, dp, dt=spec.dt, horizon_s=spec.horizon_s)
    return abs(find_nadir(trace).delta_f_nadir)


def margin_bisect(model: SystemModel, scenario: CommitmentScenario,
                  spec: MarginSpec) -> MarginResult:
    """Largest disturbance (within tol_pu) whose nadir respects the limit."""
    fmax = spec.delta_f_max_pu
    n_sims = 0
    lo, lo_mag = 0.0, 0.0
    hi = spec.dp_hi
    # Expand the upper bracket until the limit is violated or the cap is hit.
    while True:
        hi_mag = _nadir_magnitude(model, scenario, hi, spec)
        n_sims += 1
        if hi_mag < lo_mag - 1e-12:
            raise MonotonicityError(
                f"|nadir| decreased from {lo_mag:.6g} at dP={lo:.6g} "
                f"to {hi_mag:.6g} at dP={hi:.6g}"
            )
        if hi_mag > fmax:
            break
        lo, lo_mag = hi, hi_mag
        if hi >= spec.cap_pu:
            return MarginResult(margin_pu=spec.cap_pu, unbounded=True, n_sims=n_sims)
        hi = min(2.0 * hi, spec.cap_pu)
    while hi - lo > spec.tol_pu:
        mid = 0.5 * (lo + hi)
        mid_mag = _nadir_magnitude(model, scenario, mid, spec)
        n_sims += 1
        if mid_mag <= fmax:
            lo, lo_mag = mid, mid_mag
        else:
            hi = mid
    return MarginResult(margin_pu=lo, unbounded=False, n_sims=n_sims)


def verify_monotone(model: SystemModel, scenario: CommitmentScenario, dp_grid,
                    spec: MarginSpec | None = None) -> MonotoneReport:
    """Check that |nadir| is non-decreasing along an ascending disturbance grid."""
    spec = spec or MarginSpec()
    dps = list(dp_grid)
    if any(b < a for a, b in zip(dps, dps[1:])):
        raise ValidationError("dp_grid must be ascending")
    mags = [_nadir_magnitude(model, scenario, dp, spec) for dp in dps]
    for (dp_a, m_a), (dp_b, m_b) in zip(zip(dps, mags), zip(dps[1:], mags[1:])):
        if m_b < m_a - 1e-12:
            return MonotoneReport(monotone=False, first_violation=(dp_a, dp_b),
                                  nadir_magnitudes=tuple(mags))
    return MonotoneReport(monotone=True, first_violation=None,
                          nadir_magnitudes=tuple(mags))
