import numpy as np
import pytest

from fnclin.example_system import desk_scenario, desk_system
from fnclin.sfr import CommitmentScenario, TgParams, build_system


@pytest.fixture(scope="session")
def desk():
    return desk_system()


@pytest.fixture(scope="session")
def desk_sc():
    return desk_scenario()


def single_tg_system(deadband=0.0, damping=1.0):
    tg = TgParams(t_reheat=8.0, t_governor=0.2, t_turbine=0.3, hp_fraction=0.3,
                  droop=0.05, inertia=4.0, capacity_mva=100.0, deadband=deadband)
    return build_system([tg], damping=damping, s_base=100.0)


SINGLE_SC = CommitmentScenario(tg_on=(1,), res_participates=(), res_power_mw=())


def second_order_rk4(h, t, d, r, f, dp, dt=1e-3, horizon=30.0):
    """Independent oracle: RK4 on the transfer function realized from the raw
    polynomial coefficients (1+sT)/(2HT s^2 + (2H+T(D+F)) s + (D+R)) with a
    -dp step input.  Returns (times, delta_f samples)."""
    a, b, c = 2.0 * h * t, 2.0 * h + t * (d + f), d + r
    u = -dp
    n = int(round(horizon / dt))
    x1 = x2 = 0.0
    ys = np.empty(n + 1)
    ys[0] = 0.0

    def deriv(x1, x2):
        return x2, (u - b * x2 - c * x1) / a

    for k in range(n):
        k1 = deriv(x1, x2)
        k2 = deriv(x1 + 0.5 * dt * k1[0], x2 + 0.5 * dt * k1[1])
        k3 = deriv(x1 + 0.5 * dt * k2[0], x2 + 0.5 * dt * k2[1])
        k4 = deriv(x1 + dt * k3[0], x2 + dt * k3[1])
        x1 += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        x2 += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        ys[k + 1] = x1 + t * x2
    return np.arange(n + 1) * dt, ys


def random_underdamped_params(rng):
    """Draw (h, t, d, r, f) with 0 < zeta < 1 by rejection."""
    while True:
        h = rng.uniform(2.0, 6.0)
        t = rng.uniform(5.0, 12.0)
        d = rng.uniform(0.5, 2.0)
        r = rng.uniform(8.0, 35.0)
        f = r * rng.uniform(0.15, 0.45)
        zeta = (2 * h + t * (d + f)) / (2 * np.sqrt(2 * h * t * (d + r)))
        if 0 < zeta < 1:
            return h, t, d, r, f
