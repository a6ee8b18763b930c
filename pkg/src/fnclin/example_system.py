"""Shipped desk-scale example system: 10 TGs, 4 RESs, 2 inertia-only devices.

Parameter ranges are typical reheat-turbine and converter values; renewable
capacities follow the 400/300/300 MW wind + 330 MW photovoltaic mix.  The
power base is the nominal load (1000 MVA) so the damping factor stays a
constant in per unit.
"""

from __future__ import annotations

from importlib import resources

from .sfr import CommitmentScenario, OtherInertiaDevice, ResParams, SystemModel, TgParams, build_system

_TGS = [
    #        T_r   T_g    T_c   F_hp  droop  H     S_mva  deadband (pu)
    TgParams(7.0,  0.20,  0.30, 0.30, 0.050, 4.0,  250.0, 0.00060),
    TgParams(8.5,  0.18,  0.35, 0.28, 0.045, 4.5,  220.0, 0.00050),
    TgParams(10.0, 0.22,  0.40, 0.32, 0.055, 5.0,  200.0, 0.00066),
    TgParams(6.5,  0.15,  0.28, 0.26, 0.048, 3.5,  180.0, 0.00040),
    TgParams(9.0,  0.25,  0.45, 0.34, 0.060, 5.5,  160.0, 0.00056),
    TgParams(7.5,  0.17,  0.32, 0.29, 0.042, 4.2,  150.0, 0.00046),
    TgParams(11.0, 0.21,  0.38, 0.31, 0.052, 6.0,  140.0, 0.00070),
    TgParams(8.0,  0.19,  0.33, 0.27, 0.047, 3.8,  120.0, 0.00036),
    TgParams(6.8,  0.16,  0.26, 0.25, 0.044, 3.2,  100.0, 0.00030),
    TgParams(9.5,  0.23,  0.42, 0.33, 0.058, 4.8,   80.0, 0.00064),
]

_RESS = [
    #         T_v   droop  H_virtual  capacity_mw
    ResParams(0.10, 0.040, 1.5, 400.0),
    ResParams(0.12, 0.045, 0.0, 300.0),
    ResParams(0.08, 0.035, 2.0, 300.0),
    ResParams(0.15, 0.050, 0.0, 330.0),
]

_OTHERS = [
    OtherInertiaDevice(capacity_mva=120.0, inertia=2.0),
    OtherInertiaDevice(capacity_mva=60.0, inertia=1.2),
]


def desk_system() -> SystemModel:
    """The 10 TG + 4 RES desk-scale example system."""
    return build_system(_TGS, _RESS, _OTHERS, damping=1.0, s_base=1000.0, f_base=50.0)


def desk_scenario() -> CommitmentScenario:
    """A typical committed state: 7 of 10 TGs on, 3 of 4 RESs regulating."""
    return CommitmentScenario(
        tg_on=(1, 1, 1, 1, 0, 1, 0, 1, 1, 0),
        res_participates=(1, 1, 1, 0),
        res_power_mw=(320.0, 150.0, 210.0, 60.0),
    )


def data_path(name: str) -> str:
    """Absolute path of a shipped example file (desk_system.sys, desk_scenario.scn)."""
    return str(resources.files("fnclin").joinpath("data", name))
