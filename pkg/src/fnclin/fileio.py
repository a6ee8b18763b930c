"""Plain-text file formats: system models and commitment scenarios.

A file is a sequence of `[section]` headers followed by `key = value` lines;
`[tg]`, `[res]` and `[other]` sections repeat, one per unit.  `#` starts a
comment.  All units are as declared by the types (seconds, MVA, MW, pu).
"""

from __future__ import annotations

from pathlib import Path

from .errors import ValidationError
from .sfr import (
    CommitmentScenario,
    OtherInertiaDevice,
    ResParams,
    SystemModel,
    TgParams,
    build_system,
)


def _parse_sections(text: str, path: str) -> list[tuple[str, dict[str, str]]]:
    sections: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            sections.append((line[1:-1].strip().lower(), current))
            continue
        if "=" not in line or current is None:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value' inside a section")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current:
            raise ValidationError(f"{path}:{lineno}: duplicate key '{key}'")
        current[key.lower()] = value
    return sections


def _floats(section: dict[str, str], keys, path: str, name: str) -> dict[str, float]:
    out = {}
    for key in keys:
        if key not in section:
            raise ValidationError(f"{path}: [{name}] section missing '{key}'")
        try:
            out[key] = float(section[key])
        except ValueError as exc:
            raise ValidationError(f"{path}: [{name}] {key} = {section[key]!r} "
                                  "is not a number") from exc
    return out


def load_system(path) -> SystemModel:
    path = Path(path)
    sections = _parse_sections(path.read_text(), str(path))
    system = None
    tgs, ress, others = [], [], []
    for name, body in sections:
        if name == "system":
            system = _floats(body, ("damping", "s_base_mva", "f_base_hz"), str(path), name)
        elif name == "tg":
            vals = _floats(body, ("t_reheat", "t_governor", "t_turbine", "hp_fraction",
                                  "droop", "inertia", "capacity_mva", "deadband"),
                           str(path), name)
            tgs.append(TgParams(**vals))
        elif name == "res":
            vals = _floats(body, ("t_converter", "droop", "inertia", "capacity_mw"),
                           str(path), name)
            ress.append(ResParams(**vals))
        elif name == "other":
            vals = _floats(body, ("capacity_mva", "inertia"), str(path), name)
            others.append(OtherInertiaDevice(**vals))
        else:
            raise ValidationError(f"{path}: unknown section [{name}]")
    if system is None:
        raise ValidationError(f"{path}: missing [system] section")
    return build_system(tgs, ress, others, damping=system["damping"],
                        s_base=system["s_base_mva"], f_base=system["f_base_hz"])


def dump_system(model: SystemModel) -> str:
    lines = ["[system]",
             f"damping = {model.damping!r}",
             f"s_base_mva = {model.s_base_mva!r}",
             f"f_base_hz = {model.f_base_hz!r}",
             ""]
    for tg in model.tgs:
        lines += ["[tg]"]
        for key in ("t_reheat", "t_governor", "t_turbine", "hp_fraction", "droop",
                    "inertia", "capacity_mva", "deadband"):
            lines.append(f"{key} = {getattr(tg, key)!r}")
        lines.append("")
    for res in model.ress:
        lines += ["[res]"]
        for key in ("t_converter", "droop", "inertia", "capacity_mw"):
            lines.append(f"{key} = {getattr(res, key)!r}")
        lines.append("")
    for dev in model.others:
        lines += ["[other]",
                  f"capacity_mva = {dev.capacity_mva!r}",
                  f"inertia = {dev.inertia!r}",
                  ""]
    return "\n".join(lines)


def save_system(model: SystemModel, path) -> None:
    Path(path).write_text(dump_system(model))


def load_scenario(path) -> CommitmentScenario:
    path = Path(path)
    sections = _parse_sections(path.read_text(), str(path))
    body = None
    for name, sec in sections:
        if name == "scenario":
            body = sec
        else:
            raise ValidationError(f"{path}: unknown section [{name}]")
    if body is None:
        raise ValidationError(f"{path}: missing [scenario] section")
    try:
        tg_on = tuple(int(tok) for tok in body.get("tg_on", "").split())
        res_part = tuple(int(tok) for tok in body.get("res_participates", "").split())
        res_power = tuple(float(tok) for tok in body.get("res_power_mw", "").split())
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed scenario vectors") from exc
    return CommitmentScenario(tg_on=tg_on, res_participates=res_part,
                              res_power_mw=res_power)


def dump_scenario(scenario: CommitmentScenario) -> str:
    return "\n".join([
        "[scenario]",
        "tg_on = " + " ".join(str(x) for x in scenario.tg_on),
        "res_participates = " + " ".join(str(x) for x in scenario.res_participates),
        "res_power_mw = " + " ".join(repr(p) for p in scenario.res_power_mw),
        "",
    ])


def save_scenario(scenario: CommitmentScenario, path) -> None:
    Path(path).write_text(dump_scenario(scenario))
