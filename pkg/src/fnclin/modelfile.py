"""Persistence of the trained surrogate: ELM weights + PWL segments (.fnc).

Text format with [elm], [pwl] and [meta] sections; matrices are row-major
decimal text using repr() so round trips are bit exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import ElmWeights, N_RES_PARAMS, N_TG_PARAMS
from .pwl import PwlModel


def _matrix_lines(name: str, arr: np.ndarray) -> list[str]:
    arr = np.atleast_2d(arr)
    lines = [f"{name} = {arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append("  " + " ".join(repr(float(v)) for v in row))
    return lines


def dump_trained_model(weights: ElmWeights, pwl: PwlModel) -> str:
    lines = ["[elm]",
             f"seed = {weights.seed}",
             f"n_hidden = {weights.n_hidden}"]
    lines += _matrix_lines("a_g", weights.a_g)
    lines += _matrix_lines("b_g", weights.b_g)
    lines += _matrix_lines("a_v", weights.a_v)
    lines += _matrix_lines("b_v", weights.b_v)
    lines += _matrix_lines("scaler_g", weights.scaler_g)
    lines += _matrix_lines("scaler_v", weights.scaler_v)
    lines += ["", "[pwl]", f"n_segments = {pwl.n_segments}"]
    lines += _matrix_lines("intercepts", pwl.intercepts)
    lines += _matrix_lines("coeffs", pwl.coeffs)
    lines += ["", "[meta]"]
    for key, value in sorted(pwl.training_meta.items()):
        lines.append(f"{key} = {value!r}")
    lines.append("")
    return "\n".join(lines)


def save_trained_model(weights: ElmWeights, pwl: PwlModel, path) -> None:
    Path(path).write_text(dump_trained_model(weights, pwl))


def _parse(text: str, path: str):
    sections: dict[str, dict] = {}
    current = None
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1].strip(), {})
            continue
        if current is None or "=" not in line:
            raise ValidationError(f"{path}: malformed line {i}")
        key, value = (p.strip() for p in line.split("=", 1))
        tokens = value.split()
        if len(tokens) == 2 and all(t.isdigit() for t in tokens) and key not in (
                "seed", "n_hidden", "n_segments"):
            rows, cols = int(tokens[0]), int(tokens[1])
            data = []
            for _ in range(rows):
                data.append([float(v) for v in lines[i].split()])
                i += 1
                if len(data[-1]) != cols:
                    raise ValidationError(f"{path}: matrix {key} row length mismatch")
            current[key] = np.array(data)
        else:
            current[key] = value
    return sections


def load_trained_model(path) -> tuple[ElmWeights, PwlModel]:
    path = Path(path)
    sections = _parse(path.read_text(), str(path))
    try:
        elm = sections["elm"]
        pwl_sec = sections["pwl"]
    except KeyError as exc:
        raise ValidationError(f"{path}: missing section {exc}") from exc
    try:
        weights = ElmWeights(
            a_g=elm["a_g"], b_g=elm["b_g"].ravel(),
            a_v=elm["a_v"], b_v=elm["b_v"].ravel(),
            seed=int(elm["seed"]),
            scaler_g=elm["scaler_g"], scaler_v=elm["scaler_v"],
        )
        meta = {k: v for k, v in sections.get("meta", {}).items()}
        pwl = PwlModel(coeffs=pwl_sec["coeffs"],
                       intercepts=pwl_sec["intercepts"].ravel(),
                       training_meta=meta)
    except KeyError as exc:
        raise ValidationError(f"{path}: missing field {exc}") from exc
    if weights.a_g.shape[1] != N_TG_PARAMS or weights.a_v.shape[1] != N_RES_PARAMS:
        raise ValidationError(f"{path}: weight matrices have wrong parameter arity")
    if int(pwl_sec["n_segments"]) != pwl.n_segments:
        raise ValidationError(f"{path}: n_segments header disagrees with coeffs")
    return weights, pwl
