"""JSON files for system models, observer realizations and simulation scenarios.

Matrices are stored as lists of rows next to an explicit ``dims`` record, so
empty blocks such as a missing ``B`` (``n x 0``) survive a round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, UIOError
from .oracle import SystemModel, UioRealization


class FileFormatError(UIOError, ValueError):
    """A JSON model, observer or scenario file is malformed."""


def _plain(value):
    """Make ``value`` JSON-serializable (complex numbers become ``[re, im]``)."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return value.real if value.imag == 0 else [value.real, value.imag]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _matrix(doc: dict, key: str, shape: tuple[int, int]) -> np.ndarray:
    if key not in doc:
        raise FileFormatError(f"missing matrix {key!r}")
    rows, cols = shape
    if rows * cols == 0:
        return np.zeros(shape)
    try:
        M = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise FileFormatError(f"matrix {key!r} is not numeric") from None
    if M.shape != shape:
        raise FileFormatError(f"matrix {key!r} has shape {M.shape}, dims say {shape}")
    return M


def _dims(doc: dict, keys) -> dict:
    dims = doc.get("dims")
    if not isinstance(dims, dict) or any(k not in dims for k in keys):
        raise FileFormatError(f"'dims' must give {', '.join(keys)}")
    return {k: int(dims[k]) for k in keys}


def _load(path) -> dict:
    try:
        with Path(path).open() as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: top level must be an object")
    return doc


def _dump(doc: dict, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(_plain(doc), fh, indent=2)
        fh.write("\n")


def system_to_dict(S: SystemModel) -> dict:
    return {
        "kind": "system",
        "dims": {"n": S.n, "m": S.m, "p": S.p, "r": S.r},
        "A": S.A,
        "B": S.B,
        "C": S.C,
        "E": S.E,
        "meta": S.meta,
    }


def system_from_dict(doc: dict) -> SystemModel:
    d = _dims(doc, ("n", "m", "p", "r"))
    n, m, p, r = d["n"], d["m"], d["p"], d["r"]
    try:
        return SystemModel(
            A=_matrix(doc, "A", (n, n)),
            B=_matrix(doc, "B", (n, m)) if m else None,
            C=_matrix(doc, "C", (p, n)),
            E=_matrix(doc, "E", (n, r)),
            meta=dict(doc.get("meta", {})),
        )
    except (DimensionError, ValueError) as exc:
        raise FileFormatError(str(exc)) from None


def uio_to_dict(U: UioRealization) -> dict:
    return {
        "kind": "uio",
        "dims": {"n": U.n, "m": U.m, "p": U.p},
        "A_UIO": U.A,
        "B_u": U.B_u,
        "B_y": U.B_y,
        "D": U.D,
        "meta": U.meta,
    }


def uio_from_dict(doc: dict) -> UioRealization:
    d = _dims(doc, ("n", "m", "p"))
    n, m, p = d["n"], d["m"], d["p"]
    return UioRealization(
        A=_matrix(doc, "A_UIO", (n, n)),
        B_u=_matrix(doc, "B_u", (n, m)),
        B_y=_matrix(doc, "B_y", (n, p)),
        D=_matrix(doc, "D", (n, p)),
        meta=dict(doc.get("meta", {})),
    )


def save_system(S: SystemModel, path) -> None:
    _dump(system_to_dict(S), path)


def load_system(path) -> SystemModel:
    return system_from_dict(_load(path))


def save_uio(U: UioRealization, path) -> None:
    _dump(uio_to_dict(U), path)


def load_uio(path) -> UioRealization:
    return uio_from_dict(_load(path))


@dataclass(frozen=True)
class Scenario:
    """Settings of one error experiment.

    ``disturbance`` uses the syntax of :func:`dduio.sim.parse_disturbance`.
    Relative ``system``/``uio`` paths are resolved against the scenario file.
    """

    system: str
    uio: str
    horizon: int = 50
    seed: int = 0
    disturbance: str = "uniform(-10,10)"
    x0: tuple | None = None
    z0: tuple | None = None


def load_scenario(path) -> Scenario:
    doc = _load(path)
    for key in ("system", "uio"):
        if not isinstance(doc.get(key), str):
            raise FileFormatError(f"scenario needs a string {key!r} path")
    base = Path(path).parent
    known = set(Scenario.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise FileFormatError(f"unknown scenario keys {sorted(unknown)}")
    doc = dict(doc)
    for key in ("system", "uio"):
        doc[key] = str(base / doc[key])
    for key in ("x0", "z0"):
        if doc.get(key) is not None:
            doc[key] = tuple(float(v) for v in doc[key])
    return Scenario(**doc)
