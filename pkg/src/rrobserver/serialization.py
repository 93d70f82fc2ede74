"""JSON documents for matrices, gain schedules and certificates.

Matrices are stored as ``{"rows": r, "cols": c, "data": [row-major]}``
and every float is written with 17 significant digits so documents
round-trip bit for bit.
"""
import json
import math

import numpy as np

from .exceptions import ConfigError, DimensionError
from .protocol import as_mode
from .synthesis import Certificate, GainSchedule

GAINS_FORMAT = "rrobserver.gains/1"
CERTIFICATE_FORMAT = "rrobserver.certificate/1"


def matrix_to_json(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"rows": M.shape[0], "cols": M.shape[1], "data": [float(v) for v in M.ravel()]}


def matrix_from_json(obj, path="matrix"):
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected an object with rows, cols and data") from exc
    if rows < 1 or cols < 1 or len(data) != rows * cols:
        raise DimensionError(f"{path}: {len(data)} entries do not fill a {rows}x{cols} matrix")
    arr = np.array(data, dtype=float).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: non-finite entries")
    return arr


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("non-finite float in JSON document")
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def gains_to_dict(gains, **meta):
    entries = [
        {"i": i, "d": d, "L": matrix_to_json(L)} for (i, d), L in sorted(gains.L.items())
    ]
    return {
        "format": GAINS_FORMAT,
        "mode": gains.mode.value,
        "n": gains.n,
        "channels": gains.channels,
        "d_bar": gains.d_bar,
        **meta,
        "gains": entries,
    }


def gains_from_dict(doc):
    if doc.get("format") != GAINS_FORMAT:
        raise ConfigError(f"format: expected {GAINS_FORMAT!r}")
    L = {
        (int(e["i"]), int(e["d"])): matrix_from_json(e["L"], f"gains[{k}].L")
        for k, e in enumerate(doc["gains"])
    }
    return GainSchedule(L, as_mode(doc["mode"]))


def certificate_to_dict(cert, **meta):
    entries = []
    for key in sorted(cert.P):
        entries.append({
            "i": key[0], "d": key[1],
            "P": matrix_to_json(cert.P[key]),
            "X": matrix_to_json(cert.X[key]),
            "G": matrix_to_json(cert.G[key]),
        })
    return {
        "format": CERTIFICATE_FORMAT,
        "feasibility_margin": cert.feasibility_margin,
        "lambda": cert.lam,
        **meta,
        "blocks": entries,
    }


def certificate_from_dict(doc):
    if doc.get("format") != CERTIFICATE_FORMAT:
        raise ConfigError(f"format: expected {CERTIFICATE_FORMAT!r}")
    P, X, G = {}, {}, {}
    for k, e in enumerate(doc["blocks"]):
        key = (int(e["i"]), int(e["d"]))
        P[key] = matrix_from_json(e["P"], f"blocks[{k}].P")
        X[key] = matrix_from_json(e["X"], f"blocks[{k}].X")
        G[key] = matrix_from_json(e["G"], f"blocks[{k}].G")
    lam = doc.get("lambda")
    return Certificate(P, X, G, float(doc["feasibility_margin"]), lam)


def write_json(path, doc):
    with open(path, "w") as fh:
        fh.write(dumps(doc))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
