"""Canonical JSON instance files.

A file carries ``schema_version``, exactly one of ``liquidation`` or
``general``, and a ``provenance`` object (free-form, e.g. generator seed and
settings).  Output is canonical: keys sorted, two-space indent, and every
float written with 17 significant digits so values survive a round trip
bit for bit.  Infinite bounds in a general instance are written as ``null``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import QcqpInstance, QuadForm
from .liquidation import LiquidationParams, ParameterError, build_qcqp

SCHEMA_VERSION = "1"

_LIQ_VECTORS = {"lambda": "lambda_", "gamma": "gamma", "p0": "p0", "x0": "x0"}
_LIQ_SCALARS = ("e0", "l0", "rho1", "rho2", "pi", "delta")


class InstanceFormatError(ValueError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class InstanceFile:
    liquidation: LiquidationParams | None = None
    general: QcqpInstance | None = None
    provenance: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        if (self.liquidation is None) == (self.general is None):
            raise ValueError("exactly one of liquidation or general must be given")

    def to_qcqp(self) -> QcqpInstance:
        return build_qcqp(self.liquidation) if self.liquidation is not None else self.general

    def __eq__(self, other):
        if not isinstance(other, InstanceFile):
            return NotImplemented
        return dumps(self) == dumps(other)

    __hash__ = None


# -- encoding ---------------------------------------------------------------

def _num(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot encode non-finite number {x}")
    if x == int(x) and abs(x) < 1e16:
        return f"{int(x)}.0"
    return format(x, ".17g")


def _encode(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        return "{\n" + ",\n".join(f"{inner}{json.dumps(str(k))}: {_encode(v, indent + 1)}"
                                   for k, v in items) + "\n" + pad + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _bound(v):
    return [None if not np.isfinite(x) else float(x) for x in v]


def _quad(qf: QuadForm):
    return {"Q": np.asarray(qf.Q).tolist(), "q": np.asarray(qf.q).tolist(), "c": qf.c}


def to_dict(f: InstanceFile) -> dict:
    d = {"schema_version": f.schema_version, "provenance": dict(f.provenance)}
    if f.liquidation is not None:
        p = f.liquidation
        liq = {k: getattr(p, attr).tolist() for k, attr in _LIQ_VECTORS.items()}
        liq.update({k: getattr(p, k) for k in _LIQ_SCALARS})
        d["liquidation"] = liq
    else:
        g = f.general
        d["general"] = {
            "n": g.n,
            "objective": _quad(g.objective),
            "constraints": [_quad(c) for c in g.constraints],
            "lower": _bound(g.lower),
            "upper": _bound(g.upper),
            "linear_ineqs": [{"a": a.tolist(), "b": b} for a, b in g.linear_ineqs],
        }
    return d


def dumps(f: InstanceFile) -> str:
    return _encode(to_dict(f)) + "\n"


def save_instance(path, f: InstanceFile) -> None:
    Path(path).write_text(dumps(f))


# -- decoding ---------------------------------------------------------------

def _get(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise InstanceFormatError(where, "expected an object")
    if key not in d:
        raise InstanceFormatError(f"{where}.{key}" if where else key, f"missing field {key!r}")
    return d[key]


def _scalar(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InstanceFormatError(where, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise InstanceFormatError(where, "number must be finite")
    return float(v)


def _vector(v, where, n=None, allow_null=None):
    if not isinstance(v, list):
        raise InstanceFormatError(where, "expected a list of numbers")
    out = []
    for i, x in enumerate(v):
        if x is None and allow_null is not None:
            out.append(allow_null)
        else:
            out.append(_scalar(x, f"{where}[{i}]"))
    if n is not None and len(out) != n:
        raise InstanceFormatError(where, f"expected length {n}, got {len(out)}")
    return np.array(out, dtype=float)


def _matrix(v, where, n):
    if not isinstance(v, list) or len(v) != n:
        raise InstanceFormatError(where, f"expected {n} rows")
    return np.vstack([_vector(r, f"{where}[{i}]", n) for i, r in enumerate(v)]) if n else np.zeros((0, 0))


def _parse_quad(d, where, n):
    Q = _matrix(_get(d, "Q", where), f"{where}.Q", n)
    q = _vector(_get(d, "q", where), f"{where}.q", n)
    c = _scalar(_get(d, "c", where), f"{where}.c")
    return QuadForm(Q, q, c)


def from_dict(d: dict) -> InstanceFile:
    if not isinstance(d, dict):
        raise InstanceFormatError("<root>", "expected an object")
    version = _get(d, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise InstanceFormatError("schema_version", f"unsupported version {version!r}")
    prov = d.get("provenance", {})
    if not isinstance(prov, dict):
        raise InstanceFormatError("provenance", "expected an object")
    has_l, has_g = "liquidation" in d, "general" in d
    if has_l == has_g:
        raise InstanceFormatError("<root>", "exactly one of 'liquidation' or 'general' is required")
    if has_l:
        L = d["liquidation"]
        kw = {}
        n = None
        for key, attr in _LIQ_VECTORS.items():
            kw[attr] = _vector(_get(L, key, "liquidation"), f"liquidation.{key}", n)
            n = kw[attr].size
        for key in _LIQ_SCALARS:
            kw[key] = _scalar(_get(L, key, "liquidation"), f"liquidation.{key}")
        try:
            p = LiquidationParams(**kw)
        except ParameterError as exc:
            raise InstanceFormatError("liquidation", str(exc)) from None
        return InstanceFile(liquidation=p, provenance=prov, schema_version=version)
    G = d["general"]
    n = _get(G, "n", "general")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InstanceFormatError("general.n", "expected a positive integer")
    obj = _parse_quad(_get(G, "objective", "general"), "general.objective", n)
    cons_raw = G.get("constraints", [])
    if not isinstance(cons_raw, list):
        raise InstanceFormatError("general.constraints", "expected a list")
    cons = tuple(_parse_quad(c, f"general.constraints[{j}]", n) for j, c in enumerate(cons_raw))
    lower = _vector(G.get("lower", [None] * n), "general.lower", n, allow_null=-np.inf)
    upper = _vector(G.get("upper", [None] * n), "general.upper", n, allow_null=np.inf)
    lin_raw = G.get("linear_ineqs", [])
    if not isinstance(lin_raw, list):
        raise InstanceFormatError("general.linear_ineqs", "expected a list")
    lin = tuple((_vector(_get(r, "a", f"general.linear_ineqs[{k}]"), f"general.linear_ineqs[{k}].a", n),
                 _scalar(_get(r, "b", f"general.linear_ineqs[{k}]"), f"general.linear_ineqs[{k}].b"))
                for k, r in enumerate(lin_raw))
    try:
        inst = QcqpInstance(obj, cons, lower, upper, lin)
    except ValueError as exc:
        raise InstanceFormatError("general", str(exc)) from None
    return InstanceFile(general=inst, provenance=prov, schema_version=version)


def loads(text: str) -> InstanceFile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return from_dict(d)


def load_instance(path) -> InstanceFile:
    return loads(Path(path).read_text())
