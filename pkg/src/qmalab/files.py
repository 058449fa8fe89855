"""JSON file formats for instances, colorings, proof states and attack results.

Loaders validate structure before building domain objects and report the
offending location as a JSON path (``edges[3].allowed[1][0]``).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .csp import Coloring, ContractError, CspInstance, DirectedEdge
from .states import ColoringState

INSTANCE_SCHEMA = (
    '{"n_vertices": N, "alphabet_size": K, "name": str,\n'
    ' "edges": [{"u": int, "v": int, "allowed": [[0|1, ...K], ...K]}, ...]}'
)
COLORING_SCHEMA = '{"colors": [int, ...N]}'
STATE_SCHEMA = (
    '{"n_vertices": N, "alphabet_size": K,\n'
    ' "vertex_amp": [[re, im], ...N], "color_amp": [[[re, im], ...K], ...N]}'
)


class FormatError(ContractError):
    """Malformed input file; the message names the file and the JSON path."""


def _read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise FormatError(f"{where}: expected integer, got {type(x).__name__}")
    return x


def _list(x, where: str, length: int | None = None) -> list:
    if not isinstance(x, list):
        raise FormatError(f"{where}: expected list, got {type(x).__name__}")
    if length is not None and len(x) != length:
        raise FormatError(f"{where}: expected {length} entries, got {len(x)}")
    return x


def _field(obj, key: str, where: str):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected object, got {type(obj).__name__}")
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _complex(x, where: str) -> complex:
    pair = _list(x, where, 2)
    for i, c in enumerate(pair):
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise FormatError(f"{where}[{i}]: expected number")
    return complex(pair[0], pair[1])


# ---------------------------------------------------------------- instances


def instance_to_dict(inst: CspInstance) -> dict:
    return {
        "n_vertices": inst.n_vertices,
        "alphabet_size": inst.alphabet_size,
        "name": inst.name,
        "edges": [{"u": e.u, "v": e.v, "allowed": e.allowed.astype(int).tolist()} for e in inst.edges],
    }


def instance_from_dict(d, where: str = "$") -> CspInstance:
    n = _int(_field(d, "n_vertices", where), f"{where}.n_vertices")
    k = _int(_field(d, "alphabet_size", where), f"{where}.alphabet_size")
    if n < 1 or k < 1:
        raise FormatError(f"{where}: n_vertices and alphabet_size must be >= 1")
    edges = []
    seen = {}
    for i, e in enumerate(_list(_field(d, "edges", where), f"{where}.edges")):
        at = f"{where}.edges[{i}]"
        u = _int(_field(e, "u", at), f"{at}.u")
        v = _int(_field(e, "v", at), f"{at}.v")
        for name, x in (("u", u), ("v", v)):
            if not 0 <= x < n:
                raise FormatError(f"{at}.{name}: vertex {x} outside [0,{n})")
        if (u, v) in seen:
            raise FormatError(f"{at}: duplicate ordered pair ({u},{v}), first at edges[{seen[u, v]}]")
        seen[u, v] = i
        rows = _list(_field(e, "allowed", at), f"{at}.allowed", k)
        table = np.zeros((k, k), dtype=bool)
        for a, row in enumerate(rows):
            for b, x in enumerate(_list(row, f"{at}.allowed[{a}]", k)):
                if x not in (0, 1) or isinstance(x, float):
                    raise FormatError(f"{at}.allowed[{a}][{b}]: expected 0 or 1, got {x!r}")
                table[a, b] = bool(x)
        edges.append(DirectedEdge(u, v, table))
    name = d.get("name", "")
    if not isinstance(name, str):
        raise FormatError(f"{where}.name: expected string")
    return CspInstance(n, k, tuple(edges), name)


def load_instance(path) -> CspInstance:
    try:
        return instance_from_dict(_read_json(path))
    except FormatError as exc:
        raise _prefixed(exc, path) from None


def save_instance(inst: CspInstance, path) -> None:
    write_json_atomic(path, instance_to_dict(inst))


# ---------------------------------------------------------------- colorings


def load_coloring(path, inst: CspInstance | None = None) -> Coloring:
    try:
        d = _read_json(path)
        colors = [_int(c, f"$.colors[{i}]") for i, c in enumerate(_list(_field(d, "colors", "$"), "$.colors"))]
        col = Coloring(colors)
        if inst is not None:
            col.check(inst)
        return col
    except (FormatError, ContractError) as exc:
        raise _prefixed(exc, path) from None


def save_coloring(col: Coloring, path) -> None:
    write_json_atomic(path, {"colors": list(col.colors)})


# ---------------------------------------------------------------- states


def state_to_dict(s: ColoringState) -> dict:
    return {
        "n_vertices": s.n,
        "alphabet_size": s.k,
        "vertex_amp": [[float(z.real), float(z.imag)] for z in s.vertex_amp],
        "color_amp": [[[float(z.real), float(z.imag)] for z in row] for row in s.color_amp],
    }


def state_from_dict(d, where: str = "$") -> ColoringState:
    n = _int(_field(d, "n_vertices", where), f"{where}.n_vertices")
    k = _int(_field(d, "alphabet_size", where), f"{where}.alphabet_size")
    va = _list(_field(d, "vertex_amp", where), f"{where}.vertex_amp", n)
    ca = _list(_field(d, "color_amp", where), f"{where}.color_amp", n)
    a = np.array([_complex(x, f"{where}.vertex_amp[{v}]") for v, x in enumerate(va)], dtype=complex)
    b = np.array(
        [
            [_complex(x, f"{where}.color_amp[{v}][{j}]") for j, x in enumerate(_list(row, f"{where}.color_amp[{v}]", k))]
            for v, row in enumerate(ca)
        ],
        dtype=complex,
    ).reshape(n, k)
    try:
        return ColoringState(a, b)
    except ContractError as exc:
        raise FormatError(f"{where}: {exc}") from None


def load_state(path, inst: CspInstance | None = None) -> ColoringState:
    try:
        s = state_from_dict(_read_json(path))
    except FormatError as exc:
        raise _prefixed(exc, path) from None
    if inst is not None and (s.n, s.k) != (inst.n_vertices, inst.alphabet_size):
        raise FormatError(f"{path}: state has (N,K)=({s.n},{s.k}), instance has ({inst.n_vertices},{inst.alphabet_size})")
    return s


def save_state(s: ColoringState, path) -> None:
    write_json_atomic(path, state_to_dict(s))


# ---------------------------------------------------------------- attack results


def attack_result_to_dict(res) -> dict:
    d = res.summary()
    d["best_states"] = [state_to_dict(s) for s in res.best_states]
    d["traces"] = [[[int(i), float(v)] for i, v in t] for t in res.traces]
    return d


# ---------------------------------------------------------------- plumbing


def _prefixed(exc: Exception, path) -> FormatError:
    msg = str(exc)
    return FormatError(msg if msg.startswith(str(path)) else f"{path}: {msg}")


def to_jsonable(o):
    if isinstance(o, dict):
        return {str(k): to_jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [to_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return to_jsonable(o.tolist())
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if hasattr(o, "__dataclass_fields__"):
        return to_jsonable(asdict(o))
    if isinstance(o, (str, int, float, bool)) or o is None:
        return o
    return str(o)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, dumps(obj))


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
