"""JSON file formats for matrices, states, POVMs and query plans.

Matrix documents look like ``{"dim": d, "entries": [[re, im], ...]}`` with
``d * d`` row-major entries. Parsing is strict.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .core import DensityMatrix, ProductState
from .errors import ValidationError
from .measurement import Povm
from .protocols import QldpQuery, QldpQueryPlan, QsqQuery, QsqQueryPlan


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in m.ravel()]}


def matrix_from_json(doc: Any) -> np.ndarray:
    if not isinstance(doc, dict) or set(doc) != {"dim", "entries"}:
        raise ValidationError('matrix must be an object with exactly the keys "dim" and "entries"')
    dim, entries = doc["dim"], doc["entries"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(entries, list) or len(entries) != dim * dim:
        n = len(entries) if isinstance(entries, list) else "non-list"
        raise ValidationError(f"expected {dim * dim} entries, got {n}")
    out = np.empty(dim * dim, dtype=complex)
    for i, e in enumerate(entries):
        if (
            not isinstance(e, list)
            or len(e) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in e)
            or not all(math.isfinite(x) for x in e)
        ):
            raise ValidationError(f"entry {i} must be a pair of finite numbers, got {e!r}")
        out[i] = complex(e[0], e[1])
    return out.reshape(dim, dim)


def povm_to_json(m: Povm) -> dict:
    return {"dim": m.dim, "labels": list(m.labels), "effects": [matrix_to_json(e) for e in m.effects]}


def povm_from_json(doc: Any) -> Povm:
    if not isinstance(doc, dict) or not {"dim", "effects"} <= set(doc) or set(doc) - {"dim", "labels", "effects"}:
        raise ValidationError('POVM must be an object with keys "dim", "effects" and optionally "labels"')
    effects = [matrix_from_json(e) for e in doc["effects"]]
    if any(e.shape[0] != doc["dim"] for e in effects):
        raise ValidationError(f"effect dimension does not match dim={doc['dim']}")
    return Povm(effects, doc.get("labels"))


def product_state_from_json(doc: Any) -> ProductState:
    """``{"registers": [matrix, ...]}``, or a bare matrix for a single register."""
    if isinstance(doc, dict) and set(doc) == {"registers"}:
        return ProductState(DensityMatrix(matrix_from_json(r)) for r in doc["registers"])
    return ProductState([DensityMatrix(matrix_from_json(doc))])


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        with path.open() as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e})") from e


def jsonable(o):
    """``json`` fallback for numpy scalars."""
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path: str | Path, doc: Any) -> None:
    path = Path(path)
    try:
        with path.open("w") as f:
            json.dump(doc, f, indent=2, default=jsonable)
            f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def load_state(path: str | Path) -> DensityMatrix:
    return DensityMatrix(matrix_from_json(read_json(path)))


def load_povm(path: str | Path) -> Povm:
    return povm_from_json(read_json(path))


def load_product_state(path: str | Path) -> ProductState:
    return product_state_from_json(read_json(path))


def _povm_ref(ref: Any, base: Path) -> Povm:
    if isinstance(ref, str):
        return load_povm(base / ref)
    return povm_from_json(ref)


def _queries(doc: Any) -> list[dict]:
    if not isinstance(doc, dict) or not isinstance(doc.get("queries"), list):
        raise ValidationError('query plan must be an object with a "queries" list')
    return doc["queries"]


def load_qsq_plan(path: str | Path) -> QsqQueryPlan:
    """Plan entries are ``{"povm": file-or-inline, "tau": t}``; file paths are relative to the plan."""
    path = Path(path)
    out = []
    for i, q in enumerate(_queries(read_json(path))):
        if not isinstance(q, dict) or set(q) != {"povm", "tau"}:
            raise ValidationError(f'query {i} must have exactly the keys "povm" and "tau"')
        out.append(QsqQuery(_povm_ref(q["povm"], path.parent), float(q["tau"])))
    return QsqQueryPlan(tuple(out))


def load_qldp_plan(path: str | Path, epsilon: float) -> QldpQueryPlan:
    """Plan entries are ``{"register": j, "povm": file-or-inline, "epsilon": e}``."""
    path = Path(path)
    out = []
    for i, q in enumerate(_queries(read_json(path))):
        if not isinstance(q, dict) or set(q) != {"register", "povm", "epsilon"}:
            raise ValidationError(f'query {i} must have exactly the keys "register", "povm" and "epsilon"')
        out.append(QldpQuery(int(q["register"]), _povm_ref(q["povm"], path.parent), float(q["epsilon"])))
    return QldpQueryPlan(tuple(out), epsilon)
