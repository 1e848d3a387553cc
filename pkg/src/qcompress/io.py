"""JSON file formats for observable sets and compression schemes.

Complex matrices are stored as a pair of real tables ``re`` and ``im``.
Python's float repr round-trips exactly, so a scheme written and read back
acts identically.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channelsynth import CompressionScheme
from .matcore import EPS_HERM, DimensionError, ObservableSet, QuantumChannel

FORMAT_VERSION = "1.0"


class ParseError(ValueError):
    """Malformed or non-Hermitian input file."""


def matrix_to_tables(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def tables_to_matrix(entry: dict) -> np.ndarray:
    try:
        re = np.array(entry["re"], dtype=float)
        im = np.array(entry["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad matrix table: {exc}") from exc
    if re.shape != im.shape or re.ndim != 2:
        raise ParseError(f"re/im tables must be 2-D with equal shapes, got {re.shape}, {im.shape}")
    return re + 1j * im


def observables_to_dict(ops, names=None) -> dict:
    ops = [np.asarray(o, dtype=complex) for o in ops]
    names = names or [f"E{i + 1}" for i in range(len(ops))]
    return {
        "format_version": FORMAT_VERSION,
        "dim": int(ops[0].shape[0]),
        "operators": [{"name": n, **matrix_to_tables(o)} for n, o in zip(names, ops)],
    }


def observables_from_dict(data: dict, tol: float = EPS_HERM) -> tuple[ObservableSet, list[str]]:
    """Parse and validate; Hermiticity is checked, not trusted."""
    if not isinstance(data, dict) or "operators" not in data:
        raise ParseError("observable file needs an 'operators' list")
    dim = data.get("dim")
    mats, names = [], []
    for k, entry in enumerate(data["operators"]):
        m = tables_to_matrix(entry)
        if m.shape[0] != m.shape[1]:
            raise ParseError(f"operator {k} is not square")
        if dim is not None and m.shape[0] != dim:
            raise DimensionError(f"operator {k} has dimension {m.shape[0]}, file says {dim}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > tol * scale:
            raise ParseError(f"operator {k} is not Hermitian")
        mats.append(m)
        names.append(str(entry.get("name", f"E{k + 1}")))
    if not mats:
        raise ParseError("observable file has no operators")
    try:
        return ObservableSet.from_matrices(mats, tol), names
    except DimensionError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def read_observables(path) -> tuple[ObservableSet, list[str]]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return observables_from_dict(data)


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _channel_to_dict(ch: QuantumChannel) -> dict:
    if ch.kraus is None:
        raise ValueError("only Kraus-form channels are serialized")
    return {"dim_in": ch.dim_in, "dim_out": ch.dim_out,
            "kraus": [matrix_to_tables(k) for k in ch.kraus]}


def _channel_from_dict(data: dict, register: int = 1) -> QuantumChannel:
    try:
        ks = [tables_to_matrix(k) for k in data["kraus"]]
        ch = QuantumChannel(int(data["dim_in"]), int(data["dim_out"]), tuple(ks),
                            classical_register=register)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad channel entry: {exc}") from exc
    return ch


def scheme_to_dict(scheme: CompressionScheme) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dim": scheme.dim,
        "d": scheme.achieved_dim,
        "n": scheme.classical_register,
        "kept_blocks": list(scheme.kept_blocks),
        "compress": _channel_to_dict(scheme.compress),
        "decompress": _channel_to_dict(scheme.decompress),
    }


def scheme_from_dict(data: dict) -> CompressionScheme:
    try:
        d, n = int(data["d"]), int(data["n"])
        comp = _channel_from_dict(data["compress"], n)
        decomp = _channel_from_dict(data["decompress"])
        return CompressionScheme(comp, decomp, d, n, tuple(int(k) for k in data["kept_blocks"]))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad scheme file: {exc}") from exc


def read_scheme(path) -> CompressionScheme:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return scheme_from_dict(data)
