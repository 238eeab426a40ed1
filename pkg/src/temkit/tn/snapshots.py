"""Binary snapshots of tensor trains for resuming long sweeps.

Layout (little-endian): magic ``PTMT``, u32 version, u8 kind (0 = MPS,
1 = MPO), u8 dtype code (0 = float64, 1 = complex128), u32 site count,
i32 orthogonality center (-1 = undeclared), then per site a u8 rank,
rank u32 dimensions and the row-major tensor payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .ops import PtmMpo, PtmMps

MAGIC = b"PTMT"
VERSION = 1
_DTYPES = {0: np.dtype(np.float64), 1: np.dtype(np.complex128)}
_KIND_MPS = 0
_KIND_MPO = 1


def _dtype_code(tensors) -> int:
    if any(np.iscomplexobj(t) for t in tensors):
        return 1
    return 0


def _write_train(path, kind: int, tensors, center: int | None) -> None:
    code = _dtype_code(tensors)
    dt = _DTYPES[code]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(
            struct.pack(
                "<IBBIi",
                VERSION,
                kind,
                code,
                len(tensors),
                -1 if center is None else center,
            )
        )
        for t in tensors:
            arr = np.ascontiguousarray(t, dtype=dt)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def _read_exact(f, size: int) -> bytes:
    buf = f.read(size)
    if len(buf) != size:
        raise ValueError("truncated snapshot file")
    return buf


def _read_train(path, kind: int):
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise ValueError("not a tensor-train snapshot")
        version, got_kind, code, n_sites, center = struct.unpack(
            "<IBBIi", _read_exact(f, 14)
        )
        if version != VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        if got_kind != kind:
            raise ValueError("snapshot holds a different train kind")
        if code not in _DTYPES:
            raise ValueError(f"unknown dtype code {code}")
        dt = _DTYPES[code]
        tensors = []
        for _ in range(n_sites):
            (rank,) = struct.unpack("<B", _read_exact(f, 1))
            shape = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank))
            count = int(np.prod(shape)) if shape else 1
            payload = _read_exact(f, count * dt.itemsize)
            tensors.append(np.frombuffer(payload, dtype=dt).reshape(shape))
        if f.read(1):
            raise ValueError("trailing bytes in snapshot file")
    return tensors, (None if center < 0 else center)


def save_mps(path: str | Path, mps: PtmMps) -> None:
    _write_train(path, _KIND_MPS, mps.tensors, mps.center)


def load_mps(path: str | Path) -> PtmMps:
    tensors, center = _read_train(path, _KIND_MPS)
    return PtmMps(tuple(tensors), center)


def save_mpo(path: str | Path, mpo: PtmMpo) -> None:
    _write_train(path, _KIND_MPO, mpo.tensors, mpo.center)


def load_mpo(path: str | Path) -> PtmMpo:
    tensors, center = _read_train(path, _KIND_MPO)
    return PtmMpo(tuple(tensors), center)
