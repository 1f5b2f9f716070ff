"""COO sparse tensors with plaintext or SIMD-packed ciphertext values.

Only the nonzero elements of the encryption-bound tensor are packed into
ciphertext slots (index order), while the flat index list stays in
plaintext by design; dense tensors interact with the packed values through
plaintext-side gathers, so the hybrid step never materializes a sparse
copy of the dense operands.  Index secrecy is NOT claimed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .he.params import HeParams, WireFormatError
from .he.wire import deserialize, serialize


@dataclass(frozen=True, eq=False)
class CooTensor:
    shape: tuple[int, ...]
    indices: np.ndarray  # flat row-major, strictly increasing int64
    values: np.ndarray  # float64, no stored zeros

    def __post_init__(self):
        idx, vals = self.indices, self.values
        if idx.shape != vals.shape or idx.ndim != 1:
            raise ValueError("indices and values must be parallel 1-d arrays")
        size = int(np.prod(self.shape))
        if idx.size:
            if idx[0] < 0 or idx[-1] >= size:
                raise ValueError("index out of bounds")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")

    @property
    def nnz(self) -> int:
        return self.indices.size


def make_coo(shape, indices, values) -> CooTensor:
    """Normalizing constructor: sorts by index and drops explicit zeros."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(indices, kind="stable")
    indices, values = indices[order], values[order]
    keep = values != 0.0
    return CooTensor(shape=tuple(shape), indices=indices[keep], values=values[keep])


def to_coo(x: np.ndarray) -> CooTensor:
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    idx = np.flatnonzero(flat).astype(np.int64)
    return CooTensor(shape=x.shape, indices=idx, values=flat[idx].copy())


def to_dense(c: CooTensor) -> np.ndarray:
    out = np.zeros(int(np.prod(c.shape)), dtype=np.float64)
    out[c.indices] = c.values
    return out.reshape(c.shape)


@dataclass(frozen=True, eq=False)
class EncCooTensor:
    shape: tuple[int, ...]
    indices: np.ndarray  # plaintext flat indices
    packed: tuple  # ciphertexts, slot_count values each except the last
    count: int
    scale: float
    level: int

    @property
    def nnz(self) -> int:
        return self.count


def _chunks(values: np.ndarray, size: int):
    for start in range(0, values.size, size):
        yield values[start : start + size]


def encrypt_coo(c: CooTensor, pk, backend, rng=None) -> EncCooTensor:
    """Pack nonzeros into ceil(nnz / slot_count) ciphertexts, index order."""
    packed = tuple(
        backend.encrypt(pk, backend.encode(chunk), rng)
        for chunk in _chunks(c.values, backend.slot_count)
    )
    scale = packed[0].scale if packed else backend.params.scale
    level = packed[0].level if packed else backend.params.max_level
    return EncCooTensor(
        shape=c.shape,
        indices=c.indices.copy(),
        packed=packed,
        count=c.nnz,
        scale=scale,
        level=level,
    )


def decrypt_coo(e: EncCooTensor, sk, backend) -> CooTensor:
    if not e.packed:
        return CooTensor(shape=e.shape, indices=e.indices.copy(), values=np.zeros(0))
    slots = [backend.decode(backend.decrypt(sk, ct)) for ct in e.packed]
    values = np.concatenate(slots)[: e.count]
    return make_coo(e.shape, e.indices, values)


def _gathered(e: EncCooTensor, dense) -> np.ndarray:
    dense = np.asarray(dense, dtype=np.float64)
    if np.ndim(dense) == 0:
        return np.full(e.count, float(dense))
    if dense.shape != e.shape:
        raise ValueError(f"shape mismatch: {dense.shape} vs {e.shape}")
    return dense.ravel()[e.indices]


def partial_mul(e: EncCooTensor, factor, backend) -> EncCooTensor:
    """Multiply held values by factor gathered at the held indices.

    A scalar factor is encoded once and shared across all packed
    ciphertexts; a dense factor is gathered (plaintext side) per chunk.
    """
    if not e.packed:
        return e
    scalar = np.ndim(factor) == 0
    if scalar:
        pt = backend.encode(
            np.full(backend.slot_count, float(factor)), level=e.level
        )
        out = tuple(backend.mul_ct_pt(ct, pt) for ct in e.packed)
    else:
        gathered = _gathered(e, factor)
        out = tuple(
            backend.mul_ct_pt(ct, backend.encode(chunk, level=e.level))
            for ct, chunk in zip(e.packed, _chunks(gathered, backend.slot_count))
        )
    return EncCooTensor(
        shape=e.shape,
        indices=e.indices,
        packed=out,
        count=e.count,
        scale=out[0].scale,
        level=out[0].level,
    )


def partial_add(e: EncCooTensor, addend, backend) -> EncCooTensor:
    """Add addend gathered at the held indices; encoded at the current scale."""
    if not e.packed:
        return e
    gathered = _gathered(e, addend)
    out = tuple(
        backend.add_ct_pt(ct, backend.encode(chunk, scale=e.scale, level=e.level))
        for ct, chunk in zip(e.packed, _chunks(gathered, backend.slot_count))
    )
    return EncCooTensor(
        shape=e.shape,
        indices=e.indices,
        packed=out,
        count=e.count,
        scale=out[0].scale,
        level=out[0].level,
    )


def rescale_coo(e: EncCooTensor, backend) -> EncCooTensor:
    if not e.packed:
        return e
    out = tuple(backend.rescale(ct) for ct in e.packed)
    return EncCooTensor(
        shape=e.shape,
        indices=e.indices,
        packed=out,
        count=e.count,
        scale=out[0].scale,
        level=out[0].level,
    )


def merge(y: CooTensor, z: np.ndarray) -> np.ndarray:
    """Write y's values into z by assignment (supports are disjoint)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {y.shape}")
    out = z.copy()
    out.ravel()[y.indices] = y.values
    return out


# ----------------------------------------------------------------- wire format
# header: u32 c,h,w | u64 count | u32 num ciphertexts | u32 indices | per
# ciphertext a u64 length prefix followed by the he wire encoding.

_ECOO_MAGIC = b"ECOO"


def serialize_enc_coo(e: EncCooTensor) -> bytes:
    if len(e.shape) != 3:
        raise WireFormatError("wire format carries (C,H,W) tensors")
    head = struct.pack(
        "<4sIIIQI", _ECOO_MAGIC, e.shape[0], e.shape[1], e.shape[2], e.count, len(e.packed)
    )
    idx = np.ascontiguousarray(e.indices, dtype="<u4").tobytes()
    blobs = []
    for ct in e.packed:
        blob = serialize(ct)
        blobs.append(struct.pack("<Q", len(blob)) + blob)
    return head + idx + b"".join(blobs)


def deserialize_enc_coo(data: bytes, params: HeParams) -> EncCooTensor:
    head = struct.Struct("<4sIIIQI")
    if len(data) < head.size:
        raise WireFormatError("truncated sparse tensor header")
    magic, c, h, w, count, n_cts = head.unpack(data[: head.size])
    if magic != _ECOO_MAGIC:
        raise WireFormatError(f"bad sparse tensor magic {magic!r}")
    pos = head.size
    if len(data) < pos + 4 * count:
        raise WireFormatError("truncated index block")
    indices = np.frombuffer(data[pos : pos + 4 * count], dtype="<u4").astype(np.int64)
    pos += 4 * count
    packed = []
    for _ in range(n_cts):
        if len(data) < pos + 8:
            raise WireFormatError("truncated ciphertext length")
        (blob_len,) = struct.unpack("<Q", data[pos : pos + 8])
        pos += 8
        if len(data) < pos + blob_len:
            raise WireFormatError("truncated ciphertext")
        packed.append(deserialize(data[pos : pos + blob_len], params))
        pos += blob_len
    if pos != len(data):
        raise WireFormatError("trailing bytes after sparse tensor")
    scale = packed[0].scale if packed else params.scale
    level = packed[0].level if packed else params.max_level
    return EncCooTensor(
        shape=(c, h, w),
        indices=indices,
        packed=tuple(packed),
        count=count,
        scale=scale,
        level=level,
    )
