"""Binary serialization for scheme objects.

Ciphertext/plaintext wire format, little-endian throughout:

    magic "HEDF" | version u16 | tag u8 | N u32 | level u8 | scale f64 |
    per polynomial: one block per active prime, each block being
    coefficient count u32 followed by that many u64 residues.

Tags: 0 plaintext, 1 ciphertext (two polynomials), 2 mock plaintext,
3 mock ciphertext.  Mock bodies hold a single block of float64 slot values
bit-cast to u64.  Parameter sets travel as human-readable key=value text.
"""

from __future__ import annotations

import struct

import numpy as np

from .ckks import Ciphertext, Plaintext
from .mock import MockCiphertext, MockPlaintext
from .params import HeParams, ParamsMismatchError, WireFormatError

MAGIC = b"HEDF"
VERSION = 1

TAG_PLAINTEXT = 0
TAG_CIPHERTEXT = 1
TAG_MOCK_PLAINTEXT = 2
TAG_MOCK_CIPHERTEXT = 3

_HEADER = struct.Struct("<4sHBIBd")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise WireFormatError("truncated buffer")
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def done(self) -> bool:
        return self.pos == len(self.data)


def _pack_block(values: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(values, dtype="<u8")
    return struct.pack("<I", arr.size) + arr.tobytes()


def _unpack_block(r: _Reader) -> np.ndarray:
    count = r.u32()
    return np.frombuffer(r.take(8 * count), dtype="<u8").astype(np.uint64)


def _pack_poly(rns: np.ndarray) -> bytes:
    return b"".join(_pack_block(row) for row in rns)


def _unpack_poly(r: _Reader, blocks: int, n: int) -> np.ndarray:
    rows = []
    for _ in range(blocks):
        row = _unpack_block(r)
        if row.size != n:
            raise WireFormatError(f"block holds {row.size} coefficients, expected {n}")
        rows.append(row)
    return np.stack(rows)


def _header(tag: int, n: int, level: int, scale: float) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, tag, n, level, scale)


def serialize(obj) -> bytes:
    """Serialize a (mock) plaintext or ciphertext to bytes."""
    if isinstance(obj, Plaintext):
        return _header(TAG_PLAINTEXT, obj.rns.shape[1], obj.level, obj.scale) + _pack_poly(obj.rns)
    if isinstance(obj, Ciphertext):
        return (
            _header(TAG_CIPHERTEXT, obj.c0.shape[1], obj.level, obj.scale)
            + _pack_poly(obj.c0)
            + _pack_poly(obj.c1)
        )
    if isinstance(obj, (MockPlaintext, MockCiphertext)):
        tag = TAG_MOCK_PLAINTEXT if isinstance(obj, MockPlaintext) else TAG_MOCK_CIPHERTEXT
        body = _pack_block(obj.values.view(np.uint64))
        return _header(tag, 2 * obj.values.size, obj.level, obj.scale) + body
    raise WireFormatError(f"cannot serialize {type(obj).__name__}")


def deserialize(data: bytes, params: HeParams):
    """Parse bytes produced by serialize(), validating against params."""
    if len(data) < _HEADER.size:
        raise WireFormatError("buffer shorter than header")
    magic, version, tag, n, level, scale = _HEADER.unpack(data[: _HEADER.size])
    if magic != MAGIC:
        raise WireFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WireFormatError(f"unsupported version {version}")
    if n != params.ring_degree:
        raise ParamsMismatchError(
            f"object was built for ring degree {n}, params use {params.ring_degree}"
        )
    if level > params.max_level:
        raise ParamsMismatchError(
            f"object level {level} exceeds chain length {len(params.modulus_chain)}"
        )
    r = _Reader(data)
    r.pos = _HEADER.size
    if tag == TAG_PLAINTEXT:
        obj = Plaintext(rns=_unpack_poly(r, level + 1, n), scale=scale, level=level)
    elif tag == TAG_CIPHERTEXT:
        c0 = _unpack_poly(r, level + 1, n)
        c1 = _unpack_poly(r, level + 1, n)
        obj = Ciphertext(c0=c0, c1=c1, scale=scale, level=level)
    elif tag in (TAG_MOCK_PLAINTEXT, TAG_MOCK_CIPHERTEXT):
        block = _unpack_block(r)
        if block.size != params.slot_count:
            raise ParamsMismatchError(
                f"mock object holds {block.size} slots, params use {params.slot_count}"
            )
        values = block.view(np.float64).copy()
        cls = MockPlaintext if tag == TAG_MOCK_PLAINTEXT else MockCiphertext
        obj = cls(values=values, scale=scale, level=level)
    else:
        raise WireFormatError(f"unknown object tag {tag}")
    if not r.done():
        raise WireFormatError(f"{len(data) - r.pos} trailing bytes")
    return obj


# legacy-style aliases matching the operation names used elsewhere
serialize_ct = serialize
deserialize_ct = deserialize


_KEY_MAGIC = b"HEKY"
_KEY_HEADER = struct.Struct("<4sHBI")
KEY_TAG_SECRET = 0
KEY_TAG_PUBLIC = 1
KEY_TAG_MOCK = 2


def serialize_secret_key(sk) -> bytes:
    from .mock import MockSecretKey

    if isinstance(sk, MockSecretKey):
        return _KEY_HEADER.pack(_KEY_MAGIC, VERSION, KEY_TAG_MOCK, 0) + struct.pack(
            "<q", sk.seed
        )
    coeffs = np.ascontiguousarray(sk.coeffs, dtype=np.int8)
    return _KEY_HEADER.pack(_KEY_MAGIC, VERSION, KEY_TAG_SECRET, coeffs.size) + coeffs.tobytes()


def serialize_public_key(pk) -> bytes:
    from .mock import MockPublicKey

    if isinstance(pk, MockPublicKey):
        return _KEY_HEADER.pack(_KEY_MAGIC, VERSION, KEY_TAG_MOCK, 0) + struct.pack(
            "<q", pk.seed
        )
    n = pk.b_rns.shape[1]
    return (
        _KEY_HEADER.pack(_KEY_MAGIC, VERSION, KEY_TAG_PUBLIC, n)
        + _pack_poly(pk.b_rns)
        + _pack_poly(pk.a_rns)
    )


def deserialize_key(data: bytes, backend):
    """Rebuild a key for the given backend (recomputes cached transforms)."""
    from .mock import MockPublicKey, MockSecretKey

    if len(data) < _KEY_HEADER.size:
        raise WireFormatError("buffer shorter than key header")
    magic, version, tag, n = _KEY_HEADER.unpack(data[: _KEY_HEADER.size])
    if magic != _KEY_MAGIC or version != VERSION:
        raise WireFormatError("bad key header")
    body = data[_KEY_HEADER.size :]
    if tag == KEY_TAG_MOCK:
        (seed,) = struct.unpack("<q", body)
        return MockSecretKey(seed) if backend.name == "mock" else MockPublicKey(seed)
    if n != backend.params.ring_degree:
        raise ParamsMismatchError("key ring degree does not match params")
    r = _Reader(data)
    r.pos = _KEY_HEADER.size
    blocks = backend.params.max_level + 1
    if tag == KEY_TAG_SECRET:
        coeffs = np.frombuffer(r.take(n), dtype=np.int8).copy()
        if not r.done():
            raise WireFormatError("trailing bytes after secret key")
        return backend.secret_key_from_coeffs(coeffs)
    if tag == KEY_TAG_PUBLIC:
        b_rns = _unpack_poly(r, blocks, n)
        a_rns = _unpack_poly(r, blocks, n)
        if not r.done():
            raise WireFormatError("trailing bytes after public key")
        return backend.public_key_from_rns(b_rns, a_rns)
    raise WireFormatError(f"unknown key tag {tag}")
