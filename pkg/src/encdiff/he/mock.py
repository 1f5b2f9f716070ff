"""Bit-exact stand-in backend for oracle testing.

Carries slot values verbatim while mirroring the real backend's scale and
level bookkeeping, including the DepthError conditions, so pipelines built
on it exercise the same control flow but can be compared bit-for-bit
against plaintext references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ckks import OpsProfile
from .params import (
    HEADROOM_BITS,
    DepthError,
    EncodingError,
    HeParams,
    LevelMismatchError,
    ScaleMismatchError,
)

_SCALE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class MockPlaintext:
    values: np.ndarray  # (slot_count,) float64
    scale: float
    level: int


@dataclass(frozen=True, eq=False)
class MockCiphertext:
    values: np.ndarray
    scale: float
    level: int


@dataclass(frozen=True)
class MockSecretKey:
    seed: int


@dataclass(frozen=True)
class MockPublicKey:
    seed: int


@dataclass(frozen=True)
class MockKeyPair:
    secret_key: MockSecretKey
    public_key: MockPublicKey


class MockBackend:
    name = "mock"
    exact = True

    def __init__(self, params: HeParams):
        self.params = params

    @property
    def slot_count(self) -> int:
        return self.params.slot_count

    def keygen(self, seed: int) -> MockKeyPair:
        return MockKeyPair(MockSecretKey(seed), MockPublicKey(seed))

    def encode(self, values, scale: float | None = None, level: int | None = None) -> MockPlaintext:
        scale = self.params.scale if scale is None else float(scale)
        level = self.params.max_level if level is None else level
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size > self.params.slot_count:
            raise EncodingError(
                f"{values.size} values exceed {self.params.slot_count} slots"
            )
        if not np.all(np.isfinite(values)):
            raise EncodingError("values must be finite")
        padded = np.zeros(self.params.slot_count, dtype=np.float64)
        padded[: values.size] = values
        return MockPlaintext(values=padded, scale=scale, level=level)

    def decode(self, pt: MockPlaintext) -> np.ndarray:
        return pt.values.copy()

    def encrypt(self, pk: MockPublicKey, pt: MockPlaintext, rng=None) -> MockCiphertext:
        if pt.level != self.params.max_level:
            raise LevelMismatchError("fresh encryption expects a top-level plaintext")
        return MockCiphertext(values=pt.values.copy(), scale=pt.scale, level=pt.level)

    def decrypt(self, sk: MockSecretKey, ct: MockCiphertext) -> MockPlaintext:
        return MockPlaintext(values=ct.values.copy(), scale=ct.scale, level=ct.level)

    def _check_pair(self, a, b, *, match_scale: bool):
        if a.level != b.level:
            raise LevelMismatchError(f"levels differ: {a.level} vs {b.level}")
        if match_scale and not np.isclose(a.scale, b.scale, rtol=_SCALE_RTOL, atol=0):
            raise ScaleMismatchError(f"scales differ: {a.scale} vs {b.scale}")

    def add_ct_ct(self, a: MockCiphertext, b: MockCiphertext) -> MockCiphertext:
        self._check_pair(a, b, match_scale=True)
        return MockCiphertext(values=a.values + b.values, scale=a.scale, level=a.level)

    def add_ct_pt(self, a: MockCiphertext, b: MockPlaintext) -> MockCiphertext:
        self._check_pair(a, b, match_scale=True)
        return MockCiphertext(values=a.values + b.values, scale=a.scale, level=a.level)

    def mul_ct_pt(self, a: MockCiphertext, b: MockPlaintext) -> MockCiphertext:
        self._check_pair(a, b, match_scale=False)
        if a.level == 0:
            raise DepthError("cannot multiply at level 0; re-encrypt")
        new_scale = a.scale * b.scale
        if new_scale * 2.0**HEADROOM_BITS >= float(self.params.modulus_at(a.level)) / 2:
            raise DepthError("product scale exhausts the modulus; re-encrypt")
        return MockCiphertext(values=a.values * b.values, scale=new_scale, level=a.level)

    def rescale(self, a: MockCiphertext) -> MockCiphertext:
        if a.level == 0:
            raise DepthError("modulus chain exhausted; re-encrypt")
        q_top = self.params.modulus_chain[a.level]
        new_scale = a.scale / q_top
        if new_scale * 2.0**HEADROOM_BITS >= float(self.params.modulus_at(a.level - 1)) / 2:
            raise DepthError("rescale target cannot hold the payload; re-encrypt")
        return MockCiphertext(values=a.values.copy(), scale=new_scale, level=a.level - 1)

    def error_bound(self, profile: OpsProfile = OpsProfile()) -> float:
        return 0.0
