"""CKKS-style leveled approximate arithmetic on packed real vectors.

Research-grade implementation covering exactly the operations the hybrid
denoising pipeline needs: encode/decode, encrypt/decrypt, ct+ct, ct+pt,
ct*pt and rescale.  No relinearization, no ct*ct multiply, no rotations.
Parameters are chosen for correctness and benchmarking; the scheme is NOT
audited for production security.

Polynomials are stored in RNS form: a (level+1, n) uint64 matrix of
residues, one row per active chain prime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ntt import NttTables, get_tables, intt, ntt
from .params import (
    HEADROOM_BITS,
    DepthError,
    EncodingError,
    HeParams,
    LevelMismatchError,
    ScaleMismatchError,
)

_SCALE_RTOL = 1e-9
# Empirical noise-model constants, calibrated over 1000 random round trips
# at n in {1024, 8192} with sigma 3.2 (see tests/test_he_core.py); bounds
# carry roughly a 2.5x margin over the largest observed error.
_C_FRESH = 16.0
_C_ENCODE = 8.0


# --------------------------------------------------------------------------
# encoding via the canonical embedding (real slots, conjugate symmetry)


@lru_cache(maxsize=None)
class _Encoder:
    """FFT twiddles for one ring degree."""

    def __init__(self, n: int):
        self.n = n
        k = np.arange(n)
        # zeta = exp(i*pi/n) is a primitive 2n-th root; slot j evaluates the
        # polynomial at zeta^(2j+1), which reduces to a DFT of the twisted
        # coefficient vector c_k * zeta^k.
        self.twist = np.exp(1j * np.pi * k / n)

    def coeffs_from_slots(self, slots: np.ndarray) -> np.ndarray:
        n = self.n
        full = np.empty(n, dtype=np.complex128)
        full[: n // 2] = slots
        full[n // 2 :] = np.conj(slots[::-1])
        u = np.fft.fft(full) / n
        return np.real(u * np.conj(self.twist))

    def slots_from_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        n = self.n
        return (np.fft.ifft(coeffs * self.twist) * n)[: n // 2]


# --------------------------------------------------------------------------
# scheme objects


@dataclass(frozen=True, eq=False)
class Plaintext:
    rns: np.ndarray  # (level+1, n) uint64
    scale: float
    level: int


@dataclass(frozen=True, eq=False)
class Ciphertext:
    c0: np.ndarray  # (level+1, n) uint64
    c1: np.ndarray
    scale: float
    level: int


@dataclass(frozen=True, eq=False)
class SecretKey:
    coeffs: np.ndarray  # (n,) int8 ternary
    ntt_forms: tuple = field(repr=False)  # per chain prime


@dataclass(frozen=True, eq=False)
class PublicKey:
    b_rns: np.ndarray  # (L+1, n) uint64, b = -a*s + e
    a_rns: np.ndarray
    b_ntt: tuple = field(repr=False)
    a_ntt: tuple = field(repr=False)


@dataclass(frozen=True, eq=False)
class KeyPair:
    secret_key: SecretKey
    public_key: PublicKey


@dataclass(frozen=True)
class OpsProfile:
    """Shape of a homomorphic computation, for noise estimation."""

    num_adds: int = 0
    num_pt_muls: int = 0
    max_pt_magnitude: float = 0.0

    def __post_init__(self):
        if self.num_adds < 0 or self.num_pt_muls < 0 or self.max_pt_magnitude < 0:
            raise ValueError("ops profile fields must be nonnegative")


def error_bound(params: HeParams, profile: OpsProfile = OpsProfile()) -> float:
    """Conservative max-abs slot error for fresh encryption + profile ops.

    Monotone in every profile field (strictly in the magnitude once at
    least one multiply is involved).
    """
    n = params.ring_degree
    fresh = _C_FRESH * params.error_stddev * n / params.scale
    enc = _C_ENCODE * math.sqrt(n) / params.scale
    mag = 1.0 + profile.max_pt_magnitude
    bound = (fresh + enc) * (1 + profile.num_adds) * mag**profile.num_pt_muls
    bound += profile.num_pt_muls * mag * enc
    return bound


# --------------------------------------------------------------------------
# backend


class CkksBackend:
    """Leveled CKKS-style backend over a fixed parameter set.

    All objects are immutable after construction and every method is a pure
    function of its inputs, so instances are safe to share across threads.
    """

    name = "ckks"
    exact = False

    def __init__(self, params: HeParams):
        self.params = params
        n = params.ring_degree
        self._encoder = _Encoder(n)
        self._tables: tuple[NttTables, ...] = tuple(
            get_tables(q, n) for q in params.modulus_chain
        )
        self._primes = np.array(params.modulus_chain, dtype=np.uint64)
        # rescale constants: q_top^-1 mod q_j for every (top, j) pair
        chain = params.modulus_chain
        self._qinv = {
            (t, j): pow(chain[t], chain[j] - 2, chain[j])
            for t in range(1, len(chain))
            for j in range(t)
        }
        self._crt_consts = {}

    # -- helpers

    @property
    def slot_count(self) -> int:
        return self.params.slot_count

    def _signed_to_rns(self, coeffs: np.ndarray, level: int) -> np.ndarray:
        rows = [
            (coeffs % np.int64(q)).astype(np.uint64)
            for q in self.params.modulus_chain[: level + 1]
        ]
        return np.stack(rows)

    def _crt_basis(self, level: int):
        if level not in self._crt_consts:
            primes = self.params.modulus_chain[: level + 1]
            big_q = math.prod(primes)
            consts = []
            for q in primes:
                m_i = big_q // q
                consts.append((m_i * pow(m_i, q - 2, q)) % big_q)
            self._crt_consts[level] = (big_q, tuple(consts))
        return self._crt_consts[level]

    def _rns_to_centered_float(self, rns: np.ndarray, level: int) -> np.ndarray:
        if level == 0:
            q = self.params.modulus_chain[0]
            c = rns[0].astype(np.int64)
            c[c > q // 2] -= q
            return c.astype(np.float64)
        big_q, consts = self._crt_basis(level)
        acc = rns[0].astype(object) * consts[0]
        for i in range(1, level + 1):
            acc += rns[i].astype(object) * consts[i]
        acc %= big_q
        acc = np.where(acc > big_q // 2, acc - big_q, acc)
        return acc.astype(np.float64)

    def _check_pair(self, a, b, *, match_scale: bool):
        if a.level != b.level:
            raise LevelMismatchError(f"levels differ: {a.level} vs {b.level}")
        if match_scale and not math.isclose(a.scale, b.scale, rel_tol=_SCALE_RTOL):
            raise ScaleMismatchError(f"scales differ: {a.scale} vs {b.scale}")

    # -- key generation

    def keygen(self, seed: int) -> KeyPair:
        """Deterministic ternary-secret RLWE key pair for a fixed seed."""
        params = self.params
        n = params.ring_degree
        rng = np.random.default_rng(seed)
        s = np.zeros(n, dtype=np.int8)
        support = rng.permutation(n)[: n // 2]
        s[support] = rng.integers(0, 2, n // 2) * 2 - 1
        level = params.max_level
        s_rns = self._signed_to_rns(s.astype(np.int64), level)
        s_ntt = tuple(ntt(s_rns[i], self._tables[i]) for i in range(level + 1))

        a_rns = np.stack(
            [
                rng.integers(0, q, n, dtype=np.uint64)
                for q in params.modulus_chain
            ]
        )
        e = np.round(rng.normal(0.0, params.error_stddev, n)).astype(np.int64)
        e_rns = self._signed_to_rns(e, level)
        b_rows = []
        a_ntt = []
        for i, q in enumerate(params.modulus_chain):
            t = self._tables[i]
            qa = np.uint64(q)
            a_t = ntt(a_rns[i], t)
            a_ntt.append(a_t)
            a_s = intt((a_t * s_ntt[i]) % qa, t)
            b_rows.append((qa - a_s + e_rns[i]) % qa)
        b_rns = np.stack(b_rows)
        b_ntt = tuple(ntt(b_rns[i], self._tables[i]) for i in range(level + 1))
        return KeyPair(
            secret_key=SecretKey(coeffs=s, ntt_forms=s_ntt),
            public_key=PublicKey(b_rns=b_rns, a_rns=a_rns, b_ntt=tuple(b_ntt), a_ntt=tuple(a_ntt)),
        )

    def secret_key_from_coeffs(self, coeffs: np.ndarray) -> SecretKey:
        level = self.params.max_level
        s_rns = self._signed_to_rns(coeffs.astype(np.int64), level)
        forms = tuple(ntt(s_rns[i], self._tables[i]) for i in range(level + 1))
        return SecretKey(coeffs=np.asarray(coeffs, dtype=np.int8), ntt_forms=forms)

    def public_key_from_rns(self, b_rns: np.ndarray, a_rns: np.ndarray) -> PublicKey:
        level = self.params.max_level
        b_ntt = tuple(ntt(b_rns[i], self._tables[i]) for i in range(level + 1))
        a_ntt = tuple(ntt(a_rns[i], self._tables[i]) for i in range(level + 1))
        return PublicKey(b_rns=b_rns, a_rns=a_rns, b_ntt=b_ntt, a_ntt=a_ntt)

    # -- encode / decode

    def encode(self, values, scale: float | None = None, level: int | None = None) -> Plaintext:
        params = self.params
        scale = params.scale if scale is None else float(scale)
        level = params.max_level if level is None else level
        if scale <= 0:
            raise EncodingError("scale must be positive")
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size > params.slot_count:
            raise EncodingError(
                f"{values.size} values exceed {params.slot_count} slots"
            )
        if not np.all(np.isfinite(values)):
            raise EncodingError("values must be finite")
        slots = np.zeros(params.slot_count, dtype=np.complex128)
        slots[: values.size] = values
        coeffs = self._encoder.coeffs_from_slots(slots) * scale
        limit = min(self.params.modulus_at(level) // 2, 1 << 52)
        peak = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
        if peak >= limit:
            raise EncodingError(
                f"encoded coefficients ({peak:.3g}) overflow the level-{level} modulus"
            )
        ints = np.round(coeffs).astype(np.int64)
        return Plaintext(rns=self._signed_to_rns(ints, level), scale=scale, level=level)

    def decode(self, pt: Plaintext) -> np.ndarray:
        coeffs = self._rns_to_centered_float(pt.rns, pt.level)
        return np.real(self._encoder.slots_from_coeffs(coeffs)) / pt.scale

    # -- encrypt / decrypt

    def encrypt(self, pk: PublicKey, pt: Plaintext, rng=None) -> Ciphertext:
        params = self.params
        n = params.ring_degree
        if pt.level != params.max_level:
            raise LevelMismatchError("fresh encryption expects a top-level plaintext")
        rng = np.random.default_rng() if rng is None else rng
        u = rng.integers(-1, 2, n).astype(np.int64)
        e0 = np.round(rng.normal(0.0, params.error_stddev, n)).astype(np.int64)
        e1 = np.round(rng.normal(0.0, params.error_stddev, n)).astype(np.int64)
        level = pt.level
        u_rns = self._signed_to_rns(u, level)
        e0_rns = self._signed_to_rns(e0, level)
        e1_rns = self._signed_to_rns(e1, level)
        c0_rows, c1_rows = [], []
        for i in range(level + 1):
            t = self._tables[i]
            q = np.uint64(t.q)
            u_t = ntt(u_rns[i], t)
            bu = intt((pk.b_ntt[i] * u_t) % q, t)
            au = intt((pk.a_ntt[i] * u_t) % q, t)
            c0_rows.append((bu + e0_rns[i] + pt.rns[i]) % q)
            c1_rows.append((au + e1_rns[i]) % q)
        return Ciphertext(
            c0=np.stack(c0_rows), c1=np.stack(c1_rows), scale=pt.scale, level=level
        )

    def decrypt(self, sk: SecretKey, ct: Ciphertext) -> Plaintext:
        rows = []
        for i in range(ct.level + 1):
            t = self._tables[i]
            q = np.uint64(t.q)
            c1s = intt((ntt(ct.c1[i], t) * sk.ntt_forms[i]) % q, t)
            rows.append((ct.c0[i] + c1s) % q)
        return Plaintext(rns=np.stack(rows), scale=ct.scale, level=ct.level)

    # -- arithmetic

    def add_ct_ct(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check_pair(a, b, match_scale=True)
        mod = self._primes[: a.level + 1, None]
        return Ciphertext(
            c0=(a.c0 + b.c0) % mod,
            c1=(a.c1 + b.c1) % mod,
            scale=a.scale,
            level=a.level,
        )

    def add_ct_pt(self, a: Ciphertext, b: Plaintext) -> Ciphertext:
        self._check_pair(a, b, match_scale=True)
        mod = self._primes[: a.level + 1, None]
        return Ciphertext(
            c0=(a.c0 + b.rns) % mod, c1=a.c1.copy(), scale=a.scale, level=a.level
        )

    def mul_ct_pt(self, a: Ciphertext, b: Plaintext) -> Ciphertext:
        self._check_pair(a, b, match_scale=False)
        if a.level == 0:
            raise DepthError("cannot multiply at level 0; re-encrypt")
        new_scale = a.scale * b.scale
        if new_scale * 2.0**HEADROOM_BITS >= float(self.params.modulus_at(a.level)) / 2:
            raise DepthError("product scale exhausts the modulus; re-encrypt")
        c0_rows, c1_rows = [], []
        for i in range(a.level + 1):
            t = self._tables[i]
            q = np.uint64(t.q)
            b_t = ntt(b.rns[i], t)
            c0_rows.append(intt((ntt(a.c0[i], t) * b_t) % q, t))
            c1_rows.append(intt((ntt(a.c1[i], t) * b_t) % q, t))
        return Ciphertext(
            c0=np.stack(c0_rows), c1=np.stack(c1_rows), scale=new_scale, level=a.level
        )

    def rescale(self, a: Ciphertext) -> Ciphertext:
        if a.level == 0:
            raise DepthError("modulus chain exhausted; re-encrypt")
        top = a.level
        q_top = self.params.modulus_chain[top]
        new_scale = a.scale / q_top
        if new_scale * 2.0**HEADROOM_BITS >= float(self.params.modulus_at(top - 1)) / 2:
            raise DepthError("rescale target cannot hold the payload; re-encrypt")

        def drop(poly: np.ndarray) -> np.ndarray:
            r = poly[top].astype(np.int64)
            r[r > q_top // 2] -= q_top  # centered lift keeps the rounding error small
            rows = []
            for j in range(top):
                q_j = self.params.modulus_chain[j]
                r_j = (r % np.int64(q_j)).astype(np.uint64)
                diff = (poly[j] + np.uint64(q_j) - r_j) % np.uint64(q_j)
                rows.append((diff * np.uint64(self._qinv[(top, j)])) % np.uint64(q_j))
            return np.stack(rows)

        return Ciphertext(c0=drop(a.c0), c1=drop(a.c1), scale=new_scale, level=top - 1)

    def error_bound(self, profile: OpsProfile = OpsProfile()) -> float:
        return error_bound(self.params, profile)
