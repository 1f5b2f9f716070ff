"""Negacyclic number-theoretic transforms over word-sized primes.

Polynomials live in Z_q[x]/(x^n + 1) with q == 1 (mod 2n), so a primitive
2n-th root of unity psi exists and the negacyclic convolution becomes a
pointwise product in the psi-twisted NTT domain.  All arithmetic stays in
uint64: q < 2**32 keeps every product below 2**64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import ParameterError


def _bit_reverse(x: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (x & 1)
        x >>= 1
    return out


def _primitive_2n_root(q: int, n: int) -> int:
    """Smallest generator of the order-2n subgroup of Z_q^*."""
    if (q - 1) % (2 * n) != 0:
        raise ParameterError(f"{q} has no 2*{n}-th roots of unity")
    cofactor = (q - 1) // (2 * n)
    for base in range(2, q):
        psi = pow(base, cofactor, q)
        # order exactly 2n <=> psi^n == -1
        if pow(psi, n, q) == q - 1:
            return psi
    raise ParameterError(f"no primitive 2*{n}-th root mod {q}")


@dataclass(frozen=True)
class NttTables:
    q: int
    n: int
    psi_br: np.ndarray  # psi^bitrev(i), forward butterflies
    ipsi_br: np.ndarray  # psi^-bitrev(i), inverse butterflies
    n_inv: int


@lru_cache(maxsize=None)
def get_tables(q: int, n: int) -> NttTables:
    psi = _primitive_2n_root(q, n)
    ipsi = pow(psi, q - 2, q)
    bits = n.bit_length() - 1
    psi_br = np.empty(n, dtype=np.uint64)
    ipsi_br = np.empty(n, dtype=np.uint64)
    for i in range(n):
        j = _bit_reverse(i, bits)
        psi_br[i] = pow(psi, j, q)
        ipsi_br[i] = pow(ipsi, j, q)
    return NttTables(q=q, n=n, psi_br=psi_br, ipsi_br=ipsi_br, n_inv=pow(n, q - 2, q))


def ntt(a: np.ndarray, t: NttTables) -> np.ndarray:
    """Forward transform; standard-order input, bit-reversed output."""
    q = np.uint64(t.q)
    out = np.ascontiguousarray(a, dtype=np.uint64).copy()
    n = t.n
    m, half = 1, n >> 1
    while m < n:
        out = out.reshape(m, 2 * half)
        w = t.psi_br[m : 2 * m, None]
        lo = out[:, :half]
        hi = (out[:, half:] * w) % q
        s = (lo + hi) % q
        d = (lo + (q - hi)) % q
        out[:, :half] = s
        out[:, half:] = d
        out = out.reshape(-1)
        m <<= 1
        half >>= 1
    return out


def intt(a: np.ndarray, t: NttTables) -> np.ndarray:
    """Inverse transform; undoes ntt() stage by stage."""
    q = np.uint64(t.q)
    out = np.ascontiguousarray(a, dtype=np.uint64).copy()
    n = t.n
    m, half = n >> 1, 1
    while m >= 1:
        out = out.reshape(m, 2 * half)
        w = t.ipsi_br[m : 2 * m, None]
        s = out[:, :half]
        d = out[:, half:]
        lo = (s + d) % q
        hi = (((s + (q - d)) % q) * w) % q
        out[:, :half] = lo
        out[:, half:] = hi
        out = out.reshape(-1)
        m >>= 1
        half <<= 1
    # each inverse stage skipped a /2; fold them into one n^-1 multiply
    return (out * np.uint64(t.n_inv)) % q


def negacyclic_mul(a: np.ndarray, b: np.ndarray, t: NttTables) -> np.ndarray:
    q = np.uint64(t.q)
    return intt((ntt(a, t) * ntt(b, t)) % q, t)
