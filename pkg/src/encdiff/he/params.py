"""Parameter sets and error types for the leveled approximate-HE scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2


class HeError(Exception):
    """Base class for scheme errors."""


class ParameterError(HeError):
    """Invalid scheme parameters."""


class EncodingError(HeError):
    """Value cannot be represented at the requested scale/level."""


class LevelMismatchError(HeError):
    """Operands live at different points of the modulus chain."""


class ScaleMismatchError(HeError):
    """Operand scales differ beyond tolerance."""


class DepthError(HeError):
    """Modulus chain exhausted; the caller must re-encrypt."""


class WireFormatError(HeError):
    """Corrupt or truncated serialized object."""


class ParamsMismatchError(WireFormatError):
    """Serialized object does not belong to the active parameter set."""


# Primes must stay below 2**32 so residue products fit in uint64.
MAX_PRIME_BITS = 32

DEFAULT_RING_DEGREE = 8192
DEFAULT_CHAIN_BITS = (31, 26, 26, 31)
DEFAULT_SCALE = 2.0**30
DEFAULT_ERROR_STDDEV = 3.2

# Values larger than 2**HEADROOM_BITS are not guaranteed to survive a
# rescale/multiply at the remaining modulus; exceeding it raises DepthError.
HEADROOM_BITS = 8


def ntt_friendly_primes(ring_degree: int, bit_sizes: tuple[int, ...]) -> tuple[int, ...]:
    """Deterministically pick distinct primes == 1 (mod 2N), one per bit size.

    For each requested bit size the largest such prime below 2**bits not
    already taken is chosen, so a given (N, bit_sizes) always yields the
    same chain.
    """
    m = 2 * ring_degree
    chosen: list[int] = []
    for bits in bit_sizes:
        if not 2 < bits <= MAX_PRIME_BITS:
            raise ParameterError(f"prime bit size {bits} outside (2, {MAX_PRIME_BITS}]")
        cand = (((1 << bits) - 1) // m) * m + 1
        while cand > 2:
            if cand.bit_length() == bits and cand not in chosen and gmpy2.is_prime(cand):
                chosen.append(cand)
                break
            cand -= m
        else:
            raise ParameterError(f"no {bits}-bit prime == 1 mod {m}")
    return tuple(chosen)


@dataclass(frozen=True)
class HeParams:
    """Ring, modulus chain and encoding scale of the scheme.

    The chain is ordered q_0..q_L; a fresh ciphertext sits at level L and
    each rescale drops the highest active prime.  All primes are NTT
    friendly (== 1 mod 2N) and word sized.
    """

    ring_degree: int = DEFAULT_RING_DEGREE
    modulus_chain: tuple[int, ...] = field(default=())
    scale: float = DEFAULT_SCALE
    error_stddev: float = DEFAULT_ERROR_STDDEV

    def __post_init__(self):
        n = self.ring_degree
        if n < 8 or n & (n - 1):
            raise ParameterError(f"ring degree {n} is not a power of two >= 8")
        if not self.modulus_chain:
            object.__setattr__(
                self, "modulus_chain", ntt_friendly_primes(n, DEFAULT_CHAIN_BITS)
            )
        chain = self.modulus_chain
        if len(chain) < 2:
            raise ParameterError("modulus chain needs at least 2 primes")
        if len(set(chain)) != len(chain):
            raise ParameterError("modulus chain primes must be distinct")
        for q in chain:
            if q % (2 * n) != 1:
                raise ParameterError(f"prime {q} is not == 1 mod {2 * n}")
            if q.bit_length() > MAX_PRIME_BITS:
                raise ParameterError(f"prime {q} exceeds {MAX_PRIME_BITS} bits")
            if not gmpy2.is_prime(q):
                raise ParameterError(f"{q} is not prime")
        if self.scale <= 0 or 2.0 ** round(math.log2(self.scale)) != self.scale:
            raise ParameterError("scale must be a positive power of two")
        if self.error_stddev <= 0:
            raise ParameterError("error stddev must be positive")
        if self.scale * self.scale >= float(self.modulus_at(self.max_level)):
            raise ParameterError("scale^2 must stay below the top-level modulus")

    @classmethod
    def create(
        cls,
        ring_degree: int = DEFAULT_RING_DEGREE,
        chain_bits: tuple[int, ...] = DEFAULT_CHAIN_BITS,
        scale: float = DEFAULT_SCALE,
        error_stddev: float = DEFAULT_ERROR_STDDEV,
    ) -> "HeParams":
        """Build params from prime bit sizes instead of explicit primes."""
        return cls(
            ring_degree=ring_degree,
            modulus_chain=ntt_friendly_primes(ring_degree, tuple(chain_bits)),
            scale=scale,
            error_stddev=error_stddev,
        )

    @property
    def slot_count(self) -> int:
        return self.ring_degree // 2

    @property
    def max_level(self) -> int:
        return len(self.modulus_chain) - 1

    def modulus_at(self, level: int) -> int:
        """Product of the active primes q_0..q_level."""
        if not 0 <= level <= self.max_level:
            raise ParameterError(f"level {level} outside chain of length {len(self.modulus_chain)}")
        out = 1
        for q in self.modulus_chain[: level + 1]:
            out *= q
        return out

    def to_text(self) -> str:
        return (
            f"ring_degree={self.ring_degree}\n"
            f"modulus_chain={','.join(str(q) for q in self.modulus_chain)}\n"
            f"scale={self.scale!r}\n"
            f"error_stddev={self.error_stddev!r}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "HeParams":
        fields: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"malformed params line: {line!r}")
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
        try:
            return cls(
                ring_degree=int(fields["ring_degree"]),
                modulus_chain=tuple(int(q) for q in fields["modulus_chain"].split(",")),
                scale=float(fields["scale"]),
                error_stddev=float(fields["error_stddev"]),
            )
        except KeyError as exc:
            raise ParameterError(f"missing params field: {exc}") from exc
