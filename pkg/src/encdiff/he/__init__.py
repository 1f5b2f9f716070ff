"""Leveled approximate homomorphic encryption with a bit-exact mock twin."""

from .ckks import (
    Ciphertext,
    CkksBackend,
    KeyPair,
    OpsProfile,
    Plaintext,
    PublicKey,
    SecretKey,
    error_bound,
)
from .mock import MockBackend, MockCiphertext, MockKeyPair, MockPlaintext
from .params import (
    DepthError,
    EncodingError,
    HeError,
    HeParams,
    LevelMismatchError,
    ParameterError,
    ParamsMismatchError,
    ScaleMismatchError,
    WireFormatError,
)
from .wire import deserialize, deserialize_key, serialize, serialize_public_key, serialize_secret_key

BACKENDS = ("ckks", "mock")


def make_backend(name: str, params: HeParams | None = None):
    params = HeParams() if params is None else params
    if name == "ckks":
        return CkksBackend(params)
    if name == "mock":
        return MockBackend(params)
    raise ParameterError(f"unknown backend {name!r}; expected one of {BACKENDS}")
