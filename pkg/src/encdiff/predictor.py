"""Desk-scale noise predictor with a client/server layer split.

A two-layer conv net stands in for the heavyweight model: the first conv
runs on the client (the raw latent never leaves it), the second conv plus
the conditioning projection run on the server against the uploaded
intermediate activation.  Weights are generated from a seed and frozen;
there is no training anywhere.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

COND_TOKENS = 77
COND_DIM = 16
HIDDEN_CHANNELS = 16
LATENT_CHANNELS = 4
DEFAULT_MODEL_SEED = 1316


@dataclass(frozen=True)
class ClientNet:
    """First layer; stays on the user's machine."""

    conv_w: np.ndarray  # (hidden, latent, 3, 3)
    conv_b: np.ndarray  # (hidden,)


@dataclass(frozen=True)
class ServerNet:
    """Remaining layers; runs where the model is hosted."""

    conv_w: np.ndarray  # (latent, hidden, 3, 3)
    conv_b: np.ndarray  # (latent,)
    cond_w: np.ndarray  # (hidden, COND_TOKENS * COND_DIM), bias-free


@dataclass(frozen=True)
class ToyPredictor:
    client: ClientNet
    server: ServerNet

    @classmethod
    def from_seed(cls, seed: int = DEFAULT_MODEL_SEED) -> "ToyPredictor":
        rng = np.random.default_rng(seed)
        h, l = HIDDEN_CHANNELS, LATENT_CHANNELS
        conv1_w = rng.normal(0, 1 / np.sqrt(l * 9), (h, l, 3, 3))
        conv1_b = rng.normal(0, 0.05, h)
        conv2_w = rng.normal(0, 1 / np.sqrt(h * 9), (l, h, 3, 3))
        conv2_b = rng.normal(0, 0.05, l)
        cond_w = rng.normal(0, 1 / np.sqrt(COND_TOKENS * COND_DIM), (h, COND_TOKENS * COND_DIM))
        return cls(
            client=ClientNet(conv_w=conv1_w, conv_b=conv1_b),
            server=ServerNet(conv_w=conv2_w, conv_b=conv2_b, cond_w=cond_w),
        )

    def split(self) -> tuple[ClientNet, ServerNet]:
        return self.client, self.server


def conv2d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 convolution with zero padding, (Cin,H,W) -> (Cout,H,W)."""
    _, h, wid = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((w.shape[0], h, wid))
    for dy in range(3):
        for dx in range(3):
            out += np.einsum("oi,ihw->ohw", w[:, :, dy, dx], xp[:, dy : dy + h, dx : dx + wid])
    return out + b[:, None, None]


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def timestep_embedding(t: int, dim: int = HIDDEN_CHANNELS) -> np.ndarray:
    """Sinusoidal embedding of a training timestep."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = t * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def embed_prompt(prompt: str, embed_seed: int) -> np.ndarray:
    """Client-side prompt embedding, (COND_TOKENS, COND_DIM) with unit rows.

    Derived from a hash of (seed, prompt); the seed never leaves the client,
    so the mapping is not reproducible server-side.  Stated as a design
    property, not a proven guarantee.
    """
    if not prompt:
        raise ValueError("prompt must be nonempty")
    digest = hashlib.sha256(f"{embed_seed}:{prompt}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    rows = rng.standard_normal((COND_TOKENS, COND_DIM))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def client_forward(x: np.ndarray, t: int, net: ClientNet) -> np.ndarray:
    """First layer plus timestep embedding; output is what gets uploaded."""
    act = conv2d_same(np.asarray(x, dtype=np.float64), net.conv_w, net.conv_b)
    return act + timestep_embedding(t)[:, None, None]


def server_forward(act: np.ndarray, cond: np.ndarray, t: int, net: ServerNet) -> np.ndarray:
    """Server-side remainder: conditioning bias, nonlinearity, second conv.

    The timestep is public and already folded into the activation; it is
    accepted here so call sites mirror the client signature.
    """
    act = np.asarray(act, dtype=np.float64)
    if act.shape[0] != net.conv_w.shape[1]:
        raise ValueError(
            f"activation has {act.shape[0]} channels, net expects {net.conv_w.shape[1]}"
        )
    bias = net.cond_w @ np.asarray(cond, dtype=np.float64).ravel()
    hidden = act + bias[:, None, None]
    return conv2d_same(gelu(hidden), net.conv_w, net.conv_b)


def predict_noise(x: np.ndarray, cond: np.ndarray, t: int, predictor: ToyPredictor) -> np.ndarray:
    """Single-function composition used as the dual-implementation oracle."""
    return server_forward(client_forward(x, t, predictor.client), cond, t, predictor.server)
