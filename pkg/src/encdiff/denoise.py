"""Sampling-step arithmetic.

One deterministic-sampler update reads

    x_next = sqrt(c3) * (x - c1*e) / sqrt(c2) + sqrt(1 - c3 - c4^2) * e
             + c4 * noise

which is affine in x, so the whole step collapses to a single multiply and
a single add on the ciphertext side:

    x_next = factor * x + add_part,   factor = sqrt(c3 / c2)

with add_part built entirely from public tensors.  The coefficients come
from a deterministic-implicit-sampler schedule over a linear beta ramp,
using a uniform-stride subset of the training timesteps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse_enc import EncCooTensor, partial_add, partial_mul, rescale_coo

DEFAULT_TRAIN_STEPS = 1000
BETA_START = 1e-4
BETA_END = 2e-2


class ScheduleError(ValueError):
    """Schedule construction violated a coefficient invariant."""


@dataclass(frozen=True)
class StepCoefficients:
    c1: float  # sqrt(1 - abar_t)
    c2: float  # abar_t
    c3: float  # abar_prev
    c4: float  # stochasticity sigma_t

    def __post_init__(self):
        if not 0 < self.c2 <= 1:
            raise ScheduleError(f"c2={self.c2} outside (0, 1]")
        if not 0 < self.c3 <= 1:
            raise ScheduleError(f"c3={self.c3} outside (0, 1]")
        if self.c4 < 0:
            raise ScheduleError(f"c4={self.c4} negative")
        if 1.0 - self.c3 - self.c4**2 < 0:
            raise ScheduleError("1 - c3 - c4^2 negative; direction term undefined")


@dataclass(frozen=True)
class LatentImage:
    data: np.ndarray  # (C, H, W)
    step_index: int = 0


@dataclass(frozen=True)
class Schedule:
    num_train_steps: int
    betas: np.ndarray
    alphas_cumprod: np.ndarray
    timesteps: np.ndarray  # sampling subset, descending
    eta: float
    coefficients: tuple[StepCoefficients, ...]  # aligned with timesteps

    @property
    def num_steps(self) -> int:
        return self.timesteps.size

    def __iter__(self):
        return iter(zip(self.timesteps.tolist(), self.coefficients))


def make_schedule(
    num_steps: int, eta: float = 0.0, num_train_steps: int = DEFAULT_TRAIN_STEPS
) -> Schedule:
    """Uniform-stride sampling schedule with per-step (c1..c4)."""
    if eta < 0:
        raise ScheduleError("eta must be nonnegative")
    if not 1 <= num_steps <= num_train_steps // 2:
        raise ScheduleError(
            f"num_steps must lie in [1, {num_train_steps // 2}], got {num_steps}"
        )
    betas = np.linspace(BETA_START, BETA_END, num_train_steps)
    abar = np.cumprod(1.0 - betas)
    stride = num_train_steps // num_steps
    ts = 1 + stride * np.arange(num_steps)
    prev = np.concatenate(([0], ts[:-1]))
    coeffs = []
    for t, tp in zip(ts, prev):
        at, ap = float(abar[t]), float(abar[tp])
        c4 = eta * np.sqrt((1 - ap) / (1 - at)) * np.sqrt(1 - at / ap)
        coeffs.append(StepCoefficients(c1=float(np.sqrt(1 - at)), c2=at, c3=ap, c4=float(c4)))
    # sampling iterates from the noisiest timestep down
    return Schedule(
        num_train_steps=num_train_steps,
        betas=betas,
        alphas_cumprod=abar,
        timesteps=ts[::-1].copy(),
        eta=eta,
        coefficients=tuple(coeffs[::-1]),
    )


def _check_shapes(*tensors):
    shapes = {np.asarray(t).shape for t in tensors}
    if len(shapes) > 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def denoise_plain(
    x: np.ndarray, e: np.ndarray, c: StepCoefficients, noise: np.ndarray
) -> np.ndarray:
    """Literal step: predict x0, add the direction term and scaled noise."""
    _check_shapes(x, e, noise)
    pred_x0 = (x - c.c1 * e) / np.sqrt(c.c2)
    dir_x = np.sqrt(1.0 - c.c3 - c.c4**2) * e
    return np.sqrt(c.c3) * pred_x0 + dir_x + c.c4 * noise


def denoise_factors(
    e: np.ndarray, c: StepCoefficients, noise: np.ndarray
) -> tuple[float, np.ndarray]:
    """Collapse the step to (factor, add_part) with x appearing only once."""
    _check_shapes(e, noise)
    factor = float(np.sqrt(c.c3 / c.c2))
    dir_x = np.sqrt(1.0 - c.c3 - c.c4**2) * e
    add_part = dir_x + c.c4 * noise - factor * c.c1 * e
    return factor, add_part


def apply_step(x: np.ndarray, factor: float, add_part: np.ndarray) -> np.ndarray:
    """The affine step itself; shared by the plaintext and hybrid pipelines."""
    return x * factor + add_part


def denoise_encrypted(
    y: EncCooTensor,
    z: np.ndarray,
    factor: float,
    add_part: np.ndarray,
    backend,
) -> tuple[EncCooTensor, np.ndarray]:
    """One hybrid step: ciphertext side multiply+add, plaintext side dense.

    Raises DepthError (from the backend) when the ciphertexts cannot absorb
    another multiply; the caller answers with a re-encryption round trip.
    """
    z = np.asarray(z, dtype=np.float64)
    add_part = np.asarray(add_part, dtype=np.float64)
    if z.shape != y.shape or add_part.shape != y.shape:
        raise ValueError("operand shapes must match the sparse tensor shape")
    y_next = partial_mul(y, factor, backend)
    if y_next.packed:
        y_next = rescale_coo(y_next, backend)
    y_next = partial_add(y_next, add_part, backend)
    z_next = apply_step(z, factor, add_part)
    z_next.ravel()[y.indices] = 0.0
    return y_next, z_next
