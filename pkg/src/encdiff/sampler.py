"""Sampling loops: the plaintext oracle and the private pipeline."""

from __future__ import annotations

from .denoise import LatentImage, apply_step, denoise_factors, make_schedule
from .he import HeParams
from .predictor import DEFAULT_MODEL_SEED, ToyPredictor, client_forward, embed_prompt, server_forward
from .roles import DEFAULT_EMBED_SEED, DEFAULT_SHAPE, RunReport, SessionConfig, SessionStreams
from .session import run_session


def sample_plain(
    prompt: str,
    num_steps: int,
    eta: float = 0.0,
    seed: int = 0,
    *,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    embed_seed: int = DEFAULT_EMBED_SEED,
    model_seed: int = DEFAULT_MODEL_SEED,
    num_train_steps: int = 1000,
    streams: SessionStreams | None = None,
) -> LatentImage:
    """Everything-in-the-clear reference run.

    Applies the step in its collapsed affine form, which the private
    pipeline reproduces bit-for-bit under the exact backend.
    """
    predictor = ToyPredictor.from_seed(model_seed)
    cond = embed_prompt(prompt, embed_seed)
    schedule = make_schedule(num_steps, eta, num_train_steps)
    streams = streams or SessionStreams.from_seed(seed)
    x = streams.init.normal(shape)
    for t, coeffs in schedule:
        act = client_forward(x, t, predictor.client)
        e = server_forward(act, cond, t, predictor.server)
        noise = streams.step.normal(shape)
        factor, add_part = denoise_factors(e, coeffs, noise)
        x = apply_step(x, factor, add_part)
    return LatentImage(data=x, step_index=num_steps)


def sample_private(
    prompt: str,
    num_steps: int,
    eta: float = 0.0,
    seed: int = 0,
    threshold: float = 0.01,
    reencrypt_every: int = 1,
    backend: str = "ckks",
    *,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    embed_seed: int = DEFAULT_EMBED_SEED,
    model_seed: int = DEFAULT_MODEL_SEED,
    num_train_steps: int = 1000,
    cost_fn: str = "hill",
    params: HeParams | None = None,
    transport: str = "in_process",
) -> tuple[LatentImage, RunReport]:
    """Full client/server run; the server never sees a raw latent."""
    config = SessionConfig(
        prompt=prompt,
        num_steps=num_steps,
        eta=eta,
        seed=seed,
        threshold=threshold,
        reencrypt_every=reencrypt_every,
        backend=backend,
        shape=shape,
        embed_seed=embed_seed,
        model_seed=model_seed,
        num_train_steps=num_train_steps,
        cost_fn=cost_fn,
        params=params if params is not None else HeParams(),
    )
    return run_session(transport, config)
