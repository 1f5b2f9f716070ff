"""Client and server state machines for the private sampling session.

The client owns everything sensitive: the prompt and its embedding seed,
the HE keys, the raw latents, and the split/encrypt step.  The server sees
only the public session config, the conditioning tensor, per-iteration
activations and the hybrid (ciphertext, plaintext-residual) image pair.
Per iteration the ciphertext side costs exactly one multiply and one add;
when the modulus chain runs out the server asks for a fresh encryption
instead of failing.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .denoise import LatentImage, denoise_encrypted, denoise_factors, make_schedule
from .distortion import COST_FUNCTIONS, remove_points_fast, split
from .he import DepthError, HeParams, make_backend
from .predictor import (
    LATENT_CHANNELS,
    ToyPredictor,
    client_forward,
    embed_prompt,
    server_forward,
)
from .protocol import (
    Message,
    MessageKind,
    ProtocolError,
    pack_array,
    pack_json,
    pack_sections,
    unpack_array,
    unpack_json,
    unpack_sections,
)
from .sparse_enc import decrypt_coo, deserialize_enc_coo, encrypt_coo, merge, serialize_enc_coo, to_coo

DEFAULT_EMBED_SEED = 7907
DEFAULT_SHAPE = (4, 32, 32)


def derive_stream_seed(seed: int, label: str) -> int:
    """Independent per-purpose stream seeds; sharing one does not expose the rest."""
    digest = hashlib.sha256(f"{label}:{seed}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


class CountingRng:
    """Seeded normal sampler that logs how many tensor draws were taken."""

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)
        self.draws = 0

    def normal(self, shape) -> np.ndarray:
        self.draws += 1
        return self._rng.standard_normal(shape)


@dataclass
class SessionStreams:
    init: CountingRng
    step: CountingRng
    he: np.random.Generator
    step_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "SessionStreams":
        step_seed = derive_stream_seed(seed, "step")
        return cls(
            init=CountingRng(derive_stream_seed(seed, "init")),
            step=CountingRng(step_seed),
            he=np.random.default_rng(derive_stream_seed(seed, "he")),
            step_seed=step_seed,
        )


@dataclass(frozen=True)
class SessionConfig:
    prompt: str
    num_steps: int = 10
    eta: float = 0.0
    seed: int = 0
    threshold: float = 0.01
    reencrypt_every: int = 1
    backend: str = "ckks"
    shape: tuple[int, int, int] = DEFAULT_SHAPE
    embed_seed: int = DEFAULT_EMBED_SEED
    model_seed: int = 1316
    num_train_steps: int = 1000
    cost_fn: str = "hill"
    params: HeParams = field(default_factory=HeParams)

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not 0 <= self.threshold < 1:
            raise ValueError("threshold outside [0, 1)")
        if self.reencrypt_every < 1:
            raise ValueError("reencrypt_every must be >= 1")
        if self.cost_fn not in COST_FUNCTIONS:
            raise ValueError(f"unknown cost_fn {self.cost_fn!r}")
        if len(self.shape) != 3:
            raise ValueError("shape must be (C, H, W)")
        if self.shape[0] != LATENT_CHANNELS:
            raise ValueError(f"predictor works on {LATENT_CHANNELS}-channel latents")

    def public_info(self, step_seed: int) -> dict:
        """The subset a server may see: no prompt, embed seed, or root seed."""
        return {
            "num_steps": self.num_steps,
            "eta": self.eta,
            "shape": list(self.shape),
            "model_seed": self.model_seed,
            "num_train_steps": self.num_train_steps,
            "backend": self.backend,
            "step_seed": step_seed,
            "he": {
                "ring_degree": self.params.ring_degree,
                "modulus_chain": list(self.params.modulus_chain),
                "scale": self.params.scale,
                "error_stddev": self.params.error_stddev,
            },
        }


@dataclass
class IterationStats:
    index: int
    sparsity: float
    encrypt_time: float
    denoise_time: float
    forward_time: float
    bytes_up: int
    bytes_down: int
    reencrypted: bool = False
    forced: bool = False


@dataclass
class RunReport:
    config: dict
    iterations: list[IterationStats] = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    message_counts: dict = field(default_factory=dict)
    scheduled_reencryptions: int = 0
    forced_reencryptions: int = 0
    client_draws: dict = field(default_factory=dict)
    server_stats: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def finalize(self) -> "RunReport":
        keys = ("sparsity", "encrypt_time", "denoise_time", "forward_time", "bytes_up", "bytes_down")
        self.totals = {k: sum(getattr(it, k) for it in self.iterations) for k in keys}
        return self

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "iterations": [asdict(it) for it in self.iterations],
            "totals": self.totals,
            "message_counts": self.message_counts,
            "scheduled_reencryptions": self.scheduled_reencryptions,
            "forced_reencryptions": self.forced_reencryptions,
            "client_draws": self.client_draws,
            "server_stats": self.server_stats,
            "wall_time": self.wall_time,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


class SessionError(ProtocolError):
    """Session died mid-flight; carries whatever report was assembled."""

    def __init__(self, message: str, report: RunReport):
        super().__init__(message)
        self.report = report


_REENC = b"REENC"
_BYE = b"BYE"


class ClientRole:
    """Drives the session; the only party holding keys and the prompt."""

    def __init__(self, config: SessionConfig, streams: SessionStreams | None = None):
        self.config = config
        self.backend = make_backend(config.backend, config.params)
        self.streams = streams or SessionStreams.from_seed(config.seed)
        self.keys = self.backend.keygen(derive_stream_seed(config.seed, "keygen"))
        self.client_net = ToyPredictor.from_seed(config.model_seed).client
        self.cond = embed_prompt(config.prompt, config.embed_seed)
        self.schedule = make_schedule(config.num_steps, config.eta, config.num_train_steps)
        self.cost = COST_FUNCTIONS[config.cost_fn]

    def _expect(self, channel, kind: MessageKind) -> Message:
        msg = channel.recv()
        if msg.kind != kind:
            raise ProtocolError(f"expected {kind.name}, got {msg.kind.name}")
        return msg

    def _encrypt_upload(self, x: np.ndarray) -> tuple[Message, float, float]:
        start = time.perf_counter()
        removal = remove_points_fast(x, self.cost(x), self.config.threshold)
        pair = split(x, removal)
        enc = encrypt_coo(to_coo(pair.y), self.keys.public_key, self.backend, self.streams.he)
        payload = pack_sections(
            pack_json({"count": enc.count}),
            serialize_enc_coo(enc),
            pack_array(pair.z),
        )
        sparsity = removal.removed_indices.size / x.size
        return Message(MessageKind.ENC_IMAGE, payload), time.perf_counter() - start, sparsity

    def _parse_step_reply(self, msg: Message):
        header_blob, enc_blob, z_blob = unpack_sections(msg.payload)
        try:
            _, forward_s, denoise_s = struct.unpack("<Idd", header_blob)
        except struct.error as exc:
            raise ProtocolError(f"bad step header: {exc}") from exc
        y_enc = deserialize_enc_coo(enc_blob, self.config.params)
        z = unpack_array(z_blob)
        return {"forward_s": forward_s, "denoise_s": denoise_s}, y_enc, z

    def drive(self, channel) -> tuple[LatentImage, RunReport]:
        cfg = self.config
        report = RunReport(
            config={
                "prompt_sha256": hashlib.sha256(cfg.prompt.encode()).hexdigest()[:16],
                "num_steps": cfg.num_steps,
                "eta": cfg.eta,
                "seed": cfg.seed,
                "threshold": cfg.threshold,
                "reencrypt_every": cfg.reencrypt_every,
                "backend": cfg.backend,
                "shape": list(cfg.shape),
                "cost_fn": cfg.cost_fn,
                "ring_degree": cfg.params.ring_degree,
            }
        )
        counts = {"cond_up": 0, "activation_up": 0, "enc_image_up": 0, "enc_image_down": 0}
        start = time.perf_counter()
        try:
            channel.send(
                Message(
                    MessageKind.PLAIN_SCHEDULE_INFO,
                    pack_json(cfg.public_info(self.streams.step_seed)),
                )
            )
            self._expect(channel, MessageKind.ACK)
            channel.send(Message(MessageKind.COND_TENSOR, pack_array(self.cond)))
            counts["cond_up"] += 1
            self._expect(channel, MessageKind.ACK)

            x = self.streams.init.normal(cfg.shape)
            sparsity = 0.0
            for i, (t, _) in enumerate(self.schedule):
                up0, down0 = channel.bytes_sent, channel.bytes_received
                fwd0 = time.perf_counter()
                act = client_forward(x, t, self.client_net)
                client_fwd = time.perf_counter() - fwd0

                enc_time = 0.0
                scheduled = i % cfg.reencrypt_every == 0
                forced = False
                if scheduled:
                    upload, enc_time, sparsity = self._encrypt_upload(x)
                    channel.send(upload)
                    counts["enc_image_up"] += 1
                    report.scheduled_reencryptions += 1
                channel.send(Message(MessageKind.ACTIVATION, pack_array(act)))
                counts["activation_up"] += 1

                reply = channel.recv()
                if reply.kind == MessageKind.ACK and reply.payload == _REENC:
                    forced = True
                    upload, extra, sparsity = self._encrypt_upload(x)
                    enc_time += extra
                    channel.send(upload)
                    counts["enc_image_up"] += 1
                    report.forced_reencryptions += 1
                    reply = channel.recv()
                if reply.kind != MessageKind.ENC_IMAGE:
                    raise ProtocolError(f"expected ENC_IMAGE, got {reply.kind.name}")
                counts["enc_image_down"] += 1
                header, y_enc, z = self._parse_step_reply(reply)

                dec0 = time.perf_counter()
                y = decrypt_coo(y_enc, self.keys.secret_key, self.backend)
                x = merge(y, z)
                enc_time += time.perf_counter() - dec0

                report.iterations.append(
                    IterationStats(
                        index=i,
                        sparsity=sparsity,
                        encrypt_time=enc_time,
                        denoise_time=header["denoise_s"],
                        forward_time=client_fwd + header["forward_s"],
                        bytes_up=channel.bytes_sent - up0,
                        bytes_down=channel.bytes_received - down0,
                        reencrypted=scheduled or forced,
                        forced=forced,
                    )
                )

            channel.send(Message(MessageKind.ACK, _BYE))
            stats = self._expect(channel, MessageKind.ACK)
            report.server_stats = unpack_json(stats.payload)
        except ProtocolError as exc:
            report.message_counts = counts
            report.wall_time = time.perf_counter() - start
            raise SessionError(str(exc), report.finalize()) from exc

        report.message_counts = counts
        report.client_draws = {"init": self.streams.init.draws, "step": self.streams.step.draws}
        report.wall_time = time.perf_counter() - start
        return LatentImage(data=x, step_index=cfg.num_steps), report.finalize()


class ServerRole:
    """Handles one session; never receives key material or raw latents."""

    def __init__(self):
        self.done = False
        self._backend = None
        self._schedule = None
        self._net = None
        self._cond = None
        self._shape = None
        self._noise_rng: CountingRng | None = None
        self._y = None
        self._z = None
        self._iter = 0
        self._pending_act = None
        self._cached = None  # (model output, noise) survives a re-encryption round trip
        self._forward_total = 0.0
        self._denoise_total = 0.0

    def handle(self, msg: Message) -> list[Message]:
        if msg.kind == MessageKind.PLAIN_SCHEDULE_INFO:
            return self._on_config(unpack_json(msg.payload))
        if msg.kind == MessageKind.COND_TENSOR:
            if self._cond is not None:
                raise ProtocolError("conditioning tensor arrived twice")
            self._cond = unpack_array(msg.payload)
            return [Message(MessageKind.ACK)]
        if msg.kind == MessageKind.ENC_IMAGE:
            self._on_enc_image(msg.payload)
            if self._pending_act is not None:
                return self._try_step()
            return []
        if msg.kind == MessageKind.ACTIVATION:
            if self._cond is None or self._backend is None:
                raise ProtocolError("activation before session setup")
            if self._y is None:
                raise ProtocolError("activation before any encrypted image upload")
            self._pending_act = unpack_array(msg.payload)
            return self._try_step()
        if msg.kind == MessageKind.ACK and msg.payload == _BYE:
            self.done = True
            stats = {
                "step_draws": self._noise_rng.draws if self._noise_rng else 0,
                "iterations": self._iter,
                "forward_s": self._forward_total,
                "denoise_s": self._denoise_total,
            }
            return [Message(MessageKind.ACK, pack_json(stats))]
        raise ProtocolError(f"unexpected message {msg.kind.name}")

    def _on_config(self, info: dict) -> list[Message]:
        he = info["he"]
        params = HeParams(
            ring_degree=he["ring_degree"],
            modulus_chain=tuple(he["modulus_chain"]),
            scale=he["scale"],
            error_stddev=he["error_stddev"],
        )
        self._backend = make_backend(info["backend"], params)
        self._schedule = make_schedule(
            info["num_steps"], info["eta"], info["num_train_steps"]
        )
        self._net = ToyPredictor.from_seed(info["model_seed"]).server
        self._shape = tuple(info["shape"])
        self._noise_rng = CountingRng(info["step_seed"])
        return [Message(MessageKind.ACK)]

    def _on_enc_image(self, payload: bytes) -> None:
        _, enc_blob, z_blob = unpack_sections(payload)
        self._y = deserialize_enc_coo(enc_blob, self._backend.params)
        self._z = unpack_array(z_blob)
        if self._y.shape != self._shape or self._z.shape != self._shape:
            raise ProtocolError("uploaded image shape does not match the session")

    def _try_step(self) -> list[Message]:
        t = int(self._schedule.timesteps[self._iter])
        coeffs = self._schedule.coefficients[self._iter]
        if self._cached is None:
            fwd0 = time.perf_counter()
            e = server_forward(self._pending_act, self._cond, t, self._net)
            fwd_s = time.perf_counter() - fwd0
            self._forward_total += fwd_s
            noise = self._noise_rng.normal(self._shape)
            self._cached = (e, noise, fwd_s)
        e, noise, fwd_s = self._cached
        factor, add_part = denoise_factors(e, coeffs, noise)
        den0 = time.perf_counter()
        try:
            y_next, z_next = denoise_encrypted(self._y, self._z, factor, add_part, self._backend)
        except DepthError:
            return [Message(MessageKind.ACK, _REENC)]
        denoise_s = time.perf_counter() - den0
        self._denoise_total += denoise_s
        self._y, self._z = y_next, z_next
        self._iter += 1
        self._pending_act = None
        self._cached = None
        # fixed-width header keeps frame sizes independent of timing digits
        header = struct.pack("<Idd", self._iter, fwd_s, denoise_s)
        payload = pack_sections(header, serialize_enc_coo(y_next), pack_array(z_next))
        return [Message(MessageKind.ENC_IMAGE, payload)]
