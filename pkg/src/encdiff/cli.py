"""Command-line entry points: keygen, sample, bench, sweep, metrics.

Exit codes: 0 success, 2 configuration error, 3 protocol error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .experiments import bench_denoise_once, sweep_thresholds, sweep_to_csv
from .he import (
    HeError,
    HeParams,
    make_backend,
    serialize_public_key,
    serialize_secret_key,
)
from .metrics import metric_report
from .protocol import ProtocolError
from .roles import DEFAULT_EMBED_SEED, SessionConfig
from .sampler import sample_plain
from .session import TRANSPORTS, run_session

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3

DEFAULT_PROMPT = "a quiet harbor at dawn"


class ConfigError(ValueError):
    pass


def parse_size(text: str) -> tuple[int, int, int]:
    try:
        c, h, w = (int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--size expects CxHxW, got {text!r}") from exc
    return c, h, w


def parse_chain_bits(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(b) for b in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--chain-bits expects comma-separated ints, got {text!r}") from exc


def build_params(args) -> HeParams:
    return HeParams.create(
        ring_degree=args.ring_degree,
        chain_bits=parse_chain_bits(args.chain_bits),
        scale=2.0**args.scale_bits,
        error_stddev=args.sigma,
    )


def _add_he_flags(sub, ring_default=8192):
    sub.add_argument("--ring-degree", type=int, default=ring_default)
    sub.add_argument("--chain-bits", default="31,26,26,31")
    sub.add_argument("--scale-bits", type=int, default=30)
    sub.add_argument("--sigma", type=float, default=3.2)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_keygen(args) -> int:
    params = build_params(args)
    backend = make_backend(args.backend, params)
    keys = backend.keygen(args.seed)
    out = _out_dir(args)
    (out / "params.txt").write_text(params.to_text())
    (out / "secret.key").write_bytes(serialize_secret_key(keys.secret_key))
    (out / "public.key").write_bytes(serialize_public_key(keys.public_key))
    print(f"wrote params.txt, secret.key, public.key to {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    params = build_params(args)
    config = SessionConfig(
        prompt=args.prompt,
        num_steps=args.steps,
        eta=args.eta,
        seed=args.seed,
        threshold=args.threshold,
        reencrypt_every=args.reencrypt_every,
        backend=args.backend,
        shape=parse_size(args.size),
        embed_seed=args.embed_seed,
        cost_fn=args.cost_fn,
        params=params,
    )
    latent, report = run_session(args.transport, config)
    out = _out_dir(args)
    latent.data.astype(np.float32).tofile(out / "latent.f32")
    if args.compare_plain:
        plain = sample_plain(
            args.prompt,
            args.steps,
            eta=args.eta,
            seed=args.seed,
            shape=config.shape,
            embed_seed=args.embed_seed,
        )
        plain.data.astype(np.float32).tofile(out / "latent_plain.f32")
        fidelity = metric_report(plain.data, latent.data)
        report.server_stats["fidelity_vs_plain"] = {
            "cosine": fidelity.cosine,
            "mse": fidelity.mse,
            "psnr_db": fidelity.psnr_db,
            "ssim": fidelity.ssim,
            "kl": fidelity.kl,
        }
        print("fidelity vs plaintext run:")
        print(fidelity.as_text())
    (out / "report.json").write_text(report.to_json())
    totals = report.totals
    print(
        f"{args.steps} steps on {args.size} ({args.backend}, {args.transport}); "
        f"mean sparsity {totals['sparsity'] / max(1, args.steps):.3f}, "
        f"up {totals['bytes_up']} B, down {totals['bytes_down']} B"
    )
    print(f"wrote latent.f32 and report.json to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    params = build_params(args)
    result = bench_denoise_once(
        shape=parse_size(args.size),
        threshold=args.threshold,
        params=params,
        seed=args.seed,
        repeats=args.repeats,
        cost_fn=args.cost_fn,
    )
    print(result.to_text())
    if args.out:
        out = _out_dir(args)
        (out / "bench.csv").write_text(result.to_csv())
        print(f"wrote bench.csv to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        thresholds = [float(t) for t in args.thresholds.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--thresholds expects comma-separated floats: {exc}") from exc
    params = build_params(args)
    rows = sweep_thresholds(
        thresholds,
        shape=parse_size(args.size),
        steps=args.steps,
        num_latents=args.latents,
        params=params,
        cost_fn=args.cost_fn,
        prompt=args.prompt,
    )
    csv_text = sweep_to_csv(rows)
    print(csv_text, end="")
    if args.out:
        out = _out_dir(args)
        (out / "sweep.csv").write_text(csv_text)
        print(f"wrote sweep.csv to {out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    shape = parse_size(args.shape)
    tensors = []
    for path in (args.a, args.b):
        raw = np.fromfile(path, dtype=np.float32)
        if raw.size != np.prod(shape):
            raise ConfigError(
                f"{path} holds {raw.size} floats, shape {shape} needs {int(np.prod(shape))}"
            )
        tensors.append(raw.astype(np.float64).reshape(shape))
    report = metric_report(tensors[0], tensors[1], data_range=args.data_range)
    print(report.as_text())
    print(report.CSV_HEADER)
    print(report.as_csv_row())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encdiff",
        description="Partially encrypted latent denoising: keys, sampling sessions, benchmarks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    keygen = subs.add_parser("keygen", help="generate and store a key pair")
    keygen.add_argument("--out", required=True)
    keygen.add_argument("--seed", type=int, default=1)
    keygen.add_argument("--backend", choices=("ckks", "mock"), default="ckks")
    _add_he_flags(keygen)
    keygen.set_defaults(func=cmd_keygen)

    sample = subs.add_parser("sample", help="run a private sampling session")
    sample.add_argument("--prompt", default=DEFAULT_PROMPT)
    sample.add_argument("--steps", type=int, default=10)
    sample.add_argument("--size", default="4x32x32", help="CxHxW, e.g. 4x64x64")
    sample.add_argument("--threshold", type=float, default=0.01)
    sample.add_argument("--eta", type=float, default=0.0)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--embed-seed", type=int, default=DEFAULT_EMBED_SEED)
    sample.add_argument("--backend", choices=("ckks", "mock"), default="ckks")
    sample.add_argument("--reencrypt-every", type=int, default=1)
    sample.add_argument("--cost-fn", choices=("hill", "uniform"), default="hill")
    sample.add_argument("--transport", choices=TRANSPORTS, default="in_process")
    sample.add_argument("--out", required=True)
    sample.add_argument("--compare-plain", action="store_true")
    _add_he_flags(sample)
    sample.set_defaults(func=cmd_sample)

    bench = subs.add_parser("bench", help="time the four denoise-step variants")
    bench.add_argument("--size", default="4x32x32")
    bench.add_argument("--threshold", type=float, default=0.05)
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--cost-fn", choices=("hill", "uniform"), default="hill")
    bench.add_argument("--out", default=None)
    _add_he_flags(bench, ring_default=512)
    bench.set_defaults(func=cmd_bench)

    sweep = subs.add_parser("sweep", help="leakage indicators across thresholds")
    sweep.add_argument("--thresholds", default="0.001,0.01,0.05,0.1,0.3")
    sweep.add_argument("--size", default="4x32x32")
    sweep.add_argument("--steps", type=int, default=5)
    sweep.add_argument("--latents", type=int, default=3)
    sweep.add_argument("--prompt", default=DEFAULT_PROMPT)
    sweep.add_argument("--cost-fn", choices=("hill", "uniform"), default="hill")
    sweep.add_argument("--out", default=None)
    _add_he_flags(sweep, ring_default=1024)
    sweep.set_defaults(func=cmd_sweep)

    metrics = subs.add_parser("metrics", help="compare two flat f32 tensor files")
    metrics.add_argument("a")
    metrics.add_argument("b")
    metrics.add_argument("--shape", required=True, help="CxHxW of both tensors")
    metrics.add_argument("--data-range", type=float, default=None)
    metrics.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
