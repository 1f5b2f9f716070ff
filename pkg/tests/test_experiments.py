import csv
import io
import time

import numpy as np
import pytest

from encdiff.experiments import (
    BENCH_CSV_HEADER,
    SWEEP_CSV_HEADER,
    bench_denoise_once,
    bench_params,
    sweep_thresholds,
    sweep_to_csv,
)
from encdiff.he import CkksBackend, HeParams
from encdiff.sparse_enc import encrypt_coo, make_coo


@pytest.fixture(scope="module")
def quick_bench():
    return bench_denoise_once(shape=(4, 8, 8), threshold=0.1, seed=0, cost_fn="uniform")


def test_bench_orderings(quick_bench):
    # at 4x8x8 both hybrid variants fit one ciphertext, so only the coarse
    # ordering is meaningful here; the full config is gated in acceptance
    s = quick_bench.seconds
    assert s["plain"] < s["sparse"]
    assert s["plain"] < s["enc_opt"]
    assert max(s["sparse"], s["enc_opt"]) < s["enc"]


def test_bench_csv_reparses(quick_bench):
    text = quick_bench.to_csv()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["variant"] for r in rows] == ["plain", "enc", "enc_opt", "sparse"]
    for row in rows:
        recomputed = quick_bench.seconds[row["variant"]]
        assert float(row["seconds"]) == pytest.approx(recomputed, rel=1e-9)
    assert text.splitlines()[0] == BENCH_CSV_HEADER


def test_bench_text_mentions_ratios(quick_bench):
    text = quick_bench.to_text()
    assert "enc/sparse" in text and "enc/enc_opt" in text


def test_sweep_csv_reparses():
    rows = sweep_thresholds(
        [0.01, 0.1], shape=(4, 8, 8), steps=2, num_latents=1,
        params=HeParams.create(ring_degree=1024),
    )
    text = sweep_to_csv(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == SWEEP_CSV_HEADER
    assert len(parsed) == 2
    for raw, row in zip(parsed, rows):
        for key in SWEEP_CSV_HEADER.split(","):
            assert float(raw[key]) == pytest.approx(row[key], rel=1e-9)


def test_sweep_rejects_bad_threshold():
    with pytest.raises(ValueError):
        sweep_thresholds([0.5, 1.5], shape=(4, 8, 8), steps=2, num_latents=1)


def test_sweep_monotone_sparsity():
    rows = sweep_thresholds(
        [0.01, 0.05, 0.2, 0.5], shape=(4, 16, 16), steps=3, num_latents=2,
        params=HeParams.create(ring_degree=1024),
    )
    sparsities = [r["sparsity"] for r in rows]
    assert sparsities == sorted(sparsities)
    # residual similarity strictly grows: 0.5 reveals more than 0.01
    assert rows[-1]["cos_xz"] > rows[0]["cos_xz"]
    assert rows[-1]["threshold"] == 0.5


def test_encrypt_time_tracks_nnz_not_size():
    """Packing a few values beats encrypting the whole dense tensor."""
    params = HeParams.create(ring_degree=1024)
    backend = CkksBackend(params)
    keys = backend.keygen(0)
    rng = np.random.default_rng(0)
    size = 8 * params.slot_count
    sparse = make_coo((1, 1, size), np.arange(50), rng.normal(size=50))
    dense_vals = rng.normal(size=size)

    def encrypt_dense():
        for i in range(0, size, params.slot_count):
            backend.encrypt(
                keys.public_key,
                backend.encode(dense_vals[i : i + params.slot_count]),
                rng,
            )

    # warm caches, then time
    encrypt_coo(sparse, keys.public_key, backend, rng)
    encrypt_dense()
    t0 = time.perf_counter()
    encrypt_coo(sparse, keys.public_key, backend, rng)
    sparse_t = time.perf_counter() - t0
    t0 = time.perf_counter()
    encrypt_dense()
    dense_t = time.perf_counter() - t0
    assert sparse_t < dense_t


def test_bench_params_default_ring():
    assert bench_params().ring_degree == 512
