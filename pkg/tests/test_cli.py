import json

import numpy as np
import pytest

from encdiff.cli import EXIT_CONFIG, EXIT_OK, main, parse_chain_bits, parse_size
from encdiff.cli import ConfigError


def test_parse_size():
    assert parse_size("4x32x32") == (4, 32, 32)
    assert parse_size("4X8X16") == (4, 8, 16)
    with pytest.raises(ConfigError):
        parse_size("4x32")
    with pytest.raises(ConfigError):
        parse_size("axbxc")


def test_parse_chain_bits():
    assert parse_chain_bits("31,26,31") == (31, 26, 31)
    with pytest.raises(ConfigError):
        parse_chain_bits("31,abc")


def test_keygen_writes_files(tmp_path):
    code = main(["keygen", "--out", str(tmp_path / "keys"), "--ring-degree", "1024"])
    assert code == EXIT_OK
    for name in ("params.txt", "secret.key", "public.key"):
        assert (tmp_path / "keys" / name).exists()


def test_sample_writes_latent_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(
        [
            "sample",
            "--steps", "2",
            "--size", "4x8x8",
            "--seed", "3",
            "--backend", "mock",
            "--ring-degree", "1024",
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK
    latent = np.fromfile(out / "latent.f32", dtype=np.float32)
    assert latent.size == 4 * 8 * 8
    report = json.loads((out / "report.json").read_text())
    assert report["message_counts"]["activation_up"] == 2
    assert "wrote latent.f32" in capsys.readouterr().out


def test_sample_compare_plain_mock_is_exact(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(
        [
            "sample",
            "--steps", "3",
            "--size", "4x8x8",
            "--backend", "mock",
            "--ring-degree", "1024",
            "--out", str(out),
            "--compare-plain",
        ]
    )
    assert code == EXIT_OK
    private = np.fromfile(out / "latent.f32", dtype=np.float32)
    plain = np.fromfile(out / "latent_plain.f32", dtype=np.float32)
    assert np.array_equal(private, plain)
    report = json.loads((out / "report.json").read_text())
    assert report["server_stats"]["fidelity_vs_plain"]["mse"] == 0.0


def test_metrics_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 8, 8)).astype(np.float32)
    b = (a + 0.01).astype(np.float32)
    pa, pb = tmp_path / "a.f32", tmp_path / "b.f32"
    a.tofile(pa)
    b.tofile(pb)
    code = main(["metrics", str(pa), str(pb), "--shape", "4x8x8"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "cosine" in out and "psnr_db" in out


def test_metrics_shape_mismatch_is_config_error(tmp_path, capsys):
    path = tmp_path / "a.f32"
    np.zeros(10, dtype=np.float32).tofile(path)
    code = main(["metrics", str(path), str(path), "--shape", "4x8x8"])
    assert code == EXIT_CONFIG


def test_bad_size_is_config_error(tmp_path):
    code = main(["sample", "--size", "banana", "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG


def test_bad_threshold_is_config_error(tmp_path):
    code = main(
        ["sample", "--threshold", "2.0", "--size", "4x8x8", "--out", str(tmp_path / "x")]
    )
    assert code == EXIT_CONFIG


def test_sweep_command(tmp_path, capsys):
    code = main(
        [
            "sweep",
            "--thresholds", "0.01,0.1",
            "--size", "4x8x8",
            "--steps", "2",
            "--latents", "1",
            "--ring-degree", "1024",
            "--out", str(tmp_path / "sweepdir"),
        ]
    )
    assert code == EXIT_OK
    text = (tmp_path / "sweepdir" / "sweep.csv").read_text()
    assert text.startswith("threshold,")
    assert len(text.strip().splitlines()) == 3


def test_bench_command(tmp_path, capsys):
    code = main(
        [
            "bench",
            "--size", "4x4x4",
            "--threshold", "0.1",
            "--cost-fn", "uniform",
            "--out", str(tmp_path / "benchdir"),
        ]
    )
    assert code == EXIT_OK
    assert (tmp_path / "benchdir" / "bench.csv").exists()
    assert "enc/sparse" in capsys.readouterr().out
