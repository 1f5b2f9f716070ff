import inspect

import numpy as np
import pytest

from encdiff.denoise import denoise_factors, make_schedule
from encdiff.he import HeParams
from encdiff.predictor import ToyPredictor, client_forward, embed_prompt, server_forward
from encdiff.roles import ServerRole, SessionConfig, SessionStreams
from encdiff.sampler import sample_plain, sample_private

SMALL = dict(shape=(4, 8, 8))


@pytest.fixture(scope="module")
def tiny_params():
    return HeParams.create(ring_degree=1024)


def test_single_step_matches_closed_form():
    prompt, seed = "harbor", 21
    out = sample_plain(prompt, 1, seed=seed, **SMALL)
    # recompute the only step by hand
    streams = SessionStreams.from_seed(seed)
    x = streams.init.normal((4, 8, 8))
    pred = ToyPredictor.from_seed(1316)
    cond = embed_prompt(prompt, 7907)
    sched = make_schedule(1, 0.0)
    (t,) = sched.timesteps.tolist()
    e = server_forward(client_forward(x, t, pred.client), cond, t, pred.server)
    noise = streams.step.normal((4, 8, 8))
    c = sched.coefficients[0]
    factor, add = denoise_factors(e, c, noise)
    assert np.array_equal(out.data, x * factor + add)
    assert out.step_index == 1


def test_same_seed_identical(tiny_params):
    a = sample_plain("harbor", 4, seed=9, **SMALL)
    b = sample_plain("harbor", 4, seed=9, **SMALL)
    assert np.array_equal(a.data, b.data)


def test_different_prompts_differ():
    a = sample_plain("harbor", 3, seed=9, **SMALL)
    b = sample_plain("mountain", 3, seed=9, **SMALL)
    assert not np.array_equal(a.data, b.data)


def test_different_seeds_differ():
    a = sample_plain("harbor", 3, seed=1, **SMALL)
    b = sample_plain("harbor", 3, seed=2, **SMALL)
    assert not np.array_equal(a.data, b.data)


def test_private_mock_bit_exact_over_configs(tiny_params):
    for steps, threshold, cadence in [(1, 0.0, 1), (4, 0.01, 1), (6, 0.05, 2), (5, 0.01, 100)]:
        plain = sample_plain("harbor", steps, seed=31, **SMALL)
        priv, report = sample_private(
            "harbor",
            steps,
            seed=31,
            threshold=threshold,
            reencrypt_every=cadence,
            backend="mock",
            params=tiny_params,
            **SMALL,
        )
        assert np.array_equal(priv.data, plain.data)
        assert report.message_counts["activation_up"] == steps


def test_private_ckks_close_to_plain(tiny_params):
    plain = sample_plain("harbor", 4, seed=2, **SMALL)
    priv, _ = sample_private(
        "harbor", 4, seed=2, threshold=0.01, backend="ckks", params=tiny_params, **SMALL
    )
    err = np.abs(priv.data - plain.data).max()
    scale = np.abs(plain.data).max()
    assert err <= 1e-3 * max(1.0, scale)


def test_threshold_zero_encrypts_everything(tiny_params):
    plain = sample_plain("harbor", 3, seed=4, **SMALL)
    priv, report = sample_private(
        "harbor", 3, seed=4, threshold=0.0, backend="ckks", params=tiny_params, **SMALL
    )
    assert all(it.sparsity == 0.0 for it in report.iterations)
    err = np.abs(priv.data - plain.data).max()
    assert err <= 1e-3 * max(1.0, np.abs(plain.data).max())


def test_draw_counts_match_between_pipelines(tiny_params):
    steps = 5
    plain_streams = SessionStreams.from_seed(17)
    sample_plain("harbor", steps, seed=17, streams=plain_streams, **SMALL)
    _, report = sample_private(
        "harbor", steps, seed=17, backend="mock", params=tiny_params, **SMALL
    )
    assert plain_streams.init.draws == report.client_draws["init"] == 1
    assert plain_streams.step.draws == report.server_stats["step_draws"] == steps


def test_eta_noise_draws_consistent(tiny_params):
    # noise is drawn every step regardless of eta so streams stay aligned
    streams0 = SessionStreams.from_seed(3)
    sample_plain("harbor", 4, eta=0.0, seed=3, streams=streams0, **SMALL)
    streams1 = SessionStreams.from_seed(3)
    sample_plain("harbor", 4, eta=0.8, seed=3, streams=streams1, **SMALL)
    assert streams0.step.draws == streams1.step.draws == 4


def test_eta_changes_output():
    a = sample_plain("harbor", 4, eta=0.0, seed=3, **SMALL)
    b = sample_plain("harbor", 4, eta=1.0, seed=3, **SMALL)
    assert not np.array_equal(a.data, b.data)


def test_config_validation(tiny_params):
    with pytest.raises(ValueError):
        SessionConfig(prompt="", num_steps=1)
    with pytest.raises(ValueError):
        SessionConfig(prompt="x", threshold=1.5)
    with pytest.raises(ValueError):
        SessionConfig(prompt="x", reencrypt_every=0)
    with pytest.raises(ValueError):
        SessionConfig(prompt="x", shape=(3, 8, 8))
    with pytest.raises(ValueError):
        SessionConfig(prompt="x", cost_fn="wow")


# --------------------------------------------------------- role separation


FORBIDDEN_SERVER_TOKENS = ("secret_key", "embed_seed", "prompt", "decrypt", "keygen")


def test_server_role_source_never_touches_client_secrets():
    source = inspect.getsource(ServerRole)
    for token in FORBIDDEN_SERVER_TOKENS:
        assert token not in source, f"server role references {token!r}"


def test_server_role_signatures_take_no_key_types():
    for name, method in inspect.getmembers(ServerRole, inspect.isfunction):
        sig = inspect.signature(method)
        for param in sig.parameters.values():
            annotation = str(param.annotation)
            assert "SecretKey" not in annotation
            assert "KeyPair" not in annotation


def test_public_config_excludes_secrets(tiny_params):
    cfg = SessionConfig(prompt="classified prompt", seed=1234, params=tiny_params)
    info = cfg.public_info(step_seed=42)
    flat = str(info)
    assert "classified" not in flat
    assert "embed" not in flat
    assert "prompt" not in flat
    assert 1234 not in info.values()
