import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from encdiff.distortion import remove_points_fast, split, uniform_cost
from encdiff.he import MockBackend, OpsProfile
from encdiff.sparse_enc import (
    CooTensor,
    decrypt_coo,
    deserialize_enc_coo,
    encrypt_coo,
    make_coo,
    merge,
    partial_add,
    partial_mul,
    rescale_coo,
    serialize_enc_coo,
    to_coo,
    to_dense,
)


@pytest.fixture(scope="module")
def mock_keys(mock_backend):
    return mock_backend.keygen(0)


# ------------------------------------------------------------- coo basics


def test_all_zero_dense_gives_empty_coo():
    c = to_coo(np.zeros((2, 3, 4)))
    assert c.nnz == 0
    assert not to_dense(c).any()


def test_round_trip_random_sparse(rng):
    x = rng.normal(size=(3, 8, 8))
    x[rng.random(x.shape) < 0.6] = 0.0
    assert np.array_equal(to_dense(to_coo(x)), x)


def test_coo_counts_match_split(rng):
    x = rng.normal(size=(2, 16, 16))
    res = remove_points_fast(x, uniform_cost(x), 0.05)
    pair = split(x, res)
    c = to_coo(pair.y)
    assert c.nnz == np.count_nonzero(x) - res.removed_indices.size


def test_coo_validation():
    with pytest.raises(ValueError):
        CooTensor(shape=(2, 2), indices=np.array([1, 1]), values=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        CooTensor(shape=(2, 2), indices=np.array([5]), values=np.array([1.0]))
    with pytest.raises(ValueError):
        CooTensor(shape=(2, 2), indices=np.array([0]), values=np.array([np.inf]))


def test_make_coo_sorts_and_drops_zeros():
    c = make_coo((2, 2), [3, 0, 1], [5.0, 0.0, 2.0])
    assert c.indices.tolist() == [1, 3]
    assert c.values.tolist() == [2.0, 5.0]


# ------------------------------------------------------------- packing


def test_three_values_one_ciphertext(default_backend, default_keys, rng):
    c = make_coo((1, 2, 3), [0, 2, 4], [1.0, -2.0, 3.0])
    e = encrypt_coo(c, default_keys.public_key, default_backend, rng)
    assert len(e.packed) == 1
    back = decrypt_coo(e, default_keys.secret_key, default_backend)
    assert np.array_equal(back.indices, c.indices)
    assert np.max(np.abs(back.values - c.values)) <= default_backend.error_bound()


def test_packing_5000_values_two_ciphertexts(default_params):
    backend = MockBackend(default_params)  # slot_count 4096
    keys = backend.keygen(0)
    vals = np.arange(1, 5001, dtype=np.float64)
    c = make_coo((1, 1, 10000), np.arange(5000) * 2, vals)
    e = encrypt_coo(c, keys.public_key, backend)
    assert len(e.packed) == 2
    assert e.count == 5000
    # second ciphertext holds 904 values, rest of the slots padded with zeros
    tail = backend.decode(backend.decrypt(keys.secret_key, e.packed[1]))
    assert np.count_nonzero(tail) == 904
    back = decrypt_coo(e, keys.secret_key, backend)
    assert np.array_equal(back.values, vals)


def test_empty_coo_encrypts_to_zero_ciphertexts(mock_backend, mock_keys):
    c = to_coo(np.zeros((1, 2, 2)))
    e = encrypt_coo(c, mock_keys.public_key, mock_backend)
    assert len(e.packed) == 0
    assert decrypt_coo(e, mock_keys.secret_key, mock_backend).nnz == 0


def test_packing_count_formula(mock_backend, mock_keys, rng):
    slots = mock_backend.slot_count
    for nnz in (1, slots, slots + 1, 3 * slots - 7):
        vals = rng.normal(size=nnz)
        vals[vals == 0] = 1.0
        c = make_coo((1, 1, 4 * slots), np.arange(nnz), vals)
        e = encrypt_coo(c, mock_keys.public_key, mock_backend)
        assert len(e.packed) == -(-nnz // slots)


# ------------------------------------------------------------- partial ops


def _enc_random(backend, keys, rng, shape=(2, 8, 8), density=0.4):
    x = rng.normal(size=shape)
    x[rng.random(shape) > density] = 0.0
    c = to_coo(x)
    return x, c, encrypt_coo(c, keys.public_key, backend, rng)


def test_partial_mul_by_ones(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    out = partial_mul(e, np.ones(x.shape), small_backend)
    back = decrypt_coo(rescale_coo(out, small_backend), small_keys.secret_key, small_backend)
    bound = small_backend.error_bound(OpsProfile(num_pt_muls=1, max_pt_magnitude=1.0))
    assert np.max(np.abs(back.values - c.values)) <= bound


def test_partial_mul_scalar_matches_plain(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    out = partial_mul(e, 0.75, small_backend)
    back = decrypt_coo(rescale_coo(out, small_backend), small_keys.secret_key, small_backend)
    bound = small_backend.error_bound(OpsProfile(num_pt_muls=1, max_pt_magnitude=1.0))
    assert np.max(np.abs(back.values - 0.75 * c.values)) <= bound


def test_partial_mul_zero_factor_at_held_index(mock_backend, mock_keys, rng):
    x, c, e = _enc_random(mock_backend, mock_keys, rng)
    factor = np.ones(x.shape)
    factor.ravel()[c.indices[0]] = 0.0
    out = partial_mul(e, factor, mock_backend)
    slots = mock_backend.decode(mock_backend.decrypt(mock_keys.secret_key, out.packed[0]))
    assert slots[0] == 0.0


def test_partial_mul_gathers_correctly(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    factor = rng.normal(size=x.shape)
    out = partial_mul(e, factor, small_backend)
    back = decrypt_coo(rescale_coo(out, small_backend), small_keys.secret_key, small_backend)
    want = c.values * factor.ravel()[c.indices]
    mag = float(np.max(np.abs(factor)))
    bound = small_backend.error_bound(OpsProfile(num_pt_muls=1, max_pt_magnitude=mag))
    assert np.max(np.abs(back.values - want)) <= bound


def test_partial_add_zeros_is_identity(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    out = partial_add(e, np.zeros(x.shape), small_backend)
    back = decrypt_coo(out, small_keys.secret_key, small_backend)
    bound = small_backend.error_bound(OpsProfile(num_adds=1))
    assert np.max(np.abs(back.values - c.values)) <= bound


def test_partial_add_inverse_cancels(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    addend = np.zeros(x.size)
    addend[c.indices] = -c.values
    out = partial_add(e, addend.reshape(x.shape), small_backend)
    slots = small_backend.decode(small_backend.decrypt(small_keys.secret_key, out.packed[0]))
    bound = small_backend.error_bound(OpsProfile(num_adds=1))
    assert np.max(np.abs(slots[: c.nnz])) <= bound


def test_partial_add_random_vs_gather_oracle(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    addend = rng.normal(size=x.shape)
    out = partial_add(e, addend, small_backend)
    back = decrypt_coo(out, small_keys.secret_key, small_backend)
    want = c.values + addend.ravel()[c.indices]
    keep = want != 0.0  # construction drops exact zeros
    bound = small_backend.error_bound(OpsProfile(num_adds=1))
    assert np.max(np.abs(back.values - want[keep])) <= bound


def test_ops_on_empty_tensor_are_noops(mock_backend, mock_keys):
    e = encrypt_coo(to_coo(np.zeros((1, 2, 2))), mock_keys.public_key, mock_backend)
    assert partial_mul(e, 2.0, mock_backend) is e
    assert partial_add(e, np.zeros((1, 2, 2)), mock_backend) is e
    assert rescale_coo(e, mock_backend) is e


# ------------------------------------------------------------- merge


def test_merge_empty_is_identity(rng):
    z = rng.normal(size=(2, 3, 3))
    y = to_coo(np.zeros_like(z))
    assert np.array_equal(merge(y, z), z)


def test_merge_disjoint_equals_sum(rng):
    x = rng.normal(size=(2, 4, 4))
    res = remove_points_fast(x, uniform_cost(x), 0.1)
    pair = split(x, res)
    y = to_coo(pair.y)
    assert np.array_equal(merge(y, pair.z), to_dense(y) + pair.z)


def test_merge_shape_mismatch():
    with pytest.raises(ValueError):
        merge(to_coo(np.ones((1, 2, 2))), np.zeros((2, 2, 2)))


def test_full_pipeline_merge_reconstructs(small_backend, small_keys, rng):
    x = rng.normal(size=(1, 8, 8))
    res = remove_points_fast(x, uniform_cost(x), 0.05)
    pair = split(x, res)
    e = encrypt_coo(to_coo(pair.y), small_keys.public_key, small_backend, rng)
    y_back = decrypt_coo(e, small_keys.secret_key, small_backend)
    out = merge(y_back, pair.z)
    assert np.max(np.abs(out - x)) <= small_backend.error_bound()


def test_full_pipeline_mock_is_exact(mock_backend, mock_keys, rng):
    x = rng.normal(size=(1, 8, 8))
    res = remove_points_fast(x, uniform_cost(x), 0.05)
    pair = split(x, res)
    e = encrypt_coo(to_coo(pair.y), mock_keys.public_key, mock_backend)
    out = merge(decrypt_coo(e, mock_keys.secret_key, mock_backend), pair.z)
    assert np.array_equal(out, x)


# ------------------------------------------------------------- hybrid oracle


def test_hybrid_affine_map_matches_dense_oracle(small_backend, small_keys, rng):
    x = rng.normal(size=(2, 8, 8))
    res = remove_points_fast(x, uniform_cost(x), 0.1)
    pair = split(x, res)
    factor = 0.9
    add_part = rng.normal(size=x.shape)
    e = encrypt_coo(to_coo(pair.y), small_keys.public_key, small_backend, rng)
    e = rescale_coo(partial_mul(e, factor, small_backend), small_backend)
    e = partial_add(e, add_part, small_backend)
    y_next = decrypt_coo(e, small_keys.secret_key, small_backend)
    z_next = factor * pair.z + add_part
    z_next.ravel()[to_coo(pair.y).indices] = 0.0
    got = merge(y_next, z_next)
    want = factor * x + add_part
    bound = small_backend.error_bound(OpsProfile(num_adds=1, num_pt_muls=1, max_pt_magnitude=1.0))
    assert np.max(np.abs(got - want)) <= bound


# ------------------------------------------------------------- wire


def test_enc_coo_serialization_round_trip(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng, shape=(2, 8, 8))
    blob = serialize_enc_coo(e)
    again = deserialize_enc_coo(blob, small_backend.params)
    assert again.shape == e.shape
    assert np.array_equal(again.indices, e.indices)
    assert again.count == e.count
    back = decrypt_coo(again, small_keys.secret_key, small_backend)
    assert np.max(np.abs(back.values - c.values)) <= small_backend.error_bound()


def test_enc_coo_serialization_truncation(small_backend, small_keys, rng):
    x, c, e = _enc_random(small_backend, small_keys, rng)
    blob = serialize_enc_coo(e)
    from encdiff.he import WireFormatError

    with pytest.raises(WireFormatError):
        deserialize_enc_coo(blob[:-3], small_backend.params)


@given(
    data=hnp.arrays(
        np.float64,
        st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
        elements=st.floats(-50, 50, allow_nan=False, width=64),
    )
)
@settings(max_examples=40, deadline=None)
def test_coo_round_trip_property(data):
    assert np.array_equal(to_dense(to_coo(data)), data)
