import numpy as np
import pytest

import scalar_ref
from stsn.errors import NumericError
from stsn.gradcheck import check_module_gradients
from stsn.slot_attention import SlotAttention, encode_to_slots, init_slots, slot_attention_step
from stsn.encoder import Encoder
from stsn.tensor import Tensor, precision


def test_init_slots_shape_and_seed():
    sa = SlotAttention(32, 32, np.random.default_rng(0))
    a = init_slots(9, sa.mu, sa.log_sigma, np.random.default_rng(5))
    b = init_slots(9, sa.mu, sa.log_sigma, np.random.default_rng(5))
    assert a.shape == (9, 32)
    np.testing.assert_array_equal(a.data, b.data)


def test_tiny_sigma_collapses_to_mu():
    mu = Tensor(np.array([0.5, -1.0, 2.0]))
    log_sigma = Tensor(np.full(3, np.log(1e-9)))
    s = init_slots(4, mu, log_sigma, np.random.default_rng(0)).data
    np.testing.assert_allclose(s, np.broadcast_to(mu.data, (4, 3)), atol=1e-7)


def test_single_slot_update_is_mean_value():
    with precision(np.float64):
        sa = SlotAttention(3, 3, np.random.default_rng(1), iters=1)
        inputs = np.random.default_rng(2).standard_normal((5, 3))
        slot = np.random.default_rng(3).standard_normal((1, 3))
        _, attn = slot_attention_step(slot, inputs, sa)
        np.testing.assert_allclose(attn.data, 1.0)
        _, values = sa.project_inputs(inputs)
        expect = sa.gru(Tensor(slot), values.mean(axis=0, keepdims=True))
        expect = expect + sa.mlp2(sa.mlp1(sa.norm_mlp(expect)).relu())
        new, _ = slot_attention_step(slot, inputs, sa)
    np.testing.assert_allclose(new.data, expect.data, atol=1e-12)


def test_identical_slots_get_identical_updates():
    sa = SlotAttention(3, 4, np.random.default_rng(0))
    slot = np.random.default_rng(1).standard_normal(4)
    new, _ = slot_attention_step(np.stack([slot, slot]), np.random.default_rng(2).standard_normal((6, 3)), sa)
    np.testing.assert_array_equal(new.data[0], new.data[1])


def test_matches_scalar_reference():
    with precision(np.float64):
        sa = SlotAttention(3, 3, np.random.default_rng(7), iters=3)
        rng = np.random.default_rng(8)
        inputs = rng.standard_normal((4, 3))
        init = rng.standard_normal((2, 3))
        out = sa(inputs[None], 2, init=Tensor(init[None]))
    ref_slots, ref_attn = scalar_ref.slot_attention(sa, inputs.tolist(), init.tolist(), 3)
    np.testing.assert_allclose(out.slots.data[0], ref_slots, atol=1e-5)
    np.testing.assert_allclose(out.attn.data[0].T, ref_attn, atol=1e-5)


def test_attention_normalization():
    sa = SlotAttention(4, 6, np.random.default_rng(0))
    for seed in range(10):
        rng = np.random.default_rng(seed)
        out = sa(rng.standard_normal((2, 9, 4)), 5, rng)
        np.testing.assert_allclose(out.attn.data.sum(axis=1), 1.0, atol=1e-6)


def test_permuting_initial_slots_permutes_result():
    with precision(np.float64):
        sa = SlotAttention(3, 4, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        inputs = rng.standard_normal((1, 7, 3))
        init = rng.standard_normal((1, 3, 4))
        perm = [2, 0, 1]
        a = sa(inputs, 3, init=Tensor(init))
        b = sa(inputs, 3, init=Tensor(init[:, perm]))
    np.testing.assert_allclose(b.slots.data, a.slots.data[:, perm], atol=1e-6)
    np.testing.assert_allclose(b.attn.data, a.attn.data[:, perm], atol=1e-6)


def test_zero_iterations_return_init():
    sa = SlotAttention(3, 4, np.random.default_rng(0), iters=0)
    enc = Encoder(8, np.random.default_rng(1), channels=3)
    img = np.random.default_rng(2).random((8, 8))
    out = encode_to_slots(img, enc, sa, 3, np.random.default_rng(9))
    expect = init_slots(3, sa.mu, sa.log_sigma, np.random.default_rng(9))
    np.testing.assert_array_equal(out.slots.data, expect.data)


def test_encode_to_slots_deterministic():
    sa = SlotAttention(3, 4, np.random.default_rng(0))
    enc = Encoder(8, np.random.default_rng(1), channels=3)
    img = np.random.default_rng(2).random((8, 8))
    a = encode_to_slots(img, enc, sa, 3, np.random.default_rng(4))
    b = encode_to_slots(img, enc, sa, 3, np.random.default_rng(4))
    assert a.slots.shape == (3, 4) and a.attn.shape == (3, 64)
    np.testing.assert_array_equal(a.slots.data, b.slots.data)


def test_non_finite_logits_raise():
    sa = SlotAttention(3, 4, np.random.default_rng(0))
    with pytest.raises(NumericError):
        slot_attention_step(np.full((2, 4), np.nan), np.ones((5, 3)), sa)


def test_gradients_reach_mu_sigma_and_projections():
    # float64 central differences are noise-limited on the near-zero norm_slots.shift gradient
    with precision(np.longdouble):
        sa = SlotAttention(3, 4, np.random.default_rng(3))
        inputs = np.random.default_rng(4).standard_normal((1, 6, 3))
        w = np.random.default_rng(5).standard_normal((1, 2, 4))

        def loss():
            return (sa(inputs, 2, np.random.default_rng(6)).slots * w).sum()

        report = check_module_gradients(loss, sa.named_parameters(), 1e-6)
    assert max(report.values()) < 1e-3
    assert {"mu", "log_sigma", "q.weight", "k.weight", "v.weight"} <= set(report)
