import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidmem.appearance import (
    AppearanceConfig,
    AppearanceEncoder,
    attend,
    encode_global,
    encode_local,
    encode_multilevel,
    encode_temporal,
    segment_scores,
)
from vidmem.checks import check_attention
from vidmem.errors import ConfigError, DimensionError
from vidmem.numerics import ParamSet, Tensor, gru

SMALL = AppearanceConfig(hidden=3, channels=2, segments=4, common_dim=5)  # 6 + 6 + 8 = 20


def test_global_examples():
    np.testing.assert_array_equal(encode_global([[1.0, 2.0], [3.0, 4.0]]).numpy(), [2.0, 3.0])
    np.testing.assert_array_equal(encode_global(np.full((4, 3), 0.7)).numpy(), [0.7] * 3)
    np.testing.assert_array_equal(encode_global([[5.0, -1.0]]).numpy(), [5.0, -1.0])


def test_global_ignores_frame_order_but_temporal_does_not():
    rng = np.random.default_rng(0)
    frames = rng.standard_normal((5, 4))
    perm = [3, 0, 4, 1, 2]
    np.testing.assert_allclose(encode_global(frames).numpy(), encode_global(frames[perm]).numpy(), atol=1e-15)
    p = ParamSet(0)
    a = encode_temporal(frames, 3, p).numpy()
    b = encode_temporal(frames[perm], 3, p).numpy()
    assert not np.allclose(a, b)


@pytest.mark.parametrize("n", [1, 4, 9])
def test_temporal_width(n):
    assert encode_temporal(np.ones((n, 4)), 5, ParamSet()).shape == (10,)


def test_temporal_single_frame_is_its_state():
    p = ParamSet(2)
    frame = np.random.default_rng(2).standard_normal((1, 4))
    pooled, states = encode_temporal(frame, 3, p, return_states=True)
    np.testing.assert_array_equal(pooled.numpy(), states.numpy()[0])
    fwd = gru(Tensor(frame), 3, p, "temporal.bigru.fwd").numpy()[0]
    np.testing.assert_array_equal(pooled.numpy()[:3], fwd)


def _zero_local_params(d_in, channels, bias=0.0):
    p = ParamSet()
    for k in (2, 3, 4, 5):
        p.add(f"local.conv{k}.weight", np.random.default_rng(k).standard_normal((k * d_in, channels)))
        p.add(f"local.conv{k}.bias", np.full(channels, bias))
    return p


def test_local_zero_input_zero_output():
    out = encode_local(Tensor(np.zeros((6, 4))), 3, _zero_local_params(4, 3))
    np.testing.assert_array_equal(out.numpy(), np.zeros(12))


def test_local_width_and_relu_kill():
    p = _zero_local_params(4, 3)
    p.set("local.conv2.bias", np.full(3, -1e3))  # every k=2 pre-activation is negative
    out = encode_local(Tensor(np.random.default_rng(0).uniform(-1, 1, (6, 4))), 3, p).numpy()
    assert out.shape == (12,)
    np.testing.assert_array_equal(out[:3], np.zeros(3))
    assert out[3:].any()


def test_multilevel_dims_desk_scale():
    cfg = AppearanceConfig(hidden=18, channels=9, segments=9, common_dim=16)
    assert cfg.multilevel_dim(18) == 18 + 36 + 36 == 90
    assert cfg.segment_dim(18) == 10


def test_multilevel_dims_full_scale():
    cfg = AppearanceConfig()
    assert cfg.multilevel_dim(512) == 512 + 2048 + 2048 == 4608
    assert cfg.segment_dim(512) == 512


def test_non_divisible_width_is_config_error():
    with pytest.raises(ConfigError, match="not divisible"):
        AppearanceConfig(hidden=3, channels=2, segments=7).segment_dim(6)


def test_multilevel_layout():
    frames = np.random.default_rng(1).standard_normal((4, 6))
    ml = encode_multilevel(frames, ParamSet(1), SMALL)
    out = ml.concat.numpy()
    assert out.shape == (20,)
    np.testing.assert_array_equal(out[:6], ml.global_part.numpy())
    np.testing.assert_array_equal(out[6:12], ml.temporal_part.numpy())
    np.testing.assert_array_equal(out[12:], ml.local_part.numpy())


def _attention_inputs(seed):
    rng = np.random.default_rng(seed)
    return rng.normal(0, 2, 20), rng.normal(0, 2, 7)


def test_equal_logits_give_uniform_weights():
    f_vm, f_t = _attention_inputs(0)
    p = ParamSet(0)
    segment_scores(f_vm, f_t, p, SMALL)
    p.set("attn.W.weight", np.zeros((5, 1)))
    f_ve, alphas = attend(f_vm, f_t, p, SMALL)
    np.testing.assert_allclose(alphas.numpy(), np.full(4, 0.25), atol=1e-15)
    np.testing.assert_allclose(f_ve.numpy(), f_vm.reshape(4, 5).mean(axis=0), atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-30, 30))
def test_attention_weights_are_shift_invariant_distributions(seed, shift):
    f_vm, f_t = _attention_inputs(seed)
    p = ParamSet(seed % 1000)
    f_ve, alphas = attend(f_vm, f_t, p, SMALL)
    a = alphas.numpy()
    assert abs(a.sum() - 1.0) <= 1e-9
    assert ((a >= 0) & (a <= 1)).all()
    # a shared bias on the logit layer moves every e_i by the same constant
    p.set("attn.W.bias", p["attn.W.bias"].data + shift)
    _, shifted = attend(f_vm, f_t, p, SMALL)
    np.testing.assert_allclose(shifted.numpy(), a, rtol=0, atol=1e-12)
    segs = f_vm.reshape(4, 5)
    v = f_ve.numpy()
    assert (v >= segs.min(axis=0) - 1e-12).all() and (v <= segs.max(axis=0) + 1e-12).all()


def test_batched_attention_matches_single():
    rng = np.random.default_rng(4)
    f_vm, f_t = rng.standard_normal((3, 20)), rng.standard_normal((3, 7))
    p = ParamSet(4)
    batch, _ = attend(f_vm, f_t, p, SMALL)
    for i in range(3):
        single, _ = attend(f_vm[i], f_t[i], p, SMALL)
        np.testing.assert_allclose(batch.numpy()[i], single.numpy(), atol=1e-14)


def test_attention_gradient():
    assert check_attention(seed=2).max_rel_error < 1e-4


def test_encoder_end_to_end_shapes():
    enc = AppearanceEncoder(6, 7, SMALL, seed=3)
    rng = np.random.default_rng(3)
    f_ve, alphas = enc(rng.standard_normal((4, 6)), rng.standard_normal(7))
    assert f_ve.shape == (5,) and alphas.shape == (4,)
    np.testing.assert_allclose(enc.alphas(rng.standard_normal((4, 6)), rng.standard_normal(7)).sum(), 1.0)


def test_encoder_rejects_wrong_widths():
    enc = AppearanceEncoder(6, 7, SMALL)
    with pytest.raises(DimensionError):
        enc(np.ones((4, 5)), np.ones(7))
