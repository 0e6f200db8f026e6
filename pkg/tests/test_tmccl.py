import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidmem.checks import check_tmccl
from vidmem.dataio import FeatureRecord, SyntheticConfig, generate_synthetic, split
from vidmem.errors import DomainError, ParameterError, SchemaError
from vidmem.numerics import Tensor
from vidmem.tmccl import (
    EncoderConfig,
    MotionEncoder,
    NegativeQueue,
    TrainConfig,
    build_sample_sets,
    evaluate_motion,
    latent_sets,
    mean_positive_cosine,
    overall_loss,
    queue_update,
    similarity,
    text_topk,
    tmccl_loss,
    train_motion_encoder,
)

SMALL_ENCODER = EncoderConfig(channels=8, proj_hidden=8, proj_dim=6, reg_hidden=6)


def _rec(video_id, text, d_raw=3):
    return FeatureRecord(video_id, np.zeros((1, 2)), np.asarray(text, float), np.zeros((2, d_raw)), 0.5)


def _unit(rng, *shape):
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# sample sets -----------------------------------------------------------------------

def test_topk_by_text_dot_product():
    target = _rec("t", [1.0, 0.0])
    pool = [_rec(i, [d, 0.0]) for i, d in zip("abcd", [0.9, 0.8, 0.1, 0.05])]
    assert text_topk(target, pool, K=1) == ["a", "b"]


def test_topk_ties_break_by_id():
    target = _rec("t", [1.0, 1.0])
    pool = [_rec(i, [1.0, 1.0]) for i in ["d", "b", "e", "a", "c"]]
    assert text_topk(target, pool, K=2) == ["a", "b", "c", "d"]


def test_topk_small_pool_returned_whole():
    target = _rec("t", [1.0])
    pool = [_rec(i, [v]) for i, v in zip("xyz", [0.1, 0.3, 0.2])]
    assert text_topk(target, pool, K=8) == ["y", "z", "x"]


def test_topk_excludes_target_itself():
    target = _rec("t", [1.0])
    assert text_topk(target, [target, _rec("u", [0.5])], K=1) == ["u"]


@pytest.mark.parametrize("similarity_kind", ["dot", "cosine"])
def test_latent_sets_match_per_target_topk(similarity_kind):
    records = generate_synthetic(SyntheticConfig(num_records=30, seed=2))
    sets = latent_sets(records, 4, similarity_kind)
    for rec in records:
        assert sets[rec.video_id] == text_topk(rec, records, 4, similarity_kind)


@pytest.mark.filterwarnings("ignore:negative queue is empty")
def test_positive_draw_is_uniform():
    rng = np.random.default_rng(0)
    queue = NegativeQueue(4)
    counts = {"a": 0, "b": 0}
    for _ in range(10_000):
        (pick,) = build_sample_sets("t", ["a", "b"], queue, 1, rng).positives
        counts[pick] += 1
    assert abs(counts["a"] - 5000) <= 200 and abs(counts["b"] - 5000) <= 200


def test_positives_are_excluded_from_negatives():
    queue = NegativeQueue(8)
    for i in "abct":
        queue.push(i, np.ones(2))
    sets = build_sample_sets("t", ["a", "b"], queue, 2, np.random.default_rng(0))
    assert sorted(sets.positives) == ["a", "b"]
    assert sets.negative_ids() == ["c"]


def test_empty_queue_gives_no_negatives():
    with pytest.warns(UserWarning, match="empty"):
        sets = build_sample_sets("t", ["a"], NegativeQueue(4), 1, np.random.default_rng(0))
    assert sets.negatives == []


@pytest.mark.filterwarnings("ignore:negative queue is empty")
def test_target_never_a_positive():
    sets = build_sample_sets("t", ["t", "a", "b"], NegativeQueue(4), 3, np.random.default_rng(0))
    assert "t" not in sets.positives


# queue -----------------------------------------------------------------------------

def test_queue_is_fifo():
    queue = NegativeQueue(1024)
    for i in range(1030):
        queue.push(i, [float(i)])
    assert queue.ids() == list(range(6, 1030))
    assert queue.enqueued - queue.evicted == len(queue) == 1024


def test_queue_update_with_nothing():
    queue = NegativeQueue(3)
    queue.push("a", [1.0])
    queue_update(queue, [], np.zeros((0, 1)))
    assert queue.ids() == ["a"]


def test_queued_embeddings_are_detached():
    z = Tensor(np.ones((2, 3)), requires_grad=True)
    queue = queue_update(NegativeQueue(4), ["a", "b"], z * 2.0)
    for _, emb in queue.entries:
        assert isinstance(emb, np.ndarray) and not isinstance(emb, Tensor)


@settings(max_examples=100)
@given(st.integers(1, 20), st.lists(st.integers(0, 5), max_size=30))
def test_queue_length_bookkeeping(capacity, batches):
    queue = NegativeQueue(capacity)
    for size in batches:
        queue_update(queue, list(range(size)), np.zeros((size, 2)))
        assert len(queue) <= capacity
        assert queue.enqueued - queue.evicted == len(queue)


# losses ------------------------------------------------------------------------------

def test_similarity_examples():
    assert similarity([1.0, 0.0], [0.0, 1.0], 0.07) == 1.0
    assert similarity([1.0, 0.0], [1.0, 0.0], 0.07) == pytest.approx(math.exp(1 / 0.07), rel=1e-15)
    assert similarity([1.0, 0.0], [-1.0, 0.0], 1.0) == pytest.approx(0.36787944117144233, rel=1e-15)
    with pytest.raises(ParameterError):
        similarity([1.0], [1.0], 0.0)


def test_loss_without_negatives_is_zero():
    rng = np.random.default_rng(0)
    assert tmccl_loss(_unit(rng, 4), _unit(rng, 1, 4), [], 0.07).item() == 0.0


def test_loss_one_positive_one_equal_negative_is_log_two():
    a = np.array([1.0, 0.0])
    b = np.array([0.6, 0.8])
    loss = tmccl_loss(a, [b], [b], 0.07).item()
    assert loss == pytest.approx(math.log(2.0), abs=1e-15)


def test_loss_falls_when_a_positive_moves_closer():
    rng = np.random.default_rng(1)
    target, pos, neg = _unit(rng, 5), _unit(rng, 2, 5), _unit(rng, 4, 5)
    base = tmccl_loss(target, pos, neg, 0.5).item()
    closer = pos.copy()
    closer[0] = closer[0] + 0.05 * target
    assert tmccl_loss(target, closer, neg, 0.5).item() < base


def test_loss_requires_a_positive():
    with pytest.raises(DomainError):
        tmccl_loss(np.ones(2), [], [np.ones(2)], 0.1)


embedding_sets = st.tuples(
    st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 8), st.floats(0.05, 2.0)
)


def _random_sets(seed, n_pos, n_neg, dim=6):
    rng = np.random.default_rng(seed)
    return rng, _unit(rng, dim), _unit(rng, n_pos, dim), _unit(rng, n_neg, dim) if n_neg else np.zeros((0, dim))


def _loss(target, pos, neg, tau):
    return tmccl_loss(target, list(pos), list(neg), tau).item()


@settings(max_examples=200)
@given(embedding_sets)
def test_loss_is_nonnegative_and_order_free(params):
    seed, n_pos, n_neg, tau = params
    rng, target, pos, neg = _random_sets(seed, n_pos, n_neg)
    loss = _loss(target, pos, neg, tau)
    assert loss >= 0.0
    if n_neg == 0:
        assert loss == 0.0
    assert _loss(target, pos[rng.permutation(n_pos)], neg[rng.permutation(n_neg)], tau) == loss


@settings(max_examples=200)
@given(embedding_sets)
def test_loss_monotone_in_the_sets(params):
    seed, n_pos, n_neg, tau = params
    rng, target, pos, neg = _random_sets(seed, n_pos, n_neg)
    loss = _loss(target, pos, neg, tau)
    extra_neg = _unit(rng, 1, 6)
    assert _loss(target, pos, np.vstack([neg, extra_neg]), tau) >= loss
    best = max(pos, key=lambda p: p @ target)
    assert _loss(target, np.vstack([pos, best]), neg, tau) <= loss


def test_loss_gradient():
    assert check_tmccl(seed=6).max_rel_error < 1e-4


def test_overall_loss_examples():
    assert overall_loss([0.5], [0.5], [0.0], 0.5).item() == 0.0
    assert overall_loss([0.7], [0.5], [0.0], 0.0).item() == pytest.approx(0.04, abs=1e-15)
    value = overall_loss([0.7], [0.5], [math.log(2.0)], 0.5).item()
    assert value == pytest.approx(0.04 + 0.5 * math.log(2.0), abs=1e-15)
    assert round(value, 4) == 0.3866


# encoder ---------------------------------------------------------------------------

def test_predictions_lie_strictly_inside_unit_interval():
    enc = MotionEncoder(5, SMALL_ENCODER, seed=0)
    out = enc.predict(np.random.default_rng(0).normal(0, 50, (20, 7, 5)))
    assert ((out > 0) & (out < 1)).all()


def test_embeddings_are_unit_length():
    enc = MotionEncoder(5, SMALL_ENCODER, seed=0)
    emb = enc.embed(np.random.default_rng(1).standard_normal((4, 6, 5)))
    np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-12)


def test_encoder_round_trip(tmp_path):
    enc = MotionEncoder(4, SMALL_ENCODER, seed=3)
    enc.save(tmp_path / "enc.json", TrainConfig())
    back = MotionEncoder.load(tmp_path / "enc.json")
    x = np.random.default_rng(0).standard_normal((3, 5, 4))
    assert back.predict(x).tobytes() == enc.predict(x).tobytes()


def test_encoder_rejects_wrong_width():
    with pytest.raises(SchemaError):
        MotionEncoder(4, SMALL_ENCODER).predict(np.ones((1, 3, 5)))


# training --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_data():
    records = generate_synthetic(SyntheticConfig(num_records=64, seed=5))
    return split(records, (0.75, 0.0, 0.25), seed=5)


def _train(records, use_tmccl, **overrides):
    cfg = TrainConfig(**{**dict(K=4, epochs=12, batch=16, seed=1, lr=3e-3), **overrides})
    return train_motion_encoder(records, cfg, use_tmccl, SMALL_ENCODER)


def test_training_is_deterministic(small_data):
    train, _, _ = small_data
    a, b = _train(train, True, epochs=3), _train(train, True, epochs=3)
    for name in a.encoder.params:
        assert a.encoder.params[name].data.tobytes() == b.encoder.params[name].data.tobytes()
    assert a.loss_trace == b.loss_trace


def test_mse_only_loss_trends_down(small_data):
    train, _, _ = small_data
    trace = _train(train, False, epochs=25, lam=0.0).loss_trace
    running_min = np.minimum.accumulate(trace)
    assert (np.asarray(trace) <= 1.05 * running_min).mean() >= 0.8
    assert trace[-1] < trace[0]


def test_disabled_arm_ignores_lambda(small_data):
    train, _, _ = small_data
    result = _train(train, False, epochs=2, lam=5.0)
    assert result.contrastive_trace == [0.0, 0.0]
    assert result.loss_trace == result.mse_trace


def _positive_margin(encoder, records, latent):
    """Mean positive cosine minus the mean cosine over all pairs."""
    emb = encoder.embed(np.stack([r.motion_seq for r in records]))
    all_pairs = (emb @ emb.T)[np.triu_indices(len(records), 1)].mean()
    return mean_positive_cosine(encoder, records, latent) - all_pairs


def test_contrastive_training_pulls_positives_together(small_data):
    # an untrained projection maps these low-amplitude descriptors to nearly one
    # point, so the gain shows up against the all-pairs baseline
    train, _, _ = small_data
    latent = latent_sets(train, 4)
    initial = MotionEncoder(train[0].motion_seq.shape[1], SMALL_ENCODER, seed=1)
    before = _positive_margin(initial, train, latent)
    after = _positive_margin(_train(train, True, epochs=10).encoder, train, latent)
    assert after > before + 5e-4


def test_empty_queue_warm_up_is_logged(small_data, caplog):
    train, _, _ = small_data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = _train(train, True, epochs=1)
    assert "negative queue empty" in caplog.text
    assert result.contrastive_trace[0] > 0.0


def test_evaluate_motion_is_a_rank_correlation(small_data):
    train, _, test = small_data
    rc = evaluate_motion(_train(train, False, epochs=2).encoder, test)
    assert -1.0 <= rc <= 1.0
