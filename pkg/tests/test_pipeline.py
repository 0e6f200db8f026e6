import numpy as np
import pytest

from vidmem.dataio import SyntheticConfig, generate_synthetic, split
from vidmem.errors import DomainError
from vidmem.fusion import fuse
from vidmem.pipeline import HeadConfig, MultimodalModel, evaluate_multimodal
from vidmem.tmccl import EncoderConfig, MotionEncoder

DATA = generate_synthetic(SyntheticConfig(num_records=60, D_raw=8, seed=5))
TRAIN, VAL, TEST = split(DATA, (0.6, 0.2, 0.2), seed=5)
MOTION = MotionEncoder(8, EncoderConfig(channels=6, proj_hidden=6, proj_dim=4, reg_hidden=4), seed=1)
FAST = HeadConfig(epochs=3)


def test_predict_needs_fusion_weights():
    model = MultimodalModel(18, 16, MOTION, FAST)
    with pytest.raises(DomainError):
        model.predict(TEST)


def test_fit_traces_and_fused_prediction():
    model = MultimodalModel(18, 16, MOTION, FAST, seed=2)
    trace = model.fit(TRAIN, seed=2)
    assert len(trace) == 3 and all(np.isfinite(trace))
    weights = model.select_fusion(VAL)
    assert sum(weights.as_tuple()) == pytest.approx(1.0, abs=1e-12)
    pred = model.predict(TEST)
    np.testing.assert_array_equal(pred, fuse(model.modality_scores(TEST), weights))
    assert ((pred > 0) & (pred < 1)).all()  # convex mix of sigmoid heads


def test_heads_learn_the_target():
    # more epochs should lower the training loss
    short = MultimodalModel(18, 16, MOTION, HeadConfig(epochs=1), seed=3).fit(TRAIN, seed=3)
    long = MultimodalModel(18, 16, MOTION, HeadConfig(epochs=15, lr=0.01), seed=3).fit(TRAIN, seed=3)
    assert long[-1] < short[-1]


def test_evaluate_multimodal_is_deterministic():
    a = evaluate_multimodal(TRAIN, VAL, TEST, MOTION, FAST, seed=4)
    b = evaluate_multimodal(TRAIN, VAL, TEST, MOTION, FAST, seed=4)
    assert a["rc"] == b["rc"] and a["weights"] == b["weights"]
    assert -1.0 <= a["rc"] <= 1.0
    assert a["loss_trace"] == b["loss_trace"]


def test_long_term_target():
    out = evaluate_multimodal(TRAIN, VAL, TEST, MOTION, FAST, seed=4, target="lt_score")
    assert -1.0 <= out["rc_visual"] <= 1.0
