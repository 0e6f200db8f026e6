"""Text-guided contrastive fine-tuning of the motion encoder.

Positives for a target video are drawn from the videos whose text features
score highest against the target's; negatives come from a FIFO queue of
detached projection embeddings. The contrastive term is added to the
regression MSE of the memorability head.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError, DomainError, NumericError, ParameterError, SchemaError
from .metrics import spearman_rc
from .numerics import (
    Adam,
    ParamSet,
    Tensor,
    backward,
    conv1d,
    dense,
    dropout,
    l2_normalize,
    mean_pool,
    no_grad,
    relu,
    sigmoid,
    square,
    stack,
    step_lr,
)
from .numerics.tensor import _node, as_tensor

logger = logging.getLogger(__name__)


# model ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncoderConfig:
    channels: int = 32
    kernel_size: int = 3
    layers: int = 2
    proj_hidden: int = 32
    proj_dim: int = 16
    reg_hidden: int = 16
    dropout: float = 0.5


class MotionEncoder:
    """Conv1d backbone over motion descriptors with projection and regression heads.

    backbone:   [conv1d -> ReLU] x layers -> mean over time      -> f_m
    projection: linear -> ReLU -> linear -> L2 normalize         -> z
    regression: linear -> dropout -> linear -> sigmoid           -> score
    """

    def __init__(self, d_raw, config=None, seed=0, params=None):
        self.d_raw = int(d_raw)
        self.config = config or EncoderConfig()
        if params is None:
            params = ParamSet(seed)
            with no_grad():
                probe = Tensor(np.zeros((1, 1, self.d_raw)))
                f = self.features(probe, params)
                self.project(f, params)
                self.regress(f, params=params)
        self.params = params

    @property
    def feature_dim(self):
        return self.config.channels

    def _check(self, motion):
        motion = as_tensor(motion)
        if motion.shape[-1] != self.d_raw:
            raise SchemaError(f"motion descriptors have width {motion.shape[-1]}, encoder expects {self.d_raw}")
        return motion

    def features(self, motion, params=None):
        params = self.params if params is None else params
        h = self._check(motion)
        for i in range(self.config.layers):
            h = relu(conv1d(h, self.config.kernel_size, self.config.channels, params, f"backbone.conv{i}"))
        return mean_pool(h)

    def project(self, f, params=None):
        params = self.params if params is None else params
        h = relu(dense(f, self.config.proj_hidden, params, "proj.fc1"))
        return l2_normalize(dense(h, self.config.proj_dim, params, "proj.fc2"))

    def regress(self, f, rng=None, training=False, params=None):
        params = self.params if params is None else params
        h = dense(f, self.config.reg_hidden, params, "reg.fc1")
        h = dropout(h, self.config.dropout, rng, training=training and rng is not None)
        return sigmoid(dense(h, 1, params, "reg.fc2"))[..., 0]

    def predict(self, motion):
        """Memorability scores in eval mode (dropout off) as a numpy array."""
        with no_grad():
            return self.regress(self.features(np.asarray(motion, dtype=np.float64))).numpy()

    def embed(self, motion):
        """Detached, L2-normalized projection embeddings."""
        with no_grad():
            return self.project(self.features(np.asarray(motion, dtype=np.float64))).numpy()

    def motion_features(self, motion):
        with no_grad():
            return self.features(np.asarray(motion, dtype=np.float64)).numpy()

    def to_json(self, train_config=None):
        doc = {
            "d_raw": self.d_raw,
            "encoder_config": asdict(self.config),
            "params": self.params.to_dict(),
        }
        if train_config is not None:
            doc["train_config"] = train_config.to_json()
        return doc

    @classmethod
    def from_json(cls, doc):
        try:
            config = EncoderConfig(**doc["encoder_config"])
            params = ParamSet.from_dict(doc["params"])
            return cls(doc["d_raw"], config, params=params)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad motion encoder document: {exc!r}") from exc

    def save(self, path, train_config=None):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(train_config), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# sample sets -----------------------------------------------------------------------

@dataclass
class SampleSets:
    target_id: str
    positives: list
    negatives: list = field(default_factory=list)  # (record id, embedding) pairs

    def negative_ids(self):
        return [i for i, _ in self.negatives]

    def negative_matrix(self):
        return np.array([e for _, e in self.negatives]) if self.negatives else np.zeros((0, 0))


class NegativeQueue:
    """Fixed-capacity FIFO of (record id, detached projection embedding)."""

    def __init__(self, capacity=1024):
        if capacity < 1:
            raise ParameterError(f"queue capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.entries = deque()
        self.enqueued = 0
        self.evicted = 0

    def __len__(self):
        return len(self.entries)

    def push(self, record_id, embedding):
        self.entries.append((record_id, np.array(embedding, dtype=np.float64)))
        self.enqueued += 1
        if len(self.entries) > self.capacity:
            self.entries.popleft()
            self.evicted += 1

    def ids(self):
        return [i for i, _ in self.entries]

    def matrix(self):
        return np.array([e for _, e in self.entries])


def queue_update(queue, ids, embeddings):
    """Enqueue a batch of embeddings, detached from any gradient graph."""
    data = embeddings.data if isinstance(embeddings, Tensor) else np.asarray(embeddings)
    for record_id, emb in zip(ids, data):
        queue.push(record_id, emb)
    return queue


def _text_scores(target_text, pool_text, similarity):
    if similarity == "dot":
        return pool_text @ target_text
    if similarity == "cosine":
        norms = np.linalg.norm(pool_text, axis=1) * np.linalg.norm(target_text)
        return (pool_text @ target_text) / np.maximum(norms, 1e-12)
    raise ParameterError(f"unknown text similarity '{similarity}'")


def text_topk(target, pool, K, similarity="dot"):
    """Ids of the 2K pool records whose text scores highest against ``target``.

    Ties are broken by ascending record id; smaller pools are returned whole.
    """
    pool = [r for r in pool if r.video_id != target.video_id]
    if not pool:
        raise DomainError(f"empty candidate pool for target '{target.video_id}'")
    scores = _text_scores(target.text, np.stack([r.text for r in pool]), similarity)
    ids = [r.video_id for r in pool]
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], ids[i]))
    return [ids[i] for i in order[: 2 * K]]


def latent_sets(records, K, similarity="dot"):
    """:func:`text_topk` for every record against the rest of ``records``."""
    if len(records) < 2:
        raise DomainError("need at least two records to build latent sets")
    text = np.stack([r.text for r in records])
    ids = np.array([r.video_id for r in records])
    if similarity == "dot":
        scores = text @ text.T
    elif similarity == "cosine":
        unit = text / np.maximum(np.linalg.norm(text, axis=1, keepdims=True), 1e-12)
        scores = unit @ unit.T
    else:
        raise ParameterError(f"unknown text similarity '{similarity}'")
    id_rank = np.argsort(np.argsort(ids, kind="stable"), kind="stable")
    out = {}
    for i, rec in enumerate(records):
        row = np.delete(np.arange(len(records)), i)
        order = row[np.lexsort((id_rank[row], -scores[i, row]))]
        out[rec.video_id] = [str(ids[j]) for j in order[: 2 * K]]
    return out


def build_sample_sets(target_id, latent_set, queue, K, rng):
    """Draw K positives uniformly from the latent set; negatives are the rest of the queue."""
    latent_set = [i for i in latent_set if i != target_id]
    if not latent_set:
        raise DomainError(f"empty latent set for target '{target_id}'")
    picks = rng.choice(len(latent_set), size=min(K, len(latent_set)), replace=False)
    positives = [latent_set[i] for i in picks]
    excluded = set(positives) | {target_id}
    negatives = [(i, e) for i, e in queue.entries if i not in excluded]
    if not queue.entries:
        warnings.warn("negative queue is empty; contrastive term is zero for this step", stacklevel=2)
    return SampleSets(target_id, positives, negatives)


# losses --------------------------------------------------------------------------

def similarity(a, b, tau):
    """``exp(a . b / tau)`` for unit vectors ``a`` and ``b``."""
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    return math.exp(float(np.dot(a, b)) / tau)


def _contrastive(target, positives, negatives, pos_mask, neg_mask, tau):
    """Per-target ``-log(sum pos / (sum pos + sum neg))`` with masked sets.

    target (B, D), positives (B, P, D), negatives (M, D), masks (B, P) and
    (B, M). Sums are exactly rounded so the value is invariant to set order
    and cannot drop when a term is added.
    """
    z, pos, neg = target.data, positives.data, negatives.data
    # row-wise products and reductions: a BLAS matmul may round a dot product
    # differently depending on the row's position, breaking order invariance
    pos_logits = (z[:, None, :] * pos).sum(axis=-1) / tau
    neg_logits = (z[:, None, :] * neg[None]).sum(axis=-1) / tau if neg.size else np.zeros((z.shape[0], 0))
    B = z.shape[0]
    out = np.zeros(B)
    w_pos = np.zeros(pos_logits.shape)
    w_neg = np.zeros(neg_logits.shape)
    for b in range(B):
        lp = pos_logits[b][pos_mask[b]]
        ln = neg_logits[b][neg_mask[b]]
        if lp.size == 0:
            raise DomainError("contrastive loss needs at least one positive")
        top = max(lp.max(), ln.max() if ln.size else -np.inf)
        ep, en = np.exp(lp - top), np.exp(ln - top)
        s_pos, s_neg = math.fsum(ep), math.fsum(en)
        out[b] = math.log1p(s_neg / s_pos)
        total = s_pos + s_neg
        # dL/dlogit: softmax over all terms, minus softmax over positives
        w_pos[b, pos_mask[b]] = ep / total - ep / s_pos
        w_neg[b, neg_mask[b]] = en / total

    def grad_fn(g):
        gw_pos = g[:, None] * w_pos / tau
        gw_neg = g[:, None] * w_neg / tau
        g_target = np.einsum("bp,bpd->bd", gw_pos, pos)
        if neg.size:
            g_target = g_target + gw_neg @ neg
        g_pos = gw_pos[:, :, None] * z[:, None, :]
        g_neg = gw_neg.T @ z if neg.size else np.zeros(neg.shape)
        return g_target, g_pos, g_neg

    return _node(out, (target, positives, negatives), grad_fn)


def tmccl_loss(target_z, positives_z, negatives_z, tau):
    """Contrastive loss of one target against its positive and negative embeddings.

    Returns a scalar Tensor ``-log(sum_pos / (sum_pos + sum_neg))`` with
    ``sim(a, b) = exp(a . b / tau)``. Zero exactly when there are no negatives.
    """
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    target_z = as_tensor(target_z)
    positives = _as_matrix(positives_z, target_z.shape[-1])
    if positives is None:
        raise DomainError("contrastive loss needs at least one positive")
    negatives = _as_matrix(negatives_z, target_z.shape[-1])
    n_neg = 0 if negatives is None else negatives.shape[0]
    if negatives is None:
        negatives = Tensor(np.zeros((1, target_z.shape[-1])))
    pos_mask = np.ones((1, positives.shape[0]), dtype=bool)
    neg_mask = np.zeros((1, negatives.shape[0]), dtype=bool)
    neg_mask[:, :n_neg] = True
    per_target = _contrastive(
        target_z.reshape(1, -1), positives.reshape(1, *positives.shape), negatives, pos_mask, neg_mask, tau
    )
    return per_target.sum()


def _as_matrix(items, width):
    if isinstance(items, Tensor):
        return items if items.size else None
    items = list(items)
    if not items:
        return None
    if all(isinstance(t, Tensor) for t in items):
        return stack(items)
    return Tensor(np.asarray([np.asarray(getattr(t, "data", t)) for t in items]).reshape(len(items), width))


def overall_loss(pred, gt, contrastive, lam):
    """Batch mean of ``(pred - gt)**2 + lam * contrastive``."""
    pred, gt, contrastive = as_tensor(pred), as_tensor(gt), as_tensor(contrastive)
    return (square(pred - gt) + lam * contrastive).mean()


# training --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    K: int = 8
    tau: float = 0.07
    lam: float = 0.5
    lr: float = 0.001
    weight_decay: float = 0.0001
    step_epochs: int = 60
    lr_decay: float = 0.1
    batch: int = 64
    epochs: int = 200
    seed: int = 0
    queue_capacity: int = 1024
    text_similarity: str = "dot"

    def validate(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.K < 1:
            raise ConfigError(f"K must be at least 1, got {self.K}")
        for name in ("batch", "epochs", "step_epochs", "queue_capacity"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.text_similarity not in ("dot", "cosine"):
            raise ConfigError(f"text_similarity must be 'dot' or 'cosine', got {self.text_similarity!r}")
        return self

    def to_json(self):
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})


@dataclass
class TrainResult:
    encoder: MotionEncoder
    loss_trace: list
    mse_trace: list
    contrastive_trace: list
    config: TrainConfig
    use_tmccl: bool


def _stack_motion(records):
    return np.stack([r.motion_seq for r in records])


def mean_positive_cosine(encoder, records, latent):
    """Mean cosine between each record's projection and those of its latent-set members."""
    emb = encoder.embed(_stack_motion(records))
    index = {r.video_id: i for i, r in enumerate(records)}
    values = []
    for i, rec in enumerate(records):
        members = [index[j] for j in latent[rec.video_id]]
        values.append(float(np.mean(emb[members] @ emb[i])))
    return float(np.mean(values))


def train_motion_encoder(dataset, cfg=None, use_tmccl=True, encoder_config=None):
    """Fit the motion encoder by Adam on MSE, plus the contrastive term when enabled.

    Without ``use_tmccl`` the contrastive weight is forced to zero.
    """
    cfg = (cfg or TrainConfig()).validate()
    if not dataset:
        raise DomainError("cannot train on an empty dataset")
    lam = cfg.lam if use_tmccl else 0.0
    use_tmccl = use_tmccl and len(dataset) >= 2
    records = list(dataset)
    motion = _stack_motion(records)
    scores = np.array([r.st_score for r in records])
    ids = [r.video_id for r in records]
    index = {rid: i for i, rid in enumerate(ids)}

    encoder = MotionEncoder(motion.shape[-1], encoder_config, seed=cfg.seed)
    params = encoder.params
    optimizer = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    order_rng = np.random.default_rng([cfg.seed, 11])
    dropout_rng = np.random.default_rng([cfg.seed, 12])
    sample_rng = np.random.default_rng([cfg.seed, 13])
    queue = NegativeQueue(cfg.queue_capacity)
    latent = latent_sets(records, cfg.K, cfg.text_similarity) if use_tmccl else None

    loss_trace, mse_trace, con_trace = [], [], []
    warned = False
    for epoch in range(cfg.epochs):
        optimizer.lr = step_lr(cfg.lr, epoch, cfg.step_epochs, cfg.lr_decay)
        perm = order_rng.permutation(len(records))
        sums = np.zeros(3)
        for step, start in enumerate(range(0, len(records), cfg.batch)):
            idx = perm[start:start + cfg.batch]
            f = encoder.features(motion[idx])
            pred = encoder.regress(f, dropout_rng, training=True)
            mse = square(pred - scores[idx]).mean()
            loss = mse
            con_value = 0.0
            if use_tmccl:
                z = encoder.project(f)
                con = _batch_contrastive(
                    z, [ids[i] for i in idx], latent, queue, cfg, encoder, motion, index, sample_rng
                )
                if con is None:
                    if not warned:
                        logger.warning("negative queue empty at epoch %d step %d; contrastive term is zero", epoch, step)
                        warned = True
                else:
                    loss = mse + lam * con
                    con_value = con.item()
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, step {step}")
            backward(loss, params)
            optimizer.step()
            if use_tmccl:
                queue_update(queue, [ids[i] for i in idx], z)
            w = len(idx)
            sums += np.array([value, mse.item(), con_value]) * w
        loss_trace.append(sums[0] / len(records))
        mse_trace.append(sums[1] / len(records))
        con_trace.append(sums[2] / len(records))
        logger.debug("epoch %d loss %.6f", epoch, loss_trace[-1])
    return TrainResult(encoder, loss_trace, mse_trace, con_trace, cfg, use_tmccl)


def _batch_contrastive(z, batch_ids, latent, queue, cfg, encoder, motion, index, rng):
    if not len(queue):
        return None
    sets = [build_sample_sets(tid, latent[tid], queue, cfg.K, rng) for tid in batch_ids]
    K = max(len(s.positives) for s in sets)
    pos_rows = [index[p] for s in sets for p in s.positives]
    pos_emb = encoder.embed(motion[pos_rows])
    positives = np.zeros((len(sets), K, pos_emb.shape[1]))
    pos_mask = np.zeros((len(sets), K), dtype=bool)
    queue_ids = queue.ids()
    neg_mask = np.zeros((len(sets), len(queue_ids)), dtype=bool)
    row = 0
    for b, s in enumerate(sets):
        k = len(s.positives)
        positives[b, :k] = pos_emb[row:row + k]
        pos_mask[b, :k] = True
        row += k
        excluded = set(s.positives) | {s.target_id}
        neg_mask[b] = [qid not in excluded for qid in queue_ids]
        assert not set(s.positives) & set(s.negative_ids())
    per_target = _contrastive(z, Tensor(positives), Tensor(queue.matrix()), pos_mask, neg_mask, cfg.tau)
    return per_target.mean()


def evaluate_motion(encoder, records, field_name="st_score"):
    """Spearman RC between regression-head predictions and labels."""
    pred = encoder.predict(_stack_motion(records))
    gt = np.array([getattr(r, field_name) for r in records])
    return spearman_rc(pred, gt)
