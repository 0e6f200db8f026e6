"""Feature-record and clip-manifest I/O, validation, synthetic data, splits.

Dataset files are UTF-8 JSON-lines, one video per line::

    {"video_id": "v1", "frames": [[...], ...], "text": [...],
     "motion_seq": [[...], ...], "st_score": 0.71, "lt_score": 0.4, "caption": "..."}

``lt_score`` and ``caption`` are optional. Summarization manifests are one
JSON document per video with ``video_id``, ``total_frames``, ``clips`` and
``ground_truth_frames``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ParameterError, ParseError, RangeError, SchemaError

REQUIRED_KEYS = ("video_id", "frames", "text", "motion_seq", "st_score")
OPTIONAL_KEYS = ("lt_score", "caption")


@dataclass(eq=False)
class FeatureRecord:
    video_id: str
    frames: np.ndarray  # (n, D_v)
    text: np.ndarray  # (D_t,)
    motion_seq: np.ndarray  # (T_m, D_raw)
    st_score: float
    lt_score: float | None = None
    caption: str | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.text = np.asarray(self.text, dtype=np.float64)
        self.motion_seq = np.asarray(self.motion_seq, dtype=np.float64)
        self.st_score = float(self.st_score)
        if self.lt_score is not None:
            self.lt_score = float(self.lt_score)

    def to_json(self):
        doc = {
            "video_id": self.video_id,
            "frames": self.frames.tolist(),
            "text": self.text.tolist(),
            "motion_seq": self.motion_seq.tolist(),
            "st_score": self.st_score,
        }
        if self.lt_score is not None:
            doc["lt_score"] = self.lt_score
        if self.caption is not None:
            doc["caption"] = self.caption
        return doc


@dataclass(frozen=True)
class DatasetDims:
    n: int
    D_v: int
    D_t: int
    T_m: int
    D_raw: int

    @classmethod
    def of(cls, rec):
        frames, motion = np.atleast_2d(rec.frames), np.atleast_2d(rec.motion_seq)
        return cls(frames.shape[0], frames.shape[1], rec.text.shape[-1], motion.shape[0], motion.shape[1])


def validate_record(rec, dims=None):
    """Every invariant ``rec`` violates, as messages; an empty list means valid."""
    problems = []
    if not isinstance(rec.video_id, str) or not rec.video_id:
        problems.append("video_id must be a non-empty string")
    if rec.frames.ndim != 2 or rec.frames.shape[0] < 1:
        problems.append(f"frames must be an n x D_v matrix with n >= 1, got shape {rec.frames.shape}")
    if rec.text.ndim != 1:
        problems.append(f"text must be a vector, got shape {rec.text.shape}")
    if rec.motion_seq.ndim != 2 or rec.motion_seq.shape[0] < 1:
        problems.append(f"motion_seq must be a T_m x D_raw matrix, got shape {rec.motion_seq.shape}")
    for name in ("frames", "text", "motion_seq"):
        if not np.isfinite(getattr(rec, name)).all():
            problems.append(f"non-finite feature in {name}")
    for name in ("st_score", "lt_score"):
        value = getattr(rec, name)
        if value is None:
            continue
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            problems.append(f"{name}={value} outside [0, 1]")
    if dims is not None and rec.frames.ndim == 2 and rec.motion_seq.ndim == 2 and rec.text.ndim == 1:
        got = DatasetDims.of(rec)
        if got.n != dims.n:
            problems.append(f"frame count mismatch: {got.n} != {dims.n}")
        if got.D_v != dims.D_v:
            problems.append(f"frame feature width mismatch: {got.D_v} != {dims.D_v}")
        if got.D_t != dims.D_t:
            problems.append(f"text width mismatch: {got.D_t} != {dims.D_t}")
        if got.T_m != dims.T_m:
            problems.append(f"motion length mismatch: {got.T_m} != {dims.T_m}")
        if got.D_raw != dims.D_raw:
            problems.append(f"motion width mismatch: {got.D_raw} != {dims.D_raw}")
    return problems


def _record_from_json(doc, line):
    if not isinstance(doc, dict):
        raise ParseError("record must be a JSON object", line)
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    unknown = [k for k in doc if k not in REQUIRED_KEYS + OPTIONAL_KEYS]
    if missing or unknown:
        raise ParseError(f"missing keys {missing}, unknown keys {unknown}", line)
    try:
        return FeatureRecord(
            video_id=doc["video_id"],
            frames=doc["frames"],
            text=doc["text"],
            motion_seq=doc["motion_seq"],
            st_score=doc["st_score"],
            lt_score=doc.get("lt_score"),
            caption=doc.get("caption"),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad field value: {exc}", line) from exc


def load_dataset(path):
    """Parse and validate a JSON-lines dataset file."""
    records, dims, first = [], None, None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON: {exc.msg}", lineno) from exc
            rec = _record_from_json(doc, lineno)
            problems = validate_record(rec)
            if problems:
                if any("outside [0, 1]" in p for p in problems):
                    raise RangeError(f"line {lineno}: record '{rec.video_id}': {'; '.join(problems)}")
                raise SchemaError(f"line {lineno}: record '{rec.video_id}': {'; '.join(problems)}")
            if dims is None:
                dims, first = DatasetDims.of(rec), rec.video_id
            else:
                mismatch = validate_record(rec, dims)
                if mismatch:
                    raise SchemaError(
                        f"line {lineno}: record '{rec.video_id}' disagrees with record '{first}': "
                        + "; ".join(mismatch)
                    )
            records.append(rec)
    return records


def write_dataset(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), allow_nan=False))
            fh.write("\n")


# summarization manifests ----------------------------------------------------------

@dataclass(eq=False)
class Clip:
    clip_id: str
    frame_count: int
    base_importance: float
    motion_seq: np.ndarray

    def __post_init__(self):
        self.motion_seq = np.asarray(self.motion_seq, dtype=np.float64)


@dataclass(eq=False)
class ClipManifest:
    video_id: str
    clips: list
    total_frames: int
    ground_truth_frames: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.ground_truth_frames = frozenset(int(f) for f in self.ground_truth_frames)

    def validate(self):
        if self.total_frames <= 0:
            raise SchemaError(f"{self.video_id}: total_frames must be positive")
        for clip in self.clips:
            if int(clip.frame_count) != clip.frame_count or clip.frame_count <= 0:
                raise SchemaError(f"{self.video_id}: clip '{clip.clip_id}' has frame_count {clip.frame_count}")
            if not math.isfinite(clip.base_importance):
                raise SchemaError(f"{self.video_id}: clip '{clip.clip_id}' has non-finite base_importance")
            if not np.isfinite(clip.motion_seq).all():
                raise SchemaError(f"{self.video_id}: clip '{clip.clip_id}' has non-finite motion_seq")
        counted = sum(c.frame_count for c in self.clips)
        if counted != self.total_frames:
            raise SchemaError(f"{self.video_id}: clip frame counts sum to {counted}, total_frames is {self.total_frames}")
        bad = [f for f in self.ground_truth_frames if not 0 <= f < self.total_frames]
        if bad:
            raise SchemaError(f"{self.video_id}: ground-truth frames out of range: {sorted(bad)[:5]}")
        return self

    def frame_counts(self):
        return [c.frame_count for c in self.clips]

    def to_json(self):
        return {
            "video_id": self.video_id,
            "total_frames": self.total_frames,
            "clips": [
                {
                    "clip_id": c.clip_id,
                    "frame_count": c.frame_count,
                    "base_importance": c.base_importance,
                    "motion_seq": c.motion_seq.tolist(),
                }
                for c in self.clips
            ],
            "ground_truth_frames": sorted(self.ground_truth_frames),
        }

    @classmethod
    def from_json(cls, doc):
        try:
            clips = [
                Clip(c["clip_id"], int(c["frame_count"]), float(c["base_importance"]), c["motion_seq"])
                for c in doc["clips"]
            ]
            manifest = cls(doc["video_id"], clips, int(doc["total_frames"]), doc["ground_truth_frames"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad manifest: {exc!r}") from exc
        return manifest.validate()


def load_manifest(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: malformed JSON: {exc.msg}", exc.lineno) from exc
    return ClipManifest.from_json(doc)


def write_manifest(manifest, path):
    Path(path).write_text(json.dumps(manifest.to_json(), allow_nan=False), encoding="utf-8")


# synthetic data --------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    num_records: int = 256
    n: int = 8
    D_v: int = 18
    D_t: int = 16
    T_m: int = 16
    D_raw: int = 32
    latent_dim: int = 8
    text_noise: float = 0.1
    motion_noise: float = 0.1
    score_noise: float = 0.02
    motion_gain: float = 0.1
    motion_persistence: float = 1.0
    seed: int = 0

    def validate(self):
        for name in ("n", "D_v", "D_t", "T_m", "D_raw", "latent_dim"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("text_noise", "motion_noise", "score_noise", "motion_gain"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not 0.0 <= self.motion_persistence <= 1.0:
            raise ParameterError(f"motion_persistence must lie in [0, 1], got {self.motion_persistence}")
        if self.D_t < self.latent_dim or self.D_raw < self.latent_dim:
            raise ParameterError("D_t and D_raw must be at least latent_dim")
        if self.seed < 0:
            raise ParameterError(f"seed must be unsigned, got {self.seed}")
        return self


def _semi_orthogonal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r)) * math.sqrt(rows / cols)


class LatentWorld:
    """Seeded linear maps from a shared latent factor to every modality.

    Text and motion maps have orthogonal columns with equal scale, so dot
    products in the two spaces are the same multiple of latent dot products.
    """

    def __init__(self, cfg):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng([cfg.seed, 0])
        L = cfg.latent_dim
        self.A_t = _semi_orthogonal(rng, cfg.D_t, L)
        self.A_m = _semi_orthogonal(rng, cfg.D_raw, L)
        self.A_v = rng.standard_normal((cfg.D_v, L)) / math.sqrt(L)
        w = rng.standard_normal(L)
        self.w_st = 1.5 * w / np.linalg.norm(w)
        u = rng.standard_normal(L)
        u = u - (u @ w) / (w @ w) * w
        mixed = 0.6 * w / np.linalg.norm(w) + 0.8 * u / np.linalg.norm(u)
        self.w_lt = 1.5 * mixed

    def memorability(self, z):
        return expit(z @ self.w_st)

    def motion(self, z, rng, steps=None):
        """Motion descriptor sequence(s) for latent(s) ``z``: rows are ``gain * A_m z`` plus noise."""
        cfg = self.cfg
        steps = cfg.T_m if steps is None else steps
        z = np.atleast_2d(z)
        signal = cfg.motion_gain * (z @ self.A_m.T)[:, None, :]
        # one nuisance offset per clip, held over all steps, plus per-step jitter
        shared = rng.standard_normal((z.shape[0], 1, cfg.D_raw))
        jitter = rng.standard_normal((z.shape[0], steps, cfg.D_raw))
        p = cfg.motion_persistence
        return signal + cfg.motion_noise * (math.sqrt(p) * shared + math.sqrt(1.0 - p) * jitter)


def generate_synthetic(cfg):
    """Deterministic dataset whose text and motion share one latent factor."""
    cfg.validate()
    if cfg.num_records < 2:
        raise ParameterError(f"num_records must be at least 2, got {cfg.num_records}")
    world = LatentWorld(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    N, L = cfg.num_records, cfg.latent_dim
    z = rng.standard_normal((N, L))
    text = z @ world.A_t.T + cfg.text_noise * rng.standard_normal((N, cfg.D_t))
    motion = world.motion(z, rng)
    frames = (z @ world.A_v.T)[:, None, :] + 0.5 * rng.standard_normal((N, cfg.n, cfg.D_v))
    st = np.clip(world.memorability(z) + cfg.score_noise * rng.standard_normal(N), 0.0, 1.0)
    lt = np.clip(expit(z @ world.w_lt) + cfg.score_noise * rng.standard_normal(N), 0.0, 1.0)
    width = len(str(N - 1))
    return [
        FeatureRecord(
            video_id=f"v{i:0{width}d}",
            frames=frames[i],
            text=text[i],
            motion_seq=motion[i],
            st_score=st[i],
            lt_score=lt[i],
        )
        for i in range(N)
    ]


def split(dataset, fractions=(0.8, 0.1, 0.1), seed=0):
    """Seeded partition into (train, val, test); rounding remainder goes to train."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be three nonnegative shares summing to 1, got {fractions}")
    N = len(dataset)
    n_val = int(round(N * fractions[1]))
    n_test = int(round(N * fractions[2]))
    n_train = N - n_val - n_test
    if n_train < 0:
        raise ParameterError(f"fractions {fractions} leave no room for a training split of {N} records")
    order = np.random.default_rng(seed).permutation(N)
    train = [dataset[i] for i in order[:n_train]]
    val = [dataset[i] for i in order[n_train:n_train + n_val]]
    test = [dataset[i] for i in order[n_train + n_val:]]
    return train, val, test
