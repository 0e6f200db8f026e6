"""Flat ``key = value`` run configuration with documented defaults."""
from __future__ import annotations

from dataclasses import dataclass

from .appearance import AppearanceConfig
from .dataio import SyntheticConfig
from .errors import ConfigError
from .pipeline import HeadConfig
from .tmccl import EncoderConfig, TrainConfig


def _bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _words(text):
    return tuple(x.strip() for x in str(text).split(",") if x.strip())


# key: (parser, default, description)
SCHEMA = {
    # run
    "seed": (int, 0, "seed for data generation, splitting and training"),
    "out": (str, "out", "output directory for data, models and reports"),
    "dataset": (str, "", "dataset JSON-lines path (default <out>/dataset.jsonl)"),
    "model": (str, "", "motion encoder JSON path (default <out>/motion_encoder.json)"),
    "manifest_dir": (str, "", "directory of clip manifests (default <out>/manifests)"),
    "split": (_floats, (0.8, 0.1, 0.1), "train,val,test fractions"),
    "use_tmccl": (_bool, True, "add the text-guided contrastive term when training"),
    # synthetic data
    "num_records": (int, 256, "synthetic dataset size"),
    "n": (int, 8, "frames per video"),
    "D_v": (int, 18, "frame feature width"),
    "D_t": (int, 16, "text feature width"),
    "T_m": (int, 16, "motion descriptor steps"),
    "D_raw": (int, 32, "motion descriptor width"),
    "latent_dim": (int, 8, "shared latent factor width"),
    "text_noise": (float, 0.1, "text feature noise scale"),
    "motion_noise": (float, 0.1, "motion descriptor noise scale"),
    "score_noise": (float, 0.02, "label noise scale"),
    "motion_gain": (float, 0.1, "scale of the latent signal in motion descriptors"),
    "motion_persistence": (float, 1.0, "share of motion noise held constant over a clip's steps"),
    # motion encoder training
    "K": (int, 8, "positives per target (latent set holds 2K)"),
    "tau": (float, 0.07, "contrastive temperature"),
    "lambda": (float, 0.5, "weight of the contrastive term"),
    "lr": (float, 0.001, "Adam learning rate"),
    "weight_decay": (float, 0.0001, "Adam L2 weight decay"),
    "step_epochs": (int, 60, "epochs between learning-rate decays"),
    "lr_decay": (float, 0.1, "learning-rate decay factor"),
    "batch": (int, 16, "minibatch size"),
    "epochs": (int, 40, "training epochs"),
    "queue_capacity": (int, 1024, "negative queue capacity"),
    "text_similarity": (str, "dot", "text similarity for positives: dot or cosine"),
    "enc_channels": (int, 32, "motion backbone channels"),
    "enc_kernel": (int, 3, "motion backbone kernel size"),
    "enc_layers": (int, 2, "motion backbone conv layers"),
    "proj_hidden": (int, 32, "projection head hidden width"),
    "proj_dim": (int, 16, "projection embedding width"),
    "reg_hidden": (int, 16, "regression head hidden width"),
    "dropout": (float, 0.5, "regression head dropout rate"),
    # appearance and fusion heads
    "hidden": (int, 18, "bidirectional GRU hidden width"),
    "channels": (int, 9, "conv channels per kernel size in the local level"),
    "segments": (int, 9, "attention segments"),
    "common_dim": (int, 16, "attention projection width"),
    "head_hidden": (int, 16, "modality head hidden width"),
    "head_epochs": (int, 40, "epochs for appearance and head training"),
    "head_lr": (float, 0.001, "learning rate for appearance and heads"),
    "fusion_step": (float, 0.05, "fusion weight grid step"),
    # summarization
    "mu": (float, 0.5, "memorability weight in rectified importance"),
    "budget_fraction": (float, 0.15, "summary frame budget as a fraction of the video"),
    "num_videos": (int, 20, "synthetic summarization videos"),
    "clips_per_video": (int, 20, "clips per synthetic video"),
    "memorability_share": (float, 0.5, "memorability share of synthetic ground-truth importance"),
    # ablation and checks
    "seeds": (_ints, (1, 2, 3), "seeds for the ablation"),
    "arms": (_words, ("tmccl", "mu"), "ablation arms: tmccl, mu"),
    "mu_grid": (_floats, (1.0, 0.5, 0.1, 0.0), "mu values for the summarization sweep"),
    "gradcheck_eps": (float, 1e-5, "finite-difference step"),
    "gradcheck_tol": (float, 1e-4, "maximum accepted relative error"),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def with_overrides(self, **overrides):
        values = dict(self.values)
        for key, value in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown configuration key '{key}'")
            values[key] = value
        return RunConfig(values)

    def to_json(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}

    # typed views ---------------------------------------------------------------
    def synthetic(self, seed=None):
        v = self.values
        return SyntheticConfig(
            num_records=v["num_records"], n=v["n"], D_v=v["D_v"], D_t=v["D_t"], T_m=v["T_m"],
            D_raw=v["D_raw"], latent_dim=v["latent_dim"], text_noise=v["text_noise"],
            motion_noise=v["motion_noise"], score_noise=v["score_noise"], motion_gain=v["motion_gain"],
            motion_persistence=v["motion_persistence"], seed=v["seed"] if seed is None else seed,
        )

    def train(self, seed=None):
        v = self.values
        return TrainConfig(
            K=v["K"], tau=v["tau"], lam=v["lambda"], lr=v["lr"], weight_decay=v["weight_decay"],
            step_epochs=v["step_epochs"], lr_decay=v["lr_decay"], batch=v["batch"], epochs=v["epochs"],
            seed=v["seed"] if seed is None else seed, queue_capacity=v["queue_capacity"],
            text_similarity=v["text_similarity"],
        ).validate()

    def encoder(self):
        v = self.values
        return EncoderConfig(
            channels=v["enc_channels"], kernel_size=v["enc_kernel"], layers=v["enc_layers"],
            proj_hidden=v["proj_hidden"], proj_dim=v["proj_dim"], reg_hidden=v["reg_hidden"],
            dropout=v["dropout"],
        )

    def heads(self):
        v = self.values
        appearance = AppearanceConfig(
            hidden=v["hidden"], channels=v["channels"], segments=v["segments"], common_dim=v["common_dim"]
        )
        appearance.segment_dim(v["D_v"])
        return HeadConfig(
            appearance=appearance, head_hidden=v["head_hidden"], epochs=v["head_epochs"], batch=v["batch"],
            lr=v["head_lr"], weight_decay=v["weight_decay"], step_epochs=v["step_epochs"],
            lr_decay=v["lr_decay"], fusion_step=v["fusion_step"],
        )


def defaults():
    return RunConfig({k: default for k, (_, default, _) in SCHEMA.items()})


def parse_value(key, text):
    if key not in SCHEMA:
        raise ConfigError(f"unknown configuration key '{key}'")
    parser = SCHEMA[key][0]
    try:
        return parser(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for '{key}': {exc}") from exc


def parse_text(text, base=None):
    """Apply ``key = value`` lines (``#`` starts a comment) on top of ``base``."""
    values = dict((base or defaults()).values)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = parse_value(key, value)
    return RunConfig(values)


def load_config(path=None, overrides=()):
    config = defaults()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                config = parse_text(fh.read(), config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        config = config.with_overrides(**{key: parse_value(key, value)})
    return config


def describe():
    """Human-readable table of every key, its default and meaning."""
    rows = []
    for key, (_, default, doc) in SCHEMA.items():
        shown = ",".join(str(x) for x in default) if isinstance(default, tuple) else default
        rows.append(f"{key} = {shown}    # {doc}")
    return "\n".join(rows)
