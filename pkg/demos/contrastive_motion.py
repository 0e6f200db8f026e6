"""Train the motion encoder with and without the text-guided contrastive term.

Records share one latent factor across text, motion and score. Positives for
each clip are motion sequences whose text looks similar, so the contrastive
term pulls together clips the text says belong together.
"""
import sys

from vidmem.config import defaults
from vidmem.dataio import generate_synthetic, split
from vidmem.tmccl import evaluate_motion, train_motion_encoder

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
cfg = defaults()
train, val, test = split(generate_synthetic(cfg.synthetic(seed)), cfg["split"], seed)
print(f"{len(train)} train / {len(val)} val / {len(test)} test records, seed {seed}")

for use_tmccl in (False, True):
    result = train_motion_encoder(train, cfg.train(seed), use_tmccl, cfg.encoder())
    print(
        f"contrastive={use_tmccl!s:5}  final loss {result.loss_trace[-1]:.4f}  "
        f"test RC {evaluate_motion(result.encoder, test):.4f}"
    )
