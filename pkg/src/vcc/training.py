"""Training of the per-(block, modality, type) completion networks."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .models import CompletionNet, NetSpec, checkpoint_name, flows_to_net, load_checkpoint, patches_to_net, save_checkpoint
from .vct import VCTDataset

log = logging.getLogger(__name__)

GLOBAL_BLOCK = -1
SIGMA_FLOOR = 1e-12


@dataclass
class TrainConfig:
    lr: float = 0.001
    epochs: int = 5
    batch_size: int = 128
    p: float = 2.0
    D: int = 5
    h: int = 32
    w: int = 32
    arch: str = "st_unet"
    seed: int = 0
    hidden: int = 64
    kernel: int = 3
    widths: tuple = (64, 128, 256, 512)
    flow_scale: float = 10.0
    device: str = "cpu"
    deterministic: bool = True

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.p < 1:
            raise ValueError("p must be >= 1")
        for name in ("epochs", "batch_size", "D", "h", "w", "hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def net_spec(self, modality, type_idx, block_idx=0):
        return NetSpec(
            self.arch, modality, type_idx, block_idx, self.D, self.h, self.w,
            self.hidden, self.kernel, self.widths, self.flow_scale,
        )


def lp_loss(pred, target, p=2.0):
    """Mean over the batch of ``sum |pred - target|^p`` per item."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    d = (pred - target).abs()
    per_item = (d * d if p == 2 else d.pow(p)).flatten(1).sum(dim=1)
    return per_item.mean()


def appearance_loss(pred, target, p=2.0):
    return lp_loss(pred, target, p)


def motion_loss(pred, target, p=2.0):
    return lp_loss(pred, target, p)


def seed_everything(seed, deterministic=True):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)


def _tensors(dataset: VCTDataset, modality, cfg: TrainConfig):
    x = patches_to_net(dataset.inputs())
    if modality == "appearance":
        y = patches_to_net(dataset.target_patches())
    else:
        y = flows_to_net(dataset.target_flows(), cfg.flow_scale)
    return x, y


def train_one(dataset: VCTDataset, modality, cfg: TrainConfig, block_idx=0, log_file=None):
    """Train one network on type-``i`` tests. Returns ``(net, epoch_losses)``."""
    if len(dataset) == 0:
        raise ValueError(f"no training events for block {block_idx}")
    if dataset.D != cfg.D:
        raise ValueError(f"dataset has D={dataset.D}, config D={cfg.D}")
    seed_everything(cfg.seed * 7919 + 31 * dataset.type_idx + (modality == "motion") + 1009 * (block_idx + 1), cfg.deterministic)
    net = CompletionNet(cfg.net_spec(modality, dataset.type_idx, block_idx)).to(cfg.device)
    x, y = _tensors(dataset, modality, cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed + dataset.type_idx)
    n = len(x)
    losses = []
    net.train()
    for epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x[idx].to(cfg.device), y[idx].to(cfg.device)
            loss = lp_loss(net(xb), yb, cfg.p)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / n)
        rec = {"epoch": epoch + 1, "type": dataset.type_idx, "modality": modality, "block": block_idx, "loss": losses[-1]}
        log.info("train %s", rec)
        if log_file is not None:
            log_file.write(json.dumps(rec) + "\n")
            log_file.flush()
    return net.eval(), losses


# ---------------------------------------------------------------------------
# model sets


@dataclass
class ModelSet:
    """Trained networks keyed by ``(block, modality, type)``."""

    nets: dict = field(default_factory=dict)
    D: int = 5

    def get(self, block, modality, type_idx):
        return self.nets[(block, modality, type_idx)]

    def blocks(self):
        return sorted({k[0] for k in self.nets})

    def modalities(self):
        return sorted({k[1] for k in self.nets})

    def has_block(self, block, modality):
        return all((block, modality, i) in self.nets for i in range(1, self.D + 1))

    def resolve_block(self, block, modality):
        """Block whose models score events of ``block``, falling back to the global model."""
        if self.has_block(block, modality):
            return block
        if self.has_block(GLOBAL_BLOCK, modality):
            return GLOBAL_BLOCK
        raise KeyError(f"block {block} has no {modality} models and no global fallback was trained")

    @classmethod
    def load(cls, directory, device="cpu"):
        nets, D, hashes = {}, None, set()
        for path in sorted(Path(directory).glob("block*_*_type*.pt")):
            net, header = load_checkpoint(path, device)
            s = net.spec
            nets[(s.block_idx, s.modality, s.type_idx)] = net
            D = s.D
            hashes.add(header.get("config_hash", ""))
        if not nets:
            raise FileNotFoundError(f"no checkpoints in {directory}")
        ms = cls(nets, D)
        ms.config_hashes = hashes
        return ms


def train_all(events, cfg: TrainConfig, n_blocks=1, out_dir=None, modalities=("appearance", "motion"),
              global_fallback=True, config_hash="", log_path=None) -> ModelSet:
    """Train ``len(modalities) * D`` networks for every block holding events.

    If some block has no events and ``global_fallback`` is set, one extra
    set is trained on all events under block id ``GLOBAL_BLOCK``.
    """
    if len(events) == 0:
        raise ValueError("no training events")
    if "motion" in modalities and events.flows is None:
        raise ValueError("motion models need flow stacks; events were extracted without flow")
    groups = {b: events.block_idx == b for b in range(n_blocks) if np.any(events.block_idx == b)}
    empty = [b for b in range(n_blocks) if b not in groups]
    if empty:
        log.warning("blocks %s have no training events", empty)
        if global_fallback:
            groups[GLOBAL_BLOCK] = np.ones(len(events), dtype=bool)
    ms = ModelSet({}, cfg.D)
    fh = open(log_path, "a") if log_path else None
    try:
        for block, mask in groups.items():
            patches = events.patches[mask]
            flows = None if events.flows is None else events.flows[mask]
            for modality in modalities:
                for i in range(1, cfg.D + 1):
                    net, _ = train_one(VCTDataset(patches, flows, i, block), modality, cfg, block, fh)
                    ms.nets[(block, modality, i)] = net
                    if out_dir is not None:
                        save_checkpoint(Path(out_dir) / checkpoint_name(net.spec), net, config_hash)
    finally:
        if fh:
            fh.close()
    return ms


# ---------------------------------------------------------------------------
# training score statistics


@dataclass
class ScoreStats:
    mean_a: float = 0.0
    std_a: float = 1.0
    mean_m: float = 0.0
    std_m: float = 1.0

    def __post_init__(self):
        self.std_a = max(float(self.std_a), SIGMA_FLOOR)
        self.std_m = max(float(self.std_m), SIGMA_FLOOR)

    @classmethod
    def from_scores(cls, S_a, S_m=None):
        S_a = np.asarray(S_a, dtype=np.float64)
        if S_m is None or len(S_m) == 0:
            return cls(S_a.mean(), S_a.std())
        S_m = np.asarray(S_m, dtype=np.float64)
        return cls(S_a.mean(), S_a.std(), S_m.mean(), S_m.std())


def compute_score_stats(model_set: ModelSet, events, metric) -> dict:
    """Per-block mean/std of the ensemble scores of the training events."""
    from .scoring import score_events

    scored = score_events(model_set, events, metric, with_maps=False)
    stats = {}
    for block in np.unique(scored.model_block):
        m = scored.model_block == block
        stats[int(block)] = ScoreStats.from_scores(scored.S_a[m], None if scored.S_m is None else scored.S_m[m])
    return stats


def save_stats(path, stats: dict, config_hash=""):
    blob = {"config_hash": config_hash, "blocks": {str(k): asdict(v) for k, v in stats.items()}}
    Path(path).write_text(json.dumps(blob, indent=1, sort_keys=True))


def load_stats(path):
    blob = json.loads(Path(path).read_text())
    return {int(k): ScoreStats(**v) for k, v in blob["blocks"].items()}, blob.get("config_hash", "")
