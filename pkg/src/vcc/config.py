"""Experiment configuration: a flat ``key = value`` file.

Comments start with ``#``. Unknown keys are an error. Relative paths are
resolved against the config file's directory, except in the configs shipped
with the package (loaded by name), where they are relative to the working
directory.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .roi import RoiThresholds
from .scoring import MetricConfig
from .training import TrainConfig

RUNTIME_KEYS = {"device", "deterministic"}
PATH_KEYS = {"data_root", "output_root", "gt_root", "detector_root", "flow_root"}
CONFIG_DIR = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    name: str = "experiment"
    data_root: str = "data"
    output_root: str = "runs/experiment"
    gt_root: str = ""  # default <data_root>/gt
    train_split: str = "train"
    test_split: str = "test"

    # adapters
    detector: str = "off"  # off | file
    detector_root: str = ""
    motion: str = "flow"  # flow | gradient
    flow: str = "blockmatch"  # blockmatch | farneback | file
    flow_root: str = ""

    # RoI extraction
    T_s: float = 0.5
    T_a: float = 144.0
    T_o: float = 0.6
    T_b: float = 1.0
    T_ar: float = 10.0
    event_mode: str = "roi"  # roi | whole_frame

    # block grid
    grid_rows: int = 1
    grid_cols: int = 1
    global_fallback: bool = True

    # training
    arch: str = "st_unet"
    modalities: tuple = ("appearance", "motion")
    lr: float = 0.001
    epochs: int = 5
    batch_size: int = 128
    p: float = 2.0
    D: int = 5
    h: int = 32
    w: int = 32
    hidden: int = 64
    kernel: int = 3
    widths: tuple = (64, 128, 256, 512)
    flow_scale: float = 10.0
    seed: int = 0

    # scoring
    ssim_weight: float = 1.0
    L_a: float = 2.0
    L_m: float = 2.0
    w_a: float = 1.0
    w_m: float = 1.0
    rect_scheme: str = "average"
    W: int = 5
    q: float = 0.8
    sigma: float = 1.0

    # synthetic data generation (``vcc synth``)
    synth_seed: int = 0
    synth_n_train: int = 4
    synth_n_test: int = 2
    synth_n_frames: int = 100

    # runtime, not hashed
    device: str = "cpu"
    deterministic: bool = True

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        self.widths = tuple(int(v) for v in self.widths)
        choices = {
            "detector": ("off", "file"), "motion": ("flow", "gradient"),
            "flow": ("blockmatch", "farneback", "file"), "event_mode": ("roi", "whole_frame"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        for m in self.modalities:
            if m not in ("appearance", "motion"):
                raise ConfigError(f"unknown modality {m!r}")
        if "appearance" not in self.modalities:
            raise ConfigError("the appearance modality is required")
        if "motion" in self.modalities and self.motion != "flow":
            raise ConfigError("motion models need flow targets; set motion = flow or modalities = appearance")
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("grid must have at least one row and column")
        try:
            self.roi_thresholds()
            self.train_config()
            self.metric_config()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    # -- views ------------------------------------------------------------

    def roi_thresholds(self):
        return RoiThresholds(self.T_s, self.T_a, self.T_o, self.T_b, self.T_ar)

    def train_config(self):
        return TrainConfig(
            self.lr, self.epochs, self.batch_size, self.p, self.D, self.h, self.w, self.arch, self.seed,
            self.hidden, self.kernel, self.widths, self.flow_scale, self.device, self.deterministic,
        )

    def metric_config(self):
        w_m = self.w_m if "motion" in self.modalities else 0.0
        return MetricConfig(self.ssim_weight, self.L_a, self.L_m, self.w_a, w_m, self.rect_scheme, self.W, self.q, self.sigma)

    @property
    def gt_dir(self):
        return Path(self.gt_root) if self.gt_root else Path(self.data_root) / "gt"

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    # -- hashing ----------------------------------------------------------

    def canonical(self):
        d = dataclasses.asdict(self)
        for k in RUNTIME_KEYS:
            d.pop(k)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(key, raw):
    default = _FIELDS[key].default
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.replace(",", " ").split() if p.strip()]
        return tuple(int(p) for p in parts) if key == "widths" else tuple(parts)
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config(text, base_dir=None, **overrides) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    cp.read_string("[vcc]\n" + text)
    values = {}
    for key, raw in cp["vcc"].items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    for key, val in overrides.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    if base_dir is not None:
        for key in PATH_KEYS:
            v = values.get(key)
            if v and not Path(v).is_absolute():
                values[key] = str((Path(base_dir) / v).resolve())
    return PipelineConfig(**values)


def load_config(path, **overrides) -> PipelineConfig:
    path = Path(path)
    base_dir = path.parent
    if not path.exists():
        candidate = CONFIG_DIR / (path.name if path.suffix else f"{path.name}.cfg")
        if not candidate.exists():
            raise ConfigError(f"config file {path} not found")
        path, base_dir = candidate, Path.cwd()
    return parse_config(path.read_text(), base_dir=base_dir, **overrides)


def shipped_configs():
    return sorted(p.stem for p in CONFIG_DIR.glob("*.cfg"))


def dump_config(cfg: PipelineConfig):
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(map(str, v))
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
