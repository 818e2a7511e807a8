"""Stage orchestration: extract -> train -> score -> evaluate -> plot.

Every stage writes ``<output_root>/<stage>.json`` recording the config hash
it ran under; later stages refuse to start if a prerequisite manifest is
missing or was produced by a different configuration.

Artifacts under ``<output_root>``::

    rois/<split>/<clip>.txt          frame_idx x1 y1 x2 y2 a|m
    events/<split>/<clip>_b<k>.npz   cubes and flow stacks of block k
    models/block<k>_<modality>_type<i>.pt
    train_log.jsonl, stats.json, train_scores.npz
    scores/<clip>.txt                rectified frame scores, one per line
    scores/<clip>.raw.txt            frame scores before rectification
    scores/<clip>.events.npz         per-type event scores
    scores/<clip>.maps.npz           full-frame maps of fused event scores
    evaluation/metrics.json, roc_frame.txt, roc_pixel.txt
    plots/roc.png
"""
from __future__ import annotations

import json
import logging
import time
from pathlib import Path

import numpy as np

from . import adapters, datasets
from .config import PipelineConfig
from .evaluation import critical_scores, frame_level_roc, plot_roc, roc_from_scores
from .events import BlockGrid, EventSet, build_events, load_events, save_events, whole_frame_boxes
from .roi import extract_rois
from .scoring import (
    EventScores, fuse_event_scores, paste_score_maps, rectify, score_events, score_series, frame_scores,
)
from .training import ModelSet, ScoreStats, load_stats, save_stats, train_all

log = logging.getLogger(__name__)

STAGES = ("extract", "train", "score", "evaluate", "plot")
PREREQ = {"extract": None, "train": "extract", "score": "train", "evaluate": "score", "plot": "evaluate"}


class StageError(RuntimeError):
    """A stage cannot run: missing or stale prerequisites."""


# ---------------------------------------------------------------------------
# manifests


def _manifest_path(cfg, stage):
    return Path(cfg.output_root) / f"{stage}.json"


def write_manifest(cfg: PipelineConfig, stage, **info):
    path = _manifest_path(cfg, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {"stage": stage, "config_hash": cfg.hash(), "config": cfg.canonical(), **info}
    path.write_text(json.dumps(blob, indent=1, sort_keys=True, default=str))


def read_manifest(cfg, stage):
    path = _manifest_path(cfg, stage)
    if not path.exists():
        return None
    return json.loads(path.read_text())


def check_prerequisite(cfg: PipelineConfig, stage):
    need = PREREQ[stage]
    if need is None:
        return
    m = read_manifest(cfg, need)
    if m is None:
        raise StageError(f"stage '{stage}' needs the '{need}' stage first: no {_manifest_path(cfg, need)}; "
                         f"run `vcc {need} --config ...`")
    if m["config_hash"] != cfg.hash():
        diff = sorted(k for k, v in cfg.canonical().items() if m.get("config", {}).get(k) != v)
        raise StageError(
            f"'{need}' artifacts in {cfg.output_root} were made with config {m['config_hash']}, "
            f"current config is {cfg.hash()}; differing keys: {', '.join(diff) or '?'}. "
            f"Rerun `vcc {need}` or point output_root elsewhere."
        )


# ---------------------------------------------------------------------------
# extract


def _flow_estimator(cfg: PipelineConfig, clip_id):
    if cfg.flow == "blockmatch":
        return adapters.BlockMatchingFlow()
    if cfg.flow == "farneback":
        return adapters.FarnebackFlow()
    return adapters.FileFlow(cfg.flow_root, clip_id)


def _detector(cfg: PipelineConfig, clip_id):
    if cfg.detector == "off":
        return None
    return adapters.FileDetector(cfg.detector_root, clip_id)


def extract_clip(seq: datasets.VideoSequence, cfg: PipelineConfig):
    """RoIs per frame and the clip's event set."""
    frames = seq.frames
    T, H, W = frames.shape[:3]
    flows = None
    if cfg.motion == "flow":
        flows = adapters.sequence_flows(frames, _flow_estimator(cfg, seq.id))
        motion = adapters.flow_magnitude(flows)
    else:
        motion = adapters.sequence_gradients(frames)
    if cfg.event_mode == "whole_frame":
        boxes = whole_frame_boxes(T, H, W)
    else:
        det, th = _detector(cfg, seq.id), cfg.roi_thresholds()
        boxes = [extract_rois(frames[t], motion[t], det, th, t) for t in range(T)]
    grid = BlockGrid(H, W, cfg.grid_rows, cfg.grid_cols)
    keep_flow = flows if "motion" in cfg.modalities else None
    events = build_events(frames, boxes, keep_flow, grid, cfg.D, cfg.h, cfg.w, seq.id)
    return boxes, events


def write_rois(path, boxes_per_frame):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for t, boxes in enumerate(boxes_per_frame):
            for b in boxes:
                fh.write(f"{t} {b.x1} {b.y1} {b.x2} {b.y2} {b.source}\n")


def read_rois(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        t, x1, y1, x2, y2, src = line.split()
        out.setdefault(int(t), []).append((int(x1), int(y1), int(x2), int(y2), src))
    return out


def run_extract(cfg: PipelineConfig):
    out = Path(cfg.output_root)
    n_blocks = cfg.grid_rows * cfg.grid_cols
    info = {}
    for split in (cfg.train_split, cfg.test_split):
        clips = datasets.list_clips(cfg.data_root, split)
        if not clips:
            raise StageError(f"no clips in {Path(cfg.data_root) / split}")
        counts = {}
        for clip_id in clips:
            t0 = time.time()
            seq = datasets.load_sequence(Path(cfg.data_root) / split / clip_id, clip_id)
            boxes, events = extract_clip(seq, cfg)
            write_rois(out / "rois" / split / f"{clip_id}.txt", boxes)
            for b in range(n_blocks):
                save_events(out / "events" / split / f"{clip_id}_b{b}.npz", events.subset(events.block_idx == b),
                            cfg.hash(), b)
            counts[clip_id] = len(events)
            log.info("extract %s/%s: %d events (%d skipped) in %.1fs", split, clip_id, len(events),
                     events.skipped, time.time() - t0)
        info[split] = counts
    write_manifest(cfg, "extract", events=info)
    return info


def load_split_events(cfg: PipelineConfig, split) -> dict:
    """``{clip_id: EventSet}`` with all blocks merged, in extraction order."""
    out = {}
    for clip_id in datasets.list_clips(cfg.data_root, split):
        parts = []
        for b in range(cfg.grid_rows * cfg.grid_cols):
            path = Path(cfg.output_root) / "events" / split / f"{clip_id}_b{b}.npz"
            if not path.exists():
                raise StageError(f"missing event archive {path}; rerun `vcc extract`")
            ev, header = load_events(path)
            if header["config_hash"] != cfg.hash():
                raise StageError(f"{path} was written under config {header['config_hash']}, current {cfg.hash()}")
            parts.append(ev)
        merged = EventSet.concatenate(parts)
        merged.clip_id, merged.n_frames = clip_id, parts[0].n_frames
        order = np.lexsort((np.arange(len(merged)), merged.frame_idx))
        out[clip_id] = merged.subset(order)
    return out


# ---------------------------------------------------------------------------
# train


def run_train(cfg: PipelineConfig):
    check_prerequisite(cfg, "train")
    out = Path(cfg.output_root)
    per_clip = load_split_events(cfg, cfg.train_split)
    events = EventSet.concatenate(per_clip.values())
    if len(events) == 0:
        raise StageError("no training events were extracted; check the RoI thresholds")
    mdir = out / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    for old in mdir.glob("*.pt"):
        old.unlink()
    t0 = time.time()
    ms = train_all(events, cfg.train_config(), cfg.grid_rows * cfg.grid_cols, mdir, cfg.modalities,
                   cfg.global_fallback, cfg.hash(), out / "train_log.jsonl")
    metric = cfg.metric_config()
    scored = score_events(ms, events, metric, with_maps=False)
    save_event_scores(out / "train_scores.npz", scored, events)
    stats = stats_from_scores(scored)
    save_stats(out / "stats.json", stats, cfg.hash())
    write_manifest(cfg, "train", n_events=len(events), n_models=len(ms.nets), seconds=round(time.time() - t0, 1))
    return ms, stats


def stats_from_scores(scored: EventScores, types=None) -> dict:
    """Per-block training statistics, optionally restricted to some test types (1-based)."""
    sel = slice(None) if types is None else [i - 1 for i in types]
    S_a = scored.per_type_a[:, sel].mean(axis=1)
    S_m = None if scored.per_type_m is None else scored.per_type_m[:, sel].mean(axis=1)
    stats = {}
    for block in np.unique(scored.model_block):
        m = scored.model_block == block
        stats[int(block)] = ScoreStats.from_scores(S_a[m], None if S_m is None else S_m[m])
    return stats


def save_event_scores(path, scored: EventScores, events: EventSet):
    arrays = dict(per_type_a=scored.per_type_a, model_block=scored.model_block, frame_idx=events.frame_idx,
                  block_idx=events.block_idx)
    if scored.per_type_m is not None:
        arrays["per_type_m"] = scored.per_type_m
    np.savez(path, **arrays)


def load_event_scores(path) -> tuple[EventScores, np.ndarray]:
    with np.load(path) as z:
        pa = z["per_type_a"]
        pm = z["per_type_m"] if "per_type_m" in z.files else None
        sc = EventScores(pa, pm, pa.mean(axis=1), None if pm is None else pm.mean(axis=1), z["model_block"], None)
        return sc, z["frame_idx"]


# ---------------------------------------------------------------------------
# score


def run_score(cfg: PipelineConfig, model_set: ModelSet | None = None):
    check_prerequisite(cfg, "score")
    out = Path(cfg.output_root)
    ms = model_set or ModelSet.load(out / "models", cfg.device)
    stale = [h for h in getattr(ms, "config_hashes", ()) if h != cfg.hash()]
    if stale:
        raise StageError(f"checkpoints carry config hash {stale[0]}, current {cfg.hash()}; rerun `vcc train`")
    stats, h = load_stats(out / "stats.json")
    if h != cfg.hash():
        raise StageError(f"stats.json carries config hash {h}, current {cfg.hash()}; rerun `vcc train`")
    metric = cfg.metric_config()
    sdir = out / "scores"
    sdir.mkdir(parents=True, exist_ok=True)
    series = {}
    for clip_id, events in load_split_events(cfg, cfg.test_split).items():
        H, W = events.frame_shape
        if len(events):
            scored = score_events(ms, events, metric, with_maps=False)
            S = fuse_event_scores(scored, stats, metric)
            maps = paste_score_maps(S, events.boxes, events.frame_idx, events.n_frames, (H, W))
            save_event_scores(sdir / f"{clip_id}.events.npz", scored, events)
        else:
            S = np.zeros(0)
            maps = np.zeros((events.n_frames, H, W), np.float32)
            np.savez(sdir / f"{clip_id}.events.npz", per_type_a=np.zeros((0, cfg.D)), model_block=np.zeros(0, np.int64),
                     frame_idx=np.zeros(0, np.int64), block_idx=np.zeros(0, np.int64))
        s = score_series(events.frame_idx, S, events.n_frames, metric, cfg.D - 1)
        np.savetxt(sdir / f"{clip_id}.txt", s.rectified, fmt="%.9g")
        np.savetxt(sdir / f"{clip_id}.raw.txt", s.raw, fmt="%.9g")
        np.savez_compressed(sdir / f"{clip_id}.maps.npz", maps=maps, config_hash=np.array(cfg.hash()))
        series[clip_id] = s
    write_manifest(cfg, "score", clips=sorted(series))
    return series


# ---------------------------------------------------------------------------
# evaluate


def _test_ground_truth(cfg, clip_id, n_frames):
    return datasets.load_ground_truth(cfg.gt_dir, clip_id, n_frames)


def variant_frame_scores(cfg: PipelineConfig, types=None, w_a=None, w_m=None, rectified=True) -> dict:
    """Frame scores per test clip for an ablated scorer, recomputed from the
    stored per-type event scores: a subset of test types and/or modality
    weights, with or without rectification."""
    out = Path(cfg.output_root)
    metric = cfg.metric_config()
    train_scored, _ = load_event_scores(out / "train_scores.npz")
    stats = stats_from_scores(train_scored, types)
    sel = slice(None) if types is None else [i - 1 for i in types]
    w_a = metric.w_a if w_a is None else w_a
    w_m = metric.w_m if w_m is None else w_m
    res = {}
    for clip_id in read_manifest(cfg, "score")["clips"]:
        sc, fidx = load_event_scores(out / "scores" / f"{clip_id}.events.npz")
        n_frames = len(np.loadtxt(out / "scores" / f"{clip_id}.raw.txt", ndmin=1))
        if len(fidx):
            sc.S_a = sc.per_type_a[:, sel].mean(axis=1)
            if sc.per_type_m is not None:
                sc.S_m = sc.per_type_m[:, sel].mean(axis=1)
            S = fuse_event_scores(sc, stats, metric, w_a, w_m)
        else:
            S = np.zeros(0)
        raw = frame_scores(fidx, S, n_frames, cfg.D - 1)
        res[clip_id] = rectify(raw, metric.rect_scheme, metric.W, metric.q, metric.sigma) if rectified else raw
    return res


def _concat_labels(cfg, clip_ids, lengths):
    return np.concatenate([_test_ground_truth(cfg, c, n).frame_labels for c, n in zip(clip_ids, lengths)])


def ablation_aucs(cfg: PipelineConfig) -> dict:
    clips = read_manifest(cfg, "score")["clips"]

    def auc(**kw):
        s = variant_frame_scores(cfg, **kw)
        labels = _concat_labels(cfg, clips, [len(s[c]) for c in clips])
        return frame_level_roc(np.concatenate([s[c] for c in clips]), labels).auc

    res = {"full": auc(), "unrectified": auc(rectified=False)}
    for i in range(1, cfg.D + 1):
        res[f"type{i}"] = auc(types=[i])
    if "motion" in cfg.modalities:
        res["appearance_only"] = auc(w_m=0.0)
        res["motion_only"] = auc(w_a=0.0)
    return res


def run_evaluate(cfg: PipelineConfig, ablations=True):
    check_prerequisite(cfg, "evaluate")
    out = Path(cfg.output_root)
    edir = out / "evaluation"
    edir.mkdir(parents=True, exist_ok=True)
    clips = read_manifest(cfg, "score")["clips"]
    scores, raw, labels, crit = [], [], [], []
    have_masks = True
    for clip_id in clips:
        s = np.loadtxt(out / "scores" / f"{clip_id}.txt", ndmin=1)
        gt = _test_ground_truth(cfg, clip_id, len(s))
        scores.append(s)
        raw.append(np.loadtxt(out / "scores" / f"{clip_id}.raw.txt", ndmin=1))
        labels.append(gt.frame_labels)
        if gt.pixel_masks is None:
            have_masks = False
        elif have_masks:
            with np.load(out / "scores" / f"{clip_id}.maps.npz") as z:
                crit.append(critical_scores(z["maps"], gt.pixel_masks, gt.frame_labels))
    labels = np.concatenate(labels)
    frame = frame_level_roc(np.concatenate(scores), labels)
    frame.save(edir / "roc_frame.txt")
    metrics = {
        "frame_auc": frame.auc, "frame_eer": frame.eer,
        "frame_auc_unrectified": frame_level_roc(np.concatenate(raw), labels).auc,
        "n_frames": int(len(labels)), "n_anomalous": int(labels.sum()),
    }
    if have_masks:
        pixel = roc_from_scores(np.concatenate(crit), labels)
        pixel.save(edir / "roc_pixel.txt")
        metrics.update(pixel_auc=pixel.auc, pixel_eer=pixel.eer)
    if ablations:
        metrics["ablation"] = ablation_aucs(cfg)
    (edir / "metrics.json").write_text(json.dumps(metrics, indent=1, sort_keys=True))
    write_manifest(cfg, "evaluate", **{k: v for k, v in metrics.items() if k != "ablation"})
    return metrics


# ---------------------------------------------------------------------------
# plot


def _load_roc(path):
    from .evaluation import RocCurve, auc_trapezoid, equal_error_rate

    arr = np.loadtxt(path, ndmin=2)
    thr, fpr, tpr = arr[:, 0], arr[:, 1], arr[:, 2]
    return RocCurve(thr, fpr, tpr, auc_trapezoid(fpr, tpr), equal_error_rate(fpr, tpr))


def run_plot(cfg: PipelineConfig):
    check_prerequisite(cfg, "plot")
    out = Path(cfg.output_root)
    curves = {"frame-level": _load_roc(out / "evaluation" / "roc_frame.txt")}
    if (out / "evaluation" / "roc_pixel.txt").exists():
        curves["pixel-level"] = _load_roc(out / "evaluation" / "roc_pixel.txt")
    path = out / "plots" / "roc.png"
    plot_roc(curves, path, title=cfg.name)
    write_manifest(cfg, "plot", path=str(path))
    return path


RUNNERS = {"extract": run_extract, "train": run_train, "score": run_score, "evaluate": run_evaluate, "plot": run_plot}


def run_stage(stage, cfg: PipelineConfig):
    if stage not in RUNNERS:
        raise StageError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    return RUNNERS[stage](cfg)


def run_all(cfg: PipelineConfig):
    res = {}
    for stage in STAGES:
        res[stage] = run_stage(stage, cfg)
    return res
