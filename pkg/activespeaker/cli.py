"""
Command-line entry point: data generation, training, evaluation and reports.
"""

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import (
    FIXED_FRAME_CHOICES,
    SCALE_ALIASES,
    SCALES,
    VIDEO_FPS,
    AugmentationPlan,
    ModelConfig,
    TrainConfig,
    canonical_scale,
    model_config,
)
from .evaluation import ScoreTable
from .exceptions import ActiveSpeakerError, InvalidArgumentError, UsageError
from .gradcheck import GRAD_TOLERANCE, check_ops
from .model import receptive_fields
from .readers import read_json, read_manifest
from .synthetic import build_dataset, dataset_summary, parse_mix
from .trainer import CHECKPOINT_META, ClipDataset, evaluate, infer, load_checkpoint, train
from .utils import config_hash, sha256_file
from .writers import save_csv_file, save_json

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DROP_CHOICES = ("none", "cross", "self", "both")
AUG_CHOICES = ("neg", "noise", "none")
SCALE_CHOICES = SCALES + tuple(SCALE_ALIASES)


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT, force=True)


def _split(value: str) -> List[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_frames(value: str) -> Optional[int]:
    """'variable' -> None, otherwise one of the fixed frame counts."""
    if value == "variable":
        return None
    try:
        frames = int(value)
    except ValueError:
        raise UsageError(f"--frames must be an integer or 'variable', got '{value}'")
    if frames not in FIXED_FRAME_CHOICES:
        raise UsageError(f"--frames must be one of {list(FIXED_FRAME_CHOICES)} or 'variable', got {frames}")
    return frames


def parse_duration(value: str) -> Tuple[float, float]:
    parts = _split(value)
    try:
        bounds = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--duration must be 'low,high' or a single value, got '{value}'")
    if len(bounds) == 1:
        return bounds[0], bounds[0]
    if len(bounds) != 2:
        raise UsageError(f"--duration must be 'low,high' or a single value, got '{value}'")
    return bounds[0], bounds[1]


def drop_flags(drop: str) -> Dict[str, bool]:
    if drop not in DROP_CHOICES:
        raise UsageError(f"--drop must be one of {list(DROP_CHOICES)}, got '{drop}'")
    return {
        "use_cross_attention": drop not in ("cross", "both"),
        "use_self_attention": drop not in ("self", "both"),
    }


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    data = read_json(path)
    if not isinstance(data, dict):
        raise UsageError(f"Config file '{path}' must hold a JSON object")
    return data


def resolve_configs(args: argparse.Namespace, drop: Optional[str] = None, aug: Optional[str] = None,
                    frames: Optional[str] = None, seed: Optional[int] = None) -> Tuple[TrainConfig, ModelConfig]:
    """
    Merge defaults, the JSON config file and command-line flags (flags win).

    The config file may hold 'train' and 'model' sections; model entries are
    options of model_config (e.g. use_cross_attention).
    """
    file_cfg = load_config_file(getattr(args, "config", None))
    train_data = TrainConfig().to_dict()
    train_data.update(file_cfg.get("train", {}))
    model_opts: Dict[str, Any] = dict(file_cfg.get("model", {}))

    flag_map = {"epochs": "epochs", "batch_size": "batch_size", "lr": "lr0", "lr_decay": "lr_decay_per_epoch",
                "scale": "model_scale", "workers": "num_workers", "eval_noise_snr": "eval_noise_snr"}
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            train_data[key] = value
    seed = seed if seed is not None else getattr(args, "seed", None)
    if seed is not None:
        train_data["seed"] = seed

    frames = frames if frames is not None else getattr(args, "frames", None)
    if frames is not None:
        train_data["fixed_frames"] = parse_frames(frames)

    aug = aug if aug is not None else getattr(args, "aug", None)
    try:
        cfg = TrainConfig.from_dict(train_data)
        if aug is not None:
            if aug not in AUG_CHOICES:
                raise UsageError(f"--aug must be one of {list(AUG_CHOICES)}, got '{aug}'")
            if aug == "noise" and not getattr(args, "noise_dir", None):
                raise UsageError("--aug noise needs --noise-dir")
            cfg.augmentation = AugmentationPlan.for_mode(aug, getattr(args, "noise_dir", None), seed=cfg.seed)
        drop = drop if drop is not None else getattr(args, "drop", None)
        if drop is not None:
            model_opts.update(drop_flags(drop))
        model_opts["seed"] = cfg.seed
        mcfg = model_config(cfg.model_scale, **model_opts)
    except InvalidArgumentError as e:
        raise UsageError(str(e))
    return cfg, mcfg


def echo_config(command: str, settings: Dict[str, Any], out_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Log the resolved settings of a command, seed included, and write them to
    out_dir/resolved_config.json when the command has an output directory.
    """
    resolved = {"command": command, **settings}
    resolved["config_hash"] = config_hash(resolved)
    logger.info("Resolved config: %s", json.dumps(resolved, sort_keys=True, default=str))
    if out_dir is not None:
        save_json(resolved, out_dir / "resolved_config.json")
    return resolved


def run_settings(cfg: TrainConfig, mcfg: ModelConfig) -> Dict[str, Any]:
    return {"train": cfg.to_dict(), "model": mcfg.to_dict(), "seed": cfg.seed}


def checkpoint_seed(checkpoint_dir: str) -> Optional[int]:
    meta = read_json(Path(checkpoint_dir) / CHECKPOINT_META)
    return meta.get("rng_state", {}).get("seed")


def cmd_gen_data(args: argparse.Namespace) -> int:
    low, high = parse_duration(args.duration)
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    if low <= 0 or low > high:
        raise UsageError(f"--duration needs 0 < low <= high, got '{args.duration}'")
    try:
        mix = parse_mix(args.mix)
    except InvalidArgumentError as e:
        raise UsageError(str(e))
    out = Path(args.out)
    echo_config("gen-data", {"n": args.n, "mix": {str(k): v for k, v in mix.items()}, "duration": [low, high],
                             "seed": args.seed, "fps": args.fps, "sync_lag_frames": args.sync_lag}, out)
    manifest_path = build_dataset(args.n, mix, out, seed=args.seed, duration_range_s=(low, high), fps=args.fps,
                                  sync_lag_frames=args.sync_lag, workers=args.workers)
    summary = dataset_summary(read_manifest(manifest_path))
    summary["manifest"] = str(manifest_path)
    summary["manifest_sha256"] = sha256_file(manifest_path)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg, mcfg = resolve_configs(args)
    out = Path(args.out)
    echo_config("train", run_settings(cfg, mcfg), out)
    result = train(args.manifest, cfg, out, model_cfg=mcfg, val_manifest=args.val_manifest, resume=args.resume)
    final = result.history[-1].to_dict() if result.history else {}
    print(json.dumps({"best_val_map": result.best_val_map, "final": final,
                      "checkpoint": str(result.checkpoint_dir)}, indent=2, sort_keys=True))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.scores and args.checkpoint:
        raise UsageError("Give either --scores or --checkpoint, not both")
    if not (args.scores or args.checkpoint):
        raise UsageError("eval needs --scores or --checkpoint")
    if args.checkpoint and not args.manifest:
        raise UsageError("--checkpoint needs --manifest")
    out = Path(args.out)
    seed = checkpoint_seed(args.checkpoint) if args.checkpoint else None
    echo_config("eval", {"scores": args.scores, "checkpoint": args.checkpoint, "manifest": args.manifest,
                         "eval_noise_snr": args.eval_noise_snr, "threshold": args.threshold, "seed": seed}, out)
    if args.scores:
        table = ScoreTable.from_files(args.scores, annotations_path=args.annotations,
                                      manifest_path=args.manifest, fps=args.fps)
    else:
        checkpoint = load_checkpoint(args.checkpoint)
        table = evaluate(checkpoint.model, ClipDataset(args.manifest), batch_size=args.batch_size,
                         eval_noise_snr=args.eval_noise_snr)
        table.save(out / "scores.csv")
    report = table.save_report(out / "metrics.json", threshold=args.threshold)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    echo_config("infer", {"checkpoint": args.checkpoint, "manifest": args.manifest, "out": args.out,
                          "batch_size": args.batch_size, "eval_noise_snr": args.eval_noise_snr,
                          "seed": checkpoint_seed(args.checkpoint)})
    table = infer(args.checkpoint, args.manifest, args.out, batch_size=args.batch_size,
                  eval_noise_snr=args.eval_noise_snr)
    print(f"Wrote {len(table)} frame scores to {args.out}")
    return 0


def cmd_grad_check(args: argparse.Namespace) -> int:
    names = _split(args.ops) if args.ops else None
    echo_config("grad-check", {"seeds": list(range(args.seeds)), "dtype": args.dtype, "ops": names, "eps": args.eps})
    try:
        results = check_ops(range(args.seeds), dtype=args.dtype, names=names, eps=args.eps)
    except InvalidArgumentError as e:
        raise UsageError(str(e))
    summary = results.groupby("op", sort=False)["max_rel_error"].max().reset_index()
    summary["passed"] = summary["max_rel_error"] < GRAD_TOLERANCE
    print(summary.to_string(index=False))
    failed = summary.loc[~summary["passed"], "op"].tolist()
    if failed:
        raise ActiveSpeakerError(f"Gradient check above {GRAD_TOLERANCE} for: {', '.join(failed)}")
    return 0


def rf_table(scale: str) -> pd.DataFrame:
    rf = receptive_fields(model_config(scale))
    return pd.DataFrame([
        {"encoder": "visual", "frames": rf["visual"]["frames"], "ms": rf["visual"]["ms"], "unit": "video frame"},
        {"encoder": "audio", "frames": rf["audio"]["frames"], "ms": rf["audio"]["ms"], "unit": "MFCC frame"},
    ])


def cmd_rf_report(args: argparse.Namespace) -> int:
    scale = canonical_scale(args.scale)
    mcfg = model_config(scale)
    echo_config("rf-report", {"model": mcfg.to_dict(), "seed": mcfg.seed})
    table = rf_table(scale)
    print(f"Receptive fields ({scale} scale, {VIDEO_FPS:g} fps video, 10 ms MFCC hop)")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.0f}"))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    drops, augs, frames_list = _split(args.drop), _split(args.aug), _split(args.frames)
    seeds = [int(s) for s in _split(args.seeds)]
    for drop in drops:
        drop_flags(drop)
    for frames in frames_list:
        parse_frames(frames)
    if not (drops and augs and frames_list and seeds):
        raise UsageError("--drop, --aug, --frames and --seeds need at least one value each")

    out = Path(args.out)
    rows = []
    for drop, aug, frames in itertools.product(drops, augs, frames_list):
        setting = f"drop-{drop}_aug-{aug}_frames-{frames}"
        maps = []
        for seed in seeds:
            cfg, mcfg = resolve_configs(args, drop=drop, aug=aug, frames=frames, seed=seed)
            run_dir = out / setting / f"seed{seed}"
            echo_config("ablate", run_settings(cfg, mcfg), run_dir)
            result = train(args.manifest, cfg, run_dir, model_cfg=mcfg)
            table = evaluate(result.model, ClipDataset(args.val_manifest), batch_size=cfg.batch_size,
                             eval_noise_snr=cfg.eval_noise_snr)
            maps.append(table.average_precision())
            logger.info("%s seed %d: mAP %.4f", setting, seed, maps[-1])
        rows.append({"drop": drop, "aug": aug, "frames": frames, "mean_map": float(np.mean(maps)),
                     "seed_maps": maps})

    table = pd.DataFrame(rows)
    save_json({"seeds": seeds, "rows": rows}, out / "ablation.json")
    save_csv_file(table.drop(columns="seed_maps"), out / "ablation.csv")
    print(table.to_string(index=False))
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="Training manifest CSV")
    p.add_argument("--out", required=True, help="Run directory")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--scale", choices=SCALE_CHOICES)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="Initial learning rate")
    p.add_argument("--lr-decay", type=float, help="Learning-rate multiplier per epoch")
    p.add_argument("--workers", type=int, help="Threads preparing batches")
    p.add_argument("--noise-dir", help="Directory of WAV files for the noise augmentation arm")
    p.add_argument("--eval-noise-snr", type=float, help="Corrupt evaluation audio with another clip at this SNR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activespeaker", description="Audio-visual active speaker detection")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True, help="Number of clips")
    p.add_argument("--mix", default="1:0.5,2:0.5", help="Condition proportions, e.g. 1:0.5,2:0.5")
    p.add_argument("--duration", default="1,6", help="Clip duration range in seconds, 'low,high'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=VIDEO_FPS)
    p.add_argument("--sync-lag", type=int, default=0, help="Audio envelope lag in frames for speaking clips")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="Train a model")
    _add_train_flags(p)
    p.add_argument("--val-manifest", help="Held-out manifest scored after every epoch")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", help="Fixed training frames (5, 10, 25, 50, 100) or 'variable'")
    p.add_argument("--aug", help="Audio augmentation: neg, noise or none")
    p.add_argument("--drop", help="Attention component to replace: none, cross, self or both")
    p.add_argument("--resume", help="Checkpoint directory to continue training from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Compute metrics from a score CSV or a checkpoint")
    p.add_argument("--scores", help="Score CSV (clip_id, frame_index, score[, label])")
    p.add_argument("--annotations", help="Annotation CSV providing labels")
    p.add_argument("--checkpoint", help="Checkpoint directory to score --manifest with")
    p.add_argument("--manifest", help="Manifest with clip paths and face metadata")
    p.add_argument("--out", required=True, help="Directory for metrics.json")
    p.add_argument("--fps", type=float, default=VIDEO_FPS)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--eval-noise-snr", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="Write per-frame scores for a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="Output score CSV")
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--eval-noise-snr", type=float)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("grad-check", help="Compare analytic and numeric gradients of every op")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    p.add_argument("--ops", help="Comma-separated op names (all by default)")
    p.add_argument("--eps", type=float, default=1e-3)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("rf-report", help="Print analytic receptive fields")
    p.add_argument("--scale", choices=SCALE_CHOICES, default="paper")
    p.set_defaults(func=cmd_rf_report)

    p = sub.add_parser("ablate", help="Train and evaluate every combination of the listed settings")
    _add_train_flags(p)
    p.add_argument("--val-manifest", required=True, help="Manifest the runs are evaluated on")
    p.add_argument("--drop", default="none", help="Comma-separated: none, cross, self, both")
    p.add_argument("--aug", default="neg", help="Comma-separated: neg, noise, none")
    p.add_argument("--frames", default="variable", help="Comma-separated frame counts or 'variable'")
    p.add_argument("--seeds", default="0", help="Comma-separated seeds")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run a command; returns 0 on success, 2 on usage errors and 1 on other failures."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except UsageError as e:
        logger.error("%s", e)
        return 2
    except ActiveSpeakerError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
