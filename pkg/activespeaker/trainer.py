"""
Training, evaluation and inference over a clip manifest.

Batches are prepared on a background thread (and optionally a worker pool)
and consumed in a fixed order, so every loss value depends only on the
configuration and its seed.
"""

import logging
import queue
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .augmentation import external_noise_mix, negative_sample_mix, visual_augment
from .classifier import frame_cross_entropy
from .config import ModelConfig, TrainConfig, model_config
from .evaluation import ScoreTable, attach_meta
from .exceptions import FileReadError, InvalidArgumentError
from .features import Waveform, align_lengths, extract_mfcc
from .model import ActiveSpeakerModel
from .optim import Adam, lr_at_epoch
from .readers import read_json, read_manifest, read_tensor, read_wav
from .synthetic import SPEAKING_CONDITION, FaceTrackClip
from .tensor import no_grad
from .utils import config_hash, derive_seeds
from .validators import check_manifest
from .writers import append_jsonl, save_json, write_tensor

logger = logging.getLogger(__name__)

CHECKPOINT_META = "meta.json"
PARAMS_DIR = "params"
OPTIMIZER_DIR = "optimizer"


class ClipDataset:
    """Clips listed in a manifest, loaded from disk on demand."""

    def __init__(self, manifest: Union[str, Path, pd.DataFrame]):
        df = manifest if isinstance(manifest, pd.DataFrame) else read_manifest(manifest)
        if df.empty:
            raise InvalidArgumentError(f"Manifest '{manifest}' lists no clips")
        check_manifest(df)
        self.df = df.reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.df)

    def __repr__(self) -> str:
        return f"ClipDataset(clips={len(self)}, frames={int(self.lengths.sum())})"

    @property
    def lengths(self) -> np.ndarray:
        return self.df["n_frames"].to_numpy(dtype=np.int64)

    @property
    def clip_ids(self) -> List[str]:
        return [str(c) for c in self.df["clip_id"]]

    def label_of(self, i: int) -> int:
        row = self.df.iloc[i]
        if "label" in self.df.columns and not pd.isna(row["label"]):
            return int(row["label"])
        return int(int(row["condition"]) == SPEAKING_CONDITION)

    def load(self, i: int) -> FaceTrackClip:
        """
        Read one clip.

        Raises:
            FileReadError: If a file is missing or its frame count disagrees with the manifest
        """
        row = self.df.iloc[i]
        T = int(row["n_frames"])
        faces = read_tensor(row["faces_path"])
        if faces.ndim != 4 or faces.shape[0] != T:
            raise FileReadError(row["faces_path"], ValueError(f"expected {T} frames, got shape {faces.shape}"))
        audio = align_lengths(read_wav(row["audio_path"]), float(row["fps"]), T, sample_rate=int(row["sample_rate"]))
        return FaceTrackClip(
            clip_id=str(row["clip_id"]),
            faces=faces,
            audio=audio,
            labels=np.full(T, self.label_of(i), dtype=np.int64),
            condition=int(row["condition"]),
            meta={"face_width_px": int(row["face_width_px"]), "n_faces_in_scene": int(row["n_faces"])},
        )


@dataclass
class BatchItem:
    index: int
    clip_id: str
    faces: np.ndarray
    mfcc: np.ndarray
    labels: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.labels)


@dataclass
class Batch:
    """Items of one common length stacked along a leading batch axis."""

    indices: List[int]
    clip_ids: List[str]
    faces: np.ndarray
    mfcc: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def n_frames(self) -> int:
        return int(self.labels.shape[1])


def collate(items: Sequence[BatchItem]) -> Batch:
    """
    Stack items into a batch. Batches are never padded.

    Raises:
        InvalidArgumentError: If the items differ in length
    """
    lengths = sorted({item.n_frames for item in items})
    if len(lengths) != 1:
        raise InvalidArgumentError(f"Batch items must share one length, got {lengths}")
    return Batch(
        indices=[item.index for item in items],
        clip_ids=[item.clip_id for item in items],
        faces=np.stack([item.faces for item in items]).astype(np.float32, copy=False),
        mfcc=np.stack([item.mfcc for item in items]).astype(np.float32, copy=False),
        labels=np.stack([item.labels for item in items]).astype(np.int64, copy=False),
    )


def plan_equal_length(lengths: Sequence[int], batch_size: int) -> List[List[int]]:
    """Batches of clips with exactly equal length, shortest length first, index order within a length."""
    groups: Dict[int, List[int]] = {}
    for i in sorted(range(len(lengths)), key=lambda i: (int(lengths[i]), i)):
        groups.setdefault(int(lengths[i]), []).append(i)
    return [group[j:j + batch_size] for group in groups.values() for j in range(0, len(group), batch_size)]


def plan_batches(lengths: Sequence[int], batch_size: int, seed: int, epoch: int, shuffle: bool = True,
                 by_length: bool = True) -> List[List[int]]:
    """
    Group clip indices into batches.

    With by_length, clips are sorted by length (index breaks ties), chunked,
    and the batch order is shuffled; otherwise clips are shuffled and chunked.
    """
    n = len(lengths)
    rng = np.random.default_rng(derive_seeds(seed, 1, epoch)[0])
    if by_length:
        order = sorted(range(n), key=lambda i: (int(lengths[i]), i))
        batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
        if shuffle:
            batches = [batches[j] for j in rng.permutation(len(batches))]
        return batches
    order = rng.permutation(n).tolist() if shuffle else list(range(n))
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def crop_clip(clip: FaceTrackClip, n_frames: int, start: int) -> FaceTrackClip:
    """
    Cut n_frames frames starting at start, with the matching audio span.

    Clips shorter than n_frames are returned whole.
    """
    T = clip.n_frames
    if T <= n_frames:
        return clip
    spf = len(clip.audio) // T
    samples = clip.audio.samples[start * spf:(start + n_frames) * spf]
    return FaceTrackClip(
        clip_id=clip.clip_id,
        faces=clip.faces[start:start + n_frames],
        audio=Waveform(samples, clip.audio.sample_rate),
        labels=clip.labels[start:start + n_frames],
        condition=clip.condition,
        meta=clip.meta,
    )


class ClipPreparer:
    """
    Turns a clip into a model-ready BatchItem: crop, audio and visual augmentation, MFCC.

    Every random choice is drawn from the clip's own seed.
    """

    def __init__(self, dataset: ClipDataset, cfg: TrainConfig, training: bool = True,
                 eval_noise_snr: Optional[float] = None):
        self.dataset = dataset
        self.cfg = cfg
        self.training = training
        self.eval_noise_snr = eval_noise_snr

    def crop_length(self, indices: Sequence[int]) -> Optional[int]:
        """Common training length of a batch: its shortest clip, capped at fixed_frames."""
        if not self.training:
            return None
        target = int(min(self.dataset.lengths[i] for i in indices))
        if self.cfg.fixed_frames is not None:
            target = min(target, self.cfg.fixed_frames)
        return target

    def __call__(self, index: int, peer_index: int, seed: int, n_frames: Optional[int] = None) -> BatchItem:
        crop_seed, audio_seed, visual_seed = derive_seeds(seed, 3)
        clip = self.dataset.load(index)
        plan = self.cfg.augmentation

        if self.training and n_frames is None:
            n_frames = self.cfg.fixed_frames
        if self.training and n_frames is not None and clip.n_frames > n_frames:
            start = int(np.random.default_rng(crop_seed).integers(0, clip.n_frames - n_frames + 1))
            clip = crop_clip(clip, n_frames, start)

        audio = clip.audio
        if self.training and plan.mode == "neg" and peer_index != index:
            low, high = plan.snr_db_range
            snr = float(np.random.default_rng(audio_seed).uniform(low, high)) if high > low else low
            audio = negative_sample_mix(audio, self.dataset.load(peer_index).audio, snr).waveform
        elif self.training and plan.mode == "noise":
            audio = external_noise_mix(audio, plan.noise_dir, plan.snr_db_range, audio_seed).waveform
        elif not self.training and self.eval_noise_snr is not None and peer_index != index:
            audio = negative_sample_mix(audio, self.dataset.load(peer_index).audio, self.eval_noise_snr).waveform

        faces = clip.faces
        if self.training and plan.visual is not None:
            faces = visual_augment(faces, plan.visual, visual_seed)

        mfcc = extract_mfcc(audio, clip.n_frames, sample_rate=audio.sample_rate)
        return BatchItem(index=index, clip_id=clip.clip_id, faces=faces, mfcc=mfcc, labels=clip.labels)


class BatchStream:
    """
    Prepares batches on a background thread and yields them in plan order.

    Args:
        batches: Clip indices per batch
        make_batch: Callable building a Batch from a list of indices
        prefetch: Batches kept ready ahead of the consumer
        pool: Worker pool used by make_batch, shut down with the stream
    """

    _DONE = object()

    def __init__(self, batches: Sequence[Sequence[int]], make_batch: Callable[[Sequence[int]], Batch],
                 prefetch: int = 2, pool: Optional[ThreadPoolExecutor] = None):
        self.batches = [list(b) for b in batches]
        self.make_batch = make_batch
        self.queue: "queue.Queue[Any]" = queue.Queue(maxsize=max(1, prefetch))
        self.is_running = False
        self.thread: Optional[threading.Thread] = None
        self.pool = pool

    def start(self) -> None:
        if self.is_running:
            return
        self.is_running = True
        self.thread = threading.Thread(target=self._produce, daemon=True)
        self.thread.start()

    def stop(self) -> None:
        self.is_running = False
        if self.thread:
            # unblock a producer waiting on a full queue
            while self.thread.is_alive():
                try:
                    self.queue.get_nowait()
                except queue.Empty:
                    pass
                self.thread.join(timeout=0.05)
            self.thread = None
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None

    def _produce(self) -> None:
        try:
            for indices in self.batches:
                if not self.is_running:
                    return
                self.queue.put(self.make_batch(indices))
        except Exception as e:
            self.queue.put(e)
            return
        self.queue.put(self._DONE)

    def __iter__(self) -> Iterator[Batch]:
        self.start()
        try:
            while True:
                item = self.queue.get()
                if item is self._DONE:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            self.stop()


def batch_maker(preparer: ClipPreparer, seeds: Sequence[int], n_clips: int,
                pool: Optional[ThreadPoolExecutor] = None) -> Callable[[Sequence[int]], Batch]:
    """
    Build batches of one common length.

    In training, negative-sampling peers are taken from the same batch (a
    batch of one borrows the next clip of the dataset) and every clip is
    cropped to the batch's crop length. Outside training the peer is always
    the next clip of the dataset, so a clip's input does not depend on the
    batch it lands in.
    """

    def make(indices: Sequence[int]) -> Batch:
        indices = list(indices)
        if preparer.training and len(indices) > 1:
            peers = indices[1:] + indices[:1]
        else:
            peers = [(i + 1) % n_clips for i in indices]
        n_frames = preparer.crop_length(indices)
        jobs = [(i, p, seeds[i], n_frames) for i, p in zip(indices, peers)]
        if pool is not None:
            items = list(pool.map(lambda job: preparer(*job), jobs))
        else:
            items = [preparer(*job) for job in jobs]
        return collate(items)

    return make


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_map: Optional[float]
    lr: float
    steps: int

    def to_dict(self) -> Dict[str, Any]:
        return {"epoch": self.epoch, "loss": self.loss, "val_map": self.val_map, "lr": self.lr, "steps": self.steps}


@dataclass
class TrainResult:
    model: ActiveSpeakerModel
    history: List[EpochRecord]
    best_val_map: Optional[float]
    checkpoint_dir: Optional[Path]


class Trainer:
    """
    Optimizes an ActiveSpeakerModel on a ClipDataset.

    The model is built from model_cfg (defaulting to the preset for
    cfg.model_scale with cfg.seed) and trained with Adam and the per-epoch
    learning-rate decay.
    """

    def __init__(self, cfg: TrainConfig, model_cfg: Optional[ModelConfig] = None):
        self.cfg = cfg
        self.model_cfg = model_cfg or model_config(cfg.model_scale, seed=cfg.seed)
        self.model = ActiveSpeakerModel(self.model_cfg)
        self.optimizer = Adam(self.model.parameters(), lr=lr_at_epoch(cfg, 0))
        self.step_losses: List[float] = []
        self.start_epoch = 0

    @classmethod
    def from_checkpoint(cls, checkpoint_dir: Union[str, Path], cfg: Optional[TrainConfig] = None) -> "Trainer":
        """
        Resume from a checkpoint: weights, optimizer moments and the next epoch.

        cfg defaults to the training config stored with the checkpoint; a
        larger cfg.epochs continues the run.
        """
        checkpoint = load_checkpoint(checkpoint_dir)
        if cfg is None:
            if not checkpoint.meta.get("train_config"):
                raise InvalidArgumentError(f"Checkpoint '{checkpoint_dir}' has no training config; pass one")
            cfg = TrainConfig.from_dict(checkpoint.meta["train_config"])
        trainer = cls(cfg, checkpoint.model.cfg)
        trainer.model = checkpoint.model
        trainer.optimizer = Adam(trainer.model.parameters(), lr=lr_at_epoch(cfg, 0))
        checkpoint.restore_optimizer(trainer.optimizer)
        trainer.start_epoch = int(checkpoint.meta["rng_state"]["next_epoch"])
        logger.info("Resuming from %s at epoch %d", checkpoint_dir, trainer.start_epoch)
        return trainer

    def train_step(self, batch: Batch) -> float:
        """One forward/backward/update on a batch; returns the loss before the update."""
        self.model.train()
        scores = self.model(batch.faces, batch.mfcc)
        loss = frame_cross_entropy(scores, batch.labels)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        value = loss.item()
        self.step_losses.append(value)
        logger.debug("step %d loss %.6f", len(self.step_losses), value)
        return value

    def epoch_batches(self, dataset: ClipDataset, epoch: int) -> BatchStream:
        cfg = self.cfg
        seeds = derive_seeds(cfg.seed, len(dataset), epoch)
        plan = plan_batches(dataset.lengths, cfg.batch_size, cfg.seed, epoch,
                            by_length=cfg.fixed_frames is None)
        preparer = ClipPreparer(dataset, cfg, training=True)
        pool = ThreadPoolExecutor(cfg.num_workers) if cfg.num_workers > 1 else None
        return BatchStream(plan, batch_maker(preparer, seeds, len(dataset), pool), pool=pool)

    def run_epoch(self, dataset: ClipDataset, epoch: int, max_steps: Optional[int] = None) -> EpochRecord:
        self.optimizer.lr = lr_at_epoch(self.cfg, epoch)
        stream = self.epoch_batches(dataset, epoch)
        losses = []
        for batch in stream:
            losses.append(self.train_step(batch))
            if max_steps is not None and len(losses) >= max_steps:
                break
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        return EpochRecord(epoch=epoch, loss=mean_loss, val_map=None, lr=self.optimizer.lr, steps=len(losses))

    def fit(self, dataset: ClipDataset, out_dir: Optional[Union[str, Path]] = None,
            val_dataset: Optional[ClipDataset] = None) -> TrainResult:
        """
        Train from start_epoch up to cfg.epochs.

        When out_dir is given, each epoch appends to metrics.jsonl and the
        checkpoint with the best validation mAP (the latest one when there is
        no validation set) is kept in out_dir/checkpoint.
        """
        out_dir = Path(out_dir) if out_dir is not None else None
        checkpoint_dir = out_dir / "checkpoint" if out_dir is not None else None
        history: List[EpochRecord] = []
        best: Optional[float] = None

        for epoch in range(self.start_epoch, self.cfg.epochs):
            record = self.run_epoch(dataset, epoch)
            if val_dataset is not None:
                table = evaluate(self.model, val_dataset, batch_size=self.cfg.batch_size,
                                 eval_noise_snr=self.cfg.eval_noise_snr)
                record.val_map = table.average_precision() if table.df["label"].sum() > 0 else None
            history.append(record)
            logger.info("epoch %d: loss %.4f, val mAP %s, lr %.3g", epoch, record.loss,
                        "n/a" if record.val_map is None else f"{record.val_map:.4f}", record.lr)

            if out_dir is None:
                continue
            append_jsonl(record.to_dict(), out_dir / "metrics.jsonl")
            improved = record.val_map is not None and (best is None or record.val_map > best)
            if improved or val_dataset is None:
                best = record.val_map if improved else best
                save_checkpoint(checkpoint_dir, self.model, self.optimizer, epoch, self.cfg,
                                {"val_map": record.val_map, "loss": record.loss})

        return TrainResult(model=self.model, history=history, best_val_map=best, checkpoint_dir=checkpoint_dir)


def train(manifest: Union[str, Path], cfg: TrainConfig, out_dir: Optional[Union[str, Path]] = None,
          model_cfg: Optional[ModelConfig] = None, val_manifest: Optional[Union[str, Path]] = None,
          resume: Optional[Union[str, Path]] = None) -> TrainResult:
    """
    Train a model on the clips of a manifest, optionally resuming a checkpoint.

    Raises:
        InvalidArgumentError: If the manifest lists no clips
    """
    dataset = ClipDataset(manifest)
    val_dataset = ClipDataset(val_manifest) if val_manifest is not None else None
    trainer = Trainer.from_checkpoint(resume, cfg) if resume is not None else Trainer(cfg, model_cfg)
    logger.info("Training %s model (%d parameters) on %r", trainer.model_cfg.scale,
                trainer.model.num_parameters(), dataset)
    return trainer.fit(dataset, out_dir, val_dataset)


def evaluate(model: ActiveSpeakerModel, dataset: ClipDataset, batch_size: int = 4,
             eval_noise_snr: Optional[float] = None) -> ScoreTable:
    """
    Score every frame of every clip with the model in eval mode.

    With eval_noise_snr set, each clip's audio is corrupted by the next
    clip's audio at that SNR. Clips are batched only with clips of the same
    length, so a clip's scores do not depend on batch_size.

    Returns:
        ScoreTable with labels and face metadata
    """
    cfg = TrainConfig(batch_size=batch_size)
    preparer = ClipPreparer(dataset, cfg, training=False, eval_noise_snr=eval_noise_snr)
    seeds = derive_seeds(0, len(dataset))
    plan = plan_equal_length(dataset.lengths, batch_size)
    make = batch_maker(preparer, seeds, len(dataset))

    was_training = model.training
    model.eval()
    clip_ids, scores, labels = [], [], []
    with no_grad():
        for batch in BatchStream(plan, make):
            out = model(batch.faces, batch.mfcc).numpy()
            for i, clip_id in enumerate(batch.clip_ids):
                clip_ids.append(clip_id)
                scores.append(out[i].astype(np.float64))
                labels.append(batch.labels[i])
    model.train(was_training)

    table = ScoreTable.from_arrays(clip_ids, scores, labels)
    frames = attach_meta(table.df, dataset.df)
    return ScoreTable(frames.sort_values(["clip_id", "frame_index"], kind="mergesort").reset_index(drop=True))


def save_checkpoint(directory: Union[str, Path], model: ActiveSpeakerModel, optimizer: Optional[Adam],
                    epoch: int, cfg: Optional[TrainConfig] = None, metrics: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write parameters, buffers and optimizer moments as TNSR1 files plus meta.json.

    The trainer's randomness is a function of (seed, epoch), so the RNG state
    is recorded as the seed and the next epoch.
    """
    directory = Path(directory)
    state = model.state_dict()
    for name, value in state.items():
        write_tensor(value, directory / PARAMS_DIR / f"{name}.tnsr")
    opt_state = optimizer.state_dict() if optimizer is not None else {}
    for name, value in opt_state.items():
        write_tensor(value, directory / OPTIMIZER_DIR / f"{name}.tnsr")
    meta = {
        "epoch": epoch,
        "model_config": model.cfg.to_dict(),
        "train_config": cfg.to_dict() if cfg is not None else None,
        "config_hash": config_hash(cfg) if cfg is not None else config_hash(model.cfg),
        "rng_state": {"seed": cfg.seed if cfg is not None else model.cfg.seed, "next_epoch": epoch + 1},
        "params": list(state),
        "optimizer": list(opt_state),
        "metrics": metrics or {},
    }
    save_json(meta, directory / CHECKPOINT_META)
    logger.info("Saved checkpoint for epoch %d to %s", epoch, directory)
    return directory


@dataclass
class Checkpoint:
    model: ActiveSpeakerModel
    meta: Dict[str, Any]
    optimizer_state: Dict[str, np.ndarray]

    def restore_optimizer(self, optimizer: Adam) -> None:
        if self.optimizer_state:
            optimizer.load_state_dict(self.optimizer_state)


def load_checkpoint(directory: Union[str, Path]) -> Checkpoint:
    """
    Rebuild the model of a checkpoint directory and load its weights.

    Raises:
        FileReadError: If meta.json or a tensor file is missing or malformed
    """
    directory = Path(directory)
    meta = read_json(directory / CHECKPOINT_META)
    model = ActiveSpeakerModel(ModelConfig.from_dict(meta["model_config"]))
    state = {name: read_tensor(directory / PARAMS_DIR / f"{name}.tnsr") for name in meta["params"]}
    model.load_state_dict(state)
    opt_state = {name: read_tensor(directory / OPTIMIZER_DIR / f"{name}.tnsr") for name in meta.get("optimizer", [])}
    return Checkpoint(model=model, meta=meta, optimizer_state=opt_state)


def infer(checkpoint_dir: Union[str, Path], manifest: Union[str, Path], out_csv: Union[str, Path],
          batch_size: int = 4, eval_noise_snr: Optional[float] = None) -> ScoreTable:
    """Write per-frame scores (clip_id, frame_index, score) for every clip of a manifest."""
    checkpoint = load_checkpoint(checkpoint_dir)
    table = evaluate(checkpoint.model, ClipDataset(manifest), batch_size=batch_size, eval_noise_snr=eval_noise_snr)
    table.save(out_csv, with_labels=False)
    logger.info("Wrote %d frame scores to %s", len(table), out_csv)
    return table
