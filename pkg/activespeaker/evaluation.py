"""
Frame-level metrics: average precision, F1, ROC-AUC and per-bucket breakdowns.
"""

import logging
import math
from dataclasses import asdict, dataclass, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from sklearn import metrics as skmetrics

from .exceptions import ColumnNotFoundError, InvalidArgumentError, UndefinedMetricError, ValidationError
from .readers import read_annotations, read_manifest, read_scores
from .validators import SPEAKING_LABELS, check_annotation_table, check_score_table
from .writers import save_csv_file, save_json

logger = logging.getLogger(__name__)

FACETS = ("face_size", "n_faces")
SMALL_FACE_PX = 64
LARGE_FACE_PX = 128
FACE_SIZE_BUCKETS = ("Small", "Middle", "Large")
N_FACES_BUCKETS = ("1", "2", "3")


@dataclass
class ScoredFrame:
    clip_id: str
    frame_index: int
    score: float
    label: int
    face_width_px: Optional[int] = None
    n_faces: Optional[int] = None


FramesLike = Union["ScoreTable", pd.DataFrame, Iterable[ScoredFrame]]


def _as_frame(frames: FramesLike) -> pd.DataFrame:
    if isinstance(frames, ScoreTable):
        return frames.df
    if isinstance(frames, pd.DataFrame):
        return frames
    rows = [asdict(f) if is_dataclass(f) else dict(f) for f in frames]
    if not rows:
        return pd.DataFrame(columns=list(ScoredFrame.__dataclass_fields__))
    return pd.DataFrame(rows)


def _require(df: pd.DataFrame, *columns: str) -> None:
    for column in columns:
        if column not in df.columns:
            raise ColumnNotFoundError(column, df.columns)


def rank_frames(frames: FramesLike) -> pd.DataFrame:
    """Frames sorted by score descending, ties broken by (clip_id, frame_index) ascending."""
    df = _as_frame(frames)
    _require(df, "clip_id", "frame_index", "score", "label")
    ranked = df.assign(_cid=df["clip_id"].astype(str))
    ranked = ranked.sort_values(["score", "_cid", "frame_index"], ascending=[False, True, True], kind="mergesort")
    return ranked.drop(columns="_cid").reset_index(drop=True)


def average_precision(frames: FramesLike) -> float:
    """
    Unsmoothed average precision of the speaking class.

    AP = (1/P) * sum of precision@k over the ranks k that hold a positive,
    with P the total number of positives. All scored frames are pooled
    (micro-average) regardless of clip.

    Raises:
        UndefinedMetricError: If there are no positive labels
    """
    ranked = rank_frames(frames)
    labels = ranked["label"].to_numpy(dtype=np.int64)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("Average precision is undefined without positive labels")
    true_positives = np.cumsum(labels)
    ranks = np.arange(1, len(labels) + 1)
    precision_at_hits = true_positives[labels == 1] / ranks[labels == 1]
    return math.fsum(precision_at_hits.tolist()) / n_pos


def f1_score(frames: FramesLike, threshold: float = 0.5) -> float:
    """F1 of the speaking class with prediction = score >= threshold; 0 when precision + recall is 0."""
    df = _as_frame(frames)
    _require(df, "score", "label")
    y_true = df["label"].to_numpy(dtype=np.int64)
    y_pred = (df["score"].to_numpy(dtype=np.float64) >= threshold).astype(np.int64)
    return float(skmetrics.f1_score(y_true, y_pred, labels=[0, 1], pos_label=1, average="binary",
                                    zero_division=0))


def roc_auc(frames: FramesLike) -> float:
    """
    Area under the ROC curve of the speaking scores.

    Raises:
        UndefinedMetricError: Unless both classes are present
    """
    df = _as_frame(frames)
    _require(df, "score", "label")
    y_true = df["label"].to_numpy(dtype=np.int64)
    if len(np.unique(y_true)) < 2:
        raise UndefinedMetricError("ROC-AUC needs both speaking and non-speaking frames")
    return float(skmetrics.roc_auc_score(y_true, df["score"].to_numpy(dtype=np.float64)))


def face_size_bucket(width_px: float) -> str:
    if width_px < SMALL_FACE_PX:
        return "Small"
    if width_px <= LARGE_FACE_PX:
        return "Middle"
    return "Large"


def n_faces_bucket(n_faces: int) -> str:
    return str(min(max(int(n_faces), 1), 3))


def breakdown(frames: FramesLike, facet: str) -> pd.DataFrame:
    """
    Per-bucket AP for one facet.

    face_size buckets are Small (< 64 px), Middle (64-128 px) and Large (> 128 px);
    n_faces buckets are 1, 2 and 3. Buckets without frames are omitted, and a
    bucket whose frames hold no positive label reports map None.

    Returns:
        DataFrame with columns bucket, map, count
    """
    if facet not in FACETS:
        raise InvalidArgumentError(f"Unknown facet '{facet}'. Expected one of {list(FACETS)}")
    df = _as_frame(frames)
    if facet == "face_size":
        _require(df, "face_width_px")
        keys, order = df["face_width_px"].map(face_size_bucket), FACE_SIZE_BUCKETS
    else:
        _require(df, "n_faces")
        keys, order = df["n_faces"].map(n_faces_bucket), N_FACES_BUCKETS

    rows = []
    for bucket in order:
        subset = df[keys == bucket]
        if subset.empty:
            continue
        if int(subset["label"].sum()) == 0:
            logger.warning("Bucket %s/%s has no speaking frames; AP undefined", facet, bucket)
            ap = None
        else:
            ap = average_precision(subset)
        rows.append({"bucket": bucket, "map": ap, "count": int(len(subset))})
    table = pd.DataFrame(rows, columns=["bucket", "map", "count"])
    # object dtype keeps None instead of NaN for undefined buckets
    table["map"] = pd.Series([row["map"] for row in rows], index=table.index, dtype=object)
    return table


def metrics_report(frames: FramesLike, threshold: float = 0.5) -> Dict[str, Any]:
    """
    JSON-ready metrics: map, f1, auc and the available breakdowns.

    auc is None when only one class is present; facets whose metadata
    columns are absent are skipped.
    """
    df = _as_frame(frames)
    try:
        auc = roc_auc(df)
    except UndefinedMetricError:
        auc = None
    buckets: List[Dict[str, Any]] = []
    for facet, column in (("face_size", "face_width_px"), ("n_faces", "n_faces")):
        if column in df.columns and df[column].notna().all():
            for row in breakdown(df, facet).to_dict("records"):
                buckets.append({"facet": facet, **row})
    return {
        "map": average_precision(df),
        "f1": f1_score(df, threshold),
        "auc": auc,
        "n_frames": int(len(df)),
        "threshold": threshold,
        "buckets": buckets,
    }


def join_annotations(scores: pd.DataFrame, annotations: pd.DataFrame, fps: float) -> pd.DataFrame:
    """
    Attach 0/1 labels from an annotation table to a score table.

    Annotation timestamps are mapped to frame indices with round(t * fps).

    Raises:
        ValidationError: If a scored frame has no annotation
    """
    check_annotation_table(annotations)
    ann = pd.DataFrame({
        "clip_id": annotations["clip_id"].astype(str),
        "frame_index": np.rint(annotations["frame_timestamp_s"].to_numpy(dtype=np.float64) * fps).astype(np.int64),
        "label": (annotations["label"] == SPEAKING_LABELS[0]).astype(np.int64),
    }).drop_duplicates(subset=["clip_id", "frame_index"])
    left = scores.drop(columns=[c for c in ("label",) if c in scores.columns])
    left = left.assign(clip_id=left["clip_id"].astype(str), frame_index=left["frame_index"].astype(np.int64))
    merged = left.merge(ann, on=["clip_id", "frame_index"], how="left", validate="one_to_one")
    missing = merged["label"].isna()
    if missing.any():
        raise ValidationError(f"{int(missing.sum())} scored frames have no annotation", column="frame_index",
                              row=merged.index[missing].tolist()[:10])
    merged["label"] = merged["label"].astype(np.int64)
    return merged


def attach_meta(scores: pd.DataFrame, manifest: pd.DataFrame) -> pd.DataFrame:
    """Add face_width_px and n_faces per clip from a manifest."""
    meta = manifest[["clip_id", "face_width_px", "n_faces"]].assign(clip_id=manifest["clip_id"].astype(str))
    base = scores.drop(columns=[c for c in ("face_width_px", "n_faces") if c in scores.columns])
    return base.assign(clip_id=base["clip_id"].astype(str)).merge(meta, on="clip_id", how="left")


class ScoreTable:
    """
    Per-frame speaking scores with labels and optional face metadata.

    A thin wrapper around a pandas DataFrame with columns clip_id,
    frame_index, score, label and optionally face_width_px, n_faces.
    """

    def __init__(self, data: Union[pd.DataFrame, str, Path], validate: bool = True):
        if isinstance(data, pd.DataFrame):
            self._df = data.copy()
        elif isinstance(data, (str, Path)):
            self._df = read_scores(data)
        else:
            raise InvalidArgumentError("Data must be a DataFrame or file path")
        if validate:
            check_score_table(self._df)

    @classmethod
    def from_arrays(cls, clip_ids: Iterable[str], scores: Iterable[np.ndarray],
                    labels: Optional[Iterable[np.ndarray]] = None) -> "ScoreTable":
        """Build a table from per-clip score arrays (and optional label arrays)."""
        frames = []
        label_list = list(labels) if labels is not None else None
        for i, (clip_id, s) in enumerate(zip(clip_ids, scores)):
            s = np.asarray(s, dtype=np.float64).reshape(-1)
            part = {"clip_id": str(clip_id), "frame_index": np.arange(len(s)), "score": s}
            if label_list is not None:
                part["label"] = np.asarray(label_list[i], dtype=np.int64).reshape(-1)[:len(s)]
            frames.append(pd.DataFrame(part))
        columns = ["clip_id", "frame_index", "score"] + (["label"] if label_list is not None else [])
        df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
        return cls(df)

    @classmethod
    def from_files(cls, scores_path: Union[str, Path], annotations_path: Optional[Union[str, Path]] = None,
                   manifest_path: Optional[Union[str, Path]] = None, fps: float = 25.0) -> "ScoreTable":
        """
        Load a score CSV, taking labels from an annotation CSV when the scores have none.

        Raises:
            InvalidArgumentError: If neither file provides labels
        """
        df = read_scores(scores_path)
        if annotations_path is not None:
            df = join_annotations(df, read_annotations(annotations_path), fps)
        elif "label" not in df.columns:
            raise InvalidArgumentError(f"'{scores_path}' has no label column and no annotation file was given")
        if manifest_path is not None:
            df = attach_meta(df, read_manifest(manifest_path))
        return cls(df)

    @property
    def df(self) -> pd.DataFrame:
        return self._df

    @property
    def shape(self) -> tuple:
        return self._df.shape

    @property
    def columns(self) -> List[str]:
        return list(self._df.columns)

    def __len__(self) -> int:
        return len(self._df)

    def __getitem__(self, key):
        if isinstance(key, str):
            if key not in self._df.columns:
                raise ColumnNotFoundError(key, self._df.columns)
            return self._df[key]
        return ScoreTable(self._df[key], validate=False)

    def __repr__(self) -> str:
        return f"ScoreTable(frames={len(self)}, clips={self._df['clip_id'].nunique() if len(self) else 0})"

    def average_precision(self) -> float:
        return average_precision(self._df)

    def f1_score(self, threshold: float = 0.5) -> float:
        return f1_score(self._df, threshold)

    def roc_auc(self) -> float:
        return roc_auc(self._df)

    def breakdown(self, facet: str) -> pd.DataFrame:
        return breakdown(self._df, facet)

    def report(self, threshold: float = 0.5) -> Dict[str, Any]:
        return metrics_report(self._df, threshold)

    def save(self, file_path: Union[str, Path], with_labels: bool = True) -> None:
        columns = ["clip_id", "frame_index", "score"]
        if with_labels and "label" in self._df.columns:
            columns.append("label")
        save_csv_file(self._df[columns], file_path)

    def save_report(self, file_path: Union[str, Path], threshold: float = 0.5) -> Dict[str, Any]:
        report = self.report(threshold)
        save_json(report, file_path)
        logger.info("Wrote metrics report to %s (mAP %.4f)", file_path, report["map"])
        return report
