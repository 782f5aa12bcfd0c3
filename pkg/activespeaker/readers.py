"""
Readers for CSV tables, WAV audio, TNSR1 tensors and JSON artifacts.
"""

import gzip
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd
import soundfile as sf

from .exceptions import ColumnNotFoundError, FileReadError
from .features import Waveform
from .utils import detect_encoding, is_compressed_file, validate_file_path

logger = logging.getLogger(__name__)

TENSOR_MAGIC_KEYS = {"dtype": "f32", "order": "row-major", "endian": "little"}

MANIFEST_COLUMNS = ("clip_id", "condition", "n_frames", "fps", "sample_rate", "faces_path", "audio_path",
                    "face_width_px", "n_faces")
ANNOTATION_COLUMNS = ("clip_id", "frame_timestamp_s", "x1", "y1", "x2", "y2", "label", "track_id")
SCORE_COLUMNS = ("clip_id", "frame_index", "score")


def read_csv_file(
    file_path: Union[str, Path],
    encoding: Optional[str] = None,
    delimiter: str = ',',
    **kwargs
) -> pd.DataFrame:
    """
    Read a CSV file, optionally gzip-compressed.

    Args:
        file_path: Path to the CSV file
        encoding: File encoding (auto-detected if None)
        delimiter: CSV delimiter
        **kwargs: Additional pandas read_csv parameters

    Returns:
        Pandas DataFrame

    Raises:
        FileReadError: If there's an error reading the file
    """
    file_path = Path(file_path)

    try:
        validate_file_path(file_path)

        if is_compressed_file(file_path):
            with gzip.open(file_path, 'rt', encoding=encoding or 'utf-8') as f:
                return pd.read_csv(f, sep=delimiter, **kwargs)

        if encoding is None:
            encoding = detect_encoding(file_path)
        return pd.read_csv(file_path, encoding=encoding, sep=delimiter, **kwargs)

    except Exception as e:
        raise FileReadError(file_path, e)


def require_columns(df: pd.DataFrame, columns: Iterable[str]) -> None:
    """Raise ColumnNotFoundError for the first required column missing from df."""
    for column in columns:
        if column not in df.columns:
            raise ColumnNotFoundError(column, df.columns)


def read_manifest(file_path: Union[str, Path]) -> pd.DataFrame:
    """
    Read a dataset manifest and resolve clip paths relative to its directory.

    Returns:
        DataFrame with one row per clip
    """
    file_path = Path(file_path)
    df = read_csv_file(file_path, dtype={"clip_id": str})
    require_columns(df, MANIFEST_COLUMNS)
    root = file_path.parent
    for column in ("faces_path", "audio_path"):
        df[column] = [str(root / p) for p in df[column]]
    return df


def read_annotations(file_path: Union[str, Path]) -> pd.DataFrame:
    """Read an AVA-style annotation CSV (one row per face-frame)."""
    df = read_csv_file(file_path, dtype={"clip_id": str, "track_id": str})
    require_columns(df, ANNOTATION_COLUMNS)
    return df


def read_scores(file_path: Union[str, Path]) -> pd.DataFrame:
    """Read a per-frame score CSV; the label column is optional."""
    df = read_csv_file(file_path, dtype={"clip_id": str})
    require_columns(df, SCORE_COLUMNS)
    return df


def read_wav(file_path: Union[str, Path]) -> Waveform:
    """
    Read a mono 16-bit PCM WAV file.

    Raises:
        FileReadError: If the file is missing, compressed, multi-channel or not 16-bit PCM
    """
    file_path = Path(file_path)
    try:
        validate_file_path(file_path)
        info = sf.info(str(file_path))
        if info.format != "WAV" or info.subtype != "PCM_16":
            raise ValueError(f"expected 16-bit PCM WAV, got {info.format}/{info.subtype}")
        if info.channels != 1:
            raise ValueError(f"expected mono audio, got {info.channels} channels")
        samples, sample_rate = sf.read(str(file_path), dtype="float32")
    except Exception as e:
        raise FileReadError(file_path, e)
    return Waveform(samples, int(sample_rate))


def read_tensor(file_path: Union[str, Path]) -> np.ndarray:
    """
    Read a TNSR1 container: one JSON header line, then raw little-endian float32 data.

    Returns:
        float32 array with the header's shape
    """
    file_path = Path(file_path)
    try:
        validate_file_path(file_path)
        with open(file_path, "rb") as f:
            header = json.loads(f.readline().decode("utf-8"))
            payload = f.read()
        for key, value in TENSOR_MAGIC_KEYS.items():
            if header.get(key) != value:
                raise ValueError(f"unsupported tensor header {key}={header.get(key)!r}")
        shape = tuple(int(s) for s in header["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if len(payload) != expected:
            raise ValueError(f"payload has {len(payload)} bytes, header shape {list(shape)} needs {expected}")
        return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    except FileReadError:
        raise
    except Exception as e:
        raise FileReadError(file_path, e)


def read_json(file_path: Union[str, Path]) -> Dict[str, Any]:
    file_path = Path(file_path)
    try:
        validate_file_path(file_path)
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        raise FileReadError(file_path, e)


def read_jsonl(file_path: Union[str, Path]) -> list:
    """Read a JSON-lines file into a list of records."""
    file_path = Path(file_path)
    try:
        validate_file_path(file_path)
        with open(file_path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except Exception as e:
        raise FileReadError(file_path, e)
