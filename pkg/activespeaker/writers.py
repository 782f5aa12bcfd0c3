"""
Writers for CSV tables, WAV audio, TNSR1 tensors and JSON artifacts.
"""

import gzip
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import soundfile as sf

from .exceptions import SaveError
from .utils import json_default, is_compressed_file

logger = logging.getLogger(__name__)


def save_csv_file(
    df: pd.DataFrame,
    file_path: Union[str, Path],
    index: bool = False,
    encoding: str = 'utf-8',
    delimiter: str = ',',
    **kwargs
) -> None:
    """
    Save a DataFrame to a CSV file, gzip-compressed when the path ends in .gz.

    Args:
        df: Pandas DataFrame to save
        file_path: Path where to save the file
        index: Whether to include the index
        encoding: File encoding
        delimiter: CSV delimiter
        **kwargs: Additional pandas to_csv parameters

    Raises:
        SaveError: If there's an error saving the file
    """
    file_path = Path(file_path)

    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)

        if is_compressed_file(file_path):
            with gzip.open(file_path, 'wt', encoding=encoding) as f:
                df.to_csv(f, index=index, sep=delimiter, **kwargs)
        else:
            df.to_csv(file_path, index=index, encoding=encoding, sep=delimiter, **kwargs)

    except Exception as e:
        raise SaveError(file_path, e)


def write_wav(samples: np.ndarray, file_path: Union[str, Path], sample_rate: int) -> None:
    """
    Write mono audio as 16-bit PCM WAV.

    Raises:
        SaveError: If the file cannot be written
    """
    file_path = Path(file_path)
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        data = np.clip(np.asarray(samples, dtype=np.float32).reshape(-1), -1.0, 1.0)
        sf.write(str(file_path), data, int(sample_rate), subtype="PCM_16", format="WAV")
    except Exception as e:
        raise SaveError(file_path, e)


def write_tensor(array: np.ndarray, file_path: Union[str, Path]) -> None:
    """Write a TNSR1 container: JSON header line followed by little-endian float32 bytes."""
    file_path = Path(file_path)
    array = np.ascontiguousarray(array, dtype="<f4")
    header = {"dtype": "f32", "shape": list(array.shape), "order": "row-major", "endian": "little"}
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "wb") as f:
            f.write(json.dumps(header).encode("utf-8") + b"\n")
            f.write(array.tobytes(order="C"))
    except Exception as e:
        raise SaveError(file_path, e)


def save_json(data: Dict[str, Any], file_path: Union[str, Path]) -> None:
    file_path = Path(file_path)
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True, default=json_default)
            f.write("\n")
    except Exception as e:
        raise SaveError(file_path, e)


def append_jsonl(record: Dict[str, Any], file_path: Union[str, Path]) -> None:
    """Append one record as a line of JSON."""
    file_path = Path(file_path)
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True, default=json_default) + "\n")
    except Exception as e:
        raise SaveError(file_path, e)
