"""
Utility functions for the activespeaker package.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Union

import chardet
import numpy as np


def detect_encoding(file_path: Union[str, Path], sample_size: int = 10000) -> str:
    """
    Detect the encoding of a text file.

    Args:
        file_path: Path to the file
        sample_size: Number of bytes to sample for detection

    Returns:
        Detected encoding string
    """
    try:
        with open(file_path, 'rb') as f:
            raw_data = f.read(sample_size)
            result = chardet.detect(raw_data)
            encoding = result['encoding'] or 'utf-8'
            # chardet reports pure-ASCII samples as 'ascii'; utf-8 is a superset
            return 'utf-8' if encoding.lower() == 'ascii' else encoding
    except Exception:
        return 'utf-8'


def is_compressed_file(file_path: Union[str, Path]) -> bool:
    """Check if a file is gzip-compressed by its extension."""
    return str(file_path).lower().endswith('.gz')


def validate_file_path(file_path: Union[str, Path]) -> Path:
    """
    Validate and normalize file path.

    Raises:
        FileNotFoundError: If file doesn't exist
    """
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    return path


def derive_seeds(seed: int, n: int, *keys: int) -> List[int]:
    """
    Independent child seeds from one root seed.

    The i-th child depends only on (seed, keys, i), so per-item randomness does
    not change with the number of workers or the order items are processed in.
    Extra keys (e.g. the epoch) select an independent family of children.
    """
    entropy = [int(seed), *map(int, keys)] if keys else int(seed)
    children = np.random.SeedSequence(entropy).spawn(n)
    return [int(c.generate_state(1)[0]) for c in children]


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=json_default)


def json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def config_hash(config: Union[Dict[str, Any], Any]) -> str:
    """SHA-256 of the canonical JSON form of a config (dict or object with to_dict())."""
    data = config.to_dict() if hasattr(config, "to_dict") else config
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def sha256_file(file_path: Union[str, Path], chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()
