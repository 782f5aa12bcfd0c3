"""
Unit tests for the file readers and writers.
"""

import json

import numpy as np
import pandas as pd
import pytest

from activespeaker.exceptions import ColumnNotFoundError, FileReadError
from activespeaker.readers import (
    MANIFEST_COLUMNS,
    read_csv_file,
    read_json,
    read_jsonl,
    read_manifest,
    read_tensor,
    read_wav,
)
from activespeaker.writers import append_jsonl, save_csv_file, save_json, write_tensor, write_wav


class TestTensorFiles:
    """Test cases for the TNSR1 container."""

    def test_round_trip(self, tmp_path):
        """Test that float32 data survives bit for bit."""
        array = np.random.default_rng(0).standard_normal((3, 1, 4, 5)).astype(np.float32)
        write_tensor(array, tmp_path / "x.tnsr")
        loaded = read_tensor(tmp_path / "x.tnsr")
        assert loaded.dtype == np.float32
        assert np.array_equal(loaded, array)

    def test_header_line(self, tmp_path):
        """Test the JSON header written before the payload."""
        write_tensor(np.zeros((2, 3)), tmp_path / "x.tnsr")
        with open(tmp_path / "x.tnsr", "rb") as f:
            header = json.loads(f.readline())
            payload = f.read()
        assert header == {"dtype": "f32", "shape": [2, 3], "order": "row-major", "endian": "little"}
        assert len(payload) == 24

    def test_bad_header(self, tmp_path):
        """Test that a non-float32 header is rejected."""
        path = tmp_path / "x.tnsr"
        path.write_bytes(json.dumps({"dtype": "f64", "shape": [1], "order": "row-major",
                                     "endian": "little"}).encode() + b"\n" + bytes(8))
        with pytest.raises(FileReadError):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        """Test that a payload shorter than the header's shape is rejected."""
        write_tensor(np.ones((4, 4)), tmp_path / "x.tnsr")
        data = (tmp_path / "x.tnsr").read_bytes()
        (tmp_path / "x.tnsr").write_bytes(data[:-4])
        with pytest.raises(FileReadError):
            read_tensor(tmp_path / "x.tnsr")

    def test_missing_file(self, tmp_path):
        """Test the error for a missing file."""
        with pytest.raises(FileReadError, match="not found"):
            read_tensor(tmp_path / "missing.tnsr")


class TestWavFiles:
    """Test cases for 16-bit PCM WAV audio."""

    def test_round_trip(self, tmp_path):
        """Test that samples survive within 16-bit quantization."""
        samples = np.random.default_rng(1).uniform(-0.9, 0.9, 1600)
        write_wav(samples, tmp_path / "a.wav", 16000)
        audio = read_wav(tmp_path / "a.wav")
        assert audio.sample_rate == 16000
        assert len(audio) == 1600
        np.testing.assert_allclose(audio.samples, samples, atol=1.0 / 32768 + 1e-7)

    def test_out_of_range_is_clipped(self, tmp_path):
        """Test that samples beyond full scale are clipped on write."""
        write_wav(np.array([2.0, -2.0, 0.0]), tmp_path / "a.wav", 16000)
        samples = read_wav(tmp_path / "a.wav").samples
        assert samples.max() <= 1.0 and samples.min() >= -1.0
        assert samples[0] > 0.99 and samples[1] < -0.99

    def test_not_a_wav(self, tmp_path):
        """Test that a non-audio file is reported."""
        (tmp_path / "a.wav").write_text("not audio")
        with pytest.raises(FileReadError):
            read_wav(tmp_path / "a.wav")


class TestTables:
    """Test cases for CSV manifests and JSON artifacts."""

    def manifest_row(self, clip_id="00001"):
        return {"clip_id": clip_id, "condition": 1, "n_frames": 5, "fps": 25.0, "sample_rate": 16000,
                "faces_path": f"clips/clip{clip_id}.tnsr", "audio_path": f"clips/clip{clip_id}.wav",
                "face_width_px": 96, "n_faces": 1}

    def test_manifest_resolves_paths(self, tmp_path):
        """Test that clip paths are made relative to the manifest's directory and ids stay strings."""
        save_csv_file(pd.DataFrame([self.manifest_row()]), tmp_path / "manifest.csv")
        manifest = read_manifest(tmp_path / "manifest.csv")
        assert manifest["clip_id"].iloc[0] == "00001"
        assert manifest["faces_path"].iloc[0] == str(tmp_path / "clips" / "clip00001.tnsr")

    def test_manifest_missing_column(self, tmp_path):
        """Test that every manifest column is required."""
        row = self.manifest_row()
        del row["audio_path"]
        save_csv_file(pd.DataFrame([row]), tmp_path / "manifest.csv")
        with pytest.raises(ColumnNotFoundError, match="audio_path"):
            read_manifest(tmp_path / "manifest.csv")

    def test_manifest_columns(self):
        """Test the manifest layout."""
        assert set(self.manifest_row()) == set(MANIFEST_COLUMNS)

    def test_gzip_csv(self, tmp_path):
        """Test reading a compressed CSV."""
        df = pd.DataFrame({"a": [1, 2], "b": ["x", "y"]})
        df.to_csv(tmp_path / "t.csv.gz", index=False, compression="gzip")
        pd.testing.assert_frame_equal(read_csv_file(tmp_path / "t.csv.gz"), df)

    def test_json_round_trip(self, tmp_path):
        """Test JSON with numpy scalars and arrays."""
        save_json({"n": np.int64(3), "x": np.array([0.5, 1.0])}, tmp_path / "a.json")
        assert read_json(tmp_path / "a.json") == {"n": 3, "x": [0.5, 1.0]}

    def test_jsonl_append(self, tmp_path):
        """Test that records are appended one per line."""
        for epoch in range(3):
            append_jsonl({"epoch": epoch, "loss": np.float32(0.5)}, tmp_path / "m.jsonl")
        records = read_jsonl(tmp_path / "m.jsonl")
        assert [r["epoch"] for r in records] == [0, 1, 2]
        assert records[0]["loss"] == 0.5
