"""Data pipeline: filename labels, CSV ingestion, windowing, per-window
min-max normalisation, and the per-file chronological train/val/test split.

Recordings are multi-channel constant-speed captures sampled at 42 kHz with
filenames like ``R-U-1-0``: letter pair = fault class, third token = speed
setting (1..4 -> 15/30/45/60 Hz), fourth token = load flag. CSV columns are
[accel1, audio, accel2, accel3, ...extras ignored].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
import pandas as pd

from .container import read_container, write_container
from .errors import IngestError, ParseError, ShapeError

SAMPLE_RATE = 42_000
WINDOW = 1000
SPLIT_RATIOS = (0.8, 0.1, 0.1)

CHANNELS = ("accel1", "audio", "accel2", "accel3")
SPEED_SETTINGS = {1: 15, 2: 30, 3: 45, 4: 60}


class FaultClass(IntEnum):
    H = 0   # healthy
    RU = 1  # rotor unbalance
    RM = 2  # rotor misalignment
    SW = 3  # stator winding fault
    VU = 4  # voltage unbalance / single phasing
    BR = 5  # bowed rotor
    KA = 6  # broken rotor bars
    FB = 7  # faulty bearings

    @property
    def code(self) -> str:
        return self.name


CLASS_CODES = tuple(c.name for c in FaultClass)

_LETTER_PAIRS = {
    "HH": FaultClass.H,
    "RU": FaultClass.RU,
    "RM": FaultClass.RM,
    "SW": FaultClass.SW,
    "VU": FaultClass.VU,
    "BR": FaultClass.BR,
    "KA": FaultClass.KA,
    "FB": FaultClass.FB,
}


def file_stem(fault: FaultClass, speed_setting: int, load: int) -> str:
    """Canonical recording name, e.g. (RU, 1, 0) -> 'R-U-1-0'."""
    pair = {v: k for k, v in _LETTER_PAIRS.items()}[fault]
    return f"{pair[0]}-{pair[1]}-{speed_setting}-{load}"


def parse_label(filename: str) -> tuple[FaultClass, int, int]:
    """Parses '{L}-{L}-{speed}-{load}' names into (class, speed Hz, load).

    Accepts full paths and extensions; raises ParseError naming the bad token.
    """
    stem = Path(str(filename)).name
    if "." in stem:
        stem = stem.split(".", 1)[0]
    tokens = stem.split("-")
    if len(tokens) != 4:
        raise ParseError(f"expected 4 '-'-separated tokens in {stem!r}, got {len(tokens)}")
    pair = (tokens[0] + tokens[1]).upper()
    if pair not in _LETTER_PAIRS:
        raise ParseError(f"unknown fault letters {tokens[0]!r}-{tokens[1]!r} in {stem!r}")
    try:
        setting = int(tokens[2])
    except ValueError:
        raise ParseError(f"speed token {tokens[2]!r} in {stem!r} is not an integer") from None
    if setting not in SPEED_SETTINGS:
        raise ParseError(f"speed token {tokens[2]!r} in {stem!r} not in 1..4")
    if tokens[3] not in ("0", "1"):
        raise ParseError(f"load token {tokens[3]!r} in {stem!r} must be 0 or 1")
    return _LETTER_PAIRS[pair], SPEED_SETTINGS[setting], int(tokens[3])


def _has_header(path: Path) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    for cell in first.strip().split(","):
        try:
            float(cell)
        except ValueError:
            return True
    return False


def ingest_recording(path, channel: str) -> np.ndarray:
    """Reads one sensor column from a CSV recording.

    The file must hold >= 4 numeric columns in the order [accel1, audio,
    accel2, accel3]; trailing columns (temperature, speed, ...) are ignored.
    A single header row is auto-detected. Errors report the offending row
    (1-based, counting the header).
    """
    path = Path(path)
    if channel not in CHANNELS:
        raise IngestError(f"unknown channel {channel!r}, expected one of {CHANNELS}")
    if not path.exists():
        raise IngestError(f"recording not found: {path}")
    skip = 1 if _has_header(path) else 0
    try:
        frame = pd.read_csv(path, header=None, skiprows=skip, dtype=str)
    except Exception as e:
        raise IngestError(f"{path}: unreadable CSV: {e}") from e
    if frame.shape[1] < 4:
        raise IngestError(
            f"{path}: expected >= 4 columns ({', '.join(CHANNELS)}), found {frame.shape[1]}"
        )
    col = CHANNELS.index(channel)
    values = pd.to_numeric(frame.iloc[:, col], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0]) + skip + 1
        raise IngestError(f"{path}: non-numeric or missing value in column {channel!r}, row {row}")
    return values


def segment_signal(signal: np.ndarray, window: int = WINDOW) -> np.ndarray:
    """Consecutive non-overlapping windows; the remainder is discarded."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ShapeError(f"signal must be 1-D, got shape {signal.shape}")
    if signal.size < window:
        raise ShapeError(f"signal length {signal.size} shorter than window {window}")
    n = signal.size // window
    return signal[: n * window].reshape(n, window)


def normalize_segment(window: np.ndarray) -> np.ndarray:
    """Min-max map onto [-1, 1]; constant windows map to all zeros."""
    return normalize_windows(np.asarray(window, dtype=np.float64)[None, :])[0]


def normalize_windows(windows: np.ndarray) -> np.ndarray:
    """Row-wise min-max normalisation of a (n, window) array.

    The min lands exactly on -1 and the max exactly on +1 (the scale factor
    is a ratio of the same difference, so the endpoints are exact in IEEE
    arithmetic). Degenerate constant rows become all zeros.
    """
    windows = np.asarray(windows, dtype=np.float64)
    mn = windows.min(axis=1, keepdims=True)
    mx = windows.max(axis=1, keepdims=True)
    span = mx - mn
    flat = span[:, 0] == 0.0
    span[flat] = 1.0
    out = (windows - mn) / span * 2.0 - 1.0
    out[flat] = 0.0
    return out


def temporal_split(n: int, ratios=SPLIT_RATIOS) -> tuple[slice, slice, slice]:
    """Chronological per-file split: first floor(r0*n) windows train, next
    floor(r1*n) validation, remainder test. No shuffling."""
    if n < 1:
        raise ShapeError("cannot split an empty window list")
    if n < 10:
        warnings.warn(f"temporal split of only {n} windows is degenerate", stacklevel=2)
    n_train = int(np.floor(ratios[0] * n))
    n_val = int(np.floor(ratios[1] * n))
    return slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, n)


@dataclass
class SegmentSet:
    """Labeled, normalised windows of one partition with provenance."""

    windows: np.ndarray          # (n, window) float64, each row in [-1, 1]
    labels: np.ndarray           # (n,) int64 FaultClass values
    file_ids: np.ndarray         # (n,) int64 index into `files`
    window_index: np.ndarray     # (n,) int64 position within the source file
    files: list[str]
    partition: str = ""

    def __len__(self) -> int:
        return len(self.windows)

    def class_counts(self, n_classes: int = len(CLASS_CODES)) -> np.ndarray:
        return np.bincount(self.labels, minlength=n_classes)

    def save(self, path) -> None:
        header = {
            "kind": "segments",
            "partition": self.partition,
            "window": self.windows.shape[1] if len(self.windows) else WINDOW,
            "classes": ",".join(CLASS_CODES),
            "files": len(self.files),
        }
        for i, name in enumerate(self.files):
            header[f"file.{i}"] = name
        arrays = [
            ("windows", self.windows.astype("<f8")),
            ("labels", self.labels.astype("|u1")),
            ("file_ids", self.file_ids.astype("<i8")),
            ("window_index", self.window_index.astype("<i8")),
        ]
        write_container(path, header, arrays)

    @classmethod
    def load(cls, path) -> "SegmentSet":
        header, arrays = read_container(path)
        if header.get("kind") != "segments":
            raise IngestError(f"{path}: container holds {header.get('kind')!r}, not segments")
        files = [header[f"file.{i}"] for i in range(int(header.get("files", 0)))]
        return cls(
            windows=arrays["windows"].astype(np.float64),
            labels=arrays["labels"].astype(np.int64),
            file_ids=arrays["file_ids"],
            window_index=arrays["window_index"],
            files=files,
            partition=header.get("partition", ""),
        )


@dataclass
class SplitData:
    train: SegmentSet
    val: SegmentSet
    test: SegmentSet

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in ("train", "val", "test"):
            getattr(self, name).save(directory / f"{name}.shard")

    @classmethod
    def load(cls, directory) -> "SplitData":
        directory = Path(directory)
        return cls(
            *(SegmentSet.load(directory / f"{name}.shard") for name in ("train", "val", "test"))
        )


class _SplitBuilder:
    """Accumulates per-file windows into the three partitions."""

    def __init__(self, window: int, ratios=SPLIT_RATIOS):
        self.window = window
        self.ratios = ratios
        self.files: list[str] = []
        self.parts = {name: ([], [], [], []) for name in ("train", "val", "test")}

    def add_file(self, name: str, signal: np.ndarray, label: int) -> None:
        windows = normalize_windows(segment_signal(signal, self.window))
        file_id = len(self.files)
        self.files.append(name)
        slices = temporal_split(len(windows), self.ratios)
        for part, sl in zip(("train", "val", "test"), slices):
            w, l, f, idx = self.parts[part]
            w.append(windows[sl])
            count = sl.stop - sl.start
            l.append(np.full(count, label, dtype=np.int64))
            f.append(np.full(count, file_id, dtype=np.int64))
            idx.append(np.arange(sl.start, sl.stop, dtype=np.int64))

    def build(self) -> SplitData:
        sets = {}
        for part, (w, l, f, idx) in self.parts.items():
            sets[part] = SegmentSet(
                windows=np.concatenate(w) if w else np.zeros((0, self.window)),
                labels=np.concatenate(l) if l else np.zeros(0, dtype=np.int64),
                file_ids=np.concatenate(f) if f else np.zeros(0, dtype=np.int64),
                window_index=np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64),
                files=self.files,
                partition=part,
            )
        return SplitData(**sets)


def load_csv_corpus(
    directory,
    channel: str,
    window: int = WINDOW,
    ratios=SPLIT_RATIOS,
) -> SplitData:
    """Ingests every parseable recording CSV under `directory` (sorted by
    name), segments, normalises, and splits each file chronologically."""
    directory = Path(directory)
    paths = sorted(p for p in directory.glob("*.csv"))
    if not paths:
        raise IngestError(f"no recording CSVs found under {directory}")
    builder = _SplitBuilder(window, ratios)
    for path in paths:
        fault, _, _ = parse_label(path.name)
        builder.add_file(path.stem, ingest_recording(path, channel), int(fault))
    return builder.build()
