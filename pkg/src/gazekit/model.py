"""Canonical in-memory model for everything the pipeline reads or writes.

All values are immutable after construction and validate their invariants in
``__post_init__``, so a constructed instance is always internally consistent.
Timestamps are integer nanoseconds throughout; sync arithmetic never touches
floats until a value is converted for display.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class Role(str, enum.Enum):
    CHILD_EGO = "child_ego"
    CAREGIVER_EGO = "caregiver_ego"
    SIDE_CAM = "side_cam"
    TOP_CAM = "top_cam"
    OTHER = "other"


@dataclass(frozen=True)
class StreamDecl:
    """One recording stream of a session and the files it contributes."""

    stream_id: str
    role: Role
    audio_path: Path | None = None
    frame_timestamps_path: Path | None = None
    gaze_path: Path | None = None
    mask_archive_path: Path | None = None
    luminance_path: Path | None = None

    def __post_init__(self):
        if not self.stream_id:
            raise ValueError("stream_id must be non-empty")


@dataclass(frozen=True)
class SessionManifest:
    session_id: str
    streams: tuple[StreamDecl, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for s in self.streams:
            if s.stream_id in seen:
                raise ValueError(f"duplicate stream_id {s.stream_id!r}")
            seen.add(s.stream_id)

    def stream(self, stream_id: str) -> StreamDecl:
        for s in self.streams:
            if s.stream_id == stream_id:
                return s
        raise KeyError(stream_id)


@dataclass(frozen=True)
class TimestampTrack:
    """Per-frame capture times: frame_index 0..F-1 with strictly increasing ns."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev_ts = None
        for i, (frame, ts) in enumerate(self.entries):
            if frame != i:
                raise ValueError(f"frame_index must run 0..N-1 without gaps, got {frame} at position {i}")
            if prev_ts is not None and ts <= prev_ts:
                raise ValueError(f"timestamps must be strictly increasing, got {ts} after {prev_ts}")
            prev_ts = ts

    def timestamps_ns(self) -> np.ndarray:
        return np.array([ts for _, ts in self.entries], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class GazeSample:
    timestamp_ns: int
    x: float
    y: float
    confidence: float | None = None

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class GazeTrack:
    """Gaze samples ordered by non-decreasing timestamp.

    Coordinates may lie outside the image; they are kept verbatim and the
    gaze-target stage labels such samples instead of clamping them.
    """

    samples: tuple[GazeSample, ...]

    def __post_init__(self):
        prev = None
        for s in self.samples:
            if prev is not None and s.timestamp_ns < prev:
                raise ValueError(f"gaze timestamps must be non-decreasing, got {s.timestamp_ns} after {prev}")
            prev = s.timestamp_ns

    def timestamps_ns(self) -> np.ndarray:
        return np.array([s.timestamp_ns for s in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class ObjectRegistry:
    """Ordered object catalogue; order is significant for tie-breaking."""

    objects: tuple[tuple[int, str], ...]

    def __post_init__(self):
        names: set[str] = set()
        for i, (object_id, name) in enumerate(self.objects):
            if object_id != i:
                raise ValueError(f"object_ids must be contiguous 0..N-1, got {object_id} at position {i}")
            if name in names:
                raise ValueError(f"duplicate object name {name!r}")
            names.add(name)

    @classmethod
    def from_names(cls, names) -> "ObjectRegistry":
        return cls(tuple(enumerate(names)))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.objects)

    def name_of(self, object_id: int) -> str:
        return self.objects[object_id][1]

    def __len__(self) -> int:
        return len(self.objects)


def rle_encode(flat: np.ndarray) -> tuple[int, ...]:
    """Encode a flat boolean pixel vector as canonical alternating runs.

    Runs alternate background/foreground and start with background, so a mask
    beginning with a foreground pixel gets a leading zero run. Canonical form
    has no other zero runs and no trailing zero run.
    """
    flat = np.asarray(flat, dtype=bool).ravel()
    if flat.size == 0:
        return ()
    boundaries = np.flatnonzero(np.diff(flat.view(np.int8)))
    lengths = np.diff(np.concatenate(([0], boundaries + 1, [flat.size])))
    runs = lengths.tolist()
    if flat[0]:
        runs.insert(0, 0)
    return tuple(int(r) for r in runs)


def rle_decode(runs, n_pixels: int) -> np.ndarray:
    """Decode alternating background/foreground runs into a flat bool vector."""
    total = sum(runs)
    if total != n_pixels:
        raise ValueError(f"run lengths sum to {total}, expected {n_pixels}")
    values = np.arange(len(runs), dtype=np.int64) % 2 == 1
    return np.repeat(values, np.asarray(runs, dtype=np.int64))


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask, row-major, starting with background.

    A leading zero marks masks that start with a foreground pixel; redundant
    interior zero runs are tolerated on input, but two adjacent zero runs are
    ambiguous and rejected. Encoding through :func:`rle_encode` is canonical.
    """

    runs: tuple[int, ...]

    def __post_init__(self):
        for r in self.runs:
            if r < 0:
                raise ValueError(f"run lengths must be non-negative, got {r}")
        for a, b in zip(self.runs, self.runs[1:]):
            if a == 0 and b == 0:
                raise ValueError("two consecutive zero runs are not a valid encoding")

    @classmethod
    def from_pixels(cls, flat: np.ndarray) -> "RleMask":
        return cls(rle_encode(flat))

    def to_pixels(self, n_pixels: int) -> np.ndarray:
        return rle_decode(self.runs, n_pixels)

    def pixel_count(self) -> int:
        return sum(self.runs)


@dataclass(frozen=True)
class MaskArchive:
    """Per-frame, per-object RLE masks plus the object registry.

    ``frames`` maps frame_index to {object_id: RleMask}; an absent entry is an
    empty mask, which keeps archives sparse for objects out of view.
    ``frame_count`` is carried explicitly so fully background frames remain
    representable.
    """

    width: int
    height: int
    registry: ObjectRegistry
    frame_count: int
    frames: dict[int, dict[int, RleMask]] = field(default_factory=dict)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mask dimensions must be positive")
        if self.frame_count < 0:
            raise ValueError("frame_count must be non-negative")
        n_pixels = self.width * self.height
        n_objects = len(self.registry)
        for frame_index, objs in self.frames.items():
            if not 0 <= frame_index < self.frame_count:
                raise ValueError(f"frame {frame_index} outside 0..{self.frame_count - 1}")
            for object_id, mask in objs.items():
                if not 0 <= object_id < n_objects:
                    raise ValueError(f"unknown object_id {object_id} in frame {frame_index}")
                total = mask.pixel_count()
                if total != n_pixels:
                    raise ValueError(
                        f"frame {frame_index} object {object_id}: runs sum to {total}, expected {n_pixels}"
                    )

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def decode_frame(self, frame_index: int) -> np.ndarray:
        """Dense bool array of shape (n_objects, height*width) for one frame."""
        if not 0 <= frame_index < self.frame_count:
            raise KeyError(f"frame {frame_index} not in archive (0..{self.frame_count - 1})")
        out = np.zeros((len(self.registry), self.n_pixels), dtype=bool)
        for object_id, mask in self.frames.get(frame_index, {}).items():
            out[object_id] = mask.to_pixels(self.n_pixels)
        return out


@dataclass(frozen=True)
class Interval:
    start_ns: int
    end_ns: int
    label: str

    def __post_init__(self):
        if self.start_ns >= self.end_ns:
            raise ValueError(f"interval must have start < end, got [{self.start_ns}, {self.end_ns})")


@dataclass(frozen=True)
class IntervalAnnotations:
    """Flat interval export of a tiered annotation file, one tuple per row.

    Tiers hold non-overlapping half-open intervals, stored sorted by start.
    """

    tiers: dict[str, tuple[Interval, ...]]

    def __post_init__(self):
        for tier_name, intervals in self.tiers.items():
            prev_end = None
            for iv in intervals:
                if prev_end is not None and iv.start_ns < prev_end:
                    raise ValueError(f"tier {tier_name!r}: overlapping intervals at {iv.start_ns}")
                prev_end = iv.end_ns

    @classmethod
    def from_rows(cls, rows) -> "IntervalAnnotations":
        """Build from (tier, start_ns, end_ns, label) rows in any order."""
        by_tier: dict[str, list[Interval]] = {}
        for tier, start_ns, end_ns, label in rows:
            by_tier.setdefault(tier, []).append(Interval(start_ns, end_ns, label))
        return cls({t: tuple(sorted(ivs, key=lambda iv: iv.start_ns)) for t, ivs in by_tier.items()})
