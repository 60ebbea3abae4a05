"""Map gaze samples to object categories through per-frame mask coverage.

Each gaze sample is modeled as a circular region around the gaze coordinate
(pixel centers at x+0.5, y+0.5); the fraction of circle pixels covered by each
object's mask is that object's confidence ratio, and the argmax becomes the
target label. Ratios use the within-image circle area as denominator, so
fixations near the border are not penalized.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, PipelineError
from .fileio import _parse_float, _parse_int, _read_text, _write_text, format_float
from .maskmetrics import FrameAssignment
from .model import GazeSample, GazeTrack, MaskArchive, ObjectRegistry, TimestampTrack

TARGET_BACKGROUND = "background"
TARGET_OFF_FRAME = "off_frame"
TARGET_NO_FRAME = "no_frame"
RESERVED_TARGETS = frozenset({TARGET_BACKGROUND, TARGET_OFF_FRAME, TARGET_NO_FRAME})


@dataclass(frozen=True)
class GazeMappingConfig:
    radius_px: float = 40.0
    smoothing_window: int | None = None  # None = off; odd >= 3 = majority vote

    def __post_init__(self):
        if self.radius_px <= 0:
            raise ValueError("radius_px must be positive")
        if self.smoothing_window is not None:
            _check_window(self.smoothing_window)


def _check_window(window_samples: int) -> None:
    if window_samples < 3 or window_samples % 2 == 0:
        raise ValueError(f"smoothing window must be an odd integer >= 3, got {window_samples}")


@dataclass(frozen=True)
class GazeTargetSample:
    timestamp_ns: int
    frame_index: int | None
    target: str
    ratios: dict[str, float]
    background_ratio: float


def align_gaze_to_frames(gaze: GazeTrack, frames: TimestampTrack) -> list[tuple[GazeSample, int | None]]:
    """Assign each gaze sample the frame with the nearest timestamp.

    Exact midpoints go to the earlier frame; samples farther than one median
    frame interval from every frame timestamp get None.
    """
    if len(frames) == 0:
        raise ValueError("frame track is empty")
    fts = frames.timestamps_ns()
    max_dist = int(np.median(np.diff(fts))) if len(fts) >= 2 else None
    out: list[tuple[GazeSample, int | None]] = []
    for sample in gaze.samples:
        pos = int(np.searchsorted(fts, sample.timestamp_ns))
        left = min(max(pos - 1, 0), len(fts) - 1)
        right = min(pos, len(fts) - 1)
        d_left = abs(sample.timestamp_ns - int(fts[left]))
        d_right = abs(int(fts[right]) - sample.timestamp_ns)
        frame = left if d_left <= d_right else right
        dist = min(d_left, d_right)
        out.append((sample, None if max_dist is not None and dist > max_dist else frame))
    return out


def circle_ratios(
    frame: FrameAssignment, cx: float, cy: float, radius_px: float
) -> tuple[np.ndarray, float]:
    """Coverage ratios of the circular gaze region, per object index.

    Returns (ratios, background_ratio) over the circle's in-image pixels. When
    the circle contains no image pixel everything is 0 and the caller labels
    the sample off_frame.
    """
    if radius_px <= 0:
        raise ValueError("radius_px must be positive")
    zeros = np.zeros(frame.n_objects)
    x_lo = max(0, math.floor(cx - radius_px - 0.5))
    x_hi = min(frame.width - 1, math.ceil(cx + radius_px + 0.5))
    y_lo = max(0, math.floor(cy - radius_px - 0.5))
    y_hi = min(frame.height - 1, math.ceil(cy + radius_px + 0.5))
    if x_lo > x_hi or y_lo > y_hi:
        return zeros, 0.0
    xs = np.arange(x_lo, x_hi + 1)
    ys = np.arange(y_lo, y_hi + 1)
    dx = xs + 0.5 - cx
    dy = ys + 0.5 - cy
    inside = (dy[:, None] ** 2 + dx[None, :] ** 2) <= radius_px**2
    n_circle = int(np.count_nonzero(inside))
    if n_circle == 0:
        return zeros, 0.0
    flat = (ys[:, None] * frame.width + xs[None, :])[inside]
    in_circle = frame.masks[:, flat]
    ratios = in_circle.sum(axis=1) / n_circle
    n_background = n_circle - int(np.count_nonzero(in_circle.any(axis=0)))
    return ratios, n_background / n_circle


def assign_target(ratios: dict[str, float], background_ratio: float, registry: ObjectRegistry) -> str:
    """Argmax object label; all-zero ratios mean the gaze rests on background.

    Ties go to the lowest object_id, so the result does not depend on the
    mapping's iteration order.
    """
    best_name = None
    best_ratio = 0.0
    for _, name in registry.objects:
        r = ratios.get(name, 0.0)
        if r > best_ratio:
            best_name, best_ratio = name, r
    return best_name if best_name is not None else TARGET_BACKGROUND


def map_trajectory(
    gaze: GazeTrack,
    frames: TimestampTrack,
    archive: MaskArchive,
    cfg: GazeMappingConfig,
) -> list[GazeTargetSample]:
    """Per-sample gaze targets and full confidence-ratio vectors.

    Streams over the archive with a single decoded frame live at a time (gaze
    timestamps are non-decreasing, so assigned frame indices are monotone).
    """
    clash = RESERVED_TARGETS.intersection(archive.registry.names)
    if clash:
        raise PipelineError(f"object names collide with reserved target labels: {sorted(clash)}")
    if len(frames) > archive.frame_count:
        raise PipelineError(
            f"archive holds {archive.frame_count} frames but the track has {len(frames)}"
        )
    names = archive.registry.names
    current_index: int | None = None
    current: FrameAssignment | None = None
    out: list[GazeTargetSample] = []
    for sample, frame_index in align_gaze_to_frames(gaze, frames):
        if frame_index is None:
            out.append(
                GazeTargetSample(
                    timestamp_ns=sample.timestamp_ns,
                    frame_index=None,
                    target=TARGET_NO_FRAME,
                    ratios={name: 0.0 for name in names},
                    background_ratio=0.0,
                )
            )
            continue
        if frame_index != current_index:
            current = FrameAssignment.from_archive(archive, frame_index)
            current_index = frame_index
        ratio_vec, bg = circle_ratios(current, sample.x, sample.y, cfg.radius_px)
        ratios = {name: float(ratio_vec[i]) for i, name in enumerate(names)}
        if bg == 0.0 and not np.any(ratio_vec):
            target = TARGET_OFF_FRAME
        else:
            target = assign_target(ratios, bg, archive.registry)
        out.append(
            GazeTargetSample(
                timestamp_ns=sample.timestamp_ns,
                frame_index=frame_index,
                target=target,
                ratios=ratios,
                background_ratio=float(bg),
            )
        )
    if cfg.smoothing_window is not None:
        out = smooth_targets(out, cfg.smoothing_window)
    return out


def smooth_targets(trajectory: list[GazeTargetSample], window_samples: int) -> list[GazeTargetSample]:
    """Sliding majority vote over target labels; ties keep the original label.

    Windows are truncated at the edges. Only the target changes; ratios stay
    as computed.
    """
    _check_window(window_samples)
    half = window_samples // 2
    targets = [s.target for s in trajectory]
    out: list[GazeTargetSample] = []
    for i, sample in enumerate(trajectory):
        window = targets[max(0, i - half) : i + half + 1]
        counts = Counter(window).most_common()
        top = [label for label, c in counts if c == counts[0][1]]
        voted = top[0] if len(top) == 1 else sample.target
        out.append(sample if voted == sample.target else replace(sample, target=voted))
    return out


# ---------------------------------------------------------------------------
# Delimited export: one ratio column per registry object.


def write_trajectory_csv(trajectory: list[GazeTargetSample], registry: ObjectRegistry, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp_ns", "frame_index", "target", "background_ratio", *registry.names])
    for s in trajectory:
        w.writerow(
            [
                s.timestamp_ns,
                "" if s.frame_index is None else s.frame_index,
                s.target,
                format_float(s.background_ratio),
                *(format_float(s.ratios.get(name, 0.0)) for name in registry.names),
            ]
        )
    _write_text(path, buf.getvalue())


def load_trajectory_csv(path) -> tuple[list[str], list[GazeTargetSample]]:
    """Read a trajectory export back; returns (object names, samples)."""
    path = Path(path)
    reader = csv.reader(io.StringIO(_read_text(path)))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("missing header row", path=path) from None
    if header[:4] != ["timestamp_ns", "frame_index", "target", "background_ratio"]:
        raise FormatError("unexpected trajectory header", path=path, row=1)
    names = header[4:]
    samples: list[GazeTargetSample] = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        ts = _parse_int(row[0], path, row_no, "timestamp_ns")
        frame = None if row[1] == "" else _parse_int(row[1], path, row_no, "frame_index")
        bg = _parse_float(row[3], path, row_no, "background_ratio")
        ratios = {name: _parse_float(row[4 + i], path, row_no, name) for i, name in enumerate(names)}
        samples.append(
            GazeTargetSample(timestamp_ns=ts, frame_index=frame, target=row[2], ratios=ratios, background_ratio=bg)
        )
    return names, samples
