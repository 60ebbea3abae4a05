"""Readers and writers for every session file format.

Formats are plain text: a JSON manifest, CSV tracks (header row required,
UTF-8, LF line endings), and a line-oriented mask archive with a single JSON
header line. Every reader/writer pair round-trips losslessly; timestamps stay
integer nanoseconds end to end.
"""

from __future__ import annotations

import csv
import io
import json
import os
import warnings
from pathlib import Path

from .errors import FormatError, LoadWarning, ManifestError
from .model import (
    GazeSample,
    GazeTrack,
    IntervalAnnotations,
    MaskArchive,
    ObjectRegistry,
    RleMask,
    Role,
    SessionManifest,
    StreamDecl,
    TimestampTrack,
)

_MANIFEST_PATH_FIELDS = (
    "audio_path",
    "frame_timestamps_path",
    "gaze_path",
    "mask_archive_path",
    "luminance_path",
)


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc}", path=path) from exc


def _write_text(path: Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def format_float(value: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(value))


# ---------------------------------------------------------------------------
# Manifest


def load_manifest(path) -> SessionManifest:
    """Load and fully validate a session manifest.

    Relative stream paths are resolved against the manifest's directory, and
    every declared path must exist.
    """
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be an object")

    unknown = set(doc) - {"session_id", "streams"}
    if unknown:
        raise ManifestError(f"{path}: unknown manifest keys {sorted(unknown)}")
    session_id = doc.get("session_id")
    if not isinstance(session_id, str) or not session_id:
        raise ManifestError(f"{path}: field 'session_id' must be a non-empty string")
    raw_streams = doc.get("streams")
    if not isinstance(raw_streams, list):
        raise ManifestError(f"{path}: field 'streams' must be a list")

    base = path.parent
    streams = []
    for i, entry in enumerate(raw_streams):
        where = f"{path}: streams[{i}]"
        if not isinstance(entry, dict):
            raise ManifestError(f"{where}: must be an object")
        unknown = set(entry) - {"stream_id", "role", *_MANIFEST_PATH_FIELDS}
        if unknown:
            raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
        stream_id = entry.get("stream_id")
        if not isinstance(stream_id, str) or not stream_id:
            raise ManifestError(f"{where}: field 'stream_id' must be a non-empty string")
        try:
            role = Role(entry.get("role"))
        except ValueError:
            raise ManifestError(
                f"{where}: field 'role' must be one of {[r.value for r in Role]}, got {entry.get('role')!r}"
            ) from None
        kwargs = {}
        for field_name in _MANIFEST_PATH_FIELDS:
            value = entry.get(field_name)
            if value is None:
                continue
            if not isinstance(value, str):
                raise ManifestError(f"{where}: field {field_name!r} must be a string path")
            resolved = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
            if not resolved.exists():
                raise ManifestError(f"{where}: {field_name} {value!r} does not exist (resolved {resolved})")
            kwargs[field_name] = resolved
        streams.append(StreamDecl(stream_id=stream_id, role=role, **kwargs))

    try:
        return SessionManifest(session_id=session_id, streams=tuple(streams))
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


def write_manifest(manifest: SessionManifest, path) -> None:
    """Write a manifest with paths stored relative to the manifest location."""
    path = Path(path)
    base = path.parent.resolve()
    streams = []
    for s in manifest.streams:
        entry: dict = {"stream_id": s.stream_id, "role": s.role.value}
        for field_name in _MANIFEST_PATH_FIELDS:
            value = getattr(s, field_name)
            if value is not None:
                entry[field_name] = os.path.relpath(Path(value).resolve(), base)
        streams.append(entry)
    doc = {"session_id": manifest.session_id, "streams": streams}
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# CSV helpers


def _parse_csv(path: Path, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    """Return (1-based row number, fields) for each data row after the header."""
    text = _read_text(path)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("missing header row", path=path) from None
    if header != expected_header:
        raise FormatError(f"expected header {expected_header}, got {header}", path=path, row=1)
    return [(i, row) for i, row in enumerate(reader, start=2) if row]


def _csv_writer(buf: io.StringIO) -> "csv.writer":
    return csv.writer(buf, lineterminator="\n")


def _parse_int(value: str, path: Path, row: int, field_name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"field {field_name!r} must be an integer, got {value!r}", path=path, row=row) from None


def _parse_float(value: str, path: Path, row: int, field_name: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise FormatError(f"field {field_name!r} must be a number, got {value!r}", path=path, row=row) from None
    if out != out or out in (float("inf"), float("-inf")):
        raise FormatError(f"field {field_name!r} must be finite, got {value!r}", path=path, row=row)
    return out


# ---------------------------------------------------------------------------
# Timestamp tracks


def load_timestamp_track(path) -> TimestampTrack:
    path = Path(path)
    entries = []
    for row_no, row in _parse_csv(path, ["frame_index", "timestamp_ns"]):
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", path=path, row=row_no)
        frame = _parse_int(row[0], path, row_no, "frame_index")
        ts = _parse_int(row[1], path, row_no, "timestamp_ns")
        entries.append((frame, ts))
    try:
        return TimestampTrack(tuple(entries))
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from exc


def write_timestamp_track(track: TimestampTrack, path) -> None:
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["frame_index", "timestamp_ns"])
    for frame, ts in track.entries:
        w.writerow([frame, ts])
    _write_text(Path(path), buf.getvalue())


# ---------------------------------------------------------------------------
# Gaze tracks


def load_gaze_track(path) -> GazeTrack:
    """Load a gaze track; duplicate timestamps are legal but emit a LoadWarning."""
    path = Path(path)
    samples = []
    duplicates = 0
    prev_ts = None
    for row_no, row in _parse_csv(path, ["timestamp_ns", "x", "y", "confidence"]):
        if len(row) != 4:
            raise FormatError(f"expected 4 fields, got {len(row)}", path=path, row=row_no)
        ts = _parse_int(row[0], path, row_no, "timestamp_ns")
        x = _parse_float(row[1], path, row_no, "x")
        y = _parse_float(row[2], path, row_no, "y")
        confidence = None if row[3] == "" else _parse_float(row[3], path, row_no, "confidence")
        if confidence is not None and not 0.0 <= confidence <= 1.0:
            raise FormatError(f"confidence must lie in [0,1], got {confidence}", path=path, row=row_no)
        if prev_ts is not None:
            if ts < prev_ts:
                raise FormatError(f"timestamps must be non-decreasing, got {ts} after {prev_ts}", path=path, row=row_no)
            if ts == prev_ts:
                duplicates += 1
        prev_ts = ts
        samples.append(GazeSample(timestamp_ns=ts, x=x, y=y, confidence=confidence))
    if duplicates:
        warnings.warn(f"{path}: {duplicates} duplicate gaze timestamp(s)", LoadWarning, stacklevel=2)
    return GazeTrack(tuple(samples))


def write_gaze_track(track: GazeTrack, path) -> None:
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["timestamp_ns", "x", "y", "confidence"])
    for s in track.samples:
        conf = "" if s.confidence is None else format_float(s.confidence)
        w.writerow([s.timestamp_ns, format_float(s.x), format_float(s.y), conf])
    _write_text(Path(path), buf.getvalue())


# ---------------------------------------------------------------------------
# Interval annotations


def load_intervals(path) -> IntervalAnnotations:
    path = Path(path)
    rows = []
    for row_no, row in _parse_csv(path, ["tier", "start_ns", "end_ns", "label"]):
        if len(row) != 4:
            raise FormatError(f"expected 4 fields, got {len(row)}", path=path, row=row_no)
        tier = row[0]
        start_ns = _parse_int(row[1], path, row_no, "start_ns")
        end_ns = _parse_int(row[2], path, row_no, "end_ns")
        if start_ns >= end_ns:
            raise FormatError(f"interval must have start < end, got [{start_ns}, {end_ns})", path=path, row=row_no)
        rows.append((tier, start_ns, end_ns, row[3]))
    try:
        return IntervalAnnotations.from_rows(rows)
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from exc


def write_intervals(annotations: IntervalAnnotations, path) -> None:
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["tier", "start_ns", "end_ns", "label"])
    for tier in sorted(annotations.tiers):
        for iv in annotations.tiers[tier]:
            w.writerow([tier, iv.start_ns, iv.end_ns, iv.label])
    _write_text(Path(path), buf.getvalue())


# ---------------------------------------------------------------------------
# Luminance series


def load_luminance(path) -> list[tuple[int, float]]:
    """Load a per-frame mean-luminance series as (timestamp_ns, value) pairs."""
    path = Path(path)
    series = []
    prev_ts = None
    for row_no, row in _parse_csv(path, ["timestamp_ns", "luminance"]):
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", path=path, row=row_no)
        ts = _parse_int(row[0], path, row_no, "timestamp_ns")
        lum = _parse_float(row[1], path, row_no, "luminance")
        if not 0.0 <= lum <= 1.0:
            raise FormatError(f"luminance must lie in [0,1], got {lum}", path=path, row=row_no)
        if prev_ts is not None and ts <= prev_ts:
            raise FormatError(f"timestamps must be strictly increasing, got {ts} after {prev_ts}", path=path, row=row_no)
        prev_ts = ts
        series.append((ts, lum))
    return series


def write_luminance(series, path) -> None:
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(["timestamp_ns", "luminance"])
    for ts, lum in series:
        w.writerow([ts, format_float(lum)])
    _write_text(Path(path), buf.getvalue())


# ---------------------------------------------------------------------------
# Mask archives


def load_mask_archive(path) -> MaskArchive:
    """Parse a mask archive: one JSON header line, then one record per
    (frame, object) holding the RLE run list, ordered by frame then object."""
    path = Path(path)
    text = _read_text(path)
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise FormatError("missing header line", path=path, row=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid header JSON: {exc.msg}", path=path, row=1) from exc
    if not isinstance(header, dict) or set(header) != {"width", "height", "frame_count", "objects"}:
        raise FormatError("header must carry exactly width, height, frame_count, objects", path=path, row=1)
    width, height, frame_count = header["width"], header["height"], header["frame_count"]
    names = header["objects"]
    if not (isinstance(width, int) and isinstance(height, int) and isinstance(frame_count, int)):
        raise FormatError("width, height and frame_count must be integers", path=path, row=1)
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise FormatError("objects must be a list of names", path=path, row=1)
    try:
        registry = ObjectRegistry.from_names(names)
    except ValueError as exc:
        raise FormatError(str(exc), path=path, row=1) from exc

    n_pixels = width * height
    frames: dict[int, dict[int, RleMask]] = {}
    prev_key: tuple[int, int] | None = None
    for row_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 3:
            raise FormatError("record needs frame, object_id and at least one run", path=path, row=row_no)
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise FormatError(f"record fields must be integers: {line!r}", path=path, row=row_no) from None
        frame_index, object_id, runs = values[0], values[1], values[2:]
        if not 0 <= frame_index < frame_count:
            raise FormatError(
                f"frame {frame_index} outside the declared 0..{frame_count - 1} range", path=path, row=row_no
            )
        if not 0 <= object_id < len(registry):
            raise FormatError(f"unknown object_id {object_id}", path=path, row=row_no)
        key = (frame_index, object_id)
        if prev_key is not None and key <= prev_key:
            raise FormatError(
                f"records must be ordered by frame then object_id; {key} follows {prev_key}", path=path, row=row_no
            )
        prev_key = key
        total = sum(runs)
        if total != n_pixels:
            raise FormatError(
                f"frame {frame_index} object {object_id}: runs sum to {total}, expected {n_pixels}",
                path=path,
                row=row_no,
            )
        try:
            mask = RleMask(tuple(runs))
        except ValueError as exc:
            raise FormatError(str(exc), path=path, row=row_no) from exc
        frames.setdefault(frame_index, {})[object_id] = mask

    try:
        return MaskArchive(width=width, height=height, registry=registry, frame_count=frame_count, frames=frames)
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from exc


def _canonical_runs(mask: RleMask, n_pixels: int) -> tuple[int, ...]:
    # Valid encodings may carry redundant interior zero runs; normalize them away.
    if any(r == 0 for r in mask.runs[1:]):
        return RleMask.from_pixels(mask.to_pixels(n_pixels)).runs
    return mask.runs


def write_mask_archive(archive: MaskArchive, path) -> None:
    """Write the canonical byte representation of a mask archive."""
    header = {
        "frame_count": archive.frame_count,
        "height": archive.height,
        "objects": list(archive.registry.names),
        "width": archive.width,
    }
    out = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for frame_index in sorted(archive.frames):
        for object_id in sorted(archive.frames[frame_index]):
            runs = _canonical_runs(archive.frames[frame_index][object_id], archive.n_pixels)
            out.append(" ".join(str(v) for v in (frame_index, object_id, *runs)))
    _write_text(Path(path), "\n".join(out) + "\n")
