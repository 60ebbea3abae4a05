"""Per-frame segmentation quality metrics and their temporal averages.

All three metrics compare per-pixel *assignment sets* (masks may overlap), and
every count accumulates as an integer with a single division per frame, so the
streaming implementation is bit-equal to a dense recomputation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .fileio import _parse_float, _parse_int, _read_text, _write_text, format_float
from .model import MaskArchive


@dataclass(frozen=True)
class FrameAssignment:
    """Dense view of one archive frame: masks[o, p] says object o covers pixel p."""

    width: int
    height: int
    masks: np.ndarray  # bool, shape (n_objects, width*height)

    def __post_init__(self):
        if self.masks.ndim != 2 or self.masks.shape[1] != self.width * self.height:
            raise ValueError(f"masks must have shape (n_objects, {self.width * self.height})")

    @classmethod
    def from_archive(cls, archive: MaskArchive, frame_index: int) -> "FrameAssignment":
        return cls(width=archive.width, height=archive.height, masks=archive.decode_frame(frame_index))

    @property
    def n_objects(self) -> int:
        return self.masks.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


def background_ratio(frame: FrameAssignment) -> float:
    """Fraction of pixels assigned to no object at all."""
    covered = int(np.count_nonzero(frame.masks.any(axis=0)))
    return (frame.n_pixels - covered) / frame.n_pixels


def overlap_score(frame: FrameAssignment, n_objects: int) -> float:
    """Mean per-pixel excess assignment, max(k-1, 0), normalized by N-1.

    k is the number of masks covering a pixel; with N <= 1 objects the
    normalizer degenerates and the score is defined as 0.
    """
    if n_objects <= 1:
        return 0.0
    covered = int(np.count_nonzero(frame.masks.any(axis=0)))
    total_cover = int(np.count_nonzero(frame.masks))
    return (total_cover - covered) / (frame.n_pixels * (n_objects - 1))


def inter_frame_change(prev: FrameAssignment, curr: FrameAssignment) -> float:
    """Fraction of pixels whose assignment set differs between two frames."""
    if (prev.width, prev.height) != (curr.width, curr.height):
        raise ValueError(
            f"frame dimensions differ: {prev.width}x{prev.height} vs {curr.width}x{curr.height}"
        )
    changed = int(np.count_nonzero((prev.masks != curr.masks).any(axis=0)))
    return changed / prev.n_pixels


@dataclass(frozen=True)
class QualityReport:
    """Per-frame metric series plus temporal means.

    The inter-frame change series starts at frame 1 (undefined for frame 0),
    so ``ifc[i]`` compares frames i and i+1 and the series has length
    ``n_frames - 1``; its mean is None for single-frame archives.
    """

    n_frames: int
    ifc: tuple[float, ...]
    br: tuple[float, ...]
    os: tuple[float, ...]

    def __post_init__(self):
        if len(self.br) != self.n_frames or len(self.os) != self.n_frames:
            raise ValueError("br/os series must have one value per frame")
        if len(self.ifc) != max(0, self.n_frames - 1):
            raise ValueError("ifc series must have n_frames - 1 values")

    @property
    def ifc_mean(self) -> float | None:
        return sum(self.ifc) / len(self.ifc) if self.ifc else None

    @property
    def br_mean(self) -> float:
        return sum(self.br) / len(self.br)

    @property
    def os_mean(self) -> float:
        return sum(self.os) / len(self.os)


def evaluate_archive(archive: MaskArchive) -> QualityReport:
    """Stream the archive frame by frame; at most two decoded frames are live."""
    if archive.frame_count < 1:
        raise ValueError("archive must contain at least one frame")
    n_objects = len(archive.registry)
    ifc: list[float] = []
    br: list[float] = []
    os_: list[float] = []
    prev: FrameAssignment | None = None
    for frame_index in range(archive.frame_count):
        curr = FrameAssignment.from_archive(archive, frame_index)
        br.append(background_ratio(curr))
        os_.append(overlap_score(curr, n_objects))
        if prev is not None:
            ifc.append(inter_frame_change(prev, curr))
        prev = curr
    return QualityReport(n_frames=archive.frame_count, ifc=tuple(ifc), br=tuple(br), os=tuple(os_))


# ---------------------------------------------------------------------------
# Delimited export: per-frame rows, then a summary block of temporal means.


def write_quality_csv(report: QualityReport, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame_index", "ifc", "br", "os"])
    for i in range(report.n_frames):
        ifc_cell = "" if i == 0 else format_float(report.ifc[i - 1])
        w.writerow([i, ifc_cell, format_float(report.br[i]), format_float(report.os[i])])
    w.writerow([])
    w.writerow(["metric", "temporal_mean"])
    w.writerow(["ifc", "" if report.ifc_mean is None else format_float(report.ifc_mean)])
    w.writerow(["br", format_float(report.br_mean)])
    w.writerow(["os", format_float(report.os_mean)])
    _write_text(path, buf.getvalue())


def load_quality_csv(path) -> QualityReport:
    text = _read_text(path)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["frame_index", "ifc", "br", "os"]:
        raise FormatError("expected quality report header 'frame_index,ifc,br,os'", path=path, row=1)
    ifc: list[float] = []
    br: list[float] = []
    os_: list[float] = []
    row_no = 1
    for row in rows[1:]:
        row_no += 1
        if not row:
            break
        frame = _parse_int(row[0], path, row_no, "frame_index")
        if frame != len(br):
            raise FormatError(f"frame_index must be contiguous, got {frame}", path=path, row=row_no)
        if row[1] != "":
            ifc.append(_parse_float(row[1], path, row_no, "ifc"))
        elif frame != 0:
            raise FormatError("only frame 0 may omit ifc", path=path, row=row_no)
        br.append(_parse_float(row[2], path, row_no, "br"))
        os_.append(_parse_float(row[3], path, row_no, "os"))
    if not br:
        raise FormatError("quality report holds no frames", path=path)
    return QualityReport(n_frames=len(br), ifc=tuple(ifc), br=tuple(br), os=tuple(os_))
