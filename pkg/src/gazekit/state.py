"""Pipeline state-directory layout, atomic writes, digests, and locking.

The CLI writes each stage's outputs into a fixed layout under the output
directory; the review service reads (and for the annotation stage, mutates)
the same layout.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import matplotlib
import numpy
import scipy

from . import __version__
from .errors import StateError

SYNC_DIR = "sync"
METRICS_DIR = "metrics"
GAZE_DIR = "gaze"
ANNOTATION_DIR = "annotation"

SERIES_FILE = "series.csv"
RAW_FILE = "raw.json"
ANOMALIES_FILE = "anomalies.json"
LEDGER_FILE = "ledger.json"
PROMPTS_FILE = "prompts.json"
PLAN_FILE = "plan.json"

LOCK_FILE = ".gazekit.lock"


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so readers never observe a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class OutputLock:
    """Session-level lock file preventing concurrent writers to one output dir."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / LOCK_FILE

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StateError(
                f"output directory is locked by another run ({self.path}); remove the lock if stale"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            os.unlink(self.path)
        except OSError:
            pass
        return False


def check_write_targets(input_paths, write_dirs=(), write_files=()) -> None:
    """Refuse to run when an input would be overwritten by this stage.

    Stages may read earlier stages' outputs from the same state directory, so
    only the paths this stage writes (whole subdirectories plus named files)
    are off-limits for inputs.
    """
    dirs = [Path(d).resolve() for d in write_dirs]
    files = {Path(f).resolve() for f in write_files}
    for p in input_paths:
        if p is None:
            continue
        resolved = Path(p).resolve()
        if resolved in files:
            raise StateError(f"input {p} would be overwritten by this stage")
        for d in dirs:
            if resolved == d or d in resolved.parents:
                raise StateError(f"input {p} lies inside the stage output directory {d}")


def write_run_report(out_dir, stage: str, parameters: dict, input_paths: dict) -> Path:
    """Machine-readable record of one stage run: parameters, versions, digests.

    The output directory itself is deliberately not echoed, so reports from
    runs that differ only in destination stay byte-identical.
    """
    report = {
        "stage": stage,
        "parameters": parameters,
        "versions": {
            "gazekit": __version__,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "input_digests": {str(name): sha256_file(p) for name, p in sorted(input_paths.items()) if p is not None},
    }
    path = Path(out_dir) / f"{stage}.run.json"
    atomic_write_text(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
