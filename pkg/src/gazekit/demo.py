"""Bundled synthetic mini-session: three audio streams with constructed clock
offsets, flash luminance tracks, a 10-frame mask archive with a scripted gaze
trajectory, and a scripted annotation backend.

Everything is derived from one seed, so two builds are byte-identical. Run
``python3 -m gazekit.demo <dir>`` to materialize it, then point the CLI at
``<dir>/session/manifest.json``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile
import scipy.signal

from . import annotate, fileio
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
    rle_encode,
)

NS_PER_S = 1_000_000_000

# Constructed clock offsets: positive means the stream started later than the
# reference, so adding the offset to its timestamps lands on the reference.
DEMO_OFFSETS = {"child": 0.0, "caregiver": 1.0, "side": -2.5}
DEMO_RATES = {"child": 16000, "caregiver": 22050, "side": 16000}
DEMO_STREAM_DURATION_S = 12.0
DEMO_FLASH_TIMES_S = (2.0, 3.0, 4.0, 5.0)

_SEED_TIMESTAMP = "1970-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class SourceSignal:
    """A master waveform that can be resampled at arbitrary rates and starts.

    Streams recorded by different devices are different views of the same
    source; ``sample`` linearly interpolates the master grid at the stream's
    own sample times.
    """

    master_rate: int
    t0_s: float
    samples: np.ndarray

    def sample(self, rate_hz: int, start_s: float, duration_s: float, noise_rms: float = 0.0, rng=None) -> np.ndarray:
        n = round(duration_s * rate_hz)
        t = start_s + np.arange(n) / rate_hz
        master_t = self.t0_s + np.arange(self.samples.size) / self.master_rate
        x = np.interp(t, master_t, self.samples)
        if noise_rms > 0.0:
            x = x + (rng or np.random.default_rng(0)).normal(0.0, noise_rms, n)
        peak = np.max(np.abs(x))
        if peak > 0.98:
            x = x * (0.98 / peak)
        return x


def make_source(
    duration_s: float,
    seed: int,
    t0_s: float = 0.0,
    master_rate: int = 64000,
    band_hz: tuple[float, float] = (300.0, 6000.0),
    n_bursts: int = 8,
) -> SourceSignal:
    """Band-limited noise with speech-like envelope modulation plus tone bursts."""
    rng = np.random.default_rng(seed)
    n = round(duration_s * master_rate)
    sos = scipy.signal.butter(4, band_hz, btype="bandpass", fs=master_rate, output="sos")
    noise = scipy.signal.sosfilt(sos, rng.standard_normal(n))

    t = np.arange(n) / master_rate
    envelope = np.zeros(n)
    for _ in range(6):
        envelope += np.sin(2 * np.pi * rng.uniform(0.3, 2.5) * t + rng.uniform(0, 2 * np.pi))
    envelope = 1.0 + 0.9 * envelope / np.max(np.abs(envelope))
    signal = noise * envelope

    rms = np.sqrt(np.mean(signal**2))
    for _ in range(n_bursts):
        onset = rng.uniform(0.05, duration_s - 0.4)
        freq = rng.uniform(500.0, 5000.0)
        length = round(0.25 * master_rate)
        i0 = round(onset * master_rate)
        tt = np.arange(length) / master_rate
        signal[i0 : i0 + length] += 3.0 * rms * np.hanning(length) * np.sin(2 * np.pi * freq * tt)

    signal = signal / np.sqrt(np.mean(signal**2)) * 0.08
    return SourceSignal(master_rate=master_rate, t0_s=t0_s, samples=signal)


def write_wav(path: Path, samples: np.ndarray, rate_hz: int) -> None:
    scipy.io.wavfile.write(path, rate_hz, samples.astype(np.float32))


def _luminance_track(offset_s: float, duration_s: float, fps: float = 30.0) -> list[tuple[int, float]]:
    # Flash pulses live on the source timeline; each stream sees them shifted
    # by its own clock offset.
    out = []
    n = int(duration_s * fps)
    for i in range(n):
        ts_ns = round(i / fps * NS_PER_S)
        t_source = i / fps + offset_s
        lit = any(f <= t_source < f + 0.2 for f in DEMO_FLASH_TIMES_S)
        out.append((ts_ns, 1.0 if lit else 0.0))
    return out


def _rect_mask(width: int, height: int, x0: int, x1: int, y0: int, y1: int) -> RleMask:
    grid = np.zeros((height, width), dtype=bool)
    grid[y0 : y1 + 1, x0 : x1 + 1] = True
    return RleMask(rle_encode(grid.ravel()))


def _demo_archive() -> MaskArchive:
    width = height = 32
    registry = ObjectRegistry.from_names(["elephant", "ball"])
    frames = {}
    for f in range(10):
        shift = max(0, f - 4)  # the elephant drifts right in later frames
        frames[f] = {
            0: _rect_mask(width, height, 2 + shift, 13 + shift, 8, 23),
            1: _rect_mask(width, height, 18, 29, 8, 23),
        }
    return MaskArchive(width=width, height=height, registry=registry, frame_count=10, frames=frames)


# Video/gaze tracks start 2 s into the child clock so they survive truncation
# to the session's overlap window.
DEMO_TRACK_START_NS = 2_000_000_000


def demo_frame_track() -> TimestampTrack:
    return TimestampTrack(tuple((i, DEMO_TRACK_START_NS + i * 33_333_333) for i in range(10)))


def _demo_gaze() -> GazeTrack:
    # 200 Hz; the gaze rests on the elephant, then the ball, then background.
    samples = []
    for i in range(60):
        if i < 20:
            x, y = 8.0, 16.0
        elif i < 40:
            x, y = 24.0, 16.0
        else:
            x, y = 8.0, 28.0
        samples.append(GazeSample(timestamp_ns=DEMO_TRACK_START_NS + i * 5_000_000, x=x, y=y, confidence=0.99))
    return GazeTrack(tuple(samples))


def _demo_prompts() -> list[annotate.PromptSpec]:
    return [
        annotate.PromptSpec(
            prompt_id="posture",
            template="What is the child's posture? Choose one: sitting still, standing still, walking, crawling, turning around, not visible.",
            options=("sitting still", "standing still", "walking", "crawling", "turning around", "not visible"),
        ),
        annotate.PromptSpec(
            prompt_id="engagement",
            template="The child is {answer:posture}. Is the child engaged with the toy? Choose one: yes, no.",
            options=("yes", "no"),
        ),
        annotate.PromptSpec(
            prompt_id="proximity",
            template="Where is the child relative to the adult? Choose one: close and facing adult, close but facing away from adult, far from adult.",
            options=("close and facing adult", "close but facing away from adult", "far from adult"),
        ),
    ]


def _demo_scripted() -> dict[str, dict[str, str]]:
    postures = ["sitting still"] * 4 + ["standing still"] * 4
    table: dict[str, dict[str, str]] = {}
    for i in range(8):
        clip_id = f"clip_{i:05d}"
        table[clip_id] = {
            "posture": postures[i] if i % 2 == 0 else f"The child is {postures[i]}.",
            "engagement": "yeah" if i != 6 else "Yes.",
            "proximity": "close and facing adult",
        }
    # One wording drift the cascade cannot place: queued for review.
    table["clip_00003"]["proximity"] = "close and facing away from adult"
    return table


def _demo_intervals() -> IntervalAnnotations:
    s = NS_PER_S
    return IntervalAnnotations.from_rows(
        [
            ("posture", 0, round(5.6 * s), "sitting still"),
            ("posture", round(5.6 * s), 11 * s, "standing still"),
            ("hand", 0, 4 * s, "on the ground"),
            ("hand", 4 * s, 8 * s, "grabbing toy"),
            ("hand", 8 * s, 11 * s, "resting"),
        ]
    )


def build_demo_session(root, seed: int = 0) -> Path:
    """Materialize the demo session under ``root``; returns the manifest path."""
    root = Path(root)
    session = root / "session"
    session.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    source = make_source(duration_s=16.0, seed=seed, t0_s=-3.0)
    for sid in DEMO_OFFSETS:
        samples = source.sample(
            DEMO_RATES[sid], DEMO_OFFSETS[sid], DEMO_STREAM_DURATION_S, noise_rms=0.008, rng=rng
        )
        write_wav(session / f"{sid}.wav", samples, DEMO_RATES[sid])
        fileio.write_luminance(
            _luminance_track(DEMO_OFFSETS[sid], DEMO_STREAM_DURATION_S), session / f"{sid}_lum.csv"
        )

    fileio.write_timestamp_track(demo_frame_track(), session / "child_frames.csv")
    fileio.write_gaze_track(_demo_gaze(), session / "child_gaze.csv")
    fileio.write_mask_archive(_demo_archive(), session / "child_masks.txt")
    fileio.write_intervals(_demo_intervals(), session / "intervals.csv")

    annotate.write_prompts(_demo_prompts(), session / "prompts.json")
    fileio._write_text(session / "scripted.json", json.dumps(_demo_scripted(), indent=2, sort_keys=True) + "\n")
    annotate.write_grouping(
        {"on the ground": "resting/support", "on some furniture": "resting/support", "resting": "resting/support"},
        session / "grouping.json",
    )
    ledger = annotate.AliasLedger()
    ledger.add_alias(
        "engagement", "yeah", "yes", actor="seed", timestamp=_SEED_TIMESTAMP, spec=_demo_prompts()[1]
    )
    ledger.save(session / "ledger.json")

    manifest = SessionManifest(
        session_id="demo",
        streams=(
            StreamDecl(
                stream_id="child",
                role=Role.CHILD_EGO,
                audio_path=session / "child.wav",
                frame_timestamps_path=session / "child_frames.csv",
                gaze_path=session / "child_gaze.csv",
                mask_archive_path=session / "child_masks.txt",
                luminance_path=session / "child_lum.csv",
            ),
            StreamDecl(
                stream_id="caregiver",
                role=Role.CAREGIVER_EGO,
                audio_path=session / "caregiver.wav",
                luminance_path=session / "caregiver_lum.csv",
            ),
            StreamDecl(
                stream_id="side",
                role=Role.SIDE_CAM,
                audio_path=session / "side.wav",
                luminance_path=session / "side_lum.csv",
            ),
        ),
    )
    manifest_path = session / "manifest.json"
    fileio.write_manifest(manifest, manifest_path)
    return manifest_path


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python3 -m gazekit.demo <output-dir>", file=sys.stderr)
        return 2
    manifest_path = build_demo_session(Path(argv[0]))
    print(f"demo session written; manifest at {manifest_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
