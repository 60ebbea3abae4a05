"""Audio-based lag estimation and track rewriting onto a shared timeline.

Streams are compared through band-aggregated magnitude spectrograms with a
common hop in seconds, so devices with different sample rates stay directly
comparable without resampling. The raw cross-correlation is normalized by the
overlap-length profile of two boxcar series (the correlation expected from
signal positions alone) before the peak is taken.

Sign convention: ``estimate_lag(ref, other)`` returns the number of seconds
the other stream's clock started *after* the reference clock. Adding that
offset to the other stream's timestamps lands them on the reference timeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.io.wavfile

from .errors import FormatError, SyncError
from .model import GazeTrack, SessionManifest, TimestampTrack

NS_PER_S = 1_000_000_000

# Events further apart than this are never considered the same flash.
FLASH_MATCH_WINDOW_S = 0.5


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.samples.size == 0:
            raise ValueError("audio must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio must contain finite samples only")
        if np.max(np.abs(self.samples)) > 1.0 + 1e-9:
            raise ValueError("audio samples must lie in [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def load_audio(path) -> AudioBuffer:
    """Load a mono or multi-channel WAV file; channels are averaged to mono."""
    path = Path(path)
    try:
        rate, data = scipy.io.wavfile.read(path)
    except Exception as exc:
        raise FormatError(f"cannot read WAV file: {exc}", path=path) from exc
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        scale = float(max(abs(info.min), info.max))
        offset = 0.0
        if info.min == 0:  # unsigned PCM is offset-binary
            offset = (info.max + 1) / 2.0
            scale = offset
        samples = (data.astype(np.float64) - offset) / scale
    else:
        samples = data.astype(np.float64)
    try:
        return AudioBuffer(samples=samples, sample_rate_hz=int(rate))
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from exc


@dataclass(frozen=True)
class SpectrogramConfig:
    window_s: float = 0.064
    hop_s: float = 0.010
    num_bands: int = 64
    max_freq_hz: float = 8000.0

    def __post_init__(self):
        if not self.hop_s > 0:
            raise ValueError("hop_s must be positive")
        if self.window_s < self.hop_s:
            raise ValueError("window_s must be >= hop_s")
        if self.num_bands < 1:
            raise ValueError("num_bands must be >= 1")
        if not self.max_freq_hz > 0:
            raise ValueError("max_freq_hz must be positive")


@dataclass(frozen=True)
class Spectrogram:
    """Band-aggregated time-frequency matrix, shape (num_bands, num_frames)."""

    bands: np.ndarray
    hop_s: float
    band_edges_hz: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.bands.shape[1]


_FRAME_CHUNK = 2048


def compute_spectrogram(audio: AudioBuffer, cfg: SpectrogramConfig, subtract_band_means: bool = True) -> Spectrogram:
    """Band-aggregated magnitude spectrogram on a hop grid specified in seconds.

    Window and hop are converted to this stream's own sample counts, so
    heterogeneous sample rates produce spectrograms with identical ``hop_s``
    and band layout. Bin magnitudes are averaged into ``num_bands`` equal-width
    linear bands up to ``max_freq_hz``, compressed with log1p, and (by default)
    each band's temporal mean is subtracted.
    """
    sr = audio.sample_rate_hz
    if cfg.max_freq_hz > sr / 2:
        raise SyncError(f"max_freq_hz {cfg.max_freq_hz} exceeds Nyquist {sr / 2} at {sr} Hz")
    window_n = max(1, round(cfg.window_s * sr))
    n = audio.samples.size
    if window_n > n:
        raise SyncError(f"audio shorter than one window ({n} samples < {window_n})")

    hop_samples = cfg.hop_s * sr
    num_frames = int((n - window_n) / hop_samples) + 1
    starts = np.rint(np.arange(num_frames) * hop_samples).astype(np.int64)
    starts = starts[starts + window_n <= n]

    # Zero-pad each frame to a 5-smooth FFT length; the window itself stays
    # window_n samples, the padding only densifies the bin grid.
    fft_n = scipy.fft.next_fast_len(window_n)
    freqs = np.fft.rfftfreq(fft_n, d=1.0 / sr)
    band_edges = np.linspace(0.0, cfg.max_freq_hz, cfg.num_bands + 1)
    band_width = cfg.max_freq_hz / cfg.num_bands
    bin_band = np.floor(freqs / band_width).astype(np.int64)
    bin_band[freqs == cfg.max_freq_hz] = cfg.num_bands - 1
    in_range = (bin_band >= 0) & (bin_band < cfg.num_bands)
    counts = np.bincount(bin_band[in_range], minlength=cfg.num_bands).astype(np.float64)

    # Averaging matrix: band value = mean of the magnitudes of its bins.
    aggregate = np.zeros((cfg.num_bands, freqs.size))
    aggregate[bin_band[in_range], np.flatnonzero(in_range)] = 1.0
    aggregate[counts > 0] /= counts[counts > 0, None]

    window = np.hanning(window_n)
    bands = np.empty((cfg.num_bands, starts.size), dtype=np.float64)
    for lo in range(0, starts.size, _FRAME_CHUNK):
        chunk = starts[lo : lo + _FRAME_CHUNK]
        idx = chunk[:, None] + np.arange(window_n)[None, :]
        mags = np.abs(scipy.fft.rfft(audio.samples[idx] * window, n=fft_n, axis=1))
        bands[:, lo : lo + chunk.size] = aggregate @ mags.T
    bands = np.log1p(bands)
    if subtract_band_means:
        bands = bands - bands.mean(axis=1, keepdims=True)
    return Spectrogram(bands=bands, hop_s=cfg.hop_s, band_edges_hz=band_edges)


def boxcar_baseline(t1: int, t2: int, lag: int) -> int:
    """Overlap length of two boxcars of lengths t1, t2 at an integer lag.

    Counts the indices t with 0 <= t < t1 and 0 <= t - lag < t2, the
    denominator of the normalized cross-correlation C(tau)/baseline(tau).
    """
    if t1 < 1 or t2 < 1:
        raise ValueError("boxcar lengths must be >= 1")
    if not -(t2 - 1) <= lag <= t1 - 1:
        raise ValueError(f"lag {lag} outside valid range [{-(t2 - 1)}, {t1 - 1}]")
    return max(0, min(t1, t2 + lag) - max(0, lag))


def _boxcar_profile(t1: int, t2: int, lags: np.ndarray) -> np.ndarray:
    return np.maximum(0, np.minimum(t1, t2 + lags) - np.maximum(0, lags))


@dataclass(frozen=True)
class LagEstimate:
    """Result of one pairwise lag estimation.

    ``lag_s`` carries the parabolic sub-hop refinement; ``lag_frames`` is the
    unrefined integer-hop argmax. ``curve`` holds (lag_s, normalized_corr) rows
    over all admissible lags.
    """

    lag_s: float
    lag_frames: int
    peak_norm_corr: float
    curve: np.ndarray


def estimate_lag(s1: Spectrogram, s2: Spectrogram, min_overlap_frac: float = 0.1) -> LagEstimate:
    """Lag of s2 relative to s1 by normalized spectrogram cross-correlation.

    C(tau) = sum over bands and t of S1[b, t] * S2[b, t - tau], normalized by
    the boxcar overlap profile; lags whose overlap is below
    ``min_overlap_frac * min(T1, T2)`` frames are excluded. Exact ties are
    broken toward the smallest |lag|.
    """
    if s1.hop_s != s2.hop_s:
        raise SyncError(f"hop_s mismatch: {s1.hop_s} vs {s2.hop_s}")
    if not np.array_equal(s1.band_edges_hz, s2.band_edges_hz):
        raise SyncError("spectrograms use different band layouts")
    if not 0.0 < min_overlap_frac <= 1.0:
        raise ValueError("min_overlap_frac must lie in (0, 1]")

    t1, t2 = s1.num_frames, s2.num_frames
    length = scipy.fft.next_fast_len(t1 + t2 - 1)
    f1 = np.fft.rfft(s1.bands, length, axis=1)
    f2 = np.fft.rfft(s2.bands, length, axis=1)
    circular = np.fft.irfft((f1 * np.conj(f2)).sum(axis=0), length)

    lags = np.arange(-(t2 - 1), t1, dtype=np.int64)
    raw = circular[lags % length]
    overlap = _boxcar_profile(t1, t2, lags)
    admissible = overlap >= min_overlap_frac * min(t1, t2)
    if not np.any(admissible):
        raise SyncError("no admissible lag: streams too short for the required overlap")

    adm_lags = lags[admissible]
    norm = raw[admissible] / overlap[admissible]

    peak_value = norm.max()
    ties = adm_lags[norm == peak_value]
    best = int(min(ties, key=lambda tau: (abs(tau), tau)))
    best_pos = int(np.flatnonzero(adm_lags == best)[0])

    delta = 0.0
    if 0 < best_pos < adm_lags.size - 1 and adm_lags[best_pos - 1] == best - 1 and adm_lags[best_pos + 1] == best + 1:
        ym, y0, yp = norm[best_pos - 1], norm[best_pos], norm[best_pos + 1]
        denom = ym - 2.0 * y0 + yp
        if denom < 0.0:
            delta = float(np.clip((ym - yp) / (2.0 * denom), -0.5, 0.5))

    curve = np.column_stack([adm_lags * s1.hop_s, norm])
    return LagEstimate(
        lag_s=(best + delta) * s1.hop_s,
        lag_frames=best,
        peak_norm_corr=float(peak_value),
        curve=curve,
    )


@dataclass(frozen=True)
class OverlapWindow:
    """Closed interval on the reference timeline shared by all synced streams."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"overlap window is empty: [{self.start_s}, {self.end_s}]")


@dataclass(frozen=True)
class SyncConfig:
    spectrogram: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    min_overlap_frac: float = 0.1
    reference_stream: str | None = None


@dataclass(frozen=True)
class SyncResult:
    reference_stream: str
    offsets_s: dict[str, float]
    integer_offsets_s: dict[str, float]
    peak_norm_corr: dict[str, float]
    curves: dict[str, np.ndarray]
    overlap_window: OverlapWindow


def synchronize_session(manifest: SessionManifest, cfg: SyncConfig | None = None) -> SyncResult:
    """Estimate every stream's clock offset against a reference and intersect
    the aligned extents into the maximal overlap window.

    Each stream's audio is taken to start at its own clock's zero, so the
    stream covers [offset, offset + duration] on the reference timeline.
    """
    cfg = cfg or SyncConfig()
    audio_streams = [s for s in manifest.streams if s.audio_path is not None]
    if len(audio_streams) < 2:
        raise SyncError(f"need at least 2 streams with audio to synchronize, got {len(audio_streams)}")

    if cfg.reference_stream is not None:
        if cfg.reference_stream not in {s.stream_id for s in audio_streams}:
            raise SyncError(f"reference stream {cfg.reference_stream!r} has no audio in this session")
        reference = cfg.reference_stream
    else:
        reference = audio_streams[0].stream_id

    buffers = {s.stream_id: load_audio(s.audio_path) for s in audio_streams}
    min_nyquist = min(b.sample_rate_hz for b in buffers.values()) / 2
    if cfg.spectrogram.max_freq_hz > min_nyquist:
        raise SyncError(
            f"max_freq_hz {cfg.spectrogram.max_freq_hz} exceeds the lowest stream Nyquist {min_nyquist}"
        )
    specs = {sid: compute_spectrogram(buf, cfg.spectrogram) for sid, buf in buffers.items()}

    offsets: dict[str, float] = {reference: 0.0}
    integer_offsets: dict[str, float] = {reference: 0.0}
    peaks: dict[str, float] = {}
    curves: dict[str, np.ndarray] = {}
    failures: list[str] = []
    for s in audio_streams:
        if s.stream_id == reference:
            continue
        try:
            est = estimate_lag(specs[reference], specs[s.stream_id], cfg.min_overlap_frac)
        except SyncError as exc:
            failures.append(f"{reference}/{s.stream_id}: {exc}")
            continue
        offsets[s.stream_id] = est.lag_s
        integer_offsets[s.stream_id] = est.lag_frames * cfg.spectrogram.hop_s
        peaks[s.stream_id] = est.peak_norm_corr
        curves[s.stream_id] = est.curve
    if failures:
        raise SyncError("lag estimation failed: " + "; ".join(failures))

    start = max(offsets[sid] for sid in offsets)
    end = min(offsets[sid] + buffers[sid].duration_s for sid in offsets)
    if not start < end:
        raise SyncError(f"streams do not overlap: window [{start:.3f}, {end:.3f}] is empty")

    return SyncResult(
        reference_stream=reference,
        offsets_s=offsets,
        integer_offsets_s=integer_offsets,
        peak_norm_corr=peaks,
        curves=curves,
        overlap_window=OverlapWindow(start_s=start, end_s=end),
    )


def apply_sync(track, offset_s: float, window: OverlapWindow):
    """Rewrite a track onto the reference timeline and truncate to the window.

    Returns ``(new_track, frame_mapping)``; the mapping (old frame index to
    re-based index) is ``None`` for gaze tracks. The shift is one integer
    nanosecond offset applied to every entry, so pairwise timestamp
    differences within the track are preserved exactly.
    """
    if not np.isfinite(offset_s):
        raise SyncError("offset must be finite")
    offset_ns = round(offset_s * NS_PER_S)
    start_ns = round(window.start_s * NS_PER_S)
    end_ns = round(window.end_s * NS_PER_S)

    if isinstance(track, TimestampTrack):
        kept = [(frame, ts + offset_ns) for frame, ts in track.entries if start_ns <= ts + offset_ns <= end_ns]
        if not kept:
            raise SyncError("all entries truncated away by the overlap window")
        mapping = {old_frame: new_frame for new_frame, (old_frame, _) in enumerate(kept)}
        rebased = tuple((new, ts) for new, (_, ts) in enumerate(kept))
        return TimestampTrack(rebased), mapping
    if isinstance(track, GazeTrack):
        kept = [s for s in track.samples if start_ns <= s.timestamp_ns + offset_ns <= end_ns]
        if not kept:
            raise SyncError("all entries truncated away by the overlap window")
        shifted = tuple(
            type(s)(timestamp_ns=s.timestamp_ns + offset_ns, x=s.x, y=s.y, confidence=s.confidence) for s in kept
        )
        return GazeTrack(shifted), None
    raise TypeError(f"apply_sync expects a TimestampTrack or GazeTrack, got {type(track).__name__}")


def detect_flash_events(luminance, threshold: float, min_gap_s: float) -> list[float]:
    """Times (seconds) where luminance rises across the threshold, debounced."""
    if not luminance:
        raise ValueError("luminance series must be non-empty")
    events: list[float] = []
    last: float | None = None
    for (_, prev_v), (ts, v) in zip(luminance, luminance[1:]):
        if prev_v < threshold <= v:
            t = ts / NS_PER_S
            if last is None or t - last >= min_gap_s:
                events.append(t)
                last = t
    return events


@dataclass(frozen=True)
class ResidualStats:
    mean_abs_s: float
    max_abs_s: float
    n_matched: int
    unmatched: dict[str, tuple[float, ...]]


def validate_sync(events_by_stream: dict[str, list[float]]) -> dict[tuple[str, str], ResidualStats]:
    """Residual misalignment between every stream pair's flash events.

    Events are matched greedily by nearest time within FLASH_MATCH_WINDOW_S;
    unmatched events are reported per stream.
    """
    for sid, events in events_by_stream.items():
        if not events:
            raise SyncError(f"stream {sid!r} has no flash events to validate against")
    stream_ids = list(events_by_stream)
    out: dict[tuple[str, str], ResidualStats] = {}
    for i, a in enumerate(stream_ids):
        for b in stream_ids[i + 1 :]:
            ev_a, ev_b = events_by_stream[a], events_by_stream[b]
            candidates = sorted(
                ((abs(ta - tb), ia, ib) for ia, ta in enumerate(ev_a) for ib, tb in enumerate(ev_b)),
                key=lambda c: (c[0], c[1], c[2]),
            )
            used_a: set[int] = set()
            used_b: set[int] = set()
            diffs: list[float] = []
            for d, ia, ib in candidates:
                if d > FLASH_MATCH_WINDOW_S:
                    break
                if ia in used_a or ib in used_b:
                    continue
                used_a.add(ia)
                used_b.add(ib)
                diffs.append(d)
            out[(a, b)] = ResidualStats(
                mean_abs_s=float(np.mean(diffs)) if diffs else float("nan"),
                max_abs_s=float(np.max(diffs)) if diffs else float("nan"),
                n_matched=len(diffs),
                unmatched={
                    a: tuple(t for j, t in enumerate(ev_a) if j not in used_a),
                    b: tuple(t for j, t in enumerate(ev_b) if j not in used_b),
                },
            )
    return out
