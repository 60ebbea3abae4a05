"""Single executable exposing every pipeline stage as a subcommand.

Every tunable is available as a flag, as an environment variable with the
GAZEKIT_ prefix, and through a JSON config file (flags win, then environment,
then config). Each subcommand validates inputs eagerly, takes a lock on the
output directory, writes its outputs plus a machine-readable run report, and
exits nonzero on any error: 2 for usage, 3 for input validation, 4 for stage
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, annotate, audiosync, fileio, gazemap, maskmetrics, state
from .errors import BackendError, FormatError, ManifestError, PipelineError, StateError, SyncError

ENV_PREFIX = "GAZEKIT_"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_STAGE = 4

_INPUT_ERRORS = (ManifestError, FormatError, StateError, ValueError, KeyError)


def _resolve(args, name: str, cast, default):
    """Parameter lookup: CLI flag, then GAZEKIT_* env var, then config file."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return cast(env)
    config = getattr(args, "_config", {})
    if name in config:
        raw = config[name]
        return cast(raw) if isinstance(raw, str) else raw
    return default


def _json_dump(doc, path) -> None:
    state.atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _echo_path(out: Path, value) -> str | None:
    """Path as echoed into run reports: relative to the output directory when
    it lives inside it, so reports from runs that differ only in destination
    stay byte-identical."""
    if value is None:
        return None
    resolved = Path(value).resolve()
    try:
        return str(resolved.relative_to(out.resolve()))
    except ValueError:
        return str(value)


def _out_dir(args) -> Path:
    out = Path(_resolve(args, "out", str, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _want_figures(args) -> bool:
    return not getattr(args, "no_figures", False)


def _sync_config(args) -> audiosync.SyncConfig:
    spec = audiosync.SpectrogramConfig(
        window_s=_resolve(args, "window_s", float, 0.064),
        hop_s=_resolve(args, "hop_s", float, 0.010),
        num_bands=_resolve(args, "bands", int, 64),
        max_freq_hz=_resolve(args, "max_freq_hz", float, 8000.0),
    )
    return audiosync.SyncConfig(
        spectrogram=spec,
        min_overlap_frac=_resolve(args, "min_overlap_frac", float, 0.1),
        reference_stream=_resolve(args, "reference", str, None),
    )


def _manifest_inputs(manifest, manifest_path) -> dict:
    inputs = {"manifest": Path(manifest_path)}
    for s in manifest.streams:
        for field in ("audio_path", "frame_timestamps_path", "gaze_path", "mask_archive_path", "luminance_path"):
            p = getattr(s, field)
            if p is not None:
                inputs[f"{s.stream_id}:{field}"] = p
    return inputs


# ---------------------------------------------------------------------------
# sync


def cmd_sync(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    cfg = _sync_config(args)
    out = _out_dir(args)
    inputs = _manifest_inputs(manifest, args.manifest)
    sync_dir = out / state.SYNC_DIR
    state.check_write_targets(inputs.values(), write_dirs=[sync_dir], write_files=[out / "sync.run.json"])

    with state.OutputLock(out):
        sync_dir.mkdir(exist_ok=True)
        result = audiosync.synchronize_session(manifest, cfg)

        report = {
            "session_id": manifest.session_id,
            "reference_stream": result.reference_stream,
            "offsets_s": dict(sorted(result.offsets_s.items())),
            "integer_offsets_s": dict(sorted(result.integer_offsets_s.items())),
            "peak_norm_corr": dict(sorted(result.peak_norm_corr.items())),
            "overlap_window": {"start_s": result.overlap_window.start_s, "end_s": result.overlap_window.end_s},
        }
        _json_dump(report, sync_dir / f"{manifest.session_id}.report.json")

        if not args.no_curves:
            for stream_id in sorted(result.curves):
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(["lag_s", "norm_corr"])
                for lag_s, corr in result.curves[stream_id]:
                    w.writerow([fileio.format_float(lag_s), fileio.format_float(corr)])
                state.atomic_write_text(sync_dir / f"{manifest.session_id}.curve.{stream_id}.csv", buf.getvalue())
        if _want_figures(args) and result.curves:
            from . import figures

            figures.save_correlation_curves(
                result.curves, result.reference_stream, sync_dir / f"{manifest.session_id}.curves.png"
            )

        synced_streams = []
        skipped = []
        for s in manifest.streams:
            if s.stream_id not in result.offsets_s:
                skipped.append(s.stream_id)
                synced_streams.append(s)
                continue
            offset = result.offsets_s[s.stream_id]
            updates = {}
            if s.frame_timestamps_path is not None:
                track = fileio.load_timestamp_track(s.frame_timestamps_path)
                new_track, mapping = audiosync.apply_sync(track, offset, result.overlap_window)
                frames_path = sync_dir / f"{s.stream_id}.frames.csv"
                fileio.write_timestamp_track(new_track, frames_path)
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(["old_frame", "new_frame"])
                for old, new in sorted(mapping.items()):
                    w.writerow([old, new])
                state.atomic_write_text(sync_dir / f"{s.stream_id}.frame_map.csv", buf.getvalue())
                updates["frame_timestamps_path"] = frames_path
            if s.gaze_path is not None:
                gaze = fileio.load_gaze_track(s.gaze_path)
                new_gaze, _ = audiosync.apply_sync(gaze, offset, result.overlap_window)
                gaze_path = sync_dir / f"{s.stream_id}.gaze.csv"
                fileio.write_gaze_track(new_gaze, gaze_path)
                updates["gaze_path"] = gaze_path
            synced_streams.append(replace(s, **updates) if updates else s)
        synced = type(manifest)(session_id=manifest.session_id, streams=tuple(synced_streams))
        fileio.write_manifest(synced, sync_dir / "manifest.synced.json")

        state.write_run_report(
            out,
            "sync",
            {
                "manifest": _echo_path(out, args.manifest),
                "window_s": cfg.spectrogram.window_s,
                "hop_s": cfg.spectrogram.hop_s,
                "bands": cfg.spectrogram.num_bands,
                "max_freq_hz": cfg.spectrogram.max_freq_hz,
                "min_overlap_frac": cfg.min_overlap_frac,
                "reference": result.reference_stream,
                "curves": not args.no_curves,
                "figures": _want_figures(args),
            },
            inputs,
        )

    for sid in sorted(result.offsets_s):
        print(f"offset[{sid}] = {result.offsets_s[sid]:+.4f} s")
    print(f"overlap window: [{result.overlap_window.start_s:.4f}, {result.overlap_window.end_s:.4f}] s")
    if skipped:
        print(f"streams without audio left untouched: {', '.join(skipped)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    out = _out_dir(args)
    threshold = _resolve(args, "threshold", float, 0.5)
    min_gap_s = _resolve(args, "min_gap_s", float, 0.5)

    offsets: dict[str, float] = {}
    inputs = _manifest_inputs(manifest, args.manifest)
    if args.sync_report:
        inputs["sync_report"] = Path(args.sync_report)
        report = json.loads(Path(args.sync_report).read_text(encoding="utf-8"))
        offsets = report.get("offsets_s", {})
    state.check_write_targets(
        inputs.values(), write_files=[out / "validate.report.json", out / "validate.run.json"]
    )

    with state.OutputLock(out):
        events: dict[str, list[float]] = {}
        for s in manifest.streams:
            if s.luminance_path is None:
                continue
            series = fileio.load_luminance(s.luminance_path)
            shift = offsets.get(s.stream_id, 0.0)
            events[s.stream_id] = [t + shift for t in audiosync.detect_flash_events(series, threshold, min_gap_s)]
        if len(events) < 2:
            raise SyncError(f"need at least 2 streams with luminance tracks, got {len(events)}")
        stats = audiosync.validate_sync(events)

        doc = {
            "session_id": manifest.session_id,
            "offsets_applied": bool(args.sync_report),
            "pairs": [
                {
                    "stream_a": a,
                    "stream_b": b,
                    "mean_abs_s": st.mean_abs_s,
                    "max_abs_s": st.max_abs_s,
                    "n_matched": st.n_matched,
                    "unmatched": {k: list(v) for k, v in st.unmatched.items()},
                }
                for (a, b), st in sorted(stats.items())
            ],
        }
        _json_dump(doc, out / "validate.report.json")
        state.write_run_report(
            out,
            "validate",
            {
                "manifest": _echo_path(out, args.manifest),
                "threshold": threshold,
                "min_gap_s": min_gap_s,
                "sync_report": _echo_path(out, args.sync_report),
            },
            inputs,
        )

    for pair in doc["pairs"]:
        print(
            f"{pair['stream_a']} vs {pair['stream_b']}: mean |dt| = {pair['mean_abs_s'] * 1e3:.1f} ms, "
            f"max = {pair['max_abs_s'] * 1e3:.1f} ms over {pair['n_matched']} events"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args) -> int:
    archive = fileio.load_mask_archive(args.archive)
    out = _out_dir(args)
    name = args.name or Path(args.archive).stem
    inputs = {"mask_archive": Path(args.archive)}
    metrics_dir = out / state.METRICS_DIR
    state.check_write_targets(inputs.values(), write_dirs=[metrics_dir], write_files=[out / "metrics.run.json"])

    with state.OutputLock(out):
        metrics_dir.mkdir(exist_ok=True)
        report = maskmetrics.evaluate_archive(archive)
        maskmetrics.write_quality_csv(report, metrics_dir / f"{name}.csv")
        if _want_figures(args):
            from . import figures

            figures.save_quality_timelines(report, metrics_dir / f"{name}.png")
        state.write_run_report(out, "metrics", {"archive": _echo_path(out, args.archive), "name": name}, inputs)

    means = {
        "ifc": "n/a" if report.ifc_mean is None else f"{report.ifc_mean:.4f}",
        "br": f"{report.br_mean:.4f}",
        "os": f"{report.os_mean:.4f}",
    }
    print(f"{report.n_frames} frames; temporal means: ifc={means['ifc']} br={means['br']} os={means['os']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gaze


def _stream_decl(manifest, stream_id):
    try:
        return manifest.stream(stream_id)
    except KeyError:
        raise ManifestError(
            f"unknown stream {stream_id!r}; session declares {[s.stream_id for s in manifest.streams]}"
        ) from None


def cmd_gaze(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    decl = _stream_decl(manifest, args.stream)
    for field in ("frame_timestamps_path", "gaze_path", "mask_archive_path"):
        if getattr(decl, field) is None:
            raise ManifestError(f"stream {args.stream!r} declares no {field}")
    cfg = gazemap.GazeMappingConfig(
        radius_px=_resolve(args, "radius_px", float, 40.0),
        smoothing_window=_resolve(args, "smooth", int, None),
    )
    out = _out_dir(args)
    inputs = _manifest_inputs(manifest, args.manifest)
    gaze_dir = out / state.GAZE_DIR
    state.check_write_targets(inputs.values(), write_dirs=[gaze_dir], write_files=[out / "gaze.run.json"])

    with state.OutputLock(out):
        gaze_dir.mkdir(exist_ok=True)
        frames = fileio.load_timestamp_track(decl.frame_timestamps_path)
        gaze = fileio.load_gaze_track(decl.gaze_path)
        archive = fileio.load_mask_archive(decl.mask_archive_path)
        trajectory = gazemap.map_trajectory(gaze, frames, archive, cfg)
        gazemap.write_trajectory_csv(trajectory, archive.registry, gaze_dir / f"{args.stream}.csv")
        if _want_figures(args):
            from . import figures

            figures.save_gaze_ribbon(trajectory, archive.registry.names, gaze_dir / f"{args.stream}.png")
        state.write_run_report(
            out,
            "gaze",
            {
                "manifest": _echo_path(out, args.manifest),
                "stream": args.stream,
                "radius_px": cfg.radius_px,
                "smooth": cfg.smoothing_window,
            },
            inputs,
        )

    n_by_target = {}
    for s in trajectory:
        n_by_target[s.target] = n_by_target.get(s.target, 0) + 1
    print(f"{len(trajectory)} samples; targets: " + ", ".join(f"{k}={v}" for k, v in sorted(n_by_target.items())))
    return EXIT_OK


# ---------------------------------------------------------------------------
# annotate


def _parse_backend(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "scripted" and rest:
        return annotate.ScriptedBackend.from_file(rest), {"scripted": rest}
    if kind == "command" and rest:
        return annotate.CommandBackend(rest), {"command": rest}
    raise ValueError(f"backend must be scripted:<path> or command:<template>, got {spec!r}")


def _stream_duration_s(args, manifest, decl) -> float:
    explicit = _resolve(args, "duration_s", float, None)
    if explicit is not None:
        return explicit
    if decl.frame_timestamps_path is not None:
        track = fileio.load_timestamp_track(decl.frame_timestamps_path)
        if len(track) >= 2:
            ts = track.timestamps_ns()
            return float(ts[-1] - ts[0]) / 1e9
    if decl.audio_path is not None:
        return audiosync.load_audio(decl.audio_path).duration_s
    raise ManifestError(
        f"cannot infer duration for stream {decl.stream_id!r}; pass --duration-s or declare frames/audio"
    )


def _cut_clips(cutter: str, video: Path, plan, clips_dir: Path) -> dict[str, Path]:
    clips_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for clip in plan.clips:
        out_path = clips_dir / f"{clip.clip_id}.mp4"
        cmd = (
            cutter.replace("{input}", str(video))
            .replace("{start}", f"{clip.start_s:.3f}")
            .replace("{duration}", f"{clip.duration_s:.3f}")
            .replace("{output}", str(out_path))
        )
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise PipelineError(f"cutter failed for {clip.clip_id}: {proc.stderr.strip()[-200:]}")
        paths[clip.clip_id] = out_path
    return paths


def cmd_annotate(args) -> int:
    manifest = fileio.load_manifest(args.manifest)
    decl = _stream_decl(manifest, args.stream)
    prompts = annotate.load_prompts(args.prompts)
    backend, backend_desc = _parse_backend(_resolve(args, "backend", str, None) or "")
    ledger = annotate.AliasLedger.load(args.ledger) if args.ledger else annotate.AliasLedger()
    window_s = _resolve(args, "clip_window_s", float, 3.0)
    shift_s = _resolve(args, "clip_shift_s", float, 1.0)
    out = _out_dir(args)

    inputs = _manifest_inputs(manifest, args.manifest)
    inputs["prompts"] = Path(args.prompts)
    if args.ledger:
        inputs["ledger"] = Path(args.ledger)
    if "scripted" in backend_desc:
        inputs["backend_table"] = Path(backend_desc["scripted"])
    ann_dir = out / state.ANNOTATION_DIR
    state.check_write_targets(inputs.values(), write_dirs=[ann_dir], write_files=[out / "annotate.run.json"])

    with state.OutputLock(out):
        ann_dir.mkdir(exist_ok=True)
        duration_s = _stream_duration_s(args, manifest, decl)
        plan = annotate.plan_clips(duration_s, window_s, shift_s, source_stream=args.stream)

        clip_paths: dict[str, Path] | None = None
        if args.cutter:
            if not args.video:
                raise ValueError("--cutter requires --video (the {input} of the cut template)")
            clip_paths = _cut_clips(args.cutter, Path(args.video), plan, ann_dir / "clips")

        run = annotate.run_annotation(plan, prompts, backend, ledger, clip_paths)

        annotate.write_plan_json(plan, ann_dir / state.PLAN_FILE)
        annotate.write_series_csv(run.series, ann_dir / state.SERIES_FILE)
        annotate.write_raw_json(run.raw, ann_dir / state.RAW_FILE)
        annotate.write_anomalies_json(run.anomalies, ann_dir / state.ANOMALIES_FILE)
        annotate.write_prompts(prompts, ann_dir / state.PROMPTS_FILE)
        ledger.save(ann_dir / state.LEDGER_FILE)

        state.write_run_report(
            out,
            "annotate",
            {
                "manifest": _echo_path(out, args.manifest),
                "stream": args.stream,
                "prompts": _echo_path(out, args.prompts),
                "backend": {k: _echo_path(out, v) for k, v in backend_desc.items()},
                "ledger": _echo_path(out, args.ledger),
                "clip_window_s": window_s,
                "clip_shift_s": shift_s,
                "duration_s": duration_s,
                "cutter": args.cutter,
            },
            inputs,
        )

    open_anomalies = sum(1 for a in run.anomalies if a.status == "open")
    print(f"{len(plan.clips)} clips x {len(prompts)} prompts; {open_anomalies} anomalies queued for review")
    return EXIT_OK


# ---------------------------------------------------------------------------
# agree


def cmd_agree(args) -> int:
    series = annotate.load_series_csv(args.series)
    plan = annotate.load_plan_json(args.plan)
    intervals = fileio.load_intervals(args.intervals)
    grouping = annotate.load_grouping(args.grouping) if args.grouping else {}
    out = _out_dir(args)
    inputs = {
        "series": Path(args.series),
        "plan": Path(args.plan),
        "intervals": Path(args.intervals),
    }
    if args.grouping:
        inputs["grouping"] = Path(args.grouping)
    state.check_write_targets(
        inputs.values(),
        write_files=[out / f"agreement.{args.prompt_id}.json", out / "agree.run.json"],
    )

    if [r.clip_id for r in series.rows] != [c.clip_id for c in plan.clips]:
        raise ValueError("series rows do not match the clip plan")

    with state.OutputLock(out):
        model = series.column(args.prompt_id)
        human = annotate.human_series_from_intervals(intervals, args.tier, plan, grouping)
        report = annotate.agreement(model, human, grouping)
        doc = {
            "prompt_id": args.prompt_id,
            "tier": args.tier,
            "accuracy": report.accuracy,
            "compared": report.compared,
            "excluded": report.excluded,
            "confusion": [
                {"model": m, "human": h, "count": c} for (m, h), c in sorted(report.confusion.items())
            ],
        }
        _json_dump(doc, out / f"agreement.{args.prompt_id}.json")
        state.write_run_report(
            out,
            "agree",
            {
                "series": _echo_path(out, args.series),
                "plan": _echo_path(out, args.plan),
                "intervals": _echo_path(out, args.intervals),
                "tier": args.tier,
                "prompt_id": args.prompt_id,
                "grouping": _echo_path(out, args.grouping),
            },
            inputs,
        )

    shown = "undefined (no comparable windows)" if report.accuracy is None else f"{report.accuracy:.3f}"
    print(f"accuracy = {shown} over {report.compared} windows ({report.excluded} excluded)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bind = _resolve(args, "bind", str, "127.0.0.1:8777")
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"--bind must look like host:port, got {bind!r}")
    app = create_app(Path(args.state_dir), ui_dir=Path(args.ui_dir) if args.ui_dir else None)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazekit",
        description="Post-hoc A/V synchronization, gaze-target mapping, mask quality metrics, "
        "and behavior-annotation normalization.",
    )
    parser.add_argument("--version", action="version", version=f"gazekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default: ./out)")
        p.add_argument("--config", help="JSON config file; flags and env override it")
        p.add_argument("--no-figures", action="store_true", help="skip rendering matplotlib figures")

    p = sub.add_parser("sync", help="estimate offsets from audio and rewrite tracks onto a shared timeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--window-s", type=float, dest="window_s")
    p.add_argument("--hop-s", type=float, dest="hop_s")
    p.add_argument("--bands", type=int)
    p.add_argument("--max-freq-hz", type=float, dest="max_freq_hz")
    p.add_argument("--min-overlap-frac", type=float, dest="min_overlap_frac")
    p.add_argument("--reference", help="reference stream id (default: first stream with audio)")
    p.add_argument("--no-curves", action="store_true", help="skip the correlation-curve dumps")
    common(p)
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("validate", help="check alignment via flash events in luminance tracks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sync-report", help="sync report JSON; offsets are applied before matching")
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-gap-s", type=float, dest="min_gap_s")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", help="per-frame segmentation quality of a mask archive")
    p.add_argument("--archive", required=True, help="mask archive path")
    p.add_argument("--name", help="output name (default: archive file stem)")
    common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("gaze", help="map gaze samples to object categories")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--radius-px", type=float, dest="radius_px")
    p.add_argument("--smooth", type=int, help="odd majority-vote window; omit for no smoothing")
    common(p)
    p.set_defaults(func=cmd_gaze)

    p = sub.add_parser("annotate", help="plan clips, query the backend, normalize responses")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--prompts", required=True, help="prompt spec JSON")
    p.add_argument("--backend", help="scripted:<path> or command:<template>")
    p.add_argument("--ledger", help="alias ledger JSON")
    p.add_argument("--clip-window-s", type=float, dest="clip_window_s")
    p.add_argument("--clip-shift-s", type=float, dest="clip_shift_s")
    p.add_argument("--duration-s", type=float, dest="duration_s", help="override the stream duration")
    p.add_argument("--cutter", help="clip cut command with {input} {start} {duration} {output}")
    p.add_argument("--video", help="video file fed to the cutter as {input}")
    common(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("agree", help="score a normalized series against human intervals")
    p.add_argument("--series", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--intervals", required=True)
    p.add_argument("--tier", required=True)
    p.add_argument("--prompt-id", required=True, dest="prompt_id")
    p.add_argument("--grouping")
    common(p)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("serve", help="start the local review service over a state directory")
    p.add_argument("--state-dir", required=True, dest="state_dir")
    p.add_argument("--bind", help="host:port (default 127.0.0.1:8777, loopback only)")
    p.add_argument("--ui-dir", dest="ui_dir", help="built frontend bundle to host at /")
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    args._config = config

    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SyncError, BackendError, PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    raise SystemExit(main())
