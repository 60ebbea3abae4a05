import json
import os
from pathlib import Path

import pytest

from gazekit.cli import EXIT_INPUT, EXIT_STAGE, main
from gazekit.demo import DEMO_OFFSETS, build_demo_session


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_demo")
    manifest = build_demo_session(root, seed=0)
    return manifest


def _run_all_stages(manifest: Path, out: Path) -> None:
    session = manifest.parent
    assert main(["sync", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert (
        main(
            [
                "validate",
                "--manifest",
                str(manifest),
                "--sync-report",
                str(out / "sync" / "demo.report.json"),
                "--out",
                str(out),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "metrics",
                "--archive",
                str(session / "child_masks.txt"),
                "--name",
                "child",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "gaze",
                "--manifest",
                str(manifest),
                "--stream",
                "child",
                "--radius-px",
                "3.0",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "annotate",
                "--manifest",
                str(manifest),
                "--stream",
                "side",
                "--prompts",
                str(session / "prompts.json"),
                "--backend",
                f"scripted:{session / 'scripted.json'}",
                "--ledger",
                str(session / "ledger.json"),
                "--duration-s",
                "10.0",
                "--out",
                str(out),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "agree",
                "--series",
                str(out / "annotation" / "series.csv"),
                "--plan",
                str(out / "annotation" / "plan.json"),
                "--intervals",
                str(session / "intervals.csv"),
                "--tier",
                "posture",
                "--prompt-id",
                "posture",
                "--grouping",
                str(session / "grouping.json"),
                "--out",
                str(out),
            ]
        )
        == 0
    )


class TestSyncCommand:
    def test_offsets_recovered_and_outputs_written(self, demo, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["sync", "--manifest", str(demo), "--out", str(out)]) == 0
        report = json.loads((out / "sync" / "demo.report.json").read_text())
        for sid, expected in DEMO_OFFSETS.items():
            assert abs(report["offsets_s"][sid] - expected) <= 0.010
        assert (out / "sync" / "demo.curves.png").exists()
        assert (out / "sync" / "demo.curve.caregiver.csv").exists()
        assert (out / "sync" / "child.frames.csv").exists()
        assert (out / "sync" / "child.gaze.csv").exists()
        assert (out / "sync" / "manifest.synced.json").exists()
        assert (out / "sync.run.json").exists()
        assert not (out / ".gazekit.lock").exists()

    def test_lock_blocks_concurrent_writers(self, demo, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / ".gazekit.lock").write_text("12345")
        assert main(["sync", "--manifest", str(demo), "--out", str(out)]) == EXIT_INPUT

    def test_missing_manifest_is_input_error(self, tmp_path):
        assert main(["sync", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_input_colliding_with_write_target_rejected(self, demo, tmp_path):
        # An input sitting inside the directory a stage writes must be refused.
        out = tmp_path / "out"
        (out / "metrics").mkdir(parents=True)
        planted = out / "metrics" / "masks.txt"
        planted.write_text((demo.parent / "child_masks.txt").read_text(), encoding="utf-8")
        assert main(["metrics", "--archive", str(planted), "--out", str(out)]) == EXIT_INPUT


class TestValidateCommand:
    def test_validate_after_sync_meets_residual_bound(self, demo, tmp_path):
        out = tmp_path / "out"
        assert main(["sync", "--manifest", str(demo), "--out", str(out)]) == 0
        assert (
            main(
                [
                    "validate",
                    "--manifest",
                    str(demo),
                    "--sync-report",
                    str(out / "sync" / "demo.report.json"),
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        report = json.loads((out / "validate.report.json").read_text())
        assert report["offsets_applied"] is True
        for pair in report["pairs"]:
            assert pair["n_matched"] >= 1
            assert pair["max_abs_s"] <= 0.070


class TestMetricsCommand:
    def test_single_frame_archive(self, tmp_path):
        archive = tmp_path / "one.txt"
        header = json.dumps({"width": 2, "height": 2, "frame_count": 1, "objects": ["a"]})
        archive.write_text(header + "\n0 0 0 4\n", encoding="utf-8")
        out = tmp_path / "out"
        assert main(["metrics", "--archive", str(archive), "--out", str(out)]) == 0
        text = (out / "metrics" / "one.csv").read_text()
        first_row = text.splitlines()[1]
        assert first_row.startswith("0,,")  # ifc column empty for frame 0

    def test_bad_archive_is_input_error(self, tmp_path):
        archive = tmp_path / "bad.txt"
        archive.write_text("not a header\n", encoding="utf-8")
        assert main(["metrics", "--archive", str(archive), "--out", str(tmp_path / "o")]) == EXIT_INPUT


class TestGazeCommand:
    def test_trajectory_written(self, demo, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["gaze", "--manifest", str(demo), "--stream", "child", "--radius-px", "3.0", "--out", str(out)]
        )
        assert code == 0
        text = (out / "gaze" / "child.csv").read_text().splitlines()
        assert text[0] == "timestamp_ns,frame_index,target,background_ratio,elephant,ball"
        targets = [line.split(",")[2] for line in text[1:]]
        assert targets[:20] == ["elephant"] * 20
        assert targets[20:40] == ["ball"] * 20
        assert targets[40:] == ["background"] * 20
        assert (out / "gaze" / "child.png").exists()

    def test_unknown_stream(self, demo, tmp_path):
        assert (
            main(["gaze", "--manifest", str(demo), "--stream", "nope", "--out", str(tmp_path / "o")]) == EXIT_INPUT
        )

    def test_env_var_supplies_radius(self, demo, tmp_path, monkeypatch):
        monkeypatch.setenv("GAZEKIT_RADIUS_PX", "3.0")
        out = tmp_path / "out"
        assert main(["gaze", "--manifest", str(demo), "--stream", "child", "--out", str(out)]) == 0
        run_report = json.loads((out / "gaze.run.json").read_text())
        assert run_report["parameters"]["radius_px"] == 3.0

    def test_config_file_supplies_radius_flags_win(self, demo, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"radius_px": 5.0}), encoding="utf-8")
        out1 = tmp_path / "o1"
        assert main(["gaze", "--manifest", str(demo), "--stream", "child", "--config", str(config), "--out", str(out1)]) == 0
        assert json.loads((out1 / "gaze.run.json").read_text())["parameters"]["radius_px"] == 5.0
        out2 = tmp_path / "o2"
        assert (
            main(
                [
                    "gaze",
                    "--manifest",
                    str(demo),
                    "--stream",
                    "child",
                    "--config",
                    str(config),
                    "--radius-px",
                    "3.0",
                    "--out",
                    str(out2),
                ]
            )
            == 0
        )
        assert json.loads((out2 / "gaze.run.json").read_text())["parameters"]["radius_px"] == 3.0


class TestAnnotateCommand:
    def test_series_and_anomalies_written(self, demo, tmp_path):
        session = demo.parent
        out = tmp_path / "out"
        code = main(
            [
                "annotate",
                "--manifest",
                str(demo),
                "--stream",
                "side",
                "--prompts",
                str(session / "prompts.json"),
                "--backend",
                f"scripted:{session / 'scripted.json'}",
                "--ledger",
                str(session / "ledger.json"),
                "--duration-s",
                "10.0",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        series = (out / "annotation" / "series.csv").read_text().splitlines()
        assert series[0] == "clip_id,start_s,end_s,posture,engagement,proximity"
        assert len(series) == 9  # header + 8 clips
        anomalies = json.loads((out / "annotation" / "anomalies.json").read_text())["anomalies"]
        assert len(anomalies) == 1
        assert anomalies[0]["anomaly_id"] == "clip_00003:proximity"
        # the seeded yeah->yes alias resolves engagement cells
        assert ",yes," in series[1]

    def test_bad_backend_spec(self, demo, tmp_path):
        session = demo.parent
        code = main(
            [
                "annotate",
                "--manifest",
                str(demo),
                "--stream",
                "side",
                "--prompts",
                str(session / "prompts.json"),
                "--backend",
                "telepathy",
                "--duration-s",
                "10.0",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == EXIT_INPUT


class TestAgreeCommand:
    def test_agreement_report(self, demo, tmp_path):
        out = tmp_path / "out"
        _run_all_stages(demo, out)
        report = json.loads((out / "agreement.posture.json").read_text())
        assert report["compared"] + report["excluded"] == 8
        assert 0.0 <= report["accuracy"] <= 1.0
        assert sum(c["count"] for c in report["confusion"]) == report["compared"]


class TestReproducibility:
    def test_two_runs_are_bit_identical(self, demo, tmp_path):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        _run_all_stages(demo, out1)
        _run_all_stages(demo, out2)
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), f"{rel} differs"


class TestDemoBuild:
    def test_demo_build_is_deterministic(self, tmp_path):
        m1 = build_demo_session(tmp_path / "a", seed=0)
        m2 = build_demo_session(tmp_path / "b", seed=0)
        files1 = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
