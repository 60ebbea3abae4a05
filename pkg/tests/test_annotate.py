import json

import numpy as np
import pytest

from gazekit import annotate
from gazekit.annotate import (
    FLAGGED,
    AliasLedger,
    AnnotationRun,
    Clip,
    ClipPlan,
    CommandBackend,
    PromptSpec,
    ScriptedBackend,
    agreement,
    fold,
    human_series_from_intervals,
    load_anomalies_json,
    load_plan_json,
    load_prompts,
    load_raw_json,
    load_series_csv,
    normalize_response,
    plan_clips,
    render_prompt,
    renormalize,
    run_annotation,
    validate_prompts,
    write_anomalies_json,
    write_plan_json,
    write_raw_json,
    write_series_csv,
)
from gazekit.errors import BackendError, FormatError, PipelineError
from gazekit.model import IntervalAnnotations

POSE = PromptSpec(
    prompt_id="pose",
    template="What is the child's posture? Choose one: sitting still, standing still.",
    options=("sitting still", "standing still"),
)
HAND = PromptSpec(
    prompt_id="hand",
    template="The child is {answer:pose}. What is the hand action? Choose one: pointing, grabbing toy.",
    options=("pointing", "grabbing toy"),
)
YESNO = PromptSpec(prompt_id="engaged", template="Engaged? yes or no.", options=("yes", "no"))
PROXIMITY = PromptSpec(
    prompt_id="proximity",
    template="Choose one: close and facing adult, close but facing away from adult, far from adult.",
    options=("close and facing adult", "close but facing away from adult", "far from adult"),
)


class TestPlanClips:
    def test_paper_parameters(self):
        # 10 s stream, 3 s window, 1 s shift: clips at onsets 0..7.
        plan = plan_clips(10.0, 3.0, 1.0)
        assert len(plan.clips) == 8
        assert [c.start_s for c in plan.clips] == [float(i) for i in range(8)]
        assert all(c.duration_s == 3.0 for c in plan.clips)

    def test_window_equals_duration(self):
        plan = plan_clips(3.0, 3.0, 1.0)
        assert len(plan.clips) == 1

    def test_shift_longer_than_window_rejected(self):
        with pytest.raises(ValueError, match="must not exceed"):
            plan_clips(10.0, 3.0, 4.0)

    def test_window_longer_than_stream_rejected(self):
        with pytest.raises(ValueError, match="exceeds stream duration"):
            plan_clips(2.0, 3.0, 1.0)

    def test_round_trip_json(self, tmp_path):
        plan = plan_clips(10.0, 3.0, 1.0, source_stream="side")
        path = tmp_path / "plan.json"
        write_plan_json(plan, path)
        assert load_plan_json(path) == plan


class TestPrompts:
    def test_plain_template_unchanged(self):
        assert render_prompt(POSE, {}) == POSE.template

    def test_substitution(self):
        text = render_prompt(HAND, {"pose": "sitting still"})
        assert text.startswith("The child is sitting still.")

    def test_forward_reference_rejected_at_validation(self):
        with pytest.raises(PipelineError, match="not an earlier prompt"):
            validate_prompts([HAND, POSE])

    def test_unknown_placeholder_rejected(self):
        bad = PromptSpec(prompt_id="x", template="What {time} is it?", options=("a",))
        with pytest.raises(PipelineError, match="unknown placeholder"):
            validate_prompts([bad])

    def test_missing_answer_at_render(self):
        with pytest.raises(PipelineError, match="no answer"):
            render_prompt(HAND, {})

    def test_flagged_reserved(self):
        bad = PromptSpec(prompt_id="x", template="t", options=("flagged!",))
        with pytest.raises(PipelineError, match="reserved"):
            validate_prompts([bad])

    def test_colliding_options_rejected(self):
        bad = PromptSpec(prompt_id="x", template="t", options=("Yes", "yes!"))
        with pytest.raises(PipelineError, match="collide"):
            validate_prompts([bad])

    def test_load_prompts_validates(self, tmp_path):
        path = tmp_path / "prompts.json"
        path.write_text(json.dumps([{"prompt_id": "a", "template": "t", "options": []}]), encoding="utf-8")
        with pytest.raises(FormatError, match="no options"):
            load_prompts(path)


class TestFold:
    def test_folding(self):
        assert fold("  The child is POINTING.  ") == "the child is pointing"
        assert fold("close, and facing\taway") == "close and facing away"

    def test_idempotent(self):
        for raw in ("Hello, World!", "a  b\tc", "YEAH"):
            assert fold(fold(raw)) == fold(raw)


class TestNormalizeCascade:
    def test_exact_after_fold(self):
        assert normalize_response("  Sitting still. ", POSE, AliasLedger()) == "sitting still"

    def test_alias_hit(self):
        ledger = AliasLedger()
        ledger.add_alias("engaged", "yeah", "yes", spec=YESNO)
        assert normalize_response("yeah", YESNO, ledger) == "yes"

    def test_paper_wording_drift_resolves_after_alias(self):
        raw = "close and facing away from adult"
        ledger = AliasLedger()
        assert normalize_response(raw, PROXIMITY, ledger) is None
        ledger.add_alias("proximity", raw, "close but facing away from adult", spec=PROXIMITY)
        assert normalize_response(raw, PROXIMITY, ledger) == "close but facing away from adult"

    def test_unique_substring_accepted(self):
        assert normalize_response("The child is pointing.", HAND, AliasLedger()) == "pointing"

    def test_ambiguous_substring_flagged(self):
        raw = "pointing while grabbing toy"
        assert normalize_response(raw, HAND, AliasLedger()) is None

    def test_gibberish_flagged(self):
        assert normalize_response("no idea what this is", POSE, AliasLedger()) is None

    def test_canonical_option_wins_over_hostile_alias(self):
        # Stage 1 shadows the ledger even if an alias tries to redirect an option.
        ledger = AliasLedger()
        ledger.aliases["engaged"] = {"yes": "no"}
        assert normalize_response("Yes!", YESNO, ledger) == "yes"

    def test_alias_shadowed_by_earlier_stage_is_harmless(self):
        ledger = AliasLedger()
        before = normalize_response("sitting still", POSE, ledger)
        ledger.aliases["pose"] = {"sitting still": "standing still"}
        after = normalize_response("sitting still", POSE, ledger)
        assert before == after == "sitting still"

    def test_deterministic_and_idempotent_over_fuzz_corpus(self):
        rng = np.random.default_rng(99)
        ledger = AliasLedger()
        ledger.add_alias("engaged", "yeah", "yes", spec=YESNO)
        corpus = []
        for _ in range(300):
            kind = rng.integers(0, 4)
            if kind == 0:
                corpus.append((YESNO, rng.choice(["yes", "No.", " YES ", "no!!"])))
            elif kind == 1:
                corpus.append((YESNO, "yeah"))
            elif kind == 2:
                corpus.append((HAND, rng.choice(["child pointing", "is grabbing toy now", "pointing grabbing toy"])))
            else:
                corpus.append((POSE, "".join(rng.choice(list("abcdef "), 12))))
        first = [normalize_response(raw, spec, ledger) for spec, raw in corpus]
        second = [normalize_response(raw, spec, ledger) for spec, raw in corpus]
        assert first == second


class TestAliasLedger:
    def test_add_and_lookup_folds_alias(self):
        ledger = AliasLedger()
        ledger.add_alias("engaged", "  YEAH!! ", "yes", spec=YESNO)
        assert ledger.lookup("engaged", "yeah") == "yes"

    def test_target_must_be_an_option(self):
        with pytest.raises(PipelineError, match="not an option"):
            AliasLedger().add_alias("engaged", "yeah", "maybe", spec=YESNO)

    def test_alias_colliding_with_other_option_rejected(self):
        with pytest.raises(PipelineError, match="collides"):
            AliasLedger().add_alias("engaged", "no", "yes", spec=YESNO)

    def test_mutation_log(self):
        ledger = AliasLedger()
        ledger.add_alias("engaged", "yeah", "yes", actor="tester", timestamp="t0", spec=YESNO)
        ledger.remove_alias("engaged", "yeah", actor="tester", timestamp="t1")
        assert [(e["action"], e["timestamp"]) for e in ledger.log] == [("add_alias", "t0"), ("remove_alias", "t1")]

    def test_save_load_round_trip(self, tmp_path):
        ledger = AliasLedger()
        ledger.add_alias("engaged", "yeah", "yes", timestamp="t0", spec=YESNO)
        path = tmp_path / "ledger.json"
        ledger.save(path)
        loaded = AliasLedger.load(path)
        assert loaded.aliases == ledger.aliases
        assert loaded.log == ledger.log


class TestBackends:
    def test_scripted_lookup(self):
        backend = ScriptedBackend({"clip_00003": {"pose": "sitting still"}})
        assert backend.query("clip_00003", None, "pose", "?") == "sitting still"

    def test_scripted_missing_entry(self):
        backend = ScriptedBackend({})
        with pytest.raises(BackendError, match="no response"):
            backend.query("clip_00000", None, "pose", "?")

    def test_command_backend_reads_stdout(self):
        backend = CommandBackend("cat")
        assert backend.query("c", "/tmp/clip.mp4", "p", "hello prompt") == "hello prompt"

    def test_command_backend_clip_placeholder(self):
        backend = CommandBackend("echo {clip}")
        assert backend.query("c", "/tmp/clip.mp4", "p", "").strip() == "/tmp/clip.mp4"

    def test_command_backend_nonzero_exit(self):
        backend = CommandBackend("false")
        with pytest.raises(BackendError, match="exited 1"):
            backend.query("c", None, "p", "")


def _run(table, prompts=(POSE, HAND), ledger=None, duration=5.0):
    plan = plan_clips(duration, 3.0, 1.0)
    backend = ScriptedBackend(table)
    return plan, run_annotation(plan, list(prompts), backend, ledger or AliasLedger())


class TestRunAnnotation:
    def test_all_canonical_no_anomalies(self):
        table = {
            "clip_00000": {"pose": "sitting still", "hand": "pointing"},
            "clip_00001": {"pose": "standing still", "hand": "grabbing toy"},
            "clip_00002": {"pose": "sitting still", "hand": "pointing"},
        }
        plan, run = _run(table)
        assert run.anomalies == ()
        assert len(run.series.rows) == len(plan.clips) == 3
        assert run.series.rows[0].labels == {"pose": "sitting still", "hand": "pointing"}

    def test_one_misspelled_response_flags_one_cell(self):
        table = {
            "clip_00000": {"pose": "sitting still", "hand": "pointing"},
            "clip_00001": {"pose": "siting stil", "hand": "pointing"},
            "clip_00002": {"pose": "sitting still", "hand": "pointing"},
        }
        _, run = _run(table)
        assert len(run.anomalies) == 1
        anomaly = run.anomalies[0]
        assert anomaly.status == "open"
        assert (anomaly.clip_id, anomaly.prompt_id) == ("clip_00001", "pose")
        assert run.series.rows[1].labels["pose"] == FLAGGED

    def test_missing_entry_flags_with_reason(self):
        table = {
            "clip_00000": {"pose": "sitting still"},
            "clip_00001": {"pose": "sitting still", "hand": "pointing"},
            "clip_00002": {"pose": "sitting still", "hand": "pointing"},
        }
        _, run = _run(table)
        assert len(run.anomalies) == 1
        assert run.anomalies[0].reason == "no response"
        assert run.raw[("clip_00000", "hand")].text is None

    def test_prior_answers_feed_later_prompts(self):
        captured = []

        class Spy:
            def query(self, clip_id, clip_path, prompt_id, prompt_text):
                captured.append((clip_id, prompt_id, prompt_text))
                return "sitting still" if prompt_id == "pose" else "pointing"

        plan = plan_clips(3.0, 3.0, 1.0)
        run_annotation(plan, [POSE, HAND], Spy(), AliasLedger())
        hand_prompt = [p for _, pid, p in captured if pid == "hand"][0]
        assert hand_prompt.startswith("The child is sitting still.")

    def test_flagged_propagates_literally_into_templates(self):
        captured = []

        class Spy:
            def query(self, clip_id, clip_path, prompt_id, prompt_text):
                captured.append(prompt_text)
                return "???" if prompt_id == "pose" else "pointing"

        plan = plan_clips(3.0, 3.0, 1.0)
        run_annotation(plan, [POSE, HAND], Spy(), AliasLedger())
        assert captured[1].startswith(f"The child is {FLAGGED}.")

    def test_row_count_independent_of_anomalies(self):
        table = {f"clip_{i:05d}": {"pose": "???", "hand": "???"} for i in range(3)}
        plan, run = _run(table)
        assert len(run.series.rows) == len(plan.clips)


class TestRenormalize:
    def _flagged_run(self):
        table = {
            "clip_00000": {"pose": "sitting still", "hand": "pointing"},
            "clip_00001": {"pose": "sitting  STILL?", "hand": "hmm unknowable"},
            "clip_00002": {"pose": "sitting still", "hand": "grabbing toy"},
        }
        return _run(table)

    def test_empty_delta_is_identity(self):
        _, run = self._flagged_run()
        ledger = AliasLedger()
        new_run, resolved, still_open = renormalize(run, ledger)
        assert new_run.series == run.series
        assert resolved == 0
        assert still_open == 1

    def test_alias_resolves_sole_anomaly(self):
        _, run = self._flagged_run()
        ledger = AliasLedger()
        ledger.add_alias("hand", "hmm unknowable", "pointing", spec=HAND)
        new_run, resolved, still_open = renormalize(run, ledger)
        assert resolved == 1
        assert still_open == 0
        assert new_run.series.rows[1].labels["hand"] == "pointing"
        assert new_run.anomalies[0].status == "resolved"

    def test_removing_alias_reopens_cells(self):
        _, run = self._flagged_run()
        ledger = AliasLedger()
        ledger.add_alias("hand", "hmm unknowable", "pointing", spec=HAND)
        run2, _, open_after_add = renormalize(run, ledger)
        assert open_after_add == 0
        ledger.remove_alias("hand", "hmm unknowable")
        run3, resolved, open_after_remove = renormalize(run2, ledger)
        assert resolved == 0
        assert open_after_remove == 1
        assert run3.series.rows[1].labels["hand"] == FLAGGED

    def test_manual_option_resolution_sticks(self):
        from dataclasses import replace

        _, run = self._flagged_run()
        target = run.anomalies[0]
        patched = tuple(
            replace(a, status="resolved", resolved_option="grabbing toy", resolved_via="option")
            if a.anomaly_id == target.anomaly_id
            else a
            for a in run.anomalies
        )
        run = AnnotationRun(run.plan, run.prompts, run.series, patched, run.raw)
        new_run, resolved, still_open = renormalize(run, AliasLedger())
        assert resolved == 1
        assert still_open == 0
        assert new_run.series.rows[1].labels["hand"] == "grabbing toy"

    def test_replay_equality(self):
        _, run = self._flagged_run()
        ledger = AliasLedger()
        ledger.add_alias("hand", "hmm unknowable", "pointing", spec=HAND)
        a, _, _ = renormalize(run, ledger)
        b, _, _ = renormalize(run, ledger)
        assert a.series == b.series
        assert a.anomalies == b.anomalies


class TestHumanSeries:
    def _plan(self, duration=10.0):
        return plan_clips(duration, 3.0, 1.0)

    def test_single_interval_covers_everything(self):
        ann = IntervalAnnotations.from_rows([("pose", 0, 20_000_000_000, "sitting still")])
        labels = human_series_from_intervals(ann, "pose", self._plan())
        assert labels == ["sitting still"] * 8

    def test_longest_duration_wins(self):
        # Window [0,3): A holds 1.4 s, B holds 1.6 s.
        ann = IntervalAnnotations.from_rows(
            [("pose", 0, 1_400_000_000, "A"), ("pose", 1_400_000_000, 3_000_000_000, "B")]
        )
        plan = plan_clips(3.0, 3.0, 1.0)
        assert human_series_from_intervals(ann, "pose", plan) == ["B"]

    def test_grouping_merges_before_voting(self):
        # Separate support labels merge into one group, which then outvotes.
        ann = IntervalAnnotations.from_rows(
            [
                ("hand", 0, 1_200_000_000, "on the ground"),
                ("hand", 1_200_000_000, 2_400_000_000, "resting"),
                ("hand", 2_400_000_000, 3_000_000_000, "pointing"),
            ]
        )
        grouping = {"on the ground": "resting/support", "on some furniture": "resting/support", "resting": "resting/support"}
        plan = plan_clips(3.0, 3.0, 1.0)
        assert human_series_from_intervals(ann, "hand", plan, grouping) == ["resting/support"]

    def test_zero_coverage_window_is_none(self):
        ann = IntervalAnnotations.from_rows([("pose", 0, 1_000_000_000, "A")])
        plan = plan_clips(10.0, 3.0, 1.0)
        labels = human_series_from_intervals(ann, "pose", plan)
        assert labels[0] == "A"
        assert labels[-1] is None

    def test_tie_breaks_lexicographically(self):
        ann = IntervalAnnotations.from_rows(
            [("pose", 0, 1_500_000_000, "zebra"), ("pose", 1_500_000_000, 3_000_000_000, "apple")]
        )
        plan = plan_clips(3.0, 3.0, 1.0)
        assert human_series_from_intervals(ann, "pose", plan) == ["apple"]

    def test_unknown_tier(self):
        ann = IntervalAnnotations.from_rows([("pose", 0, 1, "A")])
        with pytest.raises(PipelineError, match="unknown tier"):
            human_series_from_intervals(ann, "hand", self._plan())


class TestAgreement:
    def test_identical_series(self):
        labels = ["a", "b", "a"]
        report = agreement(labels, labels)
        assert report.accuracy == 1.0
        assert report.excluded == 0

    def test_seven_of_ten(self):
        model = ["a"] * 7 + ["b"] * 3
        human = ["a"] * 7 + ["c"] * 3
        report = agreement(model, human)
        assert report.accuracy == 0.7
        assert report.compared == 10
        assert sum(report.confusion.values()) == 10

    def test_all_flagged_gives_undefined_accuracy(self):
        model = [FLAGGED] * 10
        human = ["a"] * 10
        report = agreement(model, human)
        assert report.accuracy is None
        assert report.compared == 0
        assert report.excluded == 10

    def test_grouping_applied_to_both_sides(self):
        report = agreement(["on the ground"], ["resting"], {"on the ground": "support", "resting": "support"})
        assert report.accuracy == 1.0

    def test_plan_mismatch(self):
        with pytest.raises(ValueError, match="different clip plans"):
            agreement(["a"], ["a", "b"])


class TestPersistence:
    def test_series_round_trip(self, tmp_path):
        table = {
            "clip_00000": {"pose": "sitting still", "hand": "pointing"},
            "clip_00001": {"pose": "???", "hand": "grabbing toy"},
            "clip_00002": {"pose": "sitting still", "hand": "pointing"},
        }
        _, run = _run(table)
        path = tmp_path / "series.csv"
        write_series_csv(run.series, path)
        assert load_series_csv(path) == run.series

    def test_raw_round_trip(self, tmp_path):
        _, run = _run({"clip_00000": {"pose": "x"}, "clip_00001": {}, "clip_00002": {}})
        path = tmp_path / "raw.json"
        write_raw_json(run.raw, path)
        assert load_raw_json(path) == run.raw

    def test_anomalies_round_trip(self, tmp_path):
        _, run = _run({f"clip_{i:05d}": {"pose": "???", "hand": "pointing"} for i in range(3)})
        path = tmp_path / "anomalies.json"
        write_anomalies_json(run.anomalies, path)
        assert load_anomalies_json(path) == run.anomalies
