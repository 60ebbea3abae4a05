"""Clip planning, response normalization, and agreement scoring.

Raw model responses arrive through a pluggable backend and are mapped onto
each prompt's predefined options by a cascade: canonical fold and exact match,
then user-maintained aliases, then unique option-substring. Anything the
cascade cannot place becomes the reserved FLAGGED label plus an anomaly queued
for human review; raw responses are retained so review never re-invokes the
backend.
"""

from __future__ import annotations

import csv
import io
import json
import re
import shlex
import string
import subprocess
from collections import Counter
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import BackendError, FormatError, PipelineError
from .fileio import _read_text, _write_text, format_float
from .model import IntervalAnnotations

FLAGGED = "FLAGGED"

NS_PER_S = 1_000_000_000

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")
_ANSWER_REF_RE = re.compile(r"^answer:(.+)$")


def fold(text: str) -> str:
    """Canonical folding: lowercase, strip ASCII punctuation, collapse whitespace."""
    return " ".join(text.lower().translate(_PUNCT_TABLE).split())


# ---------------------------------------------------------------------------
# Clip plans


@dataclass(frozen=True)
class Clip:
    clip_id: str
    start_s: float
    duration_s: float


@dataclass(frozen=True)
class ClipPlan:
    clips: tuple[Clip, ...]
    window_s: float
    shift_s: float
    source_stream: str = ""


def plan_clips(stream_duration_s: float, window_s: float, shift_s: float, source_stream: str = "") -> ClipPlan:
    """Maximal list of fixed-length windows fully inside the stream.

    Clip i starts at i * shift_s; the last clip ends at or before the stream
    end.
    """
    if shift_s <= 0:
        raise ValueError("shift_s must be positive")
    if shift_s > window_s:
        raise ValueError(f"shift_s {shift_s} must not exceed window_s {window_s}")
    if window_s > stream_duration_s + 1e-9:
        raise ValueError(f"window_s {window_s} exceeds stream duration {stream_duration_s}")
    clips = []
    i = 0
    while i * shift_s + window_s <= stream_duration_s + 1e-9:
        clips.append(Clip(clip_id=f"clip_{i:05d}", start_s=i * shift_s, duration_s=window_s))
        i += 1
    return ClipPlan(clips=tuple(clips), window_s=window_s, shift_s=shift_s, source_stream=source_stream)


def write_plan_json(plan: ClipPlan, path) -> None:
    doc = {
        "source_stream": plan.source_stream,
        "window_s": plan.window_s,
        "shift_s": plan.shift_s,
        "clips": [{"clip_id": c.clip_id, "start_s": c.start_s, "duration_s": c.duration_s} for c in plan.clips],
    }
    _write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_plan_json(path) -> ClipPlan:
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid plan JSON: {exc.msg}", path=path) from exc
    try:
        clips = tuple(Clip(c["clip_id"], float(c["start_s"]), float(c["duration_s"])) for c in doc["clips"])
        return ClipPlan(
            clips=clips,
            window_s=float(doc["window_s"]),
            shift_s=float(doc["shift_s"]),
            source_stream=doc.get("source_stream", ""),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"plan document missing field: {exc}", path=path) from exc


# ---------------------------------------------------------------------------
# Prompt specs


@dataclass(frozen=True)
class PromptSpec:
    """One multiple-choice question; templates may splice earlier answers in
    with {answer:<prompt_id>} placeholders."""

    prompt_id: str
    template: str
    options: tuple[str, ...]


def referenced_prompts(template: str) -> list[str]:
    refs = []
    for token in _PLACEHOLDER_RE.findall(template):
        m = _ANSWER_REF_RE.match(token)
        if m is None:
            raise PipelineError(f"unknown placeholder {{{token}}}; only {{answer:<prompt_id>}} is supported")
        refs.append(m.group(1))
    return refs


def validate_prompts(specs: list[PromptSpec]) -> None:
    """Check id uniqueness, option sanity, and acyclic (earlier-only) references."""
    seen: set[str] = set()
    for spec in specs:
        if not spec.prompt_id:
            raise PipelineError("prompt_id must be non-empty")
        if spec.prompt_id in seen:
            raise PipelineError(f"duplicate prompt_id {spec.prompt_id!r}")
        if not spec.options:
            raise PipelineError(f"prompt {spec.prompt_id!r} has no options")
        folded: dict[str, str] = {}
        for option in spec.options:
            f = fold(option)
            if not f:
                raise PipelineError(f"prompt {spec.prompt_id!r}: option {option!r} folds to the empty string")
            if f == fold(FLAGGED):
                raise PipelineError(f"prompt {spec.prompt_id!r}: {FLAGGED!r} is reserved and cannot be an option")
            if f in folded:
                raise PipelineError(
                    f"prompt {spec.prompt_id!r}: options {folded[f]!r} and {option!r} collide after folding"
                )
            folded[f] = option
        for ref in referenced_prompts(spec.template):
            if ref not in seen:
                raise PipelineError(
                    f"prompt {spec.prompt_id!r} references {ref!r}, which is not an earlier prompt"
                )
        seen.add(spec.prompt_id)


def load_prompts(path) -> list[PromptSpec]:
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid prompts JSON: {exc.msg}", path=path) from exc
    if not isinstance(doc, list):
        raise FormatError("prompts document must be a list", path=path)
    specs = []
    for entry in doc:
        try:
            specs.append(
                PromptSpec(
                    prompt_id=entry["prompt_id"],
                    template=entry["template"],
                    options=tuple(entry["options"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"prompt entry missing field: {exc}", path=path) from exc
    try:
        validate_prompts(specs)
    except PipelineError as exc:
        raise FormatError(str(exc), path=path) from exc
    return specs


def write_prompts(specs: list[PromptSpec], path) -> None:
    doc = [{"prompt_id": s.prompt_id, "template": s.template, "options": list(s.options)} for s in specs]
    _write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def render_prompt(spec: PromptSpec, prior_answers: dict[str, str]) -> str:
    """Substitute earlier answers into the template verbatim."""

    def _sub(m: re.Match) -> str:
        ref = _ANSWER_REF_RE.match(m.group(1))
        if ref is None:
            raise PipelineError(f"unknown placeholder {{{m.group(1)}}} in prompt {spec.prompt_id!r}")
        pid = ref.group(1)
        if pid not in prior_answers:
            raise PipelineError(f"prompt {spec.prompt_id!r} references {pid!r} but no answer is available")
        return prior_answers[pid]

    return _PLACEHOLDER_RE.sub(_sub, spec.template)


# ---------------------------------------------------------------------------
# Alias ledger


class AliasLedger:
    """Per-prompt alias tables with an append-only mutation log.

    Alias keys are stored folded; targets are canonical option strings. The
    log records every mutation (who/when/what) so state can be replayed.
    """

    def __init__(self, aliases: dict[str, dict[str, str]] | None = None, log: list[dict] | None = None):
        self.aliases: dict[str, dict[str, str]] = {p: dict(t) for p, t in (aliases or {}).items()}
        self.log: list[dict] = list(log or [])

    def lookup(self, prompt_id: str, folded_text: str) -> str | None:
        return self.aliases.get(prompt_id, {}).get(folded_text)

    def add_alias(
        self,
        prompt_id: str,
        alias: str,
        option: str,
        actor: str = "user",
        timestamp: str | None = None,
        spec: PromptSpec | None = None,
    ) -> str:
        """Insert folded(alias) -> option; returns the folded alias key."""
        folded_alias = fold(alias)
        if not folded_alias:
            raise PipelineError(f"alias {alias!r} folds to the empty string")
        if spec is not None:
            if option not in spec.options:
                raise PipelineError(f"{option!r} is not an option of prompt {prompt_id!r}")
            for other in spec.options:
                if fold(other) == folded_alias and other != option:
                    raise PipelineError(
                        f"alias {alias!r} collides with option {other!r} of prompt {prompt_id!r}"
                    )
        self.aliases.setdefault(prompt_id, {})[folded_alias] = option
        self._log("add_alias", actor, timestamp, prompt_id=prompt_id, alias=folded_alias, option=option)
        return folded_alias

    def remove_alias(self, prompt_id: str, alias: str, actor: str = "user", timestamp: str | None = None) -> None:
        folded_alias = fold(alias)
        table = self.aliases.get(prompt_id, {})
        if folded_alias not in table:
            raise PipelineError(f"no alias {alias!r} for prompt {prompt_id!r}")
        del table[folded_alias]
        self._log("remove_alias", actor, timestamp, prompt_id=prompt_id, alias=folded_alias)

    def log_event(self, action: str, actor: str = "user", timestamp: str | None = None, **details) -> None:
        """Record a non-alias mutation (e.g. anomaly resolution, renormalize)."""
        self._log(action, actor, timestamp, **details)

    def _log(self, action: str, actor: str, timestamp: str | None, **details) -> None:
        if timestamp is None:
            timestamp = datetime.now(timezone.utc).isoformat()
        self.log.append({"timestamp": timestamp, "actor": actor, "action": action, **details})

    def save(self, path) -> None:
        doc = {"aliases": {p: dict(sorted(t.items())) for p, t in sorted(self.aliases.items()) if t}, "log": self.log}
        _write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "AliasLedger":
        path = Path(path)
        try:
            doc = json.loads(_read_text(path))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid ledger JSON: {exc.msg}", path=path) from exc
        if not isinstance(doc, dict) or "aliases" not in doc:
            raise FormatError("ledger document must carry an 'aliases' table", path=path)
        return cls(aliases=doc["aliases"], log=doc.get("log", []))


# ---------------------------------------------------------------------------
# Normalization cascade


def normalize_response(raw: str, spec: PromptSpec, ledger: AliasLedger) -> str | None:
    """Map a raw response to a canonical option, or None for an anomaly.

    Cascade, first hit wins: exact match after canonical folding, then alias
    lookup on the folded text, then acceptance iff exactly one folded option
    occurs as a substring of the folded response. A canonical option always
    resolves at stage 1, whatever the ledger contains.
    """
    folded = fold(raw)
    folded_options = {fold(o): o for o in spec.options}
    if folded in folded_options:
        return folded_options[folded]
    alias_target = ledger.lookup(spec.prompt_id, folded)
    if alias_target is not None and alias_target in spec.options:
        return alias_target
    hits = [option for f, option in folded_options.items() if f in folded]
    if len(hits) == 1:
        return hits[0]
    return None


# ---------------------------------------------------------------------------
# Backends


class ScriptedBackend:
    """Replay backend: a table keyed by (clip_id, prompt_id) -> response text."""

    def __init__(self, table: dict[str, dict[str, str]]):
        self.table = table

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        path = Path(path)
        try:
            doc = json.loads(_read_text(path))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid scripted-backend JSON: {exc.msg}", path=path) from exc
        if not isinstance(doc, dict) or not all(isinstance(v, dict) for v in doc.values()):
            raise FormatError("scripted backend must map clip_id -> {prompt_id: response}", path=path)
        return cls(doc)

    def query(self, clip_id: str, clip_path, prompt_id: str, prompt_text: str) -> str:
        try:
            return self.table[clip_id][prompt_id]
        except KeyError:
            raise BackendError("no response") from None


class CommandBackend:
    """Run a user command per query: {clip} in the template is replaced by the
    clip path, the prompt text goes to stdin, the response is read from stdout."""

    def __init__(self, template: str):
        if not template.strip():
            raise ValueError("command template must be non-empty")
        self.template = template

    def query(self, clip_id: str, clip_path, prompt_id: str, prompt_text: str) -> str:
        argv = [part.replace("{clip}", str(clip_path)) for part in shlex.split(self.template)]
        try:
            proc = subprocess.run(argv, input=prompt_text, capture_output=True, text=True, timeout=600)
        except OSError as exc:
            raise BackendError(f"backend command failed to start: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise BackendError("backend command timed out") from exc
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] or ["(no stderr)"]
            raise BackendError(f"backend exited {proc.returncode}: {tail[0]}")
        return proc.stdout


def query_backend(backend, clip_id: str, clip_path, prompt_id: str, prompt_text: str) -> str:
    """Raw response captured verbatim except for trailing whitespace."""
    return backend.query(clip_id, clip_path, prompt_id, prompt_text).rstrip()


# ---------------------------------------------------------------------------
# Annotation runs


@dataclass(frozen=True)
class RawResponse:
    text: str | None
    reason: str | None = None  # set when the backend failed instead


@dataclass(frozen=True)
class AnomalyRecord:
    anomaly_id: str
    clip_id: str
    prompt_id: str
    raw_response: str | None
    reason: str | None = None
    status: str = "open"  # open | resolved | dismissed
    resolved_option: str | None = None
    resolved_via: str | None = None  # option | alias | cascade


@dataclass(frozen=True)
class SeriesRow:
    clip_id: str
    start_s: float
    end_s: float
    labels: dict[str, str]


@dataclass(frozen=True)
class NormalizedSeries:
    prompt_ids: tuple[str, ...]
    rows: tuple[SeriesRow, ...]

    def column(self, prompt_id: str) -> list[str]:
        if prompt_id not in self.prompt_ids:
            raise KeyError(prompt_id)
        return [row.labels[prompt_id] for row in self.rows]


@dataclass(frozen=True)
class AnnotationRun:
    plan: ClipPlan
    prompts: tuple[PromptSpec, ...]
    series: NormalizedSeries
    anomalies: tuple[AnomalyRecord, ...]
    raw: dict[tuple[str, str], RawResponse]


def _anomaly_id(clip_id: str, prompt_id: str) -> str:
    return f"{clip_id}:{prompt_id}"


def run_annotation(
    plan: ClipPlan,
    prompts: list[PromptSpec],
    backend,
    ledger: AliasLedger,
    clip_paths: dict[str, Path] | None = None,
) -> AnnotationRun:
    """Query and normalize every (clip, prompt) cell.

    Prompts run in declared order within a clip so earlier normalized answers
    can feed later templates; FLAGGED propagates as the literal token. Backend
    failures flag the cell and the run continues.
    """
    validate_prompts(prompts)
    rows: list[SeriesRow] = []
    anomalies: list[AnomalyRecord] = []
    raw: dict[tuple[str, str], RawResponse] = {}
    for clip in plan.clips:
        clip_path = (clip_paths or {}).get(clip.clip_id)
        prior: dict[str, str] = {}
        labels: dict[str, str] = {}
        for spec in prompts:
            prompt_text = render_prompt(spec, prior)
            cell = (clip.clip_id, spec.prompt_id)
            try:
                response = query_backend(backend, clip.clip_id, clip_path, spec.prompt_id, prompt_text)
            except BackendError as exc:
                raw[cell] = RawResponse(text=None, reason=str(exc))
                labels[spec.prompt_id] = FLAGGED
                anomalies.append(
                    AnomalyRecord(
                        anomaly_id=_anomaly_id(*cell),
                        clip_id=clip.clip_id,
                        prompt_id=spec.prompt_id,
                        raw_response=None,
                        reason=str(exc),
                    )
                )
            else:
                raw[cell] = RawResponse(text=response)
                label = normalize_response(response, spec, ledger)
                if label is None:
                    labels[spec.prompt_id] = FLAGGED
                    anomalies.append(
                        AnomalyRecord(
                            anomaly_id=_anomaly_id(*cell),
                            clip_id=clip.clip_id,
                            prompt_id=spec.prompt_id,
                            raw_response=response,
                        )
                    )
                else:
                    labels[spec.prompt_id] = label
            prior[spec.prompt_id] = labels[spec.prompt_id]
        rows.append(SeriesRow(clip.clip_id, clip.start_s, clip.start_s + clip.duration_s, labels))
    series = NormalizedSeries(prompt_ids=tuple(s.prompt_id for s in prompts), rows=tuple(rows))
    return AnnotationRun(
        plan=plan, prompts=tuple(prompts), series=series, anomalies=tuple(anomalies), raw=raw
    )


def renormalize(run: AnnotationRun, ledger: AliasLedger) -> tuple[AnnotationRun, int, int]:
    """Re-apply the cascade to stored raw responses under the current ledger.

    Never touches the backend. Anomalies resolved manually to an option stick;
    cascade-resolvable cells close their anomalies; cells that stop resolving
    (e.g. after an alias removal) re-open. Returns the updated run, the number
    of previously flagged cells that now carry labels, and the number of
    anomalies still open.
    """
    specs = {s.prompt_id: s for s in run.prompts}
    by_cell = {(a.clip_id, a.prompt_id): a for a in run.anomalies}
    new_rows: list[SeriesRow] = []
    new_anomalies: dict[tuple[str, str], AnomalyRecord] = {}
    resolved_count = 0
    for row in run.series.rows:
        labels: dict[str, str] = {}
        for prompt_id in run.series.prompt_ids:
            cell = (row.clip_id, prompt_id)
            stored = run.raw[cell]
            existing = by_cell.get(cell)
            if existing is not None and existing.status == "resolved" and existing.resolved_via == "option":
                labels[prompt_id] = existing.resolved_option
                new_anomalies[cell] = existing
            elif stored.text is None:
                labels[prompt_id] = FLAGGED
                record = existing or AnomalyRecord(
                    anomaly_id=_anomaly_id(*cell),
                    clip_id=row.clip_id,
                    prompt_id=prompt_id,
                    raw_response=None,
                    reason=stored.reason,
                )
                new_anomalies[cell] = record
            else:
                label = normalize_response(stored.text, specs[prompt_id], ledger)
                if label is not None:
                    labels[prompt_id] = label
                    if existing is not None:
                        new_anomalies[cell] = replace(
                            existing,
                            status="resolved",
                            resolved_option=label,
                            resolved_via=existing.resolved_via or "cascade",
                        )
                else:
                    labels[prompt_id] = FLAGGED
                    if existing is not None and existing.status == "dismissed":
                        new_anomalies[cell] = existing
                    else:
                        record = existing or AnomalyRecord(
                            anomaly_id=_anomaly_id(*cell),
                            clip_id=row.clip_id,
                            prompt_id=prompt_id,
                            raw_response=stored.text,
                        )
                        new_anomalies[cell] = replace(record, status="open", resolved_option=None, resolved_via=None)
            if row.labels[prompt_id] == FLAGGED and labels[prompt_id] != FLAGGED:
                resolved_count += 1
        new_rows.append(SeriesRow(row.clip_id, row.start_s, row.end_s, labels))
    series = NormalizedSeries(prompt_ids=run.series.prompt_ids, rows=tuple(new_rows))
    anomalies = tuple(new_anomalies[k] for k in sorted(new_anomalies))
    still_open = sum(1 for a in anomalies if a.status == "open")
    new_run = AnnotationRun(plan=run.plan, prompts=run.prompts, series=series, anomalies=anomalies, raw=run.raw)
    return new_run, resolved_count, still_open


# ---------------------------------------------------------------------------
# Human reference series and agreement


def human_series_from_intervals(
    intervals: IntervalAnnotations,
    tier: str,
    plan: ClipPlan,
    grouping: dict[str, str] | None = None,
) -> list[str | None]:
    """Per clip window, the grouped label holding the longest total duration.

    Overlap arithmetic stays in integer nanoseconds. Ties go to the
    lexicographically smallest group; windows with zero coverage yield None.
    """
    if tier not in intervals.tiers:
        raise PipelineError(f"unknown tier {tier!r}; available: {sorted(intervals.tiers)}")
    grouping = grouping or {}
    tier_intervals = intervals.tiers[tier]
    out: list[str | None] = []
    for clip in plan.clips:
        start_ns = round(clip.start_s * NS_PER_S)
        end_ns = round((clip.start_s + clip.duration_s) * NS_PER_S)
        durations: Counter[str] = Counter()
        for iv in tier_intervals:
            overlap = min(end_ns, iv.end_ns) - max(start_ns, iv.start_ns)
            if overlap > 0:
                durations[grouping.get(iv.label, iv.label)] += overlap
        if not durations:
            out.append(None)
        else:
            out.append(min(durations.items(), key=lambda kv: (-kv[1], kv[0]))[0])
    return out


@dataclass(frozen=True)
class AgreementReport:
    accuracy: float | None  # None when no window could be compared
    compared: int
    excluded: int
    confusion: dict[tuple[str, str], int]


def agreement(
    model_labels: list[str | None],
    human_labels: list[str | None],
    grouping: dict[str, str] | None = None,
) -> AgreementReport:
    """Windowwise agreement after applying the grouping map to both sides.

    Windows where either side is None or FLAGGED are excluded and counted.
    """
    if len(model_labels) != len(human_labels):
        raise ValueError(
            f"series cover different clip plans: {len(model_labels)} vs {len(human_labels)} windows"
        )
    grouping = grouping or {}
    confusion: Counter[tuple[str, str]] = Counter()
    compared = excluded = matches = 0
    for m, h in zip(model_labels, human_labels):
        if m is None or h is None or m == FLAGGED or h == FLAGGED:
            excluded += 1
            continue
        mg = grouping.get(m, m)
        hg = grouping.get(h, h)
        confusion[(mg, hg)] += 1
        compared += 1
        if mg == hg:
            matches += 1
    accuracy = matches / compared if compared else None
    return AgreementReport(accuracy=accuracy, compared=compared, excluded=excluded, confusion=dict(confusion))


def load_grouping(path) -> dict[str, str]:
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid grouping JSON: {exc.msg}", path=path) from exc
    if not isinstance(doc, dict) or not all(isinstance(v, str) for v in doc.values()):
        raise FormatError("grouping must map label -> group", path=path)
    return doc


def write_grouping(grouping: dict[str, str], path) -> None:
    _write_text(Path(path), json.dumps(grouping, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Series / raw-response / anomaly persistence


def write_series_csv(series: NormalizedSeries, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clip_id", "start_s", "end_s", *series.prompt_ids])
    for row in series.rows:
        w.writerow(
            [row.clip_id, format_float(row.start_s), format_float(row.end_s)]
            + [row.labels[p] for p in series.prompt_ids]
        )
    _write_text(Path(path), buf.getvalue())


def load_series_csv(path) -> NormalizedSeries:
    path = Path(path)
    reader = csv.reader(io.StringIO(_read_text(path)))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("missing header row", path=path) from None
    if header[:3] != ["clip_id", "start_s", "end_s"]:
        raise FormatError("series header must start with clip_id,start_s,end_s", path=path, row=1)
    prompt_ids = tuple(header[3:])
    rows = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3 + len(prompt_ids):
            raise FormatError(f"expected {3 + len(prompt_ids)} fields, got {len(row)}", path=path, row=row_no)
        try:
            start_s, end_s = float(row[1]), float(row[2])
        except ValueError:
            raise FormatError("start_s/end_s must be numbers", path=path, row=row_no) from None
        rows.append(SeriesRow(row[0], start_s, end_s, dict(zip(prompt_ids, row[3:]))))
    return NormalizedSeries(prompt_ids=prompt_ids, rows=tuple(rows))


def write_raw_json(raw: dict[tuple[str, str], RawResponse], path) -> None:
    doc: dict[str, dict[str, dict]] = {}
    for (clip_id, prompt_id), response in sorted(raw.items()):
        doc.setdefault(clip_id, {})[prompt_id] = {"raw": response.text, "reason": response.reason}
    _write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_raw_json(path) -> dict[tuple[str, str], RawResponse]:
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid raw-response JSON: {exc.msg}", path=path) from exc
    out: dict[tuple[str, str], RawResponse] = {}
    for clip_id, prompts in doc.items():
        for prompt_id, cell in prompts.items():
            out[(clip_id, prompt_id)] = RawResponse(text=cell.get("raw"), reason=cell.get("reason"))
    return out


def write_anomalies_json(anomalies, path) -> None:
    doc = {
        "anomalies": [
            {
                "anomaly_id": a.anomaly_id,
                "clip_id": a.clip_id,
                "prompt_id": a.prompt_id,
                "raw_response": a.raw_response,
                "reason": a.reason,
                "status": a.status,
                "resolved_option": a.resolved_option,
                "resolved_via": a.resolved_via,
            }
            for a in anomalies
        ]
    }
    _write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_anomalies_json(path) -> tuple[AnomalyRecord, ...]:
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid anomalies JSON: {exc.msg}", path=path) from exc
    records = []
    for entry in doc.get("anomalies", []):
        records.append(
            AnomalyRecord(
                anomaly_id=entry["anomaly_id"],
                clip_id=entry["clip_id"],
                prompt_id=entry["prompt_id"],
                raw_response=entry.get("raw_response"),
                reason=entry.get("reason"),
                status=entry.get("status", "open"),
                resolved_option=entry.get("resolved_option"),
                resolved_via=entry.get("resolved_via"),
            )
        )
    return tuple(records)
