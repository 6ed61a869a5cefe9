"""Documentation generation pipeline and the persisted doc store.

Objects are generated bottom-to-top in topological order so every prompt can
embed the already-written docs of its callees and children. The store is one
JSON file holding all doc records plus the graph snapshot they were generated
against; it is the unit of persistence, diffing and Git tracking.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    CorruptStoreError,
    OverBudgetError,
    ProviderError,
    SchedulingError,
    StoreWriteError,
)
from .llm_gateway import CompletionRequest, Gateway
from .project_graph import RepoGraph, topological_order
from .prompt_engine import (
    DEFAULT_COMPLETION_RESERVE,
    ModelTier,
    assemble_context,
    fit_to_budget,
    render_prompt,
)
from .source_model import CLASS, CodeObject, source_digest

logger = logging.getLogger(__name__)

STORE_DIR = ".project_doc_record"
STORE_FILENAME = "project_hierarchy.json"
STORE_RELPATH = f"{STORE_DIR}/{STORE_FILENAME}"
STORE_VERSION = 1

PARAM_LABEL = "parameters"
ATTRIBUTE_LABEL = "Attributes"
_FIXED_LABELS = {
    "parameters": PARAM_LABEL,
    "attributes": ATTRIBUTE_LABEL,
    "code description": "Code Description",
    "note": "Note",
    "output example": "Output Example",
}

_HEADER_RE = re.compile(r"^\*\*(.+?)\*\*[ \t]*:[ \t]*(.*)$", re.MULTILINE)
_BULLET_RE = re.compile(r"^-[ \t]*`([^`]+)`[ \t]*:[ \t]*(.*)$")


def hash_source(snippet: str) -> str:
    """Content hash of the normalized snippet (trailing spaces and CRLF ignored)."""
    return source_digest(snippet)


@dataclass
class ParsedDoc:
    """Structured view of one generated doc plus a partial-parse report."""

    name_header: str = ""
    param_label: str | None = None
    params: list[tuple[str, str]] = field(default_factory=list)
    param_tail: str = ""
    code_description: str = ""
    note: str = ""
    output_example: str | None = None
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)


def parse_doc(text: str, kind: str, has_return: bool) -> ParsedDoc:
    """Split a generated doc into its bold-labelled sections.

    The first bold header whose label is not one of the fixed section labels
    is taken as the name header. Fixed labels match case-insensitively.
    Non-compliance is reported, never raised.
    """
    parsed = ParsedDoc()
    matches = list(_HEADER_RE.finditer(text))
    sections: list[tuple[str, str, str]] = []  # (label, inline rest, full text)
    for index, match in enumerate(matches):
        end = matches[index + 1].start() if index + 1 < len(matches) else len(text)
        sections.append((match.group(1).strip(), match.group(2), text[match.start() : end].rstrip()))

    seen: set[str] = set()
    for index, (label, inline, full) in enumerate(sections):
        canonical = _FIXED_LABELS.get(label.lower())
        if index == 0 and canonical is None:
            parsed.name_header = full
            seen.add("name")
            continue
        if canonical is None or canonical in seen:
            parsed.extra.append(label)
            continue
        if canonical in (PARAM_LABEL, ATTRIBUTE_LABEL):
            if PARAM_LABEL in seen or ATTRIBUTE_LABEL in seen:
                parsed.extra.append(label)
                continue
            parsed.param_label = canonical
            parsed.param_tail, parsed.params = _parse_param_section(inline, full)
            seen.add(canonical)
            continue
        seen.add(canonical)
        content = _section_content(inline, full)
        if canonical == "Code Description":
            parsed.code_description = content
        elif canonical == "Note":
            parsed.note = content
        elif canonical == "Output Example":
            parsed.output_example = content

    expected_param = ATTRIBUTE_LABEL if kind == CLASS else PARAM_LABEL
    if "name" not in seen:
        parsed.missing.append("name")
    if expected_param not in seen:
        parsed.missing.append(expected_param)
        # the wrong-kind label is an extra, found under the other key
        other = PARAM_LABEL if expected_param == ATTRIBUTE_LABEL else ATTRIBUTE_LABEL
        if other in seen:
            parsed.extra.append(other)
    if "Code Description" not in seen:
        parsed.missing.append("Code Description")
    if "Note" not in seen:
        parsed.missing.append("Note")
    if has_return and "Output Example" not in seen:
        parsed.missing.append("Output Example")
    return parsed


def _section_content(inline: str, full: str) -> str:
    lines = full.split("\n")
    rest = [inline.strip()] if inline.strip() else []
    rest.extend(line for line in lines[1:])
    return "\n".join(rest).strip()


def _parse_param_section(inline: str, full: str) -> tuple[str, list[tuple[str, str]]]:
    tail_parts = [inline.strip()] if inline.strip() else []
    params: list[tuple[str, str]] = []
    for line in full.split("\n")[1:]:
        bullet = _BULLET_RE.match(line.strip())
        if bullet:
            params.append((bullet.group(1).strip(), bullet.group(2).strip()))
        elif params and line.strip():
            name, desc = params[-1]
            params[-1] = (name, f"{desc} {line.strip()}".strip())
        elif line.strip():
            tail_parts.append(line.strip())
    return " ".join(tail_parts), params


@dataclass
class DocRecord:
    """One object's generated documentation, structured for re-rendering."""

    id: str
    kind: str
    name_header: str
    param_label: str
    param_section: list[tuple[str, str]]
    param_tail: str
    code_description: str
    note: str
    output_example: str | None
    source_hash: str
    model: str
    generated_at: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "name_header": self.name_header,
            "param_label": self.param_label,
            "param_section": [[n, d] for n, d in self.param_section],
            "param_tail": self.param_tail,
            "code_description": self.code_description,
            "note": self.note,
            "output_example": self.output_example,
            "source_hash": self.source_hash,
            "model": self.model,
            "generated_at": self.generated_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DocRecord":
        return cls(
            id=data["id"],
            kind=data["kind"],
            name_header=data["name_header"],
            param_label=data["param_label"],
            param_section=[(n, d) for n, d in data["param_section"]],
            param_tail=data.get("param_tail", ""),
            code_description=data["code_description"],
            note=data["note"],
            output_example=data.get("output_example"),
            source_hash=data["source_hash"],
            model=data["model"],
            generated_at=data["generated_at"],
        )


def record_from_parsed(obj: CodeObject, parsed: ParsedDoc, model: str) -> DocRecord:
    """Build the stored record; enforces the conditional Output Example rule."""
    params: list[tuple[str, str]] = []
    seen: set[str] = set()
    for name, desc in parsed.params:
        if name in seen:
            continue
        seen.add(name)
        params.append((name, desc))
    default_label = ATTRIBUTE_LABEL if obj.kind == CLASS else PARAM_LABEL
    return DocRecord(
        id=obj.id,
        kind=obj.kind,
        name_header=parsed.name_header,
        param_label=parsed.param_label or default_label,
        param_section=params,
        param_tail=parsed.param_tail,
        code_description=parsed.code_description,
        note=parsed.note,
        output_example=parsed.output_example if obj.has_return else None,
        source_hash=obj.source_hash,
        model=model,
        generated_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )


def render_record_text(record: DocRecord) -> str:
    """Plain doc text with bold section labels; used in pages and prompts."""
    parts: list[str] = []
    if record.name_header:
        parts.append(record.name_header)
    header = f"**{record.param_label}**:"
    if record.param_tail:
        header += f" {record.param_tail}"
    bullets = [f"- `{name}`: {desc}" for name, desc in record.param_section]
    parts.append("\n".join([header, *bullets]))
    if record.code_description:
        parts.append(f"**Code Description**: {record.code_description}")
    if record.note:
        parts.append(f"**Note**: {record.note}")
    if record.output_example is not None and record.output_example != "":
        parts.append(f"**Output Example**: {record.output_example}")
    return "\n\n".join(parts)


@dataclass
class DocStore:
    """All doc records plus the graph snapshot of the last completed run."""

    records: dict[str, DocRecord] = field(default_factory=dict)
    graph_snapshot: RepoGraph | None = None

    def to_dict(self) -> dict:
        return {
            "version": STORE_VERSION,
            "records": {oid: self.records[oid].to_dict() for oid in sorted(self.records)},
            "graph": self.graph_snapshot.to_dict() if self.graph_snapshot else None,
        }


def save_store(store: DocStore, path: str | Path) -> None:
    """Serialize atomically: write a temp file, then rename over the target."""
    path = Path(path)
    payload = json.dumps(store.to_dict(), indent=2, sort_keys=True) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-store-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise
    except OSError as exc:
        raise StoreWriteError(f"cannot write doc store {path}: {exc}") from exc


def load_store(path: str | Path) -> DocStore:
    """Load the store; a missing file is an empty store, a broken one an error."""
    path = Path(path)
    if not path.exists():
        return DocStore()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        records = {
            oid: DocRecord.from_dict(rec) for oid, rec in data.get("records", {}).items()
        }
        graph_data = data.get("graph")
        graph = RepoGraph.from_dict(graph_data) if graph_data else None
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise CorruptStoreError(
            f"doc store {path} is unreadable ({exc}); delete it and rerun generate to rebuild"
        ) from exc
    return DocStore(records=records, graph_snapshot=graph)


@dataclass
class GenerationOptions:
    tiers: Sequence[ModelTier]
    reserve: int = DEFAULT_COMPLETION_RESERVE
    temperature: float = 0.1
    doc_language: str = "English"
    child_docs_enabled: bool = False
    jobs: int = 1


@dataclass
class RunReport:
    """Outcome of one generate/update run."""

    generated: list[str] = field(default_factory=list)  # completion order
    skipped: list[str] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "generated": list(self.generated),
            "skipped": list(self.skipped),
            "failures": dict(sorted(self.failures.items())),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


def _reference_sets_unchanged(graph: RepoGraph, snapshot: RepoGraph | None, object_id: str) -> bool:
    if snapshot is None:
        return False
    return (
        set(graph.callers(object_id)) == set(snapshot.callers(object_id))
        and set(graph.callees(object_id)) == set(snapshot.callees(object_id))
    )


def _up_to_date(graph: RepoGraph, store: DocStore, object_id: str) -> bool:
    record = store.records.get(object_id)
    if record is None:
        return False
    if record.source_hash != graph.objects[object_id].source_hash:
        return False
    return _reference_sets_unchanged(graph, store.graph_snapshot, object_id)


def _stale_prerequisites(graph: RepoGraph, store: DocStore, pending: set[str]) -> frozenset[str]:
    # Ids whose docs are absent yet will never be produced this run (a past
    # run failed on them). Their docs render as "None" instead of wedging
    # every dependent forever.
    stale = {
        oid
        for oid in graph.objects
        if oid not in pending and oid not in store.records
    }
    for oid in sorted(stale):
        logger.warning("doc for %s is missing and not scheduled; rendering None", oid)
    return frozenset(stale)


def _generate_one(
    graph: RepoGraph,
    gateway: Gateway,
    store: DocStore,
    object_id: str,
    options: GenerationOptions,
    allow_missing: frozenset[str],
) -> tuple[DocRecord, int, int]:
    obj = graph.objects[object_id]
    ctx = assemble_context(
        graph,
        store,
        object_id,
        child_docs_enabled=options.child_docs_enabled,
        doc_language=options.doc_language,
        allow_missing=allow_missing,
    )
    ctx, tier = fit_to_budget(ctx, list(options.tiers), options.reserve)
    request = CompletionRequest(
        model=tier.name,
        prompt=render_prompt(ctx),
        max_completion_tokens=options.reserve,
        temperature=options.temperature,
    )
    response = gateway.complete(request, context_id=object_id)
    parsed = parse_doc(response.text, obj.kind, obj.has_return)
    if parsed.missing or parsed.extra:
        logger.warning(
            "%s: non-compliant doc (missing=%s extra=%s)", object_id, parsed.missing, parsed.extra
        )
    record = record_from_parsed(obj, parsed, response.model)
    return record, response.prompt_tokens, response.completion_tokens


def generate_all(
    graph: RepoGraph,
    gateway: Gateway,
    store: DocStore,
    options: GenerationOptions,
    *,
    only: set[str] | None = None,
) -> RunReport:
    """Generate docs for every stale object, bottom-to-top.

    Up-to-date objects (same source hash, same reference sets as the stored
    snapshot) are skipped without any gateway call. Failures are recorded and
    do not stop the run; dependents see "None" for a failed prerequisite.
    ``only`` restricts generation to the given ids (used by updates).
    """
    order = topological_order(graph)
    report = RunReport()
    pending: list[str] = []
    for oid in order:
        if only is not None and oid not in only:
            report.skipped.append(oid)
        elif _up_to_date(graph, store, oid):
            report.skipped.append(oid)
        else:
            pending.append(oid)

    failed: set[str] = set()
    stale = _stale_prerequisites(graph, store, set(pending))

    def _run(oid: str) -> None:
        try:
            record, ptok, ctok = _generate_one(
                graph, gateway, store, oid, options, frozenset(failed) | stale
            )
        except (OverBudgetError, ProviderError) as exc:
            failed.add(oid)
            report.failures[oid] = str(exc)
            logger.error("generation failed for %s: %s", oid, exc)
            return
        store.records[oid] = record
        report.generated.append(oid)
        report.prompt_tokens += ptok
        report.completion_tokens += ctok

    if options.jobs <= 1:
        for oid in pending:
            _run(oid)
    else:
        _run_concurrent(graph, pending, options.jobs, _run)

    store.graph_snapshot = graph
    return report


def _run_concurrent(
    graph: RepoGraph, pending: Sequence[str], jobs: int, run_one
) -> None:
    """Dispatch ready objects in parallel; prerequisites gate dispatch.

    An object is ready once all of its pending callees and children are done
    (success or failure). Completion order is whatever the pool yields, which
    still respects the dependency relation.
    """
    import heapq
    from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait

    pending_set = set(pending)
    blockers: dict[str, set[str]] = {}
    dependents: dict[str, set[str]] = {oid: set() for oid in pending}
    for oid in pending:
        needs = set(graph.callees(oid)) | set(graph.object_children(oid))
        blockers[oid] = {n for n in needs if n in pending_set}
        for need in blockers[oid]:
            dependents[need].add(oid)

    ready = sorted(oid for oid in pending if not blockers[oid])
    heapq.heapify(ready)
    done_lock = threading.Lock()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {}
        while ready or futures:
            while ready and len(futures) < jobs:
                oid = heapq.heappop(ready)
                futures[pool.submit(run_one, oid)] = oid
            finished, _ = wait(futures, return_when=FIRST_COMPLETED)
            for future in finished:
                oid = futures.pop(future)
                future.result()  # run_one never raises; surfacing bugs is fine
                with done_lock:
                    for dep in dependents.get(oid, ()):
                        blockers[dep].discard(oid)
                        if not blockers[dep]:
                            heapq.heappush(ready, dep)
