"""Quality measurement for generated docs and resolved references.

Reference recall scores the resolver against a hand-labelled ground truth.
Format checking and parameter accuracy score generated doc text without any
model in the loop, so they are cheap enough to run on every build.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Union

from .project_graph import RepoGraph
from .source_model import CLASS, CodeObject

_HEADER_RE = re.compile(r"^\*\*(.+?)\*\*[ \t]*:[ \t]*(.*)$", re.MULTILINE)
_BULLET_RE = re.compile(r"^-[ \t]*`([^`]+)`[ \t]*:", re.MULTILINE)

_PARAM_LABELS = {"parameters", "attributes"}
_FIXED_LABELS = _PARAM_LABELS | {"code description", "note", "output example"}

ReferenceSource = Union[RepoGraph, Mapping[str, Iterable[str]]]


def reference_sets(edges: Iterable[tuple[str, str]]) -> dict[str, set[str]]:
    """Per-object union of callers and callees from (caller, callee) pairs."""
    refs: dict[str, set[str]] = {}
    for caller, callee in edges:
        refs.setdefault(caller, set()).add(callee)
        refs.setdefault(callee, set()).add(caller)
    return refs


def _reference_map(source: ReferenceSource) -> dict[str, set[str]]:
    if isinstance(source, RepoGraph):
        return {
            oid: set(source.callers(oid)) | set(source.callees(oid))
            for oid in source.objects
        }
    return {oid: set(refs) for oid, refs in source.items()}


def reference_recall(predicted: ReferenceSource, truth: ReferenceSource) -> float:
    """Mean per-object recall of reference sets against the ground truth.

    Objects the truth marks as having no references are excluded; an object
    with no predictions scores zero against a nonempty truth set.
    """
    pred_map = _reference_map(predicted)
    truth_map = _reference_map(truth)
    scores: list[float] = []
    for oid, expected in sorted(truth_map.items()):
        if not expected:
            continue
        found = pred_map.get(oid, set())
        scores.append(len(found & expected) / len(expected))
    return fmean(scores) if scores else 0.0


@dataclass(frozen=True)
class FormatCheck:
    """Per-section verdicts for one doc."""

    name_ok: bool
    params_ok: bool
    code_description_ok: bool
    note_ok: bool
    output_example_ok: bool
    no_extras: bool

    @property
    def compliant(self) -> bool:
        return (
            self.name_ok
            and self.params_ok
            and self.code_description_ok
            and self.note_ok
            and self.output_example_ok
            and self.no_extras
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name_ok,
            "params": self.params_ok,
            "code_description": self.code_description_ok,
            "note": self.note_ok,
            "output_example": self.output_example_ok,
            "no_extras": self.no_extras,
            "compliant": self.compliant,
        }


def _sections(doc: str) -> list[tuple[str, str]]:
    """(lowercased label, section content) for every column-0 bold header."""
    matches = list(_HEADER_RE.finditer(doc))
    out: list[tuple[str, str]] = []
    for index, match in enumerate(matches):
        end = matches[index + 1].start() if index + 1 < len(matches) else len(doc)
        inline = match.group(2).strip()
        rest = doc[match.end() : end].strip()
        content = "\n".join(part for part in (inline, rest) if part)
        out.append((match.group(1).strip().lower(), content))
    return out


def check_format(doc: str, kind: str, has_return: bool) -> FormatCheck:
    """Verify the five-section layout for one generated doc."""
    sections = _sections(doc)
    labels = [label for label, _ in sections]

    name_ok = bool(sections) and labels[0] not in _FIXED_LABELS

    expected_param = "attributes" if kind == CLASS else "parameters"
    wrong_param = "parameters" if kind == CLASS else "attributes"
    params_ok = expected_param in labels

    content_by_label: dict[str, str] = {}
    extras = False
    for index, (label, content) in enumerate(sections):
        if index == 0 and label not in _FIXED_LABELS:
            continue
        if label not in _FIXED_LABELS or label in content_by_label:
            extras = True
            continue
        content_by_label[label] = content
    if wrong_param in content_by_label:
        extras = True

    code_description_ok = bool(content_by_label.get("code description", "").strip())
    note_ok = bool(content_by_label.get("note", "").strip())
    if has_return:
        output_example_ok = bool(content_by_label.get("output example", "").strip())
    else:
        output_example_ok = "output example" not in content_by_label

    return FormatCheck(
        name_ok=name_ok,
        params_ok=params_ok,
        code_description_ok=code_description_ok,
        note_ok=note_ok,
        output_example_ok=output_example_ok,
        no_extras=not extras,
    )


def extract_params(doc: str) -> list[str]:
    """Backticked bullet names under the parameters or Attributes section,
    in order, duplicates kept."""
    matches = list(_HEADER_RE.finditer(doc))
    for index, match in enumerate(matches):
        if match.group(1).strip().lower() not in _PARAM_LABELS:
            continue
        end = matches[index + 1].start() if index + 1 < len(matches) else len(doc)
        body = doc[match.end() : end]
        return [m.group(1).strip() for m in _BULLET_RE.finditer(body)]
    return []


def param_accuracy(
    predicted: Iterable[str], truth: Iterable[str], mode: str = "jaccard"
) -> float:
    """Agreement between documented and declared parameter names.

    jaccard compares the two as sets; precision scores how much of the
    prediction is real, penalizing duplicated bullets.
    """
    pred_list = list(predicted)
    pred_set = set(pred_list)
    truth_set = set(truth)
    if mode == "jaccard":
        if not pred_set and not truth_set:
            return 1.0
        union = pred_set | truth_set
        return len(pred_set & truth_set) / len(union)
    if mode == "precision":
        if not pred_list:
            return 1.0 if not truth_set else 0.0
        return len(pred_set & truth_set) / len(pred_list)
    raise ValueError(f"unknown param accuracy mode: {mode}")


@dataclass
class EvalReport:
    per_object: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "aggregates": self.aggregates,
                "per_object": self.per_object,
                "errors": self.errors,
            },
            indent=2,
            sort_keys=True,
        )


def _object_meta(source: Union[RepoGraph, Mapping[str, CodeObject]]) -> Mapping[str, CodeObject]:
    if isinstance(source, RepoGraph):
        return source.objects
    return source


def evaluate_docs(
    docs: Mapping[str, str],
    meta: Union[RepoGraph, Mapping[str, CodeObject]],
    param_metric: str = "jaccard",
) -> EvalReport:
    """Score every doc for format compliance and parameter accuracy."""
    objects = _object_meta(meta)
    report = EvalReport()
    flag_totals = {
        "name": 0,
        "params": 0,
        "code_description": 0,
        "note": 0,
        "output_example": 0,
        "no_extras": 0,
    }
    compliant = 0
    accuracies: list[float] = []
    for oid in sorted(docs):
        obj = objects.get(oid)
        if obj is None:
            report.errors.append(f"unknown object id: {oid}")
            continue
        flags = check_format(docs[oid], obj.kind, obj.has_return)
        accuracy = param_accuracy(extract_params(docs[oid]), obj.params, param_metric)
        accuracies.append(accuracy)
        compliant += flags.compliant
        for key, value in flags.to_dict().items():
            if key in flag_totals:
                flag_totals[key] += value
        report.per_object.append(
            {"id": oid, "param_accuracy": round(accuracy, 6), **flags.to_dict()}
        )
    scored = len(report.per_object)
    report.aggregates = {
        "objects": scored,
        "format_compliance": round(compliant / scored, 6) if scored else 0.0,
        "param_accuracy": round(fmean(accuracies), 6) if accuracies else 0.0,
        "param_metric": param_metric,
        "section_rates": {
            key: round(total / scored, 6) if scored else 0.0
            for key, total in flag_totals.items()
        },
    }
    return report
