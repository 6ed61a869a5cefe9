"""Incremental doc maintenance driven by Git staged changes.

The update flow diffs the staged object inventory against the stored graph
snapshot, regenerates only what a trigger selects, and stages the refreshed
pages and store so they land in the same commit. A pre-commit hook wires the
flow into every commit.
"""

from __future__ import annotations

import contextlib
import logging
import os
import stat
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import TYPE_CHECKING, Sequence

from .doc_pipeline import (
    DocStore,
    GenerationOptions,
    RunReport,
    generate_all,
    load_store,
    save_store,
)
from .errors import LockError, NotAGitRepoError, UsageError
from .markdown_publisher import write_site
from .project_graph import RepoGraph, build_graph, empty_graph
from .source_model import SOURCE_SUFFIX, _is_ignored, parse_file, scan_repository

if TYPE_CHECKING:
    from .config import Config
    from .llm_gateway import Gateway

logger = logging.getLogger(__name__)

# hash of the empty tree, the diff base before the first commit exists
EMPTY_TREE = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"

TRIGGER_SOURCE_MODIFIED = "SourceModified"
TRIGGER_NEW_OBJECT = "NewObject"
TRIGGER_REFERRER_REMOVED = "ReferrerRemoved"
TRIGGER_NEW_REFERENCE = "NewReference"

HOOK_MARKER = "# repodoc pre-commit hook"
LOCAL_HOOK_NAME = "pre-commit.local"
LOCK_NAME = ".lock"

CHANGE_ADDED = "Added"
CHANGE_MODIFIED = "Modified"
CHANGE_DELETED = "Deleted"


def _git(repo_root: str | Path, *args: str, check: bool = True) -> subprocess.CompletedProcess:
    proc = subprocess.run(
        ["git", "-C", str(repo_root), *args], capture_output=True
    )
    if check and proc.returncode != 0:
        detail = proc.stderr.decode("utf-8", "replace").strip()
        raise UsageError(f"git {' '.join(args)} failed: {detail}")
    return proc


def is_git_repo(repo_root: str | Path) -> bool:
    try:
        proc = _git(repo_root, "rev-parse", "--git-dir", check=False)
    except FileNotFoundError:
        return False
    return proc.returncode == 0


def require_git_repo(repo_root: str | Path) -> None:
    if not is_git_repo(repo_root):
        raise NotAGitRepoError(f"{repo_root} is not inside a Git repository")


def _has_head(repo_root: str | Path) -> bool:
    proc = _git(repo_root, "rev-parse", "--verify", "--quiet", "HEAD", check=False)
    return proc.returncode == 0


def _is_hidden(rel: str) -> bool:
    return any(part.startswith(".") for part in PurePosixPath(rel).parts)


@dataclass(frozen=True)
class StagedChanges:
    """Staged Python source paths, bucketed by what the index did to them."""

    added: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.added or self.modified or self.removed)

    @property
    def present(self) -> tuple[str, ...]:
        return tuple(sorted((*self.added, *self.modified)))

    def as_pairs(self) -> list[tuple[str, str]]:
        """(path, change kind) pairs sorted by path. Renames show up as a
        Deleted plus an Added entry; identity is path-based."""
        pairs = [(p, CHANGE_ADDED) for p in self.added]
        pairs += [(p, CHANGE_MODIFIED) for p in self.modified]
        pairs += [(p, CHANGE_DELETED) for p in self.removed]
        return sorted(pairs)


def staged_changes(repo_root: str | Path, ignore: Sequence[str] = ()) -> StagedChanges:
    """Diff the index against HEAD (or the empty tree before the first commit)."""
    base = "HEAD" if _has_head(repo_root) else EMPTY_TREE
    out = _git(
        repo_root, "diff", "--cached", "--name-status", "--no-renames", "-z", base
    ).stdout.decode("utf-8", "replace")
    fields = out.split("\0")
    buckets: dict[str, list[str]] = {"A": [], "M": [], "D": []}
    index = 0
    while index + 1 < len(fields):
        status, path = fields[index], fields[index + 1]
        index += 2
        if not status or not path:
            continue
        if not path.endswith(SOURCE_SUFFIX) or _is_hidden(path) or _is_ignored(path, ignore):
            continue
        code = status[0]
        if code == "A":
            buckets["A"].append(path)
        elif code == "D":
            buckets["D"].append(path)
        elif code in ("M", "T", "U"):
            buckets["M"].append(path)
    return StagedChanges(
        added=tuple(sorted(buckets["A"])),
        modified=tuple(sorted(buckets["M"])),
        removed=tuple(sorted(buckets["D"])),
    )


def read_staged_text(repo_root: str | Path, path: str) -> str:
    """Content of the staged (index) version of a file."""
    out = _git(repo_root, "show", f":{path}").stdout
    return out.decode("utf-8", "replace")


@dataclass(frozen=True)
class ChangeSet:
    """Object-level difference between two graphs."""

    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()
    edge_added: tuple[tuple[str, str], ...] = ()
    edge_removed: tuple[tuple[str, str], ...] = ()

    def __bool__(self) -> bool:
        return bool(
            self.added or self.removed or self.modified or self.edge_added or self.edge_removed
        )


def diff_objects(old: RepoGraph, new: RepoGraph) -> ChangeSet:
    """Compare object inventories and kept reference edges."""
    old_hash = {oid: obj.source_hash for oid, obj in old.objects.items()}
    new_hash = {oid: obj.source_hash for oid, obj in new.objects.items()}
    added = sorted(set(new_hash) - set(old_hash))
    removed = sorted(set(old_hash) - set(new_hash))
    modified = sorted(
        oid for oid in set(old_hash) & set(new_hash) if old_hash[oid] != new_hash[oid]
    )
    old_edges = {(e.caller, e.callee) for e in old.edges}
    new_edges = {(e.caller, e.callee) for e in new.edges}
    return ChangeSet(
        added=tuple(added),
        removed=tuple(removed),
        modified=tuple(modified),
        edge_added=tuple(sorted(new_edges - old_edges)),
        edge_removed=tuple(sorted(old_edges - new_edges)),
    )


@dataclass(frozen=True)
class UpdatePlan:
    """What to regenerate (with the winning trigger) and which docs to drop."""

    regenerate: tuple[tuple[str, str], ...] = ()
    delete_docs: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.regenerate or self.delete_docs)

    @property
    def regenerate_ids(self) -> set[str]:
        return {oid for oid, _ in self.regenerate}


def plan_updates(changes: ChangeSet) -> UpdatePlan:
    """Select regeneration targets; the first matching trigger wins.

    A direct source edit beats object addition, which beats losing a caller,
    which beats gaining one. Removed objects are never regenerated. Edits to
    a callee's body deliberately do not touch its callers.
    """
    triggers: dict[str, str] = {}
    for oid in changes.modified:
        triggers.setdefault(oid, TRIGGER_SOURCE_MODIFIED)
    for oid in changes.added:
        triggers.setdefault(oid, TRIGGER_NEW_OBJECT)
    gone = set(changes.removed)
    for _caller, callee in changes.edge_removed:
        if callee not in gone:
            triggers.setdefault(callee, TRIGGER_REFERRER_REMOVED)
    for _caller, callee in changes.edge_added:
        if callee not in gone:
            triggers.setdefault(callee, TRIGGER_NEW_REFERENCE)
    return UpdatePlan(
        regenerate=tuple(sorted(triggers.items())),
        delete_docs=tuple(sorted(gone)),
    )


@contextlib.contextmanager
def _update_lock(store_dir: Path):
    store_dir.mkdir(parents=True, exist_ok=True)
    lock_path = store_dir / LOCK_NAME
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(
            f"another update holds {lock_path}; remove it if no update is running"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            os.unlink(lock_path)


@dataclass
class UpdateReport:
    """Outcome of one staged-changes update."""

    staged: StagedChanges
    changes: ChangeSet = field(default_factory=ChangeSet)
    plan: UpdatePlan = field(default_factory=UpdatePlan)
    run: RunReport = field(default_factory=RunReport)
    written_pages: list[str] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.run.ok

    def summary_line(self) -> str:
        if not self.staged:
            return "Passed: documentation in sync (no staged Python changes)"
        return (
            "Passed: documentation in sync "
            f"({len(self.run.generated)} regenerated, {len(self.plan.delete_docs)} removed, "
            f"{len(self.written_pages)} pages written)"
        )

    def to_dict(self) -> dict:
        return {
            "staged": {
                "added": list(self.staged.added),
                "modified": list(self.staged.modified),
                "removed": list(self.staged.removed),
            },
            "plan": {
                "regenerate": [[oid, trig] for oid, trig in self.plan.regenerate],
                "delete_docs": list(self.plan.delete_docs),
            },
            "run": self.run.to_dict(),
            "written_pages": list(self.written_pages),
            "parse_errors": list(self.parse_errors),
            "diagnostics": list(self.diagnostics),
        }


def _staged_graph(
    repo_root: Path, staged: StagedChanges, ignore: Sequence[str]
) -> RepoGraph:
    """Graph of the repository as the pending commit will leave it."""
    files = set(scan_repository(repo_root, ignore))
    files -= set(staged.removed)
    files |= set(staged.present)
    parses = []
    for rel in sorted(files):
        if rel in staged.present:
            text = read_staged_text(repo_root, rel)
        else:
            try:
                text = (repo_root / rel).read_text(encoding="utf-8", errors="replace")
            except OSError:
                continue
        parses.append(parse_file(rel, text))
    return build_graph([p.file for p in parses], parses)


def run_update(
    repo_root: str | Path, gateway: "Gateway", config: "Config", jobs: int = 1
) -> UpdateReport:
    """Regenerate docs for staged changes and stage the results.

    Nothing is written to the store or the pages unless every planned object
    regenerates successfully, so a failed update leaves the repository
    exactly as it was and the commit can be retried.
    """
    repo_root = Path(repo_root)
    require_git_repo(repo_root)
    store_path = repo_root / config.store_path
    with _update_lock(store_path.parent):
        staged = staged_changes(repo_root, config.ignore)
        if not staged:
            return UpdateReport(staged=staged)

        store = load_store(store_path)
        graph = _staged_graph(repo_root, staged, config.ignore)
        old_graph = store.graph_snapshot or empty_graph()
        changes = diff_objects(old_graph, graph)
        plan = plan_updates(changes)

        options = GenerationOptions(
            tiers=config.provider.tiers,
            reserve=config.completion_reserve_tokens,
            temperature=config.provider.temperature,
            doc_language=config.doc_language,
            child_docs_enabled=config.child_docs_enabled,
            jobs=jobs,
        )
        run = generate_all(graph, gateway, store, options, only=plan.regenerate_ids)
        report = UpdateReport(
            staged=staged,
            changes=changes,
            plan=plan,
            run=run,
            parse_errors=list(graph.parse_errors),
            diagnostics=list(graph.diagnostics),
        )
        if not run.ok:
            # leave store and pages untouched; the commit stays blocked
            return report

        for oid in plan.delete_docs:
            store.records.pop(oid, None)
        report.written_pages = write_site(graph, store, repo_root / config.doc_dir)
        save_store(store, store_path)
        _git(repo_root, "add", "-A", "--", config.doc_dir)
        _git(repo_root, "add", "--", config.store_path)
        return report


HOOK_TEMPLATE = """#!/bin/sh
{marker}
set -e
hook_dir="$(cd "$(dirname "$0")" && pwd)"
if [ -x "$hook_dir/{local_name}" ]; then
    "$hook_dir/{local_name}" "$@"
fi
exec {python} -m repodoc update
"""


def install_hook(repo_root: str | Path) -> Path:
    """Install the pre-commit hook, preserving any existing hook as a chained
    pre-commit.local. Reinstalling over our own hook is a no-op rewrite."""
    repo_root = Path(repo_root)
    require_git_repo(repo_root)
    hooks_rel = _git(repo_root, "rev-parse", "--git-path", "hooks").stdout.decode().strip()
    hooks_dir = Path(repo_root, hooks_rel)
    if not hooks_dir.is_dir():
        raise UsageError(f"hooks directory missing: {hooks_dir}")
    hook_path = hooks_dir / "pre-commit"
    local_path = hooks_dir / LOCAL_HOOK_NAME

    if hook_path.exists():
        existing = hook_path.read_text(encoding="utf-8", errors="replace")
        if HOOK_MARKER not in existing:
            if local_path.exists():
                raise UsageError(
                    f"both {hook_path} and {local_path} exist; move your hook aside manually"
                )
            hook_path.replace(local_path)
            logger.info("moved existing pre-commit hook to %s", local_path)

    script = HOOK_TEMPLATE.format(
        marker=HOOK_MARKER, local_name=LOCAL_HOOK_NAME, python=_shell_quote(sys.executable)
    )
    hook_path.write_text(script, encoding="utf-8", newline="\n")
    mode = hook_path.stat().st_mode
    hook_path.chmod(mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return hook_path


def _shell_quote(value: str) -> str:
    import shlex

    return shlex.quote(value)
