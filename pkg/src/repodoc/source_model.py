"""Repository scanning and syntax-tree extraction of documentable objects.

A repository is modeled as a set of Python files, each yielding class and
function definitions identified by a path-like qualified id:

    <relative file path>/<dotted object path with "/" separators>

so a method ``m`` on class ``C`` in ``demo/a.py`` has id ``demo/a.py/C/m``.
Parsing is pure text-to-data; nothing here touches the network or Git.
"""

from __future__ import annotations

import ast
import fnmatch
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Iterable, Sequence

from .errors import UsageError

SOURCE_SUFFIX = ".py"

CLASS = "Class"
FUNCTION = "Function"

# Leading parameters with these names are treated as the receiver and excluded.
# Name-based (rather than position-based) so that a definition parsed in
# isolation reports the same parameters as one parsed in class context.
_RECEIVER_NAMES = frozenset({"self", "cls"})

_DEF_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def normalize_source(text: str) -> str:
    """Normalize line endings to LF and strip trailing whitespace per line."""
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    return "\n".join(line.rstrip() for line in lines)


def source_digest(text: str) -> str:
    """Hex digest of the normalized text. Stable across platforms."""
    return hashlib.sha256(normalize_source(text).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CodeObject:
    """One class or function definition extracted from a source file."""

    id: str
    kind: str  # CLASS or FUNCTION
    name: str
    file: str
    line_span: tuple[int, int]  # 1-based, inclusive
    snippet: str
    params: tuple[str, ...]
    has_return: bool
    parent_id: str
    source_hash: str = ""

    @property
    def doc_path(self) -> str:
        return self.id

    def to_dict(self, *, include_snippet: bool = True) -> dict:
        data = {
            "id": self.id,
            "kind": self.kind,
            "name": self.name,
            "file": self.file,
            "line_span": list(self.line_span),
            "params": list(self.params),
            "has_return": self.has_return,
            "parent_id": self.parent_id,
            "source_hash": self.source_hash,
        }
        if include_snippet:
            data["snippet"] = self.snippet
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CodeObject":
        return cls(
            id=data["id"],
            kind=data["kind"],
            name=data["name"],
            file=data["file"],
            line_span=(int(data["line_span"][0]), int(data["line_span"][1])),
            snippet=data.get("snippet", ""),
            params=tuple(data["params"]),
            has_return=bool(data["has_return"]),
            parent_id=data["parent_id"],
            source_hash=data.get("source_hash", ""),
        )


@dataclass(frozen=True)
class ImportBinding:
    """A name bound by an import statement, resolved to an absolute module path.

    ``member`` is None when the binding names the module itself.
    """

    module: str
    member: str | None = None

    def to_dict(self) -> dict:
        return {"module": self.module, "member": self.member}


@dataclass(frozen=True)
class CallSite:
    """A name-chain call expression found inside an object's body."""

    caller: str  # id of the innermost enclosing object
    chain: tuple[str, ...]  # base name followed by attribute names
    line: int

    def to_dict(self) -> dict:
        return {"caller": self.caller, "chain": list(self.chain), "line": self.line}


@dataclass
class Scope:
    """Names bound directly in one lexical scope (file or object body)."""

    kind: str = "module"  # "module", "function" or "class"
    defs: dict[str, str] = field(default_factory=dict)  # name -> object id
    imports: dict[str, ImportBinding] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "defs": dict(sorted(self.defs.items())),
            "imports": {k: v.to_dict() for k, v in sorted(self.imports.items())},
        }


@dataclass
class FileParse:
    """Parse result for one file. ``objects`` preserves source order."""

    file: str
    objects: list[CodeObject] = field(default_factory=list)
    parse_error: str | None = None
    calls: list[CallSite] = field(default_factory=list)
    scopes: dict[str, Scope] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "objects": [o.to_dict() for o in self.objects],
            "parse_error": self.parse_error,
            "calls": [c.to_dict() for c in self.calls],
            "scopes": {k: v.to_dict() for k, v in sorted(self.scopes.items())},
        }


def module_name_for(file_path: str) -> str:
    """Dotted module name for a repo-relative posix path.

    ``util/b.py`` -> ``util.b``; ``util/__init__.py`` -> ``util``.
    """
    p = PurePosixPath(file_path)
    parts = list(p.parts)
    stem = p.name[: -len(SOURCE_SUFFIX)] if p.name.endswith(SOURCE_SUFFIX) else p.name
    if stem == "__init__":
        parts = parts[:-1]
    else:
        parts[-1] = stem
    return ".".join(parts)


def _package_parts(file_path: str) -> list[str]:
    """Parts of the package that relative imports are resolved against."""
    module = module_name_for(file_path)
    parts = module.split(".") if module else []
    if PurePosixPath(file_path).name == "__init__.py":
        return parts
    return parts[:-1]


def detect_has_return(node: ast.AST | Sequence[ast.stmt]) -> bool:
    """True when the body yields a value: ``return expr`` or any yield.

    Nested definitions are excluded. For a class, true when any directly
    defined method is true.
    """
    if isinstance(node, ast.ClassDef):
        return any(detect_has_return(child) for child in node.body if isinstance(child, _DEF_NODES))
    if isinstance(node, _DEF_NODES):
        body: Sequence[ast.AST] = node.body
    elif isinstance(node, ast.AST):
        body = [node]
    else:
        body = list(node)

    stack: list[ast.AST] = list(body)
    while stack:
        current = stack.pop()
        if isinstance(current, (*_DEF_NODES, ast.ClassDef)):
            continue
        if isinstance(current, ast.Return):
            if current.value is not None:
                return True
            continue
        if isinstance(current, (ast.Yield, ast.YieldFrom)):
            return True
        stack.extend(ast.iter_child_nodes(current))
    return False


def _function_params(node: ast.FunctionDef | ast.AsyncFunctionDef) -> tuple[str, ...]:
    args = node.args
    positional = [a.arg for a in (*args.posonlyargs, *args.args)]
    if positional and positional[0] in _RECEIVER_NAMES:
        positional = positional[1:]
    names = positional
    if args.vararg is not None:
        names.append(args.vararg.arg)
    names.extend(a.arg for a in args.kwonlyargs)
    if args.kwarg is not None:
        names.append(args.kwarg.arg)
    return tuple(names)


def _class_params(node: ast.ClassDef) -> tuple[str, ...]:
    for child in node.body:
        if isinstance(child, _DEF_NODES) and child.name == "__init__":
            return _function_params(child)
    return ()


class _Collector(ast.NodeVisitor):
    """Single-pass walk producing objects, scopes and call sites."""

    def __init__(self, file_path: str, text: str) -> None:
        self._file = file_path
        self._lines = text.splitlines()
        self._pkg_parts = _package_parts(file_path)
        self.objects: list[CodeObject] = []
        self.calls: list[CallSite] = []
        self.scopes: dict[str, Scope] = {file_path: Scope(kind="module")}
        # (scope id, scope kind); index 0 is the module scope
        self._stack: list[tuple[str, str]] = [(file_path, "module")]

    # -- definitions ------------------------------------------------------

    def visit_FunctionDef(self, node: ast.FunctionDef) -> None:
        self._add_object(node, FUNCTION)

    def visit_AsyncFunctionDef(self, node: ast.AsyncFunctionDef) -> None:
        self._add_object(node, FUNCTION)

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self._add_object(node, CLASS)

    def _add_object(self, node: ast.AST, kind: str) -> None:
        parent_id, _ = self._stack[-1]
        obj_id = f"{parent_id}/{node.name}"
        start = node.lineno
        if node.decorator_list:
            start = min(start, node.decorator_list[0].lineno)
        end = node.end_lineno or start
        snippet = "\n".join(self._lines[start - 1 : end])
        if kind == CLASS:
            params = _class_params(node)
        else:
            params = _function_params(node)
        obj = CodeObject(
            id=obj_id,
            kind=kind,
            name=node.name,
            file=self._file,
            line_span=(start, end),
            snippet=snippet,
            params=params,
            has_return=detect_has_return(node),
            parent_id=parent_id,
            source_hash=source_digest(snippet),
        )
        self.objects.append(obj)
        self.scopes[parent_id].defs[node.name] = obj_id
        self.scopes.setdefault(obj_id, Scope(kind="class" if kind == CLASS else "function"))

        # Decorators, bases and defaults execute in the parent scope.
        for dec in node.decorator_list:
            self.visit(dec)
        if isinstance(node, ast.ClassDef):
            for expr in (*node.bases, *node.keywords):
                self.visit(expr)
        else:
            self.visit(node.args)
            if node.returns is not None:
                self.visit(node.returns)

        self._stack.append((obj_id, "class" if kind == CLASS else "function"))
        for stmt in node.body:
            self.visit(stmt)
        self._stack.pop()

    # -- imports -----------------------------------------------------------

    def visit_Import(self, node: ast.Import) -> None:
        scope = self.scopes[self._stack[-1][0]]
        for alias in node.names:
            if alias.asname:
                scope.imports[alias.asname] = ImportBinding(module=alias.name)
            else:
                first = alias.name.split(".")[0]
                scope.imports[first] = ImportBinding(module=first)

    def visit_ImportFrom(self, node: ast.ImportFrom) -> None:
        base = self._import_base(node.module, node.level)
        if base is None:
            return
        scope = self.scopes[self._stack[-1][0]]
        for alias in node.names:
            if alias.name == "*":
                continue
            scope.imports[alias.asname or alias.name] = ImportBinding(module=base, member=alias.name)

    def _import_base(self, module: str | None, level: int) -> str | None:
        if level == 0:
            return module or ""
        hops = level - 1
        if hops > len(self._pkg_parts):
            return None  # relative import escapes the repository
        parts = self._pkg_parts[: len(self._pkg_parts) - hops]
        if module:
            parts = [*parts, *module.split(".")]
        return ".".join(parts)

    # -- calls ---------------------------------------------------------------

    def visit_Call(self, node: ast.Call) -> None:
        caller_id, _ = self._stack[-1]
        if len(self._stack) > 1:  # module-level calls are out of scope
            chain = _flatten_chain(node.func)
            if chain is not None:
                self.calls.append(CallSite(caller=caller_id, chain=chain, line=node.lineno))
        self.generic_visit(node)


def _flatten_chain(node: ast.expr) -> tuple[str, ...] | None:
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        return tuple(reversed(parts))
    return None  # dynamic receiver; not resolvable statically


def _dedup_last(objects: list[CodeObject]) -> list[CodeObject]:
    # Conditional redefinition can yield one id twice; the last binding wins,
    # mirroring runtime semantics.
    seen: set[str] = set()
    out: list[CodeObject] = []
    for obj in reversed(objects):
        if obj.id in seen:
            continue
        seen.add(obj.id)
        out.append(obj)
    out.reverse()
    return out


def parse_file(path: str, text: str) -> FileParse:
    """Parse one file's text. Syntax errors yield a FileParse with no objects."""
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError, RecursionError) as exc:
        lineno = getattr(exc, "lineno", None)
        where = f"{path}:{lineno}" if lineno else path
        return FileParse(file=path, parse_error=f"{where}: {exc.msg if hasattr(exc, 'msg') else exc}")
    collector = _Collector(path, text)
    collector.visit(tree)
    return FileParse(
        file=path,
        objects=_dedup_last(collector.objects),
        calls=collector.calls,
        scopes=collector.scopes,
    )


def _is_ignored(rel_posix: str, ignore: Sequence[str]) -> bool:
    parts = PurePosixPath(rel_posix).parts
    for pattern in ignore:
        if fnmatch.fnmatch(rel_posix, pattern):
            return True
        if any(fnmatch.fnmatch(part, pattern) for part in parts):
            return True
    return False


def scan_repository(root: str | Path, ignore: Sequence[str] = ()) -> list[str]:
    """Relative posix paths of the Python files under ``root``, sorted.

    Hidden directories and files (any component starting with ".") are
    excluded, which also covers VCS metadata.
    """
    root = Path(root)
    if not root.is_dir():
        raise UsageError(f"not a directory: {root}")
    found: list[str] = []
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = Path(dirpath).relative_to(root)
        dirnames[:] = sorted(
            d
            for d in dirnames
            if not d.startswith(".") and not _is_ignored((rel_dir / d).as_posix(), ignore)
        )
        for name in sorted(filenames):
            if name.startswith(".") or not name.endswith(SOURCE_SUFFIX):
                continue
            rel = (rel_dir / name).as_posix()
            if _is_ignored(rel, ignore):
                continue
            found.append(rel)
    return sorted(found)


def parse_repository(
    root: str | Path, files: Iterable[str], *, jobs: int = 1
) -> list[FileParse]:
    """Parse the given repo-relative files, optionally with a thread pool.

    Results are always returned in lexicographic file order regardless of
    worker scheduling.
    """
    root = Path(root)
    ordered = sorted(files)

    def _one(rel: str) -> FileParse:
        try:
            text = (root / rel).read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            return FileParse(file=rel, parse_error=f"{rel}: {exc}")
        return parse_file(rel, text)

    if jobs <= 1 or len(ordered) <= 1:
        return [_one(rel) for rel in ordered]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_one, ordered))
