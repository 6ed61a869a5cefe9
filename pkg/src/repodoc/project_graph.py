"""Project tree plus caller/callee reference graph.

The tree mirrors the directory layout (Repo -> Dir -> File -> Class/Function).
Reference edges connect caller objects to callee objects and are pruned to a
DAG so that a bottom-to-top generation order always exists.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import PurePosixPath
from typing import Iterable, Mapping, Sequence

from .errors import InternalError
from .source_model import (
    CLASS,
    FUNCTION,
    CallSite,
    CodeObject,
    FileParse,
    Scope,
    module_name_for,
)

REPO = "Repo"
DIR = "Dir"
FILE = "File"

ROOT_ID = "."

_RECEIVERS = ("self", "cls")


@dataclass
class TreeNode:
    id: str
    node_kind: str  # REPO, DIR, FILE, CLASS or FUNCTION
    children: list[str] = field(default_factory=list)
    parent: str | None = None


@dataclass(frozen=True)
class ReferenceEdge:
    caller: str
    callee: str
    site: tuple[str, int]  # (file, line) of the first call expression seen

    def to_dict(self) -> dict:
        return {"caller": self.caller, "callee": self.callee, "site": [self.site[0], self.site[1]]}

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceEdge":
        site = data.get("site") or ["", 0]
        return cls(caller=data["caller"], callee=data["callee"], site=(site[0], int(site[1])))


def build_tree(files: Sequence[str], parses: Sequence[FileParse]) -> dict[str, TreeNode]:
    """Tree nodes for the repo root, directories, files and parsed objects."""
    nodes: dict[str, TreeNode] = {ROOT_ID: TreeNode(id=ROOT_ID, node_kind=REPO)}

    def _ensure_dir(path: PurePosixPath) -> str:
        node_id = path.as_posix()
        if node_id in nodes:
            return node_id
        parent = ROOT_ID if len(path.parts) == 1 else _ensure_dir(path.parent)
        nodes[node_id] = TreeNode(id=node_id, node_kind=DIR, parent=parent)
        nodes[parent].children.append(node_id)
        return node_id

    for rel in files:
        path = PurePosixPath(rel)
        parent = ROOT_ID if len(path.parts) == 1 else _ensure_dir(path.parent)
        if rel in nodes:
            raise InternalError(f"duplicate file node: {rel}")
        nodes[rel] = TreeNode(id=rel, node_kind=FILE, parent=parent)
        nodes[parent].children.append(rel)

    for parse in parses:
        for obj in parse.objects:
            if obj.id in nodes:
                raise InternalError(f"duplicate object id: {obj.id}")
            if obj.parent_id not in nodes:
                raise InternalError(f"missing parent for {obj.id}")
            nodes[obj.id] = TreeNode(id=obj.id, node_kind=obj.kind, parent=obj.parent_id)
            nodes[obj.parent_id].children.append(obj.id)

    for node in nodes.values():
        node.children.sort()
    return nodes


def resolve_references(
    nodes: Mapping[str, TreeNode], parses: Sequence[FileParse]
) -> tuple[list[ReferenceEdge], list[str]]:
    """Resolve call sites to in-repo objects.

    Returns deduplicated edges (first site wins) sorted by (caller, callee),
    plus a diagnostics list for calls that could not be resolved. Self edges
    are dropped.
    """
    objects: dict[str, CodeObject] = {}
    scopes: dict[str, Scope] = {}
    for parse in parses:
        scopes.update(parse.scopes)
        for obj in parse.objects:
            objects[obj.id] = obj
    module_map = {
        module_name_for(node.id): node.id
        for node in nodes.values()
        if node.node_kind == FILE
    }

    edges: dict[tuple[str, str], ReferenceEdge] = {}
    diagnostics: list[str] = []

    for parse in sorted(parses, key=lambda p: p.file):
        for call in parse.calls:
            target = _resolve_call(call, parse.file, objects, scopes, module_map)
            dotted = ".".join(call.chain)
            if target is None:
                diagnostics.append(
                    f"{parse.file}:{call.line}: unresolved call {dotted} (caller {call.caller})"
                )
                continue
            if target == call.caller:
                continue
            key = (call.caller, target)
            if key not in edges:
                edges[key] = ReferenceEdge(
                    caller=call.caller, callee=target, site=(parse.file, call.line)
                )
    ordered = sorted(edges.values(), key=lambda e: (e.caller, e.callee))
    return ordered, diagnostics


def _scope_chain(caller_id: str, objects: Mapping[str, CodeObject], file_path: str) -> list[str]:
    # Python name lookup from a nested body: own scope, enclosing function
    # scopes (class scopes are invisible to their methods), then the module.
    chain = [caller_id]
    current = objects.get(caller_id)
    while current is not None:
        parent = objects.get(current.parent_id)
        if parent is None:
            break
        if parent.kind == FUNCTION:
            chain.append(parent.id)
        current = parent
    chain.append(file_path)
    return chain


def _nearest_class(caller_id: str, objects: Mapping[str, CodeObject]) -> str | None:
    current = objects.get(caller_id)
    while current is not None:
        if current.kind == CLASS:
            return current.id
        current = objects.get(current.parent_id)
    return None


def _resolve_call(
    call: CallSite,
    file_path: str,
    objects: Mapping[str, CodeObject],
    scopes: Mapping[str, Scope],
    module_map: Mapping[str, str],
) -> str | None:
    base, attrs = call.chain[0], call.chain[1:]

    if base in _RECEIVERS:
        if len(attrs) != 1:
            return None
        class_id = _nearest_class(call.caller, objects)
        if class_id is None:
            return None
        candidate = f"{class_id}/{attrs[0]}"
        return candidate if candidate in objects else None

    for scope_id in _scope_chain(call.caller, objects, file_path):
        scope = scopes.get(scope_id)
        if scope is None:
            continue
        if base in scope.defs:
            oid = scope.defs[base]
            for attr in attrs:
                oid = f"{oid}/{attr}"
            return oid if oid in objects else None
        if base in scope.imports:
            binding = scope.imports[base]
            if binding.member is None:
                return _resolve_module_chain(binding.module, attrs, objects, module_map)
            dotted = f"{binding.module}.{binding.member}" if binding.module else binding.member
            if dotted in module_map:
                return _resolve_module_chain(dotted, attrs, objects, module_map)
            file_id = module_map.get(binding.module)
            if file_id is None:
                return None
            oid = f"{file_id}/{binding.member}"
            for attr in attrs:
                oid = f"{oid}/{attr}"
            return oid if oid in objects else None
    return None


def _resolve_module_chain(
    module: str,
    attrs: Sequence[str],
    objects: Mapping[str, CodeObject],
    module_map: Mapping[str, str],
) -> str | None:
    # Longest dotted prefix that names a file wins; the remainder must walk
    # down objects within that file.
    for split in range(len(attrs), -1, -1):
        dotted = ".".join([module, *attrs[:split]])
        file_id = module_map.get(dotted)
        if file_id is None:
            continue
        rest = attrs[split:]
        if not rest:
            return None  # a module itself is not a documentable call target
        oid = file_id + "/" + "/".join(rest)
        return oid if oid in objects else None
    return None


def object_containment(objects: Mapping[str, CodeObject]) -> list[tuple[str, str]]:
    """(parent, child) pairs where both endpoints are objects."""
    pairs = [
        (obj.parent_id, obj.id) for obj in objects.values() if obj.parent_id in objects
    ]
    return sorted(pairs)


def prune_cycles(
    edges: Sequence[ReferenceEdge],
    containment: Iterable[tuple[str, str]] = (),
) -> tuple[list[ReferenceEdge], list[ReferenceEdge]]:
    """Remove reference back edges until caller->callee plus parent->child is acyclic.

    Depth-first traversal visits roots and neighbors in lexicographic id
    order; each back edge is removed at the moment its cycle is detected and
    the traversal restarts. Containment edges are never removed: when one
    closes a cycle, the most recently traversed reference edge on the cycle
    path is removed instead (a reference edge always exists on such a cycle
    because containment alone forms a tree).
    """
    kept: dict[tuple[str, str], ReferenceEdge] = {}
    for edge in edges:
        kept.setdefault((edge.caller, edge.callee), edge)
    containment = list(containment)
    removed: list[ReferenceEdge] = []

    while True:
        victim = _find_cycle_edge(kept, containment)
        if victim is None:
            break
        removed.append(kept.pop((victim.caller, victim.callee)))
    return sorted(kept.values(), key=lambda e: (e.caller, e.callee)), removed


_WHITE, _GRAY, _BLACK = 0, 1, 2


def _find_cycle_edge(
    kept: Mapping[tuple[str, str], ReferenceEdge],
    containment: Sequence[tuple[str, str]],
) -> ReferenceEdge | None:
    adjacency: dict[str, list[tuple[str, ReferenceEdge | None]]] = {}
    node_set: set[str] = set()
    for (caller, callee), edge in kept.items():
        adjacency.setdefault(caller, []).append((callee, edge))
        node_set.update((caller, callee))
    for parent, child in containment:
        adjacency.setdefault(parent, []).append((child, None))
        node_set.update((parent, child))
    for targets in adjacency.values():
        targets.sort(key=lambda item: (item[0], item[1] is None))

    color = {node: _WHITE for node in node_set}
    for root in sorted(node_set):
        if color[root] != _WHITE:
            continue
        # Iterative DFS; each stack frame is (node, edge used to enter, iterator).
        path: list[tuple[str, ReferenceEdge | None]] = [(root, None)]
        iters = [iter(adjacency.get(root, ()))]
        color[root] = _GRAY
        while path:
            node, _ = path[-1]
            advanced = False
            for target, edge in iters[-1]:
                if color[target] == _GRAY:
                    if edge is not None:
                        return edge
                    # Containment closed the cycle: drop the deepest reference
                    # edge on the path segment inside the cycle.
                    idx = next(i for i, (n, _) in enumerate(path) if n == target)
                    for _, used in reversed(path[idx + 1 :]):
                        if used is not None:
                            return used
                    raise InternalError("containment-only cycle detected")
                if color[target] == _WHITE:
                    color[target] = _GRAY
                    path.append((target, edge))
                    iters.append(iter(adjacency.get(target, ())))
                    advanced = True
                    break
            if not advanced:
                color[node] = _BLACK
                path.pop()
                iters.pop()
    return None


@dataclass
class RepoGraph:
    """Tree, object table and pruned reference edges for one repository state."""

    nodes: dict[str, TreeNode]
    objects: dict[str, CodeObject]
    edges: list[ReferenceEdge]
    removed_edges: list[ReferenceEdge]
    diagnostics: list[str] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)

    @cached_property
    def _callee_map(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for edge in self.edges:
            out.setdefault(edge.caller, []).append(edge.callee)
        return {k: sorted(set(v)) for k, v in out.items()}

    @cached_property
    def _caller_map(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for edge in self.edges:
            out.setdefault(edge.callee, []).append(edge.caller)
        return {k: sorted(set(v)) for k, v in out.items()}

    def callees(self, object_id: str) -> list[str]:
        return list(self._callee_map.get(object_id, []))

    def callers(self, object_id: str) -> list[str]:
        return list(self._caller_map.get(object_id, []))

    def object_children(self, object_id: str) -> list[str]:
        node = self.nodes.get(object_id)
        if node is None:
            return []
        return [c for c in node.children if c in self.objects]

    def file_objects(self, file_id: str) -> list[str]:
        """All objects under a file, in source order (start line, then id)."""
        out = [o for o in self.objects.values() if o.file == file_id]
        out.sort(key=lambda o: (o.line_span[0], o.id))
        return [o.id for o in out]

    def to_dict(self) -> dict:
        nodes = {}
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            entry: dict = {
                "node_kind": node.node_kind,
                "parent": node.parent,
                "children": list(node.children),
            }
            obj = self.objects.get(node_id)
            if obj is not None:
                entry["meta"] = obj.to_dict(include_snippet=False)
            nodes[node_id] = entry
        return {
            "nodes": nodes,
            "edges": [e.to_dict() for e in self.edges],
            "removed_edges": [e.to_dict() for e in self.removed_edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepoGraph":
        nodes: dict[str, TreeNode] = {}
        objects: dict[str, CodeObject] = {}
        for node_id, entry in data.get("nodes", {}).items():
            nodes[node_id] = TreeNode(
                id=node_id,
                node_kind=entry["node_kind"],
                children=list(entry.get("children", [])),
                parent=entry.get("parent"),
            )
            meta = entry.get("meta")
            if meta is not None:
                objects[node_id] = CodeObject.from_dict(meta)
        return cls(
            nodes=nodes,
            objects=objects,
            edges=[ReferenceEdge.from_dict(e) for e in data.get("edges", [])],
            removed_edges=[ReferenceEdge.from_dict(e) for e in data.get("removed_edges", [])],
        )


def empty_graph() -> RepoGraph:
    return RepoGraph(
        nodes={ROOT_ID: TreeNode(id=ROOT_ID, node_kind=REPO)},
        objects={},
        edges=[],
        removed_edges=[],
    )


def build_graph(files: Sequence[str], parses: Sequence[FileParse]) -> RepoGraph:
    """Tree + resolved references + cycle pruning in one step."""
    nodes = build_tree(files, parses)
    raw_edges, diagnostics = resolve_references(nodes, parses)
    objects = {o.id: o for p in parses for o in p.objects}
    kept, removed = prune_cycles(raw_edges, object_containment(objects))
    parse_errors = [p.parse_error for p in parses if p.parse_error]
    return RepoGraph(
        nodes=nodes,
        objects=objects,
        edges=kept,
        removed_edges=removed,
        diagnostics=diagnostics,
        parse_errors=parse_errors,
    )


def topological_order(graph: RepoGraph) -> list[str]:
    """Total generation order: callees before callers, children before parents.

    Kahn's algorithm with a lexicographic ready heap, so the order is a pure
    function of the graph.
    """
    indegree = {oid: 0 for oid in graph.objects}
    dependents: dict[str, list[str]] = {oid: [] for oid in graph.objects}

    def _add(prerequisite: str, dependent: str) -> None:
        dependents[prerequisite].append(dependent)
        indegree[dependent] += 1

    for edge in graph.edges:
        if edge.caller in indegree and edge.callee in indegree:
            _add(edge.callee, edge.caller)
    for parent, child in object_containment(graph.objects):
        _add(child, parent)

    ready = [oid for oid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        oid = heapq.heappop(ready)
        order.append(oid)
        for dependent in dependents[oid]:
            indegree[dependent] -= 1
            if indegree[dependent] == 0:
                heapq.heappush(ready, dependent)
    if len(order) != len(graph.objects):
        raise InternalError("cycle survived pruning; generation order undefined")
    return order


def graph_to_dot(graph: RepoGraph) -> str:
    """DOT rendering of the object-level reference graph."""
    lines = ["digraph repodoc {", "    rankdir=LR;"]
    for oid in sorted(graph.objects):
        obj = graph.objects[oid]
        shape = "box" if obj.kind == CLASS else "ellipse"
        lines.append(f'    "{oid}" [shape={shape}];')
    for edge in graph.edges:
        lines.append(f'    "{edge.caller}" -> "{edge.callee}";')
    for edge in graph.removed_edges:
        lines.append(f'    "{edge.caller}" -> "{edge.callee}" [style=dashed, color=red, label="removed"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
