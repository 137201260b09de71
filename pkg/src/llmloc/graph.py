"""The repository knowledge graph: nodes, edges, indices and traversal.

Seven node kinds (REPO, PACKAGE, FILE, TEXTFILE, CLASS, FUNCTION,
ATTRIBUTE) and four edge kinds (CONTAIN, CALL, IMPORT, EXTEND). CONTAIN
edges form a tree rooted at the single REPO node; lookup indices give
amortized O(1) retrieval by path, name and annotation type.
"""

from __future__ import annotations

import builtins
import hashlib
import json
import posixpath
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from llmloc.diagnostics import DiagnosticSink
from llmloc.ingest import EntityKind, FileRecord, SyntaxEntity, normalize_path
from llmloc.patterns import AnnotationType

FORMAT_VERSION = 1


class GraphError(Exception):
    """Fatal graph construction failure (duplicate ids)."""


class GraphFormatError(Exception):
    """Malformed serialized graph document."""


class GraphInvariantError(Exception):
    """A structural invariant does not hold."""


class NodeKind(Enum):
    REPO = "REPO"
    PACKAGE = "PACKAGE"
    FILE = "FILE"
    TEXTFILE = "TEXTFILE"
    CLASS = "CLASS"
    FUNCTION = "FUNCTION"
    ATTRIBUTE = "ATTRIBUTE"


class EdgeKind(Enum):
    CONTAIN = "CONTAIN"
    CALL = "CALL"
    IMPORT = "IMPORT"
    EXTEND = "EXTEND"


FILE_KINDS = frozenset({NodeKind.FILE, NodeKind.TEXTFILE})

# Legal CONTAIN parent kinds per child kind.
_CONTAIN_PARENTS: dict[NodeKind, frozenset[NodeKind]] = {
    NodeKind.PACKAGE: frozenset({NodeKind.REPO, NodeKind.PACKAGE}),
    NodeKind.FILE: frozenset({NodeKind.REPO, NodeKind.PACKAGE}),
    NodeKind.TEXTFILE: frozenset({NodeKind.REPO, NodeKind.PACKAGE}),
    NodeKind.CLASS: frozenset({NodeKind.FILE, NodeKind.CLASS}),
    NodeKind.FUNCTION: frozenset({NodeKind.FILE, NodeKind.CLASS}),
    NodeKind.ATTRIBUTE: frozenset({NodeKind.FILE, NodeKind.CLASS}),
}


@dataclass(frozen=True)
class Annotation:
    """File-level role label attached during semantic annotation."""

    annotation_type: AnnotationType
    phrase: str
    keywords: tuple[str, ...]

    def to_doc(self) -> dict:
        return {
            "annotation_type": self.annotation_type.value,
            "phrase": self.phrase,
            "keywords": list(self.keywords),
        }

    @staticmethod
    def from_doc(doc: dict) -> "Annotation":
        try:
            kind = AnnotationType(doc["annotation_type"])
        except (KeyError, ValueError) as exc:
            raise GraphFormatError(f"bad annotation record {doc!r}: {exc}") from None
        return Annotation(kind, str(doc.get("phrase", "")), tuple(doc.get("keywords", ())))


@dataclass
class Node:
    id: str
    kind: NodeKind
    name: str
    path: str  # repository-relative; "" only for REPO
    span: tuple[int, int] | None = None
    source_text: str | None = None
    annotations: list[Annotation] = field(default_factory=list)

    def line_count(self) -> int:
        return len(self.source_text.splitlines()) if self.source_text else 0


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind


def node_id(kind: NodeKind, path: str, name: str, span: tuple[int, int] | None) -> str:
    """Content-addressed id, stable across runs for replay determinism."""
    span_part = f"{span[0]}-{span[1]}" if span else ""
    digest = hashlib.sha256(f"{kind.value}|{path}|{name}|{span_part}".encode()).hexdigest()
    return digest[:16]


class Graph:
    """Immutable after build except for the annotation-enrichment phase."""

    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self.edges: list[Edge] = []
        self.meta: dict = {}
        self.index_path: dict[str, str] = {}
        self.index_name: dict[str, set[str]] = {}
        self.index_annotation: dict[AnnotationType, set[str]] = {}
        self.adjacency_out: dict[str, list[Edge]] = {}
        self.adjacency_in: dict[str, list[Edge]] = {}

    # -- construction ------------------------------------------------------

    def add_node(self, node: Node) -> Node:
        if node.id in self.nodes:
            raise GraphError(f"duplicate node id {node.id} for {node.kind.value} {node.path}:{node.name}")
        self.nodes[node.id] = node
        return node

    def add_edge(self, edge: Edge) -> None:
        self.edges.append(edge)

    def rebuild_indices(self) -> None:
        self.index_path = {
            n.path: n.id for n in self.nodes.values() if n.kind in FILE_KINDS
        }
        self.index_name = {}
        for n in self.nodes.values():
            if n.name:
                self.index_name.setdefault(n.name, set()).add(n.id)
        self.index_annotation = {}
        for n in self.nodes.values():
            for ann in n.annotations:
                self.index_annotation.setdefault(ann.annotation_type, set()).add(n.id)
        self.adjacency_out = {nid: [] for nid in self.nodes}
        self.adjacency_in = {nid: [] for nid in self.nodes}
        for e in self.edges:
            self.adjacency_out[e.src].append(e)
            self.adjacency_in[e.dst].append(e)

    # -- queries -----------------------------------------------------------

    def repo_node(self) -> Node:
        for n in self.nodes.values():
            if n.kind is NodeKind.REPO:
                return n
        raise GraphInvariantError("graph has no REPO node")

    def lookup_by_path(self, path: str) -> str | None:
        return self.index_path.get(normalize_path(path))

    def file_nodes(self) -> list[Node]:
        return sorted(
            (n for n in self.nodes.values() if n.kind in FILE_KINDS), key=lambda n: n.path
        )

    def functions_named(self, name: str) -> list[str]:
        return sorted(
            nid for nid in self.index_name.get(name, ()) if self.nodes[nid].kind is NodeKind.FUNCTION
        )

    def classes_named(self, name: str) -> list[str]:
        return sorted(
            nid for nid in self.index_name.get(name, ()) if self.nodes[nid].kind is NodeKind.CLASS
        )

    def contain_parent(self, nid: str) -> str | None:
        for e in self.adjacency_in.get(nid, ()):
            if e.kind is EdgeKind.CONTAIN:
                return e.src
        return None

    def owning_file(self, nid: str) -> str | None:
        """The FILE/TEXTFILE node owning an entity node (identity for files)."""
        current: str | None = nid
        while current is not None:
            if self.nodes[current].kind in FILE_KINDS:
                return current
            current = self.contain_parent(current)
        return None

    def undirected_neighbors(self, nid: str) -> list[str]:
        seen = {e.dst for e in self.adjacency_out.get(nid, ())}
        seen.update(e.src for e in self.adjacency_in.get(nid, ()))
        seen.discard(nid)
        return sorted(seen)

    def k_hop_files(self, seeds: set[str], k: int) -> set[str]:
        """FILE/TEXTFILE nodes within undirected distance k of any seed.

        Intermediate non-file nodes guide traversal only; seeds that are
        themselves file nodes count at distance 0.
        """
        if k < 0:
            raise ValueError("hop count must be >= 0")
        unknown = seeds - self.nodes.keys()
        if unknown:
            raise ValueError(f"unknown seed node ids: {sorted(unknown)}")
        dist = {nid: 0 for nid in seeds}
        queue = deque(sorted(seeds))
        while queue:
            current = queue.popleft()
            if dist[current] == k:
                continue
            for neighbor in self.undirected_neighbors(current):
                if neighbor not in dist:
                    dist[neighbor] = dist[current] + 1
                    queue.append(neighbor)
        return {nid for nid in dist if self.nodes[nid].kind in FILE_KINDS}


# ---------------------------------------------------------------------------
# Build


_TEXT_LITERAL_RE = re.compile(r"""['"]([^'"\n]{1,200})['"]""")

# Calls to Python builtins are expected to be unresolvable in-repo; no
# diagnostic for those.
_BUILTIN_NAMES = frozenset(dir(builtins))


def build_graph(
    files: list[FileRecord],
    entities: dict[str, list[SyntaxEntity]],
    sink: DiagnosticSink | None = None,
) -> Graph:
    """Materialize the graph from scanned files and their entity lists."""
    sink = sink if sink is not None else DiagnosticSink()
    g = Graph()
    repo = g.add_node(Node(node_id(NodeKind.REPO, "", "", None), NodeKind.REPO, "", ""))

    package_ids: dict[str, str] = {}

    def package_for(dir_path: str) -> str:
        if not dir_path:
            return repo.id
        if dir_path in package_ids:
            return package_ids[dir_path]
        parent = package_for(posixpath.dirname(dir_path))
        node = g.add_node(
            Node(
                node_id(NodeKind.PACKAGE, dir_path, posixpath.basename(dir_path), None),
                NodeKind.PACKAGE,
                posixpath.basename(dir_path),
                dir_path,
            )
        )
        package_ids[dir_path] = node.id
        g.add_edge(Edge(parent, node.id, EdgeKind.CONTAIN))
        return node.id

    file_ids: dict[str, str] = {}
    records_by_path = {f.path: f for f in files}
    for f in files:
        kind = NodeKind.FILE if f.kind == "source" else NodeKind.TEXTFILE
        node = g.add_node(
            Node(
                node_id(kind, f.path, posixpath.basename(f.path), None),
                kind,
                posixpath.basename(f.path),
                f.path,
                source_text=f.content,
            )
        )
        file_ids[f.path] = node.id
        g.add_edge(Edge(package_for(posixpath.dirname(f.path)), node.id, EdgeKind.CONTAIN))

    # Definition nodes. scope_nodes maps (path, dotted scope path) -> node id
    # so references can resolve their enclosing definition later.
    scope_nodes: dict[tuple[str, str], str] = {}
    seen_entity_keys: set[tuple] = set()
    for path, entity_list in sorted(entities.items()):
        record = records_by_path.get(path)
        if record is None or path not in file_ids:
            sink.warn("graph", f"entities for unknown file {path} ignored")
            continue
        lines = record.content.splitlines()
        for entity in entity_list:
            if entity.entity_kind not in (EntityKind.CLASS, EntityKind.FUNCTION, EntityKind.ATTRIBUTE):
                continue
            key = (path, entity.entity_kind, entity.name, entity.span)
            if key in seen_entity_keys:
                continue
            seen_entity_keys.add(key)
            kind = {
                EntityKind.CLASS: NodeKind.CLASS,
                EntityKind.FUNCTION: NodeKind.FUNCTION,
                EntityKind.ATTRIBUTE: NodeKind.ATTRIBUTE,
            }[entity.entity_kind]
            first_line = lines[entity.span[0] - 1].strip() if entity.span[0] <= len(lines) else ""
            node = g.add_node(
                Node(
                    node_id(kind, path, entity.name, entity.span),
                    kind,
                    entity.name,
                    path,
                    span=entity.span,
                    source_text=first_line,
                )
            )
            dotted = f"{entity.enclosing}.{entity.name}" if entity.enclosing else entity.name
            scope_nodes.setdefault((path, dotted), node.id)
            parent = _containing_node(g, scope_nodes, file_ids, path, entity.enclosing)
            g.add_edge(Edge(parent, node.id, EdgeKind.CONTAIN))

    g.rebuild_indices()

    # Reference edges: IMPORT first (CALL/EXTEND resolution consults the
    # importing file's IMPORT edges), then text-literal imports, CALL, EXTEND.
    imported_files: dict[str, set[str]] = {fid: set() for fid in file_ids.values()}
    edge_keys = {(e.src, e.dst, e.kind) for e in g.edges}

    def add_unique(edge: Edge) -> None:
        key = (edge.src, edge.dst, edge.kind)
        if key not in edge_keys:
            edge_keys.add(key)
            g.add_edge(edge)

    for path, entity_list in sorted(entities.items()):
        if path not in file_ids:
            continue
        src_file = file_ids[path]
        for entity in entity_list:
            if entity.entity_kind is not EntityKind.IMPORT_REF:
                continue
            resolved = _resolve_import(g, path, entity.target or "")
            if resolved is None:
                sink.warn("graph", f"{path}: unresolvable import {entity.target!r} dropped")
                continue
            if resolved != src_file:
                add_unique(Edge(src_file, resolved, EdgeKind.IMPORT))
                imported_files[src_file].add(resolved)

    for path in sorted(file_ids):
        record = records_by_path[path]
        if record.kind != "source":
            continue
        src_file = file_ids[path]
        for target in _text_literal_targets(g, path, record.content):
            add_unique(Edge(src_file, target, EdgeKind.IMPORT))
            imported_files[src_file].add(target)

    for path, entity_list in sorted(entities.items()):
        if path not in file_ids:
            continue
        src_file = file_ids[path]
        neighbor_files = imported_files[src_file]
        for entity in entity_list:
            if entity.entity_kind is EntityKind.CALL_REF:
                src = _enclosing_function_node(g, scope_nodes, path, entity.enclosing)
                if src is None:
                    continue  # module- or class-level call; CALL is FUNCTION->FUNCTION
                targets = _resolve_by_name(
                    g, g.functions_named(entity.target or ""), src_file, neighbor_files
                )
                if not targets and entity.target not in _BUILTIN_NAMES:
                    sink.warn("graph", f"{path}: unresolvable call {entity.target!r} dropped")
                for dst in targets:
                    add_unique(Edge(src, dst, EdgeKind.CALL))
            elif entity.entity_kind is EntityKind.EXTEND_REF:
                src = scope_nodes.get((path, entity.enclosing or ""))
                if src is None or g.nodes[src].kind is not NodeKind.CLASS:
                    continue
                targets = [
                    dst
                    for dst in _resolve_by_name(
                        g, g.classes_named(entity.target or ""), src_file, neighbor_files
                    )
                    if dst != src
                ]
                if not targets:
                    sink.warn("graph", f"{path}: unresolvable base class {entity.target!r} dropped")
                for dst in targets:
                    add_unique(Edge(src, dst, EdgeKind.EXTEND))

    g.rebuild_indices()
    return g


def _containing_node(
    g: Graph,
    scope_nodes: dict[tuple[str, str], str],
    file_ids: dict[str, str],
    path: str,
    enclosing: str | None,
) -> str:
    """Nearest enclosing node that may legally contain a definition.

    Enclosing FUNCTION scopes are skipped (Table-II containment has no
    FUNCTION parent), climbing until a CLASS or the FILE itself.
    """
    parts = enclosing.split(".") if enclosing else []
    while parts:
        candidate = scope_nodes.get((path, ".".join(parts)))
        if candidate is not None and g.nodes[candidate].kind is NodeKind.CLASS:
            return candidate
        parts.pop()
    return file_ids[path]


def _enclosing_function_node(
    g: Graph, scope_nodes: dict[tuple[str, str], str], path: str, enclosing: str | None
) -> str | None:
    parts = enclosing.split(".") if enclosing else []
    while parts:
        candidate = scope_nodes.get((path, ".".join(parts)))
        if candidate is not None and g.nodes[candidate].kind is NodeKind.FUNCTION:
            return candidate
        parts.pop()
    return None


def _resolve_import(g: Graph, importer: str, target: str) -> str | None:
    """Resolve a dotted import target to a repository file node id."""
    level = len(target) - len(target.lstrip("."))
    dotted = target.lstrip(".")
    if level:
        base = importer.rsplit("/", 1)[0] if "/" in importer else ""
        for _ in range(level - 1):
            base = base.rsplit("/", 1)[0] if "/" in base else ""
    else:
        base = None

    segments = [s for s in dotted.split(".") if s]
    candidates: list[str] = []
    if segments:
        rel = "/".join(segments) + ".py"
        shorter = "/".join(segments[:-1]) + ".py" if len(segments) > 1 else None
        if base is not None:
            prefix = f"{base}/" if base else ""
            candidates = [prefix + rel] + ([prefix + shorter] if shorter else [])
        else:
            candidates = [rel] + ([shorter] if shorter else [])
            # Modules are importable from any package root, so also try the
            # path anchored at each directory level of the repo.
            dirs = sorted({posixpath.dirname(p) for p in g.index_path})
            for d in dirs:
                if d:
                    candidates.append(f"{d}/{rel}")
                    if shorter:
                        candidates.append(f"{d}/{shorter}")
    for candidate in candidates:
        nid = g.index_path.get(candidate)
        if nid is not None:
            return nid
    if len(segments) == 1:
        stem_matches = sorted(
            nid for p, nid in g.index_path.items() if posixpath.splitext(posixpath.basename(p))[0] == segments[0]
        )
        if len(stem_matches) == 1:
            return stem_matches[0]
    return None


def _text_literal_targets(g: Graph, path: str, content: str) -> list[str]:
    """TEXTFILE nodes whose path appears as a string literal in the source."""
    text_by_path = {
        n.path: n.id for n in g.nodes.values() if n.kind is NodeKind.TEXTFILE
    }
    basenames: dict[str, list[str]] = {}
    for p, nid in text_by_path.items():
        basenames.setdefault(posixpath.basename(p), []).append(nid)

    targets: set[str] = set()
    file_dir = posixpath.dirname(path)
    for match in _TEXT_LITERAL_RE.finditer(content):
        literal = normalize_path(match.group(1))
        if not literal or "." not in posixpath.basename(literal):
            continue
        if literal in text_by_path:
            targets.add(text_by_path[literal])
            continue
        joined = normalize_path(posixpath.join(file_dir, literal)) if file_dir else literal
        if joined in text_by_path:
            targets.add(text_by_path[joined])
            continue
        owners = basenames.get(posixpath.basename(literal), [])
        if len(owners) == 1 and "/" not in literal:
            targets.add(owners[0])
    return sorted(targets)


def _resolve_by_name(
    g: Graph, named: list[str], src_file: str, imported: set[str]
) -> list[str]:
    """Name-based reference resolution: same-file and imported-file matches
    first, else every global match (over-approximation is localization-safe)."""
    near = [nid for nid in named if g.owning_file(nid) in imported | {src_file}]
    return near if near else named


# ---------------------------------------------------------------------------
# Serialization


def serialize(g: Graph) -> bytes:
    """Canonical JSON document: sorted keys, sorted node/edge lists."""
    doc = {
        "meta": dict(sorted({**g.meta, "format_version": FORMAT_VERSION}.items())),
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "name": n.name,
                "path": n.path,
                "span": list(n.span) if n.span else None,
                "source_text": n.source_text,
                "annotations": [a.to_doc() for a in n.annotations],
            }
            for n in sorted(g.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "kind": e.kind.value}
            for e in sorted(g.edges, key=lambda e: (e.kind.value, e.src, e.dst))
        ],
    }
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def deserialize(data: bytes) -> Graph:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GraphFormatError(f"graph document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != {"meta", "nodes", "edges"}:
        raise GraphFormatError("graph document must have exactly the keys {meta, nodes, edges}")
    meta = doc["meta"]
    if meta.get("format_version") != FORMAT_VERSION:
        raise GraphFormatError(f"unsupported format_version {meta.get('format_version')!r}")

    g = Graph()
    g.meta = {k: v for k, v in meta.items() if k != "format_version"}
    for record in doc["nodes"]:
        try:
            node = Node(
                id=record["id"],
                kind=NodeKind(record["kind"]),
                name=record["name"],
                path=record["path"],
                span=tuple(record["span"]) if record.get("span") else None,
                source_text=record.get("source_text"),
                annotations=[Annotation.from_doc(a) for a in record.get("annotations", [])],
            )
        except (KeyError, ValueError) as exc:
            raise GraphFormatError(f"bad node record {record.get('id', record)!r}: {exc}") from None
        if node.id in g.nodes:
            raise GraphFormatError(f"duplicate node id {node.id}")
        g.nodes[node.id] = node
    for i, record in enumerate(doc["edges"]):
        try:
            edge = Edge(record["src"], record["dst"], EdgeKind(record["kind"]))
        except (KeyError, ValueError) as exc:
            raise GraphFormatError(f"bad edge record #{i}: {exc}") from None
        for endpoint in (edge.src, edge.dst):
            if endpoint not in g.nodes:
                raise GraphFormatError(
                    f"edge {edge.src}->{edge.dst} ({edge.kind.value}) references unknown node {endpoint}"
                )
        g.edges.append(edge)
    g.rebuild_indices()
    return g


# ---------------------------------------------------------------------------
# Invariants


def verify_graph(g: Graph) -> None:
    """Raise GraphInvariantError unless all structural invariants hold."""
    repo_nodes = [n for n in g.nodes.values() if n.kind is NodeKind.REPO]
    if len(repo_nodes) != 1:
        raise GraphInvariantError(f"expected exactly one REPO node, found {len(repo_nodes)}")
    repo = repo_nodes[0]

    contain = [e for e in g.edges if e.kind is EdgeKind.CONTAIN]
    if len(contain) != len(g.nodes) - 1:
        raise GraphInvariantError(
            f"CONTAIN is not a tree: {len(contain)} edges for {len(g.nodes)} nodes"
        )
    parents: dict[str, str] = {}
    for e in contain:
        if e.dst in parents:
            raise GraphInvariantError(f"node {e.dst} has multiple CONTAIN parents")
        parents[e.dst] = e.src
    if repo.id in parents:
        raise GraphInvariantError("REPO node has a CONTAIN parent")
    for nid in g.nodes:
        if nid == repo.id:
            continue
        seen: set[str] = set()
        current = nid
        while current != repo.id:
            if current in seen:
                raise GraphInvariantError(f"CONTAIN cycle through node {current}")
            seen.add(current)
            if current not in parents:
                raise GraphInvariantError(f"node {current} is not reachable from REPO")
            current = parents[current]

    for n in g.nodes.values():
        if n.kind is not NodeKind.REPO and not n.path:
            raise GraphInvariantError(f"{n.kind.value} node {n.id} has an empty path")

    for e in g.edges:
        src, dst = g.nodes[e.src], g.nodes[e.dst]
        if e.kind is EdgeKind.CONTAIN:
            allowed = _CONTAIN_PARENTS.get(dst.kind, frozenset())
            if src.kind not in allowed:
                raise GraphInvariantError(
                    f"illegal CONTAIN {src.kind.value}->{dst.kind.value} ({src.path} -> {dst.path})"
                )
        elif e.kind is EdgeKind.CALL:
            if src.kind is not NodeKind.FUNCTION or dst.kind is not NodeKind.FUNCTION:
                raise GraphInvariantError(f"illegal CALL {src.kind.value}->{dst.kind.value}")
        elif e.kind is EdgeKind.IMPORT:
            if src.kind is not NodeKind.FILE or dst.kind not in FILE_KINDS:
                raise GraphInvariantError(f"illegal IMPORT {src.kind.value}->{dst.kind.value}")
        elif e.kind is EdgeKind.EXTEND:
            if src.kind is not NodeKind.CLASS or dst.kind is not NodeKind.CLASS:
                raise GraphInvariantError(f"illegal EXTEND {src.kind.value}->{dst.kind.value}")

    fresh = Graph()
    fresh.nodes = g.nodes
    fresh.edges = g.edges
    fresh.rebuild_indices()
    if (
        fresh.index_path != g.index_path
        or fresh.index_name != g.index_name
        or fresh.index_annotation != g.index_annotation
    ):
        raise GraphInvariantError("lookup indices are inconsistent with nodes and edges")


def graphs_equal(a: Graph, b: Graph) -> bool:
    """Structural equality: same node contents and same edge multiset."""
    if set(a.nodes) != set(b.nodes):
        return False
    for nid, node in a.nodes.items():
        other = b.nodes[nid]
        if (
            node.kind is not other.kind
            or node.name != other.name
            or node.path != other.path
            or node.span != other.span
            or node.source_text != other.source_text
            or node.annotations != other.annotations
        ):
            return False
    return sorted(a.edges, key=lambda e: (e.kind.value, e.src, e.dst)) == sorted(
        b.edges, key=lambda e: (e.kind.value, e.src, e.dst)
    ) and a.meta == b.meta
