"""Repository scanning and syntax-entity extraction.

Walks a repository tree, keeps files that survive the four filter rules
(directory exclusion, extension allowlist, auxiliary-file exclusion,
hidden-file exclusion) and parses source files into flat entity lists
ready for graph construction.

The parser is pluggable: any callable taking (content, grammar id) and
returning SyntaxEntity lists can be bound. The default binding parses the
single supported source grammar ("python") with the stdlib ``ast`` module.
"""

from __future__ import annotations

import ast
import os
import posixpath
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from llmloc.diagnostics import DiagnosticSink

DEFAULT_SOURCE_EXTENSIONS = frozenset({".py"})
DEFAULT_TEXT_EXTENSIONS = frozenset({".yaml", ".yml", ".json", ".jinja2", ".txt", ".toml", ".md"})
DEFAULT_EXCLUDED_DIRS = frozenset({"__pycache__", ".git", ".venv", "venv", "node_modules", ".idea", ".vscode"})
DEFAULT_EXCLUDED_FILES = frozenset({"setup.py"})

# Files above this size become leaf nodes without entity extraction.
MAX_PARSE_BYTES = 1 << 20


class IngestError(Exception):
    """Fatal ingest failure (unreadable root, invalid config)."""


class EntityKind(Enum):
    CLASS = "class"
    FUNCTION = "function"
    ATTRIBUTE = "attribute"
    IMPORT_REF = "import_ref"
    CALL_REF = "call_ref"
    EXTEND_REF = "extend_ref"


DEFINITION_KINDS = frozenset({EntityKind.CLASS, EntityKind.FUNCTION, EntityKind.ATTRIBUTE})


@dataclass(frozen=True)
class SyntaxEntity:
    """One definition or reference extracted from a source file.

    ``enclosing`` is the dotted path of the surrounding definitions
    (e.g. ``"Outer.method"``), None at module level. ``target`` carries
    the raw reference string for *_ref kinds and is None for definitions.
    """

    entity_kind: EntityKind
    name: str
    span: tuple[int, int]
    enclosing: str | None = None
    target: str | None = None

    def __post_init__(self) -> None:
        if self.span[0] > self.span[1]:
            raise ValueError(f"inverted span {self.span} for {self.name or self.target}")
        if self.entity_kind in DEFINITION_KINDS and not self.name:
            raise ValueError(f"{self.entity_kind.value} entity with empty name")
        if self.entity_kind not in DEFINITION_KINDS and not self.target:
            raise ValueError(f"{self.entity_kind.value} entity with empty target")


@dataclass(frozen=True)
class FileRecord:
    """One repository file that survived filtering."""

    path: str  # repository-relative, forward slashes, no . or .. segments
    kind: str  # "source" | "text"
    byte_length: int
    line_count: int
    content: str


@dataclass(frozen=True)
class IngestConfig:
    source_extensions: frozenset[str] = DEFAULT_SOURCE_EXTENSIONS
    text_extensions: frozenset[str] = DEFAULT_TEXT_EXTENSIONS
    excluded_dirs: frozenset[str] = DEFAULT_EXCLUDED_DIRS
    excluded_files: frozenset[str] = DEFAULT_EXCLUDED_FILES
    # __init__.py is kept only when parsing finds at least one definition.
    prune_empty_init: bool = True

    def __post_init__(self) -> None:
        overlap = self.source_extensions & self.text_extensions
        if overlap:
            raise IngestError(f"source/text extension allowlists overlap: {sorted(overlap)}")


def normalize_path(path: str) -> str:
    """Normalize to forward slashes with no ``.``/``..`` segments."""
    cleaned = posixpath.normpath(path.replace("\\", "/"))
    if cleaned in (".", "/"):
        return ""
    return cleaned.lstrip("/")


def _is_hidden(rel_parts: tuple[str, ...]) -> bool:
    return any(part.startswith(".") for part in rel_parts)


def scan_repository(
    root: str | Path,
    cfg: IngestConfig | None = None,
    sink: DiagnosticSink | None = None,
) -> list[FileRecord]:
    """Walk ``root`` and return the filtered files, sorted by path."""
    cfg = cfg or IngestConfig()
    sink = sink if sink is not None else DiagnosticSink()
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"repository root is not a readable directory: {root}")

    records: list[FileRecord] = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(
            d for d in dirnames if d not in cfg.excluded_dirs and not d.startswith(".")
        )
        for filename in sorted(filenames):
            if filename.startswith(".") or filename in cfg.excluded_files:
                continue
            ext = posixpath.splitext(filename)[1]
            if ext in cfg.source_extensions:
                kind = "source"
            elif ext in cfg.text_extensions:
                kind = "text"
            else:
                continue
            full = Path(dirpath) / filename
            rel = normalize_path(str(full.relative_to(root)))
            if _is_hidden(tuple(rel.split("/"))):
                continue
            try:
                raw = full.read_bytes()
                content = raw.decode("utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                sink.warn("ingest", f"skipping unreadable file {rel}: {exc}")
                continue
            record = FileRecord(
                path=rel,
                kind=kind,
                byte_length=len(raw),
                line_count=len(content.splitlines()),
                content=content,
            )
            if filename == "__init__.py" and cfg.prune_empty_init:
                entities = parse_file(record, sink=DiagnosticSink())
                if not any(e.entity_kind in DEFINITION_KINDS for e in entities):
                    continue
            records.append(record)
    records.sort(key=lambda r: r.path)
    return records


# ---------------------------------------------------------------------------
# Parsing


class _EntityCollector(ast.NodeVisitor):
    """Collects definitions and references with enclosing-scope paths."""

    def __init__(self) -> None:
        self.entities: list[SyntaxEntity] = []
        self._scopes: list[tuple[str, str]] = []  # (name, "class"|"function")

    def _scope_path(self) -> str | None:
        return ".".join(name for name, _ in self._scopes) or None

    def _enclosing_function(self) -> str | None:
        if self._scopes and self._scopes[-1][1] == "function":
            return self._scope_path()
        return None

    def _span(self, node: ast.AST) -> tuple[int, int]:
        return (node.lineno, getattr(node, "end_lineno", node.lineno) or node.lineno)

    def _add(self, kind: EntityKind, node: ast.AST, *, name: str = "", target: str | None = None) -> None:
        self.entities.append(
            SyntaxEntity(kind, name, self._span(node), enclosing=self._scope_path(), target=target)
        )

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self._add(EntityKind.CLASS, node, name=node.name)
        self._scopes.append((node.name, "class"))
        for base in node.bases:
            base_name = _reference_name(base)
            if base_name:
                self._add(EntityKind.EXTEND_REF, base, target=base_name)
        for child in node.body:
            self.visit(child)
        for deco in node.decorator_list:
            self.visit(deco)
        self._scopes.pop()

    def _visit_function(self, node: ast.FunctionDef | ast.AsyncFunctionDef) -> None:
        self._add(EntityKind.FUNCTION, node, name=node.name)
        self._scopes.append((node.name, "function"))
        for child in node.body:
            self.visit(child)
        self._scopes.pop()
        for deco in node.decorator_list:
            self.visit(deco)

    visit_FunctionDef = _visit_function
    visit_AsyncFunctionDef = _visit_function

    def visit_Assign(self, node: ast.Assign) -> None:
        self._add_assignment_targets(node, node.targets)
        self.visit(node.value)

    def visit_AnnAssign(self, node: ast.AnnAssign) -> None:
        self._add_assignment_targets(node, [node.target])
        if node.value is not None:
            self.visit(node.value)

    def _add_assignment_targets(self, node: ast.AST, targets: list[ast.expr]) -> None:
        # Only module-level and class-body assignments define attributes.
        if self._scopes and self._scopes[-1][1] == "function":
            return
        for target in targets:
            for name_node in _flatten_targets(target):
                self._add(EntityKind.ATTRIBUTE, node, name=name_node.id)

    def visit_Import(self, node: ast.Import) -> None:
        for alias in node.names:
            self._add(EntityKind.IMPORT_REF, node, target=alias.name)

    def visit_ImportFrom(self, node: ast.ImportFrom) -> None:
        prefix = "." * node.level + (node.module or "")
        for alias in node.names:
            target = f"{prefix}.{alias.name}" if prefix and alias.name != "*" else prefix or alias.name
            self._add(EntityKind.IMPORT_REF, node, target=target)

    def visit_Call(self, node: ast.Call) -> None:
        callee = _reference_name(node.func)
        if callee:
            self._add(EntityKind.CALL_REF, node, target=callee)
        self.generic_visit(node)


def _flatten_targets(target: ast.expr) -> list[ast.Name]:
    if isinstance(target, ast.Name):
        return [target]
    if isinstance(target, (ast.Tuple, ast.List)):
        names: list[ast.Name] = []
        for element in target.elts:
            names.extend(_flatten_targets(element))
        return names
    return []


def _reference_name(node: ast.expr) -> str | None:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    if isinstance(node, ast.Subscript):
        return _reference_name(node.value)
    return None


def parse_python(content: str) -> list[SyntaxEntity]:
    """Parse one source file; raises SyntaxError on unparseable input."""
    tree = ast.parse(content)
    collector = _EntityCollector()
    for child in tree.body:
        collector.visit(child)
    return collector.entities


Parser = Callable[[str, str], "list[SyntaxEntity]"]


def _default_parser(content: str, grammar: str) -> list[SyntaxEntity]:
    if grammar != "python":
        raise ValueError(f"no grammar bound for {grammar!r}")
    return parse_python(content)


def parse_file(
    file: FileRecord,
    sink: DiagnosticSink | None = None,
    parser: Parser = _default_parser,
) -> list[SyntaxEntity]:
    """Extract entities from a source file; text files yield no entities.

    Unparseable or oversized files degrade to an empty entity list with a
    diagnostic — never a fatal error.
    """
    sink = sink if sink is not None else DiagnosticSink()
    if file.kind != "source":
        return []
    if file.byte_length > MAX_PARSE_BYTES:
        sink.warn("parse", f"{file.path}: {file.byte_length} bytes exceeds parse cap, kept as leaf")
        return []
    try:
        return parser(file.content, "python")
    except SyntaxError as exc:
        sink.warn("parse", f"{file.path}: unparseable ({exc.msg} at line {exc.lineno})")
        return []
