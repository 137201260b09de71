"""Pattern library: per-role regex patterns, matching and seed scoring.

The library holds default patterns (curated from popular LLM frameworks,
shipped as a versioned data file) plus learned patterns appended from
validated annotation keywords. Matching is case-sensitive: the keywords
are code identifiers.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path


class AnnotationType(Enum):
    LLM_PROMPT = "LLM_PROMPT"
    LLM_CALL = "LLM_CALL"
    LLM_CONFIG = "LLM_CONFIG"
    LLM_TOOL = "LLM_TOOL"
    LLM_MEMORY = "LLM_MEMORY"


ANNOTATION_TYPE_COUNT = len(AnnotationType)


class PatternFormatError(Exception):
    """Malformed persisted pattern library."""


def keyword_to_pattern(keyword: str) -> str:
    """Regex text for a literal keyword: escaped, word-bounded at ends that
    are word characters (a boundary next to a non-word character never
    matches, so those ends stay bare)."""
    if not keyword:
        raise ValueError("empty keyword")
    pattern = re.escape(keyword)
    if re.match(r"\w", keyword[0]):
        pattern = r"\b" + pattern
    if re.match(r"\w", keyword[-1]):
        pattern = pattern + r"\b"
    return pattern


def _added_at_now() -> str:
    """Timestamp for learned entries; honors SOURCE_DATE_EPOCH so replayed
    pipeline runs write byte-identical libraries."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp))


@dataclass(frozen=True)
class PatternEntry:
    annotation_type: AnnotationType
    keyword: str
    regex_source: str
    origin: str  # "default" | "learned"
    added_at: str = ""

    def compiled(self) -> re.Pattern:
        return _compile(self.regex_source)


@lru_cache(maxsize=4096)
def _compile(regex_source: str) -> re.Pattern:
    return re.compile(regex_source)


@dataclass
class MatchProfile:
    counts: dict[AnnotationType, int]
    total_matches: int
    file_line_count: int


@dataclass(frozen=True)
class SeedScoreConfig:
    w_c: float = 0.7
    w_d: float = 0.3

    def __post_init__(self) -> None:
        if self.w_c < 0 or self.w_d < 0:
            raise ValueError("seed score weights must be non-negative")


def coverage(profile: MatchProfile) -> float:
    """Fraction of the five annotation types with at least one match."""
    return sum(1 for c in profile.counts.values() if c > 0) / ANNOTATION_TYPE_COUNT


def density(profile: MatchProfile) -> float:
    """Matches per line, capped at 1 so the seed score stays in [0,1]."""
    return min(1.0, profile.total_matches / max(1, profile.file_line_count))


def seed_score(profile: MatchProfile, cfg: SeedScoreConfig | None = None) -> float:
    cfg = cfg or SeedScoreConfig()
    return cfg.w_c * coverage(profile) + cfg.w_d * density(profile)


class PatternLibrary:
    def __init__(self, entries: list[PatternEntry] | None = None) -> None:
        self.entries: list[PatternEntry] = list(entries or [])

    # -- matching ------------------------------------------------------

    def match_text(self, content: str, line_count: int) -> MatchProfile:
        counts = {t: 0 for t in AnnotationType}
        for entry in self.entries:
            hits = len(entry.compiled().findall(content))
            counts[entry.annotation_type] += hits
        return MatchProfile(counts, sum(counts.values()), line_count)

    def match_file(self, file) -> MatchProfile:
        """Accepts anything with .content and .line_count (FileRecord)."""
        return self.match_text(file.content, file.line_count)

    # -- learned entries -------------------------------------------------

    def keywords(self) -> list[str]:
        """All keywords in canonical (type, keyword) order."""
        return [e.keyword for e in sorted(self.entries, key=lambda e: (e.annotation_type.value, e.keyword))]

    def learned_entries(self) -> list[PatternEntry]:
        return sorted(
            (e for e in self.entries if e.origin == "learned"),
            key=lambda e: (e.annotation_type.value, e.keyword),
        )

    def add_learned(self, validated_keywords: list[tuple[AnnotationType, str]]) -> "PatternLibrary":
        """Append learned entries, skipping exact duplicates and merging
        prefix-related learned keywords of the same type into the shorter one."""
        for annotation_type, keyword in sorted(set(validated_keywords), key=lambda p: (p[0].value, p[1])):
            if not keyword:
                continue
            if any(e.annotation_type is annotation_type and e.keyword == keyword for e in self.entries):
                continue
            siblings = [
                e
                for e in self.entries
                if e.origin == "learned" and e.annotation_type is annotation_type
            ]
            covered = False
            for sibling in siblings:
                if keyword.startswith(sibling.keyword):
                    covered = True  # an existing shorter prefix already matches
                    break
                if sibling.keyword.startswith(keyword):
                    self.entries.remove(sibling)  # new keyword is the shorter form
            if covered:
                continue
            self.entries.append(
                PatternEntry(
                    annotation_type,
                    keyword,
                    keyword_to_pattern(keyword),
                    origin="learned",
                    added_at=_added_at_now(),
                )
            )
        return self


# ---------------------------------------------------------------------------
# Persistence

LIBRARY_VERSION = 1


@lru_cache(maxsize=1)
def _default_entries() -> tuple[PatternEntry, ...]:
    raw = resources.files("llmloc.data").joinpath("default_patterns.json").read_text("utf-8")
    doc = json.loads(raw)
    entries = []
    for type_name in sorted(doc["defaults"]):
        annotation_type = AnnotationType(type_name)
        for keyword in doc["defaults"][type_name]:
            entries.append(
                PatternEntry(annotation_type, keyword, keyword_to_pattern(keyword), origin="default")
            )
    return tuple(entries)


def default_library() -> PatternLibrary:
    return PatternLibrary(list(_default_entries()))


def load_library(path: str | Path) -> PatternLibrary:
    """Defaults merged with the persisted learned set; missing file -> defaults."""
    library = default_library()
    path = Path(path)
    if not path.exists():
        return library
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PatternFormatError(f"cannot read pattern library {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != LIBRARY_VERSION:
        raise PatternFormatError(f"{path}: unsupported pattern library version {doc.get('version')!r}")
    for record in doc.get("learned", []):
        try:
            annotation_type = AnnotationType(record["annotation_type"])
            keyword = record["keyword"]
            regex_source = record.get("regex_source") or keyword_to_pattern(keyword)
            re.compile(regex_source)
        except (KeyError, ValueError, TypeError, re.error) as exc:
            raise PatternFormatError(f"{path}: bad learned pattern record {record!r}: {exc}") from None
        library.entries.append(
            PatternEntry(annotation_type, keyword, regex_source, "learned", record.get("added_at", ""))
        )
    return library


def save_library(library: PatternLibrary, path: str | Path) -> None:
    """Persist learned entries only; defaults ship with the package."""
    doc = {
        "version": LIBRARY_VERSION,
        "learned": [
            {
                "annotation_type": e.annotation_type.value,
                "keyword": e.keyword,
                "regex_source": e.regex_source,
                "added_at": e.added_at,
            }
            for e in library.learned_entries()
        ],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8")
