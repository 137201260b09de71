"""Global configuration: defaults, config-file loading, flag precedence.

The config file is INI-style (key-value pairs in tabular sections); flags
always win over file values, which win over the built-in defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from llmloc.analyzer import AnalyzerConfig
from llmloc.annotate import AnnotatorConfig
from llmloc.ingest import IngestConfig
from llmloc.patterns import SeedScoreConfig
from llmloc.validator import ValidatorConfig


@dataclass(frozen=True)
class GatewaySettings:
    backend: str = "replay"  # "replay" | "http"
    base_url: str = "http://localhost:8000/v1"
    model: str = "replay"
    api_key_env: str = "LLMLOC_API_KEY"
    max_context_tokens: int = 16000
    # model -> (USD per 1k input tokens, USD per 1k output tokens)
    prices: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PathSettings:
    graph: str = "graph.json"
    patterns: str = "patterns.json"
    prompts: str | None = None  # None -> packaged templates
    sessions: str = "sessions"
    runs: str = "runs"


@dataclass(frozen=True)
class GlobalConfig:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    annotator: AnnotatorConfig = field(default_factory=AnnotatorConfig)
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    validator: ValidatorConfig = field(default_factory=ValidatorConfig)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    paths: PathSettings = field(default_factory=PathSettings)

    def snapshot(self) -> dict:
        """Numeric/flag parameters for report reproducibility records."""
        return {
            "k_s": self.annotator.k_s,
            "k_h": self.annotator.k_h,
            "k_e": self.annotator.k_e,
            "k_i": self.analyzer.k_i,
            "k_r": self.analyzer.k_r,
            "w_c": self.annotator.score_cfg.w_c,
            "w_d": self.annotator.score_cfg.w_d,
            "bm25_k1": self.annotator.bm25_k1,
            "bm25_b": self.annotator.bm25_b,
            "max_intermediate": self.validator.max_intermediate,
            "enable_direct": self.analyzer.enable_direct,
            "enable_inference": self.analyzer.enable_inference,
            "enable_retrieval": self.analyzer.enable_retrieval,
            "enable_validator": self.validator.enabled,
        }


# Documented config keys with defaults; also drives --help output.
CONFIG_KEYS = {
    "annotator": {"k_s": 10, "k_h": 1, "k_e": 5, "w_c": 0.7, "w_d": 0.3, "bm25_k1": 1.2, "bm25_b": 0.75},
    "analyzer": {
        "k_i": 5,
        "k_r": 5,
        "enable_direct": True,
        "enable_inference": True,
        "enable_retrieval": True,
    },
    "validator": {"max_intermediate": 2, "enabled": True},
    "gateway": {
        "backend": "replay",
        "base_url": "http://localhost:8000/v1",
        "model": "replay",
        "api_key_env": "LLMLOC_API_KEY",
        "max_context_tokens": 16000,
    },
    "paths": {
        "graph": "graph.json",
        "patterns": "patterns.json",
        "prompts": "",
        "sessions": "sessions",
        "runs": "runs",
    },
    "ingest": {
        "source_extensions": ".py",
        "text_extensions": ".yaml .yml .json .jinja2 .txt .toml .md",
        "excluded_dirs": "__pycache__ .git .venv venv node_modules .idea .vscode",
    },
}


class ConfigError(Exception):
    """Unreadable or inconsistent configuration file."""


def _get(parser: configparser.ConfigParser, section: str, key: str, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            if cast is bool:
                return parser.getboolean(section, key)
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
    return default


def load_config(path: str | Path | None = None) -> GlobalConfig:
    cfg = GlobalConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    ingest = cfg.ingest
    if parser.has_section("ingest"):
        def split_set(key, default):
            if parser.has_option("ingest", key):
                return frozenset(parser.get("ingest", key).split())
            return default

        ingest = IngestConfig(
            source_extensions=split_set("source_extensions", ingest.source_extensions),
            text_extensions=split_set("text_extensions", ingest.text_extensions),
            excluded_dirs=split_set("excluded_dirs", ingest.excluded_dirs),
        )

    annotator = AnnotatorConfig(
        k_s=_get(parser, "annotator", "k_s", int, cfg.annotator.k_s),
        k_h=_get(parser, "annotator", "k_h", int, cfg.annotator.k_h),
        k_e=_get(parser, "annotator", "k_e", int, cfg.annotator.k_e),
        score_cfg=SeedScoreConfig(
            w_c=_get(parser, "annotator", "w_c", float, cfg.annotator.score_cfg.w_c),
            w_d=_get(parser, "annotator", "w_d", float, cfg.annotator.score_cfg.w_d),
        ),
        bm25_k1=_get(parser, "annotator", "bm25_k1", float, cfg.annotator.bm25_k1),
        bm25_b=_get(parser, "annotator", "bm25_b", float, cfg.annotator.bm25_b),
    )
    analyzer = AnalyzerConfig(
        k_i=_get(parser, "analyzer", "k_i", int, cfg.analyzer.k_i),
        k_r=_get(parser, "analyzer", "k_r", int, cfg.analyzer.k_r),
        enable_direct=_get(parser, "analyzer", "enable_direct", bool, True),
        enable_inference=_get(parser, "analyzer", "enable_inference", bool, True),
        enable_retrieval=_get(parser, "analyzer", "enable_retrieval", bool, True),
    )
    validator = ValidatorConfig(
        max_intermediate=_get(parser, "validator", "max_intermediate", int, 2),
        enabled=_get(parser, "validator", "enabled", bool, True),
    )
    prices = {}
    if parser.has_section("prices"):
        for model in parser.options("prices"):
            parts = parser.get("prices", model).split()
            if len(parts) != 2:
                raise ConfigError(f"[prices] {model}: expected '<in_per_1k> <out_per_1k>'")
            prices[model] = (float(parts[0]), float(parts[1]))
    gateway = GatewaySettings(
        backend=_get(parser, "gateway", "backend", str, cfg.gateway.backend),
        base_url=_get(parser, "gateway", "base_url", str, cfg.gateway.base_url),
        model=_get(parser, "gateway", "model", str, cfg.gateway.model),
        api_key_env=_get(parser, "gateway", "api_key_env", str, cfg.gateway.api_key_env),
        max_context_tokens=_get(parser, "gateway", "max_context_tokens", int, cfg.gateway.max_context_tokens),
        prices=prices,
    )
    paths = PathSettings(
        graph=_get(parser, "paths", "graph", str, cfg.paths.graph),
        patterns=_get(parser, "paths", "patterns", str, cfg.paths.patterns),
        prompts=_get(parser, "paths", "prompts", str, "") or None,
        sessions=_get(parser, "paths", "sessions", str, cfg.paths.sessions),
        runs=_get(parser, "paths", "runs", str, cfg.paths.runs),
    )
    return GlobalConfig(ingest, annotator, analyzer, validator, gateway, paths)


def apply_overrides(cfg: GlobalConfig, **overrides) -> GlobalConfig:
    """CLI flag overrides; None values leave the config untouched."""
    annotator = cfg.annotator
    for key in ("k_s", "k_h", "k_e"):
        if overrides.get(key) is not None:
            annotator = replace(annotator, **{key: overrides[key]})
    analyzer = cfg.analyzer
    for key in ("k_i", "k_r", "enable_direct", "enable_inference", "enable_retrieval"):
        if overrides.get(key) is not None:
            analyzer = replace(analyzer, **{key: overrides[key]})
    validator = cfg.validator
    if overrides.get("enable_validator") is not None:
        validator = replace(validator, enabled=overrides["enable_validator"])
    gateway = cfg.gateway
    if overrides.get("backend") is not None:
        gateway = replace(gateway, backend=overrides["backend"])
    return GlobalConfig(cfg.ingest, annotator, analyzer, validator, gateway, cfg.paths)
