"""Versioned prompt templates.

Templates use string.Template ``${name}`` placeholders; substitution is a
single pass, so inserted file content is never re-scanned for markers.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from string import Template


def load_template(template_id: str, prompts_dir: str | Path | None = None) -> str:
    """Template text for e.g. ``"annotate.v1"``; an override directory wins
    over the packaged templates."""
    filename = f"{template_id}.txt"
    if prompts_dir is not None:
        override = Path(prompts_dir) / filename
        if override.exists():
            return override.read_text("utf-8")
    return resources.files("llmloc.prompts").joinpath(filename).read_text("utf-8")


def render(template_text: str, **values: str) -> str:
    return Template(template_text).substitute(**values)
