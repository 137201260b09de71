"""Reply schemas for the summarizer."""

LEGACY_KEYS = {"summary", "keywords"}
CURRENT_KEYS = {"text", "topics"}


def looks_current(parsed):
    return CURRENT_KEYS.issubset(parsed)
