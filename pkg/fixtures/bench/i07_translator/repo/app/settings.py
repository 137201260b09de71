"""Pipeline settings."""

DEFAULTS = {
    "model_name": "gpt-4o-mini",
    "temperature": 0.0,
    "target_language": "german",
}


def target_language(overrides=None):
    merged = dict(DEFAULTS)
    merged.update(overrides or {})
    return merged["target_language"]
