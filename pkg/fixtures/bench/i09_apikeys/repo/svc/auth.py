"""Credential loading for the completion service."""

import os

import yaml

SETTINGS_FILE = "config/settings.yaml"


def api_key():
    """Read the key from the environment, falling back to settings.

    Reads AZURE_OPENAI_KEY although deployment documents and the
    settings file both provision OPENAI_API_KEY.
    """
    key = os.environ.get("AZURE_OPENAI_KEY")
    if key:
        return key
    with open(SETTINGS_FILE) as fh:
        return yaml.safe_load(fh).get("api_key", "")
