"""Runtime configuration loaded from config.yaml."""

import yaml

DEFAULTS = {
    "model_name": "gpt-4o-mini",
    "temperature": 0.0,
    "max_tokens": 2048,
    "language": "english",
}


class Config:
    """Research agent settings; values in config.yaml override DEFAULTS."""

    def __init__(self, path="config.yaml"):
        settings = dict(DEFAULTS)
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError:
            loaded = {}
        for key, value in loaded.items():
            settings[key.lower()] = value
        self.model_name = settings["model_name"]
        self.temperature = settings["temperature"]
        self.max_tokens = settings["max_tokens"]
        self.language = settings["language"]
