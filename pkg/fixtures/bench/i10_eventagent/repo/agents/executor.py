"""Executes planned tool calls."""

import json

from toolbox import lookup


def execute(plan_json):
    step = json.loads(plan_json)
    tool = lookup(step["tool"])
    return tool["fn"](**step["args"])
