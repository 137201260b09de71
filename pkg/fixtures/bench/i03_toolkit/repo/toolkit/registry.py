"""Tool registry; maps tool names to callables for the agent runtime."""

import search_web  # optional dependency, resolved eagerly at import time

REGISTERED = {}


def register_tool(name, fn):
    """Add one callable to the registry (decorator-friendly)."""
    REGISTERED[name] = fn
    return fn


register_tool("search_web", search_web.run)
