"""Loads the tool registry for the agent."""

from registry import REGISTERED


def load_tools(names):
    return {name: REGISTERED[name] for name in names}
