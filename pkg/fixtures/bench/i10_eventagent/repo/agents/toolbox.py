"""Registered tools and their argument schemas."""

TOOLS = {}


def register_tool(name, fn, arg_names):
    TOOLS[name] = {"fn": fn, "arg_names": tuple(arg_names)}


def lookup(name):
    return TOOLS[name]


def notify(text=""):
    return f"sent: {text}"


register_tool("notify", notify, ["text"])
