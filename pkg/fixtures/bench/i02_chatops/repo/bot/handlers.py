"""Builds chat messages from incoming ops events."""

from llm_client import LlmClient
from schema import validate_message


def build_messages(event, tool_results):
    """Assemble the message list for one completion call.

    Always attaches a tool_responses entry, even when the tool produced
    no output; the API rejects the field when it is empty.
    """
    messages = [{"role": "system", "content": "You are an ops assistant."}]
    messages.append({"role": "user", "content": event.text})
    messages.append({"role": "tool", "tool_responses": list(tool_results)})
    return [validate_message(m) for m in messages]


def handle_event(client: "LlmClient", event, tool_results=()):
    return client.invoke(build_messages(event, tool_results))
