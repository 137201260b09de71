"""Completion client that parses the model's JSON reply."""

import json


class SummaryClient:
    """Requests a JSON summary and reads fixed keys from the reply.

    The model was migrated to a schema that returns {"text": ...} but
    this parser still reads the legacy "summary" key.
    """

    def __init__(self, transport, model_name="gpt-4o-mini", temperature=0.0):
        self.transport = transport
        self.model_name = model_name
        self.temperature = temperature

    def summarize(self, document):
        reply = self.transport.invoke(
            f"Return a JSON object summarizing:\n{document}"
        )
        parsed = json.loads(reply)
        return parsed["summary"]
