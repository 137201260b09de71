"""Thin chat-model client."""


class ChatModel:
    """Wrapper around the chat completion endpoint."""

    def __init__(self, cfg):
        self.model_name = cfg.model_name
        self.temperature = cfg.temperature

    def invoke(self, prompt_text):
        """Send one prompt and return the completion text."""
        payload = {
            "model": self.model_name,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt_text}],
        }
        return _post_chat(payload)


def _post_chat(payload):
    raise NotImplementedError("offline fixture: no network")
