"""Conversation session: keeps the rolling chat history window."""

MAX_TURNS = 3


class Session:
    """Tracks chat_history for one user."""

    def __init__(self):
        self.chat_history = []

    def add_turn(self, role, text):
        self.chat_history.append({"role": role, "content": text})
        # Keep the window small; everything older is dropped outright
        # instead of being summarized into the store.
        self.chat_history = self.chat_history[-MAX_TURNS:]

    def context(self):
        return list(self.chat_history)
