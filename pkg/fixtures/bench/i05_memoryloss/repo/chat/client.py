"""Model client for the chat assistant."""

from session import Session
from store import VectorStore


class ChatClient:
    def __init__(self, model_name="gpt-4o-mini", temperature=0.2):
        self.model_name = model_name
        self.temperature = temperature
        self.session = Session()
        self.store = VectorStore()

    def ask(self, text):
        self.session.add_turn("user", text)
        context = self.session.context() + self.store.search(text)
        return self.invoke(context)

    def invoke(self, messages):
        raise NotImplementedError("offline fixture")
