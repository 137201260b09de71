"""In-memory vector store used by the character service."""


class VectorStore:
    """Tiny similarity store; keeps every chat turn."""

    def __init__(self):
        self.entries = []

    def add(self, text):
        self.entries.append(text)

    def similarity_search(self, query):
        return self.entries[-3:]


def build_vector_store(settings):
    store = VectorStore()
    store.add("bootstrap context")
    return store
