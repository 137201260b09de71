"""Vector store wrapper for long-term recall."""


class VectorStore:
    """Embedding-backed retriever for older conversation chunks."""

    def __init__(self):
        self.chunks = []

    def add(self, text):
        self.chunks.append(text)

    def search(self, query, k=2):
        return self.chunks[-k:]
