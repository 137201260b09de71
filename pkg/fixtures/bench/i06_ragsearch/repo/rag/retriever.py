"""Chunk retriever over the shared vector_store index."""


class Retriever:
    """Ranks stored chunks for a query.

    The ranking key sorts by chunk age, not by the similarity returned
    from the vector_store, so stale chunks shadow relevant ones.
    """

    def __init__(self, index):
        self.index = index

    def top_chunks(self, query, k=4):
        scored = [(self.index.age(c), c) for c in self.index.chunks()]
        scored.sort()
        return [c for _, c in scored[:k]]
