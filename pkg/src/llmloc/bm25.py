"""BM25 lexical scoring for candidate re-ranking.

Documents are tokenized on whitespace and punctuation (``\\w+`` runs),
case-sensitively: queries are code identifiers. IDF uses the conventional
log((N - n + 0.5) / (n + 0.5) + 1) form, so scores are non-negative.
"""

from __future__ import annotations

import math
import re
from collections import Counter

_TOKEN_RE = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def bm25_scores(
    query_terms: list[str],
    documents: list[str],
    k1: float = 1.2,
    b: float = 0.75,
) -> list[float]:
    """One score per document for the given query term sequence."""
    if not documents:
        return []
    docs = [tokenize(d) for d in documents]
    n_docs = len(docs)
    doc_lens = [len(d) for d in docs]
    avgdl = sum(doc_lens) / n_docs
    term_freqs = [Counter(d) for d in docs]

    doc_freq: Counter = Counter()
    for tf in term_freqs:
        doc_freq.update(tf.keys())

    scores = []
    for tf, dl in zip(term_freqs, doc_lens):
        score = 0.0
        for term in query_terms:
            f = tf.get(term, 0)
            if f == 0:
                continue
            idf = math.log((n_docs - doc_freq[term] + 0.5) / (doc_freq[term] + 0.5) + 1.0)
            score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * dl / avgdl))
        scores.append(score)
    return scores
