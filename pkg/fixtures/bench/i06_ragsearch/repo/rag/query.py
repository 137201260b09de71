"""Query construction for the document assistant."""

from retriever import Retriever
from prompts import answer_prompt


def answer(question, index):
    retriever = Retriever(index)
    chunks = retriever.top_chunks(question)
    return answer_prompt(question, chunks)
