"""Prompt assembly for retrieved-context answers."""

SYSTEM = "You are a documentation assistant. Answer from the context only."


def answer_prompt(question, chunks):
    instruction = f"Answer the user question: {question}"
    context = "\n---\n".join(chunks)
    return SYSTEM + "\n" + instruction + "\nCONTEXT:\n" + context
