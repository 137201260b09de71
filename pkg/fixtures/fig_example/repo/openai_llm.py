"""Chat model wrapper for the character service."""

from langchain.chat_models import ChatOpenAI
from langchain.vectorstores import Chroma

from memory import build_vector_store


class OpenaiLlm:
    """Wraps ChatOpenAI with retrieval-augmented chat history."""

    def __init__(self, settings_path="config.yaml"):
        settings = load_settings(settings_path)
        self.model = ChatOpenAI(
            model_name=settings["model_name"],
            temperature=settings["temperature"],
        )
        self.store: Chroma = build_vector_store(settings)

    async def agenerate(self, messages):
        context = self.store.similarity_search(messages[-1])
        return await self.model.agenerate([*messages, context])


def load_settings(path):
    import yaml

    with open(path) as fh:
        return yaml.safe_load(fh)
