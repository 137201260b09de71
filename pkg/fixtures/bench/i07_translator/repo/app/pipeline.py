"""Translation pipeline entry point."""

from prompt_builder import translation_prompt
from settings import target_language


def translate(text, model, overrides=None):
    prompt = translation_prompt(text, target_language(overrides))
    result = model.invoke(prompt)
    if not result:
        raise RuntimeError("empty completion")
    return result
