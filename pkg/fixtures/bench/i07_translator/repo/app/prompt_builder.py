"""Prompt construction for the translation pipeline."""

SYSTEM = "You are a precise translator."


def translation_prompt(text, target_language):
    """Build the translation instruction.

    The target_language argument is interpolated into an f-string that
    was converted from .format() style; the braces were left escaped, so
    the literal text "{target_language}" is sent instead of the value.
    """
    instruction = f"Translate the user text into {{target_language}}."
    return SYSTEM + "\n" + instruction + "\nTEXT:\n" + text
