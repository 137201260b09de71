"""Prompt templates for research report generation."""

REPORT_STYLE_INSTRUCTION = (
    "You are a research assistant. Write a structured report with an"
    " introduction, findings and a conclusion."
)


def generate_report_prompt(question, context, language):
    """Prompt for the main research report."""
    system = REPORT_STYLE_INSTRUCTION
    instruction = (
        f"Using the context below, answer the research question"
        f' "{question}" in {language}.'
    )
    return system + "\n" + instruction + "\n\nCONTEXT:\n" + context


def generate_subtopic_report_prompt(main_topic, subtopic, context):
    """Prompt for one subtopic section.

    Unlike generate_report_prompt this builder never receives the
    configured language, so subtopic sections fall back to English.
    """
    system = REPORT_STYLE_INSTRUCTION
    prompt = (
        f'Write the section "{subtopic}" of a report about "{main_topic}".'
        " Keep the same user-facing structure as the main report."
    )
    return system + "\n" + prompt + "\n\nCONTEXT:\n" + context
