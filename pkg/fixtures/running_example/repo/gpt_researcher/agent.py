"""Research agent orchestrating report generation."""

from config import Config
from llm import ChatModel
from prompts import generate_report_prompt, generate_subtopic_report_prompt


class ResearchAgent:
    """Runs a research task and assembles the final report."""

    def __init__(self):
        self.cfg = Config()
        self.model = ChatModel(self.cfg)

    def run(self, question, context, subtopics):
        report = self.model.invoke(
            generate_report_prompt(question, context, self.cfg.language)
        )
        sections = []
        for subtopic in subtopics:
            section_prompt = generate_subtopic_report_prompt(
                question, subtopic, context, language=self.cfg.language
            )
            sections.append(self.model.invoke(section_prompt))
        return report + "\n" + "\n".join(sections)
