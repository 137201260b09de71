"""Summarizer app wiring."""

from client import SummaryClient


def summarize_file(path, transport):
    with open(path) as fh:
        return SummaryClient(transport).summarize(fh.read())
