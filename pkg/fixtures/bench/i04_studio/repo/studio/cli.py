"""Studio launcher."""

from token_counter import count_tokens


def main():
    print("studio starting;", count_tokens("warmup"), "tokens")
