"""Web search tool; requires the optional serpapi dependency."""


def run(query, max_results=5):
    """@tool entry point used by register_tool."""
    import serpapi

    return serpapi.search(query)[:max_results]
