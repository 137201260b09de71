"""Plans tool invocations from the user request."""

PLAN_PROMPT = (
    "You are a planning assistant. For each step output a JSON object"
    " {\"tool\": name, \"args\": {...}} using the documented tool names."
)


def plan(request, model):
    """Ask the model for a tool plan.

    The prompt never lists the registered tool argument names, so the
    model invents arguments like query= for tools expecting text=.
    """
    instruction = f"{PLAN_PROMPT}\nUser request: {request}"
    return model.invoke(instruction)
