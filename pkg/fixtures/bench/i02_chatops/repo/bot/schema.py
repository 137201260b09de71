"""Message schema checks."""

ALLOWED_ROLES = {"system", "user", "assistant", "tool"}


def validate_message(message):
    if message.get("role") not in ALLOWED_ROLES:
        raise ValueError(f"bad role: {message.get('role')}")
    return message
