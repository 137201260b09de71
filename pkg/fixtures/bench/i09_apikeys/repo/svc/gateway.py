"""HTTP gateway for completions."""

import requests

from auth import api_key


def complete(prompt, model_name="gpt-4o-mini", temperature=0.0):
    response = requests.post(
        "https://api.openai.com/v1/chat/completions",
        headers={"Authorization": f"Bearer {api_key()}"},
        json={
            "model": model_name,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        },
    )
    if response.status_code == 401:
        raise PermissionError("completion endpoint rejected the api_key")
    return response.json()
