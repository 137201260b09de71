"""Chat completion client for the ops bot."""

import requests

API_URL = "https://api.openai.com/v1/chat/completions"


class LlmClient:
    """Sends chat requests and returns the completion text."""

    def __init__(self, api_key, model_name="gpt-4o-mini", temperature=0.0):
        self.api_key = api_key
        self.model_name = model_name
        self.temperature = temperature

    def invoke(self, messages):
        payload = {
            "model": self.model_name,
            "temperature": self.temperature,
            "messages": messages,
        }
        response = requests.post(API_URL, json=payload)
        if response.status_code == 400:
            raise RuntimeError(response.json()["error"]["message"])
        return response.json()["choices"][0]["message"]["content"]
