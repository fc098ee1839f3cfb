"""Access to packaged prompt and template text assets."""

from __future__ import annotations

from importlib import resources


def asset_text(name: str) -> str:
    return resources.files("pddlforge").joinpath("assets", name).read_text(encoding="utf-8")


def plan_feedback_template() -> str:
    return asset_text("plan_feedback.txt")


def landmark_feedback_template() -> str:
    return asset_text("landmark_feedback.txt")


def system_prompt() -> str:
    return asset_text("system_prompt.txt")


def context_examples() -> list[tuple[str, str]]:
    """(user, assistant) pairs demonstrating the action response format."""
    return [
        (asset_text("context_example_1_user.txt"), asset_text("context_example_1_assistant.txt")),
        (asset_text("context_example_2_user.txt"), asset_text("context_example_2_assistant.txt")),
    ]
