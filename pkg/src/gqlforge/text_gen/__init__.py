"""Question, GQL, reverse, repair and reformulation generators."""

from .frames import Frame, Lexicon
from .mock import FaultConfig, MockGenerator
from .prompts import (
    GeneratorOutput,
    Prompt,
    PromptKind,
    build_prompt,
    parse_sections,
    render_sections,
)
from .remote import EndpointConfig, RemoteChatGenerator


def mock_generate(prompt: Prompt, seed=0, generator: MockGenerator | None = None) -> GeneratorOutput:
    return (generator or MockGenerator()).generate(prompt, seed)


__all__ = [
    "EndpointConfig",
    "FaultConfig",
    "Frame",
    "GeneratorOutput",
    "Lexicon",
    "MockGenerator",
    "Prompt",
    "PromptKind",
    "RemoteChatGenerator",
    "build_prompt",
    "mock_generate",
    "parse_sections",
    "render_sections",
]
