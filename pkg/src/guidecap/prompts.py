"""Assembly of the language-model conditioning prompt."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidConfigError
from .keywords import KeywordSelection


@dataclass(frozen=True)
class PromptTemplate:
    """The fixed prompt segments around the selected keywords.

    The joiner and suffix between keywords and the caption-start segment are
    configurable so that alternative punctuation can be tried in reproduction
    experiments.
    """

    keyword_prefix: str = "Objects: "
    keyword_joiner: str = ", "
    keyword_suffix: str = ". "
    default_prompt: str = "This is a sound of"

    def __post_init__(self) -> None:
        if not self.default_prompt:
            raise InvalidConfigError("default_prompt must be non-empty")


@dataclass(frozen=True)
class ComposedPrompt:
    """Full prompt text plus the character offset where the caption-start
    segment (the default prompt) begins."""

    text: str
    caption_start_offset: int

    def __post_init__(self) -> None:
        if not 0 <= self.caption_start_offset <= len(self.text):
            raise ValueError("caption_start_offset out of range")


def compose_prompt(
    template: PromptTemplate,
    selection: KeywordSelection | None = None,
) -> ComposedPrompt:
    """Join keyword prompt, keywords, and default prompt into one string.

    With no keywords (the keyword-free ablation) the prompt is just the
    default prompt and the caption-start offset is 0.
    """
    keywords = selection.keywords if selection is not None else ()
    if not keywords:
        return ComposedPrompt(template.default_prompt, 0)
    head = (
        template.keyword_prefix
        + template.keyword_joiner.join(keywords)
        + template.keyword_suffix
    )
    return ComposedPrompt(head + template.default_prompt, len(head))
