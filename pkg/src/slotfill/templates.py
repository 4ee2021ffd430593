"""Prompt templates for teacher annotation and for the student extractor."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

from slotfill.model import Turn

ANNOTATION_TEMPLATE = """\
You are an expert in Natural Language Processing.

Your task is to identify all named slot values in the given dialogue text, in which agent turn starts with "Agent says:" and customer turn starts with "Customer says:".

Return the output in a json format for every line in the dialogue where key is text and value is dict of slot types and values. If there are no slot types in the line, return NA.

To get started, here is the list of slot types available to you: {labels}.

Do not be restricted by this list. You should also extract slot types that are not in this list but present in the text.

Dialogue Text: {text}
"""

# Everything between the [INST] and [/INST] tags is the instruction part.
INSTRUCTION_TEMPLATE = """\
<<SYS>>
You are an honest and helpful information extractor.
<</SYS>>
Your task is to extract values for the following slot labels in the Main Text delimited by triple backticks: {labels}. Format your response as a JSON object with slot labels as the keys and slot values in a list. Only return the slots found the Main text. Use the following dialogue only as context support to extract slots from the Main text delimited by triple backticks:
{context}
```
Main text: {text}
```
"""

PROMPT_OPEN = "<s>[INST]"
PROMPT_CLOSE = "[/INST]"


def render_annotation_lines(turns: Iterable[Turn]) -> str:
    return "\n".join(f"{t.speaker.title} says: {t.text}" for t in turns)


def render_dialogue(turns: Iterable[Turn]) -> str:
    """Context/main-text rendering shared by training and serving prompts."""
    return "\n".join(f"{t.speaker.title}: {t.text}" for t in turns)


def render_instruction(context: Sequence[Turn], text: Sequence[Turn], labels: Sequence[str]) -> str:
    return INSTRUCTION_TEMPLATE.format(
        labels=", ".join(labels),
        context=render_dialogue(context),
        text=render_dialogue(text),
    )


def render_prompt(instruction: str, completion: str = "") -> str:
    """Wrap an instruction in the chat tags; the completion follows ``[/INST]``."""
    prompt = f"{PROMPT_OPEN}{instruction}{PROMPT_CLOSE}"
    return f"{prompt} {completion}" if completion else prompt
