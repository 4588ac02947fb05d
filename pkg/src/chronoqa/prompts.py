"""Named system prompts and few-shot texts bundled as data files."""
from __future__ import annotations

from importlib.resources import files

from .errors import ManifestError

PROMPT_NAMES = ("alignment", "reasoning", "sql_to_text", "judge", "cot", "time_cot")


def load_prompt(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise ManifestError(f"unknown prompt {name!r}; bundled: {', '.join(PROMPT_NAMES)}")
    return files("chronoqa").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
