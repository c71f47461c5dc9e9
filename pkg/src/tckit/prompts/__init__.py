"""Prompt template loading.

Templates ship as plain text files so the wording can be swapped without
touching code; a directory of same-named ``.txt`` files overrides the
bundled defaults.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..errors import ConfigError

TEMPLATE_NAMES = (
    "variants", "assess", "rag_answer", "ragas_extract",
    "ragas_statements", "ragas_verify", "ragas_questions", "pair_judge",
)


def load_template(name: str, override_dir: str | Path | None = None) -> str:
    if name not in TEMPLATE_NAMES:
        raise ConfigError(f"unknown prompt template {name!r}")
    if override_dir is not None:
        candidate = Path(override_dir) / f"{name}.txt"
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return resources.files("tckit.prompts").joinpath(f"{name}.txt") \
        .read_text(encoding="utf-8")


def render_template(name: str, override_dir: str | Path | None = None,
                    **values) -> str:
    return load_template(name, override_dir).format(**values)
