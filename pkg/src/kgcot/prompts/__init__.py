"""Versioned prompt template assets with {{placeholder}} rendering.

Template versions are content hashes, recorded in resolved-config and in
evidence provenance so corpus files can always be traced to the exact
template text that produced them.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from kgcot.errors import PromptError

TEMPLATE_NAMES = (
    "entity_select",
    "node_select",
    "path_select",
    "cot_system",
    "cot_generate",
)

_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str
    version: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.text))


def load_template(name: str, prompts_dir: str | Path | None = None) -> PromptTemplate:
    """Load a bundled template, or an override from prompts_dir when given."""
    if name not in TEMPLATE_NAMES:
        raise PromptError(f"unknown template {name!r}; known: {', '.join(TEMPLATE_NAMES)}")
    if prompts_dir is not None:
        path = Path(prompts_dir) / f"{name}.txt"
        if not path.exists():
            raise PromptError(f"missing template file: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        text = resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")
    version = hashlib.sha256(text.encode()).hexdigest()[:12]
    return PromptTemplate(name=name, text=text, version=version)


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute {{placeholders}}; any unbound placeholder is an error."""
    unbound = template.placeholders() - set(bindings)
    if unbound:
        raise PromptError(
            f"template {template.name!r}: unbound placeholder(s) {sorted(unbound)}"
        )
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.text)


def template_versions(prompts_dir: str | Path | None = None) -> dict[str, str]:
    return {name: load_template(name, prompts_dir).version for name in TEMPLATE_NAMES}
