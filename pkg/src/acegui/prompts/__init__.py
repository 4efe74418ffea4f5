"""Versioned prompt templates.

Each ``*.txt`` file in this package starts with a header line
``### template: <id>/<version>`` followed by a :class:`string.Template`
body. The header stays in the rendered prompt so traces and scripted
backends can tell templates apart.
"""

from __future__ import annotations

import re
import string
from functools import lru_cache
from importlib import resources

__all__ = ["PromptTemplate", "get", "render", "template_ids"]

_HEADER_RE = re.compile(r"### template: (\S+/v\d+)\n")


class PromptTemplate:
    def __init__(self, template_id: str, text: str):
        self.id = template_id
        self.text = text
        self._tpl = string.Template(text)

    def render(self, **fields: object) -> str:
        return self._tpl.substitute({k: str(v) for k, v in fields.items()})

    def __repr__(self) -> str:
        return f"PromptTemplate({self.id!r})"


@lru_cache(maxsize=None)
def _all() -> dict[str, PromptTemplate]:
    out = {}
    for entry in resources.files(__name__).iterdir():
        if not entry.name.endswith(".txt"):
            continue
        text = entry.read_text(encoding="utf-8")
        m = _HEADER_RE.match(text)
        if m is None:
            raise ValueError(f"{entry.name}: missing template header")
        if m.group(1) in out:
            raise ValueError(f"duplicate template id {m.group(1)}")
        out[m.group(1)] = PromptTemplate(m.group(1), text)
    return out


def template_ids() -> list[str]:
    return sorted(_all())


def get(template_id: str) -> PromptTemplate:
    try:
        return _all()[template_id]
    except KeyError:
        raise KeyError(f"unknown prompt template {template_id!r}") from None


def render(template_id: str, **fields: object) -> str:
    return get(template_id).render(**fields)
