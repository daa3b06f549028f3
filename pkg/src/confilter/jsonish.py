"""Tolerant extraction of JSON objects from LLM replies.

Model outputs are requested as strict JSON5 but arrive wrapped in prose,
code fences, or with minor syntax slips. This module pulls out the first
balanced JSON container and repairs the common failure modes (trailing
commas, single quotes, Python-style literals) before giving up.
"""

from __future__ import annotations

import json
import re
from typing import Any, Optional

_FENCE_RE = re.compile(r"```(?:json5?|js)?\s*(.*?)```", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")


def _balanced_span(text: str, open_ch: str, close_ch: str) -> Optional[str]:
    start = text.find(open_ch)
    if start < 0:
        return None
    depth = 0
    in_str = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def _repair(candidate: str) -> str:
    fixed = _TRAILING_COMMA_RE.sub(r"\1", candidate)
    fixed = re.sub(r"\bTrue\b", "true", fixed)
    fixed = re.sub(r"\bFalse\b", "false", fixed)
    fixed = re.sub(r"\b(None|undefined)\b", "null", fixed)
    # Single-quoted strings; keys without quotes.
    fixed = re.sub(r"'([^'\\]*)'", r'"\1"', fixed)
    fixed = re.sub(r"([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)(\s*:)", r'\1"\2"\3', fixed)
    return fixed


def extract_json(raw: str, container: str = "object") -> Optional[Any]:
    """Best-effort parse of the first JSON object (or array) in ``raw``.

    Returns None when nothing parseable is found; never raises.
    """
    if not isinstance(raw, str) or not raw.strip():
        return None
    text = raw
    m = _FENCE_RE.search(text)
    if m:
        text = m.group(1)
    open_ch, close_ch = ("{", "}") if container == "object" else ("[", "]")
    span = _balanced_span(text, open_ch, close_ch)
    if span is None:
        return None
    for candidate in (span, _repair(span)):
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            continue
    return None
