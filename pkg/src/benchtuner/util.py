"""Shared helpers: stable seed derivation, canonical JSON, prompt templates."""

from __future__ import annotations

import hashlib
import json


def derive_seed(*parts) -> int:
    """Stable 63-bit seed derived from the given parts (order-sensitive).

    Built on sha256 so derived seeds survive process restarts; the builtin
    hash() is salted per process and would break resumable runs.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def canonical_json(value) -> str:
    """Serialize with sorted keys and no stray whitespace."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def fingerprint(value) -> str:
    """Short stable content hash of a JSON-serializable value."""
    digest = hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()
    return digest[:12]


def render_template(template: str, values: dict) -> str:
    """Replace {name} markers for the given keys only.

    Unlike str.format, braces that are not known markers (JSON examples
    inside prompt files) survive untouched.
    """
    out = template
    for key, val in values.items():
        out = out.replace("{" + key + "}", str(val))
    return out


def extract_last_json(text: str) -> dict | None:
    """Return the last top-level JSON object embedded in free-form text.

    Braces inside an already-decoded object are skipped so nested dicts do
    not shadow their parent. Returns None when nothing decodes.
    """
    decoder = json.JSONDecoder()
    found = None
    pos = 0
    while True:
        start = text.find("{", pos)
        if start < 0:
            return found
        try:
            obj, end = decoder.raw_decode(text, start)
        except ValueError:
            pos = start + 1
            continue
        if isinstance(obj, dict):
            found = obj
        pos = end
