"""Small shared helpers: seed derivation and JSON emission with exact floats."""

from __future__ import annotations

import hashlib
import math


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 63-bit seed from a base seed and arbitrary labels.

    Uses SHA-256 of the joined string representation, so the result does not
    depend on PYTHONHASHSEED and is identical across processes and platforms.
    """
    text = "|".join([str(int(base_seed))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF


def format_float(value: float) -> str:
    """Render a double with 17 significant digits (exact binary round-trip)."""
    if not math.isfinite(value):
        raise ValueError(f"cannot serialize non-finite value {value!r}")
    return format(float(value), ".17g")


def dumps_exact(obj, indent: int = 0) -> str:
    """JSON text where every float is written with 17 significant digits.

    The standard json module always emits repr() for floats; this writer keeps
    the documented on-disk schema (17-significant-digit decimals) so that saved
    models reload bit-exactly. Dict insertion order is preserved.
    """
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        out = ['"']
        for ch in obj:
            if ch == '"':
                out.append('\\"')
            elif ch == "\\":
                out.append("\\\\")
            elif ch == "\n":
                out.append("\\n")
            elif ch == "\t":
                out.append("\\t")
            elif ch == "\r":
                out.append("\\r")
            elif ord(ch) < 0x20:
                out.append(f"\\u{ord(ch):04x}")
            else:
                out.append(ch)
        out.append('"')
        return "".join(out)
    if isinstance(obj, bool):  # pragma: no cover - caught by True/False above
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{dumps_exact(str(k))}: {dumps_exact(v, indent + 2)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{inner}{dumps_exact(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    # numpy scalars and arrays land here
    if hasattr(obj, "tolist"):
        return dumps_exact(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
