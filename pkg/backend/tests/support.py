"""
Helpers shared by test modules.
"""

from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]


def read_vector(name: str) -> bytes:
    """Hex bytes of a vector file; ``#`` starts a comment line."""
    text = (ROOT / "vectors" / name).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if not line.lstrip().startswith("#")]
    return bytes.fromhex(" ".join(lines))


def read_vector_table(name: str) -> list[tuple[str, bytes]]:
    """``<label> <hex...>`` rows of a vector file."""
    rows = []
    for line in (ROOT / "vectors" / name).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        label, _, hex_bytes = line.strip().partition(" ")
        rows.append((label, bytes.fromhex(hex_bytes)))
    return rows
