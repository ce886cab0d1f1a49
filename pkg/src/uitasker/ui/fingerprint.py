"""64-bit simhash fingerprints of screens.

Each element contributes one token ``widget_class|label|cell box`` where the
cell box is its bounds snapped to an 8x8 grid over the screen.  Small pixel
jitter keeps the token stable; any content change moves the hash.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from uitasker.ui.labels import derive_label
from uitasker.ui.snapshot import Bounds, ScreenSnapshot

FINGERPRINT_BITS = 64
GRID = 8


@dataclass(frozen=True)
class ScreenFingerprint:
    bits: int
    element_count: int

    def hex(self) -> str:
        return f"{self.bits:016x}"


def quantize_bounds(bounds: Bounds, resolution: tuple[int, int], grid: int = GRID) -> tuple[int, int, int, int]:
    width, height = resolution

    def snap(value: int, extent: int) -> int:
        return min(max(value * grid // extent, 0), grid)

    return (
        snap(bounds.x, width),
        snap(bounds.y, height),
        snap(bounds.right, width),
        snap(bounds.bottom, height),
    )


def token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def simhash(tokens: Iterable[str]) -> int:
    counts = Counter(tokens)
    if not counts:
        return 0
    weights = [0] * FINGERPRINT_BITS
    for token, count in sorted(counts.items()):
        h = token_hash(token)
        for bit in range(FINGERPRINT_BITS):
            weights[bit] += count if (h >> bit) & 1 else -count
    return sum(1 << bit for bit, w in enumerate(weights) if w > 0)


def element_tokens(snapshot: ScreenSnapshot, *, with_text: bool = True) -> list[str]:
    tokens = []
    for element in snapshot.root.iter_tree():
        label = derive_label(element) if with_text else ""
        cells = ",".join(map(str, quantize_bounds(element.bounds, snapshot.resolution)))
        tokens.append(f"{element.widget_class}|{label}|{cells}")
    return tokens


def _count(snapshot: ScreenSnapshot) -> int:
    # An empty root container counts as an empty token multiset.
    root = snapshot.root
    if not root.children and root.widget_class == "container" and not (root.text or root.content_desc):
        return 0
    return sum(1 for _ in root.iter_tree())


def fingerprint(snapshot: ScreenSnapshot) -> ScreenFingerprint:
    count = _count(snapshot)
    if count == 0:
        return ScreenFingerprint(0, 0)
    return ScreenFingerprint(simhash(element_tokens(snapshot)), count)


def layout_signature(snapshot: ScreenSnapshot) -> ScreenFingerprint:
    """Fingerprint with all captions blanked: widget classes and grid cells only."""
    count = _count(snapshot)
    if count == 0:
        return ScreenFingerprint(0, 0)
    return ScreenFingerprint(simhash(element_tokens(snapshot, with_text=False)), count)


def hamming(a: ScreenFingerprint | int, b: ScreenFingerprint | int) -> int:
    x = a.bits if isinstance(a, ScreenFingerprint) else a
    y = b.bits if isinstance(b, ScreenFingerprint) else b
    return bin((x ^ y) & ((1 << FINGERPRINT_BITS) - 1)).count("1")
