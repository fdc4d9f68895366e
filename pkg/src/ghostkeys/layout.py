"""Keyboard geometry: key coordinates, travel distance, and overhead.

Coordinates are expressed in key-pitch units (one unit is the center-to-center
spacing of adjacent keys in a row).  A shifted character sits on the same
physical key as its base character and therefore shares its coordinate;
distance between a character and its shifted twin is zero.

Layout documents are plain text, one entry per line:

    <char><TAB><x><TAB><y>

with blank lines and `#` comments ignored.  A document must cover the whole
supported alphabet, must not list a character twice, and no coordinate may
carry more than two characters (base plus shifted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple

import numpy as np

from .alphabet import ALPHABET

# ANSI-style QWERTY, 47 physical keys.  Row stagger in pitch units matches
# the usual hardware offsets (digit row shifted half a key left of the top
# letter row, home row a quarter key right, bottom row three quarters).
_DEFAULT_ROWS: Tuple[Tuple[str, str, float, float], ...] = (
    ("`1234567890-=", "~!@#$%^&*()_+", -0.5, -1.0),
    ("qwertyuiop[]\\", "QWERTYUIOP{}|", 0.0, 0.0),
    ("asdfghjkl;'", 'ASDFGHJKL:"', 0.25, 1.0),
    ("zxcvbnm,./", "ZXCVBNM<>?", 0.75, 2.0),
)

Coord = Tuple[float, float]


class LayoutError(ValueError):
    """Malformed layout document or geometry query outside the layout."""


@dataclass(frozen=True)
class OverheadReport:
    """Travel-distance cost of a ghost string relative to its original."""

    original_distance: float
    ghost_distance: float
    absolute_overhead: float
    relative_overhead: float


def _build_default_keys() -> Dict[str, Coord]:
    keys: Dict[str, Coord] = {}
    for base, shifted, x0, y in _DEFAULT_ROWS:
        for i, (b, s) in enumerate(zip(base, shifted)):
            coord = (x0 + i, y)
            keys[b] = coord
            keys[s] = coord
    return keys


class KeyboardLayout:
    """Immutable map from characters to physical key coordinates.

    Coordinates are in key-pitch units: `pitch` (1.0) is the distance
    between horizontally adjacent keys.
    """

    pitch = 1.0

    def __init__(self, keys: Dict[str, Coord], name: str = "custom"):
        self.name = name
        self._keys: Dict[str, Coord] = dict(keys)
        self._validate()
        # Column i of the coordinate matrix is ALPHABET[i]'s key center.
        self._coords = np.array(
            [self._keys[c] for c in ALPHABET], dtype=np.float64
        )
        self._row_cache: Dict[str, np.ndarray] = {}

    def _validate(self) -> None:
        missing = [c for c in ALPHABET if c not in self._keys]
        if missing:
            raise LayoutError(
                f"layout missing coordinates for {len(missing)} characters, "
                f"first: {missing[0]!r}"
            )
        unknown = [c for c in self._keys if c not in ALPHABET]
        if unknown:
            raise LayoutError(f"unknown character entry {unknown[0]!r}")
        by_coord: Dict[Coord, list] = {}
        for c, xy in self._keys.items():
            if not (math.isfinite(xy[0]) and math.isfinite(xy[1])):
                raise LayoutError(f"non-finite coordinate for {c!r}")
            by_coord.setdefault(xy, []).append(c)
        for xy, chars in by_coord.items():
            if len(chars) > 2:
                raise LayoutError(
                    f"duplicate base-key coordinate {xy}: {''.join(sorted(chars))!r}"
                )

    @property
    def keys(self) -> Dict[str, Coord]:
        """Character → key-center coordinate (a copy; layouts are immutable)."""
        return dict(self._keys)

    # -- geometry ---------------------------------------------------------

    def coord(self, c: str) -> Coord:
        try:
            return self._keys[c]
        except KeyError:
            raise LayoutError(f"character {c!r} not on layout") from None

    def distance(self, a: str, b: str) -> float:
        """Euclidean center distance between the keys of two characters."""
        ax, ay = self.coord(a)
        bx, by = self.coord(b)
        return math.hypot(ax - bx, ay - by)

    def path_distance(self, text: str) -> float:
        """Total finger travel to type `text`, summed over key transitions.

        Zero for empty and single-character strings.
        """
        total = 0.0
        prev: Optional[Coord] = None
        for i, c in enumerate(text):
            try:
                cur = self._keys[c]
            except KeyError:
                raise LayoutError(
                    f"character {c!r} at index {i} not on layout"
                ) from None
            if prev is not None:
                total += math.hypot(cur[0] - prev[0], cur[1] - prev[1])
            prev = cur
        return total

    def adjacent(self, c: str, radius: float) -> Set[str]:
        """Characters whose keys lie within `radius` of `c`'s key.

        Excludes every character on `c`'s own key (distance zero), so a
        shifted twin is never its own neighbor.
        """
        if radius < 0:
            raise LayoutError("radius must be non-negative")
        cx, cy = self.coord(c)
        out = set()
        for other, (ox, oy) in self._keys.items():
            d = math.hypot(ox - cx, oy - cy)
            if 0.0 < d <= radius:
                out.add(other)
        return out

    def overhead(self, original: str, ghost: str) -> OverheadReport:
        """Travel cost added by ghost characters.

        Requires the original to span at least one key transition; a
        zero-travel original (repeats of one physical key) yields an
        infinite relative overhead unless the ghost adds nothing.
        """
        if len(original) < 2:
            raise LayoutError("original too short for a travel ratio")
        base = self.path_distance(original)
        full = self.path_distance(ghost)
        absolute = full - base
        if base > 0.0:
            relative = absolute / base
        else:
            relative = 0.0 if absolute == 0.0 else math.inf
        return OverheadReport(base, full, absolute, relative)

    # -- vectorized access for the injection engine ------------------------

    def coords_matrix(self) -> np.ndarray:
        """(94, 2) array of key centers in alphabet order."""
        return self._coords

    def distance_row(self, c: str) -> np.ndarray:
        """Distances from `c`'s key to every alphabet character's key."""
        row = self._row_cache.get(c)
        if row is None:
            xy = np.asarray(self.coord(c), dtype=np.float64)
            row = np.hypot(*(self._coords - xy).T)
            row.setflags(write=False)
            self._row_cache[c] = row
        return row

    # -- serialization ------------------------------------------------------

    def dump(self) -> str:
        """Layout document for this layout, one line per character."""
        lines = [f"# ghostkeys layout: {self.name}"]
        for c in ALPHABET:
            x, y = self._keys[c]
            lines.append(f"{c}\t{x:g}\t{y:g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, name: str = "custom") -> "KeyboardLayout":
        keys: Dict[str, Coord] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 3 or len(parts[0]) != 1:
                # '#' is a real key (shift-3), so only a line that does not
                # parse as an entry can be a comment.
                if not raw.strip() or raw.lstrip().startswith("#"):
                    continue
                raise LayoutError(f"malformed layout line {lineno}: {raw!r}")
            c = parts[0]
            if c not in ALPHABET:
                raise LayoutError(
                    f"unknown character entry {c!r} on line {lineno}"
                )
            if c in keys:
                raise LayoutError(f"duplicate entry for {c!r} on line {lineno}")
            try:
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise LayoutError(
                    f"malformed coordinate on line {lineno}: {raw!r}"
                ) from None
            keys[c] = (x, y)
        return cls(keys, name=name)


_DEFAULT: Optional[KeyboardLayout] = None


def default_layout() -> KeyboardLayout:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = KeyboardLayout(_build_default_keys(), name="ansi-qwerty")
    return _DEFAULT


def load_layout(path: Optional[str] = None) -> KeyboardLayout:
    """Load a layout document from `path`, or the built-in ANSI QWERTY."""
    if path is None:
        return default_layout()
    with open(path, "r", encoding="utf-8") as fh:
        return KeyboardLayout.parse(fh.read(), name=str(path))
