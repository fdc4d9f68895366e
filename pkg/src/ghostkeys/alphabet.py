"""Supported character set and password corpus hygiene.

Every component in the package speaks the same alphabet: the 94 printable
ASCII characters excluding space (0x21..0x7E).  Passwords outside this set,
or outside the 5..30 length window, are rejected at the boundary so the
inner layers never have to re-check.
"""

from __future__ import annotations

from typing import Iterable, List

ALPHABET = "".join(chr(c) for c in range(0x21, 0x7F))
ALPHABET_SIZE = len(ALPHABET)  # 94

MIN_PASSWORD_LEN = 5
MAX_PASSWORD_LEN = 30

_INDEX = {c: i for i, c in enumerate(ALPHABET)}


class AlphabetError(ValueError):
    """A string steps outside the supported character set."""


def char_index(c: str) -> int:
    """Position of a character in the canonical alphabet ordering."""
    try:
        return _INDEX[c]
    except KeyError:
        raise AlphabetError(f"unsupported character {c!r}") from None


def is_supported(text: str) -> bool:
    return all(c in _INDEX for c in text)


def is_valid_password(text: str) -> bool:
    return MIN_PASSWORD_LEN <= len(text) <= MAX_PASSWORD_LEN and is_supported(text)


def require_valid_password(text: str) -> str:
    """Return `text` unchanged or raise with a reason usable in messages."""
    if not MIN_PASSWORD_LEN <= len(text) <= MAX_PASSWORD_LEN:
        raise AlphabetError(
            f"password length {len(text)} outside "
            f"[{MIN_PASSWORD_LEN}, {MAX_PASSWORD_LEN}]"
        )
    for i, c in enumerate(text):
        if c not in _INDEX:
            raise AlphabetError(f"unsupported character {c!r} at index {i}")
    return text


def clean_corpus(lines: Iterable[str]) -> List[str]:
    """Filter raw corpus lines down to valid passwords.

    Lines are stripped of trailing newlines only; leading or interior
    whitespace makes a line invalid (space is not in the alphabet).
    """
    out = []
    for line in lines:
        pw = line.rstrip("\r\n")
        if is_valid_password(pw):
            out.append(pw)
    return out
