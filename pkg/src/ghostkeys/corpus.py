"""Synthetic password corpora for training, calibration, and evaluation.

Real leaked-password lists cannot ship with the package, so training and
the evaluation harness run on a generated stand-in that mimics the usual
composition habits: dictionary words with digit tails, capitalized word
pairs, years, keyboard walks, leetspeak, and plain digit runs.  The mix is
deterministic for a given seed.
"""

from __future__ import annotations

import random
from typing import List, Sequence

from .alphabet import (
    ALPHABET,
    MAX_PASSWORD_LEN,
    MIN_PASSWORD_LEN,
    clean_corpus,
    is_valid_password,
)

WORDS = (
    "able about account action after again agent almost alone along among "
    "angel animal answer apple august autumn badger banana baseball basket "
    "beach bear beauty berlin better bird black blue board border boston "
    "brave bread bridge bright brown buffalo butter camera candle carbon "
    "castle chance charlie cheese cherry chicken china chocolate circle "
    "city clever cloud cobra coffee congo copper corner cotton cowboy "
    "cradle cricket dakota dallas dance daniel dark december diamond "
    "dog dolphin dragon dream driver eagle early earth east easy "
    "eight eleven empire energy engine enter fall falcon family famous "
    "fast father field finger fire fish flower forest forever fox "
    "france freedom fresh friend frog garden genius gentle george ghost "
    "ginger gold granite grape green guitar hammer happy harbor hawk "
    "heart heaven hello hidden hockey holiday honey horse house hunter "
    "india indigo iron island jackal jaguar james jasmine jelly joker "
    "julia july jungle junior jupiter justice killer king kitten knight "
    "lake laser laura legend lemon light lion little london lotus "
    "love lucky lunar magic magnet maple march master matrix meadow "
    "melon memory metal mexico midnight mirror monday money monkey moon "
    "morning mother mountain music mustang nancy nature nelson night "
    "ninja north number ocean office olive orange oscar panda panther "
    "paper paris pearl pepper phoenix piano pilot planet player pocket "
    "poland police power prince purple queen rabbit rainbow ranger raven "
    "river robert rocket rose royal runner sailor salmon samba saturn "
    "school scorpio secret seven shadow shark silver simple singer sister "
    "smile snake soccer spark spider spirit spring star steel stone "
    "storm street summer sunny sunset super sweet sword taxi teacher "
    "temple tennis texas thunder tiger tokyo tower train travel tree "
    "turtle uncle velvet venus victor viking violet walker water wave "
    "welcome west whale white willow window winner winter wizard wolf "
    "wonder yellow zebra zigzag"
).split()

_WALKS = ("qwerty", "asdfgh", "zxcvbn", "qazwsx", "123qwe", "1q2w3e")
_SYMBOLS = "!@#$%^&*?_-."
_LEET = {"a": "@", "e": "3", "i": "1", "o": "0", "s": "$"}


def _word(rng: random.Random) -> str:
    return rng.choice(WORDS)


def _digits(rng: random.Random, lo: int, hi: int) -> str:
    return "".join(rng.choice("0123456789") for _ in range(rng.randint(lo, hi)))


def _year(rng: random.Random) -> str:
    return str(rng.randint(1960, 2026))


def _leet(word: str, rng: random.Random) -> str:
    return "".join(
        _LEET[c] if c in _LEET and rng.random() < 0.7 else c for c in word
    )


def _candidate(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.26:
        return _word(rng) + _digits(rng, 1, 4)
    if roll < 0.40:
        return _word(rng).capitalize() + _digits(rng, 2, 4)
    if roll < 0.50:
        return _word(rng) + _word(rng)
    if roll < 0.58:
        return _word(rng) + rng.choice(_SYMBOLS) + _digits(rng, 2, 3)
    if roll < 0.65:
        return "".join(rng.choice("0123456789") for _ in range(rng.randint(6, 10)))
    if roll < 0.72:
        return _word(rng).capitalize() + _word(rng) + _year(rng)
    if roll < 0.79:
        w = _word(rng)
        return w if len(w) >= MIN_PASSWORD_LEN else w + _word(rng)
    if roll < 0.85:
        return rng.choice(_WALKS) + _digits(rng, 0, 3)
    if roll < 0.91:
        return _leet(_word(rng), rng) + _digits(rng, 0, 2)
    if roll < 0.96:
        return _word(rng).capitalize() + _word(rng).capitalize() + rng.choice(_SYMBOLS) + _digits(rng, 1, 2)
    return _word(rng) + _word(rng) + _word(rng) + _digits(rng, 0, 2)


def synthetic_passwords(
    n: int,
    seed: int = 0,
    min_len: int = MIN_PASSWORD_LEN,
    max_len: int = MAX_PASSWORD_LEN,
) -> List[str]:
    """Generate `n` distinct plausible passwords, deterministically.

    `min_len`/`max_len` narrow the length window (within the global 5..30
    bounds), e.g. to model a site with a stricter length policy.
    """
    if not MIN_PASSWORD_LEN <= min_len <= max_len <= MAX_PASSWORD_LEN:
        raise ValueError("length window must sit inside the global bounds")
    rng = random.Random(seed)
    out: List[str] = []
    seen = set()
    while len(out) < n:
        pw = _candidate(rng)
        if pw in seen or not min_len <= len(pw) <= max_len:
            continue
        if not is_valid_password(pw):
            continue
        seen.add(pw)
        out.append(pw)
    return out


def random_like(passwords: Sequence[str], seed: int = 0) -> List[str]:
    """Uniform-random strings matching the lengths of `passwords`.

    Used as the high-entropy side of meter calibration.
    """
    rng = random.Random(seed)
    return [
        "".join(rng.choice(ALPHABET) for _ in range(len(pw)))
        for pw in passwords
    ]


def prefix_corpus(passwords: Sequence[str]) -> List[str]:
    """Every non-empty prefix of every password, in order.

    The randomness meter scores growing prefixes during entry, so it should
    be calibrated on partial strings with the same length profile it will
    see at runtime — calibrating on full passwords only makes one- and
    two-character prefixes look far more "random" than they are.
    """
    return [pw[:k] for pw in passwords for k in range(1, len(pw) + 1)]


def read_password_file(path: str) -> List[str]:
    """Load a one-password-per-line corpus file, dropping invalid lines."""
    with open(path, "r", encoding="utf-8") as fh:
        return clean_corpus(fh)
