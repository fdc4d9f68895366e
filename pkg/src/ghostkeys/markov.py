"""Order-k character Markov model over the supported alphabet.

Contexts are start-anchored: while fewer than `order` characters have been
typed, the context key is the whole prefix, so the empty context holds the
distribution of first characters.  Probabilities use additive smoothing,

    P(c | ctx) = (count(ctx, c) + delta) / (total(ctx) + delta * |alphabet|)

which also defines the uniform fallback for contexts never seen in training.

Serialized models use a small binary container (magic ``VRSM``) with a
trailing CRC-32 so corrupt or truncated files fail loudly.
"""

from __future__ import annotations

import io
import math
import struct
import zlib
from typing import Dict, Iterable

import numpy as np

from .alphabet import ALPHABET, ALPHABET_SIZE, char_index, clean_corpus

MAGIC = b"VRSM"
FORMAT_VERSION = 1

# Probability-vector memos are cleared when they outgrow this many contexts.
_CACHE_LIMIT = 200_000


class ModelFormatError(ValueError):
    """Model file is malformed, truncated, or fails its checksum."""


class ModelVersionError(ModelFormatError):
    """Model file was written by a newer format revision."""


class TrainingError(ValueError):
    """Training corpus is unusable (empty after cleaning)."""


class MarkovModel:
    def __init__(self, order: int, smoothing: float):
        if order < 1:
            raise ValueError("order must be >= 1")
        if smoothing <= 0.0:
            raise ValueError("smoothing must be positive")
        self.order = order
        self.smoothing = smoothing
        self.total_trained = 0
        self._counts: Dict[str, Dict[str, int]] = {}
        self._totals: Dict[str, int] = {}
        self._prob_cache: Dict[str, np.ndarray] = {}
        self._nll_cache: Dict[str, np.ndarray] = {}

    # -- training -----------------------------------------------------------

    @classmethod
    def train(
        cls,
        corpus: Iterable[str],
        order: int = 3,
        smoothing: float = 0.01,
    ) -> "MarkovModel":
        """Count transitions over a cleaned corpus.

        Lines that are not valid passwords (bad length or characters outside
        the alphabet) are dropped; an empty result is an error.
        """
        model = cls(order, smoothing)
        cleaned = clean_corpus(corpus)
        if not cleaned:
            raise TrainingError("corpus empty after cleaning")
        counts = model._counts
        totals = model._totals
        for pw in cleaned:
            for i, c in enumerate(pw):
                ctx = pw[max(0, i - order):i]
                row = counts.get(ctx)
                if row is None:
                    row = counts[ctx] = {}
                row[c] = row.get(c, 0) + 1
                totals[ctx] = totals.get(ctx, 0) + 1
        model.total_trained = len(cleaned)
        return model

    # -- queries --------------------------------------------------------------

    def _key(self, context: str) -> str:
        return context[-self.order:] if len(context) >= self.order else context

    def next_char_distribution(self, context: str) -> np.ndarray:
        """Smoothed P(next char | context) over the whole alphabet.

        Returned arrays are cached and read-only.
        """
        key = self._key(context)
        probs = self._prob_cache.get(key)
        if probs is None:
            if len(self._prob_cache) >= _CACHE_LIMIT:
                self._prob_cache.clear()
            counts = np.full(ALPHABET_SIZE, self.smoothing, dtype=np.float64)
            row = self._counts.get(key)
            total = self._totals.get(key, 0)
            if row:
                for c, n in row.items():
                    counts[char_index(c)] += n
            probs = counts / (total + self.smoothing * ALPHABET_SIZE)
            probs.setflags(write=False)
            self._prob_cache[key] = probs
        return probs

    def nll_row(self, context: str) -> np.ndarray:
        """Per-character -ln P(c | context); cached, read-only."""
        key = self._key(context)
        row = self._nll_cache.get(key)
        if row is None:
            if len(self._nll_cache) >= _CACHE_LIMIT:
                self._nll_cache.clear()
            row = -np.log(self.next_char_distribution(key))
            row.setflags(write=False)
            self._nll_cache[key] = row
        return row

    def log_prob(self, context: str, c: str) -> float:
        char_index(c)  # reject unsupported characters
        key = self._key(context)
        row = self._counts.get(key)
        n = row.get(c, 0) if row else 0
        total = self._totals.get(key, 0)
        return math.log(
            (n + self.smoothing) / (total + self.smoothing * ALPHABET_SIZE)
        )

    def sequence_nll(self, text: str) -> float:
        """Mean negative log-likelihood per character, in nats."""
        if not text:
            raise ValueError("sequence_nll of empty string is undefined")
        nll = 0.0
        for i, c in enumerate(text):
            nll -= self.log_prob(text[max(0, i - self.order):i], c)
        return nll / len(text)

    def sample_next(self, context: str, rng) -> str:
        """Draw one character from the smoothed next-char distribution."""
        probs = self.next_char_distribution(context)
        cum = np.cumsum(probs)
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return ALPHABET[min(idx, ALPHABET_SIZE - 1)]

    # -- serialization ----------------------------------------------------------

    def _payload(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<HBd", FORMAT_VERSION, self.order, self.smoothing))
        alpha = ALPHABET.encode("ascii")
        buf.write(struct.pack("<H", len(alpha)))
        buf.write(alpha)
        buf.write(struct.pack("<QI", self.total_trained, len(self._counts)))
        for ctx in sorted(self._counts):
            cbytes = ctx.encode("ascii")
            row = self._counts[ctx]
            buf.write(struct.pack("<B", len(cbytes)))
            buf.write(cbytes)
            buf.write(struct.pack("<H", len(row)))
            for c in sorted(row):
                buf.write(struct.pack("<BQ", ord(c), row[c]))
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        payload = self._payload()
        return payload + struct.pack("<I", zlib.crc32(payload))

    def crc(self) -> int:
        """Checksum of the serialized form; identifies a trained model."""
        return zlib.crc32(self._payload())

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "MarkovModel":
        if len(blob) < 4 or blob[:4] != MAGIC:
            raise ModelFormatError("not a model file (bad magic)")
        if len(blob) < 8:
            raise ModelFormatError("truncated model file")
        stored = struct.unpack("<I", blob[-4:])[0]
        payload = blob[:-4]
        if zlib.crc32(payload) != stored:
            raise ModelFormatError("model file failed checksum")
        buf = io.BytesIO(payload)
        buf.read(4)

        def take(fmt: str):
            size = struct.calcsize(fmt)
            raw = buf.read(size)
            if len(raw) != size:
                raise ModelFormatError("truncated model file")
            return struct.unpack(fmt, raw)

        version, order, smoothing = take("<HBd")
        if version > FORMAT_VERSION:
            raise ModelVersionError(
                f"model format version {version} not supported"
            )
        (alpha_len,) = take("<H")
        alpha = buf.read(alpha_len).decode("ascii")
        if alpha != ALPHABET:
            raise ModelFormatError("model alphabet does not match this build")
        model = cls(order, smoothing)
        model.total_trained, n_contexts = take("<QI")
        for _ in range(n_contexts):
            (clen,) = take("<B")
            ctx = buf.read(clen).decode("ascii")
            (n_entries,) = take("<H")
            row: Dict[str, int] = {}
            total = 0
            for _ in range(n_entries):
                byte, count = take("<BQ")
                row[chr(byte)] = count
                total += count
            model._counts[ctx] = row
            model._totals[ctx] = total
        if buf.read(1):
            raise ModelFormatError("trailing bytes after model payload")
        return model

    @classmethod
    def load(cls, path: str) -> "MarkovModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
