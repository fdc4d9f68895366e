"""Bloom filter for the honeyword set.

Standard construction: for an expected capacity n and target false-positive
rate p,

    m = ceil(-n * ln p / (ln 2)^2)        bits
    h = max(1, round((m / n) * ln 2))     hash functions

and the analytic rate after n insertions is (1 - e^(-h*n/m))^h.  Lookups
never produce false negatives.  There are no deletions; when the member set
must shrink or the parameters change, the filter is rebuilt.

Bit positions come from double hashing over the two 64-bit halves of
SHA-256(seed || element); the second half is forced odd so the probe stride
never collapses.

Snapshots are a small binary container (magic ``VRBF``) with a trailing
CRC-32, mirroring the model file conventions.
"""

from __future__ import annotations

import hashlib
import math
import struct
import zlib
from dataclasses import dataclass

MAGIC = b"VRBF"
FORMAT_VERSION = 1

# Refuse absurd sizing requests before allocating: 2^33 bits = 1 GiB.
DEFAULT_MAX_BITS = 1 << 33


class FilterError(ValueError):
    pass


class FilterFormatError(FilterError):
    """Snapshot is malformed, truncated, or fails its checksum."""


class FilterSizeError(FilterError):
    """Requested parameters exceed the memory cap."""


@dataclass(frozen=True)
class BloomParams:
    expected_n: int
    target_fpr: float
    m_bits: int
    hash_count: int
    hash_seed: int = 0

    def storage_bytes(self) -> int:
        return (self.m_bits + 7) // 8


def bf_params(
    expected_n: int,
    target_fpr: float,
    hash_seed: int = 0,
    max_bits: int = DEFAULT_MAX_BITS,
) -> BloomParams:
    """Size a filter for `expected_n` elements at `target_fpr`."""
    if expected_n < 1:
        raise FilterError("expected_n must be >= 1")
    if not 0.0 < target_fpr < 1.0:
        raise FilterError("target_fpr must lie in (0, 1)")
    ln2 = math.log(2.0)
    m = math.ceil(-expected_n * math.log(target_fpr) / (ln2 * ln2))
    if m > max_bits:
        raise FilterSizeError(
            f"target_fpr {target_fpr:g} needs {m} bits, over the "
            f"{max_bits}-bit cap"
        )
    h = max(1, round((m / expected_n) * ln2))
    return BloomParams(expected_n, target_fpr, m, h, hash_seed)


def analytic_fpr(m_bits: int, hash_count: int, inserted: int) -> float:
    """Expected false-positive rate after `inserted` insertions."""
    if inserted == 0:
        return 0.0
    return (1.0 - math.exp(-hash_count * inserted / m_bits)) ** hash_count


class BloomFilter:
    def __init__(self, params: BloomParams):
        self.params = params
        self.bits = bytearray(params.storage_bytes())
        self.inserted = 0
        self._seed_block = struct.pack("<Q", params.hash_seed & (2**64 - 1))

    @property
    def saturated(self) -> bool:
        """Past design capacity; false-positive rate now exceeds target."""
        return self.inserted > self.params.expected_n

    def _positions(self, element: bytes):
        digest = hashlib.sha256(self._seed_block + element).digest()
        h1 = int.from_bytes(digest[:8], "big")
        h2 = int.from_bytes(digest[8:16], "big") | 1
        m = self.params.m_bits
        for i in range(self.params.hash_count):
            yield (h1 + i * h2) % m

    def insert(self, element: bytes) -> None:
        for pos in self._positions(element):
            self.bits[pos >> 3] |= 1 << (pos & 7)
        self.inserted += 1

    def lookup(self, element: bytes) -> bool:
        for pos in self._positions(element):
            if not self.bits[pos >> 3] & (1 << (pos & 7)):
                return False
        return True

    def current_fpr(self) -> float:
        return analytic_fpr(self.params.m_bits, self.params.hash_count, self.inserted)

    # -- snapshots ----------------------------------------------------------

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack(
            "<HQdQHQQ",
            FORMAT_VERSION,
            self.params.expected_n,
            self.params.target_fpr,
            self.params.m_bits,
            self.params.hash_count,
            self.params.hash_seed & (2**64 - 1),
            self.inserted,
        )
        payload = head + bytes(self.bits)
        return payload + struct.pack("<I", zlib.crc32(payload))

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BloomFilter":
        if len(blob) < 4 or blob[:4] != MAGIC:
            raise FilterFormatError("not a filter snapshot (bad magic)")
        head_size = 4 + struct.calcsize("<HQdQHQQ")
        if len(blob) < head_size + 4:
            raise FilterFormatError("truncated filter snapshot")
        stored = struct.unpack("<I", blob[-4:])[0]
        payload = blob[:-4]
        if zlib.crc32(payload) != stored:
            raise FilterFormatError("filter snapshot failed checksum")
        version, expected_n, target_fpr, m_bits, h, seed, inserted = struct.unpack(
            "<HQdQHQQ", payload[4:head_size]
        )
        if version > FORMAT_VERSION:
            raise FilterFormatError(
                f"filter format version {version} not supported"
            )
        params = BloomParams(expected_n, target_fpr, m_bits, h, seed)
        bits = payload[head_size:]
        if len(bits) != params.storage_bytes():
            raise FilterFormatError("filter bit array has the wrong size")
        filt = cls(params)
        filt.bits = bytearray(bits)
        filt.inserted = inserted
        return filt

    @classmethod
    def load(cls, path: str) -> "BloomFilter":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
