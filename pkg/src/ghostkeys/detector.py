"""Honeyword detector and credential store.

Every successful login's emitted ghost string, plus the guessing oracle's
best candidates for it (minus the real password), are inserted into a single
global Bloom filter under user-scoped keys.  A failed login whose submitted
password hits the filter is almost certainly someone replaying keystroke
observations, and raises a silent alarm; the attacker sees a response
indistinguishable from an ordinary wrong password.

Verdict precedence: a correct password is a success even if it collides
with the filter (false positives must not lock out users).  Unknown users
fail exactly like wrong passwords on the wire.

Persistence is a directory of three files: an append-only credential log
(`credentials.log`, key=value lines, last line per user wins), a filter
snapshot (`filter.vrbf`), and an append-only alarm log (`alarms.log`).
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import os
import threading
import time
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple

from .alphabet import ALPHABET, require_valid_password
from .bloom import BloomFilter, BloomParams, bf_params
from .generator import GhostResult

log = logging.getLogger("ghostkeys.detector")

CREDENTIALS_FILE = "credentials.log"
FILTER_FILE = "filter.vrbf"
ALARMS_FILE = "alarms.log"

DEFAULT_ITERATIONS = 20_000
DEFAULT_HONEYWORD_COUNT = 20
DEFAULT_FILTER_PARAMS = dict(expected_n=1_000_000, target_fpr=1e-30)

_USER_CHARS = frozenset(ALPHABET)

# An oracle maps (observed ghost string, budget) to ranked guesses.
Oracle = Callable[[str, int], List[str]]


class DetectorError(ValueError):
    pass


class DuplicateUserError(DetectorError):
    pass


class StoreCorruptionError(RuntimeError):
    """Persisted store files are unreadable or inconsistent."""


@dataclass(frozen=True)
class LoginOutcome:
    verdict: str  # "success" | "fail_benign" | "fail_alarm"
    reason: Optional[str] = None


SUCCESS = LoginOutcome("success")
FAIL_BENIGN = LoginOutcome("fail_benign")
FAIL_ALARM = LoginOutcome("fail_alarm", reason="inference-attack-detected")


@dataclass
class UserRecord:
    user_id: str
    salt: bytes
    digest: bytes
    iterations: int
    created_at: str
    honeyword_count: int = 0  # running total of filter insertions


def _digest(password: str, salt: bytes, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), salt, iterations
    )


def _now_iso(clock: Callable[[], float]) -> str:
    return (
        datetime.fromtimestamp(clock(), tz=timezone.utc)
        .isoformat(timespec="seconds")
    )


def scoped_key(user_id: str, word: str) -> bytes:
    """Filter key for one user's honeyword; NUL keeps the pair unambiguous."""
    return user_id.encode("utf-8") + b"\x00" + word.encode("utf-8")


def generate_honeywords(
    ghost: str,
    original: str,
    oracle: Oracle,
    count: int = DEFAULT_HONEYWORD_COUNT,
) -> List[str]:
    """Decoy set for one login: the ghost string plus top oracle guesses.

    The real password never appears in the set.  If the oracle cannot
    produce enough distinct candidates the set is smaller than `count` and
    a warning is issued.
    """
    if count < 1:
        raise DetectorError("honeyword count must be >= 1")
    out: List[str] = [ghost] if ghost != original else []
    if len(out) < count:
        try:
            candidates = oracle(ghost, count + 1)
        except ValueError as exc:
            # expected when the observation defeats enumeration (e.g. too
            # long); anything else is a miswired oracle and must propagate
            log.debug("honeyword oracle failed for ghost len %d: %s", len(ghost), exc)
            candidates = []
        for cand in candidates:
            if cand != original and cand != ghost:
                out.append(cand)
                if len(out) == count:
                    break
    if len(out) < count:
        warnings.warn(
            f"only {len(out)} of {count} honeywords available for this session",
            stacklevel=2,
        )
    return out


class DetectorStore:
    """User credentials plus the shared honeyword filter.

    `store_dir=None` keeps everything in memory (tests, evaluation runs).
    All mutating operations take an internal lock; the store is safe for a
    single process with concurrent readers.
    """

    def __init__(
        self,
        store_dir: Optional[str] = None,
        filter_params: Optional[BloomParams] = None,
        oracle: Optional[Oracle] = None,
        honeyword_count: int = DEFAULT_HONEYWORD_COUNT,
        iterations: int = DEFAULT_ITERATIONS,
        clock: Callable[[], float] = time.time,
    ):
        if iterations < 1:
            raise DetectorError("iterations must be >= 1")
        self._lock = threading.RLock()
        self._dir = store_dir
        self._oracle = oracle
        self.honeyword_count = honeyword_count
        self.iterations = iterations
        self._clock = clock
        self._users: Dict[str, UserRecord] = {}
        self._alarms: List[Tuple[str, str]] = []
        self._cred_fh = None
        if filter_params is None:
            filter_params = bf_params(**DEFAULT_FILTER_PARAMS)
        self.filter = BloomFilter(filter_params)
        if store_dir is not None:
            os.makedirs(store_dir, exist_ok=True)
            self._load_existing()
            self._cred_fh = open(
                os.path.join(store_dir, CREDENTIALS_FILE), "a", encoding="utf-8"
            )

    # -- persistence --------------------------------------------------------

    def _load_existing(self) -> None:
        cred_path = os.path.join(self._dir, CREDENTIALS_FILE)
        if os.path.exists(cred_path):
            with open(cred_path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    self._users.update(self._parse_record(line, lineno))
        filt_path = os.path.join(self._dir, FILTER_FILE)
        if os.path.exists(filt_path):
            try:
                self.filter = BloomFilter.load(filt_path)
            except ValueError as exc:
                raise StoreCorruptionError(f"{filt_path}: {exc}") from exc
        alarms_path = os.path.join(self._dir, ALARMS_FILE)
        if os.path.exists(alarms_path):
            with open(alarms_path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    parts = line.rstrip("\n").split("\t")
                    if len(parts) != 3 or parts[2] != "ALARM":
                        raise StoreCorruptionError(
                            f"{alarms_path}:{lineno}: malformed alarm line"
                        )
                    self._alarms.append((parts[0], parts[1]))

    @staticmethod
    def _parse_record(line: str, lineno: int) -> Dict[str, UserRecord]:
        fields = {}
        for part in line.split("\t"):
            if "=" not in part:
                raise StoreCorruptionError(
                    f"credentials.log:{lineno}: malformed field {part!r}"
                )
            k, v = part.split("=", 1)
            fields[k] = v
        try:
            rec = UserRecord(
                user_id=fields["user"],
                salt=bytes.fromhex(fields["salt"]),
                digest=bytes.fromhex(fields["digest"]),
                iterations=int(fields["iterations"]),
                created_at=fields["created"],
                honeyword_count=int(fields["honeywords"]),
            )
        except (KeyError, ValueError) as exc:
            raise StoreCorruptionError(
                f"credentials.log:{lineno}: {exc}"
            ) from exc
        return {rec.user_id: rec}

    def _append_record(self, rec: UserRecord) -> None:
        if self._cred_fh is None:
            return
        self._cred_fh.write(
            f"user={rec.user_id}\tsalt={rec.salt.hex()}"
            f"\tdigest={rec.digest.hex()}\titerations={rec.iterations}"
            f"\tcreated={rec.created_at}\thoneywords={rec.honeyword_count}\n"
        )
        self._cred_fh.flush()
        os.fsync(self._cred_fh.fileno())

    def save(self) -> None:
        """Write the filter snapshot; credential and alarm logs are already
        on disk (appended synchronously)."""
        if self._dir is None:
            return
        with self._lock:
            tmp = os.path.join(self._dir, FILTER_FILE + ".tmp")
            self.filter.save(tmp)
            os.replace(tmp, os.path.join(self._dir, FILTER_FILE))

    def close(self) -> None:
        with self._lock:
            self.save()
            if self._cred_fh is not None:
                self._cred_fh.close()
                self._cred_fh = None

    # -- accounts ------------------------------------------------------------

    @staticmethod
    def _check_user_id(user_id: str) -> None:
        if not user_id or len(user_id) > 64:
            raise DetectorError("user id must be 1..64 characters")
        if any(c not in _USER_CHARS for c in user_id):
            raise DetectorError(
                "user id limited to printable ASCII without whitespace"
            )

    def register(self, user_id: str, password: str) -> UserRecord:
        self._check_user_id(user_id)
        require_valid_password(password)
        with self._lock:
            if user_id in self._users:
                raise DuplicateUserError(f"user {user_id!r} already exists")
            salt = os.urandom(16)
            rec = UserRecord(
                user_id=user_id,
                salt=salt,
                digest=_digest(password, salt, self.iterations),
                iterations=self.iterations,
                created_at=_now_iso(self._clock),
            )
            self._users[user_id] = rec
            self._append_record(rec)
            return rec

    def has_user(self, user_id: str) -> bool:
        return user_id in self._users

    # -- logins ---------------------------------------------------------------

    def check_login_attempt(
        self,
        user_id: str,
        submitted: str,
        ghost_result: Optional[GhostResult] = None,
    ) -> LoginOutcome:
        """Verify a login and classify the failure mode.

        A success with an accompanying ghost record also refreshes the
        user's honeyword set.  Unknown users are logged internally but
        answered exactly like a benign failure.
        """
        with self._lock:
            rec = self._users.get(user_id)
            if rec is None:
                log.info("login for unknown user %r", user_id)
                return FAIL_BENIGN
            candidate = _digest(submitted, rec.salt, rec.iterations)
            if hmac.compare_digest(candidate, rec.digest):
                if ghost_result is not None:
                    self.record_successful_login(user_id, ghost_result)
                return SUCCESS
            if self.filter.lookup(scoped_key(user_id, submitted)):
                self._raise_alarm(user_id)
                return FAIL_ALARM
            return FAIL_BENIGN

    def record_successful_login(
        self, user_id: str, ghost_result: GhostResult
    ) -> int:
        """Insert this session's decoys into the filter.

        Returns the number of honeywords inserted.  The ghost record's
        extracted original must match the registered password's digest;
        mismatched records (a confused or malicious client) are ignored.
        """
        with self._lock:
            rec = self._users.get(user_id)
            if rec is None:
                raise DetectorError(f"unknown user {user_id!r}")
            ghost_result.verify()
            candidate = _digest(ghost_result.original, rec.salt, rec.iterations)
            if not hmac.compare_digest(candidate, rec.digest):
                log.warning(
                    "ghost record for %r does not extract to the registered "
                    "password; not recording",
                    user_id,
                )
                return 0
            if self._oracle is None:
                honeywords = [ghost_result.ghost] if ghost_result.ghost != ghost_result.original else []
            else:
                honeywords = generate_honeywords(
                    ghost_result.ghost,
                    ghost_result.original,
                    self._oracle,
                    self.honeyword_count,
                )
            for word in honeywords:
                self.filter.insert(scoped_key(user_id, word))
            if self.filter.saturated:
                log.warning(
                    "honeyword filter beyond design capacity "
                    "(%d > %d); consider a rebuild",
                    self.filter.inserted,
                    self.filter.params.expected_n,
                )
            rec.honeyword_count += len(honeywords)
            self._append_record(rec)
            return len(honeywords)

    def _raise_alarm(self, user_id: str) -> None:
        stamp = _now_iso(self._clock)
        self._alarms.append((stamp, user_id))
        log.warning("honeyword alarm for user %r", user_id)
        if self._dir is not None:
            with open(
                os.path.join(self._dir, ALARMS_FILE), "a", encoding="utf-8"
            ) as fh:
                fh.write(f"{stamp}\t{user_id}\tALARM\n")
                fh.flush()
                os.fsync(fh.fileno())

    def alarms(self) -> List[Tuple[str, str]]:
        """(timestamp, user_id) pairs, oldest first."""
        with self._lock:
            return list(self._alarms)

    # -- maintenance -------------------------------------------------------------

    def rebuild_filter(self, params: BloomParams) -> None:
        """Replace the filter with a fresh, empty one.

        Honeywords are intentionally never stored in recoverable form, so a
        rebuild resets coverage; it refills as users log in again.
        """
        with self._lock:
            self.filter = BloomFilter(params)
            for rec in self._users.values():
                rec.honeyword_count = 0
                self._append_record(rec)
            self.save()
