"""Adaptive ghost keystroke injection.

The engine sits between the user and the password field.  Before each real
keystroke it may demand one or more decoy ("ghost") keystrokes; the user's
real characters are interleaved with these so an eavesdropper observing the
full keystroke sequence sees a string whose measured randomness is steered
toward a target level r.  The injection probability p adapts per keystroke:
an exponential moving average of the randomness meter chases r, p rising
while the average is below target and falling once above.

The real password is always a subsequence of the emitted ghost string, and a
boolean mask records which emitted positions were ghosts, so the original is
exactly recoverable by the legitimate client.

Two independent RNG streams drive a session: one for the interleaving
decisions and ghost choices while typing, one for the mandatory trailing
ghosts appended during finalization.  Keeping the streams separate makes the
batch API and an eagerly polled interactive session produce byte-identical
results for the same seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .alphabet import (
    ALPHABET,
    ALPHABET_SIZE,
    AlphabetError,
    MAX_PASSWORD_LEN,
    MIN_PASSWORD_LEN,
    char_index,
    require_valid_password,
)
from .layout import KeyboardLayout
from .markov import MarkovModel
from .meter import MeterCalibration

US = "\x1f"  # unit separator in the wire encoding of a GhostResult

# A trailing top-up may not be configured to dwarf the password itself.
MAX_MIN_TOTAL_GHOST = 2 * MAX_PASSWORD_LEN

SELECTIONS = ("uniform", "markov")
CONSTRAINT_KINDS = ("none", "soft", "hard")

_UNIFORM = np.full(ALPHABET_SIZE, 1.0 / ALPHABET_SIZE)
_UNIFORM.setflags(write=False)


class ConfigError(ValueError):
    pass


class ConstraintError(ValueError):
    """No candidate key satisfies the geometric constraint."""


class SessionStateError(RuntimeError):
    pass


class GhostMismatchError(ValueError):
    """Client echoed a different character than the engine demanded."""


class WireFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    """Geometric restriction on ghost candidates relative to the last key.

    kind "soft" reweights candidates by exp(-value * distance); kind "hard"
    forbids candidates farther than `value`.  Either applies only from the
    second emitted character on.
    """

    kind: str = "none"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        if self.kind != "none" and (
            not math.isfinite(self.value) or self.value < 0.0
        ):
            raise ConfigError("constraint value must be finite and >= 0")

    def label(self) -> str:
        return self.kind if self.kind == "none" else f"{self.kind}:{self.value:g}"


NO_CONSTRAINT = Constraint()


@dataclass(frozen=True)
class GeneratorConfig:
    r: float = 0.5
    p0: float = 0.5
    delta_p: float = 0.05
    alpha: float = 0.1
    p_min: float = 0.0
    p_max: float = 0.9
    max_consecutive_ghost: int = 3
    min_total_ghost: Optional[int] = None  # None: max(2, ceil(0.15 * len))
    selection: str = "markov"
    constraint: Constraint = NO_CONSTRAINT
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError("r must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0.0 <= self.delta_p <= 1.0:
            raise ConfigError("delta_p must lie in [0, 1]")
        if not 0.0 <= self.p_min <= self.p0 <= self.p_max <= 1.0:
            raise ConfigError("need 0 <= p_min <= p0 <= p_max <= 1")
        if self.max_consecutive_ghost < 1:
            raise ConfigError("max_consecutive_ghost must be >= 1")
        if self.min_total_ghost is not None and not (
            0 <= self.min_total_ghost <= MAX_MIN_TOTAL_GHOST
        ):
            raise ConfigError(
                f"min_total_ghost must lie in [0, {MAX_MIN_TOTAL_GHOST}]"
            )
        if self.selection not in SELECTIONS:
            raise ConfigError(f"unknown selection strategy {self.selection!r}")

    def min_total_for(self, real_len: int) -> int:
        if self.min_total_ghost is not None:
            return self.min_total_ghost
        return max(2, math.ceil(0.15 * real_len))


PRESETS = {
    "default": GeneratorConfig(),
    "high-noise": GeneratorConfig(r=0.7, p0=0.6),
    "low-overhead": GeneratorConfig(
        r=0.4, constraint=Constraint("soft", 0.5)
    ),
}


# -- session actions ----------------------------------------------------------


@dataclass(frozen=True)
class AwaitReal:
    """The engine is ready for the next real keystroke."""


@dataclass(frozen=True)
class RequireGhost:
    """The engine demands this decoy character be typed next."""

    char: str


@dataclass(frozen=True)
class Done:
    """The session is finalized; the result is available."""


AWAIT_REAL = AwaitReal()
DONE = Done()

Action = Union[AwaitReal, RequireGhost, Done]


# -- results -----------------------------------------------------------------


@dataclass(frozen=True)
class GhostResult:
    """Outcome of one entry session.

    `mask[i]` is True where `ghost[i]` is an injected character; positions
    with False spell the original in order.
    """

    original: str
    ghost: str
    mask: Tuple[bool, ...]

    def ghost_count(self) -> int:
        return sum(self.mask)

    def verify(self) -> None:
        if len(self.mask) != len(self.ghost):
            raise WireFormatError("mask length does not match ghost length")
        real = "".join(c for c, m in zip(self.ghost, self.mask) if not m)
        if real != self.original:
            raise WireFormatError("mask does not extract the original")

    def to_wire(self) -> str:
        bits = "".join("1" if m else "0" for m in self.mask)
        return f"{self.original}{US}{self.ghost}{US}{bits}"

    @classmethod
    def from_wire(cls, record: str) -> "GhostResult":
        parts = record.split(US)
        if len(parts) != 3:
            raise WireFormatError(
                f"expected 3 fields in ghost record, got {len(parts)}"
            )
        original, ghost, bits = parts
        if any(b not in "01" for b in bits):
            raise WireFormatError("mask field must be 0/1 bits")
        result = cls(original, ghost, tuple(b == "1" for b in bits))
        result.verify()
        return result


def extract_real(result: GhostResult) -> str:
    """Recover the original password from a ghost record."""
    if len(result.mask) != len(result.ghost):
        raise WireFormatError("mask length does not match ghost length")
    return "".join(c for c, m in zip(result.ghost, result.mask) if not m)


# -- ghost character choice ---------------------------------------------------


def inject_char(
    context: str,
    model: MarkovModel,
    layout: KeyboardLayout,
    selection: str = "markov",
    constraint: Constraint = NO_CONSTRAINT,
    rng: Optional[random.Random] = None,
) -> str:
    """Pick one ghost character to follow `context`.

    Selection "markov" samples the model's next-character distribution so
    the decoy blends into plausible text; "uniform" ignores the model.  A
    geometric constraint reweights or filters candidates by key distance
    from the previously emitted character.
    """
    if selection not in SELECTIONS:
        raise ConfigError(f"unknown selection strategy {selection!r}")
    if rng is None:
        rng = random.Random()
    if selection == "markov":
        probs = model.next_char_distribution(context)
    else:
        probs = _UNIFORM
    if constraint.kind != "none" and context:
        dist = layout.distance_row(context[-1])
        if constraint.kind == "soft":
            weights = probs * np.exp(-constraint.value * dist)
        else:
            weights = probs * (dist <= constraint.value)
        total = float(weights.sum())
        if total <= 0.0:
            raise ConstraintError(
                f"no key within {constraint.value:g} of {context[-1]!r}"
            )
    else:
        weights = probs
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return ALPHABET[min(idx, ALPHABET_SIZE - 1)]


# -- seeding ------------------------------------------------------------------


def mix_seed(*parts: int) -> int:
    """Stable 64-bit mix of integer seed components (splitmix-style)."""
    x = 0x243F6A8885A308D3
    for part in parts:
        x ^= part & 0xFFFFFFFFFFFFFFFF
        x = (x * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 31
        x = (x * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 27
    return x


_TYPING_LANE = 0x1
_DRAIN_LANE = 0x2


# -- the session engine -------------------------------------------------------

_TYPING, _DRAINING, _DONE = range(3)


class GhostSession:
    """Keystroke-by-keystroke ghost injection state machine.

    Drive it with poll() and key():

    * poll() returns the next required action without consuming it;
      repeated polls are idempotent until the action is satisfied.
    * key(c) satisfies the pending action: the demanded ghost character, or
      the next real character when the engine is awaiting one.
    * begin_finalize() declares the real password complete; subsequent
      polls demand trailing ghosts until the injection minimum is met.
    * finalize() runs begin_finalize() and auto-echoes the trailing ghosts.

    A pending ghost demand that was never satisfied is abandoned by
    begin_finalize(); the emitted string contains only acknowledged keys.
    """

    def __init__(
        self,
        config: GeneratorConfig,
        model: MarkovModel,
        calibration: MeterCalibration,
        layout: KeyboardLayout,
    ):
        self.config = config
        self._model = model
        self._cal = calibration
        self._layout = layout
        self._rng_typing = random.Random(mix_seed(config.rng_seed, _TYPING_LANE))
        self._rng_drain = random.Random(mix_seed(config.rng_seed, _DRAIN_LANE))
        self._ghost: List[str] = []
        self._mask: List[bool] = []
        self._real_count = 0
        self._total_ghost = 0
        self._consecutive_ghost = 0
        self._nll_sum = 0.0
        self._p = config.p0
        self._r_ema = config.r
        self._phase = _TYPING
        self._pending: Optional[Action] = None
        self._min_total = 0
        self._result: Optional[GhostResult] = None

    # -- introspection ------------------------------------------------------

    @property
    def p(self) -> float:
        return self._p

    @property
    def r_ema(self) -> float:
        return self._r_ema

    @property
    def emitted(self) -> str:
        return "".join(self._ghost)

    def _context(self) -> str:
        return "".join(self._ghost[-self._model.order:])

    # -- driving ------------------------------------------------------------

    def poll(self) -> Action:
        if self._phase == _DONE:
            return DONE
        if self._pending is not None:
            return self._pending
        if self._phase == _TYPING:
            if self._consecutive_ghost >= self.config.max_consecutive_ghost:
                self._pending = AWAIT_REAL
            elif self._rng_typing.random() < self._p:
                self._pending = RequireGhost(
                    inject_char(
                        self._context(),
                        self._model,
                        self._layout,
                        self.config.selection,
                        self.config.constraint,
                        self._rng_typing,
                    )
                )
            else:
                self._pending = AWAIT_REAL
            return self._pending
        # draining: only ghost demands remain
        if self._total_ghost < self._min_total:
            self._pending = RequireGhost(
                inject_char(
                    self._context(),
                    self._model,
                    self._layout,
                    self.config.selection,
                    self.config.constraint,
                    self._rng_drain,
                )
            )
            return self._pending
        self._finish()
        return DONE

    def key(self, c: str) -> None:
        """Feed one keystroke, satisfying the pending action."""
        if len(c) != 1:
            raise AlphabetError("key() takes a single character")
        action = self.poll()
        if isinstance(action, Done):
            raise SessionStateError("session already finalized")
        if isinstance(action, RequireGhost):
            if c != action.char:
                # state intact: the same ghost is demanded again
                raise GhostMismatchError(
                    f"engine demanded {action.char!r}, got {c!r}"
                )
            self._append(c, is_ghost=True)
        else:
            char_index(c)  # real keys must be on the supported alphabet
            if self._real_count >= MAX_PASSWORD_LEN:
                raise SessionStateError(
                    f"real password may not exceed {MAX_PASSWORD_LEN} characters"
                )
            self._append(c, is_ghost=False)
        self._pending = None

    def begin_finalize(self) -> None:
        """Declare the real password complete and enter the drain phase."""
        if self._phase == _DONE:
            raise SessionStateError("session already finalized")
        if self._phase == _DRAINING:
            raise SessionStateError("finalization already in progress")
        if self._real_count < MIN_PASSWORD_LEN:
            raise SessionStateError(
                f"real password needs at least {MIN_PASSWORD_LEN} characters"
            )
        self._pending = None  # abandon any unacknowledged demand
        self._min_total = self.config.min_total_for(self._real_count)
        self._phase = _DRAINING

    def finalize(self) -> GhostResult:
        """Drain trailing ghosts automatically and return the result."""
        self.begin_finalize()
        while True:
            action = self.poll()
            if isinstance(action, RequireGhost):
                self.key(action.char)
            else:
                break
        assert self._result is not None
        return self._result

    def result(self) -> GhostResult:
        if self._phase != _DONE or self._result is None:
            raise SessionStateError("session not finalized yet")
        return self._result

    # -- internals ----------------------------------------------------------

    def _append(self, c: str, is_ghost: bool) -> None:
        # Meter update per Algorithm 1: score the whole emitted prefix,
        # fold into the EMA, then steer p toward the target r.
        step_nll = -self._model.log_prob(self._context(), c)
        self._ghost.append(c)
        self._mask.append(is_ghost)
        if is_ghost:
            self._total_ghost += 1
            self._consecutive_ghost += 1
        else:
            self._real_count += 1
            self._consecutive_ghost = 0
        self._nll_sum += step_nll
        r_hat = self._cal.score_from_nll(self._nll_sum / len(self._ghost))
        cfg = self.config
        self._r_ema = (1.0 - cfg.alpha) * self._r_ema + cfg.alpha * r_hat
        if self._r_ema < cfg.r:
            self._p = min(cfg.p_max, self._p + cfg.delta_p)
        else:
            self._p = max(cfg.p_min, self._p - cfg.delta_p)

    def _finish(self) -> None:
        self._phase = _DONE
        original = "".join(
            c for c, m in zip(self._ghost, self._mask) if not m
        )
        self._result = GhostResult(
            original=original,
            ghost="".join(self._ghost),
            mask=tuple(self._mask),
        )


def generate(
    config: GeneratorConfig,
    password: str,
    model: MarkovModel,
    calibration: MeterCalibration,
    layout: KeyboardLayout,
) -> GhostResult:
    """Run a whole entry session for `password` in one call."""
    require_valid_password(password)
    session = GhostSession(config, model, calibration, layout)
    for c in password:
        while True:
            action = session.poll()
            if isinstance(action, RequireGhost):
                session.key(action.char)
            else:
                session.key(c)
                break
    return session.finalize()
