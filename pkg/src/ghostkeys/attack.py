"""Eavesdropper simulation and defense evaluation.

The threat model: an attacker records every keystroke of an entry session
(real and ghost alike, possibly with sensor noise) and tries to recover the
password, knowing it must be a subsequence of the observed string.  The
guessing oracle enumerates all distinct subsequences within the legal length
window and ranks them by a posterior-style score combining the language
model with a geometric prior on deletion count:

    score(c) = -mean_nll(c) + ln C(n, n-|c|) + (n-|c|) ln rho + |c| ln(1-rho)

Enumeration is exponential in the observation length by design; beyond
`ENUMERATION_CAP` observed characters it is refused, which the evaluation
treats as an attacker miss.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .alphabet import MAX_PASSWORD_LEN, MIN_PASSWORD_LEN, char_index
from .generator import GeneratorConfig, generate, mix_seed
from .layout import KeyboardLayout
from .markov import MarkovModel
from .meter import MeterCalibration

ENUMERATION_CAP = 24
DELETION_PRIOR = 0.25  # rho: prior probability that an observed char is a ghost

METRICS_HEADER = (
    "r,constraint,lambda_or_tau,selection,category_class,category_len,"
    "budget,accuracy,mean_abs_overhead,mean_rel_overhead,n"
)


class EnumerationError(ValueError):
    pass


class ObservationTooLongError(EnumerationError):
    """Observed string exceeds the exhaustive-enumeration cap."""


class NoCandidatesError(EnumerationError):
    """No subsequence satisfies the candidate length bounds."""


# -- password categories -------------------------------------------------------


@dataclass(frozen=True)
class PasswordCategory:
    """Composition class (distinct character classes used) and length band."""

    class_count: int
    length_band: str


def categorize(password: str) -> PasswordCategory:
    has_digit = any(c.isdigit() for c in password)
    has_letter = any(c.isalpha() for c in password)
    has_symbol = any(not c.isalnum() for c in password)
    n_classes = int(has_digit) + int(has_letter) + int(has_symbol)
    if len(password) < 10:
        band = "short"
    elif len(password) <= 16:
        band = "medium"
    else:
        band = "long"
    return PasswordCategory(n_classes, band)


# -- sensor noise ---------------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    """Keylogger imprecision: per-keystroke neighbor substitution."""

    rate: float = 0.05
    radius: float = 1.2
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("noise rate must lie in [0, 1]")
        if self.radius < 0.0:
            raise ValueError("noise radius must be >= 0")


def simulate_inference(
    layout: KeyboardLayout, typed: str, noise: NoiseConfig
) -> str:
    """What the eavesdropper records for the emitted string `typed`.

    Each keystroke is independently misread with probability `rate` as a
    uniformly chosen key within `radius`; a keystroke with no neighbor in
    range is always read correctly.
    """
    rng = random.Random(noise.rng_seed)
    out = []
    for c in typed:
        if rng.random() < noise.rate:
            neighbors = sorted(layout.adjacent(c, noise.radius))
            if neighbors:
                c = neighbors[rng.randrange(len(neighbors))]
        out.append(c)
    return "".join(out)


# -- the guessing oracle --------------------------------------------------------


def _context_tables(
    obs_local: np.ndarray,
    next_occ: np.ndarray,
    local_chars: Sequence[str],
    model: MarkovModel,
) -> np.ndarray:
    """Per-context step costs for the kernel.

    A context packs the last three candidate characters as local indices in
    base d+1 (d = local alphabet size, index d = "absent").  Only contexts
    reachable as a subsequence prefix of the observation are filled; the
    kernel never reads the rest.
    """
    d = len(local_chars)
    base = d + 1
    absent = d
    cols = np.array([char_index(c) for c in local_chars], dtype=np.intp)
    table = np.zeros((base * base * base, d), dtype=np.float64)

    def fill(packed: int, key: str) -> None:
        table[packed, :] = model.nll_row(key)[cols]

    fill((absent * base + absent) * base + absent, "")
    # earliest end position of each 1- and 2-char subsequence, for cheap
    # reachability of the (a, b, c) contexts
    for a in range(d):
        fill((absent * base + absent) * base + a, local_chars[a])
        end_a = next_occ[0, a]
        for b in range(d):
            end_ab = next_occ[end_a + 1, b]
            if end_ab < 0:
                continue
            fill(
                (absent * base + a) * base + b,
                local_chars[a] + local_chars[b],
            )
            nxt = next_occ[end_ab + 1]
            for c in range(d):
                if nxt[c] >= 0:
                    fill(
                        (a * base + b) * base + c,
                        local_chars[a] + local_chars[b] + local_chars[c],
                    )
    return table


def enumerate_guesses(
    observed: str,
    model: MarkovModel,
    budget: int,
    length_bounds: Tuple[int, int] = (MIN_PASSWORD_LEN, MAX_PASSWORD_LEN),
    rho: float = DELETION_PRIOR,
    cap: int = ENUMERATION_CAP,
) -> List[str]:
    """Rank the `budget` most likely originals hidden in `observed`.

    Candidates are the distinct subsequences of the observation whose length
    falls within `length_bounds`.  The ranking is deterministic: ties in
    score break lexicographically, and the top-j list is a prefix of the
    top-k list for j < k.
    """
    n = len(observed)
    if n == 0:
        raise NoCandidatesError("observed string is empty")
    if n > cap:
        raise ObservationTooLongError(
            f"observation of length {n} exceeds enumeration cap {cap}"
        )
    if model.order > 3:
        raise EnumerationError("guessing oracle supports model order <= 3")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if budget <= 0:
        return []
    lo = max(1, length_bounds[0])
    hi = min(length_bounds[1], n)
    if hi < lo:
        raise NoCandidatesError(
            f"observation shorter than minimum candidate length {lo}"
        )

    local_chars = sorted(set(observed))
    index = {c: i for i, c in enumerate(local_chars)}
    d = len(local_chars)
    obs_local = np.array([index[c] for c in observed], dtype=np.int32)

    next_occ = np.full((n + 1, d), -1, dtype=np.int32)
    for p in range(n - 1, -1, -1):
        next_occ[p] = next_occ[p + 1]
        next_occ[p, obs_local[p]] = p

    table = _context_tables(obs_local, next_occ, local_chars, model)

    prior = np.zeros(hi + 1, dtype=np.float64)
    for length in range(lo, hi + 1):
        prior[length] = (
            math.log(math.comb(n, n - length))
            + (n - length) * math.log(rho)
            + length * math.log(1.0 - rho)
        )

    entries = _kernels.top_subsequences(
        obs_local, next_occ, table, prior, lo, hi, budget
    )
    return [
        "".join(local_chars[b] for b in cand) for _score, cand in entries
    ]


# -- defense evaluation ----------------------------------------------------------


@dataclass
class _CellStats:
    n: int = 0
    sum_abs: float = 0.0
    sum_rel: float = 0.0
    hits: Dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class MetricsRow:
    r: float
    constraint: str
    lambda_or_tau: float
    selection: str
    category_class: str
    category_len: str
    budget: int
    accuracy: float
    mean_abs_overhead: float
    mean_rel_overhead: float
    n: int

    def as_csv(self) -> str:
        return (
            f"{self.r:g},{self.constraint},{self.lambda_or_tau:g},"
            f"{self.selection},{self.category_class},{self.category_len},"
            f"{self.budget},{self.accuracy:.6f},{self.mean_abs_overhead:.6f},"
            f"{self.mean_rel_overhead:.6f},{self.n}"
        )


def evaluate_defense(
    passwords: Sequence[str],
    configs: Sequence[GeneratorConfig],
    noise: NoiseConfig,
    budgets: Sequence[int],
    model: MarkovModel,
    calibration: MeterCalibration,
    layout: KeyboardLayout,
    cap: int = ENUMERATION_CAP,
) -> Tuple[List[MetricsRow], List[str]]:
    """Sweep generator configs against the guessing oracle.

    For every password and config, run an entry session, corrupt the emitted
    string with sensor noise, and ask the oracle for its top guesses.  A hit
    at budget k means the original ranked within the top k.  Observations
    too long to enumerate count as misses (the attack is infeasible there);
    a note reports how many.

    Per-password randomness is derived from each config's rng_seed and the
    password index, so configs sharing a seed face identical random draws
    (paired comparisons across r values).
    """
    budgets = sorted(set(budgets))
    if not budgets or budgets[0] <= 0:
        raise ValueError("budgets must be positive")
    max_budget = budgets[-1]
    rows: List[MetricsRow] = []
    notes: List[str] = []
    for config in configs:
        cells: Dict[Tuple[str, str], _CellStats] = {}
        skipped = 0
        for i, pw in enumerate(passwords):
            cfg_i = replace(config, rng_seed=mix_seed(config.rng_seed, 17, i))
            result = generate(cfg_i, pw, model, calibration, layout)
            observed = simulate_inference(
                layout,
                result.ghost,
                replace(noise, rng_seed=mix_seed(noise.rng_seed, 23, i)),
            )
            report = layout.overhead(pw, result.ghost)
            try:
                guesses = enumerate_guesses(
                    observed, model, max_budget, cap=cap
                )
                try:
                    rank = guesses.index(pw)
                except ValueError:
                    rank = None
            except ObservationTooLongError:
                rank = None
                skipped += 1
            cat = categorize(pw)
            for key in (
                (str(cat.class_count), cat.length_band),
                (str(cat.class_count), "all"),
                ("all", cat.length_band),
                ("all", "all"),
            ):
                cell = cells.get(key)
                if cell is None:
                    cell = cells[key] = _CellStats()
                cell.n += 1
                cell.sum_abs += report.absolute_overhead
                cell.sum_rel += report.relative_overhead
                for b in budgets:
                    if rank is not None and rank < b:
                        cell.hits[b] = cell.hits.get(b, 0) + 1
        if skipped:
            notes.append(
                f"config r={config.r:g} {config.constraint.label()}: "
                f"{skipped} observation(s) beyond the enumeration cap, "
                "counted as misses"
            )
        lam = 0.0 if config.constraint.kind == "none" else config.constraint.value
        for (cls, band) in sorted(cells):
            cell = cells[cls, band]
            for b in budgets:
                rows.append(
                    MetricsRow(
                        r=config.r,
                        constraint=config.constraint.kind,
                        lambda_or_tau=lam,
                        selection=config.selection,
                        category_class=cls,
                        category_len=band,
                        budget=b,
                        accuracy=cell.hits.get(b, 0) / cell.n,
                        mean_abs_overhead=cell.sum_abs / cell.n,
                        mean_rel_overhead=cell.sum_rel / cell.n,
                        n=cell.n,
                    )
                )
    return rows, notes


def write_metrics_csv(rows: Iterable[MetricsRow], fh) -> None:
    fh.write(METRICS_HEADER + "\n")
    for row in rows:
        fh.write(row.as_csv() + "\n")


# -- detector evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class DetectionRow:
    r: float
    attempts: int
    detection_rate: float
    breaches: int
    n: int


def evaluate_detector(
    store,
    passwords: Sequence[str],
    configs: Sequence[GeneratorConfig],
    honeyword_count: int,
    attempts: Sequence[int],
    model: MarkovModel,
    calibration: MeterCalibration,
    layout: KeyboardLayout,
    noise: Optional[NoiseConfig] = None,
) -> List[DetectionRow]:
    """Fraction of compromised accounts whose attacker trips an alarm.

    For each config and password: register an account, run one legitimate
    entry session (which seeds the honeyword filter), then replay the
    attacker's ranked guesses against the login endpoint.  The attacker
    stops early on a successful login; alarms are silent, so failed guesses
    keep coming.  When the observation is too long to enumerate, the
    attacker falls back to submitting the observed string itself.
    """
    attempts = sorted(set(attempts))
    if not attempts or attempts[0] <= 0:
        raise ValueError("attempts must be positive")
    max_attempts = attempts[-1]
    rows: List[DetectionRow] = []
    for ci, config in enumerate(configs):
        alarm_at: List[Optional[int]] = []
        breach_at: List[Optional[int]] = []
        for i, pw in enumerate(passwords):
            user = f"eval-{ci}-{i}"
            store.register(user, pw)
            cfg_i = replace(config, rng_seed=mix_seed(config.rng_seed, 17, i))
            result = generate(cfg_i, pw, model, calibration, layout)
            outcome = store.check_login_attempt(user, pw, ghost_result=result)
            if outcome.verdict != "success":
                raise RuntimeError("legitimate login failed during evaluation")
            observed = result.ghost
            if noise is not None:
                observed = simulate_inference(
                    layout, observed, replace(noise, rng_seed=mix_seed(noise.rng_seed, 23, i))
                )
            try:
                guesses = enumerate_guesses(observed, model, max_attempts)
            except EnumerationError:
                guesses = [observed]
            first_alarm: Optional[int] = None
            first_breach: Optional[int] = None
            for j, guess in enumerate(guesses[:max_attempts]):
                verdict = store.check_login_attempt(user, guess).verdict
                if verdict == "success":
                    first_breach = j
                    break  # attacker is in; no further guesses
                if verdict == "fail_alarm" and first_alarm is None:
                    first_alarm = j
            alarm_at.append(first_alarm)
            breach_at.append(first_breach)
        for a in attempts:
            detected = sum(
                1 for fa in alarm_at if fa is not None and fa < a
            )
            breaches = sum(
                1 for fb in breach_at if fb is not None and fb < a
            )
            rows.append(
                DetectionRow(
                    r=config.r,
                    attempts=a,
                    detection_rate=detected / len(passwords),
                    breaches=breaches,
                    n=len(passwords),
                )
            )
    return rows
