"""Seed-pinned default model and calibration bundle.

The CLI and service need a Markov model and meter calibration even when the
operator supplies none.  Rather than shipping binary artifacts, the bundle is
rebuilt on demand from fixed seeds, so every default artifact is reproducible
byte-for-byte and nothing opaque lives in the repository.

Three disjoint corpora are involved:

* a training corpus for the Markov model (seed 7);
* a held-out human corpus for meter calibration (seed 13) — calibrating on
  the training corpus is a leakage bug: the model assigns its own training
  set a far lower nll than unseen text, which drags the logistic midpoint
  down until ordinary typing scores as "already random" and the generator
  stops injecting;
* a uniform-random twin of the calibration corpus (seed 11).

The calibration corpora are password *prefixes*, because the meter scores
growing prefixes during live entry (see `corpus.prefix_corpus`).
"""

from __future__ import annotations

from functools import lru_cache
from typing import List

from .corpus import prefix_corpus, random_like, synthetic_passwords
from .generator import NO_CONSTRAINT, Constraint, GeneratorConfig
from .layout import default_layout
from .markov import MarkovModel
from .meter import MeterCalibration, calibrate

TRAIN_SEED = 7
TRAIN_SIZE = 3000
HELD_OUT_SEED = 13
HELD_OUT_SIZE = 1000
RANDOM_SEED = 11

MARKOV_ORDER = 3
MARKOV_SMOOTHING = 0.01


@lru_cache(maxsize=1)
def default_training_corpus() -> tuple:
    return tuple(synthetic_passwords(TRAIN_SIZE, seed=TRAIN_SEED))


@lru_cache(maxsize=1)
def default_model() -> MarkovModel:
    return MarkovModel.train(
        list(default_training_corpus()),
        order=MARKOV_ORDER,
        smoothing=MARKOV_SMOOTHING,
    )


@lru_cache(maxsize=1)
def default_calibration() -> MeterCalibration:
    held_out = synthetic_passwords(HELD_OUT_SIZE, seed=HELD_OUT_SEED)
    prefixes = prefix_corpus(held_out)
    return calibrate(
        default_model(), prefixes, random_like(prefixes, seed=RANDOM_SEED)
    )


def default_bundle() -> tuple:
    """(model, calibration, layout) built from the pinned seeds."""
    return default_model(), default_calibration(), default_layout()


def evaluation_passwords(n: int, seed: int, min_len: int = 16) -> List[str]:
    """Corpus shape used by the shipped evaluation runs.

    The length floor keeps the exact-subsequence oracle's 24-character
    enumeration cap meaningful: at high randomness levels nearly every
    ghost string must exceed the cap, which is what makes high-r cells
    infeasible to invert rather than merely slow.
    """
    return synthetic_passwords(n, seed=seed, min_len=min_len)


# Shipped evaluation grid.  The injection-probability floor matters: with
# p_min = 0 an unlucky early ghost burst can score the short prefix as
# "already random", hold the EMA above target for ~1/alpha steps, and park
# p at zero through most of the password.  0.25 sits below the equilibrium
# injection rate of even the lowest-r cell, so it only catches that
# pathological tail.
EVAL_P_MIN = 0.25
EVAL_R_SWEEP = (0.3, 0.4, 0.5, 0.6, 0.7)
EVAL_CONSTRAINT_R = 0.4
EVAL_CONSTRAINTS = (
    Constraint("soft", 0.2),
    Constraint("soft", 0.5),
    Constraint("hard", 3.0),
    Constraint("hard", 6.0),
)


def evaluation_config(
    r: float, constraint: Constraint = NO_CONSTRAINT
) -> GeneratorConfig:
    return GeneratorConfig(r=r, p_min=EVAL_P_MIN, constraint=constraint)


def evaluation_grid(rs=EVAL_R_SWEEP, with_constraints: bool = True):
    """Generator configs for the r sweep plus distance-constraint cells."""
    configs = [evaluation_config(r) for r in rs]
    if with_constraints:
        configs.extend(
            evaluation_config(EVAL_CONSTRAINT_R, c) for c in EVAL_CONSTRAINTS
        )
    return configs


__all__ = [
    "TRAIN_SEED",
    "TRAIN_SIZE",
    "HELD_OUT_SEED",
    "HELD_OUT_SIZE",
    "RANDOM_SEED",
    "MARKOV_ORDER",
    "MARKOV_SMOOTHING",
    "EVAL_P_MIN",
    "EVAL_R_SWEEP",
    "EVAL_CONSTRAINT_R",
    "EVAL_CONSTRAINTS",
    "default_training_corpus",
    "default_model",
    "default_calibration",
    "default_bundle",
    "evaluation_passwords",
    "evaluation_config",
    "evaluation_grid",
]
