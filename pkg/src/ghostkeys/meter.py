"""Calibrated randomness meter.

Scores a string's apparent randomness in [0, 1] from its mean per-character
negative log-likelihood under a Markov model, squashed through a logistic:

    score = 1 / (1 + exp(-a * (nll - b)))

Calibration picks `b` as the midpoint between the mean nll of a human-style
corpus and the mean nll of uniform-random strings, and `a = 4 / gap` so the
two corpora land at roughly 0.12 and 0.88.  A non-positive gap means the
model cannot separate the corpora and calibration fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .markov import MarkovModel

HEADER = "ghostkeys-meter v1"

# Keeps the logistic inside the open interval (0, 1) in float64.
_Z_CLAMP = 36.0


class CalibrationError(ValueError):
    pass


class CalibrationFormatError(ValueError):
    """Calibration file is malformed or references a different model."""


@dataclass(frozen=True)
class MeterCalibration:
    scale: float
    midpoint: float
    model_crc: int

    def score_from_nll(self, nll: float) -> float:
        z = self.scale * (nll - self.midpoint)
        z = max(-_Z_CLAMP, min(_Z_CLAMP, z))
        return 1.0 / (1.0 + math.exp(-z))

    def evaluate(self, model: MarkovModel, text: str) -> float:
        """Randomness score of `text`; the empty string scores 0.5."""
        if model.crc() != self.model_crc:
            raise CalibrationFormatError("calibration was fit to a different model")
        if not text:
            return 0.5
        return self.score_from_nll(model.sequence_nll(text))


def calibrate(
    model: MarkovModel,
    human_corpus: Sequence[str],
    random_corpus: Sequence[str],
) -> MeterCalibration:
    """Fit logistic parameters separating the two corpora under `model`."""
    if not human_corpus or not random_corpus:
        raise CalibrationError("calibration corpora must be non-empty")
    mean_h = sum(model.sequence_nll(s) for s in human_corpus) / len(human_corpus)
    mean_r = sum(model.sequence_nll(s) for s in random_corpus) / len(random_corpus)
    gap = mean_r - mean_h
    if gap <= 0.0:
        raise CalibrationError(
            f"corpora are not separable: human nll {mean_h:.3f} >= "
            f"random nll {mean_r:.3f}"
        )
    return MeterCalibration(
        scale=4.0 / gap,
        midpoint=(mean_h + mean_r) / 2.0,
        model_crc=model.crc(),
    )


def save_calibration(cal: MeterCalibration, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# {HEADER}\n")
        fh.write(f"scale={cal.scale!r}\n")
        fh.write(f"midpoint={cal.midpoint!r}\n")
        fh.write(f"model_crc={cal.model_crc:08x}\n")


def load_calibration(path: str) -> MeterCalibration:
    fields = {}
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline().strip()
        if first != f"# {HEADER}":
            raise CalibrationFormatError("not a calibration file")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CalibrationFormatError(f"malformed line: {line!r}")
            k, v = line.split("=", 1)
            fields[k] = v
    try:
        return MeterCalibration(
            scale=float(fields["scale"]),
            midpoint=float(fields["midpoint"]),
            model_crc=int(fields["model_crc"], 16),
        )
    except (KeyError, ValueError) as exc:
        raise CalibrationFormatError(f"incomplete calibration file: {exc}") from exc
