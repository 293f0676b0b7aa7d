"""Spectral distance losses and utterance-level permutation alignment.

Every loss is a log10 of a sum over all (frame, bin) coefficients, with an
additive floor so that a perfect estimate gives ``log10(floor)`` instead of
minus infinity.
"""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateTargetError, ShapeError, UnsupportedLossError

KINDS = ("MSE", "cMSE", "MAE", "SDR")


@dataclass(frozen=True)
class LossSpec:
    kind: str = "cMSE"
    alpha: float = 1.0
    compression: float = 0.3
    floor: float = 1e-12

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedLossError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise UnsupportedLossError("alpha must lie in [0, 1]")
        if not 0.0 < self.compression <= 1.0:
            raise UnsupportedLossError("compression must lie in (0, 1]")
        if not self.floor > 0:
            raise UnsupportedLossError("floor must be positive")
        if self.kind == "SDR" and self.alpha != 1.0:
            raise UnsupportedLossError("SDR has no magnitude form; alpha must be 1")

    @classmethod
    def from_json(cls, doc) -> "LossSpec":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)


def _coeffs(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data)


def _compressed(x, c):
    """``|x|^c e^{j phase(x)}``; zero coefficients keep phase 0."""
    mag = np.abs(x)
    phase = np.where(mag > 0, x / np.where(mag > 0, mag, 1.0), 1.0)
    return mag ** c * phase


def complex_loss(est, tgt, spec: LossSpec) -> float:
    d = est - tgt
    if spec.kind == "MSE":
        return float(np.log10(np.sum(np.abs(d) ** 2) + spec.floor))
    if spec.kind == "cMSE":
        c = spec.compression
        dc = _compressed(tgt, c) - _compressed(est, c)
        return float(np.log10(np.sum(np.abs(dc) ** 2) + spec.floor))
    if spec.kind == "MAE":
        return float(np.log10(np.sum(np.abs(d)) + spec.floor))
    energy = np.sum(np.abs(tgt) ** 2)
    if energy == 0:
        raise DegenerateTargetError("SDR loss needs a nonzero target")
    return float(-np.log10(energy / (np.sum(np.abs(d) ** 2) + spec.floor)))


def magnitude_loss(est, tgt, spec: LossSpec) -> float:
    if spec.kind == "SDR":
        raise UnsupportedLossError("SDR has no magnitude form")
    d = np.abs(tgt) - np.abs(est)
    if spec.kind == "MSE":
        return float(np.log10(np.sum(d ** 2) + spec.floor))
    if spec.kind == "cMSE":
        c = spec.compression
        dc = np.abs(tgt) ** c - np.abs(est) ** c
        return float(np.log10(np.sum(dc ** 2) + spec.floor))
    return float(np.log10(np.sum(np.abs(d)) + spec.floor))


def spectral_loss(est, tgt, spec: LossSpec = LossSpec()) -> float:
    """``alpha * complex + (1 - alpha) * magnitude`` between two spectra.

    ``est`` and ``tgt`` are single-channel spectrograms or arrays of equal
    shape.
    """
    est, tgt = _coeffs(est), _coeffs(tgt)
    if est.shape != tgt.shape:
        raise ShapeError(f"estimate {est.shape} vs target {tgt.shape}")
    total = 0.0
    if spec.alpha > 0:
        total += spec.alpha * complex_loss(est, tgt, spec)
    if spec.alpha < 1:
        total += (1 - spec.alpha) * magnitude_loss(est, tgt, spec)
    return total


def upit_loss(ests, tgts, spec: LossSpec = LossSpec()):
    """Best whole-utterance assignment of two estimates to two targets.

    Returns ``(loss, perm)`` where ``perm[i]`` is the estimate index
    assigned to target ``i``.
    """
    if len(ests) != 2 or len(tgts) != 2:
        raise ShapeError("upit_loss expects two estimates and two targets")
    pair = np.array([[spectral_loss(e, t, spec) for e in ests] for t in tgts])
    direct = pair[0, 0] + pair[1, 1]
    swapped = pair[0, 1] + pair[1, 0]
    if swapped < direct:
        return float(swapped), (1, 0)
    return float(direct), (0, 1)
