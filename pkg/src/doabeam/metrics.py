"""Projection-based SI-SDR, least-squares SIR and per-scene reports."""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DecompositionError, DegenerateTargetError, ShapeError

CAP_DB = 60.0


def _cap(db):
    return float(np.clip(db, -CAP_DB, CAP_DB))


def _ratio_db(num, den):
    if den <= 0:
        return CAP_DB if num > 0 else -CAP_DB
    if num <= 0:
        return -CAP_DB
    return _cap(10 * np.log10(num / den))


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, clipped to +-60."""
    est, ref = _pair(est, ref)
    ref_energy = ref @ ref
    if ref_energy == 0:
        raise DegenerateTargetError("reference signal is all zero")
    s = (est @ ref / ref_energy) * ref
    e = est - s
    return _ratio_db(s @ s, e @ e)


def sir(est, target, interferer) -> float:
    """Target-to-interferer ratio of the least-squares fit
    ``est ~ a * target + b * interferer``, in dB clipped to +-60."""
    est, target = _pair(est, target)
    _, interferer = _pair(est, interferer)
    basis = np.stack([target, interferer], axis=1)
    gram = basis.T @ basis
    if np.linalg.cond(gram) > 1e12:
        raise DecompositionError("target and interferer are (nearly) collinear")
    a, b = np.linalg.solve(gram, basis.T @ est)
    eps = 1e-12 * (est @ est)
    return _ratio_db(a * a * (target @ target), b * b * (interferer @ interferer) + eps)


@dataclass
class EvalReport:
    si_sdr: list
    sir: list
    delta_si_sdr: list
    delta_sir: list
    permutation: tuple
    scene_id: str = ""

    @property
    def mean_delta_si_sdr(self) -> float:
        return float(np.mean(self.delta_si_sdr))

    @property
    def mean_delta_sir(self) -> float:
        return float(np.mean(self.delta_sir))

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["permutation"] = list(self.permutation)
        doc["mean_delta_si_sdr"] = self.mean_delta_si_sdr
        doc["mean_delta_sir"] = self.mean_delta_sir
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def evaluate_scene(separated, targets, mixture_ref, scene_id="") -> EvalReport:
    """Score a separated pair against its targets.

    The assignment maximizing total SI-SDR is chosen; improvements are
    measured against ``mixture_ref`` scored as an estimate of each target.
    """
    n = min(len(np.ravel(x)) for x in (*separated, *targets, mixture_ref))
    sep = [np.ravel(x)[:n] for x in separated]
    tgt = [np.ravel(x)[:n] for x in targets]
    mix = np.ravel(mixture_ref)[:n]

    direct = si_sdr(sep[0], tgt[0]) + si_sdr(sep[1], tgt[1])
    swapped = si_sdr(sep[1], tgt[0]) + si_sdr(sep[0], tgt[1])
    perm = (1, 0) if swapped > direct else (0, 1)

    sdr, sirs, d_sdr, d_sir = [], [], [], []
    for i in range(2):
        est = sep[perm[i]]
        other = tgt[1 - i]
        sdr.append(si_sdr(est, tgt[i]))
        sirs.append(sir(est, tgt[i], other))
        d_sdr.append(sdr[-1] - si_sdr(mix, tgt[i]))
        d_sir.append(sirs[-1] - sir(mix, tgt[i], other))
    return EvalReport(sdr, sirs, d_sdr, d_sir, perm, scene_id)
