"""Magnitude-ratio post-mask for a pair of beamformer outputs."""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class MaskPair:
    masks: tuple
    exponent: float
    floor: float


def ratio_mask(beam_outputs, p=2.0, floor=0.05) -> MaskPair:
    """``mask_i = max(floor, |B_i|^p / (|B_1|^p + |B_2|^p))``.

    Bins where both outputs vanish get 0.5 each (before flooring).
    """
    if p <= 0:
        raise ValueError("exponent must be positive")
    if not 0.0 <= floor <= 1.0:
        raise ValueError("floor must lie in [0, 1]")
    b1, b2 = (np.asarray(getattr(b, "data", b)) for b in beam_outputs)
    if b1.shape != b2.shape:
        raise ShapeError(f"beam outputs differ in shape: {b1.shape} vs {b2.shape}")
    e1, e2 = np.abs(b1) ** p, np.abs(b2) ** p
    den = e1 + e2
    live = den > 0
    safe = np.where(live, den, 1.0)
    m1 = np.where(live, e1 / safe, 0.5)
    m2 = np.where(live, e2 / safe, 0.5)
    return MaskPair((np.maximum(floor, m1), np.maximum(floor, m2)), p, floor)


def apply_masks(beam_outputs, masks: MaskPair):
    """Element-wise product of each output with its mask."""
    out = []
    for b, m in zip(beam_outputs, masks.masks):
        if hasattr(b, "with_data"):
            out.append(b.with_data(b.data * m))
        else:
            out.append(np.asarray(b) * m)
    return tuple(out)
