"""Array geometry, DOA conventions and the far-field steering model.

Angles are radians. A unit direction is
``(cos(el) cos(az), cos(el) sin(az), sin(el))``; azimuth is measured in the
xy-plane from +x. The steering entry for mic ``m`` at bin ``f`` is
``exp(+j * kappa(f) * <p_m, u>)``, which is the STFT phase of a plane wave
that reaches mic ``m`` ``<p_m, u> / c`` seconds before the origin.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .wola import StftSpec

SPEED_OF_SOUND = 343.0


def wrap_azimuth(az):
    """Wrap to [-pi, pi)."""
    return (np.asarray(az) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class Doa:
    azimuth: float
    elevation: float = 0.0

    def normalized(self) -> "Doa":
        """Fold elevation into [-pi/2, pi/2] and wrap azimuth."""
        az, el = float(self.azimuth), float(self.elevation)
        el = (el + np.pi) % (2 * np.pi) - np.pi
        if el > np.pi / 2:
            el, az = np.pi - el, az + np.pi
        elif el < -np.pi / 2:
            el, az = -np.pi - el, az + np.pi
        return Doa(float(wrap_azimuth(az)), el)

    @classmethod
    def from_degrees(cls, az, el=0.0) -> "Doa":
        return cls(np.deg2rad(az), np.deg2rad(el)).normalized()

    def degrees(self):
        return float(np.rad2deg(self.azimuth)), float(np.rad2deg(self.elevation))


def unit_direction(doa: Doa) -> np.ndarray:
    ce = np.cos(doa.elevation)
    return np.array([ce * np.cos(doa.azimuth), ce * np.sin(doa.azimuth),
                     np.sin(doa.elevation)])


def direction_to_doa(vec) -> Doa:
    v = np.asarray(vec, dtype=float)
    v = v / np.linalg.norm(v)
    return Doa(float(np.arctan2(v[1], v[0])),
               float(np.arcsin(np.clip(v[2], -1.0, 1.0)))).normalized()


def angular_distance(a: Doa, b: Doa) -> float:
    """Great-circle angle between two directions, radians."""
    c = np.clip(unit_direction(a) @ unit_direction(b), -1.0, 1.0)
    return float(np.arccos(c))


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    coords: np.ndarray
    reference_index: int = 0
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 3 or c.shape[0] < 2:
            raise ValueError(f"coords must be (M>=2, 3), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coords must be finite")
        if not 0 <= self.reference_index < c.shape[0]:
            raise ValueError("reference_index out of range")
        object.__setattr__(self, "coords", c)

    @property
    def n_mics(self) -> int:
        return self.coords.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def is_planar(self, tol=1e-9) -> bool:
        centered = self.coords - self.coords.mean(axis=0)
        return np.linalg.svd(centered, compute_uv=False)[-1] < tol

    def to_json(self) -> dict:
        return {"coords_m": self.coords.tolist(), "reference": self.reference_index,
                "speed_of_sound": self.speed_of_sound}

    @classmethod
    def from_json(cls, doc: dict) -> "ArrayGeometry":
        return cls(np.array(doc["coords_m"], dtype=float), int(doc.get("reference", 0)),
                   float(doc.get("speed_of_sound", SPEED_OF_SOUND)))

    @classmethod
    def load(cls, path) -> "ArrayGeometry":
        return cls.from_json(json.loads(Path(path).read_text()))


def circular_array(n_ring=6, radius=0.04, center=True, c=SPEED_OF_SOUND) -> ArrayGeometry:
    """Ring of ``n_ring`` mics in the xy-plane, first ring mic at +x.

    With ``center`` a mic at the origin is prepended and used as reference.
    """
    phi = 2 * np.pi * np.arange(n_ring) / n_ring
    ring = np.stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n_ring)], axis=1)
    coords = np.vstack([np.zeros((1, 3)), ring]) if center else ring
    return ArrayGeometry(coords, 0, c)


def default_array() -> ArrayGeometry:
    """Seven mics: center reference plus six on a 4 cm circle."""
    return circular_array()


def wavenumber(bins, spec: StftSpec, c=SPEED_OF_SOUND):
    """Wavenumber in rad/m at STFT bin index ``bins``."""
    return 2 * np.pi * np.asarray(bins) * spec.sample_rate / (c * spec.fft_size)


def steering_vector(geom: ArrayGeometry, doa: Doa, spec: StftSpec) -> np.ndarray:
    """Far-field steering matrix of shape (F, M) for one direction."""
    kappa = wavenumber(np.arange(spec.n_bins), spec, geom.speed_of_sound)
    proj = geom.coords @ unit_direction(doa)
    return np.exp(1j * kappa[:, None] * proj[None, :])


def steering_grid(geom: ArrayGeometry, doas, spec: StftSpec) -> np.ndarray:
    """Steering for many directions at once, shape (D, F, M)."""
    kappa = wavenumber(np.arange(spec.n_bins), spec, geom.speed_of_sound)
    dirs = np.stack([unit_direction(d) for d in doas])
    proj = dirs @ geom.coords.T  # (D, M)
    return np.exp(1j * kappa[None, :, None] * proj[:, None, :])
