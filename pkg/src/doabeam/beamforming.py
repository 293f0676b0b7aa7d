"""LCMV beamforming against a spherically isotropic noise field."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSteeringError, ShapeError
from .geometry import ArrayGeometry
from .wola import Spectrogram, StftSpec

DEFAULT_LOADING = 1e-9
COND_LIMIT = 1e10


def diffuse_coherence(geom: ArrayGeometry, spec: StftSpec) -> np.ndarray:
    """Spherically isotropic coherence matrices, shape (F, M, M).

    ``Gamma_pq(f) = sin(2 pi f d_pq / c) / (2 pi f d_pq / c)`` with ``f`` in Hz.
    """
    f_hz = spec.bin_frequencies()
    # np.sinc(x) = sin(pi x) / (pi x)
    return np.sinc(2 * f_hz[:, None, None] * geom.distances()[None] / geom.speed_of_sound)


def load_covariance(noise: np.ndarray, loading: float) -> np.ndarray:
    m = noise.shape[-1]
    scale = np.real(np.trace(noise, axis1=-2, axis2=-1)) / m
    return noise + loading * scale[..., None, None] * np.eye(m)


@dataclass
class BeamformerWeights:
    """Per-bin weights (F, M); ``fallback`` flags bins solved with one constraint."""

    values: np.ndarray
    fallback: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.fallback is None:
            self.fallback = np.zeros(self.values.shape[0], dtype=bool)


def mvdr_weights(a_target, noise, loading=DEFAULT_LOADING) -> np.ndarray:
    """Single-constraint solution ``G^-1 a / (a^H G^-1 a)`` per bin."""
    g = load_covariance(noise, loading)
    x = np.linalg.solve(g, a_target[..., None])[..., 0]
    denom = np.einsum("fm,fm->f", a_target.conj(), x)
    return x / denom[:, None]


def lcmv_weights(a_target, a_interf, noise, loading=DEFAULT_LOADING,
                 strict=False) -> BeamformerWeights:
    """Unit gain toward ``a_target``, null toward ``a_interf``.

    Parameters
    ----------
    a_target, a_interf : (F, M) complex steering matrices
    noise : (F, M, M) noise coherence
    loading : diagonal loading relative to ``trace / M``
    strict : raise :class:`DegenerateSteeringError` on any ill-conditioned
        bin other than 0 instead of falling back to the single-constraint
        solution there.
    """
    a_target = np.asarray(a_target)
    a_interf = np.asarray(a_interf)
    if a_target.shape != a_interf.shape or noise.shape[:2] != a_target.shape:
        raise ShapeError("steering and noise shapes disagree")
    if loading < 0:
        raise ValueError("loading must be non-negative")
    g = load_covariance(noise, loading)
    A = np.stack([a_target, a_interf], axis=-1)  # (F, M, 2)
    x = np.linalg.solve(g, A)
    gram = A.conj().transpose(0, 2, 1) @ x  # (F, 2, 2), Hermitian
    gram = 0.5 * (gram + gram.conj().transpose(0, 2, 1))
    ev = np.linalg.eigvalsh(gram)
    with np.errstate(divide="ignore"):
        cond = np.abs(ev[:, -1]) / np.abs(ev[:, 0])
    degenerate = ~(cond < COND_LIMIT)
    degenerate[0] = True
    if strict and np.any(degenerate[1:]):
        bad = np.flatnonzero(degenerate[1:]) + 1
        raise DegenerateSteeringError(f"ill-conditioned constraints at bins {bad.tolist()}")

    w = np.empty(a_target.shape, dtype=complex)
    ok = ~degenerate
    if np.any(ok):
        rhs = np.broadcast_to(np.array([1.0, 0.0]), (ok.sum(), 2))
        lam = np.linalg.solve(gram[ok], rhs[..., None])[..., 0]
        w[ok] = np.einsum("fmk,fk->fm", x[ok], lam)
    if np.any(degenerate):
        w[degenerate] = mvdr_weights(a_target[degenerate], noise[degenerate], loading)
    return BeamformerWeights(w, degenerate)


def apply_beamformer(w: BeamformerWeights, spect: Spectrogram) -> Spectrogram:
    """``out(k, f) = w(f)^H y(k, f)``; returns a single-channel spectrogram."""
    values = w.values if isinstance(w, BeamformerWeights) else np.asarray(w)
    if values.shape != spect.data.shape[1:]:
        raise ShapeError(f"weights {values.shape} vs spectrogram {spect.data.shape}")
    out = np.einsum("fm,kfm->kf", values.conj(), spect.data)
    return spect.with_data(out[:, :, None])
