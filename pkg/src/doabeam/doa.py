"""DOA front-ends and the end-to-end separation chain.

``separate_tf`` steers two LCMV beamformers from a pair of directions.
``doa_fit`` searches the four angles that minimize the permutation-aligned
spectral loss between the beamformer outputs and known target spectra,
so no angle labels are needed, only the signals.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .beamforming import (DEFAULT_LOADING, apply_beamformer, diffuse_coherence,
                          lcmv_weights)
from .errors import DegenerateSteeringError, NoSignalError, ShapeError
from .geometry import (ArrayGeometry, Doa, angular_distance, steering_grid, steering_vector,
                       unit_direction, wrap_azimuth)
from .losses import LossSpec, upit_loss
from .postmask import apply_masks, ratio_mask
from .wola import Spectrogram, StftSpec, istft, stft

log = logging.getLogger(__name__)

# SRP pairs handed to doa_fit, which keeps the one with the lowest loss
FIT_CANDIDATES = 24


@dataclass(frozen=True)
class DoaPair:
    doa_1: Doa
    doa_2: Doa

    def canonical(self) -> "DoaPair":
        a, b = self.doa_1.normalized(), self.doa_2.normalized()
        if (b.azimuth, b.elevation) < (a.azimuth, a.elevation):
            a, b = b, a
        return DoaPair(a, b)

    def swapped(self) -> "DoaPair":
        return DoaPair(self.doa_2, self.doa_1)

    def as_degrees(self) -> np.ndarray:
        """(az1, el1, az2, el2) in degrees."""
        return np.array([*self.doa_1.degrees(), *self.doa_2.degrees()])

    @classmethod
    def from_degrees(cls, az1, el1, az2, el2) -> "DoaPair":
        return cls(Doa.from_degrees(az1, el1), Doa.from_degrees(az2, el2))

    def __iter__(self):
        return iter((self.doa_1, self.doa_2))


@dataclass(frozen=True)
class DoaGrid:
    az_step: float = 5.0
    el_step: float = 5.0
    el_min: float = 0.0
    el_max: float = 0.0

    def __post_init__(self):
        if self.az_step <= 0 or self.el_step <= 0:
            raise ValueError("grid steps must be positive")
        if self.el_min > self.el_max:
            raise ValueError("el_min must not exceed el_max")

    def azimuths(self) -> np.ndarray:
        return np.arange(-180.0, 180.0 - 1e-9, self.az_step)

    def elevations(self) -> np.ndarray:
        n = int(np.floor((self.el_max - self.el_min) / self.el_step + 1e-9)) + 1
        return self.el_min + self.el_step * np.arange(n)


@dataclass
class SrpMap:
    """Score for every (elevation, azimuth) grid node, degrees."""

    azimuths: np.ndarray
    elevations: np.ndarray
    scores: np.ndarray  # (n_el, n_az)

    def ranked(self):
        order = np.argsort(self.scores, axis=None)[::-1]
        out = []
        for flat in order:
            i, j = np.unravel_index(flat, self.scores.shape)
            out.append((Doa.from_degrees(self.azimuths[j], self.elevations[i]),
                        float(self.scores[i, j])))
        return out

    def peaks(self, n=2):
        """Up to ``n`` strongest local maxima; azimuth wraps around."""
        s = self.scores
        padded = np.pad(s, ((1, 1), (0, 0)), constant_values=-np.inf)
        padded = np.concatenate([padded[:, -1:], padded, padded[:, :1]], axis=1)
        centre = padded[1:-1, 1:-1]
        is_max = np.ones_like(s, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
                is_max &= centre >= nb
        idx = np.argwhere(is_max)
        idx = sorted(idx, key=lambda ij: -s[ij[0], ij[1]])[:n]
        return [(Doa.from_degrees(self.azimuths[j], self.elevations[i]), float(s[i, j]))
                for i, j in idx]


def _phat_covariance(spect: Spectrogram, geom: ArrayGeometry) -> np.ndarray:
    """Per-bin sum over frames of PHAT-normalized outer products, bins 1..F-1."""
    y = spect.data
    if y.shape[2] != geom.n_mics:
        raise ShapeError(f"{y.shape[2]} channels vs {geom.n_mics} mics")
    mag = np.abs(y)
    if not np.any(mag[:, 1:] > 0):
        raise NoSignalError("spectrogram is all zero; nothing to localize")
    phat = np.where(mag > 0, y / np.where(mag > 0, mag, 1.0), 0.0)[:, 1:]
    return np.einsum("kfm,kfn->fmn", phat, phat.conj())


def _grid_doas(grid: DoaGrid):
    az, el = grid.azimuths(), grid.elevations()
    return az, el, [Doa.from_degrees(a, e) for e in el for a in az]


def srp_phat_map(spect: Spectrogram, geom: ArrayGeometry, grid: DoaGrid = DoaGrid()) -> SrpMap:
    cov = _phat_covariance(spect, geom)
    az, el, doas = _grid_doas(grid)
    a = steering_grid(geom, doas, spect.spec)[:, 1:]
    scores = np.real(np.einsum("dfm,fmn,dfn->d", a.conj(), cov, a))
    return SrpMap(az, el, scores.reshape(len(el), len(az)))


def srp_phat(spect: Spectrogram, geom: ArrayGeometry, grid: DoaGrid = DoaGrid()):
    """Steered response power with phase transform over a DOA grid.

    Returns every grid point as ``(Doa, score)`` in descending score order.
    """
    return srp_phat_map(spect, geom, grid).ranked()


def _pair_az_gap(p: DoaPair, q: DoaPair) -> float:
    """Largest azimuth difference in degrees under the better assignment."""
    d = lambda a, b: abs(np.rad2deg(float(wrap_azimuth(a.azimuth - b.azimuth))))
    return min(max(d(p.doa_1, q.doa_1), d(p.doa_2, q.doa_2)),
               max(d(p.doa_1, q.doa_2), d(p.doa_2, q.doa_1)))


def srp_phat_pairs(spect: Spectrogram, geom: ArrayGeometry, grid: DoaGrid = DoaGrid(),
                   n=1, min_distinct=20.0, min_separation=10.0, reg=1e-2, chunk=16):
    """Two-source steered response: best grid pairs by projected PHAT power.

    For a candidate pair with steering matrix ``A`` the score is
    ``sum_f trace(P_A C_f)``, where ``P_A`` projects onto span(A) and ``C_f``
    is the PHAT covariance. ``reg * M**2`` is added to the 2x2 Gram
    determinant so near-parallel pairs cannot blow up. Pairs closer than
    ``min_separation`` degrees are skipped.

    Returns up to ``n`` ``(DoaPair, score)`` in descending score order, each
    differing from every higher-ranked pair by at least ``min_distinct``
    degrees of azimuth.
    """
    cov = _phat_covariance(spect, geom)
    _, _, doas = _grid_doas(grid)
    a = steering_grid(geom, doas, spect.spec)[:, 1:]  # (D, F, M)
    m = geom.n_mics
    scores = np.zeros((len(doas), len(doas)))
    for f0 in range(0, a.shape[1], chunk):
        af = a[:, f0:f0 + chunk]
        gram = np.einsum("afm,bfm->fab", af.conj(), af)
        q = np.einsum("afm,fmn,bfn->fab", af.conj(), cov[f0:f0 + chunk], af)
        qd = np.real(np.einsum("faa->fa", q))
        num = m * (qd[:, :, None] + qd[:, None, :]) - 2 * np.real(q * gram.transpose(0, 2, 1))
        scores += np.sum(num / (m * m - np.abs(gram) ** 2 + reg * m * m), axis=0)
    dirs = np.stack([unit_direction(d) for d in doas])
    scores[dirs @ dirs.T > np.cos(np.deg2rad(min_separation))] = -np.inf
    scores[np.tril_indices(len(doas))] = -np.inf  # symmetric; keep i < j
    out = []
    for flat in np.argsort(scores, axis=None)[::-1]:
        i, j = np.unravel_index(flat, scores.shape)
        if not np.isfinite(scores[i, j]):
            break
        pair = DoaPair(doas[i], doas[j]).canonical()
        if all(_pair_az_gap(pair, p) >= min_distinct for p, _ in out):
            out.append((pair, float(scores[i, j])))
            if len(out) == n:
                break
    return out


def srp_phat_pair(spect: Spectrogram, geom: ArrayGeometry, grid: DoaGrid = DoaGrid(), **kw):
    """Highest-scoring pair of :func:`srp_phat_pairs` as ``(DoaPair, score)``."""
    return srp_phat_pairs(spect, geom, grid, n=1, **kw)[0]


def srp_init(spect: Spectrogram, geom: ArrayGeometry, grid: DoaGrid = DoaGrid(), n=1):
    """Coarse starting point(s) for :func:`doa_fit`.

    ``n == 1`` gives the best SRP pair; larger ``n`` gives a list of
    distinct candidates, which :func:`doa_fit` ranks by the loss itself.
    """
    pairs = [p for p, _ in srp_phat_pairs(spect, geom, grid, n=n)]
    return pairs[0] if n == 1 else pairs


class Separator:
    """Reusable per-geometry state for steering pairs of LCMV beamformers."""

    def __init__(self, geom: ArrayGeometry, spec: StftSpec = StftSpec(),
                 loading=DEFAULT_LOADING):
        self.geom = geom
        self.spec = spec
        self.loading = loading
        self.noise = diffuse_coherence(geom, spec)

    def weights(self, doas: DoaPair, strict=False):
        a1 = steering_vector(self.geom, doas.doa_1, self.spec)
        a2 = steering_vector(self.geom, doas.doa_2, self.spec)
        w1 = lcmv_weights(a1, a2, self.noise, self.loading, strict=strict)
        w2 = lcmv_weights(a2, a1, self.noise, self.loading, strict=strict)
        return w1, w2

    def __call__(self, mixture: Spectrogram, doas: DoaPair, allow_degenerate=False):
        w1, w2 = self.weights(doas)
        if not allow_degenerate and (
                np.all(w1.fallback[1:]) or angular_distance(doas.doa_1, doas.doa_2) < 1e-9):
            raise DegenerateSteeringError("DOA pair is degenerate; beams coincide")
        return apply_beamformer(w1, mixture), apply_beamformer(w2, mixture)


def separate_tf(mixture: Spectrogram, doas: DoaPair, geom: ArrayGeometry,
                loading=DEFAULT_LOADING, allow_degenerate=False):
    """Beamform ``mixture`` toward each DOA of the pair, nulling the other."""
    return Separator(geom, mixture.spec, loading)(mixture, doas, allow_degenerate)


def separate(mixture, doas: DoaPair, geom: ArrayGeometry, spec: StftSpec = StftSpec(),
             postmask=None, loading=DEFAULT_LOADING):
    """Time-domain separation of a (samples, channels) mixture.

    ``postmask`` is ``None`` or a dict of :func:`ratio_mask` keyword
    arguments. Returns two 1-D signals with the mixture's length.
    """
    x = np.asarray(mixture, dtype=float)
    if x.ndim != 2 or x.shape[1] != geom.n_mics:
        raise ShapeError(f"mixture must be (samples, {geom.n_mics}), got {x.shape}")
    y = stft(x, spec)
    beams = separate_tf(y, doas, geom, loading)
    if postmask is not None:
        beams = apply_masks(beams, ratio_mask(beams, **postmask))
    return tuple(istft(b)[:, 0] for b in beams)


@dataclass
class FitResult:
    doas: DoaPair
    loss: float
    init_loss: float
    n_evals: int
    converged: bool


def doa_fit(mixture: Spectrogram, targets, loss: LossSpec, init,
            geom: ArrayGeometry, loading=DEFAULT_LOADING, max_evals=400,
            xatol=0.05, steps=(4.0, 0.5), fit_elevation=True) -> FitResult:
    """Fit both source directions by minimizing the aligned separation loss.

    ``init`` is a :class:`DoaPair` or a list of candidate pairs; with a
    list, each candidate costs one evaluation and the fit starts from the
    one with the lowest loss. Nelder-Mead then runs once per entry of
    ``steps`` (initial simplex size in degrees), each restart seeded at the
    best point so far, all sharing a budget of ``max_evals`` objective
    evaluations. ``xatol`` is the simplex size tolerance in degrees.
    """
    sep = Separator(geom, mixture.spec, loading)
    tgts = tuple(targets)
    n_evals = 0
    best = [np.inf, None]

    def unpack(theta):
        if fit_elevation:
            return DoaPair.from_degrees(*theta)
        return DoaPair.from_degrees(theta[0], el0[0], theta[1], el0[1])

    def objective(theta):
        nonlocal n_evals
        n_evals += 1
        value, _ = upit_loss(sep(mixture, unpack(theta), allow_degenerate=True), tgts, loss)
        if value < best[0]:
            best[0], best[1] = value, np.array(theta, dtype=float)
        return value

    candidates = [init] if isinstance(init, DoaPair) else list(init)
    if not candidates:
        raise ValueError("doa_fit needs at least one initial pair")
    init_loss = np.inf
    for cand in candidates:
        start = cand.as_degrees()
        el0 = start[[1, 3]]
        value = objective(start if fit_elevation else start[[0, 2]])
        if value < init_loss:
            init_loss, x, el_best = value, best[1], el0
    el0 = el_best
    converged = False
    for step in steps:
        budget = max_evals - n_evals
        if budget <= len(x) + 1:
            break
        simplex = np.vstack([best[1], best[1] + step * np.eye(len(x))])
        res = minimize(objective, best[1], method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxfev": budget,
                                "xatol": xatol, "fatol": np.inf})
        converged = bool(res.success)
    if not converged:
        log.warning("doa_fit stopped after %d evaluations without meeting xatol=%g",
                    n_evals, xatol)
    return FitResult(unpack(best[1]).canonical(), float(best[0]), init_loss, n_evals, converged)
