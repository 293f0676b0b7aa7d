"""Image-method room simulation and two-speaker mixture generation."""
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import SignalLengthError, SingularDistanceError
from .geometry import ArrayGeometry, Doa, direction_to_doa, unit_direction

log = logging.getLogger(__name__)

SINC_TAPS = 81
Draw = Union[float, str, None]


@dataclass(frozen=True)
class RoomSpec:
    dimensions: tuple = (6.0, 5.0, 3.0)
    reflection_coefficient: float = 0.0
    max_reflection_order: int = 0
    speed_of_sound: float = 343.0
    max_duration: Optional[float] = None  # seconds; later images are dropped

    def __post_init__(self):
        if len(self.dimensions) != 3 or min(self.dimensions) <= 0:
            raise ValueError("room dimensions must be three positive lengths")
        if not 0.0 <= self.reflection_coefficient < 1.0:
            raise ValueError("reflection coefficient must lie in [0, 1)")
        if self.max_reflection_order < 0:
            raise ValueError("max_reflection_order must be >= 0")

    @classmethod
    def from_t60(cls, dimensions, t60, speed_of_sound=343.0, max_order=None):
        """Uniform-wall room whose Sabine reverberation time is ``t60``.

        The response is simulated up to ``t60`` seconds.
        """
        lx, ly, lz = dimensions
        volume = lx * ly * lz
        surface = 2 * (lx * ly + lx * lz + ly * lz)
        absorption = 0.161 * volume / (surface * t60)
        if absorption >= 1:
            raise ValueError(f"t60={t60} s is too short for a {dimensions} room")
        beta = float(np.sqrt(1 - absorption))
        if max_order is None:
            max_order = int(np.ceil(speed_of_sound * t60 / min(dimensions))) + 1
        return cls(tuple(map(float, dimensions)), beta, max_order, speed_of_sound, float(t60))

    def contains(self, point, margin=0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > margin) and np.all(p < np.asarray(self.dimensions) - margin))


@dataclass
class Rir:
    """Impulse responses from one source to every mic, shape (M, samples)."""

    data: np.ndarray
    sample_rate: int
    direct_delay: np.ndarray  # samples, per mic


def image_sources(room: RoomSpec, src):
    """Image positions (N, 3) and reflection orders (N,) up to the room's max order."""
    n = room.max_reflection_order
    r = np.arange(-n, n + 1)
    i, j, k = (g.ravel() for g in np.meshgrid(r, r, r, indexing="ij"))
    order = np.abs(i) + np.abs(j) + np.abs(k)
    keep = order <= n
    idx = np.stack([i[keep], j[keep], k[keep]], axis=1)
    dims = np.asarray(room.dimensions)
    src = np.asarray(src, dtype=float)
    even = idx % 2 == 0
    pos = np.where(even, idx * dims + src, (idx + 1) * dims - src)
    return pos, order[keep]


def _place(out, delay, amp):
    """Add ``amp`` windowed-sinc pulses at fractional ``delay`` into ``out`` (1-D)."""
    half = SINC_TAPS // 2
    base = np.floor(delay).astype(int)
    taps = base[:, None] + np.arange(-half, half + 1)[None, :]
    t = taps - delay[:, None]
    win = 0.5 * (1 + np.cos(np.pi * t / (half + 1)))
    vals = amp[:, None] * np.sinc(t) * win
    ok = (taps >= 0) & (taps < len(out))
    out += np.bincount(taps[ok], weights=vals[ok], minlength=len(out))


def simulate_rir(room: RoomSpec, src, mics, fs=16000, length=None) -> Rir:
    """Image-method impulse responses from ``src`` to each row of ``mics``.

    Every image contributes ``beta**order / (4 pi d)`` at delay ``d / c``,
    placed with an 81-tap windowed sinc.
    """
    mics = np.atleast_2d(np.asarray(mics, dtype=float))
    if not room.contains(src) or not all(room.contains(m) for m in mics):
        raise ValueError("source and mics must lie strictly inside the room")
    images, order = image_sources(room, src)
    amp_refl = room.reflection_coefficient ** order if room.reflection_coefficient > 0 \
        else (order == 0).astype(float)
    keep = amp_refl > 0
    images, amp_refl = images[keep], amp_refl[keep]

    dist = np.linalg.norm(images[None, :, :] - mics[:, None, :], axis=-1)  # (M, N)
    if np.any(dist < 1e-6):
        raise SingularDistanceError("source coincides with a microphone")
    delays = dist / room.speed_of_sound * fs
    direct = np.linalg.norm(mics - np.asarray(src, dtype=float), axis=1) / room.speed_of_sound * fs
    if room.max_duration is not None:
        limit = room.max_duration * fs
    else:
        limit = delays.max()
    if length is None:
        length = int(np.ceil(limit)) + SINC_TAPS
    out = np.zeros((len(mics), length))
    for m in range(len(mics)):
        sel = delays[m] <= limit
        _place(out[m], delays[m][sel], amp_refl[sel] / (4 * np.pi * dist[m][sel]))
    return Rir(out, fs, direct)


def window_rir(rir: Rir, max_ms=200.0, fade_ms=5.0) -> Rir:
    """Zero each response beyond its direct arrival + ``max_ms``.

    A raised-cosine fade of ``fade_ms`` ends exactly at the cutoff.
    """
    fs = rir.sample_rate
    out = rir.data.copy()
    n = out.shape[1]
    fade_len = int(round(fade_ms * 1e-3 * fs))
    for m in range(out.shape[0]):
        cut = int(np.floor(rir.direct_delay[m] + max_ms * 1e-3 * fs))
        if cut >= n:
            continue
        out[m, max(cut, 0):] = 0.0
        start = max(cut - fade_len, 0)
        ramp = 0.5 * (1 + np.cos(np.pi * (np.arange(start, cut) - (cut - fade_len) + 1) / fade_len))
        out[m, start:cut] *= ramp
    return Rir(out, fs, rir.direct_delay.copy())


def sphere_directions(n):
    """``n`` near-uniform unit vectors on the sphere (Fibonacci lattice)."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5 ** 0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def diffuse_noise(geom: ArrayGeometry, n_samples, fs=16000, seed=0, n_directions=128,
                  frame_len=1024):
    """Spherically isotropic noise at the mics, shape (n_samples, M).

    Independent white noise arrives as a plane wave from each of
    ``n_directions`` near-uniform directions (randomly rotated per seed).
    The delays are applied per frame in the frequency domain and frames are
    overlap-added with a square-root Hann window, which keeps the output
    power stationary. Each channel is normalized to unit power.
    """
    if n_samples <= 0:
        raise ValueError("duration must be positive")
    if n_directions < 64:
        raise ValueError("use at least 64 directions")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    dirs = sphere_directions(n_directions) @ q.T
    hop = frame_len // 2
    freqs = np.fft.rfftfreq(frame_len, 1 / fs)
    # plane wave from u reaches mic p <p, u> / c seconds early
    advance = dirs @ geom.coords.T / geom.speed_of_sound  # (D, M)
    phase = np.exp(2j * np.pi * freqs[:, None, None] * advance[None])  # (F, D, M)
    win = np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * np.arange(frame_len) / frame_len))

    n_frames = int(np.ceil(n_samples / hop)) + 1
    out = np.zeros(((n_frames + 1) * hop, geom.n_mics))
    chunk = 32
    for k0 in range(0, n_frames, chunk):
        kc = min(chunk, n_frames - k0)
        z = rng.standard_normal((len(freqs), kc, n_directions, 2))
        s = z[..., 0] + 1j * z[..., 1]
        frames = np.fft.irfft(np.matmul(s, phase), n=frame_len, axis=0)  # (L, kc, M)
        frames *= win[:, None, None]
        for i in range(kc):
            a = (k0 + i) * hop
            out[a:a + frame_len] += frames[:, i]
    x = out[hop:hop + n_samples]
    return x / np.sqrt(np.mean(x ** 2, axis=0, keepdims=True))


def far_field_mixture(sources, doas, geom: ArrayGeometry, fs=16000):
    """Exact plane-wave images of each source at every mic.

    Returns ``(images, mixture)`` with ``images`` of shape (S, samples, M).
    A mic at the origin receives each source unchanged.
    """
    n = len(sources[0])
    freqs = np.fft.rfftfreq(n, 1 / fs)
    images = []
    for s, doa in zip(sources, doas):
        adv = geom.coords @ unit_direction(doa) / geom.speed_of_sound
        spec = np.fft.rfft(np.asarray(s, dtype=float))[:, None] * \
            np.exp(2j * np.pi * freqs[:, None] * adv[None, :])
        images.append(np.fft.irfft(spec, n=n, axis=0))
    images = np.stack(images)
    return images, images.sum(axis=0)


def synthetic_speech(n_samples, fs=16000, rng=None):
    """Speech-like test signal: voiced harmonic bursts with drifting pitch,
    syllable-rate envelope, pauses and some fricative noise."""
    rng = np.random.default_rng(rng)
    t = np.arange(n_samples) / fs
    f0 = rng.uniform(90, 230) * (1 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 0.8) * t
                                                  + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(f0) / fs
    n_harm = int(4000 // f0.max())
    voiced = np.zeros(n_samples)
    tilt = rng.uniform(0.6, 1.0)
    for h in range(1, n_harm + 1):
        voiced += tilt ** h * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    rate = rng.uniform(3, 5)
    env = np.clip(np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)), 0, None) ** 2
    gate = np.repeat(rng.random(int(np.ceil(n_samples / (fs // 2)))) > 0.2, fs // 2)[:n_samples]
    fric = rng.standard_normal(n_samples) * np.clip(-np.sin(2 * np.pi * rate * t), 0, None)
    fric = np.diff(fric, prepend=0.0)
    x = (voiced * env + 0.3 * fric) * gate
    return x / (np.sqrt(np.mean(x ** 2)) + 1e-12) * 0.05


# Scene generation ----------------------------------------------------------

RATIO_DIST = (0.0, 1.0)
SNR_DIST = (8.0, 10.0)
LEVEL_DIST = (-28.0, 10.0)
MAX_LEVEL_REDRAWS = 5


@dataclass
class ArrayPose:
    position: tuple = (3.0, 2.5, 1.5)
    yaw: float = 0.0  # radians about +z

    def rotation(self) -> np.ndarray:
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def mic_positions(self, geom: ArrayGeometry) -> np.ndarray:
        return np.asarray(self.position) + geom.coords @ self.rotation().T

    def doa_of(self, point) -> Doa:
        v = self.rotation().T @ (np.asarray(point, dtype=float) - np.asarray(self.position))
        return direction_to_doa(v)


@dataclass
class SceneSpec:
    """One mixture. ``ratio_db``, ``snr_db`` and ``level_db`` are a value,
    ``"draw"`` for the dataset distribution, or (``snr_db`` only) ``None``
    for no noise."""

    room: RoomSpec = field(default_factory=RoomSpec)
    pose: ArrayPose = field(default_factory=ArrayPose)
    sources: tuple = ((5.0, 4.0, 1.5), (1.0, 1.0, 1.5))
    ratio_db: Draw = "draw"
    snr_db: Draw = "draw"
    level_db: Draw = "draw"
    seed: int = 0
    duration: float = 10.0
    sample_rate: int = 16000
    target_window_ms: float = 200.0

    def __post_init__(self):
        if np.allclose(self.sources[0], self.sources[1]):
            raise ValueError("sources must be distinct")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["room"]["dimensions"] = list(self.room.dimensions)
        return doc

    @classmethod
    def from_json(cls, doc) -> "SceneSpec":
        doc = dict(doc)
        room = RoomSpec(**{**doc.pop("room", {}),
                           "dimensions": tuple(doc.get("room", {}).get("dimensions", (6, 5, 3)))})
        pose = ArrayPose(**doc.pop("pose", {}))
        sources = tuple(tuple(s) for s in doc.pop("sources", SceneSpec.sources))
        return cls(room=room, pose=pose, sources=sources, **doc)


@dataclass
class SceneBundle:
    mixture: np.ndarray  # (samples, M)
    targets: tuple  # two (samples,) arrays
    metadata: dict
    components: tuple = ()  # reverberant source 1, source 2, noise; scaled like mixture
    direct: tuple = ()  # direct-path-only source images at the reference mic


def _resolve(value, dist, rng_value):
    if isinstance(value, str):
        if value != "draw":
            raise ValueError(f"unknown draw marker {value!r}")
        return float(dist[0] + dist[1] * rng_value)
    return None if value is None else float(value)


def draw_levels(spec: SceneSpec, rng) -> dict:
    """Realize ratio/SNR/level. Standard deviations are the dB spreads."""
    z = rng.standard_normal(3)
    snr = spec.snr_db
    return {
        "ratio_db": _resolve(spec.ratio_db, RATIO_DIST, z[0]),
        "snr_db": _resolve(snr, SNR_DIST, z[1]) if snr is not None else None,
        "level_db": _resolve(spec.level_db, LEVEL_DIST, z[2]),
    }


def _power(x):
    return float(np.mean(np.asarray(x) ** 2))


def make_scene(spec: SceneSpec, dry, geom: ArrayGeometry) -> SceneBundle:
    """Render two dry signals into a noisy reverberant array mixture.

    Source 2 is scaled to the drawn energy ratio, diffuse noise is added at
    the drawn SNR (both measured at the reference mic), then mixture and
    targets are scaled together to the drawn reference-mic level in dBFS.
    Targets are the dry signals through the windowed reference-mic RIRs;
    ``direct`` holds the same signals through the direct path alone.
    """
    fs = spec.sample_rate
    n = int(round(spec.duration * fs))
    if any(len(d) < n for d in dry):
        raise SignalLengthError(f"dry signals must have at least {n} samples")
    rng = np.random.default_rng(spec.seed)
    draws = draw_levels(spec, rng)
    noise_seed = int(rng.integers(2 ** 32))
    ref = geom.reference_index
    mics = spec.pose.mic_positions(geom)

    free = RoomSpec(spec.room.dimensions, speed_of_sound=spec.room.speed_of_sound)
    reverb, targets, direct, rir_meta = [], [], [], []
    for src, d in zip(spec.sources, dry):
        rir = simulate_rir(spec.room, src, mics, fs)
        win = window_rir(rir, spec.target_window_ms)
        x = np.asarray(d[:n], dtype=float)
        reverb.append(fftconvolve(x[:, None], rir.data.T, axes=0)[:n])
        targets.append(fftconvolve(x, win.data[ref])[:n])
        direct.append(fftconvolve(x, simulate_rir(free, src, mics[ref], fs).data[0])[:n])
        rir_meta.append({"rir_samples": rir.data.shape[1],
                         "direct_delay_ref": float(rir.direct_delay[ref])})

    p1, p2 = _power(reverb[0][:, ref]), _power(reverb[1][:, ref])
    g2 = np.sqrt(p1 / (p2 * 10 ** (draws["ratio_db"] / 10))) if p2 > 0 else 1.0
    reverb[1] = reverb[1] * g2
    targets[1] = targets[1] * g2
    direct[1] = direct[1] * g2

    speech = reverb[0] + reverb[1]
    if draws["snr_db"] is None:
        noise = np.zeros_like(speech)
    else:
        noise = diffuse_noise(geom, n, fs, noise_seed)
        noise *= np.sqrt(_power(speech[:, ref]) / 10 ** (draws["snr_db"] / 10))

    mix = speech + noise
    ref_rms = np.sqrt(_power(mix[:, ref]))
    peak = np.max(np.abs(mix))
    level = draws["level_db"]
    clipped = False
    for attempt in range(MAX_LEVEL_REDRAWS + 1):
        gain = 10 ** (level / 20) / ref_rms
        if peak * gain <= 1.0:
            break
        if spec.level_db != "draw" or attempt == MAX_LEVEL_REDRAWS:
            clipped = True
            log.warning("scene %d clips at level %.2f dBFS", spec.seed, level)
            break
        level = _resolve("draw", LEVEL_DIST, rng.standard_normal())
    draws["level_db"] = float(level)

    components = (reverb[0] * gain, reverb[1] * gain, noise * gain)
    mixture = components[0] + components[1] + components[2]
    if clipped:
        mixture = np.clip(mixture, -1.0, 1.0)
    targets = tuple(t * gain for t in targets)
    direct = tuple(t * gain for t in direct)

    doas = [spec.pose.doa_of(s) for s in spec.sources]
    metadata = {
        "seed": spec.seed,
        "draws": draws,
        "gains": {"source_2": float(g2), "joint": float(gain)},
        "clipped": clipped,
        "true_doas_deg": [list(d.degrees()) for d in doas],
        "room": spec.to_json()["room"],
        "rirs": rir_meta,
    }
    return SceneBundle(mixture, targets, metadata, components, direct)
