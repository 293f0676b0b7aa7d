"""Randomized scene recipes and on-disk dataset generation.

Scene ``i`` of a run with master seed ``s`` draws everything from
``default_rng([s, i])``, so any subset of scenes can be regenerated alone
and parallel runs match serial runs exactly.
"""
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, MissingCorpusError
from .geometry import ArrayGeometry, default_array
from .roomsim import ArrayPose, RoomSpec, SceneSpec, make_scene, synthetic_speech
from .wavio import read_wav, write_wav

SPEECH_LAYOUT = ("<speech_dir>/<speaker_id>/*.wav (mono, matching sample rate); "
                 "a flat directory of WAVs is read as one speaker per file")


@dataclass
class Recipe:
    speech_dir: str = "synthetic"
    duration_s: float = 10.0
    sample_rate: int = 16000
    dims_min: tuple = (4.0, 4.0, 2.5)
    dims_max: tuple = (8.0, 7.0, 3.5)
    t60: Optional[tuple] = (0.3, 0.6)  # None -> anechoic
    source_distance: tuple = (2.0, 4.0)
    source_height: tuple = (1.2, 1.9)
    array_height: tuple = (0.8, 1.5)
    min_az_separation_deg: float = 30.0
    wall_margin: float = 0.5
    ratio_db: object = "draw"
    snr_db: object = "draw"
    level_db: object = "draw"
    target_window_ms: float = 200.0
    geometry: Optional[str] = None

    @classmethod
    def load(cls, path) -> "Recipe":
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown recipe keys: {sorted(unknown)}")
        for key in ("dims_min", "dims_max", "t60", "source_distance", "source_height",
                    "array_height"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        recipe = cls(**doc)
        if recipe.geometry is not None and not Path(recipe.geometry).is_absolute():
            recipe.geometry = str(Path(path).parent / recipe.geometry)
        return recipe

    def array(self) -> ArrayGeometry:
        return default_array() if self.geometry is None else ArrayGeometry.load(self.geometry)


def sample_scene_spec(recipe: Recipe, rng, seed: int) -> SceneSpec:
    """Draw room, array pose and source positions; rejection-samples placement."""
    for _ in range(1000):
        dims = tuple(float(v) for v in rng.uniform(recipe.dims_min, recipe.dims_max))
        if recipe.t60 is None:
            room = RoomSpec(dims)
        else:
            t60 = float(rng.uniform(*recipe.t60))
            try:
                room = RoomSpec.from_t60(dims, t60)
            except ValueError:
                continue
        m = recipe.wall_margin
        pos = (float(rng.uniform(m, dims[0] - m)), float(rng.uniform(m, dims[1] - m)),
               float(rng.uniform(*recipe.array_height)))
        pose = ArrayPose(pos, float(rng.uniform(-np.pi, np.pi)))
        az = rng.uniform(-np.pi, np.pi, 2)
        sep = abs((az[0] - az[1] + np.pi) % (2 * np.pi) - np.pi)
        if np.rad2deg(sep) < recipe.min_az_separation_deg:
            continue
        dist = rng.uniform(*recipe.source_distance, 2)
        heights = rng.uniform(*recipe.source_height, 2)
        sources = []
        for a, d, h in zip(az, dist, heights):
            dz = h - pos[2]
            horiz = np.sqrt(max(d * d - dz * dz, 0.0))
            world = pose.yaw + a
            sources.append((float(pos[0] + horiz * np.cos(world)),
                            float(pos[1] + horiz * np.sin(world)), float(h)))
        if all(room.contains(s, m) for s in sources):
            return SceneSpec(room=room, pose=pose, sources=tuple(sources),
                             ratio_db=recipe.ratio_db, snr_db=recipe.snr_db,
                             level_db=recipe.level_db, seed=seed,
                             duration=recipe.duration_s, sample_rate=recipe.sample_rate,
                             target_window_ms=recipe.target_window_ms)
    raise DataError("could not place sources inside the sampled rooms; relax the recipe")


def speaker_files(speech_dir, sample_rate=16000):
    root = Path(speech_dir)
    if not root.is_dir():
        raise MissingCorpusError(f"speech directory {root} not found; expected {SPEECH_LAYOUT}")
    speakers = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(sub.glob("*.wav"))
        if files:
            speakers[sub.name] = files
    if not speakers:
        speakers = {f.stem: [f] for f in sorted(root.glob("*.wav"))}
    if len(speakers) < 2:
        raise MissingCorpusError(
            f"speech directory {root} needs at least two speakers; expected {SPEECH_LAYOUT}")
    return speakers


def _concat_speaker(files, n, rng, sample_rate):
    order = rng.permutation(len(files))
    chunks, total = [], 0
    while total < n:
        for i in order:
            x, rate = read_wav(files[i])
            if rate != sample_rate:
                raise DataError(f"{files[i]} has rate {rate}, expected {sample_rate}")
            if x.ndim > 1:
                x = x[:, 0]
            chunks.append(x)
            total += len(x)
            if total >= n:
                break
        if total == 0:
            raise DataError("speaker files are empty")
    return np.concatenate(chunks)[:n]


def dry_pair(recipe: Recipe, rng):
    n = int(round(recipe.duration_s * recipe.sample_rate))
    if recipe.speech_dir == "synthetic":
        return [synthetic_speech(n, recipe.sample_rate, rng) for _ in range(2)]
    speakers = speaker_files(recipe.speech_dir, recipe.sample_rate)
    names = sorted(speakers)
    pick = rng.choice(len(names), 2, replace=False)
    return [_concat_speaker(speakers[names[i]], n, rng, recipe.sample_rate) for i in pick]


def render_scene(recipe: Recipe, master_seed: int, index: int, out_dir):
    """Generate scene ``index`` and write its WAVs; returns the manifest record."""
    rng = np.random.default_rng([master_seed, index])
    spec = sample_scene_spec(recipe, rng, int(rng.integers(2 ** 31)))
    dry = dry_pair(recipe, rng)
    bundle = make_scene(spec, dry, recipe.array())
    scene_id = f"scene_{index:05d}"
    out = Path(out_dir)
    mix_rel = f"{scene_id}/mixture.wav"
    tgt_rel = [f"{scene_id}/target_1.wav", f"{scene_id}/target_2.wav"]
    write_wav(out / mix_rel, bundle.mixture, spec.sample_rate)
    for rel, t in zip(tgt_rel, bundle.targets):
        write_wav(out / rel, t, spec.sample_rate)
    meta = bundle.metadata
    return {
        "scene_id": scene_id,
        "mixture": mix_rel,
        "targets": tgt_rel,
        "draws": meta["draws"],
        "true_doas_deg": meta["true_doas_deg"],
        "room": meta["room"],
        "array_pose": {"position": list(spec.pose.position), "yaw": spec.pose.yaw},
        "sources": [list(s) for s in spec.sources],
        "seed": spec.seed,
        "clipped": meta["clipped"],
    }


def _render(args):
    return render_scene(*args)


def simulate_dataset(recipe: Recipe, out_dir, count: int, seed: int, jobs: int = 1) -> Path:
    """Write ``count`` scenes plus ``manifest.jsonl`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if count > 0 and recipe.speech_dir != "synthetic":
        speaker_files(recipe.speech_dir, recipe.sample_rate)  # fail before forking
    tasks = [(recipe, seed, i, out) for i in range(count)]
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_render, tasks))
    else:
        records = [_render(t) for t in tasks]
    manifest = out / "manifest.jsonl"
    with manifest.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return manifest


def read_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest {path} not found")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    return [json.loads(ln) for ln in lines]
