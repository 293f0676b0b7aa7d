"""Command-line entry point: ``doabeam simulate | separate | eval``.

Exit codes: 0 success, 2 usage error, 3 data/format error,
4 numerical or convergence failure.
"""
import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Recipe, read_manifest, simulate_dataset
from .doa import FIT_CANDIDATES, DoaGrid, DoaPair, doa_fit, separate_tf, srp_init
from .errors import DoabeamError, FormatError, NonConvergenceError, UsageError
from .geometry import ArrayGeometry, default_array
from .losses import LossSpec
from .metrics import evaluate_scene
from .postmask import apply_masks, ratio_mask
from .wavio import read_wav, write_wav
from .wola import StftSpec, istft, stft

log = logging.getLogger("doabeam")

DOA_MODES = ("oracle", "srp", "fit")
CSV_COLUMNS = ["scene_id", "status", "permutation",
               "si_sdr_1", "si_sdr_2", "sir_1", "sir_2",
               "delta_si_sdr_1", "delta_si_sdr_2", "delta_sir_1", "delta_sir_2",
               "mean_delta_si_sdr", "mean_delta_sir"]


@dataclass
class PipelineConfig:
    geometry: Optional[str] = None
    stft: StftSpec = field(default_factory=StftSpec)
    loss: LossSpec = field(default_factory=LossSpec)
    doa_mode: str = "oracle"
    postmask: bool = False
    postmask_exponent: float = 2.0
    postmask_floor: float = 0.05
    loading: float = 1e-9
    output_dir: str = "."
    grid_az_step: float = 5.0
    fit_candidates: int = FIT_CANDIDATES

    def __post_init__(self):
        if self.doa_mode not in DOA_MODES:
            raise UsageError(f"doa mode must be one of {DOA_MODES}")
        if self.geometry is not None and not Path(self.geometry).is_file():
            raise UsageError(f"geometry file {self.geometry} does not exist")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file {path} does not exist")
        doc = json.loads(path.read_text())
        if "stft" in doc:
            doc["stft"] = StftSpec(**doc["stft"])
        if "loss" in doc:
            doc["loss"] = LossSpec.from_json(doc["loss"])
        if doc.get("geometry") and not Path(doc["geometry"]).is_absolute():
            doc["geometry"] = str(path.parent / doc["geometry"])
        return cls(**doc)

    def array(self) -> ArrayGeometry:
        return default_array() if self.geometry is None else ArrayGeometry.load(self.geometry)

    def postmask_args(self):
        if not self.postmask:
            return None
        return {"p": self.postmask_exponent, "floor": self.postmask_floor}


# simulate ------------------------------------------------------------------

def cmd_simulate(recipe_path, out_dir, count, seed, jobs=1) -> Path:
    if count < 0:
        raise UsageError("count must be >= 0")
    recipe = Recipe.load(recipe_path)
    manifest = simulate_dataset(recipe, out_dir, count, seed, jobs)
    log.info("wrote %d scenes to %s", count, manifest)
    return manifest


# separate ------------------------------------------------------------------

def _load_mixture(path, geom, spec):
    x, rate = read_wav(path)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != geom.n_mics:
        raise FormatError(f"{path} has {x.shape[1]} channels, geometry has {geom.n_mics}")
    if rate != spec.sample_rate:
        raise FormatError(f"{path} is {rate} Hz, pipeline expects {spec.sample_rate} Hz")
    return x


def cmd_separate(config: PipelineConfig, input_wav, doas: Optional[DoaPair] = None,
                 targets=None, prefix=None):
    """Separate one mixture; writes ``<prefix>_s1.wav``, ``_s2.wav`` and ``.json``."""
    geom, spec = config.array(), config.stft
    x = _load_mixture(input_wav, geom, spec)
    y = stft(x, spec)
    sidecar = {"input": str(input_wav), "doa_mode": config.doa_mode,
               "postmask": config.postmask_args()}
    converged = True

    if config.doa_mode == "oracle":
        if doas is None:
            raise UsageError("oracle mode needs --az1 and --az2")
    elif config.doa_mode == "srp":
        doas = srp_init(y, geom, DoaGrid(az_step=config.grid_az_step))
    else:
        if not targets:
            raise UsageError("fit mode needs --targets T1.wav T2.wav")
        tgt = []
        for t in targets:
            s, rate = read_wav(t)
            if rate != spec.sample_rate:
                raise FormatError(f"{t} is {rate} Hz, expected {spec.sample_rate}")
            s = s if s.ndim == 1 else s[:, 0]
            if len(s) != len(x):
                raise FormatError(f"{t} length {len(s)} differs from mixture length {len(x)}")
            tgt.append(stft(s, spec))
        init = doas if doas is not None else srp_init(
            y, geom, DoaGrid(az_step=config.grid_az_step), n=config.fit_candidates)
        result = doa_fit(y, tgt, config.loss, init, geom, loading=config.loading)
        doas, converged = result.doas, result.converged
        inits = [init] if isinstance(init, DoaPair) else init
        sidecar.update(loss=result.loss, init_loss=result.init_loss,
                       n_evals=result.n_evals, converged=result.converged,
                       init_doas_deg=[p.as_degrees().tolist() for p in inits],
                       loss_spec=config.loss.to_json())

    beams = separate_tf(y, doas, geom, config.loading)
    if config.postmask:
        beams = apply_masks(beams, ratio_mask(beams, **config.postmask_args()))
    outs = [istft(b)[:, 0] for b in beams]

    out_dir = Path(config.output_dir)
    stem = prefix or Path(input_wav).stem
    paths = [out_dir / f"{stem}_s1.wav", out_dir / f"{stem}_s2.wav"]
    for p, s in zip(paths, outs):
        write_wav(p, s, spec.sample_rate)
    sidecar["doas_deg"] = doas.as_degrees().tolist()
    sidecar["outputs"] = [str(p) for p in paths]
    (out_dir / f"{stem}.json").write_text(json.dumps(sidecar, indent=2))
    if not converged:
        raise NonConvergenceError("DOA fit hit the evaluation budget; outputs use best-so-far",
                                  best=doas)
    return paths


# eval ----------------------------------------------------------------------

def _fmt(v):
    return f"{v:.6f}"


def cmd_eval(manifest_path, separated_dir, out_dir):
    """Score separated outputs for every manifest scene.

    Looks for ``<separated_dir>/<scene_id>_s1.wav`` and ``_s2.wav``. Writes
    ``eval.csv``, ``<scene_id>.json`` reports and ``summary.json``.
    """
    manifest_path = Path(manifest_path)
    records = read_manifest(manifest_path)
    root = manifest_path.parent
    sep_dir, out = Path(separated_dir), Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, rows = [], []
    for rec in records:
        sid = rec["scene_id"]
        try:
            mix, _ = read_wav(root / rec["mixture"])
            targets = [read_wav(root / t)[0] for t in rec["targets"]]
            seps = [read_wav(sep_dir / f"{sid}_s{i}.wav")[0] for i in (1, 2)]
            seps = [s if s.ndim == 1 else s[:, 0] for s in seps]
            mix_ref = mix if mix.ndim == 1 else mix[:, 0]
            report = evaluate_scene(seps, targets, mix_ref, scene_id=sid)
        except DoabeamError as exc:
            log.warning("scene %s failed: %s", sid, exc)
            rows.append({"scene_id": sid, "status": "failed"})
            continue
        reports.append(report)
        (out / f"{sid}.json").write_text(report.dumps())
        rows.append({
            "scene_id": sid, "status": "ok",
            "permutation": "".join(str(p) for p in report.permutation),
            "si_sdr_1": _fmt(report.si_sdr[0]), "si_sdr_2": _fmt(report.si_sdr[1]),
            "sir_1": _fmt(report.sir[0]), "sir_2": _fmt(report.sir[1]),
            "delta_si_sdr_1": _fmt(report.delta_si_sdr[0]),
            "delta_si_sdr_2": _fmt(report.delta_si_sdr[1]),
            "delta_sir_1": _fmt(report.delta_sir[0]), "delta_sir_2": _fmt(report.delta_sir[1]),
            "mean_delta_si_sdr": _fmt(report.mean_delta_si_sdr),
            "mean_delta_sir": _fmt(report.mean_delta_sir),
        })
    csv_path = out / "eval.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, restval="")
        writer.writeheader()
        writer.writerows(rows)
    summary = {"n_scenes": len(records), "n_ok": len(reports),
               "n_failed": len(records) - len(reports)}
    if reports:
        summary["mean_delta_si_sdr"] = float(np.mean([r.mean_delta_si_sdr for r in reports]))
        summary["mean_delta_sir"] = float(np.mean([r.mean_delta_sir for r in reports]))
        summary["mean_si_sdr"] = float(np.mean([r.si_sdr for r in reports]))
        summary["mean_sir"] = float(np.mean([r.sir for r in reports]))
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return csv_path, summary


# argument parsing ----------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="doabeam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated mixture dataset")
    p.add_argument("recipe", help="recipe JSON")
    p.add_argument("out_dir")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("separate", help="separate one multichannel WAV into two sources")
    p.add_argument("input", help="multichannel mixture WAV")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--geometry", help="array geometry JSON (default: 7-mic circle)")
    p.add_argument("--doa", choices=DOA_MODES)
    for name in ("az1", "el1", "az2", "el2"):
        p.add_argument(f"--{name}", type=float, help="degrees")
    p.add_argument("--postmask", action="store_true", default=None)
    p.add_argument("--targets", nargs=2, metavar=("T1", "T2"),
                   help="reference-channel target WAVs (fit mode)")
    p.add_argument("--out-dir")
    p.add_argument("--prefix", help="output file stem (default: input stem)")
    p.add_argument("--seed", type=int, default=0, help="accepted for interface symmetry; "
                   "separation is deterministic")

    p = sub.add_parser("eval", help="score separated outputs against a manifest")
    p.add_argument("manifest")
    p.add_argument("separated_dir")
    p.add_argument("--out-dir", default="eval")
    return parser


def _doas_from_args(args) -> Optional[DoaPair]:
    if args.az1 is None and args.az2 is None:
        return None
    if args.az1 is None or args.az2 is None:
        raise UsageError("give both --az1 and --az2")
    return DoaPair.from_degrees(args.az1, args.el1 or 0.0, args.az2, args.el2 or 0.0)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            path = cmd_simulate(args.recipe, args.out_dir, args.count, args.seed, args.jobs)
            print(path)
        elif args.command == "separate":
            config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
            if args.geometry:
                config.geometry = args.geometry
            if args.doa:
                config.doa_mode = args.doa
            if args.postmask:
                config.postmask = True
            if args.out_dir:
                config.output_dir = args.out_dir
            config.__post_init__()
            for p in cmd_separate(config, args.input, _doas_from_args(args),
                                  args.targets, args.prefix):
                print(p)
        else:
            csv_path, summary = cmd_eval(args.manifest, args.separated_dir, args.out_dir)
            print(csv_path)
            print(json.dumps(summary))
    except DoabeamError as exc:
        print(f"doabeam: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
