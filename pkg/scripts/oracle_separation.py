"""Oracle-DOA LCMV separation on simulated scenes, with and without post-mask.

    python scripts/oracle_separation.py --scenes 20 --t60 none
    python scripts/oracle_separation.py --scenes 10 --t60 0.3 0.6 --duration 6
"""
import argparse
import time

import numpy as np

from doabeam.dataset import Recipe, dry_pair, sample_scene_spec
from doabeam.doa import DoaPair, separate
from doabeam.geometry import default_array
from doabeam.metrics import evaluate_scene
from doabeam.roomsim import make_scene


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenes", type=int, default=20)
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--t60", nargs="+", default=["none"],
                   help="'none' for anechoic, or a low/high pair in seconds")
    p.add_argument("--snr", default="draw", help="'draw', 'none' or a value in dB")
    p.add_argument("--seed", type=int, default=500)
    return p.parse_args()


def main():
    args = parse_args()
    t60 = None if args.t60[0] == "none" else (float(args.t60[0]), float(args.t60[-1]))
    snr = {"draw": "draw", "none": None}.get(args.snr)
    snr = float(args.snr) if snr is None and args.snr != "none" else snr
    recipe = Recipe(duration_s=args.duration, t60=t60, snr_db=snr)
    geom = default_array()
    rows = []
    t0 = time.perf_counter()
    for i in range(args.scenes):
        rng = np.random.default_rng([args.seed, i])
        spec = sample_scene_spec(recipe, rng, i)
        bundle = make_scene(spec, dry_pair(recipe, rng), geom)
        doas = bundle.metadata["true_doas_deg"]
        pair = DoaPair.from_degrees(*doas[0], *doas[1])
        ref = bundle.mixture[:, geom.reference_index]
        row = []
        for pm in (None, {"p": 2.0, "floor": 0.05}):
            rep = evaluate_scene(separate(bundle.mixture, pair, geom, postmask=pm),
                                 bundle.targets, ref)
            row += [rep.mean_delta_si_sdr, rep.mean_delta_sir]
        rows.append(row)
        print(f"scene {i:3d}  dSI-SDR {row[0]:6.2f}  dSIR {row[1]:6.2f}  "
              f"| post-mask dSI-SDR {row[2]:6.2f}  dSIR {row[3]:6.2f}")
    m = np.mean(rows, axis=0)
    print(f"mean       dSI-SDR {m[0]:6.2f}  dSIR {m[1]:6.2f}  "
          f"| post-mask dSI-SDR {m[2]:6.2f}  dSIR {m[3]:6.2f}")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
