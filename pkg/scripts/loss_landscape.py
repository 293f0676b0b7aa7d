"""Loss along one source's azimuth with the other held at its true direction.

    python scripts/loss_landscape.py --t60 0.3 --targets direct --span 30
"""
import argparse

import numpy as np

from doabeam.dataset import Recipe, dry_pair, sample_scene_spec
from doabeam.doa import DoaPair, Separator
from doabeam.geometry import default_array
from doabeam.losses import LossSpec, upit_loss
from doabeam.roomsim import make_scene
from doabeam.wola import StftSpec, stft


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t60", type=float, default=0.3, help="0 for anechoic")
    p.add_argument("--targets", choices=("direct", "window"), default="direct")
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--span", type=float, default=30.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--scene", type=int, default=0)
    p.add_argument("--seed", type=int, default=610)
    args = p.parse_args()

    t60 = None if args.t60 <= 0 else (args.t60, args.t60)
    recipe = Recipe(duration_s=args.duration, t60=t60, snr_db=None)
    rng = np.random.default_rng([args.seed, args.scene])
    geom, spec = default_array(), StftSpec()
    bundle = make_scene(sample_scene_spec(recipe, rng, args.scene), dry_pair(recipe, rng), geom)
    (az1, el1), (az2, el2) = bundle.metadata["true_doas_deg"]
    targets = bundle.direct if args.targets == "direct" else bundle.targets
    tgts = [stft(t, spec) for t in targets]
    y = stft(bundle.mixture, spec)
    sep = Separator(geom, spec)
    loss = LossSpec("cMSE", 1.0, 0.3)
    print(f"truth az1 {az1:.1f} el1 {el1:.1f}  az2 {az2:.1f} el2 {el2:.1f}")
    offsets = np.arange(-args.span, args.span + 1e-9, args.step)
    values = []
    for d in offsets:
        pair = DoaPair.from_degrees(az1 + d, el1, az2, el2)
        values.append(upit_loss(sep(y, pair, allow_degenerate=True), tgts, loss)[0])
    values = np.array(values)
    for d, v in zip(offsets, values):
        print(f"{d:+7.1f}  {v:.4f}{'  <- min' if v == values.min() else ''}")


if __name__ == "__main__":
    main()
