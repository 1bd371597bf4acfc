"""Compound scaling of the search space and the mean cost of sampled networks.

    python scripts/scaling_sweep.py --phis -1 0 1 2 3 --samples 100
"""

import argparse

import numpy as np

from streamnet.cost import network_flops
from streamnet.search import base_search_space, coefficient_product, sample_architecture, scale_search_space


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--phis", type=float, nargs="+", default=[-1, 0, 1, 2, 3])
    p.add_argument("--samples", type=int, default=100)
    args = p.parse_args()

    base = base_search_space()
    print(f"coefficient product alpha*beta^2*gamma^2*delta = {coefficient_product():.4f}")
    print(f"{'phi':>5} {'T':>4} {'S':>4} {'fps':>4} {'depth':>8}  {'widths':<32}{'mean GFLOPs':>12}{'ratio':>8}")
    previous = None
    for phi in args.phis:
        space = scale_search_space(base, phi)
        mean = float(np.mean([network_flops(sample_architecture(space, s)) for s in range(args.samples)]))
        ratio = f"{mean / previous:>8.2f}" if previous else f"{'-':>8}"
        v = space.video
        depth = f"{space.depth_range[0]}-{space.depth_range[1]}"
        print(f"{phi:>5g} {v.frames:>4} {v.resolution:>4} {v.stride:>4} {depth:>8}  {str(space.widths):<32}{mean:>12.3f}{ratio}")
        if space.clamped:
            print(f"      clamped: {', '.join(space.clamped)}")
        previous = mean


if __name__ == "__main__":
    main()
