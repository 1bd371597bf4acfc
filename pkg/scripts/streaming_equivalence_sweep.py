"""Streaming vs offline logits on seeded random causal networks.

For each network, pushes a random video under several subclip plans and
prints the largest per-frame and clip-level logit differences.

    python scripts/streaming_equivalence_sweep.py --nets 25 --frames 16
"""

import argparse
import sys

from streamnet.fixtures import random_causal_spec, random_video, trained_weights
from streamnet.streaming import ClipPlan, verify_equivalence


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--nets", type=int, default=25)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--tolerance", type=float, default=1e-5)
    args = p.parse_args()

    t = args.frames
    plans = [ClipPlan.uniform(1, t), ClipPlan.uniform(2, t), ClipPlan.uniform(max(1, t // 3), t), ClipPlan((t,))]
    worst = 0.0
    failed = 0
    print(f"{'seed':>5} {'blocks':>6} {'S':>4}  " + "  ".join(f"{pl.label():>16}" for pl in plans))
    for seed in range(args.nets):
        spec = random_causal_spec(seed)
        weights = trained_weights(spec, seed)
        video = random_video(spec, t, seed)
        v = spec.video
        report = verify_equivalence(spec, weights, video, plans, args.tolerance)
        deltas = [max(r.max_frame_delta, r.clip_delta) for r in report.results]
        worst = max(worst, *deltas)
        failed += not report.passed
        print(f"{seed:>5} {len(spec.blocks):>6} {v.resolution:>4}  " + "  ".join(f"{d:>16.2e}" for d in deltas))
    print(f"worst |delta| {worst:.2e}; {failed} of {args.nets} networks above {args.tolerance:g}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
