"""FLOPs, parameters and peak activation memory for the builtin networks.

    python scripts/cost_table.py [--t-clip 1] [--json out.json]
"""

import argparse
import json

from streamnet import cost
from streamnet.arch import builtin
from streamnet.cost import Mode


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--t-clip", type=int, default=1)
    p.add_argument("--json", metavar="PATH")
    args = p.parse_args()

    rows = []
    for name in ("A0", "A0-Stream", "A2", "A2-Stream"):
        spec = builtin(name)
        v = spec.video
        row = {
            "name": spec.name,
            "input": f"{v.frames}x{v.resolution}^2",
            "gflops": cost.network_flops(spec),
            "params_m": cost.parameter_count(spec) / 1e6,
            "single_mib": cost.peak_memory(spec, None, Mode.single()) / 2**20,
        }
        if spec.streamable:
            row["stream_mib"] = cost.peak_memory(spec, None, Mode.stream(args.t_clip)) / 2**20
            row["state_kib"] = cost.persistent_bytes(spec) / 2**10
        rows.append(row)

    print(f"{'net':<11}{'input':>11}{'GFLOPs':>9}{'params':>9}{'single MiB':>12}{'stream MiB':>12}{'state KiB':>11}")
    for r in rows:
        stream = f"{r['stream_mib']:>12.2f}{r['state_kib']:>11.1f}" if "stream_mib" in r else f"{'-':>12}{'-':>11}"
        print(f"{r['name']:<11}{r['input']:>11}{r['gflops']:>9.3f}{r['params_m']:>8.2f}M{r['single_mib']:>12.2f}{stream}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
