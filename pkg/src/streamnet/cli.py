"""Command-line entry point: ``streamnet <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (bad file, shape mismatch,
failed check) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import arch, cost, fileio, harness, search, streaming
from .arch import dump_architecture, emulate_trained, init_random_weights, load_architecture, spatial_sizes


class DomainError(Exception):
    pass


def _weights(spec, source: str):
    """A weights file path, or ``seed:N`` for random trained-like weights."""
    if source.startswith("seed:"):
        seed = int(source.split(":", 1)[1])
        return emulate_trained(init_random_weights(spec, seed), seed)
    return fileio.load_weights(source)


def cmd_describe(args):
    spec = load_architecture(args.arch)
    v = spec.video
    sizes = spatial_sizes(spec)
    print(f"{spec.name}: input {v.frames}x{v.resolution}^2, stride {v.stride}, {v.channels} channels")
    print(f"{len(spec.blocks) + 1} blocks, depths {tuple(spec.depths())}")
    print(f"  block1 (conv1)  {spec.stem.kernel}, {spec.stem.width}  -> {v.frames}x{sizes[0]}^2")
    n = 1
    for i, block in enumerate(spec.blocks):
        print(f"  block{i + 2}  x{len(block.layers)}")
        for layer in block.layers:
            extra = [f"stride {layer.stride}"] if layer.stride != 1 else []
            extra.append(f"se={layer.se}")
            if layer.causal and layer.kernel.time > 1:
                extra.append(f"causal, buffer {layer.kernel.time - 1}")
            print(f"    {layer.kernel}, {layer.base}, {layer.expand}  -> {v.frames}x{sizes[n]}^2  ({', '.join(extra)})")
            n += 1
    h = spec.head
    print(f"  head  conv 1x1x1, {h.conv}; pool; dense {h.hidden}; dense {h.classes}")
    print(f"streamable: {'yes' if spec.streamable else 'no'}")
    print(f"GFLOPs per video: {cost.network_flops(spec):.4f}")
    print(f"parameters: {cost.parameter_count(spec):,}")


def cmd_cost(args):
    spec = load_architecture(args.arch)
    video = arch.VideoSpec(
        args.t or spec.video.frames, args.resolution or spec.video.resolution, spec.video.stride, spec.video.channels
    )
    if args.mode == "single":
        mode = cost.Mode.single()
    elif args.mode == "multi":
        mode = cost.Mode.multi(args.clips, args.t_clip, args.overlap)
    else:
        mode = cost.Mode.stream(args.t_clip)
        if not spec.streamable:
            spec = arch.make_causal(spec)
            print(f"note: streaming needs causal layers; costing {spec.name}")
    report = cost.cost_report(spec, video, [mode])
    if args.table:
        print(report.to_text())
    else:
        print(f"{spec.name}: {video.frames}x{video.resolution}^2")
        print(f"GFLOPs per video: {report.gflops_per_video:.4f}")
        for label, peak in report.peak_memory_bytes.items():
            print(f"mode {label}: {report.mode_gflops[label]:.4f} GFLOPs")
            print(f"peak memory: {peak} bytes ({peak / 2**20:.3f} MiB)")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            f.write(report.to_json())


def _weights_and_video(spec, args):
    """Resolve ``<weights> <tensor>`` or ``--random-seed S <tensor>``."""
    if args.random_seed is not None:
        if len(args.inputs) != 1:
            raise DomainError("with --random-seed give exactly one tensor path")
        weights, tensor = _weights(spec, f"seed:{args.random_seed}"), args.inputs[0]
    else:
        if len(args.inputs) != 2:
            raise DomainError("expected <weights> <tensor> (or --random-seed S <tensor>)")
        weights, tensor = _weights(spec, args.inputs[0]), args.inputs[1]
    return weights, fileio.load_video_tensor(tensor)


def cmd_infer(args):
    spec = load_architecture(args.arch)
    weights, video = _weights_and_video(spec, args)
    if args.ensemble:
        spec_b = load_architecture(args.ensemble[0])
        weights_b = _weights(spec_b, args.ensemble[1])
        result = harness.eval_temporal_ensemble(spec, weights, spec_b, weights_b, video, args.offset, args.top_k)
    elif args.multi_clip:
        t_clip = args.t_clip or video.shape[0]
        step = args.step if args.step is not None else t_clip
        result = harness.eval_multi_clip(spec, weights, video, args.clips, t_clip, step, args.top_k)
    else:
        result = harness.eval_single_clip(spec, weights, video, args.stride, args.top_k)
    print(result.format())


def cmd_stream(args):
    spec = load_architecture(args.arch)
    weights, video = _weights_and_video(spec, args)
    session = streaming.StreamingSession(spec, weights)
    plan = streaming.ClipPlan.uniform(args.t_clip, video.shape[0])
    start = 0
    for size in plan.sizes:
        logits = session.push(video[start : start + size])
        for t, row in enumerate(logits):
            top = int(np.argmax(row))
            print(f"frame {start + t:>5}  top1={top:>4}  logit={row[top]:+.6f}")
        start += size
    print(f"state bytes: {session.state_nbytes()}")
    print(harness.EvalResult.from_logits(session.predict(), args.top_k, mode="stream", t_clip=args.t_clip).format())


def cmd_verify(args):
    spec = load_architecture(args.arch)
    t = args.t or spec.video.frames
    weights = emulate_trained(init_random_weights(spec, args.seed), args.seed)
    rng = np.random.default_rng(args.seed)
    v = spec.video
    video = rng.standard_normal((t, v.resolution, v.resolution, v.channels)).astype(np.float32)
    plans = [streaming.ClipPlan.uniform(1, t), streaming.ClipPlan.uniform(2, t)]
    if t > 3:
        cut = max(1, (t - 3) // 2)
        plans.append(streaming.ClipPlan((3, cut, t - 3 - cut) if t - 3 - cut > 0 else (3, t - 3)))
    plans.append(streaming.ClipPlan((t,)))
    report = streaming.verify_equivalence(spec, weights, video, plans, args.tolerance)
    print(f"{spec.name}: seed {args.seed}, {t} frames")
    print(report.format())
    return 0 if report.passed else 1


def cmd_sample(args):
    space = search.scale_search_space(search.base_search_space(), args.phi)
    print(f"# search space at phi={args.phi:g}")
    print(space.dump().rstrip())
    for k in range(args.count):
        spec = search.sample_architecture(space, args.seed + k, causal=args.causal)
        print(f"# sample seed={args.seed + k}: depths {spec.depths()}, {cost.network_flops(spec):.4f} GFLOPs")
        if args.dump:
            print("---")
            print(dump_architecture(spec).rstrip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamnet", description="Streaming video network engine")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("describe", help="print an architecture")
    d.add_argument("arch")
    d.set_defaults(func=cmd_describe)

    c = sub.add_parser("cost", help="FLOPs and peak memory")
    c.add_argument("arch")
    c.add_argument("--mode", choices=("single", "multi", "stream"), default="single")
    c.add_argument("--t-clip", type=int, default=1)
    c.add_argument("--clips", type=int, default=1)
    c.add_argument("--overlap", type=int, default=0)
    c.add_argument("--t", type=int, help="total frames (default: the architecture's)")
    c.add_argument("--resolution", type=int)
    c.add_argument("--table", action="store_true", help="print every op")
    c.add_argument("--json", metavar="PATH", help="also write the report as JSON")
    c.set_defaults(func=cmd_cost)

    i = sub.add_parser("infer", help="classify a video tensor")
    i.add_argument("arch")
    i.add_argument("inputs", nargs="+", metavar="[weights] tensor")
    i.add_argument("--random-seed", type=int)
    mode = i.add_mutually_exclusive_group()
    mode.add_argument("--single-clip", action="store_true")
    mode.add_argument("--multi-clip", action="store_true")
    mode.add_argument("--ensemble", nargs=2, metavar=("ARCH2", "WEIGHTS2"))
    i.add_argument("--stride", type=int, default=1)
    i.add_argument("--clips", type=int, default=1)
    i.add_argument("--t-clip", type=int)
    i.add_argument("--step", type=int)
    i.add_argument("--offset", type=int, default=1)
    i.add_argument("--top-k", type=int, default=5)
    i.set_defaults(func=cmd_infer)

    s = sub.add_parser("stream", help="push a video through a streaming session")
    s.add_argument("arch")
    s.add_argument("inputs", nargs="+", metavar="[weights] tensor")
    s.add_argument("--random-seed", type=int)
    s.add_argument("--t-clip", type=int, default=1)
    s.add_argument("--top-k", type=int, default=5)
    s.set_defaults(func=cmd_stream)

    v = sub.add_parser("verify-equivalence", help="check streaming == offline on random data")
    v.add_argument("arch")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--t", type=int)
    v.add_argument("--tolerance", type=float, default=1e-5)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("sample-space", help="scale the search space and sample architectures")
    m.add_argument("--phi", type=float, default=0.0)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--count", type=int, default=1)
    m.add_argument("--causal", action="store_true")
    m.add_argument("--dump", action="store_true", help="print each sample as an architecture file")
    m.set_defaults(func=cmd_sample)
    return p


DOMAIN_ERRORS = (
    DomainError,
    arch.SpecError,
    arch.WeightError,
    fileio.FormatError,
    streaming.StreamingUnsupported,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args) or 0
    except DOMAIN_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
