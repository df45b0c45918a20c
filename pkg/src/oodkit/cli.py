"""Command-line entry point.

Exit codes are a stable contract for scripting: 0 success, 1 runtime or
numeric failure, 2 usage error. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import detectors as det_mod
from .array_store import load_bundle
from .errors import OodkitError
from .evaluation import DetectorSpec, render_report, run_benchmark
from .synth import OodRecipe, SynthSpec, default_recipes, generate_adversarial_head, generate_bundle

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oodkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a deterministic synthetic bundle")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--classes", type=int, default=4)
    p_synth.add_argument("--n-per-class", type=int, default=500)
    p_synth.add_argument("--separation", type=float, default=6.0)
    p_synth.add_argument("--noise", type=float, default=1.0)
    p_synth.add_argument("--signal-dims", type=int, default=None)
    p_synth.add_argument("--near-scale", type=float, default=1.0)
    p_synth.add_argument("--far-scale", type=float, default=20.0)
    p_synth.add_argument("--adversarial", action="store_true",
                         help="emit the column-zeroing adversarial head variant")
    p_synth.add_argument("--p", type=float, default=90.0,
                         help="sparsity level the adversarial construction targets")
    p_synth.add_argument("--out", required=True)

    p_fit = sub.add_parser("fit", help="fit detectors on a bundle and serialize them")
    _add_detector_args(p_fit)
    p_fit.add_argument("--manifest", required=True)
    p_fit.add_argument("--out", default=None,
                       help="output directory (default: <bundle dir>/detector_<method>)")

    p_eval = sub.add_parser("eval", help="run the benchmark and render a report")
    _add_detector_args(p_eval)
    p_eval.add_argument("--manifest", action="append", default=[],
                        help="bundle manifest; repeat for multiple checkpoints")
    p_eval.add_argument("--config", default=None,
                        help="JSON run config mirroring the CLI flags field-for-field")
    p_eval.add_argument("--format", choices=("csv", "markdown", "json"), default="markdown")
    p_eval.add_argument("--tpr", type=float, default=0.95)
    p_eval.add_argument("--out", default=None, help="write report here instead of stdout")
    return parser


def _add_detector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", action="append", default=[],
                   choices=det_mod.ALL_METHODS, help="repeat for multiple detectors")
    p.add_argument("--p", type=float, default=90.0, help="DICE/DICE-COL sparsity percent")
    p.add_argument("--prune-percent", type=float, default=90.0, help="ASH prune percent")
    p.add_argument("--k", type=int, default=None, help="KNN neighbor rank")
    p.add_argument("--pca-components", type=int, default=None)
    p.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="disable L2 normalization of KNN embeddings")
    p.add_argument("--subsample-fraction", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=None,
                   help="covariance ridge for MDS/RMDS (default: relative)")
    p.add_argument("--printed-form", action="store_true",
                   help="use the sum-of-exp(-logit) energy variant")
    p.add_argument("--seed", type=int, default=0)


def _spec_from_args(args: argparse.Namespace, method: str) -> DetectorSpec:
    pca = args.pca_components if method in det_mod.REPRESENTATION_METHODS else None
    return DetectorSpec(
        method=method,
        p=args.p,
        prune_percent=args.prune_percent,
        k=args.k,
        pca_components=pca,
        normalize=args.normalize,
        subsample_fraction=args.subsample_fraction,
        epsilon=args.epsilon,
        printed_form=args.printed_form,
        seed=args.seed,
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = SynthSpec(
            seed=args.seed,
            d=args.dim,
            c=args.classes,
            n_per_class=args.n_per_class,
            separation=args.separation,
            noise=args.noise,
            signal_dims=args.signal_dims,
            recipes=default_recipes(args.near_scale, args.far_scale),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        if args.adversarial:
            manifest = generate_adversarial_head(spec, args.out, p=args.p)
        else:
            manifest = generate_bundle(spec, args.out)
    except (OodkitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    print(manifest)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    if not args.method:
        print("error: at least one --method is required", file=sys.stderr)
        return USAGE_ERROR
    try:
        specs = [_spec_from_args(args, m) for m in args.method]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        bundle = load_bundle(args.manifest)
        from .evaluation import fit_detector

        for spec in specs:
            det = fit_detector(bundle, spec)
            out = Path(args.out) if args.out and len(specs) == 1 else (
                Path(args.out or Path(args.manifest).parent) / f"detector_{spec.label}"
            )
            det_mod.save_detector(det, out)
            print(out)
    except (OodkitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    manifests = list(args.manifest)
    methods = list(args.method)
    fmt = args.format
    tpr = args.tpr
    specs: list[DetectorSpec] = []
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
            manifests = cfg.get("manifests", manifests)
            fmt = cfg.get("format", fmt)
            tpr = cfg.get("tpr", tpr)
            for entry in cfg.get("detectors", []):
                specs.append(DetectorSpec(seed=cfg.get("seed", args.seed), **entry))
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            print(f"error: bad config: {exc}", file=sys.stderr)
            return USAGE_ERROR
    if not manifests or (not methods and not specs):
        print("error: need at least one --manifest and one --method (or --config)",
              file=sys.stderr)
        return USAGE_ERROR
    try:
        specs.extend(_spec_from_args(args, m) for m in methods)
        if not 0.0 < tpr <= 1.0:
            raise ValueError(f"tpr {tpr} outside (0, 1]")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        bundles = [load_bundle(m) for m in manifests]
        report = run_benchmark(bundles, specs, tpr=tpr)
        text = render_report(report, fmt)
    except (OodkitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "fit":
        return _cmd_fit(args)
    return _cmd_eval(args)


if __name__ == "__main__":
    sys.exit(main())
