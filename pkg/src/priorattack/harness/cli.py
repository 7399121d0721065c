"""
Command-line entry point.

    priorattack attack   --oracle linear20 --seed 0 --variant full --budget 2000
    priorattack ablate   --oracle mlp8 --seed 0 --seed 1 --budget 3000
    priorattack filter-apply --image in.pgm --out smooth.pgm
    priorattack estimate-bench --oracle linear100
    priorattack serve-stub --oracle linear20

Exit codes: 0 success, 1 configuration error, 2 oracle or transport
failure, 3 initialization failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..bilateral import FilterConfig, GuideSelection, filter_perturbation, joint_bilateral_filter
from ..core import Image, RandomSource
from ..errors import ConfigError
from ..gradprior import DISTANCES, Variant
from ..victims import OracleSpec, model_from_dict, read_image, write_image
from ..victims.remote import make_stub_server
from .bench import estimator_alignment, linear_boundary_point
from .config import ExperimentConfig, load_config
from .experiment import run_experiment
from .fixtures import FIXTURES, get_fixture

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE, EXIT_INIT = 0, 1, 2, 3


def _tolerance(text):
    return text if text == "hsja" else float(text)


def add_experiment_flags(p):
    """One flag per ExperimentConfig field; unset flags leave the config file's value alone."""
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--oracle", help="fixture name, model JSON file, or http(s) URL")
    p.add_argument("--target", help="target image (.pgm/.ppm/.imgf)")
    p.add_argument("--init", help="starting adversarial image")
    p.add_argument("--target-label", type=int)
    p.add_argument("--original-label", type=int)
    p.add_argument("--untargeted", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--class-count", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--milestones", type=int, nargs="+")
    p.add_argument("--mse-threshold", type=float)
    p.add_argument("--variant", dest="variants", action="append",
                   choices=[v.value for v in Variant])
    p.add_argument("--seed", dest="seeds", type=int, action="append")
    p.add_argument("--B", type=int, help="perturbations per gradient estimate")
    p.add_argument("--k", type=int, help="history window length")
    p.add_argument("--tau", type=float, help="history distance gate")
    p.add_argument("--rho", type=float, help="history cosine gate")
    p.add_argument("--distance-metric", choices=sorted(DISTANCES))
    p.add_argument("--baseline-correction", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--sigma-s", type=float)
    p.add_argument("--sigma-r", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--guide-mode", choices=[g.value for g in GuideSelection])
    p.add_argument("--renormalize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--search-tol", type=_tolerance, help="bisection width, or 'hsja' for dim**-1.5")
    p.add_argument("--max-step-attempts", type=int)
    p.add_argument("--init-attempts", type=int)
    p.add_argument("--max-iterations", type=int, help="stop after this many iterations")
    p.add_argument("--timeout", type=float, help="remote oracle timeout in seconds")
    p.add_argument("--max-retries", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")


def build_config(args):
    base = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {name: getattr(args, name, None) for name in ExperimentConfig.field_names()}
    return base.merged(overrides)


def _report(result, out):
    for o in result.outcomes:
        if o.error:
            print(f"{o.plan.run_id}: {o.status}: {o.error}", file=sys.stderr)
        else:
            print(
                f"{o.plan.run_id}: {o.status} queries={o.ledger_used} "
                f"best_mse={o.trace.best_mse_at(o.ledger_used):.6g} iterations={o.trace.iterations}"
            )
    for s in result.summary:
        print(
            f"{s['variant']:>9} Q={s['milestone']:<6} mean={s['mean_mse']:.6g} "
            f"median={s['median_mse']:.6g} asr={s['asr']:.3f}"
        )
    print(f"results written to {out}")
    return result.exit_code


def cmd_attack(args):
    config = build_config(args)
    if len(config.seeds) != 1 or len(config.variants) != 1:
        raise ConfigError("attack runs exactly one seed and one variant; use ablate for grids")
    config.validate()
    return _report(run_experiment(config), config.output_dir)


def cmd_ablate(args):
    if args.variants is None:
        args.variants = [v.value for v in Variant]
    config = build_config(args).validate()
    return _report(run_experiment(config), config.output_dir)


def cmd_filter_apply(args):
    image = read_image(args.image)
    guide = read_image(args.guide) if args.guide else image
    if guide.shape != image.shape:
        raise ConfigError(f"guide shape {guide.shape} != image shape {image.shape}")
    cfg = FilterConfig(args.sigma_s, args.sigma_r, args.radius)
    if args.noise:
        # smooth a random unit perturbation, rescaled to [0, 1] for viewing
        u = RandomSource(args.seed).normal(image.dim)
        u /= np.linalg.norm(u)
        out = filter_perturbation(u, guide.to_array(), cfg)
        span = np.ptp(out) or 1.0
        out = (out - out.min()) / span
    else:
        out = joint_bilateral_filter(image.to_array(), guide.to_array(), cfg)
    write_image(Image.from_array(np.clip(out, 0.0, 1.0).reshape(image.shape)), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _linear_victim(ref):
    if ref in FIXTURES:
        fx = get_fixture(ref)
        return fx.spec, fx.target
    with open(ref) as fh:
        doc = json.load(fh)
    model = model_from_dict(doc, Path(ref).parent)
    spec = OracleSpec(model, target_label=doc.get("target_label", getattr(model, "positive_label", 1)),
                      original_label=doc.get("original_label"))
    return spec, np.full(model.weights.size, 0.5)


def cmd_estimate_bench(args):
    spec, near = _linear_victim(args.oracle)
    if spec.kind != "linear":
        raise ConfigError("estimate-bench needs a linear victim (analytic gradient)")
    x = linear_boundary_point(spec.model, near)
    table = estimator_alignment(spec, x, args.B_values, range(args.seeds), args.delta)
    lines = ["B,mean_cosine,std_cosine"]
    for B, cos in table.items():
        lines.append(f"{B},{cos.mean():.17g},{cos.std():.17g}")
        print(f"B={B:<6} mean cos={cos.mean():.4f} (sd {cos.std():.4f}, {cos.size} seeds)")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_serve_stub(args):
    model = None
    if args.oracle:
        if args.oracle in FIXTURES:
            model = get_fixture(args.oracle).spec.model
        else:
            with open(args.oracle) as fh:
                model = model_from_dict(json.load(fh), Path(args.oracle).parent)
    server = make_stub_server(args.host, args.port, args.label, model, args.mode, args.delay)
    host, port = server.server_address[:2]
    print(f"http://{host}:{port}/predict", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="priorattack", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="single attack run")
    add_experiment_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("ablate", help="variant x seed grid (all five variants by default)")
    add_experiment_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("filter-apply", help="joint bilateral filter an image file")
    p.add_argument("--image", required=True)
    p.add_argument("--guide", help="guide image (default: the image itself)")
    p.add_argument("--sigma-s", type=float, default=2.0)
    p.add_argument("--sigma-r", type=float, default=8 / 255)
    p.add_argument("--radius", type=int)
    p.add_argument("--noise", action="store_true", help="filter a random perturbation instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_apply)

    p = sub.add_parser("estimate-bench", help="estimator alignment sweep over B")
    p.add_argument("--oracle", default="linear100")
    p.add_argument("--B-values", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--seeds", type=int, default=50, help="number of seeds")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--out", help="optional CSV output")
    p.set_defaults(func=cmd_estimate_bench)

    p = sub.add_parser("serve-stub", help="loopback prediction server for protocol tests")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--oracle", help="fixture name or model JSON to serve")
    p.add_argument("--label", type=int, default=0, help="fixed label when no model is given")
    p.add_argument("--mode", choices=["ok", "malformed", "error", "delay"], default="ok")
    p.add_argument("--delay", type=float, default=0.0)
    p.set_defaults(func=cmd_serve_stub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
