"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 estimator failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fp_estimator, fp_value, harness, io, sp_estimator
from .auction_sim import (
    make_fp_partial_oracle,
    make_sp_partial_oracle,
    simulate_fp,
    simulate_sp,
)
from .dist_core import kolmogorov, levy, wasserstein1
from .errors import EstimationError, ValidationError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="auctionmetrics",
        description="Auction simulation and nonparametric bid/value estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw observation logs from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--format", required=True, choices=[io.FORMAT_FP, io.FORMAT_SP])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-fp", help="first-price bid-CDF estimation")
    p.add_argument("--samples", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=["effective", "full"], default="effective")
    p.add_argument("--p", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-fp-density", help="forward-difference density")
    p.add_argument("--cdf", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-fp-partial", help="reserve-probe first-price estimation")
    p.add_argument("--model", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-values", help="value-CDF estimation from fp samples")
    p.add_argument("--samples", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--zeta", type=float, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--lipschitz", type=float)
    group.add_argument("--general", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-sp", help="second-price fixed-point pipeline")
    p.add_argument("--samples", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--nu", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--micro-delta", type=float)
    p.add_argument("--fp-iters", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-sp-partial", help="reserve-probe second-price estimation")
    p.add_argument("--model", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="convergence sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("lower-bound", help="hard-instance experiment")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--out")

    p = sub.add_parser("metric", help="distance between two stored CDFs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--kind", required=True,
                   choices=["kolmogorov", "levy", "wasserstein1"])
    return parser


def _cmd_simulate(args):
    model = io.io_read_model(args.model)
    if args.format == io.FORMAT_FP:
        samples = simulate_fp(model, args.n, args.seed)
    else:
        samples = simulate_sp(model, args.n, args.seed)
    io.io_write_samples(args.out, samples, args.format)


def _cmd_estimate_fp(args):
    samples = io.io_read_samples(args.samples, io.FORMAT_FP, args.k)
    if args.mode == "effective":
        if args.p is None or args.gamma is None:
            raise ValidationError("effective mode needs --p and --gamma")
        cfg = fp_estimator.FpEstimatorConfig(
            p=args.p, gamma=args.gamma,
            eps=args.eps if args.eps is not None else args.gamma / 2.0,
        )
        cdfs = fp_estimator.estimate_bid_cdf_effective(samples, cfg)
        diag = {"mode": "effective", "n": samples.n, "p": args.p, "gamma": args.gamma}
    else:
        if args.lam is None or args.eps is None:
            raise ValidationError("full mode needs --lambda and --eps")
        cdfs = fp_estimator.estimate_bid_cdf_full(samples, args.lam, args.eps)
        diag = {"mode": "full", "n": samples.n, "lambda": args.lam, "eps": args.eps}
    io.io_write_cdfs(args.out, cdfs, diag)


def _cmd_estimate_fp_density(args):
    cdfs = io.io_read_cdfs(args.cdf)
    import numpy as np

    out = []
    for F in cdfs:
        est = fp_estimator.estimate_density(F, args.h, args.p)
        grid = np.linspace(args.p, 1.0 - args.h, args.grid)
        out.append({"x": [io.fmt_float(v) for v in grid],
                    "density": [io.fmt_float(v) for v in est.eval(grid)]})
    Path(args.out).write_text(json.dumps({"version": 1, "densities": out}, indent=2))


def _cmd_estimate_fp_partial(args):
    model = io.io_read_model(args.model)
    oracle = make_fp_partial_oracle(model)
    cdfs, diag = fp_estimator.fp_partial_estimate(
        oracle, model.k, args.p, args.gamma, args.eps,
        delta=args.delta, lipschitz_L=args.lipschitz, seed=args.seed,
    )
    io.io_write_cdfs(args.out, cdfs, diag)


def _cmd_estimate_values(args):
    samples = io.io_read_samples(args.samples, io.FORMAT_FP, args.k)
    cfg = fp_value.ValueEstimatorConfig(
        p=args.p, gamma=args.gamma, eps=args.eps, zeta=args.zeta,
        lipschitz_L=None if args.general else args.lipschitz,
    )
    cdfs, diag = fp_value.estimate_value_cdf_effective(samples, cfg)
    io.io_write_cdfs(args.out, cdfs, diag)


def _cmd_estimate_sp(args):
    samples = io.io_read_samples(args.samples, io.FORMAT_SP, args.k)
    overrides = {}
    if args.nu is not None:
        overrides["nu"] = args.nu
    if args.theta is not None:
        overrides["theta"] = args.theta
    if args.micro_delta is not None:
        overrides["micro_delta"] = args.micro_delta
    if args.fp_iters is not None:
        overrides["fp_iters"] = args.fp_iters
    cdfs, diag = sp_estimator.estimate_sp(
        samples, args.alpha, args.eta, args.eps, overrides=overrides,
    )
    io.io_write_cdfs(args.out, cdfs, diag)


def _cmd_estimate_sp_partial(args):
    model = io.io_read_model(args.model)
    oracle = make_sp_partial_oracle(model)
    cdfs, diag = sp_estimator.sp_partial_estimate(
        oracle, args.p, args.gamma, args.eps,
        delta=args.delta, lipschitz_L=args.lipschitz, seed=args.seed,
    )
    io.io_write_cdfs(args.out, cdfs, diag)


def _cmd_sweep(args):
    from .auction_sim import AuctionModel

    raw = json.loads(Path(args.config).read_text())
    config = harness.ExperimentConfig(
        model=AuctionModel.from_dict(raw["model"]),
        estimator=raw["estimator"],
        n_schedule=raw["n_schedule"],
        seeds=raw["seeds"],
        metric=raw.get("metric", "kolmogorov"),
        support_lo=raw.get("support", [0.0, 1.0])[0],
        support_hi=raw.get("support", [0.0, 1.0])[1],
        seed_root=raw.get("seed_root", 0),
        estimator_args=raw.get("estimator_args", {}),
    )
    report = harness.run_convergence(config)
    Path(args.out).write_text(json.dumps(io._jsonable(report.to_dict()), indent=2))


def _cmd_lower_bound(args):
    result = harness.run_lower_bound_experiment(
        args.k, args.eps, args.lam, args.n, args.trials,
    )
    text = json.dumps(io._jsonable(result), indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)


def _cmd_metric(args):
    a = io.io_read_cdfs(args.a)
    b = io.io_read_cdfs(args.b)
    if len(a) != len(b):
        raise ValidationError("CDF bundles have different lengths")
    fns = {"kolmogorov": kolmogorov, "levy": levy, "wasserstein1": wasserstein1}
    for i, (fa, fb) in enumerate(zip(a, b), start=1):
        print(f"{i},{io.fmt_float(fns[args.kind](fa, fb))}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate-fp": _cmd_estimate_fp,
    "estimate-fp-density": _cmd_estimate_fp_density,
    "estimate-fp-partial": _cmd_estimate_fp_partial,
    "estimate-values": _cmd_estimate_values,
    "estimate-sp": _cmd_estimate_sp,
    "estimate-sp-partial": _cmd_estimate_sp_partial,
    "sweep": _cmd_sweep,
    "lower-bound": _cmd_lower_bound,
    "metric": _cmd_metric,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
