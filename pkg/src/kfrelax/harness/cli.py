"""Command-line entry point: ``kfrelax {toy,rl,lax,lemmas,plot}``.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""
import argparse
import sys
from pathlib import Path

from .config import ESTIMATORS, UsageError, build_config, load_config_file
from .records import read_csv
from .svg import emit_svg, records_to_series

_SHARED = {
    "lr_surrogate": float, "damping": float, "trust_bound": float, "kfac_decay": float,
    "inverse_period": int, "surrogate_hidden": int, "surrogate_layers": int,
}
_TOY = {
    "t": float, "steps": int, "lr_theta": float, "theta_optimizer": str, "theta0": float,
    "log_period": int, "variance_period": int, "variance_samples": int,
}
_RL = {
    "episodes": int, "batch_size": int, "lr_policy": float, "gamma": float, "entropy_weight": float,
    "policy_hidden": int, "rl_variance_period": int, "rl_variance_samples": int,
}
_LEMMA = {"n_mdps": int, "n_states": int, "n_actions": int, "mdp_gamma": float}


def _add_options(p, options):
    for name, typ in options.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def _common(p):
    p.add_argument("--seed", dest="seeds", type=int, nargs="+", default=None)
    p.add_argument("--config", default=None, help="flat 'key = value' file; CLI flags win")
    p.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="kfrelax", description="KF-RELAX / KF-LAX experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="Bernoulli toy problem")
    p.add_argument("--estimator", choices=ESTIMATORS["toy"], default=None)
    _common(p)
    _add_options(p, {**_TOY, **_SHARED})

    p = sub.add_parser("lax", help="continuous LAX demo, x ~ N(theta, 1)")
    p.add_argument("--estimator", choices=ESTIMATORS["lax-demo"], default=None)
    _common(p)
    _add_options(p, {**_TOY, **_SHARED})

    p = sub.add_parser("rl", help="policy-gradient experiments")
    p.add_argument("--env", choices=("cartpole", "acrobot"), default=None)
    p.add_argument("--estimator", choices=ESTIMATORS["rl"], default=None)
    _common(p)
    _add_options(p, {**_RL, **_SHARED})

    p = sub.add_parser("lemmas", help="tabular-MDP checks of the compatible-approximation lemmas")
    _common(p)
    _add_options(p, _LEMMA)

    p = sub.add_parser("plot", help="render CSV runs as an SVG line chart")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", default=None)
    p.add_argument("--log", action="store_true", help="log10 y axis")
    p.add_argument("--title", default="")
    return parser


_KIND = {"toy": "toy", "lax": "lax-demo", "rl": "rl", "lemmas": "lemma-check"}


def _config_from_args(args):
    skip = {"command", "config"}
    cli = {k: v for k, v in vars(args).items() if k not in skip}
    file_values = load_config_file(args.config) if args.config else {}
    return build_config(_KIND[args.command], file_values, cli)


def _plot(args):
    records = []
    for path in args.inputs:
        records.extend(read_csv(path))
    metric = args.metric or records[0].rows[0][1]
    series = records_to_series(records, metric)
    if not series:
        raise UsageError(f"metric {metric!r} not found in inputs")
    svg = emit_svg(series, title=args.title or metric, ylabel=metric, log_y=args.log)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg, encoding="utf-8")
    print(f"wrote {out}")
    return 0


def run(args):
    from . import experiments as ex

    if args.command == "plot":
        return _plot(args)
    cfg = _config_from_args(args)
    if cfg.kind == "toy":
        for rec in ex.run_toy(cfg):
            xs, ys = rec.series("expected_loss")
            print(f"toy {cfg.estimator} seed={rec.seed} final_theta={rec.final['theta']:.6g} "
                  f"final_expected_loss={ys[-1]:.8g}")
    elif cfg.kind == "lax-demo":
        for rec in ex.run_lax_demo(cfg):
            xs, ys = rec.series("expected_loss")
            print(f"lax {cfg.estimator} seed={rec.seed} final_expected_loss={ys[-1]:.8g}")
    elif cfg.kind == "rl":
        for rec in ex.run_rl(cfg):
            _, means = rec.series("running_mean_100")
            print(f"rl {cfg.env} {cfg.estimator} seed={rec.seed} episodes={len(means)} "
                  f"final_running_mean={means[-1]:.4g}")
    else:
        report = ex.run_lemma_checks(cfg)
        for m in report["mdps"]:
            r = m["lemma2_error_over_alpha_sq"]
            print(f"mdp {m['index']}: lemma1 residual={m['lemma1_residual']:.3e} "
                  f"[{'pass' if m['lemma1_pass'] else 'FAIL'}]  lemma2 err/alpha^2 "
                  f"min={min(r):.4g} max={max(r):.4g} [{'pass' if m['lemma2_pass'] else 'FAIL'}]")
        print("all passed" if report["passed"] else "FAILED")
        return 0 if report["passed"] else 1
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except UsageError as exc:
        print(f"kfrelax: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"kfrelax: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
