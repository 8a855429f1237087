"""Command-line entry point: ``dplang <subcommand> [flags]``."""

import argparse
import logging
import sys
from dataclasses import dataclass

from dplang.errors import ConfigError, InstanceError
from dplang.generation import GenConfig, coverage_stats, gen_error_bound
from dplang.harness import (
    DEFAULT_ID_F,
    ExperimentConfig,
    emit_results,
    resolve_generation,
    run_audit,
    run_experiment,
)
from dplang.hardness import lb_value
from dplang.identification import IdConfig, id_error_bound
from dplang.instances import named_instance
from dplang.mechanisms import PrivacyParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERT = 3

AUDIT_HEADER = ("check", "statistic", "bound", "tolerance", "margin", "passed", "pairs", "seed")
BOUNDS_HEADER = ("quantity", "instance", "mechanism", "n", "epsilon", "delta", "f", "g", "h", "W", "value")


@dataclass
class BoundRow:
    """One closed-form evaluation emitted by the ``bounds`` subcommand."""

    quantity: str
    instance: str
    mechanism: str
    n: int
    epsilon: float
    delta: float
    f: int | None
    g: int | None
    h: int | None
    W: int | None
    value: float


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r}") from None

    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="dplang", description="Private language identification and generation experiments.")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("identify", "Monte Carlo identification error"),
        ("generate", "Monte Carlo generation error"),
        ("lowerbound", "empirical lower-bound chain on a hard pair"),
        ("audit", "privacy audits"),
        ("bounds", "evaluate closed-form bounds without sampling"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name == "bounds":
            p.add_argument("kind", nargs="?", default="identify", choices=("identify", "generate", "lowerbound"))
        p.add_argument("--config", help="JSON config document (flags override its fields)")
        p.add_argument("--instance")
        p.add_argument("--n", type=_csv_list(int), help="comma-separated sample sizes")
        p.add_argument("--epsilon", type=_csv_list(float), help="comma-separated privacy levels")
        p.add_argument("--delta", type=float)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--mechanism", "--mode", dest="mechanism")
        p.add_argument("--f", help="horizon: integer or schedule such as sqrt-log:c=2,floor=12")
        p.add_argument("--g", help="coverage threshold: integer or schedule")
        p.add_argument("--h", help="threshold range: integer or schedule")
        p.add_argument("--witness-bound", dest="W", type=int)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json-lines"))
        p.add_argument("--workers", type=int)
        p.add_argument("--assert-bounds", action="store_true",
                       help="exit with status 3 if any record fails its bound check")
    return parser


def _config(args, task):
    overrides = {k: getattr(args, k, None) for k in (
        "instance", "mechanism", "n", "epsilon", "delta", "f", "g", "h", "W", "trials", "seed", "out",
        "format", "workers")}
    overrides["task"] = task
    return ExperimentConfig.from_sources(args.config, overrides)


def _bounds(cfg, kind):
    rows = []
    for _, n, eps in cfg.grid():
        if kind == "lowerbound":
            task = "identify" if cfg.instance.lower() == "ipp" else "generate"
            lb = lb_value(task, n, eps)
            rows.append(BoundRow("lb_value", f"{cfg.instance.lower()}-pair", task, n, eps, 0.0,
                                 None, None, None, None, lb.value))
            if lb.simplified is not None:
                rows.append(BoundRow("lb_value_simplified", f"{cfg.instance.lower()}-pair", task, n, eps, 0.0,
                                     None, None, None, None, lb.simplified))
            continue
        inst = named_instance(cfg.instance, cfg.collection, cfg.W)
        privacy = PrivacyParams(eps, cfg.delta if cfg.mechanism in ("approximate", "approximate-joint") else 0.0)
        if kind == "identify":
            mech = cfg.mechanism if cfg.mechanism in ("pure", "approximate", "nonprivate") else "pure"
            idc = IdConfig(cfg.f or DEFAULT_ID_F, privacy, mech)
            f = idc.f_at(n)
            rows.append(BoundRow("id_error_bound", inst.name, mech, n, eps, privacy.delta, f, None, None, None,
                                 id_error_bound(n, f, privacy, mech)))
            continue
        f_sched, g_sched, h_sched, W, _ = resolve_generation(cfg, inst, n)
        gc = GenConfig(f_sched, g_sched, privacy, cfg.mechanism, W, h_sched)
        res = gc.resolve(n)
        ref = inst.reference_index(res["f"])
        if ref is None or cfg.mechanism == "nonprivate":
            raise ConfigError("mechanism", "no closed-form generation bound applies here")
        horizon = res["W"] if cfg.mechanism == "public" else res["h"]
        cov = coverage_stats(inst.distribution, inst.collection.language(ref), horizon)
        rows.append(BoundRow("gen_error_bound", inst.name, cfg.mechanism, n, eps, privacy.delta, res["f"], res["g"],
                             res["h"], res["W"],
                             gen_error_bound(n, res["f"], res["g"], cov.size, cov.p_star, privacy, cfg.mechanism,
                                             res["h"])))
    return rows


def main(argv=None):
    """Run the CLI; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bounds":
            task = {"identify": "identify", "generate": "generate", "lowerbound": "lowerbound"}[args.kind]
            cfg = _config(args, task)
            emit_results(_bounds(cfg, args.kind), cfg.format, cfg.out, BOUNDS_HEADER)
            return EXIT_OK
        cfg = _config(args, args.command)
        if args.command == "audit":
            records = run_audit(cfg)
            emit_results(records, cfg.format, cfg.out, AUDIT_HEADER)
        else:
            records = run_experiment(cfg)
            emit_results(records, cfg.format, cfg.out)
    except (ConfigError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.assert_bounds and any(r.passed is False for r in records):
        print("error: a bound check failed", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
