"""Command line interface: ``run``, ``check-tensions`` and ``bounds``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .allen_cahn import ac_stable_step
from .cahn_hilliard import ch_stable_step
from .potential import hessian_bounds
from .scenario import (
    ALLEN_CAHN,
    EXIT_CONFIG,
    EXIT_NOT_SPD,
    EXIT_OK,
    ConfigError,
    load_config,
    run,
)
from .tension import assemble_lambda_special, reduced_sigma, spd_check, triangle_condition, validate_sigma


def _fmt(x) -> str:
    return format(float(x), ".10g")


def cmd_run(args, cfg) -> int:
    return run(cfg, args.output)


def cmd_check_tensions(args, cfg) -> int:
    tensions = cfg.tensions()
    n = tensions.n_phases
    print(f"phases: {n}")
    for i in range(n):
        print("sigma  " + " ".join(f"{_fmt(v):>10}" for v in tensions.sigma[i]))
    problems = validate_sigma(tensions)
    if problems:
        for p in problems:
            print(f"invalid: {p}")
        return EXIT_CONFIG
    eig = np.linalg.eigvalsh(reduced_sigma(tensions))
    print("reduced matrix eigenvalues: " + ", ".join(_fmt(v) for v in eig))
    print(f"sqrt-triangle inequalities: {'hold' if triangle_condition(tensions) else 'violated'}")
    result = spd_check(tensions)
    if not result.is_spd:
        print("SPD on the tangent space: no")
        return EXIT_NOT_SPD
    print("SPD on the tangent space: yes")
    print(f"lambda_c_min: {_fmt(assemble_lambda_special(tensions).lambda_c_min)}")
    print("simplex vertices (|p_i - p_j|^2 = sigma_ij):")
    for i, p in enumerate(result.witness):
        print(f"  p{i + 1} = (" + ", ".join(_fmt(v) for v in p) + ")")
    return EXIT_OK


def cmd_bounds(args, cfg) -> int:
    tensions = cfg.tensions()
    if not spd_check(tensions).is_spd:
        print("tensions are not SPD on the tangent space; no step bounds")
        return EXIT_NOT_SPD
    coeff = assemble_lambda_special(tensions)
    spec = cfg.potential_spec()
    l1, l2 = hessian_bounds(spec, margin=args.margin)
    print(f"potential: {spec.kind}")
    print(f"lambda_c_min: {_fmt(coeff.lambda_c_min)}")
    print(f"L1: {_fmt(l1)}")
    print(f"L2: {_fmt(l2)}")
    scheme_cfg = cfg.scheme_config()
    if cfg.model == ALLEN_CAHN:
        k_semi, k_fully, k_convex = ac_stable_step(scheme_cfg, coeff, spec, (l1, l2))
        print(f"k_semi: {_fmt(k_semi)}")
        print(f"k_fully: {_fmt(k_fully)}")
        print(f"k_convex: {_fmt(k_convex)}")
    else:
        k_semi, k_fully = ch_stable_step(scheme_cfg, coeff, spec, (l1, l2))
        print(f"k_semi: {_fmt(k_semi)}")
        print(f"k_fully: {_fmt(k_fully)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nphase", description="N-phase Allen-Cahn / Cahn-Hilliard solver")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every step")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "run a simulation and write energy.csv and snapshots")
    p.add_argument("--output", help="output directory (default: output_dir from the config)")
    add("check-tensions", cmd_check_tensions, "report whether the tensions admit a simplex")
    p = add("bounds", cmd_bounds, "print Hessian bounds and theoretical step sizes")
    p.add_argument("--margin", type=float, default=0.1, help="dilation of the sampled simplex (default 0.1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args, cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
