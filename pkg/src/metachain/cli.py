"""Command-line front end: analyze, ising, simulate, verify-ising."""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import errors, ising as ising_mod
from .capacity import BottleneckIndex
from .chain import conductances, stationary_measure
from .hierarchy import full_hierarchy
from .modelio import dumps_model, load_model, model_fingerprint
from .report import dumps_dot, dumps_report, report_to_dict
from .scale import rational_str
from .simulate import evaluate_chain, simulate_exit

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_INTERNAL = 3


def _worker_cap():
    raw = os.environ.get("METACHAIN_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise errors.ModelError(f"METACHAIN_THREADS must be an integer, got {raw!r}")
    if value < 1:
        raise errors.ModelError("METACHAIN_THREADS must be at least 1")
    return value


def cmd_analyze(args):
    chain = load_model(args.model)
    report = full_hierarchy(chain, reference=args.reference,
                            crosscheck=args.crosscheck,
                            fingerprint=model_fingerprint(chain))
    text = dumps_report(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.dot:
        mu = stationary_measure(chain, args.reference)
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(dumps_dot(report, mu))
    return EXIT_OK


def cmd_ising(args):
    chain, model = ising_mod.build_ising_chain(args.L, args.h)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(dumps_model(chain))
    if args.classify_report:
        infos = ising_mod.enumerate_omega_o(model, chain)
        payload = {
            "L": model.L, "h": rational_str(model.h), "n0": model.n0,
            "in_regime": model.in_regime,
            "omega_o": [{
                "config": info.config, "ell": info.ell,
                "Nr": info.Nr, "Ns": info.Ns,
                "components": [{"kind": c.kind, "height": c.height,
                                "width": c.width} for c in info.components],
            } for info in infos],
        }
        with open(args.classify_report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    if not args.emit and not args.classify_report:
        sys.stdout.write(dumps_model(chain))
    return EXIT_OK


def cmd_simulate(args):
    chain = load_model(args.model)
    nc = evaluate_chain(chain, args.epsilon)
    targets = []
    for part in args.targets.split(";"):
        group = {s.strip() for s in part.split(",") if s.strip()}
        if not group:
            raise errors.ModelError("empty target set in --targets")
        unknown = group - set(chain.states)
        if unknown:
            raise errors.ModelError(f"unknown target states {sorted(unknown)!r}")
        targets.append(group)
    stats = simulate_exit(nc, args.start, targets, args.samples, args.seed)
    payload = {
        "samples": stats.samples, "seed": stats.seed,
        "epsilon": args.epsilon, "start": args.start,
        "mean_exit": stats.mean_exit, "cv": stats.cv,
        "hit_counts": {str(k): v for k, v in stats.hit_counts.items()},
        "timeouts": stats.timeouts,
    }
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def verify_ising_report(L, h, crosscheck="auto"):
    chain, model = ising_mod.build_ising_chain(L, h)
    anchor = ising_mod.minus_one(L)
    mu = stationary_measure(chain, anchor)
    cond = conductances(chain, mu)
    index = BottleneckIndex(cond, chain.index)
    infos = ising_mod.enumerate_omega_o(model, chain)
    omega = {info.config for info in infos}

    from .hierarchy import level1_leaves
    leaves, _delta = level1_leaves(chain, mu)
    leaves_flat = {s for g in leaves for s in g}
    leaves_ok = leaves_flat == omega and all(len(g) == 1 for g in leaves)

    t01 = ising_mod.verify_lemma_t01(model, chain, mu, index, infos)

    w_rows = []
    p_rows = []
    for info in infos:
        if info.config in (ising_mod.minus_one(L), ising_mod.plus_one(L)):
            continue
        ss = ising_mod.saddle_sets(model, info)
        expected = _w_cardinality(model, info)
        w_rows.append({"config": info.config, "ell": info.ell,
                       "w_size": len(ss.W), "expected": expected,
                       "ok": len(ss.W) == expected})
        total = sum(ising_mod.predicted_p(model, info, s, ss) for s in ss.S)
        p_rows.append({"config": info.config, "sum": rational_str(total),
                       "ok": total == 1})

    report = full_hierarchy(chain, reference=anchor, crosscheck=crosscheck,
                            fingerprint=f"ising-L{L}-h{rational_str(model.h)}")
    sink_ok = report.terminal == [[ising_mod.plus_one(L)]]
    theta_orders = [-level.theta.order for level in report.levels]
    table = ising_mod.time_scale_table(model)
    aligned = [{"level": level.level,
                "exponent": rational_str(-level.theta.order),
                "in_table": any(-level.theta.order == e for _, e in table)}
               for level in report.levels]

    nucleation = {
        "c_of_h": rational_str(ising_mod.nucleation_exponent(model)),
        "engine_final_exponent": rational_str(-report.levels[-1].theta.order),
        "order_match": -report.levels[-1].theta.order
        == ising_mod.nucleation_exponent(model),
    }
    try:
        predicted = ising_mod.theta_minus_one(model)
        final = report.levels[-1]
        minus_idx = next(i for i, g in enumerate(final.metastates)
                         if g == (anchor,))
        depth = final.depths[minus_idx]
        engine_coeff = 1 / depth.coeff if hasattr(depth, "coeff") else None
        nucleation["theta_minus_one_predicted"] = rational_str(predicted)
        if engine_coeff is not None:
            nucleation["theta_minus_one_engine"] = rational_str(engine_coeff)
            nucleation["coeff_match"] = engine_coeff == predicted
    except errors.NotApplicable:
        nucleation["theta_minus_one_predicted"] = None

    return {
        "L": L, "h": rational_str(model.h), "n0": model.n0,
        "in_regime": model.in_regime,
        "omega_count": len(infos),
        "leaves_match_omega": leaves_ok,
        "t01": [{**r, "predicted_exponent": rational_str(r["predicted_exponent"]),
                 "engine_exponent": rational_str(r["engine_exponent"])}
                for r in t01],
        "t01_matches": sum(1 for r in t01 if r["match"]),
        "w_cardinalities": w_rows,
        "p_sums": p_rows,
        "sink_is_plus_one": sink_ok,
        "level_exponents": aligned,
        "nucleation": nucleation,
    }


def _w_cardinality(model, info):
    ell, n0 = info.ell, model.n0
    if ell == 2 <= n0:
        return 4 * info.Nr + 4 * info.Ns
    if 3 <= ell <= n0:
        return 2 * ell * info.Nr + 4 * ell * info.Ns
    perimeter = sum(2 * (c.height + c.width) for c in info.components
                    if c.kind == "rectangle")
    rings = sum(1 for c in info.components if c.kind == "ring")
    return perimeter + 2 * model.L * rings


def cmd_verify_ising(args):
    payload = verify_ising_report(args.L, args.h, crosscheck=args.crosscheck)
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _rational_arg(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metachain",
        description="Exact metastable hierarchies of reversible chains with "
                    "monomial rates")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="compute the full hierarchy of a model")
    p.add_argument("model")
    p.add_argument("--report", help="write the hierarchy JSON here")
    p.add_argument("--dot", help="write DOT diagrams here")
    p.add_argument("--reference", help="anchor state for the measure")
    p.add_argument("--crosscheck", choices=["auto", "full", "off"],
                   default="auto")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ising", help="generate a Glauber chain model")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--h", type=_rational_arg, required=True)
    p.add_argument("--emit", help="write the model JSON here")
    p.add_argument("--classify-report", dest="classify_report",
                   help="write the Omega_o classification here")
    p.set_defaults(func=cmd_ising)

    p = sub.add_parser("simulate", help="Monte Carlo exit statistics")
    p.add_argument("model")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--targets", required=True,
                   help="target sets: states comma-separated, sets "
                        "semicolon-separated")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="write the statistics JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-ising",
                       help="compare engine output with the closed forms")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--h", type=_rational_arg, required=True)
    p.add_argument("--out", help="write the verification JSON here")
    p.add_argument("--crosscheck", choices=["auto", "full", "off"],
                   default="auto")
    p.set_defaults(func=cmd_verify_ising)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _worker_cap()
    try:
        return args.func(args)
    except errors.ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (errors.ModelError, errors.QueryError) as exc:
        print(f"invalid model or query: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
