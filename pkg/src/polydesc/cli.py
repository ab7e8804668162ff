"""Command-line surface: describe a clustering, run the synthetic study,
re-evaluate a saved description.

Exit codes: 0 success, 2 infeasible error budget, 1 I/O or configuration
errors.  Set POLYDESC_LOG=INFO (or DEBUG) for column-generation traces.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np

from . import prep, synth
from .colgen import AlphaInfeasibleError, two_stage_solve
from .grouping import build_groups, silhouette
from .model import (
    ClusterAssignment, Dataset, HalfSpace, PdpConfig, PdpError,
    description_metrics,
)

LOGGER = logging.getLogger("polydesc.cli")


def _configure_logging():
    level_name = os.environ.get("POLYDESC_LOG")
    if level_name:
        level = getattr(logging, level_name.upper(), logging.INFO)
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s %(message)s"))
        root = logging.getLogger("polydesc")
        root.setLevel(level)
        if not root.handlers:
            root.addHandler(handler)


def _load_labels(path, n) -> ClusterAssignment:
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip().split(",")[0]
            if not token:
                continue
            try:
                values.append(int(float(token)))
            except ValueError:
                if not values:  # header line
                    continue
                raise PdpError(f"bad label {token!r} in {path}")
    if len(values) != n:
        raise PdpError(f"{len(values)} labels for {n} rows")
    return ClusterAssignment.from_labels(values)


def render_halfspace(h: HalfSpace, feature_names, scaling=None) -> str:
    """Human form, e.g. 'airborne >= 1' or '2*petal_width - sepal_width <= 0.5'."""
    nz = [(d, c) for d, c in enumerate(h.w) if c != 0]
    if len(nz) == 1:
        d, c = nz[0]
        name = feature_names[d]
        sense, rhs = ("<=", h.b / c) if c > 0 else (">=", h.b / c)
        text = f"{name} {sense} {rhs:.6g}"
        if scaling and name in scaling:
            lo, hi = scaling[name]["min"], scaling[name]["max"]
            if hi > lo and (lo, hi) != (0.0, 1.0):
                text += f"  (raw {sense} {lo + rhs * (hi - lo):.6g})"
        return text
    terms = []
    for d, c in nz:
        name = feature_names[d]
        if not terms:
            terms.append(f"{c}*{name}" if abs(c) != 1 else (name if c > 0 else f"-{name}"))
        else:
            sign = "+" if c > 0 else "-"
            mag = abs(c)
            terms.append(f"{sign} {mag}*{name}" if mag != 1 else f"{sign} {name}")
    return f"{' '.join(terms)} <= {h.b:.6g}"


def _description_json(solution, data, scaling, cfg, extra_config):
    clusters = []
    for k, poly in enumerate(solution.polyhedra):
        clusters.append({
            "id": k,
            "halfspaces": [
                {"coeffs": {data.feature_names[d]: int(c)
                            for d, c in enumerate(h.w) if c != 0},
                 "rhs": h.b}
                for h in poly.halfspaces
            ],
        })
    config = {
        "w": cfg.w_max, "beta": cfg.beta, "theta1": cfg.theta1, "theta2": cfg.theta2,
        "kappa": cfg.kappa, "p": cfg.p, "feature_names": list(data.feature_names),
    }
    config.update(extra_config)
    return {"clusters": clusters, "scaling": scaling, "config": config}


def cmd_describe(args) -> int:
    started = time.monotonic()
    phases = {}
    table = prep.ingest(args.input, target_column=args.target)
    data, scaling = prep.encode_and_scale(table, return_scaling=True)
    phases["ingest"] = time.monotonic() - started

    t0 = time.monotonic()
    if args.labels:
        ca = _load_labels(args.labels, data.n)
        k_star = ca.k
    else:
        k_star, ca = prep.select_k(data, seed=args.seed)
    score = silhouette(data.points, ca.labels) if ca.k >= 2 else float("nan")
    phases["cluster"] = time.monotonic() - t0

    groups = None
    if args.group_eps is not None:
        t0 = time.monotonic()
        groups = build_groups(data, ca, args.group_eps)
        phases["group"] = time.monotonic() - t0

    cfg = PdpConfig.preset(
        args.preset, w_max=args.w, beta=args.beta, p=args.p, kappa=args.kappa,
        alpha=args.alpha, colgen_time_limit_s=args.time_limit,
        pricing_time_limit_s=args.pricing_time_limit,
    )
    t0 = time.monotonic()
    solution, report = two_stage_solve(data, ca, cfg, groups=groups)
    phases["solve"] = time.monotonic() - t0

    lines = [
        "== polydesc describe ==",
        f"input: {args.input}   rows: {data.n}   features: {data.m}   seed: {args.seed}",
        f"preset: {args.preset}   W: {cfg.w_max}   beta: {cfg.beta}   p: {cfg.p}   kappa: {cfg.kappa}",
        f"reference clustering: K={k_star}   silhouette={score:.4f}"
        + ("   (from labels file)" if args.labels else "   (selected by silhouette)"),
    ]
    if groups is not None:
        sizes = [len(g) for g in groups]
        lines.append(f"groups: {len(groups)} (eps={args.group_eps}, |G_max|={max(sizes)})")
    if report.stage1_alpha is not None:
        lines.append(f"stage 1 alpha*: {report.stage1_alpha:.6g}   stage 2 budget: {report.budget:.6g}")
    else:
        lines.append(f"user alpha budget: {report.budget:.6g}")
    lines.append(f"final objective: {report.final_objective:.6g} ({report.final_status})")
    for stage_ix, stage in enumerate(report.stages, 1):
        t = stage.trace
        lines.append(
            f"stage {stage_ix}: {len(t.records)} colgen iterations, "
            f"pool {stage.pool.size}, terminated {t.termination}, {stage.seconds:.1f}s")
    m = solution.metrics
    lines.append(f"metrics: accuracy {100 * m.accuracy:.2f}%   sparsity {m.sparsity}   "
                 f"complexity {m.complexity}")
    if solution.patched_clusters:
        lines.append(f"note: clusters {list(solution.patched_clusters)} received a "
                     "trivial bounding half-space (IP selected none)")
    for k, poly in enumerate(solution.polyhedra):
        lines.append(f"cluster {k} ({len(ca.members(k))} points):")
        for h in poly.halfspaces:
            lines.append(f"    {render_halfspace(h, data.feature_names, scaling)}")
    lines.append("phase seconds: " + "   ".join(f"{k}={v:.1f}" for k, v in phases.items()))
    print("\n".join(lines))

    if args.out:
        payload = _description_json(
            solution, data, scaling, cfg,
            extra_config={"seed": args.seed, "preset": args.preset,
                          "group_eps": args.group_eps,
                          "metrics": {"accuracy": m.accuracy, "sparsity": m.sparsity,
                                      "complexity": m.complexity}})
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"description written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    with open(args.description, encoding="utf-8") as fh:
        payload = json.load(fh)
    feature_names = payload["config"]["feature_names"]
    table = prep.ingest(args.data, target_column=args.target)
    data = prep.encode_with_scaling(table, payload["scaling"], feature_names)
    ca = _load_labels(args.labels, data.n)
    name_to_ix = {name: d for d, name in enumerate(feature_names)}
    selection = []
    for cluster in payload["clusters"]:
        for item in cluster["halfspaces"]:
            w = [0] * len(feature_names)
            for name, coef in item["coeffs"].items():
                if name not in name_to_ix:
                    raise PdpError(f"description uses unknown feature {name!r}")
                w[name_to_ix[name]] = int(coef)
            selection.append((HalfSpace(w=tuple(w), b=float(item["rhs"])),
                              int(cluster["id"])))
    metrics = description_metrics(selection, data, ca)
    print(f"accuracy {100 * metrics.accuracy:.2f}%")
    print(f"sparsity {metrics.sparsity}")
    print(f"complexity {metrics.complexity}")
    return 0


def cmd_synth(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    per = [args.n // args.k + (1 if i < args.n % args.k else 0) for i in range(args.k)]
    cfg = synth.SynthConfig(k=args.k, m=args.m, n_per_cluster=tuple(per),
                            sigma=args.sigma, seed=args.seed)
    result = synth.group_vs_subsample_experiment(
        cfg, sample_sizes=sizes, trials=args.trials, subsample_draws=args.draws,
        solver_time_limit_s=args.solver_time_limit)
    synth.write_rows_csv(result.rows, args.out)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    print("trial seeds: " + ",".join(str(s) for s in result.trial_seeds))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polydesc")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("describe", help="explain a clustering of a CSV dataset")
    d.add_argument("--input", required=True)
    d.add_argument("--target", default=None, help="target column to drop")
    d.add_argument("--labels", default=None, help="CSV of given cluster ids")
    d.add_argument("--select-k", action="store_true",
                   help="pick K by silhouette (the default without --labels)")
    d.add_argument("--preset", choices=["lc", "sp"], default="lc")
    d.add_argument("--w", type=int, default=1)
    d.add_argument("--beta", type=int, default=1)
    d.add_argument("--p", type=int, default=10)
    d.add_argument("--kappa", type=float, default=0.05)
    d.add_argument("--alpha", type=float, default=None)
    d.add_argument("--group-eps", type=float, default=None)
    d.add_argument("--time-limit", type=float, default=300.0)
    d.add_argument("--pricing-time-limit", type=float, default=30.0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default=None, help="path for the description JSON")
    d.set_defaults(func=cmd_describe)

    s = sub.add_parser("synth", help="grouping vs subsampling on synthetic mixtures")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--n", type=int, default=2000, help="total points")
    s.add_argument("--sigma", type=float, default=0.1)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--sizes", default="100,200,400,800")
    s.add_argument("--draws", type=int, default=5)
    s.add_argument("--solver-time-limit", type=float, default=120.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="re-evaluate a stored description")
    e.add_argument("--description", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--target", default=None)
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors; we use 1
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "labels", None) and getattr(args, "select_k", False):
        print("error: --labels and --select-k are mutually exclusive", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except AlphaInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (PdpError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
