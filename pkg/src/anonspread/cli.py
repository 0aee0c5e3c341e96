"""Command-line front end.

Subcommands: `spread` (one trace to stdout/CSV), `estimate` (one estimator
on a trace file), `experiment` (config file -> summary CSV), `sweep`, and
`predict` (closed forms as CSV rows).  Config files are flat `key = value`
text; any flag overrides the file.  Exit codes: 0 ok, 1 config error, 2
comparison-gate failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import adversary as adv
from . import analysis
from .graph import grid, load_edge_list, regular_tree, galton_watson_tree
from .harness import (
    ExperimentConfig,
    compare_with_theory,
    default_output_dir,
    run_experiment,
    sweep as run_sweep,
    write_summary_csv,
)
from .spread import (
    InfectionSnapshot,
    ProtocolParams,
    spread_adaptive,
    spread_deterministic,
    spread_diffusion,
    spread_grid,
    spread_paad,
    spread_tree_protocol,
)

CONFIG_KEYS = {
    "network", "d", "degree_table", "edge_list", "protocol", "alpha_policy",
    "d0", "q", "g", "fanout_cap", "T", "adversary", "p", "trials", "seed",
    "output", "workers", "line_n", "estimator_d0", "estimator_g", "observe_T",
    "label", "compare",
}


def parse_config_file(path: str) -> dict:
    out = {}
    with open(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = s.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip()
    return out


def _parse_degree_table(text: str) -> dict:
    # "3:0.5,4:0.5"
    table = {}
    for part in text.split(","):
        k, _, v = part.partition(":")
        table[int(k)] = float(v)
    return table


def config_from_options(opts: dict) -> ExperimentConfig:
    proto = ProtocolParams(
        kind=opts.get("protocol", "adaptive"),
        alpha_policy=opts.get("alpha_policy", "exact"),
        d0=(math.inf if opts.get("d0") in ("inf", "infinity") else
            float(opts["d0"]) if "d0" in opts else None),
        q=float(opts["q"]) if "q" in opts else None,
        g=int(opts.get("g", 1)),
        fanout_cap=int(opts["fanout_cap"]) if "fanout_cap" in opts else None,
        horizon=int(opts.get("T", 0)),
        seed=int(opts.get("seed", 0)),
    )
    output = opts.get("output")
    if output and not os.path.isabs(output):
        output = os.path.join(default_output_dir(), output)
    return ExperimentConfig(
        network=opts.get("network", "regular-tree"),
        d=int(opts.get("d", 3)),
        degree_table=_parse_degree_table(opts["degree_table"]) if "degree_table" in opts else None,
        edge_list=opts.get("edge_list"),
        protocol=proto,
        adversary=opts.get("adversary", "snapshot"),
        p=float(opts.get("p", 0.0)),
        trials=int(opts.get("trials", 1000)),
        seed=int(opts.get("seed", 0)),
        estimator_d0=int(opts["estimator_d0"]) if "estimator_d0" in opts else None,
        estimator_g=int(opts.get("estimator_g", 1)),
        observe_T=int(opts["observe_T"]) if "observe_T" in opts else None,
        line_n=int(opts.get("line_n", 101)),
        workers=int(opts.get("workers", 1)),
        output=output,
        label=opts.get("label", ""),
    )


def _collect_options(args) -> dict:
    opts = {}
    if getattr(args, "config", None):
        opts.update(parse_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def _add_common(sp):
    sp.add_argument("--config", help="flat key=value config file")
    for key in sorted(CONFIG_KEYS - {"compare"}):
        sp.add_argument(f"--{key}", dest=key)


def cmd_spread(args) -> int:
    opts = _collect_options(args)
    cfg = config_from_options(opts)
    rng = np.random.default_rng(cfg.seed)
    if cfg.network == "regular-tree":
        net, source = regular_tree(cfg.d), 0
    elif cfg.network == "galton-watson":
        net, source = galton_watson_tree(cfg.degree_table, cfg.seed), 0
    elif cfg.network == "grid":
        net, source = grid(0), (0, 0)
    else:
        net = load_edge_list(cfg.edge_list)
        source = net.nodes()[int(rng.integers(net.n_nodes))]
    proto = cfg.protocol
    fn = {
        "adaptive": spread_adaptive,
        "paad": spread_paad,
        "tree-protocol": spread_tree_protocol,
        "grid-adaptive": spread_grid,
        "diffusion": spread_diffusion,
    }.get(proto.kind)
    if fn is None and proto.kind == "deterministic":
        snap = spread_deterministic(net, source, proto.horizon, rng=rng)
    elif fn is None:
        raise ValueError(f"unknown protocol {proto.kind!r}")
    else:
        snap = fn(net, source, proto, rng=rng)
    if cfg.output:
        with open(cfg.output, "wt", encoding="utf-8") as fh:
            snap.to_csv(fh)
    else:
        snap.to_csv(sys.stdout)
    return 0


def load_trace(path: str, net) -> InfectionSnapshot:
    """Rebuild a snapshot from a trace CSV plus the network it ran on."""
    import csv as _csv

    time, parent, direction, level = {}, {}, {}, {}
    vs_marks = []
    with open(path, "rt", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            v = int(row["node"])
            time[v] = int(row["infection_time"])
            parent[v] = int(row["parent"]) if row["parent"] != "" else None
            if row["direction"]:
                direction[v] = row["direction"]
            if row["level"]:
                level[v] = int(row["level"])
            if row["is_virtual_source_at_t"]:
                vs_marks.append((int(row["is_virtual_source_at_t"]), v))
    vs_marks.sort()
    T = max(time.values())
    source = min(time, key=time.get)
    in_window = [(t, v) for t, v in vs_marks if t <= T]
    t_vs, vs = in_window[-1]
    later = [(t, v) for t, v in vs_marks if t > T]
    mid = bool(later) and T % 2 == 1
    centers = [later[0][1], vs] if mid else [vs]
    return InfectionSnapshot(
        protocol="trace",
        T=T,
        source=source,
        time=time,
        parent=parent,
        net_degree={v: net.degree(v) for v in time},
        open_degree={v: sum(1 for w in net.neighbors(v) if w not in time) for v in time},
        centers=centers,
        mid_pass=mid,
        vs_events=[(t, v, i) for i, (t, v) in enumerate(vs_marks)],
        direction=direction,
        level=level,
    )


def cmd_estimate(args) -> int:
    opts = _collect_options(args)
    cfg = config_from_options(opts)
    if cfg.network == "regular-tree":
        net = regular_tree(cfg.d)
    elif cfg.network == "galton-watson":
        net = galton_watson_tree(cfg.degree_table, cfg.seed)
    else:
        net = load_edge_list(cfg.edge_list)
    snap = load_trace(args.trace, net)
    rng = np.random.default_rng(cfg.seed)
    kind = cfg.adversary
    if kind == "snapshot":
        est = adv.estimate_snapshot_regular(snap, rng=rng)
    elif kind == "irregular-ml":
        est = adv.estimate_irregular_ml(snap, cfg.estimator_d0 or cfg.d, rng=rng)
    elif kind == "map-leaf":
        est = adv.estimate_map_leaf(snap, rng=rng)
    else:
        raise ValueError(f"estimate supports snapshot/irregular-ml/map-leaf, got {kind!r}")
    print(f"estimator,{est.kind}")
    print(f"v_hat,{est.v_hat}")
    print(f"candidates,{est.tie_count}")
    return 0


def cmd_experiment(args) -> int:
    opts = _collect_options(args)
    cfg = config_from_options(opts)
    summary = run_experiment(cfg)
    compare = opts.get("compare") or getattr(args, "compare", None)
    if compare:
        compare_with_theory(summary, compare)
    write_summary_csv(summary, sys.stdout)
    if cfg.output:
        with open(cfg.output, "wt", encoding="utf-8") as fh:
            write_summary_csv(summary, fh)
    if compare and any(r.flag for r in summary.rows):
        return 2
    return 0


def cmd_sweep(args) -> int:
    opts = _collect_options(args)
    cfg = config_from_options(opts)
    values = [_coerce(v) for v in args.values.split(",")]
    summary = run_sweep(cfg, args.parameter, values)
    compare = opts.get("compare") or getattr(args, "compare", None)
    if compare:
        compare_with_theory(summary, compare)
    write_summary_csv(summary, sys.stdout)
    if cfg.output:
        with open(cfg.output, "wt", encoding="utf-8") as fh:
            write_summary_csv(summary, fh)
    if compare and any(r.flag for r in summary.rows):
        return 2
    return 0


def _coerce(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def cmd_predict(args) -> int:
    d = args.d
    T = args.T
    p = args.p
    n = args.n
    q = args.quantity
    rows = []
    if q == "n_regular":
        rows.append((q, f"d={d};T={T};branch={args.branch}", analysis.n_regular(d, T, args.branch)))
    elif q == "pd_snapshot_bound":
        rows.append((q, f"d={d};T={T}", analysis.pd_snapshot_bound(d, T)))
    elif q == "pd_always_pass":
        n_t = analysis.n_regular(d, T)
        rows.append((q, f"d={d};T={T};n={n_t}", analysis.pd_always_pass(d, n_t)))
    elif q == "pd_multiple_snapshots":
        rows.append((q, f"d={d};T={T}", analysis.pd_multiple_snapshots(d, T)))
    elif q == "pd_spy_adaptive":
        rows.append((q, f"d={d};p={p}", analysis.pd_spy_adaptive(d, p)))
    elif q == "pd_spy_snapshot":
        rows.append((q, f"d={d};p={p};T={T}", analysis.pd_spy_snapshot(d, p, T)))
    elif q == "grid":
        pred = analysis.grid_predictions(T)
        rows.append(("grid_n_lower", f"T={T}", pred.n_lower_bound))
        rows.append(("grid_pd_bound", f"T={T}", pred.pd_upper_bound))
        if pred.n_even_exact is not None:
            rows.append(("grid_n_exact", f"T={T}", pred.n_even_exact))
    elif q == "line_bound":
        rows.append((q, f"n={n}", analysis.line_bound(n)))
    elif q == "detection_exponent":
        table = _parse_degree_table(args.degree_table)
        res = analysis.detection_exponent(table)
        rows.append(("exponent_log2", f"D={args.degree_table};case={res.case}", res.exponent_log2))
        rows.append(("gap_log2", f"D={args.degree_table}", res.gap_log2))
        for i, r in enumerate(res.r_star):
            rows.append((f"r_star_{i}", f"D={args.degree_table}", r))
    else:
        raise ValueError(f"unknown quantity {q!r}")
    print("quantity,parameters,value")
    for name, params, value in rows:
        print(f"{name},{params},{value:.12g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="anonspread",
                                     description="spreading-protocol anonymity lab")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spread", help="run one spread and emit its trace")
    _add_common(sp)
    sp.set_defaults(fn=cmd_spread)

    sp = sub.add_parser("estimate", help="run one estimator on a trace file")
    _add_common(sp)
    sp.add_argument("trace", help="trace CSV from the spread subcommand")
    sp.set_defaults(fn=cmd_estimate)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    _add_common(sp)
    sp.add_argument("--compare", help="closed form to gate against")
    sp.set_defaults(fn=cmd_experiment)

    sp = sub.add_parser("sweep", help="repeat an experiment over parameter values")
    _add_common(sp)
    sp.add_argument("--compare")
    sp.add_argument("parameter")
    sp.add_argument("values", help="comma-separated values")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("predict", help="closed-form predictions as CSV")
    sp.add_argument("quantity")
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--T", type=int, default=4)
    sp.add_argument("--p", type=float, default=0.1)
    sp.add_argument("--n", type=int, default=101)
    sp.add_argument("--branch", default="even")
    sp.add_argument("--degree_table", default="3:0.5,4:0.5")
    sp.set_defaults(fn=cmd_predict)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
