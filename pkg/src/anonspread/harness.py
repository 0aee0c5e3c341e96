"""Monte Carlo experiment runner.

Wires (network, protocol, adversary) triples into seeded trials, aggregates
detection probability with confidence intervals, and joins the empirical
rows against the closed forms in `analysis`.  Per-trial RNG streams are
derived from (seed, trial index), so results are identical no matter how
trials are distributed over workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np

from . import adversary as adv
from . import analysis
from .graph import (
    DegreeDistribution,
    ExplicitGraph,
    degree_distribution,
    galton_watson_tree,
    grid,
    load_edge_list,
    regular_tree,
)
from .spread import (
    ProtocolParams,
    assign_spies,
    observations_for,
    spread_adaptive,
    spread_deterministic,
    spread_diffusion,
    spread_grid,
    spread_paad,
    spread_polya_line,
    spread_tree_protocol,
)

SUMMARY_SCHEMA = "anonspread-summary v1"


# ---------------------------------------------------------------------------
# configuration and records


@dataclass
class ExperimentConfig:
    network: str = "regular-tree"  # regular-tree | galton-watson | grid | explicit | line
    d: int = 3
    degree_table: dict | None = None
    edge_list: str | None = None
    graph: ExplicitGraph | None = None  # pre-loaded explicit graph
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    adversary: str = "snapshot"
    p: float = 0.0
    trials: int = 1000
    seed: int = 0
    estimator_d0: int | None = None
    estimator_g: int = 1
    observe_T: int | None = None  # multi-snapshot observation time
    line_n: int = 101
    workers: int = 1
    output: str | None = None
    trial_output: str | None = None  # per-trial estimator records
    wilson: bool = False  # Wilson intervals instead of the normal approximation
    label: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("spy probability must lie in [0, 1)")


@dataclass
class TrialRecord:
    index: int
    estimator: str
    v_hat: object
    n_candidates: int
    detected: int
    hop_distance: int | None
    n_infected: int
    inconclusive: int


@dataclass
class SummaryRow:
    label: str
    network: str
    protocol: str
    adversary: str
    p: float
    T: int
    trials: int
    detections: int
    p_hat: float
    ci_half: float
    mean_hops: float
    mean_n_infected: float
    inconclusive: int
    predicted: float | None = None
    pred_mode: str = ""
    flag: int = 0


@dataclass
class ExperimentSummary:
    rows: list
    config: ExperimentConfig

    def row(self, i=0) -> SummaryRow:
        return self.rows[i]


# ---------------------------------------------------------------------------
# confidence intervals


def normal_ci_half(k: int, n: int, z: float = 1.96) -> float:
    if n == 0:
        return float("nan")
    ph = k / n
    return z * math.sqrt(max(ph * (1.0 - ph), 0.0) / n)


def wilson_ci(k: int, n: int, z: float = 1.96):
    if n == 0:
        return (float("nan"), float("nan"))
    ph = k / n
    denom = 1.0 + z * z / n
    center = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return (center - half, center + half)


# ---------------------------------------------------------------------------
# per-trial machinery


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _make_network(cfg: ExperimentConfig, rng: np.random.Generator, shared):
    if cfg.network == "regular-tree":
        return regular_tree(cfg.d)
    if cfg.network == "galton-watson":
        table = cfg.degree_table
        dist = table if isinstance(table, DegreeDistribution) else degree_distribution(table)
        return galton_watson_tree(dist, int(rng.integers(2**62)))
    if cfg.network == "grid":
        return grid(0)
    if cfg.network == "explicit":
        return shared
    raise ValueError(f"unknown network kind {cfg.network!r}")


def _shared_graph(cfg: ExperimentConfig):
    if cfg.network != "explicit":
        return None
    if cfg.graph is not None:
        return cfg.graph
    if cfg.edge_list is None:
        raise ValueError("explicit network needs edge_list or graph")
    return load_edge_list(cfg.edge_list)


def _hop(net, snap_protocol, a, b):
    if a is None or b is None:
        return None
    if a == b:
        return 0
    if snap_protocol in ("grid-adaptive",):
        return abs(a[0] - b[0]) + abs(a[1] - b[1])
    if snap_protocol == "polya-line":
        return abs(a - b)
    try:
        return len(adv._net_path(net, a, b)) - 1
    except Exception:
        return None


def run_trial(cfg: ExperimentConfig, index: int, shared=None) -> TrialRecord:
    rng = _trial_rng(cfg.seed, index)
    kind = cfg.adversary

    if kind == "line-ml":
        source = int(rng.integers(1, cfg.line_n + 1))
        snap, trace = spread_polya_line(cfg.line_n, source, rng=rng)
        est = adv.estimate_line_ml(trace, rng=rng)
        detected = int(not est.inconclusive and est.v_hat == source)
        hop = None if est.inconclusive else abs(est.v_hat - source)
        return TrialRecord(index, est.kind, est.v_hat, est.tie_count, detected, hop,
                           snap.n_infected, int(est.inconclusive))

    net = _make_network(cfg, rng, shared)
    if cfg.network == "grid":
        source = (0, 0)
    elif net.is_finite:
        source = adv._pick(rng, net.nodes())
    else:
        source = 0

    proto = cfg.protocol
    if proto.kind == "adaptive":
        snap = spread_adaptive(net, source, proto, rng=rng)
    elif proto.kind == "paad":
        snap = spread_paad(net, source, proto, rng=rng)
    elif proto.kind == "tree-protocol":
        snap = spread_tree_protocol(net, source, proto, rng=rng)
    elif proto.kind == "grid-adaptive":
        snap = spread_grid(net, source, proto, rng=rng)
    elif proto.kind == "diffusion":
        snap = spread_diffusion(net, source, proto, rng=rng)
    elif proto.kind == "deterministic":
        snap = spread_deterministic(net, source, proto.horizon, rng=rng)
    else:
        raise ValueError(f"unknown protocol kind {proto.kind!r}")

    if kind in ("spy-ml", "spy-irregular", "first-spy", "spy-snapshot"):
        spies = assign_spies(snap, cfg.p, int(rng.integers(2**62)))
        observations = observations_for(snap, spies)
        if kind == "first-spy":
            est = adv.estimate_first_spy(observations, rng=rng)
        elif kind == "spy-ml":
            est = adv.estimate_spy_ml(net, observations, rng=rng)
        elif kind == "spy-irregular":
            est = adv.estimate_spy_irregular(net, observations, rng=rng,
                                             open_degree=snap.open_degree if net.is_finite else None)
        else:
            est = adv.estimate_spy_snapshot(snap, observations, rng=rng)
    elif kind == "snapshot":
        est = adv.estimate_snapshot_regular(snap, rng=rng)
    elif kind == "irregular-ml":
        d0 = cfg.estimator_d0 or cfg.protocol.d0 or cfg.d
        est = adv.estimate_irregular_ml(snap, int(d0), rng=rng, cyclic=net.is_finite)
    elif kind == "map-leaf":
        est = adv.estimate_map_leaf(snap, rng=rng)
    elif kind == "paad-map":
        est = adv.estimate_paad_map(snap, cfg.estimator_g, rng=rng)
    elif kind == "multi-snapshot":
        est = adv.estimate_multiple_snapshots(snap, cfg.observe_T or proto.horizon, rng=rng)
    else:
        raise ValueError(f"unknown adversary kind {kind!r}")

    detected = int(not est.inconclusive and est.v_hat == source)
    hop = None if est.inconclusive else _hop(net, snap.protocol, est.v_hat, source)
    return TrialRecord(index, est.kind, est.v_hat, est.tie_count, detected, hop,
                       snap.n_infected, int(est.inconclusive))


def _worker_batch(args):
    cfg, indices = args
    shared = _shared_graph(cfg)
    return [run_trial(cfg, i, shared) for i in indices]


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """Run cfg.trials seeded trials and aggregate; inconclusive trials count
    as non-detections but are reported separately."""
    indices = list(range(cfg.trials))
    if cfg.workers > 1:
        chunk = max(1, len(indices) // (cfg.workers * 4))
        batches = [(cfg, indices[i:i + chunk]) for i in range(0, len(indices), chunk)]
        with get_context("spawn").Pool(cfg.workers) as pool:
            records = [r for out in pool.map(_worker_batch, batches) for r in out]
    else:
        shared = _shared_graph(cfg)
        records = [run_trial(cfg, i, shared) for i in indices]
    records.sort(key=lambda r: r.index)

    n = len(records)
    det = sum(r.detected for r in records)
    inconclusive = sum(r.inconclusive for r in records)
    hops = [r.hop_distance for r in records if r.hop_distance is not None]
    if cfg.wilson:
        lo, hi = wilson_ci(det, n)
        half = (hi - lo) / 2.0
    else:
        half = normal_ci_half(det, n)
    row = SummaryRow(
        label=cfg.label,
        network=cfg.network,
        protocol=cfg.protocol.kind,
        adversary=cfg.adversary,
        p=cfg.p,
        T=cfg.protocol.horizon,
        trials=n,
        detections=det,
        p_hat=det / n,
        ci_half=half,
        mean_hops=float(np.mean(hops)) if hops else float("nan"),
        mean_n_infected=float(np.mean([r.n_infected for r in records])),
        inconclusive=inconclusive,
    )
    summary = ExperimentSummary([row], cfg)
    if cfg.trial_output:
        with open(cfg.trial_output, "wt", encoding="utf-8") as fh:
            write_trial_csv(records, fh)
    if cfg.output:
        with open(cfg.output, "wt", encoding="utf-8") as fh:
            write_summary_csv(summary, fh)
    return summary


def write_trial_csv(records, fh) -> None:
    fh.write("# anonspread-trials v1\n")
    writer = csv.writer(fh)
    writer.writerow(["trial", "estimator", "v_hat", "n_candidates", "detected",
                     "hop_distance", "n_infected", "inconclusive"])
    for r in records:
        writer.writerow([r.index, r.estimator, r.v_hat, r.n_candidates, r.detected,
                         "" if r.hop_distance is None else r.hop_distance,
                         r.n_infected, r.inconclusive])


def sweep(cfg: ExperimentConfig, parameter: str, values) -> ExperimentSummary:
    """Repeat run_experiment once per value of `parameter` (a config field,
    or 'T' / 'd0' / 'q' on the protocol) and stack the rows."""
    rows = []
    for v in values:
        if parameter in ("T", "horizon"):
            sub = replace(cfg, protocol=replace(cfg.protocol, horizon=v))
        elif parameter in ("d0", "q"):
            sub = replace(cfg, protocol=replace(cfg.protocol, **{parameter: v}))
        elif hasattr(cfg, parameter):
            sub = replace(cfg, **{parameter: v})
        else:
            raise ValueError(f"unknown sweep parameter {parameter!r}")
        sub = replace(sub, label=f"{cfg.label or parameter}={v}", output=None)
        rows.extend(run_experiment(sub).rows)
    summary = ExperimentSummary(rows, cfg)
    if cfg.output:
        with open(cfg.output, "wt", encoding="utf-8") as fh:
            write_summary_csv(summary, fh)
    return summary


# ---------------------------------------------------------------------------
# theory comparison


def predicted_value(quantity: str, row: SummaryRow, cfg: ExperimentConfig):
    """Resolve a named closed form for a summary row; returns (value, mode)
    where mode is 'match' for equalities and 'upper-bound' for bounds."""
    d = cfg.d
    T = row.T
    if quantity == "pd_uniform":
        n = analysis.n_regular(d, T)
        return 1.0 / (n - 1), "match"
    if quantity == "pd_always_pass":
        n = analysis.n_regular(d, T)
        return analysis.pd_always_pass(d, n), "match"
    if quantity == "pd_snapshot_bound":
        return analysis.pd_snapshot_bound(d, T), "upper-bound"
    if quantity == "pd_spy_adaptive":
        return analysis.pd_spy_adaptive(d, row.p), "match"
    if quantity == "pd_spy_snapshot":
        return analysis.pd_spy_snapshot(d, row.p, T), "match"
    if quantity == "pd_multiple_snapshots":
        return analysis.pd_multiple_snapshots(d, cfg.observe_T or T), "match"
    if quantity == "grid_pd_bound":
        return analysis.grid_predictions(T).pd_upper_bound, "upper-bound"
    if quantity == "line_bound":
        return analysis.line_bound(cfg.line_n), "upper-bound"
    if quantity == "first_spy_floor":
        return row.p, "lower-bound"
    raise ValueError(f"unknown quantity {quantity!r}")


def compare_with_theory(summary: ExperimentSummary, quantity: str, z: float = 3.0) -> ExperimentSummary:
    """Annotate rows with the named prediction and flag disagreements:
    matches must lie within z sigma, bounds must not be crossed by more than
    z sigma."""
    cfg = summary.config
    for row in summary.rows:
        value, mode = predicted_value(quantity, row, cfg)
        row.predicted = value
        row.pred_mode = mode
        sigma = math.sqrt(max(value * (1 - value), 1e-12) / row.trials)
        if mode == "match":
            row.flag = int(abs(row.p_hat - value) > z * sigma)
        elif mode == "upper-bound":
            row.flag = int(row.p_hat > value + z * sigma)
        else:
            row.flag = int(row.p_hat < value - z * sigma)
    return summary


def write_summary_csv(summary: ExperimentSummary, fh) -> None:
    fh.write(f"# {SUMMARY_SCHEMA}\n")
    writer = csv.writer(fh)
    writer.writerow([
        "label", "network", "protocol", "adversary", "p", "T", "trials",
        "detections", "p_hat", "ci95_half", "mean_hops", "mean_n_infected",
        "inconclusive", "predicted", "pred_mode", "flag",
    ])
    for r in summary.rows:
        writer.writerow([
            r.label, r.network, r.protocol, r.adversary, r.p, r.T, r.trials,
            r.detections, f"{r.p_hat:.8g}", f"{r.ci_half:.8g}",
            f"{r.mean_hops:.8g}", f"{r.mean_n_infected:.8g}", r.inconclusive,
            "" if r.predicted is None else f"{r.predicted:.10g}", r.pred_mode, r.flag,
        ])


def summary_csv_text(summary: ExperimentSummary) -> str:
    buf = io.StringIO()
    write_summary_csv(summary, buf)
    return buf.getvalue()


def default_output_dir() -> str:
    return os.environ.get("ANONSPREAD_OUTPUT_DIR", ".")


def write_gnuplot_script(csv_path: str, script_path: str, x: str = "T") -> None:
    """Companion gnuplot script for a summary CSV (detection vs T or p,
    log-scaled y)."""
    col = {"T": 6, "p": 5}[x]
    with open(script_path, "wt", encoding="utf-8") as fh:
        fh.write(
            "set datafile separator ','\n"
            "set logscale y\n"
            f"set xlabel '{x}'\n"
            "set ylabel 'detection probability'\n"
            f"plot '{csv_path}' every ::1 using {col}:9 with linespoints title 'empirical', \\\n"
            f"     '{csv_path}' every ::1 using {col}:14 with lines title 'predicted'\n"
        )


# ---------------------------------------------------------------------------
# fast Monte Carlo paths for infinite-horizon / deep-tree experiments


def spy_tree_detection_mc(d: int, p: float, trials: int, seed: int = 0):
    """Infinite-horizon tree-protocol + pivot-estimator detection on the
    d-regular tree, sampling only what the estimator depends on: the level
    of the first spine spy, and per level the number of spy-free side
    branches (each branch is spy-free with probability (1-p)^|branch|).

    Returns (detections, trials, mean candidate count).
    """
    if d <= 2:
        raise ValueError("needs d > 2")
    rng = np.random.default_rng(seed)
    detections = 0
    cand_total = 0.0
    for _ in range(trials):
        k = int(rng.geometric(p))  # level of the lowest spine spy
        candidates = None
        for j in range(1, k):
            tj = ((d - 1) ** j - 1) // (d - 2)
            clean_prob = (1.0 - p) ** tj
            x = int(rng.binomial(d - 2, clean_prob))
            if x < d - 2:  # some side branch of the level-j spine node is spied
                candidates = (x + 1) * (d - 1) ** (j - 1)
                break
        if candidates is None:
            candidates = (d - 1) ** (k - 1)
        cand_total += candidates
        if int(rng.integers(candidates)) == 0:
            detections += 1
    return detections, trials, cand_total / trials


def multi_snapshot_trial(d: int, T: int, rng, max_extra_epochs: int = 200):
    """One trial of the every-step-snapshot adversary: run the exact-schedule
    protocol to even T, then follow only the token (the infection past T is
    irrelevant to the estimator) until it moves once, and hand both to the
    estimator."""
    from .spread import alpha_regular

    net = regular_tree(d)
    proto = ProtocolParams(kind="adaptive", horizon=T)
    snap = spread_adaptive(net, 0, proto, rng=rng)
    vs = snap.virtual_source
    prev = snap.vs_events[-2][1] if len(snap.vs_events) >= 2 else None
    h = snap.h_T
    te = T
    for _ in range(max_extra_epochs):
        if rng.random() >= alpha_regular(d, te, h):
            eligible = [w for w in net.neighbors(vs) if w != prev]
            nxt = eligible[int(rng.integers(len(eligible)))]
            snap.vs_events.append((te + 2, nxt, h + 1))
            break
        te += 2
    est = adv.estimate_multiple_snapshots(snap, T, rng=rng)
    detected = int(not est.inconclusive and est.v_hat == 0)
    return detected, est


def multi_snapshot_detection_mc(d: int, T: int, trials: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    det = 0
    inconclusive = 0
    for _ in range(trials):
        ok, est = multi_snapshot_trial(d, T, rng)
        det += ok
        inconclusive += int(est.inconclusive)
    return det, trials, inconclusive


def gw_map_detection_mc(dist, half_T: int, trials: int, seed: int = 0):
    """Always-pass spreading on random trees with the leaf-MAP adversary.

    Generates the spine from the source plus the hanging balanced branches
    level by level (integer degree-1 path products, so ties are exact), and
    counts how often the uniformly-picked minimal-product leaf is the
    source.  Returns (detections, trials, mean leaf count, mean conditional
    detection probability); the last is the per-snapshot hit probability
    1/(center degree * minimal product), an exact lower-variance estimate of
    the same detection probability.
    """
    if isinstance(dist, dict):
        dist = degree_distribution(dist)
    rng = np.random.default_rng(seed)
    support = np.array(dist.support, dtype=np.int64)
    probs = np.array(dist.probs, dtype=float)
    detections = 0
    leaves_total = 0.0
    cond_total = 0.0

    for _ in range(trials):
        spine = rng.choice(support, size=half_T + 1, p=probs)  # w_0 .. w_half
        # product of (deg-1) over w_{j+1}..w_{half-1}
        sp = np.ones(half_T, dtype=np.int64)
        for j in range(half_T - 2, -1, -1):
            sp[j] = sp[j + 1] * (spine[j + 1] - 1)
        source_prod = sp[0]

        leaf_prods = []
        # buckets[r] = products for cascade roots that may still grow r levels
        buckets: dict = {}

        def add(prods, depth_left):
            if len(prods) == 0:
                return
            if depth_left == 0:
                leaf_prods.append(np.asarray(prods, dtype=np.int64))
            else:
                buckets.setdefault(depth_left, []).append(np.asarray(prods, dtype=np.int64))

        for j in range(1, half_T):
            n_roots = int(spine[j]) - 2
            if n_roots > 0:
                root_prod = sp[j] * (spine[j] - 1)
                add(np.full(n_roots, root_prod, dtype=np.int64), j - 1)
        n_top = int(spine[half_T]) - 1
        if n_top > 0:
            add(np.full(n_top, 1, dtype=np.int64), half_T - 1)

        while buckets:
            depth_left = max(buckets)
            prods = np.concatenate(buckets.pop(depth_left))
            degs = rng.choice(support, size=prods.size, p=probs)
            child_prods = np.repeat(prods * (degs - 1), degs - 1)
            add(child_prods, depth_left - 1)

        all_prods = np.concatenate(leaf_prods) if leaf_prods else np.empty(0, dtype=np.int64)
        m = min(int(all_prods.min()), int(source_prod)) if all_prods.size else int(source_prod)
        ties = int((all_prods == m).sum()) + int(source_prod == m)
        leaves_total += all_prods.size + 1
        cond_total += 1.0 / (int(spine[half_T]) * m)
        if source_prod == m and int(rng.integers(ties)) == 0:
            detections += 1
    return detections, trials, leaves_total / trials, cond_total / trials
