"""Source-inference estimators.

Snapshot-side: the uniform estimator for exact-schedule spreads on regular
trees, degree-message-passing ML for mismatched schedules on irregular
trees, the leaf MAP rule for always-pass spreads, and its neighborhood-
weighted variant.  Spy-side: the pivot estimator for the distributed tree
protocol, the first-spy baseline, the degree-weighted refinement for
irregular trees, and the closed-form line estimator.  A brute-force
trajectory-sum oracle backs the message-passing implementation in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import ContactNetwork
from .spread import InfectionSnapshot, LineTrace, alpha_regular


@dataclass
class Estimate:
    """An estimator's verdict: the chosen node, the candidate set it was
    drawn from, and per-candidate scores up to a shared constant."""

    v_hat: object
    candidates: list
    scores: dict | None
    tie_count: int
    kind: str
    inconclusive: bool = False
    info: dict = field(default_factory=dict)


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


def _argmax_pick(scores: dict, rng, mode="uniform", reverse=False):
    """Best-scoring keys with uniform tie-breaking (rel. tolerance 1e-12)."""
    if not scores:
        raise ValueError("empty candidate set")
    best = min(scores.values()) if reverse else max(scores.values())
    tol = 1e-12 * max(1.0, abs(best))
    ties = [v for v, s in scores.items() if abs(s - best) <= tol]
    if mode == "lowest":
        chosen = min(ties, key=repr)
    else:
        chosen = _pick(rng, ties)
    return chosen, ties


def _rng(rng):
    return np.random.default_rng() if rng is None else rng


# ---------------------------------------------------------------------------
# snapshot-tree helpers


def _children_from_center(snap: InfectionSnapshot, root=None):
    """Orient the infection tree away from `root`; returns (children map,
    up-parent map, depth map) over infected nodes."""
    adj = snap.subtree_adjacency()
    root = snap.virtual_source if root is None else root
    children = {v: [] for v in adj}
    up = {root: None}
    depth = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj[v]:
                if w not in depth:
                    depth[w] = depth[v] + 1
                    up[w] = v
                    children[v].append(w)
                    nxt.append(w)
        frontier = nxt
    if len(depth) != len(adj):
        raise ValueError("infected subgraph is not connected")
    return children, up, depth


def _path_up(up, v):
    path = [v]
    while up[v] is not None:
        v = up[v]
        path.append(v)
    return path  # v .. root


# ---------------------------------------------------------------------------
# snapshot estimators


def estimate_snapshot_regular(snap: InfectionSnapshot, rng=None, tie_break="uniform") -> Estimate:
    """Exact-schedule spreads on regular trees make every non-center node
    equally likely, so the estimator is uniform over the snapshot minus the
    token holder(s); mid-transition snapshots exclude both symmetric
    centers."""
    rng = _rng(rng)
    if snap.n_infected == 0:
        raise ValueError("empty snapshot")
    nodes = list(snap.time)
    if snap.T == 0:
        only = nodes[0]
        return Estimate(only, [only], None, 1, "snapshot-uniform")
    if snap.T == 1 or not snap.mid_pass:
        excluded = {snap.virtual_source}
    else:
        excluded = set(snap.centers)
    candidates = [v for v in nodes if v not in excluded]
    v_hat = candidates[0] if tie_break == "lowest" else _pick(rng, candidates)
    return Estimate(v_hat, candidates, None, len(candidates), "snapshot-uniform")


def irregular_ml_scores(snap: InfectionSnapshot, d0: int, degree_override: dict | None = None):
    """Degree message passing for the mismatched-schedule likelihood.

    Returns (relative score map, absolute likelihood map).  The relative
    score of node v is (d0/d_v) * prod over interior path nodes w of
    (d0-1)/(d_w-1); multiplying by the regular-tree leaf likelihood and the
    (d0-1)-power of the depth gives the absolute likelihood A_v * B_v.
    """
    T = snap.T
    if T % 2:
        raise ValueError("likelihood scoring requires an even snapshot time")
    if d0 < 2:
        raise ValueError("d0 must be >= 2")
    deg = snap.net_degree if degree_override is None else degree_override
    children, up, depth = _children_from_center(snap)
    root = snap.virtual_source

    score = {root: 0.0}
    a_val = {root: 0.0}
    for w in children[root]:
        score[w] = d0 / deg[w]
        a_val[w] = 1.0 / deg[w]
        stack = [w]
        while stack:
            v = stack.pop()
            for c in children[v]:
                score[c] = score[v] * deg[v] * (d0 - 1) / (deg[c] * (deg[v] - 1))
                a_val[c] = a_val[v] * deg[v] / (deg[c] * (deg[v] - 1))
                stack.append(c)

    # likelihood of a max-depth leaf on the matching regular tree
    p_leaf = 1.0 / (d0 * (d0 - 1) ** (T // 2 - 1)) if T >= 2 else 1.0
    for te in range(2, T - 1, 2):
        p_leaf *= 1.0 - alpha_regular(d0, te, te // 2)
    likelihood = {}
    for v in score:
        if v == root:
            likelihood[v] = 0.0
        else:
            b_val = p_leaf * d0 * (d0 - 1) ** (depth[v] - 1)
            likelihood[v] = a_val[v] * b_val
    return score, likelihood


def estimate_irregular_ml(snap: InfectionSnapshot, d0: int, rng=None, tie_break="uniform",
                          cyclic: bool = False) -> Estimate:
    """ML source estimate under a degree-d0 schedule run on an irregular
    tree, via one O(N) message-passing sweep from the center.

    With cyclic=True (finite graphs with cycles) the sweep runs on the
    infection tree, degrees are replaced by uninfected-neighbor counts at
    infection time, and only boundary leaves are scored; interior scoring is
    not meaningful once the token can revisit regions.
    """
    rng = _rng(rng)
    if cyclic:
        deg = {v: max(snap.open_degree.get(v, 1), 1) + 1 for v in snap.time}
        score, likelihood = irregular_ml_scores(snap, d0, degree_override=deg)
        leaves = set(snap.boundary())
        candidates = {v: s for v, s in score.items()
                      if v != snap.virtual_source and v in leaves}
    else:
        score, likelihood = irregular_ml_scores(snap, d0)
        candidates = {v: s for v, s in score.items() if v != snap.virtual_source}
    v_hat, ties = _argmax_pick(candidates, rng, tie_break)
    return Estimate(v_hat, sorted(candidates, key=repr), score, len(ties), "irregular-ml",
                    info={"likelihood": likelihood, "d0": d0})


def estimate_map_leaf(snap: InfectionSnapshot, rng=None, tie_break="uniform") -> Estimate:
    """MAP rule for always-pass spreads: pick the boundary leaf minimizing
    the product of (degree-1) over its path to the center.  Also reports the
    extremal product Lambda and the conditional detection probability
    1/Lambda."""
    rng = _rng(rng)
    T = snap.T
    if T == 0:
        only = next(iter(snap.time))
        return Estimate(only, [only], {only: 1.0}, 1, "map-leaf",
                        info={"lambda": 1.0, "pd_conditional": 1.0})
    if T >= 2 and snap.h_T != T // 2:
        raise ValueError("snapshot did not come from an always-pass spread (source not at a leaf)")
    deg = snap.net_degree
    children, up, depth = _children_from_center(snap)
    root = snap.virtual_source
    prod = {}
    stack = [(w, 1.0) for w in children[root]]
    leaves = set(snap.boundary())
    while stack:
        v, acc = stack.pop()
        if v in leaves:
            prod[v] = acc
        for c in children[v]:
            stack.append((c, acc * (deg[v] - 1)))
    v_hat, ties = _argmax_pick(prod, rng, tie_break, reverse=True)
    lam = deg[root] * prod[v_hat]
    scores = {v: 1.0 / (deg[root] * pr) for v, pr in prod.items()}
    return Estimate(v_hat, sorted(prod, key=repr), scores, len(ties), "map-leaf",
                    info={"lambda": lam, "pd_conditional": 1.0 / lam})


def _neighborhood_size(adj: dict, v, blocked, g: int) -> int:
    seen = {v, blocked} if blocked is not None else {v}
    frontier = [v]
    count = 0
    for _ in range(g):
        nxt = []
        for u in frontier:
            if u not in adj:
                raise ValueError("snapshot lacks the frontier ring needed for this g")
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
                    count += 1
        frontier = nxt
    return count


def paad_map_scores(snap: InfectionSnapshot, g: int) -> dict:
    """d_v * Q(v) for each boundary leaf, where Q is the probability of the
    token walking from v to the observed center under neighborhood-weighted
    passing."""
    if snap.region_adj is None:
        raise ValueError("snapshot lacks frontier adjacency; spread with the paad protocol")
    adj = snap.region_adj
    children, up, depth = _children_from_center(snap)
    scores = {}
    for leaf in snap.boundary():
        path = _path_up(up, leaf)  # leaf .. root
        q = 1.0
        prev = None
        for i in range(len(path) - 1):
            cur, nxt = path[i], path[i + 1]
            eligible = [w for w in adj[cur] if w != prev]
            weights = [_neighborhood_size(adj, w, cur, g) for w in eligible]
            q *= weights[eligible.index(nxt)] / sum(weights)
            prev = cur
        scores[leaf] = len(adj[leaf]) * q
    return scores


def estimate_paad_map(snap: InfectionSnapshot, g: int, rng=None, tie_break="uniform") -> Estimate:
    rng = _rng(rng)
    scores = paad_map_scores(snap, g)
    v_hat, ties = _argmax_pick(scores, rng, tie_break)
    total = sum(scores.values())
    return Estimate(v_hat, sorted(scores, key=repr), scores, len(ties), "paad-map",
                    info={"pd_conditional": max(scores.values()) / total})


# ---------------------------------------------------------------------------
# brute-force trajectory oracle (test-only)


def oracle_trajectory_likelihood(snap: InfectionSnapshot, candidate, d0: int) -> float:
    """Exact likelihood of `candidate` by summing over every keep/pass
    trajectory that walks the token from the candidate to the observed
    center.  Exponential in T; refuses T > 12."""
    T = snap.T
    if T % 2:
        raise ValueError("oracle requires even T")
    if T > 12:
        raise ValueError("oracle is exponential in T; refuse T > 12")
    deg = snap.net_degree
    children, up, depth = _children_from_center(snap)
    root = snap.virtual_source
    if candidate == root:
        return 0.0
    path = _path_up(up, candidate)  # candidate .. root
    h = len(path) - 1
    a_val = 1.0 / deg[candidate]
    for w in path[1:-1]:
        a_val /= deg[w] - 1

    slots = list(range(2, T - 1, 2))
    passes_needed = h - 1
    if passes_needed < 0 or passes_needed > len(slots):
        return 0.0
    total_b = 0.0
    for mask in range(1 << len(slots)):
        if bin(mask).count("1") != passes_needed:
            continue
        cur_h = 1
        prob = 1.0
        for i, te in enumerate(slots):
            a = alpha_regular(d0, te, cur_h)
            if mask >> i & 1:
                prob *= 1.0 - a
                cur_h += 1
            else:
                prob *= a
        total_b += prob
    return a_val * total_b


# ---------------------------------------------------------------------------
# spy estimators


def _net_path(net: ContactNetwork, a, b):
    """Path a..b; parent-walk on lazy trees, BFS on finite graphs."""
    if hasattr(net, "parent"):
        pa, pb = [a], [b]
        seen_a = {a: 0}
        v = a
        while net.parent(v) is not None:
            v = net.parent(v)
            pa.append(v)
            seen_a[v] = len(pa) - 1
        v = b
        while v not in seen_a:
            v = net.parent(v)
            if v is None:
                raise ValueError("nodes not connected")
            pb.append(v)
        lca = pb[-1]
        return pa[: seen_a[lca] + 1] + pb[-2::-1]
    # finite graph: BFS
    prev = {a: None}
    frontier = [a]
    while frontier and b not in prev:
        nxt = []
        for v in frontier:
            for w in net.neighbors(v):
                if w not in prev:
                    prev[w] = v
                    nxt.append(w)
        frontier = nxt
    if b not in prev:
        raise ValueError("nodes not connected")
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


@dataclass
class PivotInfo:
    pivot: object
    eliminated: object  # pivot neighbor toward the spy; that branch is ruled out
    level: int
    spy: object
    h_spy_pivot: int
    h_pivot_anchor: int


def _solve_pivot(path_s_to_anchor, t_anchor, t_spy):
    """Split |path| into (spy->pivot, pivot->anchor) legs using the
    timestamp difference; the pivot is the infection-time minimum on the
    path."""
    dist = len(path_s_to_anchor) - 1
    dt = t_anchor - t_spy
    if (dist - dt) % 2 or dist < abs(dt):
        raise ValueError("observation inconsistent with a tree spread")
    h1 = (dist - dt) // 2
    h2 = (dist + dt) // 2
    return h1, h2


def algorithm_pivot_candidates(net: ContactNetwork, observations, max_leaves: int = 2_000_000):
    """Candidate machinery for the distributed tree protocol.

    Finds the lowest-level spine spy, derives a pivot from every other spy in
    the feasible region, and returns (candidate leaves, lowest pivot, pivot
    list).  Returns None when no spine spy reported (inconclusive)."""
    spine = [o for o in observations if o.direction == "up"]
    if not spine:
        return None
    s0 = min(spine, key=lambda o: o.level)
    pivots = []
    for o in observations:
        if o.node == s0.node:
            continue
        path = _net_path(net, o.node, s0.node)
        dist = len(path) - 1
        # only spies in the feasible region (behind s0's parent, within its
        # level) carry information about the source
        if dist > s0.level or path[-2] != s0.parent:
            continue
        try:
            h1, h2 = _solve_pivot(path, s0.time, o.time)
        except ValueError:
            continue  # shortest-path/timing mismatch; happens only off trees
        if h1 == 0:
            continue  # the spy itself is the pivot; parent info already used via s0 ordering
        pivots.append(PivotInfo(
            pivot=path[h1],
            eliminated=path[h1 - 1],
            level=s0.level - h2,
            spy=o.node,
            h_spy_pivot=h1,
            h_pivot_anchor=h2,
        ))

    if pivots:
        m = min(p.level for p in pivots)
        lowest = [p for p in pivots if p.level == m]
        l_min = lowest[0].pivot
        level = m
        blocked = {p.eliminated for p in lowest if p.pivot == l_min}
        # the source sits away from the anchor: exclude the anchor-side branch
        path_up_anchor = _net_path(net, l_min, s0.node)
        if len(path_up_anchor) > 1:
            blocked.add(path_up_anchor[1])
    else:
        l_min = s0.node
        level = s0.level
        blocked = {w for w in net.neighbors(s0.node) if w != s0.parent}

    # leaves of the feasible region: exactly `level` hops from the pivot,
    # avoiding eliminated branches (BFS with dedup, so cycles do not
    # multiply paths; exact on trees)
    visited = {l_min} | set(blocked)
    frontier = [w for w in net.neighbors(l_min) if w not in blocked]
    visited.update(frontier)
    for step in range(level - 1):
        nxt = []
        for v in frontier:
            for w in net.neighbors(v):
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
        if len(nxt) > max_leaves:
            raise RuntimeError("feasible region too large to enumerate")
        frontier = nxt
    return frontier, l_min, level, s0, pivots


def estimate_spy_ml(net: ContactNetwork, observations, rng=None, tie_break="uniform") -> Estimate:
    """Pivot-based ML estimator for the tree protocol on regular trees:
    uniform over the feasible leaves that survive pivot elimination."""
    rng = _rng(rng)
    out = algorithm_pivot_candidates(net, observations)
    if out is None or not out[0]:
        return Estimate(None, [], None, 0, "spy-ml", inconclusive=True)
    candidates, l_min, level, s0, pivots = out
    v_hat = candidates[0] if tie_break == "lowest" else _pick(rng, candidates)
    return Estimate(v_hat, candidates, None, len(candidates), "spy-ml",
                    info={"pivot": l_min, "pivot_level": level, "s0": s0.node,
                          "pivots": pivots})


def estimate_first_spy(observations, rng=None) -> Estimate:
    """Parent of the earliest-infected spy; the fundamental lower bound."""
    rng = _rng(rng)
    if not observations:
        return Estimate(None, [], None, 0, "first-spy", inconclusive=True)
    t0 = min(o.time for o in observations)
    first = _pick(rng, [o for o in observations if o.time == t0])
    return Estimate(first.parent, [first.parent], None, 1, "first-spy",
                    info={"spy": first.node, "time": t0})


def estimate_spy_irregular(net: ContactNetwork, observations, rng=None, tie_break="uniform",
                           open_degree: dict | None = None) -> Estimate:
    """Pivot candidates re-weighted for irregular degrees: candidate u gets
    1/deg(u) * prod of 1/(deg(v)-1) over the interior of its path to the
    lowest pivot.  With `open_degree` (uninfected-neighbor counts at
    infection time) the weights use those instead, which corrects for
    cycles."""
    rng = _rng(rng)
    out = algorithm_pivot_candidates(net, observations)
    if out is None or not out[0]:
        return Estimate(None, [], None, 0, "spy-irregular", inconclusive=True)
    candidates, l_min, level, s0, pivots = out

    def eff_degree(v):
        if open_degree is not None and v in open_degree:
            return open_degree[v]
        return net.degree(v)

    weights = {}
    for u in candidates:
        path = _net_path(net, u, l_min)
        w = 1.0 / max(eff_degree(u), 1)
        for v in path[1:-1]:
            w /= max(eff_degree(v) - 1, 1)
        weights[u] = w
    v_hat, ties = _argmax_pick(weights, rng, tie_break)
    return Estimate(v_hat, candidates, weights, len(ties), "spy-irregular",
                    info={"pivot": l_min, "pivot_level": level, "s0": s0.node})


# ---------------------------------------------------------------------------
# line estimator


def estimate_line_ml(trace: LineTrace, rng=None) -> Estimate:
    """Closed-form ML estimate on the line from the earlier spy's receipt
    time plus the revealed latent coin and direction (mode of a shifted
    binomial)."""
    rng = _rng(rng)
    if trace.first_spy is None or trace.t_first is None:
        return Estimate(None, [], None, 0, "line-ml", inconclusive=True)
    n, q, t1 = trace.n, trace.q, trace.t_first
    mirrored = trace.first_spy == n + 1
    # express everything as if the reporting spy sat at position 0
    d_local = trace.direction
    if mirrored:
        d_local = "left" if d_local == "right" else "right"
    toward = d_local == "left"  # token moving toward the reporting spy

    if t1 == 1:
        v_local = 1
    elif toward:
        if t1 % 2 == 0:
            # source = 2 + t1/2 + Binom(t1/2 - 2, q): take the mode
            v_local = (t1 + 4) // 2 + math.floor(q * (t1 - 2) / 2) if t1 >= 4 else 2
        else:
            v_local = (t1 + 3) // 2 + math.floor(q * (t1 - 1) / 2)
    else:
        if t1 % 2 == 0:
            raise ValueError("even receipt time with the token moving away is impossible")
        v_local = 1 + math.floor((1 - q) * (t1 - 1) / 2)

    v_hat = (n + 1 - v_local) if mirrored else v_local
    return Estimate(v_hat, [v_hat], None, 1, "line-ml",
                    info={"t1": t1, "q": q, "direction": trace.direction})


# ---------------------------------------------------------------------------
# combined spy + snapshot estimator (regular trees, even T)


def estimate_spy_snapshot(snap: InfectionSnapshot, observations, rng=None, tie_break="uniform") -> Estimate:
    """Joint ML over boundary leaves on a regular tree: a leaf survives if a
    spine running from it through the observed center can explain every
    spy's direction bit, parent pointer, and receipt time.  Snapshot size
    reveals T, which anchors spy timestamps to the start of the spread.
    Uniform over survivors."""
    rng = _rng(rng)
    if snap.T % 2:
        raise ValueError("combined estimation expects an even snapshot time")
    children, up, depth = _children_from_center(snap)
    center = snap.virtual_source
    half_t = snap.T // 2
    leaves = snap.boundary()
    obs = [o for o in observations if o.node in snap.time]
    if not obs:
        v_hat = leaves[0] if tie_break == "lowest" else _pick(rng, leaves)
        return Estimate(v_hat, leaves, None, len(leaves), "spy-snapshot")

    spy_chains = []
    for o in obs:
        chain = _path_up(up, o.node)  # node .. center
        spy_chains.append((o, chain))

    survivors = []
    for leaf in leaves:
        path = _path_up(up, leaf)  # leaf .. center
        on_path = {v: i for i, v in enumerate(path)}  # index = dist from leaf
        ok = True
        shift = None
        for o, chain in spy_chains:
            s = o.node
            if s == leaf:
                ok = False
                break
            if s in on_path:
                # hypothesized spine member below the center
                if o.direction != "up":
                    ok = False
                    break
                idx = on_path[s]
                if o.parent != path[idx - 1]:
                    ok = False  # spine parents point toward the source
                    break
                m_hyp = half_t - depth[s]
                tau_hyp = m_hyp
            else:
                # junction of the spy's up-chain with the hypothesized spine
                z = next(v for v in chain if v in on_path)
                if o.direction == "up":
                    if z != center or (o.level is not None and o.level <= half_t):
                        ok = False  # a spine spy must sit on the spine or above the center
                        break
                    m_hyp = o.level
                    tau_hyp = o.level
                else:
                    # a junction strictly below the center pins the spy's level;
                    # through the center the attachment height is free and only
                    # the (position-determined) receipt time constrains
                    m_hyp = None if z == center else (half_t - depth[z]) - (depth[s] - depth[z])
                    tau_hyp = (half_t - depth[z]) + (depth[s] - depth[z])
            if m_hyp is not None and o.level is not None and o.level != m_hyp:
                ok = False
                break
            # spy clocks are mutually consistent but not anchored to the start
            delta = o.time - tau_hyp
            if shift is None:
                shift = delta
            elif delta != shift:
                ok = False
                break
        if ok:
            survivors.append(leaf)
    if not survivors:
        return Estimate(None, [], None, 0, "spy-snapshot", inconclusive=True)
    v_hat = survivors[0] if tie_break == "lowest" else _pick(rng, survivors)
    return Estimate(v_hat, survivors, None, len(survivors), "spy-snapshot")


# ---------------------------------------------------------------------------
# repeated-observation adversary


def estimate_multiple_snapshots(snap: InfectionSnapshot, observe_T: int, rng=None) -> Estimate:
    """Worst-case adversary that watches every step after observe_T: it
    learns the token's distance from the source and the branch the token
    wandered into, and guesses uniformly among the remaining nodes at that
    distance."""
    rng = _rng(rng)
    if observe_T % 2:
        raise ValueError("observe_T must be even")
    events = [e for e in snap.vs_events if e[0] <= observe_T]
    t_vs, vs, h = events[-1]
    later = [e for e in snap.vs_events if e[0] > observe_T]
    if not later:
        return Estimate(None, [], None, 0, "multi-snapshot", inconclusive=True)
    next_vs = later[0][1]

    infected = snap.infected_at(observe_T)
    adj = snap.subtree_adjacency()
    frontier = [(vs, None)]
    for _ in range(h):
        nxt = []
        for v, frm in frontier:
            for w in adj[v]:
                if w == frm or w not in infected or (v == vs and w == next_vs):
                    continue
                nxt.append((w, v))
        frontier = nxt
    candidates = [v for v, _ in frontier]
    if not candidates:
        return Estimate(None, [], None, 0, "multi-snapshot", inconclusive=True)
    v_hat = _pick(rng, candidates)
    return Estimate(v_hat, candidates, None, len(candidates), "multi-snapshot",
                    info={"h": h, "vs": vs})
