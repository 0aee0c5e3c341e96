"""Spreading protocols as deterministic-given-RNG step machines.

Every protocol produces an InfectionSnapshot carrying the full metadata an
adversary might see: infection times, parents, the virtual-source history,
per-node levels/directions for the distributed tree protocol, and the
uninfected frontier.

Timing convention used throughout: the token holder at an even epoch te
decides to keep or pass; the resulting infection waves occupy steps te+1
(and te+2 for a pass).  A snapshot at odd T after a pass is therefore
mid-transition and has two symmetric centers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    ContactNetwork,
    Grid,
    GRID_DIRECTIONS,
    OPPOSITE_DIRECTION,
    grid_encode,
    node_uniform,
)

# ---------------------------------------------------------------------------
# token keep-probabilities


def alpha_regular(d: int, t: int, h: int) -> float:
    """Keep-probability at even epoch t, h hops from the source, degree d."""
    if d < 2:
        raise ValueError("degree must be >= 2")
    if t < 2 or t % 2:
        raise ValueError("t must be even and >= 2")
    if not 1 <= h <= t // 2:
        raise ValueError(f"h must lie in [1, {t // 2}], got {h}")
    if d == 2:
        return (t - 2 * h + 2) / (t + 2)
    b = d - 1
    return (b ** (t // 2 - h + 1) - 1) / (b ** (t // 2 + 1) - 1)


def alpha_grid(t: int, h: int) -> float:
    """Keep-probability for the grid protocol."""
    if t < 2 or t % 2:
        raise ValueError("t must be even and >= 2")
    if not 1 <= h <= t // 2:
        raise ValueError(f"h must lie in [1, {t // 2}], got {h}")
    return (t - 2 * (h - 1)) / (t + 4)


# ---------------------------------------------------------------------------
# configuration


ALWAYS_PASS = "always-pass"
EXACT = "exact"
FIXED_TABLE = "fixed-table"


@dataclass
class ProtocolParams:
    """Spreading configuration.

    d0 is the degree assumed by the keep-probability schedule; d0=math.inf
    (or alpha_policy='always-pass') means the token is always passed and the
    source ends at a leaf.  fanout_cap limits new infections per node per
    step; it defaults to 3 on finite explicit graphs and to no cap on
    infinite networks.
    """

    kind: str = "adaptive"
    alpha_policy: str = EXACT
    d0: float | int | None = None
    alpha_table: object = None
    q: float | None = None
    g: int = 1
    fanout_cap: int | None = None
    horizon: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.d0 is not None and math.isinf(self.d0):
            self.alpha_policy = ALWAYS_PASS
            self.d0 = None
        if self.alpha_policy == EXACT and self.d0 is not None and self.d0 < 2:
            raise ValueError("d0 must be >= 2 (or inf for always-pass)")
        if self.kind == "diffusion":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ValueError("diffusion requires q in (0,1)")
        if self.kind == "paad" and self.g < 1:
            raise ValueError("paad requires g >= 1")

    def keep_probability(self, net: ContactNetwork):
        """Return the callable (even t, h) -> keep probability."""
        if self.alpha_policy == ALWAYS_PASS:
            return lambda t, h: 0.0
        if self.alpha_policy == FIXED_TABLE:
            table = self.alpha_table
            if callable(table):
                return table
            if isinstance(table, dict):
                return lambda t, h: table[(t, h)]
            raise ValueError("fixed-table policy needs alpha_table dict or callable")
        d = self.d0
        if d is None:
            d = getattr(net, "d", None)
            if d is None:
                raise ValueError("exact policy needs an explicit d0 on non-regular networks")
        return lambda t, h: alpha_regular(int(d), t, h)


@dataclass
class SpyObservation:
    """One spy's report: receipt time plus whatever metadata it was sent."""

    node: object
    time: int
    parent: object
    direction: str | None = None
    level: int | None = None


@dataclass
class InfectionSnapshot:
    """The infected subgraph at time T plus the full spread trace."""

    protocol: str
    T: int
    source: object
    time: dict
    parent: dict
    net_degree: dict
    open_degree: dict
    centers: list
    mid_pass: bool = False
    vs_events: list = field(default_factory=list)  # (t, node, h) token handoffs
    h_history: list = field(default_factory=list)  # (even t, h)
    direction: dict = field(default_factory=dict)  # tree protocol metadata
    level: dict = field(default_factory=dict)
    grid_displacement: tuple | None = None
    frontier: set = field(default_factory=set)
    region_adj: dict | None = None  # adjacency over G_T and its observed frontier

    @property
    def nodes(self):
        return self.time.keys()

    @property
    def n_infected(self) -> int:
        return len(self.time)

    @property
    def virtual_source(self):
        return self.centers[0]

    @property
    def h_T(self) -> int:
        return self.vs_events[-1][2]

    def infected_at(self, t: int) -> set:
        return {v for v, tv in self.time.items() if tv <= t}

    def subtree_adjacency(self) -> dict:
        """Undirected adjacency of the infection tree (parent links)."""
        adj = {v: [] for v in self.time}
        for v, p in self.parent.items():
            if p is not None:
                adj[v].append(p)
                adj[p].append(v)
        return adj

    def boundary(self) -> list:
        """Leaves of the infected subtree (degree <= 1 in the infection tree)."""
        adj = self.subtree_adjacency()
        return [v for v, nbrs in adj.items() if len(nbrs) <= 1]

    def to_csv(self, fh) -> None:
        vs_time = {node: t for t, node, _ in self.vs_events}
        writer = csv.writer(fh)
        writer.writerow(["node", "infection_time", "parent", "direction", "level", "is_virtual_source_at_t"])
        enc = (lambda v: grid_encode(*v)) if self.protocol == "grid-adaptive" else (lambda v: v)
        for v in sorted(self.time, key=self.time.get):
            p = self.parent.get(v)
            writer.writerow([
                enc(v),
                self.time[v],
                "" if p is None else enc(p),
                self.direction.get(v, ""),
                self.level.get(v, ""),
                vs_time.get(v, ""),
            ])


# ---------------------------------------------------------------------------
# shared machinery


class _State:
    def __init__(self, net):
        self.net = net
        self.time: dict = {}
        self.parent: dict = {}
        self.net_degree: dict = {}
        self.open_degree: dict = {}
        # on trees the infector is the only infected neighbor at infection
        # time, so the uninfected-neighbor count needs no scan
        self.scan_open = net.is_finite

    def infect(self, v, t, parent):
        self.time[v] = t
        self.parent[v] = parent
        deg = self.net.degree(v)
        self.net_degree[v] = deg
        if self.scan_open:
            self.open_degree[v] = sum(1 for w in self.net.neighbors(v) if w not in self.time)
        else:
            self.open_degree[v] = deg if parent is None else deg - 1


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _wave(st: _State, origin, blocked, t: int, cap, rng) -> None:
    """One infection wave: relay through the infected region starting at
    `origin` (skipping `blocked`), infecting the uninfected boundary.  Each
    node infects at most `cap` new nodes per wave."""
    visited = {origin}
    stack = [(origin, blocked)]
    while stack:
        v, frm = stack.pop()
        relays = []
        targets = []
        for w in st.net.neighbors(v):
            if w == frm or w in visited:
                continue
            visited.add(w)
            if w in st.time:
                relays.append(w)
            else:
                targets.append(w)
        if cap is not None and len(targets) > cap:
            idx = rng.choice(len(targets), size=cap, replace=False)
            targets = [targets[int(i)] for i in idx]
        for w in targets:
            st.infect(w, t, v)
        for w in relays:
            stack.append((w, v))


def _default_cap(net: ContactNetwork, params: ProtocolParams):
    if params.fanout_cap is not None:
        return params.fanout_cap
    return 3 if net.is_finite else None


def compute_frontier(net: ContactNetwork, time: dict) -> set:
    """Uninfected one-hop neighbors of the infected set."""
    out = set()
    for v in time:
        for w in net.neighbors(v):
            if w not in time:
                out.add(w)
    return out


def _rng_for(params: ProtocolParams, rng):
    if rng is not None:
        return rng
    return np.random.default_rng(params.seed)


# ---------------------------------------------------------------------------
# adaptive diffusion (trees and explicit graphs)


def spread_adaptive(net: ContactNetwork, source, params: ProtocolParams, rng=None,
                    _vs_weights=None, _protocol_name="adaptive") -> InfectionSnapshot:
    """Token-based spreading that keeps the infection balanced around a
    moving virtual source.

    At each even epoch the token holder keeps the token with the configured
    keep-probability (one symmetric wave) or passes it to a non-backtracking
    neighbor (two one-sided waves spanning two steps).  On cyclic graphs
    infection messages stop at already-infected nodes and the per-step
    fan-out cap applies.
    """
    rng = _rng_for(params, rng)
    T = params.horizon
    alpha = params.keep_probability(net)
    cap = _default_cap(net, params)

    st = _State(net)
    st.infect(source, 0, None)
    vs_events = [(0, source, 0)]
    h_history = []
    if T == 0:
        return _adaptive_snapshot(_protocol_name, st, T, source, [source], False, vs_events, h_history)

    if _vs_weights is None:
        first = _pick(rng, list(net.neighbors(source)))
    else:
        eligible, weights = _vs_weights(net, source, None)
        probs = np.asarray(weights, dtype=float)
        first = eligible[int(rng.choice(len(eligible), p=probs / probs.sum()))]
    st.infect(first, 1, source)
    vs, prev = first, source
    h = 1
    vs_events.append((1, first, 1))
    if T >= 2:
        _wave(st, vs, prev, 2, cap, rng)
        h_history.append((2, h))

    mid_pass = False
    te = 2
    while te + 1 <= T:
        # the token can only sit on infected nodes; under a fan-out cap on a
        # cyclic graph some neighbors may still be uninfected
        eligible_now = [w for w in net.neighbors(vs) if w != prev and w in st.time]
        if rng.random() < alpha(te, h) or not eligible_now:
            _wave(st, vs, None, te + 1, cap, rng)
            mid_pass = False
        else:
            if _vs_weights is None:
                new_vs = _pick(rng, eligible_now)
            else:
                eligible, weights = _vs_weights(net, vs, prev)
                keep_idx = [i for i, w in enumerate(eligible) if w in st.time]
                eligible = [eligible[i] for i in keep_idx]
                probs = np.asarray([weights[i] for i in keep_idx], dtype=float)
                new_vs = eligible[int(rng.choice(len(eligible), p=probs / probs.sum()))]
            _wave(st, new_vs, vs, te + 1, cap, rng)
            if te + 2 <= T:
                _wave(st, new_vs, vs, te + 2, cap, rng)
                mid_pass = False
            else:
                mid_pass = True
            prev, vs = vs, new_vs
            h += 1
            vs_events.append((te + 2, new_vs, h))
        te += 2
        if te <= T:
            h_history.append((te, h))

    centers = [vs, prev] if mid_pass else [vs]
    return _adaptive_snapshot(_protocol_name, st, T, source, centers, mid_pass, vs_events, h_history)


def _adaptive_snapshot(name, st, T, source, centers, mid_pass, vs_events, h_history,
                       region_adj=None) -> InfectionSnapshot:
    # the frontier scan is worth its cost only where estimators use it
    frontier = compute_frontier(st.net, st.time) if st.net.is_finite else set()
    return InfectionSnapshot(
        protocol=name,
        T=T,
        source=source,
        time=st.time,
        parent=st.parent,
        net_degree=st.net_degree,
        open_degree=st.open_degree,
        centers=centers,
        mid_pass=mid_pass,
        vs_events=vs_events,
        h_history=h_history,
        frontier=frontier,
        region_adj=region_adj,
    )


# ---------------------------------------------------------------------------
# preferential-attachment adaptive diffusion


def _g_hop_neighborhood_size(net, v, blocked, g: int) -> int:
    """Number of nodes within g hops of v, not counting v, never crossing
    `blocked`."""
    seen = {v, blocked} if blocked is not None else {v}
    frontier = [v]
    count = 0
    for _ in range(g):
        nxt = []
        for u in frontier:
            for w in net.neighbors(u):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
                    count += 1
        frontier = nxt
    return count


def spread_paad(net: ContactNetwork, source, params: ProtocolParams, rng=None) -> InfectionSnapshot:
    """Always-pass adaptive diffusion with the next token holder picked
    proportionally to the size of its g-hop neighborhood away from the
    current holder (for g=1, proportionally to degree-1)."""
    g = params.g
    p2 = ProtocolParams(kind="paad", alpha_policy=ALWAYS_PASS, g=g,
                        fanout_cap=params.fanout_cap, horizon=params.horizon, seed=params.seed)

    def weights(net_, vs, prev):
        eligible = [w for w in net_.neighbors(vs) if w != prev]
        return eligible, [_g_hop_neighborhood_size(net_, w, vs, g) for w in eligible]

    snap = spread_adaptive(net, source, p2, rng=rng, _vs_weights=weights, _protocol_name="paad")
    snap.region_adj = _region_adjacency(net, snap, g + 1)
    snap.frontier = {w for v in snap.time for w in snap.region_adj[v] if w not in snap.time}
    return snap


def _region_adjacency(net, snap, extra_hops: int) -> dict:
    """Adjacency over the infected set plus `extra_hops` rings beyond it."""
    region = set(snap.time)
    frontier = set(snap.time)
    for _ in range(extra_hops):
        nxt = set()
        for v in frontier:
            for w in net.neighbors(v):
                if w not in region:
                    region.add(w)
                    nxt.add(w)
        frontier = nxt
    return {v: list(net.neighbors(v)) for v in region}


# ---------------------------------------------------------------------------
# fully-distributed tree protocol


def spread_tree_protocol(net: ContactNetwork, source, params: ProtocolParams, rng=None) -> InfectionSnapshot:
    """Distributed always-pass variant.  Each message carries (parent,
    direction, level); an up node extends the spine by one and sends level-1
    down messages to the rest; down nodes relay with decremented level and
    stop at level 0.  The true source keeps level 0 and the up flag, and ends
    at a leaf of the infected subtree."""
    rng = _rng_for(params, rng)
    T = params.horizon
    cap = _default_cap(net, params)

    st = _State(net)
    direction: dict = {}
    level: dict = {}
    st.infect(source, 0, None)
    direction[source] = "up"
    level[source] = 0
    spine = [source]
    if T >= 1:
        w = _pick(rng, list(net.neighbors(source)))
        st.infect(w, 1, source)
        direction[w] = "up"
        level[w] = 1
        spine.append(w)
        active = [w]
        picked_up = set()
        for t in range(2, T + 1):
            actors = [v for v in active if level[v] > 0]
            rng.shuffle(actors)
            still_active = []
            new_nodes = []
            for v in actors:
                uninf = [u for u in net.neighbors(v) if u not in st.time]
                if not uninf:
                    continue
                budget = cap if cap is not None else len(uninf)
                if direction[v] == "up" and v not in picked_up:
                    up_child = _pick(rng, uninf)
                    st.infect(up_child, t, v)
                    direction[up_child] = "up"
                    level[up_child] = level[v] + 1
                    spine.append(up_child)
                    picked_up.add(v)
                    new_nodes.append(up_child)
                    uninf = [u for u in uninf if u != up_child]
                    budget -= 1
                if budget > 0 and uninf:
                    take = uninf
                    if len(take) > budget:
                        idx = rng.choice(len(take), size=budget, replace=False)
                        take = [take[int(i)] for i in idx]
                    for z in take:
                        st.infect(z, t, v)
                        direction[z] = "down"
                        level[z] = level[v] - 1
                        new_nodes.append(z)
                if any(u not in st.time for u in net.neighbors(v)):
                    still_active.append(v)
            active = still_active + new_nodes

    # the infection is balanced around the level-T/2 spine node at even T;
    # at odd T it is mid-transition across the spine edge (T-1)/2 -- (T+1)/2
    mid = T % 2 == 1 and T > 1
    if mid:
        hi = min((T + 1) // 2, len(spine) - 1)
        lo = max(hi - 1, 0)
        centers = [spine[hi], spine[lo]]
    else:
        centers = [spine[min(T // 2, len(spine) - 1)]]
    vs_events = [(t, node, t) for t, node in enumerate(spine)]
    snap = _adaptive_snapshot("tree-protocol", st, T, source, centers, mid, vs_events, [])
    snap.direction = direction
    snap.level = level
    return snap


# ---------------------------------------------------------------------------
# plain diffusion and flooding


def spread_diffusion(net: ContactNetwork, source, params: ProtocolParams, rng=None) -> InfectionSnapshot:
    """Discrete-time SI dynamics: each infected-uninfected edge fires
    independently with probability q per step; simultaneous infectors
    tie-break uniformly for parenthood."""
    rng = _rng_for(params, rng)
    q, T = params.q, params.horizon
    st = _State(net)
    st.infect(source, 0, None)
    open_edges = {source: [w for w in net.neighbors(source) if w not in st.time]}
    for t in range(1, T + 1):
        hits: dict = {}
        for u, targets in open_edges.items():
            for w in targets:
                if rng.random() < q:
                    hits.setdefault(w, []).append(u)
        if hits:
            for w, infectors in hits.items():
                st.infect(w, t, _pick(rng, infectors))
            for w in hits:
                open_edges[w] = [z for z in net.neighbors(w) if z not in st.time]
        for u in list(open_edges):
            remaining = [w for w in open_edges[u] if w not in st.time]
            if remaining:
                open_edges[u] = remaining
            else:
                del open_edges[u]
    return _adaptive_snapshot("diffusion", st, T, source, [source], False, [(0, source, 0)], [])


def spread_deterministic(net: ContactNetwork, source, T: int, rng=None) -> InfectionSnapshot:
    """Flooding: the snapshot is the radius-T ball around the source."""
    rng = np.random.default_rng(0) if rng is None else rng
    st = _State(net)
    st.infect(source, 0, None)
    frontier = [source]
    for t in range(1, T + 1):
        hits: dict = {}
        for u in frontier:
            for w in net.neighbors(u):
                if w not in st.time:
                    hits.setdefault(w, []).append(u)
        for w, infectors in hits.items():
            st.infect(w, t, _pick(rng, infectors))
        frontier = list(hits)
    return _adaptive_snapshot("deterministic", st, T, source, [source], False, [(0, source, 0)], [])


# ---------------------------------------------------------------------------
# grid protocol


def spread_grid(net: Grid, source_xy, params: ProtocolParams, rng=None) -> InfectionSnapshot:
    """Adaptive diffusion on the lattice with directional bookkeeping.

    The token carries the displacement (hH, hV) from the source; moves that
    would shrink |hH|+|hV| are forbidden, and branch messages carry up to two
    forbidden directions so each wave grows the ball by one ring.
    """
    if not isinstance(net, Grid):
        raise ValueError("grid spreading requires a grid network")
    if isinstance(source_xy, int):
        raise ValueError("pass the source as an (x, y) pair")
    rng = _rng_for(params, rng)
    T = params.horizon

    time: dict = {tuple(source_xy): 0}
    parent: dict = {tuple(source_xy): None}
    source = tuple(source_xy)

    def infect(xy, t, par):
        time[xy] = t
        parent[xy] = par

    def wave(origin, initial_dirs, extra_forbidden, t):
        # One message class per initial direction; the forbidden set stays
        # fixed along relays.  Nodes infected within this wave never relay.
        new_in_wave = set()
        for d0 in initial_dirs:
            forbidden = {OPPOSITE_DIRECTION[d0]}
            if extra_forbidden:
                forbidden.add(extra_forbidden)
            allowed = [d for d in GRID_DIRECTIONS if d not in forbidden]
            visited = {origin}
            first = Grid.neighbors_xy(origin)[d0]
            entry = [(origin, first)]
            while entry:
                sender, xy = entry.pop()
                if xy in visited:
                    continue
                visited.add(xy)
                if xy in time:
                    if xy in new_in_wave:
                        continue
                    for d in allowed:
                        entry.append((xy, Grid.neighbors_xy(xy)[d]))
                else:
                    infect(xy, t, sender)
                    new_in_wave.add(xy)

    vs_events = [(0, source, 0)]
    h_history = []
    if T == 0:
        return _grid_snapshot(time, parent, T, source, [source], False, vs_events, h_history, (0, 0))

    dir0 = _pick(rng, list(GRID_DIRECTIONS))
    first = Grid.neighbors_xy(source)[dir0]
    infect(first, 1, source)
    dx, dy = GRID_DIRECTIONS[dir0]
    hH, hV = dx, dy
    vs, prev_dir = first, dir0
    vs_events.append((1, first, 1))
    if T >= 2:
        wave(vs, [d for d in GRID_DIRECTIONS if d != OPPOSITE_DIRECTION[dir0]], None, 2)
        h_history.append((2, abs(hH) + abs(hV)))

    mid_pass = False
    prev_vs = source
    te = 2
    while te + 1 <= T:
        h = abs(hH) + abs(hV)
        if rng.random() < alpha_grid(te, h):
            wave(vs, list(GRID_DIRECTIONS), None, te + 1)
            mid_pass = False
        else:
            banned = set()
            if hH < 0:
                banned.add("E")
            elif hH > 0:
                banned.add("W")
            if hV < 0:
                banned.add("N")
            elif hV > 0:
                banned.add("S")
            move = _pick(rng, [d for d in GRID_DIRECTIONS if d not in banned])
            new_vs = Grid.neighbors_xy(vs)[move]
            dx, dy = GRID_DIRECTIONS[move]
            hH += dx
            hV += dy
            back = OPPOSITE_DIRECTION[move]  # direction of the old holder seen from the new one
            wave(new_vs, [d for d in GRID_DIRECTIONS if d != back], back, te + 1)
            if te + 2 <= T:
                wave(new_vs, [d for d in GRID_DIRECTIONS if d != back], back, te + 2)
                mid_pass = False
            else:
                mid_pass = True
            prev_vs, vs = vs, new_vs
            vs_events.append((te + 2, new_vs, abs(hH) + abs(hV)))
        te += 2
        if te <= T:
            h_history.append((te, abs(hH) + abs(hV)))

    centers = [vs, prev_vs] if mid_pass else [vs]
    return _grid_snapshot(time, parent, T, source, centers, mid_pass, vs_events, h_history, (hH, hV))


def _grid_snapshot(time, parent, T, source, centers, mid_pass, vs_events, h_history, disp):
    degree = {v: 4 for v in time}
    open_deg = {}
    for v in time:
        open_deg[v] = sum(1 for w in Grid.neighbors_xy(v).values() if w not in time)
    frontier = set()
    for v in time:
        for w in Grid.neighbors_xy(v).values():
            if w not in time:
                frontier.add(w)
    return InfectionSnapshot(
        protocol="grid-adaptive",
        T=T,
        source=source,
        time=time,
        parent=parent,
        net_degree=degree,
        open_degree=open_deg,
        centers=centers,
        mid_pass=mid_pass,
        vs_events=vs_events,
        h_history=h_history,
        grid_displacement=disp,
        frontier=frontier,
    )


# ---------------------------------------------------------------------------
# line protocol via the latent-coin implementation


@dataclass
class LineTrace:
    """What the two end spies can reconstruct on the line: the latent pass
    probability, the initial direction, and the first receipt time measured
    from the start of the spread."""

    n: int
    q: float
    direction: str  # 'left' | 'right'
    first_spy: int | None
    t_first: int | None
    spy_times: dict


def spread_polya_line(n: int, source: int, seed=None, rng=None, horizon: int | None = None):
    """Spread on the line 0..n+1 with spies at both ends.

    Instead of time-varying keep probabilities, draw a direction D uniformly
    and a latent q ~ Uniform[0,1], then pass the token i.i.d. Bernoulli(q) at
    each even epoch; the token walk has the same law as the exact schedule
    for degree 2.  The trace lets the spies recover q, D and the first
    receipt time exactly.
    """
    if n < 1:
        raise ValueError("need at least one non-spy node on the line")
    if not 1 <= source <= n:
        raise ValueError("source must lie strictly between the spies")
    rng = np.random.default_rng(seed) if rng is None else rng
    direction = "right" if rng.random() < 0.5 else "left"
    q = rng.random()
    step = 1 if direction == "right" else -1

    time = {source: 0}
    parent = {source: None}
    left_edge = right_edge = source

    def infect(pos, t, par):
        if pos not in time:
            time[pos] = t
            parent[pos] = par

    def grow_far(t):
        nonlocal left_edge, right_edge
        if step > 0:
            infect(right_edge + 1, t, right_edge)
            right_edge += 1
        else:
            infect(left_edge - 1, t, left_edge)
            left_edge -= 1

    def within(t):
        return horizon is None or t <= horizon

    def done():
        # without a horizon, stop once the earlier spy has reported
        return horizon is None and (0 in time or (n + 1) in time)

    vs_events = [(0, source, 0)]
    h_history = []
    h = 0
    vs = source
    if within(1):
        vs = source + step
        infect(vs, 1, source)
        if step > 0:
            right_edge = vs
        else:
            left_edge = vs
        h = 1
        vs_events.append((1, vs, 1))
    if within(2):
        grow_far(2)  # restores symmetry around the first token holder
        h_history.append((2, h))

    te = 2
    while within(te + 1) and not done():
        if rng.random() < 1.0 - q:  # keep: symmetric ring
            infect(left_edge - 1, te + 1, left_edge)
            infect(right_edge + 1, te + 1, right_edge)
            left_edge -= 1
            right_edge += 1
        else:  # pass: far edge advances twice
            vs += step
            h += 1
            vs_events.append((te + 2, vs, h))
            grow_far(te + 1)
            if within(te + 2):
                grow_far(te + 2)
        te += 2
        if within(te):
            h_history.append((te, h))

    degree = {v: 2 for v in time}
    open_deg = {v: sum(1 for w in (v - 1, v + 1) if w not in time) for v in time}
    snap = InfectionSnapshot(
        protocol="polya-line",
        T=horizon if horizon is not None else max(time.values()),
        source=source,
        time=time,
        parent=parent,
        net_degree=degree,
        open_degree=open_deg,
        centers=[vs],
        vs_events=vs_events,
        h_history=h_history,
        frontier={left_edge - 1, right_edge + 1},
    )
    spy_times = {s: time[s] for s in (0, n + 1) if s in time}
    first_spy = min(spy_times, key=spy_times.get) if spy_times else None
    trace = LineTrace(
        n=n,
        q=q,
        direction=direction,
        first_spy=first_spy,
        t_first=spy_times.get(first_spy),
        spy_times=spy_times,
    )
    return snap, trace


# ---------------------------------------------------------------------------
# spy assignment and observation extraction


def assign_spies(snapshot: InfectionSnapshot, p: float, seed: int) -> list:
    """Mark each infected node except the source as a spy i.i.d. with
    probability p, keyed by (seed, node) so the assignment is reproducible."""
    spies = []
    for v in snapshot.time:
        if v == snapshot.source:
            continue
        key = v if isinstance(v, int) else grid_encode(*v)
        if node_uniform(seed, key, salt=0x57E5) < p:
            spies.append(v)
    return spies


def observations_for(snapshot: InfectionSnapshot, spies) -> list:
    return [
        SpyObservation(
            node=s,
            time=snapshot.time[s],
            parent=snapshot.parent[s],
            direction=snapshot.direction.get(s),
            level=snapshot.level.get(s),
        )
        for s in spies
    ]
