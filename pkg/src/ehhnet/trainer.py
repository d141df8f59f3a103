"""Alternating structure / weight training of EHH networks.

One cycle re-optimizes the parent pair of every intermediate neuron with the
weights frozen, then re-solves the Lasso for the weights with the structure
frozen and prunes neurons that no longer reach the output.  Cycles repeat
until the objective

    J = ||y - Z a||^2 + lam * ||a||_1

stops decreasing.  Every step only accepts moves that do not raise ``J``, so
the recorded cost history is non-increasing.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateQuantiles, DimensionMismatch, GenerationStall,
                     NonConvergence, Saturated)
from .gcv import gcv_score, numerical_rank
from .graph import kept_nodes, subnetwork
from .lasso import AdmmSettings, LassoSolution, lasso_admm
from .network import EhhNetwork, SourceNode, fit_normalizer

log = logging.getLogger(__name__)

DEFAULT_ZETA_GRID = (0.001, 0.01, 0.05, 0.1, 0.5, 1.0)
MAX_RESAMPLES = 1000
_CHUNK = 256


@dataclass(frozen=True)
class TrainConfig:
    q: int = 5
    n_neurons: int = 70
    zeta_grid: tuple = DEFAULT_ZETA_GRID  # multiples of std(y)
    neuron_cost: float = 3.0
    admm: AdmmSettings = AdmmSettings()
    max_cycles: int = 10
    tol: float = 1e-4  # relative decrease per cycle
    mode: str = "column"
    seed: int = 0
    penalize_intercept: bool = True
    allow_quantile_collapse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "zeta_grid", tuple(float(z) for z in self.zeta_grid))
        if isinstance(self.admm, dict):
            object.__setattr__(self, "admm", AdmmSettings(**self.admm))
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.neuron_cost <= 0:
            raise ValueError("neuron_cost must be positive")
        if not self.zeta_grid:
            raise ValueError("zeta_grid must not be empty")
        if self.mode not in ("column", "element"):
            raise ValueError(f"unknown neighbourhood mode {self.mode!r}")
        if self.max_cycles < 0:
            raise ValueError("max_cycles must be >= 0")

    def check_inputs(self, n_inputs):
        if self.n_neurons < n_inputs * self.q:
            raise ValueError(
                f"n_neurons={self.n_neurons} is below the {n_inputs * self.q} source nodes")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainState:
    net: EhhNetwork
    h: np.ndarray  # node outputs on the training inputs, (N, M)
    y: np.ndarray
    lam: float
    zeta: float
    cost: float
    penalize_intercept: bool = True
    cycle: int = 0
    history: list = field(default_factory=list)
    records: list = field(default_factory=list)
    converged: bool = False

    @property
    def weights(self):
        return self.net.weights


@dataclass
class LambdaSelection:
    lam: float
    zeta: float
    coef: np.ndarray
    gcv: float
    table: list  # one dict per grid point


# -- objective -----------------------------------------------------------------

def _objective(h, w, y, lam, penalize_intercept=True):
    """``||y - Z w||^2 + lam ||w||_1`` using only the nonzero weights.

    Skipping zero-weight columns makes the value bit-identical before and
    after pruning, which the exact monotonicity guarantee relies on.
    """
    nz = np.flatnonzero(w[1:])
    wk = w[1:][nz]
    r = y - w[0] - np.asfortranarray(h[:, nz]) @ wk
    l1 = float(np.abs(wk).sum())
    if penalize_intercept:
        l1 += abs(float(w[0]))
    return float(r @ r) + lam * l1


def cost(net, x_raw, y, lam, weights=None, penalize_intercept=True):
    """Training objective of ``net`` on raw data with penalty ``lam``."""
    y = np.asarray(y, dtype=float)
    h = net.node_outputs(x_raw)
    if h.shape[0] != y.size:
        raise DimensionMismatch(f"{h.shape[0]} samples but {y.size} targets")
    w = net.weights if weights is None else np.asarray(weights, dtype=float)
    return _objective(h, w, y, lam, penalize_intercept)


def lambda_for(zeta, n_coef):
    """Penalty for coefficient vector length ``n_coef``: zeta * sqrt(2 log n)."""
    return zeta * math.sqrt(2.0 * math.log(n_coef))


# -- initial network -----------------------------------------------------------

def quantile_offsets(xn, q, allow_collapse=False):
    """Hinge offsets per dimension: 0 followed by the interior q-quantiles."""
    xn = np.asarray(xn, dtype=float)
    if xn.ndim == 1:
        xn = xn[:, None]
    out = []
    levels = np.arange(1, q) / q
    for i in range(xn.shape[1]):
        qs = np.quantile(xn[:, i], levels) if q > 1 else np.empty(0)
        offs = np.unique(np.concatenate([[0.0], qs]))
        offs = offs[(offs >= 0.0) & (offs < 1.0)]
        if offs.size < q:
            warnings.warn(f"dimension {i}: {q - offs.size} duplicate quantile offsets collapsed")
            if not allow_collapse or offs.size == 0:
                raise DegenerateQuantiles(i, offs.size, q)
        out.append(offs)
    return out


def _random_parents(var_masks, src_masks, n_total, rng):
    vm = list(var_masks)
    km = list(src_masks)
    seen = set(km)
    parents = []
    for j in range(len(vm), n_total):
        fails = 0
        while True:
            if j >= 2:
                a = int(rng.integers(j))
                b = int(rng.integers(j - 1))
                if b >= a:
                    b += 1
                a, b = min(a, b), max(a, b)
                if not vm[a] & vm[b] and (km[a] | km[b]) not in seen:
                    break
            fails += 1
            if fails >= MAX_RESAMPLES:
                raise GenerationStall(
                    f"no valid parent pair for node {j} after {fails} draws")
        parents.append((a, b))
        vm.append(vm[a] | vm[b])
        km.append(km[a] | km[b])
        seen.add(km[-1])
    return parents


def generate_initial(config, rng, x_raw, y=None):
    """Random valid network with ``config.n_neurons`` hidden nodes.

    Sources use the quantile offsets of the normalized training inputs.  Each
    intermediate gets a uniformly drawn parent pair that satisfies the
    disjoint-variable rule and does not repeat an existing min-form set.
    When ``y`` is given the weights come from one GCV-tuned Lasso solve.
    """
    x_raw = np.asarray(x_raw, dtype=float)
    norm = fit_normalizer(x_raw)
    config.check_inputs(norm.n)
    offsets = quantile_offsets(norm.apply(x_raw), config.q, config.allow_quantile_collapse)
    sources = [SourceNode(i, float(b)) for i, offs in enumerate(offsets) for b in offs]
    vm = [1 << s.var for s in sources]
    km = [1 << i for i in range(len(sources))]
    n_total = config.n_neurons - config.q * norm.n + len(sources)
    parents = _random_parents(vm, km, n_total, rng)
    net = EhhNetwork(norm, sources, parents)
    if y is not None:
        y = np.asarray(y, dtype=float)
        grid = [z * float(np.std(y)) for z in config.zeta_grid]
        sel = select_lambda(net, x_raw, y, grid, config.neuron_cost, config.admm,
                            config.penalize_intercept)
        net = net.with_weights(sel.coef)
    return net


# -- weights -------------------------------------------------------------------

def _grid_point(h, z, gram, y, zeta, d, settings, pen_int, incumbent, net):
    lam = lambda_for(zeta, z.shape[1])
    try:
        sol = lasso_admm(z, y, lam, settings, pen_int, warm_start=incumbent, gram=gram)
        coef, n_iter = sol.coef, sol.n_iter
    except NonConvergence as exc:
        if incumbent is None:
            raise
        warnings.warn(f"zeta={zeta:g}: {exc}")
        coef, n_iter = exc.solution.coef, exc.solution.n_iter
    obj = _objective(h, coef, y, lam, pen_int)
    if incumbent is not None:
        inc = _objective(h, incumbent, y, lam, pen_int)
        if inc < obj:
            coef, obj = incumbent, inc
    keep = kept_nodes(net.with_weights(coef))
    cols = np.concatenate([[0], keep + 1])
    r = y - z @ coef
    try:
        g = gcv_score(float(r @ r), y.size, numerical_rank(z[:, cols]), keep.size, d)
    except Saturated:
        g = math.inf
    row = dict(zeta=zeta, lam=lam, gcv=g, objective=obj, n_active=int(keep.size),
               n_iter=n_iter)
    return coef, row


def select_lambda(net, x_raw, y, zeta_grid, d=3.0, settings=None,
                  penalize_intercept=True, h=None):
    """Pick the Lasso penalty with the least GCV over ``zeta_grid``.

    Each grid value ``zeta`` maps to ``lam = zeta * sqrt(2 log(M + 1))``.
    Ties in GCV go to the larger ``zeta``.  Grid points whose solve fails are
    skipped with a warning.
    """
    y = np.asarray(y, dtype=float)
    if h is None:
        h = net.node_outputs(x_raw)
    z = np.column_stack([np.ones(y.size), h])
    gram = z.T @ z
    best = None
    table = []
    for zeta in zeta_grid:
        try:
            coef, row = _grid_point(h, z, gram, y, zeta, d, settings,
                                    penalize_intercept, None, net)
        except NonConvergence as exc:
            warnings.warn(f"zeta={zeta:g} excluded: {exc}")
            continue
        table.append(row)
        if best is None or row["gcv"] < best[1]["gcv"] or (
                row["gcv"] == best[1]["gcv"] and zeta > best[1]["zeta"]):
            best = (coef, row)
    if best is None:
        raise NonConvergence(_failed_solution(z.shape[1]))
    coef, row = best
    return LambdaSelection(row["lam"], row["zeta"], coef, row["gcv"], table)


def _failed_solution(p):
    return LassoSolution(np.zeros(p), math.nan, 0, math.nan, math.nan, False)


def _install(state, net, h, **changes):
    return dataclasses.replace(state, net=net, h=h, **changes)


def _prune_state(state, net):
    keep = kept_nodes(net)
    if keep.size == net.n_nodes:
        return net, state.h
    return subnetwork(net, keep), np.asfortranarray(state.h[:, keep])


def weight_step(state, zeta_grid, d=3.0, settings=None):
    """Re-solve the Lasso on the current structure and prune.

    ``zeta`` is re-selected by GCV among grid values whose solution does not
    raise the objective above ``state.cost``.  The current ``zeta`` with the
    current weights always qualifies because ``lam`` only shrinks as neurons
    are pruned.
    """
    y, h, net = state.y, state.h, state.net
    pen = state.penalize_intercept
    z = np.column_stack([np.ones(y.size), h])
    gram = z.T @ z
    grid = sorted(set(zeta_grid) | {state.zeta})
    best = None
    table = []
    for zeta in grid:
        coef, row = _grid_point(h, z, gram, y, zeta, d, settings, pen,
                                np.array(net.weights), net)
        row["feasible"] = row["objective"] <= state.cost
        table.append(row)
        if not row["feasible"]:
            continue
        if best is None or row["gcv"] < best[1]["gcv"] or (
                row["gcv"] == best[1]["gcv"] and zeta > best[1]["zeta"]):
            best = (coef, row)
    coef, row = best
    new_net, new_h = _prune_state(state, net.with_weights(coef))
    new_cost = _objective(new_h, new_net.weights, y, row["lam"], pen)
    return _install(state, new_net, new_h, lam=row["lam"], zeta=row["zeta"],
                    cost=new_cost), table


# -- structure -----------------------------------------------------------------

def _descendants(net, j):
    nd = net.n_sources
    reach = {j}
    out = []
    for k in range(j + 1, net.n_nodes):
        a, b = net.parents[k - nd]
        if a in reach or b in reach:
            reach.add(k)
            out.append(k)
    return out


def _valid_candidates(net, j, pairs, desc):
    """Filter candidate parent pairs for node ``j``.

    A pair is kept when its parents use disjoint variables, the new min-form
    set of ``j`` and of every downstream node is unique, and every downstream
    node still has parents on disjoint variables.  The incumbent pair is
    always kept.
    """
    nd = net.n_sources
    vm, km = net.var_masks, net.source_masks
    affected = set(desc) | {j}
    others = {km[k] for k in range(net.n_nodes) if k not in affected}
    incumbent = net.parents[j - nd]
    out = []
    for a, b in pairs:
        if (a, b) == incumbent:
            out.append((a, b))
            continue
        if vm[a] & vm[b]:
            continue
        kj = km[a] | km[b]
        if kj in others:
            continue
        ok = True
        if desc:
            nv = {j: vm[a] | vm[b]}
            nk = {j: kj}
            fresh = {kj}
            for d in desc:
                pa, pb = net.parents[d - nd]
                va, vb = nv.get(pa, vm[pa]), nv.get(pb, vm[pb])
                if va & vb:
                    ok = False
                    break
                kd = nk.get(pa, km[pa]) | nk.get(pb, km[pb])
                if kd in others or kd in fresh:
                    ok = False
                    break
                fresh.add(kd)
                nv[d] = va | vb
                nk[d] = kd
        if ok:
            out.append((a, b))
    return out


def candidate_rss(state, j, pairs):
    """Residual sum of squares for each candidate parent pair of node ``j``.

    Weights stay fixed; node ``j`` and everything downstream of it are
    recomputed for every candidate.
    """
    net, y = state.net, state.y
    nd = net.n_sources
    w0, w = net.weights[0], net.weights[1:]
    ht = state.h.T
    desc = _descendants(net, j)
    affected = set(desc) | {j}
    rest = [k for k in np.flatnonzero(w) if k not in affected]
    base = y - w0 - w[rest] @ ht[rest] if rest else y - w0
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    out = np.empty(len(pairs))
    for start in range(0, len(pairs), _CHUNK):
        a = pairs[start:start + _CHUNK, 0]
        b = pairs[start:start + _CHUNK, 1]
        vals = {j: np.minimum(ht[a], ht[b])}
        pred = w[j] * vals[j]
        for d in desc:
            pa, pb = net.parents[d - nd]
            vd = np.minimum(vals[pa] if pa in vals else ht[pa],
                            vals[pb] if pb in vals else ht[pb])
            vals[d] = vd
            if w[d] != 0.0:
                pred += w[d] * vd
        r = base - pred
        out[start:start + len(a)] = np.einsum("pn,pn->p", r, r)
    return out


def _rewire(state, j, pair):
    """State with node ``j`` fed by ``pair``; recomputes downstream outputs."""
    net = state.net
    nd = net.n_sources
    parents = list(net.parents)
    parents[j - nd] = pair
    new_net = dataclasses.replace(net, parents=parents)
    h = state.h.copy(order="F")
    np.minimum(h[:, pair[0]], h[:, pair[1]], out=h[:, j])
    for d in _descendants(new_net, j):
        a, b = parents[d - nd]
        np.minimum(h[:, a], h[:, b], out=h[:, d])
    return new_net, h


def _choose(state, j, pairs):
    """Install the lowest-RSS pair among ``pairs`` (lexicographic ties)."""
    net = state.net
    incumbent = net.parents[j - net.n_sources]
    if not pairs:
        return state
    rss = candidate_rss(state, j, pairs)
    best = pairs[int(np.argmin(rss))]
    if best == incumbent:
        return state
    new_net, h = _rewire(state, j, best)
    new_cost = _objective(h, new_net.weights, state.y, state.lam, state.penalize_intercept)
    if new_cost > state.cost:
        # rounding-level disagreement between the batched and canonical sums
        return state
    return _install(state, new_net, h, cost=new_cost)


def structure_step_column(state, j):
    """Re-pick both parents of node ``j`` among all earlier node pairs."""
    net = state.net
    if not net.n_sources <= j < net.n_nodes:
        raise IndexError(f"node {j} is not an intermediate node")
    a_idx, b_idx = np.triu_indices(j, 1)
    vm = net.var_masks
    if net.n_inputs <= 62:
        v = np.array(vm[:j], dtype=np.int64)
        ok = (v[a_idx] & v[b_idx]) == 0
        a_idx, b_idx = a_idx[ok], b_idx[ok]
    pairs = list(zip(a_idx.tolist(), b_idx.tolist()))
    incumbent = net.parents[j - net.n_sources]
    if incumbent not in pairs:
        pairs.append(incumbent)
        pairs.sort()
    pairs = _valid_candidates(net, j, pairs, _descendants(net, j))
    return _choose(state, j, pairs)


def structure_step_element(state, j):
    """Re-pick one parent of node ``j`` at a time, first then second."""
    net = state.net
    nd = net.n_sources
    if not nd <= j < net.n_nodes:
        raise IndexError(f"node {j} is not an intermediate node")
    desc = _descendants(net, j)
    _, k2 = net.parents[j - nd]
    pairs = sorted({(min(i, k2), max(i, k2)) for i in range(j) if i != k2})
    state = _choose(state, j, _valid_candidates(state.net, j, pairs, desc))
    a, b = state.net.parents[j - nd]
    k1 = b if a == k2 else a
    pairs = sorted({(min(i, k1), max(i, k1)) for i in range(j) if i != k1})
    return _choose(state, j, _valid_candidates(state.net, j, pairs, desc))


def structure_pass(state, mode="column"):
    step = structure_step_column if mode == "column" else structure_step_element
    for j in range(state.net.n_sources, state.net.n_nodes):
        state = step(state, j)
    return state


# -- training loop -------------------------------------------------------------

def initial_state(config, x_raw, y, rng=None):
    """Generate, weight and prune the starting network."""
    x_raw = np.asarray(x_raw, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_raw.shape[0] != y.size or y.size == 0:
        raise DimensionMismatch(f"{x_raw.shape[0]} samples but {y.size} targets")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    net = generate_initial(config, rng, x_raw)
    h = net.node_outputs(x_raw)
    grid = [z * float(np.std(y)) for z in config.zeta_grid]
    sel = select_lambda(net, x_raw, y, grid, config.neuron_cost, config.admm,
                        config.penalize_intercept, h=h)
    net = net.with_weights(sel.coef)
    state = TrainState(net, h, y, sel.lam, sel.zeta, 0.0, config.penalize_intercept)
    net, h = _prune_state(state, net)
    c = _objective(h, net.weights, y, sel.lam, config.penalize_intercept)
    state = _install(state, net, h, cost=c, history=[c])
    state.records.append(dict(cycle=0, cost=c, n_active=net.n_nodes, lam=sel.lam,
                              zeta=sel.zeta, gcv=sel.gcv, wall_time=0.0))
    return state


def run_cycle(state, config, zeta_grid):
    t0 = time.perf_counter()
    prev = state.cost
    state = structure_pass(state, config.mode)
    state, table = weight_step(state, zeta_grid, config.neuron_cost, config.admm)
    if not state.cost <= prev:
        raise RuntimeError(f"cycle raised the cost from {prev!r} to {state.cost!r}")
    chosen = next(r for r in table if r["zeta"] == state.zeta and r["feasible"])
    state.history = state.history + [state.cost]
    state.cycle += 1
    state.records = state.records + [dict(
        cycle=state.cycle, cost=state.cost, n_active=state.net.n_nodes,
        lam=state.lam, zeta=state.zeta, gcv=chosen["gcv"],
        wall_time=time.perf_counter() - t0)]
    return state


def train(config, x_raw, y, callback=None):
    """Train a network on raw inputs ``x_raw`` (N, n) and targets ``y`` (N,).

    Returns the final network and the training state with its cost history
    and per-cycle records.  ``callback(record)`` is invoked after every cycle.
    """
    state = initial_state(config, x_raw, y)
    if callback:
        callback(state.records[-1])
    grid = [z * float(np.std(state.y)) for z in config.zeta_grid]
    for _ in range(config.max_cycles):
        prev = state.cost
        state = run_cycle(state, config, grid)
        if callback:
            callback(state.records[-1])
        log.debug("cycle %d cost %.6g active %d", state.cycle, state.cost,
                  state.net.n_nodes)
        if prev - state.cost <= config.tol * prev:
            state.converged = True
            break
    return state.net, state
