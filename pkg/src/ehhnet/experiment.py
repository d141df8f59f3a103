"""Restarts, model-size sweeps and evaluation helpers for NARX runs.

Every random draw in a run derives from one integer seed: restart ``r``
trains with the ``r``-th child of ``numpy.random.SeedSequence(seed)``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EhhError, NumericOverflow
from .gcv import gcv
from .sysid import NarxSpec, build_regressors, predict_one_step, rmse, simulate_free_run, vaf
from .trainer import train


def restart_seeds(seed, restarts):
    """Independent 32-bit training seeds, one per restart."""
    children = np.random.SeedSequence(seed).spawn(restarts)
    return [int(c.generate_state(1)[0]) for c in children]


def fingerprint(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def parameter_counts(net):
    """Parameter counts of a trained network under four conventions.

    ``weights``: nonzero output weights.  ``weights_offsets``: plus one hinge
    offset per source node.  ``weights_offsets_structure``: plus two parent
    indices per intermediate node.  ``weights_two_per_node``: nonzero weights
    plus two numbers per hidden node, ``(variable, offset)`` for a source and
    the parent pair for an intermediate.
    """
    nz = int(np.count_nonzero(net.weights))
    with_offsets = nz + net.n_sources
    return {"weights": nz, "weights_offsets": with_offsets,
            "weights_offsets_structure": with_offsets + 2 * len(net.parents),
            "weights_two_per_node": nz + 2 * net.n_nodes}


def evaluate(net, data, spec):
    """One-step and free-run metrics on an input/output record."""
    _, target = build_regressors(data, spec)
    one = predict_one_step(net, data, spec)
    out = {"one_step_vaf": vaf(one, target)}
    out["one_step_rmse"], out["one_step_rmse_db"] = rmse(one, target)
    m = spec.max_lag
    try:
        sim = simulate_free_run(net, data.u, data.y[:m], spec)
    except NumericOverflow as exc:
        out.update(free_run_vaf=0.0, free_run_rmse=math.inf, free_run_rmse_db=math.inf,
                   free_run_error=str(exc))
    else:
        out["free_run_vaf"] = vaf(sim.y_sim[m:], data.y[m:])
        out["free_run_rmse"], out["free_run_rmse_db"] = rmse(sim.y_sim[m:], data.y[m:])
    out["n_neurons"] = net.n_nodes
    out["parameters"] = parameter_counts(net)
    return out


@dataclass
class RestartResult:
    index: int
    seed: int
    net: object
    state: object
    gcv: float
    score: float = math.nan
    metrics: dict = field(default_factory=dict)
    wall_time: float = 0.0


def _train_gcv(config, x, y, state):
    try:
        return gcv(state.net, x, y, config.neuron_cost)
    except EhhError:
        return math.inf


def train_restarts(config, x, y, restarts=10, seed=0, validation=None, callback=None):
    """Train ``restarts`` networks and pick the best.

    Parameters
    ----------
    config : TrainConfig
        ``config.seed`` is replaced by each restart's derived seed.
    x, y : ndarray
        Training regressors and targets.
    validation : callable, optional
        ``validation(net) -> (score, metrics)``; the restart with the highest
        score wins.  Without it the least training GCV wins.
    callback : callable, optional
        ``callback(restart_index, record)`` after every training cycle.

    Returns
    -------
    best : RestartResult
    results : list of RestartResult
        All completed restarts in order.  A restart that raises stops the
        loop; completed results are kept on the exception as ``partial``.
    """
    results = []
    for r, s in enumerate(restart_seeds(seed, restarts)):
        cfg = dataclasses.replace(config, seed=s)
        t0 = time.perf_counter()
        cb = None if callback is None else (lambda rec, r=r: callback(r, rec))
        try:
            net, state = train(cfg, x, y, callback=cb)
        except EhhError as exc:
            exc.partial = results
            raise
        res = RestartResult(r, s, net, state, _train_gcv(cfg, x, y, state))
        if validation is not None:
            res.score, res.metrics = validation(net)
        res.wall_time = time.perf_counter() - t0
        results.append(res)
    if validation is not None:
        best = max(results, key=lambda t: (t.score, -t.index))
    else:
        best = min(results, key=lambda t: (t.gcv, t.index))
    return best, results


def sweep_sizes(config, x, y, grid, seed=0):
    """Least-GCV ``(q, n_intermediate)`` pair from ``grid``.

    Each grid point trains once with the first restart seed; ``n_neurons``
    becomes ``n_inputs * q + n_intermediate``.  Returns the selected config
    and a table with one row per grid point.
    """
    n = x.shape[1]
    s = restart_seeds(seed, 1)[0]
    table = []
    best = None
    for q, extra in grid:
        cfg = dataclasses.replace(config, q=int(q), n_neurons=int(n * q + extra), seed=s)
        try:
            _, state = train(cfg, x, y)
            g = _train_gcv(cfg, x, y, state)
        except EhhError as exc:
            warnings.warn(f"grid point q={q}, +{extra} failed: {exc}")
            g = math.inf
        table.append({"q": int(q), "n_intermediate": int(extra),
                      "n_neurons": cfg.n_neurons, "gcv": g})
        if g < math.inf and (best is None or g < best[1]):
            best = (cfg, g)
    if best is None:
        raise ValueError("every grid point failed")
    return dataclasses.replace(best[0], seed=config.seed), table


def free_run_validation(data, spec):
    """Validation callable scoring free-run VAF on ``data``."""
    def score(net):
        m = evaluate(net, data, spec)
        return m["free_run_vaf"], m
    return score


def narx_meta(spec):
    return {"narx": spec.to_dict(), "regressors": spec.labels()}


def spec_from_meta(meta, default=None):
    if "narx" in meta:
        return NarxSpec(**meta["narx"])
    if default is None:
        raise ValueError("model has no NARX lag structure; pass one explicitly")
    return default

