"""Structural views of the hidden-layer DAG.

The parent-pair list in :class:`~ehhnet.network.EhhNetwork` is the source of
truth; adjacency and interaction matrices are derived sparse views.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ResourceBound
from .network import EhhNetwork, NormalizationParams, SourceNode


@dataclass(frozen=True)
class Violation:
    node: int
    rule: str
    message: str

    def __str__(self):
        return f"node {self.node}: {self.rule}: {self.message}"


def adjacency_matrix(net):
    """Sparse ``(M, M)`` matrix with a 1 at ``(i, j)`` for each edge i -> j."""
    m, nd = net.n_nodes, net.n_sources
    rows, cols = [], []
    for t, (a, b) in enumerate(net.parents):
        rows += [a, b]
        cols += [nd + t, nd + t]
    data = np.ones(len(rows), dtype=np.int8)
    adj = sp.coo_array((data, (rows, cols)), shape=(m, m)).tocsc()
    adj.sum_duplicates()
    adj.data[:] = 1
    return adj


def from_adjacency(adj, normalizer, sources, weights=None):
    """Rebuild a network from an adjacency matrix with two parents per column."""
    adj = sp.csc_array(adj)
    nd = len(sources)
    parents = []
    for j in range(nd, adj.shape[1]):
        rows = np.sort(adj.indices[adj.indptr[j]:adj.indptr[j + 1]])
        if rows.size != 2:
            raise ValueError(f"column {j} has {rows.size} ones, expected 2")
        parents.append((int(rows[0]), int(rows[1])))
    return EhhNetwork(normalizer, sources, parents, weights)


def check_adjacency(adj, n_sources):
    """Structural violations of a raw adjacency matrix."""
    adj = sp.csc_array(adj)
    out = []
    for j in range(adj.shape[1]):
        rows = adj.indices[adj.indptr[j]:adj.indptr[j + 1]]
        vals = adj.data[adj.indptr[j]:adj.indptr[j + 1]]
        rows = rows[vals != 0]
        if j < n_sources:
            if rows.size:
                out.append(Violation(j, "source-column",
                                     f"source column has {rows.size} incoming edges"))
            continue
        if rows.size != 2:
            out.append(Violation(j, "column-degree",
                                 f"column has {rows.size} ones, expected 2"))
        for i in rows:
            if i >= j:
                out.append(Violation(j, "upper-triangular",
                                     f"edge from node {i} to node {j} with {i} >= {j}"))
    return out


def validate(net, flag_duplicates=False):
    """List every rule the network breaks; empty means valid.

    Duplicate min-form sets are legal in general networks and are only
    reported when ``flag_duplicates`` is set.
    """
    out = []
    n = net.n_inputs
    for j, s in enumerate(net.sources):
        if not 0 <= s.var < n:
            out.append(Violation(j, "variable-range", f"variable {s.var} not in [0, {n})"))
        if not 0.0 <= s.offset < 1.0:
            out.append(Violation(j, "offset-range", f"offset {s.offset!r} not in [0, 1)"))
    if out:
        return out
    m = net.n_nodes
    for t, (a, b) in enumerate(net.parents):
        j = net.n_sources + t
        if a == b:
            out.append(Violation(j, "column-degree", f"both parents are node {a}"))
        if not (0 <= a < j and 0 <= b < j):
            out.append(Violation(j, "rule1", f"parents ({a}, {b}) must precede node {j}"))
    if any(v.rule == "rule1" for v in out):
        if all(0 <= p < m for pair in net.parents for p in pair):
            out.extend(v for v in check_adjacency(adjacency_matrix(net), net.n_sources)
                       if v.rule != "column-degree")
        return out
    out.extend(v for v in check_adjacency(adjacency_matrix(net), net.n_sources)
               if v.rule != "column-degree")
    masks = net.var_masks
    for t, (a, b) in enumerate(net.parents):
        j = net.n_sources + t
        if masks[a] & masks[b]:
            out.append(Violation(j, "rule2",
                                 f"parents {a} and {b} share input variables"))
    if flag_duplicates and not out:
        seen = {}
        for j, k in enumerate(net.source_masks):
            if k in seen:
                out.append(Violation(j, "duplicate",
                                     f"same min-form set as node {seen[k]}"))
            else:
                seen[k] = j
    return out


def interaction_matrix(adj, n_sources):
    """Source-to-node reachability from an adjacency matrix.

    Columns are processed in index order.  Because every parent precedes its
    child, a parent's column is already reduced to its source ancestors when
    the child is visited, so one backward step per parent suffices.
    """
    adj = sp.csc_array(adj)
    m = adj.shape[0]
    reach = []
    rows, cols = [], []
    for j in range(m):
        acc = set()
        for i in adj.indices[adj.indptr[j]:adj.indptr[j + 1]]:
            i = int(i)
            if i < n_sources:
                acc.add(i)
            else:
                acc |= reach[i]
        reach.append(acc)
        rows.extend(acc)
        cols.extend([j] * len(acc))
    data = np.ones(len(rows), dtype=np.int8)
    return sp.csr_array(sp.coo_array((data, (rows, cols)), shape=(m, m)))


def kept_nodes(net):
    """Indices of nodes that survive pruning, ascending.

    A node is removed once it has zero output weight and no outgoing edge
    to a surviving node; removal repeats until nothing changes.
    """
    m = net.n_nodes
    nd = net.n_sources
    out_deg = np.zeros(m, dtype=int)
    for a, b in net.parents:
        out_deg[a] += 1
        out_deg[b] += 1
    w = net.weights[1:]
    alive = np.ones(m, dtype=bool)
    # Children always have larger indices, so one reverse sweep reaches the fixpoint.
    for j in range(m - 1, -1, -1):
        if out_deg[j] == 0 and w[j] == 0.0:
            alive[j] = False
            if j >= nd:
                a, b = net.parents[j - nd]
                out_deg[a] -= 1
                out_deg[b] -= 1
    return np.flatnonzero(alive)


def subnetwork(net, keep):
    """Restrict ``net`` to nodes ``keep`` (must be closed under parents)."""
    keep = [int(k) for k in keep]
    nd = net.n_sources
    remap = {old: new for new, old in enumerate(keep)}
    sources = [net.sources[k] for k in keep if k < nd]
    parents = [tuple(remap[p] for p in net.parents[k - nd]) for k in keep if k >= nd]
    weights = np.concatenate([[net.weights[0]], net.weights[1:][keep]])
    return replace(net, sources=sources, parents=parents, weights=weights)


def prune(net):
    """Drop neurons that reach neither the output nor another neuron."""
    keep = kept_nodes(net)
    if keep.size == net.n_nodes:
        return net
    return subnetwork(net, keep)


def full_connection_network(n, q, cap=200_000):
    """Network holding every min-combination of sources on distinct variables.

    Sources use offsets ``0, 1/q, ..., (q-1)/q`` on each input.  Intermediates
    are added level by level (2 variables, then 3, ...), each as the min of a
    source on its lowest variable and the existing node covering the rest.
    Equal min-form sets appear once.  Weights are zero.
    """
    if n < 1 or q < 1:
        raise ValueError("need n >= 1 and q >= 1")
    if (q + 1) ** n > cap:
        raise ResourceBound(f"(q+1)^n = {(q + 1) ** n} exceeds cap {cap}")
    offsets = [k / q for k in range(q)]
    sources = [SourceNode(v, b) for v in range(n) for b in offsets]
    src_index = {(v, k): v * q + k for v in range(n) for k in range(q)}
    # (variables, offset choices) -> node index
    index = {((v,), (k,)): src_index[v, k] for v in range(n) for k in range(q)}
    parents = []
    for r in range(2, n + 1):
        for vars_ in itertools.combinations(range(n), r):
            for ks in itertools.product(range(q), repeat=r):
                head = src_index[vars_[0], ks[0]]
                tail = index[vars_[1:], ks[1:]]
                index[vars_, ks] = len(sources) + len(parents)
                parents.append((min(head, tail), max(head, tail)))
    return EhhNetwork(NormalizationParams.identity(n), sources, parents)
