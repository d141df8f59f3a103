"""ANOVA decomposition of a trained network.

Neurons are grouped by the set of input variables they depend on; each
group's weighted sum is one ANOVA function.  Importance is reported two
ways: the standard deviation of the function over the training inputs, and
the GCV of a least-squares refit with the group's neurons removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Saturated
from .gcv import gcv_score
from .network import data_matrix, variable_set


@dataclass
class AnovaEntry:
    variables: frozenset
    members: tuple
    sigma: float = math.nan
    gcv_removed: float = math.nan
    singular: bool = False

    @property
    def order(self):
        return len(self.variables)

    def label(self, names=None):
        vs = sorted(self.variables)
        if names is None:
            return ", ".join(f"x{v + 1}" for v in vs)
        return ", ".join(names[v] for v in vs)


@dataclass
class AnovaReport:
    bias: float
    entries: list = field(default_factory=list)

    def ranked(self):
        """Entries by decreasing sigma."""
        return sorted(self.entries, key=lambda e: -e.sigma)

    def top(self, k):
        return self.ranked()[:k]

    def find(self, variables):
        variables = frozenset(variables)
        for e in self.entries:
            if e.variables == variables:
                return e
        raise KeyError(variables)


def anova_decompose(net):
    """Group every neuron by its variable set (structure only)."""
    groups = {}
    for j in range(net.n_nodes):
        groups.setdefault(variable_set(net, j), []).append(j)
    keys = sorted(groups, key=lambda s: (len(s), sorted(s)))
    return AnovaReport(net.bias, [AnovaEntry(s, tuple(groups[s])) for s in keys])


def group_outputs(net, report, x_raw):
    """Value of each ANOVA function at each raw sample; shape ``(N, G)``."""
    h = net.node_outputs(x_raw)
    w = net.weights[1:]
    out = np.empty((h.shape[0], len(report.entries)))
    for g, e in enumerate(report.entries):
        idx = list(e.members)
        out[:, g] = h[:, idx] @ w[idx]
    return out


def anova_importance(net, x_raw, y, d=3.0):
    """Decompose ``net`` and score every group on the training data.

    ``sigma`` is the population standard deviation of the group function.
    ``gcv_removed`` is the GCV of an ordinary least-squares refit on the
    remaining columns; ``singular`` marks refits whose design was rank
    deficient (solved by pseudo-inverse).
    """
    y = np.asarray(y, dtype=float)
    report = anova_decompose(net)
    g = group_outputs(net, report, x_raw)
    z = data_matrix(net, x_raw)
    m = net.n_nodes
    for col, e in zip(g.T, report.entries):
        e.sigma = float(np.std(col))
        drop = set(e.members)
        cols = [0] + [j + 1 for j in range(m) if j not in drop]
        zr = z[:, cols]
        coef, _, rank, _ = np.linalg.lstsq(zr, y, rcond=None)
        resid = y - zr @ coef
        e.singular = rank < zr.shape[1]
        try:
            e.gcv_removed = gcv_score(float(resid @ resid), y.size, int(rank),
                                      len(cols) - 1, d)
        except Saturated:
            e.gcv_removed = math.inf
    return report
