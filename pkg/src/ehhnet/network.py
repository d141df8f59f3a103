"""Efficient hinging hyperplanes network: representation and evaluation.

Hidden nodes are numbered ``0 .. M-1``.  The first ``n_sources`` are source
nodes computing ``max(0, x[v] - beta)`` on one normalized input; every later
node takes the ``min`` of two earlier nodes.  The output is

    f(x) = weights[0] + sum_k weights[k + 1] * nn_k(x)

so ``weights`` lines up with the columns of :func:`data_matrix`, whose
column 0 is the constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ConstantDimension, DimensionMismatch


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    """Per-dimension affine map of raw inputs onto ``[0, 1]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("lo and hi must have the same length")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self):
        return self.lo.size

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), np.ones(n))

    def apply(self, x):
        return apply_normalizer(self, x)


def fit_normalizer(raw):
    """Fit min/max normalization to the rows of ``raw`` (shape ``(N_s, n)``)."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.shape[0] < 2:
        raise ValueError("need at least two samples to fit a normalizer")
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    for i in np.flatnonzero(~(hi > lo)):
        raise ConstantDimension(int(i))
    return NormalizationParams(lo, hi)


def apply_normalizer(params, x):
    """Map raw inputs (vector or rows of a matrix) with ``params``.

    Inputs outside the training range are extrapolated, not clipped.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.n,):
        raise DimensionMismatch(
            f"expected trailing dimension {params.n}, got shape {x.shape}")
    return (x - params.lo) / (params.hi - params.lo)


@dataclass(frozen=True)
class SourceNode:
    var: int
    offset: float


def eval_source(node, x):
    """Hinge output ``max(0, x[var] - offset)`` for normalized ``x``."""
    return max(0.0, float(x[node.var]) - node.offset)


@dataclass(frozen=True, eq=False)
class EhhNetwork:
    normalizer: NormalizationParams
    sources: tuple
    parents: tuple = ()
    weights: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(
            s if isinstance(s, SourceNode) else SourceNode(int(s[0]), float(s[1]))
            for s in self.sources))
        object.__setattr__(self, "parents", tuple(
            (int(a), int(b)) for a, b in self.parents))
        m = len(self.sources) + len(self.parents)
        if self.weights is None:
            w = np.zeros(m + 1)
        else:
            w = np.array(self.weights, dtype=float).reshape(-1)
            if w.size != m + 1:
                raise DimensionMismatch(f"need {m + 1} weights, got {w.size}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_inputs(self):
        return self.normalizer.n

    @property
    def n_sources(self):
        return len(self.sources)

    @property
    def n_nodes(self):
        return len(self.sources) + len(self.parents)

    @property
    def bias(self):
        return float(self.weights[0])

    def with_weights(self, weights):
        return replace(self, weights=weights)

    def node_parents(self, j):
        return self.parents[j - self.n_sources]

    @cached_property
    def var_masks(self):
        """Bitmask of input variables reaching each node."""
        masks = [1 << s.var for s in self.sources]
        for a, b in self.parents:
            masks.append(masks[a] | masks[b])
        return masks

    @cached_property
    def source_masks(self):
        """Bitmask of source nodes reaching each node (the min-form index set)."""
        masks = [1 << i for i in range(self.n_sources)]
        for a, b in self.parents:
            masks.append(masks[a] | masks[b])
        return masks

    @cached_property
    def _source_arrays(self):
        var = np.array([s.var for s in self.sources], dtype=np.intp)
        off = np.array([s.offset for s in self.sources], dtype=float)
        return var, off

    def hidden_outputs(self, xn):
        """Node outputs for normalized rows ``xn``; shape ``(N, M)``."""
        xn = np.asarray(xn, dtype=float)
        if xn.ndim != 2 or xn.shape[1] != self.n_inputs:
            raise DimensionMismatch(
                f"expected (N, {self.n_inputs}) inputs, got shape {xn.shape}")
        var, off = self._source_arrays
        out = np.empty((xn.shape[0], self.n_nodes), order="F")
        out[:, :self.n_sources] = np.maximum(0.0, xn[:, var] - off)
        j = self.n_sources
        for a, b in self.parents:
            np.minimum(out[:, a], out[:, b], out=out[:, j])
            j += 1
        return out

    def node_outputs(self, x_raw):
        """Node outputs for raw input rows; shape ``(N, M)``."""
        x_raw = np.asarray(x_raw, dtype=float)
        if x_raw.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D sample matrix, got {x_raw.shape}")
        return self.hidden_outputs(self.normalizer.apply(x_raw))

    def predict(self, x_raw):
        """Network output for each raw input row."""
        h = self.node_outputs(x_raw)
        return self.weights[0] + h @ self.weights[1:]

    def __call__(self, x_raw):
        return forward(self, x_raw)[1]

    def node_label(self, j):
        if j < self.n_sources:
            return f"D{j + 1}"
        return f"C{j - self.n_sources + 1}"


def forward(net, x_raw):
    """Evaluate one raw input vector.

    Returns
    -------
    nodes : ndarray of shape (M,)
        Output of every hidden node, in index order.
    f : float
        Network output.
    """
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.shape != (net.n_inputs,):
        raise DimensionMismatch(
            f"expected input of length {net.n_inputs}, got shape {x_raw.shape}")
    nodes = net.hidden_outputs(net.normalizer.apply(x_raw)[None, :])[0]
    return nodes, float(net.weights[0] + nodes @ net.weights[1:])


def data_matrix(net, samples):
    """``[1, nn_1(x), ..., nn_M(x)]`` for each raw sample row."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != net.n_inputs:
        if samples.size == 0:
            return np.ones((0, net.n_nodes + 1))
        raise DimensionMismatch(
            f"expected (N, {net.n_inputs}) samples, got shape {samples.shape}")
    z = np.empty((samples.shape[0], net.n_nodes + 1), order="F")
    z[:, 0] = 1.0
    z[:, 1:] = net.node_outputs(samples)
    return z


def _bits(mask):
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def min_form(net, j):
    """Source nodes ``K_j`` with ``nn_j(x) == min_{k in K_j} nn_k(x)``."""
    return frozenset(_bits(net.source_masks[j]))


def variable_set(net, j):
    """Input variables (0-based) that node ``j`` depends on."""
    return frozenset(_bits(net.var_masks[j]))


def linear_network(normalizer, weights):
    """Network with one zero-offset source per input and no intermediates.

    On normalized inputs in ``[0, 1]`` it computes ``w0 + sum_i w_i x_i``.
    """
    n = normalizer.n
    return EhhNetwork(normalizer, [SourceNode(i, 0.0) for i in range(n)], (),
                      weights)
