"""Generalized cross-validation with a per-neuron complexity cost."""
import numpy as np

from .errors import Saturated
from .graph import kept_nodes
from .network import data_matrix


def numerical_rank(z):
    """Column rank of ``z`` from its singular values (numpy's default cutoff)."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return 0
    return int(np.linalg.matrix_rank(z))


def gcv_score(rss, n_samples, rank, n_neurons, d=3.0):
    """``RSS / (N (1 - C/N)^2)`` with ``C = rank + d * n_neurons``."""
    c = rank + d * n_neurons
    if c >= n_samples:
        raise Saturated(f"complexity {c:g} >= sample count {n_samples}")
    return rss / (n_samples * (1.0 - c / n_samples) ** 2)


def gcv(net, x_raw, y, d=3.0, weights=None):
    """GCV of ``net`` (or of ``weights`` on its structure) on raw data.

    Neurons removed by pruning do not count towards the complexity.
    """
    if weights is not None:
        net = net.with_weights(weights)
    y = np.asarray(y, dtype=float)
    z = data_matrix(net, x_raw)
    resid = y - z @ net.weights
    keep = kept_nodes(net)
    rank = numerical_rank(z[:, np.concatenate([[0], keep + 1])])
    return gcv_score(float(resid @ resid), y.size, rank, keep.size, d)
