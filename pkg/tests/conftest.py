import numpy as np
import pytest

from ehhnet.network import EhhNetwork, NormalizationParams, SourceNode

EXAMPLE_OFFSETS = (0.1, 0.2, 0.3, 0.4)

EXAMPLE_ADJ = np.array([
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 1],
    [0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0],
])

EXAMPLE_IR = np.array([
    [0, 0, 0, 0, 1, 1, 1, 1],
    [0, 0, 0, 0, 0, 0, 1, 1],
    [0, 0, 0, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 1, 0, 1],
] + [[0] * 8] * 4)


def four_input_network(weights=None):
    """Four sources on x1..x4 and C1=min(D1,D3), C2=min(D1,D4),
    C3=min(D2,C1), C4=min(D2,C2)."""
    sources = [SourceNode(i, b) for i, b in enumerate(EXAMPLE_OFFSETS)]
    parents = [(0, 2), (0, 3), (1, 4), (1, 5)]
    return EhhNetwork(NormalizationParams.identity(4), sources, parents, weights)


@pytest.fixture
def four_input():
    return four_input_network(np.arange(9, dtype=float) + 1.0)


def random_network(rng, n=None, q=None, n_inter=None, weights=True, max_tries=200):
    """Random valid network: disjoint-variable parents, unique min-form sets."""
    n = n or int(rng.integers(2, 6))
    q = q or int(rng.integers(1, 4))
    sources = [SourceNode(v, float(b)) for v in range(n)
               for b in np.sort(rng.uniform(0, 1, q))]
    nd = len(sources)
    n_inter = int(rng.integers(0, 3 * nd)) if n_inter is None else n_inter
    vsets = [frozenset([s.var]) for s in sources]
    ksets = [frozenset([i]) for i in range(nd)]
    parents = []
    for j in range(nd, nd + n_inter):
        for _ in range(max_tries):
            a, b = sorted(rng.choice(j, 2, replace=False).tolist())
            k = ksets[a] | ksets[b]
            if not vsets[a] & vsets[b] and k not in ksets:
                break
        else:
            break
        parents.append((a, b))
        vsets.append(vsets[a] | vsets[b])
        ksets.append(k)
    m = nd + len(parents)
    lo = rng.uniform(-3, 0, n)
    hi = lo + rng.uniform(0.5, 4, n)
    w = rng.standard_normal(m + 1) if weights else None
    return EhhNetwork(NormalizationParams(lo, hi), sources, parents, w)


def sample_inputs(net, rng, size=1000, margin=0.0):
    lo, hi = net.normalizer.lo, net.normalizer.hi
    span = hi - lo
    return rng.uniform(lo - margin * span, hi + margin * span, (size, net.n_inputs))


def cd_lasso(z, y, lam, penalize_intercept=True, sweeps=20000, tol=1e-15):
    """Cyclic coordinate descent on ||y - Z a||^2 + lam ||a||_1."""
    n, p = z.shape
    a = np.zeros(p)
    r = y.copy()
    col_sq = np.einsum("ij,ij->j", z, z)
    pen = np.full(p, lam)
    if not penalize_intercept:
        pen[0] = 0.0
    for _ in range(sweeps):
        delta = 0.0
        for k in range(p):
            if col_sq[k] == 0:
                continue
            rho = z[:, k] @ r + col_sq[k] * a[k]
            new = np.sign(rho) * max(abs(rho) - pen[k] / 2, 0.0) / col_sq[k]
            if new != a[k]:
                r -= z[:, k] * (new - a[k])
                delta = max(delta, abs(new - a[k]))
                a[k] = new
        if delta < tol:
            break
    return a


def random_problem(rng, n=200, p=31):
    z = np.column_stack([np.ones(n), np.maximum(0, rng.uniform(-0.5, 1, (n, p - 1)))])
    truth = np.where(rng.random(p) < 0.3, rng.standard_normal(p), 0.0)
    y = z @ truth + 0.1 * rng.standard_normal(n)
    return z, y
