"""NARX regressors, simulation, metrics and benchmark data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientData, MissingColumn, NumericOverflow, ParseError,
                     SpecMismatch, ZeroVariance)

OVERFLOW_GUARD = 1e6


@dataclass(frozen=True)
class NarxSpec:
    """Lag structure ``[y(k-1)..y(k-n_b), u(k), u(k-1)..u(k-n_a)]``.

    With ``current_input=False`` the ``u(k)`` term is left out.
    """

    n_b: int
    n_a: int
    current_input: bool = True

    def __post_init__(self):
        if self.n_b < 1 or self.n_a < 0:
            raise ValueError("need n_b >= 1 and n_a >= 0")
        if not self.current_input and self.n_a == 0 and self.n_b == 0:
            raise ValueError("empty regressor")

    @property
    def input_lags(self):
        return list(range(0 if self.current_input else 1, self.n_a + 1))

    @property
    def dim(self):
        return self.n_b + len(self.input_lags)

    @property
    def max_lag(self):
        return max(self.n_b, self.n_a)

    def labels(self):
        ys = [f"y(k-{i})" for i in range(1, self.n_b + 1)]
        us = ["u(k)" if i == 0 else f"u(k-{i})" for i in self.input_lags]
        return ys + us

    def to_dict(self):
        return {"n_b": self.n_b, "n_a": self.n_a, "current_input": self.current_input}


NARENDRA_LI_SPEC = NarxSpec(n_b=3, n_a=3, current_input=False)
BOUC_WEN_SPEC = NarxSpec(n_b=15, n_a=14, current_input=True)


@dataclass
class IoData:
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(-1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.u.size != self.y.size:
            raise ValueError(f"u has {self.u.size} samples, y has {self.y.size}")

    def __len__(self):
        return self.u.size


@dataclass
class SimResult:
    y_sim: np.ndarray
    regressors: np.ndarray
    start: int
    metrics: dict = field(default_factory=dict)


def _regressor(y, u, k, spec):
    row = [y[k - i] for i in range(1, spec.n_b + 1)]
    row += [u[k - i] for i in spec.input_lags]
    return row


def build_regressors(data, spec):
    """Regressor matrix and targets for ``k = max_lag .. N-1`` (0-based)."""
    n = len(data)
    m = spec.max_lag
    if n <= m:
        raise InsufficientData(f"{n} samples, need more than {m}")
    cols = [data.y[m - i:n - i] for i in range(1, spec.n_b + 1)]
    cols += [data.u[m - i:n - i] for i in spec.input_lags]
    return np.column_stack(cols), data.y[m:].copy()


def _check(model, spec):
    if model.n_inputs != spec.dim:
        raise SpecMismatch(f"model takes {model.n_inputs} inputs, regressor has {spec.dim}")


def predict_one_step(model, data, spec):
    """One-step-ahead predictions from measured lags, for ``k >= max_lag``."""
    _check(model, spec)
    phi, _ = build_regressors(data, spec)
    return model.predict(phi)


def simulate_free_run(model, u, seed_outputs, spec, guard=OVERFLOW_GUARD):
    """Simulate with output lags taken from the model's own past outputs.

    ``seed_outputs`` provides ``y`` for the first ``spec.max_lag`` steps.
    """
    _check(model, spec)
    u = np.asarray(u, dtype=float).reshape(-1)
    seed = np.asarray(seed_outputs, dtype=float).reshape(-1)
    m = spec.max_lag
    if seed.size < m:
        raise InsufficientData(f"need {m} seed outputs, got {seed.size}")
    n = u.size
    y = np.zeros(n)
    y[:min(m, n)] = seed[:min(m, n)]
    phis = np.empty((max(n - m, 0), spec.dim))
    # bind the node-evaluation pieces once; the loop runs per time step
    norm = model.normalizer
    scale = norm.hi - norm.lo
    w0, w = model.weights[0], model.weights[1:]
    for k in range(m, n):
        phi = _regressor(y, u, k, spec)
        phis[k - m] = phi
        xn = (phis[k - m] - norm.lo) / scale
        val = float(w0 + model.hidden_outputs(xn[None, :])[0] @ w)
        if not abs(val) <= guard:
            raise NumericOverflow(k, val, guard)
        y[k] = val
    return SimResult(y, phis, m)


def vaf(predicted, actual):
    """Variance accounted for, ``max(0, 1 - var(pred - y) / var(y))``."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape or actual.size < 2:
        raise ValueError("need two equal-length sequences of at least 2 samples")
    vy = float(np.var(actual))
    if vy == 0.0:
        raise ZeroVariance("actual output has zero variance")
    return max(0.0, 1.0 - float(np.var(predicted - actual)) / vy)


def rmse(predicted, actual):
    """Root mean square error and its dB value ``20 log10(rmse)``.

    A perfect fit reports ``-inf`` dB.
    """
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape or actual.size < 1:
        raise ValueError("need two equal-length non-empty sequences")
    e = float(np.sqrt(np.mean((predicted - actual) ** 2)))
    db = 20.0 * math.log10(e) if e > 0 else -math.inf
    return e, db


# -- Narendra-Li benchmark ---------------------------------------------------------

def narendra_li_simulate(u):
    """Noise-free output of the Narendra-Li system from zero initial state.

    ``y[k]`` is read from the state before ``u[k]`` is applied.
    """
    u = np.asarray(u, dtype=float)
    y = np.empty(u.size)
    x1 = x2 = 0.0
    for k, uk in enumerate(u):
        y[k] = x1 / (1 + 0.5 * math.sin(x2)) + x2 / (1 + 0.5 * math.sin(x1))
        x1, x2 = (
            (x1 / (1 + x1 * x1) + 1) * math.sin(x2),
            x2 * math.cos(x2) + x1 * math.exp(-(x1 * x1 + x2 * x2) / 8)
            + uk ** 3 / (1 + uk * uk + 0.5 * math.cos(x1 + x2)),
        )
    return y


def narendra_li_test_input(n=200):
    k = np.arange(1, n + 1)
    return np.sin(2 * np.pi * k / 10) + np.sin(2 * np.pi * k / 25)


def narendra_li_generate(n_train=2000, noise_variance=0.1, rng=None, n_test=200,
                         test_noise=False):
    """Training and test records for the Narendra-Li benchmark.

    Training input is i.i.d. uniform on [-2, 2] with Gaussian output noise of
    the given variance.  The test input is the two-sine signal; its output is
    noise-free unless ``test_noise`` is set.
    """
    rng = np.random.default_rng(rng)
    u = rng.uniform(-2.0, 2.0, n_train)
    sd = math.sqrt(noise_variance)
    y = narendra_li_simulate(u) + sd * rng.standard_normal(n_train)
    u_test = narendra_li_test_input(n_test)
    y_test = narendra_li_simulate(u_test)
    if test_noise:
        y_test = y_test + sd * rng.standard_normal(n_test)
    return IoData(u, y), IoData(u_test, y_test)


# -- CSV -----------------------------------------------------------------------

def _parse_row(row, line):
    out = []
    for cell in row:
        try:
            out.append(float(cell))
        except ValueError:
            raise ParseError(line, f"non-numeric cell {cell!r}") from None
    return out


def load_csv(path, u_col=0, y_col=1, header=None):
    """Read ``u`` and ``y`` columns from a comma-separated file.

    ``header=None`` treats the first row as a header when none of its cells
    parse as numbers.
    """
    rows = []
    with open(path, newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if line == 1 and header is not False:
                if header or not any(_is_number(c) for c in row):
                    continue
            vals = _parse_row(row, line)
            for c in (u_col, y_col):
                if c >= len(vals):
                    raise MissingColumn(f"line {line}: no column {c}")
            rows.append((vals[u_col], vals[y_col]))
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return IoData(arr[:, 0], arr[:, 1])


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_csv(path, data, header=("u", "y")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for u, y in zip(data.u, data.y):
            w.writerow([repr(float(u)), repr(float(y))])
