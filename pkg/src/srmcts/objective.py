"""Loss, reward and constant fitting for candidate expressions.

The reward of a complete expression is ``1 / (1 + NRMSE)``, which lies in
(0, 1] for finite losses.  Expressions that evaluate to NaN or infinity
anywhere on the data get reward 0 so they are strictly dominated by every
valid expression.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import expr
from .errors import ZeroVarianceError

DEFAULT_FIT_BUDGET = 100


@dataclass
class Dataset:
    """Input matrix, targets and cached NRMSE denominator."""

    X: np.ndarray
    y: np.ndarray
    name: str = ""
    domain: tuple | None = None  # per-variable (low, high), for benchmarks

    columns: list = field(init=False, repr=False)
    y_mean: float = field(init=False, repr=False)
    ss_tot: float = field(init=False, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y row counts differ")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        self.X, self.y = X, y
        self.y_mean = float(y.mean())
        self.ss_tot = float(np.dot(y - self.y_mean, y - self.y_mean))
        if self.ss_tot <= 0.0:
            raise ZeroVarianceError(f"targets of {self.name or 'dataset'} are constant")
        self.columns = [np.ascontiguousarray(X[:, j]) for j in range(X.shape[1])]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitResult:
    constants: tuple
    loss: float
    reward: float
    evaluations_consumed: int


def nrmse(predictions, targets) -> float:
    """sqrt( sum (f(x_i)-y_i)^2 / sum (y_i - mean(y))^2 )."""
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    r = y - y.mean()
    denom = float(np.dot(r, r))
    if denom <= 0.0:
        raise ZeroVarianceError("targets are constant")
    e = p - y
    return float(np.sqrt(np.dot(e, e) / denom))


def r_squared(predictions, targets) -> float:
    """1 - SSR/SST, identically 1 - nrmse**2."""
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    r = y - y.mean()
    denom = float(np.dot(r, r))
    if denom <= 0.0:
        raise ZeroVarianceError("targets are constant")
    e = p - y
    return 1.0 - float(np.dot(e, e)) / denom


def reward(loss) -> float:
    """Map a loss to (0, 1]; non-finite losses (or None) map to 0."""
    if loss is None or not np.isfinite(loss):
        return 0.0
    return 1.0 / (1.0 + float(loss))


def fd_gradient(fun, x, step_scale: float = 1e-6, scheme: str = "central"):
    """Finite-difference gradient with per-coordinate step
    ``step_scale * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    f0 = fun(x) if scheme == "forward" else None
    for i in range(x.size):
        h = step_scale * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        if scheme == "central":
            xm = x.copy()
            xm[i] -= h
            g[i] = (fun(xp) - fun(xm)) / (2.0 * h)
        else:
            g[i] = (fun(xp) - f0) / h
    return g


def _ssr_for(tokens, constants, data: Dataset):
    pred = expr.eval_tokens(tokens, constants, data.columns, data.n)
    if pred is None:
        return None
    e = pred - data.y
    return float(np.dot(e, e))


def score_tokens(tokens, data: Dataset, fit_budget: int = DEFAULT_FIT_BUDGET,
                 memo: dict | None = None):
    """Score a complete token sequence: fit constants if any, return
    ``(reward, loss, constants)``.  ``loss`` is inf for invalid expressions.

    ``memo`` caches results by token sequence; a hit skips the fit but the
    caller's evaluation budget still counts one expression evaluation.
    """
    if memo is not None:
        hit = memo.get(tokens)
        if hit is not None:
            return hit
    n_const = tokens.count(expr.CONST) if isinstance(tokens, (bytes, bytearray)) \
        else sum(1 for t in tokens if t == expr.CONST)
    if n_const == 0:
        ssr = _ssr_for(tokens, (), data)
        if ssr is None:
            out = (0.0, float("inf"), ())
        else:
            loss = float(np.sqrt(ssr / data.ss_tot))
            out = (reward(loss), loss, ())
    else:
        constants, ssr, _ = _fit_tokens(tokens, n_const, data, fit_budget)
        if ssr is None:
            out = (0.0, float("inf"), constants)
        else:
            loss = float(np.sqrt(ssr / data.ss_tot))
            out = (reward(loss), loss, constants)
    if memo is not None:
        memo[tokens] = out
    return out


def _fit_tokens(tokens, n_const: int, data: Dataset, budget: int):
    """Quasi-Newton fit of the constant vector from an all-ones start.

    Minimises the sum of squared residuals with central finite-difference
    gradients (step 1e-6 * max(1, |c|)); single start, at most ``budget``
    iterations.  Returns (constants, ssr or None, objective evaluations).
    """
    counter = [0]

    def ssr_of(c):
        counter[0] += 1
        v = _ssr_for(tokens, c, data)
        return np.inf if v is None else v

    def grad(c):
        return fd_gradient(ssr_of, c, step_scale=1e-6, scheme="central")

    x0 = np.ones(n_const)
    f0 = ssr_of(x0)
    if not np.isfinite(f0):
        return tuple(x0), None, counter[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = optimize.minimize(ssr_of, x0, jac=grad, method="BFGS",
                                options={"maxiter": budget})
    # Never accept a point worse than the starting one.
    if np.isfinite(res.fun) and res.fun <= f0:
        best_x, best_f = res.x, float(res.fun)
    else:
        best_x, best_f = x0, f0
    return tuple(float(c) for c in best_x), best_f, counter[0]


def fit_constants(tree: expr.Expr, data: Dataset,
                  budget: int = DEFAULT_FIT_BUDGET) -> FitResult:
    """Fit a tree's constant placeholders on the dataset.

    Trees without constants are evaluated directly (one evaluation).
    The returned loss is the NRMSE at the fitted constants; non-finite
    evaluation anywhere yields reward 0.
    """
    tokens = expr.encode_preorder(tree)
    n_const = tokens.count(expr.CONST)
    if n_const == 0:
        ssr = _ssr_for(tokens, (), data)
        if ssr is None:
            return FitResult((), float("inf"), 0.0, 1)
        loss = float(np.sqrt(ssr / data.ss_tot))
        return FitResult((), loss, reward(loss), 1)
    constants, ssr, used = _fit_tokens(tokens, n_const, data, budget)
    if ssr is None:
        return FitResult(constants, float("inf"), 0.0, used)
    loss = float(np.sqrt(ssr / data.ss_tot))
    return FitResult(constants, loss, reward(loss), used)
