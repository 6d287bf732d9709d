"""Gap estimators and the rate bounds of the stochastic Frank-Wolfe analysis.

The functions here are pure: they evaluate closed-form bounds, the exact and
stochastic Frank-Wolfe gaps, and exact conditional expectations by
enumeration. :mod:`sfwkit.verify` uses them to check the bounds numerically.
"""
import math
from dataclasses import dataclass

import numpy as np

from .constraints import CapacityError, UndefinedStatisticError, diameter, kappa
from .problem import grad_table, objective
from .solvers import refresh_sfw


@dataclass(frozen=True)
class RecurrenceParams:
    """Parameters of u_t <= rho (u_{t-1} + K / (t + 1))."""

    rho: float
    K: float
    u0: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not self.K > 0.0:
            raise ValueError("K must be positive")
        if self.u0 < 0.0:
            raise ValueError("u0 must be non-negative")


@dataclass(frozen=True)
class RateConstants:
    L: float
    D1: float
    D2: float
    Dinf: float
    n: int
    H0: float = 0.0
    eps0: float = 0.0

    def __post_init__(self):
        for name in ("L", "D1", "D2", "Dinf", "H0", "eps0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")


def h_error(alpha, grad):
    """||alpha - grad||_1."""
    alpha = np.asarray(alpha, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if alpha.shape != grad.shape:
        raise ValueError(f"length mismatch: {alpha.shape} vs {grad.shape}")
    return float(np.sum(np.abs(alpha - grad)))


def exact_gap(problem, cset, w):
    """max over s in the set of <grad f(Xw), X(w - s)>."""
    w = np.asarray(w, dtype=np.float64)
    if not cset.contains(w):
        raise ValueError("exact_gap needs a feasible point")
    r_true = problem.X.rmatvec(grad_table(problem, w))
    return float(r_true @ w) - cset.min_value(r_true)


def stochastic_gap(state, cset, w=None):
    """max over s of <alpha, X(w - s)>, computed from the maintained r = X^T alpha.

    ``w`` defaults to the state's current iterate; pass w_{t-1} to match the
    per-iteration definition.
    """
    w = state.w if w is None else np.asarray(w, dtype=np.float64)
    return float(state.r @ w) - cset.min_value(state.direction)


def gap_discrepancy_bound(Dinf, H):
    """Upper bound D_inf * H on |exact gap - stochastic gap|."""
    if Dinf < 0 or H < 0:
        raise ValueError("Dinf and H must be non-negative")
    return Dinf * H


def recurrence_worst_case(p, t_max):
    """u_0..u_{t_max} with u_t = rho (u_{t-1} + K/(t+1)) taken with equality."""
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    u = np.empty(t_max + 1)
    u[0] = p.u0
    for t in range(1, t_max + 1):
        u[t] = p.rho * (u[t - 1] + p.K / (t + 1))
    return u


def lemma3_bound(p, t):
    """K (rho/(1-rho) * 2/(t+2) + rho^(t/2) log t) + rho^t u0, for t >= 2.

    ``t`` may be an integer array.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 2):
        raise ValueError("the bound is stated for t >= 2")
    log_rho = math.log(p.rho)
    out = p.K * (p.rho / (1.0 - p.rho) * 2.0 / (t + 2.0) + np.exp(0.5 * t * log_rho) * np.log(t))
    out = out + np.exp(t * log_rho) * p.u0
    return float(out) if out.ndim == 0 else out


def expected_h_bound(L, D1, n, H0, t, batch_size=1):
    """Bound on E H_t from the recurrence with rho = 1 - b/n and K = 2 L D1 / n."""
    if n < 2 or batch_size >= n:
        raise ValueError("needs n >= 2 and batch size < n")
    return lemma3_bound(RecurrenceParams(1.0 - batch_size / n, 2.0 * L * D1 / n, H0), t)


def taylor_constants(n, t):
    """(B_t, C_t): partial sums of (k+1) rho^(k/2) log k and (k+1) rho^k, rho = 1 - 1/n."""
    if n < 2 or t < 1:
        raise ValueError("needs n >= 2 and t >= 1")
    k = np.arange(1, t + 1, dtype=np.float64)
    log_rho = math.log1p(-1.0 / n)
    B = float(np.sum((k + 1.0) * np.exp(0.5 * k * log_rho) * np.log(k)))
    C = float(np.sum((k + 1.0) * np.exp(k * log_rho)))
    return B, C


def theorem1_bound(c, t):
    """Expected-suboptimality bound of SFW (unit batch, gamma_t = 2/(t+2)), t >= 2."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 2):
        raise ValueError("the bound is stated for t >= 2")
    n = c.n
    lead = 2.0 * c.L * (c.D2**2 + 4.0 * (n - 1) * c.D1 * c.Dinf) / n
    denom = (t + 1.0) * (t + 2.0)
    tail = 2.0 * c.eps0 + (2.0 * c.Dinf * c.H0 + 64.0 * c.L * c.D1 * c.Dinf) * n**2
    out = lead * t / denom + tail / denom
    return float(out) if out.ndim == 0 else out


def fw_rate_bound(L, D2, t):
    """2 L D2^2 / t: deterministic FW suboptimality after t derivative evaluations."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 1):
        raise ValueError("t must be >= 1")
    out = 2.0 * L * D2**2 / t
    return float(out) if out.ndim == 0 else out


def sufficient_decrease_rhs(eps_prev, gamma, L, D2, Dinf, n, H):
    """Right-hand side of the one-step bound on eps_t for an arbitrary table."""
    return (1.0 - gamma) * eps_prev + gamma**2 * L * D2**2 / (2.0 * n) + gamma * Dinf * H


def expected_h_enumeration(state, problem):
    """E_t H_t for a unit batch, averaging over all n equally likely samples.

    Each candidate index is applied to a copy of the state through the
    solver's own refresh, so this checks the implementation rather than the
    algebra.
    """
    grad = grad_table(problem, state.w)
    total = 0.0
    for i in range(problem.n):
        trial = state.copy()
        refresh_sfw(trial, problem, [i])
        total += h_error(trial.alpha, grad)
    return total / problem.n


def problem_stats(problem, cset):
    """Constants entering the rate bounds: L, D_1, D_2, D_inf, kappa, n, d."""
    X = problem.X
    try:
        k = kappa(X)
    except UndefinedStatisticError:
        k = None
    return {
        "n": X.n,
        "d": X.d,
        "nnz": X.nnz,
        "loss": problem.loss.kind,
        "constraint": cset.spec,
        "L": problem.L,
        "D1": _diameter_or_none(cset, X, 1),
        "D2": _diameter_or_none(cset, X, 2),
        "Dinf": _diameter_or_none(cset, X, np.inf),
        "kappa": k,
        "kappa_over_n": None if k is None else k / X.n,
    }


def _diameter_or_none(cset, X, p):
    # brute force over l_inf-ball vertices is capped; report None beyond it
    try:
        return diameter(cset, X, p)
    except CapacityError:
        return None


def rate_constants(problem, cset, w0, f_star, alpha0=None):
    """RateConstants for a run started at ``w0`` with table ``alpha0`` (default 0)."""
    s = problem_stats(problem, cset)
    alpha0 = np.zeros(problem.n) if alpha0 is None else alpha0
    H0 = h_error(alpha0, grad_table(problem, w0))
    eps0 = max(0.0, objective(problem, w0) - f_star)
    return RateConstants(s["L"], s["D1"], s["D2"], s["Dinf"], problem.n, H0, eps0)
