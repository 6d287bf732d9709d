"""Stochastic and deterministic Frank-Wolfe solvers for finite sums.

Four methods share one state layout (iterate ``w``, gradient table ``alpha``
and aggregated direction ``r = X^T alpha``):

``sfw``
    constant batch-size stochastic Frank-Wolfe; each sampled coordinate of
    ``alpha`` is overwritten with the fresh ``f_i'(x_i^T w) / n``.
``fw``
    deterministic Frank-Wolfe; ``alpha`` is the full gradient table.
``mokhtari``
    momentum on the un-normalised derivative of the sampled coordinates.
``lufreund``
    derivatives taken at per-sample averaged arguments ``sigma``.

An iteration draws ``b`` distinct indices, refreshes those coordinates of
``alpha``, calls the linear minimization oracle once and takes one convex
step, so every method spends exactly ``b`` derivative evaluations per
iteration (``n`` for ``fw``).
"""
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.sparse.linalg import svds

from .constraints import VertexStep, lmo, project
from .numkit import ArgmaxTracker, ScaledVector, row_dot
from .problem import full_gradient, grad_table, objective

SOLVER_KINDS = ("sfw", "fw", "mokhtari", "lufreund")

# unit-batch indices are drawn from the generator in blocks of this size
_DRAW_BLOCK = 1024


class InvariantError(RuntimeError):
    """A solver state no longer satisfies its invariants."""


@dataclass(frozen=True)
class Schedule:
    """Step-size rules; ``n_batches`` is only used by ``lufreund``."""

    kind: str
    n_batches: int = 1

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.n_batches < 1:
            raise ValueError("n_batches must be >= 1")

    @classmethod
    def for_problem(cls, kind, n, batch_size=1):
        return cls(kind, max(1, n // batch_size))

    def step_size(self, t):
        """``(gamma_t, aux_t)``; aux is rho_t (mokhtari), delta_t (lufreund) or None."""
        if t < 1:
            raise ValueError("step sizes are defined for t >= 1")
        if self.kind in ("sfw", "fw"):
            return 2.0 / (t + 2.0), None
        if self.kind == "mokhtari":
            return 1.0 / (t + 1.0), (t + 1.0) ** (-2.0 / 3.0)
        nb = self.n_batches
        gamma = 2.0 * (2 * nb + t) / ((t + 1.0) * (4 * nb + t + 1.0))
        return gamma, 2.0 * nb / (2 * nb + t + 1.0)


def step_size(schedule, t):
    return schedule.step_size(t)


def sample_batch(rng, n, b):
    """``b`` distinct indices drawn uniformly from ``range(n)``."""
    if not 1 <= b <= n:
        raise ValueError(f"batch size {b} must lie in [1, {n}]")
    if b == 1:
        return np.array([rng.integers(n)])
    return rng.choice(n, size=b, replace=False)


@dataclass
class SolverState:
    """Mutable state of one solver run; owned by a single thread."""

    iterate: ScaledVector
    alpha: np.ndarray
    r: np.ndarray
    rng: np.random.Generator
    t: int = 0
    grad_calls: int = 0
    sigma: Optional[np.ndarray] = None
    tracker: Optional[ArgmaxTracker] = field(default=None, repr=False)

    @property
    def w(self):
        return self.iterate.to_array()

    @property
    def direction(self):
        """What the oracle consumes: the tracker when one is attached."""
        return self.r if self.tracker is None else self.tracker

    def copy(self):
        """Deep copy, including the random generator state."""
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        r = self.r.copy()
        return SolverState(
            iterate=self.iterate.copy(),
            alpha=self.alpha.copy(),
            r=r,
            rng=rng,
            t=self.t,
            grad_calls=self.grad_calls,
            sigma=None if self.sigma is None else self.sigma.copy(),
            tracker=None if self.tracker is None else ArgmaxTracker(r),
        )


def init_state(problem, cset, kind="sfw", seed=0, w0=None, alpha0=None, use_tracker=None):
    """Initial state: ``alpha_0 = 0`` and ``r_0 = 0`` unless ``alpha0`` is given.

    ``w0`` defaults to the oracle's answer for a zero direction, a vertex of
    the set. ``use_tracker=None`` attaches an :class:`ArgmaxTracker` for l1
    balls over sparse data, where it keeps the oracle at O(support) cost.
    """
    if kind not in SOLVER_KINDS:
        raise ValueError(f"unknown solver kind {kind!r}")
    n, d = problem.n, problem.d
    if w0 is None:
        w0 = lmo(cset, np.zeros(d)).to_dense(d)
    w0 = np.array(w0, dtype=np.float64)
    if w0.shape != (d,):
        raise ValueError(f"w0 must have length {d}")
    if not cset.contains(w0):
        raise ValueError("initial iterate is not feasible")
    if alpha0 is None:
        alpha = np.zeros(n)
        r = np.zeros(d)
    else:
        alpha = np.array(alpha0, dtype=np.float64)
        r = problem.X.rmatvec(alpha)
    if use_tracker is None:
        use_tracker = cset.kind == "l1_ball" and problem.X.is_sparse
    tracker = ArgmaxTracker(r) if use_tracker and cset.kind == "l1_ball" else None
    sigma = problem.X.matvec(w0) if kind == "lufreund" else None
    return SolverState(
        iterate=ScaledVector(w0),
        alpha=alpha,
        r=r,
        rng=np.random.default_rng(seed),
        sigma=sigma,
        tracker=tracker,
    )


class StepInfo(NamedTuple):
    vertex: object
    gamma: float
    stochastic_gap: Optional[float]


def _check_incoming(state, problem, cset, batch):
    if not cset.contains(state.w):
        raise InvariantError("incoming iterate is not feasible")
    if batch is not None:
        b = np.asarray(batch)
        if b.size == 0 or b.min() < 0 or b.max() >= problem.n:
            raise IndexError("batch index out of range")
        if np.unique(b).size != b.size:
            raise ValueError("batch indices must be distinct")


def _arguments(state, X, batch):
    """x_i^T w_{t-1} for the rows in ``batch``."""
    it = state.iterate
    if len(batch) == 1:
        return np.array([it.row_dot(X, int(batch[0]))])
    if not X.is_sparse:
        return it.scale * (X.dense[batch] @ it.v)
    return np.array([it.row_dot(X, int(i)) for i in batch])


def _write_alpha(state, X, batch, new):
    """alpha[batch] <- new, pushing the change into r (and the tracker)."""
    delta = new - state.alpha[batch]
    state.alpha[batch] = new
    r = state.r
    if X.is_sparse:
        indptr, indices, data = X.indptr, X.indices, X.data
        for i, c in zip(batch.tolist(), delta.tolist()):
            if c == 0.0:
                continue
            lo, hi = indptr[i], indptr[i + 1]
            idx = indices[lo:hi]
            r[idx] += c * data[lo:hi]
            if state.tracker is not None:
                state.tracker.update(idx, r)
    else:
        if len(batch) == 1:
            r += delta[0] * X.dense[batch[0]]
        else:
            r += X.dense[batch].T @ delta
        if state.tracker is not None:
            state.tracker.update(None, r)


def _derivs(loss, batch, z):
    if len(batch) == 1:
        return np.array([loss.deriv(int(batch[0]), float(z[0]))])
    return loss.derivs(z, batch)


def refresh_sfw(state, problem, batch):
    """SFW table refresh: alpha_i <- f_i'(x_i^T w) / n for i in ``batch``."""
    batch = np.asarray(batch, dtype=np.int64)
    z = _arguments(state, problem.X, batch)
    _write_alpha(state, problem.X, batch, _derivs(problem.loss, batch, z) / problem.n)


def _finish(state, cset, vertex, gamma, gap_vertex_value, compute_gap, n_calls):
    gap = None
    if compute_gap:
        gap = state.iterate.dot(state.r) - gap_vertex_value()
    state.iterate.convex_step(gamma, vertex.indices, vertex.values)
    state.t += 1
    state.grad_calls += n_calls
    return StepInfo(vertex, gamma, gap)


def sfw_step(state, problem, cset, schedule, batch, compute_gap=False, check=True):
    """One stochastic Frank-Wolfe iteration on ``state`` (modified in place).

    With ``compute_gap`` the returned info carries the stochastic gap
    ``<r_t, w_{t-1}> - min_s <r_t, s>``, evaluated before the iterate moves.
    """
    if check:
        _check_incoming(state, problem, cset, batch)
    if len(batch) == 1:
        return _unit_step("sfw", state, problem, cset, schedule, int(batch[0]), compute_gap)
    t = state.t + 1
    gamma, _ = schedule.step_size(t)
    refresh_sfw(state, problem, batch)
    vertex = lmo(cset, state.direction)
    return _finish(state, cset, vertex, gamma, lambda: vertex.dot(state.r), compute_gap, len(batch))


def fw_step(state, problem, cset, schedule, compute_gap=False, check=True):
    """One deterministic Frank-Wolfe iteration (n derivative evaluations)."""
    if check:
        _check_incoming(state, problem, cset, None)
    t = state.t + 1
    gamma, _ = schedule.step_size(t)
    it = state.iterate
    theta = it.scale * problem.X.matvec(it.v)
    state.alpha[:] = problem.loss.derivs(theta) / problem.n
    state.r[:] = problem.X.rmatvec(state.alpha)
    if state.tracker is not None:
        state.tracker.update(None, state.r)
    vertex = lmo(cset, state.direction)
    return _finish(state, cset, vertex, gamma, lambda: vertex.dot(state.r), compute_gap, problem.n)


def mokhtari_step(state, problem, cset, schedule, batch, compute_gap=False, check=True):
    """Momentum-averaged estimator on the sampled coordinates only.

    alpha_i <- (1 - rho_t) alpha_i + rho_t f_i'(x_i^T w), without the 1/n
    factor; gamma_t = 1/(t+1).
    """
    if check:
        _check_incoming(state, problem, cset, batch)
    if len(batch) == 1:
        return _unit_step("mokhtari", state, problem, cset, schedule, int(batch[0]), compute_gap)
    t = state.t + 1
    gamma, rho = schedule.step_size(t)
    batch = np.asarray(batch, dtype=np.int64)
    z = _arguments(state, problem.X, batch)
    g = _derivs(problem.loss, batch, z)
    _write_alpha(state, problem.X, batch, (1.0 - rho) * state.alpha[batch] + rho * g)
    vertex = lmo(cset, state.direction)
    return _finish(state, cset, vertex, gamma, lambda: vertex.dot(state.r), compute_gap, len(batch))


def _row_dot_vertex(X, i, vertex):
    if len(vertex.indices) == 1:
        j = int(vertex.indices[0])
        if X.is_sparse:
            lo, hi = X.indptr[i], X.indptr[i + 1]
            k = lo + int(np.searchsorted(X.indices[lo:hi], j))
            x_ij = X.data[k] if k < hi and X.indices[k] == j else 0.0
        else:
            x_ij = X.dense[i, j]
        return float(x_ij * vertex.values[0])
    return row_dot(X, i, vertex.to_dense(X.d))


def lufreund_step(state, problem, cset, schedule, batch, compute_gap=False, check=True):
    """Averaged-argument method: the oracle runs on r_{t-1}, before the refresh.

    sigma_i <- (1 - delta_t) sigma_i + delta_t x_i^T s_t, then
    alpha_i <- f_i'(sigma_i) / n.
    """
    if check:
        _check_incoming(state, problem, cset, batch)
        if state.sigma is None:
            raise InvariantError("lufreund state needs sigma (use init_state(kind='lufreund'))")
    if len(batch) == 1:
        return _unit_step("lufreund", state, problem, cset, schedule, int(batch[0]), compute_gap)
    t = state.t + 1
    gamma, delta = schedule.step_size(t)
    vertex = lmo(cset, state.direction)
    batch = np.asarray(batch, dtype=np.int64)
    xs = np.array([_row_dot_vertex(problem.X, int(i), vertex) for i in batch])
    state.sigma[batch] = (1.0 - delta) * state.sigma[batch] + delta * xs
    g = _derivs(problem.loss, batch, state.sigma[batch])
    _write_alpha(state, problem.X, batch, g / problem.n)
    # the gap pairs the refreshed r_t with w_{t-1}, so it needs its own oracle value
    return _finish(
        state, cset, vertex, gamma, lambda: cset.min_value(state.direction), compute_gap, len(batch)
    )


def _unit_step(kind, state, problem, cset, schedule, i, compute_gap):
    # scalar version of the three stochastic steps for a batch of one; the
    # per-iteration cost is dominated by interpreter overhead, not arithmetic
    X, it, r, alpha = problem.X, state.iterate, state.r, state.alpha
    t = state.t + 1
    gamma, aux = schedule.step_size(t)
    if X.is_sparse:
        lo, hi = X.indptr[i], X.indptr[i + 1]
        cols, vals = X.indices[lo:hi], X.data[lo:hi]
    else:
        cols, vals = None, X.dense[i]
    vertex = None
    if kind == "lufreund":
        vertex = lmo(cset, state.direction)
        z = (1.0 - aux) * state.sigma[i] + aux * _row_dot_vertex(X, i, vertex)
        state.sigma[i] = z
        new = problem.loss.deriv(i, z) / problem.n
    else:
        v = it.v
        z = it.scale * float(vals @ (v if cols is None else v[cols]))
        g = problem.loss.deriv(i, z)
        new = g / problem.n if kind == "sfw" else (1.0 - aux) * alpha[i] + aux * g
    c = new - alpha[i]
    alpha[i] = new
    if c != 0.0:
        if cols is None:
            r += c * vals
            if state.tracker is not None:
                state.tracker.update(None, r)
        else:
            r[cols] += c * vals
            if state.tracker is not None:
                state.tracker.update(cols, r)
    gap = None
    if cset.kind == "l1_ball" and kind != "lufreund":
        if state.tracker is not None:
            j, rj = state.tracker.query()
        else:
            j = int(np.argmax(np.abs(r)))
            rj = float(r[j])
        s = -cset.radius if rj >= 0 else cset.radius
        vertex = VertexStep(np.array([j]), np.array([s]))
        if compute_gap:
            gap = it.dot(r) - s * rj
    else:
        if vertex is None:
            vertex = lmo(cset, state.direction)
        if compute_gap:
            low = cset.min_value(state.direction) if kind == "lufreund" else vertex.dot(r)
            gap = it.dot(r) - low
    it.convex_step(gamma, vertex.indices, vertex.values)
    state.t = t
    state.grad_calls += 1
    return StepInfo(vertex, gamma, gap)


def step(kind, state, problem, cset, schedule, batch, compute_gap=False, check=True):
    """Dispatch one iteration of ``kind``; ``batch`` is ignored for ``fw``."""
    if kind == "fw":
        return fw_step(state, problem, cset, schedule, compute_gap, check)
    fn = {"sfw": sfw_step, "mokhtari": mokhtari_step, "lufreund": lufreund_step}[kind]
    return fn(state, problem, cset, schedule, batch, compute_gap, check)


def consistency_residual(state, problem):
    """||r - X^T alpha||_inf together with the scale it should be judged against."""
    resid = float(np.max(np.abs(state.r - problem.X.rmatvec(state.alpha)), initial=0.0))
    scale = 1.0 + float(np.sum(np.abs(state.alpha))) * problem.X.max_abs()
    return resid, scale


@dataclass
class TraceRow:
    """One checkpoint of a solver run.

    ``objective`` is f(X w_t). The gap and error columns follow the analysis
    indexing: at iteration t they are evaluated at w_{t-1} with the table
    alpha_t that produced the step. ``exact_gap`` and ``h_error`` are only
    filled in when exact diagnostics are requested.
    """

    t: int
    grad_calls: int
    objective: float
    stochastic_gap: Optional[float] = None
    exact_gap: Optional[float] = None
    h_error: Optional[float] = None
    wall_nanos: int = 0

    FIELDS = ("t", "grad_calls", "objective", "stochastic_gap", "exact_gap", "h_error", "wall_nanos")

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


class Trace(list):
    """List of :class:`TraceRow` plus run metadata."""

    def __init__(self, rows=(), **meta):
        super().__init__(rows)
        self.solver = meta.get("solver")
        self.seed = meta.get("seed")
        self.batch_size = meta.get("batch_size")
        self.w = meta.get("w")
        self.stopped_by = meta.get("stopped_by")

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self], dtype=float)


def _exact_columns(problem, cset, w_prev, alpha):
    # local import: diagnostics builds on this module
    from .diagnostics import exact_gap, h_error

    return exact_gap(problem, cset, w_prev), h_error(alpha, grad_table(problem, w_prev))


def run_solver(
    problem,
    cset,
    kind="sfw",
    batch_size=1,
    budget=None,
    seed=0,
    trace_every=1,
    gap_stop=None,
    exact_diagnostics=False,
    w0=None,
    checkpoints=None,
    use_tracker=None,
    check_consistency=True,
    callback=None,
):
    """Run one solver until the derivative budget is spent or the gap stops it.

    Parameters
    ----------
    problem, cset : Problem, ConstraintSet
    kind : {"sfw", "fw", "mokhtari", "lufreund"}
    batch_size : int
        Samples per iteration; ignored by ``fw``, which always uses ``n``.
    budget : int
        Maximum number of derivative evaluations. An iteration only starts if
        it fits entirely within the budget. Defaults to 100 epochs.
    trace_every : int
        Record a row every this many iterations (0 disables periodic rows).
        The initial state and the last iteration are always recorded.
    checkpoints : iterable of int, optional
        Extra iteration numbers to record.
    gap_stop : float, optional
        Stop as soon as the stochastic gap of an iteration falls below it.
    exact_diagnostics : bool
        Also compute the exact Frank-Wolfe gap and the table error H_t at each
        recorded row (O(nd) each).
    callback : callable, optional
        Called as ``callback(state, info)`` after every iteration; when given,
        the stochastic gap is computed at every iteration.

    Returns
    -------
    Trace
        Rows in iteration order; ``trace.w`` holds the final iterate.
    """
    n = problem.n
    if kind not in SOLVER_KINDS:
        raise ValueError(f"unknown solver kind {kind!r}")
    b = n if kind == "fw" else int(batch_size)
    if not 1 <= b <= n:
        raise ValueError(f"batch size {b} must lie in [1, {n}]")
    if budget is None:
        budget = 100 * n
    budget = int(budget)
    if kind == "fw" and 0 < budget < n:
        raise ValueError(f"fw needs a budget of at least n = {n} derivative evaluations")
    state = init_state(problem, cset, kind, seed, w0=w0, use_tracker=use_tracker)
    schedule = Schedule.for_problem(kind, n, b)
    extra = set(checkpoints or ())

    diag_nanos = 0
    start = time.perf_counter_ns()

    def row(t, w_prev, alpha_gap, info_gap):
        nonlocal diag_nanos
        t0 = time.perf_counter_ns()
        out = TraceRow(t, state.grad_calls, objective(problem, state.w), info_gap)
        if exact_diagnostics:
            out.exact_gap, out.h_error = _exact_columns(problem, cset, w_prev, alpha_gap)
            if check_consistency:
                resid, scale = consistency_residual(state, problem)
                if resid > 1e-9 * scale:
                    raise InvariantError(f"r drifted from X^T alpha by {resid:.3e} at t={t}")
        t1 = time.perf_counter_ns()
        diag_nanos += t1 - t0
        out.wall_nanos = t1 - start - diag_nanos
        return out

    rows = [row(0, state.w, state.alpha, _gap_at(state, cset))]
    stopped_by = "budget"
    draws, pos = [], 0
    while state.grad_calls + b <= budget:
        t = state.t + 1
        last = state.grad_calls + 2 * b > budget
        record = last or (trace_every and t % trace_every == 0) or t in extra
        need_gap = record or gap_stop is not None or callback is not None
        keep_prev = exact_diagnostics and (record or gap_stop is not None)
        w_prev = state.w if keep_prev else None
        if kind == "fw":
            info = fw_step(state, problem, cset, schedule, compute_gap=need_gap, check=False)
        elif b == 1:
            if pos == len(draws):
                draws, pos = state.rng.integers(n, size=_DRAW_BLOCK).tolist(), 0
            i = draws[pos]
            pos += 1
            info = _unit_step(kind, state, problem, cset, schedule, i, need_gap)
        else:
            batch = sample_batch(state.rng, n, b)
            info = step(kind, state, problem, cset, schedule, batch, compute_gap=need_gap, check=False)
        if callback is not None:
            callback(state, info)
        stop = gap_stop is not None and info.stochastic_gap < gap_stop
        if record or stop:
            rows.append(row(t, w_prev, state.alpha, info.stochastic_gap))
        if stop:
            stopped_by = "gap"
            break
    return Trace(rows, solver=kind, seed=seed, batch_size=b, w=state.w, stopped_by=stopped_by)


def _gap_at(state, cset):
    return state.iterate.dot(state.r) - cset.min_value(state.direction)


def reference_optimum(problem, cset, budget=10**6, polish_iters=20000, tol=1e-15):
    """Approximate min of f(Xw) over the set, with the point that attains it.

    A long deterministic Frank-Wolfe run (``budget`` derivative evaluations)
    is followed by an accelerated projected-gradient polish started from its
    output; the better of the two feasible points is returned. For
    non-convex losses this is only a local reference.
    """
    budget = max(problem.n, budget)
    trace = run_solver(problem, cset, "fw", budget=budget, trace_every=0)
    best_w, best_f = trace.w, trace[-1].objective
    w, f = _projected_gradient(problem, cset, best_w, polish_iters, tol)
    if f < best_f:
        best_w, best_f = w, f
    return best_f, best_w


def _projected_gradient(problem, cset, w0, iters, tol):
    X = problem.X
    A = X.to_scipy() if X.is_sparse else X.dense
    if X.is_sparse and min(A.shape) > 1:
        smax = float(svds(A, k=1, return_singular_vectors=False)[0])
    else:
        smax = float(np.linalg.norm(X.to_dense(), 2))
    lip = problem.L / problem.n * smax**2
    if lip == 0.0:
        return w0, objective(problem, w0)
    step = 1.0 / lip
    x = w0.copy()
    y = x.copy()
    tk = 1.0
    fx = objective(problem, x)
    restarted = False
    for _ in range(iters):
        x_new = project(cset, y - step * full_gradient(problem, y))
        f_new = objective(problem, x_new)
        if f_new > fx:
            if restarted:
                break
            # adaptive restart keeps the sequence monotone
            y, tk, restarted = x.copy(), 1.0, True
            continue
        restarted = False
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        y = x_new + ((tk - 1.0) / t_new) * (x_new - x)
        moved = float(np.max(np.abs(x_new - x)))
        x, fx, tk = x_new, f_new, t_new
        if moved <= tol:
            break
    return x, fx
