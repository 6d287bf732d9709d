"""Constraint sets with linear minimization oracles.

Three compact convex sets are supported: the l1 ball ``{||w||_1 <= lam}``,
the scaled simplex ``{w >= 0, sum(w) = lam}`` and the l_inf ball
``{||w||_inf <= lam}``. Tie conventions for the oracle are fixed (smallest
index wins, sign(0) = +1) so that solver trajectories are reproducible.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .numkit import ArgmaxTracker, DesignMatrix, argmax_abs

KINDS = ("l1_ball", "simplex", "linf_ball")
MAX_VERTICES = 4096

_SPEC_PREFIX = {"l1": "l1_ball", "simplex": "simplex", "linf": "linf_ball"}


class CapacityError(ValueError):
    """Raised when brute-force vertex enumeration would exceed MAX_VERTICES."""


class UndefinedStatisticError(ValueError):
    pass


@dataclass(frozen=True)
class VertexStep:
    """Extreme point of a constraint set, described by its support."""

    indices: np.ndarray
    values: np.ndarray

    @property
    def support(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self, d):
        s = np.zeros(d)
        s[self.indices] = self.values
        return s

    def dot(self, u):
        """<s, u>."""
        return float(self.values @ np.asarray(u)[self.indices])


@dataclass(frozen=True)
class ConstraintSet:
    kind: str
    radius: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise ValueError("constraint radius must be positive and finite")
        object.__setattr__(self, "radius", r)

    @classmethod
    def parse(cls, spec):
        """Parse a CLI constraint string such as ``"l1:5"``."""
        try:
            prefix, value = spec.split(":")
            return cls(_SPEC_PREFIX[prefix.strip()], float(value))
        except (KeyError, ValueError) as exc:
            raise ValueError(
                f"bad constraint spec {spec!r}; expected l1:<radius>, simplex:<radius> or linf:<radius>"
            ) from exc

    @property
    def spec(self):
        prefix = {v: k for k, v in _SPEC_PREFIX.items()}[self.kind]
        return f"{prefix}:{self.radius:g}"

    def lmo(self, r):
        return lmo(self, r)

    def min_value(self, r):
        """min over the set of <s, r>, without building the vertex."""
        lam = self.radius
        if self.kind == "l1_ball":
            return -lam * abs(argmax_abs(r)[1])
        r = np.asarray(r)
        if self.kind == "simplex":
            return lam * float(np.min(r))
        return -lam * float(np.sum(np.abs(r)))

    def contains(self, w, tol=1e-9):
        """Membership test with an absolute slack ``tol * max(1, radius)``."""
        w = np.asarray(w, dtype=np.float64)
        slack = tol * max(1.0, self.radius)
        if not np.all(np.isfinite(w)):
            return False
        if self.kind == "l1_ball":
            return float(np.sum(np.abs(w))) <= self.radius + slack
        if self.kind == "simplex":
            return bool(np.all(w >= -slack)) and abs(float(np.sum(w)) - self.radius) <= slack
        return float(np.max(np.abs(w), initial=0.0)) <= self.radius + slack

    def __str__(self):
        return self.spec


def lmo(cset, r):
    """Extreme point minimising <s, r> over ``cset``.

    ``r`` is a dense vector, or an :class:`ArgmaxTracker` for the l1 ball.
    """
    lam = cset.radius
    if cset.kind == "l1_ball":
        if not isinstance(r, ArgmaxTracker) and np.size(r) == 0:
            raise ValueError("lmo needs a non-empty direction")
        j, v = argmax_abs(r)
        sign = -1.0 if v >= 0 else 1.0
        return VertexStep(np.array([j]), np.array([sign * lam]))
    if isinstance(r, ArgmaxTracker):
        r = r.r
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise ValueError("lmo needs a non-empty direction")
    if cset.kind == "simplex":
        return VertexStep(np.array([int(np.argmin(r))]), np.array([lam]))
    return VertexStep(np.arange(r.size), np.where(r >= 0, -lam, lam))


def vertices(cset, d):
    """All extreme points in a fixed order; capped at MAX_VERTICES."""
    lam = cset.radius
    if cset.kind == "l1_ball":
        count = 2 * d
    elif cset.kind == "simplex":
        count = d
    else:
        count = 2**d
    if count > MAX_VERTICES:
        raise CapacityError(f"{cset.kind} in dimension {d} has {count} vertices (cap {MAX_VERTICES})")
    if cset.kind == "l1_ball":
        return [
            VertexStep(np.array([j]), np.array([sign * lam]))
            for j in range(d)
            for sign in (1.0, -1.0)
        ]
    if cset.kind == "simplex":
        return [VertexStep(np.array([j]), np.array([lam])) for j in range(d)]
    return [
        VertexStep(np.arange(d), lam * np.array(signs))
        for signs in itertools.product((1.0, -1.0), repeat=d)
    ]


def diameter(cset, X, p):
    """D_p = max over u, v in the set of ||X(u - v)||_p, p in {1, 2, inf}."""
    X = DesignMatrix.from_any(X)
    if p not in (1, 2, np.inf, math.inf, "inf"):
        raise ValueError(f"unsupported norm order {p!r}")
    p = np.inf if p == "inf" else p
    lam = cset.radius
    if cset.kind == "l1_ball":
        # u - v ranges over the 2*lam l1 ball, whose extreme points are +-2 lam e_j
        return 2.0 * lam * float(np.max(X.column_norms(p), initial=0.0))
    if cset.kind == "simplex":
        A = X.to_dense()
        best = 0.0
        for j in range(X.d):
            diff = A - A[:, [j]]
            best = max(best, float(np.max(np.linalg.norm(diff, ord=p, axis=0))))
        return lam * best
    return _diameter_bruteforce(cset, X, p)


def _diameter_bruteforce(cset, X, p):
    V = np.array([v.to_dense(X.d) for v in vertices(cset, X.d)])
    images = np.atleast_2d(X.matvec(V.T).T)  # one row per vertex
    best = 0.0
    for a in range(len(images)):
        diff = images[a + 1 :] - images[a]
        if diff.size:
            best = max(best, float(np.max(np.linalg.norm(diff, ord=p, axis=1))))
    return best


def kappa(X):
    """||X||_{1,1} / ||X||_{1,inf}: max column l1 norm over max |entry|."""
    X = DesignMatrix.from_any(X)
    top = X.max_abs()
    if top == 0.0:
        raise UndefinedStatisticError("kappa is undefined for an all-zero matrix")
    return float(np.max(X.column_norms(1))) / top


def project(cset, w):
    """Euclidean projection onto the set.

    Not used by the Frank-Wolfe solvers themselves; it backs the
    projected-gradient polish of reference optima.
    """
    w = np.asarray(w, dtype=np.float64)
    lam = cset.radius
    if cset.kind == "linf_ball":
        return np.clip(w, -lam, lam)
    if cset.kind == "simplex":
        return _project_simplex(w, lam)
    if np.sum(np.abs(w)) <= lam:
        return w.copy()
    return np.sign(w) * _project_simplex(np.abs(w), lam)


def _project_simplex(v, lam):
    # sort-based threshold search for {x >= 0, sum x = lam}
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - lam
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)
