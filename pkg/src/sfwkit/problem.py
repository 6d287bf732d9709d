"""Finite-sum objectives f(Xw) = (1/n) sum_i f_i(x_i^T w)."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .numkit import DesignMatrix

LOSS_KINDS = ("logistic", "squared", "geman_mcclure")

# per-sample derivative-Lipschitz constants; geman_mcclure: |g''(u)| =
# |2 - 6u^2| / (1 + u^2)^3 peaks at u = 0
_SMOOTHNESS = {"logistic": 0.25, "squared": 1.0, "geman_mcclure": 2.0}

_ALIASES = {"geman": "geman_mcclure", "gm": "geman_mcclure", "least_squares": "squared"}


@dataclass(frozen=True, eq=False)
class LossModel:
    """Per-sample scalar losses f_i(z) with their targets ``y``."""

    kind: str
    y: np.ndarray

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        y = np.array(self.y, dtype=np.float64).ravel()
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
        if kind == "logistic" and not np.all(np.abs(y) == 1.0):
            raise ValueError("logistic targets must be in {-1, +1}")
        y.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "y", y)

    @property
    def L(self):
        return _SMOOTHNESS[self.kind]

    @property
    def convex(self):
        return self.kind != "geman_mcclure"

    def values(self, z):
        """Vector of f_i(z_i) for all samples."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "logistic":
            return np.logaddexp(0.0, -self.y * z)
        u = z - self.y
        if self.kind == "squared":
            return 0.5 * u * u
        u2 = u * u
        return u2 / (1.0 + u2)

    def derivs(self, z, idx=None):
        """Vector of f_i'(z_i), for all samples or for the rows in ``idx``."""
        z = np.asarray(z, dtype=np.float64)
        y = self.y if idx is None else self.y[idx]
        if self.kind == "logistic":
            # -y sigmoid(-y z), written to stay finite for any |z|
            return -y * expit(-y * z)
        u = z - y
        if self.kind == "squared":
            return u
        return 2.0 * u / (1.0 + u * u) ** 2

    def deriv(self, i, z):
        """Scalar f_i'(z); the hot path of the stochastic solvers."""
        y = float(self.y[i])
        if self.kind == "logistic":
            m = y * z
            if m > 0:
                e = math.exp(-m)
                return -y * e / (1.0 + e)
            return -y / (1.0 + math.exp(m))
        u = z - y
        if self.kind == "squared":
            return u
        return 2.0 * u / (1.0 + u * u) ** 2


def loss_value(loss, i, z):
    """f_i(z) for a single sample."""
    _check_index(loss, i)
    y = float(loss.y[i])
    if loss.kind == "logistic":
        m = y * z
        # log(1 + exp(-m)) without overflow
        return math.log1p(math.exp(-abs(m))) + max(0.0, -m)
    u = z - y
    if loss.kind == "squared":
        return 0.5 * u * u
    return u * u / (1.0 + u * u)


def loss_deriv(loss, i, z):
    """f_i'(z) for a single sample."""
    _check_index(loss, i)
    return loss.deriv(i, z)


def smoothness_constant(loss):
    return loss.L


def _check_index(loss, i):
    if not 0 <= i < loss.y.size:
        raise IndexError(f"sample index {i} out of range for {loss.y.size} samples")


class Problem:
    """Data matrix plus loss model; read-only once built."""

    def __init__(self, X, loss):
        X = DesignMatrix.from_any(X)
        if loss.y.size != X.n:
            raise ValueError(
                f"loss has {loss.y.size} targets but the data matrix has {X.n} rows"
            )
        if X.n == 0:
            raise ValueError("problem needs at least one sample")
        self.X = X
        self.loss = loss

    @classmethod
    def build(cls, X, y, kind):
        return cls(X, LossModel(kind, y))

    @property
    def n(self):
        return self.X.n

    @property
    def d(self):
        return self.X.d

    @property
    def L(self):
        return self.loss.L

    def with_storage(self, sparse_format):
        """Same problem with the design matrix converted to CSR or dense."""
        return Problem(DesignMatrix.from_any(self.X, sparse_format), self.loss)

    def __repr__(self):
        return f"Problem({self.loss.kind}, {self.X!r})"


def objective(p, w):
    """(1/n) sum_i f_i(x_i^T w)."""
    theta = p.X.matvec(np.asarray(w, dtype=np.float64))
    return float(p.loss.values(theta).sum()) / p.n


def grad_table(p, w):
    """Exact gradient of theta -> f(theta) at theta = Xw; entry i is f_i'/n."""
    theta = p.X.matvec(np.asarray(w, dtype=np.float64))
    return p.loss.derivs(theta) / p.n


def full_gradient(p, w):
    """Gradient of w -> f(Xw), i.e. X^T grad_table(w)."""
    return p.X.rmatvec(grad_table(p, w))
