"""Dense/sparse kernels shared by the solvers.

Everything here works on float64 numpy arrays. ``DesignMatrix`` stores either a
dense row-major array or a CSR triple; the row-level kernels touch only the
stored nonzeros of a row in the CSR case, which is what keeps a stochastic
Frank-Wolfe iteration at O(support) cost.
"""
import heapq

import numpy as np
from scipy import sparse


class DesignMatrix:
    """n x d data matrix, dense or CSR.

    Build it with :meth:`from_dense`, :meth:`from_csr` or :meth:`from_any`.
    The object is read-only after construction and can be shared between
    concurrent solver runs.
    """

    def __init__(self, n, d, dense=None, indptr=None, indices=None, data=None):
        self.n = int(n)
        self.d = int(d)
        self.dense = dense
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._csr = self._csc = None
        if dense is not None:
            dense.setflags(write=False)
        else:
            for a in (indptr, indices, data):
                a.setflags(write=False)
            self._csr = sparse.csr_matrix((data, indices, indptr), shape=(self.n, self.d))
            self._csc = self._csr.T.tocsr()

    @classmethod
    def from_dense(cls, a):
        a = np.array(a, dtype=np.float64, ndmin=2, order="C")
        if not np.all(np.isfinite(a)):
            raise ValueError("design matrix has non-finite entries")
        return cls(a.shape[0], a.shape[1], dense=a)

    @classmethod
    def from_csr(cls, indptr, indices, data, shape):
        indptr = np.asarray(indptr, dtype=np.int64).copy()
        indices = np.asarray(indices, dtype=np.int64).copy()
        data = np.asarray(data, dtype=np.float64).copy()
        n, d = shape
        _check_csr(indptr, indices, data, n, d)
        return cls(n, d, indptr=indptr, indices=indices, data=data)

    @classmethod
    def from_any(cls, a, sparse_format=None):
        """Wrap an ndarray, scipy sparse matrix, or DesignMatrix.

        ``sparse_format=True`` forces CSR storage, ``False`` forces dense.
        Explicit zeros are dropped when converting to CSR.
        """
        if isinstance(a, DesignMatrix):
            if sparse_format is None or sparse_format == a.is_sparse:
                return a
            a = a.to_scipy() if a.is_sparse else a.dense
        if sparse.issparse(a):
            if sparse_format is False:
                return cls.from_dense(a.toarray())
            m = sparse.csr_matrix(a, dtype=np.float64, copy=True)
            m.eliminate_zeros()
            m.sort_indices()
            m.sum_duplicates()
            return cls.from_csr(m.indptr, m.indices, m.data, m.shape)
        if sparse_format:
            return cls.from_any(sparse.csr_matrix(np.asarray(a, dtype=np.float64)))
        return cls.from_dense(a)

    @property
    def is_sparse(self):
        return self.dense is None

    @property
    def shape(self):
        return (self.n, self.d)

    @property
    def nnz(self):
        if self.is_sparse:
            return int(self.indptr[-1])
        return int(np.count_nonzero(self.dense))

    def to_dense(self):
        if not self.is_sparse:
            return self.dense.copy()
        return self.to_scipy().toarray()

    def to_scipy(self):
        if not self.is_sparse:
            return sparse.csr_matrix(self.dense)
        return self._csr.copy()

    def row(self, i):
        """Return ``(indices, values)`` of row ``i``'s stored entries."""
        _check_row(i, self.n)
        if self.is_sparse:
            lo, hi = self.indptr[i], self.indptr[i + 1]
            return self.indices[lo:hi], self.data[lo:hi]
        return np.arange(self.d), self.dense[i]

    def matvec(self, w):
        """X @ w."""
        if self.is_sparse:
            return self._csr @ w
        return self.dense @ w

    def rmatvec(self, a):
        """X.T @ a."""
        if self.is_sparse:
            return self._csc @ a
        return self.dense.T @ a

    def column_norms(self, p):
        """max_j-ready vector of per-column l_p norms (p in {1, 2, inf})."""
        a = np.abs(self.to_scipy()) if self.is_sparse else np.abs(self.dense)
        if p == 1:
            out = a.sum(axis=0)
        elif p == 2:
            out = np.sqrt(a.multiply(a).sum(axis=0)) if self.is_sparse else np.sqrt((a * a).sum(axis=0))
        elif p == np.inf:
            out = a.max(axis=0)
            if sparse.issparse(out):
                out = out.toarray()
        else:
            raise ValueError(f"unsupported norm order {p!r}")
        return np.asarray(out, dtype=np.float64).ravel()

    def max_abs(self):
        if self.is_sparse:
            return float(np.max(np.abs(self.data))) if self.data.size else 0.0
        return float(np.max(np.abs(self.dense))) if self.dense.size else 0.0

    def __repr__(self):
        kind = "csr" if self.is_sparse else "dense"
        return f"DesignMatrix({self.n}x{self.d}, {kind}, nnz={self.nnz})"


def _check_row(i, n):
    if not 0 <= i < n:
        raise IndexError(f"row index {i} out of range for {n} rows")


def _check_csr(indptr, indices, data, n, d):
    if indptr.shape != (n + 1,):
        raise ValueError("row_offsets must have n + 1 entries")
    if indptr[0] != 0 or indptr[-1] != indices.size or indices.size != data.size:
        raise ValueError("inconsistent CSR triple")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("row_offsets must be non-decreasing")
    if indices.size:
        if indices.min() < 0 or indices.max() >= d:
            raise ValueError("column index out of range")
        # strictly increasing within each row: a non-increase is only allowed
        # where a new row starts
        step = np.diff(indices) > 0
        starts = np.zeros(indices.size - 1, dtype=bool)
        inner = indptr[1:-1]
        inner = inner[(inner > 0) & (inner < indices.size)]
        starts[inner - 1] = True
        if not np.all(step | starts):
            raise ValueError("column indices must be strictly increasing within a row")
    if not np.all(np.isfinite(data)):
        raise ValueError("design matrix has non-finite entries")
    if np.any(data == 0):
        raise ValueError("explicit zeros are not allowed in CSR storage")


def row_dot(X, i, w):
    """x_i^T w, touching only the stored entries of row ``i``."""
    _check_row(i, X.n)
    if X.is_sparse:
        lo, hi = X.indptr[i], X.indptr[i + 1]
        return float(X.data[lo:hi] @ w[X.indices[lo:hi]])
    return float(X.dense[i] @ w)


def scatter_axpy(r, c, X, i, tracker=None):
    """r += c * x_i over the support of row ``i``; keeps ``tracker`` in sync."""
    _check_row(i, X.n)
    if c == 0.0:
        return r
    if X.is_sparse:
        lo, hi = X.indptr[i], X.indptr[i + 1]
        idx = X.indices[lo:hi]
        r[idx] += c * X.data[lo:hi]
        if tracker is not None:
            tracker.update(idx, r)
    else:
        r += c * X.dense[i]
        if tracker is not None:
            tracker.update(None, r)
    return r


def argmax_abs(r):
    """(j, r[j]) for the smallest j maximising |r[j]|.

    ``r`` may be an array or an :class:`ArgmaxTracker`.
    """
    if isinstance(r, ArgmaxTracker):
        return r.query()
    r = np.asarray(r)
    if r.size == 0:
        raise ValueError("argmax_abs of an empty vector")
    j = int(np.argmax(np.abs(r)))
    return j, float(r[j])


class ArgmaxTracker:
    """Max-|r_j| index under sparse coordinate updates.

    A binary heap of ``(-|r_j|, j)`` keys with lazy invalidation: every update
    pushes a fresh key and stale keys are discarded when they reach the top.
    Each coordinate always has its current key somewhere in the heap, so the
    top valid key is the maximum with the smallest index on ties. The heap is
    rebuilt from scratch once it holds too many stale keys.
    """

    def __init__(self, r):
        self.r = r
        self._mag = np.abs(r).tolist()
        if not self._mag:
            raise ValueError("ArgmaxTracker needs a non-empty vector")
        self._rebuild()

    def _rebuild(self):
        self._heap = [(-m, j) for j, m in enumerate(self._mag)]
        heapq.heapify(self._heap)

    def update(self, indices, r=None):
        """Record new values of ``r`` at ``indices`` (``None`` = every index)."""
        if r is not None:
            self.r = r
        if indices is None:
            self._mag = np.abs(self.r).tolist()
            self._rebuild()
            return
        mags = np.abs(self.r[indices]).tolist()
        push = heapq.heappush
        heap, cur = self._heap, self._mag
        for j, m in zip(np.asarray(indices).tolist(), mags):
            if cur[j] != m:
                cur[j] = m
                push(heap, (-m, j))
        if len(heap) > 4 * len(cur) + 64:
            self._rebuild()

    def query(self):
        heap, cur = self._heap, self._mag
        while True:
            negm, j = heap[0]
            if -negm == cur[j]:
                return j, float(self.r[j])
            heapq.heappop(heap)


class ScaledVector:
    """Vector stored as ``scale * v`` so that shrinking it is O(1).

    The Frank-Wolfe update ``w <- (1 - g) w + g s`` becomes a scale change plus
    a write on the support of ``s``.
    """

    _FLOOR = 1e-150

    def __init__(self, w):
        self.v = np.array(w, dtype=np.float64)
        self.scale = 1.0

    def to_array(self):
        return self.scale * self.v

    def row_dot(self, X, i):
        return self.scale * row_dot(X, i, self.v)

    def dot(self, u):
        return self.scale * float(self.v @ u)

    def convex_step(self, gamma, indices, values):
        """self <- (1 - gamma) self + gamma s, s given by its support."""
        self.scale *= 1.0 - gamma
        if self.scale < self._FLOOR:
            self.v *= self.scale
            self.scale = 1.0
        self.v[indices] += (gamma / self.scale) * values

    def copy(self):
        out = ScaledVector.__new__(ScaledVector)
        out.v = self.v.copy()
        out.scale = self.scale
        return out
