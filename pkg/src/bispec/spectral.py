"""Hollowed Gram matrix, top eigenspace and eigengap rank selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .model import BipartiteGraph
from .rng import make_rng

# n1 at or below which top_r_eigs(method="auto") uses the dense solver
DENSE_CUTOFF = 256


class EigenNonConvergence(RuntimeError):
    """Raised when the iterative solver exhausts ``max_iter``.

    The best available approximation is attached as ``eigenspace``.
    """

    def __init__(self, message, eigenspace):
        super().__init__(message)
        self.eigenspace = eigenspace


@dataclass(frozen=True, eq=False)
class HollowedGram:
    """``B = AA^T - diag(AA^T)`` stored as a symmetric int64 CSR matrix."""

    n1: int
    entries: sparse.csr_matrix

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def nnz(self) -> int:
        return self.entries.nnz

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.entries.sum(axis=1)).ravel()

    def upper_triplets(self):
        """``(i, j, count)`` arrays for ``i < j``, sorted by ``i`` then ``j``."""
        upper = sparse.triu(self.entries, k=1).tocsr()
        upper.sort_indices()
        i = np.repeat(np.arange(self.n1), np.diff(upper.indptr))
        return i, upper.indices.astype(np.int64), upper.data.astype(np.int64)

    @classmethod
    def from_triplets(cls, n1: int, i, j, counts) -> "HollowedGram":
        i, j, counts = (np.asarray(x, dtype=np.int64) for x in (i, j, counts))
        if np.any(i >= j):
            raise ValueError("triplets must satisfy i < j")
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.concatenate([counts, counts])
        m = sparse.csr_matrix((data, (rows, cols)), shape=(n1, n1), dtype=np.int64)
        m.sort_indices()
        return cls(n1, m)


@dataclass(frozen=True, eq=False)
class Eigenspace:
    """Top eigenpairs, ``values`` non-increasing, ``vectors`` with orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str = "dense"
    iterations: int = 0

    @property
    def r(self) -> int:
        return len(self.values)


class RankSelection(NamedTuple):
    rank: int
    fallback: bool


def hollowed_gram(A: BipartiteGraph) -> HollowedGram:
    """Co-neighbour counts ``B_ij = |N(i) & N(j)|`` for ``i != j``, zero diagonal.

    For every column ``l`` all ordered pairs of distinct rows inside its
    neighbour set are enumerated, which costs ``sum_l d_l^2 <= n1 * nnz(A)``.
    """
    n1 = A.n1
    if A.nnz == 0:
        return HollowedGram(n1, sparse.csr_matrix((n1, n1), dtype=np.int64))
    row = A.row_of_edge()
    # group edges by column; stable sort keeps rows ascending inside a column
    order = np.argsort(A.indices, kind="stable")
    col_sorted = A.indices[order]
    row_sorted = row[order]
    deg = np.bincount(col_sorted, minlength=A.n2)
    start = np.concatenate([[0], np.cumsum(deg)[:-1]])
    d_edge = deg[col_sorted]
    s_edge = start[col_sorted]
    # edge e is paired with every edge of its column, itself excluded below
    rep = np.repeat(np.arange(len(col_sorted)), d_edge)
    offset = np.arange(len(rep)) - np.repeat(np.cumsum(d_edge) - d_edge, d_edge)
    partner = np.repeat(s_edge, d_edge) + offset
    keep = partner != rep
    i = row_sorted[rep[keep]]
    j = row_sorted[partner[keep]]
    data = np.ones(len(i), dtype=np.int64)
    B = sparse.coo_matrix((data, (i, j)), shape=(n1, n1)).tocsr()
    B.sum_duplicates()
    B.sort_indices()
    return HollowedGram(n1, B)


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _residuals(matvec, values, vectors) -> np.ndarray:
    R = matvec(vectors) - vectors * values
    return np.linalg.norm(R, axis=0)


def _as_operator(B):
    if isinstance(B, HollowedGram):
        M = B.entries.astype(np.float64)
    elif sparse.issparse(B):
        M = B.astype(np.float64).tocsr()
    else:
        M = np.asarray(B, dtype=np.float64)
    return M


def top_r_eigs(B, r: int, tol: float = 1e-12, max_iter: int | None = None, seed=0,
               method: str = "auto") -> Eigenspace:
    """The ``r`` algebraically largest eigenpairs of a symmetric matrix.

    Parameters
    ----------
    B : HollowedGram, sparse matrix or ndarray
        Symmetric matrix. It is not PSD in general, so "largest" is by value,
        not magnitude.
    r : int
        Number of eigenpairs, ``1 <= r <= n``.
    tol : float
        Residual target: ``||B u - lam u|| <= tol * max(1, |lam_1|)``.
    max_iter : int, optional
        Maximum number of block-Lanczos steps. Defaults to enough steps for
        the Krylov basis to span the whole space.
    seed
        Seed of the random starting block.
    method : {"auto", "dense", "lanczos"}
        ``auto`` uses the dense solver for ``n <= 256``.

    Returns
    -------
    Eigenspace
        Each eigenvector has its largest-magnitude entry positive.

    Raises
    ------
    EigenNonConvergence
        If the iterative solver misses the residual target within ``max_iter``.
    """
    M = _as_operator(B)
    n = M.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= {n}, got r={r}")
    if method == "auto":
        method = "dense" if n <= DENSE_CUTOFF else "lanczos"
    matvec = M.__matmul__
    if method == "dense":
        dense = M.toarray() if sparse.issparse(M) else M
        vals, vecs = np.linalg.eigh(dense)
        vals, vecs = vals[::-1][:r], vecs[:, ::-1][:, :r]
        vecs = _canonical_signs(vecs)
        return Eigenspace(vals.copy(), vecs.copy(), _residuals(matvec, vals, vecs), "dense", 0)
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")
    return _block_lanczos(matvec, n, r, tol, max_iter, make_rng(seed))


def _orthonormalize_against(W, Q, rng, scale):
    """Orthonormal columns spanning ``W`` minus its projection on ``Q``.

    Columns that collapse (invariant subspace reached) are replaced by
    random directions so the basis keeps growing.
    """
    out = []
    cols = [Q] if Q is not None and Q.shape[1] else []
    for k in range(W.shape[1]):
        w = W[:, k].copy()
        for attempt in range(4):
            for _ in range(2):  # two passes of classical Gram-Schmidt
                for C in cols:
                    w -= C @ (C.T @ w)
                for v in out:
                    w -= v * (v @ w)
            nrm = np.linalg.norm(w)
            if nrm > 1e-10 * scale:
                break
            w = rng.standard_normal(len(w))
            scale = max(np.linalg.norm(w), 1.0)
        out.append(w / nrm)
    return np.column_stack(out) if out else np.zeros((W.shape[0], 0))


def _block_lanczos(matvec, n, r, tol, max_iter, rng) -> Eigenspace:
    b = r
    if max_iter is None:
        max_iter = -(-n // b) + 2
    Q0 = _orthonormalize_against(rng.standard_normal((n, b)), None, rng, 1.0)
    basis = [Q0]
    images = [matvec(Q0)]
    best = None
    for it in range(1, max_iter + 1):
        Q = np.hstack(basis)
        BQ = np.hstack(images)
        H = Q.T @ BQ
        theta, S = np.linalg.eigh((H + H.T) / 2)
        theta, S = theta[::-1][:r], S[:, ::-1][:, :r]
        Y = Q @ S
        res = np.linalg.norm(BQ @ S - Y * theta, axis=0)
        scale = max(1.0, abs(theta[0]))
        best = Eigenspace(theta.copy(), Y, res, "lanczos", it)
        if np.all(res <= tol * scale) or Q.shape[1] >= n:
            break
        room = n - Q.shape[1]
        W = images[-1][:, :room]
        Qn = _orthonormalize_against(W, Q, rng, max(np.linalg.norm(W), 1.0))
        basis.append(Qn)
        images.append(matvec(Qn))
    else:
        raise EigenNonConvergence(
            f"block Lanczos did not reach tol={tol} in {max_iter} steps", _finalize(best, matvec))
    return _finalize(best, matvec)


def _finalize(es: Eigenspace, matvec) -> Eigenspace:
    # re-orthonormalize Ritz vectors against roundoff, then canonicalize signs
    V, _ = np.linalg.qr(es.vectors)
    V = V * np.sign(np.sum(V * es.vectors, axis=0))
    V = _canonical_signs(V)
    return Eigenspace(es.values, V, _residuals(matvec, es.values, V), es.method, es.iterations)


def select_rank(values, K: int, T: float) -> RankSelection:
    """Largest ``r`` in ``1..K`` with ``values[r-1] - values[r] > T``.

    Falls back to ``K`` with ``fallback=True`` when no gap exceeds ``T``.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < K + 1:
        raise ValueError(f"need at least K+1={K + 1} eigenvalues, got {len(values)}")
    if np.any(np.diff(values[:K + 1]) > 0):
        raise ValueError("eigenvalues must be sorted non-increasing")
    gaps = values[:K] - values[1:K + 1]
    hits = np.flatnonzero(gaps > T)
    if hits.size == 0:
        return RankSelection(K, True)
    return RankSelection(int(hits[-1]) + 1, False)


def default_threshold(n1: int, n2: int, pmax: float) -> float:
    """``n1 * n2 * pmax**2 / log(log(n1))``; requires ``n1 >= 16``."""
    if n1 < 16:
        raise ValueError("default threshold needs n1 >= 16")
    return n1 * n2 * pmax**2 / math.log(math.log(n1))
