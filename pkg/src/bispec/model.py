"""Bipartite stochastic block model: parameters, sampler, population quantities.

Row labels ``z1`` and column labels ``z2`` are stored 1-indexed, matching the
label files. Arrays held by the dataclasses are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rng import make_rng

BALANCE_MODES = ("exact-balanced", "dirichlet-random", "explicit")

# relative cutoff for the numerical rank of PP^T
RANK_TOL = 1e-8


class ModelError(ValueError):
    """Invalid model parameters."""


def _frozen(a, dtype=None) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _balance_ratio(sizes: np.ndarray, n: int) -> float:
    k = len(sizes)
    ratio = k * sizes / n
    return float(np.max(np.maximum(ratio, 1.0 / ratio)))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Full BiSBM parameterization.

    Attributes
    ----------
    n1, n2 : int
        Number of type-I (row) and type-II (column) nodes.
    K, L : int
        Number of row and column communities.
    Pi : ndarray of shape (K, L)
        Connection probabilities between communities.
    z1, z2 : ndarray of int
        Row labels in ``1..K`` and column labels in ``1..L``.
    """

    n1: int
    n2: int
    K: int
    L: int
    Pi: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        Pi = _frozen(self.Pi, float)
        if Pi.shape != (self.K, self.L):
            raise ModelError(f"Pi has shape {Pi.shape}, expected ({self.K}, {self.L})")
        if not np.all(np.isfinite(Pi)) or Pi.min() < 0 or Pi.max() > 1:
            raise ModelError("every entry of Pi must lie in [0, 1]")
        z1 = _frozen(self.z1, np.int64)
        z2 = _frozen(self.z2, np.int64)
        for name, z, n, k in (("z1", z1, self.n1, self.K), ("z2", z2, self.n2, self.L)):
            if z.shape != (n,):
                raise ModelError(f"{name} must have length {n}, got {z.shape}")
            if n and (z.min() < 1 or z.max() > k):
                raise ModelError(f"{name} labels must lie in 1..{k}")
            sizes = np.bincount(z - 1, minlength=k)
            empty = np.flatnonzero(sizes == 0)
            if empty.size:
                raise ModelError(f"{name}: community {empty[0] + 1} is empty")
        object.__setattr__(self, "Pi", Pi)
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "z2", z2)

    @property
    def row_sizes(self) -> np.ndarray:
        return np.bincount(self.z1 - 1, minlength=self.K)

    @property
    def col_sizes(self) -> np.ndarray:
        return np.bincount(self.z2 - 1, minlength=self.L)

    @property
    def alpha_rows(self) -> float:
        return _balance_ratio(self.row_sizes, self.n1)

    @property
    def alpha_cols(self) -> float:
        return _balance_ratio(self.col_sizes, self.n2)

    @property
    def alpha(self) -> float:
        """Smallest constant satisfying the approximate-balance condition."""
        return max(self.alpha_rows, self.alpha_cols)

    @property
    def pmax(self) -> float:
        # every community is non-empty, so every entry of Pi appears in P
        return float(self.Pi.max())

    def Z1(self) -> np.ndarray:
        return np.eye(self.K)[self.z1 - 1]

    def Z2(self) -> np.ndarray:
        return np.eye(self.L)[self.z2 - 1]

    def P(self) -> np.ndarray:
        """Dense expectation matrix ``Z1 Pi Z2^T``."""
        return self.Pi[np.ix_(self.z1 - 1, self.z2 - 1)]


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Sparse binary bipartite adjacency in row adjacency-list form.

    ``indptr``/``indices`` follow the CSR convention: the neighbours of row
    ``i`` are ``indices[indptr[i]:indptr[i + 1]]``, strictly increasing.
    """

    n1: int
    n2: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        indptr = _frozen(self.indptr, np.int64)
        indices = _frozen(self.indices, np.int64)
        if indptr.shape != (self.n1 + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed indptr")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if len(indices) and (indices.min() < 0 or indices.max() >= self.n2):
            raise ValueError(f"neighbour index outside [0, {self.n2})")
        if len(indices) > 1:
            row = np.repeat(np.arange(self.n1), np.diff(indptr))
            same_row = row[1:] == row[:-1]
            if np.any(same_row & (np.diff(indices) <= 0)):
                raise ValueError("each row's neighbour list must be strictly increasing")
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_rows(cls, n1: int, n2: int, rows) -> "BipartiteGraph":
        rows = [np.asarray(r, dtype=np.int64) for r in rows]
        if len(rows) != n1:
            raise ValueError(f"expected {n1} rows, got {len(rows)}")
        indptr = np.zeros(n1 + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in rows])
        indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        return cls(n1, n2, indptr, indices)

    @classmethod
    def from_dense(cls, A) -> "BipartiteGraph":
        A = np.asarray(A)
        return cls.from_rows(A.shape[0], A.shape[1], [np.flatnonzero(row) for row in A])

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> list[np.ndarray]:
        return [self.indices[self.indptr[i]:self.indptr[i + 1]] for i in range(self.n1)]

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n2)

    def row_of_edge(self) -> np.ndarray:
        return np.repeat(np.arange(self.n1), self.row_degrees())

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n1, self.n2), dtype=np.int64)
        A[self.row_of_edge(), self.indices] = 1
        return A

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        data = np.ones(self.nnz, dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n1, self.n2))


@dataclass(frozen=True, eq=False)
class PopulationQuantities:
    """Noiseless quantities of a model.

    ``Bstar = P P^T`` factors as ``Z1 (Pi D2 Pi^T) Z1^T`` with ``D2`` the
    column community sizes, so its spectrum is obtained exactly from a K x K
    eigenproblem. ``P`` and ``Bstar`` are materialized lazily.
    """

    model: ModelSpec
    r: int
    Ustar: np.ndarray
    LambdaStar: np.ndarray
    next_eigenvalue: float
    pmax: float
    separation: float

    @cached_property
    def P(self) -> np.ndarray:
        return self.model.P()

    @cached_property
    def Bstar(self) -> np.ndarray:
        m = self.model
        M = (m.Pi * m.col_sizes) @ m.Pi.T
        return M[np.ix_(m.z1 - 1, m.z1 - 1)]

    @cached_property
    def expected_gram(self) -> np.ndarray:
        """Expectation of the hollowed Gram matrix: ``Bstar`` with zero diagonal."""
        EB = self.Bstar.copy()
        np.fill_diagonal(EB, 0.0)
        return EB


def build_model(n1: int, n2: int, K: int, L: int, Pi, balance_mode: str = "exact-balanced",
                z1=None, z2=None, seed=None) -> ModelSpec:
    """Construct a :class:`ModelSpec` and assign community labels.

    Parameters
    ----------
    balance_mode : {"exact-balanced", "dirichlet-random", "explicit"}
        ``exact-balanced`` assigns node ``i`` to community ``i mod K + 1``.
        ``dirichlet-random`` draws community proportions from a flat
        Dirichlet and then labels (each community receives at least one
        node); it needs ``seed``. ``explicit`` takes ``z1`` and ``z2``
        (1-indexed) verbatim.
    """
    if not (n1 >= K >= 1 and n2 >= L >= 1):
        raise ModelError("need n1 >= K >= 1 and n2 >= L >= 1")
    if balance_mode not in BALANCE_MODES:
        raise ModelError(f"balance_mode must be one of {BALANCE_MODES}")
    if balance_mode == "exact-balanced":
        z1 = np.arange(n1) % K + 1
        z2 = np.arange(n2) % L + 1
    elif balance_mode == "dirichlet-random":
        rng = make_rng(seed)
        z1 = _dirichlet_labels(rng, n1, K)
        z2 = _dirichlet_labels(rng, n2, L)
    elif z1 is None or z2 is None:
        raise ModelError("explicit balance_mode requires z1 and z2")
    return ModelSpec(n1, n2, K, L, np.asarray(Pi, dtype=float).reshape(K, L), z1, z2)


def _dirichlet_labels(rng, n, k):
    w = rng.dirichlet(np.ones(k))
    labels = np.concatenate([np.arange(k), rng.choice(k, size=n - k, p=w)])
    return rng.permutation(labels) + 1


def _bernoulli_positions(rng, size: int, p: float) -> np.ndarray:
    """Sorted positions of successes among ``size`` iid Bernoulli(p) trials.

    Gaps between successes are geometric, so the cost is O(#successes).
    """
    if p <= 0.0 or size == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(size, dtype=np.int64)
    out = []
    last = -1
    mean = size * p
    chunk = int(mean + 5.0 * np.sqrt(mean) + 16)
    while True:
        pos = last + np.cumsum(rng.geometric(p, size=chunk))
        inside = pos[pos < size]
        out.append(inside)
        if len(inside) < chunk:
            break
        last = int(pos[-1])
    return np.concatenate(out)


def sample_graph(model: ModelSpec, seed) -> BipartiteGraph:
    """Draw ``A_ij ~ Bernoulli(Pi[z1_i, z2_j])`` independently.

    Rows are filled block by block over column communities; each block has
    a constant probability and is sampled by geometric skipping.
    """
    rng = make_rng(seed)
    cols = [np.flatnonzero(model.z2 == l + 1) for l in range(model.L)]
    rows = []
    for i in range(model.n1):
        k = model.z1[i] - 1
        parts = [c[_bernoulli_positions(rng, len(c), model.Pi[k, l])] for l, c in enumerate(cols)]
        rows.append(np.sort(np.concatenate(parts)))
    return BipartiteGraph.from_rows(model.n1, model.n2, rows)


def population_quantities(model: ModelSpec) -> PopulationQuantities:
    """Exact spectral data of ``Bstar = P P^T``.

    Raises
    ------
    ModelError
        If ``Bstar`` is zero (degenerate model).
    """
    sizes = model.row_sizes.astype(float)
    M = (model.Pi * model.col_sizes) @ model.Pi.T
    root = np.sqrt(sizes)
    S = root[:, None] * M * root[None, :]
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vals[0] <= 0:
        raise ModelError("degenerate model: PP^T is zero")
    r = int(np.sum(vals > RANK_TOL * vals[0]))
    # eigenvalues of Bstar beyond the K from S are exactly zero
    nxt = float(max(vals[r], 0.0)) if r < model.K else 0.0
    center_rows = vecs[:, :r] / root[:, None]  # row of U* shared by community k
    Ustar = center_rows[model.z1 - 1]
    diffs = center_rows[:, None, :] - center_rows[None, :, :]
    dist = np.sqrt(np.sum(diffs**2, axis=-1))
    off = ~np.eye(model.K, dtype=bool)
    separation = float(dist[off].min()) if model.K > 1 else float("inf")
    return PopulationQuantities(
        model=model,
        r=r,
        Ustar=_frozen(Ustar),
        LambdaStar=_frozen(vals[:r]),
        next_eigenvalue=nxt,
        pmax=model.pmax,
        separation=separation,
    )


def rank_one_pi(c: float, pmax: float) -> np.ndarray:
    """Rank-one 2 x 2 connectivity with ``Pi Pi^T`` proportional to ``[[1, c], [c, c^2]]``.

    Rows are ``s * (1, 1)`` and ``c * s * (1, 1)``, scaled so the largest
    entry equals ``pmax``.
    """
    s = pmax / max(1.0, c)
    return np.array([[s, s], [c * s, c * s]])


def assortative_pi(K: int, L: int, pmax: float, rho: float) -> np.ndarray:
    """``pmax`` on the diagonal ``k == l`` and ``rho * pmax`` elsewhere."""
    Pi = np.full((K, L), rho * pmax)
    d = min(K, L)
    Pi[np.arange(d), np.arange(d)] = pmax
    return Pi
