"""k-medians rounding of embedding rows and partition scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .rng import derive_seed, make_rng


@dataclass(frozen=True, eq=False)
class Partition:
    """Labels in ``1..K`` over ``n`` nodes.

    Empty clusters are only legitimate when ``degenerate`` is set.
    """

    labels: np.ndarray
    K: int
    degenerate: bool = False

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if len(labels) and (labels.min() < 1 or labels.max() > self.K):
            raise ValueError(f"labels must lie in 1..{self.K}")
        if not self.degenerate and len(labels) >= self.K:
            if np.any(np.bincount(labels - 1, minlength=self.K) == 0):
                raise ValueError("empty cluster in a partition not flagged degenerate")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class KMediansResult:
    partition: Partition
    centers: np.ndarray
    cost: float
    restarts_used: int
    restart_costs: np.ndarray = field(repr=False)
    cost_history: list = field(repr=False)


def _row_norms(X):
    return np.sqrt(np.einsum("ij,ij->i", X, X))


def geometric_median(points, init=None, tol: float = 1e-9, max_iter: int = 1000) -> np.ndarray:
    """Weiszfeld iteration for ``argmin_y sum_i ||x_i - y||``.

    Stops when a step is below ``tol * (||y|| + mean_i ||x_i - y||)``. An
    iterate landing on a data point is nudged by ``1e-12`` (relative to the
    point spread) along the first coordinate.
    """
    X = np.asarray(points, dtype=float)
    if len(X) == 1 or np.all(X == X[0]):
        return X[0].copy()
    y = X.mean(axis=0) if init is None else np.array(init, dtype=float)
    for _ in range(max_iter):
        d = _row_norms(X - y)
        spread = d.mean()
        if np.any(d <= 1e-15 * spread):
            y = y.copy()
            y[0] += 1e-12 * max(spread, abs(y[0]))
            d = _row_norms(X - y)
        # a nudge swallowed by rounding leaves zero distances; drop those weights
        w = np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)
        y_new = (w @ X) / w.sum()
        step = np.linalg.norm(y_new - y)
        y = y_new
        if step <= tol * (np.linalg.norm(y) + spread):
            break
    return y


def _dist_to_centers(X, centers):
    return np.linalg.norm(X[:, None, :] - centers[None, :, :], axis=-1)


def _seed_centers(X, K, rng):
    """k-medians++ seeding: next center drawn proportionally to distance."""
    n = len(X)
    idx = [int(rng.integers(n))]
    d = _row_norms(X - X[idx[0]])
    for _ in range(1, K):
        total = d.sum()
        j = int(rng.integers(n)) if total <= 0 else int(rng.choice(n, p=d / total))
        idx.append(j)
        d = np.minimum(d, _row_norms(X - X[j]))
    return X[idx].copy()


def _cost(X, labels, centers):
    return float(_row_norms(X - centers[labels]).sum())


def _local_search(X, K, centers, max_iter):
    history = []
    labels = None
    for _ in range(max_iter):
        D = _dist_to_centers(X, centers)
        new_labels = np.argmin(D, axis=1)
        # repair empty clusters with the point farthest from its center
        for k in range(K):
            if np.any(new_labels == k):
                continue
            own = D[np.arange(len(X)), new_labels]
            sizes = np.bincount(new_labels, minlength=K)
            movable = sizes[new_labels] > 1
            if not movable.any():
                break
            far = int(np.argmax(np.where(movable, own, -1.0)))
            centers[k] = X[far]
            new_labels[far] = k
            D[:, k] = _row_norms(X - centers[k])
        cost = _cost(X, new_labels, centers)
        history.append(cost)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(K):
            members = X[labels == k]
            if len(members) == 0:
                continue
            old = float(_row_norms(members - centers[k]).sum())
            cand = geometric_median(members)
            if float(_row_norms(members - cand).sum()) <= old:
                centers[k] = cand
        history.append(_cost(X, labels, centers))
    return labels, centers, history


def kmedians(rows, K: int, restarts: int = 10, max_iter: int = 100, seed=0) -> KMediansResult:
    """Cluster the rows of ``rows`` into ``K`` groups minimizing summed distances.

    Each restart seeds with k-medians++ and alternates nearest-center
    assignment with Weiszfeld center updates. The run with the smallest
    ``(cost, restart index)`` wins. If the rows have fewer than ``K``
    distinct values the result is flagged ``degenerate``.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if not (n >= K >= 1 and restarts >= 1):
        raise ValueError("need n >= K >= 1 and restarts >= 1")
    degenerate = len(np.unique(X, axis=0)) < K
    best = None
    costs = []
    for s in range(restarts):
        rng = make_rng(derive_seed(seed, s))
        centers = _seed_centers(X, K, rng)
        labels, centers, history = _local_search(X, K, centers, max_iter)
        cost = _cost(X, labels, centers)
        costs.append(cost)
        if best is None or cost < best[0]:
            best = (cost, s, labels, centers, history)
    cost, _, labels, centers, history = best
    degenerate = degenerate or bool(np.any(np.bincount(labels, minlength=K) == 0))
    part = Partition(labels + 1, K, degenerate=degenerate)
    return KMediansResult(part, centers, cost, restarts, np.array(costs), history)


def _check_pair(est: Partition, truth: Partition):
    if est.n != truth.n:
        raise ValueError(f"length mismatch: {est.n} vs {truth.n}")
    if est.K != truth.K:
        raise ValueError(f"cluster count mismatch: {est.K} vs {truth.K}")


def confusion_matrix(est: Partition, truth: Partition) -> np.ndarray:
    _check_pair(est, truth)
    C = np.zeros((est.K, est.K), dtype=np.int64)
    np.add.at(C, (est.labels - 1, truth.labels - 1), 1)
    return C


def misclustering_rate(est: Partition, truth: Partition) -> float:
    """Fraction of nodes mislabelled under the best label permutation.

    The permutation is found exactly with the Hungarian method on the
    confusion matrix.
    """
    C = confusion_matrix(est, truth)
    if est.n == 0:
        return 0.0
    r, c = linear_sum_assignment(C, maximize=True)
    return (est.n - int(C[r, c].sum())) / est.n


def exact_recovery(est: Partition, truth: Partition) -> bool:
    return misclustering_rate(est, truth) == 0.0
