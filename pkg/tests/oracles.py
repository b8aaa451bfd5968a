"""Brute-force references shared by the unit and acceptance tests."""

import itertools

import numpy as np
from scipy.optimize import minimize


def brute_force_misclustering(est, truth, K):
    est, truth = np.asarray(est), np.asarray(truth)
    best = len(est)
    for perm in itertools.permutations(range(1, K + 1)):
        mapped = np.array(perm)[truth - 1]
        best = min(best, int(np.sum(est != mapped)))
    return best / len(est)


def median_cost(points):
    """Sum of distances to the geometric median, by Nelder-Mead from several starts."""
    X = np.asarray(points, dtype=float)
    if len(X) == 0:
        return 0.0
    if len(X) == 1:
        return 0.0

    def f(y):
        return np.sqrt(((X - y) ** 2).sum(axis=1)).sum()

    # convex objective: one simplex run from the mean, guarded by the data points
    res = minimize(f, X.mean(axis=0), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    return min(res.fun, min(f(x) for x in X))


def exhaustive_kmedians_opt(X, K):
    """Optimal k-medians cost over all labelings (small n only)."""
    n = len(X)
    cache = {}

    def cost(mask):
        if mask not in cache:
            cache[mask] = median_cost(X[[i for i in range(n) if mask >> i & 1]])
        return cache[mask]

    best = np.inf
    for labels in itertools.product(range(K), repeat=n - 1):
        labels = (0,) + labels  # fix the first label to break symmetry
        masks = [sum(1 << i for i in range(n) if labels[i] == k) for k in range(K)]
        best = min(best, sum(cost(m) for m in masks))
    return best


def naive_discrepancy(M, delta, kappa1, kappa2):
    """Pure-Python loop over every pair of non-empty subsets."""
    M = np.asarray(M, dtype=float)
    n = len(M)
    subsets = [s for k in range(1, n + 1) for s in itertools.combinations(range(n), k)]
    bad = []
    for S in subsets:
        for T in subsets:
            e = sum(M[i, j] for i in S for j in T)
            st = len(S) * len(T)
            m = max(len(S), len(T))
            if e <= kappa1 * delta * st:
                continue
            if e * np.log(e / (delta * st)) <= kappa2 * m * np.log(np.e * n / m):
                continue
            bad.append((S, T))
    return bad
