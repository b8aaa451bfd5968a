"""Empirical counterparts of the concentration and perturbation bounds.

All ratios are normalized by the natural scale ``sqrt(n1 * n2 * pmax**2)``
(or ``n1 * n2 * pmax**2`` for row sums) so that bounded-in-n behaviour is
visible as a flat trend across problem sizes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .model import BipartiteGraph, ModelSpec, PopulationQuantities, population_quantities, sample_graph
from .rng import derive_seed, make_rng
from .spectral import HollowedGram, hollowed_gram, top_r_eigs


@dataclass(frozen=True)
class DiagnosticsReport:
    """Normalized deviation measurements for one sampled graph.

    ``eig_dev_ratio`` compares the top eigenvalues of ``B`` with those of
    ``E[B]``, so Weyl's inequality makes it at most ``conc_ratio``.
    ``n2_p2`` and ``n1_p`` record the side conditions ``n2 pmax^2 = o(1)``
    and ``n1 pmax = O(1)`` for the instance.
    """

    conc_ratio: float
    d2inf_scaled: float
    eig_dev_ratio: float
    row_sum_ratio: float
    col_sum_max: int
    sep_scaled: float
    alpha: float
    n2_p2: float
    n1_p: float

    @property
    def recovery_margin(self) -> float:
        """``sep_scaled / (6 alpha) - d2inf_scaled``; positive means k-medians provably recovers."""
        return self.sep_scaled / (6 * self.alpha) - self.d2inf_scaled

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


class DiscrepancyResult(NamedTuple):
    holds: bool
    witness: tuple | None


def _power_norm(D: np.ndarray, tol: float, max_iter: int, seed) -> float:
    """Spectral norm of a symmetric matrix by power iteration on ``D @ D``."""
    n = D.shape[0]
    if n == 0 or not np.any(D):
        return 0.0
    x = make_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(max_iter):
        y = D @ x
        new = float(np.linalg.norm(y))
        z = D @ y
        nz = np.linalg.norm(z)
        if nz == 0:
            return new
        x = z / nz
        if abs(new - sigma) <= tol * new:
            sigma = new
            break
        sigma = new
    return float(np.linalg.norm(D @ x))


def spectral_norm_dev(B: HollowedGram, model: ModelSpec, pq: PopulationQuantities | None = None,
                      tol: float = 1e-12, max_iter: int = 20000, seed=0) -> float:
    """``||B - E[B]||`` with ``E[B]_ij = sum_l p_il p_jl`` off the diagonal, 0 on it."""
    if model.pmax == 0:
        return _power_norm(B.toarray().astype(float), tol, max_iter, seed)
    pq = pq or population_quantities(model)
    D = B.toarray().astype(float) - pq.expected_gram
    return _power_norm(D, tol, max_iter, seed)


def procrustes(U: np.ndarray, Ustar: np.ndarray) -> np.ndarray:
    """Orthogonal ``O`` minimizing ``||U O - Ustar||_F``."""
    W, _, Vt = np.linalg.svd(U.T @ Ustar)
    return W @ Vt


def d2inf(U, Ustar) -> float:
    """Max row norm of ``U O - Ustar`` after Procrustes alignment.

    This upper-bounds the infimum over orthogonal ``O`` of the two-to-infinity
    distance and is the usual surrogate for it.
    """
    U = np.asarray(U, dtype=float)
    Ustar = np.asarray(Ustar, dtype=float)
    if U.shape != Ustar.shape:
        raise ValueError(f"shape mismatch {U.shape} vs {Ustar.shape}")
    R = U @ procrustes(U, Ustar) - Ustar
    return float(np.sqrt(np.max(np.sum(R**2, axis=1))))


def discrepancy_check(M, delta: float, kappa1: float, kappa2: float, n1: int | None = None,
                      chunk: int = 512) -> DiscrepancyResult:
    """Exhaustively test the discrepancy property over all non-empty ``S, T``.

    A pair violates the property when both
    ``e(S,T) <= kappa1 * delta * |S||T|`` and
    ``e(S,T) log(e(S,T) / (delta |S||T|)) <= kappa2 * m log(e * n1 / m)``,
    ``m = max(|S|, |T|)``, fail. ``n1`` defaults to the matrix size.

    Returns
    -------
    DiscrepancyResult
        ``witness`` is ``(S, T)`` as sorted tuples of indices for the
        violating pair of largest density ``e / (|S||T|)``; ties go to the
        larger ``|S||T|`` and then to the smaller bitmasks.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or np.any(M < 0):
        raise ValueError("M must be a square non-negative matrix")
    if n > 14:
        raise ValueError("exhaustive check limited to n <= 14")
    if not (delta > 0 and kappa1 > 0 and kappa2 >= 0):
        raise ValueError("need delta > 0, kappa1 > 0, kappa2 >= 0")
    n1 = n if n1 is None else n1
    masks = np.arange(1, 2**n)
    ind = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    size = ind.sum(axis=1)
    partial = ind @ M  # partial[S, j] = sum_{i in S} M_ij
    best = None
    for lo in range(0, len(masks), chunk):
        e = partial[lo:lo + chunk] @ ind.T
        s = size[lo:lo + chunk, None]
        st = s * size[None, :]
        cond1 = e <= kappa1 * delta * st
        m = np.maximum(s, size[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.where(e > 0, e * np.log(e / (delta * st)), 0.0)
        cond2 = lhs <= kappa2 * m * np.log(math.e * n1 / m)
        bad = ~cond1 & ~cond2
        if not bad.any():
            continue
        si, ti = np.nonzero(bad)
        dens = e[si, ti] / st[si, ti]
        area = st[si, ti]
        # lexsort: last key is primary
        k = np.lexsort((ti, si, -area, -dens))[0]
        cand = (dens[k], area[k], si[k] + lo, ti[k])
        if best is None or (-cand[0], -cand[1], cand[2], cand[3]) < (-best[0], -best[1], best[2], best[3]):
            best = cand
    if best is None:
        return DiscrepancyResult(True, None)
    S = tuple(int(i) for i in np.flatnonzero(ind[best[2]]))
    T = tuple(int(i) for i in np.flatnonzero(ind[best[3]]))
    return DiscrepancyResult(False, (S, T))


def run_diagnostics(model: ModelSpec, A: BipartiteGraph | None = None, seed=None, r: int | None = None,
                    B: HollowedGram | None = None, pq: PopulationQuantities | None = None) -> DiagnosticsReport:
    """Measure every report field on one sample.

    Either ``A`` or ``seed`` must be given; with ``seed`` the graph is drawn
    from ``model``. ``r`` defaults to the population rank. ``B`` may be
    passed to reuse a Gram matrix already built by a pipeline.
    """
    if A is None:
        if seed is None:
            raise ValueError("need a graph or a seed")
        A = sample_graph(model, seed)
    B = B if B is not None else hollowed_gram(A)
    n1, n2, pmax = model.n1, model.n2, model.pmax
    col_max = int(A.col_degrees().max()) if n2 else 0
    if pmax == 0:
        return DiagnosticsReport(0.0, float("nan"), 0.0, 0.0, col_max, float("nan"),
                                 model.alpha, 0.0, 0.0)
    pq = pq or population_quantities(model)
    r = pq.r if r is None else r
    if not 1 <= r <= pq.r:
        raise ValueError(f"r must lie in 1..{pq.r}")
    scale = math.sqrt(n1 * n2 * pmax**2)
    conc = spectral_norm_dev(B, model, pq, seed=derive_seed(0 if seed is None else seed, 7))
    EB = pq.expected_gram
    ref_vals = np.linalg.eigvalsh(EB)[::-1][:r]
    es = top_r_eigs(B, r, seed=derive_seed(0 if seed is None else seed, 8))
    vals, U = es.values, es.vectors
    eig_dev = float(np.max(np.abs(vals - ref_vals)))
    return DiagnosticsReport(
        conc_ratio=conc / scale,
        d2inf_scaled=math.sqrt(n1) * d2inf(U, pq.Ustar[:, :r]),
        eig_dev_ratio=eig_dev / scale,
        row_sum_ratio=float(B.row_sums().max()) / (n1 * n2 * pmax**2),
        col_sum_max=col_max,
        sep_scaled=math.sqrt(n1) * pq.separation,
        alpha=model.alpha,
        n2_p2=n2 * pmax**2,
        n1_p=n1 * pmax,
    )
