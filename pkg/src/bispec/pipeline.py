"""End-to-end clustering: hollowed Gram -> top eigenspace -> k-medians."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import BipartiteGraph
from .rng import derive_seed
from .rounding import Partition, kmedians
from .spectral import Eigenspace, HollowedGram, hollowed_gram, select_rank, top_r_eigs


@dataclass(frozen=True, eq=False)
class ClusteringOptions:
    restarts: int = 10
    kmedians_iter: int = 100
    eig_tol: float = 1e-12
    eig_max_iter: int | None = None
    eig_method: str = "auto"
    seed: int = 0


@dataclass(frozen=True, eq=False)
class PipelineResult:
    """Output of :func:`spec_pipeline` or :func:`adaspec_pipeline`.

    ``rank`` is the eigenspace dimension fed to k-medians; ``fallback`` is
    set when rank selection found no gap above the threshold.
    """

    partition: Partition
    rank: int
    fallback: bool
    eigenspace: Eigenspace
    gram: HollowedGram = field(repr=False)
    timings: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.partition.degenerate


def _round(U, K, opts, gram, timings):
    t = time.perf_counter()
    res = kmedians(U, K, restarts=opts.restarts, max_iter=opts.kmedians_iter,
                   seed=derive_seed(opts.seed, 1))
    timings["round"] = time.perf_counter() - t
    part = res.partition
    if gram.nnz == 0 and not part.degenerate:
        part = Partition(part.labels, K, degenerate=True)
    return part


def spec_pipeline(A: BipartiteGraph, K: int, r: int, opts: ClusteringOptions | None = None) -> PipelineResult:
    """Cluster the rows of ``A`` using the top-``r`` eigenvectors of ``H(AA^T)``."""
    opts = opts or ClusteringOptions()
    timings = {}
    t = time.perf_counter()
    B = hollowed_gram(A)
    timings["gram"] = time.perf_counter() - t
    t = time.perf_counter()
    es = top_r_eigs(B, r, tol=opts.eig_tol, max_iter=opts.eig_max_iter,
                    seed=derive_seed(opts.seed, 0), method=opts.eig_method)
    timings["eig"] = time.perf_counter() - t
    part = _round(es.vectors, K, opts, B, timings)
    return PipelineResult(part, r, False, es, B, timings)


def adaspec_pipeline(A: BipartiteGraph, K: int, T: float, opts: ClusteringOptions | None = None) -> PipelineResult:
    """Like :func:`spec_pipeline`, with the rank chosen from eigengaps above ``T``."""
    if not T > 0:
        raise ValueError("threshold T must be positive")
    opts = opts or ClusteringOptions()
    if A.n1 < K + 1:
        raise ValueError("adaptive rank selection needs n1 >= K + 1")
    timings = {}
    t = time.perf_counter()
    B = hollowed_gram(A)
    timings["gram"] = time.perf_counter() - t
    t = time.perf_counter()
    es = top_r_eigs(B, K + 1, tol=opts.eig_tol, max_iter=opts.eig_max_iter,
                    seed=derive_seed(opts.seed, 0), method=opts.eig_method)
    timings["eig"] = time.perf_counter() - t
    rank, fallback = select_rank(es.values, K, T)
    top = Eigenspace(es.values[:rank], es.vectors[:, :rank], es.residuals[:rank], es.method, es.iterations)
    part = _round(np.ascontiguousarray(top.vectors), K, opts, B, timings)
    return PipelineResult(part, rank, fallback, top, B, timings)
