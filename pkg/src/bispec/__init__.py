"""Spectral clustering for high-dimensional bipartite stochastic block models."""

from .diagnostics import DiagnosticsReport, d2inf, discrepancy_check, run_diagnostics, spectral_norm_dev
from .model import (BipartiteGraph, ModelError, ModelSpec, PopulationQuantities, build_model,
                    population_quantities, sample_graph)
from .pipeline import ClusteringOptions, PipelineResult, adaspec_pipeline, spec_pipeline
from .rounding import KMediansResult, Partition, exact_recovery, kmedians, misclustering_rate
from .spectral import (EigenNonConvergence, Eigenspace, HollowedGram, default_threshold, hollowed_gram,
                       select_rank, top_r_eigs)

__version__ = "0.1.0"
