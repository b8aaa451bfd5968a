"""Monte-Carlo trials and phase sweeps over the sparsity constant ``Cs``.

The sparsity of a cell is set through ``n1 * n2 * pmax**2 = Cs * log(n1)``,
which places the grid directly on the exact-recovery threshold. Every trial
draws its randomness from ``derive_seed(master_seed, cell_index, trial)``,
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsReport, run_diagnostics
from .io import FormatError, read_kv
from .model import ModelError, assortative_pi, build_model, population_quantities, rank_one_pi, sample_graph
from .pipeline import ClusteringOptions, adaspec_pipeline, spec_pipeline
from .rng import derive_seed
from .rounding import Partition, misclustering_rate
from .spectral import default_threshold

WORKERS_ENV = "BISPEC_WORKERS"

TRIAL_COLUMNS = [
    "n1", "n2", "K", "L", "Cs", "pmax", "method", "seed", "rhat", "misclustering", "exact",
    "fallback", "conc_ratio", "d2inf_scaled", "eig_dev_ratio", "row_sum_ratio", "col_sum_max",
    "sep_scaled", "t_gram_ms", "t_eig_ms", "t_round_ms", "degenerate", "error",
]

SUMMARY_COLUMNS = [
    "n1", "n2", "K", "L", "Cs", "pmax", "method", "trials", "recovery_freq", "recovery_se",
    "mean_misclustering", "misclustering_se", "fallback_freq", "errors", "monotone_ok",
]


@dataclass
class ExperimentConfig:
    """Grid and run settings for :func:`phase_sweep`.

    ``family`` selects the connectivity shape: ``assortative`` puts ``pmax``
    on the diagonal and ``rho * pmax`` elsewhere; ``rank-one`` is the
    2 x 2 family with row ratio ``c``. ``n2=None`` means
    ``ceil(n1 * log(n1)**2)``. ``T`` is ``"default"`` or a number; ``r=None``
    uses the population rank for ``spec``.
    """

    n1: list = field(default_factory=lambda: [150])
    Cs: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
    K: int = 2
    L: int = 2
    family: str = "assortative"
    rho: float = 0.05
    c: float = 0.5
    n2: int | None = None
    trials: int = 30
    master_seed: int = 0
    method: str = "spec"
    T: object = "default"
    r: int | None = None
    balance_mode: str = "exact-balanced"
    restarts: int = 10
    diagnostics: bool = False
    timings: bool = False
    output: str | None = None

    def validate(self) -> None:
        if not self.n1 or not self.Cs:
            raise ValueError("experiment grid is empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.method not in ("spec", "adaspec"):
            raise ValueError(f"method must be 'spec' or 'adaspec', got {self.method!r}")
        if self.family not in ("assortative", "rank-one"):
            raise ValueError(f"family must be 'assortative' or 'rank-one', got {self.family!r}")
        if self.family == "rank-one" and (self.K, self.L) != (2, 2):
            raise ValueError("the rank-one family is defined for K = L = 2")
        if self.T != "default" and not float(self.T) > 0:
            raise ValueError("T must be 'default' or a positive number")
        for n1 in self.n1:
            n2 = default_n2(n1) if self.n2 is None else self.n2
            if n2 < n1:
                raise ValueError(f"n2={n2} < n1={n1}: not the high-dimensional regime")
            if n2 < n1 * math.log(n1) ** 2:
                warnings.warn(f"n2={n2} < n1 log^2 n1 for n1={n1}", stacklevel=2)

    def cells(self) -> list["Cell"]:
        self.validate()
        out = []
        for idx, (n1, Cs) in enumerate(itertools.product(self.n1, self.Cs)):
            n2 = default_n2(n1) if self.n2 is None else self.n2
            out.append(Cell(idx, int(n1), int(n2), float(Cs)))
        return out


def default_n2(n1: int) -> int:
    return math.ceil(n1 * math.log(n1) ** 2)


def sparsity_pmax(n1: int, n2: int, Cs: float) -> float:
    """``pmax`` solving ``n1 * n2 * pmax**2 = Cs * log(n1)``."""
    return math.sqrt(Cs * math.log(n1) / (n1 * n2))


@dataclass(frozen=True)
class Cell:
    index: int
    n1: int
    n2: int
    Cs: float

    @property
    def pmax(self) -> float:
        return sparsity_pmax(self.n1, self.n2, self.Cs)


def cell_model(config: ExperimentConfig, cell: Cell, seed: int | None = None):
    pmax = cell.pmax
    if pmax > 1:
        raise ModelError(f"Cs={cell.Cs} gives pmax={pmax:.3g} > 1")
    if config.family == "rank-one":
        Pi = rank_one_pi(config.c, pmax)
    else:
        Pi = assortative_pi(config.K, config.L, pmax, config.rho)
    return build_model(cell.n1, cell.n2, config.K, config.L, Pi, config.balance_mode, seed=seed)


@dataclass(frozen=True)
class TrialRecord:
    cell: Cell
    method: str
    seed: int
    rhat: int | None
    misclustering: float
    exact: bool
    fallback: bool
    degenerate: bool
    diagnostics: DiagnosticsReport | None = None
    timings: dict | None = None
    error: str | None = None

    def row(self) -> dict:
        c = self.cell
        d = self.diagnostics
        t = self.timings or {}
        row = {
            "n1": c.n1, "n2": c.n2, "K": None, "L": None, "Cs": c.Cs, "pmax": c.pmax,
            "method": self.method, "seed": self.seed, "rhat": self.rhat,
            "misclustering": self.misclustering, "exact": self.exact, "fallback": self.fallback,
            "degenerate": self.degenerate, "error": self.error,
        }
        for name in ("conc_ratio", "d2inf_scaled", "eig_dev_ratio", "row_sum_ratio", "col_sum_max", "sep_scaled"):
            row[name] = getattr(d, name) if d is not None else None
        for stage in ("gram", "eig", "round"):
            row[f"t_{stage}_ms"] = t[stage] * 1e3 if stage in t else None
        return row


def run_cell(config: ExperimentConfig, cell: Cell, trial: int) -> TrialRecord:
    """Run one trial of one cell; stage failures are recorded, not raised."""
    seed = derive_seed(config.master_seed, cell.index, trial)
    try:
        model = cell_model(config, cell, seed=derive_seed(seed, 2))
        truth = Partition(model.z1, config.K)
        A = sample_graph(model, derive_seed(seed, 0))
        opts = ClusteringOptions(restarts=config.restarts, seed=derive_seed(seed, 1))
        pq = None
        if model.pmax > 0:
            pq = population_quantities(model)
        if config.method == "spec":
            r = config.r or (pq.r if pq is not None else config.K)
            res = spec_pipeline(A, config.K, r, opts)
            rhat = None
        else:
            T = default_threshold(cell.n1, cell.n2, model.pmax) if config.T == "default" else float(config.T)
            if T <= 0:
                T = math.inf  # pmax = 0: no gap can be significant
            res = adaspec_pipeline(A, config.K, T, opts)
            rhat = res.rank
        mis = misclustering_rate(res.partition, truth)
        diag = None
        if config.diagnostics:
            diag = run_diagnostics(model, A, seed=seed, B=res.gram, pq=pq,
                                   r=None if pq is None else min(res.rank, pq.r))
        return TrialRecord(cell, config.method, seed, rhat, mis, mis == 0.0, res.fallback,
                           res.degenerate, diag, dict(res.timings) if config.timings else None)
    except Exception as exc:  # noqa: BLE001 - a failing trial must not abort the sweep
        return TrialRecord(cell, config.method, seed, None, float("nan"), False, False, False,
                           error=f"{type(exc).__name__}: {exc}")


def _run_job(job):
    config, cell, trial = job
    return run_cell(config, cell, trial)


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@dataclass
class SweepResult:
    records: list
    summary: list
    monotone_violations: list


def summarize(config: ExperimentConfig, records: list) -> tuple[list, list]:
    by_cell = {}
    for rec in records:
        by_cell.setdefault(rec.cell.index, []).append(rec)
    summary = []
    for idx in sorted(by_cell):
        recs = by_cell[idx]
        c = recs[0].cell
        ok = [r for r in recs if r.error is None]
        n = len(ok)
        freq = float(np.mean([r.exact for r in ok])) if n else float("nan")
        mis = np.array([r.misclustering for r in ok])
        summary.append({
            "n1": c.n1, "n2": c.n2, "K": config.K, "L": config.L, "Cs": c.Cs, "pmax": c.pmax,
            "method": config.method, "trials": n, "recovery_freq": freq,
            "recovery_se": math.sqrt(freq * (1 - freq) / n) if n else float("nan"),
            "mean_misclustering": float(mis.mean()) if n else float("nan"),
            "misclustering_se": float(mis.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "fallback_freq": float(np.mean([r.fallback for r in ok])) if n else float("nan"),
            "errors": len(recs) - n, "monotone_ok": True,
        })
    violations = []
    for n1 in config.n1:
        rows = sorted((s for s in summary if s["n1"] == n1), key=lambda s: s["Cs"])
        for lo, hi in zip(rows, rows[1:]):
            slack = 2 * math.sqrt(lo["recovery_se"] ** 2 + hi["recovery_se"] ** 2)
            if hi["recovery_freq"] < lo["recovery_freq"] - slack:
                hi["monotone_ok"] = False
                violations.append((n1, lo["Cs"], hi["Cs"]))
    return summary, violations


def phase_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every ``(cell, trial)`` and aggregate recovery statistics per cell.

    Recovery frequency is expected to be non-decreasing in ``Cs``; drops
    larger than two combined binomial standard errors are reported in
    ``monotone_violations``.
    """
    jobs = [(config, cell, t) for cell in config.cells() for t in range(config.trials)]
    workers = _workers()
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            records = list(ex.map(_run_job, jobs, chunksize=4))
    else:
        records = [_run_job(j) for j in jobs]
    summary, violations = summarize(config, records)
    return SweepResult(records, summary, violations)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def trials_csv(config: ExperimentConfig, records: list) -> str:
    rows = []
    for rec in records:
        row = rec.row()
        row["K"], row["L"] = config.K, config.L
        rows.append(row)
    return to_csv(rows, TRIAL_COLUMNS)


def summary_csv(summary: list) -> str:
    return to_csv(summary, SUMMARY_COLUMNS)


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _parse_T(s: str):
    return "default" if s.strip() == "default" else float(s)


_CONFIG_PARSERS = {
    "n1": lambda s: [int(x) for x in s.split(",")],
    "Cs": lambda s: [float(x) for x in s.split(",")],
    "K": int, "L": int, "family": str, "rho": float, "c": float,
    "n2": lambda s: None if s.strip() in ("", "auto") else int(s),
    "trials": int, "master_seed": int, "method": str, "T": _parse_T,
    "r": lambda s: None if s.strip() in ("", "auto") else int(s),
    "balance_mode": str, "restarts": int, "diagnostics": _parse_bool,
    "timings": _parse_bool, "output": str,
}


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a key-value file.

    Keys mirror the dataclass fields; ``n1`` and ``Cs`` are comma-separated
    lists, ``n2`` and ``r`` accept ``auto``.
    """
    kwargs = {}
    for key, (lineno, raw) in read_kv(path).items():
        if key not in _CONFIG_PARSERS:
            raise FormatError(path, lineno, f"unknown key {key!r}")
        try:
            kwargs[key] = _CONFIG_PARSERS[key](raw)
        except ValueError:
            raise FormatError(path, lineno, f"bad value for {key}: {raw!r}") from None
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config
