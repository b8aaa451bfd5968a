"""Text file formats.

Edge list
    ``n1 n2 m`` on the first line, then ``m`` lines ``i j`` (0-indexed),
    ascending by ``i`` then ``j``.
Labels
    One 1-indexed integer per line. Lines starting with ``#`` are ignored.
Partition
    A ``# K=<k> n=<n>`` header followed by one 1-indexed label per line.
Gram triplets
    ``n1 nnz`` header, then ``i j count`` lines with ``i < j``.
Key-value config
    ``key = value`` per line, ``#`` starts a comment, list values are
    comma-separated.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .model import BipartiteGraph, ModelSpec, build_model
from .rounding import Partition
from .spectral import HollowedGram


class FormatError(ValueError):
    """Malformed input file; the message carries the path and line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


def _ints(path, lineno, line, count):
    parts = line.split()
    if len(parts) != count:
        raise FormatError(path, lineno, f"expected {count} integers, got {line.strip()!r}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise FormatError(path, lineno, f"not an integer in {line.strip()!r}") from None


def write_edge_list(path, A: BipartiteGraph) -> None:
    rows = A.row_of_edge()
    with open(path, "w") as f:
        f.write(f"{A.n1} {A.n2} {A.nnz}\n")
        for i, j in zip(rows.tolist(), A.indices.tolist()):
            f.write(f"{i} {j}\n")


def read_edge_list(path) -> BipartiteGraph:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError(path, 1, "empty file, expected header 'n1 n2 m'")
    n1, n2, m = _ints(path, 1, lines[0], 3)
    if n1 < 0 or n2 < 0 or m < 0:
        raise FormatError(path, 1, "negative count in header")
    body = [(k + 2, ln) for k, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != m:
        raise FormatError(path, len(lines), f"header declares {m} edges, found {len(body)}")
    ii = np.empty(m, dtype=np.int64)
    jj = np.empty(m, dtype=np.int64)
    prev = (-1, -1)
    for e, (lineno, ln) in enumerate(body):
        i, j = _ints(path, lineno, ln, 2)
        if not (0 <= i < n1 and 0 <= j < n2):
            raise FormatError(path, lineno, f"edge ({i}, {j}) outside [0,{n1}) x [0,{n2})")
        if (i, j) <= prev:
            raise FormatError(path, lineno, "edges must be strictly ascending by (i, j)")
        prev = (i, j)
        ii[e], jj[e] = i, j
    indptr = np.zeros(n1 + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(ii, minlength=n1))
    return BipartiteGraph(n1, n2, indptr, jj)


def write_labels(path, labels) -> None:
    with open(path, "w") as f:
        f.writelines(f"{int(v)}\n" for v in labels)


def read_labels(path) -> np.ndarray:
    out = []
    with open(path) as f:
        for lineno, ln in enumerate(f, 1):
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            (v,) = _ints(path, lineno, s, 1)
            if v < 1:
                raise FormatError(path, lineno, f"labels are 1-indexed, got {v}")
            out.append(v)
    return np.array(out, dtype=np.int64)


def write_partition(path, part: Partition) -> None:
    with open(path, "w") as f:
        f.write(f"# K={part.K} n={part.n}\n")
        f.writelines(f"{int(v)}\n" for v in part.labels)


def read_partition(path) -> Partition:
    with open(path) as f:
        header = f.readline()
    m = re.fullmatch(r"#\s*K=(\d+)\s+n=(\d+)\s*", header)
    if not m:
        raise FormatError(path, 1, "expected header '# K=<k> n=<n>'")
    K, n = int(m.group(1)), int(m.group(2))
    labels = read_labels(path)
    if len(labels) != n:
        raise FormatError(path, 1, f"header declares n={n}, found {len(labels)} labels")
    if len(labels) and labels.max() > K:
        raise FormatError(path, 1, f"label {labels.max()} exceeds K={K}")
    return Partition(labels, K, degenerate=bool(np.any(np.bincount(labels - 1, minlength=K) == 0)))


def write_gram(path, B: HollowedGram) -> None:
    i, j, c = B.upper_triplets()
    with open(path, "w") as f:
        f.write(f"{B.n1} {len(i)}\n")
        for row in zip(i.tolist(), j.tolist(), c.tolist()):
            f.write("%d %d %d\n" % row)


def read_gram(path) -> HollowedGram:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError(path, 1, "empty file, expected header 'n1 nnz'")
    n1, nnz = _ints(path, 1, lines[0], 2)
    trip = []
    for lineno, ln in enumerate(lines[1:], 2):
        if not ln.strip():
            continue
        i, j, c = _ints(path, lineno, ln, 3)
        if not (0 <= i < j < n1) or c < 0:
            raise FormatError(path, lineno, "need 0 <= i < j < n1 and count >= 0")
        trip.append((i, j, c))
    if len(trip) != nnz:
        raise FormatError(path, len(lines), f"header declares {nnz} entries, found {len(trip)}")
    arr = np.array(trip, dtype=np.int64).reshape(-1, 3)
    return HollowedGram.from_triplets(n1, arr[:, 0], arr[:, 1], arr[:, 2])


def read_kv(path) -> dict[str, tuple[int, str]]:
    """Parse a ``key = value`` file into ``{key: (lineno, raw value)}``."""
    out = {}
    with open(path) as f:
        for lineno, ln in enumerate(f, 1):
            s = ln.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise FormatError(path, lineno, f"expected 'key = value', got {s!r}")
            key, value = (p.strip() for p in s.split("=", 1))
            if not key:
                raise FormatError(path, lineno, "empty key")
            if key in out:
                raise FormatError(path, lineno, f"duplicate key {key!r}")
            out[key] = (lineno, value)
    return out


MODEL_KEYS = ("n1", "n2", "K", "L", "pi", "balance_mode", "seed")


def read_model_file(path) -> tuple[ModelSpec, int | None]:
    """Build a model from a key-value file; returns ``(model, seed)``.

    Keys: ``n1, n2, K, L`` (ints), ``pi`` (K*L comma-separated floats,
    row-major), optional ``balance_mode`` and ``seed``.
    """
    kv = read_kv(path)
    for key, (lineno, _) in kv.items():
        if key not in MODEL_KEYS:
            raise FormatError(path, lineno, f"unknown key {key!r}")
    for key in ("n1", "n2", "K", "L", "pi"):
        if key not in kv:
            raise FormatError(path, 0, f"missing key {key!r}")

    def conv(key, fn):
        lineno, raw = kv[key]
        try:
            return fn(raw)
        except ValueError:
            raise FormatError(path, lineno, f"bad value for {key}: {raw!r}") from None

    n1, n2, K, L = (conv(k, int) for k in ("n1", "n2", "K", "L"))
    pi = conv("pi", lambda s: [float(x) for x in s.split(",")])
    if len(pi) != K * L:
        raise FormatError(path, kv["pi"][0], f"pi needs K*L={K * L} values, got {len(pi)}")
    mode = kv["balance_mode"][1] if "balance_mode" in kv else "exact-balanced"
    seed = conv("seed", int) if "seed" in kv else None
    return build_model(n1, n2, K, L, np.array(pi).reshape(K, L), mode, seed=seed), seed


def write_model_file(path, model: ModelSpec, balance_mode: str = "exact-balanced", seed=None) -> None:
    pi = ",".join(repr(float(x)) for x in np.asarray(model.Pi).ravel())
    lines = [f"n1 = {model.n1}", f"n2 = {model.n2}", f"K = {model.K}", f"L = {model.L}",
             f"pi = {pi}", f"balance_mode = {balance_mode}"]
    if seed is not None:
        lines.append(f"seed = {seed}")
    Path(path).write_text("\n".join(lines) + "\n")
