"""Histograms, chi-square tests and deterministic CSV/JSON export."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats as sps

from .qubit import DomainError

SCHEMA_VERSION = 1
MIN_EXPECTED = 5.0


class ExportError(OSError):
    pass


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    underflow: int = 0
    overflow: int = 0

    @property
    def out_of_range(self) -> int:
        return self.underflow + self.overflow

    def merge(self, other: Histogram) -> Histogram:
        if not np.array_equal(self.edges, other.edges):
            raise DomainError("histograms have different edges")
        return Histogram(
            self.edges,
            self.counts + other.counts,
            self.total + other.total,
            self.underflow + other.underflow,
            self.overflow + other.overflow,
        )


@dataclass(frozen=True)
class GofReport:
    statistic: float
    p_value: float
    dof: int
    status: str = "ok"

    @property
    def underpowered(self) -> bool:
        return self.status == "underpowered"


@dataclass(frozen=True)
class ZeroCrossingTable:
    k: np.ndarray
    counts: np.ndarray
    probability: np.ndarray
    ratio_next: np.ndarray


def histogram(values: Sequence[float], edges: Sequence[float]) -> Histogram:
    """Left-closed binning ``[e_i, e_i+1)``; values outside are tallied separately."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise DomainError("need at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be strictly increasing")
    values = np.asarray(values, dtype=float).ravel()
    values = values[~np.isnan(values)]
    idx = np.searchsorted(edges, values, side="right") - 1
    under = int(np.sum(idx < 0))
    over = int(np.sum(idx >= edges.size - 1))
    inside = idx[(idx >= 0) & (idx < edges.size - 1)]
    counts = np.bincount(inside, minlength=edges.size - 1).astype(np.int64)
    return Histogram(edges, counts, int(values.size), under, over)


def lattice_edges(k: int) -> np.ndarray:
    """Bin edges centred on the attainable n/N values ``-1, -1+2/k, ..., 1``."""
    if k < 1:
        raise DomainError("k must be positive")
    half = 1.0 / k
    return np.linspace(-1.0 - half, 1.0 + half, k + 2)


def lattice_pmf(n_over_N: Sequence[float], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Probability mass at each lattice point of n/N for records with ``k`` departures."""
    h = histogram(n_over_N, lattice_edges(k))
    centers = np.linspace(-1.0, 1.0, k + 1)
    return centers, h.counts / max(h.total, 1)


def peak_locations(centers: np.ndarray, pmf: np.ndarray, rel_height: float = 0.05) -> list[float]:
    """Strict local maxima of a lattice pmf (plateaus count once).

    Maxima lower than ``rel_height`` times the global maximum are sampling
    noise in sparse tails and are skipped.
    """
    floor = rel_height * float(np.max(pmf)) if pmf.size else 0.0
    padded = np.concatenate([[-np.inf], pmf, [-np.inf]])
    peaks = []
    i = 1
    while i <= pmf.size:
        j = i
        while j < pmf.size and padded[j + 1] == padded[i]:
            j += 1
        if padded[i] > padded[i - 1] and padded[i] > padded[j + 1] and padded[i] >= floor:
            peaks.append(float(np.mean(centers[i - 1 : j])))
        i = j + 1
    return peaks


def _merge_sparse(observed: np.ndarray, expected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group adjacent bins left to right until each group expects >= 5."""
    obs_groups, exp_groups = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= MIN_EXPECTED:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_groups:
            obs_groups[-1] += o_acc
            exp_groups[-1] += e_acc
        else:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
    return np.array(obs_groups), np.array(exp_groups)


def chi_square_gof(observed: Sequence[int], probabilities: Sequence[float]) -> GofReport:
    """Pearson goodness of fit with sparse bins merged."""
    observed = np.asarray(observed, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    if observed.shape != probabilities.shape:
        raise DomainError("observed counts and probabilities differ in length")
    total = observed.sum()
    obs, exp = _merge_sparse(observed, total * probabilities / probabilities.sum())
    if obs.size < 2 or np.any(exp < MIN_EXPECTED):
        return GofReport(math.nan, math.nan, 0, "underpowered")
    statistic = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return GofReport(statistic, float(sps.chi2.sf(statistic, dof)), dof)


def chi_square_binomial(counts: Sequence[int], k: int, p: float = 0.5) -> GofReport:
    """Test counts over ``l = 0..k`` against Binomial(k, p)."""
    counts = np.asarray(counts)
    if counts.size != k + 1:
        raise DomainError(f"expected {k + 1} bins, got {counts.size}")
    return chi_square_gof(counts, sps.binom.pmf(np.arange(k + 1), k, p))


def two_sample_report(sample_a: Sequence[float], sample_b: Sequence[float]) -> GofReport:
    """Two-sample chi-square homogeneity test over the shared value grid."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    if a.size == 0 or b.size == 0:
        raise DomainError("both samples must be non-empty")
    # lattice values are exact rationals; rounding only guards float noise
    grid, inverse = np.unique(np.round(np.concatenate([a, b]), 12), return_inverse=True)
    ca = np.bincount(inverse[: a.size], minlength=grid.size).astype(float)
    cb = np.bincount(inverse[a.size :], minlength=grid.size).astype(float)
    frac_a = a.size / (a.size + b.size)
    # merge on the smaller expected count of the two rows
    exp_min = (ca + cb) * min(frac_a, 1.0 - frac_a)
    groups_a, groups_b = [], []
    acc_a = acc_b = acc_e = 0.0
    for x, y, e in zip(ca, cb, exp_min):
        acc_a, acc_b, acc_e = acc_a + x, acc_b + y, acc_e + e
        if acc_e >= MIN_EXPECTED:
            groups_a.append(acc_a)
            groups_b.append(acc_b)
            acc_a = acc_b = acc_e = 0.0
    if acc_a or acc_b:
        if groups_a:
            groups_a[-1] += acc_a
            groups_b[-1] += acc_b
        else:
            groups_a.append(acc_a)
            groups_b.append(acc_b)
    if len(groups_a) < 2:
        if np.array_equal(ca, cb) or len(grid) == 1:
            return GofReport(0.0, 1.0, 0)
        return GofReport(math.nan, math.nan, 0, "underpowered")
    table = np.array([groups_a, groups_b])
    res = sps.chi2_contingency(table, correction=False)
    return GofReport(float(res.statistic), float(res.pvalue), int(res.dof))


def zero_crossing_summary(return_counts: Sequence[int]) -> ZeroCrossingTable:
    """Normalized ``P(k)`` with successive ratios ``P(k+1)/P(k)``."""
    counts = np.asarray(return_counts, dtype=np.int64)
    total = counts.sum()
    if total <= 0:
        raise DomainError("empty return-count histogram")
    prob = counts / total
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.append(np.where(prob[:-1] > 0, prob[1:] / prob[:-1], np.nan), np.nan)
    return ZeroCrossingTable(np.arange(counts.size), counts, prob, ratio)


# -- export --------------------------------------------------------------------

_FLOAT_TOKEN = re.compile(r'"__f17__([^"]*)"')


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _tokenize(obj: Any) -> Any:
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return "__f17__" + fmt_float(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _tokenize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tokenize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_tokenize(v) for v in obj.tolist()]
    return obj


def dumps_json(payload: Any) -> str:
    """JSON text with every float written to 17 significant digits."""
    text = json.dumps(_tokenize(payload), indent=2, sort_keys=True)
    return _FLOAT_TOKEN.sub(lambda m: m.group(1), text) + "\n"


def table_of(obj: Any) -> tuple[list[str], list[list[Any]]]:
    """Column names and rows for any exportable artifact."""
    from .oracle import DeparturePMF, WalkTable
    from .trajectory import CampaignResult

    if isinstance(obj, WalkTable):
        rows = [[obj.steps, k, l, c] for (k, l), c in sorted(obj.counts.items())]
        return ["T", "k", "l", "count"], rows
    if isinstance(obj, DeparturePMF):
        return ["k", "l", "probability"], [[obj.k, l, float(p)] for l, p in enumerate(obj.probabilities)]
    if isinstance(obj, CampaignResult):
        cols = ["copy", "preparation", "k", "n_plus", "n_minus", "n_over_N"]
        rows = [
            list(r)
            for r in zip(
                obj.copy_index.tolist(), obj.prep_index.tolist(), obj.k.tolist(),
                obj.n_plus.tolist(), obj.n_minus.tolist(), obj.n_over_N.tolist(),
            )
        ]
        return cols, rows
    if isinstance(obj, Histogram):
        rows = [[lo, hi, int(c)] for lo, hi, c in zip(obj.edges[:-1], obj.edges[1:], obj.counts)]
        return ["left", "right", "count"], rows
    if isinstance(obj, ZeroCrossingTable):
        rows = [[int(k), int(c), p, r] for k, c, p, r in zip(obj.k, obj.counts, obj.probability, obj.ratio_next)]
        return ["k", "count", "probability", "ratio_next"], rows
    raise TypeError(f"cannot export {type(obj).__name__}")


def to_csv(obj: Any) -> str:
    header, rows = table_of(obj)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def to_payload(obj: Any, config: dict | None = None) -> dict:
    header, rows = table_of(obj)
    data: dict[str, Any] = {"columns": header, "rows": rows}
    if isinstance(obj, Histogram):
        data.update(total=obj.total, underflow=obj.underflow, overflow=obj.overflow)
    if hasattr(obj, "no_return"):
        data["no_return"] = obj.no_return
    return {"schema_version": SCHEMA_VERSION, "config": config or {}, "data": data}


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def export(obj: Any, fmt: str, path: str | Path, config: dict | None = None) -> Path:
    if fmt == "csv":
        return write_text(path, to_csv(obj))
    if fmt == "json":
        return write_text(path, dumps_json(to_payload(obj, config)))
    raise DomainError(f"unknown export format {fmt!r}")


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
