"""Topology metrics of predicate subgraphs and their regression against performance."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from kgbpr.store import PredicateBipartiteGraph

TOPOLOGY_METRICS = ("density", "average_degree", "clustering_coefficient")
PERFORMANCE_METRICS = ("hr", "arhr", "auc")


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class TopologyProfile:
    predicate: str
    density: float
    average_degree: float
    clustering_coefficient: float


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    rvalue: float
    n_points: int


def density(g: PredicateBipartiteGraph) -> float:
    """Edges over the m*n possible subject-object links."""
    if g.m < 1 or g.n < 1:
        raise ValueError(f"density undefined for empty vertex set (m={g.m}, n={g.n})")
    return g.edge_count / (g.m * g.n)


def average_degree(g: PredicateBipartiteGraph) -> float:
    if g.m + g.n == 0:
        return 0.0
    return 2.0 * g.edge_count / (g.m + g.n)


def merged_adjacency(g: PredicateBipartiteGraph) -> sp.csr_matrix:
    """Undirected simple graph over entity labels; a label on both sides is one node."""
    labels = sorted(set(g.subjects) | set(g.objects))
    index = {label: i for i, label in enumerate(labels)}
    smap = np.array([index[x] for x in g.subjects], dtype=np.int64)
    omap = np.array([index[x] for x in g.objects], dtype=np.int64)
    src, dst = g.adjacency.edges()
    a, b = smap[src], omap[dst]
    keep = a != b
    a, b = a[keep], b[keep]
    size = len(labels)
    A = sp.coo_matrix((np.ones(a.size), (a, b)), shape=(size, size)).tocsr()
    A = A + A.T
    A.data[:] = 1.0
    A.eliminate_zeros()
    return A.tocsr()


def transitivity(A: sp.csr_matrix) -> float:
    """3 * triangles / connected triples of an undirected 0/1 adjacency matrix."""
    deg = np.asarray(A.sum(axis=1)).ravel()
    wedges = float((deg * (deg - 1)).sum()) / 2.0
    if wedges == 0:
        return 0.0
    # trace(A^3) = 6 * triangles = sum of (A @ A) restricted to A's support
    closed = float((A @ A).multiply(A).sum())
    return (closed / 2.0) / wedges


def clustering_coefficient(g: PredicateBipartiteGraph, kg=None) -> float:
    """Global transitivity of the label-merged undirected view of ``g``.

    ``kg`` is accepted for interface symmetry; labels already live on ``g``.
    """
    return transitivity(merged_adjacency(g))


def profile(g: PredicateBipartiteGraph) -> TopologyProfile:
    return TopologyProfile(g.predicate, density(g), average_degree(g), clustering_coefficient(g))


def linear_regression(points: Iterable[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares fit with Pearson r.

    A constant ``y`` gives slope 0 and r 0.
    """
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise RegressionError(f"need at least 2 points, got {len(pts)}")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx, syy, sxy = dx @ dx, dy @ dy, dx @ dy
    if sxx == 0 or not np.ptp(x) > 0:
        raise RegressionError("x values have zero variance")
    slope = sxy / sxx
    r = 0.0 if syy == 0 else sxy / math.sqrt(sxx * syy)
    return RegressionFit(float(slope), float(ym - slope * xm), float(min(1.0, max(-1.0, r))), len(pts))


def correlate_topology(profiles: Sequence[TopologyProfile], reports, strict: bool = True) -> dict[tuple[str, str], RegressionFit]:
    """Regress each performance metric on each topology metric, one point per predicate.

    ``reports`` holds one report per predicate (a single method). Returns the
    3x3 grid keyed by ``(topology_metric, performance_metric)``. With
    ``strict=False`` a degenerate cell (e.g. a metric constant across
    predicates) becomes a NaN fit instead of raising.
    """
    by_pred = {p.predicate: p for p in profiles}
    perf = {r.predicate: r for r in reports}
    if set(by_pred) != set(perf):
        only_p = sorted(set(by_pred) - set(perf))
        only_r = sorted(set(perf) - set(by_pred))
        raise RegressionError(f"predicate mismatch: only in profiles {only_p}, only in reports {only_r}")
    preds = sorted(by_pred)
    grid = {}
    for xm in TOPOLOGY_METRICS:
        for ym in PERFORMANCE_METRICS:
            pts = [(getattr(by_pred[p], xm), getattr(perf[p], ym)) for p in preds]
            try:
                grid[(xm, ym)] = linear_regression(pts)
            except RegressionError as exc:
                if strict:
                    raise RegressionError(f"{ym} vs {xm}: {exc}") from exc
                grid[(xm, ym)] = RegressionFit(math.nan, math.nan, math.nan, len(pts))
    return grid


def scatter_points(profiles, reports, x_metric: str, y_metric: str) -> list[tuple[str, float, float]]:
    perf = {r.predicate: r for r in reports}
    return [(p.predicate, getattr(p, x_metric), getattr(perf[p.predicate], y_metric)) for p in sorted(profiles, key=lambda p: p.predicate)]


def _fmt(x):
    return repr(float(x))


def profiles_to_csv(profiles: Sequence[TopologyProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("predicate",) + TOPOLOGY_METRICS)
    for p in sorted(profiles, key=lambda p: p.predicate):
        w.writerow((p.predicate, _fmt(p.density), _fmt(p.average_degree), _fmt(p.clustering_coefficient)))
    return buf.getvalue()


def regressions_to_csv(grid: dict[tuple[str, str], RegressionFit]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x_metric", "y_metric", "slope", "intercept", "rvalue", "n_points"))
    for xm in TOPOLOGY_METRICS:
        for ym in PERFORMANCE_METRICS:
            f = grid[(xm, ym)]
            w.writerow((xm, ym, _fmt(f.slope), _fmt(f.intercept), _fmt(f.rvalue), f.n_points))
    return buf.getvalue()


def scatter_to_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("predicate", "x", "y"))
    for name, x, y in points:
        w.writerow((name, _fmt(x), _fmt(y)))
    return buf.getvalue()
