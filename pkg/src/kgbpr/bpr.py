"""BPR training: uniform (s, o+, o-) sampling and stochastic gradient ascent."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from kgbpr import seeding
from kgbpr.model import EmbeddingModel, HyperParams, init_model, log_sigmoid, probability
from kgbpr.store import Adjacency

log = logging.getLogger(__name__)

MONITOR_SIZE = 1000
CHECKPOINTS = 10
PARAM_NAMES = ("U_s", "V_o_pos", "V_o_neg", "b_o_pos", "b_o_neg")


class SamplingError(ValueError):
    pass


class TrainingDivergence(FloatingPointError):
    def __init__(self, index, sample, parameter, hint=""):
        self.index = index
        self.sample = sample
        self.parameter = parameter
        msg = f"non-finite {parameter} after sample #{index} {tuple(sample)}"
        super().__init__(msg + (f"; {hint}" if hint else ""))


class TrainSample(NamedTuple):
    s: int
    o_pos: int
    o_neg: int


@dataclass
class TrainSamples:
    """Columnar training set; iterating yields :class:`TrainSample` tuples."""

    s: np.ndarray
    o_pos: np.ndarray
    o_neg: np.ndarray
    skipped_subjects: int = 0

    def __len__(self):
        return int(self.s.size)

    def __iter__(self):
        for row in zip(self.s.tolist(), self.o_pos.tolist(), self.o_neg.tolist()):
            yield TrainSample(*row)

    def __getitem__(self, i):
        return TrainSample(int(self.s[i]), int(self.o_pos[i]), int(self.o_neg[i]))


@dataclass
class TrainReport:
    samples_processed: int = 0
    final_objective: float = float("nan")
    objective_trace: list[tuple[int, float]] = field(default_factory=list)
    skipped_subjects: int = 0


def _adjacency(g) -> Adjacency:
    return g.adjacency if hasattr(g, "adjacency") else g


def _sampleable_edges(adj: Adjacency):
    if adj.n < 2:
        raise SamplingError(f"need at least 2 objects to sample negatives, got {adj.n}")
    if adj.edge_count == 0:
        raise SamplingError("training graph has no edges")
    deg = adj.degrees()
    full = deg >= adj.n
    skipped = int(full.sum())
    if skipped:
        log.warning("%d subject(s) linked to every object; their edges are not sampled", skipped)
    src, dst = adj.edges()
    keep = ~full[src]
    if not keep.any():
        raise SamplingError("no sampleable edge: every subject is linked to all objects")
    return src[keep], dst[keep], skipped


def _negatives(adj: Adjacency, s: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample one unlinked object per subject in ``s``."""
    neg = rng.integers(0, adj.n, size=s.size)
    bad = np.flatnonzero(adj.contains(s, neg))
    while bad.size:
        neg[bad] = rng.integers(0, adj.n, size=bad.size)
        bad = bad[adj.contains(s[bad], neg[bad])]
    return neg


def draw_samples(adj: Adjacency, count: int, rng: np.random.Generator) -> TrainSamples:
    src, dst, skipped = _sampleable_edges(adj)
    pick = rng.integers(0, src.size, size=count)
    s = src[pick]
    return TrainSamples(s, dst[pick], _negatives(adj, s, rng), skipped)


def sample_training_set(g, epochs: int, seed: int) -> TrainSamples:
    """Draw ``epochs * edge_count`` samples with replacement.

    Each sample picks an observed edge uniformly, then an object not linked to
    its subject uniformly by rejection over all objects of the graph.
    """
    adj = _adjacency(g)
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    return draw_samples(adj, int(epochs) * adj.edge_count, seeding.rng(seed, "samples"))


def sample_objective(model: EmbeddingModel, s, o_pos, o_neg, hp: HyperParams) -> np.ndarray:
    """Per-sample regularized BPR objective (to be maximized)."""
    s, o_pos, o_neg = (np.asarray(a, dtype=np.int64) for a in (s, o_pos, o_neg))
    U, V, b = model.U, model.V, model.b
    diff = np.einsum("ij,ij->i", U[s], V[o_pos] - V[o_neg]) + b[o_pos] - b[o_neg]
    reg = (
        hp.lambda_s * np.einsum("ij,ij->i", U[s], U[s])
        + hp.lambda_o_pos * (np.einsum("ij,ij->i", V[o_pos], V[o_pos]) + b[o_pos] ** 2)
        + hp.lambda_o_neg * (np.einsum("ij,ij->i", V[o_neg], V[o_neg]) + b[o_neg] ** 2)
    )
    return log_sigmoid(diff) - reg


def sgd_step(model: EmbeddingModel, sample, hp: HyperParams) -> EmbeddingModel:
    """One gradient-ascent update for a single (s, o+, o-) sample, in place.

    All five gradients are computed from the pre-update parameters before any
    of them is written.
    """
    s, p, q = (int(v) for v in sample)
    U, V, b = model.U, model.V, model.b
    us, vp, vq = U[s].copy(), V[p].copy(), V[q].copy()
    bp, bq = b[p], b[q]
    d = float(probability(-(us @ (vp - vq) + bp - bq)))
    a = hp.alpha
    new = (
        us + a * (d * (vp - vq) - 2 * hp.lambda_s * us),
        vp + a * (d * us - 2 * hp.lambda_o_pos * vp),
        vq + a * (-d * us - 2 * hp.lambda_o_neg * vq),
        bp + a * (d - 2 * hp.lambda_o_pos * bp),
        bq + a * (-d - 2 * hp.lambda_o_neg * bq),
    )
    for name, value in zip(PARAM_NAMES, new):
        if not np.all(np.isfinite(value)):
            raise TrainingDivergence(-1, (s, p, q), name)
    U[s], V[p], V[q] = new[0], new[1], new[2]
    b[p], b[q] = new[3], new[4]
    return model


@numba.njit(cache=True)
def _bpr_pass(U, V, b, s_arr, p_arr, q_arr, start, stop, alpha, ls, lp, lq):
    K = U.shape[1]
    for i in range(start, stop):
        s = s_arr[i]
        p = p_arr[i]
        q = q_arr[i]
        x = b[p] - b[q]
        for k in range(K):
            x += U[s, k] * (V[p, k] - V[q, k])
        # d = 1 - sigmoid(x) = sigmoid(-x)
        if x >= 0.0:
            e = np.exp(-x)
            d = e / (1.0 + e)
        else:
            d = 1.0 / (1.0 + np.exp(x))
        acc = 0.0
        for k in range(K):
            u = U[s, k]
            vp = V[p, k]
            vq = V[q, k]
            U[s, k] = u + alpha * (d * (vp - vq) - 2.0 * ls * u)
            V[p, k] = vp + alpha * (d * u - 2.0 * lp * vp)
            V[q, k] = vq + alpha * (-d * u - 2.0 * lq * vq)
            acc += U[s, k] + V[p, k] + V[q, k]
        b[p] = b[p] + alpha * (d - 2.0 * lp * b[p])
        b[q] = b[q] + alpha * (-d - 2.0 * lq * b[q])
        if not np.isfinite(acc + b[p] + b[q]):
            return i
    return -1


def _nonfinite_param(model, s, p, q):
    groups = (model.U[s], model.V[p], model.V[q], model.b[p:p + 1], model.b[q:q + 1])
    for name, g in zip(PARAM_NAMES, groups):
        if not np.all(np.isfinite(g)):
            return name
    return "unknown"


def checkpoints(total: int, count: int = CHECKPOINTS) -> list[int]:
    return sorted(set(np.linspace(0, total, count + 1).round().astype(int).tolist()))


def run_passes(kernel, model, samples, extra_args, objective, total, on_fail):
    """Run ``kernel`` over ``samples`` in chunks, recording the objective at checkpoints."""
    trace = [(0, objective(model))]
    marks = checkpoints(total)
    for start, stop in zip(marks[:-1], marks[1:]):
        bad = kernel(model.U, model.V, model.b, *samples, start, stop, *extra_args)
        if bad >= 0:
            on_fail(bad)
        trace.append((stop, objective(model)))
    return trace


def train(g, hp: HyperParams = HyperParams()) -> tuple[EmbeddingModel, TrainReport]:
    """Fit a BPR model on one predicate's training adjacency.

    Runs one update per pre-drawn sample, in order; exhausting the sample set
    is the only stopping rule. The returned report tracks the regularized
    objective on a separate monitoring sample and is informational only.
    """
    adj = _adjacency(g)
    model = init_model(adj.m, adj.n, hp)
    samples = sample_training_set(adj, hp.epochs, hp.seed)
    mon = draw_samples(adj, min(MONITOR_SIZE, len(samples)), seeding.rng(hp.seed, "monitor"))

    def objective(mdl):
        return float(sample_objective(mdl, mon.s, mon.o_pos, mon.o_neg, hp).mean())

    def fail(i):
        sample = samples[i]
        raise TrainingDivergence(i, sample, _nonfinite_param(model, *sample), "try a smaller learning rate")

    trace = run_passes(
        _bpr_pass,
        model,
        (samples.s, samples.o_pos, samples.o_neg),
        (float(hp.alpha), float(hp.lambda_s), float(hp.lambda_o_pos), float(hp.lambda_o_neg)),
        objective,
        len(samples),
        fail,
    )
    report = TrainReport(len(samples), trace[-1][1], trace, samples.skipped_subjects)
    return model, report
