"""Comparison rankers: random, most popular, and pointwise matrix factorization."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from kgbpr import seeding
from kgbpr.bpr import TrainingDivergence, TrainReport, _adjacency, draw_samples, run_passes
from kgbpr.model import EmbeddingModel, HyperParams, init_model, top_n_ids
from kgbpr.store import Adjacency


@dataclass(frozen=True)
class PopularityTable:
    counts: np.ndarray
    order: np.ndarray

    @classmethod
    def from_adjacency(cls, adj: Adjacency) -> "PopularityTable":
        counts = np.bincount(_adjacency(adj).indices, minlength=_adjacency(adj).n)
        return cls(counts, np.argsort(-counts, kind="stable"))

    @classmethod
    def from_counts(cls, counts) -> "PopularityTable":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts, np.argsort(-counts, kind="stable"))

    @property
    def n(self) -> int:
        return int(self.counts.size)


def random_scores(n: int, seed: int) -> np.ndarray:
    return seeding.rng(seed, "random-ranker").random(n)


def random_ranker(n: int, exclude=(), top_n: int = 10, seed: int = 0) -> list[int]:
    """Uniform sample without replacement of non-excluded objects, in random order."""
    return top_n_ids(random_scores(n, seed), exclude, top_n).tolist()


def most_popular_ranker(pt: PopularityTable, exclude=(), top_n: int = 10) -> list[int]:
    if len(exclude):
        order = pt.order[~np.isin(pt.order, np.fromiter(exclude, dtype=np.int64))]
    else:
        order = pt.order
    return order[:top_n].tolist()


def pointwise_loss(model: EmbeddingModel, s, o, y, hp: HyperParams) -> np.ndarray:
    """Per-pair loss 0.5*(y - x)^2 + 0.5*(lambda_s|U_s|^2 + lambda_o(|V_o|^2 + b_o^2)).

    The halves make the update rule below an exact gradient step.
    """
    s, o = np.asarray(s, dtype=np.int64), np.asarray(o, dtype=np.int64)
    U, V, b = model.U, model.V, model.b
    x = np.einsum("ij,ij->i", U[s], V[o]) + b[o]
    reg = hp.lambda_s * np.einsum("ij,ij->i", U[s], U[s]) + hp.lambda_o_pos * (
        np.einsum("ij,ij->i", V[o], V[o]) + b[o] ** 2
    )
    return 0.5 * (np.asarray(y, dtype=np.float64) - x) ** 2 + 0.5 * reg


def pointwise_step(model: EmbeddingModel, s: int, o: int, y: float, hp: HyperParams) -> EmbeddingModel:
    U, V, b = model.U, model.V, model.b
    us, vo = U[s].copy(), V[o].copy()
    e = y - (us @ vo + b[o])
    a = hp.alpha
    U[s] = us + a * (e * vo - hp.lambda_s * us)
    V[o] = vo + a * (e * us - hp.lambda_o_pos * vo)
    b[o] = b[o] + a * (e - hp.lambda_o_pos * b[o])
    return model


@numba.njit(cache=True)
def _mf_pass(U, V, b, s_arr, p_arr, q_arr, start, stop, alpha, ls, lo):
    K = U.shape[1]
    for i in range(start, stop):
        s = s_arr[i]
        for half in range(2):
            if half == 0:
                o = p_arr[i]
                y = 1.0
            else:
                o = q_arr[i]
                y = 0.0
            x = b[o]
            for k in range(K):
                x += U[s, k] * V[o, k]
            e = y - x
            acc = 0.0
            for k in range(K):
                u = U[s, k]
                v = V[o, k]
                U[s, k] = u + alpha * (e * v - ls * u)
                V[o, k] = v + alpha * (e * u - lo * v)
                acc += U[s, k] + V[o, k]
            b[o] = b[o] + alpha * (e - lo * b[o])
            if not np.isfinite(acc + b[o]):
                return i
    return -1


def pointwise_mf_fit(g, hp: HyperParams = HyperParams()) -> tuple[EmbeddingModel, TrainReport]:
    """Pointwise MF by SGD on squared error with one uniform negative per positive.

    Each drawn observed edge (s, o+) is followed by an unlinked (s, o-) with
    target 0. The report's objective is the mean squared error on a monitoring
    set of positive and negative pairs (lower is better).
    """
    adj = _adjacency(g)
    model = init_model(adj.m, adj.n, hp)
    samples = draw_samples(adj, int(hp.epochs) * adj.edge_count, seeding.rng(hp.seed, "mf-samples"))
    mon = draw_samples(adj, min(1000, len(samples)), seeding.rng(hp.seed, "mf-monitor"))
    mon_s = np.concatenate([mon.s, mon.s])
    mon_o = np.concatenate([mon.o_pos, mon.o_neg])
    mon_y = np.concatenate([np.ones(len(mon)), np.zeros(len(mon))])

    def objective(mdl):
        return squared_error(mdl, mon_s, mon_o, mon_y)

    def fail(i):
        raise TrainingDivergence(i, samples[i], "pointwise MF parameters", "try a smaller learning rate")

    trace = run_passes(
        _mf_pass,
        model,
        (samples.s, samples.o_pos, samples.o_neg),
        (float(hp.alpha), float(hp.lambda_s), float(hp.lambda_o_pos)),
        objective,
        len(samples),
        fail,
    )
    return model, TrainReport(2 * len(samples), trace[-1][1], trace, samples.skipped_subjects)


def pointwise_mf_train(g, hp: HyperParams = HyperParams()) -> EmbeddingModel:
    return pointwise_mf_fit(g, hp)[0]


def squared_error(model: EmbeddingModel, s, o, y) -> float:
    s, o = np.asarray(s, dtype=np.int64), np.asarray(o, dtype=np.int64)
    x = np.einsum("ij,ij->i", model.U[s], model.V[o]) + model.b[o]
    return float(np.mean((np.asarray(y) - x) ** 2))
