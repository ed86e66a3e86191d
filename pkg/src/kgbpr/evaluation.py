"""Leave-one-out evaluation with HR@N, ARHR and exact AUC."""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from kgbpr import seeding
from kgbpr.baselines import PopularityTable, pointwise_mf_train, random_scores
from kgbpr.bpr import train
from kgbpr.model import HyperParams, top_n_ids
from kgbpr.store import Adjacency

METHODS = ("bpr", "mf", "mp", "random")
CSV_COLUMNS = ("predicate", "method", "repeat", "hr", "arhr", "auc", "n_subjects_tested")


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Repeat:
    """One leave-one-out split: ``subjects[i]`` has ``held_out[i]`` moved to test."""

    index: int
    subjects: np.ndarray
    held_out: np.ndarray
    train: Adjacency

    def held_out_map(self) -> dict[int, int]:
        return dict(zip(self.subjects.tolist(), self.held_out.tolist()))


@dataclass(frozen=True)
class SplitSpec:
    repeat_count: int
    seed: int
    repeats: tuple[Repeat, ...]
    n_ineligible: int = 0


def make_split(g, repeat_count: int = 5, seed: int = 0) -> SplitSpec:
    """Hold out one uniformly chosen edge per subject of degree >= 2, per repeat."""
    adj = g.adjacency if hasattr(g, "adjacency") else g
    name = getattr(g, "predicate", "<graph>")
    if repeat_count < 1:
        raise ValueError(f"repeat_count must be >= 1, got {repeat_count}")
    deg = adj.degrees()
    eligible = np.flatnonzero(deg >= 2)
    if eligible.size == 0:
        raise EvaluationError(f"predicate {name!r}: no subject has degree >= 2, nothing to hold out")
    repeats = []
    for r in range(repeat_count):
        rng = seeding.rng(seed, "split", r)
        pick = rng.integers(0, deg[eligible])
        held = adj.indices[adj.indptr[eligible] + pick]
        repeats.append(Repeat(r, eligible, held, adj.without(eligible, held)))
    return SplitSpec(repeat_count, seed, tuple(repeats), int(adj.m - eligible.size))


def _check_lists(recommendations, held_out):
    missing = [s for s in held_out if s not in recommendations]
    if missing:
        raise EvaluationError(f"no recommendation list for tested subject(s) {missing[:5]}")


def hit_rate(recommendations: Mapping[int, Sequence[int]], held_out: Mapping[int, int]) -> float:
    _check_lists(recommendations, held_out)
    if not held_out:
        return 0.0
    hits = sum(1 for s, o in held_out.items() if o in list(recommendations[s]))
    return hits / len(held_out)


def arhr(recommendations: Mapping[int, Sequence[int]], held_out: Mapping[int, int]) -> float:
    _check_lists(recommendations, held_out)
    if not held_out:
        return 0.0
    total = 0.0
    for s, o in held_out.items():
        lst = list(recommendations[s])
        if o in lst:
            total += 1.0 / (lst.index(o) + 1)
    return total / len(held_out)


# A block scorer maps an array of subject ids to a (len(subjects), n) score matrix.
BlockScorer = Callable[[np.ndarray], np.ndarray]


def auc_detail(scorer: BlockScorer, split: SplitSpec, repeat: int, block: int = 256) -> tuple[float, int]:
    """Exact AUC and the number of subjects skipped for having no negatives.

    For each tested subject, counts negatives (objects linked in neither
    training nor test) scoring strictly below the held-out object. Ties count
    as misses.
    """
    rep = split.repeats[repeat]
    adj = rep.train
    per_subject = []
    excluded = 0
    for lo in range(0, rep.subjects.size, block):
        subs = rep.subjects[lo:lo + block]
        pos = rep.held_out[lo:lo + block]
        S = np.array(scorer(subs), dtype=np.float64, copy=True)
        rows = np.arange(subs.size)
        target = S[rows, pos]
        for i, s in enumerate(subs):
            S[i, adj.neighbors(s)] = np.inf
        below = (S < target[:, None]).sum(axis=1)
        n_neg = adj.n - adj.degrees()[subs] - 1
        ok = n_neg > 0
        excluded += int((~ok).sum())
        per_subject.append(below[ok] / n_neg[ok])
    vals = np.concatenate(per_subject) if per_subject else np.empty(0)
    return (float(vals.mean()) if vals.size else float("nan")), excluded


def auc(scorer: BlockScorer, split: SplitSpec, repeat: int) -> float:
    return auc_detail(scorer, split, repeat)[0]


def pair_scorer(fn: Callable[[int, int], float], n: int) -> BlockScorer:
    """Adapt a per-pair ``(s, o) -> score`` function to the block interface."""

    def score(subjects):
        return np.array([[fn(int(s), o) for o in range(n)] for s in subjects], dtype=np.float64)

    return score


def recommend(scorer: BlockScorer, subjects, adj: Adjacency, top_n: int, block: int = 256) -> dict[int, list[int]]:
    """Top-N lists excluding each subject's training objects."""
    out = {}
    subjects = np.asarray(subjects, dtype=np.int64)
    for lo in range(0, subjects.size, block):
        subs = subjects[lo:lo + block]
        S = scorer(subs)
        for i, s in enumerate(subs.tolist()):
            out[s] = top_n_ids(S[i], adj.neighbors(s), top_n).tolist()
    return out


@dataclass(frozen=True)
class RepeatMetrics:
    repeat: int
    hr: float
    arhr: float
    auc: float
    n_subjects_tested: int
    n_auc_excluded: int = 0


@dataclass(frozen=True)
class EvalReport:
    predicate: str
    method: str
    hr: float
    arhr: float
    auc: float
    n_subjects_tested: int
    per_repeat: tuple[RepeatMetrics, ...] = field(default=())

    @classmethod
    def from_repeats(cls, predicate, method, per_repeat) -> "EvalReport":
        per_repeat = tuple(per_repeat)
        return cls(
            predicate,
            method,
            float(np.mean([r.hr for r in per_repeat])),
            float(np.mean([r.arhr for r in per_repeat])),
            float(np.nanmean([r.auc for r in per_repeat])) if any(np.isfinite(r.auc) for r in per_repeat) else float("nan"),
            per_repeat[0].n_subjects_tested,
            per_repeat,
        )

    def csv_rows(self):
        for r in self.per_repeat:
            yield (self.predicate, self.method, str(r.repeat), _fmt(r.hr), _fmt(r.arhr), _fmt(r.auc), str(r.n_subjects_tested))
        yield (self.predicate, self.method, "mean", _fmt(self.hr), _fmt(self.arhr), _fmt(self.auc), str(self.n_subjects_tested))


def _fmt(x: float) -> str:
    return repr(float(x))


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        w.writerows(rep.csv_rows())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[EvalReport]:
    """Rebuild reports from per-repeat rows; mean rows are recomputed, not trusted."""
    rows: dict[tuple[str, str], list[RepeatMetrics]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        if row["repeat"] == "mean":
            continue
        rows.setdefault((row["predicate"], row["method"]), []).append(
            RepeatMetrics(int(row["repeat"]), float(row["hr"]), float(row["arhr"]), float(row["auc"]), int(row["n_subjects_tested"]))
        )
    return [EvalReport.from_repeats(p, m, reps) for (p, m), reps in rows.items()]


def method_scorer(method: str, adj: Adjacency, hp: HyperParams, repeat: int) -> BlockScorer:
    """Train (if needed) ``method`` on ``adj`` and return its block scorer."""
    seed = seeding.derive_seed(hp.seed, "repeat", repeat)
    if method == "bpr":
        model, _ = train(adj, dataclasses.replace(hp, seed=seed))
        return model.score_block
    if method == "mf":
        model = pointwise_mf_train(adj, dataclasses.replace(hp, seed=seed))
        return model.score_block
    if method == "mp":
        counts = PopularityTable.from_adjacency(adj).counts.astype(np.float64)
        return lambda subs: np.broadcast_to(counts, (len(subs), counts.size))
    if method == "random":
        def score(subs):
            return np.stack([random_scores(adj.n, seeding.derive_seed(seed, "subject", int(s))) for s in subs])
        return score
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def evaluate(method: str, g, split: SplitSpec, hp: HyperParams = HyperParams()) -> EvalReport:
    """Train and score ``method`` on every repeat of ``split``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    name = getattr(g, "predicate", "<graph>")
    per_repeat = []
    for rep in split.repeats:
        try:
            scorer = method_scorer(method, rep.train, hp, rep.index)
        except Exception as exc:
            raise EvaluationError(f"predicate {name!r}, method {method}, repeat {rep.index}: {exc}") from exc
        held = rep.held_out_map()
        recs = recommend(scorer, rep.subjects, rep.train, hp.top_n)
        value, excluded = auc_detail(scorer, split, rep.index)
        per_repeat.append(
            RepeatMetrics(rep.index, hit_rate(recs, held), arhr(recs, held), value, int(rep.subjects.size), excluded)
        )
    return EvalReport.from_repeats(name, method, per_repeat)
