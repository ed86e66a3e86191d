"""Synthetic triple corpora with known structure.

Every generator returns a list of ``(subject, predicate, object)`` label
tuples plus a JSON-serializable description of what was planted.
:func:`generate_synthetic` writes both to disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kgbpr import seeding

KINDS = ("planted-blocks", "popularity-skew", "density-sweep", "overlap-sweep", "table1")

# (relation, subjects, objects, facts) for the 13 YAGO2 relations.
TABLE1 = (
    ("Import", 142, 62, 391),
    ("Export", 140, 176, 579),
    ("isInterestedIn", 358, 213, 464),
    ("hasOfficialLanguage", 583, 214, 964),
    ("dealsWith", 131, 124, 945),
    ("happenedIn", 7121, 5526, 12500),
    ("participatedIn", 2330, 7043, 16809),
    ("isConnectedTo", 2835, 4391, 33581),
    ("hasChild", 10758, 12800, 17320),
    ("influence", 8056, 9153, 25819),
    ("wroteMusicFor", 5109, 21487, 24271),
    ("edited", 549, 5673, 5946),
    ("owns", 8330, 24422, 26536),
)

# Relations whose subjects and objects are drawn from one entity pool.
_SHARED_POOL = {"hasChild", "influence", "dealsWith", "isConnectedTo"}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0


def _block_of(i, size, blocks):
    return (np.asarray(i) * blocks) // size


def planted_edges(m, n, blocks, p_in, p_out, rng):
    """Bernoulli edges: probability ``p_in`` inside a block, ``p_out`` across."""
    sb = _block_of(np.arange(m), m, blocks)
    ob = _block_of(np.arange(n), n, blocks)
    prob = np.where(sb[:, None] == ob[None, :], p_in, p_out)
    src, dst = np.nonzero(rng.random((m, n)) < prob)
    return src, dst, sb, ob


def planted_blocks(m=1000, n=500, blocks=4, p_in=0.2, p_out=0.0, seed=0, predicate="planted"):
    if not (m > 0 and n > 0 and blocks > 0):
        raise SynthError("m, n and blocks must be positive")
    if blocks > min(m, n):
        raise SynthError(f"blocks={blocks} exceeds min(m, n)={min(m, n)}")
    if not (0 <= p_out <= 1 and 0 <= p_in <= 1):
        raise SynthError("edge probabilities must lie in [0, 1]")
    src, dst, sb, ob = planted_edges(m, n, blocks, p_in, p_out, seeding.rng(seed, "planted", predicate))
    triples = [(f"s{s:05d}", predicate, f"o{o:05d}") for s, o in zip(src.tolist(), dst.tolist())]
    truth = {
        "kind": "planted-blocks",
        "predicate": predicate,
        "blocks": blocks,
        "p_in": p_in,
        "p_out": p_out,
        "subject_block": {f"s{i:05d}": int(b) for i, b in enumerate(sb)},
        "object_block": {f"o{j:05d}": int(b) for j, b in enumerate(ob)},
    }
    return triples, truth


def popularity_skew(m=1000, n=500, degree=10, exponent=1.2, seed=0, predicate="popular"):
    """Each subject links to ``degree`` distinct objects drawn with Zipf weights."""
    if not (m > 0 and n > 0 and 0 < degree <= n):
        raise SynthError("need m > 0, n > 0 and 0 < degree <= n")
    rng = seeding.rng(seed, "popularity", predicate)
    weights = 1.0 / np.arange(1, n + 1) ** exponent
    weights /= weights.sum()
    # object ids are shuffled so popularity is not aligned with label order
    labels = rng.permutation(n)
    triples = []
    for s in range(m):
        for o in rng.choice(n, size=degree, replace=False, p=weights):
            triples.append((f"s{s:05d}", predicate, f"o{labels[o]:05d}"))
    truth = {
        "kind": "popularity-skew",
        "predicate": predicate,
        "exponent": exponent,
        "object_rank": {f"o{labels[r]:05d}": r + 1 for r in range(n)},
    }
    return triples, truth


def density_sweep(k=8, m=300, n=200, blocks=4, p_min=0.04, p_max=0.4, seed=0):
    """``k`` planted-block predicates sharing shape, with increasing within-block probability.

    Observed density counts only non-isolated vertices, so on very small
    shapes the sparsest predicates can look denser than intended.
    """
    if k < 2 or not 0 < p_min < p_max <= 1:
        raise SynthError("need k >= 2 and 0 < p_min < p_max <= 1")
    triples, truth = [], {"kind": "density-sweep", "predicates": []}
    for i, p in enumerate(np.linspace(p_min, p_max, k)):
        name = f"p{i + 1}"
        t, _ = planted_blocks(m, n, blocks, float(p), 0.0, seeding.derive_seed(seed, "density", i), name)
        triples.extend(t)
        truth["predicates"].append({"predicate": name, "p_in": float(p), "edges": len(t)})
    return triples, truth


def overlap_sweep(k=8, m=300, n=200, blocks=4, p_in=0.3, clique_size=4, random_links=4, max_fraction=0.6, seed=0):
    """``k`` predicates where a growing share of subjects are shared-pool entities.

    Block-structured subjects link to disjoint object labels. Pool entities
    appear on both sides: they are grouped into small cliques (each pair linked
    once, in a random direction), which closes triangles in the label-merged
    graph, and each also links to ``random_links`` uniformly chosen block
    objects, which carries no structure a ranker could learn.
    """
    if k < 2 or not 0 <= max_fraction < 1:
        raise SynthError("need k >= 2 and 0 <= max_fraction < 1")
    if clique_size < 3 or not 0 <= random_links <= n:
        raise SynthError("need clique_size >= 3 and 0 <= random_links <= n")
    triples, truth = [], {"kind": "overlap-sweep", "predicates": []}
    for i, f in enumerate(np.linspace(0.0, max_fraction, k)):
        name = f"q{i + 1}"
        rng = seeding.rng(seed, "overlap", i)
        pool = int(round(f * m))
        pool -= pool % clique_size
        src, dst, _, _ = planted_edges(m - pool, n, blocks, p_in, 0.0, rng)
        t = [(f"s{s:05d}", name, f"o{o:05d}") for s, o in zip(src.tolist(), dst.tolist())]
        perm = rng.permutation(pool)
        for lo in range(0, pool, clique_size):
            members = perm[lo:lo + clique_size]
            for a in range(clique_size):
                for b in range(a + 1, clique_size):
                    x, y = (members[a], members[b]) if rng.random() < 0.5 else (members[b], members[a])
                    t.append((f"e{x:05d}", name, f"e{y:05d}"))
        for a in range(pool):
            for o in rng.choice(n, size=random_links, replace=False):
                t.append((f"e{a:05d}", name, f"o{o:05d}"))
        triples.extend(t)
        truth["predicates"].append({"predicate": name, "pool_fraction": float(f), "pool_size": pool, "edges": len(t)})
    return triples, truth


def table1_counts(name, m, n, edges, rng):
    """Edges of an ``m`` x ``n`` bipartite graph with exactly ``edges`` links, no isolated vertex."""
    if not max(m, n) <= edges <= m * n:
        raise SynthError(f"{name}: cannot place {edges} edges on {m} x {n} without isolated vertices")
    k = np.arange(max(m, n))
    base = np.unique((k % m) * n + (k % n))
    keys = base
    while keys.size < edges:
        extra = rng.integers(0, m * n, size=2 * (edges - keys.size))
        extra = extra[~np.isin(extra, keys)]
        extra = extra[np.sort(np.unique(extra, return_index=True)[1])]
        keys = np.concatenate([keys, extra[: edges - keys.size]])
    return keys // n, keys % n


def table1_corpus(seed=0, relations=None):
    """One predicate per YAGO2 relation with exactly its subject, object and fact counts."""
    triples, truth = [], {"kind": "table1", "relations": []}
    wanted = set(relations) if relations else None
    for name, m, n, e in TABLE1:
        if wanted is not None and name not in wanted:
            continue
        rng = seeding.rng(seed, "table1", name)
        src, dst = table1_counts(name, m, n, e, rng)
        if name in _SHARED_POOL:
            # objects partly reuse subject labels
            offset = m // 2
            s_lab = [f"{name}:e{i:06d}" for i in range(m)]
            o_lab = [f"{name}:e{j + offset:06d}" for j in range(n)]
        else:
            s_lab = [f"{name}:s{i:06d}" for i in range(m)]
            o_lab = [f"{name}:o{j:06d}" for j in range(n)]
        triples.extend((s_lab[s], name, o_lab[o]) for s, o in zip(src.tolist(), dst.tolist()))
        truth["relations"].append({"predicate": name, "subjects": m, "objects": n, "facts": e})
    return triples, truth


_GENERATORS = {
    "planted-blocks": planted_blocks,
    "popularity-skew": popularity_skew,
    "density-sweep": density_sweep,
    "overlap-sweep": overlap_sweep,
    "table1": table1_corpus,
}


def build(spec: SyntheticSpec):
    if spec.kind not in _GENERATORS:
        raise SynthError(f"unknown generator {spec.kind!r}; expected one of {', '.join(KINDS)}")
    try:
        return _GENERATORS[spec.kind](seed=spec.seed, **spec.params)
    except TypeError as exc:
        raise SynthError(f"bad parameters for {spec.kind}: {exc}") from exc


def generate_synthetic(spec: SyntheticSpec, path) -> Path:
    """Write the triples to ``path`` and the planted structure to ``<path>.truth.json``."""
    triples, truth = build(spec)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for s, p, o in triples:
            fh.write(f"{s}\t{p}\t{o}\n")
    truth = {"spec": {"kind": spec.kind, "params": spec.params, "seed": spec.seed}, **truth}
    Path(str(path) + ".truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    return path
