from pathlib import Path

import numpy as np
import pytest

from kgbpr.store import Adjacency, graph_from_pairs
from kgbpr.synth import planted_blocks, table1_corpus

FIXTURES = Path(__file__).parent / "fixtures"

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _CRITERIA.get(num, (text, "PASS", 0.0))
        status = "PASS" if rep.passed and prev[1] == "PASS" else "FAIL"
        _CRITERIA[num] = (text, status, prev[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        text, status, secs = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  ({secs:.1f}s)  {text}")


@pytest.fixture(scope="session")
def table1_graphs():
    from kgbpr.store import KnowledgeGraph, Triple, extract_bipartite

    triples, _ = table1_corpus(seed=0)
    kg = KnowledgeGraph.from_triples(Triple(*t) for t in triples)
    return kg


@pytest.fixture(scope="session")
def planted_graph():
    triples, truth = planted_blocks(m=200, n=120, blocks=4, p_in=0.25, seed=11, predicate="planted")
    return graph_from_pairs("planted", [(s, o) for s, _, o in triples])


def random_adjacency(rng, m, n, p):
    a = rng.random((m, n)) < p
    src, dst = np.nonzero(a)
    return Adjacency.from_edges(m, n, src, dst)


def simultaneous_z(k: int, z: float = 3.0) -> float:
    """Per-comparison z bound keeping the family-wise level of one ``z``-sigma check across ``k`` checks."""
    from scipy.stats import norm

    return float(norm.isf(2 * norm.sf(z) / (2 * k)))


def assert_uniform(counts, total, expected_p):
    """Frequency oracle: chi-square fit plus per-cell 3-SE bands (Bonferroni-adjusted)."""
    import math

    from scipy.stats import chisquare

    counts = np.asarray(counts)
    se = math.sqrt(expected_p * (1 - expected_p) / total)
    z = np.abs(counts / total - expected_p) / se
    assert z.max() <= simultaneous_z(counts.size), f"max deviation {z.max():.2f} SE"
    assert chisquare(counts).pvalue > 1e-3
