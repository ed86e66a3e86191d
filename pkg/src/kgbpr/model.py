"""Latent-factor link model: scoring, logistic probability, top-N ranking."""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from kgbpr import seeding

INIT_STD = 0.1


@dataclass(frozen=True)
class HyperParams:
    """Training and evaluation settings shared by the latent-factor methods.

    Defaults are K=50, alpha=0.2, lambda=0.005 and N=10. ``epochs`` sets the
    sample budget as ``epochs * edge_count``.
    """

    K: int = 50
    alpha: float = 0.2
    lambda_s: float = 0.005
    lambda_o_pos: float = 0.005
    lambda_o_neg: float = 0.005
    epochs: int = 50
    top_n: int = 10
    seed: int = 0

    def __post_init__(self):
        if int(self.K) < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        for name in ("lambda_s", "lambda_o_pos", "lambda_o_neg"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if int(self.epochs) < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.top_n) < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")

    def to_dict(self):
        return asdict(self)


class EmbeddingModel:
    """Subject factors ``U`` (m x K), object factors ``V`` (n x K), object biases ``b`` (n)."""

    def __init__(self, U, V, b):
        self.U = np.ascontiguousarray(U, dtype=np.float64)
        self.V = np.ascontiguousarray(V, dtype=np.float64)
        self.b = np.ascontiguousarray(b, dtype=np.float64)
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != self.V.shape[1]:
            raise ValueError(f"incompatible factor shapes {self.U.shape} and {self.V.shape}")
        if self.b.shape != (self.V.shape[0],):
            raise ValueError(f"bias shape {self.b.shape} does not match {self.V.shape[0]} objects")

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.U.copy(), self.V.copy(), self.b.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.U).all() and np.isfinite(self.V).all() and np.isfinite(self.b).all())

    def scores(self, s: int) -> np.ndarray:
        """Scores of subject ``s`` against every object."""
        _check_id(s, self.m, "subject")
        return self.V @ self.U[s] + self.b

    def score_block(self, subjects) -> np.ndarray:
        subjects = np.asarray(subjects, dtype=np.int64)
        return self.U[subjects] @ self.V.T + self.b

    def __eq__(self, other):
        return (
            isinstance(other, EmbeddingModel)
            and np.array_equal(self.U, other.U)
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.b, other.b)
        )

    def __repr__(self):
        return f"EmbeddingModel(m={self.m}, n={self.n}, K={self.K})"

    # Dump layout, all little endian:
    #   8 bytes   magic b"KGBPRM01"
    #   3 x u64   m, n, K
    #   f64       U row-major (m*K), V row-major (n*K), b (n)
    _MAGIC = b"KGBPRM01"

    def to_bytes(self) -> bytes:
        head = self._MAGIC + struct.pack("<QQQ", self.m, self.n, self.K)
        body = b"".join(a.astype("<f8").tobytes(order="C") for a in (self.U, self.V, self.b))
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "EmbeddingModel":
        if data[:8] != cls._MAGIC:
            raise ValueError("not a model dump (bad magic)")
        m, n, K = struct.unpack_from("<QQQ", data, 8)
        expected = 32 + 8 * (m * K + n * K + n)
        if len(data) != expected:
            raise ValueError(f"model dump has {len(data)} bytes, expected {expected}")
        flat = np.frombuffer(data, dtype="<f8", offset=32).astype(np.float64)
        U = flat[: m * K].reshape(m, K)
        V = flat[m * K: m * K + n * K].reshape(n, K)
        b = flat[m * K + n * K:]
        return cls(U, V, b)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        return cls.from_bytes(Path(path).read_bytes())


def _check_id(i, size, kind):
    if not 0 <= i < size:
        raise IndexError(f"{kind} id {i} out of range [0, {size})")


def init_model(m: int, n: int, hp: HyperParams) -> EmbeddingModel:
    """Gaussian(0, 0.1) initialization of U, V and b, drawn in that order."""
    if m < 1 or n < 1:
        raise ValueError(f"degenerate predicate: need m >= 1 and n >= 1, got m={m}, n={n}")
    rng = seeding.rng(hp.seed, "init")
    U = rng.normal(0.0, INIT_STD, size=(m, hp.K))
    V = rng.normal(0.0, INIT_STD, size=(n, hp.K))
    b = rng.normal(0.0, INIT_STD, size=n)
    return EmbeddingModel(U, V, b)


def score(model: EmbeddingModel, s: int, o: int) -> float:
    _check_id(s, model.m, "subject")
    _check_id(o, model.n, "object")
    return float(model.U[s] @ model.V[o] + model.b[o])


def probability(x):
    """Logistic function, evaluated without overflow for any finite input."""
    arr = np.asarray(x, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("probability of NaN score")
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out) if out.ndim == 0 else out


def log_sigmoid(x):
    """ln(logistic(x)), stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def top_n_ids(scores: np.ndarray, exclude, n_items: int) -> np.ndarray:
    """Ids of the ``n_items`` best non-excluded scores.

    Order is descending score with ties broken by ascending id.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.ones(scores.size, dtype=bool)
    if exclude is not None and len(exclude):
        mask[np.fromiter(exclude, dtype=np.int64) if not isinstance(exclude, np.ndarray) else exclude] = False
    cand = np.flatnonzero(mask)
    if cand.size > n_items:
        vals = scores[cand]
        kth = np.partition(vals, vals.size - n_items)[vals.size - n_items]
        cand = cand[vals >= kth]
    order = np.argsort(-scores[cand], kind="stable")
    return cand[order[:n_items]]


def rank_objects(model: EmbeddingModel, s: int, exclude=(), top_n: int = 10) -> list[int]:
    return top_n_ids(model.scores(s), exclude, top_n).tolist()
