"""Embedding tables, bag-of-words sentence vectors, PCA, and k-means.

GloVe-style text embeddings feed two attribute representations: summed
predicate vectors reduced to 64 dimensions by PCA, and L2-normalized mean
bag-of-words sentence vectors used for clustering.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class EmbeddingTable:
    """token -> fixed-dimension vector, loaded from GloVe text format."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        vectors: dict[str, np.ndarray] = {}
        dim = None
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip().split(" ")
                if len(parts) < 2:
                    continue
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise ValueError(f"{path}:{lineno}: dimension {len(vec)} != {dim}")
                vectors[parts[0]] = vec
        if dim is None:
            raise ValueError(f"{path}: empty embedding file")
        return cls(vectors, dim)

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for tok, vec in self.vectors.items():
                fh.write(tok + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")

    def get(self, token: str) -> np.ndarray:
        """Unknown tokens contribute the zero vector."""
        return self.vectors.get(token, np.zeros(self.dim))


def bow_embed(tokens: list[str], table: EmbeddingTable) -> np.ndarray:
    """L2-normalized mean of token embeddings.

    Unknown tokens contribute zero vectors but still count in the
    denominator; an all-zero mean stays the zero vector.
    """
    if not tokens:
        raise ValueError("bow_embed: empty token list")
    mean = sum((table.get(t) for t in tokens), np.zeros(table.dim)) / len(tokens)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else mean


def bow_count_vector(tokens: list[str], vocab_tokens: list[str]) -> np.ndarray:
    """Raw count-vector alternative to the embedding-mean representation."""
    index = {t: i for i, t in enumerate(vocab_tokens)}
    v = np.zeros(len(vocab_tokens))
    for t in tokens:
        if t in index:
            v[index[t]] += 1
    return v


class PcaProjection:
    """Mean vector + top-k principal components (rows are orthonormal)."""

    SCHEMA_VERSION = 1

    def __init__(self, mean: np.ndarray, components: np.ndarray, variances: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.components = np.asarray(components, dtype=np.float64)  # (k, dim)
        self.variances = np.asarray(variances, dtype=np.float64)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.components @ (np.asarray(v, dtype=np.float64) - self.mean)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": self.SCHEMA_VERSION, "mean": self.mean.tolist(),
                       "components": self.components.tolist(),
                       "variances": self.variances.tolist()}, fh)

    @classmethod
    def load(cls, path) -> "PcaProjection":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("schema_version") != cls.SCHEMA_VERSION:
            raise ValueError(f"PCA schema version mismatch: {d.get('schema_version')}")
        return cls(np.array(d["mean"]), np.array(d["components"]), np.array(d["variances"]))


def fit_pca(X: np.ndarray, k: int = 64) -> PcaProjection:
    """Top-k principal directions of the centered data via SVD.

    Explained variances are non-increasing; the sign of each component is
    fixed (largest-magnitude entry positive) for determinism.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < k:
        raise ValueError(f"fit_pca: need at least k={k} rows, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=True)
    comps = vt[:k]
    var = np.zeros(k)
    var[: min(k, len(s))] = (s[: min(k, len(s))] ** 2) / max(n - 1, 1)
    for i in range(comps.shape[0]):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return PcaProjection(mean, comps, var)


def predicate_vector(predicates, table: EmbeddingTable, proj: PcaProjection) -> np.ndarray:
    """Project the summed predicate embeddings: P @ (sum_p emb(p) - mean).

    The PCA mean is subtracted exactly once; unknown predicates contribute
    zero. An empty predicate set projects the zero sum (degenerate but total).
    """
    total = np.zeros(table.dim)
    for p in predicates:
        total = total + table.get(p)
    return proj.project(total)


class ClusterModel:
    """k-means centroids in the sentence-embedding space."""

    SCHEMA_VERSION = 1

    def __init__(self, centroids: np.ndarray, seed: int, inertia: float):
        self.centroids = np.asarray(centroids, dtype=np.float64)
        self.seed = seed
        self.inertia = inertia

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def assign(self, v: np.ndarray) -> int:
        d = np.linalg.norm(self.centroids - np.asarray(v)[None, :], axis=1)
        return int(np.argmin(d))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": self.SCHEMA_VERSION,
                       "centroids": self.centroids.tolist(),
                       "seed": self.seed, "inertia": self.inertia}, fh)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("schema_version") != cls.SCHEMA_VERSION:
            raise ValueError(f"cluster model schema version mismatch: {d.get('schema_version')}")
        return cls(np.array(d["centroids"]), d["seed"], d["inertia"])


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = X[rng.integers(n)]
        else:
            centroids[i] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def kmeans(X: np.ndarray, k: int = 5, seed: int = 0, max_iter: int = 100,
           history: list | None = None) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding from `seed`.

    Converges when the assignment is unchanged or max_iter is reached; the
    within-cluster sum of squares is non-increasing per iteration. If
    `history` is given, the objective after each iteration is appended to it.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < k:
        raise ValueError(f"kmeans: need at least k={k} vectors, got {X.shape[0]}")
    if np.unique(X, axis=0).shape[0] < k:
        raise ValueError(f"kmeans: fewer than k={k} distinct vectors")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    assign = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for j in range(k):
            members = X[new_assign == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        if history is not None:
            dd = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            history.append(float(dd.min(axis=1).sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign

    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2.min(axis=1).sum())
    return ClusterModel(centroids, seed, inertia)
