"""Bag-of-words descriptors over blob pairs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InsufficientDataError, ParseError, UsageError

FEATURE_NAMES = ("distance", "r1", "r2", "resp1", "resp2")
DEFAULT_MAX_PAIRS = 64
MAX_ITER = 100
INERTIA_RTOL = 1e-6


@dataclass(frozen=True)
class BlobPairFeature:
    distance: float
    r1: float
    r2: float
    resp1: float
    resp2: float
    polarity: tuple = ("max", "max")

    def vector(self) -> np.ndarray:
        return np.array([self.distance, self.r1, self.r2, self.resp1, self.resp2])


def _pair(a, b) -> BlobPairFeature:
    # order endpoints by radius; fall back on response, then vertex, for ties
    key = lambda x: (x.radius, x.response, x.vertex)  # noqa: E731
    small, large = (a, b) if key(a) <= key(b) else (b, a)
    d = float(np.linalg.norm(np.subtract(a.position, b.position)))
    return BlobPairFeature(
        d, small.radius, large.radius, small.response, large.response,
        (small.polarity, large.polarity),
    )


def make_pairs(blobs, max_pairs: int = DEFAULT_MAX_PAIRS) -> list[BlobPairFeature]:
    """Features of every unordered blob pair.

    When there are more than ``max_pairs`` pairs, only pairs among the
    ``max_pairs`` strongest blobs (by ``|response|``) are formed.
    """
    blobs = list(blobs)
    if len(blobs) * (len(blobs) - 1) // 2 > max_pairs:
        order = sorted(range(len(blobs)), key=lambda i: (-abs(blobs[i].response), i))
        blobs = [blobs[i] for i in sorted(order[:max_pairs])]
    return [_pair(a, b) for a, b in combinations(blobs, 2)]


def feature_matrix(features) -> np.ndarray:
    if not features:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.stack([f.vector() if isinstance(f, BlobPairFeature) else np.asarray(f, float) for f in features])


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray  # (W, dims), in z-scored units
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_words(self) -> int:
        return self.centroids.shape[0]

    @property
    def dims(self) -> int:
        return self.centroids.shape[1]

    def normalize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds

    def to_json(self) -> str:
        return json.dumps(
            {
                "W": self.n_words,
                "dims": self.dims,
                "means": [float(x) for x in self.means],
                "stds": [float(x) for x in self.stds],
                "centroids": [[float(x) for x in row] for row in self.centroids],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        try:
            d = json.loads(text)
            cb = cls(
                np.array(d["centroids"], dtype=float).reshape(d["W"], d["dims"]),
                np.array(d["means"], dtype=float),
                np.array(d["stds"], dtype=float),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"malformed codebook: {exc}") from None
        if cb.means.shape != (cb.dims,) or cb.stds.shape != (cb.dims,):
            raise ParseError("codebook normalization does not match its dimensions")
        return cb

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Codebook":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen center: take the first unused one
            unused = np.setdiff1d(np.arange(n), centers)
            idx = int(unused[0])
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[centers].copy()


def _assign(X, C):
    d2 = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    lab = np.argmin(d2, axis=1)  # argmin takes the lowest index on ties
    return lab, d2[np.arange(len(X)), lab].sum()


def kmeans(X, k, seed=0, max_iter=MAX_ITER, rtol=INERTIA_RTOL):
    """Lloyd iterations from a seeded k-means++ start. Returns (centroids, labels, inertia)."""
    rng = np.random.default_rng(seed)
    C = _kmeans_pp_init(X, k, rng)
    lab, inertia = _assign(X, C)
    for _ in range(max_iter):
        for j in range(k):
            members = X[lab == j]
            if len(members):
                C[j] = members.mean(axis=0)
        lab, new = _assign(X, C)
        done = abs(inertia - new) <= rtol * max(inertia, np.finfo(float).tiny)
        inertia = new
        if done:
            break
    return C, lab, inertia


def train_codebook(features, n_words: int, seed: int = 0) -> Codebook:
    X = feature_matrix(features)
    if n_words < 2:
        raise UsageError(f"a codebook needs at least 2 words, got {n_words}")
    if X.shape[0] < n_words:
        raise InsufficientDataError(
            f"{X.shape[0]} blob-pair features for {n_words} words "
            f"(need at least as many features as words)"
        )
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[~(stds > 0)] = 1.0
    Z = (X - means) / stds
    C, _, _ = kmeans(Z, n_words, seed)
    return Codebook(C, means, stds)


def encode(features, codebook: Codebook) -> np.ndarray:
    """L1-normalized word histogram; all zeros for an empty feature list."""
    hist = np.zeros(codebook.n_words)
    X = feature_matrix(features)
    if X.shape[0] == 0:
        return hist
    lab, _ = _assign(codebook.normalize(X), codebook.centroids)
    np.add.at(hist, lab, 1.0)
    return hist / hist.sum()


def write_descriptors_csv(path, rows, n_words: int):
    """``rows`` is an iterable of (surface_id, histogram)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["surface_id"] + [f"b{k}" for k in range(n_words)])
        for sid, hist in rows:
            w.writerow([sid] + [f"{x:.17g}" for x in hist])
