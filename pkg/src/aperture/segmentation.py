"""Occupant segmentation: bottom-up clustering of office profiles and a 2-D
t-SNE projection for inspection.

Clustering features are the four profile dimensions (cold-day indoor
temperature, warm-day indoor temperature, mean CO2, fraction of time open),
z-scored over offices. Offices missing the cold or warm mean stay
clusterable: their pairwise distance is computed over the shared present
features and rescaled by 4 / (number shared). The agglomeration itself is
Ward linkage via the Lance-Williams recurrence on squared distances, with
index-ordered tie-breaking so identical input always yields the identical
merge sequence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .profiles import OfficeProfile

CLUSTER_FEATURES = ("mean_temp_cold", "mean_temp_warm", "mean_co2", "fraction_open")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: dict[str, int]
    sizes: list[int]
    params: dict

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def members(self, cluster_id: int) -> list[str]:
        return [o for o, c in self.labels.items() if c == cluster_id]


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 4.0
    n_iter: int = 1000
    step_size: float = 100.0
    seed: int = 0
    early_exaggeration: float = 4.0
    exaggeration_iters: int = 100
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250


def profile_matrix(profiles: list[OfficeProfile]) -> tuple[np.ndarray, list[str]]:
    """(n, 4) feature matrix with NaN for absent means, plus office ids."""
    ids = [p.office_id for p in profiles]
    X = np.array(
        [[getattr(p, f) for f in CLUSTER_FEATURES] for p in profiles], dtype=np.float64
    )
    return X, ids


def standardize(X: np.ndarray) -> np.ndarray:
    """Column-wise z-scores over the present values; NaN stays NaN."""
    Z = X.copy()
    for j in range(X.shape[1]):
        col = X[:, j]
        have = ~np.isnan(col)
        if not np.any(have):
            raise DataError(f"clustering feature {CLUSTER_FEATURES[j]} is absent everywhere")
        mean = np.mean(col[have])
        std = np.std(col[have])
        Z[have, j] = (col[have] - mean) / std if std > 0 else 0.0
    return Z


def masked_sq_distances(Z: np.ndarray) -> np.ndarray:
    """Squared distances over shared present features, rescaled by 4/#shared."""
    n, d = Z.shape
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            shared = ~np.isnan(Z[i]) & ~np.isnan(Z[j])
            k = int(np.sum(shared))
            if k == 0:
                raise DataError(
                    f"profiles {i} and {j} share no present clustering features"
                )
            diff = Z[i, shared] - Z[j, shared]
            D[i, j] = D[j, i] = float(np.dot(diff, diff)) * d / k
    return D


def ward_linkage(D2: np.ndarray) -> list[tuple[int, int, float, int]]:
    """Full agglomeration by Ward's method over a squared-distance matrix.

    Returns merges as (cluster_a, cluster_b, height, new_size) where new
    clusters are numbered n, n+1, ... as in the usual linkage convention
    and heights are sqrt of the Ward merge cost. Ties on cost break on the
    smallest (a, b) pair, making the sequence deterministic.
    """
    n = D2.shape[0]
    if n < 2:
        raise DataError("clustering needs at least 2 profiles")
    d2 = {}
    for i in range(n):
        for j in range(i + 1, n):
            d2[(i, j)] = D2[i, j]
    active = list(range(n))
    sizes = {i: 1 for i in range(n)}
    merges: list[tuple[int, int, float, int]] = []
    next_id = n

    def dist(a: int, b: int) -> float:
        return d2[(a, b) if a < b else (b, a)]

    while len(active) > 1:
        best = None
        for ii in range(len(active)):
            for jj in range(ii + 1, len(active)):
                a, b = active[ii], active[jj]
                cur = dist(a, b)
                if best is None or cur < best[0] - 1e-15 or (
                    abs(cur - best[0]) <= 1e-15 and (a, b) < (best[1], best[2])
                ):
                    best = (cur, a, b)
        cost, a, b = best
        na, nb = sizes[a], sizes[b]
        new = next_id
        next_id += 1
        # Lance-Williams update for Ward on squared distances.
        for k in active:
            if k in (a, b):
                continue
            nk = sizes[k]
            t = na + nb + nk
            d_new = (
                (na + nk) * dist(a, k) + (nb + nk) * dist(b, k) - nk * cost
            ) / t
            d2[(min(k, new), max(k, new))] = d_new
        active = [k for k in active if k not in (a, b)] + [new]
        sizes[new] = na + nb
        merges.append((a, b, math.sqrt(max(cost, 0.0)), na + nb))
    return merges


def _partition_from_merges(
    n: int, merges: list[tuple[int, int, float, int]], n_merges: int
) -> list[set[int]]:
    clusters: dict[int, set[int]] = {i: {i} for i in range(n)}
    next_id = n
    for a, b, _, _ in merges[:n_merges]:
        clusters[next_id] = clusters.pop(a) | clusters.pop(b)
        next_id += 1
    return list(clusters.values())


def cluster_offices(
    profiles: list[OfficeProfile],
    n_clusters: int | None = None,
    distance_cutoff: float | None = None,
) -> ClusterAssignment:
    """Agglomerate offices; cut either at a cluster count or a merge height.

    Cluster ids are contiguous from 0, numbered by first appearance in the
    input order, so the partition is independent of internal bookkeeping.
    """
    if (n_clusters is None) == (distance_cutoff is None):
        raise ValueError("specify exactly one of n_clusters or distance_cutoff")
    n = len(profiles)
    if n < 2:
        raise DataError("clustering needs at least 2 profiles")
    if n_clusters is not None and n_clusters > n:
        raise DataError(f"requested {n_clusters} clusters from {n} profiles")

    X, ids = profile_matrix(profiles)
    Z = standardize(X)
    merges = ward_linkage(masked_sq_distances(Z))

    if n_clusters is not None:
        n_merges = n - n_clusters
    else:
        n_merges = 0
        for _, _, height, _ in merges:
            if height > distance_cutoff:
                break
            n_merges += 1
    parts = _partition_from_merges(n, merges, n_merges)

    member_of = {}
    for part in parts:
        for idx in part:
            member_of[idx] = part
    order: list[frozenset] = []
    for idx in range(n):
        key = frozenset(member_of[idx])
        if key not in order:
            order.append(key)
    labels = {}
    for idx in range(n):
        labels[ids[idx]] = order.index(frozenset(member_of[idx]))
    sizes = [len(part) for part in order]
    params = {
        "linkage": "ward",
        "n_clusters": n_clusters,
        "distance_cutoff": distance_cutoff,
        "merge_heights": [round(m[2], 12) for m in merges],
    }
    return ClusterAssignment(labels=labels, sizes=sizes, params=params)


def select_training_offices(
    assignment: ClusterAssignment,
    per_cluster: int = 1,
    n_clusters: int = 3,
    seed: int = 0,
) -> list[str]:
    """Draw offices uniformly from each of the largest clusters.

    Cluster size ties break toward the lower cluster id. The draw is seeded,
    so repeated selection from the same assignment is identical.
    """
    nonempty = [c for c, s in enumerate(assignment.sizes) if s > 0]
    if len(nonempty) < n_clusters:
        raise DataError(
            f"need {n_clusters} non-empty clusters, assignment has {len(nonempty)}"
        )
    ranked = sorted(nonempty, key=lambda c: (-assignment.sizes[c], c))
    rng = np.random.default_rng(seed)
    chosen: list[str] = []
    for c in ranked[:n_clusters]:
        members = sorted(assignment.members(c))
        if len(members) < per_cluster:
            raise DataError(f"cluster {c} has {len(members)} offices, need {per_cluster}")
        picks = rng.choice(len(members), size=per_cluster, replace=False)
        chosen.extend(members[int(i)] for i in np.sort(picks))
    return chosen


def _entropy_and_probs(d2_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    p = np.exp(-d2_row * beta)
    total = np.sum(p)
    if total <= 0:
        return 0.0, np.zeros_like(p)
    p = p / total
    nz = p > 0
    h = float(-np.sum(p[nz] * np.log(p[nz])))
    return h, p


def _conditional_affinities(D2: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-point Gaussian affinities calibrated to the perplexity by bisection."""
    n = D2.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(D2[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, math.inf
        for _ in range(64):
            h, p = _entropy_and_probs(row, beta)
            if abs(h - target) < 1e-7:
                break
            if h > target:
                beta_lo = beta
                beta = beta * 2 if beta_hi is math.inf else 0.5 * (beta + beta_hi)
            else:
                beta_hi = beta
                beta = 0.5 * (beta + beta_lo)
        P[i, np.arange(n) != i] = p
    return P


def tsne_kl(P: np.ndarray, Y: np.ndarray) -> float:
    """KL divergence between the joint affinities and the embedding's."""
    Q, _ = _low_dim_affinities(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-12))))


def _low_dim_affinities(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = np.sum((Y[:, None, :] - Y[None, :, :]) ** 2, axis=2)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    Q = num / np.sum(num)
    return np.maximum(Q, 1e-12), num


def tsne_project(
    profiles_or_matrix, params: TsneParams = TsneParams()
) -> np.ndarray:
    """Exact t-SNE of office profiles into 2-D.

    Affinities are calibrated per point to the target perplexity by
    bisection, symmetrized and normalized; the embedding minimizes
    KL(P || Q) by gradient descent with momentum and an early-exaggeration
    phase. Deterministic for a fixed seed.
    """
    if isinstance(profiles_or_matrix, np.ndarray):
        Z = profiles_or_matrix.astype(np.float64)
    else:
        X, _ = profile_matrix(profiles_or_matrix)
        Z = standardize(X)
    n = Z.shape[0]
    if n < 4:
        raise DataError(f"t-SNE needs at least 4 points, got {n}")
    if params.perplexity >= (n - 1) / 3:
        raise DataError(
            f"perplexity {params.perplexity} infeasible for {n} points "
            f"(needs perplexity < {(n - 1) / 3:.2f})"
        )

    D2 = masked_sq_distances(Z)
    P_cond = _conditional_affinities(D2, params.perplexity)
    P = (P_cond + P_cond.T) / (2.0 * n)

    rng = np.random.default_rng(params.seed)
    Y = rng.normal(scale=1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    for it in range(params.n_iter):
        exaggeration = params.early_exaggeration if it < params.exaggeration_iters else 1.0
        Q, num = _low_dim_affinities(Y)
        PQ = exaggeration * P - Q
        grad = np.zeros_like(Y)
        for d in range(2):
            diff = Y[:, d, None] - Y[None, :, d]
            grad[:, d] = 4.0 * np.sum(PQ * num * diff, axis=1)
        momentum = (
            params.initial_momentum if it < params.momentum_switch else params.final_momentum
        )
        velocity = momentum * velocity - params.step_size * grad
        Y = Y + velocity
        Y = Y - np.mean(Y, axis=0)
    return Y


def joint_affinities(profiles: list[OfficeProfile], perplexity: float) -> np.ndarray:
    """Symmetrized, normalized affinity matrix (sums to 1)."""
    X, _ = profile_matrix(profiles)
    Z = standardize(X)
    n = Z.shape[0]
    P_cond = _conditional_affinities(masked_sq_distances(Z), perplexity)
    return (P_cond + P_cond.T) / (2.0 * n)


def save_embedding(
    ids: list[str], Y: np.ndarray, assignment: ClusterAssignment | None, path
) -> None:
    """CSV of the 2-D projection: office_id, x, y, cluster_id."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["office_id", "x", "y", "cluster_id"])
        for i, office in enumerate(ids):
            cluster = assignment.labels[office] if assignment else ""
            writer.writerow([office, repr(float(Y[i, 0])), repr(float(Y[i, 1])), cluster])
