"""Communication graphs, mixing weights and the gossip square root.

A :class:`Topology` bundles everything the iteration and its convergence
certificate need from the graph: the doubly stochastic weights ``W``, the
gossip matrix ``C = (I - W) / 2``, its symmetric PSD square root ``B`` and
the spectral constants derived from them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from dgne.errors import (
    DisconnectedGraph,
    InvalidWeights,
    NonSymmetric,
    NotPSD,
    RankThresholdAmbiguous,
)

WEIGHT_TOL = 1e-12
PSD_CLAMP_TOL = 1e-8
RANK_RTOL = 1e-9


def _as_adjacency(adjacency) -> np.ndarray:
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    adj = adj.astype(bool)
    if not np.array_equal(adj, adj.T):
        raise NonSymmetric("adjacency matrix is not symmetric")
    adj = adj.copy()
    np.fill_diagonal(adj, False)
    return adj


def is_connected(adjacency) -> bool:
    adj = np.asarray(adjacency, dtype=bool)
    if adj.shape[0] <= 1:
        return True
    n_comp, _ = connected_components(adj.astype(np.int8), directed=False)
    return n_comp == 1


def build_metropolis(adjacency) -> np.ndarray:
    """Metropolis-Hastings weights for an undirected connected graph.

    ``w_ij = 1 / (1 + max(d_i, d_j))`` on edges, the self-weight absorbs the
    remainder of each row.
    """
    adj = _as_adjacency(adjacency)
    N = adj.shape[0]
    if N < 2:
        raise ValueError("Metropolis weights need at least two nodes")
    if not is_connected(adj):
        raise DisconnectedGraph("communication graph is not connected")
    deg = adj.sum(axis=1)
    W = np.zeros((N, N))
    ii, jj = np.nonzero(adj)
    W[ii, jj] = 1.0 / (1.0 + np.maximum(deg[ii], deg[jj]))
    W[np.diag_indices(N)] = 1.0 - W.sum(axis=1)
    return W


def validate_weights(W, adjacency=None) -> None:
    """Raise unless ``W`` is symmetric, doubly stochastic, nonnegative, has a
    positive diagonal, and its support graph is connected."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InvalidWeights(f"W must be square, got shape {W.shape}")
    if np.max(np.abs(W - W.T)) > WEIGHT_TOL:
        raise NonSymmetric("weight matrix is not symmetric")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > WEIGHT_TOL:
        raise InvalidWeights("rows of W do not sum to one")
    if np.any(W < 0):
        raise InvalidWeights("W has negative entries")
    if np.any(np.diag(W) <= 0):
        raise InvalidWeights("W needs strictly positive self-weights")
    support = W > 0
    np.fill_diagonal(support, False)
    if adjacency is not None:
        adj = _as_adjacency(adjacency)
        if np.any(support & ~adj):
            raise InvalidWeights("W puts weight on a non-edge")
    if not is_connected(support):
        raise DisconnectedGraph("support graph of W is not connected")


def consensus_gap(W) -> float:
    """Spectral norm of ``W - 11^T/N``.

    Values at rounding level (``<= 1e-14``) are reported as exactly 0 so the
    complete-average case is recognisable.
    """
    W = np.asarray(W, dtype=float)
    N = W.shape[0]
    sigma = float(np.linalg.norm(W - np.full((N, N), 1.0 / N), 2))
    return 0.0 if sigma <= 1e-14 else sigma


def gossip_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return 0.5 * (np.eye(W.shape[0]) - W)


def matrix_sqrt_psd(C) -> np.ndarray:
    """Symmetric PSD square root through ``eigh``.

    Negative eigenvalues down to ``-1e-8`` are clamped to zero, as are
    positive ones below the rounding floor ``N * eps * lambda_max``. Without
    the second rule an exact null direction of ``C`` (as for a gossip matrix)
    would pick up a spurious root of order ``1e-9``.
    """
    C = np.asarray(C, dtype=float)
    C = 0.5 * (C + C.T)
    evals, U = np.linalg.eigh(C)
    if evals.size and evals[0] < -PSD_CLAMP_TOL:
        raise NotPSD(f"matrix has eigenvalue {evals[0]:.3e} < -{PSD_CLAMP_TOL:g}")
    floor = C.shape[0] * np.finfo(float).eps * max(float(evals[-1]), 0.0) if evals.size else 0.0
    root = np.sqrt(np.where(evals > floor, evals, 0.0))
    B = (U * root) @ U.T
    return 0.5 * (B + B.T)


def spectral_bounds(B) -> tuple[float, float]:
    """Return ``(lambda_max(B), smallest nonzero singular value of B)``.

    Singular values at or below ``1e-9 * lambda_max`` count as zero. A value
    within a factor of ten of that threshold makes the rank call unreliable
    and raises :class:`RankThresholdAmbiguous`.
    """
    B = np.asarray(B, dtype=float)
    lam_max = float(np.linalg.eigvalsh(0.5 * (B + B.T))[-1]) if B.size else 0.0
    sv = np.linalg.svd(B, compute_uv=False)
    if lam_max <= 0.0 or not np.any(sv > 0):
        raise RankThresholdAmbiguous("B is zero; no nonzero singular value exists")
    thresh = RANK_RTOL * lam_max
    near = (sv > thresh / 10.0) & (sv < thresh * 10.0)
    if np.any(near):
        raise RankThresholdAmbiguous(
            f"singular value(s) {sv[near]} too close to rank threshold {thresh:.3e}")
    return lam_max, float(sv[sv > thresh].min())


@dataclass(frozen=True)
class Topology:
    """Validated communication topology plus all derived matrices.

    Build one with :meth:`from_adjacency` (Metropolis weights) or
    :meth:`from_weights` (user-supplied ``W``).
    """

    adjacency: np.ndarray
    W: np.ndarray
    C: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    sigma: float
    lambda_max_B: float
    min_nonzero_sv_B: float

    @classmethod
    def from_weights(cls, W, adjacency=None) -> "Topology":
        W = np.array(W, dtype=float)
        validate_weights(W, adjacency)
        W = 0.5 * (W + W.T)
        if adjacency is None:
            adjacency = W > 0
        adj = _as_adjacency(adjacency)
        C = gossip_matrix(W)
        B = matrix_sqrt_psd(C)
        if W.shape[0] == 1:
            lam_max, sv_min = 0.0, float("nan")
        else:
            lam_max, sv_min = spectral_bounds(B)
        for arr in (adj, W, C, B):
            arr.setflags(write=False)
        return cls(adj, W, C, B, consensus_gap(W), lam_max, sv_min)

    @classmethod
    def from_adjacency(cls, adjacency) -> "Topology":
        adj = _as_adjacency(adjacency)
        return cls.from_weights(build_metropolis(adj), adj)

    @classmethod
    def from_edges(cls, n: int, edges, weights=None) -> "Topology":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                continue
            adj[i, j] = adj[j, i] = True
        if weights is None:
            return cls.from_adjacency(adj)
        return cls.from_weights(np.asarray(weights, dtype=float).reshape(n, n), adj)

    @property
    def N(self) -> int:
        return self.W.shape[0]

    @property
    def is_complete_average(self) -> bool:
        """True when ``W = 11^T/N``; the stepsize theory degenerates there."""
        return self.sigma == 0.0

    def edges(self) -> list[list[int]]:
        ii, jj = np.nonzero(np.triu(self.adjacency, 1))
        return [[int(i), int(j)] for i, j in zip(ii, jj)]

    def to_dict(self) -> dict:
        return {
            "n": self.N,
            "edges": self.edges(),
            "weights": self.W.ravel().tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        return cls.from_edges(int(data["n"]), data["edges"], data.get("weights"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def ring(N: int) -> np.ndarray:
    adj = np.zeros((N, N), dtype=bool)
    for i in range(N):
        j = (i + 1) % N
        if i != j:
            adj[i, j] = adj[j, i] = True
    return adj


def path_graph(N: int) -> np.ndarray:
    adj = np.zeros((N, N), dtype=bool)
    for i in range(N - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    return adj


def complete_graph(N: int) -> np.ndarray:
    adj = np.ones((N, N), dtype=bool)
    np.fill_diagonal(adj, False)
    return adj


def random_connected(N: int, p: float, rng: np.random.Generator,
                     max_attempts: int = 1000) -> np.ndarray:
    """Erdos-Renyi graph resampled until connected.

    Draws ``N*(N-1)/2`` uniforms per attempt from ``rng`` in upper-triangle
    row-major order, so the result is reproducible for a given generator state.
    """
    iu = np.triu_indices(N, 1)
    for _ in range(max_attempts):
        adj = np.zeros((N, N), dtype=bool)
        adj[iu] = rng.random(iu[0].size) < p
        adj |= adj.T
        if is_connected(adj):
            return adj
    raise DisconnectedGraph(f"no connected G({N}, {p}) sample in {max_attempts} attempts")
