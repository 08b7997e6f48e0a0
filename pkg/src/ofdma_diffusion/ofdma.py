"""Multi-user OFDMA downlink: subcarrier allocation, composition, reception.

K users share L subcarriers through pairwise-disjoint index sets, so each
user's selection matrices are mutually orthogonal and the other users'
signals vanish under that user's pseudo-inverse.  Allocation exploits
multi-user diversity: users greedily claim their strongest remaining
subcarriers, with the pick order rotating each round for fairness.

Everything here is a pure function over immutable plans and channels; the
per-user receive/recover paths can run concurrently with independent RNG
streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linop import DiagonalChannel, MaskedChannelOp, SingularOperatorError, _readonly
from . import linop


class InfeasiblePlanError(ValueError):
    """K*N exceeds the available subcarriers."""


@dataclass(frozen=True, eq=False)
class AllocationPlan:
    """Disjoint per-user subcarrier assignments (K users, N subcarriers each)."""

    K: int
    L: int
    N: int
    per_user: tuple[np.ndarray, ...]

    def __post_init__(self):
        per_user = tuple(
            _readonly(np.asarray(u, dtype=np.int64).ravel()) for u in self.per_user
        )
        object.__setattr__(self, "per_user", per_user)
        if len(per_user) != self.K:
            raise ValueError("per_user must hold one index list per user")
        flat = np.concatenate(per_user) if per_user else np.array([], dtype=np.int64)
        if any(u.size != self.N for u in per_user):
            raise ValueError("every user must hold exactly N subcarriers")
        if flat.size != np.unique(flat).size:
            raise ValueError("user subcarrier sets must be pairwise disjoint")
        if flat.size and (flat.min() < 0 or flat.max() >= self.L):
            raise ValueError("subcarrier index out of range")


def allocate(channels: list[DiagonalChannel], n_per_user: int) -> AllocationPlan:
    """Greedy diversity-aware allocation of N subcarriers to each user.

    Runs N rounds; in each round every user picks its highest-|gain|
    unclaimed subcarrier (ties broken toward the lowest index), and the
    user order rotates by one position per round for fairness.
    """
    k_users = len(channels)
    if k_users == 0:
        raise ValueError("need at least one user channel")
    L = len(channels[0])
    if any(len(c) != L for c in channels):
        raise ValueError("all user channels must cover the same L subcarriers")
    if k_users * n_per_user > L:
        raise InfeasiblePlanError(
            f"cannot give {n_per_user} subcarriers to each of {k_users} users "
            f"with only {L} available"
        )

    mags = [np.abs(c.gains) for c in channels]
    unclaimed = np.ones(L, dtype=bool)
    picks: list[list[int]] = [[] for _ in range(k_users)]
    for rnd in range(n_per_user):
        for u in range(k_users):
            user = (rnd + u) % k_users
            candidates = np.flatnonzero(unclaimed)
            best = candidates[np.argmax(mags[user][candidates])]
            picks[user].append(int(best))
            unclaimed[best] = False
    return AllocationPlan(K=k_users, L=L, N=n_per_user,
                          per_user=tuple(np.array(p) for p in picks))


def format_plan(plan: AllocationPlan) -> str:
    """One line per user, comma-separated subcarrier indices."""
    return "\n".join(",".join(str(i) for i in u) for u in plan.per_user)


@dataclass(frozen=True, eq=False)
class ChunkMapping:
    """Bijection between the M signal chunks and M disjoint pixel groups.

    ``patch-grid`` tiles the image with rows x cols equal square patches
    (the default; lost chunks then show up as square holes); ``contiguous``
    splits the flat signal into M equal runs, for 1-D signals.
    """

    mode: str
    image_shape: tuple[int, ...]
    m_chunks: int
    grid: tuple[int, int] | None = None

    @classmethod
    def patch_grid(cls, image_shape, rows: int, cols: int) -> "ChunkMapping":
        h, w = image_shape[0], image_shape[1]
        if h % rows or w % cols:
            raise ValueError(f"{rows}x{cols} grid does not tile a {h}x{w} image")
        return cls(mode="patch-grid", image_shape=tuple(image_shape),
                   m_chunks=rows * cols, grid=(rows, cols))

    @classmethod
    def contiguous(cls, length: int, m_chunks: int) -> "ChunkMapping":
        if length % m_chunks:
            raise ValueError(f"{m_chunks} chunks do not evenly split length {length}")
        return cls(mode="contiguous", image_shape=(length,), m_chunks=m_chunks)

    @property
    def n_pixels(self) -> int:
        return int(np.prod(self.image_shape))

    @property
    def chunk_size(self) -> int:
        return self.n_pixels // self.m_chunks

    def chunk_indices(self, j: int) -> np.ndarray:
        """Flat pixel indices belonging to chunk j."""
        if not 0 <= j < self.m_chunks:
            raise ValueError(f"chunk index {j} out of range")
        if self.mode == "contiguous":
            p = self.chunk_size
            return np.arange(j * p, (j + 1) * p)
        rows, cols = self.grid
        h, w = self.image_shape[0], self.image_shape[1]
        ph, pw = h // rows, w // cols
        r0, c0 = (j // cols) * ph, (j % cols) * pw
        rr, cc = np.meshgrid(np.arange(r0, r0 + ph), np.arange(c0, c0 + pw),
                             indexing="ij")
        return (rr * w + cc).ravel()

    def all_chunk_indices(self) -> np.ndarray:
        """(M, chunk_size) pixel-index table, one row per chunk."""
        return np.stack([self.chunk_indices(j) for j in range(self.m_chunks)])


def pixel_mask(chunks: np.ndarray, mapping: ChunkMapping) -> np.ndarray:
    """Image-shaped 0/1 mask: 1 on pixels of the given (transmitted) chunks."""
    mask = np.zeros(mapping.n_pixels)
    for j in np.asarray(chunks, dtype=np.int64).ravel():
        mask[mapping.chunk_indices(int(j))] = 1.0
    return mask.reshape(mapping.image_shape)


def build_operator(M: int, subcarriers: np.ndarray, chunks: np.ndarray,
                   channel: DiagonalChannel) -> MaskedChannelOp:
    """Per-user degradation A = H B for an assignment of chunks to subcarriers."""
    subcarriers = np.asarray(subcarriers, dtype=np.int64).ravel()
    gains = channel.gains[subcarriers]
    if not np.iscomplexobj(gains) or np.all(gains.imag == 0):
        gains = gains.real
    return MaskedChannelOp(L=len(channel), M=M, selected=subcarriers,
                           slots=np.asarray(chunks, dtype=np.int64).ravel(),
                           gains=gains)


def compose_downlink(plan: AllocationPlan, signals, chunk_sets=None) -> np.ndarray:
    """y = sum of selection-mapped user signals over the L subcarriers.

    ``chunk_sets[k]`` names which N chunks of user k's length-M signal ride
    its subcarriers, matched position by position with ``plan.per_user[k]``;
    by default the first N chunks are placed.
    """
    if len(signals) != plan.K:
        raise ValueError(f"expected {plan.K} user signals, got {len(signals)}")
    if chunk_sets is None:
        chunk_sets = [np.arange(plan.N)] * plan.K
    dtype = np.result_type(np.float64, *(np.asarray(s).dtype for s in signals))
    y = np.zeros(plan.L, dtype=dtype)
    for k in range(plan.K):
        x = np.asarray(signals[k]).ravel()
        chunks = np.asarray(chunk_sets[k], dtype=np.int64).ravel()
        if chunks.size != plan.N:
            raise ValueError(f"user {k} must place exactly N={plan.N} chunks")
        if x.size < plan.N:
            raise ValueError(f"user {k} signal shorter than N={plan.N}")
        y[plan.per_user[k]] = x[chunks]
    return y


def receive(y: np.ndarray, channel: DiagonalChannel, sigma_n: float,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """r = H y + n with circularly-symmetric Gaussian noise of std sigma_n."""
    if sigma_n < 0:
        raise ValueError("sigma_n must be non-negative")
    y = np.asarray(y).ravel()
    if y.size != len(channel):
        raise ValueError("signal/channel length mismatch")
    r = channel.gains * y
    if sigma_n > 0:
        scale = sigma_n / np.sqrt(2.0)
        r = r + scale * (rng.standard_normal(y.size)
                         + 1j * rng.standard_normal(y.size))
    return r


def power_control(channel: DiagonalChannel, subcarriers: np.ndarray) -> DiagonalChannel:
    """Effective channel after transmit power control: unit gain where assigned.

    The transmit-side scaling by 1/h is absorbed, so the operator built on
    the assigned subcarriers afterwards is a pure selection mask.
    """
    subcarriers = np.asarray(subcarriers, dtype=np.int64).ravel()
    if np.any(channel.gains[subcarriers] == 0):
        raise SingularOperatorError("cannot power-control a zero-gain subcarrier")
    gains = channel.gains.copy()
    gains[subcarriers] = 1.0
    return DiagonalChannel(gains)


def assemble_estimate(op: MaskedChannelOp, r: np.ndarray,
                      x_tilde: np.ndarray) -> np.ndarray:
    """Receiver estimate: recovered chunks plus generated null-space content.

    x_hat = A^+ r + (I - A^+ A) x_tilde; with zero noise and the true signal
    supplied for the generated part, this reproduces the signal exactly.
    """
    return linop.pinv_apply(op, r) + linop.null_project(op, x_tilde)
