"""Structured linear operators for per-user masked OFDMA reception.

A user's end-to-end degradation is ``A = H B``: a diagonal per-subcarrier
channel ``H`` composed with a 0/1 selection matrix ``B`` that places N of
the M signal chunks onto the user's subcarriers.  Such an operator is a
row selection times a diagonal, so its Moore-Penrose pseudo-inverse and
the range/null-space projectors are analytic (reciprocal gains on the
selected entries) and O(N) -- no dense factorization anywhere.

Operators are immutable after construction and all operations are pure
functions, so they can be shared freely across concurrent samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularOperatorError(ValueError):
    """A selected subcarrier carries a zero gain, so A has no reciprocal."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RealSignal:
    """A real signal of length M with its image-shape metadata.

    ``values`` is the flat signal vector; ``shape`` records how it folds
    back into (height, width[, channels]); ``vrange`` is the nominal value
    interval after normalization (default [-1, 1]).
    """

    values: np.ndarray
    shape: tuple[int, ...]
    vrange: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        values = _readonly(np.asarray(self.values, dtype=np.float64).ravel())
        object.__setattr__(self, "values", values)
        if values.size != int(np.prod(self.shape)):
            raise ValueError(
                f"signal length {values.size} does not match shape {self.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("signal contains non-finite entries")

    def image(self) -> np.ndarray:
        """The signal folded back to its declared shape (a view)."""
        return self.values.reshape(self.shape)


@dataclass(frozen=True, eq=False)
class DiagonalChannel:
    """Frequency-domain per-subcarrier channel coefficients (length L)."""

    gains: np.ndarray

    def __post_init__(self):
        gains = _readonly(np.asarray(self.gains, dtype=np.complex128).ravel())
        object.__setattr__(self, "gains", gains)
        if not np.all(np.isfinite(gains)):
            raise ValueError("channel gains must be finite")

    def __len__(self) -> int:
        return self.gains.size


@dataclass(frozen=True, eq=False)
class MaskedChannelOp:
    """The structured degradation A: C^M -> C^L of one user's downlink.

    ``selected[i]`` is the i-th subcarrier the user occupies, ``slots[i]``
    the signal-chunk index riding on it, and ``gains[i]`` the (nonzero)
    channel coefficient seen there.  After power control the gains are all
    1.0 and the operator degenerates to a pure selection mask.

    Parameters
    ----------
    L, M : int
        Subcarrier count and signal length, N <= M <= L.
    selected : array of int, length N
        Distinct subcarrier indices in [0, L).
    slots : array of int, length N
        Distinct chunk indices in [0, M); chunk ``slots[i]`` is carried on
        subcarrier ``selected[i]``.
    gains : array, length N
        Nonzero gain per selected subcarrier (real or complex).
    """

    L: int
    M: int
    selected: np.ndarray
    slots: np.ndarray
    gains: np.ndarray
    _is_real: bool = field(init=False, repr=False)

    def __post_init__(self):
        selected = _readonly(np.asarray(self.selected, dtype=np.int64).ravel())
        slots = _readonly(np.asarray(self.slots, dtype=np.int64).ravel())
        gains = np.asarray(self.gains).ravel()
        if not np.iscomplexobj(gains):
            gains = gains.astype(np.float64)
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "gains", _readonly(gains))
        object.__setattr__(self, "_is_real", not np.iscomplexobj(gains))

        n = selected.size
        if not (n <= self.M <= self.L):
            raise ValueError(f"need N <= M <= L, got N={n}, M={self.M}, L={self.L}")
        if slots.size != n or gains.size != n:
            raise ValueError("selected, slots and gains must have equal length")
        if n != np.unique(selected).size:
            raise ValueError("selected subcarrier indices must be distinct")
        if n != np.unique(slots).size:
            raise ValueError("chunk slots must be distinct")
        if n and (selected.min() < 0 or selected.max() >= self.L):
            raise ValueError("subcarrier index out of range")
        if n and (slots.min() < 0 or slots.max() >= self.M):
            raise ValueError("chunk slot out of range")
        if not np.all(np.isfinite(gains)):
            raise ValueError("gains must be finite")
        if np.any(gains == 0):
            raise SingularOperatorError(
                "zero gain on a selected subcarrier (allocation must avoid deep fades)"
            )

    @property
    def N(self) -> int:
        return self.selected.size

    @classmethod
    def selection_mask(cls, M: int, kept: np.ndarray) -> "MaskedChannelOp":
        """Pure unit-gain mask in signal space (L = M, identity slots)."""
        kept = np.asarray(kept, dtype=np.int64).ravel()
        return cls(L=M, M=M, selected=kept, slots=kept, gains=np.ones(kept.size))


def _check_len(x: np.ndarray, n: int, what: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.size != n:
        raise ValueError(f"{what} must be a vector of length {n}, got shape {x.shape}")
    return x


def apply(op: MaskedChannelOp, x: np.ndarray) -> np.ndarray:
    """A x: place gain-scaled chunks on their subcarriers, zeros elsewhere."""
    x = _check_len(x, op.M, "signal")
    out = np.zeros(op.L, dtype=np.result_type(x.dtype, op.gains.dtype, np.float64))
    out[op.selected] = op.gains * x[op.slots]
    return out


def pinv_apply(op: MaskedChannelOp, r: np.ndarray) -> np.ndarray:
    """A^+ r: reciprocal-gain recovery of the transmitted chunks.

    Chunk ``slots[i]`` receives ``r[selected[i]] / gains[i]``; chunks that
    were never transmitted come back as zero.  This is the Moore-Penrose
    pseudo-inverse of the structured matrix, computed analytically.
    """
    r = _check_len(r, op.L, "received vector")
    out = np.zeros(op.M, dtype=np.result_type(r.dtype, op.gains.dtype, np.float64))
    out[op.slots] = r[op.selected] / op.gains
    return out


def range_project(op: MaskedChannelOp, x: np.ndarray) -> np.ndarray:
    """A^+ A x: keep the transmitted chunks, zero the rest."""
    x = _check_len(x, op.M, "signal")
    out = np.zeros_like(x, dtype=np.result_type(x.dtype, np.float64))
    out[op.slots] = x[op.slots]
    return out


def null_project(op: MaskedChannelOp, x: np.ndarray) -> np.ndarray:
    """(I - A^+ A) x: keep the untransmitted chunks, zero the rest."""
    x = _check_len(x, op.M, "signal")
    out = np.array(x, dtype=np.result_type(x.dtype, np.float64))
    out[op.slots] = 0
    return out


def decompose(op: MaskedChannelOp, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split x into its range-space and null-space parts (they sum to x)."""
    return range_project(op, x), null_project(op, x)
