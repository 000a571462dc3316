"""Hermitian linear algebra with explicit tolerance semantics.

Basis labels ``(i, j)`` are 1-based tensor factor indices and map to the
lexicographic position ``(i - 1) * n + (j - 1)`` of ``e_i (x) e_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

DEFAULT_KERNEL_THRESHOLD = 1e-9


@dataclass(frozen=True)
class KernelReport:
    """Eigenvalue-gap justified corank of a Hermitian matrix.

    ``threshold`` is absolute (already multiplied by the norm scale).
    ``eigen_gap`` is the smallest ``|lambda|`` above the threshold minus the
    largest ``|lambda|`` at or below it.
    """

    corank: int
    basis: np.ndarray
    eigen_gap: float
    threshold: float
    ambiguous: bool
    not_psd: bool
    min_eigenvalue: float

    @property
    def ok(self) -> bool:
        return not (self.ambiguous or self.not_psd)


def _as_hermitian(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def eigh(M) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns."""
    M = _as_hermitian(M)
    return np.linalg.eigh(M)


def kernel_report(M, threshold: float = DEFAULT_KERNEL_THRESHOLD,
                  lowest: int | None = None) -> KernelReport:
    """Corank and kernel basis of a Hermitian matrix.

    The absolute threshold is ``threshold * max(1, ||M||)``. With ``lowest``
    set, only the ``lowest`` smallest eigenpairs are computed and the norm is
    the infinity-norm bound on ``||M||_2``; if every probed eigenvalue lies
    inside ``10 * threshold`` the full spectrum is computed instead.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    M = _as_hermitian(M)
    dim = M.shape[0]
    if lowest is not None and lowest < dim:
        scale = max(1.0, float(np.abs(M).sum(axis=1).max()))
        th = threshold * scale
        w, V = scipy.linalg.eigh(M, subset_by_index=[0, lowest - 1], driver="evr")
        if np.all(np.abs(w) <= 10 * th):
            return kernel_report(M, threshold)
        # eigenvalues beyond the probe are >= w[-1] > 10*th, so they are not kernel
        return _report_from_spectrum(w, V, th)
    w, V = np.linalg.eigh(M)
    th = threshold * max(1.0, float(np.abs(w).max()))
    return _report_from_spectrum(w, V, th)


def _report_from_spectrum(w, V, th) -> KernelReport:
    aw = np.abs(w)
    inside = aw <= th
    below = aw[inside]
    above = aw[~inside]
    largest_below = float(below.max()) if below.size else 0.0
    smallest_above = float(above.min()) if above.size else np.inf
    return KernelReport(
        corank=int(inside.sum()),
        basis=V[:, inside],
        eigen_gap=smallest_above - largest_below,
        threshold=th,
        ambiguous=bool(np.any((aw > th) & (aw < 10 * th))),
        not_psd=bool(np.any(w < -th)),
        min_eigenvalue=float(w[0]),
    )


def label_index(i: int, j: int, n: int) -> int:
    return (i - 1) * n + (j - 1)


def partial_transpose(M, n: int) -> np.ndarray:
    """Block-wise transpose: ``out[(a,b),(c,d)] = M[(c,b),(a,d)]``."""
    M = np.asarray(M)
    if M.shape != (n * n, n * n):
        raise ValueError(f"matrix of shape {M.shape} is not {n * n}x{n * n}")
    return M.reshape(n, n, n, n).transpose(2, 1, 0, 3).reshape(n * n, n * n)


def principal_submatrix(M, labels: Sequence[tuple[int, int]], n: int) -> np.ndarray:
    """Rows and columns of ``M`` restricted to ``labels`` in the given order."""
    M = np.asarray(M)
    labels = [tuple(int(v) for v in lab) for lab in labels]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate basis labels")
    for i, j in labels:
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"label e_{i}{j} out of range for n={n}")
    idx = [label_index(i, j, n) for i, j in labels]
    return M[np.ix_(idx, idx)]


def periodic_tridiagonal_counts(diags: Sequence[np.ndarray], supers: Sequence[np.ndarray],
                                corners: Sequence[complex], shifts) -> np.ndarray:
    """Count eigenvalues below ``shifts`` for a batch of Hermitian blocks.

    Block ``b`` has diagonal ``diags[b]`` (length d), superdiagonal
    ``supers[b]`` (length d-1) and an optional ``(0, d-1)`` corner entry
    ``corners[b]`` (use 0 for a plain tridiagonal matrix; ignored when d <= 2).
    ``shifts`` has shape ``(B,)`` or ``(B, S)``; the result has the same shape.

    Sylvester inertia: the leading (d-1)x(d-1) part is factored as LDL^H and
    the last row is handled by its Schur complement.
    """
    B = len(diags)
    shifts = np.asarray(shifts, dtype=float)
    squeeze = shifts.ndim == 1
    shifts = shifts.reshape(B, -1)
    S = shifts.shape[1]
    if B == 0:
        return np.zeros((0,) if squeeze else (0, S), dtype=int)
    lengths = np.array([len(d) for d in diags])
    # ascending lengths make the blocks still being factored a suffix of the rows
    order = np.argsort(lengths, kind="stable")
    lengths = lengths[order]
    shifts = shifts[order]
    L = int(lengths.max())
    a = np.zeros((B, L))
    e = np.zeros((B, max(L - 1, 1)), dtype=complex)
    col = np.zeros((B, max(L - 1, 1)), dtype=complex)
    corners = np.asarray(corners, dtype=complex)[order]
    for row, b in enumerate(order):
        d = lengths[row]
        a[row, :d] = np.real(diags[b])
        if d >= 2:
            e[row, :d - 1] = supers[b]
            # last column above the diagonal: corner at row 0, super at row d-2
            col[row, d - 2] = e[row, d - 2]
            if d >= 3:
                col[row, 0] += corners[row]
    c = a[np.arange(B), lengths - 1]

    counts = np.zeros((B, S), dtype=int)
    tiny = np.finfo(float).tiny ** 0.5
    d_prev = np.ones((B, S))
    g_prev = np.zeros((B, S), dtype=complex)
    quad = np.zeros((B, S))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(L - 1):
            f = int(np.searchsorted(lengths - 1, t, side="right"))
            if f >= B:
                break
            sh = shifts[f:]
            if t == 0:
                d = a[f:, :1] - sh
                g = np.broadcast_to(col[f:, :1], sh.shape).astype(complex)
            else:
                dp = d_prev[f:]
                et = e[f:, t - 1:t]
                d = a[f:, t:t + 1] - sh - np.abs(et) ** 2 / dp
                g = col[f:, t:t + 1] - (np.conj(et) / dp) * g_prev[f:]
            d[d == 0] = -tiny
            counts[f:] += d < 0
            quad[f:] += np.abs(g) ** 2 / d
            d_prev[f:] = d
            g_prev[f:] = g
    schur = c[:, None] - shifts - quad
    counts += schur < 0
    out = np.empty_like(counts)
    out[order] = counts
    return out[:, 0] if squeeze else out


def tridiagonal_min_eigenvalue(diag, sup) -> float:
    """Smallest eigenvalue of a Hermitian tridiagonal matrix.

    Diagonal unitary similarity makes the superdiagonal real and nonnegative,
    so the real symmetric LAPACK bisection applies.
    """
    diag = np.real(np.asarray(diag, dtype=complex))
    if diag.size == 1:
        return float(diag[0])
    w = scipy.linalg.eigvalsh_tridiagonal(diag, np.abs(np.asarray(sup)), select="i",
                                           select_range=(0, 0))
    return float(w[0])
