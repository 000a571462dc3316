"""Cycle matrices P_d, the 2x2 matrices P_2 and the path matrices Q_m.

Arguments follow the subscripts ``z_2, ..., z_d``: the Python sequence ``z``
holds ``z[0] = z_2``, ``z[1] = z_3`` and so on, with ``z_1 = 1`` implicit.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-12


def unit(angles) -> np.ndarray:
    """Unit complex numbers from angles in radians."""
    return np.exp(1j * np.asarray(angles, dtype=float))


def _check_unit(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite parameter")
    bad = np.abs(np.abs(z) - 1) > UNIT_TOL
    if bad.any():
        raise ValueError(f"parameter {z[bad][0]} does not have unit modulus")
    return z


def _cycle_entries(z: np.ndarray) -> tuple[np.ndarray, complex]:
    zz = np.concatenate([[1.0 + 0j], z])
    return zz[1:] * np.conj(zz[:-1]), zz[-1]


def build_P(d: int, z) -> np.ndarray:
    """Hermitian d x d cycle matrix with diagonal 2 and corank one."""
    if d < 4 or d % 2:
        raise ValueError(f"P_d needs an even d >= 4, got {d}")
    z = _check_unit(z)
    if z.size != d - 1:
        raise ValueError(f"P_{d} takes {d - 1} parameters, got {z.size}")
    sup, corner = _cycle_entries(z)
    M = np.diag(np.full(d, 2.0 + 0j))
    idx = np.arange(d - 1)
    M[idx, idx + 1] = sup
    M[idx + 1, idx] = np.conj(sup)
    M[0, d - 1] = corner
    M[d - 1, 0] = np.conj(corner)
    return M


def build_P2(z) -> np.ndarray:
    (z,) = _check_unit(z)
    return np.array([[1, z], [np.conj(z), 1]], dtype=complex)


def kernel_vector_P(d: int, z) -> np.ndarray:
    """Unnormalized kernel vector ``(1, -conj(z_2), conj(z_3), ...)`` of ``build_P(d, z)``."""
    if d < 4 or d % 2:
        raise ValueError(f"P_d needs an even d >= 4, got {d}")
    z = _check_unit(z)
    if z.size != d - 1:
        raise ValueError(f"P_{d} takes {d - 1} parameters, got {z.size}")
    return _alternating_conj(np.concatenate([[1.0 + 0j], z]))


def kernel_vector_P2(z) -> np.ndarray:
    (z,) = _check_unit(z)
    return np.array([1, -np.conj(z)])


def _alternating_conj(zz: np.ndarray) -> np.ndarray:
    signs = np.where(np.arange(zz.size) % 2 == 0, 1.0, -1.0)
    return signs * np.conj(zz)


def build_Q(m: int, z) -> np.ndarray:
    """Tridiagonal positive definite matrix with diagonal 2 and determinant m + 1."""
    if m < 2:
        raise ValueError(f"Q_m needs m >= 2, got {m}")
    z = _check_unit(z)
    if z.size != m - 1:
        raise ValueError(f"Q_{m} takes {m - 1} parameters, got {z.size}")
    M = np.diag(np.full(m, 2.0 + 0j))
    idx = np.arange(m - 1)
    M[idx, idx + 1] = z
    M[idx + 1, idx] = np.conj(z)
    return M


def cartan_cycle(d: int) -> np.ndarray:
    """``2I`` minus the adjacency matrix of the d-cycle."""
    return build_P(d, [(-1) ** (k - 1) for k in range(2, d + 1)])
