"""Bilinear forms [i,j]_gamma, the system they generate, and its solution cases.

Convention: the system is evaluated at ``(conj(x), y)``, so a product vector
``conj(x) (x) y`` is orthogonal to the kernel of the partial transpose
exactly when ``system_residuals(x, y, ...)`` vanishes. Solution data uses
``v_j = (conj(x_j), y_j) = (c_j t, c_j gamma_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_TOL = 1e-9


class CaseTag(str, Enum):
    ZERO_FACTOR = "ZERO_FACTOR"
    ALPHA_LOW = "ALPHA_LOW"
    ALPHA_SPLIT = "ALPHA_SPLIT"
    BETA_SPLIT = "BETA_SPLIT"
    BETA_HIGH = "BETA_HIGH"


CASE_ORDER = list(CaseTag)


class InternalContradiction(RuntimeError):
    """A solution of the system fits none of the five cases."""


def eval_form(i: int, j: int, gamma, x, y) -> complex:
    """``x_i y_j - gamma_i^{-1} gamma_j x_j y_i`` with 1-based indices."""
    if i == j:
        return 0j
    g = np.asarray(gamma, dtype=complex)
    return complex(x[i - 1] * y[j - 1] - g[j - 1] / g[i - 1] * x[j - 1] * y[i - 1])


@dataclass(frozen=True)
class SystemRow:
    family: str  # "alpha" or "beta"
    index: int   # k for alpha rows, l for beta rows
    terms: tuple  # (sign, i, j) triples

    def __str__(self) -> str:
        parts = []
        for s, i, j in self.terms:
            op = "+" if s > 0 else "-"
            parts.append(f"{op} [{i},{j}]")
        text = " ".join(parts)
        return (text[2:] if text.startswith("+ ") else text) + f"_{self.family}"


def build_system(n: int) -> list[SystemRow]:
    """The 2n - 3 rows: alpha rows for k = 2..n, then beta rows for l = 1..n-2."""
    if n < 3:
        raise ValueError("n must be >= 3")
    rows = []
    for k in range(2, n + 1):
        terms = tuple(((-1) ** (i - 1), i, k + 1 - i) for i in range(1, k // 2 + 1))
        rows.append(SystemRow("alpha", k, terms))
    for l in range(1, n - 1):
        terms = tuple(((-1) ** t, n - l + t, n - t) for t in range((l - 1) // 2 + 1))
        rows.append(SystemRow("beta", l, terms))
    return rows


def _row_arrays(n: int):
    sign, fam, ii, jj, rid = [], [], [], [], []
    for r, row in enumerate(build_system(n)):
        for s, i, j in row.terms:
            sign.append(s)
            fam.append(row.family == "beta")
            ii.append(i - 1)
            jj.append(j - 1)
            rid.append(r)
    return (np.array(sign, float), np.array(fam, bool), np.array(ii), np.array(jj),
            np.array(rid), 2 * n - 3)


def system_residuals(x, y, alpha, beta) -> np.ndarray:
    """Row values of the system at ``(conj(x), y)``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    a = np.asarray(alpha, dtype=complex)
    b = np.asarray(beta, dtype=complex)
    n = x.size
    sign, fam, ii, jj, rid, nrows = _row_arrays(n)
    u = np.conj(x)
    g = np.where(fam[:, None], b[None, :], a[None, :])
    gi = g[np.arange(len(ii)), ii]
    gj = g[np.arange(len(jj)), jj]
    vals = sign * (u[ii] * y[jj] - gj / gi * u[jj] * y[ii])
    out = np.zeros(nrows, dtype=complex)
    np.add.at(out, rid, vals)
    return out


def is_solution(x, y, alpha, beta, tol: float = DEFAULT_TOL) -> bool:
    scale = max(np.linalg.norm(x) * np.linalg.norm(y), np.finfo(float).tiny)
    return bool(np.abs(system_residuals(x, y, alpha, beta)).max() <= tol * scale)


def case_support(tag: CaseTag, n: int, p: int | None, q: int | None) -> list[int]:
    """Indices (1-based) allowed to carry nonzero v_j for a case."""
    half = (n + 1) / 2
    if tag is CaseTag.ZERO_FACTOR:
        return list(range(1, n + 1))
    if tag is CaseTag.ALPHA_LOW:
        p = 1 if p is None else p
        q = int(half) if q is None else q
        if not 1 <= p <= q <= half:
            raise ValueError(f"ALPHA_LOW needs 1 <= p <= q <= {half}")
        return list(range(p, q + 1))
    if tag is CaseTag.BETA_HIGH:
        p = int(np.ceil(half)) if p is None else p
        q = n if q is None else q
        if not half <= p <= q <= n:
            raise ValueError(f"BETA_HIGH needs {half} <= p <= q <= n")
        return list(range(p, q + 1))
    if p is None or q is None:
        raise ValueError(f"{tag.value} needs both p and q")
    if tag is CaseTag.ALPHA_SPLIT:
        if not (1 <= p <= n - q + 1 < half < q <= n):
            raise ValueError("ALPHA_SPLIT needs p <= n-q+1 < (n+1)/2 < q")
        return list(range(p, n - q + 2)) + [q]
    if tag is CaseTag.BETA_SPLIT:
        if not (1 <= p and (n + 3) / 2 < n - p + 2 <= q <= n):
            raise ValueError("BETA_SPLIT needs (n+3)/2 < n-p+2 <= q <= n")
        return [p] + list(range(n - p + 2, q + 1))
    raise ValueError(tag)


def _uses_alpha(tag: CaseTag) -> bool:
    return tag in (CaseTag.ALPHA_LOW, CaseTag.ALPHA_SPLIT)


@dataclass(frozen=True)
class SolutionCase:
    """One solution family; ``c`` is a full length-n vector (zeros off support)."""

    tag: CaseTag
    n: int
    t: complex = 1.0
    c: np.ndarray | None = None
    p: int | None = None
    q: int | None = None
    zero: str = "x"  # which factor vanishes for ZERO_FACTOR
    overlap: tuple = field(default_factory=tuple)

    @property
    def ambiguous(self) -> bool:
        return bool(self.overlap)


def generate_solution(case: SolutionCase, alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, y)`` with ``conj(x_j) = c_j t`` and ``y_j = c_j gamma_j``.

    ``case.c`` may have length n or the length of the case's support.
    """
    n = case.n
    tag = CaseTag(case.tag)
    c_in = np.ones(n, dtype=complex) if case.c is None else np.asarray(case.c, dtype=complex)
    if tag is CaseTag.ZERO_FACTOR:
        other = c_in if c_in.size == n else np.ones(n, dtype=complex)
        zero = np.zeros(n, dtype=complex)
        return (zero, other) if case.zero == "x" else (other, zero)
    support = case_support(tag, n, case.p, case.q)
    c = np.zeros(n, dtype=complex)
    if c_in.size == n:
        off = np.setdiff1d(np.arange(1, n + 1), support)
        if np.any(c_in[off - 1] != 0):
            raise ValueError(f"c is nonzero outside the {tag.value} support {support}")
        c = c_in.copy()
    elif c_in.size == len(support):
        c[np.asarray(support) - 1] = c_in
    else:
        raise ValueError(f"c must have length {n} or {len(support)}")
    if tag in (CaseTag.ALPHA_SPLIT, CaseTag.BETA_SPLIT):
        if c[case.p - 1] == 0 or c[case.q - 1] == 0:
            raise ValueError("split cases need c_p != 0 and c_q != 0")
    if case.t == 0:
        raise ValueError("t must be nonzero")
    g = np.asarray(alpha if _uses_alpha(tag) else beta, dtype=complex)
    x = np.conj(c * case.t)
    y = c * g
    return x, y


def _parallel(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return False
    proj = np.vdot(a, b) / na ** 2
    return bool(np.linalg.norm(b - proj * a) <= tol * nb)


def classify_solution(x, y, alpha, beta, tol: float = DEFAULT_TOL) -> SolutionCase | None:
    """Match a solution of the system to its case; ``None`` if not a solution.

    Cases are tried in order and the first match is returned; other matching
    cases are listed in ``overlap``.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = x.size
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return SolutionCase(CaseTag.ZERO_FACTOR, n, zero="x" if nx == 0 else "y")
    scale = nx * ny
    if np.abs(system_residuals(x, y, alpha, beta)).max() > tol * scale:
        return None
    u = np.conj(x)
    v = np.sqrt(np.abs(u) ** 2 / nx ** 2 + np.abs(y) ** 2 / ny ** 2)
    S = np.flatnonzero(v > tol) + 1
    p, q = int(S[0]), int(S[-1])
    half = (n + 1) / 2
    candidates = []
    if q <= half:
        candidates.append((CaseTag.ALPHA_LOW, p, q))
    if q > half and p <= n - q + 1:
        candidates.append((CaseTag.ALPHA_SPLIT, p, q))
    if p < half and n - p + 2 <= q:
        candidates.append((CaseTag.BETA_SPLIT, p, q))
    if p >= half:
        candidates.append((CaseTag.BETA_HIGH, p, q))
    matches = []
    for tag, pp, qq in candidates:
        allowed = case_support(tag, n, pp, qq)
        if not set(S.tolist()) <= set(allowed):
            continue
        g = np.asarray(alpha if _uses_alpha(tag) else beta, dtype=complex)
        idx = np.asarray(allowed) - 1
        cvec = y[idx] / g[idx]
        if not _parallel(cvec, u[idx], tol):
            continue
        c = np.zeros(n, dtype=complex)
        c[idx] = cvec
        t = np.vdot(cvec, u[idx]) / np.vdot(cvec, cvec)
        matches.append(SolutionCase(tag, n, complex(t), c, pp, qq))
    if not matches:
        raise InternalContradiction(
            f"solution with support {S.tolist()} fits no case; residuals vanish but pattern is new")
    first = matches[0]
    overlap = tuple(m.tag for m in matches[1:])
    return SolutionCase(first.tag, n, first.t, first.c, first.p, first.q, overlap=overlap)


def lemma_basic_property(i: int, j: int, k: int, gamma, x, y, tol: float = DEFAULT_TOL) -> bool:
    """If [i,j] = [i,k] = 0 with (x_i, y_i) != 0 then [j,k] = 0.

    Returns True when the premise fails.
    """
    if len({i, j, k}) != 3:
        raise ValueError("i, j, k must be distinct")
    scale = max(np.linalg.norm(x) * np.linalg.norm(y), np.finfo(float).tiny)
    if abs(x[i - 1]) + abs(y[i - 1]) <= tol * (np.linalg.norm(x) + np.linalg.norm(y)):
        return True
    if abs(eval_form(i, j, gamma, x, y)) > tol * scale or abs(eval_form(i, k, gamma, x, y)) > tol * scale:
        return True
    return abs(eval_form(j, k, gamma, x, y)) <= 10 * tol * scale


def kernel_functionals(params) -> list[tuple[str, int, np.ndarray]]:
    """Closed-form kernel vectors of the partial transpose, one per block.

    Each entry is (family, row index, length n^2 vector) keyed to the system
    row it reproduces.
    """
    from .construction import rho_gamma_blocks

    n = params.n
    out = []
    for blk in rho_gamma_blocks(params):
        fam, idx = blk.tag.split(":")
        vec = np.zeros(n * n, dtype=complex)
        lab = (blk.labels[:, 0] - 1) * n + blk.labels[:, 1] - 1
        vec[lab] = blk.kernel_vector()
        out.append((fam, int(idx), vec))
    return out
