"""Block-structured assembly of the corank-one PPT states and their partial transposes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import blocks as bb
from .linalg import partial_transpose

DENSE_GATE = 12
GENERICITY_SEPARATION = 1e-12
TWO_PI = 2 * math.pi


class GenericityError(ValueError):
    """Raised when alpha_{i,j} = beta_{i,j} for some pair i < j."""

    def __init__(self, pairs, total: int | None = None):
        self.pairs = [tuple(p) for p in pairs]
        total = len(self.pairs) if total is None else total
        shown = ", ".join(f"({i},{j})" for i, j in self.pairs[:10])
        more = "" if total <= 10 else f" and {total - 10} more"
        super().__init__(f"genericity violated at pairs {shown}{more}")


def wrap_angle(x):
    """Map angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(y == -np.pi, np.pi, y)


@dataclass(frozen=True)
class ParamSet:
    """Unit-modulus parameters stored as angles, with alpha_1 = beta_n = 1.

    ``r`` is the diagonal loading; ``None`` means not yet determined.
    """

    n: int
    alpha_angles: tuple
    beta_angles: tuple
    r: float | None = None

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 3:
            raise ValueError(f"n must be an integer >= 3, got {n!r}")
        for name in ("alpha_angles", "beta_angles"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != n:
                raise ValueError(f"{name} must have length {n}, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, vals)
        if abs(wrap_angle(self.alpha_angles[0])) > 1e-12:
            raise ValueError("alpha_angles[0] must be 0 (alpha_1 = 1)")
        if abs(wrap_angle(self.beta_angles[-1])) > 1e-12:
            raise ValueError("beta_angles[-1] must be 0 (beta_n = 1)")
        if self.r is not None:
            r = float(self.r)
            if not math.isfinite(r) or r < 0:
                raise ValueError(f"r must be a nonnegative real, got {self.r!r}")
            object.__setattr__(self, "r", r)
        object.__setattr__(self, "n", int(n))

    @property
    def alpha(self) -> np.ndarray:
        a = bb.unit(self.alpha_angles)
        a[0] = 1.0
        return a

    @property
    def beta(self) -> np.ndarray:
        b = bb.unit(self.beta_angles)
        b[-1] = 1.0
        return b

    def alpha_ratio(self, i: int, j: int) -> complex:
        """alpha_i^{-1} alpha_j with 1-based indices."""
        a = self.alpha
        return complex(np.conj(a[i - 1]) * a[j - 1])

    def beta_ratio(self, i: int, j: int) -> complex:
        b = self.beta
        return complex(np.conj(b[i - 1]) * b[j - 1])

    def with_r(self, r: float | None) -> "ParamSet":
        return ParamSet(self.n, self.alpha_angles, self.beta_angles, r)

    def violation_array(self, separation: float = GENERICITY_SEPARATION) -> np.ndarray:
        """(k, 2) array of 1-based pairs i < j with alpha_{i,j} = beta_{i,j}."""
        delta = np.asarray(self.alpha_angles) - np.asarray(self.beta_angles)
        diff = np.abs(wrap_angle(delta[None, :] - delta[:, None]))
        return np.argwhere(np.triu(diff < separation, k=1)) + 1

    def genericity_violations(self, separation: float = GENERICITY_SEPARATION) -> list[tuple[int, int]]:
        """Pairs i < j (1-based) with alpha_{i,j} = beta_{i,j} up to ``separation`` radians."""
        return [tuple(p) for p in self.violation_array(separation).tolist()]

    def is_generic(self) -> bool:
        return self.violation_array().size == 0

    def to_dict(self) -> dict:
        d = {"n": self.n, "alpha_angles": list(self.alpha_angles),
             "beta_angles": list(self.beta_angles)}
        if self.r is not None:
            d["r"] = self.r
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSet":
        if not isinstance(d, dict):
            raise ValueError("params document must be an object")
        for key in ("n", "alpha_angles", "beta_angles"):
            if key not in d:
                raise ValueError(f"params: missing field '{key}'")
        n = d["n"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise ValueError("params: field 'n' must be an integer")
        for key in ("alpha_angles", "beta_angles"):
            v = d[key]
            if not isinstance(v, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
                raise ValueError(f"params: field '{key}' must be a list of numbers")
        r = d.get("r")
        if r is not None and (not isinstance(r, (int, float)) or isinstance(r, bool)):
            raise ValueError("params: field 'r' must be a number")
        try:
            return cls(n, tuple(d["alpha_angles"]), tuple(d["beta_angles"]), r)
        except ValueError as exc:
            raise ValueError(f"params: {exc}") from None


def load_params(path) -> ParamSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"params file {path}: invalid JSON ({exc})") from None
    return ParamSet.from_dict(doc)


def save_params(params: ParamSet, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class BlockSpec:
    """A principal-submatrix block over ``labels`` (shape (d, 2), 1-based).

    kinds:
      ``cycle``  scale * P_d(z), z = (z_2, ..., z_d)
      ``pair``   scale * P_2(z), z = (z,)
      ``path``   tridiagonal with ``diag`` and superdiagonal ``sup``
      ``dense``  explicit ``matrix``
    """

    labels: np.ndarray
    kind: str
    scale: float = 1.0
    z: np.ndarray | None = None
    diag: np.ndarray | None = None
    sup: np.ndarray | None = None
    matrix: np.ndarray | None = None
    tag: str = ""

    @property
    def size(self) -> int:
        return len(self.labels)

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray, complex]:
        """(diagonal, superdiagonal, top-right corner) for the non-dense kinds."""
        s = self.scale
        if self.kind == "cycle":
            sup, corner = bb._cycle_entries(self.z)
            return np.full(self.size, 2.0 * s), s * sup, s * corner
        if self.kind == "pair":
            return np.full(2, s), s * np.asarray(self.z, dtype=complex), 0j
        if self.kind == "path":
            return s * np.asarray(self.diag, dtype=float), s * np.asarray(self.sup, dtype=complex), 0j
        raise ValueError(f"{self.kind} block has no tridiagonal form")

    def dense(self) -> np.ndarray:
        if self.kind == "dense":
            return np.asarray(self.matrix, dtype=complex)
        if self.kind == "cycle":
            return self.scale * bb.build_P(self.size, self.z)
        if self.kind == "pair":
            return self.scale * bb.build_P2(self.z[0])
        d, s, _ = self.tridiagonal()
        M = np.diag(d.astype(complex))
        idx = np.arange(self.size - 1)
        M[idx, idx + 1] = s
        M[idx + 1, idx] = np.conj(s)
        return M

    def kernel_vector(self) -> np.ndarray:
        """Unnormalized closed-form kernel vector of a cycle or pair block."""
        if self.kind == "cycle":
            return bb.kernel_vector_P(self.size, self.z)
        if self.kind == "pair":
            return bb.kernel_vector_P2(self.z[0])
        raise ValueError(f"{self.kind} block has no closed-form kernel vector")

    def coo(self):
        """Row positions, column positions and values of the nonzero entries."""
        if self.kind == "dense":
            M = np.asarray(self.matrix, dtype=complex)
            r, c = np.nonzero(M)
            return r, c, M[r, c]
        d, s, corner = self.tridiagonal()
        k = self.size
        i = np.arange(k)
        j = np.arange(k - 1)
        rows = [i, j, j + 1]
        cols = [i, j + 1, j]
        vals = [d.astype(complex), s, np.conj(s)]
        if corner != 0 and k >= 3:
            rows += [np.array([0]), np.array([k - 1])]
            cols += [np.array([k - 1]), np.array([0])]
            vals += [np.array([corner]), np.array([np.conj(corner)])]
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        keep = v != 0
        return r[keep], c[keep], v[keep]


@dataclass(frozen=True)
class StateAssembly:
    """Disjoint principal blocks plus scalar diagonal entries of an n^2 x n^2 matrix."""

    n: int
    blocks: tuple
    diag_labels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    diag_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    name: str = ""

    @property
    def diagonal(self) -> dict:
        return {(int(i), int(j)): float(v) for (i, j), v in zip(self.diag_labels, self.diag_values)}

    def coverage(self) -> np.ndarray:
        """How many times each of the n^2 labels is covered (lexicographic order)."""
        n = self.n
        parts = [b.labels for b in self.blocks] + [self.diag_labels]
        labs = np.concatenate([np.asarray(p, dtype=int).reshape(-1, 2) for p in parts])
        return np.bincount((labs[:, 0] - 1) * n + labs[:, 1] - 1, minlength=n * n)

    def coverage_ok(self) -> bool:
        return bool(np.all(self.coverage() == 1))

    def coo(self):
        """Global (row, col, value) triplets in lexicographic indices."""
        n = self.n
        rows, cols, vals = [], [], []
        for b in self.blocks:
            r, c, v = b.coo()
            idx = (b.labels[:, 0] - 1) * n + b.labels[:, 1] - 1
            rows.append(idx[r])
            cols.append(idx[c])
            vals.append(v)
        didx = (self.diag_labels[:, 0] - 1) * n + self.diag_labels[:, 1] - 1
        nz = self.diag_values != 0
        rows.append(didx[nz])
        cols.append(didx[nz])
        vals.append(self.diag_values[nz].astype(complex))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    def densify(self, force: bool = False) -> np.ndarray:
        if self.n > DENSE_GATE and not force:
            raise ValueError(f"dense materialization is limited to n <= {DENSE_GATE}")
        N = self.n * self.n
        M = np.zeros((N, N), dtype=complex)
        r, c, v = self.coo()
        M[r, c] = v
        return M

    def block(self, tag: str) -> BlockSpec:
        for b in self.blocks:
            if b.tag == tag:
                return b
        raise KeyError(tag)


def _labels(pairs) -> np.ndarray:
    return np.asarray(pairs, dtype=int).reshape(-1, 2)


def _upper_lower(upper):
    return upper + [(j, i) for (i, j) in reversed(upper)]


def _pair_labels(upper_i: np.ndarray, upper_j: np.ndarray) -> np.ndarray:
    """Upper labels (i, j) followed by the swapped labels in reverse order."""
    first = np.concatenate([upper_i, upper_j[::-1]])
    second = np.concatenate([upper_j, upper_i[::-1]])
    return np.stack([first, second], axis=1)


def rho_gamma_blocks(params: ParamSet) -> list[BlockSpec]:
    """The 2n - 3 P-type blocks of the partial transpose.

    Tags name the system row each block encodes: ``alpha:k`` for labels with
    i + j = k + 1 and ``beta:l`` for labels with i + j = 2n - l.
    """
    n = params.n
    a = params.alpha
    b = params.beta

    def ar(i, j):
        return np.conj(a[i - 1]) * a[j - 1]

    def br(i, j):
        return np.conj(b[i - 1]) * b[j - 1]

    out = [
        BlockSpec(_labels([(1, 2), (2, 1)]), "pair", 1.0, z=np.array([ar(1, 2)]), tag="alpha:2"),
        BlockSpec(_labels([(1, 3), (3, 1)]), "pair", 2.0, z=np.array([ar(1, 3)]), tag="alpha:3"),
    ]
    for k in range(4, n + 1):
        h = k // 2
        ui = np.arange(1, h + 1)
        # z = (1, ..., 1, alpha_{h,k+1-h}, ..., alpha_{1,k})
        z = np.ones(2 * h - 1, dtype=complex)
        z[h - 1:] = ar(ui[::-1], k + 1 - ui[::-1])
        out.append(BlockSpec(_pair_labels(ui, k + 1 - ui), "cycle", 1.0, z=z, tag=f"alpha:{k}"))
    for l in range(2, n - 2):
        m = (n - l + 1) // 2
        t = np.arange(m)
        z = np.ones(2 * m - 1, dtype=complex)
        z[m - 1:] = br(l + m - 1 - t, n + 1 - m + t)
        out.append(BlockSpec(_pair_labels(l + t, n - t), "cycle", 1.0, z=z, tag=f"beta:{n - l}"))
    if n > 3:
        out.append(BlockSpec(_labels([(n - 2, n), (n, n - 2)]), "pair", 2.0,
                             z=np.array([br(n - 2, n)]), tag="beta:2"))
    out.append(BlockSpec(_labels([(n - 1, n), (n, n - 1)]), "pair", 1.0,
                         z=np.array([br(n - 1, n)]), tag="beta:1"))
    return out


def _require_r(params: ParamSet) -> float:
    if params.r is None:
        raise ValueError("params.r is unset; certify first or supply r")
    return params.r


def _check_generic(params: ParamSet, check: bool) -> None:
    if check:
        bad = params.violation_array()
        if bad.size:
            raise GenericityError([tuple(p) for p in bad[:10].tolist()], len(bad))


def assemble_rho_gamma(params: ParamSet, check_genericity: bool = True) -> StateAssembly:
    """Partial transpose of the state: P-type blocks plus r on the e_ii labels."""
    _check_generic(params, check_genericity)
    r = _require_r(params)
    n = params.n
    diag = np.repeat(np.arange(1, n + 1), 2).reshape(n, 2)
    return StateAssembly(n, tuple(rho_gamma_blocks(params)), diag, np.full(n, r), name="rho_gamma")


def apply_gamma(rows: np.ndarray, cols: np.ndarray, n: int):
    """Image of lexicographic index pairs under the partial transpose."""
    a, b = np.divmod(rows, n)
    c, d = np.divmod(cols, n)
    return c * n + b, a * n + d


def _from_coo(rows, cols, vals, n: int, name: str) -> StateAssembly:
    """Group entries into blocks along the diagonals i - j = const.

    Each diagonal becomes a path block when its entries are tridiagonal in
    the first tensor factor, diagonal scalars when uncoupled, and a dense
    block otherwise.
    """
    ri, rj = np.divmod(rows, n)
    ci, cj = np.divmod(cols, n)
    delta = ri - rj
    if np.any(delta != ci - cj):
        raise ValueError("entries couple labels on different diagonals")
    order = np.argsort(delta, kind="stable")
    vals, delta, ri, ci = (x[order] for x in (vals, delta, ri, ci))
    # every label needs coverage, so walk all 2n - 1 diagonals
    starts = np.searchsorted(delta, np.arange(-(n - 1), n + 1))
    out_blocks = []
    dl, dv = [], []
    for k, dd in enumerate(range(-(n - 1), n)):
        lo, hi = starts[k], starts[k + 1]
        first = np.arange(max(1, dd + 1), min(n, n + dd) + 1)
        labels = np.stack([first, first - dd], axis=1)
        m = len(first)
        pos_r = ri[lo:hi] - (first[0] - 1)
        pos_c = ci[lo:hi] - (first[0] - 1)
        v = vals[lo:hi]
        off = pos_r != pos_c
        diagvals = np.zeros(m, dtype=complex)
        diagvals[pos_r[~off]] = v[~off]
        if not off.any():
            dl.append(labels)
            dv.append(diagvals.real)
            continue
        if dd == 0 or np.any(np.abs(pos_r[off] - pos_c[off]) > 1):
            M = np.zeros((m, m), dtype=complex)
            M[pos_r, pos_c] = v
            out_blocks.append(BlockSpec(labels, "dense", matrix=M, tag=f"diag:{dd}"))
            continue
        sup = np.zeros(m - 1, dtype=complex)
        upper = pos_c == pos_r + 1
        sup[pos_r[upper]] = v[upper]
        out_blocks.append(BlockSpec(labels, "path", diag=diagvals.real, sup=sup, tag=f"diag:{dd}"))
    return StateAssembly(n, tuple(out_blocks), np.concatenate(dl).astype(int),
                         np.concatenate(dv), name=name)


def assemble_rho(params: ParamSet, check_genericity: bool = True,
                 rho_gamma: StateAssembly | None = None) -> StateAssembly:
    """The state itself, obtained by moving every entry of the partial transpose.

    Entries are copied, so ``densify`` agrees bit-for-bit with the partial
    transpose of the densified ``assemble_rho_gamma``.
    """
    if rho_gamma is None:
        rho_gamma = assemble_rho_gamma(params, check_genericity)
    n = rho_gamma.n
    r, c, v = rho_gamma.coo()
    gr, gc = apply_gamma(r, c, n)
    return _from_coo(gr, gc, v, n, name="rho")


def d_rules(params: ParamSet, r: float = 0.0) -> np.ndarray:
    """The n x n block of the state on (e_11, ..., e_nn), written entry by entry."""
    n = params.n
    a = params.alpha
    b = params.beta
    i, j = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    band = np.isin(np.abs(i - j), (1, 2))
    inv_a = a[i - 1] * np.conj(a[j - 1])  # conj of alpha_{i,j}
    inv_b = b[i - 1] * np.conj(b[j - 1])
    D = np.where(band, np.where(i + j <= n + 1, inv_a, inv_b), 0).astype(complex)
    D[1:, 0] = a[1:]
    D[:-1, -1] = b[:-1]
    D[-1, 0] = a[-1]
    D[2, 0] *= 2
    if n > 3:
        D[n - 3, n - 1] *= 2
    else:
        D[0, 2] = 2 * np.conj(a[2])
    D[0, 1:] = np.conj(D[1:, 0])
    D[-1, :-1] = np.conj(D[:-1, -1])
    # mirror the upper triangle so the result is Hermitian to the last bit
    D = np.triu(D, 1) + np.triu(D, 1).conj().T
    D[np.arange(n), np.arange(n)] = r
    return D


def extract_D(params: ParamSet, r: float | None = None) -> np.ndarray:
    """D_n(r); ``r`` defaults to ``params.r`` and then to 0."""
    if r is None:
        r = params.r if params.r is not None else 0.0
    return d_rules(params, float(r))


def q_block_arguments(params: ParamSet, k: int) -> np.ndarray:
    """Superdiagonal of the ratio block on (e_k1, ..., e_n,n-k+1) for 3 <= k < n."""
    n = params.n
    if not 3 <= k < n:
        raise ValueError(f"k must satisfy 3 <= k < n, got k={k}, n={n}")
    h = (n - k + 1) // 2
    out = []
    for t in range(1, n - k + 1):
        g = params.alpha_ratio if t <= h else params.beta_ratio
        out.append(g(t + 1, k + t - 1) * np.conj(g(t, k + t)))
    return np.asarray(out)


def from_dense(M: np.ndarray, n: int, name: str = "") -> StateAssembly:
    """Split a dense matrix into connected principal blocks and diagonal scalars."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    M = np.asarray(M, dtype=complex)
    ncomp, comp = connected_components(csr_matrix(M != 0), directed=False)
    out_blocks, dl, dv = [], [], []
    for c in range(ncomp):
        idx = np.flatnonzero(comp == c)
        labels = np.stack(np.divmod(idx, n), axis=1) + 1
        if idx.size == 1:
            dl.append(labels)
            dv.append([M[idx[0], idx[0]].real])
        else:
            out_blocks.append(BlockSpec(labels, "dense", matrix=M[np.ix_(idx, idx)], tag=f"block:{c}"))
    return StateAssembly(n, tuple(out_blocks), np.concatenate(dl).astype(int),
                         np.concatenate(dv).astype(float), name=name)


def alternative_A(alpha: complex) -> np.ndarray:
    s = 2 * alpha.real
    a, ab = alpha, np.conj(alpha)
    return np.array([[s, -a, -ab, 0],
                     [-ab, s, 0, -a],
                     [-a, 0, s, -ab],
                     [0, -ab, -a, s]], dtype=complex)


def alternative_B(p: float, r: float, alpha: complex) -> np.ndarray:
    ab = np.conj(alpha)
    X = np.array([[1 / p, 0, -ab, 0],
                  [0, 1 / p, 0, -ab],
                  [-alpha, 0, p, 0],
                  [0, -alpha, 0, p]], dtype=complex)
    Y = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]], dtype=complex)
    return r * X + r * Y


def assemble_alternative_4x4(p: float, r: float, alpha_angle: float):
    """The second 4 (x) 4 family: returns (rho, rho_gamma) as assemblies."""
    if not p > 0:
        raise ValueError("p must be positive")
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if not -math.pi / 4 < alpha_angle < math.pi / 4:
        raise ValueError("alpha_angle must lie in (-pi/4, pi/4)")
    n = 4
    alpha = complex(np.exp(1j * alpha_angle))
    idx = lambda lab: [(i - 1) * n + (j - 1) for i, j in lab]
    rho = np.zeros((16, 16), dtype=complex)
    di = idx([(1, 1), (2, 2), (3, 3), (4, 4)])
    rho[np.ix_(di, di)] = alternative_A(alpha)
    for lab in [(1, 2), (2, 4), (3, 1), (4, 3)]:
        k = idx([lab])[0]
        rho[k, k] = 1 / p
    for lab in [(2, 1), (4, 2), (1, 3), (3, 4)]:
        k = idx([lab])[0]
        rho[k, k] = p
    part = np.zeros((16, 16), dtype=complex)
    bi = idx([(1, 4), (2, 3), (3, 2), (4, 1)])
    part[np.ix_(bi, bi)] = alternative_B(p, r, alpha)
    rho += partial_transpose(part, n)
    rho_gamma = partial_transpose(rho, n)
    return from_dense(rho, n, "rho"), from_dense(rho_gamma, n, "rho_gamma")


def alternative_kernel_vectors(p: float, alpha: complex) -> list[np.ndarray]:
    """The five displayed kernel vectors of the second family's partial transpose."""
    n = 4

    def vec(terms):
        v = np.zeros(16, dtype=complex)
        for coef, (i, j) in terms:
            v[(i - 1) * n + (j - 1)] += coef
        return v

    return [
        vec([(p, (1, 2)), (alpha, (2, 1))]),
        vec([(p, (2, 4)), (alpha, (4, 2))]),
        vec([(p, (3, 1)), (alpha, (1, 3))]),
        vec([(p, (4, 3)), (alpha, (3, 4))]),
        vec([(p, (1, 4)), (p, (2, 3)), (alpha, (3, 2)), (alpha, (4, 1))]),
    ]
