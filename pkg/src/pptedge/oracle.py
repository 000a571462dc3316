"""Brute-force search for product vectors violating the edge property (small n only).

Looks for unit xi, eta with xi (x) eta in the range of rho and
conj(xi) (x) eta in the range of rho^Gamma, by minimizing the squared
kernel components over many random starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .construction import DENSE_GATE, ParamSet, assemble_rho, assemble_rho_gamma
from .linalg import kernel_report, partial_transpose

SCORE_FLOOR = 1e-4
WITNESS_CEILING = 1e-8


@dataclass
class ViolationScore:
    value: float
    minimizer: tuple | None
    starts: int
    seed: int
    vacuous: bool = False
    per_start: list = field(default_factory=list)
    nonconverged: list = field(default_factory=list)
    nonmonotone: list = field(default_factory=list)


def _kernel_mats(M: np.ndarray, n: int, threshold: float) -> np.ndarray:
    """Kernel basis as a (c, n, n) stack K with <k, a (x) b> = a @ K[c] @ b."""
    rep = kernel_report(M, threshold)
    if rep.not_psd or rep.ambiguous:
        raise ValueError("kernel is not cleanly separated; oracle needs a PSD matrix with a clear gap")
    return np.conj(rep.basis.T).reshape(rep.corank, n, n)


def violation_score(xi, eta, kd, ke) -> float:
    """||P_D(xi (x) eta)||^2 + ||P_E(conj(xi) (x) eta)||^2 for kernel stacks kd, ke."""
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    a = np.einsum("i,cij,j->c", xi, kd, eta)
    b = np.einsum("i,cij,j->c", np.conj(xi), ke, eta)
    return float(np.vdot(a, a).real + np.vdot(b, b).real)


def _min_vec(H: np.ndarray) -> np.ndarray:
    _, V = np.linalg.eigh(H)
    return V[:, 0]


def _eta_step(xi, kd, ke):
    # rows r with |r . eta|^2 summed give the objective
    A = np.concatenate([np.einsum("i,cij->cj", xi, kd), np.einsum("i,cij->cj", np.conj(xi), ke)])
    return _min_vec(A.conj().T @ A)


def _xi_step(eta, kd, ke):
    # D terms are |u . xi|^2, E terms |conj(v) . xi|^2
    A = np.concatenate([kd @ eta, np.conj(ke @ eta)])
    return _min_vec(A.conj().T @ A)


def _random_unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def product_vector_search(rho_dense, rho_gamma_dense, starts: int = 200, seed: int = 0,
                          threshold: float = 1e-9, max_iter: int = 10_000,
                          rel_stop: float = 1e-12) -> ViolationScore:
    """Multi-start alternating minimization over the product of unit spheres.

    Each half-step minimizes a Hermitian quadratic form exactly, so the
    objective never increases; starts that do increase are listed in
    ``nonmonotone``. Starts still moving after ``max_iter`` sweeps are listed
    in ``nonconverged`` and excluded from the minimum.
    """
    rho_dense = np.asarray(rho_dense)
    N = rho_dense.shape[0]
    n = int(round(np.sqrt(N)))
    if n * n != N or np.shape(rho_gamma_dense) != rho_dense.shape:
        raise ValueError("expected two n^2 x n^2 matrices")
    if n > DENSE_GATE:
        raise ValueError(f"oracle is limited to n <= {DENSE_GATE}")
    kd = _kernel_mats(rho_dense, n, threshold)
    ke = _kernel_mats(np.asarray(rho_gamma_dense), n, threshold)
    if not len(kd) and not len(ke):
        return ViolationScore(0.0, None, starts, seed, vacuous=True)
    best = ViolationScore(np.inf, None, starts, seed)
    for s, child in enumerate(np.random.SeedSequence(seed).spawn(starts)):
        rng = np.random.default_rng(child)
        xi, eta = _random_unit(rng, n), _random_unit(rng, n)
        f = violation_score(xi, eta, kd, ke)
        converged = False
        for _ in range(max_iter):
            eta = _eta_step(xi, kd, ke)
            xi = _xi_step(eta, kd, ke)
            fn = violation_score(xi, eta, kd, ke)
            if fn > f * (1 + 1e-9) + 1e-15:
                best.nonmonotone.append(s)
            done = f - fn <= rel_stop * f or fn < 1e-30
            f = fn
            if done:
                converged = True
                break
        best.per_start.append(f)
        if not converged:
            best.nonconverged.append(s)
            continue
        if f < best.value:
            best.value = f
            best.minimizer = (xi, eta)
    return best


def dense_states(params: ParamSet) -> tuple[np.ndarray, np.ndarray]:
    """(rho, rho_gamma) as dense matrices; ``params.r`` must be set."""
    G = assemble_rho_gamma(params, check_genericity=False).densify()
    return partial_transpose(G, params.n), G


def broken_params(n: int, alpha_angles=None) -> ParamSet:
    """Parameters with beta_{i,j} = alpha_{i,j} for every pair."""
    from .certifier import default_params

    a = np.asarray(default_params(n).alpha_angles if alpha_angles is None else alpha_angles, float)
    return ParamSet(n, tuple(a), tuple(a - a[-1]))


def planted_witness(params: ParamSet, w) -> tuple[np.ndarray, np.ndarray] | None:
    """A product vector pair for parameters with alpha = beta up to phase.

    With conj(x_j) = c_j and y_j = c_j alpha_j every row of the system
    vanishes; the remaining condition sum_j |c_j|^2 conj(w_j) alpha_j = 0
    is a feasibility problem in the weights |c_j|^2.
    """
    za = np.conj(np.asarray(w)) * params.alpha
    n = params.n
    A_eq = np.vstack([za.real, za.imag, np.ones(n)])
    res = linprog(np.zeros(n), A_eq=A_eq, b_eq=[0, 0, 1], bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        return None
    c = np.sqrt(np.maximum(res.x, 0))
    x = np.conj(c)
    y = c * params.alpha
    return x / np.linalg.norm(x), y / np.linalg.norm(y)


class CrossValidationError(AssertionError):
    pass


@dataclass
class CrossReport:
    n: int
    verdict: str
    dense_corank_rho: int
    dense_corank_rho_gamma: int
    block_corank_rho: int | None
    block_corank_rho_gamma: int | None
    partial_transpose_exact: bool
    score: float
    vacuous: bool
    mismatches: list

    @property
    def ok(self) -> bool:
        return not self.mismatches


def cross_validate(n: int, params: ParamSet | None = None, tol=None, starts: int = 200,
                   seed: int = 0, floor: float = SCORE_FLOOR, strict: bool = True) -> CrossReport:
    """Compare the block pipeline with dense computations and the oracle."""
    from .certifier import (Tolerances, certify, default_params, extract_D, find_r_hat,
                            genericity_witness)
    from .construction import GenericityError

    if n > DENSE_GATE:
        raise ValueError(f"cross validation is limited to n <= {DENSE_GATE}")
    tol = tol or Tolerances()
    params = params if params is not None else default_params(n)
    mismatches = []
    try:
        cert = certify(n, params, tol)
        verdict = cert.verdict.value
        work = params
        if cert.genericity["witness_step"] is not None:
            work = genericity_witness(params, cert.genericity["witness_step"])
        r_hat = cert.r_hat
        block_rho, block_rg = cert.corank_rho, cert.corank_rho_gamma
    except GenericityError:
        verdict = "REJECTED"
        work = params
        r_hat = find_r_hat(extract_D(params, 0.0), tol)[0]
        block_rho = block_rg = None
    work = work.with_r(r_hat)
    rho_d, rg_d = dense_states(work)
    exact = bool(np.array_equal(rho_d, assemble_rho(work, check_genericity=False).densify()))
    if not exact:
        mismatches.append("structured rho differs from dense partial transpose")
    k_rho = kernel_report(rho_d, tol.kernel_threshold).corank
    k_rg = kernel_report(rg_d, tol.kernel_threshold).corank
    if block_rho is not None and (k_rho, k_rg) != (block_rho, block_rg):
        mismatches.append(f"coranks dense ({k_rho},{k_rg}) vs block ({block_rho},{block_rg})")
    score = product_vector_search(rho_d, rg_d, starts, seed, tol.kernel_threshold)
    if verdict == "CERTIFIED" and not score.value > floor:
        mismatches.append(f"certified state has oracle score {score.value:.3e} <= {floor:g}")
    if verdict == "REJECTED" and not score.value < WITNESS_CEILING:
        mismatches.append(f"broken parameters gave oracle score {score.value:.3e}, no witness")
    report = CrossReport(n, verdict, k_rho, k_rg, block_rho, block_rg, exact, score.value,
                         score.vacuous, mismatches)
    if strict and mismatches:
        raise CrossValidationError("; ".join(mismatches))
    return report
