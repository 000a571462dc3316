"""Certification pipeline: largest root, corank checks, kernel vector, half-plane tests."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from . import __version__
from .construction import (GenericityError, ParamSet, StateAssembly, assemble_rho,
                           assemble_rho_gamma, extract_D, wrap_angle)
from .linalg import periodic_tridiagonal_counts

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Tolerances:
    kernel_threshold: float = 1e-9
    root_simplicity_gap: float = 1e-8
    half_plane_margin: float = 1e-9
    zero_component_threshold: float = 1e-10

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"tolerance {k} must be a positive number, got {v!r}")


class Verdict(str, Enum):
    CERTIFIED = "CERTIFIED"
    NOT_CERTIFIED = "NOT_CERTIFIED"
    AMBIGUOUS = "AMBIGUOUS"


class HalfPlane(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    AMBIGUOUS = "AMBIGUOUS"


class PipelineError(RuntimeError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


# ---------------------------------------------------------------- parameters

def default_params(n: int) -> ParamSet:
    """alpha = (1, e^{i pi/4}, ..., e^{i pi/4}, -1), beta = (1, ..., 1)."""
    if n < 3:
        raise ValueError("n must be >= 3")
    alpha = [0.0] + [math.pi / 4] * (n - 2) + [math.pi]
    return ParamSet(n, tuple(alpha), (0.0,) * n)


def perturbed_params(n: int, step: float) -> ParamSet:
    """alpha_k = e^{i pi (1/4 + (k-1) step)} for 2 <= k <= n-1; ends as in ``default_params``."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if not step > 0:
        raise ValueError("step must be positive")
    alpha = [0.0] + [math.pi * (0.25 + (k - 1) * step) for k in range(2, n)] + [math.pi]
    return ParamSet(n, tuple(alpha), (0.0,) * n)


def genericity_witness(params: ParamSet, step: float) -> ParamSet:
    """Shift alpha_k by pi (k-1) step for 2 <= k <= n-1."""
    n = params.n
    a = list(params.alpha_angles)
    for k in range(2, n):
        a[k - 1] += math.pi * (k - 1) * step
    return ParamSet(n, tuple(a), params.beta_angles, params.r)


# ---------------------------------------------------------------- krawtchouk

def krawtchouk_check(m: int, n: int, k: int, l: int) -> bool:
    """k + l = m + n - 2 and sum_{r+s=m-1} (-1)^r C(k,r) C(l,s) = 0, exactly."""
    if min(m, n, k, l) < 1:
        raise ValueError("arguments must be positive integers")
    if k + l != m + n - 2:
        return False
    total = sum((-1) ** r * math.comb(k, r) * math.comb(l, m - 1 - r) for r in range(m))
    return total == 0


# ---------------------------------------------------------------- steps 1-3

def _lowest_eigs(D0: np.ndarray, count: int, vectors: bool):
    n = D0.shape[0]
    count = min(count, n)
    if n <= 64:
        w, V = np.linalg.eigh(D0)
        return (w[:count], V[:, :count]) if vectors else (w[:count], None)
    out = scipy.linalg.eigh(D0, subset_by_index=[0, count - 1], driver="evr",
                            eigvals_only=not vectors)
    return out if vectors else (out, None)


def find_r_hat(D0, tol: Tolerances | None = None) -> tuple[float, bool, float]:
    """Largest root of det(D0 + r I) = 0 as ``-lambda_min(D0)``.

    Returns ``(r_hat, simple, gap)`` where ``gap = lambda_2 - lambda_1``.
    """
    tol = tol or Tolerances()
    D0 = np.asarray(D0)
    if not np.all(np.isfinite(D0)):
        raise ValueError("matrix has non-finite entries")
    w, _ = _lowest_eigs(D0, 2, vectors=False)
    gap = float(w[1] - w[0]) if w.size > 1 else math.inf
    return float(-w[0]), gap >= tol.root_simplicity_gap, gap


def _kernel_from_lowest(w, V, scale, tol: Tolerances):
    th = tol.kernel_threshold * max(1.0, scale)
    aw = np.abs(w)
    return {
        "corank": int((aw <= th).sum()),
        "ambiguous": bool(np.any((aw > th) & (aw < 10 * th))),
        "not_psd": bool(np.any(w < -th)),
        "threshold": th,
        "eigen_gap": float(aw[aw > th].min() - aw[aw <= th].max()) if (aw > th).any() and (aw <= th).any() else math.nan,
        "basis": V[:, aw <= th],
    }


def normalize_phase(w: np.ndarray) -> np.ndarray:
    w = w / np.linalg.norm(w)
    k = int(np.argmax(np.abs(w)))
    w = w * (abs(w[k]) / w[k])
    w[k] = abs(w[k])
    return w


def kernel_vector_w(D, tol: Tolerances | None = None) -> np.ndarray:
    """Unit kernel vector of ``D`` with its largest component positive real.

    Raises ``PipelineError`` (step 2) unless the corank is one and
    (step 3) if some component is numerically zero.
    """
    tol = tol or Tolerances()
    D = np.asarray(D)
    w, V = _lowest_eigs(D, 3, vectors=True)
    scale = float(np.abs(D).sum(axis=1).max())
    rep = _kernel_from_lowest(w, V, scale, tol)
    if rep["ambiguous"]:
        raise PipelineError(2, "eigenvalue inside the ambiguity band")
    if rep["corank"] != 1 or rep["not_psd"]:
        raise PipelineError(2, f"corank {rep['corank']} (not_psd={rep['not_psd']}), expected 1")
    vec = normalize_phase(rep["basis"][:, 0])
    small = np.flatnonzero(np.abs(vec) <= tol.zero_component_threshold)
    if small.size:
        raise PipelineError(3, f"w has zero components at indices {(small + 1).tolist()}")
    return vec


# ---------------------------------------------------------------- step 4

def half_plane_gap(z) -> float:
    """Largest angular gap between consecutive arguments on the circle."""
    a = np.sort(np.angle(np.asarray(z, dtype=complex)))
    if a.size == 1:
        return TWO_PI
    return float(np.max(np.diff(np.concatenate([a, [a[0] + TWO_PI]]))))


def _classify_gap(g: float, margin: float) -> HalfPlane:
    if g > math.pi + margin:
        return HalfPlane.PASS
    if g <= math.pi - margin:
        return HalfPlane.FAIL
    return HalfPlane.AMBIGUOUS


def half_plane_test(z, margin: float = 1e-9, zero_threshold: float = 1e-10) -> HalfPlane:
    """Do all of ``z`` lie in an open half-plane through the origin?

    PASS iff the largest gap between sorted arguments exceeds pi + margin,
    FAIL iff it is at most pi - margin, AMBIGUOUS in between. A (relatively)
    zero element is FAIL.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.size == 0:
        raise ValueError("half_plane_test needs a nonempty list")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    mags = np.abs(z)
    if not np.all(np.isfinite(z)) or mags.max() == 0 or np.any(mags <= zero_threshold * mags.max()):
        return HalfPlane.FAIL
    return _classify_gap(half_plane_gap(z), margin)


@dataclass
class CaseReport:
    status: HalfPlane = HalfPlane.PASS
    sets_tested: int = 0
    min_margin: float = math.inf
    worst: list | None = None
    failures: list = field(default_factory=list)

    def record(self, status: HalfPlane, margin: float, where):
        self.record_many(np.array([margin]), np.array([status.value]), [where])

    def record_many(self, margins: np.ndarray, statuses: np.ndarray, where):
        """Fold in a batch of tested sets; ``where`` is a list or a callable index -> [p, q]."""
        if margins.size == 0:
            return
        locate = where if callable(where) else where.__getitem__
        self.sets_tested += int(margins.size)
        k = int(np.argmin(margins))
        if margins[k] < self.min_margin:
            self.min_margin = float(margins[k])
            self.worst = locate(k)
        bad = np.flatnonzero(statuses != HalfPlane.PASS.value)
        for b in bad:
            st = HalfPlane(str(statuses[b]))
            self.failures.append({"p": locate(b)[0], "q": locate(b)[1], "status": st.value,
                                  "margin": float(margins[b])})
            if self.status is not HalfPlane.FAIL:
                self.status = st

    def to_dict(self) -> dict:
        return {"status": self.status.value, "sets_tested": self.sets_tested,
                "min_margin": _num(self.min_margin), "worst": self.worst,
                "failures": self.failures}


@dataclass
class StarReport:
    cases: dict
    za: np.ndarray
    zb: np.ndarray

    @property
    def status(self) -> HalfPlane:
        states = [c.status for c in self.cases.values()]
        if HalfPlane.FAIL in states:
            return HalfPlane.FAIL
        if HalfPlane.AMBIGUOUS in states:
            return HalfPlane.AMBIGUOUS
        return HalfPlane.PASS

    @property
    def min_margin(self) -> float:
        return min(c.min_margin for c in self.cases.values())

    def to_dict(self) -> dict:
        return {"status": self.status.value, "min_margin": _num(self.min_margin),
                "alpha_set_base": _cpx(self.za), "beta_set_base": _cpx(self.zb),
                "cases": {k: v.to_dict() for k, v in self.cases.items()}}


def _single_set(z, zero_mask, margin, report: CaseReport, where):
    if zero_mask.any():
        report.record(HalfPlane.FAIL, -math.pi, where)
        return
    g = half_plane_gap(z)
    report.record(_classify_gap(g, margin), g - math.pi, where)


def _gap_status(g: np.ndarray, margin: float) -> np.ndarray:
    return np.where(g > math.pi + margin, HalfPlane.PASS.value,
                    np.where(g <= math.pi - margin, HalfPlane.FAIL.value, HalfPlane.AMBIGUOUS.value))


def _ranged_sets(z, zero, ref: int, lo: int, ends, suffix: bool, margin: float,
                 report: CaseReport, label):
    """Sets {z[ref]} together with z[a:b] for each range in ``ends``.

    With ``suffix`` the ranges are z[s:lo] for s in ``ends`` (shared right end
    ``lo``); otherwise z[lo:e] for e in ``ends``. Contiguous ranges reuse
    running extrema of the angle offsets from z[ref]; when those fit in an
    arc shorter than pi the largest gap is exactly 2 pi minus the arc.
    """
    ends = np.asarray(ends)
    theta = np.angle(z)
    seg = slice(ends[0], lo) if suffix else slice(lo, ends[-1])
    delta = wrap_angle(theta[seg] - theta[ref])
    zc = zero[seg].astype(int)
    if suffix:
        mx = np.maximum.accumulate(delta[::-1])[::-1]
        mn = np.minimum.accumulate(delta[::-1])[::-1]
        nz = np.cumsum(zc[::-1])[::-1]
        pick = ends - ends[0]
    else:
        mx = np.maximum.accumulate(delta)
        mn = np.minimum.accumulate(delta)
        nz = np.cumsum(zc)
        pick = ends - lo - 1
    span = np.maximum(mx[pick], 0) - np.minimum(mn[pick], 0)
    g = TWO_PI - span
    for k in np.flatnonzero(span >= math.pi):
        e = ends[k]
        idx = np.r_[np.arange(e, lo) if suffix else np.arange(lo, e), ref]
        g[k] = half_plane_gap(z[idx])
    status = _gap_status(g, margin)
    has_zero = (nz[pick] > 0) | bool(zero[ref])
    status[has_zero] = HalfPlane.FAIL.value
    g[has_zero] = 0.0
    report.record_many(g - math.pi, status, lambda k: label(int(ends[k])))


def star_condition_check(w, params: ParamSet, margin: float = 1e-9,
                         zero_threshold: float = 1e-10) -> StarReport:
    """Half-plane tests for the four product-vector cases.

    Tested numbers are conj(w_j) alpha_j and conj(w_j) beta_j; a PASS for
    every set means no product vector solves both range conditions.
    """
    n = params.n
    w = np.asarray(w, dtype=complex)
    za = np.conj(w) * params.alpha
    zb = np.conj(w) * params.beta
    za_zero = np.abs(za) <= zero_threshold * np.abs(za).max()
    zb_zero = np.abs(zb) <= zero_threshold * np.abs(zb).max()
    half = (n + 1) / 2
    cases = {name: CaseReport() for name in ("i", "ii", "iii", "iv")}

    q = (n + 1) // 2
    _single_set(za[:q], za_zero[:q], margin, cases["i"], [1, q])
    p = -(-(n + 1) // 2)
    _single_set(zb[p - 1:], zb_zero[p - 1:], margin, cases["iv"], [p, n])

    # (ii): {za_j : p <= j <= m} + {za_q}, m = n - q + 1, over all p <= m
    for q in range(int(half) + 1, n + 1):
        m = n - q + 1
        if not m < half:
            continue
        _ranged_sets(za, za_zero, q - 1, m, list(range(0, m)), True, margin, cases["ii"],
                     lambda s, q=q: [s + 1, q])
    # (iii): {zb_p} + {zb_j : n - p + 2 <= j <= q}
    for p in range(1, n + 1):
        s0 = n - p + 2
        if not ((n + 3) / 2 < s0 <= n):
            continue
        _ranged_sets(zb, zb_zero, p - 1, s0 - 1, list(range(s0, n + 1)), False, margin,
                     cases["iii"], lambda e, p=p: [p, e])
    return StarReport(cases, za, zb)


# ---------------------------------------------------------------- structure

def block_inertia(assembly: StateAssembly, threshold: float, kinds=("cycle", "pair", "path")):
    """Per-block eigenvalue counts for the tridiagonal-type blocks.

    Returns a dict of arrays: corank, negative, ambiguous, wide_gap (no
    eigenvalue in (threshold, 1e6 * threshold]) and the tags.
    """
    blks = [b for b in assembly.blocks if b.kind in kinds]
    if not blks:
        empty = np.zeros(0, dtype=int)
        return {"tags": [], "corank": empty, "negative": empty, "ambiguous": empty.astype(bool),
                "wide_gap": empty.astype(bool)}
    order = np.argsort([b.size for b in blks], kind="stable")
    blks = [blks[i] for i in order]
    parts = [b.tridiagonal() for b in blks]
    diags = [p[0] for p in parts]
    sups = [p[1] for p in parts]
    corners = [p[2] for p in parts]
    norms = np.array([np.abs(d).max() + 2 * (np.abs(s).max() if s.size else 0) + 2 * abs(c)
                      for d, s, c in parts])
    th = threshold * np.maximum(1.0, norms)
    shifts = np.stack([-th, th, 10 * th, 1e6 * th], axis=1)
    cnt = periodic_tridiagonal_counts(diags, sups, corners, shifts)
    return {
        "tags": [b.tag for b in blks],
        "corank": cnt[:, 1] - cnt[:, 0],
        "negative": cnt[:, 0],
        "ambiguous": cnt[:, 2] != cnt[:, 1],
        "wide_gap": cnt[:, 3] == cnt[:, 1],
    }


# ---------------------------------------------------------------- certificate

def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _cpx(v):
    return [[float(c.real), float(c.imag)] for c in np.asarray(v, dtype=complex)]


@dataclass
class Certificate:
    n: int
    params: dict
    r_hat: float | None
    simple_root: bool
    root_gap: float | None
    corank_rho: int | None
    corank_rho_gamma: int | None
    w: list | None
    star_report: dict | None
    verdict: Verdict
    failed_step: str | None
    reason: str
    genericity: dict
    checks: dict
    timings: dict
    tolerances: dict
    version: str = __version__

    @property
    def min_margin(self) -> float | None:
        return None if self.star_report is None else self.star_report.get("min_margin")

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "tool": "pptedge",
            "version": self.version,
            "n": self.n,
            "params": self.params,
            "verdict": self.verdict.value,
            "failed_step": self.failed_step,
            "reason": self.reason,
            "r_hat": _num(self.r_hat),
            "simple_root": self.simple_root,
            "root_gap": _num(self.root_gap),
            "corank_rho": self.corank_rho,
            "corank_rho_gamma": self.corank_rho_gamma,
            "w": self.w,
            "star_report": self.star_report,
            "genericity": self.genericity,
            "checks": self.checks,
            "tolerances": self.tolerances,
        }
        if timings:
            d["timings"] = self.timings
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2) + "\n"


class _Clock:
    def __init__(self):
        self.t = {}

    def __call__(self, name):
        clock = self

        class _Ctx:
            def __enter__(self):
                self.s = time.perf_counter()

            def __exit__(self, *exc):
                clock.t[name] = clock.t.get(name, 0.0) + time.perf_counter() - self.s

        return _Ctx()


def _steps_1_to_4(params: ParamSet, tol: Tolerances):
    """Steps 1-4 on D and w only. Returns a dict; never raises on numerical failure."""
    out = {"r_hat": None, "simple_root": False, "root_gap": None, "w": None, "star": None,
           "D_report": None, "failed_step": None, "reason": "", "ambiguous": False}
    D0 = extract_D(params, 0.0)
    w_eig, V = _lowest_eigs(D0, 3, vectors=True)
    r_hat = float(-w_eig[0])
    gap = float(w_eig[1] - w_eig[0])
    out.update(r_hat=r_hat, root_gap=gap, simple_root=gap >= tol.root_simplicity_gap)
    if not out["simple_root"]:
        out.update(failed_step="1", reason=f"largest root not simple (gap {gap:.3e})")
        return out
    if not r_hat > 1:
        out.update(failed_step="1", reason=f"r_hat = {r_hat:.6g} is not > 1")
        return out
    scale = float(np.abs(D0).sum(axis=1).max()) + r_hat
    rep = _kernel_from_lowest(w_eig + r_hat, V, scale, tol)
    out["D_report"] = rep
    if rep["ambiguous"]:
        out.update(failed_step="2", reason="D(r_hat) eigenvalue in ambiguity band", ambiguous=True)
        return out
    if rep["corank"] != 1 or rep["not_psd"]:
        out.update(failed_step="2", reason=f"D(r_hat) corank {rep['corank']}")
        return out
    w = normalize_phase(rep["basis"][:, 0])
    out["w"] = w
    small = np.flatnonzero(np.abs(w) <= tol.zero_component_threshold)
    if small.size:
        out.update(failed_step="3", reason=f"w_i = 0 at i = {(small + 1).tolist()}")
        return out
    star = star_condition_check(w, params, tol.half_plane_margin, tol.zero_component_threshold)
    out["star"] = star
    if star.status is HalfPlane.FAIL:
        out.update(failed_step="4", reason="half-plane condition fails")
    elif star.status is HalfPlane.AMBIGUOUS:
        out.update(failed_step="4", reason="half-plane condition within margin", ambiguous=True)
    return out


def certify(n: int, params: ParamSet | None = None, tol: Tolerances | None = None,
            witness_step: float = 1e-8) -> Certificate:
    """Run Steps 1-4 plus the block corank checks.

    Parameters that break genericity are replaced by a nearby witness
    (``genericity_witness``) whose certificate is the verdict; the Steps 1-4
    run at the original parameters is recorded under ``genericity.center``.
    Raises ``GenericityError`` if the witness is still not generic.
    """
    tol = tol or Tolerances()
    params = params if params is not None else default_params(n)
    if params.n != n:
        raise ValueError(f"params are for n={params.n}, not n={n}")
    clock = _Clock()
    violations = params.violation_array()
    genericity = {"input_generic": not violations.size, "input_violations": len(violations),
                  "witness_step": None, "center": None}
    work = params
    if violations.size:
        work = genericity_witness(params, witness_step)
        still = work.violation_array()
        if still.size:
            raise GenericityError([tuple(p) for p in still[:10].tolist()], len(still))
        genericity["witness_step"] = witness_step
        genericity["first_violations"] = violations[:10].tolist()
        with clock("center"):
            c = _steps_1_to_4(params, tol)
        genericity["center"] = {
            "r_hat": _num(c["r_hat"]), "simple_root": c["simple_root"],
            "failed_step": c["failed_step"],
            "star_status": None if c["star"] is None else c["star"].status.value,
            "min_margin": None if c["star"] is None else _num(c["star"].min_margin),
        }

    with clock("steps_1_to_4"):
        s = _steps_1_to_4(work, tol)
    checks = {}
    corank_rho = corank_rho_gamma = None
    failed, reason = s["failed_step"], s["reason"]
    ambiguous = s["ambiguous"]

    if failed is None:
        with clock("rho_gamma"):
            G = assemble_rho_gamma(work.with_r(s["r_hat"]), check_genericity=False)
            inert = block_inertia(G, tol.kernel_threshold)
            corank_rho_gamma = int(inert["corank"].sum())
            checks["rho_gamma_blocks"] = len(G.blocks)
            checks["rho_gamma_blocks_corank_one"] = bool(np.all(inert["corank"] == 1))
            checks["rho_gamma_negative"] = int(inert["negative"].sum())
            checks["rho_gamma_gap_1e6"] = bool(np.all(inert["wide_gap"]))
            if inert["ambiguous"].any():
                ambiguous = True
                failed, reason = "rho_gamma", "block eigenvalue in ambiguity band"
            elif (corank_rho_gamma != 2 * n - 3 or not checks["rho_gamma_blocks_corank_one"]
                  or checks["rho_gamma_negative"]):
                failed, reason = "rho_gamma", f"corank {corank_rho_gamma}, expected {2 * n - 3}"
        with clock("rho"):
            R = assemble_rho(work, rho_gamma=G)
            inert = block_inertia(R, tol.kernel_threshold)
            checks["rho_path_blocks"] = int(len(inert["tags"]))
            q_ok = bool(np.all(inert["corank"] == 0) and np.all(inert["negative"] == 0)
                        and not inert["ambiguous"].any())
            checks["rho_path_blocks_positive_definite"] = q_ok
            checks["rho_diagonal_min"] = _num(R.diag_values.min())
            D_blk = [b for b in R.blocks if b.kind == "dense"]
            same_D = len(D_blk) == 1 and np.allclose(D_blk[0].matrix, extract_D(work, s["r_hat"]),
                                                      rtol=0, atol=1e-12)
            checks["rho_D_block_matches_rules"] = bool(same_D)
            corank_rho = (s["D_report"]["corank"] + int(inert["corank"].sum())
                          + int(np.sum(R.diag_values <= 0)))
            if failed is None and (not q_ok or corank_rho != 1 or not same_D
                                   or R.diag_values.min() <= 0):
                failed, reason = "rho", f"corank {corank_rho}, expected 1"
        checks["D_eigen_gap"] = _num(s["D_report"]["eigen_gap"])
        checks["D_threshold"] = _num(s["D_report"]["threshold"])

    if failed is None:
        verdict = Verdict.CERTIFIED
    elif ambiguous:
        verdict = Verdict.AMBIGUOUS
    else:
        verdict = Verdict.NOT_CERTIFIED
    return Certificate(
        n=n,
        params=params.to_dict(),
        r_hat=s["r_hat"],
        simple_root=bool(s["simple_root"]),
        root_gap=s["root_gap"],
        corank_rho=corank_rho,
        corank_rho_gamma=corank_rho_gamma,
        w=None if s["w"] is None else _cpx(s["w"]),
        star_report=None if s["star"] is None else s["star"].to_dict(),
        verdict=verdict,
        failed_step=failed,
        reason=reason,
        genericity=genericity,
        checks=checks,
        timings={k: round(v, 6) for k, v in clock.t.items()},
        tolerances=asdict(tol),
    )
