"""Command-line front end: certify, sweep, oracle and inspect.

Exit codes: 0 success (CERTIFIED / floor satisfied), 1 usage or input
error, 2 NOT_CERTIFIED (or oracle witness found), 3 AMBIGUOUS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .certifier import (Tolerances, Verdict, certify, default_params, find_r_hat,
                        perturbed_params)
from .construction import (DENSE_GATE, GenericityError, ParamSet, assemble_rho,
                           assemble_rho_gamma, extract_D, load_params)

EXIT_OK, EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_AMBIGUOUS = 0, 1, 2, 3
VERDICT_EXIT = {Verdict.CERTIFIED: EXIT_OK, Verdict.NOT_CERTIFIED: EXIT_NOT_CERTIFIED,
                Verdict.AMBIGUOUS: EXIT_AMBIGUOUS}
JOBS_ENV = "PPTEDGE_JOBS"


class UsageError(ValueError):
    pass


def parse_params_mode(text: str) -> tuple:
    """``default``, ``perturbed:STEP`` or ``file:PATH`` (a bare path also works)."""
    if text == "default":
        return ("default", None)
    if text.startswith("perturbed:"):
        try:
            step = float(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad perturbation step in {text!r}") from None
        if not 0 < step < float("inf"):
            raise UsageError(f"perturbation step must be positive, got {step:g}")
        return ("perturbed", step)
    if text.startswith("file:"):
        return ("file", text.split(":", 1)[1])
    if text and (Path(text).suffix == ".json" or Path(text).is_file()):
        return ("file", text)
    raise UsageError(f"unknown params mode {text!r}; use default, perturbed:STEP or file:PATH")


def resolve_params(n: int, mode: tuple) -> ParamSet:
    kind, arg = mode
    if kind == "default":
        return default_params(n)
    if kind == "perturbed":
        return perturbed_params(n, arg)
    try:
        params = load_params(arg)
    except OSError as exc:
        raise UsageError(f"cannot read params file {arg}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params.n != n:
        raise UsageError(f"params: field 'n' is {params.n} but --n is {n}")
    return params


def tolerances_from(args) -> Tolerances:
    base = Tolerances()
    kw = {}
    for name in ("kernel_threshold", "root_simplicity_gap", "half_plane_margin",
                 "zero_component_threshold"):
        v = getattr(args, name, None)
        if v is not None:
            if not v > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
            kw[name] = v
    return Tolerances(**{**base.__dict__, **kw})


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x, spec: str) -> str:
    return "-" if x is None else format(x, spec)


def cmd_certify(args) -> int:
    params = resolve_params(args.n, parse_params_mode(args.params))
    tol = tolerances_from(args)
    try:
        cert = certify(args.n, params, tol)
    except GenericityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    doc = cert.to_json(timings=not args.no_timings)
    if args.out:
        write_atomic(Path(args.out), doc + "\n")
    else:
        print(doc)
    margin = cert.min_margin
    print(f"n={cert.n} verdict={cert.verdict.value} r_hat={_fmt(cert.r_hat, '.10f')} "
          f"min_margin={_fmt(margin, '.3e')}"
          + (f" failed_step={cert.failed_step} ({cert.reason})" if cert.failed_step else ""),
          file=sys.stderr)
    return VERDICT_EXIT[cert.verdict]


def _sweep_one(job):
    n, mode, tol, out_dir, timings = job
    t0 = time.perf_counter()
    try:
        cert = certify(n, resolve_params(n, mode), tol)
    except (GenericityError, UsageError) as exc:
        return n, "ERROR", None, None, time.perf_counter() - t0, str(exc)
    wall = time.perf_counter() - t0
    if out_dir is not None:
        write_atomic(Path(out_dir) / f"cert_n{n:04d}.json", cert.to_json(timings=timings) + "\n")
    return n, cert.verdict.value, cert.r_hat, cert.min_margin, wall, cert.reason


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"{JOBS_ENV} must be a positive integer, got {raw!r}") from None
    if jobs < 1:
        raise UsageError(f"{JOBS_ENV} must be a positive integer, got {raw!r}")
    return jobs


def run_sweep(n_from: int, n_to: int, mode: tuple, tol: Tolerances, jobs: int,
              out_dir=None, timings: bool = True) -> list[tuple]:
    """Certify every n in [n_from, n_to]; rows (n, verdict, r_hat, margin, seconds, reason)."""
    if not 3 <= n_from <= n_to:
        raise UsageError("need 3 <= --from <= --to")
    if mode[0] == "file":
        raise UsageError("a params file fixes n; use certify for a single file")
    # largest n first so the slow tail starts early
    work = [(n, mode, tol, out_dir, timings) for n in range(n_to, n_from - 1, -1)]
    if jobs == 1:
        rows = [_sweep_one(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, work))
    return sorted(rows)


def cmd_sweep(args) -> int:
    mode = parse_params_mode(args.params)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    t0 = time.perf_counter()
    rows = run_sweep(args.n_from, args.n_to, mode, tolerances_from(args), jobs,
                     args.out_dir, not args.no_timings)
    print(f"{'n':>5}  {'verdict':<14} {'r_hat':>14} {'min_margin':>11} {'time_s':>8}")
    for n, verdict, r_hat, margin, wall, _ in rows:
        print(f"{n:>5}  {verdict:<14} {_fmt(r_hat, '14.8f')} {_fmt(margin, '11.3e')} {wall:8.3f}")
    bad = [r for r in rows if r[1] != Verdict.CERTIFIED.value]
    print(f"certified {len(rows) - len(bad)}/{len(rows)} in {time.perf_counter() - t0:.1f} s "
          f"with {jobs} job(s)")
    for n, verdict, _, _, _, reason in bad:
        print(f"  n={n}: {verdict}" + (f" ({reason})" if reason else ""))
    if not bad:
        return EXIT_OK
    if any(r[1] == "ERROR" for r in bad):
        return EXIT_ERROR
    if any(r[1] == Verdict.NOT_CERTIFIED.value for r in bad):
        return EXIT_NOT_CERTIFIED
    return EXIT_AMBIGUOUS


def cmd_oracle(args) -> int:
    from .oracle import SCORE_FLOOR, WITNESS_CEILING, broken_params, dense_states, product_vector_search

    if args.n > DENSE_GATE:
        raise UsageError(f"the oracle builds dense {args.n}^2 x {args.n}^2 matrices; "
                         f"it is limited to n <= {DENSE_GATE}")
    if args.broken_genericity:
        params = broken_params(args.n)
    else:
        params = resolve_params(args.n, parse_params_mode(args.params))
    tol = tolerances_from(args)
    if params.is_generic():
        cert = certify(args.n, params, tol)
        r_hat = cert.r_hat
        label = cert.verdict.value
    else:
        r_hat = find_r_hat(extract_D(params, 0.0), tol)[0]
        label = "non-generic"
    if r_hat is None:
        raise UsageError("no r_hat available for these parameters")
    rho, rho_gamma = dense_states(params.with_r(r_hat))
    t0 = time.perf_counter()
    score = product_vector_search(rho, rho_gamma, args.starts, args.seed, tol.kernel_threshold)
    wall = time.perf_counter() - t0
    print(f"n={args.n} params={label} r_hat={r_hat:.10f} starts={args.starts} seed={args.seed}")
    print(f"min violation score {score.value:.6e} (floor {SCORE_FLOOR:g}, witness below {WITNESS_CEILING:g})")
    print(f"nonconverged starts {len(score.nonconverged)}, nonmonotone starts "
          f"{len(score.nonmonotone)}, time {wall:.1f} s")
    if score.vacuous:
        print("both kernels are trivial; the test is vacuous")
        return EXIT_OK
    if score.value < WITNESS_CEILING:
        print("witness found: a product vector violates the edge property")
        return EXIT_NOT_CERTIFIED
    if score.value <= SCORE_FLOOR:
        print("score is at or below the floor")
        return EXIT_NOT_CERTIFIED
    print("floor satisfied")
    return EXIT_OK


def _print_matrix(M: np.ndarray) -> None:
    for row in M:
        cells = []
        for v in row:
            re = 0.0 if abs(v.real) < 1e-15 else v.real
            im = 0.0 if abs(v.imag) < 1e-15 else v.imag
            cells.append(f"{re:+.6f}{im:+.6f}j" if im else f"{re:+.6f}")
        print("  ".join(cells))


def _print_assembly(A) -> None:
    print(f"{A.name}: n={A.n}, {len(A.blocks)} blocks, {len(A.diag_values)} scalar diagonal entries")
    for b in A.blocks:
        labels = " ".join(f"{i}{j}" for i, j in b.labels)
        line = f"  [{b.tag or b.kind}] kind={b.kind} size={b.size} scale={b.scale:g} labels=({labels})"
        if b.kind in ("cycle", "pair"):
            angles = np.angle(np.asarray(b.z, dtype=complex)) / np.pi
            line += " arg(z)/pi=[" + ", ".join(f"{a:+.6f}" for a in angles) + "]"
        elif b.kind == "path":
            line += " diag=[" + ", ".join(f"{d:g}" for d in b.diag) + "]"
        print(line)
    if len(A.diag_values):
        vals = ", ".join(f"{i}{j}:{v:g}" for (i, j), v in zip(A.diag_labels, A.diag_values))
        print(f"  diagonal: {vals}")


def cmd_inspect(args) -> int:
    if args.dense and args.n > DENSE_GATE:
        raise UsageError(f"dense output is limited to n <= {DENSE_GATE}")
    params = resolve_params(args.n, parse_params_mode(args.params))
    tol = tolerances_from(args)
    r = params.r if params.r is not None else find_r_hat(extract_D(params, 0.0), tol)[0]
    p = params.with_r(r)
    print(f"n={args.n} r={r:.10f} generic={params.is_generic()}")
    if args.what == "D":
        D = extract_D(p)
        if args.n > DENSE_GATE and not args.dense:
            print(f"D is {D.shape[0]} x {D.shape[1]}; pass --dense only for n <= {DENSE_GATE}")
            return EXIT_OK
        _print_matrix(D)
        return EXIT_OK
    G = assemble_rho_gamma(p, check_genericity=False)
    if args.what in ("rho-gamma", "blocks"):
        A = G
    else:
        A = assemble_rho(p, check_genericity=False, rho_gamma=G)
    if args.dense:
        _print_matrix(A.densify())
    else:
        _print_assembly(A)
    return EXIT_OK


def _add_tolerance_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tolerance overrides")
    g.add_argument("--kernel-threshold", dest="kernel_threshold", type=float)
    g.add_argument("--root-simplicity-gap", dest="root_simplicity_gap", type=float)
    g.add_argument("--half-plane-margin", dest="half_plane_margin", type=float)
    g.add_argument("--zero-component-threshold", dest="zero_component_threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pptedge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="certify one n")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--params", default="default", help="default | perturbed:STEP | file:PATH")
    c.add_argument("--out", help="certificate path (stdout if omitted)")
    c.add_argument("--no-timings", action="store_true", help="omit timing fields")
    _add_tolerance_flags(c)
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("sweep", help="certify a range of n")
    s.add_argument("--from", dest="n_from", type=int, required=True)
    s.add_argument("--to", dest="n_to", type=int, required=True)
    s.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    s.add_argument("--params", default="default", help="default | perturbed:STEP")
    s.add_argument("--out-dir", help="directory for per-n certificates")
    s.add_argument("--no-timings", action="store_true")
    _add_tolerance_flags(s)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="product-vector search (n <= 12)")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--starts", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--params", default="default")
    o.add_argument("--broken-genericity", action="store_true",
                   help="use beta = alpha, which plants a product vector in the ranges")
    _add_tolerance_flags(o)
    o.set_defaults(func=cmd_oracle)

    i = sub.add_parser("inspect", help="print an assembly")
    i.add_argument("--n", type=int, required=True)
    i.add_argument("--what", choices=("rho", "rho-gamma", "D", "blocks"), required=True)
    i.add_argument("--dense", action="store_true")
    i.add_argument("--params", default="default")
    _add_tolerance_flags(i)
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if getattr(args, "n", 3) < 3:
        print("error: --n must be >= 3", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, GenericityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
