"""Command-line front end: ``arch``, ``verify``, ``bench`` and ``count``.

Exit codes: 0 success, 1 unreadable or invalid spec, 2 solver failure,
3 time budget exhausted (partial report written), 4 problem too large for the
brute-force oracle, 5 a verification property failed.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .condense import MpcSpec, condense, dare_solve
from .errors import ArenError, SpecError
from .lattice import ArchDescriptor, LayerSpec, embed, infer_architecture, lattice_net
from .oracle import (ORACLE_RHO_LIMIT, default_domain_box, enumerate_explicit,
                     exact_maximal_region_count, extract_lattice, sample_feasible,
                     solve_pointwise_batch)
from .regions import DEFAULT_EPS, estimate_region_count
from .systems import random_stable_system
from .uo import estimate_unique_order_count

log = logging.getLogger("arenkit")

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_TIMEOUT, EXIT_TOO_BIG, EXIT_FAIL = range(6)
CSV_COLUMNS = ["n", "m", "l", "Nc", "rho", "n_est", "two_pow_rho", "wall_ms",
               "lp_calls", "sat_calls", "status"]
_REQUIRED = ("A", "B", "C", "Q", "R", "Nc", "y_min", "y_max", "u_min", "u_max")


class SpecParseError(SpecError):
    pass


# --------------------------------------------------------------------------- spec files

def parse_spec(doc: dict) -> tuple[MpcSpec, dict]:
    """Build an :class:`MpcSpec` from a decoded spec document.

    ``P`` may be omitted in favour of ``"riccati": true``; ``K`` defaults to
    the LQR gain for the given ``P``. Returns the spec and the run options
    (``epsilon``, ``budget_seconds``, ``domain_box``).
    """
    if not isinstance(doc, dict):
        raise SpecParseError("spec document must be an object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise SpecParseError(f"missing key(s): {', '.join(missing)}")

    def arr(key):
        try:
            out = np.asarray(doc[key], dtype=float)
        except (TypeError, ValueError):
            raise SpecParseError(f"key {key!r}: expected a numeric array") from None
        return np.atleast_1d(out)

    A, B, C, Q, R = (np.atleast_2d(arr(k)) for k in ("A", "B", "C", "Q", "R"))
    riccati = bool(doc.get("riccati", False))
    meta = {"riccati": riccati}
    if riccati:
        if "P" in doc or "K" in doc:
            raise SpecParseError("key 'riccati': do not combine with explicit P or K")
        n, m = A.shape[0], B.shape[1]
        if Q.shape != (n, n) or R.shape != (m, m):
            raise SpecParseError(f"keys 'Q', 'R': expected shapes ({n}, {n}) and ({m}, {m}), "
                                 f"got {Q.shape} and {R.shape}")
        try:
            P, K = dare_solve(A, B, Q, R)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SpecParseError(f"key 'riccati': cannot solve the Riccati equation ({exc})") from None
    else:
        if "P" not in doc:
            raise SpecParseError("missing key: P (or set \"riccati\": true)")
        P = np.atleast_2d(arr("P"))
        if "K" in doc:
            K = np.atleast_2d(arr("K"))
        else:
            try:
                K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise SpecParseError(f"key 'K': cannot derive a default gain ({exc})") from None
    Nc = doc["Nc"]
    if not isinstance(Nc, int) or isinstance(Nc, bool):
        raise SpecParseError("key 'Nc': expected an integer")
    opts = {
        "epsilon": float(doc.get("epsilon", DEFAULT_EPS)),
        "budget_seconds": doc.get("budget_seconds"),
        "domain_box": np.asarray(doc["domain_box"], dtype=float) if "domain_box" in doc else None,
    }
    spec = MpcSpec(A=A, B=B, C=C, P=P, Q=Q, R=R, K=K, N_c=Nc,
                   y_min=arr("y_min"), y_max=arr("y_max"), u_min=arr("u_min"), u_max=arr("u_max"),
                   epsilon=opts["epsilon"], meta=meta)
    return spec, opts


def load_spec(path: str | Path) -> tuple[MpcSpec, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_spec(doc)


def spec_to_doc(spec: MpcSpec, **opts) -> dict:
    doc = {k: getattr(spec, k).tolist() for k in ("A", "B", "C", "P", "Q", "R", "K",
                                                  "y_min", "y_max", "u_min", "u_max")}
    doc["Nc"] = spec.N_c
    doc["epsilon"] = spec.epsilon
    doc.update({k: v for k, v in opts.items() if v is not None})
    return doc


# --------------------------------------------------------------------------- arch files

def arch_document(arch: ArchDescriptor, metadata: dict, timing: dict) -> dict:
    """ArchFile content; integers that may exceed 64 bits are decimal strings."""
    return {
        "metadata": metadata,
        "timing": timing,
        "layers": [{"in": str(s.in_dim), "out": str(s.out_dim), "role": s.role,
                    "activation": s.activation} for s in arch.layers],
    }


def write_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_arch(path: str | Path) -> tuple[ArchDescriptor, dict]:
    doc = json.loads(Path(path).read_text())
    meta = doc["metadata"]
    layers = tuple(LayerSpec(int(d["in"]), int(d["out"]), d["role"], bool(d["activation"]))
                   for d in doc["layers"])
    arch = ArchDescriptor(layers, int(meta["n"]), int(meta["m"]),
                          int(meta["n_est"]), int(meta["m_est"]))
    return arch, meta


# --------------------------------------------------------------------------- commands

def cmd_arch(args) -> int:
    spec, opts = load_spec(args.spec)
    eps = args.epsilon if args.epsilon is not None else opts["epsilon"]
    budget = args.budget if args.budget is not None else opts["budget_seconds"]
    t0 = time.perf_counter()
    qp = condense(spec)
    report = estimate_region_count(qp, eps=eps, budget_seconds=budget)
    uo = estimate_unique_order_count(report.n_est, spec.n)
    t1 = time.perf_counter()
    arch = infer_architecture(report.n_est, uo.m_est, spec.n, spec.m)
    t2 = time.perf_counter()
    meta = {
        "tool_version": __version__,
        "n": spec.n, "m": spec.m, "l": spec.l, "Nc": spec.N_c,
        "rho": qp.rho, "omega": qp.omega,
        "epsilon": eps,
        "n_est": str(report.n_est),
        "m_est": str(uo.m_est),
        "n_hyperplanes": str(uo.n_hyperplanes),
        "two_pow_rho": str(report.two_pow_rho),
        "param_count": str(arch.param_count),
        "maximal_sets": [list(s.indices) for s in report.maximal_sets],
        "exact_union": report.exact_union,
        "complete": report.complete,
        "partial_bound": None if report.partial_bound is None else str(report.partial_bound),
        "riccati": bool(spec.meta.get("riccati", False)),
    }
    timing = {"estimate_s": t1 - t0, "infer_s": t2 - t1,
              "lp_calls": report.lp_calls, "sat_calls": report.sat_calls}
    write_json(arch_document(arch, meta, timing), args.out)

    print(f"states n={spec.n}  inputs m={spec.m}  outputs l={spec.l}  Nc={spec.N_c}")
    print(f"rho={qp.rho}  omega={qp.omega}  2^rho={report.two_pow_rho}")
    print(f"n_est={report.n_est}  (2^rho / n_est = {report.ratio:.3g})"
          + ("" if report.complete else "  [budget exhausted, fell back to 2^rho]"))
    print(f"m_est={uo.m_est}")
    print(f"layers={arch.depth}  parameters={arch.param_count}")
    print(f"wrote {args.out}")
    return EXIT_OK if report.complete else EXIT_TIMEOUT


def cmd_count(args) -> int:
    spec, opts = load_spec(args.spec)
    eps = args.epsilon if args.epsilon is not None else opts["epsilon"]
    budget = args.budget if args.budget is not None else opts["budget_seconds"]
    report = estimate_region_count(condense(spec), eps=eps, budget_seconds=budget)
    print(f"rho={report.rho}  maximal_sets={len(report.maximal_sets)}  n_est={report.n_est}  "
          f"2^rho={report.two_pow_rho}  ratio={report.ratio:.3g}  "
          f"lp_calls={report.lp_calls}  sat_calls={report.sat_calls}  time={report.wall_time:.3f}s")
    return EXIT_OK if report.complete else EXIT_TIMEOUT


def verify_spec(spec: MpcSpec, opts: dict, samples: int, seed: int,
                out=None) -> dict[str, bool]:
    """Run the oracle pipeline and report each property as PASS/FAIL."""
    out = sys.stdout if out is None else out
    qp = condense(spec)
    report = estimate_region_count(qp, eps=opts.get("epsilon", DEFAULT_EPS))
    uo = estimate_unique_order_count(report.n_est, spec.n)
    box = opts.get("domain_box")
    box = default_domain_box(qp) if box is None else box
    pwa = enumerate_explicit(qp, box)
    exact = exact_maximal_region_count(pwa)
    rng = np.random.default_rng(seed)
    X = sample_feasible(qp, box, samples, rng)
    u, _ = solve_pointwise_batch(qp, X)

    results = {}
    results["bound"] = exact <= report.n_est <= report.two_pow_rho
    print(f"exact={exact} n_est={report.n_est} 2^rho={report.two_pow_rho}", file=out)
    results["pointwise"] = bool(np.nanmax(np.abs(pwa(X) - u)) <= 1e-7)
    descs = [extract_lattice(pwa, channel=c, seed=seed) for c in range(spec.m)]
    net = lattice_net(descs)
    results["lattice"] = bool(np.max(np.abs(net(X) - u)) <= 1e-8)
    fits = net.n_local <= report.n_est and net.n_orders <= uo.m_est
    results["fits"] = fits
    if fits:
        big = embed(net, report.n_est, uo.m_est)
        target = infer_architecture(report.n_est, uo.m_est, spec.n, spec.m, warn_threshold=float("inf"))
        same = big.arch() == target
        results["embedding"] = bool(same and np.max(np.abs(big(X) - net(X))) <= 1e-9)
    else:
        results["embedding"] = False
    for name, ok in results.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}", file=out)
    return results


def cmd_verify(args) -> int:
    spec, opts = load_spec(args.spec)
    if spec.rho > ORACLE_RHO_LIMIT:
        print(f"rho={spec.rho} exceeds the oracle limit {ORACLE_RHO_LIMIT}; verification unavailable")
        return EXIT_TOO_BIG
    results = verify_spec(spec, opts, args.samples, args.seed)
    return EXIT_OK if all(results.values()) else EXIT_FAIL


def expand_sweep(desc: dict) -> list[dict]:
    """Rows of a sweep descriptor.

    Either ``{"instances": [{...}, ...]}`` or one object whose list-valued
    fields among ``n, m, l, Nc, seed`` are expanded as a Cartesian product.
    """
    defaults = {"n": 2, "m": 1, "l": 1, "Nc": 2, "seed": 0, "budget_seconds": None}
    if "instances" in desc:
        return [{**defaults, **row} for row in desc["instances"]]
    keys = ["n", "m", "l", "Nc", "seed"]
    axes = [desc.get(k, defaults[k]) for k in keys]
    axes = [a if isinstance(a, list) else [a] for a in axes]
    budget = desc.get("budget_seconds")
    return [dict(zip(keys, combo), budget_seconds=budget) for combo in itertools.product(*axes)]


def bench_row(row: dict) -> dict:
    spec = random_stable_system(int(row["n"]), int(row["m"]), int(row["l"]), int(row["Nc"]),
                                seed=int(row["seed"]))
    qp = condense(spec)
    report = estimate_region_count(qp, budget_seconds=row.get("budget_seconds"))
    return {
        "n": spec.n, "m": spec.m, "l": spec.l, "Nc": spec.N_c, "rho": qp.rho,
        "n_est": str(report.n_est), "two_pow_rho": str(report.two_pow_rho),
        "wall_ms": f"{1000 * report.wall_time:.1f}",
        "lp_calls": report.lp_calls, "sat_calls": report.sat_calls,
        "status": "ok" if report.complete else "timeout",
    }


def run_bench(rows: list[dict], workers: int = 1) -> list[dict]:
    if workers > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(bench_row, rows))
    return [bench_row(r) for r in rows]


def cmd_bench(args) -> int:
    try:
        desc = json.loads(Path(args.sweep).read_text())
    except OSError as exc:
        raise SpecParseError(f"cannot read {args.sweep}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{args.sweep}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    rows = run_bench(expand_sweep(desc), args.workers)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        print(f"n={r['n']:>4} rho={r['rho']:>3} n_est={r['n_est']:>8} 2^rho={r['two_pow_rho']:>8} "
              f"ms={r['wall_ms']:>9} {r['status']}")
    return EXIT_OK


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arenkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"arenkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("arch", help="estimate N_est, M_est and emit the network architecture")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--budget", type=float, help="time budget in seconds for the region count")
    p.set_defaults(func=cmd_arch)

    p = sub.add_parser("count", help="region count only")
    p.add_argument("--spec", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--budget", type=float)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("verify", help="check the estimate and the network against the explicit oracle")
    p.add_argument("--spec", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a sweep of random instances and write a CSV")
    p.add_argument("--sweep", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("ARENKIT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ArenError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
