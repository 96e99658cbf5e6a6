"""Command-line interface.

Subcommands: spectrum, state, symmetries, design, verify. All energies are
in units of epsilon with hbar = m = 1; outputs are CSV/JSON written with
fixed formatting so identical configurations (and seed) reproduce files
byte for byte. Exit codes: 0 success, 1 verification/solve failure,
2 input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .design import (
    DesignNoConvergence,
    dump_solution,
    load_problem,
    solve as design_solve,
    verify as design_verify,
)
from .oracle import cross_validate
from .potential import (
    Decomposition,
    PotentialFormatError,
    PwcPotential,
    Subdomain,
    dump_potential,
    enumerate_decompositions,
    load_potential,
)
from .tolerances import TOL_T
from .transfer import find_unit_transmission, scatter, total_matrix
from .wavefield import classify_state, nonlocal_invariant, solve_state

__all__ = ["main"]


def _fmt(v) -> str:
    return "%.17g" % float(v)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_erange(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("--erange expects lo:hi:n")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0 < lo < hi) or n < 2:
        raise ValueError("--erange needs 0 < lo < hi and n >= 2")
    return np.linspace(lo, hi, n)


def _energies(args):
    if getattr(args, "erange", None):
        return _parse_erange(args.erange)
    if getattr(args, "energy", None) is not None:
        if args.energy <= 0:
            raise ValueError("--energy must be positive")
        return np.array([args.energy])
    raise ValueError("give --energy or --erange lo:hi:n")


def _values_on_grid(pot: PwcPotential, xs: np.ndarray) -> np.ndarray:
    v = np.zeros_like(xs)
    for b in pot.barriers:
        v[(xs >= b.lo) & (xs <= b.hi)] = b.V0
    return v


def _finest_decomposition(pot: PwcPotential) -> Decomposition:
    res = []
    spans = []
    for i, b in enumerate(pot.barriers):
        res.append(Subdomain(b.alpha, 0.5 * b.L, "barrier"))
        spans.append((i, i))
    gaps = []
    for r1, r2 in zip(res[:-1], res[1:]):
        gaps.append(Subdomain(0.5 * (r1.hi + r2.lo),
                              0.5 * max(r2.lo - r1.hi, 0.0), "gap"))
    return Decomposition(tuple(res), tuple(gaps), tuple(spans), 0)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_spectrum(args) -> int:
    pot = load_potential(args.potential)
    energies = _energies(args)
    rows = []
    for e in energies:
        sm = scatter(pot, float(np.sqrt(2.0 * e)))
        rows.append((e, sm.T, sm.R, sm.r.real, sm.r.imag, sm.t.real, sm.t.imag))
    out = _outdir(args)
    spec_path = os.path.join(out, "spectrum.csv")
    _write_csv(spec_path, "E,T,R,re_r,im_r,re_t,im_t", rows)
    paths = [spec_path]
    if energies.size >= 2:
        res = find_unit_transmission(pot, float(energies[0]), float(energies[-1]),
                                     n=max(energies.size, 2001), tol=args.tol_T)
        res_path = os.path.join(out, "resonances.csv")
        _write_csv(res_path, "E", [(e,) for e in res])
        paths.append(res_path)
        print(f"{len(res)} unit-transmission energies in "
              f"[{energies[0]:g}, {energies[-1]:g}]")
    print("wrote " + ", ".join(paths))
    return 0


def _classification_record(cls) -> dict:
    return {
        "class": cls.tag,
        "j": cls.j,
        "T": cls.T,
        "R": cls.R,
        "parities": list(cls.s_values),
        "total_eigenvalue": cls.lam,
        "q": [[q.real, q.imag] for q in cls.q_means],
        "q_residuals": list(cls.q_residuals),
        "density_residuals": list(cls.density_residuals),
        "diagnostics": list(cls.diagnostics),
    }


def cmd_state(args) -> int:
    pot = load_potential(args.potential)
    if args.energy is None or args.energy <= 0:
        raise ValueError("--energy must be given and positive")
    k = float(np.sqrt(2.0 * args.energy))
    lo, hi = pot.support
    span = (hi - lo) + 4.0 * np.pi / k
    state = solve_state(pot, k, args.bc, grid_step=span / max(args.points - 1, 1))
    if args.decomposition is None:
        dec = _finest_decomposition(pot)
    else:
        decs = enumerate_decompositions(pot)
        if not 0 <= args.decomposition < len(decs):
            raise ValueError(
                f"--decomposition {args.decomposition} out of range "
                f"(potential has {len(decs)})"
            )
        dec = decs[args.decomposition]
    cls = classify_state(state, dec, tol_T=args.tol_T)

    out = _outdir(args)
    s = state.samples
    vs = _values_on_grid(pot, s.x)
    state_path = os.path.join(out, "state.csv")
    _write_csv(state_path, "x,re_psi,im_psi,rho,phi,V",
               zip(s.x, s.psi.real, s.psi.imag, s.rho, s.phase, vs))
    cls_path = os.path.join(out, "classification.json")
    _write_json(cls_path, _classification_record(cls))
    print(f"E = {args.energy:g}  {args.bc.upper()}  class = {cls.tag}")
    print("wrote " + state_path + ", " + cls_path)
    return 0


def cmd_symmetries(args) -> int:
    pot = load_potential(args.potential)
    decs = enumerate_decompositions(pot)
    print(f"{len(pot.barriers)} barriers, {len(decs)} decompositions"
          + (" (truncated)" if decs.truncated else ""))
    for i, dec in enumerate(decs):
        parts = []
        for sub in dec.resonators:
            parts.append(f"[{sub.lo:g}, {sub.hi:g}] axis {sub.alpha:g}")
        print(f"decomposition {i}: {len(dec.resonators)} resonators: "
              + "; ".join(parts))
    return 0


def cmd_design(args) -> int:
    problem = load_problem(args.problem)
    out = _outdir(args)
    try:
        sol = design_solve(problem, rng_seed=args.seed, tol_T=args.tol_T)
    except DesignNoConvergence as e:
        print(f"design failed: {e}", file=sys.stderr)
        for idx, status, detail in e.seed_log:
            print(f"  seed {idx}: {status}: {detail}", file=sys.stderr)
        return 1
    dump_solution(sol, os.path.join(out, "solution.json"))
    dump_potential(sol.potential, os.path.join(out, "solved.pot"))
    report = design_verify(sol)
    _write_json(os.path.join(out, "verification.json"), report.as_dict())
    print(f"solved: max residual {sol.max_residual:.3e}, "
          f"seed {sol.diagnostics.restarts}, "
          f"{sol.diagnostics.iterations} iterations")
    print("wrote solution.json, solved.pot, verification.json in " + out)
    if not report.passed:
        for c in report.checks:
            if not c.passed:
                print(f"verification failed: {c.name} = {c.value:.3e} "
                      f"(tol {c.tol:g})", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    pot = load_potential(args.potential)
    if args.energy is None or args.energy <= 0:
        raise ValueError("--energy must be given and positive")
    e = args.energy
    k = float(np.sqrt(2.0 * e))
    checks = []

    def check(name, value, tol):
        checks.append({"name": name, "value": float(value), "tol": tol,
                       "passed": bool(value < tol)})

    m = total_matrix(pot, k)
    check("unimodularity", m.unimodularity_defect, 1e-10)
    sm = scatter(pot, k)
    check("unitarity", sm.unitarity_defect, 1e-10)
    state = solve_state(pot, k, args.bc)
    check("current constancy", state.j_deviation / k, 1e-9)
    check("propagation consistency", state.consistency_defect, 1e-9)
    dec = _finest_decomposition(pot)
    for i, sub in enumerate(dec.subdomains()):
        if sub.half_width <= 0 or sub.kind == "gap":
            continue
        iv = nonlocal_invariant(state, sub)
        check(f"q constancy sub{i}",
              iv.residual_abs / max(iv.q_scale, 1e-300), 1e-8)
    if pot.barriers:
        cv = cross_validate(pot, [e])
        check("oracle T agreement", cv.max_rel_deviation, 1e-6)
    cls = classify_state(state, dec, tol_T=args.tol_T)
    if args.expect == "ptr":
        check("expected PTR", 0.0 if cls.tag == "PTR" else 1.0, 0.5)
        check("1 - T", 1.0 - sm.T, args.tol_T)
    elif args.expect == "zero-current":
        ok = cls.tag in ("LP_EIGENSTATE", "ZERO_CURRENT_NO_LP")
        check("expected zero current", 0.0 if ok else 1.0, 0.5)
        check("|j|/k", abs(state.j) / k, 1e-9)

    doc = {"energy": e, "bc": args.bc,
           "passed": all(c["passed"] for c in checks),
           "checks": checks,
           "classification": _classification_record(cls)}
    if args.out:
        path = os.path.join(_outdir(args), "verify.json")
        _write_json(path, doc)
        print("wrote " + path)
    for c in checks:
        mark = "pass" if c["passed"] else "FAIL"
        print(f"  {mark}  {c['name']}: {c['value']:.3e} (tol {c['tol']:g})")
    print(f"class = {cls.tag}")
    return 0 if doc["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lpscatter",
        description="Scattering, symmetry analysis and inverse design for "
                    "piecewise-constant barrier arrays.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, potential=True):
        if potential:
            sp.add_argument("--potential", required=True,
                            help="potential file: one 'V0 L alpha' line per barrier")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--tol-T", dest="tol_T", type=float, default=TOL_T,
                        help="unit-transmission tolerance on 1 - T")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for randomized solver starts")

    sp = sub.add_parser("spectrum", help="transmission spectrum and resonance list")
    common(sp)
    sp.add_argument("--energy", type=float, default=None)
    sp.add_argument("--erange", default=None, help="lo:hi:n energy grid")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("state", help="wave function dump and classification")
    common(sp)
    sp.add_argument("--energy", type=float, required=True)
    sp.add_argument("--bc", choices=("aac", "sac"), default="aac")
    sp.add_argument("--points", type=int, default=4001,
                    help="sample count for the state dump")
    sp.add_argument("--decomposition", type=int, default=None,
                    help="classify against this decomposition index "
                         "(default: every barrier its own resonator)")
    sp.set_defaults(func=cmd_state)

    sp = sub.add_parser("symmetries", help="list all resonator decompositions")
    common(sp)
    sp.set_defaults(func=cmd_symmetries)

    sp = sub.add_parser("design", help="solve an inverse design problem")
    common(sp, potential=False)
    sp.add_argument("--problem", required=True, help="design problem JSON file")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("verify", help="invariant battery at one energy")
    common(sp)
    sp.add_argument("--energy", type=float, required=True)
    sp.add_argument("--bc", choices=("aac", "sac"), default="aac")
    sp.add_argument("--expect", choices=("none", "ptr", "zero-current"),
                    default="none",
                    help="additionally require this state class")
    sp.set_defaults(func=cmd_verify)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PotentialFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
