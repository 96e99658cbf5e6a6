"""Inverse construction of resonant barrier arrays.

Two problem modes:

* "ptr": choose free barrier parameters so that every resonator of a
  chosen decomposition is individually transparent (its off-diagonal
  transfer entry vanishes) at each prescribed momentum. A chain of
  transparent mirror-symmetric units transmits perfectly, so the full
  array acquires a perfect transmission resonance exactly there.
* "zero_current": additionally shape the both-sides-fed stationary state
  into a local-parity eigenstate: one complex center condition per
  subdomain (psi'(alpha) = 0 for even parity, psi(alpha) = 0 for odd),
  imposed on resonators and gaps alike, plus the global phase condition
  e^{2 i k x_c} = lambda at the support midpoint.

Problems are solved by a damped least-squares iteration with a
central-difference Jacobian and deterministic multi-start seeding.
Problem and solution files are JSON; see load_problem for the schema.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .potential import Barrier, Decomposition, PwcPotential, is_lp_symmetric
from .tolerances import TOL_DESIGN, TOL_ORACLE_REL, TOL_T, TOL_X
from .transfer import barrier_matrix, scatter, total_matrix
from .wavefield import BoundaryCondition, classify_state, solve_state

__all__ = [
    "FreeHandle",
    "DesignTarget",
    "DesignProblem",
    "DesignSolution",
    "SolverDiagnostics",
    "InfeasibleParams",
    "DesignNoConvergence",
    "VerificationCheck",
    "VerificationReport",
    "initial_params",
    "apply_params",
    "residual_vector",
    "condition_magnitudes",
    "solve",
    "verify",
    "abr_width",
    "abr_energy",
    "pair_spacing",
    "quarter_wave_triple",
    "zero_current_chain",
    "load_problem",
    "dump_problem",
    "dump_solution",
]

_FIELDS = ("V0", "L", "alpha")


class InfeasibleParams(ValueError):
    """Parameter vector leaves the feasible region (overlap, V0 <= 0, ...)."""


@dataclass(frozen=True)
class FreeHandle:
    """One free real parameter, applied to a group of template barriers.

    field "V0" or "L": the parameter is the shared absolute value given to
    every barrier in the group. field "alpha": the parameter is an additive
    offset to the template positions, scaled per barrier by `weights`
    (default all 1, a rigid shift; mixed-sign weights express symmetric
    stretches, e.g. (-1, +1) widens a pair about its midpoint).
    """

    field: str
    barriers: tuple
    lower: float = -np.inf
    upper: float = np.inf
    weights: tuple | None = None

    def __post_init__(self):
        if self.field not in _FIELDS:
            raise ValueError(f"handle field must be one of {_FIELDS}")
        object.__setattr__(self, "barriers", tuple(int(i) for i in self.barriers))
        if not self.barriers:
            raise ValueError("handle needs at least one barrier index")
        if self.weights is not None:
            if self.field != "alpha":
                raise ValueError("weights are only meaningful for alpha handles")
            w = tuple(float(v) for v in self.weights)
            if len(w) != len(self.barriers):
                raise ValueError("weights and barriers length mismatch")
            object.__setattr__(self, "weights", w)
        if not self.lower < self.upper:
            raise ValueError("handle bounds must satisfy lower < upper")


@dataclass(frozen=True)
class DesignTarget:
    """One prescribed momentum with its resonator decomposition.

    resonators: inclusive (first, last) barrier-index spans, left to right.
    signs: zero-current mode only, local parities (+1/-1) of the
    interleaved subdomains [res0, gap0, res1, gap1, ...]; entries for
    zero-width gaps are carried but impose nothing.
    ptr: zero-current mode only, flags the resonators that must also be
    individually transparent at k (so truncating the others preserves a
    perfect transmission resonance).
    """

    k: float
    resonators: tuple
    signs: tuple = ()
    ptr: tuple = ()

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("target momentum must be positive")
        spans = tuple((int(a), int(b)) for a, b in self.resonators)
        for a, b in spans:
            if a > b:
                raise ValueError(f"resonator span ({a}, {b}) is reversed")
        for (_, b1), (a2, _) in zip(spans[:-1], spans[1:]):
            if a2 <= b1:
                raise ValueError("resonator spans must be disjoint and ordered")
        object.__setattr__(self, "resonators", spans)
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        object.__setattr__(self, "ptr", tuple(bool(p) for p in self.ptr))
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")

    @property
    def energy(self) -> float:
        return 0.5 * self.k * self.k


@dataclass(frozen=True)
class DesignProblem:
    template: PwcPotential
    free: tuple
    targets: tuple
    mode: str = "ptr"
    least_squares: bool = True

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(self.free))
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.mode not in ("ptr", "zero_current"):
            raise ValueError("mode must be 'ptr' or 'zero_current'")
        n = len(self.template.barriers)
        taken = set()
        for h in self.free:
            for i in h.barriers:
                if not 0 <= i < n:
                    raise ValueError(f"handle references barrier {i}, template has {n}")
                # V0/L assignments must be unambiguous; alpha offsets compose
                if h.field != "alpha":
                    if (h.field, i) in taken:
                        raise ValueError(
                            f"barrier {i} has two handles for field {h.field}"
                        )
                    taken.add((h.field, i))
        for t in self.targets:
            for a, b in t.resonators:
                if b >= n:
                    raise ValueError(f"target span ({a}, {b}) exceeds template size")
            if self.mode == "zero_current":
                want = 2 * len(t.resonators) - 1
                if len(t.signs) != want:
                    raise ValueError(
                        f"zero-current target needs {want} subdomain signs, "
                        f"got {len(t.signs)}"
                    )
                if len(t.ptr) not in (0, len(t.resonators)):
                    raise ValueError("ptr flags must match the resonator count")
        if not self.least_squares:
            have, want = len(self.free), self.n_residuals
            if have != want:
                raise ValueError(
                    f"exact mode needs as many free parameters as residuals "
                    f"({want}), got {have}; set least_squares=True to opt into "
                    f"minimization instead"
                )

    @property
    def n_params(self) -> int:
        return len(self.free)

    @property
    def n_residuals(self) -> int:
        n = 0
        for t in self.targets:
            if self.mode == "ptr":
                n += 2 * len(t.resonators)
            else:
                flagged = sum(t.ptr) if t.ptr else 0
                n += 2 * flagged + 2 * (2 * len(t.resonators) - 1) + 1
        return n


def initial_params(problem: DesignProblem) -> np.ndarray:
    """Parameter vector matching the template (alpha offsets start at 0)."""
    vals = []
    for h in problem.free:
        if h.field == "alpha":
            vals.append(0.0)
        else:
            b = problem.template.barriers[h.barriers[0]]
            vals.append(getattr(b, h.field))
    return np.array(vals, dtype=float)


def apply_params(problem: DesignProblem, params) -> PwcPotential:
    """Instantiate the template with the given parameter vector.

    Raises InfeasibleParams when the result is unphysical, naming the
    violated constraint.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (len(problem.free),):
        raise ValueError(f"expected {len(problem.free)} parameters")
    v0 = [b.V0 for b in problem.template.barriers]
    ln = [b.L for b in problem.template.barriers]
    al = [b.alpha for b in problem.template.barriers]
    for h, val in zip(problem.free, params):
        if h.field == "V0":
            for i in h.barriers:
                v0[i] = val
        elif h.field == "L":
            for i in h.barriers:
                ln[i] = val
        else:
            ws = h.weights or (1.0,) * len(h.barriers)
            for i, w in zip(h.barriers, ws):
                al[i] += w * val
    try:
        return PwcPotential([Barrier(v, d, a) for v, d, a in zip(v0, ln, al)])
    except ValueError as e:
        raise InfeasibleParams(str(e)) from None


def _spans_to_decomposition(pot: PwcPotential, spans) -> Decomposition:
    return Decomposition.from_spans(pot, spans)


def _sub_potential(pot: PwcPotential, span) -> PwcPotential:
    a, b = span
    return PwcPotential(pot.barriers[a:b + 1])


def _zc_rows(pot: PwcPotential, t: DesignTarget):
    """Residual rows for one zero-current target on a candidate potential."""
    rows = []
    k = t.k
    if t.ptr:
        for span, flagged in zip(t.resonators, t.ptr):
            if not flagged:
                continue
            z = total_matrix(_sub_potential(pot, span), k).z
            rows.extend((z.real, z.imag))
    state = solve_state(pot, k, "sac", with_samples=False)
    dec = _spans_to_decomposition(pot, t.resonators)
    for sub, s in zip(dec.subdomains(), t.signs):
        if sub.half_width <= TOL_X:
            rows.extend((0.0, 0.0))
            continue
        c = state.psi_at(sub.alpha)
        d = state.dpsi_at(sub.alpha) / k
        scale = max(np.hypot(abs(c), abs(d)), 1e-300)
        val = (d if s == 1 else c) / scale
        rows.extend((val.real, val.imag))
    lam = 1
    for s in t.signs:
        lam *= s
    xc = pot.center
    rows.append(float(np.angle(np.exp(2j * k * xc) * lam)))
    return rows


def residual_vector(problem: DesignProblem, params) -> np.ndarray:
    """Stacked real residuals at a parameter vector.

    "ptr": [Re z, Im z] of each target resonator's standalone transfer
    matrix at its momentum, in target order then resonator order.
    "zero_current" appends, per target: [Re z, Im z] for ptr-flagged
    resonators, then the normalized center condition of every subdomain
    (gaps included), then the wrapped boundary phase residual.
    """
    pot = apply_params(problem, params)
    rows = []
    for t in problem.targets:
        if problem.mode == "ptr":
            for span in t.resonators:
                z = total_matrix(_sub_potential(pot, span), t.k).z
                rows.extend((z.real, z.imag))
        else:
            rows.extend(_zc_rows(pot, t))
    return np.array(rows, dtype=float)


def condition_magnitudes(problem: DesignProblem, params):
    """(labels, magnitudes): one scalar per design condition."""
    r = residual_vector(problem, params)
    labels, mags = [], []
    pos = 0

    def take2(label):
        nonlocal pos
        labels.append(label)
        mags.append(float(np.hypot(r[pos], r[pos + 1])))
        pos += 2

    for ti, t in enumerate(problem.targets):
        if problem.mode == "ptr":
            for ri in range(len(t.resonators)):
                take2(f"z[target{ti},res{ri}]")
        else:
            if t.ptr:
                for ri, flagged in enumerate(t.ptr):
                    if flagged:
                        take2(f"z[target{ti},res{ri}]")
            for si in range(2 * len(t.resonators) - 1):
                take2(f"lp[target{ti},sub{si}]")
            labels.append(f"boundary[target{ti}]")
            mags.append(float(abs(r[pos])))
            pos += 1
    return tuple(labels), np.array(mags)


@dataclass
class SolverDiagnostics:
    iterations: int
    restarts: int
    seed_log: tuple

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "restarts": self.restarts,
            "seed_log": [list(map(str, row)) for row in self.seed_log],
        }


@dataclass(frozen=True)
class DesignSolution:
    problem: DesignProblem
    potential: PwcPotential
    params: np.ndarray
    labels: tuple
    residuals: np.ndarray
    max_residual: float
    diagnostics: SolverDiagnostics = field(repr=False, default=None)
    converged: bool = True


class DesignNoConvergence(RuntimeError):
    """No seed reached the residual tolerance; carries the best attempt."""

    def __init__(self, message, best_residual, best_params, seed_log):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_params = best_params
        self.seed_log = seed_log


def _jacobian(fun, x, f0, rel=1e-7):
    """Central-difference Jacobian, one-sided next to infeasible points."""
    m, n = f0.size, x.size
    J = np.zeros((m, n))
    for i in range(n):
        h = rel * max(abs(x[i]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp = fm = None
        try:
            fp = fun(xp)
        except InfeasibleParams:
            pass
        try:
            fm = fun(xm)
        except InfeasibleParams:
            pass
        if fp is not None and fm is not None:
            J[:, i] = (fp - fm) / (2 * h)
        elif fp is not None:
            J[:, i] = (fp - f0) / h
        elif fm is not None:
            J[:, i] = (f0 - fm) / h
    return J


def _levenberg(fun, x0, lower, upper, tol, max_iter):
    """Damped least squares with bound projection. Returns (x, f, it, ok)."""
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f = fun(x)  # InfeasibleParams propagates: the seed itself is bad
    cost = float(f @ f)
    damp = 1e-3
    it = 0
    while it < max_iter:
        if np.max(np.abs(f)) < tol:
            return x, f, it, True
        it += 1
        J = _jacobian(fun, x, f)
        A = J.T @ J
        g = J.T @ f
        scale = np.diag(A).copy()
        scale[scale < 1e-14] = 1e-14
        accepted = False
        for _ in range(40):
            try:
                step = np.linalg.solve(A + damp * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                damp *= 10
                continue
            xn = np.clip(x + step, lower, upper)
            try:
                fn = fun(xn)
            except InfeasibleParams:
                damp *= 10
                continue
            if float(fn @ fn) < cost:
                x, f, cost = xn, fn, float(fn @ fn)
                damp = max(damp / 3, 1e-14)
                accepted = True
                break
            damp *= 10
        if not accepted:
            break
        if np.linalg.norm(step) < 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    return x, f, it, bool(np.max(np.abs(f)) < tol)


def default_seeds(problem: DesignProblem, rng_seed: int = 0,
                  n_random: int = 16) -> list:
    """Template parameters plus seeded random restarts within bounds.

    Restarts alternate between small jitter around the template (refinement
    of a nearly-right geometry) and draws across the whole bounded box
    (escape hatch when the target basin is far from the template).
    """
    x0 = initial_params(problem)
    lower = np.array([h.lower for h in problem.free])
    upper = np.array([h.upper for h in problem.free])
    bounded = np.isfinite(upper - lower)
    span = np.where(bounded, upper - lower, np.maximum(np.abs(x0), 1.0))
    rng = np.random.default_rng(rng_seed)
    seeds = [x0]
    for i in range(n_random):
        if i % 2 == 0:
            cand = x0 + rng.uniform(-0.05, 0.05, x0.size) * span
        else:
            u = rng.uniform(0.0, 1.0, x0.size)
            wide = x0 + (u - 0.5) * span
            cand = np.where(bounded, lower + u * span, wide)
        seeds.append(np.clip(cand, lower, upper))
    return seeds


def _posthoc(problem: DesignProblem, pot: PwcPotential, tol_T: float):
    """Re-check a converged candidate end to end; '' means it passed."""
    for t in problem.targets:
        dec = _spans_to_decomposition(pot, t.resonators)
        for sub in dec.resonators:
            if not is_lp_symmetric(pot, sub):
                return (f"resonator [{sub.lo:g}, {sub.hi:g}] not mirror-"
                        f"symmetric in the solved potential")
        if problem.mode == "ptr":
            sm = scatter(pot, t.k)
            if 1.0 - sm.T >= tol_T:
                return f"1 - T = {1.0 - sm.T:.3e} at k = {t.k:g}"
            cls = classify_state(solve_state(pot, t.k, "aac"), dec, tol_T=tol_T)
            if cls.tag != "PTR":
                return f"classified {cls.tag}, not PTR, at k = {t.k:g}"
        else:
            cls = classify_state(solve_state(pot, t.k, "sac"), dec, tol_T=tol_T)
            if cls.tag != "LP_EIGENSTATE":
                return f"classified {cls.tag}, not LP_EIGENSTATE, at k = {t.k:g}"
            want = [s for sub, s in zip(dec.subdomains(), t.signs)
                    if sub.half_width > 0]
            if list(cls.s_values) != want:
                return (f"recovered parities {list(cls.s_values)} differ from "
                        f"requested {want}")
    return ""


def solve(problem: DesignProblem, seeds=None, *, rng_seed: int = 0,
          n_random: int = 16, tol: float = TOL_DESIGN,
          tol_T: float = TOL_T, max_iter: int = 200) -> DesignSolution:
    """Multi-start damped least squares over the free parameters.

    Seeds run in order; the first one whose residuals all drop below tol
    and whose solved potential passes the end-to-end re-check wins. Raises
    DesignNoConvergence with the best attempt when none does.
    """
    if seeds is None:
        seeds = default_seeds(problem, rng_seed, n_random)
    if not seeds:
        raise ValueError("need at least one seed")
    lower = np.array([h.lower for h in problem.free])
    upper = np.array([h.upper for h in problem.free])
    fun = lambda x: residual_vector(problem, x)

    log = []
    best = (np.inf, None)
    total_it = 0
    for idx, seed in enumerate(seeds):
        try:
            x, f, it, ok = _levenberg(fun, np.asarray(seed, float),
                                      lower, upper, tol, max_iter)
        except InfeasibleParams as e:
            log.append((idx, "infeasible seed", str(e)))
            continue
        total_it += it
        resid = float(np.max(np.abs(f)))
        if resid < best[0]:
            best = (resid, x)
        if not ok:
            log.append((idx, "no convergence", f"max residual {resid:.3e}"))
            continue
        pot = apply_params(problem, x)
        reason = _posthoc(problem, pot, tol_T)
        if reason:
            log.append((idx, "re-check failed", reason))
            continue
        log.append((idx, "converged", f"max residual {resid:.3e}"))
        labels, mags = condition_magnitudes(problem, x)
        return DesignSolution(
            problem=problem, potential=pot, params=x, labels=labels,
            residuals=mags, max_residual=float(np.max(mags)) if mags.size else 0.0,
            diagnostics=SolverDiagnostics(total_it, idx, tuple(log)),
            converged=True,
        )
    raise DesignNoConvergence(
        f"no seed converged; best max residual {best[0]:.3e} over "
        f"{len(seeds)} seeds",
        best[0], best[1], tuple(log),
    )


# ---------------------------------------------------------------- verification

@dataclass(frozen=True)
class VerificationCheck:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.value < self.tol

    def as_dict(self):
        return {"name": self.name, "value": self.value,
                "tol": self.tol, "passed": self.passed}


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


class _SacCombination:
    """Both-sides-fed state assembled from a left-incident oracle solution."""

    def __init__(self, res):
        self._res = res
        tbar = np.conj(res.t)
        self._a = 1.0 - np.conj(res.r) / tbar
        self._b = 1.0 / tbar

    def psi_at(self, x):
        p = self._res.psi_at(x)
        return self._a * p + self._b * np.conj(p)

    def dpsi_at(self, x):
        d = self._res.dpsi_at(x)
        return self._a * d + self._b * np.conj(d)


def verify(solution: DesignSolution, step: float | None = None,
           tol: float = TOL_ORACLE_REL) -> VerificationReport:
    """Independent re-verification by direct integration (no transfer matrices).

    Checks, per target: integrated 1 - T ("ptr" mode) or |r - r_tilde| and
    the state current ("zero_current" mode); density mirror symmetry in
    every resonator; constancy (or vanishing) of the two-point invariant in
    every subdomain. Tolerances are the integrator's, looser than the
    design residual tolerance.
    """
    from .oracle import integrate_pwc, sac_amplitudes_pwc
    from .wavefield import check_lp_density, nonlocal_invariant

    pot = solution.potential
    checks = []
    for ti, t in enumerate(solution.problem.targets):
        k = t.k
        res = integrate_pwc(pot, k, step=step)
        dec = _spans_to_decomposition(pot, t.resonators)
        if solution.problem.mode == "ptr":
            checks.append(VerificationCheck(
                f"oracle 1-T [target{ti}]", abs(1.0 - res.T), tol))
            state = res
        else:
            r, tt, rt = sac_amplitudes_pwc(pot, k, step=step)
            checks.append(VerificationCheck(
                f"oracle |r - r~| [target{ti}]", abs(r - rt), tol))
            lam = 1
            for s in t.signs:
                lam *= s
            checks.append(VerificationCheck(
                f"boundary phase [target{ti}]",
                abs(np.exp(2j * k * pot.center) - lam), tol))
            state = _SacCombination(res)
            xs = np.linspace(pot.support[0], pot.support[1], 2001)
            cur = np.imag(np.conj(state.psi_at(xs)) * state.dpsi_at(xs))
            checks.append(VerificationCheck(
                f"oracle |j|/k [target{ti}]", float(np.max(np.abs(cur))) / k, tol))
        for ri, sub in enumerate(dec.resonators):
            checks.append(VerificationCheck(
                f"density symmetry [target{ti},res{ri}]",
                check_lp_density(state, sub), tol))
        for si, sub in enumerate(dec.subdomains()):
            if sub.half_width <= TOL_X:
                continue
            iv = nonlocal_invariant(state, sub, pot=pot)
            if solution.problem.mode == "zero_current":
                val = abs(iv.q_mean) / max(iv.q_scale, 1e-300)
            else:
                val = iv.residual_abs / max(iv.q_scale, 1e-300)
            checks.append(VerificationCheck(
                f"invariant [target{ti},sub{si}]", val, tol))
    return VerificationReport(tuple(checks))


# ------------------------------------------------------- closed-form builders

def abr_width(V0: float, k: float, n: int = 1) -> float:
    """Width putting a single barrier at its n-th transparency at momentum k."""
    q = k * k - 2.0 * V0
    if q <= 0:
        raise ValueError("needs k^2 > 2 V0 (wave must propagate over the barrier)")
    return n * np.pi / np.sqrt(q)


def abr_energy(V0: float, L: float, n: int = 1) -> float:
    """Energy of the n-th single-barrier transparency: V0 + n^2 pi^2 / (2 L^2)."""
    return V0 + 0.5 * (n * np.pi / L) ** 2


def pair_spacing(V0: float, L: float, k: float, m: int = 0) -> float:
    """Smallest gap making two identical barriers jointly transparent at k.

    The pair's off-diagonal entry vanishes when Re(w e^{i k (L + d)}) = 0,
    with w the single-barrier diagonal entry; m >= 0 picks higher branches.
    """
    w = barrier_matrix(Barrier(V0, L, 0.0), k).w
    d = (0.5 * np.pi + m * np.pi - np.angle(w)) / k - L
    while d <= 0:
        m += 1
        d = (0.5 * np.pi + m * np.pi - np.angle(w)) / k - L
    return d


def quarter_wave_triple(k: float, kappa_c: float, width_c: float,
                        x0: float = 0.0) -> PwcPotential:
    """Impedance-matched three-layer resonator, transparent at k for ANY core width.

    Outer layers have interior wavevector sqrt(k * kappa_c) and quarter-wave
    width, matching vacuum to a core with wavevector kappa_c < k. The core
    then carries a purely forward wave of constant density k / kappa_c > 1.
    """
    if not 0 < kappa_c < k:
        raise ValueError("needs 0 < kappa_c < k")
    if width_c <= 0:
        raise ValueError("core width must be positive")
    ku = np.sqrt(k * kappa_c)
    lu = 0.5 * np.pi / ku
    vu = 0.5 * (k * k - ku * ku)
    vc = 0.5 * (k * k - kappa_c * kappa_c)
    return PwcPotential([
        Barrier(vu, lu, x0 + 0.5 * lu),
        Barrier(vc, width_c, x0 + lu + 0.5 * width_c),
        Barrier(vu, lu, x0 + lu + width_c + 0.5 * lu),
    ])


def _wrap(a: float) -> float:
    return float(np.angle(np.exp(1j * a)))


def zero_current_chain(k: float, head=(4.0, 1.0), n_units: int = 4,
                       kappa_c: float | None = None, signs=None,
                       min_gap: float = 0.4, min_core: float = 0.3):
    """Deterministic construction of a zero-current local-parity device.

    One opaque head barrier followed by n_units impedance-matched triples,
    each transparent at k. Positions and core widths are chosen by a
    left-to-right phase walk so that the real standing-wave solution has a
    node or antinode (per `signs`) at every subdomain center, gaps included;
    a final rigid shift sets the boundary phase. The both-sides-fed state at
    k is then a local-parity eigenstate, and dropping the head leaves a
    chain of transparent units: a perfect transmission resonance at the
    same k exactly.

    signs: (2 n_units + 1) parities, [head, gap1, unit1, gap2, unit2, ...];
    default all +1. Returns (potential, spans, signs).
    """
    if k <= 0:
        raise ValueError("momentum must be positive")
    if signs is None:
        signs = (1,) * (2 * n_units + 1)
    signs = tuple(int(s) for s in signs)
    if len(signs) != 2 * n_units + 1 or any(s not in (-1, 1) for s in signs):
        raise ValueError(f"need {2 * n_units + 1} signs of +-1")
    vh, lh = head
    if kappa_c is None:
        kappa_c = 0.5 * k

    # head interior: the even/odd closed-form solution about its center
    from .transfer import _cs
    qh = k * k - 2.0 * vh
    c, s = _cs(qh, 0.5 * lh)
    if signs[0] == 1:
        pf, df = complex(c), complex(-qh * s)
    else:
        pf, df = complex(s), complex(c)
    f_prev = 0.5 * lh  # head centered at 0 for the walk; shifted at the end
    phi0 = np.arctan2(df.real / k, pf.real)
    delta = -k * f_prev - phi0

    ku = np.sqrt(k * kappa_c)
    lu = 0.5 * np.pi / ku
    vu = 0.5 * (k * k - ku * ku)
    vc = 0.5 * (k * k - kappa_c * kappa_c)
    theta0 = _wrap(np.pi - 2.0 * k * lu)  # the merged outer layers are half-wave

    barriers = [Barrier(vh, lh, 0.0)]
    spans = [(0, 0)]
    for i in range(n_units):
        s_gap, s_unit = signs[2 * i + 1], signs[2 * i + 2]
        target = _wrap((0.0 if s_unit == 1 else np.pi) + 2 * delta + 2 * k * f_prev)
        # unit phase + 2 k half_width accrues as kappa_c * core beyond theta0 + 2 k lu
        need = _wrap(target - theta0 - 2.0 * k * lu)
        core = need / kappa_c
        while core < min_core:
            core += 2.0 * np.pi / kappa_c
        half = lu + 0.5 * core
        g_off = 0.0 if s_gap == 1 else np.pi
        alpha = (g_off - 2 * delta - k * f_prev + k * half) / k
        period = 2.0 * np.pi / k
        alpha += np.ceil((f_prev + half + min_gap - alpha) / period) * period
        lo = alpha - half
        barriers.append(Barrier(vu, lu, lo + 0.5 * lu))
        barriers.append(Barrier(vc, core, lo + lu + 0.5 * core))
        barriers.append(Barrier(vu, lu, lo + lu + core + 0.5 * lu))
        spans.append((len(barriers) - 3, len(barriers) - 1))
        theta_u = theta0 + (kappa_c - k) * core
        delta += theta_u
        f_prev = alpha + half

    lam = 1
    for sgn in signs:
        lam *= sgn
    pot = PwcPotential(barriers)
    xc = pot.center
    arg = 0.0 if lam == 1 else np.pi
    shift = ((0.5 * arg - k * xc) % np.pi) / k
    pot = pot.translated(shift)
    sm = scatter(pot, k)
    if abs(sm.r) < 0.05:
        raise ValueError(
            f"head barrier is nearly transparent at k = {k:g} (|r| = "
            f"{abs(sm.r):.3f}); pick a different (V0, L)"
        )
    return pot, tuple(spans), signs


# ------------------------------------------------------------------- file I/O

def _problem_to_dict(problem: DesignProblem) -> dict:
    return {
        "mode": problem.mode,
        "least_squares": problem.least_squares,
        "template": [[b.V0, b.L, b.alpha] for b in problem.template.barriers],
        "free": [
            {
                "field": h.field,
                "barriers": list(h.barriers),
                "lower": None if not np.isfinite(h.lower) else h.lower,
                "upper": None if not np.isfinite(h.upper) else h.upper,
                "weights": None if h.weights is None else list(h.weights),
            }
            for h in problem.free
        ],
        "targets": [
            {
                "energy": t.energy,
                "resonators": [list(sp) for sp in t.resonators],
                "signs": list(t.signs),
                "ptr": [int(p) for p in t.ptr],
            }
            for t in problem.targets
        ],
    }


def _problem_from_dict(d: dict) -> DesignProblem:
    template = PwcPotential([Barrier(*row) for row in d["template"]])
    free = []
    for h in d.get("free", []):
        lo = h.get("lower")
        hi = h.get("upper")
        free.append(FreeHandle(
            field=h["field"], barriers=tuple(h["barriers"]),
            lower=-np.inf if lo is None else float(lo),
            upper=np.inf if hi is None else float(hi),
            weights=None if h.get("weights") is None else tuple(h["weights"]),
        ))
    targets = []
    for t in d.get("targets", []):
        if "k" in t:
            k = float(t["k"])
        else:
            e = float(t["energy"])
            if e <= 0:
                raise ValueError("target energy must be positive")
            k = np.sqrt(2.0 * e)
        targets.append(DesignTarget(
            k=k, resonators=tuple(tuple(sp) for sp in t["resonators"]),
            signs=tuple(t.get("signs", ())),
            ptr=tuple(bool(p) for p in t.get("ptr", ())),
        ))
    return DesignProblem(
        template=template, free=tuple(free), targets=tuple(targets),
        mode=d.get("mode", "ptr"),
        least_squares=bool(d.get("least_squares", True)),
    )


def load_problem(path) -> DesignProblem:
    """Read a problem file.

    JSON schema::

        {
          "mode": "ptr" | "zero_current",
          "least_squares": true,
          "template": [[V0, L, alpha], ...],
          "free": [{"field": "L", "barriers": [1], "lower": 0.1,
                    "upper": 3.0, "weights": null}, ...],
          "targets": [{"energy": 4.5, "resonators": [[0, 0], [1, 1]],
                       "signs": [], "ptr": []}, ...]
        }

    Targets may give "k" instead of "energy" (energy = k^2 / 2).
    """
    with open(path, encoding="utf-8") as fh:
        return _problem_from_dict(json.load(fh))


def dump_problem(problem: DesignProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_problem_to_dict(problem), fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_solution(solution: DesignSolution, path) -> None:
    """Solution file: the problem echoed back plus solved values and residuals."""
    doc = {
        "problem": _problem_to_dict(solution.problem),
        "solved": [[b.V0, b.L, b.alpha] for b in solution.potential.barriers],
        "params": [float(v) for v in solution.params],
        "conditions": [
            {"label": lab, "residual": float(val)}
            for lab, val in zip(solution.labels, solution.residuals)
        ],
        "max_residual": solution.max_residual,
        "converged": solution.converged,
        "diagnostics": (solution.diagnostics.as_dict()
                        if solution.diagnostics else None),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
