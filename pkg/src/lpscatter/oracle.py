"""Independent verification path: direct fixed-step integration.

Integrates psi'' = (2V(x) - k^2) psi backwards from the transmitted side with
classic fourth-order Runge-Kutta on (psi, psi'), then reads the incident and
reflected amplitudes off the left boundary values. Backward marching grows the
solution under barriers, which keeps the relative error of the extracted
amplitudes small even for strongly tunneling arrays.

Piecewise-constant arrays get a step snapped per region (every breakpoint is a
node); arbitrary sampled profiles integrate on their own uniform grid. Both
run twice (h and h/2) for a Richardson error estimate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .potential import PwcPotential
from .tolerances import TOL_ORACLE_REL

__all__ = [
    "SampledPotential",
    "OracleResult",
    "CrossValidation",
    "integrate",
    "integrate_pwc",
    "sac_amplitudes_pwc",
    "cross_validate",
]

MAX_KH = 0.1  # stability/accuracy precondition on k * step


@njit(cache=True)
def _march_const(v_steps, hs, k2, u0, w0):
    """RK4 march where V is constant within each step (PWC regions)."""
    n = v_steps.shape[0]
    us = np.empty(n + 1, np.complex128)
    ws = np.empty(n + 1, np.complex128)
    us[0] = u0
    ws[0] = w0
    u, w = u0, w0
    for i in range(n):
        q = k2 - 2.0 * v_steps[i]
        h = hs[i]
        k1u = w
        k1w = -q * u
        k2u = w + 0.5 * h * k1w
        k2w = -q * (u + 0.5 * h * k1u)
        k3u = w + 0.5 * h * k2w
        k3w = -q * (u + 0.5 * h * k2u)
        k4u = w + h * k3w
        k4w = -q * (u + h * k3u)
        u = u + h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        w = w + h * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
        us[i + 1] = u
        ws[i + 1] = w
    return us, ws


@njit(cache=True)
def _march_sampled(v_beg, v_mid, v_end, h, k2, u0, w0):
    """RK4 march with V sampled at step start, midpoint and end."""
    n = v_beg.shape[0]
    us = np.empty(n + 1, np.complex128)
    ws = np.empty(n + 1, np.complex128)
    us[0] = u0
    ws[0] = w0
    u, w = u0, w0
    for i in range(n):
        q0 = k2 - 2.0 * v_beg[i]
        qm = k2 - 2.0 * v_mid[i]
        q1 = k2 - 2.0 * v_end[i]
        k1u = w
        k1w = -q0 * u
        k2u = w + 0.5 * h * k1w
        k2w = -qm * (u + 0.5 * h * k1u)
        k3u = w + 0.5 * h * k2w
        k3w = -qm * (u + 0.5 * h * k2u)
        k4u = w + h * k3w
        k4w = -q1 * (u + h * k3u)
        u = u + h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        w = w + h * (k1w + 2.0 * k2w + 2.0 * k3w + k4w) / 6.0
        us[i + 1] = u
        ws[i + 1] = w
    return us, ws


@dataclass(frozen=True)
class SampledPotential:
    """Potential sampled on a uniform grid; V must vanish at both ends."""

    x: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.V, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 5:
            raise ValueError("need matching 1D x and V with at least 5 samples")
        steps = np.diff(x)
        h = steps[0]
        if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * h:
            raise ValueError("grid must be uniform and increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential samples must be finite")
        if abs(v[0]) > 1e-12 or abs(v[-1]) > 1e-12:
            raise ValueError("potential must vanish at the grid ends")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "V", v)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @classmethod
    def from_profile(cls, fn, lo: float, hi: float, step: float, pad: float = 0.0):
        """Sample fn on [lo - pad, hi + pad]; V forced to zero in the pads.

        The interval count is rounded up to a multiple of 4 so the integrator
        can run both its h and 2h passes on exact grid nodes.
        """
        if hi <= lo or step <= 0 or pad < 0:
            raise ValueError("bad sampling window")
        a, b = lo - pad, hi + pad
        n = 4 * max(1, int(np.ceil((b - a) / (4.0 * step))))
        x = np.linspace(a, b, n + 1)
        v = np.asarray(fn(x), dtype=float)
        v = np.where((x >= lo) & (x <= hi), v, 0.0)
        return cls(x, v)


@dataclass(frozen=True)
class OracleResult:
    """Integration outcome at one momentum, with h->h/2 error estimates.

    Samples (xs, psi, dpsi) are the fine-pass values normalized to unit
    incident amplitude; psi_at/dpsi_at interpolate them with cubic Hermite
    pieces (both values and derivatives are carried, so the interpolant is
    4th-order accurate, matching the integrator).
    """

    k: float
    r: complex
    t: complex
    r_err: float
    t_err: float
    h: float
    xs: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray

    @property
    def T(self) -> float:
        return abs(self.t) ** 2

    @property
    def R(self) -> float:
        return abs(self.r) ** 2

    @property
    def T_err(self) -> float:
        return 2.0 * abs(self.t) * self.t_err

    def _interp(self, x, want_derivative: bool):
        xq = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xq.shape, dtype=complex)
        lo, hi = self.xs[0], self.xs[-1]
        k = self.k
        left = xq < lo
        right = xq > hi
        mid = ~(left | right)
        if np.any(left):
            e = np.exp(1j * k * xq[left])
            em = np.exp(-1j * k * xq[left])
            if want_derivative:
                out[left] = 1j * k * (e - self.r * em)
            else:
                out[left] = e + self.r * em
        if np.any(right):
            e = np.exp(1j * k * xq[right])
            if want_derivative:
                out[right] = 1j * k * self.t * e
            else:
                out[right] = self.t * e
        if np.any(mid):
            xm = xq[mid]
            i = np.clip(np.searchsorted(self.xs, xm, side="right") - 1, 0, len(self.xs) - 2)
            hseg = self.xs[i + 1] - self.xs[i]
            tau = (xm - self.xs[i]) / hseg
            p0, p1 = self.psi[i], self.psi[i + 1]
            m0, m1 = self.dpsi[i] * hseg, self.dpsi[i + 1] * hseg
            t2, t3 = tau * tau, tau * tau * tau
            if want_derivative:
                val = (
                    (6 * t2 - 6 * tau) * p0
                    + (3 * t2 - 4 * tau + 1) * m0
                    + (6 * tau - 6 * t2) * p1
                    + (3 * t2 - 2 * tau) * m1
                ) / hseg
            else:
                val = (
                    (2 * t3 - 3 * t2 + 1) * p0
                    + (t3 - 2 * t2 + tau) * m0
                    + (-2 * t3 + 3 * t2) * p1
                    + (t3 - t2) * m1
                )
            out[mid] = val
        if np.isscalar(x):
            return complex(out[0])
        return out

    def psi_at(self, x):
        return self._interp(x, want_derivative=False)

    def dpsi_at(self, x):
        return self._interp(x, want_derivative=True)


def _pwc_regions(pot: PwcPotential):
    """(width, V) pieces covering [x_a, x_b], left to right; no zero widths."""
    bps = pot.breakpoints()
    regions = []
    for a, b in zip(bps[:-1], bps[1:]):
        if b - a <= 0:
            continue
        regions.append((float(b - a), pot.value_at(0.5 * (a + b))))
    return regions


def _auto_step(pot: PwcPotential, k: float, rel_err: float) -> float:
    lo, hi = pot.support
    span = max(hi - lo, 1e-6)
    vmax = max((abs(b.V0) for b in pot.barriers), default=0.0)
    g = max(k, np.sqrt(max(2.0 * vmax - k * k, 0.0)), 1e-6)
    # global relative error ~ span * g^5 * h^4 / 120 for the growing solution
    h = (rel_err * 120.0 / (span * g**5)) ** 0.25
    return float(min(h, MAX_KH / (2.0 * k), span / 16.0))


def _extract(k: float, x_lo: float, u, w):
    """Split boundary values into e^{+-ikx} amplitudes at the left edge."""
    ik = 1j * k
    a = 0.5 * (u + w / ik) * np.exp(-ik * x_lo)
    b = 0.5 * (u - w / ik) * np.exp(ik * x_lo)
    return a, b


def _run_pwc(pot: PwcPotential, k: float, h_target: float, halves: int):
    """One backward march; each region gets 2**halves times its base steps."""
    regions = _pwc_regions(pot)
    x_lo, x_hi = pot.support
    v_steps = []
    h_steps = []
    xs = [x_hi]
    x = x_hi
    for wdt, v in reversed(regions):
        m = max(1, int(np.ceil(wdt / h_target))) * 2 ** halves
        hr = wdt / m
        for _ in range(m):
            v_steps.append(v)
            h_steps.append(-hr)
            x -= hr
            xs.append(x)
    v_steps = np.asarray(v_steps, dtype=float)
    h_steps = np.asarray(h_steps, dtype=float)
    u0 = np.exp(1j * k * x_hi)
    w0 = 1j * k * u0
    us, ws = _march_const(v_steps, h_steps, k * k, u0, w0)
    a, b = _extract(k, x_lo, us[-1], ws[-1])
    return a, b, np.asarray(xs), us, ws


def integrate_pwc(pot: PwcPotential, k: float, step: float | None = None,
                  rel_err: float = 1e-8) -> OracleResult:
    """Backward RK4 through a barrier array at momentum k > 0.

    The base step is chosen from rel_err (or given explicitly) and snapped per
    constant-potential region so jumps always land on nodes; a second pass at
    half the step gives the Richardson error estimates. Refuses steps with
    k*step >= 0.1.
    """
    if k <= 0:
        raise ValueError("momentum must be positive")
    if not pot.barriers:
        return OracleResult(k, 0.0 + 0j, 1.0 + 0j, 0.0, 0.0, 0.0,
                            np.array([0.0]), np.array([1.0 + 0j]),
                            np.array([1j * k]))
    if step is None:
        step = _auto_step(pot, k, rel_err)
    if k * step >= MAX_KH:
        raise ValueError(
            f"step {step:g} too coarse for k={k:g}; need step < {MAX_KH / k:g}"
        )
    a1, b1, _, _, _ = _run_pwc(pot, k, step, halves=0)     # base step h
    a2, b2, xs, us, ws = _run_pwc(pot, k, step, halves=1)  # h/2
    t1, r1 = 1.0 / a1, b1 / a1
    t2, r2 = 1.0 / a2, b2 / a2
    order = np.argsort(xs)
    return OracleResult(
        k=float(k),
        r=complex(r2),
        t=complex(t2),
        r_err=float(abs(r1 - r2) / 15.0),
        t_err=float(abs(t1 - t2) / 15.0),
        h=float(step) / 2.0,
        xs=xs[order],
        psi=(us / a2)[order],
        dpsi=(ws / a2)[order],
    )


def integrate(sp: SampledPotential, k: float) -> OracleResult:
    """Backward RK4 over a sampled profile; the grid fixes the step.

    The fine pass uses step 2h (grid nodes at start, mid, end of each step),
    the coarse pass 4h, so the interval count must be a multiple of 4;
    SampledPotential.from_profile arranges that.
    """
    if k <= 0:
        raise ValueError("momentum must be positive")
    n = sp.x.size - 1
    if n % 4:
        raise ValueError("interval count must be a multiple of 4")
    h2 = 2.0 * sp.h
    if k * h2 >= MAX_KH:
        raise ValueError(
            f"grid step {sp.h:g} too coarse for k={k:g}; "
            f"need step < {MAX_KH / (2.0 * k):g}"
        )
    x_lo, x_hi = float(sp.x[0]), float(sp.x[-1])
    u0 = np.exp(1j * k * x_hi)
    w0 = 1j * k * u0
    vr = sp.V[::-1]

    def run(stride: int):
        beg = vr[:-1:stride][: n // stride]
        mid = vr[stride // 2::stride][: n // stride]
        end = vr[stride::stride][: n // stride]
        us, ws = _march_sampled(
            np.ascontiguousarray(beg), np.ascontiguousarray(mid),
            np.ascontiguousarray(end), -float(stride) * sp.h, k * k, u0, w0
        )
        return us, ws

    us4, ws4 = run(4)
    us2, ws2 = run(2)
    a1, b1 = _extract(k, x_lo, us4[-1], ws4[-1])
    a2, b2 = _extract(k, x_lo, us2[-1], ws2[-1])
    t1, r1 = 1.0 / a1, b1 / a1
    t2, r2 = 1.0 / a2, b2 / a2
    xs = sp.x[::-2][::-1].copy()
    return OracleResult(
        k=float(k),
        r=complex(r2),
        t=complex(t2),
        r_err=float(abs(r1 - r2) / 15.0),
        t_err=float(abs(t1 - t2) / 15.0),
        h=h2 / 2.0,
        xs=xs,
        psi=(us2 / a2)[::-1].copy(),
        dpsi=(ws2 / a2)[::-1].copy(),
    )


def sac_amplitudes_pwc(pot: PwcPotential, k: float, step: float | None = None):
    """Oracle (r, t, r_tilde) triple: the mirrored array gives r_tilde."""
    res = integrate_pwc(pot, k, step)
    mirrored = PwcPotential(
        [type(b)(b.V0, b.L, -b.alpha) for b in pot.barriers]
    )
    res_m = integrate_pwc(mirrored, k, step)
    return res.r, res.t, res_m.r


@dataclass(frozen=True)
class CrossValidation:
    """Transfer-matrix vs oracle comparison over an energy grid."""

    energies: np.ndarray
    T_transfer: np.ndarray
    T_oracle: np.ndarray

    @property
    def rel_deviation(self) -> np.ndarray:
        floor = np.maximum(self.T_oracle, 1e-6)
        return np.abs(self.T_transfer - self.T_oracle) / floor

    @property
    def max_rel_deviation(self) -> float:
        return float(np.max(self.rel_deviation))

    def passed(self, tol: float = TOL_ORACLE_REL) -> bool:
        return self.max_rel_deviation < tol


def cross_validate(pot: PwcPotential, energies, step: float | None = None) -> CrossValidation:
    """Compare closed-form T(E) with oracle-integrated T(E)."""
    from .transfer import transmission_spectrum

    es = np.asarray(energies, dtype=float)
    tt = np.asarray([t for _, t in transmission_spectrum(pot, es)])
    to = np.empty_like(tt)
    for i, e in enumerate(es):
        to[i] = integrate_pwc(pot, float(np.sqrt(2.0 * e)), step).T
    return CrossValidation(es, tt, to)
