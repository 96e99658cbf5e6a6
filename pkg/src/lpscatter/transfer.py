"""Transfer matrices and scattering amplitudes for barrier arrays.

Everything is exact closed form. Plane-wave amplitudes are kept in the global
e^{+-ikx} basis, so free stretches contribute nothing and barrier positions
enter only through phase factors. Units: hbar = m = 1, E = k^2/2.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .potential import Barrier, PwcPotential
from .tolerances import TOL_T

__all__ = [
    "TransferMatrix",
    "SMatrix",
    "ScanWarning",
    "barrier_matrix",
    "total_matrix",
    "s_matrix",
    "scatter",
    "spectrum_amplitudes",
    "transmission_spectrum",
    "find_unit_transmission",
]


def _cs(q, d):
    """Fundamental solutions of psi'' = -q psi across a displacement d.

    Returns (C, S) with C(0)=1, C'(0)=0, S(0)=0, S'(0)=1 evaluated at d
    (C is even in d, S odd; q and d broadcast): trig for q > 0, hyperbolic
    for q < 0, series near q = 0. C' = -q S and S' = C propagate derivatives.
    The hyperbolic branch never pairs large exponentials, so it is safe deep
    under a barrier.
    """
    q = np.asarray(q, dtype=float)
    d = np.asarray(d, dtype=float)
    y = q * d * d
    root = np.sqrt(np.abs(q)) * d
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        c = np.where(q >= 0, np.cos(root), np.cosh(root))
        s_num = np.where(q >= 0, np.sin(root), np.sinh(root))
        s = np.where(np.abs(q) > 0, s_num / np.sqrt(np.abs(q)), d)
    small = np.abs(y) < 1e-12  # |kappa d| < 1e-6: sinc series branch
    if np.any(small):
        c = np.where(small, 1 - y / 2 + y * y / 24, c)
        s = np.where(small, d * (1 - y / 6 + y * y / 120), s)
    return c, s


def _barrier_wz(b: Barrier, k):
    """Transfer matrix entries (w, z) of one barrier, vectorized over k."""
    k = np.asarray(k, dtype=float)
    q = k * k - 2.0 * b.V0
    c, s = _cs(q, b.L)
    w = np.exp(-1j * k * b.L) * (c + 0.5j * (k * k + q) * s / k)
    z = -1j * b.V0 * s * np.exp(-2j * k * b.alpha) / k
    return w, z


def spectrum_amplitudes(pot: PwcPotential, k):
    """Total (w, z) of the array for an array of momenta k (ordered product)."""
    k = np.asarray(k, dtype=float)
    W = np.ones(k.shape, dtype=complex)
    Z = np.zeros(k.shape, dtype=complex)
    for b in pot.barriers:
        w, z = _barrier_wz(b, k)
        W, Z = w * W + z * np.conj(Z), w * Z + z * np.conj(W)
    return W, Z


@dataclass(frozen=True)
class TransferMatrix:
    """Unimodular 2x2 map [[w, z], [z*, w*]] from left to right amplitudes."""

    w: complex
    z: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.w, self.z], [np.conj(self.z), np.conj(self.w)]], dtype=complex
        )

    @property
    def unimodularity_defect(self) -> float:
        return abs(abs(self.w) ** 2 - abs(self.z) ** 2 - 1.0)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        w = self.w * other.w + self.z * np.conj(other.z)
        z = self.w * other.z + self.z * np.conj(other.w)
        return TransferMatrix(complex(w), complex(z))


@dataclass(frozen=True)
class SMatrix:
    """Scattering amplitudes at one momentum: S = [[r, t], [t, r_tilde]]."""

    r: complex
    t: complex
    r_tilde: complex

    @property
    def T(self) -> float:
        return abs(self.t) ** 2

    @property
    def R(self) -> float:
        return abs(self.r) ** 2

    @property
    def zeta(self) -> float:
        """Global phase: arg t."""
        return float(np.angle(self.t))

    @property
    def eta(self) -> float:
        """Relative phase between r and t, folded into [0, pi).

        Both signs of the half-pi phase occur on either side of a resonance;
        the fold keeps the observable content (the |t + r|^2 cross term).
        NaN when there is no reflection to take a phase of.
        """
        if self.r == 0:
            return float("nan")
        return float((np.angle(self.r) - np.angle(self.t)) % np.pi)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.r, self.t], [self.t, self.r_tilde]], dtype=complex)

    @property
    def unitarity_defect(self) -> float:
        s = self.matrix
        return float(np.max(np.abs(s.conj().T @ s - np.eye(2))))


def barrier_matrix(b: Barrier, k: float) -> TransferMatrix:
    """Transfer matrix of a single barrier at momentum k > 0."""
    if k <= 0:
        raise ValueError("momentum must be positive")
    w, z = _barrier_wz(b, float(k))
    return TransferMatrix(complex(w), complex(z))


def total_matrix(pot: PwcPotential, k: float) -> TransferMatrix:
    """Ordered product of the barrier matrices; identity for no barriers."""
    if k <= 0:
        raise ValueError("momentum must be positive")
    W, Z = spectrum_amplitudes(pot, np.asarray(float(k)))
    return TransferMatrix(complex(W), complex(Z))


def s_matrix(m: TransferMatrix) -> SMatrix:
    """Scattering amplitudes from a transfer matrix."""
    wc = np.conj(m.w)
    t = 1.0 / wc
    return SMatrix(complex(-np.conj(m.z) / wc), complex(t), complex(m.z / wc))


def scatter(pot: PwcPotential, k: float) -> SMatrix:
    """Convenience: S-matrix of the whole array at momentum k."""
    return s_matrix(total_matrix(pot, k))


def transmission_spectrum(pot: PwcPotential, energies) -> list[tuple[float, float]]:
    """(E, T) pairs over an energy grid (E > 0)."""
    e = np.asarray(energies, dtype=float)
    if np.any(e <= 0):
        raise ValueError("energies must be positive")
    k = np.sqrt(2.0 * e)
    W, _ = spectrum_amplitudes(pot, k)
    T = 1.0 / np.abs(W) ** 2
    return list(zip(e.tolist(), T.tolist()))


class ScanWarning(UserWarning):
    """A coarse scan may have straddled a narrow resonance."""


def _reflectance(pot: PwcPotential, e: float) -> float:
    W, Z = spectrum_amplitudes(pot, np.asarray(np.sqrt(2.0 * e)))
    return float(np.abs(Z) ** 2 / np.abs(W) ** 2)


def _golden_min(f, a: float, b: float, tol: float = 1e-12) -> float:
    """Golden-section minimizer; returns the argmin to tol (abs+rel) in E."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol * max(1.0, abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def find_unit_transmission(
    pot: PwcPotential,
    e_min: float,
    e_max: float,
    n: int = 2001,
    tol: float = TOL_T,
) -> list[float]:
    """Energies in [e_min, e_max] where the array transmits perfectly.

    Coarse scan of |r|^2 on n points, golden-section refinement of each local
    minimum, keep refined energies with 1 - T < tol. Warns (ScanWarning) when
    the sampled slope pattern hints at a dip squeezed between two high
    samples, i.e. a resonance the grid may have straddled.
    """
    if not (0 < e_min < e_max):
        raise ValueError("need 0 < e_min < e_max")
    if n < 5:
        raise ValueError("scan grid too small")
    es = np.linspace(e_min, e_max, n)
    W, Z = spectrum_amplitudes(pot, np.sqrt(2.0 * es))
    R = np.abs(Z) ** 2 / np.abs(W) ** 2

    f = lambda e: _reflectance(pot, e)
    hits: list[float] = []
    for i in range(1, n - 1):
        if R[i] < R[i - 1] and R[i] <= R[i + 1]:
            e_star = _golden_min(f, es[i - 1], es[i + 1])
            if f(e_star) < tol:
                hits.append(e_star)

    # straddle heuristic: central-difference slope flips sign across one cell
    # whose endpoints are both strongly reflecting
    slope = np.gradient(R, es)
    for i in range(1, n - 2):
        if R[i] > 0.5 and R[i + 1] > 0.5 and slope[i] < 0 < slope[i + 1]:
            warnings.warn(
                f"possible unresolved transmission dip between E={es[i]:.6g} "
                f"and E={es[i + 1]:.6g}; increase the scan density",
                ScanWarning,
                stacklevel=2,
            )

    # merge refinement duplicates from adjacent brackets
    out: list[float] = []
    for e in sorted(hits):
        if not out or e - out[-1] > 1e-9 * max(1.0, e):
            out.append(e)
    return out
