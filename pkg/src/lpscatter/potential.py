"""Piecewise-constant potentials and their local mirror symmetries.

A potential is a finite array of rectangular barriers on a zero background.
The module knows how to test an interval for mirror symmetry of the potential
about its center and how to enumerate every tiling of the array into
mirror-symmetric resonator units separated by free gaps.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .tolerances import TOL_V, TOL_X

__all__ = [
    "Barrier",
    "PwcPotential",
    "Subdomain",
    "Decomposition",
    "DecompositionSet",
    "PotentialFormatError",
    "is_lp_symmetric",
    "enumerate_decompositions",
    "load_potential",
    "dump_potential",
    "parse_potential",
]

MAX_DECOMPOSITIONS = 10_000


@dataclass(frozen=True)
class Barrier:
    """Rectangular potential piece of height V0 (any sign) centered at alpha."""

    V0: float
    L: float
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.V0):
            raise ValueError(f"barrier height must be finite, got {self.V0}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"barrier width must be positive, got {self.L}")
        if not np.isfinite(self.alpha):
            raise ValueError(f"barrier center must be finite, got {self.alpha}")

    @property
    def lo(self) -> float:
        return self.alpha - 0.5 * self.L

    @property
    def hi(self) -> float:
        return self.alpha + 0.5 * self.L


@dataclass(frozen=True)
class PwcPotential:
    """Ordered, non-overlapping barriers on a zero background."""

    barriers: tuple[Barrier, ...]

    def __init__(self, barriers):
        ordered = tuple(sorted(barriers, key=lambda b: b.alpha))
        for i in range(len(ordered) - 1):
            a, b = ordered[i], ordered[i + 1]
            if b.lo < a.hi - TOL_X:
                raise ValueError(
                    f"barriers {i} and {i + 1} overlap: "
                    f"[{a.lo:g}, {a.hi:g}] intersects [{b.lo:g}, {b.hi:g}]"
                )
        object.__setattr__(self, "barriers", ordered)

    @property
    def support(self) -> tuple[float, float]:
        """Interval [x_a, x_b] spanned by the barrier array."""
        if not self.barriers:
            return (0.0, 0.0)
        return (self.barriers[0].lo, self.barriers[-1].hi)

    @property
    def center(self) -> float:
        """Midpoint x_c of the array support."""
        lo, hi = self.support
        return 0.5 * (lo + hi)

    def value_at(self, x):
        """Potential value at x (scalar or array). Edges belong to the barrier."""
        xs = np.asarray(x, dtype=float)
        out = np.zeros_like(xs)
        for b in self.barriers:
            out = np.where((xs >= b.lo - TOL_X) & (xs <= b.hi + TOL_X), b.V0, out)
        if np.isscalar(x):
            return float(out)
        return out

    def breakpoints(self) -> np.ndarray:
        """Sorted barrier edges, duplicates from touching barriers merged."""
        edges = []
        for b in self.barriers:
            edges.extend((b.lo, b.hi))
        edges.sort()
        merged = []
        for e in edges:
            if not merged or e - merged[-1] > TOL_X:
                merged.append(e)
        return np.asarray(merged)

    def translated(self, dx: float) -> "PwcPotential":
        return PwcPotential([Barrier(b.V0, b.L, b.alpha + dx) for b in self.barriers])


@dataclass(frozen=True)
class Subdomain:
    """Symmetric interval [alpha - w, alpha + w] tagged by its role."""

    alpha: float
    half_width: float
    kind: str = "composite"  # "barrier" | "composite" | "gap"

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")
        if self.kind not in ("barrier", "composite", "gap"):
            raise ValueError(f"unknown subdomain kind {self.kind!r}")

    @property
    def lo(self) -> float:
        return self.alpha - self.half_width

    @property
    def hi(self) -> float:
        return self.alpha + self.half_width

    @property
    def width(self) -> float:
        return 2.0 * self.half_width


@dataclass(frozen=True)
class Decomposition:
    """One tiling of the array into resonators and the gaps between them.

    resonators and gaps are ordered left to right; barrier_spans[i] gives the
    (first, last) barrier indices covered by resonators[i].
    """

    resonators: tuple[Subdomain, ...]
    gaps: tuple[Subdomain, ...]
    barrier_spans: tuple[tuple[int, int], ...]
    index: int = 0

    @classmethod
    def from_spans(cls, pot: "PwcPotential", spans) -> "Decomposition":
        """Tiling with tightest-interval resonators over the given barrier
        index spans, gaps filling the space between them."""
        bs = pot.barriers
        res = []
        for a, b in spans:
            lo, hi = bs[a].lo, bs[b].hi
            res.append(Subdomain(0.5 * (lo + hi), 0.5 * (hi - lo),
                                 "barrier" if a == b else "composite"))
        gaps = []
        for r1, r2 in zip(res[:-1], res[1:]):
            gaps.append(Subdomain(0.5 * (r1.hi + r2.lo),
                                  0.5 * max(r2.lo - r1.hi, 0.0), "gap"))
        return cls(tuple(res), tuple(gaps), tuple(tuple(s) for s in spans), 0)

    def __len__(self) -> int:
        return len(self.resonators)

    def subdomains(self) -> tuple[Subdomain, ...]:
        """Resonators and gaps interleaved left to right (complete tiling)."""
        out = []
        for i, res in enumerate(self.resonators):
            out.append(res)
            if i < len(self.gaps):
                out.append(self.gaps[i])
        return tuple(out)


@dataclass
class DecompositionSet:
    """Enumeration result; behaves like a sequence of Decomposition."""

    decompositions: list[Decomposition] = field(default_factory=list)
    truncated: bool = False

    def __len__(self):
        return len(self.decompositions)

    def __iter__(self):
        return iter(self.decompositions)

    def __getitem__(self, i):
        return self.decompositions[i]


def _segments(pot: PwcPotential, lo: float, hi: float):
    """Breakpoint-exact piecewise structure of V on [lo, hi].

    Returns (offsets, values): offsets are segment boundaries measured from lo
    (first is 0, last is hi - lo), values[i] sits on (offsets[i], offsets[i+1]).
    """
    cuts = [lo]
    for b in pot.barriers:
        for e in (b.lo, b.hi):
            if lo + TOL_X < e < hi - TOL_X:
                cuts.append(e)
    cuts.append(hi)
    cuts = sorted(cuts)
    offs, vals = [0.0], []
    for a, b in itertools.pairwise(cuts):
        if b - a <= TOL_X:
            continue
        offs.append(b - lo)
        vals.append(pot.value_at(0.5 * (a + b)))
    return offs, vals


def is_lp_symmetric(pot: PwcPotential, sub: Subdomain, tol: float = TOL_V) -> bool:
    """True if V(x) = V(2 alpha - x) for every x in the subdomain.

    The test is breakpoint-exact: the piecewise structure inside the interval
    is mirrored about the center and compared segment by segment, so it cannot
    be fooled by probe grids that miss a thin asymmetric feature.
    """
    if sub.half_width == 0:
        return True
    offs, vals = _segments(pot, sub.lo, sub.hi)
    width = sub.width
    n = len(vals)
    for i in range(n):
        j = n - 1 - i
        # mirrored segment i runs from width - offs[i+1] to width - offs[i]
        if abs(offs[i] - (width - offs[j + 1])) > TOL_X:
            return False
        if abs(vals[i] - vals[j]) > tol:
            return False
    return True


def _run_is_palindromic(pot: PwcPotential, i: int, j: int) -> bool:
    """Mirror symmetry of the barrier run i..j (inclusive) about its midpoint."""
    bs = pot.barriers
    m = j - i + 1
    for a in range((m + 1) // 2):
        p, q = bs[i + a], bs[j - a]
        if abs(p.V0 - q.V0) > TOL_V or abs(p.L - q.L) > TOL_X:
            return False
    # spacings between consecutive barriers must mirror too
    for a in range(m - 1):
        g1 = bs[i + a + 1].lo - bs[i + a].hi
        g2 = bs[j - a].lo - bs[j - a - 1].hi
        if abs(g1 - g2) > TOL_X:
            return False
    return True


def enumerate_decompositions(pot: PwcPotential, cap: int = MAX_DECOMPOSITIONS) -> DecompositionSet:
    """All tilings of the barrier array into mirror-symmetric resonator runs.

    Resonator subdomains are the tightest intervals (barrier edge to barrier
    edge); the free stretches between consecutive resonators become gap
    subdomains centered at their midpoints. Ordered by decreasing coarseness
    (fewest resonators first), ties broken lexicographically by spans.
    Enumeration stops at `cap` tilings and sets the truncated flag.
    """
    n = len(pot.barriers)
    if n == 0:
        return DecompositionSet([Decomposition((), (), (), 0)])

    sym = {}
    for i in range(n):
        for j in range(i, n):
            if _run_is_palindromic(pot, i, j):
                sym.setdefault(i, []).append(j)

    tilings: list[tuple[tuple[int, int], ...]] = []
    truncated = False

    def walk(i: int, acc: list[tuple[int, int]]):
        nonlocal truncated
        if truncated:
            return
        if i == n:
            tilings.append(tuple(acc))
            if len(tilings) >= cap:
                truncated = True
            return
        # longest run first so coarse tilings are found before the cap hits
        for j in reversed(sym.get(i, [])):
            acc.append((i, j))
            walk(j + 1, acc)
            acc.pop()

    walk(0, [])
    tilings.sort(key=lambda t: (len(t), t))

    decs = []
    for idx, spans in enumerate(tilings):
        resonators, gaps = [], []
        for a, b in spans:
            lo = pot.barriers[a].lo
            hi = pot.barriers[b].hi
            kind = "barrier" if a == b else "composite"
            resonators.append(Subdomain(0.5 * (lo + hi), 0.5 * (hi - lo), kind))
        for r1, r2 in itertools.pairwise(resonators):
            gaps.append(Subdomain(0.5 * (r1.hi + r2.lo), 0.5 * (r2.lo - r1.hi), "gap"))
        decs.append(Decomposition(tuple(resonators), tuple(gaps), spans, idx))
    return DecompositionSet(decs, truncated)


class PotentialFormatError(ValueError):
    """Raised for malformed or inconsistent potential files."""


def parse_potential(text: str) -> PwcPotential:
    """Parse the potential file format: one `V0 L alpha` triple per line.

    Blank lines and `#` comments are ignored. Raises PotentialFormatError with
    the offending line number on malformed input and names the offending pair
    on overlapping barriers.
    """
    barriers = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PotentialFormatError(
                f"line {ln}: expected 'V0 L alpha', got {raw.strip()!r}"
            )
        try:
            v0, width, alpha = (float(p) for p in parts)
        except ValueError:
            raise PotentialFormatError(
                f"line {ln}: non-numeric field in {raw.strip()!r}"
            ) from None
        try:
            barriers.append(Barrier(v0, width, alpha))
        except ValueError as exc:
            raise PotentialFormatError(f"line {ln}: {exc}") from None
    try:
        return PwcPotential(barriers)
    except ValueError as exc:
        raise PotentialFormatError(str(exc)) from None


def load_potential(path) -> PwcPotential:
    with open(path, encoding="utf-8") as fh:
        return parse_potential(fh.read())


def dump_potential(pot: PwcPotential, path) -> None:
    """Write the potential file format; full double precision so files
    round-trip."""
    lines = ["# V0 L alpha"]
    for b in pot.barriers:
        lines.append(f"{b.V0:.17g} {b.L:.17g} {b.alpha:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
