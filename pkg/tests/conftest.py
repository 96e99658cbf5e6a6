"""Shared fixtures: random barrier arrays and the designed showcase devices."""

import numpy as np
import pytest

import lpscatter as lps
from lpscatter import design as dsg


def random_potential(rng, n_min=2, n_max=8, v_max=10.0, gap_max=3.0):
    """Random array in the stress envelope: 2-8 barriers, heights in (0, 10],
    widths in [0.1, 3], inter-barrier gaps in [0, 3] (touching allowed)."""
    n = int(rng.integers(n_min, n_max + 1))
    x = float(rng.uniform(-2.0, 2.0))
    bars = []
    for _ in range(n):
        width = float(rng.uniform(0.1, 3.0))
        height = float(rng.uniform(1e-3, v_max))
        bars.append(lps.Barrier(height, width, x + width / 2.0))
        x += width + float(rng.uniform(0.0, gap_max))
    return lps.PwcPotential(bars)


def random_energies(rng, n, lo=0.5, hi=12.0):
    return rng.uniform(lo, hi, size=n)


# -- designed devices reused across test modules -----------------------------

@pytest.fixture(scope="session")
def abr_pair():
    """Two dissimilar single-barrier resonators, both transparent at one k.

    Barrier 0 sits on its closed-form resonance; barrier 1 starts detuned by
    7 percent in width and is pulled onto resonance by the solver.
    """
    e1 = dsg.abr_energy(3.0, 0.9, 1)
    k = float(np.sqrt(2.0 * e1))
    w2 = dsg.abr_width(1.2, k) * 1.07
    template = lps.PwcPotential([
        lps.Barrier(3.0, 0.9, 0.0),
        lps.Barrier(1.2, w2, 3.0),
    ])
    problem = dsg.DesignProblem(
        template,
        free=(
            dsg.FreeHandle("L", (1,), lower=0.1, upper=3.0),
            dsg.FreeHandle("alpha", (0,), lower=-1.0, upper=1.0),
            dsg.FreeHandle("alpha", (1,), lower=-1.0, upper=1.0),
        ),
        targets=(dsg.DesignTarget(k, ((0, 0), (1, 1))),),
    )
    sol = dsg.solve(problem)
    return {"solution": sol, "k": k, "problem": problem}


def _two_resonator_template():
    heights = (3.0, 2.0, 4.0, 2.0, 3.0)
    widths = (0.5, 0.4, 0.6, 0.4, 0.5)
    spacings = (0.65, 1.2, 1.2, 0.65)
    bars = []
    x = 0.0
    for h, w, g in zip(heights, widths, spacings + (0.0,)):
        bars.append(lps.Barrier(h, w, x + w / 2.0))
        x += w + g
    k1 = 3.0
    w2 = dsg.abr_width(2.0, k1)
    x = bars[-1].hi + 2.0
    for _ in range(9):
        bars.append(lps.Barrier(2.0, w2, x + w2 / 2.0))
        x += w2 + 0.8
    return lps.PwcPotential(bars)


@pytest.fixture(scope="session")
def two_resonator():
    """A 5-barrier palindrome plus a 9-barrier lattice, transparent at two
    energies at once. The lattice is reducible at the first energy (each of
    its barriers is individually transparent there) and acts as one
    irreducible unit at the second."""
    e1, e2 = 4.5, 5.5
    k1, k2 = float(np.sqrt(2 * e1)), float(np.sqrt(2 * e2))
    template = _two_resonator_template()
    spans = ((0, 4), (5, 13))
    free = (
        dsg.FreeHandle("alpha", (0, 4), weights=(-1, 1), lower=-0.5, upper=2.0),
        dsg.FreeHandle("alpha", (0, 1, 3, 4), weights=(-1, -1, 1, 1),
                       lower=-1.0, upper=2.0),
        dsg.FreeHandle("alpha", tuple(range(5, 14)),
                       weights=tuple(range(-4, 5)), lower=-0.3, upper=2.0),
    )
    problem = dsg.DesignProblem(
        template, free,
        targets=(dsg.DesignTarget(k1, spans), dsg.DesignTarget(k2, spans)),
    )
    sol = dsg.solve(problem)
    return {"solution": sol, "k1": k1, "k2": k2, "spans": spans,
            "problem": problem}


@pytest.fixture(scope="session")
def zc_device():
    """Five-resonator zero-current chain: opaque head plus four
    impedance-matched trilayers, refined through the solver."""
    k = 3.0
    pot, spans, signs = dsg.zero_current_chain(k, head=(6.0, 0.9), n_units=4)
    free = [dsg.FreeHandle("alpha", (0,))]
    for a, b in spans[1:]:
        free.append(dsg.FreeHandle("alpha", tuple(range(a, b + 1))))
    problem = dsg.DesignProblem(
        pot, tuple(free),
        targets=(dsg.DesignTarget(k, spans, signs=signs,
                                  ptr=(False,) + (True,) * 4),),
        mode="zero_current",
    )
    sol = dsg.solve(problem, seeds=[dsg.initial_params(problem)])
    return {"solution": sol, "k": k, "spans": spans, "signs": signs,
            "walk_potential": pot, "problem": problem}


@pytest.fixture(scope="session")
def zc_state(zc_device):
    sol = zc_device["solution"]
    st = lps.solve_state(sol.potential, zc_device["k"], bc="sac")
    dec = lps.Decomposition.from_spans(sol.potential, zc_device["spans"])
    return {"state": st, "dec": dec, **zc_device}
