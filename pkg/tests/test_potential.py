"""Barrier arrays: validation, parsing, symmetry tests, tiling enumeration."""

import numpy as np
import pytest

import lpscatter as lps
from lpscatter import (
    Barrier,
    PwcPotential,
    PotentialFormatError,
    Subdomain,
    enumerate_decompositions,
    is_lp_symmetric,
    parse_potential,
    dump_potential,
    load_potential,
)

from conftest import random_potential


def test_barrier_validation():
    with pytest.raises(ValueError):
        Barrier(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        Barrier(1.0, -0.5, 0.0)
    with pytest.raises(ValueError):
        Barrier(np.inf, 1.0, 0.0)
    with pytest.raises(ValueError):
        Barrier(1.0, 1.0, np.nan)
    b = Barrier(-2.5, 1.0, 3.0)  # wells are legal
    assert b.lo == 2.5 and b.hi == 3.5


def test_overlap_rejected_and_named():
    with pytest.raises(ValueError, match="barriers 0 and 1 overlap"):
        PwcPotential([Barrier(1.0, 2.0, 0.0), Barrier(1.0, 2.0, 1.5)])
    # touching is fine
    pot = PwcPotential([Barrier(1.0, 2.0, 0.0), Barrier(2.0, 2.0, 2.0)])
    assert len(pot.barriers) == 2


def test_barriers_sorted_by_center():
    pot = PwcPotential([Barrier(1.0, 0.5, 5.0), Barrier(2.0, 0.5, -1.0)])
    assert pot.barriers[0].alpha == -1.0
    assert pot.support == (-1.25, 5.25)
    assert pot.center == 2.0


def test_value_at_scalar_and_array():
    pot = PwcPotential([Barrier(3.0, 1.0, 0.0), Barrier(-1.0, 2.0, 4.0)])
    assert pot.value_at(0.0) == 3.0
    assert pot.value_at(10.0) == 0.0
    assert pot.value_at(4.9) == -1.0
    vals = pot.value_at(np.array([-0.49, 0.51, 3.1, 6.0]))
    assert np.allclose(vals, [3.0, 0.0, -1.0, 0.0])


def test_breakpoints_merged_for_touching():
    pot = PwcPotential([Barrier(1.0, 1.0, 0.0), Barrier(2.0, 1.0, 1.0)])
    bp = pot.breakpoints()
    assert np.allclose(bp, [-0.5, 0.5, 1.5])


def test_translation():
    pot = PwcPotential([Barrier(1.0, 1.0, 0.0), Barrier(2.0, 0.5, 2.0)])
    moved = pot.translated(3.0)
    assert np.isclose(moved.center, pot.center + 3.0)
    assert all(np.isclose(a.alpha + 3.0, b.alpha)
               for a, b in zip(pot.barriers, moved.barriers))
    assert all(a.V0 == b.V0 and a.L == b.L
               for a, b in zip(pot.barriers, moved.barriers))


def test_parse_round_trip(tmp_path):
    rng = np.random.default_rng(42)
    for _ in range(20):
        pot = random_potential(rng)
        path = tmp_path / "pot.txt"
        dump_potential(pot, path)
        back = load_potential(path)
        for a, b in zip(pot.barriers, back.barriers):
            assert a == b  # %.17g survives the round trip exactly


def test_parse_comments_and_blanks():
    pot = parse_potential("""
# leading comment
1.0 2.0 0.0   # trailing comment

2.5 0.5 4.0
""")
    assert len(pot.barriers) == 2
    assert pot.barriers[1].V0 == 2.5


def test_parse_errors_carry_line_numbers():
    with pytest.raises(PotentialFormatError, match="line 2"):
        parse_potential("1.0 1.0 0.0\n2.0 oops 4.0\n")
    with pytest.raises(PotentialFormatError, match="line 3"):
        parse_potential("1.0 1.0 0.0\n\n2.0 1.0\n")
    with pytest.raises(PotentialFormatError, match="line 1"):
        parse_potential("1.0 -3.0 0.0\n")
    with pytest.raises(PotentialFormatError, match="overlap"):
        parse_potential("1.0 2.0 0.0\n1.0 2.0 1.0\n")


def test_is_lp_symmetric_basic():
    pot = PwcPotential([Barrier(2.0, 1.0, 0.0)])
    # whole barrier, any window centered on it
    assert is_lp_symmetric(pot, Subdomain(0.0, 0.5, "barrier"))
    assert is_lp_symmetric(pot, Subdomain(0.0, 2.0, "composite"))
    # off-center window inside the constant top is still symmetric
    assert is_lp_symmetric(pot, Subdomain(0.2, 0.25, "composite"))
    # window straddling one edge asymmetrically is not
    assert not is_lp_symmetric(pot, Subdomain(0.5, 0.3, "composite"))
    # pure vacuum window is symmetric
    assert is_lp_symmetric(pot, Subdomain(8.0, 1.0, "gap"))


def test_is_lp_symmetric_palindrome():
    bars = [Barrier(1.0, 0.5, 0.0), Barrier(3.0, 1.0, 2.0), Barrier(1.0, 0.5, 4.0)]
    pot = PwcPotential(bars)
    lo, hi = pot.support
    assert is_lp_symmetric(pot, Subdomain(2.0, 0.5 * (hi - lo), "composite"))
    # drop the mirror partner
    pot2 = PwcPotential(bars[:2])
    lo, hi = pot2.support
    c = 0.5 * (lo + hi)
    assert not is_lp_symmetric(pot2, Subdomain(c, 0.5 * (hi - lo), "composite"))


def test_enumerate_single_and_pair():
    single = PwcPotential([Barrier(2.0, 1.0, 0.0)])
    ds = enumerate_decompositions(single)
    assert len(ds) == 1
    assert ds[0].barrier_spans == ((0, 0),)

    twin = PwcPotential([Barrier(2.0, 1.0, 0.0), Barrier(2.0, 1.0, 3.0)])
    ds = enumerate_decompositions(twin)
    spans = sorted(d.barrier_spans for d in ds)
    assert spans == [((0, 0), (1, 1)), ((0, 1),)]

    uneven = PwcPotential([Barrier(2.0, 1.0, 0.0), Barrier(1.0, 1.0, 3.0)])
    ds = enumerate_decompositions(uneven)
    assert len(ds) == 1  # mismatched pair only tiles barrier by barrier


def test_enumerate_counts_follow_block_compositions():
    # identical evenly spaced barriers: every contiguous run is palindromic,
    # so tilings = compositions of n = 2**(n-1)
    for n in (3, 4, 5):
        bars = [Barrier(2.0, 1.0, 2.5 * i) for i in range(n)]
        ds = enumerate_decompositions(PwcPotential(bars))
        assert len(ds) == 2 ** (n - 1)
        assert not ds.truncated


def test_enumerate_gap_bookkeeping():
    bars = [Barrier(2.0, 1.0, 0.0), Barrier(2.0, 1.0, 3.0), Barrier(2.0, 1.0, 6.0)]
    ds = enumerate_decompositions(PwcPotential(bars))
    by_spans = {d.barrier_spans: d for d in ds}
    d3 = by_spans[((0, 0), (1, 1), (2, 2))]
    assert len(d3.gaps) == 2
    assert all(g.kind == "gap" for g in d3.gaps)
    assert np.isclose(d3.gaps[0].lo, 0.5) and np.isclose(d3.gaps[0].hi, 2.5)
    subs = d3.subdomains()
    assert [s.kind for s in subs] == ["barrier", "gap", "barrier", "gap", "barrier"]
    # the tiling covers the support without holes
    assert np.isclose(subs[0].lo, -0.5) and np.isclose(subs[-1].hi, 6.5)
    for a, b in zip(subs[:-1], subs[1:]):
        assert np.isclose(a.hi, b.lo)


def test_enumerate_truncation_flag():
    bars = [Barrier(2.0, 1.0, 2.5 * i) for i in range(15)]
    ds = enumerate_decompositions(PwcPotential(bars), cap=100)
    assert ds.truncated
    assert len(ds) == 100


def test_decomposition_from_spans_zero_width_gap():
    pot = PwcPotential([Barrier(1.0, 1.0, 0.0), Barrier(2.0, 1.0, 1.0)])
    dec = lps.Decomposition.from_spans(pot, ((0, 0), (1, 1)))
    assert len(dec.gaps) == 1
    assert dec.gaps[0].width == 0.0
    assert dec.resonators[0].hi == dec.resonators[1].lo


def test_empty_potential():
    pot = PwcPotential([])
    assert pot.support == (0.0, 0.0)
    assert pot.value_at(1.0) == 0.0
    assert len(enumerate_decompositions(pot)) == 1
