"""Design layer: closed-form helpers, residual assembly, the damped
least-squares solver, verification, and the deterministic chain builder."""

import json

import numpy as np
import pytest

import lpscatter as lps
from lpscatter import Barrier, PwcPotential
from lpscatter import design as dsg
from lpscatter.design import (
    DesignNoConvergence,
    DesignProblem,
    DesignTarget,
    FreeHandle,
    InfeasibleParams,
    abr_energy,
    abr_width,
    pair_spacing,
    quarter_wave_triple,
    zero_current_chain,
)


def test_abr_closed_forms_invert():
    rng = np.random.default_rng(31)
    for _ in range(20):
        v0 = float(rng.uniform(0.2, 6.0))
        width = float(rng.uniform(0.3, 2.8))
        n = int(rng.integers(1, 4))
        e = abr_energy(v0, width, n)
        k = float(np.sqrt(2 * e))
        assert abs(abr_width(v0, k, n) - width) < 1e-12
    with pytest.raises(ValueError, match="propagate"):
        abr_width(3.0, 2.0)  # k^2 = 4 < 2 V0 = 6


def test_pair_spacing_kills_off_diagonal():
    rng = np.random.default_rng(32)
    for _ in range(10):
        v0 = float(rng.uniform(0.5, 6.0))
        width = float(rng.uniform(0.3, 2.0))
        k = float(rng.uniform(0.8, 3.5))
        d = pair_spacing(v0, width, k)
        assert d > 0
        pot = PwcPotential([Barrier(v0, width, 0.0),
                            Barrier(v0, width, width + d)])
        m = lps.total_matrix(pot, k)
        assert abs(m.z) < 1e-10
        assert abs(lps.s_matrix(m).T - 1.0) < 1e-10


def test_quarter_wave_triple_free_width():
    k = 2.6
    kap = 1.1
    for core in (0.37, 1.0, 2.49, 6.2):
        pot = quarter_wave_triple(k, kap, core, x0=-1.3)
        m = lps.total_matrix(pot, k)
        assert abs(m.z) < 1e-12  # transparent whatever the core width
        st = lps.solve_state(pot, k, with_samples=False)
        core_lo = pot.barriers[1].lo + 0.05
        core_hi = pot.barriers[1].hi - 0.05
        xs = np.linspace(core_lo, core_hi, 101)
        rho = np.abs(st.psi_at(xs)) ** 2
        # pure forward wave in the core: flat density at the impedance ratio
        assert np.max(rho) / np.min(rho) - 1.0 < 1e-10
        assert abs(np.mean(rho) - k / kap) < 1e-8
    with pytest.raises(ValueError):
        quarter_wave_triple(2.0, 2.5, 1.0)
    with pytest.raises(ValueError):
        quarter_wave_triple(2.0, 1.0, -1.0)


def test_zero_current_chain_default_signs():
    k = 3.0
    pot, spans, signs = zero_current_chain(k, head=(6.0, 0.9), n_units=4)
    assert len(spans) == 5 and len(signs) == 9
    st = lps.solve_state(pot, k, bc="sac")
    assert abs(st.j) < 1e-12 * k
    dec = lps.Decomposition.from_spans(pot, spans)
    cls = lps.classify_state(st, dec)
    assert cls.tag == "LP_EIGENSTATE"
    assert cls.s_values == signs
    assert cls.lam == 1


def test_zero_current_chain_mixed_signs():
    k = 2.2
    req = (-1, 1, -1, 1, 1, -1, 1, 1, 1)
    pot, spans, signs = zero_current_chain(k, head=(5.0, 1.1), signs=req)
    assert signs == req
    st = lps.solve_state(pot, k, bc="sac")
    dec = lps.Decomposition.from_spans(pot, spans)
    cls = lps.classify_state(st, dec)
    assert cls.tag == "LP_EIGENSTATE"
    assert cls.s_values == req
    assert cls.lam == int(np.prod(req)) == -1
    assert abs(np.exp(2j * k * pot.center) - cls.lam) < 1e-9


def test_zero_current_chain_head_truncation_gives_ptr():
    k = 3.0
    pot, spans, signs = zero_current_chain(k, head=(6.0, 0.9), n_units=4)
    a, b = spans[1][0], spans[-1][1]
    tail = PwcPotential(pot.barriers[a:b + 1])
    sm = lps.scatter(tail, k)
    assert 1.0 - sm.T < 1e-12


def test_zero_current_chain_rejects_weak_head():
    with pytest.raises(ValueError, match="head"):
        zero_current_chain(3.0, head=(0.05, 0.2))


def test_free_handle_validation():
    with pytest.raises(ValueError, match="field"):
        FreeHandle("width", (0,))
    with pytest.raises(ValueError, match="at least one"):
        FreeHandle("L", ())
    with pytest.raises(ValueError, match="only meaningful for alpha"):
        FreeHandle("V0", (0, 1), weights=(1, -1))
    with pytest.raises(ValueError, match="length mismatch"):
        FreeHandle("alpha", (0, 1), weights=(1,))
    with pytest.raises(ValueError, match="bounds"):
        FreeHandle("L", (0,), lower=2.0, upper=1.0)


def test_design_target_validation():
    with pytest.raises(ValueError, match="positive"):
        DesignTarget(-1.0, ((0, 0),))
    with pytest.raises(ValueError, match="reversed"):
        DesignTarget(2.0, ((1, 0),))
    with pytest.raises(ValueError, match="disjoint"):
        DesignTarget(2.0, ((0, 2), (1, 3)))
    t = DesignTarget(2.0, ((0, 1),))
    assert abs(t.energy - 2.0) < 1e-15


def test_design_problem_validation():
    pot = PwcPotential([Barrier(2.0, 1.0, 0.0), Barrier(2.0, 1.0, 3.0)])
    with pytest.raises(ValueError, match="two handles"):
        DesignProblem(pot, (FreeHandle("L", (0,)), FreeHandle("L", (0,))),
                      (DesignTarget(2.0, ((0, 0),)),))
    with pytest.raises(ValueError, match="exceeds template"):
        DesignProblem(pot, (FreeHandle("L", (0,)),),
                      (DesignTarget(2.0, ((0, 5),)),))
    with pytest.raises(ValueError, match="signs"):
        DesignProblem(pot, (FreeHandle("alpha", (0,)),),
                      (DesignTarget(2.0, ((0, 0), (1, 1)), signs=(1,)),),
                      mode="zero_current")
    # exact mode demands a square system
    with pytest.raises(ValueError, match="exact mode"):
        DesignProblem(pot, (FreeHandle("L", (0,)),),
                      (DesignTarget(2.0, ((0, 0),)),), least_squares=False)
    ok = DesignProblem(pot, (FreeHandle("L", (0,)), FreeHandle("alpha", (0,))),
                       (DesignTarget(2.0, ((0, 0),)),), least_squares=False)
    assert ok.n_params == ok.n_residuals == 2


def test_initial_and_apply_params():
    pot = PwcPotential([Barrier(2.0, 1.0, 0.0), Barrier(3.0, 1.0, 2.0)])
    problem = DesignProblem(
        pot,
        (FreeHandle("V0", (0,)), FreeHandle("L", (1,)),
         FreeHandle("alpha", (0, 1), weights=(-1, 1))),
        (DesignTarget(2.0, ((0, 1),)),),
    )
    x0 = dsg.initial_params(problem)
    assert np.allclose(x0, [2.0, 1.0, 0.0])
    pot2 = dsg.apply_params(problem, np.array([2.5, 1.2, 0.3]))
    assert pot2.barriers[0].V0 == 2.5
    assert pot2.barriers[1].L == 1.2
    assert np.isclose(pot2.barriers[0].alpha, -0.3)
    assert np.isclose(pot2.barriers[1].alpha, 2.3)
    # squeezing the pair until they overlap must raise the typed error
    with pytest.raises(InfeasibleParams):
        dsg.apply_params(problem, np.array([2.5, 1.2, -0.8]))


def test_residual_vector_single_barrier_resonance():
    v0 = 1.2
    k = 2.0
    w_res = abr_width(v0, k)
    pot = PwcPotential([Barrier(v0, 1.0, 0.0)])
    problem = DesignProblem(pot, (FreeHandle("L", (0,)),),
                            (DesignTarget(k, ((0, 0),)),))
    at_res = dsg.residual_vector(problem, np.array([w_res]))
    assert np.max(np.abs(at_res)) < 1e-12
    off = dsg.residual_vector(problem, np.array([w_res * 1.1]))
    assert np.max(np.abs(off)) > 1e-3


def test_condition_magnitude_labels():
    pot = PwcPotential([Barrier(2.0, 1.0, 0.0), Barrier(2.0, 1.0, 3.0)])
    problem = DesignProblem(
        pot, (FreeHandle("alpha", (1,)),),
        (DesignTarget(2.0, ((0, 0), (1, 1))),))
    labels, mags = dsg.condition_magnitudes(
        problem, dsg.initial_params(problem))
    assert list(labels) == ["z[target0,res0]", "z[target0,res1]"]
    assert len(mags) == 2 and all(m >= 0 for m in mags)


def test_solve_two_single_barrier_resonators(abr_pair):
    sol = abr_pair["solution"]
    k = abr_pair["k"]
    assert sol.converged
    assert sol.max_residual < 1e-10
    # the solved width sits on the closed-form resonance
    solved_w = sol.potential.barriers[1].L
    assert abs(solved_w - abr_width(1.2, k)) < 1e-8
    # both resonators transparent standalone, and so is the pair
    for a, b in ((0, 0), (1, 1)):
        unit = PwcPotential(sol.potential.barriers[a:b + 1])
        assert 1.0 - lps.scatter(unit, k).T < 1e-10
    assert 1.0 - lps.scatter(sol.potential, k).T < 1e-10
    assert sol.diagnostics.seed_log[0][1] == "converged"


def test_solver_reports_no_convergence():
    # below-barrier energy: a single barrier has no transparency there
    pot = PwcPotential([Barrier(5.0, 1.0, 0.0)])
    problem = DesignProblem(
        pot, (FreeHandle("L", (0,), lower=0.2, upper=3.0),),
        (DesignTarget(1.5, ((0, 0),)),))  # E = 1.125 < V0
    with pytest.raises(DesignNoConvergence) as exc_info:
        dsg.solve(problem, n_random=3)
    err = exc_info.value
    assert err.best_residual > 1e-3
    assert len(err.seed_log) == 4  # default seed + 3 random restarts


def test_default_seeds_deterministic():
    pot = PwcPotential([Barrier(2.0, 1.0, 0.0)])
    problem = DesignProblem(pot, (FreeHandle("L", (0,), lower=0.5, upper=2.0),),
                            (DesignTarget(2.0, ((0, 0),)),))
    s1 = dsg.default_seeds(problem, rng_seed=5, n_random=4)
    s2 = dsg.default_seeds(problem, rng_seed=5, n_random=4)
    assert len(s1) == 5
    for a, b in zip(s1, s2):
        assert np.array_equal(a, b)
    s3 = dsg.default_seeds(problem, rng_seed=6, n_random=4)
    assert any(not np.array_equal(a, b) for a, b in zip(s1, s3))


def test_verify_passes_then_fails_on_perturbation(abr_pair):
    sol = abr_pair["solution"]
    report = dsg.verify(sol)
    assert report.passed
    assert all(c.passed for c in report.checks)
    # independently re-solved geometry with a 1 percent width error must fail
    bad_bars = list(sol.potential.barriers)
    b = bad_bars[1]
    bad_bars[1] = Barrier(b.V0, b.L * 1.01, b.alpha)
    bad = dsg.DesignSolution(
        problem=sol.problem,
        potential=PwcPotential(bad_bars),
        params=sol.params,
        labels=sol.labels,
        residuals=sol.residuals,
        max_residual=sol.max_residual,
        diagnostics=sol.diagnostics,
        converged=sol.converged,
    )
    report_bad = dsg.verify(bad)
    assert not report_bad.passed


def test_verify_zero_current_device(zc_state):
    report = dsg.verify(zc_state["solution"])
    assert report.passed
    names = [c.name for c in report.checks]
    assert any("r_tilde" in n or "r -" in n or "zero" in n for n in names)


def test_solved_resonator_repetition_stays_transparent(abr_pair):
    # transparent units compose: repeating a solved resonator with arbitrary
    # spacing keeps perfect transmission at the design momentum
    sol = abr_pair["solution"]
    k = abr_pair["k"]
    b = sol.potential.barriers[1]
    bars, x = [], 0.0
    for gap in (0.0, 1.7, 0.4):
        bars.append(Barrier(b.V0, b.L, x + 0.5 * b.L))
        x += b.L + gap
    chain = PwcPotential(bars)
    assert 1.0 - lps.scatter(chain, k).T < 1e-10


def test_interchange_and_translation_invariance(abr_pair):
    sol = abr_pair["solution"]
    k = abr_pair["k"]
    b0, b1 = sol.potential.barriers

    def located_resonance(pot):
        e0 = 0.5 * k * k
        hits = lps.find_unit_transmission(pot, 0.9 * e0, 1.1 * e0, n=4001)
        assert hits, "resonance lost"
        return min(hits, key=lambda e: abs(e - e0))

    e_ref = located_resonance(sol.potential)
    # translate the second resonator within its gap budget
    moved = PwcPotential([b0, Barrier(b1.V0, b1.L, b1.alpha + 0.37)])
    assert abs(located_resonance(moved) - e_ref) / e_ref < 1e-8
    # interchange the two resonators
    gap = b1.lo - b0.hi
    first = Barrier(b1.V0, b1.L, b0.lo + 0.5 * b1.L)
    second = Barrier(b0.V0, b0.L, first.hi + gap + 0.5 * b0.L)
    swapped = PwcPotential([first, second])
    assert abs(located_resonance(swapped) - e_ref) / e_ref < 1e-8


def test_problem_json_round_trip(tmp_path, abr_pair):
    problem = abr_pair["problem"]
    path = tmp_path / "problem.json"
    dsg.dump_problem(problem, path)
    back = dsg.load_problem(path)
    assert back.mode == problem.mode
    assert back.least_squares == problem.least_squares
    assert len(back.free) == len(problem.free)
    for ha, hb in zip(back.free, problem.free):
        assert (ha.field, ha.barriers, ha.lower, ha.upper) == \
            (hb.field, hb.barriers, hb.lower, hb.upper)
    assert len(back.targets) == len(problem.targets)
    for ta, tb in zip(back.targets, problem.targets):
        assert abs(ta.k - tb.k) < 1e-15
        assert ta.resonators == tb.resonators
    for ba, bb in zip(back.template.barriers, problem.template.barriers):
        assert ba == bb


def test_solution_json_schema(tmp_path, abr_pair):
    path = tmp_path / "solution.json"
    dsg.dump_solution(abr_pair["solution"], path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"problem", "solved", "params", "conditions",
                        "max_residual", "converged", "diagnostics"}
    assert doc["converged"] is True
    assert doc["max_residual"] < 1e-10
    assert all({"label", "residual"} == set(c) for c in doc["conditions"])
