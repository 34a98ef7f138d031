import numpy as np
import pytest

from cranpool import fp, metrics, subsolver
from cranpool.fp import AffineCon, AnchorViolationError, Manifest, RateCap, SurrogateSystem
from conftest import make_scenario, make_channels, feasible_design
from test_metrics import scalar_instance


def tiny_system(records, anchor, objective_names, manifest):
    return SurrogateSystem(
        block="power", manifest=manifest, records=records,
        anchor=np.asarray(anchor, dtype=float),
        objective_idx=np.array([manifest.idx(n) for n in objective_names]),
        w_tot=1.0, shared_active=False)


def test_closed_form_cap_is_attained():
    # max R s.t. R <= 2 c sqrt(w) - c^2 / alpha with alpha capped: the
    # solver must return the bound value
    mf = Manifest()
    r = mf.add_scalar("R")
    a = mf.add_scalar("alpha")
    c, w, f_cap = 0.8, 0.4, 1.3
    records = [
        RateCap("12b", "rate_cap.P.0.0", r, c, a, None, w),
        AffineCon("12b", "rate_bound.P.0.0", np.array([a]), np.array([1.0]), f_cap),
    ]
    anchor = np.array([2 * c * np.sqrt(w) - c ** 2 / f_cap - 1e-3, f_cap])
    system = tiny_system(records, anchor, ["R"], mf)
    res = subsolver.solve(system)
    expected = 2 * c * np.sqrt(w) - c ** 2 / f_cap
    assert res.status == subsolver.STATUS_OPTIMAL
    assert res.objective == pytest.approx(expected, abs=1e-7)


def test_warm_start_already_optimal():
    mf = Manifest()
    r = mf.add_scalar("R")
    records = [AffineCon("12b", "rate_cap.P.0.0", np.array([r]),
                         np.array([1.0]), 0.25)]
    system = tiny_system(records, np.array([0.25]), ["R"], mf)
    res = subsolver.solve(system)
    assert res.objective == pytest.approx(0.25, abs=1e-9)


def test_anchor_violation_raises():
    mf = Manifest()
    r = mf.add_scalar("R")
    records = [AffineCon("12b", "rate_cap.P.0.0", np.array([r]),
                         np.array([1.0]), 0.25)]
    system = tiny_system(records, np.array([0.5]), ["R"], mf)
    with pytest.raises(AnchorViolationError, match="anchor violation"):
        subsolver.solve(system)


def test_scalar_power_subproblem_matches_grid_search(rng):
    # one UE, one RU, generous capacities: the power step should push
    # v to (nearly) the power budget; compare with a fine 1-D grid on the
    # same surrogate objective
    sc, ch = scalar_instance()
    sc2 = make_scenario(n_rus=(1, 1), n_ues=(1, 1), subset=(0, 0),
                        n_antennas=((1,), (1,)), fronthaul=1e12,
                        backhaul=1e12, gamma=1e12)
    ch2 = make_channels(sc2, seed=3)
    d = metrics.zero_design(sc2, metrics.BandAllocation((5e7, 5e7), 0.0))
    d.power[0][0, 0] = 0.3
    d.power[1][0, 0] = 0.3
    for i in range(2):
        d.quantizer[i][0][0] = 4.0 * np.eye(1)
    metrics.refresh_rates(ch2, d)
    aux = fp.update_aux(ch2, sc2, d)
    system = fp.build_surrogates(ch2, sc2, d, aux, fp.BLOCK_POWER)
    res = subsolver.solve(system)
    v_opt = res.x[system.manifest.idx("v.P.0.0")]
    # grid-search the true surrogate-feasible optimum over v in [0, sqrt(p)]
    mf = system.manifest
    best_v, best_obj = 0.0, -np.inf
    for v in np.linspace(0.0, np.sqrt(sc2.p_max), 2001):
        x = res.x.copy()
        x[mf.idx("v.P.0.0")] = v
        # rate cap: R = min(bound from alpha-QT); evaluate records directly
        bound_rec = next(r for r in system.records if r.tag == "rate_bound.P.0.0")
        xa = x.copy()
        xa[mf.idx("alpha.P.0.0")] = 0.0
        alpha = bound_rec.evaluate(xa)
        if alpha <= 0:
            continue
        cap_rec = next(r for r in system.records if r.tag == "rate_cap.P.0.0")
        c = cap_rec.c
        rmax = 2 * c * np.sqrt(cap_rec.w_fixed) - c ** 2 / alpha
        if rmax > best_obj:
            best_obj, best_v = rmax, v
    assert v_opt == pytest.approx(best_v, abs=2e-3 * np.sqrt(sc2.p_max))
    # and with generous capacities the optimum hugs the power budget
    assert v_opt >= 0.999 * np.sqrt(sc2.p_max)


def test_never_regresses_across_fp_steps(rng, small_instance):
    sc, ch, d = small_instance
    for block in fp.BLOCKS:
        aux = fp.update_aux(ch, sc, d)
        system = fp.build_surrogates(ch, sc, d, aux, block)
        res = subsolver.solve(system)
        assert res.objective >= system.objective(system.anchor) - 1e-6


def test_backends_agree(small_instance):
    sc, ch, d = small_instance
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_POWER)
    res_a = subsolver.solve(system, backend=subsolver.ClarabelBackend())
    res_b = subsolver.solve(system, backend=subsolver.CvxpyBackend("CLARABEL"))
    assert res_a.objective == pytest.approx(res_b.objective, rel=1e-5, abs=1e-7)


def test_deterministic_solutions(small_instance):
    sc, ch, d = small_instance
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_QUANTIZERS)
    res1 = subsolver.solve(system)
    res2 = subsolver.solve(system)
    assert np.array_equal(res1.x, res2.x)


def test_solution_feasible_for_original_constraints(rng, small_instance):
    # the stricter-surrogate guarantee: applying a block solution keeps the
    # original constraint set satisfied
    from cranpool import optimizer
    sc, ch, d = small_instance
    plan = optimizer.scheme_plan("optimized-pooling")
    design = d
    for block in fp.BLOCKS:
        aux = fp.update_aux(ch, sc, design)
        system = fp.build_surrogates(ch, sc, design, aux, block)
        res = subsolver.solve(system)
        if not res.used_warm_start:
            design = optimizer._apply_solution(ch, sc, design, system,
                                               res.x, block, plan, 1.0)
        rep = metrics.constraint_report(ch, sc, design)
        assert rep.max_relative_violation() <= 1e-6


def test_subproblem_dump_text(small_instance):
    sc, ch, d = small_instance
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_BANDS)
    sp = subsolver.ConvexSubproblem.from_system(system)
    text = sp.describe()
    assert "variables" in text and "constraints" in text
    assert "[12h]" in text
