from fractions import Fraction

from htsp.params import (
    decrease_forms,
    grid_oracle,
    mixed_rates,
    optimize,
    solve_amounts,
)

PUBLISHED = {
    "lambda": 0.4715,
    "tau": 0.0355,
    "gamma": 0.0401,
    "beta": 1 / 12,
    "delta": 0.0008475,
    "epsilon": 0.001695,
}


def test_optimize_reproduces_published_values():
    res = optimize()
    f = res.as_floats()
    assert abs(f["lambda"] - PUBLISHED["lambda"]) <= 1e-4
    assert abs(f["tau"] - PUBLISHED["tau"]) <= 1e-4
    assert abs(f["gamma"] - PUBLISHED["gamma"]) <= 1e-4
    assert abs(f["beta"] - PUBLISHED["beta"]) <= 1e-4
    assert abs(f["delta"] - PUBLISHED["delta"]) <= 1e-4
    assert abs(f["epsilon"] - PUBLISHED["epsilon"]) <= 2e-4


def test_optimize_runs_fast():
    import time

    t0 = time.time()
    optimize()
    assert time.time() - t0 < 1.0


def test_epsilon_is_twice_delta():
    res = optimize()
    assert res.epsilon == 2 * res.delta


def test_binding_constraints_reported():
    res = optimize()
    assert any(name.startswith("form:") for name in res.binding)
    assert "beta<=cap" in res.binding


def test_lp_against_grid_oracle_at_extremes():
    best = float(optimize().delta)
    for lam in (Fraction(0), Fraction(1)):
        sol = solve_amounts(lam)
        grid = grid_oracle(lam)
        # the grid maximum is feasible, so it can only sit below the LP value
        assert grid <= float(sol.delta) + 1e-12
        assert float(sol.delta) - grid <= 1e-3
        # the optimum over the mix dominates both endpoints
        assert float(sol.delta) <= best + 1e-12


def test_case_list_is_complete():
    forms = decrease_forms(Fraction(1, 2))
    assert len(forms) == 11
    names = [n for n, _ in forms]
    assert sum(1 for n in names if n.startswith("cycle/")) == 4
    assert sum(1 for n in names if n.startswith("nonspecial/")) == 3
    assert sum(1 for n in names if n.startswith("k5/")) == 3
    assert sum(1 for n in names if n.startswith("special/")) == 1


def test_dominated_cycle_case_is_dominated():
    # the all-internal-cycle-parent case can never be the unique minimum
    for lam in (Fraction(0), Fraction(1, 2), Fraction(1)):
        forms = dict(decrease_forms(lam))
        end_pair = forms["cycle/end-pair-sources"]
        dominated = forms["cycle/all-internal-cycle-parent"]
        # both are multiples of beta; the dominated one is twice as large
        assert dominated[2] == 2 * end_pair[2]


def test_mixed_rates_interpolate():
    p0, p_sp0, p_hs0 = mixed_rates(Fraction(0))
    p1, p_sp1, p_hs1 = mixed_rates(Fraction(1))
    assert (p0, p_sp0, p_hs0) == (Fraction(1, 18), Fraction(1, 36), Fraction(1, 21))
    assert (p1, p_sp1) == (Fraction(1, 12), Fraction(128, 6561))
    assert p_hs1 == Fraction(1, 12)
    pm, _, _ = mixed_rates(Fraction(1, 2))
    assert pm == (Fraction(1, 12) + Fraction(1, 18)) / 2


def test_solve_amounts_respects_constraints():
    for lam in (Fraction(0), Fraction(4715, 10000), Fraction(1)):
        sol = solve_amounts(lam)
        assert 0 <= sol.tau <= sol.gamma <= sol.beta <= Fraction(1, 12)
        assert sol.beta >= 2 * sol.tau and sol.beta >= 2 * sol.gamma
        # delta equals the smallest decrease form at the solution
        vals = [
            ct * sol.tau + cg * sol.gamma + cb * sol.beta
            for _, (ct, cg, cb) in decrease_forms(lam)
        ]
        assert min(vals) == sol.delta
