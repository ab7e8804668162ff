import numpy as np
import pytest

from polydesc import milp
from oracles import lp_by_vertex_enumeration, milp_by_enumeration

BACKENDS = ["dense", "highs"]


def single_var_model():
    m = milp.LinearModel()
    x = m.add_var("x", 0, 10)
    m.add_constr({x: 1.0}, milp.GREATER_EQUAL, 2.0)
    m.set_objective({x: 1.0})
    return m


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_variable_lp_with_dual(backend):
    sol = milp.solve_lp(single_var_model(), backend=backend)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(2.0, abs=1e-9)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_box_lp(backend):
    m = milp.LinearModel()
    x = m.add_var("x", 0, 1)
    y = m.add_var("y", 0, 1)
    m.add_constr({x: 1.0, y: 1.0}, milp.LESS_EQUAL, 1.5)
    m.set_objective({x: -1.0, y: -1.0})
    sol = milp.solve_lp(m, backend=backend)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-1.5, abs=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_and_unbounded(backend):
    m = milp.LinearModel()
    x = m.add_var("x", 0, 1)
    m.add_constr({x: 1.0}, milp.GREATER_EQUAL, 2.0)
    m.set_objective({x: 1.0})
    assert milp.solve_lp(m, backend=backend).status == "infeasible"

    m = milp.LinearModel()
    x = m.add_var("x", 0, np.inf)
    m.set_objective({x: -1.0})
    assert milp.solve_lp(m, backend=backend).status == "unbounded"


def random_lp(rng, n=5, rows=5):
    m = milp.LinearModel()
    for j in range(n):
        m.add_var(f"x{j}", 0, np.inf)
    a = rng.normal(size=(rows, n))
    b = rng.uniform(0.5, 3.0, size=rows)
    for i in range(rows):
        m.add_constr((np.arange(n), a[i]), milp.LESS_EQUAL, float(b[i]))
    for j in range(n):  # box rows keep the oracle's polytope bounded
        m.add_constr({j: 1.0}, milp.LESS_EQUAL, 2.0)
    c = rng.normal(size=n)
    m.set_objective((np.arange(n), c))
    return m, c, a, b


@pytest.mark.parametrize("backend", BACKENDS)
def test_random_lps_against_vertex_enumeration(backend):
    rng = np.random.default_rng(7)
    for _ in range(25):
        m, c, a, b = random_lp(rng)
        n = len(c)
        full_a = np.vstack([a, np.eye(n), -np.eye(n)])
        full_b = np.concatenate([b, np.full(n, 2.0), np.zeros(n)])
        oracle_obj, _ = lp_by_vertex_enumeration(c, full_a, full_b)
        sol = milp.solve_lp(m, backend=backend)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(oracle_obj, abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_lp_strong_duality_and_complementary_slackness(backend):
    rng = np.random.default_rng(11)
    for _ in range(100):
        m, c, a, b = random_lp(rng, n=4, rows=6)
        sol = milp.solve_lp(m, backend=backend)
        assert sol.status == "optimal"
        _, a_full, senses, b_full, *_ = m.arrays()
        # duals certify optimality: y.b equals the primal objective
        assert sol.duals @ b_full == pytest.approx(sol.objective, abs=1e-6)
        # primal feasibility and complementary slackness
        lhs = a_full @ sol.x
        for i, sense in enumerate(senses):
            assert sense == milp.LESS_EQUAL
            assert lhs[i] <= b_full[i] + 1e-7
            assert abs(sol.duals[i] * (b_full[i] - lhs[i])) <= 1e-6
            assert sol.duals[i] <= 1e-9


@pytest.mark.parametrize("backend", BACKENDS)
def test_dual_signs_by_sense(backend):
    m = milp.LinearModel()
    x = m.add_var("x", 0, 10)
    y = m.add_var("y", 0, 10)
    r_ge = m.add_constr({x: 1.0}, milp.GREATER_EQUAL, 1.0)
    r_le = m.add_constr({x: 1.0, y: 1.0}, milp.LESS_EQUAL, 5.0)
    m.set_objective({x: 2.0, y: -1.0})
    sol = milp.solve_lp(m, backend=backend)
    assert sol.status == "optimal"
    assert sol.duals[r_ge] >= -1e-9
    assert sol.duals[r_le] <= 1e-9


@pytest.mark.parametrize("backend", BACKENDS)
def test_binary_milp_example(backend):
    m = milp.LinearModel()
    a = m.add_var("a", 0, 1, integer=True)
    b = m.add_var("b", 0, 1, integer=True)
    m.add_constr({a: 1.0, b: 1.0}, milp.LESS_EQUAL, 1.5)
    m.set_objective({a: -1.0, b: -1.0})
    oracle_obj, _ = milp_by_enumeration(m)
    assert oracle_obj == -1.0
    sol = milp.solve_milp(m, backend=backend)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)
    assert sol.bound <= sol.objective + 1e-9
    assert sol.gap <= 1e-6


def random_binary_model(rng, n=12, rows=6):
    m = milp.LinearModel()
    for j in range(n):
        m.add_var(f"x{j}", 0, 1, integer=True)
    for _ in range(rows):
        coefs = rng.integers(-4, 5, size=n).astype(float)
        sense = rng.choice([milp.LESS_EQUAL, milp.GREATER_EQUAL])
        rhs = float(rng.integers(-3, 6))
        m.add_constr((np.arange(n), coefs), milp.LESS_EQUAL if sense == milp.LESS_EQUAL else sense, rhs)
    m.set_objective((np.arange(n), rng.integers(-5, 6, size=n).astype(float)))
    return m


@pytest.mark.parametrize("backend", BACKENDS)
def test_random_binary_milps_match_enumeration(backend):
    rng = np.random.default_rng(3)
    solved = 0
    for _ in range(20):
        m = random_binary_model(rng)
        oracle_obj, _ = milp_by_enumeration(m)
        sol = milp.solve_milp(m, backend=backend)
        if np.isinf(oracle_obj):
            assert sol.status == "infeasible"
        else:
            assert sol.status == "optimal"
            assert sol.objective == pytest.approx(oracle_obj, abs=1e-6)
            assert sol.bound <= sol.objective + 1e-6
            frac = np.abs(sol.x - np.round(sol.x))
            assert frac.max() <= 1e-6
            solved += 1
    assert solved >= 10


@pytest.mark.parametrize("backend", BACKENDS)
def test_mixed_integer_and_continuous(backend):
    # min -x - 10 y with y binary, x continuous: x + 4 y <= 5
    m = milp.LinearModel()
    x = m.add_var("x", 0, 10)
    y = m.add_var("y", 0, 1, integer=True)
    m.add_constr({x: 1.0, y: 4.0}, milp.LESS_EQUAL, 5.0)
    m.set_objective({x: -1.0, y: -10.0})
    sol = milp.solve_milp(m, backend=backend)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-11.0, abs=1e-6)
    assert sol.x[y] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_determinism(backend):
    rng = np.random.default_rng(5)
    m = random_binary_model(rng, n=10)
    first = milp.solve_milp(m, backend=backend)
    second = milp.solve_milp(m, backend=backend)
    assert first.status == second.status
    if first.status == "optimal":
        assert first.objective == second.objective
    lp1 = milp.solve_lp(m, backend=backend)
    lp2 = milp.solve_lp(m, backend=backend)
    if lp1.status == "optimal":
        assert lp1.objective == lp2.objective


def test_dense_handles_degenerate_cycling_lp():
    # Beale's cycling example; the Bland fallback must terminate it
    m = milp.LinearModel()
    xs = [m.add_var(f"x{j}", 0, np.inf) for j in range(4)]
    m.add_constr((np.array(xs), np.array([0.25, -60.0, -1 / 25.0, 9.0])), milp.LESS_EQUAL, 0.0)
    m.add_constr((np.array(xs), np.array([0.5, -90.0, -1 / 50.0, 3.0])), milp.LESS_EQUAL, 0.0)
    m.add_constr({xs[2]: 1.0}, milp.LESS_EQUAL, 1.0)
    m.set_objective((np.array(xs), np.array([-0.75, 150.0, -0.02, 6.0])))
    dense = milp.solve_lp(m, backend="dense")
    highs = milp.solve_lp(m, backend="highs")
    assert dense.status == highs.status == "optimal"
    assert dense.objective == pytest.approx(highs.objective, abs=1e-9)


def test_dense_incumbent_stream():
    rng = np.random.default_rng(9)
    m = random_binary_model(rng, n=10)
    seen = []
    sol = milp.solve_milp(m, backend="dense",
                          on_incumbent=lambda x, obj: seen.append(obj))
    if sol.status == "optimal":
        assert seen, "no incumbents reported"
        assert seen[-1] == pytest.approx(sol.objective)
        assert all(a >= b - 1e-12 for a, b in zip(seen, seen[1:]))  # improving


def test_time_limit_returns_incumbent_or_empty():
    rng = np.random.default_rng(13)
    m = random_binary_model(rng, n=16, rows=10)
    sol = milp.solve_milp(m, backend="dense", time_limit_s=0.01)
    assert sol.status in ("optimal", "infeasible", "time_limit", "feasible")
    if sol.status == "time_limit" and sol.x is not None:
        assert sol.bound <= sol.objective + 1e-9


def test_model_validation_errors():
    m = milp.LinearModel()
    m.add_var("x", 0, 1)
    with pytest.raises(milp.MilpError):
        m.add_constr({5: 1.0}, milp.LESS_EQUAL, 1.0)
    with pytest.raises(milp.MilpError):
        m.add_constr({0: 1.0}, "<", 1.0)
    with pytest.raises(milp.MilpError):
        m.add_var("bad", 3, 2)
    with pytest.raises(milp.MilpError):
        m.add_var("unbounded_int", 0, np.inf, integer=True)
    with pytest.raises(milp.MilpError):
        milp.solve_lp(m, backend="mystery")
