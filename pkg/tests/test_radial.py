import math

import numpy as np
import pytest
from scipy.optimize import brentq

from quasisym.errors import ConvergenceError, UsageError
from quasisym.nonlin import DerivativeBundle, NonlinearitySpec, validate_growth
from quasisym.radial import (
    ANNULUS,
    BALL,
    Controls,
    LinearSource,
    RadialProblemSpec,
    RadialSolution,
    interior_sign_changes,
    morse_counts,
    morse_index,
    nodal_report,
    read_solution,
    residuals,
    solve_radial,
    write_solution,
)


def bessel_zero_32():
    """First positive root of tan x = x, i.e. j_{3/2,1}."""
    return brentq(lambda x: math.sin(x) - x * math.cos(x), math.pi, 1.5 * math.pi, xtol=1e-15)


def linear_solution(points=10000):
    problem = RadialProblemSpec(BALL, math.pi, spec=NonlinearitySpec(constant_a=1.0, p=3))
    return solve_radial(problem, LinearSource(1.0), Controls(parameter=1.0, grid_points=points))


def test_problem_validation():
    with pytest.raises(UsageError):
        RadialProblemSpec("disk")
    with pytest.raises(UsageError):
        RadialProblemSpec(BALL, R=-1.0)
    with pytest.raises(UsageError):
        RadialProblemSpec(ANNULUS, R=1.0, R0=1.5)
    with pytest.raises(UsageError):
        RadialProblemSpec(target_nodes=-1)


def test_linear_oracle():
    sol = linear_solution()
    exact = np.sinc(sol.grid / np.pi)
    assert np.max(np.abs(sol.v - exact)) <= 1e-8
    assert abs(sol.v[-1]) <= 1e-8
    assert sol.residual_semi <= 1e-8


def test_residual_of_sampled_exact_solution():
    r = np.linspace(0, math.pi, 10001)
    v = np.sinc(r / np.pi)
    with np.errstate(invalid="ignore", divide="ignore"):
        dv = np.where(r > 0, (r * np.cos(r) - np.sin(r)) / r**2, 0.0)
    sol = RadialSolution(r, v, v, dv, 1.0, BALL, math.pi, 0.0, 3, 0)
    assert residuals(sol, LinearSource(1.0)).semi <= 1e-8


def test_zero_solution_residuals(bundle_k2p5):
    r = np.linspace(0, 1, 101)
    z = np.zeros_like(r)
    sol = RadialSolution(r, z, z, z, 0.0, BALL, 1.0, 0.0, 3, 0)
    rep = residuals(sol, bundle_k2p5)
    assert rep.semi == 0.0 and rep.quasi == 0.0


def test_semilinear_limit_order():
    b = DerivativeBundle(NonlinearitySpec(constant_a=1.0, p=3))
    problem = RadialProblemSpec(BALL, 1.0, spec=b.spec)
    res = []
    for M in (16000, 32000, 64000):
        sol = solve_radial(problem, b, Controls(grid_points=M))
        assert sol.node_count == 0 and np.all(sol.v[:-1] > 0)
        res.append(sol.residual_semi)
    assert res[-1] <= 1e-6
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 1.95)


def test_k2p5_solution(radial_k2p5, bundle_k2p5):
    sol = radial_k2p5
    assert sol.node_count == 0
    assert abs(sol.v[-1]) <= 1e-9 * np.max(np.abs(sol.v))
    assert sol.residual_semi <= 1e-5 and sol.residual_quasi <= 1e-5
    assert sol.converged()
    # transform consistency and maximum transfer
    assert np.max(np.abs(sol.u - bundle_k2p5.g(sol.v))) <= 1e-9
    assert np.argmax(sol.u) == np.argmax(sol.v)
    gp = 1 / np.sqrt(1 + sol.u**2)
    assert np.array_equal(np.abs(sol.du), np.abs(gp * sol.dv))
    eps = 1e-3
    assert np.array_equal(np.abs(sol.dv) <= eps, np.abs(sol.du) <= gp * eps)


def test_k2p5_residuals_decrease(bundle_k2p5):
    problem = RadialProblemSpec(BALL, 1.0, spec=bundle_k2p5.spec)
    sols = [solve_radial(problem, bundle_k2p5, Controls(grid_points=M)) for M in (4000, 8000)]
    assert sols[1].residual_semi < sols[0].residual_semi
    assert sols[1].residual_quasi < sols[0].residual_quasi
    ratio = [s.residual_quasi / s.residual_semi for s in sols]
    assert ratio[1] == pytest.approx(ratio[0], rel=0.1)


def test_small_tabulation_is_reported():
    b = DerivativeBundle(NonlinearitySpec(k=2, p=5), s_max=2.0)
    with pytest.raises(ConvergenceError) as err:
        solve_radial(RadialProblemSpec(BALL, 1.0, spec=b.spec), b)
    assert err.value.history


def test_morse_constant_potential_oracle():
    r = np.linspace(0, math.pi, 2001)
    rep = morse_counts(r, np.full_like(r, 2.0), 3)
    assert rep.index == 1
    assert rep.counts() == [1, 0]
    lam0, lam1 = rep.modes[0].lambda_min, rep.modes[1].lambda_min
    assert lam0 == pytest.approx(1.0 - 2.0, abs=1e-5)
    assert lam1 == pytest.approx((bessel_zero_32() / math.pi) ** 2 - 2.0, abs=1e-5)
    assert not rep.borderline and not rep.undercount


def test_morse_zero_potential():
    r = np.linspace(0, 1, 501)
    assert morse_counts(r, np.zeros_like(r), 3).index == 0


def test_morse_k2p5(radial_k2p5, bundle_k2p5):
    a = morse_index(radial_k2p5, bundle_k2p5, modes_grid=2000)
    b = morse_index(radial_k2p5, bundle_k2p5, modes_grid=4000)
    assert a.index == b.index == 1
    assert a.counts() == b.counts()
    assert all(x >= y for x, y in zip(a.counts(), a.counts()[1:]))
    doc = a.as_dict()
    assert {"l", "M_l", "n_l", "lambda_min"} <= set(doc["modes"][0])


def test_morse_fixed_lmax_threads(monkeypatch, radial_k2p5, bundle_k2p5):
    monkeypatch.setenv("QUASISYM_THREADS", "1")
    a = morse_index(radial_k2p5, bundle_k2p5, l_max=4, modes_grid=1000)
    monkeypatch.setenv("QUASISYM_THREADS", "4")
    b = morse_index(radial_k2p5, bundle_k2p5, l_max=4, modes_grid=1000)
    assert a.as_dict() == b.as_dict()
    assert a.l_max == 4 and len(a.modes) == 5


def test_positive_solution_nodal(radial_k2p5, bundle_k2p5):
    rep = nodal_report(radial_k2p5, morse_index(radial_k2p5, bundle_k2p5, modes_grid=2000))
    assert rep.nod_u == rep.nod_v == 1 and rep.satisfied


def test_one_node_solution():
    spec = NonlinearitySpec(k=2, p=5, N=3, fsign="odd-power")
    assert validate_growth(spec).nodal_window
    b = DerivativeBundle(spec, s_max=60.0)
    sol = solve_radial(RadialProblemSpec(BALL, 1.0, spec=spec, target_nodes=1), b)
    assert sol.node_count == 1 and sol.converged()
    m = morse_index(sol, b, modes_grid=4000)
    rep = nodal_report(sol, m)
    assert rep.nod_u == rep.nod_v == 2
    # the bound with nod = 2 demands m >= N + 1
    assert m.index >= 4 and rep.satisfied


def test_sign_changes():
    assert interior_sign_changes([0, 1, 2, -1, -2, 0]) == 1
    assert interior_sign_changes([0, 1, 0, 1, 0]) == 0


def test_csv_round_trip(tmp_path, radial_k2p5, bundle_k2p5):
    path = tmp_path / "sol.csv"
    write_solution(radial_k2p5, path)
    text = path.read_text()
    assert text.splitlines()[1] == "r,v,u,dv"
    back = read_solution(path)
    assert back.domain == BALL and back.N == 3 and back.node_count == 0
    assert np.allclose(back.v, radial_k2p5.v, rtol=1e-11, atol=1e-12)
    a = morse_index(radial_k2p5, bundle_k2p5, modes_grid=2000)
    b = morse_index(back, DerivativeBundle(back.meta["spec"]), modes_grid=2000)
    assert a.counts() == b.counts()
