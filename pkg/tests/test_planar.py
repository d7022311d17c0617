import numpy as np
import pytest

from quasisym.errors import UsageError
from quasisym.nonlin import DerivativeBundle, NonlinearitySpec, Weight
from quasisym.planar import (
    PlanarField,
    PlanarProblemSpec,
    ScatteredField,
    radial_as_field,
    read_field,
    reflect,
    reflection_diagnostics,
    solve_planar,
    symmetry_metrics,
    write_field,
)


def test_problem_validation():
    spec = NonlinearitySpec(N=2)
    with pytest.raises(UsageError):
        PlanarProblemSpec(n1=33, spec=spec)
    with pytest.raises(UsageError):
        PlanarProblemSpec(L=0.0, spec=spec)
    with pytest.raises(UsageError):
        PlanarProblemSpec(spec=NonlinearitySpec(N=2, psi=Weight.radial_power(1.0)))


@pytest.mark.parametrize("n1,n2", [(16, 8), (32, 16)])
def test_manufactured_linear(n1, n2, bundle_k2p5_planar):
    L, H = 1.0, 0.7
    problem = PlanarProblemSpec(L, H, n1, n2, bundle_k2p5_planar.spec)
    X1, X2 = np.meshgrid(problem.x1, problem.x2, indexing="ij")
    exact = (L * L - X1**2) * X2 * (H - X2)
    q = 2 * X2 * (H - X2) + 2 * (L * L - X1**2)
    fld = solve_planar(problem, bundle_k2p5_planar, source=q)
    # the 5-point stencil is exact on this biquadratic
    assert np.max(np.abs(fld.v - exact)) <= 1e-12


def test_k2p5_solution(planar_k2p5):
    f = planar_k2p5
    assert not f.trivial
    assert f.residual <= 1e-8
    assert np.min(f.v) >= 0 and np.max(f.v) > 1
    assert np.all(f.v[0, :] == 0) and np.all(f.v[:, -1] == 0)
    assert f.history[-1] == f.residual


def test_zero_is_a_discrete_solution(bundle_k2p5_planar):
    problem = PlanarProblemSpec(1.0, 1.0, 8, 4, bundle_k2p5_planar.spec)
    zero = np.zeros((9, 5))
    fld = solve_planar(problem, bundle_k2p5_planar, source=zero)
    assert fld.trivial and fld.residual == 0.0
    assert np.all(bundle_k2p5_planar.unit(np.zeros(3)) == 0)


def test_even_weight_solution():
    spec = NonlinearitySpec(k=2, p=5, N=2, psi=Weight.even_x1("lorentzian", 2.0))
    b = DerivativeBundle(spec)
    f = solve_planar(PlanarProblemSpec(1.0, 1.0, 32, 16, spec), b)
    assert f.residual <= 1e-8
    assert symmetry_metrics(f).even_deviation <= 1e-10


def test_reflection_symmetric_case(planar_k2p5, bundle_k2p5_planar):
    rep = reflection_diagnostics(planar_k2p5, bundle_k2p5_planar)
    assert rep.involution_exact and rep.antisymmetry_error == 0.0
    assert rep.slope_discrepancy <= max(1e-6, 10 * planar_k2p5.residual)
    assert rep.slope_violation <= 1e-10
    assert rep.two_param_violation <= 1e-10
    assert rep.comparison_violation <= 1e-10
    assert rep.decomposition_error <= 1e-12
    assert rep.conclusions_claimed
    assert rep.two_param_grid.shape == (21, 21)


def test_exactly_even_field_gives_zero_curves(planar_k2p5, bundle_k2p5_planar):
    v = 0.5 * (planar_k2p5.v + reflect(planar_k2p5.v))
    f = PlanarField(planar_k2p5.x1, planar_k2p5.x2, v, bundle_k2p5_planar.g(v), 0.0)
    rep = reflection_diagnostics(f, bundle_k2p5_planar)
    assert np.all(rep.u_plus == 0) and np.all(rep.u_minus == 0)
    for curve in (rep.psi_plus_neg, rep.psi_minus_neg, rep.psi_plus_pos, rep.psi_minus_pos):
        assert np.all(curve == 0)
    assert np.all(rep.two_param_grid == 0)


def test_manufactured_asymmetric_field(planar_k2p5, bundle_k2p5_planar):
    X1, X2 = planar_k2p5.mesh()
    w = 3 * np.cos(np.pi * X1 / 2) * np.sin(np.pi * X2) * (1 + 0.5 * X1)
    f = PlanarField(planar_k2p5.x1, planar_k2p5.x2, w, bundle_k2p5_planar.g(w), np.nan)
    rep = reflection_diagnostics(f, bundle_k2p5_planar, solution=False)
    assert rep.as_dict()["label"] == "non-solution diagnostics"
    assert not rep.conclusions_claimed
    assert rep.max_negative_part > 0
    # structural identities hold regardless of the PDE
    assert rep.involution_exact and rep.antisymmetry_error == 0.0
    assert rep.decomposition_error <= 1e-9 * np.max(np.abs(rep.two_param_grid))
    assert symmetry_metrics(f).even_deviation > 0.1


def test_radial_field_symmetry(radial_k2p5):
    f = radial_as_field(radial_k2p5, n_theta=72, stride=200)
    m = symmetry_metrics(f, n_dirs=360)
    assert m.even_deviation == 0.0
    assert m.fs_deviation == 0.0
    rep = symmetry_metrics(radial_k2p5)
    assert rep.even_deviation == 0.0 and rep.fs_deviation == 0.0
    assert rep.critical_points[0] == (0.0,)


def test_asymmetric_disk_field():
    def fn(x1, x2):
        return x2 * (1 - np.hypot(x1, x2)) * (1 + x1)

    f = ScatteredField.polar(fn, np.linspace(0.1, 0.9, 9), 120)
    assert symmetry_metrics(f).even_deviation > 0


def test_scattered_without_labels():
    x1 = np.array([-1.0, 1.0, -0.5, 0.5])
    x2 = np.array([0.2, 0.2, 0.3, 0.3])
    f = ScatteredField(x1, x2, np.array([1.0, 1.0, 2.0, 2.5]))
    assert symmetry_metrics(f).even_deviation == pytest.approx(0.5 / 2.5)


def test_planar_critical_points(planar_k2p5):
    m = symmetry_metrics(planar_k2p5)
    assert m.critical_points
    h1 = planar_k2p5.steps[0]
    assert m.axis_distance <= h1 + 1e-12
    assert m.dx1_on_T["nonneg_somewhere"]


def test_field_round_trip(tmp_path, planar_k2p5, bundle_k2p5_planar):
    path = tmp_path / "f.csv"
    write_field(planar_k2p5, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# mesh n1=32 n2=16")
    assert lines[2] == "x1,x2,v,u"
    back, spec = read_field(path)
    assert spec == bundle_k2p5_planar.spec
    assert back.v.shape == planar_k2p5.v.shape
    assert np.allclose(back.v, planar_k2p5.v, rtol=1e-11, atol=1e-14)
    assert symmetry_metrics(back).even_deviation <= 1e-10
