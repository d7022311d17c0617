"""scikit-learn style wrappers around the solvers.

The solvers are not statistical models, so only the parts of the estimator
protocol that carry meaning are provided: constructor parameters exposed
through ``get_params``/``set_params``, ``fit`` storing fitted state in
trailing-underscore attributes, and ``transform``/``predict`` for evaluation.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicHermiteSpline, RegularGridInterpolator
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .nonlin import DerivativeBundle, NonlinearitySpec, Weight, g_inverse
from .planar import PlanarControls, PlanarProblemSpec, solve_planar
from .radial import BALL, Controls, RadialProblemSpec, morse_index, nodal_report, solve_radial


def _spec(est):
    psi = est.psi if isinstance(est.psi, Weight) else Weight.parse(est.psi)
    return NonlinearitySpec(k=est.k, p=est.p, psi=psi, fsign=est.fsign, N=est.N,
                            constant_a=est.constant_a)


class ChangeOfVariable(TransformerMixin, BaseEstimator):
    """``transform`` maps semi-linear values ``v`` to ``u = g(v)``."""

    def __init__(self, k=2.0, p=5.0, psi="constant:1", fsign="positive-part", N=3,
                 constant_a=None, s_max=20.0, ode_tol=1e-12):
        self.k = k
        self.p = p
        self.psi = psi
        self.fsign = fsign
        self.N = N
        self.constant_a = constant_a
        self.s_max = s_max
        self.ode_tol = ode_tol

    def fit(self, X=None, y=None):
        self.spec_ = _spec(self)
        self.bundle_ = DerivativeBundle(self.spec_, s_max=self.s_max, ode_tol=self.ode_tol)
        self.g_ = self.bundle_.g
        return self

    def transform(self, X):
        check_is_fitted(self, "g_")
        return self.g_(np.asarray(X, dtype=float))

    def inverse_transform(self, X):
        check_is_fitted(self, "g_")
        return g_inverse(self.g_, np.asarray(X, dtype=float))

    def h(self, s, order=0, x=None):
        check_is_fitted(self, "bundle_")
        return self.bundle_.h(x, np.asarray(s, dtype=float), order)


class RadialSolver(BaseEstimator):
    """Shooting solver; ``predict(r)`` returns ``u`` (or ``v``) at radii."""

    def __init__(self, domain=BALL, R=1.0, R0=0.0, target_nodes=0, k=2.0, p=5.0,
                 psi="constant:1", fsign="positive-part", N=3, constant_a=None,
                 s_max=20.0, ode_tol=1e-12, bc_tol=1e-9, max_bisections=200,
                 grid_points=16000):
        self.domain = domain
        self.R = R
        self.R0 = R0
        self.target_nodes = target_nodes
        self.k = k
        self.p = p
        self.psi = psi
        self.fsign = fsign
        self.N = N
        self.constant_a = constant_a
        self.s_max = s_max
        self.ode_tol = ode_tol
        self.bc_tol = bc_tol
        self.max_bisections = max_bisections
        self.grid_points = grid_points

    def fit(self, X=None, y=None):
        spec = _spec(self)
        self.bundle_ = DerivativeBundle(spec, s_max=self.s_max, ode_tol=self.ode_tol)
        problem = RadialProblemSpec(self.domain, self.R, self.R0, spec, self.target_nodes)
        controls = Controls(ode_tol=self.ode_tol, bc_tol=self.bc_tol,
                            max_bisections=self.max_bisections, grid_points=self.grid_points)
        self.solution_ = solve_radial(problem, self.bundle_, controls)
        return self

    def predict(self, r, semi=False):
        check_is_fitted(self, "solution_")
        sol = self.solution_
        v = CubicHermiteSpline(sol.grid, sol.v, sol.dv)(np.asarray(r, dtype=float))
        return v if semi else self.bundle_.g(v)

    def morse(self, l_max=None, modes_grid=None):
        check_is_fitted(self, "solution_")
        return morse_index(self.solution_, self.bundle_, l_max, modes_grid)

    def nodal(self, morse=None):
        morse = morse if morse is not None else self.morse()
        return nodal_report(self.solution_, morse)


class PlanarSolver(BaseEstimator):
    """Newton solver on ``(-L, L) x (0, H)``; ``predict`` interpolates ``u``."""

    def __init__(self, L=1.0, H=1.0, n1=128, n2=64, k=2.0, p=5.0, psi="constant:1",
                 fsign="positive-part", constant_a=None, s_max=20.0, tol=1e-8, max_iter=60):
        self.L = L
        self.H = H
        self.n1 = n1
        self.n2 = n2
        self.k = k
        self.p = p
        self.psi = psi
        self.fsign = fsign
        self.constant_a = constant_a
        self.s_max = s_max
        self.tol = tol
        self.max_iter = max_iter

    @property
    def N(self):
        return 2

    def fit(self, X=None, y=None):
        spec = _spec(self)
        self.bundle_ = DerivativeBundle(spec, s_max=self.s_max)
        problem = PlanarProblemSpec(self.L, self.H, self.n1, self.n2, spec)
        self.field_ = solve_planar(problem, self.bundle_,
                                   PlanarControls(tol=self.tol, max_iter=self.max_iter))
        return self

    def predict(self, X, semi=False):
        """``X`` has shape (n, 2) with columns ``x1, x2``."""
        check_is_fitted(self, "field_")
        f = self.field_
        interp = RegularGridInterpolator((f.x1, f.x2), f.v if semi else f.u)
        return interp(np.asarray(X, dtype=float))
