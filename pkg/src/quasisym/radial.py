"""Radial solutions on balls and annuli, their Morse index and nodal count.

The semi-linear profile solves ``v'' + (N-1)/r v' + h(r, v) = 0`` and is
found by shooting on the centre value (ball) or the inner slope (annulus).
The quasi-linear profile is ``u = g(v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import io as qio
from .errors import ConvergenceError, ShootingOverflowError, UsageError
from .nonlin import DerivativeBundle, NonlinearitySpec
from .sturm import smallest_eigenvalues, spherical_multiplicity, sturm_count

BALL = "ball"
ANNULUS = "annulus"
R_START_FRACTION = 1e-4
OVERFLOW = 1e8
L_CAP = 50


class LinearSource:
    """``h(r, v) = coef * v``; a stand-in for a bundle in oracle problems."""

    needs_t = False

    def __init__(self, coef=1.0):
        self.coef = float(coef)

    def radial(self, r, v, order=0):
        v = np.asarray(v, dtype=float)
        if order == 0:
            return self.coef * v
        if order == 1:
            return np.full_like(v, self.coef)
        return np.zeros_like(v)

    def scalar(self, r, v, t):
        return self.coef * v

    def series(self, alpha, t_alpha, r, N):
        c1 = -self.coef * alpha / (2 * N)
        c2 = -self.coef * c1 / (4 * (N + 2))
        return alpha + c1 * r**2 + c2 * r**4, 2 * c1 * r + 4 * c2 * r**3


class _BundleSource:
    needs_t = True

    def __init__(self, bundle):
        if bundle.spec.psi.kind == "even-x1":
            raise UsageError("radial problems need a constant or radial-power weight")
        self.bundle = bundle
        psi = bundle.spec.psi
        if psi.is_constant:
            c = psi.value
            self._psi = lambda r: c
        else:
            c, alpha = psi.value, psi.alpha
            self._psi = lambda r: c * abs(r) ** alpha

    def radial(self, r, v, order=0):
        return self.bundle.h(np.asarray(r, dtype=float), v, order)

    def scalar(self, r, v, t):
        return self._psi(r) * self.bundle.scalar_unit_from_t(t)

    def series(self, alpha, t_alpha, r, N):
        """Regular expansion of the profile about the centre of a ball."""
        psi = self.bundle.spec.psi
        h0 = float(self.bundle.unit_from_t(t_alpha, 0))
        if psi.is_constant:
            h0 *= psi.value
            h1 = psi.value * float(self.bundle.unit_from_t(t_alpha, 1))
            c1 = -h0 / (2 * N)
            c2 = -h1 * c1 / (4 * (N + 2))
            return alpha + c1 * r**2 + c2 * r**4, 2 * c1 * r + 4 * c2 * r**3
        e = psi.alpha + 2
        c = -psi.value * h0 / (e * (psi.alpha + N))
        return alpha + c * r**e, e * c * r ** (e - 1)


def as_source(obj):
    if isinstance(obj, DerivativeBundle):
        return _BundleSource(obj)
    if isinstance(obj, (_BundleSource, LinearSource)):
        return obj
    raise UsageError(f"expected a DerivativeBundle or LinearSource, got {type(obj).__name__}")


@dataclass(frozen=True)
class RadialProblemSpec:
    domain: str = BALL
    R: float = 1.0
    R0: float = 0.0
    spec: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    target_nodes: int = 0

    def __post_init__(self):
        if self.domain not in (BALL, ANNULUS):
            raise UsageError(f"domain must be 'ball' or 'annulus', got {self.domain!r}")
        if not self.R > 0:
            raise UsageError(f"R must be positive, got {self.R}")
        if self.domain == ANNULUS and not (0 < self.R0 < self.R):
            raise UsageError(f"annulus needs 0 < R0 < R, got R0={self.R0}, R={self.R}")
        if int(self.target_nodes) != self.target_nodes or self.target_nodes < 0:
            raise UsageError("target_nodes must be a nonnegative integer")

    @property
    def N(self):
        return int(self.spec.N)

    @property
    def r_inner(self):
        return 0.0 if self.domain == BALL else float(self.R0)


@dataclass
class Controls:
    ode_tol: float = 1e-12
    bc_tol: float = 1e-9
    max_bisections: int = 200
    grid_points: int = 16000
    # fixes the shooting parameter and skips the search (linear problems)
    parameter: float | None = None


@dataclass(frozen=True, eq=False)
class RadialSolution:
    grid: np.ndarray
    v: np.ndarray
    u: np.ndarray
    dv: np.ndarray
    parameter: float
    domain: str
    R: float
    R0: float
    N: int
    node_count: int
    residual_semi: float | None = None
    residual_quasi: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def du(self):
        """Radial derivative of u by the chain rule ``u' = g'(v) v'``."""
        gp = self.meta.get("gprime")
        if gp is None:
            return self.dv.copy()
        return gp * self.dv

    def table(self):
        return np.column_stack([self.grid, self.v, self.u, self.dv])

    def relative_residuals(self):
        """Residuals divided by the largest term of each equation (at least 1)."""
        ss, sq = self.meta.get("residual_scale", (1.0, 1.0))
        semi = None if self.residual_semi is None else self.residual_semi / ss
        quasi = None if self.residual_quasi is None else self.residual_quasi / sq
        return semi, quasi

    def converged(self, tol=1e-4):
        return all(r is None or r <= tol for r in self.relative_residuals())


@dataclass(frozen=True)
class ResidualReport:
    semi: float
    quasi: float | None
    points: int
    semi_scale: float = 1.0
    quasi_scale: float = 1.0

    @property
    def ratio(self):
        if self.quasi is None or self.semi == 0:
            return None
        return self.quasi / self.semi


# --------------------------------------------------------------------------
# shooting
# --------------------------------------------------------------------------

def _integrate(problem, source, g, param, r_eval, ode_tol, dense=False):
    """Integrate the initial value problem for one shooting parameter.

    Returns (solve_ivp result, zero count on (r_start, R]).
    """
    N = problem.N
    R = float(problem.R)
    if problem.domain == BALL:
        r0 = R_START_FRACTION * R
        alpha = float(param)
        t_alpha = float(g(alpha)) if source.needs_t else 0.0
        v0, w0 = source.series(alpha, t_alpha, r0, N)
    else:
        r0 = float(problem.R0)
        v0, w0 = 0.0, float(param)
    y0 = [v0, w0]
    if source.needs_t:
        y0.append(float(g(v0)))
        sqrt_a = source.bundle.scalar_sqrt_a

        def rhs(r, y):
            v, w, t = y
            return [w, -(N - 1) / r * w - source.scalar(r, v, t), w / sqrt_a(t)]
    else:
        def rhs(r, y):
            v, w = y[0], y[1]
            return [w, -(N - 1) / r * w - source.scalar(r, v, 0.0)]

    def crossing(r, y):
        return y[0]

    def overflow(r, y):
        return OVERFLOW - abs(y[0])

    overflow.terminal = True
    # the (N-1)/r term makes w small near the centre; keep its absolute error tiny
    atol = 1e-3 * ode_tol * max(1.0, abs(v0), abs(w0))
    ev = None
    if r_eval is not None:
        ev = r_eval[r_eval >= r0]
    sol = solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=ode_tol, atol=atol,
                    t_eval=ev, events=[crossing, overflow], dense_output=dense)
    if sol.status == 1 or sol.t_events[1].size:
        raise ShootingOverflowError(
            f"shooting trajectory exceeded {OVERFLOW:g} at r={sol.t[-1]:.6g} (parameter {param:.12g})")
    if not sol.success:
        raise ConvergenceError(f"shooting integration failed: {sol.message}")
    zeros = sol.t_events[0]
    # a crossing at r0 itself belongs to the annulus boundary condition
    zeros = zeros[zeros > r0 * (1 + 1e-9) + 1e-14]
    return sol, int(zeros.size), r0


def _endpoint(sol):
    return float(sol.y[0, -1])


def solve_radial(problem, bundle, controls=None):
    """Shooting solution with ``problem.target_nodes`` interior zeros.

    ``bundle`` is a :class:`DerivativeBundle` (or :class:`LinearSource` for
    oracle problems).  The parameter is bracketed by doubling, refined by
    bisection on the zero count and polished by Brent's method on the
    boundary value.
    """
    controls = controls or Controls()
    source = as_source(bundle)
    g = source.bundle.g if source.needs_t else None
    n = int(problem.target_nodes)
    tol = controls.ode_tol
    smax = g.s_max if g is not None else math.inf

    def count(param):
        _, z, _ = _integrate(problem, source, g, param, None, tol)
        return z

    def boundary_value(param):
        sol, _, _ = _integrate(problem, source, g, param, None, tol)
        return _endpoint(sol)

    if controls.parameter is not None:
        param = float(controls.parameter)
    else:
        param = _shoot(problem, count, boundary_value, n, smax, controls.max_bisections)

    return _assemble(problem, source, g, param, controls)


def _shoot(problem, count, boundary_value, n, smax, max_bisections):
    ball = problem.domain == BALL
    history = []
    lo, z_lo = 0.0, 0
    hi = min(1.0, 0.5 * smax) if ball else 1.0
    while True:
        z_hi = count(hi)
        history.append((hi, z_hi))
        if z_hi >= n + 1:
            break
        if ball and hi >= smax:
            raise ConvergenceError(
                f"no sign change bracketed for the centre value in (0, {smax:.6g}]; the "
                f"required v-amplitude exceeds the g tabulation (raise s_max)", history)
        if len(history) > 200:
            raise ConvergenceError("parameter bracketing did not terminate", history)
        lo, z_lo = hi, z_hi
        hi = min(2 * hi, smax) if ball else 2 * hi
    if z_lo > n:
        raise ConvergenceError(f"lower bracket already has {z_lo} > {n} zeros", history)
    # bisect until the bracket separates exactly n and n + 1 zeros
    for _ in range(max_bisections):
        if z_lo == n and z_hi == n + 1 and lo > 0:
            break
        mid = 0.5 * (lo + hi)
        zm = count(mid)
        history.append((mid, zm))
        if zm >= n + 1:
            hi, z_hi = mid, zm
        else:
            lo, z_lo = mid, zm
    else:
        raise ConvergenceError(
            f"bisection did not separate nodal classes in {max_bisections} steps "
            f"(scanned [{lo:.6g}, {hi:.6g}])", history)
    f_lo, f_hi = boundary_value(lo), boundary_value(hi)
    if f_lo == 0.0:
        return lo
    if f_lo * f_hi > 0:
        raise ConvergenceError(f"boundary value does not change sign on [{lo:.12g}, {hi:.12g}]",
                               history)
    return brentq(boundary_value, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps,
                  maxiter=200)


def _assemble(problem, source, g, param, controls):
    M = int(controls.grid_points)
    if M < 4:
        raise UsageError("grid_points must be >= 4")
    ra, rb = problem.r_inner, float(problem.R)
    grid = np.linspace(ra, rb, M + 1)
    sol, _, r0 = _integrate(problem, source, g, param, grid, controls.ode_tol)
    v = np.empty_like(grid)
    dv = np.empty_like(grid)
    nfirst = grid.size - sol.t.size
    v[nfirst:] = sol.y[0]
    dv[nfirst:] = sol.y[1]
    if source.needs_t:
        u = np.empty_like(grid)
        u[nfirst:] = sol.y[2]
    if nfirst:
        # points inside the series-start disc
        t_alpha = float(g(param)) if source.needs_t else 0.0
        v[:nfirst], dv[:nfirst] = source.series(float(param), t_alpha, grid[:nfirst], problem.N)
    if abs(v[-1]) > controls.bc_tol * max(1.0, np.max(np.abs(v))):
        raise ConvergenceError(f"boundary value {v[-1]:.3e} exceeds bc_tol={controls.bc_tol:g}")
    meta = {"spec": None, "source": "linear" if not source.needs_t else "bundle"}
    if source.needs_t:
        # u = g(v) carried along the trajectory by u' = v' / sqrt(a(u))
        if nfirst:
            u[:nfirst] = g(v[:nfirst])
        a, _ = source.bundle.spec.a_derivs(u, 0)
        meta["gprime"] = 1.0 / np.sqrt(a[0])
        meta["spec"] = source.bundle.spec
        meta["s_max"] = float(g.s_max)
    else:
        u = v.copy()
    sol_obj = RadialSolution(grid, v, u, dv, float(param), problem.domain, float(problem.R),
                             float(problem.R0), problem.N, interior_sign_changes(v), meta=meta)
    rep = residuals(sol_obj, source)
    object.__setattr__(sol_obj, "residual_semi", rep.semi)
    object.__setattr__(sol_obj, "residual_quasi", rep.quasi)
    meta["residual_scale"] = (rep.semi_scale, rep.quasi_scale)
    return sol_obj


def interior_sign_changes(values):
    vals = np.asarray(values, dtype=float)[1:-1]
    scale = np.max(np.abs(vals)) if vals.size else 0.0
    nz = vals[np.abs(vals) > 1e-14 * scale] if scale > 0 else vals[:0]
    if nz.size < 2:
        return 0
    return int(np.count_nonzero(np.signbit(nz[1:]) != np.signbit(nz[:-1])))


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------

def _laplacian(d1, r, N):
    """Radial Laplacian from the first derivative: central difference for
    the second derivative, exact first-order term."""
    hstep = r[1] - r[0]
    d2 = (d1[2:] - d1[:-2]) / (2 * hstep)
    return d2 + (N - 1) / r[1:-1] * d1[1:-1]


def _term_scale(*terms):
    """Size of the largest term of an equation, at least 1."""
    return max(1.0, *(float(np.max(np.abs(t))) for t in terms))


def residuals(sol, bundle):
    """Max-norm residuals of both forms at interior nodes.

    The second derivative is a central difference of the stored radial
    derivative, so both residuals decay like the square of the grid
    spacing.  Semi-linear form ``-v'' - (N-1)/r v' - h(r, v)``; quasi-linear
    form ``-a(u) (u'' + (N-1)/r u') - a'(u) u'^2 / 2 - f(r, u)``, which is
    ``-div(a(u) Du) + a'(u)|Du|^2/2 - f`` for radial u, with ``u' = g'(v) v'``.
    """
    source = as_source(bundle)
    r = np.asarray(sol.grid, dtype=float)
    if r.size < 5:
        raise UsageError("residuals need at least 5 grid points")
    N = sol.N
    ri = r[1:-1]
    hv = source.radial(ri, sol.v[1:-1], 0)
    lap_v = _laplacian(sol.dv, r, N)
    semi_res = -lap_v - hv
    semi = float(np.max(np.abs(semi_res)))
    semi_scale = _term_scale(lap_v, hv)
    quasi, quasi_scale = None, 1.0
    if source.needs_t:
        spec = source.bundle.spec
        u = np.asarray(sol.u, dtype=float)
        (A0, A1), _ = spec.a_derivs(u, 1)
        du = sol.dv / np.sqrt(A0)
        f = source.bundle.weight(ri) * spec.f_derivs(u[1:-1], 0)[0][0]
        diffusion = A0[1:-1] * _laplacian(du, r, N)
        gradient = 0.5 * A1[1:-1] * du[1:-1] ** 2
        res_q = -diffusion - gradient - f
        quasi = float(np.max(np.abs(res_q)))
        quasi_scale = _term_scale(diffusion, gradient, f)
    return ResidualReport(semi, quasi, int(r.size), semi_scale, quasi_scale)


# --------------------------------------------------------------------------
# Morse index
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeCount:
    l: int
    multiplicity: int
    negative: int
    borderline: int
    eigenvalues: tuple

    @property
    def lambda_min(self):
        return self.eigenvalues[0] if self.eigenvalues else math.nan


@dataclass(frozen=True)
class MorseReport:
    modes: tuple
    index: int
    l_max: int
    grid: int
    eig_margin: float
    undercount: bool
    borderline: bool

    def counts(self):
        return [m.negative for m in self.modes]

    def as_dict(self):
        return {
            "index": self.index, "l_max": self.l_max, "grid": self.grid,
            "eig_margin": self.eig_margin, "undercount": self.undercount,
            "borderline": self.borderline,
            "modes": [{"l": m.l, "M_l": m.multiplicity, "n_l": m.negative,
                       "borderline": m.borderline, "lambda_min": m.lambda_min,
                       "eigenvalues": list(m.eigenvalues)} for m in self.modes],
        }


def _radial_operator(r_nodes, hstep, N, r_lo, dirichlet_lo):
    """Cell volumes and edge conductances of the weighted radial Laplacian.

    ``r_nodes`` are the unknown nodes (uniform, spacing ``hstep``); the
    outer neighbour is a Dirichlet node.  ``dirichlet_lo`` adds an inner
    Dirichlet neighbour, otherwise the first cell is closed at ``r_lo``.
    """
    left = np.maximum(r_nodes - 0.5 * hstep, r_lo)
    right = r_nodes + 0.5 * hstep
    mass = (right**N - left**N) / N
    cond_right = right ** (N - 1) / hstep
    cond_left = left ** (N - 1) / hstep
    if not dirichlet_lo:
        cond_left[0] = 0.0
    diag_k = cond_left + cond_right
    off_k = -cond_right[:-1]
    return mass, diag_k, off_k


def morse_counts(r, potential, N, l_max=None, eig_margin=None, n_eigs=3, domain=BALL):
    """Per-mode negative eigenvalue counts for ``-Delta - potential``.

    ``r`` is a uniform grid covering the whole radial interval (first node at
    0 for a ball); ``potential`` is sampled on it.  Dirichlet conditions at
    the outer radius (and the inner one for an annulus).
    """
    r = np.asarray(r, dtype=float)
    V = np.asarray(potential, dtype=float)
    hstep = r[1] - r[0]
    vmax = float(np.max(np.abs(V))) if V.size else 0.0
    if eig_margin is None:
        eig_margin = 1e-8 * vmax

    def mode(l):
        if domain == BALL and l == 0:
            # regular origin: the first cell is the closed ball of radius h/2
            idx, dirichlet_lo = slice(0, -1), False
        else:
            idx, dirichlet_lo = slice(1, -1), True
        nodes = r[idx]
        mass, diag_k, off_k = _radial_operator(nodes, hstep, N, 0.0, dirichlet_lo)
        with np.errstate(divide="ignore"):
            ang = l * (l + N - 2) / nodes**2 if l > 0 else np.zeros_like(nodes)
        q = ang - V[idx]
        diag = diag_k / mass + q
        off = off_k / np.sqrt(mass[:-1] * mass[1:])
        neg = sturm_count(diag, off, -eig_margin)
        below = sturm_count(diag, off, eig_margin)
        eigs = tuple(smallest_eigenvalues(diag, off, max(n_eigs, neg + 1)))
        return ModeCount(l, spherical_multiplicity(l, N), neg, below - neg, eigs)

    if l_max is not None:
        modes = qio.pmap(mode, range(int(l_max) + 1))
    else:
        modes = []
        for l in range(L_CAP + 1):
            modes.append(mode(l))
            if modes[-1].negative == 0:
                break
    index = sum(m.negative * m.multiplicity for m in modes)
    last = modes[-1]
    return MorseReport(
        modes=tuple(modes), index=int(index), l_max=last.l, grid=int(r.size - 1),
        eig_margin=float(eig_margin), undercount=last.negative > 0,
        borderline=any(m.borderline for m in modes),
    )


def resample(sol, points):
    """``(r, v)`` on a uniform grid with ``points`` intervals (cubic Hermite)."""
    M = int(points)
    if M == sol.grid.size - 1:
        return sol.grid, sol.v
    r = np.linspace(sol.grid[0], sol.grid[-1], M + 1)
    return r, CubicHermiteSpline(sol.grid, sol.v, sol.dv)(r)


def morse_index(sol, bundle, l_max=None, modes_grid=None, eig_margin=None):
    """Morse index of the semi-linear profile: ``sum_l n_l * M_l``."""
    source = as_source(bundle)
    M = modes_grid if modes_grid is not None else sol.grid.size - 1
    r, v = resample(sol, M)
    V = source.radial(r, v, 1)
    return morse_counts(r, V, sol.N, l_max=l_max, eig_margin=eig_margin, domain=sol.domain)


# --------------------------------------------------------------------------
# nodal bound
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NodalBoundReport:
    nod_u: int
    nod_v: int
    morse_index: int
    N: int
    bound: float
    satisfied: bool

    def as_dict(self):
        return {"nod_u": self.nod_u, "nod_v": self.nod_v, "morse_index": self.morse_index,
                "N": self.N, "bound": self.bound, "satisfied": self.satisfied}


def nodal_report(sol, morse, N=None):
    N = int(N if N is not None else sol.N)
    nod_v = 1 + interior_sign_changes(sol.v)
    nod_u = 1 + interior_sign_changes(sol.u)
    bound = 1 + morse.index / (N + 1)
    return NodalBoundReport(nod_u, nod_v, morse.index, N, bound, bool(nod_u <= bound))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def solution_csv_text(sol):
    spec = sol.meta.get("spec")
    fields = {"domain": sol.domain, "R": sol.R, "R0": sol.R0, "parameter": sol.parameter,
              "nodes": sol.node_count}
    if spec is not None:
        fields.update(qio.spec_fields(spec))
        fields["s_max"] = float(sol.meta.get("s_max", 20.0))
    else:
        fields["N"] = sol.N
    for name in ("residual_semi", "residual_quasi"):
        value = getattr(sol, name)
        if value is not None:
            fields[name] = float(value)
    meta = qio.encode_meta("quasisym-radial", fields)
    return qio.csv_text(["r", "v", "u", "dv"], [sol.grid, sol.v, sol.u, sol.dv], [meta])


def write_solution(sol, path):
    qio.atomic_write(path, solution_csv_text(sol))


def read_solution(path):
    """Inverse of :func:`write_solution` (values carry 12 significant digits)."""
    comments, header, data = qio.read_csv(path)
    if header != ["r", "v", "u", "dv"]:
        raise ValueError(f"{path}: expected header r,v,u,dv, got {','.join(header)}")
    tagged = [c for c in comments if c.startswith("quasisym-radial")]
    if not tagged:
        raise ValueError(f"{path}: missing quasisym-radial metadata line")
    _, d = qio.decode_meta(tagged[0])
    spec = qio.spec_from_fields(d) if "k" in d else None
    r, v, u, dv = data.T
    meta = {"spec": spec, "source": "bundle" if spec is not None else "linear"}
    if "s_max" in d:
        meta["s_max"] = float(d["s_max"])
    if spec is not None:
        a, _ = spec.a_derivs(u, 0)
        meta["gprime"] = 1.0 / np.sqrt(a[0])
    opt = {name: float(d[name]) for name in ("residual_semi", "residual_quasi") if name in d}
    return RadialSolution(r, v, u, dv, float(d["parameter"]), d["domain"], float(d["R"]),
                          float(d["R0"]), int(d["N"]), int(d["nodes"]), meta=meta, **opt)
