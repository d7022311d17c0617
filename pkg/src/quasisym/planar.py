"""Transformed problem on x1-symmetric rectangles and reflection diagnostics.

The rectangle is ``(-L, L) x (0, H)`` with a uniform mesh of ``n1 x n2``
intervals (``n1`` even, so ``x1 = 0`` is a mesh line).  Discrete fields are
stored on all nodes, boundary included, as arrays of shape
``(n1 + 1, n2 + 1)`` indexed ``[i1, i2]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from . import io as qio
from .errors import ConvergenceError, DomainError, UsageError
from .nonlin import NonlinearitySpec, Weight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanarProblemSpec:
    L: float = 1.0
    H: float = 1.0
    n1: int = 128
    n2: int = 64
    spec: NonlinearitySpec = field(default_factory=lambda: NonlinearitySpec(N=2))

    def __post_init__(self):
        if not (self.L > 0 and self.H > 0):
            raise UsageError("L and H must be positive")
        if self.n1 < 4 or self.n1 % 2:
            raise UsageError(f"n1 must be even and >= 4 (reflection-symmetric mesh), got {self.n1}")
        if self.n2 < 2:
            raise UsageError(f"n2 must be >= 2, got {self.n2}")
        psi = self.spec.psi
        if not (psi.even_in_x1 and psi.increasing_left):
            raise UsageError(f"weight {psi.describe()} is not even and increasing on x1 < 0")

    @property
    def x1(self):
        return np.linspace(-self.L, self.L, self.n1 + 1)

    @property
    def x2(self):
        return np.linspace(0.0, self.H, self.n2 + 1)

    @property
    def steps(self):
        return 2 * self.L / self.n1, self.H / self.n2


@dataclass
class PlanarControls:
    tol: float = 1e-8
    max_iter: int = 60
    amplitudes: tuple = (1.0, 1.5, 0.75)
    seed_asymmetry: float = 0.1


@dataclass(frozen=True, eq=False)
class PlanarField:
    x1: np.ndarray
    x2: np.ndarray
    v: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int = 0
    trivial: bool = False
    history: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def steps(self):
        return self.x1[1] - self.x1[0], self.x2[1] - self.x2[0]

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def descriptor(self):
        n1, n2 = self.v.shape[0] - 1, self.v.shape[1] - 1
        L, H = float(self.x1[-1]), float(self.x2[-1])
        return f"mesh n1={n1} n2={n2} L={L:.12g} H={H:.12g} order=x2-fastest"


# --------------------------------------------------------------------------
# discretization
# --------------------------------------------------------------------------

def _second_difference(n, hstep):
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, main, off], [-1, 0, 1]) / hstep**2


def neg_laplacian(n1, n2, h1, h2):
    """5-point ``-Delta`` on interior unknowns, x2 index fastest."""
    A1 = _second_difference(n1 - 1, h1)
    A2 = _second_difference(n2 - 1, h2)
    return (sp.kron(A1, sp.identity(n2 - 1)) + sp.kron(sp.identity(n1 - 1), A2)).tocsr()


class _Discrete:
    def __init__(self, problem, bundle):
        self.problem = problem
        self.bundle = bundle
        n1, n2 = problem.n1, problem.n2
        self.h1, self.h2 = problem.steps
        self.A = neg_laplacian(n1, n2, self.h1, self.h2)
        X1, X2 = np.meshgrid(problem.x1, problem.x2, indexing="ij")
        self.X1, self.X2 = X1, X2
        self.psi = problem.spec.psi.at_point(X1, X2)
        self.psi_in = self.psi[1:-1, 1:-1].ravel()
        self.shape = (n1 - 1, n2 - 1)

    def h(self, v_in, order=0):
        return self.psi_in * self.bundle.unit(v_in, order)

    def residual(self, v_in):
        return self.A @ v_in - self.h(v_in)

    def embed(self, v_in):
        out = np.zeros((self.problem.n1 + 1, self.problem.n2 + 1))
        out[1:-1, 1:-1] = v_in.reshape(self.shape)
        return out


def _nehari_amplitude(disc, phi, smax):
    """Amplitude ``A`` with ``A phi^T(-Delta)phi = phi^T h(A phi)``."""
    quad = phi @ (disc.A @ phi)

    def gap(a):
        return a * quad - phi @ disc.h(a * phi)

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2
        if hi * np.max(phi) > smax:
            return None
    lo = hi / 2
    while gap(lo) < 0 and lo > 1e-8:
        lo /= 2
    if gap(lo) < 0:
        return None
    return brentq(gap, lo, hi, xtol=1e-12)


def solve_planar(problem, bundle, controls=None, source=None):
    """Damped Newton for ``-Delta_h v = h(x, v)`` from a positive bump.

    ``source`` optionally replaces ``h`` by a fixed right-hand side array
    (interior nodes), turning the solve into a linear Poisson problem.
    """
    controls = controls or PlanarControls()
    spec = problem.spec
    if not spec.p > spec.k_eff + 1:
        log.warning("p=%g <= k+1: the x1-symmetry result does not apply", spec.p)
    disc = _Discrete(problem, bundle)
    g = bundle.g

    if source is not None:
        rhs = np.asarray(source, dtype=float)
        if rhs.shape == (problem.n1 + 1, problem.n2 + 1):
            rhs = rhs[1:-1, 1:-1]
        v_in = spsolve(disc.A.tocsc(), rhs.ravel())
        res = float(np.max(np.abs(disc.A @ v_in - rhs.ravel())))
        v = disc.embed(v_in)
        return PlanarField(problem.x1, problem.x2, v, v.copy(), res, 1,
                           bool(np.max(np.abs(v)) == 0), (res,), {"problem": problem, "linear": True})

    X1, X2 = disc.X1[1:-1, 1:-1], disc.X2[1:-1, 1:-1]
    bump = np.cos(0.5 * np.pi * X1 / problem.L) * np.sin(np.pi * X2 / problem.H)
    bump = (bump * (1.0 + controls.seed_asymmetry * X1 / problem.L)).ravel()
    base = _nehari_amplitude(disc, bump, g.s_max)
    if base is None:
        raise ConvergenceError("could not scale the initial bump onto the Nehari set")

    history_all = []
    for factor in controls.amplitudes:
        v_in = factor * base * bump
        history = []
        try:
            v_in, history = _newton(disc, v_in, controls)
        except ConvergenceError as exc:
            history_all.append(exc.history)
            continue
        finally:
            history_all.append(history)
        trivial = bool(np.max(np.abs(v_in)) <= 1e-10)
        if trivial and factor != controls.amplitudes[-1]:
            log.info("Newton reached the trivial solution; re-seeding")
            continue
        v = disc.embed(v_in)
        return PlanarField(problem.x1, problem.x2, v, g(v), history[-1], len(history) - 1,
                           trivial, tuple(history), {"problem": problem, "amplitude": factor * base,
                            "s_max": float(g.s_max)})
    raise ConvergenceError("Newton stagnated for every seed amplitude",
                           [r for h in history_all for r in h])


def _newton(disc, v_in, controls):
    F = disc.residual(v_in)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    for _ in range(controls.max_iter):
        if norm <= controls.tol:
            return v_in, history
        J = (disc.A - sp.diags(disc.h(v_in, 1))).tocsc()
        step = spsolve(J, -F)
        lam = 1.0
        while True:
            trial = v_in + lam * step
            try:
                Ft = disc.residual(trial)
                nt = float(np.max(np.abs(Ft)))
            except ValueError:
                nt = math.inf
            if nt < (1 - 1e-4 * lam) * norm or lam < 1e-6:
                break
            lam *= 0.5
        if not np.isfinite(nt) or (lam < 1e-6 and nt >= norm):
            raise ConvergenceError("Newton stagnated", history + [nt])
        v_in, F, norm = trial, Ft, nt
        history.append(norm)
    if norm <= controls.tol:
        return v_in, history
    raise ConvergenceError(f"Newton did not reach tol={controls.tol:g} in {controls.max_iter} steps",
                           history)


# --------------------------------------------------------------------------
# reflection diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflectionReport:
    t: np.ndarray
    psi_plus_neg: np.ndarray      # t -> Psi_+(-t u_+^-)
    psi_minus_neg: np.ndarray     # t -> Psi_-(-t u_-^-)
    psi_plus_pos: np.ndarray      # t -> Psi_+(t u_+^-)
    psi_minus_pos: np.ndarray
    slope_formula: np.ndarray   # shape (2, len(t)): + and - halves
    slope_fd: np.ndarray
    grid_st: np.ndarray
    two_param_grid: np.ndarray
    decomposition_error: float
    involution_exact: bool
    antisymmetry_error: float
    c1_fraction: float
    c2_fraction: float
    c_nodes: int
    dx1_on_T: dict
    lipschitz_constant: float
    sup_h: float
    amplitude: float
    residual: float
    solution: bool
    conclusions_claimed: bool
    u_plus: np.ndarray = field(repr=False, default=None)
    u_minus: np.ndarray = field(repr=False, default=None)

    @property
    def slope_discrepancy(self):
        return float(np.max(np.abs(self.slope_formula - self.slope_fd)))

    @property
    def slope_violation(self):
        """Largest positive value of the derivative (should be <= 0)."""
        return float(max(0.0, np.max(self.slope_formula)))

    @property
    def comparison_violation(self):
        d = np.concatenate([self.psi_plus_pos - self.psi_plus_neg,
                            self.psi_minus_pos - self.psi_minus_neg])
        return float(max(0.0, np.max(d)))

    @property
    def two_param_violation(self):
        return float(max(0.0, np.max(self.two_param_grid)))

    @property
    def max_negative_part(self):
        up = np.maximum(-self.u_plus, 0.0)
        um = np.maximum(-self.u_minus, 0.0)
        return float(max(np.max(up), np.max(um)))

    def as_dict(self):
        return {
            "label": "solution diagnostics" if self.solution else "non-solution diagnostics",
            "residual": self.residual,
            "max_negative_part": self.max_negative_part,
            "reflection_slope": {"discrepancy": self.slope_discrepancy,
                                 "max_positive": self.slope_violation},
            "reflection_comparison": {"max_positive": self.comparison_violation},
            "two_parameter": {"max_value": self.two_param_violation,
                              "decomposition_error": self.decomposition_error},
            "reflection": {"involution_exact": self.involution_exact,
                           "antisymmetry_error": self.antisymmetry_error},
            "convexity_windows": {"c1_fraction": self.c1_fraction, "c2_fraction": self.c2_fraction,
                                  "nodes_checked": self.c_nodes},
            "dx1_on_T": self.dx1_on_T,
            "growth": {"lipschitz_constant": self.lipschitz_constant, "sup_h": self.sup_h,
                       "amplitude": self.amplitude},
            "conclusions_claimed": self.conclusions_claimed,
        }


def reflect(values):
    """``w(x) -> w(-x1, x2)`` on a reflection-symmetric mesh."""
    return np.asarray(values)[::-1, :]


class _Functional:
    """Discrete ``Phi(w) = h1 h2 [ w^T(-Delta_h)w / 2 - sum K(x, w) ]``."""

    def __init__(self, field_, bundle):
        self.h1, self.h2 = field_.steps
        n1, n2 = field_.v.shape[0] - 1, field_.v.shape[1] - 1
        self.A = neg_laplacian(n1, n2, self.h1, self.h2)
        X1, X2 = field_.mesh()
        self.psi = bundle.spec.psi.at_point(X1, X2)[1:-1, 1:-1].ravel()
        self.bundle = bundle
        self.v0 = field_.v[1:-1, 1:-1].ravel()
        self.cell = self.h1 * self.h2
        self.phi0 = self.phi(self.v0)

    def K(self, w):
        return self.psi * self.bundle.spec.primitive(self.bundle.g(w))

    def h(self, w, order=0):
        return self.psi * self.bundle.unit(w, order)

    def phi(self, w):
        return self.cell * (0.5 * w @ (self.A @ w) - np.sum(self.K(w)))

    def psi_of(self, w):
        return self.phi(w + self.v0) - self.phi0


def _interior(a):
    return np.asarray(a)[1:-1, 1:-1].ravel()


def reflection_diagnostics(field_, bundle, t_samples=21, grid_samples=21, fd_step=1e-4,
                           window_samples=5, solution=True):
    """Reflection quantities and the functional inequalities they satisfy.

    ``solution=False`` labels the report as a non-solution diagnostic (for
    manufactured asymmetric fields, where the inequalities need not hold).
    """
    v0 = np.asarray(field_.v, dtype=float)
    vr = reflect(v0)
    X1, _ = field_.mesh()
    plus = X1 > 0
    minus = X1 < 0
    diff = vr - v0
    u_plus = np.where(plus, diff, 0.0)
    u_minus = np.where(minus, diff, 0.0)
    um_plus = np.maximum(-u_plus, 0.0)
    um_minus = np.maximum(-u_minus, 0.0)
    involution = bool(np.array_equal(reflect(reflect(v0)), v0))
    antisym = float(np.max(np.abs(u_plus + reflect(u_minus))))

    fun = _Functional(field_, bundle)
    wp, wm = _interior(um_plus), _interior(um_minus)
    t = np.linspace(0.0, 1.0, int(t_samples))
    cp_neg = np.array([fun.psi_of(-ti * wp) for ti in t])
    cm_neg = np.array([fun.psi_of(-ti * wm) for ti in t])
    cp_pos = np.array([fun.psi_of(ti * wp) for ti in t])
    cm_pos = np.array([fun.psi_of(ti * wm) for ti in t])

    v0i, vri = _interior(v0), _interior(vr)
    h_v0, h_vr = fun.h(v0i), fun.h(vri)
    formula = np.empty((2, t.size))
    fd = np.empty((2, t.size))
    for row, w in enumerate((wp, wm)):
        active = w > 0
        for j, ti in enumerate(t):
            if np.any(active):
                mix = (1 - ti) * v0i[active] + ti * vri[active]
                integrand = (fun.psi[active] * bundle.unit(mix, 0)
                             - (1 - ti) * h_v0[active] - ti * h_vr[active])
                formula[row, j] = fun.cell * np.sum(integrand * w[active])
            else:
                formula[row, j] = 0.0
            fd[row, j] = (fun.psi_of(-(ti + fd_step) * w) - fun.psi_of(-(ti - fd_step) * w)) / (2 * fd_step)

    st = np.linspace(-1.0, 1.0, int(grid_samples))
    grid = np.empty((st.size, st.size))
    dec = 0.0
    psi_p = {s: fun.psi_of(s * wp) for s in st}
    psi_m = {s: fun.psi_of(s * wm) for s in st}
    for a, s in enumerate(st):
        for b, tt in enumerate(st):
            val = fun.psi_of(s * wp + tt * wm)
            grid[a, b] = val
            dec = max(dec, abs(val - psi_p[s] - psi_m[tt]))

    c1, c2, n_c = _convexity_windows(bundle, fun.psi, v0i, vri, (wp > 0) | (wm > 0), window_samples)

    # sign of d v0 / d x1 on the symmetry line
    h1 = field_.steps[0]
    mid = v0.shape[0] // 2
    dx1 = (v0[mid + 1, 1:-1] - v0[mid - 1, 1:-1]) / (2 * h1)
    dx1_report = {"min": float(np.min(dx1)), "max": float(np.max(dx1)),
                  "nonneg_somewhere": bool(np.any(dx1 >= 0)),
                  "nonpos_somewhere": bool(np.any(dx1 <= 0))}

    amp = float(max(np.max(np.abs(v0)), np.max(np.abs(2 * v0 - vr))))
    amp = min(amp, bundle.g.s_max)
    sample = np.linspace(-amp, amp, 401)
    lip = float(np.max(np.abs(bundle.unit(sample, 1)))) * float(np.max(fun.psi, initial=0.0))
    sup_h = float(np.max(np.abs(bundle.unit(sample, 0)))) * float(np.max(fun.psi, initial=0.0))
    residual = float(getattr(field_, "residual", math.nan))
    claimed = bool(solution and math.isfinite(lip) and c1 == 1.0 and c2 == 1.0)

    return ReflectionReport(
        t=t, psi_plus_neg=cp_neg, psi_minus_neg=cm_neg, psi_plus_pos=cp_pos,
        psi_minus_pos=cm_pos, slope_formula=formula, slope_fd=fd, grid_st=st,
        two_param_grid=grid, decomposition_error=float(dec), involution_exact=involution,
        antisymmetry_error=antisym, c1_fraction=c1, c2_fraction=c2, c_nodes=n_c,
        dx1_on_T=dx1_report, lipschitz_constant=lip, sup_h=sup_h, amplitude=amp,
        residual=residual, solution=bool(solution), conclusions_claimed=claimed,
        u_plus=u_plus, u_minus=u_minus,
    )


def _convexity_windows(bundle, psi, v0, vr, active, samples):
    """Fractions of active nodes where ``h''`` is nonnegative on the windows
    ``[v0(~x), v0(x)]`` and ``[v0(~x), 2 v0(x) - v0(~x)]``."""
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return 1.0, 1.0, 0
    lam = np.linspace(0.0, 1.0, int(samples))
    out = []
    for hi in (v0[idx], 2 * v0[idx] - vr[idx]):
        lo = vr[idx]
        pts = lo[:, None] + lam[None, :] * (hi - lo)[:, None]
        try:
            vals = psi[idx, None] * bundle.unit(pts, 2)
            ok = np.all(vals >= -1e-12 * max(1.0, float(np.max(np.abs(vals)))), axis=1)
            out.append(float(np.mean(ok)))
        except DomainError:
            out.append(math.nan)
    return out[0], out[1], int(idx.size)


# --------------------------------------------------------------------------
# symmetry metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScatteredField:
    """Point values with optional reflection partner and ring labels.

    ``mirror[i]`` is the index of the point ``(-x1, x2)`` (or -1); ``ring[i]``
    labels points sharing the same radius.
    """

    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray
    mirror: np.ndarray | None = None
    ring: np.ndarray | None = None

    @classmethod
    def polar(cls, fn, radii, n_theta=360):
        """Sample ``fn(x1, x2)`` on circles; ``n_theta`` must be even."""
        if n_theta % 2:
            raise UsageError("n_theta must be even")
        radii = np.asarray(radii, dtype=float)
        theta = 2 * np.pi * np.arange(n_theta) / n_theta
        R, T = np.meshgrid(radii, theta, indexing="ij")
        x1, x2 = R * np.cos(T), R * np.sin(T)
        jr, jt = np.meshgrid(np.arange(radii.size), np.arange(n_theta), indexing="ij")
        mirror = jr * n_theta + (n_theta // 2 - jt) % n_theta
        return cls(x1.ravel(), x2.ravel(), np.asarray(fn(x1, x2), dtype=float).ravel(),
                   mirror.ravel(), jr.ravel())


def radial_as_field(sol, n_theta=360, quasi=True, stride=1):
    """A radial solution sampled on circles (values constant on each ring)."""
    r = sol.grid[::stride]
    vals = (sol.u if quasi else sol.v)[::stride]
    lookup = dict(zip(range(r.size), vals))
    idx = np.arange(r.size)

    def fn(x1, x2):
        return np.broadcast_to(np.array([lookup[i] for i in idx])[:, None], x1.shape)

    return ScatteredField.polar(fn, r, n_theta)


@dataclass(frozen=True)
class SymmetryReport:
    even_deviation: float
    fs_deviation: float
    fs_best_direction: tuple
    fs_max_ring_violation: float
    critical_points: list
    axis_distance: float | None
    dx1_on_T: dict | None

    def as_dict(self):
        return {"even_deviation": self.even_deviation, "fs_deviation": self.fs_deviation,
                "fs_best_direction": list(self.fs_best_direction),
                "fs_max_ring_violation": self.fs_max_ring_violation,
                "critical_points": [list(p) for p in self.critical_points],
                "axis_distance": self.axis_distance, "dx1_on_T": self.dx1_on_T}


def _to_scattered(obj, quasi=True):
    if isinstance(obj, ScatteredField):
        return obj
    if isinstance(obj, PlanarField):
        X1, X2 = obj.mesh()
        n1, n2 = X1.shape
        i1, i2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        mirror = ((n1 - 1 - i1) * n2 + i2).ravel()
        rr = np.round(np.hypot(X1, X2).ravel(), 9)
        _, ring = np.unique(rr, return_inverse=True)
        vals = obj.u if quasi else obj.v
        return ScatteredField(X1.ravel(), X2.ravel(), np.asarray(vals).ravel(), mirror, ring)
    if hasattr(obj, "grid") and hasattr(obj, "dv"):
        return radial_as_field(obj, quasi=quasi, stride=max(1, obj.grid.size // 400))
    raise UsageError(f"cannot measure symmetry of {type(obj).__name__}")


def _even_deviation(f):
    scale = float(np.max(np.abs(f.u))) if f.u.size else 0.0
    if scale == 0.0:
        return 0.0
    if f.mirror is not None:
        m = np.asarray(f.mirror)
        ok = m >= 0
        return float(np.max(np.abs(f.u[ok] - f.u[m[ok]]))) / scale
    key = {}
    digits = 9
    for i, (a, b) in enumerate(zip(np.round(f.x1, digits), np.round(f.x2, digits))):
        key[(a, b)] = i
    worst = 0.0
    for i, (a, b) in enumerate(zip(np.round(f.x1, digits), np.round(f.x2, digits))):
        j = key.get((np.round(-a, digits) + 0.0, b))
        if j is not None:
            worst = max(worst, abs(f.u[i] - f.u[j]))
    return worst / scale


def _fs_violation(f, n_dirs):
    scale = float(np.max(np.abs(f.u))) if f.u.size else 0.0
    if scale == 0.0:
        return 0.0, (1.0, 0.0), 0.0
    if f.ring is not None:
        ring = np.asarray(f.ring)
    else:
        _, ring = np.unique(np.round(np.hypot(f.x1, f.x2), 9), return_inverse=True)
    best = (math.inf, None, None)
    for j in range(int(n_dirs)):
        th = 2 * np.pi * j / n_dirs
        xi = (math.cos(th), math.sin(th))
        proj = np.round(f.x1 * xi[0] + f.x2 * xi[1], 9)
        order = np.lexsort((f.u, proj, ring))
        rs, us = ring[order], f.u[order]
        same = rs[1:] == rs[:-1]
        drops = np.where(same, np.maximum(us[:-1] - us[1:], 0.0), 0.0)
        total = float(np.sum(drops)) / scale
        if total < best[0]:
            per_ring = np.bincount(rs[:-1], weights=drops, minlength=int(ring.max()) + 1)
            best = (total, xi, float(np.max(per_ring)) / scale)
    return best[0], best[1], best[2]


def symmetry_metrics(obj, n_dirs=360, eps=None, quasi=True):
    """Even deviation, foliated-Schwarz deviation, critical points, T-slope."""
    f = _to_scattered(obj, quasi)
    even = _even_deviation(f)
    fs, xi, ring_max = _fs_violation(f, n_dirs)
    crit = []
    axis_dist = None
    dx1 = None
    if isinstance(obj, PlanarField):
        vals = obj.u if quasi else obj.v
        h1, h2 = obj.steps
        g1, g2 = np.gradient(vals, h1, h2)
        gn = np.hypot(g1, g2)
        interior = np.zeros_like(gn, dtype=bool)
        interior[1:-1, 1:-1] = True
        gmax = float(np.max(gn[interior])) if np.any(interior) else 0.0
        tol = eps if eps is not None else max(h1, h2) * gmax
        X1, X2 = obj.mesh()
        sel = interior & (gn <= tol)
        crit = [(float(a), float(b)) for a, b in zip(X1[sel], X2[sel])]
        axis_dist = float(np.max(np.abs(X1[sel]))) if crit else None
        mid = vals.shape[0] // 2
        d = (vals[mid + 1, 1:-1] - vals[mid - 1, 1:-1]) / (2 * h1)
        dx1 = {"min": float(np.min(d)), "max": float(np.max(d)),
               "nonneg_somewhere": bool(np.any(d >= 0)), "nonpos_somewhere": bool(np.any(d <= 0))}
    elif hasattr(obj, "grid") and hasattr(obj, "dv"):
        d = obj.du if quasi else obj.dv
        scale = float(np.max(np.abs(d))) if d.size else 0.0
        h = obj.grid[1] - obj.grid[0]
        tol = eps if eps is not None else h * scale
        crit = [(float(r),) for r in obj.grid[:-1][np.abs(d[:-1]) <= tol]]
    return SymmetryReport(even, fs, tuple(xi), ring_max, crit, axis_dist, dx1)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def field_csv_text(field_, spec=None):
    X1, X2 = field_.mesh()
    comments = [field_.descriptor()]
    fields = {"residual": float(field_.residual), "iterations": int(field_.iterations),
              "trivial": field_.trivial}
    problem = field_.meta.get("problem")
    spec = spec if spec is not None else getattr(problem, "spec", None)
    if spec is not None:
        fields.update(qio.spec_fields(spec))
    if "s_max" in field_.meta:
        fields["s_max"] = float(field_.meta["s_max"])
    comments.append(qio.encode_meta("quasisym-planar", fields))
    return qio.csv_text(["x1", "x2", "v", "u"], [X1, X2, field_.v, field_.u], comments)


def write_field(field_, path, spec=None):
    qio.atomic_write(path, field_csv_text(field_, spec))


def read_field(path):
    """Returns ``(field, spec_or_None)``."""
    comments, header, data = qio.read_csv(path)
    if header != ["x1", "x2", "v", "u"]:
        raise ValueError(f"{path}: expected header x1,x2,v,u, got {','.join(header)}")
    mesh = [c for c in comments if c.startswith("mesh")]
    if not mesh:
        raise ValueError(f"{path}: missing mesh descriptor")
    _, m = qio.decode_meta(mesh[0])
    n1, n2 = int(m["n1"]), int(m["n2"])
    if data.shape[0] != (n1 + 1) * (n2 + 1):
        raise ValueError(f"{path}: {data.shape[0]} rows do not match a {n1}x{n2} mesh")
    shape = (n1 + 1, n2 + 1)
    x1 = data[:, 0].reshape(shape)[:, 0]
    x2 = data[:, 1].reshape(shape)[0, :]
    tagged = [c for c in comments if c.startswith("quasisym-planar")]
    d = qio.decode_meta(tagged[0])[1] if tagged else {}
    spec = qio.spec_from_fields(d) if "k" in d else None
    fld = PlanarField(x1, x2, data[:, 2].reshape(shape), data[:, 3].reshape(shape),
                      float(d.get("residual", "nan")), int(d.get("iterations", 0)),
                      d.get("trivial") == "True", (),
                      {"s_max": float(d["s_max"])} if "s_max" in d else {})
    return fld, spec
