"""Change of variable g and the transformed nonlinearity h.

The quasi-linear operator ``-div(a(u) Du) + a'(u)|Du|^2 / 2`` with
``a(s) = 1 + |s|^k`` is turned into the Laplacian by ``u = g(v)`` where
``g' = 1 / sqrt(a(g))``, ``g(0) = 0``.  The source ``f(x, u)`` becomes
``h(x, s) = f(x, g(s)) / sqrt(a(g(s)))``.

All one-sided quantities at the origin use the right-hand convention
(``sign(0) = +1``); :data:`RIGHT_HAND_AT_ZERO` documents this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, IntegrationError, OutOfRangeError, UsageError

#: Derivatives of ``|t|^k`` and of the positive-part source at ``t = 0`` are
#: the right-hand ones.
RIGHT_HAND_AT_ZERO = True

FSIGNS = ("positive-part", "odd-power")
NODE_SPACING = 1e-2
DEFAULT_S_MAX = 20.0


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------

_EVEN_PROFILES = {
    # name -> callable(x1, beta); each is even in x1 and increasing on x1 < 0
    "gaussian": lambda x1, beta: np.exp(-beta * x1 * x1),
    "lorentzian": lambda x1, beta: 1.0 / (1.0 + beta * x1 * x1),
}


@dataclass(frozen=True)
class Weight:
    """Spatial weight ``psi`` multiplying the source term.

    ``kind`` is ``"constant"`` (``psi = value``), ``"radial-power"``
    (``psi = value * |x|**alpha``) or ``"even-x1"`` (``psi = value *
    profile(x1)`` with a profile from a fixed catalog).
    """

    kind: str = "constant"
    value: float = 1.0
    alpha: float = 0.0
    profile: str = "gaussian"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "radial-power", "even-x1"):
            raise UsageError(f"unknown weight kind {self.kind!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise UsageError(f"weight value must be finite and >= 0, got {self.value}")
        if self.kind == "radial-power" and self.alpha < 0:
            # |x|^alpha with alpha < 0 is unbounded at the origin
            raise UsageError("radial-power weight needs alpha >= 0")
        if self.kind == "even-x1":
            if self.profile not in _EVEN_PROFILES:
                raise UsageError(
                    f"unknown even-x1 profile {self.profile!r}; choose from {sorted(_EVEN_PROFILES)}"
                )
            if self.beta <= 0:
                raise UsageError("even-x1 profile needs beta > 0")

    @classmethod
    def constant(cls, value=1.0):
        return cls("constant", value=float(value))

    @classmethod
    def radial_power(cls, alpha, value=1.0):
        return cls("radial-power", value=float(value), alpha=float(alpha))

    @classmethod
    def even_x1(cls, profile="gaussian", beta=1.0, value=1.0):
        return cls("even-x1", value=float(value), profile=profile, beta=float(beta))

    @property
    def is_constant(self):
        return self.kind == "constant"

    @property
    def even_in_x1(self):
        return True

    @property
    def increasing_left(self):
        """True when ``psi`` is nondecreasing in x1 on ``{x1 < 0}``."""
        return self.kind in ("constant", "even-x1")

    def at_radius(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, self.value)
        if self.kind == "radial-power":
            return self.value * np.abs(r) ** self.alpha
        raise UsageError("an even-x1 weight has no radial form")

    def at_point(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        if self.kind == "constant":
            return np.full(x1.shape, self.value)
        if self.kind == "radial-power":
            return self.value * np.hypot(x1, x2) ** self.alpha
        return self.value * _EVEN_PROFILES[self.profile](x1, self.beta)

    def describe(self):
        if self.kind == "constant":
            return f"constant:{self.value:.12g}"
        if self.kind == "radial-power":
            return f"radial-power:{self.alpha:.12g}:{self.value:.12g}"
        return f"even-x1:{self.profile}:{self.beta:.12g}:{self.value:.12g}"

    @classmethod
    def parse(cls, text):
        """Inverse of :meth:`describe`; a bare number means a constant."""
        parts = str(text).split(":")
        try:
            if len(parts) == 1:
                return cls.constant(float(parts[0]))
            kind = parts[0]
            if kind == "constant":
                return cls.constant(float(parts[1]))
            if kind == "radial-power":
                value = float(parts[2]) if len(parts) > 2 else 1.0
                return cls.radial_power(float(parts[1]), value)
            if kind == "even-x1":
                beta = float(parts[2]) if len(parts) > 2 else 1.0
                value = float(parts[3]) if len(parts) > 3 else 1.0
                return cls.even_x1(parts[1], beta, value)
        except (IndexError, ValueError) as exc:
            raise UsageError(f"cannot parse weight {text!r}") from exc
        raise UsageError(f"cannot parse weight {text!r}")


# --------------------------------------------------------------------------
# power-law derivative helpers
# --------------------------------------------------------------------------

def _falling(x, n):
    out = 1.0
    for j in range(n):
        out *= x - j
    return out


def _power_part(t, e, n):
    """``falling(e, n) * |t|**(e - n)`` with zero / singular handling at 0.

    Returns (values, singular_mask).
    """
    c = _falling(e, n)
    absval = np.abs(t)
    if c == 0.0:
        return np.zeros_like(t), np.zeros(t.shape, dtype=bool)
    expo = e - n
    at0 = absval == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = c * absval ** expo
    if expo > 0:
        vals = np.where(at0, 0.0, vals)
        singular = np.zeros(t.shape, dtype=bool)
    elif expo == 0:
        vals = np.full_like(t, c)
        singular = np.zeros(t.shape, dtype=bool)
    else:
        singular = at0
    return vals, singular


def _sign(t):
    # right-hand convention at 0
    return np.where(t >= 0.0, 1.0, -1.0)


# --------------------------------------------------------------------------
# specification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearitySpec:
    """The pair ``(a, f)``.

    ``a(s) = 1 + |s|^k`` unless ``constant_a`` is set, in which case
    ``a = constant_a`` and ``k`` is ignored.  ``f(x, s) = psi(x) * phi(s)``
    with ``phi(s) = max(s, 0)^p`` (``fsign="positive-part"``) or
    ``|s|^(p-1) s`` (``fsign="odd-power"``).
    """

    k: float = 2.0
    p: float = 5.0
    psi: Weight = field(default_factory=Weight)
    fsign: str = "positive-part"
    N: int = 3
    constant_a: float | None = None

    def __post_init__(self):
        if self.constant_a is not None:
            if not (math.isfinite(self.constant_a) and self.constant_a > 0):
                raise UsageError(f"constant_a must be > 0, got {self.constant_a}")
        elif not self.k > 1:
            raise UsageError(f"k must exceed 1, got {self.k}")
        if not self.p > 1:
            raise UsageError(f"p must exceed 1, got {self.p}")
        if self.fsign not in FSIGNS:
            raise UsageError(f"fsign must be one of {FSIGNS}, got {self.fsign!r}")
        if int(self.N) != self.N or self.N < 2:
            raise UsageError(f"N must be an integer >= 2, got {self.N}")
        if not isinstance(self.psi, Weight):
            raise UsageError("psi must be a Weight")

    @property
    def degenerate(self):
        return self.constant_a is not None

    @property
    def k_eff(self):
        """Growth exponent of ``a`` (0 for a constant diffusion)."""
        return 0.0 if self.degenerate else float(self.k)

    # -- a ------------------------------------------------------------------
    def a_derivs(self, t, nmax=3):
        """``[a, a', ..., a^(nmax)]`` at ``t`` plus a singular mask."""
        t = np.asarray(t, dtype=float)
        singular = np.zeros(t.shape, dtype=bool)
        if self.degenerate:
            out = [np.full_like(t, self.constant_a)]
            out += [np.zeros_like(t) for _ in range(nmax)]
            return out, singular
        k = float(self.k)
        out = [1.0 + np.abs(t) ** k]
        sgn = _sign(t)
        for n in range(1, nmax + 1):
            vals, sing = _power_part(t, k, n)
            if n % 2:
                vals = vals * sgn
            out.append(vals)
            singular |= sing
        return out, singular

    # -- phi (unit-weight source) ------------------------------------------
    def f_derivs(self, t, nmax=3):
        """``[phi, phi', ..., phi^(nmax)]`` at ``t`` plus a singular mask."""
        t = np.asarray(t, dtype=float)
        p = float(self.p)
        singular = np.zeros(t.shape, dtype=bool)
        out = []
        if self.fsign == "positive-part":
            pos = t >= 0.0
            for n in range(nmax + 1):
                vals, sing = _power_part(t, p, n)
                out.append(np.where(pos, vals, 0.0))
                singular |= sing
        else:
            sgn = _sign(t)
            for n in range(nmax + 1):
                vals, sing = _power_part(t, p, n)
                out.append(vals * sgn ** (n + 1))
                singular |= sing
        return out, singular

    def primitive(self, t):
        """``F(t) = int_0^t phi`` for unit weight."""
        t = np.asarray(t, dtype=float)
        p1 = float(self.p) + 1.0
        if self.fsign == "positive-part":
            return np.where(t > 0.0, np.abs(t) ** p1 / p1, 0.0)
        return np.abs(t) ** p1 / p1


# --------------------------------------------------------------------------
# the change of variable
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GFunction:
    """Tabulated solution of ``g' = 1/sqrt(a(g))``, ``g(0) = 0``.

    Interpolation is cubic Hermite through the node values using the exact
    slopes ``1/sqrt(a(g))``; on a strictly increasing table with these
    slopes the interpolant is monotone to working precision.
    """

    spec: NonlinearitySpec
    nodes: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    ode_tol: float = 1e-12

    def __post_init__(self):
        for name in ("nodes", "values", "derivs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.nodes, self.values, self.derivs))

    @property
    def s_max(self):
        return float(self.nodes[-1])

    @property
    def u_max(self):
        return float(self.values[-1])

    def _check_s(self, s):
        if s.size and (np.nanmax(np.abs(s)) > self.s_max * (1 + 1e-15)):
            bad = s.flat[int(np.nanargmax(np.abs(s)))]
            raise OutOfRangeError(float(bad), -self.s_max, self.s_max, what="s")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        self._check_s(s)
        return self._spline(s)[()] if s.ndim == 0 else self._spline(s)

    def prime(self, s):
        """Exact ``g'(s) = a(g(s))^(-1/2)``."""
        a, _ = self.spec.a_derivs(self(s), 0)
        return 1.0 / np.sqrt(a[0])

    def inverse(self, u, tol=1e-14, max_iter=60):
        """``g^{-1}(u)`` by safeguarded Newton on the interpolant."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if u.size and np.max(np.abs(u)) > self.u_max:
            bad = u[int(np.argmax(np.abs(u)))]
            raise OutOfRangeError(float(bad), -self.u_max, self.u_max, what="u")
        idx = np.clip(np.searchsorted(self.values, u) - 1, 0, len(self.nodes) - 2)
        lo = self.nodes[idx].copy()
        hi = self.nodes[idx + 1].copy()
        s = np.interp(u, self.values, self.nodes)
        dspline = self._spline.derivative()
        for _ in range(max_iter):
            r = self._spline(s) - u
            if np.all(np.abs(r) <= tol * np.maximum(1.0, np.abs(u))):
                break
            lo = np.where(r < 0, s, lo)
            hi = np.where(r > 0, s, hi)
            step = s - r / dspline(s)
            inside = (step > lo) & (step < hi)
            s = np.where(r == 0, s, np.where(inside, step, 0.5 * (lo + hi)))
        return float(s[0]) if scalar else s

    def table(self):
        """Rows ``(s, g, g')`` at the nodes."""
        return np.column_stack([self.nodes, self.values, self.derivs])


def solve_g(spec, s_max=DEFAULT_S_MAX, ode_tol=1e-12):
    """Integrate the Cauchy problem for g on ``[-s_max, s_max]``.

    Uses an adaptive Runge-Kutta 4(5) pair from 0 outward with node output
    every ``<= 0.01`` in s, then mirrors by oddness (``a`` is even).
    A constant ``a = c`` skips the integration: ``g(s) = s / sqrt(c)``.
    """
    if not (s_max > 0 and math.isfinite(s_max)):
        raise UsageError(f"s_max must be a positive finite number, got {s_max}")
    if not ode_tol > 0:
        raise UsageError(f"ode_tol must be positive, got {ode_tol}")
    n = max(2, int(math.ceil(s_max / NODE_SPACING)))
    pos = np.linspace(0.0, s_max, n + 1)

    if spec.degenerate:
        c = spec.constant_a
        vals = pos / math.sqrt(c)
    else:
        k = float(spec.k)

        def rhs(s, y):
            a = 1.0 + abs(y[0]) ** k
            if not math.isfinite(a):
                raise IntegrationError(f"a(g(s)) is not finite at s={s:.12g}")
            return [1.0 / math.sqrt(a)]

        sol = solve_ivp(rhs, (0.0, s_max), [0.0], method="RK45", t_eval=pos,
                        rtol=ode_tol, atol=ode_tol)
        if not sol.success:
            raise IntegrationError(f"integration of g failed: {sol.message}")
        vals = sol.y[0]
        if not np.all(np.isfinite(vals)):
            bad = pos[~np.isfinite(vals)][0]
            raise IntegrationError(f"non-finite g at s={bad:.12g}")
        vals[0] = 0.0

    nodes = np.concatenate([-pos[:0:-1], pos])
    values = np.concatenate([-vals[:0:-1], vals])
    a, _ = spec.a_derivs(values, 0)
    return GFunction(spec, nodes, values, 1.0 / np.sqrt(a[0]), ode_tol)


def g_inverse(g, u):
    """``s`` with ``g(s) = u``; raises :class:`OutOfRangeError` outside the table."""
    return g.inverse(u)


# --------------------------------------------------------------------------
# derivative bundle
# --------------------------------------------------------------------------

class DerivativeBundle:
    """Closed-form ``h`` and its s-derivatives up to order 3.

    Orders 2 and 3 are assembled from ``Theta`` and ``Theta'``; nothing is
    differenced.  Evaluation is a pure function of ``(x, s, order)``.
    """

    def __init__(self, spec, g=None, s_max=DEFAULT_S_MAX, ode_tol=1e-12):
        self.spec = spec
        self.g = g if g is not None else solve_g(spec, s_max, ode_tol)

    # -- raw pieces in the u-variable t = g(s) -------------------------------
    def theta(self, t):
        """``Theta(t) = 2 f'' a^2 - 3 f' a' a - f a'' a + 2 f a'^2`` (unit weight)."""
        (A0, A1, A2), _ = self.spec.a_derivs(t, 2)
        (F0, F1, F2), _ = self.spec.f_derivs(t, 2)
        return 2 * F2 * A0**2 - 3 * F1 * A1 * A0 - F0 * A2 * A0 + 2 * F0 * A1**2

    def theta_prime(self, t):
        (A0, A1, A2, A3), _ = self.spec.a_derivs(t, 3)
        (F0, F1, F2, F3), _ = self.spec.f_derivs(t, 3)
        return (2 * F3 * A0**2 + 4 * A0 * A1 * F2
                - 3 * F2 * A1 * A0 - 3 * F1 * A2 * A0
                - 3 * F1 * A1**2 - F1 * A2 * A0
                - F0 * A3 * A0 - F0 * A2 * A1
                + 2 * F1 * A1**2 + 4 * F0 * A1 * A2)

    def unit_from_t(self, t, order=0):
        """``h`` derivative of the given order at ``s = g^{-1}(t)``, unit weight."""
        if order not in (0, 1, 2, 3):
            raise UsageError(f"order must be in 0..3, got {order!r}")
        t = np.asarray(t, dtype=float)
        A, sa = self.spec.a_derivs(t, order)
        F, sf = self.spec.f_derivs(t, order)
        bad = sa | sf
        if np.any(bad):
            where = np.atleast_1d(t)[np.atleast_1d(bad)]
            raise DomainError(
                f"h of order {order} does not exist at g(s)={float(where[0]):.12g} "
                f"(k={self.spec.k}, p={self.spec.p}, fsign={self.spec.fsign})"
            )
        A0 = A[0]
        if order == 0:
            return F[0] / np.sqrt(A0)
        if order == 1:
            return (2 * F[1] * A0 - F[0] * A[1]) / (2 * A0**2)
        th = 2 * F[2] * A0**2 - 3 * F[1] * A[1] * A0 - F[0] * A[2] * A0 + 2 * F[0] * A[1] ** 2
        if order == 2:
            return 0.5 * A0 ** -3.5 * th
        thp = self.theta_prime(t)
        return 0.25 * A0 ** -5 * (2 * thp * A0 - 7 * A[1] * th)

    def unit(self, s, order=0):
        return self.unit_from_t(self.g(s), order)

    def weight(self, x):
        """``psi`` at a radius (scalar/array) or a point ``(x1, x2)``; None means 1."""
        psi = self.spec.psi
        if x is None:
            if not psi.is_constant:
                raise UsageError("a non-constant weight needs an evaluation point")
            return psi.value
        if isinstance(x, tuple) and len(x) == 2:
            return psi.at_point(x[0], x[1])
        return psi.at_radius(x)

    def h(self, x, s, order=0):
        return self.weight(x) * self.unit(s, order)

    def K(self, x, s):
        """Primitive of h in s: ``K(x, s) = F(x, g(s))``."""
        return self.weight(x) * self.spec.primitive(self.g(s))

    def F(self, x, t):
        return self.weight(x) * self.spec.primitive(t)

    # -- scalar fast path used inside ODE right-hand sides -------------------
    def scalar_unit_from_t(self, t):
        spec = self.spec
        a = spec.constant_a if spec.degenerate else 1.0 + abs(t) ** spec.k
        if spec.fsign == "positive-part":
            phi = t ** spec.p if t > 0.0 else 0.0
        else:
            phi = math.copysign(abs(t) ** spec.p, t)
        return phi / math.sqrt(a)

    def scalar_sqrt_a(self, t):
        spec = self.spec
        return math.sqrt(spec.constant_a if spec.degenerate else 1.0 + abs(t) ** spec.k)


def h_eval(bundle, x, s, order=0):
    """Evaluate ``d^order h / ds^order`` at ``(x, s)``."""
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise UsageError(f"order must be an integer in 0..3, got {order!r}")
    val = bundle.h(as_points(x), s, int(order))
    return float(val) if np.ndim(val) == 0 else val


# --------------------------------------------------------------------------
# growth bookkeeping
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SubcriticalityReport:
    k: float
    p: float
    N: int
    bound: float
    subcritical: bool
    p_gt_k_plus_1: bool
    p_gt_half_k: bool
    k_ge_2: bool

    @property
    def nodal_window(self):
        """Hypothesis window ``k/2 < p < bound`` of the nodal bound."""
        return self.p_gt_half_k and self.subcritical

    def as_dict(self):
        return {
            "k": self.k, "p": self.p, "N": self.N, "bound": self.bound,
            "subcritical": self.subcritical, "p_gt_k_plus_1": self.p_gt_k_plus_1,
            "p_gt_half_k": self.p_gt_half_k, "k_ge_2": self.k_ge_2,
            "nodal_window": self.nodal_window,
        }


def critical_bound(k, N):
    return math.inf if N == 2 else ((k + 1) * N + 2) / (N - 2)


def validate_growth(spec):
    k = spec.k_eff
    bound = critical_bound(k, spec.N)
    p = float(spec.p)
    return SubcriticalityReport(
        k=k, p=p, N=int(spec.N), bound=bound,
        subcritical=bool(1 < p < bound),
        p_gt_k_plus_1=bool(p > k + 1),
        p_gt_half_k=bool(p > k / 2),
        k_ge_2=bool(k >= 2),
    )


def as_points(x: Sequence[float] | float):
    """Normalize a user point: 2-sequences become ``(x1, x2)`` tuples."""
    if isinstance(x, (list, tuple, np.ndarray)) and np.ndim(x) == 1 and len(x) == 2:
        return (float(x[0]), float(x[1]))
    return x
