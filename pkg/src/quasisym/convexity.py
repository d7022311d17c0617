"""Convexity certificates for the transformed nonlinearity.

For the power pair ``a(t) = 1 + t^k``, ``f = psi t^p`` on ``t > 0`` the sign
of ``h''`` is that of ``G1 t^(2k) + G2 t^k + G3`` and the sign of ``h'''``
is that of the cubic ``Q(X) = c3 X^3 + c2 X^2 + c1 X + c0`` in ``X = t^k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotFoundError, UsageError

SUFFICIENT = "sufficient"
SHARP = "sharp"
MODES = (SUFFICIENT, SHARP)
STRICT_RTOL = 1e-12


@dataclass(frozen=True)
class GammaTriple:
    gamma1: float
    gamma2: float
    gamma3: float
    # factored forms, only meaningful for p > k + 1
    gamma1_factored: float | None = None
    gamma2_factored: float | None = None

    def as_dict(self):
        return {"gamma1": self.gamma1, "gamma2": self.gamma2, "gamma3": self.gamma3}


@dataclass(frozen=True)
class PiQuadruple:
    pi1: float
    pi2: float
    pi3: float
    pi4: float

    @property
    def total(self):
        return self.pi1 + self.pi2 + self.pi3 + self.pi4

    def as_dict(self):
        return {"pi1": self.pi1, "pi2": self.pi2, "pi3": self.pi3, "pi4": self.pi4}


@dataclass(frozen=True)
class QPolynomial:
    """``Q(s) = c3 s^(3k) + c2 s^(2k) + c1 s^k + c0``."""

    c3: float
    c2: float
    c1: float
    c0: float

    def coefficients(self):
        return (self.c3, self.c2, self.c1, self.c0)

    def in_xi(self, xi):
        """Value as a cubic in ``Xi = s^k``."""
        xi = np.asarray(xi, dtype=float)
        return ((self.c3 * xi + self.c2) * xi + self.c1) * xi + self.c0

    def as_dict(self):
        return {"c3": self.c3, "c2": self.c2, "c1": self.c1, "c0": self.c0}


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    satisfied: bool

    def as_dict(self):
        return {"name": self.name, "lhs": self.lhs, "satisfied": self.satisfied}


@dataclass(frozen=True)
class ConvexityCertificate:
    p: float
    k: float
    mode: str
    gamma: GammaTriple
    pi: PiQuadruple
    q: QPolynomial
    h_convex: bool
    h_reason: str
    hprime_convex: bool
    hprime_reason: str
    inequalities: tuple = ()
    stationary_points: tuple = field(default=())

    @property
    def certified(self):
        """Outcome of the certificate that was requested."""
        return self.hprime_convex if self.mode in MODES else self.h_convex

    @property
    def reason(self):
        return self.hprime_reason if self.mode in MODES else self.h_reason

    def as_dict(self):
        return {
            "p": self.p, "k": self.k, "mode": self.mode,
            "gamma": self.gamma.as_dict(), "pi": self.pi.as_dict(), "q": self.q.as_dict(),
            "inequalities": [iq.as_dict() for iq in self.inequalities],
            "h_convex": self.h_convex, "h_reason": self.h_reason,
            "hprime_convex": self.hprime_convex, "hprime_reason": self.hprime_reason,
            "certified": self.certified, "reason": self.reason,
        }


def gamma_coefficients(p, k):
    """Gamma coefficients, correctly rounded.

    They are evaluated in exact rational arithmetic from the float inputs:
    gamma1 vanishes on ``p = k + 1`` and the naive float evaluation loses
    all relative accuracy next to that line.
    """
    P, K = Fraction(float(p)), Fraction(float(k))
    g1 = 2 * P * P - (2 + 3 * K) * P + K * K + K
    g2 = 4 * P * P - (4 + 3 * K) * P - K * (K - 1)
    g3 = 2 * P * (P - 1)
    f1 = f2 = None
    if P > K + 1:
        d = P - K - 1
        f1 = float(d * (2 * P - K))
        f2 = float(d * (4 * P + K * (P - K + 1) / d))
    return GammaTriple(float(g1), float(g2), float(g3), f1, f2)


def pi_coefficients(p, k):
    p, k = float(p), float(k)
    return PiQuadruple(
        pi1=4 * p * (p - 1) * (p - 2),
        pi2=-12 * k * p * (p - 1) - 8 * p * k * (k - 1) - 2 * k * (k - 1) * (k - 2),
        pi3=k * k * (19 * p + 13 * k - 13),
        pi4=-14 * k**3,
    )


def qp_coefficients(p, k):
    pi = pi_coefficients(p, k)
    return QPolynomial(
        c3=pi.total,
        c2=3 * pi.pi1 + 2 * pi.pi2 + pi.pi3,
        c1=3 * pi.pi1 + pi.pi2,
        c0=pi.pi1,
    )


def qp_eval(q, k, s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise UsageError("Q_p is evaluated at s > 0 only")
    out = q.in_xi(s ** float(k))
    return float(out) if out.ndim == 0 else out


def pi_form(pi, k, s):
    """Unexpanded ``Pi1 a^3 + Pi2 s^k a^2 + Pi3 s^(2k) a + Pi4 s^(3k)``."""
    s = np.asarray(s, dtype=float)
    x = s ** float(k)
    a = 1.0 + x
    return pi.pi1 * a**3 + pi.pi2 * x * a**2 + pi.pi3 * x * x * a + pi.pi4 * x**3


def _positive(value, scale):
    return value > STRICT_RTOL * scale


def _h_verdict(p, k, gamma):
    if not k >= 2:
        return False, f"k={k:g} < 2: a is not C^2 at the origin"
    if not p > k + 1:
        return False, f"p={p:g} <= k+1={k + 1:g}"
    scale = max(abs(gamma.gamma1), abs(gamma.gamma2), abs(gamma.gamma3), 1.0)
    if not (_positive(gamma.gamma1, scale) and _positive(gamma.gamma2, scale)):
        return False, "gamma1 or gamma2 not positive"
    return True, "p > k+1, k >= 2, gamma1 > 0, gamma2 > 0"


def _sufficient(pi, q):
    scale = max(abs(pi.pi1), abs(pi.pi2), abs(pi.pi3), abs(pi.pi4), 1.0)
    ineqs = (
        Inequality("pi1+pi2+pi3+pi4 > 0", q.c3, _positive(q.c3, scale)),
        Inequality("3pi1+2pi2+pi3 > 0", q.c2, _positive(q.c2, scale)),
        Inequality("3pi1+pi2 > 0", q.c1, _positive(q.c1, scale)),
    )
    ok = all(iq.satisfied for iq in ineqs)
    failed = [iq.name for iq in ineqs if not iq.satisfied]
    reason = "all three coefficient inequalities hold" if ok else "failed: " + ", ".join(failed)
    return ok, reason, ineqs


def _sharp(pi, q):
    """Decide ``Q(X) > 0`` for every ``X > 0`` from the cubic's shape."""
    c3, c2, c1, c0 = q.coefficients()
    scale = max(abs(pi.pi1), abs(pi.pi2), abs(pi.pi3), abs(pi.pi4), 1.0)
    tiny = STRICT_RTOL * scale

    def z(c):
        return 0.0 if abs(c) <= tiny else c

    c3, c2, c1, c0 = z(c3), z(c2), z(c1), z(c0)
    coeffs = [c3, c2, c1, c0]
    nonzero = [c for c in coeffs if c != 0.0]
    ineqs = [
        Inequality("leading coefficient >= 0", c3, c3 >= 0),
        Inequality("Q(0+) >= 0", c0, c0 >= 0),
    ]
    if not nonzero:
        return False, "Q vanishes identically", tuple(ineqs), ()
    if nonzero[0] < 0:
        return False, "Q < 0 for large s (negative leading coefficient)", tuple(ineqs), ()
    if nonzero[-1] < 0:
        return False, "Q < 0 near s = 0 (negative lowest coefficient)", tuple(ineqs), ()

    # stationary points of Q in Xi: 3 c3 Xi^2 + 2 c2 Xi + c1 = 0
    if c3 != 0.0:
        disc = 4 * c2 * c2 - 12 * c3 * c1
        if disc < 0:
            roots = []
        else:
            sq = math.sqrt(disc)
            # numerically stable pair
            qq = -0.5 * (2 * c2 + math.copysign(sq, c2 if c2 != 0 else 1.0))
            roots = []
            if qq != 0.0:
                roots.append(qq / (3 * c3))
                roots.append(c1 / qq)
            else:
                roots.append(0.0)
    elif c2 != 0.0:
        roots = [-c1 / (2 * c2)]
    else:
        roots = []
    stationary = tuple(sorted(r for r in roots if r > 0 and math.isfinite(r)))
    for xi in stationary:
        val = float(q.in_xi(xi))
        ineqs.append(Inequality(f"Q(s#) > 0 at Xi={xi:.12g}", val, _positive(val, scale)))
    ok = all(iq.satisfied for iq in ineqs)
    if ok:
        reason = "Q > 0 on (0, inf): boundary behaviour and all stationary values positive"
    else:
        reason = "Q takes a nonpositive value at a stationary point"
    return ok, reason, tuple(ineqs), stationary


def certify_h_convex(p, k):
    """Certificate for convexity of ``s -> h(x, s)``."""
    p, k = float(p), float(k)
    gamma = gamma_coefficients(p, k)
    pi = pi_coefficients(p, k)
    q = qp_coefficients(p, k)
    ok, reason = _h_verdict(p, k, gamma)
    ineqs = (
        Inequality("p > k+1", p - k - 1, p > k + 1),
        Inequality("k >= 2", k - 2, k >= 2),
        Inequality("gamma1 > 0", gamma.gamma1, gamma.gamma1 > 0),
        Inequality("gamma2 > 0", gamma.gamma2, gamma.gamma2 > 0),
    )
    return ConvexityCertificate(p, k, "h", gamma, pi, q, ok, reason, False,
                                "not evaluated", ineqs)


def certify_hprime_convex(p, k, mode=SHARP):
    """Certificate for strict convexity of ``s -> h'(x, s)`` on ``(0, inf)``."""
    p, k = float(p), float(k)
    if not k > 1:
        raise UsageError(f"k must exceed 1, got {k}")
    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {mode!r}")
    gamma = gamma_coefficients(p, k)
    pi = pi_coefficients(p, k)
    q = qp_coefficients(p, k)
    h_ok, h_reason = _h_verdict(p, k, gamma)
    if mode == SUFFICIENT:
        ok, reason, ineqs = _sufficient(pi, q)
        stationary = ()
    else:
        ok, reason, ineqs, stationary = _sharp(pi, q)
    return ConvexityCertificate(p, k, mode, gamma, pi, q, h_ok, h_reason, ok, reason,
                                ineqs, stationary)


def find_pk(k, mode=SHARP, tol=1e-3, ceiling=None, p_min=2.0):
    """Infimum of the certified ray ``[p_k, ceiling]``.

    Scans upward from ``p_min`` with step ``tol``; the last failing sample is
    then refined by bisection against the next (certified) sample.
    """
    k = float(k)
    if not k > 1:
        raise UsageError(f"k must exceed 1, got {k}")
    if not tol > 0:
        raise UsageError(f"tol must be positive, got {tol}")
    if ceiling is None:
        ceiling = 4 * k + 8

    if mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}, got {mode!r}")
    decide = _sufficient if mode == SUFFICIENT else _sharp

    def ok(p):
        # same verdict as certify_hprime_convex, without building the report
        return decide(pi_coefficients(p, k), qp_coefficients(p, k))[0]

    n = int(math.ceil((ceiling - p_min) / tol))
    grid = p_min + tol * np.arange(n + 1)
    grid[-1] = min(grid[-1], ceiling)
    verdicts = [ok(p) for p in grid]
    if not verdicts[-1]:
        raise NotFoundError(f"no certified p below the ceiling {ceiling:g} (k={k:g}, mode={mode})")
    failing = [i for i, v in enumerate(verdicts) if not v]
    if not failing:
        return float(p_min)
    i = failing[-1]
    lo, hi = float(grid[i]), float(grid[i + 1])
    while hi - lo > 1e-3 * tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ProfileTable:
    s: np.ndarray
    values: np.ndarray
    order: int

    @property
    def min(self):
        return float(np.min(self.values))

    @property
    def argmin(self):
        return float(self.s[int(np.argmin(self.values))])

    @property
    def max(self):
        return float(np.max(self.values))

    def summary(self):
        return {"order": self.order, "samples": int(self.s.size), "min": self.min,
                "argmin": self.argmin, "max": self.max}


def scan_profile(bundle, order, s_range, samples):
    """Tabulate ``h''`` or ``h'''`` at uniformly spaced s in ``s_range``.

    A left endpoint of 0 is treated as open: the samples are then
    ``lo + (hi - lo) * i / samples`` for ``i = 1..samples``.
    """
    if order not in (2, 3):
        raise UsageError(f"scan order must be 2 or 3, got {order!r}")
    lo, hi = float(s_range[0]), float(s_range[1])
    if not (0 <= lo < hi):
        raise UsageError(f"s_range must satisfy 0 <= lo < hi, got {s_range}")
    if int(samples) < 2:
        raise UsageError("samples must be >= 2")
    samples = int(samples)
    if lo == 0.0:
        s = lo + (hi - lo) * np.arange(1, samples + 1) / samples
    else:
        s = np.linspace(lo, hi, samples)
    values = bundle.h(None if bundle.spec.psi.is_constant else 0.0, s, order)
    return ProfileTable(s, np.asarray(values, dtype=float), order)
