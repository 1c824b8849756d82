"""Test-function algebra: second differences, cutoffs and interaction kernels.

The collision operator only ever acts on test functions through the second
difference Delta_phi(x, y) = phi(x+y) - 2 phi(x) + phi(x-y) on the half
quadrant x >= y >= 0, its epsilon-regularized variant, and the regularized
kernel 1/sqrt((x+eps)(y+eps)).
"""

import math

import numpy as np


class TestFunction:
    """Evaluator bundle (value, first and second derivative) with metadata.

    All callables accept scalars or numpy arrays.  ``d2`` may be None for
    functions that are only C^1; operations needing the second derivative
    state that as a precondition.  ``support_upper`` is the point beyond
    which the value is identically zero (math.inf for unbounded support),
    and ``value_at_infinity`` the limit at infinity when it exists.
    """

    # not a test case, despite the name pytest-collectible pattern
    __test__ = False

    __slots__ = ("value", "d1", "d2", "support_upper", "value_at_infinity",
                 "name")

    def __init__(self, value, d1, d2=None, support_upper=math.inf,
                 value_at_infinity=None, name=""):
        self.value = value
        self.d1 = d1
        self.d2 = d2
        self.support_upper = support_upper
        self.value_at_infinity = value_at_infinity
        self.name = name

    def __call__(self, x):
        return self.value(x)

    def __repr__(self):
        return "TestFunction(%s)" % (self.name or "anonymous")


def delta_phi(phi, x, y):
    """Second difference phi(x+y) - 2 phi(x) + phi(x-y), for x >= y >= 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < y):
        raise ValueError("delta_phi requires x >= y")
    if np.any(y < 0):
        raise ValueError("delta_phi requires y >= 0")
    out = np.asarray(phi.value(x + y) - 2.0 * phi.value(x)
                     + phi.value(x - y))
    return float(out) if out.ndim == 0 else out


def eta_eps(x, eps):
    """Cubic smoothstep cutoff: 0 on [0, eps], 1 on [2 eps, oo).

    On [eps, 2 eps] it is s((x-eps)/eps) with s(u) = u^2 (3 - 2u), which is
    nondecreasing with maximum slope 1.5/eps (within the allowed 2/eps).
    """
    if not 0.0 < eps:
        raise ValueError("eps must be positive")
    u = np.clip((np.asarray(x, dtype=float) - eps) / eps, 0.0, 1.0)
    out = u * u * (3.0 - 2.0 * u)
    return float(out) if out.ndim == 0 else out


def eta_eps_d1(x, eps):
    """Derivative of :func:`eta_eps` (piecewise; 6u(1-u)/eps inside)."""
    u = (np.asarray(x, dtype=float) - eps) / eps
    inside = (u > 0.0) & (u < 1.0)
    out = np.where(inside, 6.0 * u * (1.0 - u) / eps, 0.0)
    return float(out) if out.ndim == 0 else out


def delta_phi_eps(phi, x, y, eps):
    """Regularized second difference.

    Zero when y < eps; otherwise the blend
    (1 - eta_eps(x-y)) (phi(2x) - 2 phi(x)) + eta_eps(x-y) Delta_phi(x, y),
    which coincides with Delta_phi once x - y >= 2 eps.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < y):
        raise ValueError("delta_phi_eps requires x >= y")
    eta = eta_eps(x - y, eps)
    out = np.where(
        y < eps,
        0.0,
        (1.0 - eta) * (phi.value(2.0 * x) - 2.0 * phi.value(x))
        + eta * (phi.value(x + y) - 2.0 * phi.value(x) + phi.value(x - y)),
    )
    return float(out) if out.ndim == 0 else out


def kernel_reg(x, y, eps):
    """Regularized interaction kernel ((x+eps)(y+eps))^(-1/2).

    Bounded by 1/eps for eps > 0; eps = 0 recovers the bare (xy)^(-1/2)
    and then requires x, y > 0.
    """
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if eps == 0.0 and (np.any(x <= 0.0) or np.any(y <= 0.0)):
        raise ValueError("bare kernel is singular at zero size")
    out = 1.0 / np.sqrt((x + eps) * (y + eps))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Test-function families
# ---------------------------------------------------------------------------

def _constant(c=1.0):
    return TestFunction(
        value=lambda x, c=c: np.full_like(np.asarray(x, dtype=float), c),
        d1=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        support_upper=math.inf, value_at_infinity=c,
        name="constant(%g)" % c)


def _saturating(a=1.0):
    # x / (1 + a x): concave, increasing, saturates at 1/a
    return TestFunction(
        value=lambda x, a=a: np.asarray(x, dtype=float)
        / (1.0 + a * np.asarray(x, dtype=float)),
        d1=lambda x, a=a: (1.0 + a * np.asarray(x, dtype=float)) ** -2,
        d2=lambda x, a=a: -2.0 * a * (1.0 + a * np.asarray(x, dtype=float)) ** -3,
        support_upper=math.inf, value_at_infinity=1.0 / a,
        name="saturating(%g)" % a)


def _smoothed_hinge(K=1.0, width=None):
    # smoothed (1 - K x)_+ : affine, quadratic blend of half-width s around
    # the kink at 1/K, then identically zero.  Convex, C^1, phi(0) = 1.
    u = 1.0 / K
    s = width if width is not None else 0.25 * u
    if not 0.0 < s < u:
        raise ValueError("smoothing width must lie in (0, 1/K)")

    def value(x, K=K, u=u, s=s):
        x = np.asarray(x, dtype=float)
        blend = K * (u + s - x) ** 2 / (4.0 * s)
        return np.where(x <= u - s, 1.0 - K * x,
                        np.where(x < u + s, blend, 0.0))

    def d1(x, K=K, u=u, s=s):
        x = np.asarray(x, dtype=float)
        blend = -K * (u + s - x) / (2.0 * s)
        return np.where(x <= u - s, -K, np.where(x < u + s, blend, 0.0))

    def d2(x, K=K, u=u, s=s):
        x = np.asarray(x, dtype=float)
        return np.where((x > u - s) & (x < u + s), K / (2.0 * s), 0.0)

    return TestFunction(value, d1, d2, support_upper=u + s,
                        value_at_infinity=0.0,
                        name="smoothed_hinge(K=%g)" % K)


def _bump(center=0.0, radius=1.0):
    # (1 - u^2)^3 with u = (x - center)/radius: C^2, compact support
    c, r = float(center), float(radius)

    def value(x, c=c, r=r):
        u = (np.asarray(x, dtype=float) - c) / r
        return np.where(np.abs(u) < 1.0, np.maximum(1.0 - u * u, 0.0) ** 3, 0.0)

    def d1(x, c=c, r=r):
        u = (np.asarray(x, dtype=float) - c) / r
        return np.where(np.abs(u) < 1.0,
                        -6.0 * u * np.maximum(1.0 - u * u, 0.0) ** 2 / r, 0.0)

    def d2(x, c=c, r=r):
        u = (np.asarray(x, dtype=float) - c) / r
        w = np.maximum(1.0 - u * u, 0.0)
        return np.where(np.abs(u) < 1.0,
                        (24.0 * u * u * w - 6.0 * w * w) / (r * r), 0.0)

    return TestFunction(value, d1, d2, support_upper=c + r,
                        value_at_infinity=0.0,
                        name="bump(c=%g,r=%g)" % (c, r))


def _log_bump(center=1.0, halfwidth=1.0):
    # C^2 bump in log size: vanishes identically near the origin, so it is
    # admissible as a theta test function on (0, oo].
    c, h = math.log(center), float(halfwidth)

    def _u(x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0.0, x, 1.0)
        return np.where(x > 0.0, (np.log(safe) - c) / h, 2.0), safe

    def value(x, c=c, h=h):
        u, _ = _u(x)
        return np.where(np.abs(u) < 1.0, np.maximum(1.0 - u * u, 0.0) ** 3, 0.0)

    def d1(x, c=c, h=h):
        u, safe = _u(x)
        inner = -6.0 * u * np.maximum(1.0 - u * u, 0.0) ** 2 / (h * safe)
        return np.where(np.abs(u) < 1.0, inner, 0.0)

    def d2(x, c=c, h=h):
        u, safe = _u(x)
        w = np.maximum(1.0 - u * u, 0.0)
        # d2 of b(u(x)) with u = (ln x - c)/h
        bu = -6.0 * u * w * w
        buu = 24.0 * u * u * w - 6.0 * w * w
        inner = (buu / (h * h) - bu / h) / (safe * safe)
        return np.where(np.abs(u) < 1.0, inner, 0.0)

    return TestFunction(value, d1, d2,
                        support_upper=math.exp(c + h), value_at_infinity=0.0,
                        name="log_bump(c=%g,h=%g)" % (math.exp(c), h))


def _log_plateau(rise_at=1.0, halfwidth=1.0):
    # C^2 ramp in log size from 0 to 1 (quintic smoothstep): vanishes near
    # the origin and has limit 1 at infinity with derivatives -> 0.
    c, h = math.log(rise_at), float(halfwidth)

    def _u(x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0.0, x, 1.0)
        return np.clip(((np.log(safe) - c) / h + 1.0) / 2.0, 0.0, 1.0), safe

    def value(x):
        u, _ = _u(x)
        return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)

    def d1(x):
        u, safe = _u(x)
        su = 30.0 * u * u * (1.0 - u) ** 2
        return np.where((u > 0.0) & (u < 1.0), su / (2.0 * h * safe), 0.0)

    def d2(x):
        u, safe = _u(x)
        su = 30.0 * u * u * (1.0 - u) ** 2
        suu = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
        inner = (suu / (2.0 * h) - su) / (2.0 * h * safe * safe)
        return np.where((u > 0.0) & (u < 1.0), inner, 0.0)

    return TestFunction(value, d1, d2, support_upper=math.inf,
                        value_at_infinity=1.0,
                        name="log_plateau(at=%g)" % math.exp(c))


_KINDS = {
    "constant": _constant,
    "saturating": _saturating,
    "smoothed_hinge": _smoothed_hinge,
    "bump": _bump,
    "log_bump": _log_bump,
    "log_plateau": _log_plateau,
}


def basis(kind, **params):
    """Build a list of test functions of the given kind.

    Scalar parameters produce a single function; passing a list for one
    parameter produces one function per entry.
    """
    if kind not in _KINDS:
        raise ValueError("unknown test-function kind %r" % kind)
    ctor = _KINDS[kind]
    list_keys = [k for k, v in params.items() if isinstance(v, (list, tuple))]
    if not list_keys:
        return [ctor(**params)]
    if len(list_keys) > 1:
        raise ValueError("only one parameter may be a list")
    key = list_keys[0]
    out = []
    for v in params[key]:
        p = dict(params)
        p[key] = v
        out.append(ctor(**p))
    return out


def phi_basis():
    """Standard 10-function C^1 basis for weak-form residual checks."""
    return (
        basis("constant")
        + basis("saturating", a=[0.3, 1.0, 3.0])
        + basis("bump", center=0.0, radius=[1.0, 4.0])
        + [_bump(0.5, 0.5), _bump(2.0, 1.5), _bump(8.0, 6.0)]
        + basis("smoothed_hinge", K=1.0)
    )


def theta_basis(x_lo=0.05, x_hi=30.0, n=12):
    """C^2 basis vanishing near the origin, for profile stationarity checks.

    n-1 log-spaced C^2 bumps on [x_lo, x_hi] plus one smooth plateau that
    tends to 1 at infinity.  The constant function is deliberately absent:
    it annihilates both sides of the stationarity identity.
    """
    centers = np.geomspace(x_lo, x_hi, n - 1)
    h = 1.25 * (math.log(x_hi) - math.log(x_lo)) / (n - 2)
    out = [_log_bump(c, h) for c in centers]
    out.append(_log_plateau(rise_at=math.sqrt(x_lo * x_hi), halfwidth=h))
    return out
