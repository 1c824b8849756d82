"""Collision functional against test functions, and weak-form residuals.

The weak right-hand side is the double sum over atom pairs of
w_i w_j K(x_i, x_j) Delta_phi(x_i, x_j) with the half-weight convention on
the diagonal.  Pairs involving the condensate contribute exactly zero:
(xy)^(-1/2) Delta_phi(x, y) extends continuously by 0 as y -> 0, so they
are skipped analytically rather than evaluated.
"""

import math

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq

from .kernel import TestFunction, delta_phi, kernel_reg
from .measure import near_mass, total_mass


class RhsOptions:
    """Options for the weak right-hand side.

    eps is the kernel regularization (0 for the bare kernel).  The i = j
    self-term is an O(w^2) artifact for atom approximations of continuous
    data; include_diagonal=False drops it so refinement studies (and the
    particle generator, which has no self-interaction) can isolate it.
    """

    __slots__ = ("eps", "include_diagonal")

    def __init__(self, eps=0.0, include_diagonal=True):
        if eps < 0.0:
            raise ValueError("eps must be nonnegative")
        self.eps = float(eps)
        self.include_diagonal = bool(include_diagonal)


class TimeTestFunction:
    """Time-parametrized test function phi(t, .).

    ``at(t)`` returns the spatial TestFunction at time t and ``dt_at(t)``
    the spatial evaluator of the partial time derivative (None means the
    function is constant in time).
    """

    __slots__ = ("at", "dt_at")

    def __init__(self, at, dt_at=None):
        self.at = at
        self.dt_at = dt_at

    @classmethod
    def static(cls, phi):
        return cls(at=lambda t: phi, dt_at=None)


def integrate_phi(mu, phi):
    """Integral of phi against the measure, condensate included at phi(0)."""
    terms = (mu.ws * np.asarray(phi.value(mu.xs), dtype=float)).tolist()
    if mu.condensate:
        terms.append(mu.condensate * float(np.asarray(phi.value(0.0))))
    return math.fsum(terms)


def weak_rhs(mu, phi, opt=None):
    """Weak collision functional of the measure against phi.

    Ordered pairs x_i > x_j contribute w_i w_j K(x_i, x_j) Delta_phi, the
    diagonal contributes with weight 1/2.  Compensated summation keeps the
    result independent of pair ordering at tolerance level.
    """
    if opt is None:
        opt = RhsOptions()
    n = mu.xs.size
    if n == 0:
        return 0.0
    xs, ws = mu.xs, mu.ws
    terms = []
    if n > 1:
        a, b = np.triu_indices(n, k=1)
        hi, lo = xs[b], xs[a]  # positions ascending, so x_b > x_a
        k = kernel_reg(hi, lo, opt.eps)
        d = delta_phi(phi, hi, lo)
        terms.append(ws[a] * ws[b] * k * d)
    if opt.include_diagonal:
        k = kernel_reg(xs, xs, opt.eps)
        d = delta_phi(phi, xs, xs)
        terms.append(0.5 * ws * ws * k * d)
    if not terms:
        return 0.0
    return math.fsum(np.concatenate(terms).tolist())


def weak_residual(traj, phi_of_t, opt=None):
    """Relative residual of the weak identity over a trajectory.

    traj is a sequence of (time, Measure) with strictly increasing times.
    Returns |LHS - RHS| / (1 + |LHS|) where LHS is the difference of the
    phi-integrals at the endpoints and RHS the trapezoidal time quadrature
    of the phi_s-integral plus the collision functional.
    """
    if opt is None:
        opt = RhsOptions()
    if isinstance(phi_of_t, TestFunction):
        phi_of_t = TimeTestFunction.static(phi_of_t)
    traj = list(traj)
    if len(traj) < 2:
        raise ValueError("need at least two trajectory samples")
    times = np.asarray([t for t, _ in traj])
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("trajectory times must be strictly increasing")
    lhs = (integrate_phi(traj[-1][1], phi_of_t.at(times[-1]))
           - integrate_phi(traj[0][1], phi_of_t.at(times[0])))
    vals = []
    for t, mu in traj:
        v = weak_rhs(mu, phi_of_t.at(t), opt)
        if phi_of_t.dt_at is not None:
            v += integrate_phi(mu, phi_of_t.dt_at(t))
        vals.append(v)
    rhs = float(trapezoid(np.asarray(vals), times))
    return abs(lhs - rhs) / (1.0 + abs(lhs))


# ---------------------------------------------------------------------------
# The pi^2/12 identity
# ---------------------------------------------------------------------------

def pi2_identity(eps, phi):
    """Double integral of Delta_phi(x, y) / ((x+eps)(y+eps)) over x > y >= 0.

    As eps -> 0 the value converges to phi(0) pi^2/12.  The quadrature uses
    the substitution u = x - y: the integrand vanishes for u beyond the
    support of phi, and the phi(u) contribution of the infinite strip has
    the closed form phi(u) ln((u+eps)/eps)/u.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    S = phi.support_upper
    if not math.isfinite(S):
        raise ValueError("pi2_identity needs a compactly supported phi")

    def inner(u):
        if u >= S:
            return 0.0
        # closed form of the phi(u) term over y in (0, oo)
        pu = float(np.asarray(phi.value(u)))
        if u == 0.0:
            tail = pu / eps
        else:
            tail = pu * math.log1p(u / eps) / u

        def f(y):
            return (float(np.asarray(phi.value(2.0 * y + u)))
                    - 2.0 * float(np.asarray(phi.value(y + u)))) \
                / ((y + u + eps) * (y + eps))

        val, err = quad(f, 0.0, S, epsabs=1e-12, epsrel=1e-10, limit=200)
        return tail + val

    out, err = quad(inner, 0.0, S, epsabs=1e-11, epsrel=1e-9, limit=200)
    if abs(err) > 1e-6 * (1.0 + abs(out)):
        raise RuntimeError("pi2_identity quadrature failed to converge")
    return out


def pi2_extrapolate(phi, eps_ladder=(1e-2, 3e-3, 1e-3)):
    """Evaluate pi2_identity on an eps ladder and extrapolate to eps = 0.

    Fits I(eps) = I0 + C eps^q through the last three ladder values
    (Richardson-style with estimated order); falls back to Aitken's delta
    squared if the order estimate has no root.  Returns (I0, values).
    """
    eps = sorted(eps_ladder, reverse=True)
    vals = [pi2_identity(e, phi) for e in eps]
    e0, e1, e2 = eps[-3], eps[-2], eps[-1]
    i0, i1, i2 = vals[-3], vals[-2], vals[-1]
    d0, d1 = i0 - i1, i1 - i2
    if d1 == 0.0 or d0 == 0.0:
        return i2, vals

    def mismatch(q):
        return d0 / d1 - (e0 ** q - e1 ** q) / (e1 ** q - e2 ** q)

    try:
        q = brentq(mismatch, 0.05, 4.0)
        c = d1 / (e1 ** q - e2 ** q)
        return i2 - c * e2 ** q, vals
    except ValueError:
        denom = d1 - d0
        if denom == 0.0:
            return i2, vals
        return i2 - d1 * d1 / denom, vals


# ---------------------------------------------------------------------------
# Integral inequality checks along trajectories
# ---------------------------------------------------------------------------

def key_inequality_check(traj, c, tol=1e-9):
    """Lower bound on the near-origin mass by the collision activity above c.

    Verifies  mass([0, c]) at the final time  >=  (1/2c) * time integral of
    the double sum over atoms at positions >= c of
    w w' (x x')^(-1/2) (c - |x - x'|)_+  (all ordered pairs, trapezoidal in
    time).  Returns (holds, margin).
    """
    if c <= 0.0:
        raise ValueError("c must be positive")
    traj = list(traj)
    times = np.asarray([t for t, _ in traj])
    vals = []
    for _, mu in traj:
        sel = mu.xs >= c
        x, w = mu.xs[sel], mu.ws[sel]
        if x.size == 0:
            vals.append(0.0)
            continue
        gap = np.maximum(c - np.abs(x[:, None] - x[None, :]), 0.0)
        kk = 1.0 / np.sqrt(x[:, None] * x[None, :])
        vals.append(float(np.sum(w[:, None] * w[None, :] * kk * gap)))
    rhs = float(trapezoid(np.asarray(vals), times)) / (2.0 * c)
    lhs = near_mass(traj[-1][1], c)
    margin = lhs - rhs
    return margin >= -tol * (1.0 + abs(lhs)), margin


def sqrt_bound_check(traj, r, t1, t2, tol=1e-9):
    """Averaged sqrt(r) bound on the mass of (0, r].

    Verifies  integral over [t1, t2] of mass((0, r], s) ds
    <= 12 sqrt((t2 - t1) M) sqrt(r)  with M the initial total mass.
    Returns (holds, margin).
    """
    traj = list(traj)
    times = np.asarray([t for t, _ in traj])
    if not (times[0] <= t1 <= t2 <= times[-1]):
        raise ValueError("[t1, t2] must lie within the trajectory span")
    sel = (times >= t1) & (times <= t2)
    ts = times[sel]
    vals = np.asarray([near_mass(mu, r) - mu.condensate
                       for (t, mu), keep in zip(traj, sel) if keep])
    lhs = float(trapezoid(vals, ts)) if ts.size > 1 else 0.0
    m0 = total_mass(traj[0][1])
    rhs = 12.0 * math.sqrt((t2 - t1) * m0 * r)
    margin = rhs - lhs
    return margin >= -tol * (1.0 + rhs), margin
