"""Finite nonnegative measures on [0, oo) with a distinguished condensate at 0.

A measure here is a condensate mass sitting exactly at the origin plus a
finite list of weighted atoms on (0, oo).  This is the state type shared by
the deterministic solver, the particle simulator and the profile solver:
grid-based solvers simply place their atoms at grid nodes.
"""

import io
import math
import warnings

import numpy as np
from scipy.optimize import linprog


class Measure:
    """Condensate mass plus a sorted, merged atom list on (0, oo).

    Parameters
    ----------
    condensate : float
        Mass at x = 0.  Must be nonnegative.
    atoms : iterable of (position, weight) pairs, optional
        Positions must be >= 0 and weights >= 0.  Atoms at position 0 are
        folded into the condensate; equal positions are merged by weight
        addition; zero-weight atoms are dropped.  The stored list is
        strictly increasing in position.
    """

    __slots__ = ("condensate", "xs", "ws")

    def __init__(self, condensate=0.0, atoms=()):
        condensate = float(condensate)
        if condensate < 0.0:
            raise ValueError("condensate must be nonnegative")
        atoms = list(atoms)
        if atoms:
            xs = np.asarray([float(a[0]) for a in atoms])
            ws = np.asarray([float(a[1]) for a in atoms])
        else:
            xs = np.empty(0)
            ws = np.empty(0)
        if np.any(xs < 0.0):
            raise ValueError("atom positions must be nonnegative")
        if np.any(ws < 0.0):
            raise ValueError("atom weights must be nonnegative")
        # atoms parked exactly at the origin are condensate by definition
        at_zero = xs == 0.0
        if np.any(at_zero):
            condensate += float(ws[at_zero].sum())
            xs, ws = xs[~at_zero], ws[~at_zero]
        if xs.size:
            order = np.argsort(xs, kind="stable")
            xs, ws = xs[order], ws[order]
            # merge equal positions by weight addition
            uniq, inverse = np.unique(xs, return_inverse=True)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inverse, ws)
            xs, ws = uniq, merged
            keep = ws > 0.0
            xs, ws = xs[keep], ws[keep]
        if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ws)):
            raise ValueError("atom positions and weights must be finite")
        object.__setattr__(self, "condensate", condensate)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ws", ws)

    # the value is immutable after construction
    def __setattr__(self, name, value):
        raise AttributeError("Measure is immutable")

    def __repr__(self):
        return "Measure(condensate=%r, atoms=%d, mass=%r)" % (
            self.condensate, self.xs.size, total_mass(self))

    def __eq__(self, other):
        if not isinstance(other, Measure):
            return NotImplemented
        return (self.condensate == other.condensate
                and self.xs.shape == other.xs.shape
                and bool(np.all(self.xs == other.xs))
                and bool(np.all(self.ws == other.ws)))

    def __hash__(self):
        return hash((self.condensate, self.xs.tobytes(), self.ws.tobytes()))

    @property
    def atoms(self):
        """List of (position, weight) pairs in ascending position order."""
        return list(zip(self.xs.tolist(), self.ws.tolist()))


class ScalingParams:
    """Parameters (kappa, lambda) of the two-parameter scaling transform."""

    __slots__ = ("kappa", "lam")

    def __init__(self, kappa, lam):
        kappa = float(kappa)
        lam = float(lam)
        if kappa <= 0.0 or lam <= 0.0:
            raise ValueError("kappa and lambda must be positive")
        self.kappa = kappa
        self.lam = lam


def total_mass(mu):
    """Total mass: condensate plus the sum of atom weights."""
    return mu.condensate + math.fsum(mu.ws.tolist())


def moment(mu, alpha):
    """alpha-th moment of the measure.

    The condensate contributes only at alpha = 0 (x^alpha is 0 at the
    origin for alpha > 0 and undefined for alpha < 0; negative powers of
    the condensate are excluded).  Values for alpha <= -3/2 are still
    computed for the atoms but flagged with a warning, since that is
    outside the range where the profiles of interest have finite moments.
    """
    alpha = float(alpha)
    if alpha <= -1.5:
        warnings.warn("moment order %g is at or below -3/2; atoms-only value"
                      % alpha, RuntimeWarning, stacklevel=2)
    out = math.fsum((mu.ws * mu.xs ** alpha).tolist())
    if alpha == 0.0:
        out += mu.condensate
    return out


def near_mass(mu, delta):
    """Mass of [0, delta]: condensate plus atoms with position <= delta."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    return mu.condensate + math.fsum(mu.ws[mu.xs <= delta].tolist())


def tail_mass(mu, R):
    """Mass of [R, oo): atoms with position >= R (condensate excluded)."""
    if R <= 0.0:
        raise ValueError("R must be positive")
    return math.fsum(mu.ws[mu.xs >= R].tolist())


def rescale(mu, p):
    """Snapshot scaling transform: kappa times the pushforward under y -> y/lambda.

    Mass scales by kappa exactly, the first moment by kappa/lambda.
    """
    return Measure(p.kappa * mu.condensate,
                   zip((mu.xs / p.lam).tolist(),
                       (p.kappa * mu.ws).tolist()))


def bl_distance(mu, nu):
    """Bounded-Lipschitz distance between two measures.

    sup of integral of f d(mu - nu) over f with sup-norm <= 1 and Lipschitz
    constant <= 1.  For atom+condensate measures the supremum is attained
    by a function that is piecewise linear between support points, so the
    problem reduces to a small linear program over the f-values at the
    sorted union support (adjacent-difference constraints are sufficient
    for the Lipschitz condition on the line).  Solved exactly with HiGHS.
    """
    # signed weight at each union support point (0 carries the condensates)
    pts = {0.0: mu.condensate - nu.condensate}
    for x, w in zip(mu.xs.tolist(), mu.ws.tolist()):
        pts[x] = pts.get(x, 0.0) + w
    for x, w in zip(nu.xs.tolist(), nu.ws.tolist()):
        pts[x] = pts.get(x, 0.0) - w
    s = np.asarray(sorted(pts))
    rho = np.asarray([pts[x] for x in s])
    if not np.any(rho != 0.0):
        return 0.0
    n = s.size
    if n == 1:
        return abs(float(rho[0]))
    # maximize rho.f  s.t.  |f| <= 1, |f_{i+1} - f_i| <= s_{i+1} - s_i
    gaps = np.diff(s)
    rows = []
    ub = []
    for i in range(n - 1):
        r = np.zeros(n)
        r[i + 1], r[i] = 1.0, -1.0
        rows.append(r)
        ub.append(gaps[i])
        rows.append(-r)
        ub.append(gaps[i])
    res = linprog(-rho, A_ub=np.asarray(rows), b_ub=np.asarray(ub),
                  bounds=[(-1.0, 1.0)] * n, method="highs")
    if not res.success:
        raise RuntimeError("bounded-Lipschitz LP failed: %s" % res.message)
    return float(-res.fun)


def to_text(mu):
    """Serialize to the text record format.

    First line ``condensate=<decimal>``, then one ``x,w`` line per atom in
    ascending position order, full decimal precision.
    """
    buf = io.StringIO()
    buf.write("condensate=%s\n" % repr(mu.condensate))
    for x, w in zip(mu.xs.tolist(), mu.ws.tolist()):
        buf.write("%s,%s\n" % (repr(x), repr(w)))
    return buf.getvalue()


def from_text(text):
    """Parse the text record produced by :func:`to_text`."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("condensate="):
        raise ValueError("measure record must start with 'condensate='")
    condensate = float(lines[0].split("=", 1)[1])
    atoms = []
    for ln in lines[1:]:
        x, w = ln.split(",")
        atoms.append((float(x), float(w)))
    return Measure(condensate, atoms)
