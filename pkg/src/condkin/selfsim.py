"""Self-similar energy profile via pseudo-time relaxation.

The energy density Psi = x Phi of the self-similar variables obeys a
regularized evolution with two competing mechanisms on [eps, oo): inward
transport with velocity -x eta_eps(x)/2, and a collision operator with
kernel (xy)^(-3/2) that moves energy outward.  Driving this evolution to
stationarity yields the profile; stationarity is measured weakly, against
a basis of C^2 test functions vanishing near the origin.

Discretization notes.  On a logarithmic grid the transport field is a
uniform drift in log x wherever eta_eps = 1, so with the canonical step
dt = 2 ln(node ratio) the exact characteristic maps node k onto node k-1
and transport is a plain index shift (no numerical diffusion).  Nodes
still inside the cutoff ramp follow the exact characteristic integrated
by RK4 and are re-deposited with the two-point moment-preserving split.
Collision deposits reuse the fixed-pivot split; the macro step is a
Strang composition (half collision, transport, half collision) with Heun
substeps inside the collision half-steps, so the stationarity defect of
the fixed point is second order in the step size.
"""

import math

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .kernel import eta_eps
from .measure import Measure
from .pde import GridSpec, split_deposit
from .weakform import RhsOptions, weak_rhs


def constraint_value(nodes, psi):
    """The invariant-set functional: sum of (x-2)_+^2 / x against Psi."""
    return float(np.sum(np.maximum(nodes - 2.0, 0.0) ** 2 / nodes * psi))


class ProfileState:
    """Energy weights psi on a log grid over [eps, x_max], plus ledger."""

    def __init__(self, grid, eps, psi=None, E=0.0, pseudo_time=0.0,
                 overflow=0.0):
        if abs(grid.x_min - eps) > 1e-12 * eps:
            raise ValueError("profile grid must start at eps")
        self.grid = grid
        self.eps = float(eps)
        self.nodes = grid.nodes()
        self.psi = (np.zeros(self.nodes.size) if psi is None
                    else np.asarray(psi, dtype=float).copy())
        self.E = float(E)
        self.pseudo_time = float(pseudo_time)
        self.overflow = float(overflow)

    def copy(self):
        return ProfileState(self.grid, self.eps, self.psi, self.E,
                            self.pseudo_time, self.overflow)

    def energy(self):
        return float(np.sum(self.psi))

    def constraint(self):
        return constraint_value(self.nodes, self.psi)

    @property
    def shift_dt(self):
        """Pseudo-time for the drift to traverse exactly one node spacing."""
        return 2.0 * math.log(self.nodes[1] / self.nodes[0])


def init_profile(E, grid, eps):
    """Seed profile proportional to x exp(-x), normalized to energy E."""
    if E < 0.0:
        raise ValueError("E must be nonnegative")
    state = ProfileState(grid, eps, E=E)
    if E == 0.0:
        return state
    x = state.nodes
    edges = np.concatenate((np.sqrt(x[:-1] * x[1:]), [x[-1]]))
    edges = np.concatenate(([x[0]], edges))
    w = x * np.exp(-x) * np.diff(edges)
    for _ in range(40):
        psi = E * w / np.sum(w)
        if constraint_value(x, psi) <= 36.0 * E * E:
            state.psi = psi
            return state
        # pull the seed toward smaller support and retry
        w = w * np.exp(-0.5 * x)
    raise RuntimeError("could not build a seed inside the invariant set")


# ---------------------------------------------------------------------------
# Transport
# ---------------------------------------------------------------------------

def _characteristic(x, dt, eps):
    """Exact drift along dx/ds = -x eta_eps(x)/2 for time dt (x scalar)."""
    if x <= eps:
        return x
    z = x * math.exp(-0.5 * dt)
    if z >= 2.0 * eps:
        return z  # the cutoff is identically 1 along the whole path
    # integrate through the ramp with RK4 substeps
    z = x
    m = 16
    h = dt / m
    for _ in range(m):
        k1 = -0.5 * z * eta_eps(z, eps)
        y2 = z + 0.5 * h * k1
        k2 = -0.5 * y2 * eta_eps(y2, eps)
        y3 = z + 0.5 * h * k2
        k3 = -0.5 * y3 * eta_eps(y3, eps)
        y4 = z + h * k3
        k4 = -0.5 * y4 * eta_eps(y4, eps)
        z = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return max(z, eps)


_transport_cache = {}


def _transport_matrix(nodes, eps, dt):
    """Sparse map psi -> transported psi (semi-Lagrangian, conservative)."""
    key = (nodes.tobytes(), eps, dt)
    if key in _transport_cache:
        return _transport_cache[key]
    n = nodes.size
    rows, cols, data = [], [], []
    for k in range(n):
        z = _characteristic(nodes[k], dt, eps)
        if k > 0 and abs(z - nodes[k - 1]) < 1e-9 * z:
            # exact node shift: the canonical dt lands k on k-1 wherever
            # the cutoff has saturated, with no interpolation spread
            rows.append(k - 1)
            cols.append(k)
            data.append(1.0)
            continue
        for row, coeff in split_deposit(nodes, max(z, nodes[0]), 1.0):
            if row < n:
                rows.append(row)
                cols.append(k)
                data.append(coeff)
    mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    _transport_cache[key] = mat
    return mat


def transport_step(state, dt):
    """Advect psi toward the origin along exact characteristics (in place).

    Conservative for any dt (parcels are moved along the exact flow map
    and re-deposited with the moment-preserving split), so no CFL limit
    applies; with dt equal to state.shift_dt the map is an exact index
    shift wherever the cutoff has saturated.
    """
    state.psi = _transport_matrix(state.nodes, state.eps, dt) @ state.psi
    state.pseudo_time += dt
    return state


# ---------------------------------------------------------------------------
# Collision
# ---------------------------------------------------------------------------

class _CollisionTables:
    def __init__(self, nodes, eps):
        n = nodes.size
        a, b = np.triu_indices(n)
        i_idx, j_idx = b, a          # x_i >= x_j
        x_i, x_j = nodes[i_idx], nodes[j_idx]
        k3 = (x_i * x_j) ** -1.5
        fac = np.where(i_idx == j_idx, 0.5, 1.0)
        eta = np.asarray(eta_eps(x_i - x_j, eps))
        rows, cols, data = [], [], []
        for p in range(i_idx.size):
            i = int(i_idx[p])
            xi, xj = float(x_i[p]), float(x_j[p])
            e = float(eta[p])
            col = {i: -2.0 * xi}
            deposits = [(xi + xj, e * (xi + xj)),
                        (xi - xj, e * (xi - xj)),
                        (2.0 * xi, (1.0 - e) * 2.0 * xi)]
            for z, amount in deposits:
                if amount == 0.0:
                    continue
                for row, coeff in split_deposit(nodes, z, amount):
                    if row < n:
                        col[row] = col.get(row, 0.0) + coeff
                    elif row == n + 1:
                        col[n] = col.get(n, 0.0) + coeff  # overflow energy
            for row, coeff in col.items():
                rows.append(row)
                cols.append(p)
                data.append(coeff)
        self.i_idx = i_idx
        self.j_idx = j_idx
        self.k3fac = k3 * fac
        self.removal = 2.0 * x_i * k3 * fac
        self.flow = sp.csr_matrix((data, (rows, cols)),
                                  shape=(n + 1, i_idx.size))


_collision_cache = {}


def _collision_tables(nodes, eps):
    key = (nodes.tobytes(), eps)
    if key not in _collision_cache:
        _collision_cache[key] = _CollisionTables(nodes, eps)
    return _collision_cache[key]


def _collision_rel_rate(tab, nodes, psi):
    """Max relative energy-removal rate over occupied nodes."""
    s = float(np.sum(psi * nodes ** -1.5))
    rel = 2.0 * nodes ** -0.5 * (s - 0.5 * psi * nodes ** -1.5)
    return float(np.max(rel[psi > 0.0])) if np.any(psi > 0.0) else 0.0


def collision_step(state, dt):
    """Apply the collision operator for pseudo-time dt (in place).

    Heun substeps, with the substep count chosen so no node loses more
    than a fifth of its energy per substep.  Total energy (psi plus the
    overflow ledger) is conserved exactly by the redistribution algebra.
    """
    tab = _collision_tables(state.nodes, state.eps)
    nodes = state.nodes
    remaining = dt
    while remaining > 1e-15 * dt:
        rel = _collision_rel_rate(tab, nodes, state.psi)
        h = remaining if rel == 0.0 else min(remaining, 0.2 / rel)
        i1 = tab.k3fac * state.psi[tab.i_idx] * state.psi[tab.j_idx]
        k1 = tab.flow @ i1
        psi1 = state.psi + h * k1[:-1]
        np.maximum(psi1, 0.0, out=psi1)
        i2 = tab.k3fac * psi1[tab.i_idx] * psi1[tab.j_idx]
        k2 = tab.flow @ i2
        upd = (0.5 * h) * (k1 + k2)
        psi2 = state.psi + upd[:-1]
        if np.min(psi2) < 0.0:
            # keep strict positivity without breaking conservation
            h *= 0.5
            continue
        state.psi = psi2
        state.overflow += upd[-1]
        remaining -= h
    state.pseudo_time += dt
    return state


# ---------------------------------------------------------------------------
# Stationarity residual and the profile equations
# ---------------------------------------------------------------------------

def _energy_delta(theta, x_i, x_j, eta):
    """Delta^eps of the energy-weighted test function z theta(z), using a
    precomputed cutoff factor (pass eta=1 for the bare second difference)."""
    f = lambda z: z * np.asarray(theta.value(z))
    same = f(2.0 * x_i) - 2.0 * f(x_i)
    return (1.0 - eta) * same + eta * (f(x_i + x_j) - 2.0 * f(x_i)
                                       + f(x_i - x_j))


def stationarity_residual(state, thetas, regularized=True):
    """Weak residual of the profile identity against a theta basis.

    Both sides are evaluated from the node values directly (pair sums and
    node quadrature), independently of the split/shift discretization, so
    scheme error shows up in the residual rather than cancelling.
    Returns the maximum over the basis of |RHS - LHS| / (1 + |LHS|).
    """
    x = state.nodes
    tab = _collision_tables(x, state.eps)
    x_i, x_j = x[tab.i_idx], x[tab.j_idx]
    if regularized:
        vel = 0.5 * x * np.asarray(eta_eps(x, state.eps))
        eta = np.asarray(eta_eps(x_i - x_j, state.eps))
    else:
        vel = 0.5 * x
        eta = np.ones_like(x_i)
    worst = 0.0
    for theta in thetas:
        lhs = float(np.sum(vel * np.asarray(theta.d1(x)) * state.psi))
        dd = _energy_delta(theta, x_i, x_j, eta)
        rhs = float(np.sum(tab.k3fac * state.psi[tab.i_idx]
                           * state.psi[tab.j_idx] * dd))
        worst = max(worst, abs(rhs - lhs) / (1.0 + abs(lhs)))
    return worst


class ProfileResult:
    """Converged profile with residual report."""

    def __init__(self, state, phi_w, residual_psi_eps, residual_psi,
                 residual_phi, l1_phi, converged, energy_drift_rate):
        self.state = state
        self.phi_w = phi_w              # node weights of Phi = Psi / x
        self.psi = state.psi
        self.nodes = state.nodes
        self.E = state.E
        self.residual_psi_eps = residual_psi_eps
        self.residual_psi = residual_psi
        self.residual_phi = residual_phi
        self.l1_phi = l1_phi
        self.converged = converged
        self.energy_drift_rate = energy_drift_rate

    def phi_measure(self):
        keep = self.phi_w > 0.0
        return Measure(0.0, zip(self.nodes[keep].tolist(),
                                self.phi_w[keep].tolist()))


def residual_phi_equation(nodes, phi_w, phis):
    """Residual of the mass-profile identity against C^1 test functions.

    LHS: integral of (x phi'(x) - phi(x) + phi(0))/2 against Phi; RHS is
    the bare-kernel collision functional of the Phi measure.
    """
    mu = Measure(0.0, zip(nodes.tolist(), phi_w.tolist()))
    worst = 0.0
    for phi in phis:
        p0 = float(np.asarray(phi.value(0.0)))
        lhs = float(np.sum(0.5 * (nodes * np.asarray(phi.d1(nodes))
                                  - np.asarray(phi.value(nodes)) + p0)
                           * phi_w))
        rhs = weak_rhs(mu, phi, RhsOptions(eps=0.0))
        worst = max(worst, abs(rhs - lhs) / (1.0 + abs(lhs)))
    return worst


def solve_profile(E, grid, eps, tol=1e-3, thetas=None, phis=None,
                  max_pseudo_time=600.0, check_every=20):
    """Drive the regularized evolution to stationarity.

    Alternates Strang macro-steps (half collision, node-shift transport,
    half collision) and checks the weak stationarity residual against the
    theta basis every `check_every` macro-steps.  Aborts if the invariant
    set constraint is violated.  Returns a ProfileResult (flagged
    non-converged when the residual never reaches tol).
    """
    from .kernel import phi_basis, theta_basis
    state = init_profile(E, grid, eps)
    if thetas is None:
        thetas = theta_basis()
    if phis is None:
        phis = phi_basis()
    if E == 0.0:
        return ProfileResult(state, np.zeros(state.nodes.size),
                             0.0, 0.0, 0.0, 0.0, True, 0.0)
    bound = 36.0 * E * E
    dt = state.shift_dt
    converged = False
    e_prev, t_prev = state.energy(), state.pseudo_time
    drift_rate = 0.0
    while state.pseudo_time < max_pseudo_time:
        for _ in range(check_every):
            collision_step(state, 0.5 * dt)
            transport_step(state, dt)
            collision_step(state, 0.5 * dt)
            state.pseudo_time -= dt  # steps each advanced the clock
        if state.constraint() > bound * (1.0 + 1e-9):
            raise RuntimeError(
                "invariant-set constraint violated at pseudo-time %g "
                "(value %g > %g)" % (state.pseudo_time, state.constraint(),
                                     bound))
        drift_rate = abs(state.energy() - e_prev) \
            / max(state.pseudo_time - t_prev, 1e-30)
        e_prev, t_prev = state.energy(), state.pseudo_time
        res = stationarity_residual(state, thetas, regularized=True)
        if res < tol and drift_rate < tol:
            converged = True
            break
    phi_w = state.psi / state.nodes
    result = ProfileResult(
        state, phi_w,
        residual_psi_eps=stationarity_residual(state, thetas,
                                               regularized=True),
        residual_psi=stationarity_residual(state, thetas, regularized=False),
        residual_phi=residual_phi_equation(state.nodes, phi_w, phis),
        l1_phi=float(np.sum(phi_w)),
        converged=converged,
        energy_drift_rate=drift_rate)
    return result


# ---------------------------------------------------------------------------
# Assembly and property checks
# ---------------------------------------------------------------------------

class SelfSimilarFamily:
    """Time-parametrized measure combining condensate and spreading profile:
    the atoms sit at x_k sqrt(t + t0) with weights phi_k / sqrt(t + t0),
    so total mass is M and energy E exactly at every time."""

    def __init__(self, result, M, t0):
        if M * math.sqrt(t0) < result.l1_phi * (1.0 - 1e-12):
            raise ValueError("need M sqrt(t0) >= l1 norm of Phi")
        self.result = result
        self.M = float(M)
        self.t0 = float(t0)

    def measure_at(self, t):
        s = math.sqrt(t + self.t0)
        condensate = self.M - self.result.l1_phi / s
        keep = self.result.phi_w > 0.0
        return Measure(max(condensate, 0.0),
                       zip((self.result.nodes[keep] * s).tolist(),
                           (self.result.phi_w[keep] / s).tolist()))

    def trajectory(self, times):
        return [(t, self.measure_at(t)) for t in times]


def assemble_generalized(result, M, t0):
    """Build the generalized self-similar family from a profile result."""
    return SelfSimilarFamily(result, M, t0)


def scaling_test_family(phi0, t0):
    """Time-parametrized test function x -> phi0(x / sqrt(t + t0)).

    Returns a TimeTestFunction whose time derivative is computed in closed
    form, for weak-form checks along spreading trajectories.
    """
    from .kernel import TestFunction
    from .weakform import TimeTestFunction

    def at(t):
        s = math.sqrt(t + t0)
        return TestFunction(
            lambda x: phi0.value(np.asarray(x) / s),
            lambda x: np.asarray(phi0.d1(np.asarray(x) / s)) / s,
            lambda x: np.asarray(phi0.d2(np.asarray(x) / s)) / (s * s),
            support_upper=phi0.support_upper * s,
            value_at_infinity=phi0.value_at_infinity,
            name="%s/sqrt(t+%g)" % (phi0.name, t0))

    def dt_at(t):
        s = math.sqrt(t + t0)
        c = -0.5 * (t + t0) ** -1.5
        return TestFunction(
            lambda x: c * np.asarray(x) * np.asarray(
                phi0.d1(np.asarray(x) / s)),
            None, None, support_upper=math.inf, value_at_infinity=0.0,
            name="d/dt " + phi0.name)

    return TimeTestFunction(at, dt_at)


def profile_property_checks(result, refined=None):
    """Empirical regularity and moment checks on a converged profile.

    Returns a report dict with (a) the near-origin mass exponent of Psi
    fitted over a delta-decade, (b) a moment table (optionally compared
    against a grid-refined solve), (c) the maximum Hoelder-0.45 quotient
    of the Phi density over interior nodes.
    """
    report = {}
    x, psi = result.nodes, result.psi
    if float(np.sum(psi)) == 0.0:
        return {"near_origin_exponent": None, "moments": {},
                "moment_shifts": {}, "hoelder_quotient": 0.0,
                "trivial": True}
    eps = result.state.eps
    deltas = np.geomspace(4.0 * eps, 40.0 * eps, 9)
    cum = np.asarray([float(np.sum(psi[x <= d])) for d in deltas])
    pos = cum > 0.0
    if np.sum(pos) >= 2:
        slope = np.polyfit(np.log(deltas[pos]), np.log(cum[pos]), 1)[0]
    else:
        slope = math.inf  # no mass near the origin at all
    report["near_origin_exponent"] = float(slope)
    report["near_origin_ratio_bound"] = float(np.max(cum / deltas))
    alphas = (-1.4, -1.0, -0.5, 1.0, 2.0, 4.0)
    moments = {a: float(np.sum(psi * x ** a)) for a in alphas}
    report["moments"] = moments
    shifts = {}
    if refined is not None:
        for a in alphas:
            ref = float(np.sum(refined.psi * refined.nodes ** a))
            shifts[a] = abs(ref - moments[a]) / max(abs(moments[a]), 1e-300)
    report["moment_shifts"] = shifts

    def hoelder(res):
        xx = res.nodes
        edges = np.sqrt(xx[:-1] * xx[1:])
        widths = np.diff(np.concatenate((
            [xx[0] * xx[0] / edges[0]], edges, [xx[-1] ** 2 / edges[-1]])))
        dens = res.phi_w / widths
        csum = np.cumsum(res.psi)
        hi = xx[np.searchsorted(csum, 0.99 * csum[-1])]
        sel = (xx >= 10.0 * res.state.eps) & (xx <= hi)
        idx = np.flatnonzero(sel)
        if idx.size < 2:
            return 0.0
        q = np.abs(np.diff(dens[idx])) / np.diff(xx[idx]) ** 0.45
        return float(np.max(q))

    report["hoelder_quotient"] = hoelder(result)
    if refined is not None:
        report["hoelder_quotient_refined"] = hoelder(refined)
    report["constraint"] = result.state.constraint()
    report["trivial"] = False
    return report


def phi_l1_distance(res_a, res_b):
    """L1 distance between two profile results' Phi, as step densities on
    the union grid (used for the eps-sweep Cauchy check)."""
    grid = np.unique(np.concatenate((res_a.nodes, res_b.nodes)))

    def density(res):
        xx = res.nodes
        edges = np.sqrt(xx[:-1] * xx[1:])
        edges = np.concatenate(([xx[0] * xx[0] / edges[0]], edges,
                                [xx[-1] ** 2 / edges[-1]]))
        dens = res.phi_w / np.diff(edges)
        k = np.clip(np.searchsorted(edges, grid, side="right") - 1, 0,
                    dens.size - 1)
        out = dens[k]
        out[(grid < edges[0]) | (grid > edges[-1])] = 0.0
        return out

    da, db = density(res_a), density(res_b)
    return float(trapezoid(np.abs(da - db), grid))
