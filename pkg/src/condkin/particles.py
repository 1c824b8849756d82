"""Event-driven stochastic particle dynamics.

N particles of equal weight M/N interact pairwise: a pair {x, y} is picked
at rate 2 (M/N) K_eps(x, y) and replaced, with a fair coin, by either
{x + y, min(x, y)} or {|x - y|, min(x, y)}.  The minimum always survives,
so particle count is conserved exactly and the size sum in expectation.
Particles at size <= absorb_threshold are inactive condensate.

The regularized kernel factorizes, K_eps(x, y) = a(x) a(y) with
a(x) = (x + eps)^(-1/2), so the total rate has the closed form
(M/N) (S^2 - Q) with S = sum a_i, Q = sum a_i^2 over active particles, and
an exact pair can be drawn by sampling two indices independently
proportionally to a and rejecting only collisions i = j.  No thinning
against a global majorant is needed.
"""

import math

import numpy as np

from .measure import Measure


class ParticleState:
    """Mutable particle ensemble with its own RNG stream.

    The generator is PCG64 seeded from (seed, stream) via SeedSequence, so
    replicas get independent, reproducible streams.
    """

    def __init__(self, sizes, weight_per_particle, eps=1e-3,
                 absorb_threshold=0.0, seed=0, stream=0, time=0.0):
        self.sizes = np.asarray(sizes, dtype=float).copy()
        if np.any(self.sizes < 0.0):
            raise ValueError("sizes must be nonnegative")
        if weight_per_particle <= 0.0:
            raise ValueError("weight per particle must be positive")
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        self.weight = float(weight_per_particle)
        self.eps = float(eps)
        self.absorb_threshold = float(absorb_threshold)
        self.time = float(time)
        self.seed = (int(seed), int(stream))
        self.rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((int(seed), int(stream)))))

    @property
    def n(self):
        return self.sizes.size

    def active_mask(self):
        return self.sizes > self.absorb_threshold

    def measure(self):
        """Empirical measure; inactive particles pool into the condensate."""
        act = self.active_mask()
        condensate = self.weight * float(np.sum(~act))
        return Measure(condensate,
                       zip(self.sizes[act].tolist(),
                           [self.weight] * int(np.sum(act))))


def pair_rate(x, y, state):
    """Interaction rate of an active pair: 2 (M/N) K_eps(x, y)."""
    return 2.0 * state.weight / math.sqrt((x + state.eps) * (y + state.eps))


def total_rate(state):
    """Exact total event rate over all active unordered pairs."""
    act = state.active_mask()
    a = (state.sizes[act] + state.eps) ** -0.5
    s = float(np.sum(a))
    q = float(np.sum(a * a))
    return state.weight * (s * s - q)


def step(state):
    """Execute one event in place.  Returns (state, event record).

    The waiting time is exponential with the exact total rate; the pair is
    drawn proportionally to its rate by product-form composition sampling.
    Raises RuntimeError when fewer than two particles are active.
    """
    act_idx = np.flatnonzero(state.active_mask())
    if act_idx.size < 2:
        raise RuntimeError("fewer than two active particles")
    a = (state.sizes[act_idx] + state.eps) ** -0.5
    s = float(np.sum(a))
    q = float(np.sum(a * a))
    lam_tot = state.weight * (s * s - q)
    state.time += state.rng.exponential(1.0 / lam_tot)
    # sample an unordered pair with probability proportional to a_i a_j,
    # i != j: draw both indices independently from a, redraw on collision
    cdf = np.cumsum(a)
    cdf /= cdf[-1]
    while True:
        i = int(np.searchsorted(cdf, state.rng.random(), side="right"))
        j = int(np.searchsorted(cdf, state.rng.random(), side="right"))
        if i != j:
            break
    i, j = int(act_idx[i]), int(act_idx[j])
    x, y = state.sizes[i], state.sizes[j]
    lo = min(x, y)
    heads = state.rng.random() < 0.5
    big = x + y if heads else abs(x - y)
    # the particle that held the larger size carries the changed outcome
    p, q_ = (i, j) if x >= y else (j, i)
    state.sizes[p] = big
    state.sizes[q_] = lo
    event = (state.time, p, q_, "sum" if heads else "diff",
             float(state.sizes[p]), float(state.sizes[q_]))
    return state, event


def run(state, t_end, cadence, record_events=True):
    """Advance until t_end, recording Measure snapshots every `cadence`.

    Returns (times, snapshots, events); the state is advanced in place.
    The snapshot at t is the state of the last event at or before t, which
    is the exact value of the piecewise-constant jump process.
    """
    if t_end <= state.time:
        raise ValueError("t_end must exceed the current time")
    record_times = []
    snapshots = []
    events = []
    next_rec = state.time
    while next_rec <= t_end + 1e-12 * max(1.0, abs(t_end)):
        record_times.append(next_rec)
        next_rec += cadence
    rec_i = 0
    while np.sum(state.active_mask()) >= 2:
        prev = state.sizes.copy()
        _, ev = step(state)
        while rec_i < len(record_times) and record_times[rec_i] < state.time:
            # snapshot the pre-event state for every cadence tick crossed
            hold = state.sizes
            state.sizes = prev
            snapshots.append(state.measure())
            state.sizes = hold
            rec_i += 1
        if state.time > t_end:
            # the event falls beyond the horizon: undo it
            state.sizes = prev
            state.time = t_end
            break
        if record_events:
            events.append(ev)
    while rec_i < len(record_times):
        snapshots.append(state.measure())
        rec_i += 1
    state.time = max(state.time, t_end)
    return record_times, snapshots, events


def format_event(ev):
    """Event log line `t,i,j,outcome,new_xi,new_xj`."""
    t, i, j, outcome, xi, xj = ev
    return "%s,%d,%d,%s,%s,%s" % (repr(float(t)), i, j, outcome,
                                  repr(xi), repr(xj))
