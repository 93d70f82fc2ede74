"""Exact event-driven simulation of plant, channel and observer.

On every sampling subinterval ``[kT, (k+1)T)`` the scheduler counters and
the held sample are constant, so the loop is an affine LTI system and is
propagated with matrix exponentials, not an ODE solver.  The observer
error ``eps = x - x_hat`` is carried as a state of its own (its dynamics
do not involve ``x``), which keeps it accurate to relative precision even
when the plant diverges; ``x_hat`` is reported as ``x - eps``.
"""
from dataclasses import dataclass, field, replace
import csv
import math

import numpy as np
from scipy import optimize

from ._validation import check_positive, check_vector
from .exceptions import DimensionError, DomainError, MissingGainError
from .matexp import exp_and_integral
from .protocol import DropoutPlan, Mode, SchedulerState, initial_state, step
from .synthesis import n_channels, output_map

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class LoopState:
    t: float
    x: np.ndarray
    eps: np.ndarray
    held_channel: int
    held_sample: np.ndarray
    held_innovation: np.ndarray
    scheduler: SchedulerState

    @property
    def x_hat(self):
        return self.x - self.eps


@dataclass(frozen=True)
class Reception:
    k: int
    time: float
    channel: int
    eps: np.ndarray
    dropouts_after: int


@dataclass
class SimulationTrace:
    t: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    eps: np.ndarray
    pi: np.ndarray
    sigma: np.ndarray
    plan: DropoutPlan
    receptions: list = field(default_factory=list)
    T: float | None = None

    @property
    def eps_norm(self):
        return np.linalg.norm(self.eps, axis=1)

    def to_csv(self, path):
        """Write ``t,x1..xn,xhat1..xhatn,eps_norm,pi,sigma`` with 17 significant digits."""
        n = self.x.shape[1]
        header = (["t"] + [f"x{j}" for j in range(1, n + 1)]
                  + [f"xhat{j}" for j in range(1, n + 1)] + ["eps_norm", "pi", "sigma"])
        fmt = "{:.17g}".format
        norms = self.eps_norm
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for r in range(len(self.t)):
                writer.writerow(
                    [fmt(self.t[r])] + [fmt(v) for v in self.x[r]]
                    + [fmt(v) for v in self.x_hat[r]]
                    + [fmt(norms[r]), int(self.pi[r]), int(self.sigma[r])]
                )


class _PropagatorCache:
    def __init__(self, A):
        self.A = A
        self._cache = {}

    def __call__(self, s):
        key = round(s, 14)
        if key not in self._cache:
            self._cache[key] = exp_and_integral(self.A, max(s, 0.0))
        return self._cache[key]


def propagate_interval(plant, state, gains, duration, u=None, propagator=None):
    """Advance one subinterval during which counters and held sample are constant.

    ``u`` is the input held over the subinterval (``None`` means zero).
    """
    if duration < 0:
        raise DomainError("duration must be nonnegative")
    E, Gam = propagator(duration) if propagator else exp_and_integral(plant.A, duration)
    gain = gains.gain(state.held_channel, state.scheduler.sigma)
    eps = E @ state.eps - Gam @ (gain @ state.held_innovation)
    x = E @ state.x
    if u is not None:
        if plant.B is None:
            raise DimensionError("an input was supplied but the plant has no B matrix")
        x = x + Gam @ (plant.B @ np.asarray(u, dtype=float).reshape(-1))
    return replace(state, t=state.t + duration, x=x, eps=eps)


def apply_transmission(plant, state, received, mode):
    """Update counters and, on reception, latch the new sample atomically."""
    if not received:
        return replace(state, scheduler=step(state.scheduler, False))
    channel = 1 if mode is Mode.CONCENTRATED else state.scheduler.pi
    c = output_map(plant.C, mode, channel)
    return replace(
        state,
        held_channel=channel,
        held_sample=c @ state.x,
        held_innovation=c @ state.eps,
        scheduler=step(state.scheduler, True),
    )


def _instants(horizon, T):
    return int(math.floor(horizon / T + _TIME_TOL))


def simulate(plant, gains, T, x0, xhat0, plan, horizon, output_grid=None, u=None):
    """Simulate the closed loop on ``[0, horizon]``.

    ``plan`` lists successive-dropout counts per reception and must cover
    every sampling instant up to the horizon.  ``u`` may be a callable
    ``k -> input`` held on ``[kT, (k+1)T)``.
    """
    T = check_positive(T, "T")
    horizon = check_positive(horizon, "horizon")
    dt = check_positive(output_grid if output_grid is not None else T / 10, "output_grid")
    n = plant.n
    x0 = check_vector(x0, n, "x0")
    xhat0 = check_vector(xhat0, n, "xhat0")
    mode = gains.mode
    if plan.counts and max(plan.counts) > gains.d_bar:
        raise MissingGainError(
            f"plan has {max(plan.counts)} successive dropouts but gains cover d <= {gains.d_bar}"
        )
    K = _instants(horizon, T)
    attempts = plan.to_attempts()
    if len(attempts) < K + 1:
        raise DomainError(f"dropout plan covers {len(attempts)} instants, {K + 1} needed")

    channels = n_channels(plant.C, mode)
    prop = _PropagatorCache(plant.A)
    rows0 = output_map(plant.C, mode, 1).shape[0]
    state = LoopState(
        t=0.0, x=x0, eps=x0 - xhat0, held_channel=1,
        held_sample=np.zeros(rows0), held_innovation=np.zeros(rows0),
        scheduler=initial_state(channels, gains.d_bar, mode),
    )

    n_pts = int(math.floor(horizon / dt + _TIME_TOL)) + 1
    grid = np.arange(n_pts) * dt
    grid_k = np.minimum(np.floor(grid / T + _TIME_TOL).astype(int), K)
    xs, es = np.empty((n_pts, n)), np.empty((n_pts, n))
    pis, sigmas = np.empty(n_pts, dtype=int), np.empty(n_pts, dtype=int)
    receptions = []
    n_received = 0
    g = 0
    for k in range(K + 1):
        t_k = k * T
        state = replace(state, t=t_k)
        state = apply_transmission(plant, state, attempts[k], mode)
        if attempts[k]:
            d_after = plan.counts[n_received] if n_received < len(plan.counts) else None
            receptions.append(Reception(k, t_k, state.held_channel, state.eps.copy(), d_after))
            n_received += 1
        u_k = u(k) if u is not None else None
        while g < n_pts and grid_k[g] == k:
            s = max(grid[g] - t_k, 0.0)
            sub = propagate_interval(plant, state, gains, s, u_k, prop)
            xs[g], es[g] = sub.x, sub.eps
            pis[g], sigmas[g] = state.scheduler.pi, state.scheduler.sigma
            g += 1
        if k < K:
            state = propagate_interval(plant, state, gains, T, u_k, prop)
    return SimulationTrace(
        t=grid, x=xs, x_hat=xs - es, eps=es, pi=pis, sigma=sigmas,
        plan=plan, receptions=receptions, T=T,
    )


def lyapunov_values(trace, certificate):
    """``eps^T P_i^d eps`` at each reception, indexed by channel and the next dropout count."""
    out = []
    for rec in trace.receptions:
        if rec.dropouts_after is None:
            break
        P = certificate.P[(rec.channel, rec.dropouts_after)]
        out.append(float(rec.eps @ P @ rec.eps))
    return np.array(out)


def intersample_bound(plant, gains, d_bar, T, n_grid=2000):
    """Max over channels and ``t in [0, (1+d_bar) T]`` of ``||M_i(t)||_2``.

    ``M_i(t)`` maps the error at a reception to the error ``t`` later,
    with the gain switching to ``L_i^k`` on the k-th subinterval.  Each
    subinterval is scanned on ``n_grid`` panels, then the best grid point
    is refined by a bounded scalar search.
    """
    T = check_positive(T, "T")
    n = plant.n
    mode = gains.mode
    s_grid = np.linspace(0.0, T, n_grid + 1)
    mats = [exp_and_integral(plant.A, s) for s in s_grid]
    E_grid = np.array([m[0] for m in mats])
    G_grid = np.array([m[1] for m in mats])

    alpha = 0.0
    for i in range(1, n_channels(plant.C, mode) + 1):
        c = output_map(plant.C, mode, i)
        M0 = np.eye(n)
        for k in range(d_bar + 1):
            LC = gains.gain(i, k) @ c
            Ms = E_grid @ M0 - G_grid @ LC
            norms = np.linalg.norm(Ms, ord=2, axis=(1, 2))
            j = int(np.argmax(norms))
            best = float(norms[j])
            lo, hi = s_grid[max(j - 1, 0)], s_grid[min(j + 1, n_grid)]

            def neg_norm(s, M0=M0, LC=LC):
                E, G = exp_and_integral(plant.A, s)
                return -np.linalg.norm(E @ M0 - G @ LC, 2)

            res = optimize.minimize_scalar(neg_norm, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-12 * max(T, 1.0)})
            best = max(best, -float(res.fun))
            alpha = max(alpha, best)
            M0 = Ms[-1]
    return alpha
