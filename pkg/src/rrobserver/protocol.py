"""Round-robin scheduling with bounded successive packet dropouts.

Channels are numbered ``1..p``.  ``pi`` names the sampler allowed to
transmit at the next sampling instant and ``sigma`` counts the failed
attempts since the last successful reception.  In concentrated mode all
samplers transmit together, so only ``sigma`` evolves.
"""
from dataclasses import dataclass, replace
from enum import Enum
import json

import numpy as np

from ._validation import check_nonnegative_int, check_positive
from .exceptions import BoundViolationError, DomainError


class Mode(str, Enum):
    ROUND_ROBIN = "round-robin"
    CONCENTRATED = "concentrated"


def as_mode(mode):
    try:
        return Mode(mode)
    except ValueError:
        raise DomainError(f"unknown scheduling mode {mode!r}") from None


@dataclass(frozen=True)
class SchedulerState:
    pi: int = 1
    sigma: int = 0
    p: int = 1
    d_bar: int = 0
    mode: Mode = Mode.ROUND_ROBIN

    def __post_init__(self):
        object.__setattr__(self, "mode", as_mode(self.mode))
        if self.p < 1:
            raise DomainError("channel count p must be >= 1")
        if not 1 <= self.pi <= self.p:
            raise DomainError(f"pi={self.pi} outside 1..{self.p}")
        if self.mode is Mode.CONCENTRATED and self.pi != 1:
            raise DomainError("pi is fixed at 1 in concentrated mode")
        if not 0 <= self.sigma <= self.d_bar:
            raise BoundViolationError(f"sigma={self.sigma} outside 0..{self.d_bar}")

    @property
    def last_received(self):
        """Channel whose sample the observer currently holds."""
        if self.mode is Mode.CONCENTRATED:
            return 1
        return self.p if self.pi == 1 else self.pi - 1


def initial_state(p, d_bar, mode=Mode.ROUND_ROBIN):
    return SchedulerState(pi=1, sigma=0, p=p, d_bar=d_bar, mode=mode)


def step(state, received):
    """Advance the counters by one sampling instant."""
    if received:
        if state.mode is Mode.CONCENTRATED:
            return replace(state, sigma=0)
        nxt = 1 if state.pi == state.p else state.pi + 1
        return replace(state, pi=nxt, sigma=0)
    if state.sigma + 1 > state.d_bar:
        raise BoundViolationError(
            f"{state.sigma + 1} successive dropouts exceed the bound d_bar={state.d_bar}"
        )
    return replace(state, sigma=state.sigma + 1)


@dataclass(frozen=True)
class DropoutPlan:
    """Successive-dropout counts, one per reception.

    ``counts[h]`` is the number of failed attempts between the h-th
    reception and the next one.  The first reception happens at t = 0.
    """

    counts: tuple
    d_bar: int | None = None

    def __post_init__(self):
        counts = tuple(check_nonnegative_int(c, "dropout count") for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if self.d_bar is not None and any(c > self.d_bar for c in counts):
            raise BoundViolationError(f"plan entry exceeds d_bar={self.d_bar}")

    def __len__(self):
        return len(self.counts)

    def __iter__(self):
        return iter(self.counts)

    @property
    def max_count(self):
        return max(self.counts, default=0)

    def to_attempts(self):
        """Per-attempt view: True for a received transmission, starting at k = 0."""
        attempts = [True]
        for d in self.counts:
            attempts.extend([False] * d)
            attempts.append(True)
        return attempts

    @classmethod
    def from_attempts(cls, attempts, d_bar=None):
        attempts = list(attempts)
        if not attempts or not attempts[0]:
            raise DomainError("the first transmission attempt must be received")
        counts, run = [], 0
        for ok in attempts[1:]:
            if ok:
                counts.append(run)
                run = 0
            else:
                run += 1
        return cls(tuple(counts), d_bar)

    def to_json(self):
        return json.dumps(list(self.counts))

    @classmethod
    def from_json(cls, text, d_bar=None):
        data = json.loads(text)
        if not isinstance(data, list):
            raise DomainError("a dropout plan is a JSON array of integers")
        return cls(tuple(data), d_bar)


def make_rng(seed):
    """Seeded generator used for every random draw in the package.

    Philox-4x64 is counter based, so streams are reproducible across
    platforms for a fixed seed and numpy version.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


def generate_dropouts(d_bar, count, seed):
    """Draw ``count`` i.i.d. dropout counts, uniform on ``{0, ..., d_bar}``."""
    d_bar = check_nonnegative_int(d_bar, "d_bar")
    count = check_nonnegative_int(count, "count")
    if count < 1:
        raise DomainError("count must be >= 1")
    draws = make_rng(seed).integers(0, d_bar + 1, size=count)
    return DropoutPlan(tuple(int(v) for v in draws), d_bar)


def reception_times(plan, T, p, mode=Mode.ROUND_ROBIN):
    """Return ``[(t, channel), ...]``, one pair per plan entry, starting at ``(0, 1)``."""
    T = check_positive(T, "T")
    mode = as_mode(mode)
    out = []
    k = 0
    for h, d in enumerate(plan.counts):
        channel = 1 if mode is Mode.CONCENTRATED else h % p + 1
        out.append((k * T, channel))
        k += 1 + d
    return out


def replay(plan, p, mode=Mode.ROUND_ROBIN, n_steps=None):
    """Run the state machine over the plan's attempts; return the states after each instant."""
    attempts = plan.to_attempts()
    if n_steps is not None:
        attempts = attempts[:n_steps]
    d_bar = plan.d_bar if plan.d_bar is not None else plan.max_count
    state = initial_state(p, d_bar, mode)
    states = []
    for ok in attempts:
        state = step(state, ok)
        states.append(state)
    return states
