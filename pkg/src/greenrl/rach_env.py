"""Slotted random-access channel with backlogged devices.

Each slot the agent picks an access configuration from a fixed menu: how
many access channels to open, preambles per channel, and a repetition level
that sets the devices' attempt probability.  Backlogged devices each attempt
with probability min(1, repetition / backoff_slots) and pick one of the
m = channels * preambles opportunities uniformly.  An opportunity chosen by
exactly one device serves it; two or more collide; reward is the number of
devices served in the slot.

With n devices attempting over m opportunities the expected number served
is n * (1 - 1/m)**(n-1).
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError

__all__ = [
    "RachAction",
    "RachConfig",
    "BernoulliTraffic",
    "ExternalTraffic",
    "SlotOutcome",
    "RachEnv",
    "simulate_contention",
    "expected_successes",
    "le_urc_policy",
    "COLLISION_MULTIPLICITY",
    "write_trace_csv",
    "TRACE_COLUMNS",
]

# Mean multiplicity of a collided opportunity under Poisson(1) arrivals,
# E[X | X >= 2] = (1 - e^-1) / (1 - 2 e^-1), about 2.39.
COLLISION_MULTIPLICITY = (1.0 - math.exp(-1.0)) / (1.0 - 2.0 * math.exp(-1.0))


@dataclass(frozen=True)
class RachAction:
    """One menu entry: channel/preamble allocation plus repetition level."""

    rach_channels: int
    preambles_per_channel: int
    repetition: int

    def __post_init__(self):
        for name in ("rach_channels", "preambles_per_channel", "repetition"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def opportunities(self) -> int:
        return self.rach_channels * self.preambles_per_channel


@dataclass(frozen=True)
class BernoulliTraffic:
    """Each currently idle device activates with probability p per slot."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"activation probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class ExternalTraffic:
    """Arrival counts supplied per slot by an outside process."""

    counts: Callable[[int], int]


@dataclass(frozen=True)
class RachConfig:
    num_devices: int
    action_menu: tuple[RachAction, ...]
    history_window: int = 4
    traffic: BernoulliTraffic | ExternalTraffic = BernoulliTraffic(0.05)
    backoff_slots: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.num_devices < 1:
            raise ConfigError("num_devices must be >= 1")
        if len(self.action_menu) == 0:
            raise ConfigError("action_menu must be nonempty")
        object.__setattr__(self, "action_menu", tuple(self.action_menu))
        if self.history_window < 1:
            raise ConfigError("history_window must be >= 1")
        if self.backoff_slots < 1:
            raise ConfigError("backoff_slots must be >= 1")

    @property
    def max_opportunities(self) -> int:
        return max(a.opportunities for a in self.action_menu)


@dataclass(frozen=True)
class SlotOutcome:
    served: int
    backlog: int
    occupancy: np.ndarray


def simulate_contention(n_attempting: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Occupancy counts after each device picks one of m opportunities uniformly."""
    if m < 1:
        raise InvalidInputError("need at least one opportunity")
    if n_attempting < 0:
        raise InvalidInputError("attempt count cannot be negative")
    return rng.multinomial(n_attempting, np.full(m, 1.0 / m))


def expected_successes(n: int, m: int) -> float:
    """Closed form n (1 - 1/m)**(n-1) for n devices over m opportunities."""
    if n <= 0:
        return 0.0
    if m == 1:
        return 1.0 if n == 1 else 0.0
    return n * (1.0 - 1.0 / m) ** (n - 1)


TRACE_COLUMNS = (
    "slot",
    "rach_channels",
    "preambles_per_channel",
    "repetition",
    "idle",
    "collided",
    "successful",
    "served",
    "backlog",
)


class RachEnv:
    """Slotted random-access simulator; deterministic given its config seed.

    The observation is the last ``history_window`` slots' per-slot triples
    (idle, collided, successful), most recent first, flattened to a vector
    of length 3 * history_window.  Slots before the first step read as zeros.
    """

    def __init__(self, cfg: RachConfig, record_trace: bool = False):
        self.cfg = cfg
        self.record_trace = record_trace
        self.reset()

    def reset(self) -> np.ndarray:
        self.rng = np.random.default_rng(self.cfg.seed)
        self.backlog = 0
        self.slot = 0
        self._window: deque[tuple[int, int, int]] = deque(
            [(0, 0, 0)] * self.cfg.history_window, maxlen=self.cfg.history_window
        )
        self.trace: list[tuple] = []
        return self.observation()

    def observation(self) -> np.ndarray:
        return np.asarray([v for triple in self._window for v in triple], dtype=float)

    def _draw_arrivals(self) -> int:
        traffic = self.cfg.traffic
        if isinstance(traffic, BernoulliTraffic):
            idle_devices = max(0, self.cfg.num_devices - self.backlog)
            return int(self.rng.binomial(idle_devices, traffic.p))
        count = int(traffic.counts(self.slot))
        if count < 0:
            raise InvalidInputError("external traffic produced a negative count")
        # Clamp to the device population: backlog never exceeds num_devices.
        return min(count, self.cfg.num_devices - self.backlog)

    def step(self, action: RachAction) -> tuple[np.ndarray, float, SlotOutcome]:
        if action not in self.cfg.action_menu:
            raise InvalidInputError(f"action {action} is not on the menu")
        arrivals = self._draw_arrivals()
        self.backlog += arrivals
        m = action.opportunities
        p_attempt = min(1.0, action.repetition / self.cfg.backoff_slots)
        attempts = int(self.rng.binomial(self.backlog, p_attempt))
        occupancy = simulate_contention(attempts, m, self.rng)
        successful = int((occupancy == 1).sum())
        collided = int((occupancy >= 2).sum())
        idle = m - successful - collided
        self.backlog -= successful
        self._window.appendleft((idle, collided, successful))
        self.slot += 1
        if self.record_trace:
            self.trace.append(
                (
                    self.slot,
                    action.rach_channels,
                    action.preambles_per_channel,
                    action.repetition,
                    idle,
                    collided,
                    successful,
                    successful,
                    self.backlog,
                )
            )
        outcome = SlotOutcome(served=successful, backlog=self.backlog, occupancy=occupancy)
        return self.observation(), float(successful), outcome


def write_trace_csv(trace: Sequence[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(trace)


def le_urc_policy(obs: np.ndarray, menu: Sequence[RachAction]) -> RachAction:
    """Load-estimating baseline: pseudo-Bayesian backlog estimate, myopic pick.

    From the most recent slot's (idle, collided, successful) counts it
    estimates N = max(successful + 2.39 * collided, 1) and picks the action
    maximising N (1 - 1/m)**(N-1) over each action's opportunity count m,
    ignoring repetition.  Ties go to the smallest m, then the lowest index.
    """
    if len(menu) == 0:
        raise InvalidInputError("menu must be nonempty")
    v = np.asarray(obs, dtype=float).ravel()
    if v.size < 3:
        raise InvalidInputError("observation must hold at least one slot triple")
    if np.any(v < 0):
        raise InvalidInputError("observation counts cannot be negative")
    _idle, collided, successful = v[0], v[1], v[2]
    n_hat = max(successful + COLLISION_MULTIPLICITY * collided, 1.0)
    best_idx = None
    best_key = None
    for i, action in enumerate(menu):
        m = action.opportunities
        score = n_hat * (1.0 - 1.0 / m) ** (n_hat - 1.0) if m > 1 else (1.0 if n_hat <= 1 else 0.0)
        key = (-score, m, i)
        if best_key is None or key < best_key:
            best_key = key
            best_idx = i
    return menu[best_idx]
