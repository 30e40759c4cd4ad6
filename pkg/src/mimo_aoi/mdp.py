"""Truncated age-vector MDP with the top-k action set.

States are tuples of ``K`` ages in ``[1, delta_max]``; ages saturate at
``delta_max``.  Actions are integers ``k`` in ``[0, K]`` meaning "schedule
the ``k`` oldest devices", ties going to the lowest device index.  Scheduled
devices succeed independently with probability ``1 - P_e(k)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from mimo_aoi.channel import ChannelConfig, build_outage_table
from mimo_aoi.errors import ConfigError

AgeState = tuple[int, ...]

# Dense tables beyond this many states are refused.
MAX_STATES = 50_000_000


class TransitionOutcome(NamedTuple):
    next_state: AgeState
    probability: float


@dataclass(frozen=True, eq=False)
class MdpSpec:
    """An MDP instance: outage probabilities per k plus the age truncation.

    ``outage[k]`` is P_e(k) for k = 0..K with ``outage[0] == 0``.  ``cfg`` is
    kept for provenance and may be ``None`` when the outage table is given
    directly.
    """

    outage: tuple[float, ...]
    delta_max: int
    cfg: ChannelConfig | None = field(default=None)

    def __post_init__(self):
        outage = tuple(float(p) for p in self.outage)
        object.__setattr__(self, "outage", outage)
        if len(outage) < 2:
            raise ConfigError("outage table needs entries for k = 0..K with K >= 1")
        if outage[0] != 0.0:
            raise ConfigError("outage[0] must be 0")
        if any(not 0.0 <= p <= 1.0 for p in outage):
            raise ConfigError(f"outage probabilities must lie in [0, 1], got {outage}")
        if int(self.delta_max) != self.delta_max or self.delta_max < 1:
            raise ConfigError(f"delta_max must be a positive integer, got {self.delta_max!r}")
        if self.cfg is not None and self.cfg.num_devices != len(outage) - 1:
            raise ConfigError("outage table length does not match cfg.num_devices")
        if self.delta_max ** self.num_devices > MAX_STATES:
            raise ConfigError(f"state space delta_max**K = {self.delta_max ** self.num_devices} is too large")

    @property
    def num_devices(self) -> int:
        return len(self.outage) - 1

    @property
    def num_states(self) -> int:
        return self.delta_max ** self.num_devices

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.delta_max,) * self.num_devices

    @cached_property
    def ages(self) -> np.ndarray:
        """``(num_states, K)`` array of the age vector of every state index."""
        grid = np.indices(self.shape).reshape(self.num_devices, -1).T
        return (grid + 1).astype(np.int64)

    @cached_property
    def rewards(self) -> np.ndarray:
        return self.ages.mean(axis=1)

    @cached_property
    def kernels(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-action dense kernels ``(next_index, prob)``.

        For action ``k``, ``next_index`` has shape ``(num_states, 2**k)`` and
        ``prob`` shape ``(2**k,)``.  Bit ``j`` of the outcome number is the
        success of the ``j``-th oldest scheduled device, so permuted states
        see their outcomes in the same order.
        """
        ages = self.ages
        order = np.argsort(-ages, axis=1, kind="stable")
        aged = np.minimum(ages + 1, self.delta_max)
        rows = np.arange(self.num_states)
        out = []
        for k in range(self.num_devices + 1):
            probs = _outcome_probs(k, 1.0 - self.outage[k])
            nxt = np.empty((self.num_states, 1 << k), dtype=np.int64)
            for mask in range(1 << k):
                new = aged.copy()
                for j in range(k):
                    if mask >> j & 1:
                        new[rows, order[:, j]] = 1
                nxt[:, mask] = np.ravel_multi_index(tuple((new - 1).T), self.shape)
            out.append((nxt, probs))
        return out

    def fingerprint(self) -> str:
        """Stable hash of everything that determines the MDP."""
        payload = {
            "outage": [repr(p) for p in self.outage],
            "delta_max": self.delta_max,
            "cfg": None if self.cfg is None else {k: repr(v) for k, v in vars(self.cfg).items()},
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def make_spec(cfg: ChannelConfig, delta_max: int = 50) -> MdpSpec:
    return MdpSpec(tuple(build_outage_table(cfg)), delta_max, cfg)


def _outcome_probs(k: int, q: float) -> np.ndarray:
    probs = np.empty(1 << k)
    for mask in range(1 << k):
        wins = bin(mask).count("1")
        probs[mask] = q ** wins * (1.0 - q) ** (k - wins)
    return probs


def _check_state(s: Sequence[int], delta_max: int, num_devices: int | None = None) -> None:
    if num_devices is not None and len(s) != num_devices:
        raise ValueError(f"state has {len(s)} entries, expected {num_devices}")
    for a in s:
        if not 1 <= a <= delta_max:
            raise ValueError(f"age {a} outside [1, {delta_max}]")


def state_index(s: Sequence[int], delta_max: int) -> int:
    """Mixed-radix index of ``s``; device 0 is the most significant digit."""
    _check_state(s, delta_max)
    idx = 0
    for a in s:
        idx = idx * delta_max + (a - 1)
    return idx


def state_from_index(idx: int, num_devices: int, delta_max: int) -> AgeState:
    if not 0 <= idx < delta_max ** num_devices:
        raise ValueError(f"index {idx} outside [0, {delta_max ** num_devices})")
    digits = []
    for _ in range(num_devices):
        idx, rem = divmod(idx, delta_max)
        digits.append(rem + 1)
    return tuple(reversed(digits))


def resolve_action(s: Sequence[int], k: int) -> tuple[int, ...]:
    """Indices of the ``k`` oldest devices, oldest first, ties to lower index."""
    if not 0 <= k <= len(s):
        raise ValueError(f"k must lie in [0, {len(s)}], got {k}")
    return tuple(sorted(range(len(s)), key=lambda i: (-s[i], i))[:k])


def reward(s: Sequence[int]) -> float:
    """One-stage reward: the mean age.  Independent of the action."""
    return sum(s) / len(s)


def transitions(spec: MdpSpec, s: Sequence[int], k: int) -> list[TransitionOutcome]:
    """Distribution of the next state, with duplicate next states merged."""
    _check_state(s, spec.delta_max, spec.num_devices)
    scheduled = resolve_action(s, k)
    q = 1.0 - spec.outage[k]
    aged = [min(a + 1, spec.delta_max) for a in s]
    merged: dict[AgeState, float] = {}
    for mask in range(1 << k):
        new = list(aged)
        prob = 1.0
        for j, dev in enumerate(scheduled):
            if mask >> j & 1:
                new[dev] = 1
                prob *= q
            else:
                prob *= 1.0 - q
        if prob > 0.0:
            key = tuple(new)
            merged[key] = merged.get(key, 0.0) + prob
    return [TransitionOutcome(ns, p) for ns, p in merged.items()]
