"""Scheduling policies: table-backed optimal, one-step greedy, fixed-k.

Every policy is deterministic and stationary.  ``decide`` returns how many
devices to schedule together with the resolved (oldest-first) device set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from mimo_aoi.errors import ConfigError
from mimo_aoi.mdp import MdpSpec, resolve_action


class ScheduleAction(NamedTuple):
    k: int
    devices: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class PolicyTable:
    """Action ``k`` for every state index of a ``delta_max**K`` space."""

    actions: np.ndarray
    num_devices: int
    delta_max: int

    def __post_init__(self):
        acts = np.asarray(self.actions)
        if acts.ndim != 1 or acts.size != self.delta_max ** self.num_devices:
            raise ConfigError(
                f"policy table has {acts.size} entries, expected {self.delta_max ** self.num_devices}"
            )
        if acts.size and (acts.min() < 0 or acts.max() > self.num_devices):
            raise ConfigError(f"policy table entries must lie in [0, {self.num_devices}]")
        object.__setattr__(self, "actions", acts.astype(np.uint8))

    def lookup(self, s: Sequence[int]) -> int:
        if len(s) != self.num_devices:
            raise ValueError(f"state has {len(s)} entries, expected {self.num_devices}")
        idx = 0
        for a in s:
            if a < 1:
                raise ValueError(f"age {a} below 1")
            idx = idx * self.delta_max + min(a, self.delta_max) - 1
        return int(self.actions[idx])


def greedy_scores(outage: Sequence[float], s: Sequence[int]) -> list[float]:
    """Expected next-slot mean age for each k = 0..K under top-k scheduling.

    Uses the untruncated one-step formula: every device ages by one and each
    of the k oldest resets to 1 with probability ``1 - P_e(k)``.
    """
    K = len(s)
    ordered = sorted(s, reverse=True)
    total = float(sum(ordered))
    scores = []
    prefix = 0.0
    for k in range(K + 1):
        if k:
            prefix += ordered[k - 1]
        scores.append((total + K - (1.0 - outage[k]) * prefix) / K)
    return scores


def greedy_decide(spec: MdpSpec, s: Sequence[int]) -> ScheduleAction:
    """Minimise the one-step expected mean age; ties go to the smaller k."""
    if len(s) != spec.num_devices:
        raise ValueError(f"state has {len(s)} entries, expected {spec.num_devices}")
    scores = greedy_scores(spec.outage, s)
    best = 0
    for k in range(1, len(scores)):
        if scores[k] < scores[best]:
            best = k
    return ScheduleAction(best, resolve_action(s, best))


class OptimalPolicy:
    """Lookup into a solved table.  Ages above ``delta_max`` are clamped."""

    name = "optimal"

    def __init__(self, table: PolicyTable):
        self.table = table

    def decide(self, s: Sequence[int]) -> ScheduleAction:
        k = self.table.lookup(s)
        return ScheduleAction(k, resolve_action(s, k))

    def materialize(self, spec: MdpSpec) -> np.ndarray:
        if (self.table.num_devices, self.table.delta_max) != (spec.num_devices, spec.delta_max):
            raise ConfigError(
                f"policy table is for K={self.table.num_devices}, delta_max={self.table.delta_max}; "
                f"spec has K={spec.num_devices}, delta_max={spec.delta_max}"
            )
        return self.table.actions.astype(np.int64)


class GreedyPolicy:
    name = "greedy"

    def __init__(self, spec: MdpSpec):
        self.spec = spec

    def decide(self, s: Sequence[int]) -> ScheduleAction:
        return greedy_decide(self.spec, s)

    def materialize(self, spec: MdpSpec) -> np.ndarray:
        # same float operations, in the same order, as greedy_scores
        K = spec.num_devices
        ordered = -np.sort(-spec.ages, axis=1).astype(float)
        total = ordered.sum(axis=1)
        best_k = np.zeros(spec.num_states, dtype=np.int64)
        best = (total + K - (1.0 - spec.outage[0]) * 0.0) / K
        prefix = np.zeros(spec.num_states)
        for k in range(1, K + 1):
            prefix = prefix + ordered[:, k - 1]
            score = (total + K - (1.0 - spec.outage[k]) * prefix) / K
            better = score < best
            best = np.where(better, score, best)
            best_k[better] = k
        return best_k


class StationaryPolicy:
    """Always schedule the ``k`` oldest devices."""

    def __init__(self, k: int):
        if k < 0:
            raise ConfigError(f"fixed k must be nonnegative, got {k}")
        self.k = k
        self.name = f"fixed:{k}"

    def decide(self, s: Sequence[int]) -> ScheduleAction:
        return ScheduleAction(self.k, resolve_action(s, self.k))

    def materialize(self, spec: MdpSpec) -> np.ndarray:
        if self.k > spec.num_devices:
            raise ConfigError(f"fixed:{self.k} exceeds K={spec.num_devices}")
        return np.full(spec.num_states, self.k, dtype=np.int64)


PolicyRule = OptimalPolicy | GreedyPolicy | StationaryPolicy


def decide(rule: PolicyRule, s: Sequence[int]) -> ScheduleAction:
    return rule.decide(s)


def parse_policy(name: str, spec: MdpSpec, table: PolicyTable | None = None) -> PolicyRule:
    """Build a policy from its CLI name: ``optimal``, ``greedy`` or ``fixed:<k>``."""
    name = name.strip()
    if name == "greedy":
        return GreedyPolicy(spec)
    if name == "optimal":
        if table is None:
            raise ConfigError("the optimal policy needs a solved policy table")
        return OptimalPolicy(table)
    if name.startswith("fixed:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad policy name {name!r}") from None
        if not 0 <= k <= spec.num_devices:
            raise ConfigError(f"{name}: k must lie in [0, {spec.num_devices}]")
        return StationaryPolicy(k)
    raise ConfigError(f"unknown policy {name!r}; expected optimal, greedy or fixed:<k>")
