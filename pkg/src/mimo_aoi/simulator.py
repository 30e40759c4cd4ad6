"""Policy evaluation: Monte Carlo trajectories and exact stationary analysis."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from mimo_aoi.errors import ConfigError, DegenerateChainError, MultichainError, NumericError
from mimo_aoi.mdp import MdpSpec, resolve_action

log = logging.getLogger(__name__)

_BLOCK = 65_536


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    burn_in: int = 0
    seed: int = 0
    track_truncation: bool = True
    batches: int = 20

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.burn_in < self.horizon:
            raise ConfigError(f"need 0 <= burn_in < horizon, got burn_in={self.burn_in}")
        if self.batches < 1:
            raise ConfigError("batches must be positive")


@dataclass
class SimResult:
    avg_aoi: float
    per_device_avg: np.ndarray
    action_histogram: np.ndarray
    success_rate: float
    stderr: float
    slots: int
    attempts: int = 0
    successes: int = 0
    batch_means: np.ndarray = field(default_factory=lambda: np.zeros(0))


def simulate(spec: MdpSpec, rule, sim: SimConfig) -> SimResult:
    """Run one trajectory from the all-ones state.

    Each slot the policy picks ``k``; every device draws a uniform variate and
    a scheduled device succeeds when its variate is below ``1 - P_e(k)``.
    The estimate averages the ages reached at the end of every slot after
    burn-in; ``stderr`` comes from batch means.
    """
    K = spec.num_devices
    dmax = spec.delta_max
    cap = dmax if sim.track_truncation else math.inf
    success_p = [1.0 - p for p in spec.outage]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(sim.seed)))

    ages = [1] * K
    device_sums = [0] * K
    hist = [0] * (K + 1)
    attempts = successes = 0
    n_keep = sim.horizon - sim.burn_in
    n_batches = min(sim.batches, n_keep)
    batch_len = n_keep // n_batches
    batch_sums = [0] * n_batches
    cache: dict[tuple[int, ...], tuple[int, ...]] = {}

    t = 0
    while t < sim.horizon:
        block = min(_BLOCK, sim.horizon - t)
        draws = rng.random((block, K)).tolist()
        for u in draws:
            key = tuple(ages)
            devices = cache.get(key)
            if devices is None:
                devices = rule.decide(key).devices
                cache[key] = devices
            k = len(devices)
            hist[k] += 1
            q = success_p[k]
            won = [False] * K
            for i in devices:
                if u[i] < q:
                    won[i] = True
            attempts += k
            for i in range(K):
                if won[i]:
                    ages[i] = 1
                    successes += 1
                elif ages[i] < cap:
                    ages[i] += 1
            if t >= sim.burn_in:
                total = 0
                for i in range(K):
                    device_sums[i] += ages[i]
                    total += ages[i]
                b = (t - sim.burn_in) // batch_len
                if b < n_batches:
                    batch_sums[b] += total
            t += 1

    per_device = np.array(device_sums, dtype=float) / n_keep
    means = np.array(batch_sums, dtype=float) / (batch_len * K)
    if n_batches > 1:
        stderr = float(means.std(ddof=1) / math.sqrt(n_batches))
    else:
        stderr = 0.0
    return SimResult(
        avg_aoi=float(per_device.mean()),
        per_device_avg=per_device,
        action_histogram=np.array(hist, dtype=np.int64),
        success_rate=successes / attempts if attempts else float("nan"),
        stderr=stderr,
        slots=n_keep,
        attempts=attempts,
        successes=successes,
        batch_means=means,
    )


def replica_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit seeds for ``count`` replicas derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def combine(results: list[SimResult]) -> tuple[float, float]:
    """Mean over replicas and its standard error.

    A single replica falls back to its own batch-means standard error.
    """
    vals = np.array([r.avg_aoi for r in results])
    if len(results) == 1:
        return float(vals[0]), results[0].stderr
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def representatives(spec: MdpSpec) -> np.ndarray:
    """Index of the age-sorted (non-increasing) version of every state."""
    ordered = -np.sort(-spec.ages, axis=1)
    return np.ravel_multi_index(tuple((ordered - 1).T), spec.shape)


def policy_matrix(spec: MdpSpec, actions: np.ndarray, lump: np.ndarray | None = None) -> sparse.csr_matrix:
    """Row-stochastic transition matrix of the chain induced by ``actions``.

    With ``lump`` (a state -> representative map) next states are replaced by
    their representatives; rows of non-representative states are then
    irrelevant and left empty.
    """
    n = spec.num_states
    keep = np.ones(n, dtype=bool) if lump is None else lump == np.arange(n)
    rows, cols, vals = [], [], []
    for k, (idx, p) in enumerate(spec.kernels):
        states = np.flatnonzero((actions == k) & keep)
        if states.size == 0:
            continue
        for mask in np.flatnonzero(p > 0):
            nxt = idx[states, mask]
            rows.append(states)
            cols.append(nxt if lump is None else lump[nxt])
            vals.append(np.full(states.size, p[mask]))
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return mat.tocsr()


def recurrent_class(mat: sparse.csr_matrix, states: np.ndarray | None = None) -> np.ndarray:
    """States of the unique closed class; raise if the chain is multichain.

    ``states`` restricts the analysis to a subset closed under ``mat``.
    """
    if states is not None:
        mat = mat[states][:, states]
    n_comp, labels = connected_components(mat, directed=True, connection="strong")
    # a component is closed when no edge leaves it
    coo = mat.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaving]]] = True
    closed = np.flatnonzero(~open_comp)
    if closed.size != 1:
        raise MultichainError(f"policy induces {closed.size} recurrent classes")
    members = np.flatnonzero(labels == closed[0])
    return members if states is None else states[members]


def stationary_distribution(
    mat: sparse.csr_matrix,
    tol: float = 1e-12,
    max_iters: int = 100_000,
    states: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stationary law of a unichain matrix by power iteration.

    Iterates the lazy chain ``(I + P) / 2`` on the recurrent class, which has
    the same stationary law but no periodicity, until ``max |pi P - pi|`` is
    at most ``tol``.  Returns ``(members, pi)``.
    """
    members = recurrent_class(mat, states)
    sub = mat[members][:, members].tocsr()
    sub_t = sub.T.tocsr()
    pi = np.full(members.size, 1.0 / members.size)
    for it in range(1, max_iters + 1):
        step = sub_t @ pi
        res = float(np.abs(step - pi).max())
        if not math.isfinite(res):
            raise NumericError("power iteration produced non-finite values")
        if res <= tol:
            pi = step
            break
        pi = 0.5 * (pi + step)
        pi /= pi.sum()
    else:
        raise NumericError(f"power iteration did not reach residual {tol} in {max_iters} sweeps")
    log.debug("power iteration: %d sweeps over %d recurrent states", it, members.size)
    return members, pi / pi.sum()


def evaluate_policy_exact(spec: MdpSpec, rule, tol: float = 1e-12, max_iters: int = 100_000) -> float:
    """Long-run average reward of ``rule`` on the truncated chain.

    When the policy only looks at the sorted ages (true for all built-in
    policies) the chain is lumped onto sorted age vectors first: devices are
    exchangeable, so this is exact, and it removes the near-invariant
    "rotation order" classes that otherwise stall power iteration.

    Raises :class:`DegenerateChainError` (with ``reward == delta_max``) when the
    chain is absorbed in the all-``delta_max`` state, and
    :class:`MultichainError` when the long-run average depends on the
    initial state.
    """
    actions = rule.materialize(spec)
    rep = representatives(spec)
    if np.array_equal(actions, actions[rep]):
        mat = policy_matrix(spec, actions, lump=rep)
        members, pi = stationary_distribution(mat, tol, max_iters, states=np.unique(rep))
    else:
        mat = policy_matrix(spec, actions)
        members, pi = stationary_distribution(mat, tol, max_iters)
    if members.size == 1 and members[0] == spec.num_states - 1:
        raise DegenerateChainError(
            f"chain is absorbed in the saturated state (all ages {spec.delta_max})",
            reward=float(spec.delta_max),
        )
    return float(pi @ spec.rewards[members])
