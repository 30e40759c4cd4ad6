"""Relative value iteration for the average-age MDP.

Iterates ``h <- T h - (T h)(ref)`` where ``T`` is the Bellman operator over
the ``K + 1`` top-k actions, and stops on the span seminorm of successive
differences.  Also hosts the drift-condition check and the binary dump
format for solved policies.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from mimo_aoi.errors import ConfigError, NumericError
from mimo_aoi.mdp import MdpSpec, reward, state_index, transitions
from mimo_aoi.policies import PolicyTable

log = logging.getLogger(__name__)

# Q-values closer than this (relative) count as ties and go to the smaller k.
TIE_RTOL = 1e-10


@dataclass
class ValueTable:
    h: np.ndarray
    j_star: float
    reference_state: int = 0


@dataclass
class SolveReport:
    iterations: int
    final_span: float
    converged: bool
    policy: PolicyTable
    values: ValueTable
    tolerance: float
    residual: float
    span_history: list[float] = field(default_factory=list)


@dataclass
class DriftReport:
    beta: float
    m: float
    satisfied: bool
    worst_state: tuple[int, ...]
    worst_k: int


def _as_array(h) -> np.ndarray:
    return h.h if isinstance(h, ValueTable) else np.asarray(h, dtype=float)


def q_values(spec: MdpSpec, h: np.ndarray) -> np.ndarray:
    """``(num_states, K + 1)`` array of ``r(s) + E[h(s') | s, k]``."""
    r = spec.rewards
    return np.stack([r + h[idx] @ p for idx, p in spec.kernels], axis=1)


def _argmin_smallest(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    best = q.min(axis=1)
    slack = TIE_RTOL * np.maximum(1.0, np.abs(best))
    k = np.argmax(q <= (best + slack)[:, None], axis=1)
    return best, k


def bellman_backup(spec: MdpSpec, h, s: Sequence[int]) -> tuple[float, int]:
    """Single-state backup via explicit kernel enumeration.

    Returns the minimal ``r(s) + E[h(s')]`` over k and the minimising k
    (smallest k on ties).
    """
    h = _as_array(h)
    r = reward(s)
    vals = []
    for k in range(spec.num_devices + 1):
        cont = sum(o.probability * h[state_index(o.next_state, spec.delta_max)]
                   for o in transitions(spec, s, k))
        vals.append(r + cont)
    best = min(vals)
    slack = TIE_RTOL * max(1.0, abs(best))
    k = next(i for i, v in enumerate(vals) if v <= best + slack)
    return best, k


def extract_policy(spec: MdpSpec, values: ValueTable | np.ndarray) -> PolicyTable:
    _, k = _argmin_smallest(q_values(spec, _as_array(values)))
    return PolicyTable(k.astype(np.uint8), spec.num_devices, spec.delta_max)


def solve_rvi(
    spec: MdpSpec,
    tol: float = 1e-9,
    max_iters: int = 100_000,
    reference_state: int = 0,
) -> SolveReport:
    """Relative value iteration from ``h = 0``.

    ``reference_state`` is a state index; the default 0 is the all-ones
    state.  Non-convergence is reported through ``converged=False``.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    if not 0 <= reference_state < spec.num_states:
        raise ConfigError(f"reference_state {reference_state} out of range")
    h = np.zeros(spec.num_states)
    spans: list[float] = []
    span = np.inf
    it = 0
    while it < max_iters:
        it += 1
        th = q_values(spec, h).min(axis=1)
        h_new = th - th[reference_state]
        if not np.all(np.isfinite(h_new)):
            raise NumericError(f"non-finite relative values at iteration {it}")
        diff = h_new - h
        span = float(diff.max() - diff.min())
        spans.append(span)
        h = h_new
        if span <= tol:
            break
    converged = span <= tol

    q = q_values(spec, h)
    best, k = _argmin_smallest(q)
    j_star = float(best[reference_state])
    residual = float(np.max(np.abs(best - j_star - h)))
    tail = spans[-10:]
    if any(b > a for a, b in zip(tail, tail[1:])):
        log.warning("span increased within the last %d iterations: %s", len(tail), tail)
    log.info("rvi: %d iterations, span %.3g, J* %.12g, residual %.3g", it, span, j_star, residual)
    return SolveReport(
        iterations=it,
        final_span=span,
        converged=converged,
        policy=PolicyTable(k.astype(np.uint8), spec.num_devices, spec.delta_max),
        values=ValueTable(h, j_star, reference_state),
        tolerance=tol,
        residual=residual,
        span_history=spans,
    )


def check_drift_condition(spec: MdpSpec, m: float = 2.0) -> DriftReport:
    """Tightest ``beta`` with ``E[w(s') | s, k] <= beta * w(s) + m`` everywhere.

    ``w`` is the mean age, evaluated exhaustively over all states and actions
    of the truncated space.  A non-positive bound is reported as 0.
    """
    w = spec.rewards
    worst = -np.inf
    worst_at = (0, 0)
    for k, (idx, p) in enumerate(spec.kernels):
        ratio = (w[idx] @ p - m) / w
        i = int(np.argmax(ratio))
        if ratio[i] > worst:
            worst = float(ratio[i])
            worst_at = (i, k)
    beta = max(worst, 0.0)
    state = tuple(int(a) for a in spec.ages[worst_at[0]])
    return DriftReport(beta, m, bool(beta < 1.0 and m > 1.0), state, worst_at[1])


# dump layout: header, then float64 h[num_states], then uint8 actions[num_states]
_MAGIC = b"AOIRVI\x00\x00"
_VERSION = 1
_HEADER = struct.Struct("<8sHHHII32sddQ?")


def save_solution(path: str | Path, spec: MdpSpec, report: SolveReport) -> None:
    n = spec.cfg.num_antennas if spec.cfg is not None else 0
    header = _HEADER.pack(
        _MAGIC, _VERSION, spec.num_devices, n, spec.delta_max, report.values.reference_state,
        bytes.fromhex(spec.fingerprint()),
        report.values.j_star, report.final_span, report.iterations, report.converged,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(report.values.h.astype("<f8").tobytes())
        fh.write(report.policy.actions.astype(np.uint8).tobytes())


def load_solution(path: str | Path, spec: MdpSpec) -> tuple[ValueTable, PolicyTable, dict]:
    """Read a dump written by :func:`save_solution` for the same ``spec``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, k, n, dmax, ref, digest, j_star, span, iters, converged = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ConfigError(f"{path}: not a solution dump (or unsupported version {version})")
    if digest.hex() != spec.fingerprint():
        raise ConfigError(f"{path}: dump was solved for a different configuration")
    ns = spec.num_states
    body = raw[_HEADER.size:]
    if len(body) != ns * 9:
        raise ConfigError(f"{path}: expected {ns * 9} payload bytes, found {len(body)}")
    h = np.frombuffer(body[: ns * 8], dtype="<f8").astype(float)
    actions = np.frombuffer(body[ns * 8:], dtype=np.uint8).copy()
    meta = {"num_antennas": n, "iterations": iters, "final_span": span, "converged": converged}
    return ValueTable(h, j_star, ref), PolicyTable(actions, k, dmax), meta
