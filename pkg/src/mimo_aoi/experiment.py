"""Experiment configuration and the sweep/compare workflows behind the CLI."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from mimo_aoi.channel import ChannelConfig
from mimo_aoi.errors import ConfigError, NumericError
from mimo_aoi.mdp import MdpSpec, make_spec
from mimo_aoi.policies import parse_policy
from mimo_aoi.rvi import SolveReport, ValueTable, load_solution, save_solution, solve_rvi
from mimo_aoi.simulator import SimConfig, combine, evaluate_policy_exact, simulate

log = logging.getLogger(__name__)

def default_policies(devices: int) -> list[str]:
    return ["optimal", "greedy"] + [f"fixed:{k}" for k in range(1, devices + 1)]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    return 10.0 * math.log10(linear)


@dataclass
class ExperimentConfig:
    devices: int = 3
    antennas: list[int] = field(default_factory=lambda: [3])
    snr_db: list[float] = field(default_factory=lambda: [20.0])
    distance: list[float] = field(default_factory=lambda: [3.0])
    path_loss_exponent: float = 2.0
    snr_threshold: float = 1.0
    delta_max: int = 50
    rvi_tol: float = 1e-9
    max_iters: int = 100_000
    horizon: int = 100_000
    burn_in: int = 1_000
    seeds: list[int] = field(default_factory=lambda: [1])
    track_truncation: bool = True
    policies: list[str] | None = None  # None: optimal, greedy and every fixed:k
    exact: bool = False
    out_dir: str = "out"
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.policies is None:
            self.policies = default_policies(self.devices)
        for name in ("antennas", "snr_db", "distance", "seeds", "policies"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        for n in self.antennas:
            ChannelConfig(self.devices, n, 1.0, 1.0, self.path_loss_exponent, self.snr_threshold)
        for d in self.distance:
            if not d > 0:
                raise ConfigError(f"distance must be positive, got {d}")
        if self.delta_max < 1:
            raise ConfigError("delta_max must be positive")
        SimConfig(self.horizon, self.burn_in)
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")
        probe = make_spec(ChannelConfig(self.devices, max(self.antennas), 1.0), 1)
        for name in self.policies:
            if name != "optimal":
                parse_policy(name, probe)
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("duplicate policy names")
        return self

    @property
    def sweep_var(self) -> str:
        return "N" if len(self.antennas) > 1 else "snr_db"

    def points(self) -> list["Point"]:
        """Grid points in output order: series first, then sweep value."""
        pts = []
        if self.sweep_var == "N":
            for snr in self.snr_db:
                for d in self.distance:
                    label = "N" + _qualifier(snr_db=snr if len(self.snr_db) > 1 else None,
                                             d=d if len(self.distance) > 1 else None)
                    pts += [Point(label, n, n, snr, d) for n in self.antennas]
        else:
            n = self.antennas[0]
            for d in self.distance:
                label = "snr_db" + _qualifier(d=d if len(self.distance) > 1 else None)
                pts += [Point(label, snr, n, snr, d) for snr in self.snr_db]
        return pts


def _qualifier(**kw) -> str:
    parts = [f"{k}={_fmt(v)}" for k, v in kw.items() if v is not None]
    return "@" + ",".join(parts) if parts else ""


def _fmt(v: float) -> str:
    return format(v, ".10g")


@dataclass(frozen=True)
class Point:
    sweep_var: str
    value: float
    antennas: int
    snr_db: float
    distance: float


@dataclass
class SweepRow:
    sweep_var: str
    value: float
    policy: str
    avg_aoi: float
    stderr: float
    j_star: float | None = None
    solve_iters: int | None = None
    exact: float | None = None


_KEYS = {
    "channel": {"devices", "antennas", "snr_db", "distance", "path_loss_exponent", "snr_threshold"},
    "mdp": {"delta_max", "rvi_tol", "max_iters"},
    "sim": {"horizon", "burn_in", "seeds", "track_truncation"},
}
_TOP = {"policies", "exact", "out_dir", "jobs"}
_LISTS = {"antennas", "snr_db", "distance", "seeds", "policies"}


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a YAML config (``channel``/``mdp``/``sim`` blocks) and apply overrides."""
    values: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        for key, val in raw.items():
            if key in _KEYS:
                if not isinstance(val, dict):
                    raise ConfigError(f"{path}: block {key!r} must be a mapping")
                unknown = set(val) - _KEYS[key]
                if unknown:
                    raise ConfigError(f"{path}: unknown keys in {key!r}: {sorted(unknown)}")
                values.update(val)
            elif key in _TOP:
                values[key] = val
            else:
                raise ConfigError(f"{path}: unknown key {key!r}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in _LISTS & set(values):
        if not isinstance(values[key], list):
            values[key] = [values[key]]
    try:
        cfg = ExperimentConfig(**values)
        cfg.antennas = [int(n) for n in cfg.antennas]
        cfg.snr_db = [float(s) for s in cfg.snr_db]
        cfg.distance = [float(d) for d in cfg.distance]
        cfg.seeds = [int(s) for s in cfg.seeds]
        if cfg.policies is not None:
            cfg.policies = [str(p) for p in cfg.policies]
        cfg.rvi_tol = float(cfg.rvi_tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc
    return cfg.validate()


def point_spec(cfg: ExperimentConfig, pt: Point) -> MdpSpec:
    channel = ChannelConfig(
        cfg.devices, pt.antennas, db_to_linear(pt.snr_db), pt.distance,
        cfg.path_loss_exponent, cfg.snr_threshold,
    )
    return make_spec(channel, cfg.delta_max)


def solve_cached(cfg: ExperimentConfig, spec: MdpSpec) -> SolveReport:
    """Solve ``spec``, reusing a dump under ``<out_dir>/cache`` when present."""
    cache = Path(cfg.out_dir) / "cache"
    path = cache / f"{spec.fingerprint()[:24]}-{_fmt(cfg.rvi_tol)}.rvi"
    if path.exists():
        try:
            values, table, meta = load_solution(path, spec)
        except ConfigError as exc:
            log.warning("ignoring stale cache %s: %s", path, exc)
        else:
            return SolveReport(meta["iterations"], meta["final_span"], meta["converged"], table,
                               values, cfg.rvi_tol, float("nan"))
    report = solve_rvi(spec, cfg.rvi_tol, cfg.max_iters)
    if report.converged:
        cache.mkdir(parents=True, exist_ok=True)
        save_solution(path, spec, report)
    return report


def run_point(cfg: ExperimentConfig, pt: Point) -> list[SweepRow]:
    spec = point_spec(cfg, pt)
    rows = []
    report = None
    solve_error = None
    if "optimal" in cfg.policies:
        try:
            report = solve_cached(cfg, spec)
            if not report.converged:
                solve_error = f"RVI did not converge in {report.iterations} iterations"
        except NumericError as exc:
            solve_error = str(exc)
        if solve_error:
            log.error("%s=%s: %s", pt.sweep_var, _fmt(pt.value), solve_error)
    for name in cfg.policies:
        if name == "optimal" and solve_error:
            iters = report.iterations if report is not None else None
            rows.append(SweepRow(pt.sweep_var, pt.value, name, math.nan, math.nan, None, iters))
            continue
        rule = parse_policy(name, spec, report.policy if report is not None else None)
        sims = [
            simulate(spec, rule, SimConfig(cfg.horizon, cfg.burn_in, seed, cfg.track_truncation))
            for seed in cfg.seeds
        ]
        avg, se = combine(sims)
        row = SweepRow(pt.sweep_var, pt.value, name, avg, se)
        if name == "optimal":
            row.j_star = report.values.j_star
            row.solve_iters = report.iterations
        if cfg.exact:
            row.exact = evaluate_policy_exact(spec, rule)
        rows.append(row)
    return rows


def _run_point_job(args):
    return run_point(*args)


def run_sweep(cfg: ExperimentConfig) -> list[SweepRow]:
    """Rows for every grid point and policy, ordered by (series, value, policy)."""
    points = cfg.points()
    if cfg.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_point_job, [(cfg, p) for p in points]))
    else:
        chunks = [run_point(cfg, p) for p in points]
    rows = [r for chunk in chunks for r in chunk]
    series = {p.sweep_var: i for i, p in reversed(list(enumerate(points)))}
    rows.sort(key=lambda r: (series[r.sweep_var], r.value, r.policy))
    return rows


def single_point(cfg: ExperimentConfig) -> Point:
    if len(cfg.antennas) != 1 or len(cfg.snr_db) != 1 or len(cfg.distance) != 1:
        raise ConfigError("this command needs a single channel point (one N, one SNR, one distance)")
    return cfg.points()[0]


@dataclass
class Comparison:
    rows: list[SweepRow]
    pairs: list[tuple[str, str, float, float]]


def run_compare(cfg: ExperimentConfig) -> Comparison:
    """Simulate each policy at one point; rank and compute pairwise gaps.

    Each pair ``(a, b, diff, se)`` has ``diff = avg(b) - avg(a)`` with ``a``
    ranked ahead of ``b``, and ``se`` the combined standard error.
    """
    if len(cfg.policies) < 2:
        raise ConfigError("compare needs at least two policies")
    pt = single_point(cfg)
    rows = sorted(run_point(cfg, pt), key=lambda r: (math.isnan(r.avg_aoi), r.avg_aoi, r.policy))
    pairs = []
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            pairs.append((a.policy, b.policy, b.avg_aoi - a.avg_aoi, math.hypot(a.stderr, b.stderr)))
    return Comparison(rows, pairs)


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw).validate()
