"""Config-driven experiment runner with reproducible parallelism.

A run is fully determined by its config's semantic fields: the law, the
n-grid, samples per n, window width, restriction-radius multiplier, the
r-grid, and the master seed.  Worker count and output paths are excluded
from the config hash because they cannot change any number: every trial's
RNG stream is derived from (master seed, purpose, n, trial index), trials
are assembled by index, and all reductions run in fixed order, so 1 worker
and 8 workers produce byte-identical tables.

Two drivers are provided:

* ``run_experiment``: the main anti-concentration study.  For each n it
  samples N environments, computes the restricted passage time from the
  origin to (n, 0), and feeds the window/variance estimators.
* ``run_mw_battery``: the verification battery.  Coupling diagnostics, the
  Gaussian closed-form inequality grid, Monte Carlo inequality checks in
  several dimensions, scale-k path-gain event frequencies at k <= 4, and the
  window-probability inequality chain lhs <= exp(|tau_r|^2/2) *
  sqrt(p_plus * p_minus) evaluated per r on shared environments.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy

from . import __version__ as _pkg_version
from .coupling import (
    QuantileCoupling,
    estimate_delta0,
    mw_gaussian_closed_form,
    pushforward_check,
)
from .distributions import WeightLaw, law_from_config
from .estimators import (
    SampleSet,
    concentration_function,
    increment_event_frequency,
    omega_diagnostic,
    variance_estimate,
)
from .fpp_core import (
    passage_time,
    passage_time_profile,
    sample_environment,
    tau_schedule,
)
from .lattice import GridBox, scales
from .rng import RngStream

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "NStats",
    "ResultRecord",
    "MwBatteryRecord",
    "run_experiment",
    "run_mw_battery",
    "run_profile_study",
    "coupling_check_battery",
    "emit_outputs",
    "DEFAULT_CONFIG",
]

SCHEMA_VERSION = 1

_TRIAL_KIND = 1
_PROFILE_KIND = 2
_CHAIN_KIND = 3
_CHECK_KIND = 5

_CHUNK = 32


class ConfigError(ValueError):
    """Config file or config fields violate the schema."""


def _parse_r_grid(spec) -> tuple[float, ...]:
    if isinstance(spec, dict):
        try:
            lo, hi, count = float(spec["lo"]), float(spec["hi"]), int(spec["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad r_grid spec {spec!r}: {exc}") from exc
        if count < 1 or not lo < hi:
            raise ConfigError(f"bad r_grid spec {spec!r}")
        return tuple(float(x) for x in np.linspace(lo, hi, count))
    return tuple(float(x) for x in spec)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see DEFAULT_CONFIG for the shape."""

    law: dict
    n_grid: tuple[int, ...] = (16, 32, 64, 128)
    samples_per_n: int = 4000
    window_width: float = 1.0
    radius_multiplier: int = 4
    r_grid: tuple[float, ...] = tuple(np.linspace(0.125, 1.0, 8))
    master_seed: int = 20268
    mw_trials: int = 500
    mw_event_trials: int = 1000
    omega_trials: int = 0
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "law", dict(self.law))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "r_grid", _parse_r_grid(self.r_grid))
        law = self.law_instance()
        if not law.positive_support:
            raise ConfigError(
                f"law {self.law.get('family')!r} is not supported in (0, inf); "
                "lattice experiments reject coupling-test laws"
            )
        if any(n < 16 for n in self.n_grid) or not self.n_grid:
            raise ConfigError(f"every n must be >= 16, got {self.n_grid}")
        if self.samples_per_n < 100:
            raise ConfigError(f"samples_per_n must be >= 100, got {self.samples_per_n}")
        if not self.window_width > 0:
            raise ConfigError(f"window_width must be positive, got {self.window_width}")
        if self.radius_multiplier < 2:
            raise ConfigError(f"radius_multiplier must be >= 2, got {self.radius_multiplier}")
        if any(abs(r) > 2.0 for r in self.r_grid):
            raise ConfigError("r_grid values must lie in [-2, 2]")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.mw_trials < 100 or self.mw_event_trials < 100:
            raise ConfigError("mw_trials and mw_event_trials must be >= 100")
        if self.omega_trials != 0 and self.omega_trials < 100:
            raise ConfigError("omega_trials must be 0 (off) or >= 100")

    def law_instance(self) -> WeightLaw:
        try:
            return law_from_config(self.law)
        except Exception as exc:
            raise ConfigError(f"bad law record: {exc}") from exc

    def semantic_fields(self) -> dict:
        """Everything that can change a number; excludes workers/out_dir."""
        return {
            "schema_version": SCHEMA_VERSION,
            "law": self.law,
            "n_grid": list(self.n_grid),
            "samples_per_n": self.samples_per_n,
            "window_width": self.window_width,
            "radius_multiplier": self.radius_multiplier,
            "r_grid": list(self.r_grid),
            "master_seed": self.master_seed,
            "mw_trials": self.mw_trials,
            "mw_event_trials": self.mw_event_trials,
            "omega_trials": self.omega_trials,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        if "law" not in merged:
            raise ConfigError("config must contain a 'law' record")
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str, **overrides) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, **overrides)


DEFAULT_CONFIG = ExperimentConfig(law={"family": "exponential", "rate": 1.0})


@dataclass(frozen=True)
class NStats:
    """Per-n statistics row; exactly the fields of one CSV line plus runtime."""

    n: int
    samples: int
    window_width: float
    q_hat: float
    a_star: float
    q_stderr: float
    var: float
    var_stderr: float
    boundary_rate: float
    mean_ties: float
    runtime_s: float


@dataclass(frozen=True)
class ResultRecord:
    config_hash: str
    law: dict
    per_n: tuple[NStats, ...]
    master_seed: int
    versions: dict
    runtime_s: float
    # grid-step increment diagnostics per n, present when omega_trials > 0
    omega: tuple[dict, ...] = ()


def _versions() -> dict:
    return {
        "fpplab": _pkg_version,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _trial_chunk(args) -> tuple[int, list[tuple[float, bool, int]]]:
    law_cfg, n, multiplier, master_seed, start, stop = args
    law = law_from_config(law_cfg)
    box = GridBox(multiplier * n)
    out = []
    for trial in range(start, stop):
        stream = RngStream(master_seed, _TRIAL_KIND, n, trial)
        env = sample_environment(law, box, stream)
        res = passage_time(env, (0, 0), (n, 0), box.radius, compute_ties=True)
        out.append((res.time, res.touched_boundary, res.tie_count))
    return start, out


def _run_chunked(task_fn, chunk_args, workers: int):
    """Execute chunk tasks and yield their results in submission order."""
    if workers <= 1:
        for args in chunk_args:
            yield task_fn(args)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(task_fn, chunk_args)


def run_experiment(config: ExperimentConfig) -> ResultRecord:
    """Main study: window maxima and variances of T(0, (n, 0)) per n.

    With omega_trials > 0 the record additionally carries, per n, the
    grid-step increment diagnostic (delta0, r0, failure frequency) computed
    on its own derived streams.
    """
    t_start = time.perf_counter()
    rows = []
    omega_rows = []
    for n in config.n_grid:
        t_n = time.perf_counter()
        N = config.samples_per_n
        chunk_args = [
            (config.law, n, config.radius_multiplier, config.master_seed,
             start, min(start + _CHUNK, N))
            for start in range(0, N, _CHUNK)
        ]
        times = np.empty(N)
        touched = np.empty(N, dtype=bool)
        ties = np.empty(N, dtype=np.int64)
        for start, chunk in _run_chunked(_trial_chunk, chunk_args, config.workers):
            for i, (tv, tb, tc) in enumerate(chunk):
                times[start + i] = tv
                touched[start + i] = tb
                ties[start + i] = tc
        samples = SampleSet(times, n, config.law,
                            seed_lineage=(config.master_seed, _TRIAL_KIND, n))
        conc = concentration_function(samples, config.window_width)
        var = variance_estimate(samples)
        rows.append(NStats(
            n=n,
            samples=N,
            window_width=config.window_width,
            q_hat=conc.q_hat,
            a_star=conc.a_star,
            q_stderr=conc.stderr,
            var=var.var,
            var_stderr=var.stderr,
            boundary_rate=float(np.mean(touched)),
            mean_ties=float(np.mean(ties)),
            runtime_s=time.perf_counter() - t_n,
        ))
        if config.omega_trials > 0:
            diag = omega_diagnostic(
                config.law_instance(), n, config.omega_trials, config.master_seed,
                radius_multiplier=config.radius_multiplier,
                window_width=config.window_width,
            )
            omega_rows.append({
                "n": n, "delta0": diag.delta0, "r0": diag.r0,
                "grid_size": len(diag.grid), "trials": diag.trials,
                "evaluated_pairs": diag.evaluated_pairs,
                "failure_count": diag.failure_count,
                "failure_freq": diag.failure_freq,
                "extends_nominal_range": diag.extends_nominal_range,
            })
    return ResultRecord(
        config_hash=config.config_hash(),
        law=config.law,
        per_n=tuple(rows),
        master_seed=config.master_seed,
        versions=_versions(),
        runtime_s=time.perf_counter() - t_start,
        omega=tuple(omega_rows),
    )


# ---------------------------------------------------------------------------
# profile study (shared-environment monotone profiles)
# ---------------------------------------------------------------------------


def _profile_chunk(args) -> tuple[int, np.ndarray]:
    law_cfg, n, multiplier, r_values, master_seed, start, stop = args
    law = law_from_config(law_cfg)
    coupling = QuantileCoupling(law)
    box = GridBox(multiplier * n)
    rs = np.asarray(r_values)
    out = np.empty((stop - start, rs.size))
    for i, trial in enumerate(range(start, stop)):
        stream = RngStream(master_seed, _PROFILE_KIND, n, trial)
        env = sample_environment(law, box, stream)
        results = passage_time_profile(env, coupling, n, rs, (0, 0), (n, 0), box.radius)
        out[i] = [res.time for res in results]
    return start, out


def run_profile_study(
    config: ExperimentConfig,
    n: int,
    n_envs: int,
    r_values,
) -> np.ndarray:
    """Matrix of T_r(0, (n,0)) profiles, one row per environment."""
    rs = np.sort(np.asarray(list(r_values), dtype=float))
    chunk = max(1, _CHUNK // 8)
    chunk_args = [
        (config.law, n, config.radius_multiplier, tuple(rs), config.master_seed,
         start, min(start + chunk, n_envs))
        for start in range(0, n_envs, chunk)
    ]
    out = np.empty((n_envs, rs.size))
    for start, block in _run_chunked(_profile_chunk, chunk_args, config.workers):
        out[start:start + block.shape[0]] = block
    return out


# ---------------------------------------------------------------------------
# verification battery
# ---------------------------------------------------------------------------


def coupling_check_battery(law: WeightLaw, master_seed: int) -> list[dict]:
    """Deterministic coupling sanity checks: {name, pass, statistic, tolerance}."""
    coupling = QuantileCoupling(law)
    checks: list[dict] = []
    lo, hi = law.support
    u = np.linspace(0.02, 0.98, 41)
    s = law.quantile(u)
    taus = np.linspace(-1.0, 1.0, 21)

    # semigroup: g_a(g_b(s)) = g_{a+b}(s)
    worst = 0.0
    for ta in (-0.7, -0.2, 0.3, 1.0):
        for tb in (-0.5, 0.25, 0.6):
            lhs = coupling.g(coupling.g(s, tb), ta)
            rhs = coupling.g(s, ta + tb)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(rhs)))))
    checks.append({"name": "semigroup", "pass": worst <= 1e-8,
                   "statistic": worst, "tolerance": 1e-8})

    # inverse pair: g_{-tau} . g_tau = id
    worst = 0.0
    for ta in (0.1, 0.5, 1.0):
        back = coupling.g(coupling.g(s, ta), -ta)
        worst = max(worst, float(np.max(np.abs(back - s) / (1.0 + np.abs(s)))))
    checks.append({"name": "inverse_pair", "pass": worst <= 1e-8,
                   "statistic": worst, "tolerance": 1e-8})

    # monotone in s and in tau on sorted grids
    mono_s = all(bool(np.all(np.diff(coupling.g(s, t)) > 0)) for t in (-0.8, 0.0, 0.9))
    g_tau = np.stack([coupling.g(s, t) for t in taus])
    mono_tau = bool(np.all(np.diff(g_tau, axis=0) > 0))
    checks.append({"name": "monotone_in_s", "pass": mono_s, "statistic": float(mono_s),
                   "tolerance": 0.0})
    checks.append({"name": "monotone_in_tau", "pass": mono_tau, "statistic": float(mono_tau),
                   "tolerance": 0.0})

    # pushforward law of g_tau(X)
    ks = pushforward_check(coupling, 0.3, 10**4,
                           RngStream(master_seed, _CHECK_KIND, 1))
    checks.append({"name": "pushforward_ks", "pass": ks.passed,
                   "statistic": ks.statistic, "tolerance": ks.critical})
    return checks


def _default_events(law: WeightLaw, dim: int):
    """Deterministic event battery: thresholds from law quantiles only."""
    med = float(law.quantile(np.array([0.5]))[0])
    q75 = float(law.quantile(np.array([0.75]))[0])
    q40 = float(law.quantile(np.array([0.4]))[0])
    q60 = float(law.quantile(np.array([0.6]))[0])
    return [
        ("sum_le_dim_median", lambda x: x.sum(axis=1) <= dim * med),
        ("max_le_q75", lambda x: x.max(axis=1) <= q75),
        ("sum_window_q40_q60",
         lambda x: (x.sum(axis=1) >= dim * q40) & (x.sum(axis=1) <= dim * q60)),
    ]


def mw_default_battery(
    law: WeightLaw,
    master_seed: int,
    trials: int = 10**5,
    dims: tuple[int, ...] = (1, 4, 16),
    tau_value: float = 0.1,
) -> list[dict]:
    """Monte Carlo inequality checks over the default event battery.

    The three coupled sample matrices h(Z), h(Z + tau), h(Z - tau) are built
    once per dimension and shared by every event, exactly as
    mw_inequality_check does for a single event.
    """
    coupling = QuantileCoupling(law)
    out = []
    for d_i, dim in enumerate(dims):
        tau = np.full(dim, tau_value)
        tau_norm_sq = float(np.dot(tau, tau))
        stream = RngStream(master_seed, _CHECK_KIND, 2, d_i)
        z = stream.latent_normals(trials * dim).reshape(trials, dim)
        x = coupling.h(z)
        x_plus = coupling.h(z + tau[None, :])
        x_minus = coupling.h(z - tau[None, :])
        for name, event in _default_events(law, dim):
            p0 = float(np.mean(event(x)))
            pp = float(np.mean(event(x_plus)))
            pm = float(np.mean(event(x_minus)))
            inconclusive = p0 == 0.0 and pp == 0.0 and pm == 0.0
            if inconclusive:
                rhs = margin = stderr = 0.0
            else:
                rhs, margin, stderr = _mw_sides(p0, pp, pm, tau_norm_sq, trials)
            out.append({
                "dim": dim, "event": name, "lhs": p0, "rhs": rhs,
                "p_plus": pp, "p_minus": pm,
                "margin": margin, "stderr": stderr,
                "tau_norm_sq": tau_norm_sq,
                "inconclusive": inconclusive,
                "pass": inconclusive or margin >= -3.0 * stderr,
            })
    return out


def _mw_sides(p0: float, pp: float, pm: float, tau_norm_sq: float, trials: int):
    """lhs, rhs, margin and combined stderr for window probabilities."""
    amp = math.exp(0.5 * tau_norm_sq)
    # geometric mean of equal factors is the factor, exactly
    rhs = amp * (pp if pp == pm else math.sqrt(pp * pm))

    def se(p: float) -> float:
        return math.sqrt(max(p * (1.0 - p), 1.0 / trials) / trials)

    fp = max(pp, 1.0 / trials)
    fm = max(pm, 1.0 / trials)
    var_rhs = (0.25 * amp**2) * ((fm / fp) * se(pp) ** 2 + (fp / fm) * se(pm) ** 2)
    stderr = math.sqrt(se(p0) ** 2 + var_rhs)
    return rhs, rhs - p0, stderr


def _chain_chunk(args) -> tuple[int, np.ndarray]:
    law_cfg, n, multiplier, r_values, master_seed, start, stop = args
    law = law_from_config(law_cfg)
    coupling = QuantileCoupling(law)
    box = GridBox(multiplier * n)
    rs = np.asarray(r_values)
    out = np.empty((stop - start, rs.size))
    for i, trial in enumerate(range(start, stop)):
        stream = RngStream(master_seed, _CHAIN_KIND, n, trial)
        env = sample_environment(law, box, stream)
        results = passage_time_profile(env, coupling, n, rs, (0, 0), (n, 0), box.radius)
        out[i] = [res.time for res in results]
    return start, out


@dataclass(frozen=True)
class MwBatteryRecord:
    config_hash: str
    law: dict
    gaussian_closed_form: dict
    coupling_checks: list
    mw_checks: list
    increment_reports: list
    chain_rows: list
    delta0: float
    master_seed: int
    versions: dict
    runtime_s: float

    @property
    def all_passed(self) -> bool:
        core = all(c["pass"] for c in self.coupling_checks)
        mw = all(c["pass"] for c in self.mw_checks)
        chain = all(row["pass"] for row in self.chain_rows)
        inc = all(row["within_budget"] for row in self.increment_reports
                  if row["s_base"] == 0.0)
        return core and mw and chain and bool(self.gaussian_closed_form["pass"])


def run_mw_battery(config: ExperimentConfig) -> MwBatteryRecord:
    """Verification battery at the first n of the config's n-grid."""
    t_start = time.perf_counter()
    law = config.law_instance()
    coupling = QuantileCoupling(law)
    n = config.n_grid[0]
    seed = config.master_seed

    # closed-form Gaussian grid (law-independent)
    cf = mw_gaussian_closed_form(np.linspace(-5.0, 5.0, 40), np.linspace(0.0, 2.0, 25))
    gaussian_closed_form = {
        "checked": cf.checked, "violations": cf.violations,
        "max_log_gap": cf.max_log_gap, "tolerance": cf.tolerance, "pass": cf.passed,
    }

    coupling_checks = coupling_check_battery(law, seed)
    mw_checks = mw_default_battery(law, seed, trials=max(config.mw_event_trials, 10**4))

    delta0 = estimate_delta0(coupling, 0.999).delta0
    idx = scales(n)
    increment_reports = []
    for k in range(idx.k0, min(idx.k1, 4) + 1):
        for r, s_base in ((1.0, 0.0), (0.5, 0.5)):
            rep = increment_event_frequency(
                law, n, k, r, config.mw_event_trials, seed,
                delta0=delta0, s_base=s_base,
            )
            increment_reports.append({
                "k": k, "r": rep.r, "s_base": rep.s_base, "threshold": rep.threshold,
                "trials": rep.trials, "hits": rep.hits,
                "conservative_hits": rep.conservative_hits,
                "frequency": rep.frequency, "stderr": rep.stderr,
                "budget": rep.budget, "within_budget": rep.within_budget,
            })

    # window-probability chain on shared environments; r = 0 is kept as the
    # trivial row (both shifted probabilities coincide with the base, so
    # lhs equals rhs exactly)
    r_grid = np.asarray(sorted(set(abs(r) for r in config.r_grid)))
    rs = np.unique(np.concatenate([-r_grid, [0.0], r_grid]))
    N = config.mw_trials
    chunk = max(1, _CHUNK // 8)
    chunk_args = [
        (config.law, n, config.radius_multiplier, tuple(rs), seed,
         start, min(start + chunk, N))
        for start in range(0, N, chunk)
    ]
    times = np.empty((N, rs.size))
    for start, block in _run_chunked(_chain_chunk, chunk_args, config.workers):
        times[start:start + block.shape[0]] = block

    zero_col = int(np.flatnonzero(rs == 0.0)[0])
    base = SampleSet(times[:, zero_col], n, config.law)
    conc = concentration_function(base, config.window_width)
    a_lo, a_hi = conc.window
    chain_rows = []
    for r in r_grid:
        cp = int(np.flatnonzero(rs == r)[0])
        cm = int(np.flatnonzero(rs == -r)[0])
        p0 = conc.q_hat
        pp = float(np.mean((times[:, cp] >= a_lo) & (times[:, cp] <= a_hi)))
        pm = float(np.mean((times[:, cm] >= a_lo) & (times[:, cm] <= a_hi)))
        sched = tau_schedule(n, float(r))
        tns = sched.tau_norm_sq
        rhs, margin, stderr = _mw_sides(p0, pp, pm, tns, N)
        chain_rows.append({
            "r": float(r), "lhs": p0, "p_plus": pp, "p_minus": pm,
            "rhs": rhs, "margin": margin, "stderr": stderr,
            "tau_norm_sq": tns,
            "tau_norm_sq_direct": sched.tau_norm_sq_direct(GridBox(2 ** (sched.k1 + 1))),
            "window": [a_lo, a_hi],
            "pass": margin >= -3.0 * stderr,
        })

    return MwBatteryRecord(
        config_hash=config.config_hash(),
        law=config.law,
        gaussian_closed_form=gaussian_closed_form,
        coupling_checks=coupling_checks,
        mw_checks=mw_checks,
        increment_reports=increment_reports,
        chain_rows=chain_rows,
        delta0=float(delta0),
        master_seed=seed,
        versions=_versions(),
        runtime_s=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

_CSV_COLUMNS = (
    "n", "law", "samples", "window_width", "q_hat", "a_star", "q_stderr",
    "var", "var_stderr", "boundary_rate", "mean_ties",
)


def result_csv_text(record: ResultRecord) -> str:
    """Deterministic CSV: header plus one row per n; floats via repr."""
    law_tag = record.law.get("family", "unknown")
    lines = [",".join(_CSV_COLUMNS)]
    for row in record.per_n:
        lines.append(",".join([
            str(row.n), law_tag, str(row.samples), repr(row.window_width),
            repr(row.q_hat), repr(row.a_star), repr(row.q_stderr),
            repr(row.var), repr(row.var_stderr), repr(row.boundary_rate),
            repr(row.mean_ties),
        ]))
    return "\n".join(lines) + "\n"


def result_summary(record: ResultRecord, config: ExperimentConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": record.config_hash,
        "config": config.semantic_fields(),
        "versions": record.versions,
        "master_seed": record.master_seed,
        "runtime_s": record.runtime_s,
        "per_n": [asdict(row) for row in record.per_n],
        "omega": [dict(row) for row in record.omega],
    }


_SUMMARY_SCHEMA = {
    "schema_version": int,
    "config_hash": str,
    "config": dict,
    "versions": dict,
    "master_seed": int,
    "runtime_s": float,
    "per_n": list,
    "omega": list,
}

_PER_N_SCHEMA = {
    "n": int, "samples": int, "window_width": float, "q_hat": float,
    "a_star": float, "q_stderr": float, "var": float, "var_stderr": float,
    "boundary_rate": float, "mean_ties": float, "runtime_s": float,
}


def validate_summary(summary: dict) -> None:
    """Raise ConfigError unless the summary dict matches the schema."""
    for key, typ in _SUMMARY_SCHEMA.items():
        if key not in summary:
            raise ConfigError(f"summary missing key {key!r}")
        if not isinstance(summary[key], typ):
            raise ConfigError(f"summary key {key!r} has type "
                              f"{type(summary[key]).__name__}, expected {typ.__name__}")
    if summary["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {summary['schema_version']}")
    for row in summary["per_n"]:
        for key, typ in _PER_N_SCHEMA.items():
            if key not in row:
                raise ConfigError(f"per_n row missing key {key!r}")
            value = row[key]
            if typ is float and isinstance(value, int):
                continue
            if not isinstance(value, typ):
                raise ConfigError(f"per_n key {key!r} has type "
                                  f"{type(value).__name__}, expected {typ.__name__}")


def emit_outputs(record: ResultRecord, config: ExperimentConfig, out_dir: str) -> dict:
    """Write results.csv and summary.json; returns the written paths."""
    import os

    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "results.csv")
        json_path = os.path.join(out_dir, "summary.json")
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(result_csv_text(record))
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(result_summary(record, config), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out_dir!r}: {exc}") from exc
    return {"csv": csv_path, "json": json_path}
