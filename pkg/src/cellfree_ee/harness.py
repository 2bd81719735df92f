"""Experiment runner: seeded Monte Carlo over topologies and scheme comparison.

A run point draws one topology, builds the fading and estimation statistics,
estimates the zero-forcing expectations, and evaluates three power-control
schemes: the equal-power baseline, the perfect-CSI optimizer, and the
imperfect-CSI optimizer. Sweeps aggregate run points over AP counts or
per-AP transmit powers and write schema-stable CSV files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .dinkelbach import solve_pce
from .power import (
    QosSpec,
    energy_efficiency,
    equal_power_allocation,
    make_power_params,
    per_user_rate,
)
from .propagation import generate_topology, large_scale_fading, mmse_stats
from .reports import STATUS_CONVERGED, STATUS_INFEASIBLE
from .sca import solve_ipce
from .zfstats import estimate_zf_statistics

CSV_HEADER = "scheme,M,K,rho_f_w,qos_rule,seed,ee_bits_per_joule,sum_se,iters,status,wall_ms"
AGGREGATE_HEADER = (
    "scheme,M,K,rho_f_w,qos_rule,n_runs,n_converged,n_failed,"
    "ee_mean_bits_per_joule,ee_stderr,sum_se_mean,iters_mean"
)
ALL_SCHEMES = ("equal", "ipce", "pce")
QOS_EQUAL_POWER_RATE = "equal-power-rate"


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, missing value, bad range)."""


@dataclass
class ExperimentConfig:
    """Sweep definition plus the frozen physical and power-model constants."""

    m_list: list = field(default_factory=lambda: [20, 40, 60, 80, 100, 120])
    k: int = 16
    area_side_km: float = 1.0
    sigma_shad_db: float = 8.0
    d_min_km: float = 0.01
    tau: int = 200
    tau_u: str = "K"  # "K" or a fixed sample count
    rho_f_w_list: list = field(default_factory=lambda: [0.2])
    rho_r_w: float = 0.1
    qos: str = QOS_EQUAL_POWER_RATE  # rule name, scalar, or comma list
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 9.0
    carrier_ghz: float = 1.9  # recorded; the fading law does not use it
    drain_efficiency: float = 0.388
    p_cir_w: float = 9.0
    p_cm_w: float = 0.2
    p_0m_w: float = 0.2
    p_bt_w_per_gbps: float = 0.25
    n_topologies: int = 30
    n_mc: int = 1000
    master_seed: int = 1
    schemes: tuple = ALL_SCHEMES
    record_timings: bool = False  # keep False for byte-identical reruns

    def validate(self) -> None:
        if not self.m_list:
            raise ConfigError("m_list must not be empty")
        if not self.rho_f_w_list:
            raise ConfigError("rho_f_w_list must not be empty")
        if any(rho <= 0 for rho in self.rho_f_w_list):
            raise ConfigError("entries of rho_f_w_list must be positive")
        if self.rho_r_w <= 0:
            raise ConfigError("rho_r_w must be positive")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if any(m <= self.k for m in self.m_list):
            raise ConfigError("every M must exceed K for the zero-forcing statistics")
        tau_u = self.tau_u_samples()
        if tau_u < self.k:
            raise ConfigError(f"tau_u={tau_u} must be at least K={self.k}")
        if self.tau <= tau_u:
            raise ConfigError(f"tau={self.tau} must exceed tau_u={tau_u}")
        if self.n_topologies < 1 or self.n_mc < 1:
            raise ConfigError("n_topologies and n_mc must be at least 1")
        unknown = set(self.schemes) - set(ALL_SCHEMES)
        if unknown or not self.schemes:
            raise ConfigError(f"schemes must be a nonempty subset of {ALL_SCHEMES}")
        self.qos_floor_for(self.k)  # validates the rule spelling

    def tau_u_samples(self) -> int:
        if isinstance(self.tau_u, str) and self.tau_u.strip().upper() == "K":
            return self.k
        try:
            return int(self.tau_u)
        except (TypeError, ValueError):
            raise ConfigError(f"tau_u must be 'K' or an integer, got {self.tau_u!r}")

    def qos_floor_for(self, k: int):
        """Fixed floors as a vector, or None for the equal-power-rate rule."""
        rule = str(self.qos).strip()
        if rule == QOS_EQUAL_POWER_RATE:
            return None
        try:
            values = [float(part) for part in rule.split(",")]
        except ValueError:
            raise ConfigError(f"qos must be '{QOS_EQUAL_POWER_RATE}', a number, or a comma list, got {self.qos!r}")
        if any(v < 0 for v in values):
            raise ConfigError("qos floors must be nonnegative")
        if len(values) == 1:
            return np.full(k, values[0])
        if len(values) != k:
            raise ConfigError(f"qos list has {len(values)} entries but K={k}")
        return np.array(values)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        parsers = {
            "m_list": _int_list,
            "k": int,
            "area_side_km": float,
            "sigma_shad_db": float,
            "d_min_km": float,
            "tau": int,
            "tau_u": str,
            "rho_f_w_list": _float_list,
            "rho_r_w": float,
            "qos": str,
            "bandwidth_hz": float,
            "noise_figure_db": float,
            "carrier_ghz": float,
            "drain_efficiency": float,
            "p_cir_w": float,
            "p_cm_w": float,
            "p_0m_w": float,
            "p_bt_w_per_gbps": float,
            "n_topologies": int,
            "n_mc": int,
            "master_seed": int,
            "schemes": _scheme_tuple,
            "record_timings": _bool,
        }
        config = cls()
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in parsers:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    setattr(config, key, parsers[key](value))
                except ConfigError:
                    raise
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
        config.validate()
        return config


def _int_list(text: str) -> list:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list:
    return [float(part) for part in text.split(",") if part.strip()]


def _scheme_tuple(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    m: int
    k: int
    rho_f_w: float
    qos_rule: str
    seed: int
    ee_bits_per_joule: float
    sum_se: float
    iters: int
    status: str
    wall_ms: float


def run_seed(config: ExperimentConfig, topology_index: int) -> int:
    """Per-topology seed derived from the master seed; shared across points."""
    ss = np.random.SeedSequence([config.master_seed, topology_index])
    return int(ss.generate_state(1, np.uint64)[0])


def run_point(config: ExperimentConfig, m: int, rho_f_w: float, seed: int) -> list:
    """One topology draw evaluated under every requested scheme.

    Fully deterministic given (config, m, rho_f_w, seed). Infeasible or
    failed solves are reported as rows with their status rather than dropped.
    """
    ss = np.random.SeedSequence(seed)
    s_topo, s_shadow, s_zf = ss.spawn(3)
    topo = generate_topology(m, config.k, config.area_side_km, s_topo)
    beta = large_scale_fading(topo, config.sigma_shad_db, config.d_min_km, np.random.default_rng(s_shadow))
    tau_u = config.tau_u_samples()
    params = make_power_params(
        m=m,
        bandwidth_hz=config.bandwidth_hz,
        p_tx_watts=rho_f_w,
        p_ul_watts=config.rho_r_w,
        noise_figure_db=config.noise_figure_db,
        tau=config.tau,
        tau_u=tau_u,
        drain_efficiency=config.drain_efficiency,
        p_cir_watts=config.p_cir_w,
        p_cm_watts=config.p_cm_w,
        p_0m_watts=config.p_0m_w,
        p_bt_watts_per_gbps=config.p_bt_w_per_gbps,
    )
    stats = mmse_stats(beta, params.rho_r, tau_u)
    zf = estimate_zf_statistics(stats, config.n_mc, np.random.default_rng(s_zf))

    equal = equal_power_allocation(zf.theta)
    equal_rates = per_user_rate(equal.eta, zf.gamma, params)
    floors = config.qos_floor_for(config.k)
    if floors is None:
        # Equal-power-rate rule: floor every user at the baseline's worst rate,
        # which keeps the baseline feasible and the comparison meaningful.
        floors = np.full(config.k, float(equal_rates.min()))
    qos = QosSpec.from_floor(floors, params)
    qos_rule = str(config.qos).strip()

    zf_perfect = dataclasses.replace(zf, gamma=np.zeros_like(zf.gamma))
    rows = []
    for scheme in config.schemes:
        t0 = time.perf_counter()
        if scheme == "equal":
            ee = energy_efficiency(equal.eta, zf, params)
            sum_se = float(equal_rates.sum())
            iters, status = 0, STATUS_CONVERGED
        elif scheme == "pce":
            alloc, report = solve_pce(zf, params, qos)
            iters, status = report.outer_iterations, report.status
            ee, sum_se = _scheme_metrics(alloc, zf_perfect, params)
        elif scheme == "ipce":
            alloc, report = solve_ipce(zf, params, qos)
            iters, status = report.outer_iterations, report.status
            ee, sum_se = _scheme_metrics(alloc, zf, params)
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        wall_ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            ResultRow(
                scheme=scheme,
                m=m,
                k=config.k,
                rho_f_w=rho_f_w,
                qos_rule=qos_rule,
                seed=seed,
                ee_bits_per_joule=ee,
                sum_se=sum_se,
                iters=iters,
                status=status,
                wall_ms=wall_ms if config.record_timings else 0.0,
            )
        )
    return rows


def _scheme_metrics(alloc, zf_view, params) -> tuple:
    if alloc is None:
        return float("nan"), float("nan")
    rates = per_user_rate(alloc.eta, zf_view.gamma, params)
    return energy_efficiency(alloc.eta, zf_view, params), float(rates.sum())


def sweep_m(config: ExperimentConfig) -> list:
    """Rows over every (M, topology) pair at the first configured rho_f."""
    config.validate()
    rho_f_w = config.rho_f_w_list[0]
    rows = []
    for m in config.m_list:
        for t in range(config.n_topologies):
            rows.extend(run_point(config, m, rho_f_w, run_seed(config, t)))
    return _sorted_rows(rows)


def sweep_rho_f(config: ExperimentConfig) -> list:
    """Rows over every (rho_f, topology) pair at the first configured M."""
    config.validate()
    m = config.m_list[0]
    rows = []
    for rho_f_w in config.rho_f_w_list:
        for t in range(config.n_topologies):
            rows.extend(run_point(config, m, rho_f_w, run_seed(config, t)))
    return _sorted_rows(rows)


def _sorted_rows(rows: list) -> list:
    return sorted(rows, key=lambda r: (r.m, r.rho_f_w, r.scheme, r.seed))


def rows_to_csv(rows: list) -> str:
    """Schema-stable per-run CSV; deterministic bytes for identical rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in rows:
        writer.writerow(
            [
                r.scheme,
                r.m,
                r.k,
                _fmt(r.rho_f_w),
                r.qos_rule,
                r.seed,
                _fmt(r.ee_bits_per_joule),
                _fmt(r.sum_se),
                r.iters,
                r.status,
                _fmt(r.wall_ms),
            ]
        )
    return buffer.getvalue()


def aggregate_rows(rows: list) -> str:
    """Per-point means and standard errors over successfully solved runs."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(AGGREGATE_HEADER.split(","))
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.m, r.rho_f_w, r.scheme), []).append(r)
    for (m, rho_f_w, scheme) in sorted(groups):
        members = groups[(m, rho_f_w, scheme)]
        solved = [r for r in members if r.status != STATUS_INFEASIBLE and np.isfinite(r.ee_bits_per_joule)]
        n_failed = len(members) - len(solved)
        ee = np.array([r.ee_bits_per_joule for r in solved])
        se = np.array([r.sum_se for r in solved])
        iters = np.array([r.iters for r in solved], dtype=float)
        ee_mean = float(ee.mean()) if ee.size else float("nan")
        ee_stderr = float(ee.std(ddof=1) / np.sqrt(ee.size)) if ee.size > 1 else float("nan")
        writer.writerow(
            [
                scheme,
                m,
                members[0].k,
                _fmt(rho_f_w),
                members[0].qos_rule,
                len(members),
                len(solved),
                n_failed,
                _fmt(ee_mean),
                _fmt(ee_stderr),
                _fmt(float(se.mean()) if se.size else float("nan")),
                _fmt(float(iters.mean()) if iters.size else float("nan")),
            ]
        )
    return buffer.getvalue()


def _fmt(value: float) -> str:
    if isinstance(value, float) and not np.isfinite(value):
        return "nan"
    return format(float(value), ".10g")


def write_outputs(rows: list, out_path: str) -> tuple:
    """Write the per-run CSV and its aggregate sibling; returns both paths."""
    agg_path = _aggregate_path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(rows_to_csv(rows))
    with open(agg_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(aggregate_rows(rows))
    return out_path, agg_path


def _aggregate_path(out_path: str) -> str:
    if out_path.endswith(".csv"):
        return out_path[: -len(".csv")] + "_agg.csv"
    return out_path + "_agg.csv"
