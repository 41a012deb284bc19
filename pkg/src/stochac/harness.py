"""Pathwise convergence experiments coupling all solvers on one Brownian path.

Three experiments:

* ``lemma2_experiment``  -- integrates the rescaled front speed of the
  mollified noise and compares it (sup norm and a discrete Hoelder-1/4
  seminorm) against the Brownian path it should converge to,
* ``subsuper_experiment`` -- encloses a full reaction-diffusion run between
  barrier fronts built from shifted wave profiles on perturbed distance
  functions and reports the worst ordering margins,
* ``sharp_interface_experiment`` -- runs the reaction-diffusion solver and
  the limit radius SDE on a shared path for a sweep of eps and reports the
  sup radius gap and the sup L2 distance to the two-phase indicator.

All eps legs of a sweep are compared on the common time interval (the
minimum of the per-leg stopping times), which is the uniform-in-eps stopping
rule the limit statement is formulated with.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import allen_cahn as ac
from .errors import ParameterError
from .flow import FlowParams, annulus_for, radial_smbmc_run, radius_sde
from .noise import GAMMA_MAX, BrownianPath, MollifiedNoise, default_path_dt, sample_brownian
from .wave import get_speed_table, solve_wave, speed_constant


@dataclass
class ExperimentConfig:
    """Knobs shared by the harness experiments; validated on construction."""

    seed: int = 7
    gamma: float = 0.5
    beta: float = 1.5
    a_exp: float = 1.5
    eps_list: list[float] = field(default_factory=lambda: [0.08, 0.04, 0.02])
    T: float = 0.008
    R0: float = 0.4
    dim_n: int = 2
    geometry: str = "radial"
    r_max: float = 1.0
    curvature_n: float | None = None   # curvature bound N; default 2/R0
    c1: float | None = None            # barrier growth rate; default N^2 + 1
    records: int = 60                  # target number of recorded times per run
    sign: int = 1
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.gamma < GAMMA_MAX):
            raise ParameterError(f"gamma must lie in (0, 2/3), got {self.gamma}")
        if not (1.0 < self.beta < 2.0):
            raise ParameterError(f"beta must lie in (1, 2), got {self.beta}")
        if not self.eps_list:
            raise ParameterError("eps_list must not be empty")
        self.eps_list = sorted(float(e) for e in self.eps_list)[::-1]
        if self.geometry not in ("radial", "rect2d"):
            raise ParameterError(f"unknown geometry {self.geometry!r}")
        if self.curvature_n is None:
            self.curvature_n = 2.0 / self.R0
        if self.c1 is None:
            self.c1 = self.curvature_n ** 2 + 1.0
        if self.c1 <= self.curvature_n ** 2:
            raise ParameterError(
                f"c1 = {self.c1} must exceed N^2 = {self.curvature_n ** 2}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        alias = {"eps": "eps_list", "a": "a_exp", "N": "curvature_n", "dim": "dim_n"}
        kwargs = {}
        for key, value in data.items():
            key = alias.get(key, key)
            if key not in known:
                raise ParameterError(f"unknown config key {key!r}")
            kwargs[key] = value
        return cls(**kwargs)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass
class ConvergenceReport:
    """Per-eps convergence rows plus the metadata to reproduce them."""

    rows: list[dict]
    seed: int
    config: dict
    config_hash: str
    t_common: float


def shared_path(config: ExperimentConfig, extra_dt_cap: float | None = None,
                t_max: float | None = None) -> BrownianPath:
    """The one Brownian path all solvers of an experiment read from."""
    w_max = max(config.eps_list) ** config.gamma
    w_min = min(config.eps_list) ** config.gamma
    dt = default_path_dt(min(config.eps_list), config.gamma)
    if extra_dt_cap is not None:
        dt = min(dt, extra_dt_cap)
    horizon = (t_max if t_max is not None else config.T) + w_max + 4 * dt
    return sample_brownian(config.seed, -(w_max + 4 * dt), horizon, dt)


# -- drift-integral convergence ---------------------------------------------

def _holder_seminorm(values: np.ndarray, step: float, exponent: float = 0.25,
                     min_sep: int = 4) -> float:
    """Discrete Hoelder seminorm over dyadic separations >= min_sep grid steps."""
    semi, sep = 0.0, min_sep
    n = len(values) - 1
    while sep <= n:
        gaps = np.abs(values[sep:] - values[:-sep]) / (sep * step) ** exponent
        semi = max(semi, float(np.max(gaps)))
        sep *= 2
    return semi


def lemma2_experiment(config: ExperimentConfig, path: BrownianPath | None = None,
                      signs: tuple = (+1, -1)) -> list[dict]:
    """Sup and Hoelder-1/4 distance of the integrated front drive to -W.

    For each eps the drive eps^{-1} c(eps xi(s) + sign eps^beta) is integrated
    by the trapezoid rule on a grid of step eps^gamma / 10 and rescaled by the
    speed-slope constant; under the package sign convention it approaches -W.
    Both correction signs are evaluated.  Raises when the speed argument
    leaves the tabulated range (eps too large for this seed).
    """
    table = get_speed_table()
    c0 = speed_constant()
    if path is None:
        path = shared_path(config)
    rows = []
    for eps in config.eps_list:
        w = eps ** config.gamma
        step = w / 10.0
        grid = np.arange(0.0, config.T + 1e-12, step)
        noise = MollifiedNoise(path, eps, config.gamma)
        xi = noise.value(grid)
        if np.max(np.abs(eps * xi)) + eps ** config.beta > table.delta0:
            raise ParameterError(
                f"speed argument leaves [-{table.delta0}, {table.delta0}] "
                f"for eps = {eps} (seed {config.seed}): eps too large")
        w_path = path.value(grid)
        for sign in signs:
            drive = table(eps * xi + sign * eps ** config.beta) / (eps * c0)
            integral = np.concatenate(
                [[0.0], np.cumsum(0.5 * (drive[1:] + drive[:-1]) * step)])
            diff = integral + w_path          # target is -W
            rows.append({
                "eps": eps,
                "sign": sign,
                "sup_dist": float(np.max(np.abs(diff))),
                "holder_dist": _holder_seminorm(diff, step),
            })
    return rows


# -- barrier enclosure -------------------------------------------------------

def _barrier_drive(noise: MollifiedNoise, table, sign: int, beta: float,
                   times: np.ndarray) -> np.ndarray:
    """Integrated barrier velocity B(t) = -int eps^{-1} c(eps xi + sign eps^beta)."""
    eps = noise.epsilon
    xi = noise.value(times)
    v = -table(eps * xi + sign * eps ** beta) / eps
    return np.concatenate(
        [[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(times))])


def subsuper_experiment(config: ExperimentConfig, path: BrownianPath | None = None,
                        ) -> list[dict]:
    """Enclose a noisy front run between barrier fronts; report ordering margins.

    The barriers are wave profiles with tilted speed arguments, evaluated on
    distance functions evolved by the radial flow with the correspondingly
    tilted velocities, and shifted outward by eps^a exp(c1 t).  The solver is
    started from the barrier-adapted front clipped into the initial sandwich,
    so both margins are nonnegative at t = 0 by construction.
    """
    if config.geometry != "radial":
        raise ParameterError("barrier experiment is radial-only")
    table = get_speed_table()
    if path is None:
        path = shared_path(config)
    rows = []
    for eps in config.eps_list:
        rows.append(_subsuper_single(config, path, eps, table))
    return rows


def _subsuper_single(config: ExperimentConfig, path: BrownianPath, eps: float,
                     table) -> dict:
    noise = MollifiedNoise(path, eps, config.gamma)
    beta, a_exp, c1 = config.beta, config.a_exp, config.c1
    grid = ac.radial_for_eps(eps, config.r_max, config.dim_n)
    dt = ac.stable_dt(eps, grid.dr)
    n_steps = int(round(config.T / dt))
    rec_steps = max(1, n_steps // config.records)

    # barrier distance functions on the annulus, stored densely in time
    snaps = {}
    for sign in (+1, -1):
        state = annulus_for(config.R0, config.r_max - 5 * eps, grid.dr, config.dim_n)
        dt_q = 0.25 * state.dr ** 2
        drive_grid = np.arange(int(round(config.T / dt_q)) + 2) * dt_q
        b_vals = _barrier_drive(noise, table, sign, beta, drive_grid)

        def drive(t, b=b_vals, g=drive_grid):
            return float(np.interp(t, g, b))

        _, times_q, _, states = radial_smbmc_run(
            state, drive, dt_q, n_steps * dt, sample_every=1)
        q_mat = np.array([s.q_values for s in states])
        snaps[sign] = (times_q, q_mat, states[0].r_grid, b_vals, drive_grid)

    def barrier_field(sign: int, t: float):
        times_q, q_mat, r_q, b_vals, drive_grid = snaps[sign]
        i = int(np.clip(np.searchsorted(times_q, t) - 1, 0, len(times_q) - 2))
        frac = np.clip((t - times_q[i]) / (times_q[i + 1] - times_q[i]), 0.0, 1.0)
        q_t = (1.0 - frac) * q_mat[i] + frac * q_mat[i + 1]
        b_t = float(np.interp(t, drive_grid, b_vals))
        d_tilde = np.interp(grid.r, r_q, q_t + b_t,
                            left=q_t[0] + b_t, right=q_t[-1] + b_t)
        delta = eps * float(noise.value(t)) + sign * eps ** beta
        profile = _profile_cached(delta)
        z = (d_tilde + sign * eps ** a_exp * math.exp(c1 * t)) / eps
        return profile(z)

    # sandwiched initial data: barrier-consistent front clipped into the bracket
    delta0 = eps * float(noise.value(0.0))
    u_plus0 = barrier_field(+1, 0.0)
    u_minus0 = barrier_field(-1, 0.0)
    if np.any(u_minus0 > u_plus0):
        raise ParameterError("barriers cross at t = 0: configuration bug")
    u0 = _profile_cached(delta0)((grid.r - config.R0) / eps)
    fld = ac.ScalarField(grid, np.clip(u0, u_minus0, u_plus0))

    margin_plus = float(np.min(u_plus0 - fld.values))
    margin_minus = float(np.min(fld.values - u_minus0))
    for k in range(1, n_steps + 1):
        xi_mid = noise.value(fld.time + dt / 2.0)
        fld = ac.step(fld, xi_mid, eps, dt)
        if k % rec_steps == 0 or k == n_steps:
            up = barrier_field(+1, fld.time)
            um = barrier_field(-1, fld.time)
            margin_plus = min(margin_plus, float(np.min(up - fld.values)))
            margin_minus = min(margin_minus, float(np.min(fld.values - um)))
    return {"eps": eps, "margin_plus": margin_plus, "margin_minus": margin_minus,
            "t_end": fld.time}


_PROFILE_CACHE: dict[float, object] = {}


def _profile_cached(delta: float):
    key = round(float(delta), 12)
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = solve_wave(key, L=20.0, n=2001).interpolant()
        if len(_PROFILE_CACHE) > 512:
            _PROFILE_CACHE.clear()
    return _PROFILE_CACHE[key]


# -- sharp-interface convergence ---------------------------------------------

def sharp_interface_experiment(config: ExperimentConfig,
                               path: BrownianPath | None = None,
                               noise_on: bool = True) -> ConvergenceReport:
    """Radius gap and L2 distance between the solver front and the limit SDE.

    One shared path drives every eps leg; each leg is compared over the
    common interval (minimum stopping time over legs) and reports
    sup |R_solver - R_sde| and sup over time of the L2 distance between the
    field and the indicator at the SDE radius.  With noise_on=False both the
    solver and the reference law run without forcing, so the reference is
    the deterministic shrinking front.
    """
    if not noise_on:
        from .noise import path_from_function

        dt_p = config.T / 400.0
        path = path_from_function(lambda t: 0.0, -4 * dt_p,
                                  config.T + 4 * dt_p, dt_p)
    elif path is None:
        path = shared_path(config, extra_dt_cap=config.T / 400.0)

    def leg(eps: float):
        noise = MollifiedNoise(path, eps, config.gamma) if noise_on else None
        floor = max(5.0 * eps, 1.0 / config.curvature_n)
        sde = radius_sde(config.R0, path,
                         FlowParams(dim_n=config.dim_n, floor=floor),
                         dt=path.dt, T=config.T)
        sde_t = np.asarray(sde.times)
        sde_r = np.asarray(sde.radii)

        if config.geometry == "radial":
            grid = ac.radial_for_eps(eps, config.r_max, config.dim_n)
            spacing = grid.dr
        else:
            grid = ac.rect2d_for_eps(eps, config.r_max)
            spacing = grid.h
        fld = ac.init_front(grid, eps, R0=config.R0)
        dt = ac.stable_dt(eps, spacing)
        rec = max(1, int(round(config.T / dt)) // config.records)
        samples = []

        def on_record(t, current, radius):
            if t > sde_t[-1] + 1e-12:
                return
            r_sde = float(np.interp(t, sde_t, sde_r))
            samples.append((t, radius, r_sde,
                            ac.l2_distance_to_indicator(current, r_sde)))

        ac.run(fld, noise, eps, dt, config.T, record_every=rec,
               curvature_bound=config.curvature_n, on_record=on_record)
        return eps, samples, float(sde_t[-1])

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            legs = list(pool.map(leg, config.eps_list))
    else:
        legs = [leg(e) for e in config.eps_list]

    t_common = min(min(s[-1][0] for _, s, _ in legs),
                   min(t_sde for _, _, t_sde in legs))
    rows = []
    for eps, samples, _ in legs:
        inside = [s for s in samples if s[0] <= t_common + 1e-12]
        rows.append({
            "eps": eps,
            "sup_radius_gap": max(abs(s[1] - s[2]) for s in inside),
            "sup_l2_dist": max(s[3] for s in inside),
            "n_records": len(inside),
            "t_end": inside[-1][0],
        })
    return ConvergenceReport(rows=rows, seed=config.seed, config=config.to_dict(),
                             config_hash=config.config_hash(), t_common=t_common)


# -- deterministic emission ---------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_emit(report: ConvergenceReport, out_dir) -> list[str]:
    """Write the report as byte-stable CSV and JSON; returns the paths."""
    from pathlib import Path

    if not report.rows:
        raise ParameterError("report has no rows to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = list(report.rows[0].keys())
    lines = [",".join(columns)]
    for row in report.rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    csv_path = out / "report.csv"
    csv_path.write_bytes(("\n".join(lines) + "\n").encode())
    payload = {
        "config_hash": report.config_hash,
        "seed": report.seed,
        "t_common": report.t_common,
        "config": report.config,
        "rows": report.rows,
    }
    json_path = out / "report.json"
    json_path.write_bytes(
        (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode())
    return [str(csv_path), str(json_path)]
