"""Command-line entry point: subcommands, manifests, CSV emission.

Every run validates its numeric flags against the model invariants before
any compute, writes its outputs only under --out / --out-dir, and drops a
manifest (flag echo + seed + version) beside them so results are
reproducible from the repository alone.  Failures exit nonzero with a
single machine-readable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import allen_cahn as ac
from .errors import StochacError
from .flow import FlowParams, annulus_for, radial_smbmc_run, radius_sde
from .harness import (ConvergenceReport, ExperimentConfig, lemma2_experiment,
                      report_emit, shared_path, sharp_interface_experiment,
                      subsuper_experiment)
from .noise import (GAMMA_MAX, MollifiedNoise, default_path_dt,
                    empirical_correlation, empirical_variance, sample_brownian,
                    sup_noise_scaling)
from .wave import solve_wave, speed_constant


def _check_gamma(gamma: float):
    if not (0.0 < gamma < GAMMA_MAX):
        raise StochacError(
            f"invariant gamma < 2/3 violated: got gamma = {gamma}")


def _check_beta(beta: float):
    if not (1.0 < beta < 2.0):
        raise StochacError(
            f"invariant beta in (1, 2) violated: got beta = {beta}")


def _write_lines(path: Path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(("\n".join(lines) + "\n").encode())


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _manifest(out_file: Path, command: str, params: dict):
    clean = {k: v for k, v in sorted(params.items())
             if isinstance(v, (int, float, str, bool, list, dict, type(None)))}
    payload = {
        "command": command,
        "version": __version__,
        "params": clean,
    }
    man = out_file.parent / (out_file.stem + ".manifest.json")
    man.parent.mkdir(parents=True, exist_ok=True)
    man.write_bytes((json.dumps(payload, sort_keys=True, indent=2) + "\n").encode())


# -- subcommand implementations ----------------------------------------------

def _cmd_noise_stats(args) -> int:
    _check_gamma(args.gamma)
    rows = ["eps,gamma,var_emp,var_theory,corr_lag,sup_xi,sup_xidot"]
    for eps in args.eps:
        w = eps ** args.gamma
        dt = default_path_dt(eps, args.gamma)
        path = sample_brownian(args.seed, -(w + 4 * dt), args.T + w + 4 * dt, dt)
        noise = MollifiedNoise(path, eps, args.gamma)
        var_emp, var_th = empirical_variance(noise, 0.0, args.samples)
        corr = empirical_correlation(noise, 3.0 * w, args.samples)
        grid = np.arange(0.0, args.T + 1e-12, w / 10.0)
        sup_xi = float(np.max(np.abs(noise.value(grid))))
        sup_xd = float(np.max(np.abs(noise.derivative(grid))))
        rows.append(",".join(_fmt(v) for v in
                             (eps, args.gamma, var_emp, var_th, corr, sup_xi, sup_xd)))
    out = Path(args.out)
    _write_lines(out, rows)
    _manifest(out, "noise-stats", vars(args) | {"out": str(args.out)})
    return 0


def _cmd_wave(args) -> int:
    profile = solve_wave(args.delta, L=args.L, n=args.n)
    out = Path(args.out)
    lines = [f"# c={_fmt(profile.speed_c)} m_minus={_fmt(profile.m_minus)} "
             f"m_plus={_fmt(profile.m_plus)}", "x,m"]
    lines += [f"{_fmt(x)},{_fmt(m)}" for x, m in zip(profile.grid, profile.m_values)]
    _write_lines(out, lines)
    _manifest(out, "wave", vars(args) | {"out": str(args.out)})
    return 0


def _cmd_simulate(args) -> int:
    _check_gamma(args.gamma)
    if args.geometry == "radial":
        grid = ac.radial_for_eps(args.eps, args.r_max, args.dim)
        spacing = grid.dr
    else:
        grid = ac.rect2d_for_eps(args.eps, args.r_max)
        spacing = grid.h
    noise = None
    if args.noise == "on":
        w = args.eps ** args.gamma
        dt_p = min(default_path_dt(args.eps, args.gamma), args.T / 200.0)
        path = sample_brownian(args.seed, -(w + 4 * dt_p), args.T + w + 4 * dt_p, dt_p)
        noise = MollifiedNoise(path, args.eps, args.gamma)
    fld = ac.init_front(grid, args.eps, R0=args.R0)
    dt = ac.stable_dt(args.eps, spacing)
    rec = max(1, int(round(args.T / dt)) // 200)
    rows = ["t,radius,l2_dist,xi_value"]

    def on_record(t, current, radius):
        xi = noise.value(t) if noise is not None else 0.0
        l2 = ac.l2_distance_to_indicator(current, radius)
        rows.append(",".join(_fmt(v) for v in (t, radius, l2, xi)))

    ac.run(fld, noise, args.eps, dt, args.T, record_every=rec, on_record=on_record)
    out = Path(args.out)
    _write_lines(out, rows)
    _manifest(out, "simulate", vars(args) | {"out": str(args.out)})
    return 0


def _cmd_flow(args) -> int:
    sign = {"plus": 1, "minus": -1, "zero": 0}[args.sign]
    if args.mode != "sde":
        _check_gamma(args.gamma)
    if sign != 0:
        _check_beta(args.beta)
    w = args.eps ** args.gamma
    dt_p = min(default_path_dt(args.eps, args.gamma), args.T / 200.0)
    path = sample_brownian(args.seed, -(w + 4 * dt_p), args.T + w + 4 * dt_p, dt_p)
    rows = ["t,radius"]
    if args.mode == "sde":
        trace = radius_sde(args.R0, path, FlowParams(dim_n=args.n), dt_p, args.T)
        pairs = zip(trace.times, trace.radii)
    elif args.mode == "front":
        noise = MollifiedNoise(path, args.eps, args.gamma)
        params = FlowParams(dim_n=args.n, drive="eps_front", eps=args.eps,
                            beta_corr=args.beta, sign=sign)
        trace = radius_sde(args.R0, noise, params, args.T / 400.0, args.T)
        pairs = zip(trace.times, trace.radii)
    else:  # smbmc driven by the limit path
        c0 = speed_constant()
        state = annulus_for(args.R0, 3.0 * args.R0, args.R0 / 150.0, args.n)
        dt_q = 0.25 * state.dr ** 2
        _, times, radii, _ = radial_smbmc_run(
            state, lambda t: c0 * float(path.value(t)), dt_q, args.T,
            sample_every=max(1, int(round(args.T / dt_q)) // 200))
        pairs = zip(times, radii)
    rows += [f"{_fmt(t)},{_fmt(r)}" for t, r in pairs]
    out = Path(args.out)
    _write_lines(out, rows)
    _manifest(out, "flow", vars(args) | {"out": str(args.out)})
    return 0


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise StochacError(f"config file not found: {path}")
        data = json.loads(path.read_text())
    for key in ("seed", "gamma", "beta", "T", "R0"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "eps", None):
        data["eps"] = list(args.eps)
    if getattr(args, "threads", None):
        data["threads"] = args.threads
    cfg = ExperimentConfig.from_dict(data)
    _check_gamma(cfg.gamma)
    _check_beta(cfg.beta)
    return cfg


def _emit_rows(out_dir: Path, name: str, columns, rows, config: ExperimentConfig):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    out = out_dir / f"{name}.csv"
    _write_lines(out, lines)
    _manifest(out, name, {"config": config.to_dict(),
                          "config_hash": config.config_hash()})
    return out


def _cmd_compare(args) -> int:
    cfg = _load_config(args)
    report = sharp_interface_experiment(cfg)
    paths = report_emit(report, args.out_dir)
    _manifest(Path(paths[0]), "compare", {"config": cfg.to_dict(),
                                          "config_hash": cfg.config_hash()})
    return 0


def _cmd_lemma2(args) -> int:
    cfg = _load_config(args)
    rows = lemma2_experiment(cfg)
    _emit_rows(Path(args.out_dir), "lemma2",
               ["eps", "sign", "sup_dist", "holder_dist"], rows, cfg)
    return 0


def _cmd_sandwich(args) -> int:
    cfg = _load_config(args)
    rows = subsuper_experiment(cfg)
    _emit_rows(Path(args.out_dir), "sandwich",
               ["eps", "margin_plus", "margin_minus", "t_end"], rows, cfg)
    return 0


def _cmd_report(args) -> int:
    path = Path(args.json)
    if not path.exists():
        raise StochacError(f"report file not found: {path}")
    data = json.loads(path.read_text())
    report = ConvergenceReport(rows=data["rows"], seed=data["seed"],
                               config=data["config"],
                               config_hash=data["config_hash"],
                               t_common=data["t_common"])
    report_emit(report, args.out_dir)
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stochac",
        description="Stochastic Allen-Cahn laboratory: noisy fronts, "
                    "mean-curvature reference flows, convergence experiments.")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on concurrent experiment legs")
    sub = p.add_subparsers(dest="command", required=True)

    ns = sub.add_parser("noise-stats", help="variance / correlation / sup statistics")
    ns.add_argument("--seed", type=int, default=0)
    ns.add_argument("--eps", type=float, action="append", required=True)
    ns.add_argument("--gamma", type=float, default=0.5)
    ns.add_argument("--T", type=float, default=1.0)
    ns.add_argument("--samples", type=int, default=2000)
    ns.add_argument("--out", required=True)
    ns.set_defaults(fn=_cmd_noise_stats)

    wv = sub.add_parser("wave", help="solve the traveling-front problem")
    wv.add_argument("--delta", type=float, default=0.0)
    wv.add_argument("--L", type=float, default=20.0)
    wv.add_argument("--n", type=int, default=4001)
    wv.add_argument("--out", required=True)
    wv.set_defaults(fn=_cmd_wave)

    sim = sub.add_parser("simulate", help="time-step the forced front equation")
    sim.add_argument("--eps", type=float, required=True)
    sim.add_argument("--gamma", type=float, default=0.5)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--R0", type=float, default=0.3)
    sim.add_argument("--T", type=float, default=0.02)
    sim.add_argument("--geometry", choices=["rect2d", "radial"], default="radial")
    sim.add_argument("--dim", type=int, default=2)
    sim.add_argument("--noise", choices=["on", "off"], default="on")
    sim.add_argument("--r-max", dest="r_max", type=float, default=1.0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(fn=_cmd_simulate)

    fl = sub.add_parser("flow", help="reference front dynamics")
    fl.add_argument("--mode", choices=["sde", "smbmc", "front"], required=True)
    fl.add_argument("--eps", type=float, default=0.04)
    fl.add_argument("--gamma", type=float, default=0.5)
    fl.add_argument("--beta", type=float, default=1.5)
    fl.add_argument("--sign", choices=["plus", "minus", "zero"], default="zero")
    fl.add_argument("--n", type=int, default=2)
    fl.add_argument("--R0", type=float, default=0.3)
    fl.add_argument("--seed", type=int, default=0)
    fl.add_argument("--T", type=float, default=0.01)
    fl.add_argument("--out", required=True)
    fl.set_defaults(fn=_cmd_flow)

    for name, fn, hlp in (("compare", _cmd_compare, "front vs limit SDE sweep"),
                          ("lemma2", _cmd_lemma2, "integrated drive vs path"),
                          ("sandwich", _cmd_sandwich, "barrier ordering margins")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--gamma", type=float, default=None)
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--T", type=float, default=None)
        sp.add_argument("--R0", type=float, default=None)
        sp.add_argument("--eps", type=float, action="append", default=None)
        sp.add_argument("--out-dir", required=True)
        sp.set_defaults(fn=fn)

    rp = sub.add_parser("report", help="re-emit a saved report deterministically")
    rp.add_argument("--json", required=True)
    rp.add_argument("--out-dir", required=True)
    rp.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StochacError as exc:
        print(f"error {getattr(exc, 'code', 'error')}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
