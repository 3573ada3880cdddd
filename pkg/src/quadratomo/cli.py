"""Batch pipeline driver.

Verbs: simulate, calibrate, reconstruct, analyze, bias-study.  Each takes
--config (INI file, flat key=value under sections), --seed, --out.  The seed
is resolved as --seed flag, then the QUADRATOMO_SEED environment variable,
then the config file.  Every command writes a manifest.json with SHA-256
hashes of the files it read.  Exit codes: 0 success, 2 validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calibration as cal
from . import fock, formats, gaussian, homodyne, tomography

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> configparser.ConfigParser:
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = configparser.ConfigParser()
    cfg.read(path)
    return cfg


def _get(cfg, section, key, cast=str, default=None, required=False):
    if not cfg.has_option(section, key):
        if required:
            raise ConfigError(f"missing required option [{section}] {key}")
        return default
    raw = cfg.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc


def _resolve_seed(args, cfg, section) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QUADRATOMO_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"QUADRATOMO_SEED is not an integer: {env!r}") from exc
    return _get(cfg, section, "seed", int)


def _detector_case(cfg, section="detector") -> cal.CalibrationCase:
    label = _get(cfg, section, "case")
    dv2 = _get(cfg, section, "dv2_off_mv2", float, cal.REFERENCE_DV2_OFF_MV2)
    if label:
        return cal.case_by_label(label, dv2)
    eta = _get(cfg, section, "eta", float, required=True)
    n_bar = _get(cfg, section, "n_bar", float, 0.0)
    conversion = _get(cfg, section, "conversion", float,
                      cal.conversion_factor(dv2, eta, n_bar))
    return cal.CalibrationCase("custom", eta, n_bar, conversion)


def _state_from_config(cfg, section="state"):
    kind = _get(cfg, section, "kind", str, required=True)
    if kind == "vacuum":
        return gaussian.vacuum()
    if kind == "thermal":
        return gaussian.thermal(_get(cfg, section, "n_bar", float, required=True))
    if kind == "squeezed_thermal":
        v_min = _get(cfg, section, "v_min", float)
        v_max = _get(cfg, section, "v_max", float)
        if v_min is None or v_max is None:
            v_min = _get(cfg, section, "v_min_ratio", float, required=True) * 0.5
            v_max = _get(cfg, section, "v_max_ratio", float, required=True) * 0.5
        axis = _get(cfg, section, "axis", float, 0.0)
        return gaussian.squeezed_thermal(v_min, v_max, axis)
    if kind == "fock":
        n = _get(cfg, section, "n", int, required=True)
        cutoff = _get(cfg, section, "cutoff", int, fock.DEFAULT_CUTOFF)
        return fock.fock_state(n, cutoff)
    raise ConfigError(f"unknown state kind {kind!r}")


def _manifest(out_dir: Path, command: str, config_path: str, inputs: list,
              outputs: list, seed) -> Path:
    payload = {
        "command": command,
        "config": str(config_path),
        "config_sha256": formats.sha256_of(config_path),
        "inputs": {str(p): formats.sha256_of(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "seed": seed,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(payload, indent=2))
    return path


# ------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg, "simulate")
    if seed is None:
        raise ConfigError("simulate requires a seed (--seed, QUADRATOMO_SEED, "
                          "or [simulate] seed)")
    state = _state_from_config(cfg)
    detector = _detector_case(cfg)
    schedule = homodyne.PhaseSchedule(
        kind=_get(cfg, "schedule", "kind", str, "swept"),
        n_phases=_get(cfg, "schedule", "n_phases", int, 100),
        samples_per_phase=_get(cfg, "schedule", "samples_per_phase", int),
    )
    n = _get(cfg, "simulate", "n", int, required=True)
    dataset = homodyne.sample(state, detector, schedule, n, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = _get(cfg, "simulate", "name", str, "dataset")
    csv_path, meta_path = formats.save_dataset(dataset, out / f"{stem}.csv")
    curve = homodyne.variance_vs_phase(dataset, schedule.n_phases)
    curve_path = formats.save_variance_curve(curve, out / f"{stem}_variance.csv")
    outputs = [csv_path, meta_path, curve_path]
    if args.plot:
        outputs.append(_plot_curve(curve, out / f"{stem}_variance.svg"))
    _manifest(out, "simulate", args.config, [], outputs, seed)
    finite = curve.variances[np.isfinite(curve.variances)]
    print(f"simulate: {n} records over {schedule.n_phases} phases -> {csv_path}")
    print(f"binned variance min {finite.min():.4f} max {finite.max():.4f} quanta "
          f"({finite.min()/0.5:.1%} / {finite.max()/0.5:.1%} of vacuum)")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load_config(args.config)
    runs_path = _get(cfg, "calibrate", "noise_runs", str, required=True)
    if not Path(runs_path).exists():
        raise ConfigError(f"noise runs file not found: {runs_path}")
    runs = formats.load_noise_runs(runs_path)
    lam_lo = _get(cfg, "calibrate", "lambda_lo", float, cal.SWITCH_LOSS_BOUNDS[0])
    lam_hi = _get(cfg, "calibrate", "lambda_hi", float, cal.SWITCH_LOSS_BOUNDS[1])
    freq = _get(cfg, "calibrate", "frequency_hz", float, cal.DEFAULT_FREQUENCY_HZ)
    t_hot = _get(cfg, "calibrate", "t_hot_k", float, cal.T_HOT_K)
    dv2 = _get(cfg, "calibrate", "dv2_off_mv2", float, cal.REFERENCE_DV2_OFF_MV2)
    bounded = cal.solve_chain_bounded(runs, (lam_lo, lam_hi), freq, t_hot)
    cases = cal.three_cases(dv2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = formats.save_calibration_report(bounded, cases, out / "calibration.json")
    _manifest(out, "calibrate", args.config, [runs_path], [report_path], None)
    mid = bounded["solutions"][sorted(bounded["solutions"])[1]]
    eta = cal.efficiency_eq1(mid.params)
    print(f"calibrate: solved chain at lambda in [{lam_lo}, {lam_hi}] -> {report_path}")
    print(f"midpoint-lambda efficiency from the gain/noise formula: {eta:.4f}")
    for name, (lo, mid_v, hi) in bounded["intervals"].items():
        print(f"  {name:6s} [{lo:.6g}, {mid_v:.6g}, {hi:.6g}]")
    return EXIT_OK


def _povm_for(cfg, dataset, case, section="reconstruct") -> tomography.PovmSet:
    cutoff = _get(cfg, section, "cutoff", int, fock.DEFAULT_CUTOFF)
    n_phases = _get(cfg, section, "n_phases", int, 100)
    n_bins = _get(cfg, section, "n_bins", int, 201)
    v_max_det = _get(cfg, section, "v_max_detected", float)
    if v_max_det is None:
        curve = homodyne.variance_vs_phase(dataset, n_phases)
        v_max_det = float(np.nanmax(curve.variances))
    edges = tomography.default_bin_edges(v_max_det, n_bins)
    return tomography.build_povm(case.eta, cutoff=cutoff, n_phases=n_phases,
                                 bin_edges=edges)


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg, "reconstruct")
    data_path = _get(cfg, "reconstruct", "dataset", str, required=True)
    if not Path(data_path).exists():
        raise ConfigError(f"dataset not found: {data_path}")
    dataset = formats.load_dataset(data_path)
    case = _detector_case(cfg, "detector")
    povm = _povm_for(cfg, dataset, case)
    max_iter = _get(cfg, "reconstruct", "max_iter", int, 5000)
    tol = _get(cfg, "reconstruct", "tol", float, 1e-9)
    result = tomography.reconstruct(dataset, povm, max_iter=max_iter, tol=tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rho_path = formats.save_density_matrix(result.rho, out / "rho.json")
    half = _get(cfg, "reconstruct", "wigner_halfwidth", float, 4.0)
    points = _get(cfg, "reconstruct", "wigner_points", int, 161)
    axis = np.linspace(-half, half, points)
    grid = fock.wigner(result.rho, axis, axis)
    wigner_path = formats.save_wigner_grid(grid, out / "wigner.csv")
    report = {
        "iterations": result.iterations,
        "final_loglik": float(result.loglik_trace[-1]),
        "converged": bool(result.converged),
        "eta": case.eta,
        "cutoff": povm.cutoff,
        "n_phases": povm.n_phases,
        "n_bins": povm.n_bins,
        "seed": seed,
        "dilution_steps": result.diagnostics["dilution_steps"],
        "n_records": result.diagnostics["n_records"],
    }
    report_path = formats.save_run_report(report, out / "report.json")
    outputs = [rho_path, wigner_path, report_path]
    k = _get(cfg, "reconstruct", "bootstrap_k", int)
    m = _get(cfg, "reconstruct", "bootstrap_m", int)
    if k and m:
        if seed is None:
            raise ConfigError("bootstrap needs a seed")
        summary = tomography.bootstrap(dataset, povm, k, m, seed,
                                       max_iter=max_iter, tol=tol)
        outputs.append(formats.save_bootstrap_summary(summary, out / "bootstrap.csv"))
    if args.plot:
        outputs.append(_plot_wigner(grid, out / "wigner.svg"))
    _manifest(out, "reconstruct", args.config, [data_path], outputs, seed)
    v_min, v_max = fock.extremal_variances(result.rho)
    print(f"reconstruct: {result.iterations} iterations, converged={result.converged}")
    print(f"min/max variance ratio {v_min/0.5:.4f} / {v_max/0.5:.3f}, "
          f"purity {fock.purity(result.rho):.4f} -> {rho_path}")
    if not result.converged:
        print("reconstruction did not reach the requested tolerance; "
              f"final relative gain {abs(result.loglik_trace[-1]-result.loglik_trace[-2])/abs(result.loglik_trace[-1]):.3e}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _linear_row(dataset, case, n_phases) -> dict:
    data_q = dataset
    if dataset.meta.get("unit") == "mV":
        data_q = homodyne.voltage_view(dataset, 1.0 / case.conversion)
    curve = homodyne.variance_vs_phase(data_q, n_phases)
    detected_min = float(np.nanmin(curve.variances))
    inferred = gaussian.linear_variance_inference(detected_min, case.eta)
    return {"detected_min_variance_quanta": detected_min,
            "linear_sq_variance_quanta": inferred,
            "linear_sq_variance_ratio": inferred / 0.5}


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    which = _get(cfg, "analyze", "cases", str, "best_guess")
    dv2 = _get(cfg, "analyze", "dv2_off_mv2", float, cal.REFERENCE_DV2_OFF_MV2)
    if which == "all":
        cases = cal.three_cases(dv2)
    else:
        cases = [cal.case_by_label(which, dv2)]
    n_phases = _get(cfg, "analyze", "n_phases", int, 100)
    dataset_path = _get(cfg, "analyze", "dataset", str)
    dataset = formats.load_dataset(dataset_path) if dataset_path else None
    inputs = [p for p in [dataset_path] if p]
    rows = []
    for case in cases:
        row = {"case": case.label, "eta": case.eta, "n_bar": case.n_bar}
        rho_path = (_get(cfg, "analyze", f"rho_{case.label}", str)
                    or _get(cfg, "analyze", "rho", str))
        if rho_path:
            if not Path(rho_path).exists():
                raise ConfigError(f"density matrix file not found: {rho_path}")
            rho = formats.load_density_matrix(rho_path)
            props = tomography.state_properties(rho)
            row.update(props)
            row["best_pure_v_s_ratio"] = props["best_pure_v_s_quanta"] / 0.5
            if rho_path not in inputs:
                inputs.append(rho_path)
        if dataset is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")    # thin phase bins are fine here
                row.update(_linear_row(dataset, case, n_phases))
        rows.append(row)
    if not rows or all(len(r) <= 3 for r in rows):
        raise ConfigError("analyze needs a density matrix and/or a dataset")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = formats.save_run_report({"rows": rows}, out / "analysis.json")
    _manifest(out, "analyze", args.config, inputs, [report_path], None)
    for row in rows:
        print(f"[{row['case']}]")
        for key, val in row.items():
            if key == "case":
                continue
            print(f"  {key:28s} {val:.6g}" if isinstance(val, float) else
                  f"  {key:28s} {val}")
    return EXIT_OK


def cmd_bias_study(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg, "bias_study")
    if seed is None:
        raise ConfigError("bias-study requires a seed")
    n = _get(cfg, "bias_study", "n", int, 10000)
    eta = _get(cfg, "bias_study", "eta", float, 0.36)
    v_min = _get(cfg, "bias_study", "v_min_ratio", float, 0.111) * 0.5
    v_max = _get(cfg, "bias_study", "v_max_ratio", float, 20.17) * 0.5
    n_seeds = _get(cfg, "bias_study", "n_seeds", int, 20)
    cutoff = _get(cfg, "bias_study", "cutoff", int, fock.DEFAULT_CUTOFF)
    n_phases = _get(cfg, "bias_study", "n_phases", int, 100)
    n_bins = _get(cfg, "bias_study", "n_bins", int, 201)
    max_iter = _get(cfg, "bias_study", "max_iter", int, 5000)
    tol = _get(cfg, "bias_study", "tol", float, 1e-9)
    report = run_bias_study(n=n, eta=eta, v_min=v_min, v_max=v_max, n_seeds=n_seeds,
                            seed=seed, cutoff=cutoff, n_phases=n_phases,
                            n_bins=n_bins, max_iter=max_iter, tol=tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = formats.save_run_report(report, out / "bias_study.json")
    _manifest(out, "bias-study", args.config, [], [report_path], seed)
    print(f"bias-study: n={n}, eta={eta}, {n_seeds} seeds")
    print(f"generator min-variance ratio {report['generator_min_variance_ratio']:.4f}")
    print(f"reconstructed min-variance ratio {report['mean_min_variance_ratio']:.4f}"
          f" +/- {report['std_min_variance_ratio']:.4f}")
    return EXIT_OK


def run_bias_study(n: int, eta: float, v_min: float, v_max: float, n_seeds: int,
                   seed: int, cutoff: int = fock.DEFAULT_CUTOFF, n_phases: int = 100,
                   n_bins: int = 201, max_iter: int = 5000, tol: float = 1e-9) -> dict:
    """Simulate measuring a Gaussian state with the linear-method variances and
    reconstruct it, across an ensemble of seeds; the gap between the generator
    and reconstructed minimum variance is the estimator bias."""
    state = gaussian.squeezed_thermal(v_min, v_max)
    schedule = homodyne.PhaseSchedule("swept", n_phases)
    v_max_det = eta * v_max + (1 - eta) / 2
    edges = tomography.default_bin_edges(v_max_det, n_bins)
    povm = tomography.build_povm(eta, cutoff=cutoff, n_phases=n_phases, bin_edges=edges)
    ratios, iterations, converged = [], [], []
    for k in range(n_seeds):
        dataset = homodyne.sample(state, eta, schedule, n, seed + k)
        result = tomography.reconstruct(dataset, povm, max_iter=max_iter, tol=tol)
        v_lo, _ = fock.extremal_variances(result.rho)
        ratios.append(v_lo / 0.5)
        iterations.append(result.iterations)
        converged.append(bool(result.converged))
    ratios = np.asarray(ratios)
    return {
        "n": n, "eta": eta, "n_seeds": n_seeds, "seed": seed, "cutoff": cutoff,
        "generator_min_variance_ratio": v_min / 0.5,
        "generator_max_variance_ratio": v_max / 0.5,
        "per_seed_min_variance_ratio": ratios.tolist(),
        "mean_min_variance_ratio": float(ratios.mean()),
        "std_min_variance_ratio": float(ratios.std(ddof=1)) if n_seeds > 1 else 0.0,
        "iterations": iterations,
        "converged": converged,
    }


# ------------------------------------------------------------ optional SVG rendering

def _plot_curve(curve, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(curve.thetas / (2 * np.pi), curve.variances, '.-')
    ax.axhline(0.5, color='k', lw=0.8)
    ax.set_xlabel(r"$\theta/2\pi$")
    ax.set_ylabel("variance (quanta)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _plot_wigner(grid, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4.2))
    extent = (grid.p_axis[0], grid.p_axis[-1], grid.x_axis[0], grid.x_axis[-1])
    vmax = np.abs(grid.values).max()
    im = ax.imshow(grid.values, origin="lower", extent=extent, cmap="RdBu_r",
                   vmin=-vmax, vmax=vmax)
    ax.set_xlabel("p (quanta)")
    ax.set_ylabel("x (quanta)")
    fig.colorbar(im, ax=ax, label="W")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


# ------------------------------------------------------------ entry point

_COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "reconstruct": cmd_reconstruct,
    "analyze": cmd_analyze,
    "bias-study": cmd_bias_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadratomo",
        description="simulate, calibrate, and reconstruct squeezed-state "
                    "quadrature measurements")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--plot", action="store_true", help="also write SVG renderings")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, cal.CalibrationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
