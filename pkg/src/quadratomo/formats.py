"""On-disk formats: JSON for states and reports, CSV for record-style data.

Floats are written with repr so every file round-trips bit-exactly through
the matching reader.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .calibration import CalibrationCase, ChainSolution, NoiseRun
from .fock import DensityMatrix, WignerGrid
from .gaussian import GaussianState, VarianceCurve
from .homodyne import QuadratureDataset


def _as_path(path) -> Path:
    return Path(path)


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ------------------------------------------------------------ density matrices

def save_density_matrix(rho: DensityMatrix, path) -> Path:
    path = _as_path(path)
    payload = {
        "modes": rho.modes,
        "cutoff": rho.cutoff,
        "re": rho.matrix.real.tolist(),
        "im": rho.matrix.imag.tolist(),
    }
    path.write_text(json.dumps(payload))
    return path

def load_density_matrix(path) -> DensityMatrix:
    payload = json.loads(_as_path(path).read_text())
    matrix = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
    return DensityMatrix(matrix, int(payload["cutoff"]), int(payload["modes"]))


# ------------------------------------------------------------ gaussian states

def save_gaussian_state(state: GaussianState, path) -> Path:
    path = _as_path(path)
    path.write_text(json.dumps({"mean": state.mean.tolist(), "cov": state.cov.tolist()}))
    return path

def load_gaussian_state(path) -> GaussianState:
    payload = json.loads(_as_path(path).read_text())
    return GaussianState(np.asarray(payload["mean"], dtype=float),
                         np.asarray(payload["cov"], dtype=float))


# ------------------------------------------------------------ wigner grids

def save_wigner_grid(grid: WignerGrid, path) -> Path:
    path = _as_path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "p", "w"])
        for i, x in enumerate(grid.x_axis):
            for j, p in enumerate(grid.p_axis):
                writer.writerow([repr(float(x)), repr(float(p)), repr(float(grid.values[i, j]))])
    return path

def load_wigner_grid(path) -> WignerGrid:
    xs, ps, ws = [], [], []
    with open(_as_path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            xs.append(float(row["x"]))
            ps.append(float(row["p"]))
            ws.append(float(row["w"]))
    x_axis = np.unique(xs)
    p_axis = np.unique(ps)
    values = np.asarray(ws).reshape(x_axis.size, p_axis.size)
    return WignerGrid(x_axis, p_axis, values)


# ------------------------------------------------------------ quadrature datasets

def save_dataset(dataset: QuadratureDataset, path) -> tuple[Path, Path]:
    """CSV of records plus a metadata sidecar <stem>.meta.json."""
    path = _as_path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_rad", "value_quanta"])
        for t, v in zip(dataset.thetas, dataset.values):
            writer.writerow([repr(float(t)), repr(float(v))])
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(dataset.meta, default=str))
    return path, meta_path

def load_dataset(path) -> QuadratureDataset:
    path = _as_path(path)
    thetas, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            thetas.append(float(row["theta_rad"]))
            values.append(float(row["value_quanta"]))
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return QuadratureDataset(np.asarray(thetas), np.asarray(values), meta)


# ------------------------------------------------------------ variance curves

def save_variance_curve(curve: VarianceCurve, path) -> Path:
    path = _as_path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_rad", "variance_quanta"])
        for t, v in zip(curve.thetas, curve.variances):
            writer.writerow([repr(float(t)), repr(float(v))])
    return path

def load_variance_curve(path) -> VarianceCurve:
    thetas, variances = [], []
    with open(_as_path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            thetas.append(float(row["theta_rad"]))
            variances.append(float(row["variance_quanta"]))
    return VarianceCurve(np.asarray(thetas), np.asarray(variances))


# ------------------------------------------------------------ noise runs

def save_noise_runs(runs: list[NoiseRun], path) -> Path:
    path = _as_path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "switch", "T_f_K", "S_arb"])
        for run in runs:
            for t, s in zip(run.temperatures_k, run.noise):
                writer.writerow([run.config, run.switch, repr(float(t)), repr(float(s))])
    return path

def load_noise_runs(path) -> list[NoiseRun]:
    rows = {}
    with open(_as_path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (row["config"], row["switch"])
            rows.setdefault(key, ([], []))
            rows[key][0].append(float(row["T_f_K"]))
            rows[key][1].append(float(row["S_arb"]))
    return [NoiseRun(config, switch, np.asarray(ts), np.asarray(ss))
            for (config, switch), (ts, ss) in rows.items()]


# ------------------------------------------------------------ calibration report

def calibration_report_dict(bounded: dict, cases: list[CalibrationCase]) -> dict:
    def solution_dict(sol: ChainSolution) -> dict:
        out = {name: getattr(sol.params, name)
               for name in ("g_h", "a_h", "g_a", "a_a", "g_s", "a_s",
                            "alpha", "beta", "xi", "lam", "n_bar")}
        out["s_h_checks"] = sol.s_h_checks
        out["s_h_planck"] = sol.s_h_planck
        out["uncertainties"] = sol.uncertainties
        out["fit_residual_rms"] = {f"{c}_{s}": sol.fits[(c, s)].residual_rms
                                   for (c, s) in sol.fits}
        return out

    return {
        "lambda_bounds": list(bounded["lam_bounds"]),
        "solutions_by_lambda": {f"{lam:.4f}": solution_dict(sol)
                                for lam, sol in bounded["solutions"].items()},
        "intervals": {k: list(v) for k, v in bounded["intervals"].items()},
        "cases": [{"label": c.label, "eta": c.eta, "n_bar": c.n_bar,
                   "conversion_quanta_per_mv2": c.conversion} for c in cases],
    }

def save_calibration_report(bounded: dict, cases: list[CalibrationCase], path) -> Path:
    path = _as_path(path)
    path.write_text(json.dumps(calibration_report_dict(bounded, cases), indent=2))
    return path


# ------------------------------------------------------------ run reports, bootstrap

def save_run_report(report: dict, path) -> Path:
    path = _as_path(path)
    path.write_text(json.dumps(report, indent=2, default=float))
    return path

def load_run_report(path) -> dict:
    return json.loads(_as_path(path).read_text())

def save_bootstrap_summary(summary, path) -> Path:
    path = _as_path(path)
    names = sorted(summary.properties)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset"] + names)
        for k in range(summary.n_subsets):
            writer.writerow([k] + [repr(float(summary.properties[n][k])) for n in names])
    return path

def load_bootstrap_summary(path) -> dict:
    """Per-subset property arrays keyed by property name."""
    columns = {}
    with open(_as_path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        names = [n for n in reader.fieldnames if n != "subset"]
        for name in names:
            columns[name] = []
        for row in reader:
            for name in names:
                columns[name].append(float(row[name]))
    return {name: np.asarray(vals) for name, vals in columns.items()}
