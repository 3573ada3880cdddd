"""Detection-chain noise calibration.

Models the measurement line as switch -> input line -> squeezer stage ->
pre-amplifier stage -> output line -> HEMT, with power transmissivities
lam, xi, alpha, beta and amplifier blocks (gain, input-referred added noise).
Noise-vs-temperature runs taken in three amplifier configurations and two
switch positions are fitted to straight lines in the source term
S_f = 1/2 + n_planck(T_f), and the line coefficients are inverted stage by
stage for the chain parameters.  Loss components are assumed thermalized at
the refrigerator temperature, so each emits as much power as it absorbs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import h as _PLANCK_H, k as _BOLTZMANN_K

DEFAULT_FREQUENCY_HZ = 7.45e9
T_HOT_K = 4.1
SWITCH_LOSS_BOUNDS = (0.83, 1.0)
REFERENCE_DV2_OFF_MV2 = 3.2e-5    # measured squeezer-off voltage variance, mV^2

CONFIGS = ("off_off", "amp_on", "sq_on")
SWITCHES = ("cold", "hot")


class CalibrationError(ValueError):
    pass


def planck_occupancy(temperature_k: float, frequency_hz: float = DEFAULT_FREQUENCY_HZ):
    """Bose-Einstein occupancy 1/(exp(hf/kT) - 1)."""
    temperature_k = np.asarray(temperature_k, dtype=float)
    if np.any(temperature_k <= 0) or frequency_hz <= 0:
        raise CalibrationError("temperature and frequency must be positive")
    x = _PLANCK_H * frequency_hz / (_BOLTZMANN_K * temperature_k)
    out = 1.0 / np.expm1(x)
    return float(out) if out.ndim == 0 else out


def planck_source(temperature_k, frequency_hz: float = DEFAULT_FREQUENCY_HZ):
    """Source noise term S = 1/2 + occupancy, in quanta."""
    return 0.5 + planck_occupancy(temperature_k, frequency_hz)


@dataclass(frozen=True)
class ChainParams:
    """Gains, added noises (quanta) and power transmissivities of the chain."""

    g_h: float            # HEMT power gain
    a_h: float            # HEMT added noise
    g_a: float = 1.0      # pre-amplifier power gain (1 = bypassed)
    a_a: float = 0.0      # pre-amplifier added noise
    g_s: float = 1.0      # squeezer-stage gain when run as a noise source
    a_s: float = 0.0      # squeezer-stage added noise
    alpha: float = 1.0    # squeezer -> pre-amplifier transmissivity
    beta: float = 1.0     # pre-amplifier -> HEMT transmissivity
    xi: float = 1.0       # input line -> squeezer transmissivity
    lam: float = 1.0      # switch transmissivity
    n_bar: float = 0.0    # thermal occupancy presented at the squeezer input

    def __post_init__(self):
        for name in ("g_h", "a_h", "g_a", "a_a", "g_s", "a_s",
                     "alpha", "beta", "xi", "lam", "n_bar"):
            if not np.isfinite(getattr(self, name)):
                raise CalibrationError(f"{name} is not finite")

    def physicality_violations(self) -> list[str]:
        """Empty list for a physical parameter set; otherwise one message per
        violated constraint.  Estimated parameters may sit slightly outside the
        physical box under measurement noise and are reported, not clamped."""
        out = []
        for name in ("alpha", "beta", "xi", "lam"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                out.append(f"transmissivity {name}={v:.6g} outside [0, 1]")
        for name in ("g_h", "g_a", "g_s"):
            if getattr(self, name) < 1:
                out.append(f"power gain {name}={getattr(self, name):.6g} below 1")
        for name in ("a_h", "a_a", "a_s", "n_bar"):
            if getattr(self, name) < 0:
                out.append(f"{name}={getattr(self, name):.6g} is negative")
        return out


@dataclass(frozen=True)
class NoiseRun:
    """Output noise density versus refrigerator temperature for one
    (amplifier configuration, switch position) pair."""

    config: str
    switch: str
    temperatures_k: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        if self.config not in CONFIGS:
            raise CalibrationError(f"config must be one of {CONFIGS}")
        if self.switch not in SWITCHES:
            raise CalibrationError(f"switch must be one of {SWITCHES}")
        t = np.asarray(self.temperatures_k, dtype=float)
        s = np.asarray(self.noise, dtype=float)
        if t.shape != s.shape or t.ndim != 1:
            raise CalibrationError("temperatures and noise must be matching 1-d arrays")
        if t.size < 3:
            raise CalibrationError("need at least 3 temperature points per run")
        if np.any(t <= 0):
            raise CalibrationError("temperatures must be positive")
        object.__setattr__(self, "temperatures_k", t)
        object.__setattr__(self, "noise", s)


@dataclass(frozen=True)
class CalibrationCase:
    """One analysis assumption: efficiency, squeezer-input occupancy, and the
    voltage-to-quanta conversion factor."""

    label: str
    eta: float
    n_bar: float
    conversion: float    # quanta per mV^2

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise CalibrationError("efficiency must be in (0, 1]")
        if self.n_bar < 0:
            raise CalibrationError("occupancy must be >= 0")


# ------------------------------------------------------------ forward model

def predict_noise(params: ChainParams, config: str, switch: str, temperature_k,
                  frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                  t_hot_k: float = T_HOT_K):
    """Noise density at the chain output (units of g_h * quanta)."""
    if config not in CONFIGS or switch not in SWITCHES:
        raise CalibrationError("unknown config or switch")
    s_f = planck_source(temperature_k, frequency_hz)
    s_h = planck_source(t_hot_k, frequency_hz)
    s = s_h if switch == "hot" else s_f
    s = params.lam * s + (1 - params.lam) * s_h        # lossy switch sits at t_hot
    s = params.xi * s + (1 - params.xi) * s_f
    if config == "sq_on":
        s = params.g_s * (s + params.a_s)
    s = params.alpha * s + (1 - params.alpha) * s_f
    if config == "amp_on":
        s = params.g_a * (s + params.a_a)
    s = params.beta * s + (1 - params.beta) * s_f
    return params.g_h * (s + params.a_h)


def predict_noise_off_off(params: ChainParams, switch: str, s_f,
                          frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                          t_hot_k: float = T_HOT_K):
    """Both stages bypassed, written directly in terms of the source term S_f:

    cold: S = G_H A_H + S_h G_H (1-lam) xab + S_f [G_H lam xab + G_H (1-xab)]
    hot:  S = G_H A_H + S_h G_H xab + S_f G_H (1-xab),  with xab = xi*alpha*beta.
    """
    s_f = np.asarray(s_f, dtype=float)
    s_h = planck_source(t_hot_k, frequency_hz)
    g_h, a_h, lam = params.g_h, params.a_h, params.lam
    xab = params.xi * params.alpha * params.beta
    if switch == "cold":
        out = g_h * a_h + s_h * g_h * (1 - lam) * xab + s_f * (g_h * lam * xab + g_h * (1 - xab))
    elif switch == "hot":
        out = g_h * a_h + s_h * g_h * xab + s_f * g_h * (1 - xab)
    else:
        raise CalibrationError(f"switch must be one of {SWITCHES}")
    return float(out) if out.ndim == 0 else out


def synthesize_runs(params: ChainParams, temperatures_k,
                    frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                    noise_fraction: float = 0.0, seed: int | None = None) -> list[NoiseRun]:
    """All six (config, switch) runs predicted from the forward model, with
    optional relative Gaussian noise for fit studies."""
    violations = params.physicality_violations()
    if violations:
        raise CalibrationError("synthetic runs need physical parameters: "
                               + "; ".join(violations))
    temperatures_k = np.asarray(temperatures_k, dtype=float)
    rng = np.random.default_rng(seed)
    runs = []
    for config in CONFIGS:
        for switch in SWITCHES:
            s = predict_noise(params, config, switch, temperatures_k, frequency_hz)
            if noise_fraction > 0:
                s = s * (1 + noise_fraction * rng.standard_normal(s.shape))
            runs.append(NoiseRun(config, switch, temperatures_k, s))
    return runs


# ------------------------------------------------------------ fitting and staged solve

@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    cov: np.ndarray          # 2x2 covariance of (intercept, slope)
    residual_rms: float
    n_points: int


def fit_linear_run(run: NoiseRun, frequency_hz: float = DEFAULT_FREQUENCY_HZ) -> LinearFit:
    """Ordinary least squares of output noise against S_f(T_f)."""
    x = planck_source(run.temperatures_k, frequency_hz)
    y = run.noise
    if np.ptp(x) < 1e-12 * max(1.0, np.abs(x).max()):
        raise CalibrationError("temperature points are degenerate; cannot fit a slope")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(x.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return LinearFit(slope=float(coef[1]), intercept=float(coef[0]),
                     slope_se=float(np.sqrt(cov[1, 1])), intercept_se=float(np.sqrt(cov[0, 0])),
                     cov=cov, residual_rms=float(np.sqrt(np.mean(resid ** 2))), n_points=x.size)


@dataclass(frozen=True)
class StageResult:
    values: dict
    s_h_check: float     # source term of the hot load inferred from the fits alone


def _s_h_consistency(fit_cold: LinearFit, fit_hot: LinearFit) -> float:
    dm = fit_cold.slope - fit_hot.slope
    if abs(dm) < 1e-14 * max(abs(fit_cold.slope), 1.0):
        raise CalibrationError("cold and hot fits are parallel; chain is unresolvable")
    return (fit_hot.intercept - fit_cold.intercept) / dm


def solve_stage1(fit_cold: LinearFit, fit_hot: LinearFit, lam: float,
                 frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                 t_hot_k: float = T_HOT_K) -> StageResult:
    """Invert the bypassed-chain fits for G_H, A_H and the product xi*alpha*beta."""
    if not SWITCH_LOSS_BOUNDS[0] <= lam <= SWITCH_LOSS_BOUNDS[1]:
        raise CalibrationError(f"switch transmissivity outside {SWITCH_LOSS_BOUNDS}")
    s_h = planck_source(t_hot_k, frequency_hz)
    db = fit_hot.intercept - fit_cold.intercept
    if abs(db) < 1e-300:
        raise CalibrationError("hot and cold intercepts coincide; xab is unresolvable")
    xab = 1.0 / (1.0 + fit_hot.slope * s_h * lam / db)
    if not 0 < xab <= 1:
        raise CalibrationError(f"xi*alpha*beta = {xab} outside (0, 1]")
    if abs(1 - xab) < 1e-12:
        raise CalibrationError("transparent line (xab = 1): G_H is unresolvable")
    g_h = fit_hot.slope / (1 - xab)
    a_h = fit_cold.intercept / g_h - (1 - lam) * s_h * xab
    return StageResult({"g_h": g_h, "a_h": a_h, "xab": xab},
                       s_h_check=_s_h_consistency(fit_cold, fit_hot))


def solve_stage2(fit_cold: LinearFit, fit_hot: LinearFit, stage1: StageResult, lam: float,
                 frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                 t_hot_k: float = T_HOT_K) -> StageResult:
    """Pre-amplifier ON: invert for xi*alpha, A_A and G_A*beta (beta and G_A follow)."""
    s_h = planck_source(t_hot_k, frequency_hz)
    g_h = stage1.values["g_h"]
    a_h = stage1.values["a_h"]
    xab = stage1.values["xab"]
    p = (fit_cold.slope - fit_hot.slope) / (g_h * lam)    # = G_A*beta*xi*alpha
    denom = fit_hot.slope / g_h - 1.0 + p
    xa = (p - xab) / denom
    g_ab = p / xa
    a_a = (fit_hot.intercept / g_h - a_h) / g_ab - xa * s_h
    beta = xab / xa
    values = {"xa": xa, "a_a": a_a, "g_ab": g_ab, "beta": beta, "g_a": g_ab / beta}
    for name in ("xa", "beta"):
        if not 0 < values[name] <= 1:
            warnings.warn(f"stage 2 produced non-physical {name} = {values[name]:.6g}",
                          stacklevel=2)
    return StageResult(values, s_h_check=_s_h_consistency(fit_cold, fit_hot))


def solve_stage3(fit_cold: LinearFit, fit_hot: LinearFit, stage1: StageResult,
                 stage2: StageResult, lam: float,
                 frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                 t_hot_k: float = T_HOT_K) -> StageResult:
    """Squeezer stage ON: split xi, alpha and beta apart and recover the
    squeezer-input occupancy n_bar = (1-lam)*xi*n_hot."""
    s_h = planck_source(t_hot_k, frequency_hz)
    n_h = planck_occupancy(t_hot_k, frequency_hz)
    g_h = stage1.values["g_h"]
    a_h = stage1.values["a_h"]
    xab = stage1.values["xab"]
    xa = stage2.values["xa"]
    q = (fit_cold.slope - fit_hot.slope) / (g_h * lam)    # = alpha*beta*G_S*xi
    xi = (q - xab) / (fit_hot.slope / g_h + q - 1.0)
    alpha = xa / xi
    beta = xab / xa
    g_s = q / (alpha * beta * xi)
    a_s = (fit_hot.intercept / g_h - a_h) / (alpha * beta * g_s) - xi * s_h
    n_bar = (1 - lam) * xi * n_h
    values = {"xi": xi, "alpha": alpha, "beta": beta, "g_s": g_s, "a_s": a_s,
              "n_bar": n_bar}
    for name in ("xi", "alpha", "beta"):
        if not 0 < values[name] <= 1:
            warnings.warn(f"stage 3 produced non-physical {name} = {values[name]:.6g}",
                          stacklevel=2)
    return StageResult(values, s_h_check=_s_h_consistency(fit_cold, fit_hot))


@dataclass(frozen=True)
class ChainSolution:
    params: ChainParams
    fits: dict                    # (config, switch) -> LinearFit
    s_h_checks: dict              # config -> inferred hot-load source term
    s_h_planck: float
    lam: float
    uncertainties: dict = field(default_factory=dict)


def _fits_by_run(runs: list[NoiseRun], frequency_hz: float) -> dict:
    fits = {}
    for run in runs:
        key = (run.config, run.switch)
        if key in fits:
            raise CalibrationError(f"duplicate run for {key}")
        fits[key] = fit_linear_run(run, frequency_hz)
    missing = [(c, s) for c in CONFIGS for s in SWITCHES if (c, s) not in fits]
    if missing:
        raise CalibrationError(f"missing noise runs for (config, switch) pairs: {missing}")
    return fits


def _solve_from_fits(fits: dict, lam: float, frequency_hz: float,
                     t_hot_k: float = T_HOT_K) -> tuple[ChainParams, dict]:
    st1 = solve_stage1(fits[("off_off", "cold")], fits[("off_off", "hot")], lam,
                       frequency_hz, t_hot_k)
    st2 = solve_stage2(fits[("amp_on", "cold")], fits[("amp_on", "hot")], st1, lam,
                       frequency_hz, t_hot_k)
    st3 = solve_stage3(fits[("sq_on", "cold")], fits[("sq_on", "hot")], st1, st2, lam,
                       frequency_hz, t_hot_k)
    params = ChainParams(
        g_h=st1.values["g_h"], a_h=st1.values["a_h"],
        g_a=st2.values["g_a"], a_a=st2.values["a_a"],
        g_s=st3.values["g_s"], a_s=st3.values["a_s"],
        alpha=st3.values["alpha"], beta=st3.values["beta"], xi=st3.values["xi"],
        lam=lam, n_bar=st3.values["n_bar"],
    )
    checks = {"off_off": st1.s_h_check, "amp_on": st2.s_h_check, "sq_on": st3.s_h_check}
    return params, checks


_PARAM_ORDER = ("g_h", "a_h", "g_a", "a_a", "g_s", "a_s", "alpha", "beta", "xi", "n_bar")


def solve_chain(runs: list[NoiseRun], lam: float,
                frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                t_hot_k: float = T_HOT_K,
                propagate_errors: bool = True) -> ChainSolution:
    """Fit all six runs and run the three solver stages at the given switch loss."""
    fits = _fits_by_run(runs, frequency_hz)
    params, checks = _solve_from_fits(fits, lam, frequency_hz, t_hot_k)
    uncertainties = {}
    if propagate_errors:
        uncertainties = propagate_fit_uncertainty(fits, lam, frequency_hz, t_hot_k)
    return ChainSolution(params=params, fits=fits, s_h_checks=checks,
                         s_h_planck=planck_source(t_hot_k, frequency_hz), lam=lam,
                         uncertainties=uncertainties)


def propagate_fit_uncertainty(fits: dict, lam: float,
                              frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                              t_hot_k: float = T_HOT_K) -> dict:
    """1-sigma uncertainties of the solved parameters from the per-fit
    (intercept, slope) covariances, by linear propagation with a numerical
    Jacobian."""
    keys = [(c, s) for c in CONFIGS for s in SWITCHES]
    base = np.concatenate([[fits[k].intercept, fits[k].slope] for k in keys])
    cov = np.zeros((base.size, base.size))
    for i, k in enumerate(keys):
        cov[2 * i: 2 * i + 2, 2 * i: 2 * i + 2] = fits[k].cov

    def solve_vec(coeffs: np.ndarray) -> np.ndarray:
        fd = {}
        for i, k in enumerate(keys):
            f = fits[k]
            fd[k] = replace(f, intercept=float(coeffs[2 * i]), slope=float(coeffs[2 * i + 1]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params, _ = _solve_from_fits(fd, lam, frequency_hz, t_hot_k)
        return np.array([getattr(params, name) for name in _PARAM_ORDER])

    center = solve_vec(base)
    jac = np.empty((center.size, base.size))
    for j in range(base.size):
        step = 1e-7 * max(abs(base[j]), 1.0)
        up = base.copy(); up[j] += step
        dn = base.copy(); dn[j] -= step
        jac[:, j] = (solve_vec(up) - solve_vec(dn)) / (2 * step)
    variances = np.einsum('ij,jk,ik->i', jac, cov, jac)
    return {name: float(np.sqrt(max(v, 0.0)))
            for name, v in zip(_PARAM_ORDER, variances)}


def solve_chain_bounded(runs: list[NoiseRun],
                        lam_bounds: tuple[float, float] = SWITCH_LOSS_BOUNDS,
                        frequency_hz: float = DEFAULT_FREQUENCY_HZ,
                        t_hot_k: float = T_HOT_K) -> dict:
    """Solve at both switch-loss bounds and their midpoint; the switch loss is
    not identifiable from the data, so parameters are reported as intervals."""
    lam_lo, lam_hi = sorted(lam_bounds)
    lam_mid = 0.5 * (lam_lo + lam_hi)
    solutions = {lam: solve_chain(runs, lam, frequency_hz, t_hot_k)
                 for lam in (lam_lo, lam_mid, lam_hi)}
    intervals = {}
    for name in _PARAM_ORDER:
        vals = {lam: getattr(sol.params, name) for lam, sol in solutions.items()}
        intervals[name] = [min(vals.values()), vals[lam_mid], max(vals.values())]
    return {"solutions": solutions, "intervals": intervals,
            "lam_bounds": (lam_lo, lam_hi)}


# ------------------------------------------------------------ efficiency and conversion

def efficiency_eq1(params: ChainParams) -> float:
    """Quantum efficiency of the pre-amplified chain in the large-G_H limit:

    eta = alpha / (2 + 2 A_A - alpha + (2 A_H - (1 - beta)) / (G_A beta)).
    """
    if params.g_a * params.beta <= 0:
        raise CalibrationError("G_A * beta must be positive")
    denom = (2 + 2 * params.a_a - params.alpha
             + (2 * params.a_h - (1 - params.beta)) / (params.g_a * params.beta))
    if denom <= 0:
        raise CalibrationError("efficiency denominator is non-positive")
    return params.alpha / denom


def detected_variance_off(eta: float, n_bar: float) -> float:
    """Detected quadrature variance with the squeezer off:
    (1-eta)/2 + eta*(1/2 + n_bar) = 1/2 + eta*n_bar quanta."""
    if not 0 < eta <= 1:
        raise CalibrationError("efficiency must be in (0, 1]")
    if n_bar < 0:
        raise CalibrationError("occupancy must be >= 0")
    return 0.5 + eta * n_bar


def conversion_factor(dv2_off_mv2: float, eta: float, n_bar: float) -> float:
    """quanta per mV^2: detected squeezer-off variance over the measured
    voltage variance."""
    if dv2_off_mv2 <= 0:
        raise CalibrationError("voltage variance must be positive")
    return detected_variance_off(eta, n_bar) / dv2_off_mv2


THREE_CASE_TABLE = (
    ("pessimistic", 0.40, 0.30),
    ("best_guess", 0.36, 0.15),
    ("optimistic", 0.33, 0.0),
)


def three_cases(dv2_off_mv2: float = REFERENCE_DV2_OFF_MV2) -> list[CalibrationCase]:
    """The pessimistic / best-guess / optimistic analysis assumptions."""
    return [CalibrationCase(label, eta, n_bar,
                            conversion_factor(dv2_off_mv2, eta, n_bar))
            for label, eta, n_bar in THREE_CASE_TABLE]


def case_by_label(label: str, dv2_off_mv2: float = REFERENCE_DV2_OFF_MV2) -> CalibrationCase:
    for case in three_cases(dv2_off_mv2):
        if case.label == label:
            return case
    raise CalibrationError(f"unknown calibration case {label!r}")
