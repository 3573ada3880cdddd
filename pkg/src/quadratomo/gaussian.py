"""Closed-form engine for zero-mean Gaussian states of one or two modes.

Covariance matrices are in quanta^2 with quadrature ordering (x, p) per mode
and the convention that vacuum has variance 1/2 in each quadrature.  All
"ratio" quantities elsewhere in the package divide by that vacuum variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VACUUM_VARIANCE = 0.5

_SYMPLECTIC_TOL = 1e-9


def _symplectic_form(n_modes: int) -> np.ndarray:
    omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
    blocks = [omega] * n_modes
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for i, b in enumerate(blocks):
        out[2 * i: 2 * i + 2, 2 * i: 2 * i + 2] = b
    return out


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a 2n x 2n covariance matrix.

    Returns the n deduplicated moduli of the eigenvalues of i*Omega*cov,
    sorted ascending.  Physical states have every value >= 1/2.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise ValueError("covariance matrix must be square with even dimension")
    n = cov.shape[0] // 2
    m = 1j * _symplectic_form(n) @ cov
    vals = np.sort(np.abs(np.linalg.eigvals(m)))
    return vals[::2].copy()    # eigenvalues come in +/- pairs


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean-capable Gaussian state: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape not in {(2, 2), (4, 4)}:
            raise ValueError("covariance must be 2x2 (one mode) or 4x4 (two modes)")
        if mean.shape != (cov.shape[0],):
            raise ValueError("mean length must match covariance dimension")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("covariance matrix must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if symplectic_eigenvalues(cov).min() < VACUUM_VARIANCE - _SYMPLECTIC_TOL:
            raise ValueError("covariance violates the uncertainty principle")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2


@dataclass(frozen=True)
class VarianceCurve:
    """Phase-resolved quadrature variances: theta in radians, variance in quanta."""

    thetas: np.ndarray
    variances: np.ndarray
    counts: np.ndarray | None = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if t.shape != v.shape:
            raise ValueError("thetas and variances must have matching shape")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "variances", v)


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def vacuum() -> GaussianState:
    return GaussianState(np.zeros(2), VACUUM_VARIANCE * np.eye(2))


def thermal(n_bar: float) -> GaussianState:
    if n_bar < 0:
        raise ValueError("thermal occupancy must be >= 0")
    return GaussianState(np.zeros(2), (n_bar + VACUUM_VARIANCE) * np.eye(2))


def squeezed_thermal(v_min: float, v_max: float, axis: float = 0.0) -> GaussianState:
    """Single-mode Gaussian with variance eigenvalues (v_min, v_max), minor axis at `axis`."""
    if not 0 < v_min <= v_max:
        raise ValueError("require 0 < v_min <= v_max")
    if v_min * v_max < 0.25 - _SYMPLECTIC_TOL:
        raise ValueError("v_min*v_max < 1/4 violates the uncertainty principle")
    r = _rotation(axis)
    return GaussianState(np.zeros(2), r @ np.diag([v_min, v_max]) @ r.T)


def apply_loss(state: GaussianState, eta: float, n_env: float = 0.0) -> GaussianState:
    """Pure-loss channel of transmissivity eta with a thermal environment.

    cov -> eta*cov + (1-eta)*(n_env + 1/2)*I, mean -> sqrt(eta)*mean.
    Acts on every mode of a multimode state identically.
    """
    if not 0 < eta <= 1:
        raise ValueError("transmissivity must be in (0, 1]")
    if n_env < 0:
        raise ValueError("environment occupancy must be >= 0")
    dim = state.cov.shape[0]
    cov = eta * state.cov + (1 - eta) * (n_env + VACUUM_VARIANCE) * np.eye(dim)
    return GaussianState(np.sqrt(eta) * state.mean, cov)


def variance_at(state: GaussianState, theta) -> float | np.ndarray:
    """Variance of the rotated quadrature X_theta for a single-mode state."""
    if state.n_modes != 1:
        raise ValueError("variance_at is defined for single-mode states")
    theta = np.asarray(theta, dtype=float)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    out = np.einsum('...i,ij,...j->...', u, state.cov, u)
    return float(out) if out.ndim == 0 else out


def variance_curve(state: GaussianState, n_phases: int = 100) -> VarianceCurve:
    thetas = np.linspace(0.0, 2 * np.pi, n_phases, endpoint=False)
    return VarianceCurve(thetas, variance_at(state, thetas))


def linear_variance_inference(detected_variance: float, eta: float,
                              n_vac: float = VACUUM_VARIANCE) -> float:
    """Invert the loss model on a detected variance, model-free.

    Solves X = sqrt(eta)*x + sqrt(1-eta)*y for the input variance:
    (detected - (1-eta)*n_vac)/eta.  The result may be negative; a negative
    value signals inconsistent calibration inputs and is returned as-is.
    """
    if not 0 < eta <= 1:
        raise ValueError("transmissivity must be in (0, 1]")
    return (detected_variance - (1 - eta) * n_vac) / eta


def fidelity_pure_gaussian(v_s: float, v_x: float, v_p: float) -> float:
    """Fidelity between a squeezed vacuum (min variance v_s) and a zero-mean
    Gaussian with variances (v_x, v_p), all in quanta."""
    if min(v_s, v_x, v_p) <= 0:
        raise ValueError("variances must be positive")
    if v_x > v_p:
        raise ValueError("require v_x <= v_p")
    return 2.0 / np.sqrt((1 + 4 * v_s * v_p) * (v_s + v_x) / v_s)


def best_pure_squeezed(v_x: float, v_p: float) -> tuple[float, float]:
    """Squeezed vacuum closest in fidelity to the Gaussian (v_x, v_p).

    Returns (v_s, F_max) with v_s = sqrt(v_x/v_p)/2 and
    F_max = 2/(1 + 2*sqrt(v_x*v_p)).
    """
    if not 0 < v_x <= v_p:
        raise ValueError("require 0 < v_x <= v_p")
    v_s = 0.5 * np.sqrt(v_x / v_p)
    f_max = 2.0 / (1.0 + 2.0 * np.sqrt(v_x * v_p))
    return float(v_s), float(f_max)


def entropy_g(nu) -> float | np.ndarray:
    """von Neumann entropy in bits of a thermal mode with symplectic eigenvalue nu."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < VACUUM_VARIANCE - _SYMPLECTIC_TOL):
        raise ValueError("symplectic eigenvalue below 1/2 is unphysical")
    nu = np.maximum(nu, VACUUM_VARIANCE)
    up = (nu + 0.5) * np.log2(nu + 0.5)
    dn = nu - 0.5
    dn = np.where(dn > 0, dn * np.log2(np.where(dn > 0, dn, 1.0)), 0.0)
    out = up - dn
    return float(out) if out.ndim == 0 else out


def gaussian_coherent_information(v_x: float, v_p: float) -> float:
    """Coherent information of the two entangled modes obtained by combining two
    copies of the (v_x, v_p) state, squeezing axes orthogonal, on a balanced
    beamsplitter: g((v_x+v_p)/2) - 2*g(sqrt(v_x*v_p)).  May be negative."""
    if v_x * v_p < 0.25 - _SYMPLECTIC_TOL:
        raise ValueError("v_x*v_p < 1/4 violates the uncertainty principle")
    s_b = entropy_g((v_x + v_p) / 2)
    s_ab = 2 * entropy_g(np.sqrt(v_x * v_p))
    return float(s_b - s_ab)


def balanced_beamsplitter_output(s1: GaussianState, s2: GaussianState,
                                 relative_phase: float = np.pi / 2) -> GaussianState:
    """Two-mode state from rotating mode 2 by `relative_phase` and combining
    both inputs on a balanced beamsplitter (a1 -> (a1+a2)/sqrt2, a2 -> (a2-a1)/sqrt2)."""
    if s1.n_modes != 1 or s2.n_modes != 1:
        raise ValueError("inputs must be single-mode states")
    r = _rotation(relative_phase)
    cov2 = r @ s2.cov @ r.T
    mean2 = r @ s2.mean
    joint = np.zeros((4, 4))
    joint[:2, :2] = s1.cov
    joint[2:, 2:] = cov2
    i2 = np.eye(2)
    s = np.block([[i2, i2], [-i2, i2]]) / np.sqrt(2)
    mean = s @ np.concatenate([s1.mean, mean2])
    return GaussianState(mean, s @ joint @ s.T)
