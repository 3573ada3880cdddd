"""Truncated Fock-space states and the exact versions of every analysis quantity.

Quadrature convention: X_theta = (a e^{-i theta} + a^dag e^{i theta})/sqrt(2),
so the vacuum has variance 1/2 ("quanta" units).  Density matrices are stored
as (N+1)x(N+1) complex arrays for one mode, (N+1)^2 x (N+1)^2 for two modes
with index m1*(N+1)+m2.  States are treated as origin-centered throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .gaussian import GaussianState, VACUUM_VARIANCE

DEFAULT_CUTOFF = 30

_ENTROPY_CLAMP = 1e-12
_LEAK_WARN = 1e-6


class CutoffMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian state matrix in the truncated photon-number basis."""

    matrix: np.ndarray
    cutoff: int
    modes: int = 1

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = (self.cutoff + 1) ** self.modes
        if self.modes not in (1, 2):
            raise ValueError("only one- and two-mode states are supported")
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not match cutoff/modes ({dim})")
        m = 0.5 * (m + m.conj().T)    # exact Hermiticity by construction
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def check(self, trace_tol: float = 1e-9, psd_tol: float = -1e-9) -> None:
        """Raise if the state violates trace or positivity invariants."""
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace()} deviates from 1 beyond {trace_tol}")
        if self.min_eigenvalue() < psd_tol:
            raise ValueError(f"minimum eigenvalue {self.min_eigenvalue()} below {psd_tol}")


@dataclass(frozen=True)
class PureState:
    """State vector in the truncated photon-number basis."""

    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.cutoff + 1,):
            raise ValueError("amplitude vector length must be cutoff+1")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > 1e-10:
            raise ValueError("state vector is not normalized")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def to_density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.cutoff)


@dataclass(frozen=True)
class WignerGrid:
    """Wigner function sampled on a rectangular phase-space grid (quanta units)."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray    # shape (len(x_axis), len(p_axis))

    def __post_init__(self):
        x = np.asarray(self.x_axis, dtype=float)
        p = np.asarray(self.p_axis, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (x.size, p.size):
            raise ValueError("values must have shape (len(x_axis), len(p_axis))")
        object.__setattr__(self, "x_axis", x)
        object.__setattr__(self, "p_axis", p)
        object.__setattr__(self, "values", v)

    def riemann_sum(self) -> float:
        dx = self.x_axis[1] - self.x_axis[0]
        dp = self.p_axis[1] - self.p_axis[0]
        return float(self.values.sum() * dx * dp)

    def marginal(self, axis: int = 0) -> np.ndarray:
        """Integrate out one axis: axis=0 returns pr(x), axis=1 returns pr(p)."""
        if axis == 0:
            return np.trapezoid(self.values, self.p_axis, axis=1)
        return np.trapezoid(self.values, self.x_axis, axis=0)


@lru_cache(maxsize=16)
def _destroy(cutoff: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)
    a.flags.writeable = False
    return a


def hermite_functions(n_max: int, xs: np.ndarray) -> np.ndarray:
    """Orthonormal oscillator eigenfunctions psi_0..psi_n_max on a grid.

    Evaluated with the stable three-term recurrence; in these units the
    ground state is the normalized Gaussian of variance 1/2.
    Returns an array of shape (n_max+1, len(xs)).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty((n_max + 1, xs.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * xs * xs)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * xs * out[0]
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * xs * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_wavefunction(n: int, x) -> float | np.ndarray:
    """psi_n(x) in quanta units: integral of psi_n^2 is 1, vacuum variance 1/2."""
    if n < 0:
        raise ValueError("photon number must be >= 0")
    scalar = np.isscalar(x)
    vals = hermite_functions(n, np.atleast_1d(x))[n]
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------- constructors

def vacuum_state(cutoff: int = DEFAULT_CUTOFF) -> DensityMatrix:
    return fock_state(0, cutoff)


def fock_state(n: int, cutoff: int = DEFAULT_CUTOFF) -> DensityMatrix:
    if not 0 <= n <= cutoff:
        raise ValueError("photon number outside the truncated space")
    m = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    m[n, n] = 1.0
    return DensityMatrix(m, cutoff)


def thermal_state(n_bar: float, cutoff: int = DEFAULT_CUTOFF) -> DensityMatrix:
    """Thermal state with the truncated geometric photon distribution, renormalized."""
    if n_bar < 0:
        raise ValueError("occupancy must be >= 0")
    if n_bar == 0:
        return vacuum_state(cutoff)
    n = np.arange(cutoff + 1)
    p = np.exp(n * np.log(n_bar) - (n + 1) * np.log(1 + n_bar))
    return DensityMatrix(np.diag(p / p.sum()).astype(complex), cutoff)


def squeezed_vacuum_pure(v_s: float, cutoff: int = DEFAULT_CUTOFF,
                         axis: float = 0.0) -> PureState:
    """Pure squeezed vacuum with minimum variance v_s quanta along `axis`."""
    if not 0 < v_s <= VACUUM_VARIANCE:
        raise ValueError("squeezed vacuum requires 0 < v_s <= 1/2")
    r = -0.5 * np.log(2 * v_s)
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[0] = 1.0
    t = -np.tanh(r)
    for k in range(0, cutoff - 1, 2):
        amps[k + 2] = amps[k] * t * np.sqrt((k + 1) / (k + 2))
    amps = amps / np.linalg.norm(amps)
    if axis != 0.0:
        amps = amps * np.exp(1j * axis * np.arange(cutoff + 1))
    return PureState(amps, cutoff)


def rotate(rho: DensityMatrix, phi: float) -> DensityMatrix:
    """Rotate a single-mode state so its features move to angle +phi."""
    if rho.modes != 1:
        raise ValueError("rotation implemented for single-mode states")
    d = np.exp(1j * phi * np.arange(rho.cutoff + 1))
    return DensityMatrix(d[:, None] * rho.matrix * d.conj()[None, :], rho.cutoff)


def squeezed_thermal_state(v_min: float, v_max: float, axis: float = 0.0,
                           cutoff: int = DEFAULT_CUTOFF) -> DensityMatrix:
    """Fock-basis rendering of the squeezed thermal state with variances
    (v_min, v_max) quanta and minor axis at `axis`.

    The state is built as thermal -> exponentiated squeeze generator -> rotation
    at an internal cutoff large enough to hold the full photon distribution,
    then projected onto the target space and renormalized.  The discarded tail
    mass grows with v_max; quantities weighted by photon number (variances in
    particular) inherit an error of order tail * cutoff.
    """
    if not 0 < v_min <= v_max:
        raise ValueError("require 0 < v_min <= v_max")
    if v_min * v_max < 0.25 - 1e-9:
        raise ValueError("v_min*v_max < 1/4 violates the uncertainty principle")
    n_bar = max(np.sqrt(v_min * v_max) - VACUUM_VARIANCE, 0.0)
    r = 0.25 * np.log(v_max / v_min)
    n_int = max(4 * cutoff, cutoff + int(np.ceil(16 * v_max)))
    n = np.arange(n_int + 1)
    if n_bar > 0:
        p = np.exp(n * np.log(n_bar) - (n + 1) * np.log(1 + n_bar))
        p /= p.sum()
    else:
        p = np.zeros(n_int + 1)
        p[0] = 1.0
    rho = np.diag(p).astype(complex)
    if r != 0.0:
        a = _destroy(n_int)
        s = expm(0.5 * r * (a @ a - a.conj().T @ a.conj().T))
        rho = s @ rho @ s.conj().T
    sub = rho[: cutoff + 1, : cutoff + 1]
    sub = sub / np.trace(sub).real
    out = DensityMatrix(sub, cutoff)
    return rotate(out, axis) if axis != 0.0 else out


def gaussian_to_fock(state: GaussianState, cutoff: int = DEFAULT_CUTOFF) -> DensityMatrix:
    """Render a zero-mean single-mode Gaussian state in the Fock basis."""
    if state.n_modes != 1:
        raise ValueError("only single-mode Gaussian states can be rendered")
    if np.any(state.mean != 0):
        raise ValueError("this package analyzes origin-centered states only")
    evals, evecs = np.linalg.eigh(state.cov)
    v_min, v_max = float(evals[0]), float(evals[1])
    minor = evecs[:, 0]
    axis = float(np.arctan2(minor[1], minor[0])) % np.pi
    return squeezed_thermal_state(v_min, v_max, axis, cutoff)


# ---------------------------------------------------------------- quadrature statistics

def _moments(rho: DensityMatrix) -> tuple[complex, complex, float]:
    a = _destroy(rho.cutoff)
    m = rho.matrix
    ea = complex(np.trace(m @ a))
    ea2 = complex(np.trace(m @ a @ a))
    en = float(np.trace(m @ (a.conj().T @ a)).real)
    return ea, ea2, en


def quadrature_mean(rho: DensityMatrix, theta: float) -> float:
    if rho.modes != 1:
        raise ValueError("single-mode states only")
    ea, _, _ = _moments(rho)
    return float(np.sqrt(2) * (ea * np.exp(-1j * theta)).real)


def quadrature_variance(rho: DensityMatrix, theta: float) -> float:
    """Variance of X_theta from the matrix elements of a and a^dag."""
    if rho.modes != 1:
        raise ValueError("single-mode states only")
    ea, ea2, en = _moments(rho)
    mean = np.sqrt(2) * (ea * np.exp(-1j * theta)).real
    return float((ea2 * np.exp(-2j * theta)).real + en + VACUUM_VARIANCE - mean ** 2)


def minimum_variance_axis(rho: DensityMatrix) -> float:
    """Angle in [0, pi) of the minimum-variance quadrature."""
    _, ea2, _ = _moments(rho)
    if abs(ea2) < 1e-14:
        return 0.0
    return float(((np.angle(ea2) + np.pi) / 2) % np.pi)


def extremal_variances(rho: DensityMatrix) -> tuple[float, float]:
    """(min, max) quadrature variance of a zero-mean single-mode state."""
    ea, ea2, en = _moments(rho)
    base = en + VACUUM_VARIANCE
    return float(base - abs(ea2)), float(base + abs(ea2))


def marginal_pdf(rho: DensityMatrix, theta: float, xs: np.ndarray) -> np.ndarray:
    """Probability density of a quadrature measurement at phase theta.

    pr(x|theta) = sum_{m,n} rho_mn e^{i(n-m)theta} psi_m(x) psi_n(x).
    """
    if rho.modes != 1:
        raise ValueError("marginals are defined for single-mode states")
    xs = np.asarray(xs, dtype=float)
    psi = hermite_functions(rho.cutoff, xs)
    nvec = np.arange(rho.cutoff + 1)
    phases = np.exp(1j * theta * nvec)
    weighted = (rho.matrix * phases.conj()[:, None] * phases[None, :]).real
    # real part suffices: the imaginary parts cancel pairwise for Hermitian rho
    return np.einsum('mn,mx,nx->x', weighted, psi, psi)


def covariance_matrix(rho: DensityMatrix) -> np.ndarray:
    """Quadrature covariance matrix (2x2 or 4x4, ordering x,p per mode)."""
    if rho.modes == 1:
        ea, ea2, en = _moments(rho)
        xm = np.sqrt(2) * ea.real
        pm = np.sqrt(2) * ea.imag
        vx = ea2.real + en + VACUUM_VARIANCE - xm ** 2
        vp = -ea2.real + en + VACUUM_VARIANCE - pm ** 2
        cxp = ea2.imag - xm * pm
        return np.array([[vx, cxp], [cxp, vp]])
    d = rho.cutoff + 1
    r4 = rho.matrix.reshape(d, d, d, d)    # [m1, m2, n1, n2]
    a = _destroy(rho.cutoff)
    ident = np.eye(d, dtype=complex)

    def expect(op1, op2):
        # Tr(rho (op1 x op2)) with (op1 x op2)[(n1,n2),(m1,m2)] = op1[n1,m1] op2[n2,m2]
        return complex(np.einsum('abcd,ca,db->', r4, op1, op2))

    e_a1 = expect(a, ident)
    e_a2 = expect(ident, a)
    e_a1a1 = expect(a @ a, ident)
    e_a2a2 = expect(ident, a @ a)
    e_n1 = expect(a.conj().T @ a, ident).real
    e_n2 = expect(ident, a.conj().T @ a).real
    e_a1a2 = expect(a, a)
    e_a1da2 = expect(a.conj().T, a)

    def single(ea, ea2, en):
        xm, pm = np.sqrt(2) * ea.real, np.sqrt(2) * ea.imag
        vx = ea2.real + en + VACUUM_VARIANCE - xm ** 2
        vp = -ea2.real + en + VACUUM_VARIANCE - pm ** 2
        cxp = ea2.imag - xm * pm
        return np.array([[vx, cxp], [cxp, vp]]), xm, pm

    c1, x1, p1 = single(e_a1, e_a1a1, e_n1)
    c2, x2, p2 = single(e_a2, e_a2a2, e_n2)
    # cross block from <a1 a2> and <a1^dag a2>
    cx1x2 = (e_a1a2 + e_a1da2).real - x1 * x2
    cx1p2 = (e_a1a2 + e_a1da2).imag - x1 * p2
    cp1x2 = (e_a1a2 - e_a1da2).imag - p1 * x2
    cp1p2 = (-e_a1a2 + e_a1da2).real - p1 * p2
    cov = np.zeros((4, 4))
    cov[:2, :2] = c1
    cov[2:, 2:] = c2
    cov[:2, 2:] = np.array([[cx1x2, cx1p2], [cp1x2, cp1p2]])
    cov[2:, :2] = cov[:2, 2:].T
    return cov


# ---------------------------------------------------------------- scalar state functionals

def fidelity_pure(rho: DensityMatrix, psi: PureState) -> float:
    """<psi|rho|psi>."""
    if rho.cutoff != psi.cutoff or rho.modes != 1:
        raise CutoffMismatchError("state and density matrix must share one cutoff")
    amps = psi.amplitudes
    return float(np.real(amps.conj() @ rho.matrix @ amps))


def purity(rho: DensityMatrix) -> float:
    return float(np.sum(np.abs(rho.matrix) ** 2))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits; eigenvalues below 1e-12 are clamped to zero."""
    w = np.linalg.eigvalsh(rho.matrix)
    w = w[w > _ENTROPY_CLAMP]
    return float(-np.sum(w * np.log2(w)))


def best_pure_squeezed_fock(rho: DensityMatrix) -> tuple[PureState, float]:
    """Squeezed vacuum maximizing fidelity with rho.

    The squeezing axis is aligned with rho's minimum-variance axis; the
    minimum variance v_s is located by a coarse scan refined with
    golden-section search.
    """
    if rho.modes != 1:
        raise ValueError("single-mode states only")
    axis = minimum_variance_axis(rho)
    aligned = rotate(rho, -axis) if axis != 0.0 else rho

    def neg_f(v_s: float) -> float:
        return -fidelity_pure(aligned, squeezed_vacuum_pure(v_s, rho.cutoff))

    grid = np.geomspace(2e-4, VACUUM_VARIANCE, 80)
    scores = np.array([neg_f(v) for v in grid])
    i = int(np.argmin(scores))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if lo == hi:
        v_best = float(grid[i])
    else:
        res = minimize_scalar(neg_f, bounds=(lo, hi), method='bounded',
                              options={'xatol': 1e-10})
        v_best = float(res.x)
        if neg_f(v_best) > scores[i]:
            v_best = float(grid[i])
    best = squeezed_vacuum_pure(v_best, rho.cutoff, axis)
    return best, fidelity_pure(rho, best)


# ---------------------------------------------------------------- Wigner function

def wigner(rho: DensityMatrix, x_axis: np.ndarray, p_axis: np.ndarray) -> WignerGrid:
    """Wigner function on a rectangular grid, normalized so it integrates to 1.

    Evaluated by the Laguerre-kernel expansion with forward recurrences; the
    contract is the marginal property: projecting W along any grid axis
    reproduces the corresponding quadrature distribution.
    """
    if rho.modes != 1:
        raise ValueError("single-mode states only")
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    xg, pg = np.meshgrid(x_axis, p_axis, indexing='ij')
    r2 = xg ** 2 + pg ** 2
    pref = np.exp(-r2) / np.pi
    b = np.sqrt(2.0) * (xg - 1j * pg)
    z = 2 * r2
    n_max = rho.cutoff
    m = rho.matrix
    w = np.zeros_like(r2)
    bk = np.ones_like(b)
    ck = 1.0    # sqrt(1/k!)
    for k in range(n_max + 1):
        if k > 0:
            bk = bk * b
            ck /= np.sqrt(k)
        c = ck
        l_prev = None
        l_cur = np.ones_like(r2)
        for n in range(n_max + 1 - k):
            i = n + k
            kern = pref * ((-1) ** n * c) * (bk * l_cur)
            if k == 0:
                w += m[i, n].real * kern.real
            else:
                w += 2 * (m[i, n] * kern).real
            l_next = (1 + k - z) if n == 0 else \
                ((2 * n + 1 + k - z) * l_cur - (n + k) * l_prev) / (n + 1)
            l_prev, l_cur = l_cur, l_next
            c *= np.sqrt((n + 1) / (n + 1 + k))
    return WignerGrid(x_axis, p_axis, w)


# ---------------------------------------------------------------- two-mode machinery

@lru_cache(maxsize=8)
def _beamsplitter_blocks(cutoff: int) -> tuple:
    """Balanced-beamsplitter unitaries on each total-photon-number block of the
    triangular space {|m1,m2>: m1+m2 <= 2*cutoff}, plus index bookkeeping."""
    two_n = 2 * cutoff
    offsets = np.zeros(two_n + 1, dtype=int)
    idx = 0
    blocks = []
    for total in range(two_n + 1):
        offsets[total] = idx
        idx += total + 1
        gen = np.zeros((total + 1, total + 1))
        for k in range(total):    # a1^dag a2 : |k, M-k> -> sqrt((k+1)(M-k)) |k+1, M-k-1>
            gen[k + 1, k] = np.sqrt((k + 1) * (total - k))
        gen = gen - gen.T
        blocks.append(expm((np.pi / 4) * gen))
    ext_dim = idx
    d = cutoff + 1
    # flat index of |m1,m2> within the extended space, for m1,m2 <= cutoff
    square = np.array([offsets[m1 + m2] + m1 for m1 in range(d) for m2 in range(d)])
    return tuple(blocks), offsets, ext_dim, square


def beamsplitter_combine(rho1: DensityMatrix, rho2: DensityMatrix,
                         relative_phase: float = np.pi / 2) -> DensityMatrix:
    """Combine two single-mode states on a balanced beamsplitter.

    Mode 2 is first rotated by `relative_phase`; the beamsplitter is the
    photon-number-conserving unitary with a1 -> (a1+a2)/sqrt2.  The exact
    unitary acts on total-photon blocks up to 2*cutoff; projecting the result
    back onto the square truncated space can leak trace, which is reported as
    a warning instead of being renormalized away.
    """
    if rho1.cutoff != rho2.cutoff:
        raise CutoffMismatchError("input cutoffs must match")
    if rho1.modes != 1 or rho2.modes != 1:
        raise ValueError("inputs must be single-mode states")
    cutoff = rho1.cutoff
    blocks, offsets, ext_dim, square = _beamsplitter_blocks(cutoff)
    r2 = rotate(rho2, relative_phase) if relative_phase != 0.0 else rho2
    joint = np.kron(rho1.matrix, r2.matrix)
    ext = np.zeros((ext_dim, ext_dim), dtype=complex)
    ext[np.ix_(square, square)] = joint
    out = np.empty_like(ext)
    for t1 in range(2 * cutoff + 1):
        s1 = slice(offsets[t1], offsets[t1] + t1 + 1)
        left = blocks[t1] @ ext[s1, :]
        for t2 in range(2 * cutoff + 1):
            s2 = slice(offsets[t2], offsets[t2] + t2 + 1)
            out[s1, s2] = left[:, s2] @ blocks[t2].conj().T
    result = out[np.ix_(square, square)]
    leak = 1.0 - float(np.trace(result).real)
    if leak > _LEAK_WARN:
        warnings.warn(f"beamsplitter output leaked {leak:.3e} trace past the cutoff",
                      stacklevel=2)
    return DensityMatrix(result, cutoff, modes=2)


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Reduce a two-mode state to mode `keep` (0 or 1)."""
    if rho.modes != 2:
        raise ValueError("partial trace expects a two-mode state")
    if keep not in (0, 1):
        raise ValueError("keep must be 0 or 1")
    d = rho.cutoff + 1
    r4 = rho.matrix.reshape(d, d, d, d)
    reduced = np.einsum('ijik->jk', r4) if keep == 1 else np.einsum('ijkj->ik', r4)
    return DensityMatrix(reduced, rho.cutoff)


def _entropy_from_eigs(w: np.ndarray) -> float:
    w = w[w > _ENTROPY_CLAMP]
    return float(-np.sum(w * np.log2(w)))


def coherent_information(rho: DensityMatrix) -> float:
    """Coherent information S(B) - S(AB) of the two-mode state made by sending
    two copies of rho, with a pi/2 relative phase, through a balanced beamsplitter.

    S(AB) equals 2*S(rho) exactly because the beamsplitter is unitary; S(B)
    is computed from the reduced output state kept at its natural cutoff
    2*cutoff, so no output truncation is introduced.  May be negative for
    weakly entangled inputs.
    """
    if rho.modes != 1:
        raise ValueError("single-mode states only")
    cutoff = rho.cutoff
    blocks, offsets, ext_dim, _ = _beamsplitter_blocks(cutoff)
    evals, evecs = np.linalg.eigh(rho.matrix)
    keep = evals > _ENTROPY_CLAMP
    evals = evals[keep]
    evecs = evecs[:, keep]
    d = cutoff + 1
    r = evals.size
    n_pairs = r * r
    # second copy carries the pi/2 phase rotation (same convention as rotate())
    rotated = evecs * np.exp(1j * (np.pi / 2) * np.arange(d))[:, None]
    # one column per eigenvector pair (i, j), weights lambda_i * lambda_j
    weights = np.outer(evals, evals).ravel()
    batch = np.zeros((ext_dim, n_pairs), dtype=complex)
    for m1 in range(d):
        rows = offsets[m1: m1 + d] + m1
        batch[rows] = np.einsum('i,mj->mij', evecs[m1], rotated).reshape(d, n_pairs)
    for total in range(2 * cutoff + 1):
        s = slice(offsets[total], offsets[total] + total + 1)
        batch[s] = blocks[total] @ batch[s]
    dim_b = 2 * cutoff + 1
    scaled = batch * np.sqrt(weights)[None, :]
    rho_b = np.zeros((dim_b, dim_b), dtype=complex)
    for m1 in range(dim_b):
        upper = dim_b - m1
        rows = scaled[offsets[m1: m1 + upper] + m1]    # (upper, n_pairs) = psi[(m1, m2), pair]
        rho_b[:upper, :upper] += rows @ rows.conj().T
    s_b = _entropy_from_eigs(np.linalg.eigvalsh(rho_b))
    s_ab = 2.0 * _entropy_from_eigs(evals)
    return s_b - s_ab
