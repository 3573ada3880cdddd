"""Synthetic quadrature-measurement datasets through an inefficient detector.

Each record is one measurement X = sqrt(eta)*x + sqrt(1-eta)*y of a state
quadrature x at phase theta, with y a vacuum draw of variance 1/2.  Sampling
is reproducible: records are partitioned into fixed-size chunks, each drawing
from its own seed derived from (seed, chunk index), so datasets are
bit-identical for a given seed regardless of how chunks are scheduled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .calibration import CalibrationCase
from .gaussian import GaussianState, VarianceCurve, variance_at

_CHUNK = 8192
_INV_CDF_POINTS = 2 ** 14
_INV_CDF_SPAN = 8.0     # sampling grid half-width in units of the largest std


@dataclass(frozen=True)
class PhaseSchedule:
    """Deterministic assignment of measurement phases to record indices.

    'swept' cycles through n_phases evenly spaced angles record by record,
    mimicking a continuously swept local-oscillator phase; 'fixed_grid'
    measures samples_per_phase consecutive records at each angle.
    """

    kind: str = "swept"
    n_phases: int = 100
    samples_per_phase: int | None = None

    def __post_init__(self):
        if self.kind not in ("swept", "fixed_grid"):
            raise ValueError("schedule kind must be 'swept' or 'fixed_grid'")
        if self.n_phases < 2:
            raise ValueError("need at least 2 phases for tomography use")
        if self.kind == "fixed_grid" and not self.samples_per_phase:
            raise ValueError("fixed_grid schedule requires samples_per_phase")

    def phases(self) -> np.ndarray:
        return np.linspace(0.0, 2 * np.pi, self.n_phases, endpoint=False)

    def assign(self, n: int) -> np.ndarray:
        """Phase of each of n records."""
        grid = self.phases()
        if self.kind == "swept":
            return grid[np.arange(n) % self.n_phases]
        idx = np.minimum(np.arange(n) // self.samples_per_phase, self.n_phases - 1)
        return grid[idx]


@dataclass(frozen=True)
class QuadratureDataset:
    """Measured (theta, value) records plus provenance metadata."""

    thetas: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("thetas and values must be matching 1-d arrays")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("records must be finite")
        if t.size and (t.min() < 0 or t.max() >= 2 * np.pi):
            raise ValueError("phases must lie in [0, 2*pi)")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.thetas.size


def _state_sampler(state, phases: np.ndarray):
    """Per-phase quadrature sampler: exact normals for Gaussian states,
    inverse-CDF lookup on tabulated marginals for Fock-basis states.

    Returns a callable (phase_index_array, rng) -> x draws.
    """
    if isinstance(state, GaussianState):
        stds = np.sqrt(variance_at(state, phases))

        def draw(idx, rng):
            return rng.standard_normal(idx.size) * stds[idx]

        return draw

    if isinstance(state, fock.DensityMatrix):
        if state.modes != 1:
            raise ValueError("can only sample single-mode states")
        v_max = max(fock.quadrature_variance(state, t) for t in phases)
        half = _INV_CDF_SPAN * np.sqrt(v_max)
        xs = np.linspace(-half, half, _INV_CDF_POINTS)
        cdfs = np.empty((phases.size, xs.size))
        for i, theta in enumerate(phases):
            pdf = np.clip(fock.marginal_pdf(state, theta, xs), 0.0, None)
            c = np.cumsum(pdf)
            c -= c[0]
            cdfs[i] = c / c[-1]

        def draw(idx, rng):
            u = rng.random(idx.size)
            out = np.empty(idx.size)
            for i in np.unique(idx):
                sel = idx == i
                out[sel] = np.interp(u[sel], cdfs[i], xs)
            return out

        return draw

    raise TypeError("state must be a GaussianState or a single-mode DensityMatrix")


def sample(state, detector, schedule: PhaseSchedule, n: int, seed: int) -> QuadratureDataset:
    """Draw n quadrature measurements of `state` through the lossy detector.

    `detector` is a CalibrationCase or a bare efficiency in (0, 1].  Each
    record draws the state quadrature at its scheduled phase and mixes it with
    a vacuum draw: X = sqrt(eta)*x + sqrt(1-eta)*y.  Deterministic given seed.
    """
    eta = detector.eta if isinstance(detector, CalibrationCase) else float(detector)
    if not 0 < eta <= 1:
        raise ValueError("detector efficiency must be in (0, 1]")
    if n <= 0:
        raise ValueError("need a positive number of records")
    phases = schedule.phases()
    thetas = schedule.assign(n)
    idx_all = np.searchsorted(phases, thetas)
    draw = _state_sampler(state, phases)
    values = np.empty(n)
    root = np.random.SeedSequence(seed)
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    streams = root.spawn(n_chunks)
    for c in range(n_chunks):
        sl = slice(c * _CHUNK, min((c + 1) * _CHUNK, n))
        rng = np.random.default_rng(streams[c])
        x = draw(idx_all[sl], rng)
        y = rng.standard_normal(x.size) * np.sqrt(0.5)
        values[sl] = np.sqrt(eta) * x + np.sqrt(1 - eta) * y
    meta = {
        "source": type(state).__name__,
        "eta": eta,
        "n_bar": detector.n_bar if isinstance(detector, CalibrationCase) else None,
        "seed": seed,
        "schedule": {"kind": schedule.kind, "n_phases": schedule.n_phases,
                     "samples_per_phase": schedule.samples_per_phase},
        "unit": "quanta",
    }
    return QuadratureDataset(thetas, values, meta)


def variance_vs_phase(dataset: QuadratureDataset, n_bins: int) -> VarianceCurve:
    """Unbiased sample variance in each of n_bins phase bins.

    Records are assigned to the nearest bin center 2*pi*k/n_bins (wrapping);
    bins holding fewer than 100 records are flagged with a warning.
    """
    if n_bins < 1:
        raise ValueError("need at least one phase bin")
    centers = np.linspace(0.0, 2 * np.pi, n_bins, endpoint=False)
    idx = np.rint(dataset.thetas / (2 * np.pi / n_bins)).astype(int) % n_bins
    variances = np.full(n_bins, np.nan)
    counts = np.zeros(n_bins, dtype=int)
    for b in range(n_bins):
        sel = dataset.values[idx == b]
        counts[b] = sel.size
        if sel.size >= 2:
            variances[b] = np.var(sel, ddof=1)
    thin = counts < 100
    if np.any(thin):
        warnings.warn(f"{int(thin.sum())} phase bins hold fewer than 100 records",
                      stacklevel=2)
    return VarianceCurve(centers, variances, counts=counts)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n_selected: int


def histogram(dataset: QuadratureDataset, theta_window: tuple[float, float],
              bin_width: float) -> Histogram:
    """Counts of measured values for records whose phase lies in the window."""
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    lo, hi = theta_window
    sel = dataset.values[(dataset.thetas >= lo) & (dataset.thetas <= hi)]
    if sel.size == 0:
        return Histogram(np.array([]), np.array([], dtype=int), 0)
    first = np.floor(sel.min() / bin_width) * bin_width
    last = np.ceil(sel.max() / bin_width) * bin_width
    n = max(int(round((last - first) / bin_width)), 1)
    edges = first + bin_width * np.arange(n + 1)
    counts, _ = np.histogram(sel, bins=edges)
    return Histogram(edges, counts, int(sel.size))


def voltage_view(dataset: QuadratureDataset, conversion: float) -> QuadratureDataset:
    """Rescale values from quanta to mV using a quanta/mV^2 conversion factor.

    value_mV = value_quanta / sqrt(conversion); applying the view again with
    the reciprocal conversion inverts it exactly.
    """
    if conversion <= 0:
        raise ValueError("conversion factor must be positive")
    meta = dict(dataset.meta)
    meta["unit"] = "mV" if meta.get("unit") == "quanta" else "quanta"
    meta["conversion_quanta_per_mv2"] = conversion
    return QuadratureDataset(dataset.thetas, dataset.values / np.sqrt(conversion), meta)
