"""Monte-Carlo estimates of correlation functions from the thermal P-function.

Each source mode on a discretized frequency grid gets an independent circular
complex Gaussian amplitude whose mean intensity is the mode occupation.  The
normally ordered correlation function is then the classical average of the
product of detector intensities.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import permanent_ryser
from .thermal import SourceBank, ThermalInstance, build_A_matrix, time_lags

BLOCK_SIZE = 20_000
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class FrequencyGrid:
    """Midpoint grid over ``omega0 +/- span_sigmas * delta_omega``."""

    n_bins: int = 64
    span_sigmas: float = 5.0

    def __post_init__(self):
        if self.n_bins < 8:
            raise ValueError(f"n_bins must be >= 8, got {self.n_bins}")
        if self.span_sigmas < 3:
            raise ValueError(f"span_sigmas must be >= 3, got {self.span_sigmas}")
        mass = self.total_weight()
        if not 0.995 <= mass <= 1.0:
            raise ValueError(f"grid captures spectral mass {mass:.6f}, outside [0.995, 1]")

    def _unit_nodes(self):
        # nodes in units of delta_omega around omega0; the weights do not
        # depend on the spectrum's centre or width
        width = 2.0 * self.span_sigmas / self.n_bins
        x = -self.span_sigmas + width * (np.arange(self.n_bins) + 0.5)
        w = np.exp(-0.5 * x**2) / math.sqrt(2.0 * math.pi) * width
        return x, w

    def total_weight(self) -> float:
        return float(self._unit_nodes()[1].sum())

    def nodes(self, sources: SourceBank) -> tuple[np.ndarray, np.ndarray]:
        """Bin centres ``omega_j`` and spectral weights ``f(omega_j) * bin_width``."""
        x, w = self._unit_nodes()
        return sources.omega0 + sources.delta_omega * x, w

    def bin_width(self, sources: SourceBank) -> float:
        return 2.0 * self.span_sigmas * sources.delta_omega / self.n_bins


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int


def discrete_chi(u, sources: SourceBank, grid: FrequencyGrid):
    """Grid version of the spectral Fourier transform, ``sum_j w_j exp(-i omega_j u)``."""
    omega, w = grid.nodes(sources)
    u = np.asarray(u, dtype=float)
    val = np.exp(-1j * np.multiply.outer(u, omega)) @ w
    return complex(val) if val.ndim == 0 else val


def discrete_gn(inst: ThermalInstance, grid: FrequencyGrid) -> float:
    """Correlation value the Monte-Carlo estimator converges to on ``grid``."""
    chi = discrete_chi(time_lags(inst.event), inst.sources, grid)
    c = build_A_matrix(inst) * chi
    return float(inst.sources.E_const ** (2 * inst.N) * permanent_ryser(c).real)


def sample_amplitudes(
    sources: SourceBank, grid: FrequencyGrid, rng: np.random.Generator, size: int = 1
) -> np.ndarray:
    """Draw thermal mode amplitudes with shape ``(size, M, n_bins)``.

    Each amplitude is circular complex Gaussian with ``E|alpha|^2 = r_s w_j``.
    Zero-rate sources get exactly zero and consume no random numbers.
    """
    _, w = grid.nodes(sources)
    rates = sources.rate_array
    out = np.zeros((size, sources.M, grid.n_bins), dtype=np.complex128)
    active = np.flatnonzero(rates > 0)
    if active.size:
        # consecutive (re, im) normal pairs viewed in place as complex128
        z = rng.standard_normal((size, active.size, 2 * grid.n_bins)).view(np.complex128)
        scale = np.sqrt(0.5 * rates[active, None] * w[None, :])
        if active.size == sources.M:
            return z * scale
        out[:, active, :] = z * scale
    return out


def field_at_detector(amplitudes, inst: ThermalInstance, d: int, t: float, grid: FrequencyGrid):
    """Positive-frequency field at output port ``d`` (1-based) and time ``t``."""
    omega, _ = grid.nodes(inst.sources)
    alpha = np.asarray(amplitudes)
    phases = np.exp(-1j * omega * t)
    return 1j * inst.sources.E_const * np.einsum("...sj,s,j->...", alpha, inst.unitary[:, d - 1], phases)


def _block_intensities(inst, grid, seq, n, omega):
    rng = np.random.Generator(np.random.PCG64(seq))
    alpha = sample_amplitudes(inst.sources, grid, rng, n)
    t = inst.event.time_array
    phases = np.exp(-1j * np.outer(omega, t))  # (bins, N)
    per_source = alpha @ phases  # (n, M, N)
    u = inst.unitary[:, inst.event.indices]  # (M, N)
    fields = inst.sources.E_const * np.einsum("nsd,sd->nd", per_source, u)
    return np.abs(fields) ** 2


def estimate_gn_family(
    inst: ThermalInstance,
    grid: FrequencyGrid,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> list[McEstimate]:
    """Estimates for every prefix ``D[:k]`` of the detection sample, ``k = 1..N``.

    All orders share one set of samples.  Blocks are seeded by spawning from
    ``seed`` and combined in block order, so the output does not depend on
    ``threads``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    n_blocks = -(-n_samples // BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * (n_blocks - 1) + [n_samples - BLOCK_SIZE * (n_blocks - 1)]
    seqs = np.random.SeedSequence(seed).spawn(n_blocks)
    omega, _ = grid.nodes(inst.sources)
    n = inst.N

    def run(i):
        inten = _block_intensities(inst, grid, seqs[i], sizes[i], omega)
        prods = np.cumprod(inten, axis=1)
        mean = prods.mean(axis=0)
        m2 = ((prods - mean) ** 2).sum(axis=0)
        return sizes[i], mean, m2

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(i) for i in range(n_blocks)]

    count = 0
    mean = np.zeros(n)
    m2 = np.zeros(n)
    for nb, mb, m2b in parts:
        # pairwise merge of running moments in fixed block order
        delta = mb - mean
        tot = count + nb
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta**2 * count * nb / tot
        count = tot

    std = np.sqrt(m2 / (count - 1)) if count > 1 else np.zeros(n)
    return [
        McEstimate(float(mean[k]), float(std[k] / math.sqrt(count)), count, seed) for k in range(n)
    ]


def estimate_gn(
    inst: ThermalInstance,
    grid: FrequencyGrid | None = None,
    n_samples: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> McEstimate:
    if grid is None:
        grid = FrequencyGrid()
    if inst.N > 3:
        warnings.warn(f"Monte-Carlo variance grows steeply with N; N={inst.N} > 3", stacklevel=2)
    if n_samples < MIN_SAMPLES:
        warnings.warn(f"n_samples={n_samples} below recommended {MIN_SAMPLES}", stacklevel=2)
    return estimate_gn_family(inst, grid, n_samples, seed, threads)[-1]
