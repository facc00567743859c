"""Nth-order correlation functions of thermal light behind a linear interferometer.

Three equivalent routes are provided:

* ``gn_permutation_sum`` -- sum over permutations of products of first-order
  correlators;
* ``gn_permanent_C`` -- one permanent of the Hadamard product ``C = A o chi``;
* ``gn_configuration_sum`` -- sum over source multisets of weighted
  permanents of interference matrices.

All values are in units of ``E**(2N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import SizeLimitError
from .linalg import (
    permanent_ryser,
    permanent_ryser_batch,
    permutation_table,
    RYSER_MAX_N,
)
from .thermal import (
    ThermalInstance,
    build_A_matrix,
    build_C_matrix,
    build_chi_matrix,
    chi_function,
    detector_submatrix,
)

FORMULATIONS = (
    "permutation-sum",
    "permanent-C",
    "configuration-sum",
    "equal-times",
    "incoherent-sum",
    "uncorrelated",
)

PERMUTATION_MAX_N = 10
CONFIGURATION_MAX_N = 8
CONFIGURATION_MAX_COUNT = 10**7
IDENTITY_MAX_N = 6
IDENTITY_MAX_M = 8

NEGATIVE_TOL = 1e-9
CHI_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class SourceConfiguration:
    """How many of the N detected photons each source contributed."""

    multiplicities: tuple[int, ...]

    def __post_init__(self):
        mult = tuple(int(k) for k in self.multiplicities)
        if any(k < 0 for k in mult):
            raise ValueError(f"multiplicities must be >= 0, got {mult}")
        object.__setattr__(self, "multiplicities", mult)

    @classmethod
    def from_labels(cls, labels, M: int) -> SourceConfiguration:
        counts = [0] * M
        for c in labels:
            counts[int(c) - 1] += 1
        return cls(tuple(counts))

    @property
    def N(self) -> int:
        return sum(self.multiplicities)

    @property
    def labels(self) -> tuple[int, ...]:
        """Nondecreasing 1-based source labels, repeats included."""
        return tuple(s + 1 for s, k in enumerate(self.multiplicities) for _ in range(k))

    @property
    def indices(self) -> np.ndarray:
        return np.array(self.labels, dtype=np.intp) - 1

    @property
    def exact_weight(self) -> Fraction:
        denom = 1
        for k in self.multiplicities:
            denom *= math.factorial(k)
        return Fraction(1, denom)

    @property
    def weight(self) -> float:
        return float(self.exact_weight)


@dataclass(frozen=True)
class CorrelationResult:
    value: float
    formulation: str
    residual_imag: float
    n_terms: int


def _result(raw: complex, scale: float, formulation: str, n_terms: int) -> CorrelationResult:
    value = float(np.real(raw))
    if value < 0:
        if value < -NEGATIVE_TOL * max(1.0, scale):
            raise ArithmeticError(f"{formulation}: negative correlation value {value:.3e}")
        value = 0.0
    return CorrelationResult(value, formulation, abs(float(np.imag(raw))), n_terms)


def _diag_scale(inst: ThermalInstance) -> float:
    e2 = inst.sources.E_const ** 2
    return float(np.prod(e2 * np.real(np.diag(build_A_matrix(inst)))))


def _port_index(inst: ThermalInstance, port: int) -> int:
    try:
        return inst.event.ports.index(int(port))
    except ValueError:
        raise ValueError(f"port {port} is not in the detection sample {inst.event.ports}") from None


def g1(inst: ThermalInstance, d: int, d_prime: int) -> complex:
    """First-order correlator between detection ports ``d`` and ``d_prime`` (1-based)."""
    i = _port_index(inst, d)
    j = _port_index(inst, d_prime)
    u = inst.unitary
    r = inst.sources.rate_array
    if i == j:
        return complex(inst.sources.E_const ** 2 * np.sum(np.abs(u[:, d - 1]) ** 2 * r))
    amp = np.sum(np.conj(u[:, d - 1]) * u[:, d_prime - 1] * r)
    chi = chi_function(inst.event.times[j] - inst.event.times[i], inst.sources)
    return complex(inst.sources.E_const ** 2 * amp * chi)


def g1_matrix(inst: ThermalInstance) -> np.ndarray:
    ports = inst.event.ports
    return np.array([[g1(inst, d, dp) for dp in ports] for d in ports], dtype=np.complex128)


def gn_permutation_sum(inst: ThermalInstance) -> CorrelationResult:
    n = inst.N
    if n > PERMUTATION_MAX_N:
        raise SizeLimitError(f"permutation sum supports N <= {PERMUTATION_MAX_N}, got {n}")
    g = g1_matrix(inst)
    perms = permutation_table(n)
    total = 0j
    rows = np.arange(n)
    for sigma in perms:
        total += np.prod(g[rows, sigma])
    return _result(total, _diag_scale(inst), "permutation-sum", len(perms))


def gn_permanent_C(inst: ThermalInstance) -> CorrelationResult:
    n = inst.N
    if n > RYSER_MAX_N:
        raise SizeLimitError(f"permanent formulation supports N <= {RYSER_MAX_N}, got {n}")
    raw = inst.sources.E_const ** (2 * n) * permanent_ryser(build_C_matrix(inst))
    return _result(raw, _diag_scale(inst), "permanent-C", 1)


def configuration_count(M: int, N: int) -> int:
    return math.comb(M + N - 1, N)


def enumerate_configurations(M: int, N: int) -> Iterator[SourceConfiguration]:
    """All size-``N`` multisets over ``M`` sources in lexicographic label order."""
    if M < 1 or N < 0:
        raise ValueError(f"need M >= 1 and N >= 0, got M={M}, N={N}")
    count = configuration_count(M, N)
    if count > CONFIGURATION_MAX_COUNT:
        raise SizeLimitError(
            f"{count} source configurations for M={M}, N={N} exceeds {CONFIGURATION_MAX_COUNT}"
        )
    for combo in _multisets(M, N):
        yield SourceConfiguration.from_labels([c + 1 for c in combo], M)


def _multisets(M: int, N: int) -> Iterator[tuple[int, ...]]:
    # nondecreasing index tuples, lexicographic
    if N == 0:
        yield ()
        return
    combo = [0] * N
    while True:
        yield tuple(combo)
        i = N - 1
        while i >= 0 and combo[i] == M - 1:
            i -= 1
        if i < 0:
            return
        combo[i:] = [combo[i] + 1] * (N - i)


def build_interference_matrix(udsub, config: SourceConfiguration, sigma) -> np.ndarray:
    """Entry ``(d, j) = conj(U[c_j, d]) * U[c_j, sigma(d)]`` for multiset element ``c_j``.

    ``udsub`` is the ``N x M`` detector submatrix, ``sigma`` a permutation of
    the detector positions ``0..N-1``.
    """
    ud = np.asarray(udsub, dtype=np.complex128)
    cols = config.indices
    sigma = np.asarray(sigma, dtype=np.intp)
    _check_config(ud, config, sigma)
    out = np.conj(ud[:, cols]) * ud[sigma][:, cols]
    fixed = sigma == np.arange(len(sigma))
    out[fixed] = np.abs(ud[fixed][:, cols]) ** 2
    return out


def build_repeated_column_matrix(udsub, config: SourceConfiguration) -> np.ndarray:
    """Columns of the detector submatrix picked by the multiset, repeats included."""
    ud = np.asarray(udsub, dtype=np.complex128)
    _check_config(ud, config)
    return ud[:, config.indices]


def _check_config(ud, config, sigma=None):
    n, m = ud.shape
    if len(config.multiplicities) != m or config.N != n:
        raise ValueError(
            f"configuration {config.multiplicities} does not fit a {n}x{m} submatrix"
        )
    if sigma is not None and sorted(sigma.tolist()) != list(range(n)):
        raise ValueError(f"sigma {sigma.tolist()} is not a permutation of {n} positions")


def _active_configurations(inst: ThermalInstance):
    rates = inst.sources.rate_array
    configs, weights = [], []
    for cfg in enumerate_configurations(inst.M, inst.N):
        idx = cfg.indices
        # zero-rate sources make the whole rate product vanish
        if np.any(rates[idx] == 0.0):
            continue
        configs.append(cfg)
        weights.append(cfg.weight * float(np.prod(rates[idx])))
    return configs, np.array(weights)


def _config_guard(inst: ThermalInstance, what: str):
    n = inst.N
    if n > CONFIGURATION_MAX_N:
        raise SizeLimitError(f"{what} supports N <= {CONFIGURATION_MAX_N}, got {n}")
    configuration_count(inst.M, n)  # count guard is enforced by the enumerator


def gn_configuration_sum(inst: ThermalInstance) -> CorrelationResult:
    _config_guard(inst, "configuration sum")
    n = inst.N
    ud = detector_submatrix(inst)
    configs, weights = _active_configurations(inst)
    perms = permutation_table(n).astype(np.intp)
    chi = build_chi_matrix(inst.event, inst.sources)
    rows = np.arange(n)
    chi_prod = np.array([np.prod(chi[rows, s]) for s in perms])
    keep = np.abs(chi_prod) >= CHI_UNDERFLOW
    perms, chi_prod = perms[keep], chi_prod[keep]

    total = 0j
    n_terms = 0
    for cfg, w in zip(configs, weights):
        cols = cfg.indices
        left = np.conj(ud[:, cols])
        stack = left[None, :, :] * ud[perms][:, :, cols]
        pers = permanent_ryser_batch(stack)
        total += w * np.dot(chi_prod, pers)
        n_terms += len(perms)
    raw = inst.sources.E_const ** (2 * n) * total
    return _result(raw, _diag_scale(inst), "configuration-sum", n_terms)


def gn_equal_times(inst: ThermalInstance) -> CorrelationResult:
    """Correlation for coincident detections, ``E^2N per A``; stored times are ignored."""
    n = inst.N
    if n > RYSER_MAX_N:
        raise SizeLimitError(f"equal-time formulation supports N <= {RYSER_MAX_N}, got {n}")
    raw = inst.sources.E_const ** (2 * n) * permanent_ryser(build_A_matrix(inst))
    return _result(raw, _diag_scale(inst), "equal-times", 1)


def gn_equal_times_incoherent(inst: ThermalInstance) -> CorrelationResult:
    """Equal-time correlation as a weighted sum of ``|per U_S|^2`` over configurations."""
    _config_guard(inst, "incoherent sum")
    n = inst.N
    ud = detector_submatrix(inst)
    configs, weights = _active_configurations(inst)
    if configs:
        stack = np.stack([ud[:, cfg.indices] for cfg in configs])
        pers = permanent_ryser_batch(stack)
        total = float(np.dot(weights, np.abs(pers) ** 2))
    else:
        total = 0.0
    raw = inst.sources.E_const ** (2 * n) * total
    return _result(raw, _diag_scale(inst), "incoherent-sum", len(configs))


def gn_uncorrelated_limit(inst: ThermalInstance) -> CorrelationResult:
    """Product of the diagonal first-order correlators (far-separated detections)."""
    value = 1.0
    for d in inst.event.ports:
        value *= g1(inst, d, d).real
    return _result(value, value, "uncorrelated", inst.N)


def normalized_gn(inst: ThermalInstance, value: float) -> float:
    """``value`` divided by the product of single-port intensities; NaN if that is zero."""
    denom = gn_uncorrelated_limit(inst).value
    return value / denom if denom > 0 else float("nan")


@dataclass(frozen=True)
class IdentityReport:
    interference_sums: dict[tuple[int, ...], complex]
    incoherent_sum: float
    max_interference_dev: float
    incoherent_dev: float
    tol: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_interference_dev, self.incoherent_dev)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def verify_equal_rate_identities(unitary, ports, tol: float = 1e-10) -> IdentityReport:
    """Check both equal-rate permanent sums by direct enumeration.

    For every permutation ``sigma`` of the detector sample, the weighted sum of
    ``per M(S, sigma)`` over configurations must be 1 for the identity and 0
    otherwise; the weighted sum of ``|per U_S|^2`` must be 1.
    """
    u = np.asarray(unitary, dtype=np.complex128)
    m = u.shape[0]
    idx = np.array(ports, dtype=np.intp) - 1
    n = len(idx)
    if n > IDENTITY_MAX_N or m > IDENTITY_MAX_M:
        raise SizeLimitError(
            f"identity check supports N <= {IDENTITY_MAX_N}, M <= {IDENTITY_MAX_M}; got N={n}, M={m}"
        )
    ud = u[:, idx].T
    configs = list(enumerate_configurations(m, n))
    weights = np.array([c.weight for c in configs])
    perms = permutation_table(n).astype(np.intp)

    sums = {}
    max_dev = 0.0
    identity = tuple(range(n))
    for sigma in perms:
        stack = np.stack([build_interference_matrix(ud, c, sigma) for c in configs])
        s = complex(np.dot(weights, permanent_ryser_batch(stack)))
        key = tuple(int(k) for k in sigma)
        sums[key] = s
        target = 1.0 if key == identity else 0.0
        max_dev = max(max_dev, abs(s - target))

    stack = np.stack([build_repeated_column_matrix(ud, c) for c in configs])
    inc = float(np.dot(weights, np.abs(permanent_ryser_batch(stack)) ** 2))
    return IdentityReport(sums, inc, max_dev, abs(inc - 1.0), tol)


GN_FUNCTIONS = {
    "permutation-sum": gn_permutation_sum,
    "permanent-C": gn_permanent_C,
    "configuration-sum": gn_configuration_sum,
    "equal-times": gn_equal_times,
    "incoherent-sum": gn_equal_times_incoherent,
    "uncorrelated": gn_uncorrelated_limit,
}


def compute_gn(inst: ThermalInstance, formulation: str = "permanent-C") -> CorrelationResult:
    try:
        fn = GN_FUNCTIONS[formulation]
    except KeyError:
        raise ValueError(f"unknown formulation {formulation!r}; expected one of {FORMULATIONS}") from None
    return fn(inst)
