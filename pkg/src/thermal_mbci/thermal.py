"""Thermal sources, detection events and the chi, A and C matrices.

Unitaries are stored input-major: ``U[s, d]`` is the amplitude for a photon
entering at input port ``s`` to leave at output port ``d``.  Ports are
labelled ``1..M`` in the public types and converted to 0-based indices
internally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .linalg import as_complex_matrix, haar_unitary, hadamard_product, unitarity_residual

NARROW_BAND_RATIO = 0.1


@dataclass(frozen=True)
class SourceBank:
    """Mean photon rates per input port plus the shared Gaussian spectrum."""

    rates: tuple[float, ...]
    omega0: float = 10.0
    delta_omega: float = 1.0
    E_const: float = 1.0

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise ValueError("at least one source is required")
        if any(not np.isfinite(r) or r < 0 for r in rates):
            raise ValueError(f"rates must be finite and >= 0, got {rates}")
        for name in ("omega0", "delta_omega", "E_const"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be > 0, got {v}")
            object.__setattr__(self, name, v)
        if self.delta_omega / self.omega0 > NARROW_BAND_RATIO:
            warnings.warn(
                f"delta_omega/omega0 = {self.delta_omega / self.omega0:.3g} exceeds "
                f"{NARROW_BAND_RATIO}; narrow-band field model may be inaccurate",
                stacklevel=3,
            )

    @property
    def M(self) -> int:
        return len(self.rates)

    @property
    def rate_array(self) -> np.ndarray:
        return np.array(self.rates)


@dataclass(frozen=True)
class DetectionEvent:
    """Ordered output ports (1-based) and their detection times."""

    ports: tuple[int, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        ports = tuple(int(p) for p in self.ports)
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "ports", ports)
        object.__setattr__(self, "times", times)
        if len(ports) != len(times):
            raise DimensionError(f"{len(ports)} ports but {len(times)} times")
        if len(set(ports)) != len(ports):
            raise ValueError(f"detection ports must be distinct, got {ports}")
        if any(p < 1 for p in ports):
            raise ValueError(f"ports are 1-based, got {ports}")
        if not all(np.isfinite(times)):
            raise ValueError("detection times must be finite")

    @property
    def N(self) -> int:
        return len(self.ports)

    @property
    def indices(self) -> np.ndarray:
        return np.array(self.ports, dtype=np.intp) - 1

    @property
    def time_array(self) -> np.ndarray:
        return np.array(self.times)

    def with_time(self, port: int, t: float) -> DetectionEvent:
        if port not in self.ports:
            raise ValueError(f"port {port} not in detection sample {self.ports}")
        times = list(self.times)
        times[self.ports.index(port)] = t
        return DetectionEvent(self.ports, tuple(times))


@dataclass(frozen=True)
class ThermalInstance:
    unitary: np.ndarray = field(repr=False)
    sources: SourceBank
    event: DetectionEvent

    def __post_init__(self):
        u = as_complex_matrix(self.unitary, "unitary").copy()
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)
        m = u.shape[0]
        if u.shape != (m, m):
            raise DimensionError(f"unitary must be square, got {u.shape}")
        if self.sources.M != m:
            raise DimensionError(f"{self.sources.M} rates for a {m}-port interferometer")
        if self.event.N > m or max(self.event.ports, default=1) > m:
            raise DimensionError(f"ports {self.event.ports} out of range for M={m}")
        res = unitarity_residual(u)
        if res > 1e-10:
            raise ValueError(f"interferometer matrix is not unitary (residual {res:.3e})")

    @property
    def M(self) -> int:
        return self.unitary.shape[0]

    @property
    def N(self) -> int:
        return self.event.N

    def with_event(self, event: DetectionEvent) -> ThermalInstance:
        return ThermalInstance(self.unitary, self.sources, event)

    def with_rates(self, rates) -> ThermalInstance:
        s = self.sources
        return ThermalInstance(
            self.unitary, SourceBank(tuple(rates), s.omega0, s.delta_omega, s.E_const), self.event
        )


def chi_function(u, sources: SourceBank):
    """Fourier transform of the normalized Gaussian spectrum at time lag ``u``."""
    u = np.asarray(u, dtype=float)
    val = np.exp(-1j * sources.omega0 * u) * np.exp(-0.5 * (u * sources.delta_omega) ** 2)
    return complex(val) if val.ndim == 0 else val


def time_lags(event: DetectionEvent) -> np.ndarray:
    """Matrix of lags with entry ``(d, d')`` equal to ``t_d' - t_d``."""
    t = event.time_array
    return t[None, :] - t[:, None]


def build_chi_matrix(event: DetectionEvent, sources: SourceBank) -> np.ndarray:
    chi = chi_function(time_lags(event), sources)
    chi = np.asarray(chi, dtype=np.complex128).reshape(event.N, event.N)
    np.fill_diagonal(chi, 1.0)
    return chi


def detector_submatrix(inst: ThermalInstance) -> np.ndarray:
    """The ``N x M`` matrix with entry ``(d, s) = U[s, d]`` for ``d`` in the sample."""
    return inst.unitary[:, inst.event.indices].T.copy()


def build_A_matrix(inst: ThermalInstance) -> np.ndarray:
    """Rate-weighted interference matrix, ``A[d, d'] = sum_s conj(U[s,d]) U[s,d'] r_s``."""
    ud = detector_submatrix(inst)
    a = (ud.conj() * inst.sources.rate_array) @ ud.T
    # diagonal is real by construction; drop rounding residue
    idx = np.diag_indices_from(a)
    a[idx] = a[idx].real
    return a


def build_C_matrix(inst: ThermalInstance) -> np.ndarray:
    return hadamard_product(build_A_matrix(inst), build_chi_matrix(inst.event, inst.sources))


def random_instance(
    rng: np.random.Generator,
    *,
    M: int | None = None,
    N: int | None = None,
    max_M: int = 7,
    max_N: int = 5,
    rate_range: tuple[float, float] = (0.0, 2.0),
    time_span: float = 2.0,
    omega0: float = 10.0,
    delta_omega: float = 1.0,
) -> ThermalInstance:
    """Random Haar interferometer, uniform rates and times in ``[-span, span] / delta_omega``."""
    if N is None:
        N = int(rng.integers(1, max_N + 1))
    if M is None:
        M = int(rng.integers(max(N, 1), max(max_M, N) + 1))
    u = haar_unitary(M, rng)
    rates = rng.uniform(*rate_range, size=M)
    ports = rng.choice(M, size=N, replace=False) + 1
    times = rng.uniform(-time_span, time_span, size=N) / delta_omega
    return ThermalInstance(
        u,
        SourceBank(tuple(rates), omega0, delta_omega),
        DetectionEvent(tuple(int(p) for p in ports), tuple(times)),
    )
