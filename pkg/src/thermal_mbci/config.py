"""Experiment configuration files and JSON/CSV output helpers.

A configuration is one JSON document describing a single thermal instance
plus run options::

    {
      "unitary": {"construction": "haar-random", "dim": 4, "seed": 7},
      "rates": [1.0, 0.5, 0.0, 2.0],
      "omega0": 10.0, "delta_omega": 1.0, "E_const": 1.0,
      "ports": [1, 3], "times": [0.0, 0.5], "time_unit": "absolute",
      "formulation": "per-C", "output": "json",
      "mc": {"n_samples": 1000000, "seed": 0, "n_bins": 64, "span_sigmas": 5.0}
    }

``unitary`` may instead be ``{"construction": "named-preset", "preset": ...}``,
``{"construction": "explicit-entries", "entries": [[[re, im], ...], ...]}``,
a unitary file written by ``gen-unitary`` (inline), or ``{"file": path}``
with ``path`` relative to the configuration file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .linalg import PRESETS, UnitarySpec, random_unitary, unitarity_residual
from .thermal import DetectionEvent, SourceBank, ThermalInstance

SEED_ENV = "THERMAL_MBCI_SEED"

# CLI spelling -> library formulation name
FORMULATION_ALIASES = {
    "perm-sum": "permutation-sum",
    "per-C": "permanent-C",
    "config-sum": "configuration-sum",
    "equal-times": "equal-times",
    "incoherent": "incoherent-sum",
    "uncorrelated": "uncorrelated",
}
TIME_UNITS = ("absolute", "inverse_bandwidth")


def encode_matrix(u) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(u)]


def decode_matrix(entries, path="entries") -> np.ndarray:
    try:
        arr = np.array(entries, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a rectangular array of [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(path, f"expected an M x M array of [re, im] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(path, "entries must be finite")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass
class McSettings:
    n_samples: int = 1_000_000
    seed: int = 0
    n_bins: int = 64
    span_sigmas: float = 5.0


@dataclass
class ExperimentConfig:
    unitary: dict
    rates: list[float]
    ports: list[int]
    times: list[float]
    omega0: float = 10.0
    delta_omega: float = 1.0
    E_const: float = 1.0
    time_unit: str = "absolute"
    formulation: str = "per-C"
    output: str = "json"
    mc: McSettings | None = None
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    @property
    def M(self) -> int:
        return len(self.rates)

    def absolute_times(self) -> list[float]:
        if self.time_unit == "inverse_bandwidth":
            return [t / self.delta_omega for t in self.times]
        return list(self.times)

    def build_unitary(self) -> np.ndarray:
        return _unitary_from_block(self.unitary, self.M, self.base_dir)

    def to_instance(self) -> ThermalInstance:
        u = self.build_unitary()
        try:
            sources = SourceBank(tuple(self.rates), self.omega0, self.delta_omega, self.E_const)
        except ValueError as exc:
            raise ConfigError("rates", str(exc)) from None
        try:
            event = DetectionEvent(tuple(self.ports), tuple(self.absolute_times()))
        except ValueError as exc:
            raise ConfigError("ports", str(exc)) from None
        if max(self.ports) > self.M:
            raise ConfigError("ports", f"port {max(self.ports)} exceeds M={self.M}")
        try:
            return ThermalInstance(u, sources, event)
        except ValueError as exc:
            raise ConfigError("unitary", str(exc)) from None

    def to_dict(self) -> dict:
        out = {
            "M": self.M,
            "unitary": self.unitary,
            "rates": list(self.rates),
            "omega0": self.omega0,
            "delta_omega": self.delta_omega,
            "E_const": self.E_const,
            "ports": list(self.ports),
            "times": list(self.times),
            "time_unit": self.time_unit,
            "formulation": self.formulation,
            "output": self.output,
        }
        if self.mc is not None:
            out["mc"] = dict(vars(self.mc))
        return out

    def with_times(self, times) -> ExperimentConfig:
        return replace(self, times=list(times))


def _unitary_from_block(block: dict, M: int, base_dir: Path) -> np.ndarray:
    if "file" in block:
        path = base_dir / block["file"]
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("unitary.file", f"cannot read {path}: {exc}") from None
        return _unitary_from_block(data, M, path.parent)
    # stored entries (e.g. a gen-unitary file) take precedence over the seed
    construction = "explicit-entries" if "entries" in block else block.get("construction")
    dim = block.get("dim", M)
    if dim != M:
        raise ConfigError("unitary.dim", f"dim {dim} does not match {M} rates")
    try:
        if construction == "explicit-entries":
            entries = decode_matrix(block.get("entries"), "unitary.entries")
            spec = UnitarySpec(M, construction="explicit-entries", entries=entries)
        elif construction == "named-preset":
            preset = block.get("preset")
            if preset not in PRESETS:
                raise ConfigError("unitary.preset", f"unknown preset {preset!r}; expected one of {PRESETS}")
            spec = UnitarySpec(M, construction="named-preset", preset=preset)
        elif construction == "haar-random":
            seed = block.get("seed", 0)
            env = os.environ.get(SEED_ENV)
            if env is not None:
                try:
                    seed = int(env)
                except ValueError:
                    raise ConfigError(SEED_ENV, f"not an integer: {env!r}") from None
            if not isinstance(seed, int) or isinstance(seed, bool):
                raise ConfigError("unitary.seed", f"expected an integer, got {seed!r}")
            spec = UnitarySpec(M, seed=seed, construction="haar-random")
        else:
            raise ConfigError("unitary.construction", f"unknown construction {construction!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("unitary", str(exc)) from None
    return random_unitary(spec)


def _number(doc, key, path, default=None, positive=False):
    v = doc.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(path, f"must be > 0, got {v}")
    return float(v)


def _number_list(doc, key):
    v = doc.get(key)
    if not isinstance(v, list) or not v:
        raise ConfigError(key, "expected a non-empty list")
    return [_number({"x": x}, "x", f"{key}[{i}]") for i, x in enumerate(v)]


def parse_config(doc: Any, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate a decoded JSON document; raise ``ConfigError`` naming the bad field."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    for key in ("spectra", "spectrum"):
        if key in doc:
            raise ConfigError(key, "per-source spectra are not supported; all sources share one Gaussian spectrum")
    for key in ("omega0", "delta_omega"):
        if isinstance(doc.get(key), list):
            raise ConfigError(key, "per-source spectral parameters are not supported")

    rates = _number_list(doc, "rates")
    for i, r in enumerate(rates):
        if r < 0:
            raise ConfigError(f"rates[{i}]", f"must be >= 0, got {r}")
    if "M" in doc and doc["M"] != len(rates):
        raise ConfigError("M", f"M={doc['M']} but {len(rates)} rates given")

    unitary = doc.get("unitary")
    if not isinstance(unitary, dict):
        raise ConfigError("unitary", "expected an object")

    ports = doc.get("ports")
    if not isinstance(ports, list) or not ports:
        raise ConfigError("ports", "expected a non-empty list of 1-based output ports")
    for i, p in enumerate(ports):
        if isinstance(p, bool) or not isinstance(p, int) or not 1 <= p <= len(rates):
            raise ConfigError(f"ports[{i}]", f"expected an integer in [1, {len(rates)}], got {p!r}")
    if len(set(ports)) != len(ports):
        raise ConfigError("ports", f"ports must be distinct, got {ports}")
    times = _number_list(doc, "times")
    if len(times) != len(ports):
        raise ConfigError("times", f"{len(times)} times for {len(ports)} ports")

    time_unit = doc.get("time_unit", "absolute")
    if time_unit not in TIME_UNITS:
        raise ConfigError("time_unit", f"expected one of {TIME_UNITS}, got {time_unit!r}")
    formulation = doc.get("formulation", "per-C")
    if formulation not in FORMULATION_ALIASES:
        raise ConfigError("formulation", f"expected one of {tuple(FORMULATION_ALIASES)}, got {formulation!r}")
    output = doc.get("output", "json")
    if output not in ("json", "csv"):
        raise ConfigError("output", f"expected 'json' or 'csv', got {output!r}")

    mc = None
    if doc.get("mc") is not None:
        m = doc["mc"]
        if not isinstance(m, dict):
            raise ConfigError("mc", "expected an object")
        mc = McSettings()
        for key in ("n_samples", "seed", "n_bins"):
            if key in m:
                if isinstance(m[key], bool) or not isinstance(m[key], int):
                    raise ConfigError(f"mc.{key}", f"expected an integer, got {m[key]!r}")
                setattr(mc, key, m[key])
        if "span_sigmas" in m:
            mc.span_sigmas = _number(m, "span_sigmas", "mc.span_sigmas", positive=True)

    cfg = ExperimentConfig(
        unitary=unitary,
        rates=rates,
        ports=list(ports),
        times=times,
        omega0=_number(doc, "omega0", "omega0", 10.0, positive=True),
        delta_omega=_number(doc, "delta_omega", "delta_omega", 1.0, positive=True),
        E_const=_number(doc, "E_const", "E_const", 1.0, positive=True),
        time_unit=time_unit,
        formulation=formulation,
        output=output,
        mc=mc,
        base_dir=Path(base_dir),
    )
    cfg.to_instance()  # surfaces unitary / consistency errors at parse time
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_config(doc, path.parent)


def config_from_instance(inst: ThermalInstance, formulation: str = "per-C") -> ExperimentConfig:
    """Self-contained configuration (explicit unitary entries) reproducing ``inst``."""
    s = inst.sources
    return ExperimentConfig(
        unitary={"construction": "explicit-entries", "entries": encode_matrix(inst.unitary)},
        rates=list(s.rates),
        ports=list(inst.event.ports),
        times=list(inst.event.times),
        omega0=s.omega0,
        delta_omega=s.delta_omega,
        E_const=s.E_const,
        formulation=formulation,
    )


def unitary_document(u, *, seed=None, construction="haar-random", preset=None) -> dict:
    doc = {"dim": int(np.asarray(u).shape[0]), "construction": construction}
    if seed is not None:
        doc["seed"] = int(seed)
    if preset is not None:
        doc["preset"] = preset
    doc["entries"] = encode_matrix(u)
    doc["unitarity_residual"] = unitarity_residual(u)
    return doc


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return "".join(_encode(obj, indent, 0))


def _encode(obj, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        yield json.dumps(obj)
    elif isinstance(obj, (int, np.integer)):
        yield str(int(obj))
    elif isinstance(obj, (float, np.floating)):
        yield format_float(float(obj))
    elif isinstance(obj, dict):
        if not obj:
            yield "{}"
            return
        yield "{"
        for i, (k, v) in enumerate(obj.items()):
            if i:
                yield ","
            yield pad + json.dumps(str(k)) + ": "
            yield from _encode(v, indent, level + 1)
        yield end + "}"
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        # keep numeric leaf arrays (e.g. [re, im] pairs) on one line
        if not items or all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            yield "[" + ", ".join("".join(_encode(v, None, 0)) for v in items) + "]"
            return
        yield "["
        for i, v in enumerate(items):
            if i:
                yield ","
            yield pad
            yield from _encode(v, indent, level + 1)
        yield end + "]"
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
