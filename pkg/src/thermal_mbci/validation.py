"""Randomized cross-checks used by ``thermal-mbci validate`` and the acceptance tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .config import config_from_instance, encode_matrix
from .correlators import (
    gn_configuration_sum,
    gn_permanent_C,
    gn_permutation_sum,
    verify_equal_rate_identities,
)
from .linalg import haar_unitary
from .montecarlo import FrequencyGrid, discrete_gn, estimate_gn_family
from .thermal import DetectionEvent, random_instance

SUITES = ("equivalence", "identities", "mc")

EQUIVALENCE_RTOL = 1e-9
EQUIVALENCE_ATOL = 1e-12
IDENTITY_TOL = 1e-10
MC_SIGMAS = 3.0
MC_MIN_PASS_FRACTION = 0.9


def rel_err(a: float, b: float, atol: float = EQUIVALENCE_ATOL) -> float:
    return abs(a - b) / max(abs(a), abs(b), atol)


@dataclass
class SuiteReport:
    suite: str
    trials: int
    max_rel_err: float = 0.0
    passed: bool = True
    rows: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "suite": self.suite,
            "trials": self.trials,
            "max_rel_err": self.max_rel_err,
            "pass": self.passed,
        }


def run_equivalence(trials: int = 100, seed: int = 0, max_M: int = 7, max_N: int = 5) -> SuiteReport:
    """Permutation sum, single permanent and configuration sum on random instances."""
    rng = np.random.default_rng(seed)
    report = SuiteReport("equivalence", trials)
    for k in range(trials):
        inst = random_instance(rng, max_M=max_M, max_N=max_N)
        vals = {
            "permutation-sum": gn_permutation_sum(inst).value,
            "permanent-C": gn_permanent_C(inst).value,
            "configuration-sum": gn_configuration_sum(inst).value,
        }
        err = max(rel_err(a, b) for a, b in itertools.combinations(vals.values(), 2))
        ok = err <= EQUIVALENCE_RTOL
        report.max_rel_err = max(report.max_rel_err, err)
        report.rows.append({"trial": k, "M": inst.M, "N": inst.N, **vals, "rel_err": err, "pass": ok})
        if not ok:
            report.passed = False
            report.failures.append(config_from_instance(inst).to_dict())
    return report


def run_identities(trials: int = 20, seed: int = 0, max_M: int = 5, max_N: int = 4) -> SuiteReport:
    """Equal-rate permanent sum identities on Haar unitaries."""
    rng = np.random.default_rng(seed)
    report = SuiteReport("identities", trials)
    for k in range(trials):
        n = int(rng.integers(1, max_N + 1))
        m = int(rng.integers(max(n, 2), max_M + 1))
        u = haar_unitary(m, rng)
        ports = sorted(int(p) + 1 for p in rng.choice(m, size=n, replace=False))
        rep = verify_equal_rate_identities(u, ports, IDENTITY_TOL)
        # absolute deviations; targets are 0 and 1
        report.max_rel_err = max(report.max_rel_err, rep.max_deviation)
        report.rows.append(
            {"trial": k, "M": m, "N": n, "interference_dev": rep.max_interference_dev,
             "incoherent_dev": rep.incoherent_dev, "pass": rep.passed}
        )
        if not rep.passed:
            report.passed = False
            report.failures.append(
                {"unitary": {"construction": "explicit-entries", "entries": encode_matrix(u)}, "ports": ports}
            )
    return report


def run_mc(
    trials: int = 10,
    seed: int = 0,
    n_samples: int = 1_000_000,
    grid: FrequencyGrid | None = None,
    max_M: int = 3,
) -> SuiteReport:
    """Monte-Carlo G1 and G2 against discrete-grid analytic values.

    An instance passes when both estimates are within three standard errors;
    the suite passes when at least 90% of instances do.
    """
    grid = grid or FrequencyGrid()
    rng = np.random.default_rng(seed)
    report = SuiteReport("mc", trials)
    n_ok = 0
    for k in range(trials):
        inst = random_instance(rng, N=2, M=int(rng.integers(2, max_M + 1)))
        first = inst.with_event(DetectionEvent(inst.event.ports[:1], inst.event.times[:1]))
        exact = [discrete_gn(first, grid), discrete_gn(inst, grid)]
        est = estimate_gn_family(inst, grid, n_samples, seed=seed * 1_000_003 + k)
        z = [abs(e.mean - x) / e.std_error for e, x in zip(est, exact)]
        ok = max(z) <= MC_SIGMAS
        n_ok += ok
        err = max(rel_err(e.mean, x) for e, x in zip(est, exact))
        report.max_rel_err = max(report.max_rel_err, err)
        report.rows.append(
            {"trial": k, "M": inst.M, "g1_mc": est[0].mean, "g1_exact": exact[0], "z1": z[0],
             "g2_mc": est[1].mean, "g2_exact": exact[1], "z2": z[1], "pass": ok}
        )
        if not ok:
            report.failures.append(config_from_instance(inst).to_dict())
    report.passed = n_ok >= MC_MIN_PASS_FRACTION * trials
    return report
