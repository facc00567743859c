import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermal_mbci.errors import DimensionError, SizeLimitError
from thermal_mbci.linalg import (
    UnitarySpec,
    hadamard_product,
    is_positive_semidefinite,
    permanent_naive,
    permanent_ryser,
    permanent_ryser_batch,
    random_unitary,
    unitarity_residual,
)


def rand_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def close(a, b, rtol=1e-10):
    return abs(a - b) <= rtol * max(1.0, abs(b))


# -- permanents ------------------------------------------------------------

def test_naive_small_cases():
    assert permanent_naive(np.array([[2.5 - 1j]])) == 2.5 - 1j
    a, b, c, d = 1 + 2j, -3j, 0.5, 4 - 1j
    assert permanent_naive([[a, b], [c, d]]) == pytest.approx(a * d + b * c)
    for n in range(0, 8):
        assert permanent_naive(np.ones((n, n))) == pytest.approx(math.factorial(n))


def test_empty_permanent_is_one():
    empty = np.zeros((0, 0))
    assert permanent_naive(empty) == 1
    assert permanent_ryser(empty) == 1


@pytest.mark.parametrize("fn", [permanent_naive, permanent_ryser])
def test_non_square_rejected(fn):
    with pytest.raises(DimensionError):
        fn(np.ones((2, 3)))


def test_size_guards():
    with pytest.raises(SizeLimitError):
        permanent_naive(np.ones((11, 11)))
    with pytest.raises(SizeLimitError):
        permanent_ryser(np.ones((31, 31)))


def test_ryser_identity_and_all_ones():
    assert permanent_ryser(np.eye(3)) == pytest.approx(1.0)
    v = permanent_ryser(np.ones((20, 20)))
    assert abs(v - math.factorial(20)) <= 1e-9 * math.factorial(20)
    assert v == pytest.approx(2.43290200818e18, rel=1e-11)


@pytest.mark.parametrize("n", range(1, 9))
def test_ryser_matches_naive(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(5):
        m = rand_complex(rng, n)
        assert close(permanent_ryser(m), permanent_naive(m))


def test_ryser_hand_3x3():
    m = np.arange(1, 10, dtype=float).reshape(3, 3)
    # 1*5*9 + 1*6*8 + 2*4*9 + 2*6*7 + 3*4*8 + 3*5*7
    assert permanent_ryser(m) == pytest.approx(450.0)


def test_ryser_bit_reproducible():
    m = rand_complex(np.random.default_rng(7), 12)
    assert permanent_ryser(m) == permanent_ryser(m.copy())


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    stack = np.stack([rand_complex(rng, 4) for _ in range(6)])
    out = permanent_ryser_batch(stack)
    assert np.allclose(out, [permanent_ryser(m) for m in stack], rtol=0, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permanent_invariant_under_row_and_column_permutations(seed):
    rng = np.random.default_rng(seed)
    m = rand_complex(rng, 5)
    p, q = rng.permutation(5), rng.permutation(5)
    assert close(permanent_ryser(m[p][:, q]), permanent_ryser(m))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_permanent_multilinear_in_rows(seed, row):
    rng = np.random.default_rng(seed)
    m = rand_complex(rng, 5)
    lam = complex(*rng.standard_normal(2))
    scaled = m.copy()
    scaled[row] *= lam
    ref = lam * permanent_ryser(m)
    assert abs(permanent_ryser(scaled) - ref) <= 1e-10 * max(1.0, abs(ref))


# -- unitaries -------------------------------------------------------------

def test_presets():
    assert np.array_equal(random_unitary(UnitarySpec(3, construction="named-preset", preset="identity")), np.eye(3))
    bs = random_unitary(UnitarySpec(2, construction="named-preset", preset="balanced-beamsplitter"))
    assert np.allclose(bs, np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)
    f = random_unitary(UnitarySpec(4, construction="named-preset", preset="discrete-fourier"))
    assert unitarity_residual(f) < 1e-14
    assert np.allclose(np.abs(f) ** 2, 0.25)


def test_haar_unitarity_and_determinism():
    u = random_unitary(UnitarySpec(6, seed=42))
    assert unitarity_residual(u) < 1e-12
    assert np.array_equal(u, random_unitary(UnitarySpec(6, seed=42)))
    assert not np.array_equal(u, random_unitary(UnitarySpec(6, seed=43)))


@pytest.mark.parametrize("dim", [1, 2, 5, 16, 32])
def test_haar_unitarity_up_to_32(dim):
    for seed in range(3):
        assert unitarity_residual(random_unitary(UnitarySpec(dim, seed=seed))) < 1e-12


def test_haar_phase_statistics():
    # with the phase fix the diagonal entries have uniformly distributed
    # phases; plain QR output would bias them toward the real axis
    phases = np.array([
        np.angle(random_unitary(UnitarySpec(2, seed=s))[0, 0]) for s in range(4000)
    ])
    assert abs(np.mean(np.cos(phases))) < 0.05
    assert abs(np.mean(np.sin(phases))) < 0.05


def test_unitary_spec_validation():
    with pytest.raises(ValueError):
        UnitarySpec(0)
    with pytest.raises(ValueError):
        UnitarySpec(2, construction="named-preset", preset="mirror")
    with pytest.raises(ValueError):
        UnitarySpec(2, construction="explicit-entries", entries=np.ones((2, 2)))
    spec = UnitarySpec(2, construction="explicit-entries", entries=np.eye(2))
    assert np.array_equal(random_unitary(spec), np.eye(2))


# -- predicates and products ------------------------------------------------

def test_psd_predicate():
    assert is_positive_semidefinite(np.eye(3), 1e-10)
    assert not is_positive_semidefinite(np.array([[0, 1], [0, 0]]), 1e-10)
    assert not is_positive_semidefinite(np.diag([1.0, -1e-6]), 1e-9)
    rng = np.random.default_rng(0)
    b = rand_complex(rng, 4, 2)
    assert is_positive_semidefinite(b @ b.conj().T)
    with pytest.raises(DimensionError):
        is_positive_semidefinite(np.ones((2, 3)))


def test_hadamard_product():
    a = np.array([[1, 2], [3, 4]])
    assert np.array_equal(hadamard_product(a, [[5, 6], [7, 8]]), [[5, 12], [21, 32]])
    rng = np.random.default_rng(1)
    m = rand_complex(rng, 3)
    assert np.array_equal(hadamard_product(m, np.ones((3, 3))), m)
    assert np.array_equal(hadamard_product(m, np.zeros((3, 3))), np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        hadamard_product(np.ones((2, 2)), np.ones((2, 3)))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        permanent_ryser(np.array([[np.nan]]))
