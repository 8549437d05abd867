import numpy as np
import pytest

from jumpfeed.linalg import (asmatrix, dag, eig_hermitian, expm,
                             hermiticity_defect, is_hermitian, kron,
                             trace_distance)


def test_kron_identity_random():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    left = kron(a, np.eye(3))
    direct = np.kron(a, np.eye(3))
    assert np.max(np.abs(left - direct)) < 1e-12
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.max(np.abs(kron(a, b) @ kron(dag(a), dag(b))
                         - kron(a @ dag(a), b @ dag(b)))) < 1e-12


def test_expm_unitary_for_antihermitian():
    rng = np.random.default_rng(8)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (h + dag(h)) / 2
    u = expm(1j * h)
    assert np.max(np.abs(dag(u) @ u - np.eye(4))) < 1e-12


def test_expm_rejects_nonsquare():
    with pytest.raises(ValueError):
        expm(np.ones((2, 3)))


def test_hermiticity_helpers():
    m = np.array([[1.0, 2.0], [2.0, -1.0]], complex)
    assert is_hermitian(m)
    assert hermiticity_defect(m) == 0.0
    m[0, 1] += 1e-6j
    assert not is_hermitian(m, tol=1e-9)


def test_eig_hermitian_descending_and_defect():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(5, 5))
    h = (a + a.T) / 2
    w, v = eig_hermitian(h)
    assert np.all(np.diff(w) <= 1e-12)
    recon = (v * w) @ dag(v)
    assert np.max(np.abs(recon - h)) < 1e-10
    with pytest.raises(ValueError):
        eig_hermitian(a + np.triu(np.ones((5, 5))))


def test_trace_distance_properties():
    rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    sig = np.diag([0.0, 0.0, 0.5, 0.5]).astype(complex)
    assert abs(trace_distance(rho, sig) - 1.0) < 1e-12
    assert trace_distance(rho, rho) < 1e-14


def test_asmatrix_coerces_dtype():
    out = asmatrix([[1, 0], [0, 1]])
    assert out.dtype == np.complex128
