import numpy as np
import pytest

from jumpfeed.states import HilbertLayout, QuantumState, QUBIT_PAIR


def test_layout_size():
    assert QUBIT_PAIR.size == 4
    assert HilbertLayout((3, 3, 4)).size == 36


def test_vector_validation():
    psi = QuantumState.from_ket([1, 0, 0, 0], QUBIT_PAIR)
    psi.validate()
    bad = QuantumState.from_ket([1, 1, 0, 0], QUBIT_PAIR)
    with pytest.raises(ValueError):
        bad.validate()


def test_density_from_ket():
    psi = QuantumState.from_ket(np.array([1, 0, 0, 1]) / np.sqrt(2), QUBIT_PAIR)
    rho = psi.density()
    assert abs(np.trace(rho) - 1) < 1e-12
    assert abs(rho[0, 3] - 0.5) < 1e-12


def test_density_validation_catches_negativity():
    rho = np.diag([1.2, -0.2, 0.0, 0.0]).astype(complex)
    qs = QuantumState.from_density(rho, QUBIT_PAIR)
    with pytest.raises(ValueError):
        qs.validate()


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        QuantumState.from_ket([1, 0], QUBIT_PAIR)


def test_unknown_kind():
    with pytest.raises(ValueError):
        QuantumState("mixed", np.eye(4) / 4, QUBIT_PAIR)
