import numpy as np
import pytest

from qerr.channels import parse_noise_model
from qerr.circuit import BasisState, parse_program
from qerr.densesim import (
    DenseSimError,
    basis_density,
    exact_error,
    exec_ideal,
    exec_noisy,
    partial_trace,
    trace_distance,
    validate_density,
)

GHZ = "qubits 2\nh q0\ncnot q0 q1\n"
BELL_RHO = 0.5 * np.array(
    [[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex
)


def test_ghz_output():
    out = exec_ideal(parse_program(GHZ), BasisState.from_string("00"))
    assert np.allclose(out, BELL_RHO, atol=1e-12)


def test_qubit_zero_is_most_significant():
    out = exec_ideal(parse_program("qubits 2\nx q0\n"), BasisState.from_string("00"))
    assert abs(out[2, 2] - 1) < 1e-12  # |10> at index 2


def test_if_measure_semantics():
    p = parse_program("qubits 2\nh q0\nif q0 { skip } else { x q1 }\n")
    out = exec_ideal(p, BasisState.from_string("00"))
    assert np.allclose(np.diag(out).real, [0.5, 0, 0, 0.5], atol=1e-12)
    assert abs(out[0, 3]) < 1e-12  # measurement kills coherence


def test_noisy_matches_channel_arithmetic():
    model = parse_noise_model("default 1 : bitflip(0.2)\n")
    p = parse_program("qubits 1\nx q0\n")
    out = exec_noisy(p, BasisState.from_string("0"), model)
    assert np.allclose(out, [[0.2, 0], [0, 0.8]], atol=1e-12)


def test_noisy_preserves_trace(rng):
    model = parse_noise_model("default 1 : depolarizing(0.1)\ndefault 2 : bitflip(0.05)\n")
    p = parse_program("qubits 3\nh q0\ncnot q0 q1\ncnot q1 q2\nz q2\n")
    out = exec_noisy(p, BasisState.from_string("000"), model)
    validate_density(out)


def test_trace_distance_basics():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 1.0]).astype(complex)
    assert abs(trace_distance(a, b) - 1.0) < 1e-12
    assert trace_distance(a, a) < 1e-12


def test_trace_distance_rejects_non_hermitian():
    with pytest.raises(DenseSimError):
        trace_distance(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)))


def test_exact_error_single_gate():
    model = parse_noise_model("default 1 : bitflip(0.3)\n")
    p = parse_program("qubits 1\nh q0\n")
    # bitflip acts on |+>, which it fixes: no error
    assert exact_error(p, BasisState.from_string("0"), model) < 1e-12
    p2 = parse_program("qubits 1\nx q0\n")
    assert abs(exact_error(p2, BasisState.from_string("0"), model) - 0.3) < 1e-12


def test_partial_trace_bell():
    red = partial_trace(BELL_RHO, (0,), 2)
    assert np.allclose(red, 0.5 * np.eye(2), atol=1e-12)


def test_partial_trace_ordering():
    rho = np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])).astype(complex)
    r01 = partial_trace(rho, (0, 1), 2)
    r10 = partial_trace(rho, (1, 0), 2)
    assert abs(r01[1, 1] - 1) < 1e-12  # |01> in (q0, q1) order
    assert abs(r10[2, 2] - 1) < 1e-12  # |10> in (q1, q0) order


def test_qubit_cap():
    p = parse_program("qubits 9\n" + "\n".join(f"h q{i}" for i in range(9)) + "\n")
    with pytest.raises(DenseSimError):
        exec_ideal(p, BasisState((0,) * 9))


def test_basis_density_length_mismatch():
    with pytest.raises(DenseSimError):
        basis_density(BasisState.from_string("01"), 3)
