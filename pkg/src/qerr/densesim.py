"""Dense density-matrix reference simulator.

Exact but exponential in qubit count; capped at 8 qubits so it stays a
trustworthy oracle for the scalable pipeline rather than a competitor to it.
"""

from __future__ import annotations

import numpy as np

from .circuit import BasisState, Gate, IfMeasure, Program, Seq, Skip
from .channels import NoiseModel

DENSE_MAX_QUBITS = 8


class DenseSimError(ValueError):
    pass


def basis_density(state: BasisState, nqubits: int) -> np.ndarray:
    """Density matrix of a computational basis state, qubit 0 most significant."""
    if len(state.bits) != nqubits:
        raise DenseSimError(f"basis state has {len(state.bits)} bits, program has {nqubits}")
    idx = 0
    for b in state.bits:
        idx = (idx << 1) | b
    rho = np.zeros((2 ** nqubits, 2 ** nqubits), dtype=complex)
    rho[idx, idx] = 1
    return rho


def validate_density(rho, tol=1e-9):
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DenseSimError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise DenseSimError(f"density matrix has trace {np.trace(rho).real}")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -tol:
        raise DenseSimError("density matrix has a negative eigenvalue")
    return rho


def _embed(op: np.ndarray, qubits: tuple, nqubits: int) -> np.ndarray:
    """Lift a 1- or 2-qubit operator to the full register.

    Permutes the target qubits to the front, applies op (x) I, permutes back.
    Works on the 2^n x 2^n matrix level; fine at the dense cap.
    """
    k = len(qubits)
    rest = [q for q in range(nqubits) if q not in qubits]
    perm = list(qubits) + rest
    full = np.kron(op, np.eye(2 ** (nqubits - k), dtype=complex))
    t = full.reshape([2] * (2 * nqubits))
    inv = np.argsort(perm)
    t = t.transpose(list(inv) + [nqubits + i for i in inv])
    return t.reshape(2 ** nqubits, 2 ** nqubits)


def _proj(qubit: int, bit: int, nqubits: int) -> np.ndarray:
    p = np.zeros((2, 2), dtype=complex)
    p[bit, bit] = 1
    return _embed(p, (qubit,), nqubits)


def _run(node, rho, n, noise: NoiseModel | None):
    if isinstance(node, Skip):
        return rho
    if isinstance(node, Seq):
        return _run(node.second, _run(node.first, rho, n, noise), n, noise)
    if isinstance(node, Gate):
        if noise is None:
            u = _embed(node.kind.matrix, node.qubits, n)
            return u @ rho @ u.conj().T
        chan = noise.lookup(node)
        out = np.zeros_like(rho)
        for E in chan.kraus:
            big = _embed(E, node.qubits, n)
            out += big @ rho @ big.conj().T
        return out
    if isinstance(node, IfMeasure):
        p0 = _proj(node.qubit, 0, n)
        p1 = _proj(node.qubit, 1, n)
        r0 = p0 @ rho @ p0
        r1 = p1 @ rho @ p1
        return _run(node.then0, r0, n, noise) + _run(node.else1, r1, n, noise)
    raise DenseSimError(f"unknown node {type(node).__name__}")


def _check_size(program: Program):
    if program.nqubits > DENSE_MAX_QUBITS:
        raise DenseSimError(
            f"dense simulation capped at {DENSE_MAX_QUBITS} qubits, got {program.nqubits}"
        )


def exec_ideal(program: Program, rho_in) -> np.ndarray:
    """Noiseless denotational semantics applied to an input density matrix."""
    _check_size(program)
    if isinstance(rho_in, BasisState):
        rho_in = basis_density(rho_in, program.nqubits)
    return _run(program.body, np.asarray(rho_in, dtype=complex), program.nqubits, None)


def exec_noisy(program: Program, rho_in, noise: NoiseModel) -> np.ndarray:
    """Semantics with every gate replaced by its noisy channel from the model."""
    _check_size(program)
    if isinstance(rho_in, BasisState):
        rho_in = basis_density(rho_in, program.nqubits)
    return _run(program.body, np.asarray(rho_in, dtype=complex), program.nqubits, noise)


def trace_distance(a, b) -> float:
    """(1/2) ||a - b||_1 for Hermitian a, b."""
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    if np.max(np.abs(diff - diff.conj().T)) > 1e-9:
        raise DenseSimError("trace distance expects Hermitian operands")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def exact_error(program: Program, rho_in, noise: NoiseModel) -> float:
    """Trace distance between noisy and ideal outputs on a concrete input."""
    return trace_distance(exec_noisy(program, rho_in, noise), exec_ideal(program, rho_in))


def partial_trace(rho, keep: tuple, nqubits: int) -> np.ndarray:
    """Reduced density matrix on the given qubits, in the order listed."""
    keep = tuple(keep)
    if len(set(keep)) != len(keep) or any(not 0 <= q < nqubits for q in keep):
        raise DenseSimError(f"bad qubit subset {keep}")
    t = np.asarray(rho, dtype=complex).reshape([2] * (2 * nqubits))
    rest = [q for q in range(nqubits) if q not in keep]
    perm = list(keep) + rest
    t = t.transpose(perm + [nqubits + q for q in perm])
    k, r = 2 ** len(keep), 2 ** len(rest)
    t = t.reshape(k, r, k, r)
    return np.trace(t, axis1=1, axis2=3)
