"""Shared randomized-instance builders for the test suite."""

import numpy as np
import pytest

from qerr.channels import Channel, NoiseModel, NoiseRule


def random_program_text(rng, nqubits=None, max_gates=30, allow_if=True):
    """Random program source: 1q/2q builtin gates, optionally one measurement."""
    n = int(nqubits if nqubits is not None else rng.integers(2, 9))
    ngates = int(rng.integers(3, max_gates + 1))
    lines = [f"qubits {n}"]
    for _ in range(ngates):
        if rng.random() < 0.55 or n < 2:
            lines.append(f"{rng.choice(['h', 'x', 'y', 'z'])} q{rng.integers(n)}")
        else:
            a, b = rng.choice(n, 2, replace=False)
            lines.append(f"{rng.choice(['cnot', 'cz', 'swap'])} q{a} q{b}")
    if allow_if and rng.random() < 0.4 and ngates > 4:
        k = int(rng.integers(2, ngates))
        q = int(rng.integers(n))
        g0 = f"{rng.choice(['x', 'z', 'h'])} q{int(rng.integers(n))}"
        g1 = f"{rng.choice(['x', 'z', 'h'])} q{int(rng.integers(n))}"
        lines.insert(k + 1, f"if q{q} {{ {g0} }} else {{ {g1} }}")
    return "\n".join(lines) + "\n", n


def random_1q_channel(rng):
    """Random small-noise 1-qubit channel (error norm well under 0.05)."""
    kind = rng.integers(4)
    if kind == 0:
        return Channel(_mix_kraus(rng, 2))
    from qerr.channels import bit_flip, depolarizing, phase_flip

    p = float(rng.uniform(0, 0.03))
    return [bit_flip, phase_flip, depolarizing][kind - 1](p)


def random_2q_channel(rng):
    return Channel(_mix_kraus(rng, 4))


def _mix_kraus(rng, d):
    """Kraus pair {sqrt(1-p) U, sqrt(p) V} with U near identity: always TP."""
    p = float(rng.uniform(0, 5e-4))
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (h + h.conj().T) / 2
    theta = float(rng.uniform(0, 0.02))
    w, v = np.linalg.eigh(h)
    u = v @ np.diag(np.exp(-1j * theta * w / max(1e-12, np.max(np.abs(w))))) @ v.conj().T
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    vq, _ = np.linalg.qr(g)
    return (np.sqrt(1 - p) * u, np.sqrt(p) * vq)


def random_noise_model(rng, with_2q_kraus=False):
    rules = []
    if with_2q_kraus:
        rules.append(NoiseRule("cnot", None, random_2q_channel(rng)))
    defaults = {1: random_1q_channel(rng), 2: random_1q_channel(rng)}
    return NoiseModel(tuple(rules), defaults)


@pytest.fixture
def rng():
    return np.random.default_rng(2026)
