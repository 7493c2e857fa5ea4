import numpy as np
import pytest

from qerr.channels import (
    PAULIS,
    Channel,
    ChannelError,
    HermitianMap,
    NoiseModel,
    NoiseRule,
    bit_flip,
    channel_from_unitary,
    choi_from_superoperator,
    decoherence,
    depolarizing,
    identity_channel,
    parse_noise_model,
    pauli_twirl,
    phase_flip,
)
from qerr.circuit import BUILTIN_GATES, Gate


def _tp_deviation(ch):
    d = ch.dim
    return np.max(np.abs(sum(E.conj().T @ E for E in ch.kraus) - np.eye(d)))


def test_standard_channels_trace_preserving():
    for ch in (bit_flip(0.3), phase_flip(0.7), depolarizing(0.2), decoherence(0.4, 0.3)):
        assert _tp_deviation(ch) < 1e-12


def test_bit_flip_action():
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    out = bit_flip(0.25).apply(rho)
    assert np.allclose(out, [[0.75, 0], [0, 0.25]])


def test_probability_validation():
    with pytest.raises(ChannelError):
        bit_flip(1.5)
    with pytest.raises(ChannelError):
        decoherence(0.8, 0.4)


def test_non_tp_kraus_rejected():
    with pytest.raises(ChannelError):
        Channel((np.eye(2) * 0.9,))


def test_choi_superop_consistency():
    for ch in (bit_flip(0.3), decoherence(0.5, 0.2), channel_from_unitary(BUILTIN_GATES["h"].matrix)):
        assert np.max(np.abs(ch.choi - choi_from_superoperator(ch.superoperator, ch.dim))) < 1e-12
        assert abs(np.trace(ch.choi) - ch.dim) < 1e-12
        assert np.min(np.linalg.eigvalsh(ch.choi)) > -1e-12


def test_superop_applies_like_kraus(rng):
    ch = decoherence(0.3, 0.2)
    rho = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    via_super = (ch.superoperator @ rho.T.reshape(-1)).reshape(2, 2).T
    assert np.allclose(via_super, ch.apply(rho), atol=1e-12)


def test_decoherence_kraus_structure():
    gamma, lam = 0.551, 0.325
    ch = decoherence(gamma, lam)
    s = np.sqrt(1 - gamma - lam)
    e1, e2, e3 = ch.kraus
    assert np.allclose(e1, [[1, 0], [0, s]])
    assert np.allclose(e2, [[0, np.sqrt(gamma)], [0, 0]])
    assert np.allclose(e3, [[0, 0], [0, np.sqrt(lam)]])


def test_twirl_is_pauli_channel():
    ch = pauli_twirl(decoherence(0.551, 0.325))
    gamma = 0.551
    s = np.sqrt(1 - 0.551 - 0.325)
    probs = {}
    for name, p_mat in zip("ixyz", PAULIS):
        probs[name] = sum(abs(np.trace(p_mat.conj().T @ E)) ** 2 / 4 for E in ch.kraus)
    assert abs(probs["x"] - gamma / 4) < 1e-10
    assert abs(probs["y"] - gamma / 4) < 1e-10
    assert abs(probs["z"] - (0.5 - gamma / 4 - s / 2)) < 1e-10
    assert abs(sum(probs.values()) - 1) < 1e-10


def test_twirl_idempotent():
    ch = pauli_twirl(decoherence(0.4, 0.2))
    twice = pauli_twirl(ch)
    assert np.max(np.abs(ch.choi - twice.choi)) < 1e-10


def test_twirl_of_pauli_channel_is_identity_map():
    ch = bit_flip(0.2)
    assert np.max(np.abs(pauli_twirl(ch).choi - ch.choi)) < 1e-10


def test_tensor_identity():
    ext = bit_flip(0.3).tensor_identity()
    assert ext.dim == 4
    rho = np.kron(np.array([[1, 0], [0, 0]]), np.array([[0, 0], [0, 1]])).astype(complex)
    out = ext.apply(rho)
    expect = np.kron(np.array([[0.7, 0], [0, 0.3]]), np.array([[0, 0], [0, 1]]))
    assert np.allclose(out, expect)


def test_compose_order():
    # compose applies the argument first
    x = channel_from_unitary(BUILTIN_GATES["x"].matrix)
    after = bit_flip(0.2).compose(x)
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    assert np.allclose(after.apply(rho), [[0.2, 0], [0, 0.8]])


def test_lookup_rule_order_and_defaults():
    model = parse_noise_model(
        "gate h on q2 : depolarizing(0.01)\n"
        "gate h : bitflip(0.2)\n"
        "default 1 : phaseflip(0.05)\n"
    )
    h2 = Gate(BUILTIN_GATES["h"], (2,))
    h0 = Gate(BUILTIN_GATES["h"], (0,))
    x0 = Gate(BUILTIN_GATES["x"], (0,))
    assert len(model.lookup(h2).kraus) == 4  # depolarizing rule wins
    assert len(model.lookup(h0).kraus) == 2  # name-only rule
    _, noise, _ = model.lookup_parts(x0)
    assert len(noise.kraus) == 2  # default


def test_lookup_noiseless_gate():
    model = NoiseModel()
    g = Gate(BUILTIN_GATES["h"], (0,))
    ch = model.lookup(g)
    assert len(ch.kraus) == 1
    assert np.allclose(ch.kraus[0], BUILTIN_GATES["h"].matrix)


def test_replace_rule():
    model = parse_noise_model("gate x : replace bitflip(1.0)\n")
    g = Gate(BUILTIN_GATES["x"], (0,))
    ch = model.lookup(g)
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    # full replacement: bitflip(1) alone, which equals the x gate here
    assert np.allclose(ch.apply(rho), [[0, 0], [0, 1]])


def test_one_qubit_noise_on_two_qubit_gate():
    model = parse_noise_model("default 2 : bitflip(0.1)\n")
    g = Gate(BUILTIN_GATES["cnot"], (0, 1))
    ch = model.lookup(g)
    assert ch.dim == 4
    assert _tp_deviation(ch) < 1e-10


def test_nm_parse_errors_carry_line():
    try:
        parse_noise_model("default 1 : bitflip(0.1)\ngate x : frobnicate(1)\n")
    except Exception as exc:
        assert "2" in str(exc)
    else:
        pytest.fail("expected a parse error")


def test_nm_kraus_literal():
    model = parse_noise_model("gate z : kraus[[1 0; 0 0], [0 0; 0 1]]\n")
    ch = model.rules[0].channel
    assert len(ch.kraus) == 2
    assert _tp_deviation(ch) < 1e-12


def test_hermitian_map_difference():
    phi = HermitianMap(identity_channel(), bit_flip(0.4))
    rho = np.array([[1, 0], [0, 0]], dtype=complex)
    assert np.allclose(phi.apply(rho), [[0.4, 0], [0, -0.4]])
    assert np.max(np.abs(phi.choi.conj().T - phi.choi)) < 1e-12
