import copy
import json

import numpy as np
import pytest

from qerr.channels import parse_noise_model
from qerr.circuit import BasisState, parse_program
from qerr.densesim import exact_error
from qerr.logic import (
    DGate,
    DMeas,
    DSkip,
    analyze,
    check,
    compare_noise_models,
    derivation_from_json,
    derivation_to_json,
    meas_eps,
)

from conftest import random_noise_model, random_program_text

GHZ = "qubits 2\nh q0\ncnot q0 q1\n"
BITFLIP = "default 1 : bitflip(0.01)\ndefault 2 : bitflip(0.01)\n"


def _analyze(src, nm_text, w=8):
    p = parse_program(src)
    model = parse_noise_model(nm_text)
    rep = analyze(p, BasisState((0,) * p.nqubits), model, w)
    return p, model, rep


def test_ghz_bound_is_tight():
    p, model, rep = _analyze(GHZ, BITFLIP, w=2)
    ex = exact_error(p, BasisState((0, 0)), model)
    # bit flip is free on |+>, and costs exactly p on the Bell state
    assert abs(rep.epsilon - ex) < 1e-6
    assert rep.delta == 0.0
    assert rep.epsilon < rep.worst_case


def test_noiseless_program_costs_nothing():
    p, model, rep = _analyze(GHZ, "", w=2)
    assert rep.epsilon < 1e-12
    assert rep.worst_case < 1e-12


def test_epsilon_decreases_with_width():
    src = "qubits 4\nh q0\ncnot q0 q1\ncnot q1 q2\ncnot q2 q3\n"
    eps = {}
    for w in (1, 4):
        _, _, rep = _analyze(src, BITFLIP, w=w)
        eps[w] = rep.epsilon
    assert eps[4] <= eps[1] + 1e-9


def test_meas_eps_formula():
    assert meas_eps(0.0, [0.2, 0.1]) == pytest.approx(0.2)
    assert meas_eps(0.3, [0.5]) == pytest.approx(0.7 * 0.5 + 0.3)
    assert meas_eps(0.0, []) == 0.0
    assert meas_eps(1.5, [0.4]) == 1.0  # clamped


def test_branch_program_sound():
    src = "qubits 3\nh q0\ncnot q0 q1\nif q1 { x q2 } else { z q0 }\nh q2\n"
    p, model, rep = _analyze(src, BITFLIP)
    ex = exact_error(p, BasisState((0, 0, 0)), model)
    assert rep.epsilon + 1e-6 >= ex
    assert isinstance(rep.derivation, DGate)


def test_zero_probability_branch_flagged():
    # q0 is never |1> here, so the else branch is dead
    src = "qubits 2\nif q0 { x q1 } else { h q1 }\n"
    p, model, rep = _analyze(src, BITFLIP)
    assert any("q0=1" in f for f in rep.flags)


def test_check_accepts_engine_output(rng):
    for _ in range(10):
        src, n = random_program_text(rng, max_gates=12)
        p = parse_program(src)
        model = random_noise_model(rng)
        rep = analyze(p, BasisState((0,) * n), model, 4)
        ok, reason = check(rep.derivation, p, model)
        assert ok, reason


def test_check_survives_json_round_trip():
    p, model, rep = _analyze(GHZ, BITFLIP, w=2)
    deriv = derivation_from_json(derivation_to_json(rep))
    ok, reason = check(deriv, p, model)
    assert ok, reason


def test_check_rejects_wrong_program():
    p, model, rep = _analyze(GHZ, BITFLIP, w=2)
    other = parse_program("qubits 2\nh q0\ncz q0 q1\n")
    ok, _ = check(rep.derivation, other, model)
    assert not ok


def test_check_rejects_wrong_model():
    p, model, rep = _analyze(GHZ, BITFLIP, w=2)
    other = parse_noise_model("default 1 : bitflip(0.05)\ndefault 2 : bitflip(0.05)\n")
    ok, _ = check(rep.derivation, p, other)
    assert not ok


def _tamper(doc, path, value):
    doc = copy.deepcopy(doc)
    node = doc
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return doc


def test_check_rejects_field_tampers():
    src = "qubits 3\nh q0\ncnot q0 q1\nif q1 { x q2 } else { z q0 }\n"
    p, model, rep = _analyze(src, BITFLIP)
    doc = json.loads(derivation_to_json(rep))
    root = doc["root"]
    tampers = [
        (["root", "eps"], root["eps"] * 0.5),
        (["root", "gate_eps"], root["gate_eps"] + 0.05),
        (["root", "delta_in"], 0.2),
        (["root", "delta_out"], root["delta_in"] - 0.05),
        (["root", "kind"], "skip"),
        (["root", "cert", "y"], root["cert"]["y"] + 0.05),
        (["root", "cert", "epsilon"], root["cert"]["epsilon"] + 0.05),
        (["root", "rest", "kind"], "skip"),
    ]
    for path, value in tampers:
        bad = derivation_from_json(json.dumps(_tamper(doc, path, value)))
        ok, _ = check(bad, p, model)
        assert not ok, f"tamper {path} accepted"


def test_compare_ranks_by_epsilon():
    p = parse_program(GHZ)
    models = [
        ("loud", parse_noise_model("default 1 : depolarizing(0.05)\ndefault 2 : depolarizing(0.05)\n")),
        ("quiet", parse_noise_model("default 1 : depolarizing(0.001)\ndefault 2 : depolarizing(0.001)\n")),
    ]
    ranked = compare_noise_models(p, BasisState((0, 0)), models, 2)
    assert [name for name, _ in ranked] == ["quiet", "loud"]


def test_per_gate_report_shape():
    p, model, rep = _analyze(GHZ, BITFLIP, w=2)
    assert rep.gate_count == 2
    assert len(rep.per_gate) == 2
    assert {e["gate"] for e in rep.per_gate} == {"h", "cnot"}
    for key in ("tn_ms", "sdp_ms", "logic_ms", "wall_ms"):
        assert key in rep.timings
