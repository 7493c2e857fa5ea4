"""Compositional error bounds with machine-checkable derivations.

``analyze`` folds over a program's statements, carrying an approximate ideal
state (the MPS) plus its accumulated truncation budget delta, and charges
each gate a certified bound on the error its noise can introduce given the
local predicate state.  Sequencing adds bounds; a measurement takes the
worse branch and pays for the predicate's slack via (1 - delta) e + delta.

The result is a derivation tree whose every claim can be re-verified by
``check`` without re-running the solver: gate nodes carry the dual SDP
certificate, measurement nodes carry the combination arithmetic, and the
delta bookkeeping chains from 0 at the root.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    BasisState,
    BranchCapExceeded,
    Gate,
    IfMeasure,
    Program,
    flatten,
)
from .channels import HermitianMap, NoiseModel, identity_channel
from .diamond import (
    DualCertificate,
    _channel_key,
    constrained_bound,
    difference_map,
    trace_out_second,
    unconstrained_bound,
    verify_certificate,
    worst_case_bound,
)
from .mps import MpsState

PROB_FLOOR = 1e-12
DERIV_VERSION = 1


class CheckError(ValueError):
    pass


# -- derivation nodes ------------------------------------------------------


@dataclass
class DSkip:
    eps: float = 0.0


@dataclass
class DGate:
    name: str
    qubits: tuple
    gate_eps: float
    eps: float  # cumulative from this statement on
    delta_in: float
    delta_out: float
    rho: np.ndarray | None  # predicate fed to the SDP (None for noiseless)
    cert: DualCertificate | None
    reduced: bool  # True when the bound was taken on the noise register alone
    rest: object


@dataclass
class DMeas:
    qubit: int
    delta: float
    eps: float
    branches: tuple  # ((prob, node-or-None), (prob, node-or-None))


@dataclass
class DWeaken:
    eps: float
    child: object


# -- analysis --------------------------------------------------------------


@dataclass
class Report:
    epsilon: float
    delta: float
    worst_case: float
    gate_count: int
    derivation: object
    per_gate: list
    timings: dict
    flags: list = field(default_factory=list)


def _gate_bound(g: Gate, model: NoiseModel, rho_local, delta, ucache):
    """Certified error bound for one gate at the given local predicate.

    Returns (eps, cert, reduced, rho_pred).  When the noise is attached
    after the ideal gate, the bound is taken for (id - noise) on the noise's
    own register with the predicate evolved through the gate; this is exact
    for the diamond norm and keeps single-qubit noise in d=2.
    """
    ideal, noise, replace = model.lookup_parts(g)
    if noise is None:
        return 0.0, None, False, None
    if replace:
        phi = HermitianMap(ideal, model.lookup(g))
        rho_pred = rho_local
        reduced = False
    else:
        phi = HermitianMap(identity_channel(noise.arity), noise)
        u = g.kind.matrix
        rho_pred = u @ rho_local @ u.conj().T
        if noise.arity == 1 and g.kind.arity == 2:
            rho_pred = trace_out_second(rho_pred, 2)
        reduced = True
    fro = float(np.linalg.norm(rho_pred))
    if fro * (fro - delta) <= 0:
        ck = _channel_key(phi.ideal, phi.actual)
        if ck not in ucache:
            ucache[ck] = unconstrained_bound(phi)
        cert = ucache[ck]
    else:
        cert = constrained_bound(phi, rho_pred, delta)
    return cert.epsilon, cert, reduced, rho_pred


def analyze(program: Program, rho_in: BasisState, model: NoiseModel,
            width: int, branch_cap: int = 64) -> Report:
    t_wall = time.perf_counter()
    state = MpsState.from_basis(rho_in, width)
    ucache: dict = {}
    per_gate: list = []
    flags: list = []
    timings = {"tn_ms": 0.0, "sdp_ms": 0.0, "logic_ms": 0.0}
    ctx = {"leaves": 0}

    def walk(stmts, st: MpsState):
        if not stmts:
            ctx["leaves"] += 1
            if ctx["leaves"] > branch_cap:
                raise BranchCapExceeded(
                    f"branch count exceeds cap {branch_cap}; raise --branch-cap to proceed"
                )
            return DSkip()
        s, rest = stmts[0], stmts[1:]
        if isinstance(s, Gate):
            delta_in = st.delta
            t0 = time.perf_counter()
            rho_local = st.local_density(s.qubits)
            timings["tn_ms"] += 1000 * (time.perf_counter() - t0)
            t0 = time.perf_counter()
            eps_g, cert, reduced, rho_pred = _gate_bound(s, model, rho_local, delta_in, ucache)
            timings["sdp_ms"] += 1000 * (time.perf_counter() - t0)
            t0 = time.perf_counter()
            st.apply_gate(s)
            timings["tn_ms"] += 1000 * (time.perf_counter() - t0)
            delta_out = st.delta
            node_rest = walk(rest, st)
            per_gate.append({
                "gate": s.kind.name,
                "qubits": list(s.qubits),
                "epsilon": eps_g,
                "delta": delta_out,
            })
            return DGate(s.kind.name, tuple(s.qubits), eps_g, eps_g + node_rest.eps,
                         delta_in, delta_out, rho_pred, cert, reduced, node_rest)
        if isinstance(s, IfMeasure):
            delta = st.delta
            branches = []
            eps_list = []
            for bit, body in ((0, s.then0), (1, s.else1)):
                stb = st.copy()
                prob = stb.collapse(s.qubit, bit)
                if prob < PROB_FLOOR:
                    flags.append(f"branch q{s.qubit}={bit} has probability ~0, skipped")
                    branches.append((prob, None))
                    continue
                child = walk(flatten(body) + rest, stb)
                branches.append((prob, child))
                eps_list.append(child.eps)
            eps = meas_eps(delta, eps_list)
            return DMeas(s.qubit, delta, eps, tuple(branches))
        raise TypeError(f"cannot analyze {type(s).__name__}")

    t0 = time.perf_counter()
    root = walk(flatten(program.body), state)
    timings["logic_ms"] = (
        1000 * (time.perf_counter() - t0) - timings["tn_ms"] - timings["sdp_ms"]
    )
    wc = worst_case_bound(program, model, cache={k: v.epsilon for k, v in ucache.items()})
    timings["wall_ms"] = 1000 * (time.perf_counter() - t_wall)
    return Report(root.eps, state.delta if not _has_meas(root) else _max_delta(root),
                  wc, len(per_gate), root, list(reversed(per_gate)), timings, flags)


def meas_eps(delta: float, branch_eps: list) -> float:
    """Measurement combination: pay delta for the predicate slack, then the
    worse branch, everything clamped into [0, 1]."""
    eb = min(1.0, max(branch_eps, default=0.0))
    return min(1.0, (1.0 - delta) * eb + delta)


def _has_meas(node):
    while isinstance(node, DGate):
        node = node.rest
    return isinstance(node, DMeas)


def _max_delta(node):
    if isinstance(node, DSkip):
        return 0.0
    if isinstance(node, DGate):
        return max(node.delta_out, _max_delta(node.rest))
    if isinstance(node, DMeas):
        return max([node.delta] + [_max_delta(c) for _, c in node.branches if c is not None])
    if isinstance(node, DWeaken):
        return _max_delta(node.child)
    return 0.0


# -- checking --------------------------------------------------------------


def check(deriv, program: Program, model: NoiseModel, tol: float = 1e-6):
    """Re-verify a derivation against a program and noise model.

    Rebuilds each gate's difference map from the program and model, checks
    the stored dual certificates for feasibility and arithmetic, re-chains
    the delta accounting from 0, and re-evaluates every combination rule.
    Returns (True, None) or (False, reason); never re-runs the solver or
    the tensor network.
    """
    try:
        _check_stmts(flatten(program.body), deriv, model, 0.0, tol)
    except CheckError as exc:
        return False, str(exc)
    except (ValueError, TypeError, KeyError, IndexError, AttributeError) as exc:
        return False, f"malformed derivation: {exc}"
    return True, None


def _check_stmts(stmts, node, model, delta, tol):
    if isinstance(node, DWeaken):
        inner = _check_stmts(stmts, node.child, model, delta, tol)
        if node.eps < inner - tol:
            raise CheckError("weaken decreases the bound")
        return node.eps
    if not stmts:
        if not isinstance(node, DSkip):
            raise CheckError(f"expected end of statements, found {type(node).__name__}")
        if abs(node.eps) > tol:
            raise CheckError("skip rule must claim zero error")
        return 0.0
    s = stmts[0]
    if isinstance(s, Gate):
        if not isinstance(node, DGate):
            raise CheckError(f"expected gate rule for {s.kind.name}, found {type(node).__name__}")
        if node.name != s.kind.name or tuple(node.qubits) != tuple(s.qubits):
            raise CheckError(f"gate rule mismatch: {node.name}{node.qubits} vs program")
        if abs(node.delta_in - delta) > tol:
            raise CheckError("delta chain broken at gate rule")
        if node.delta_out < node.delta_in - tol:
            raise CheckError("delta decreases across a gate")
        _check_gate_cert(s, node, model, tol)
        rest_eps = _check_stmts(stmts[1:], node.rest, model, node.delta_out, tol)
        if abs(node.eps - (node.gate_eps + rest_eps)) > tol:
            raise CheckError("sequencing arithmetic broken at gate rule")
        return node.eps
    if isinstance(s, IfMeasure):
        if not isinstance(node, DMeas):
            raise CheckError(f"expected measurement rule, found {type(node).__name__}")
        if node.qubit != s.qubit:
            raise CheckError("measurement rule qubit mismatch")
        if abs(node.delta - delta) > tol:
            raise CheckError("delta chain broken at measurement rule")
        eps_list = []
        for bit, body in ((0, s.then0), (1, s.else1)):
            prob, child = node.branches[bit]
            if child is None:
                if prob >= PROB_FLOOR:
                    raise CheckError("non-negligible branch has no derivation")
                continue
            eps_list.append(
                _check_stmts(flatten(body) + stmts[1:], child, model, delta, tol)
            )
        if abs(node.eps - meas_eps(delta, eps_list)) > tol:
            raise CheckError("measurement arithmetic broken")
        return node.eps
    raise CheckError(f"cannot check statement {type(s).__name__}")


def _check_gate_cert(g: Gate, node: DGate, model: NoiseModel, tol):
    ideal, noise, replace = model.lookup_parts(g)
    if noise is None:
        if abs(node.gate_eps) > tol or node.cert is not None:
            raise CheckError(f"noiseless gate {g.kind.name} must cost zero")
        return
    if node.cert is None or node.rho is None:
        raise CheckError(f"gate {g.kind.name} is missing its certificate")
    if node.reduced:
        if replace:
            raise CheckError("reduced bound is not valid for a replacement channel")
        phi = HermitianMap(identity_channel(noise.arity), noise)
    else:
        phi = difference_map(g, model)
    cert = node.cert
    rho = node.rho
    fro = float(np.linalg.norm(rho))
    b = fro * (fro - node.delta_in)
    if cert.Q is not None:
        # a certificate without Q is the unconstrained (weaker, still sound)
        # bound; one with Q must match the recorded predicate exactly
        if abs(cert.b - b) > tol:
            raise CheckError("certificate b does not match the recorded predicate")
        if np.max(np.abs(cert.Q - rho.T)) > tol:
            raise CheckError("certificate Q does not match the recorded predicate")
    if not verify_certificate(cert, phi.choi, tol):
        raise CheckError(f"dual certificate for gate {g.kind.name} fails verification")
    if abs(node.gate_eps - cert.epsilon) > tol:
        raise CheckError("gate bound does not match its certificate")


# -- model comparison ------------------------------------------------------


def compare_models(program, rho_in, models, width, branch_cap=64):
    """Analyze under several noise models; returns (name, report) sorted by
    bound, tightest first.  ``models`` is a list of (name, NoiseModel)."""
    import concurrent.futures
    import os

    workers = max(1, int(os.environ.get("QERR_THREADS", "4")))
    results = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futs = {
            pool.submit(analyze, program, rho_in, m, width, branch_cap): name
            for name, m in models
        }
        for fut in concurrent.futures.as_completed(futs):
            results.append((futs[fut], fut.result()))
    results.sort(key=lambda kv: kv[1].epsilon)
    return results


compare_noise_models = compare_models


# -- serialization ---------------------------------------------------------


def _node_to_json(node):
    if isinstance(node, DSkip):
        return {"kind": "skip", "eps": node.eps}
    if isinstance(node, DGate):
        out = {
            "kind": "gate",
            "name": node.name,
            "qubits": list(node.qubits),
            "gate_eps": node.gate_eps,
            "eps": node.eps,
            "delta_in": node.delta_in,
            "delta_out": node.delta_out,
            "reduced": node.reduced,
            "rest": _node_to_json(node.rest),
        }
        if node.rho is not None:
            out["rho_re"] = node.rho.real.tolist()
            out["rho_im"] = node.rho.imag.tolist()
        if node.cert is not None:
            out["cert"] = node.cert.to_json()
        return out
    if isinstance(node, DMeas):
        return {
            "kind": "meas",
            "qubit": node.qubit,
            "delta": node.delta,
            "eps": node.eps,
            "branches": [
                {"prob": p, "child": _node_to_json(c) if c is not None else None}
                for p, c in node.branches
            ],
        }
    if isinstance(node, DWeaken):
        return {"kind": "weaken", "eps": node.eps, "child": _node_to_json(node.child)}
    raise TypeError(type(node).__name__)


def _node_from_json(data):
    kind = data["kind"]
    if kind == "skip":
        return DSkip(float(data["eps"]))
    if kind == "gate":
        rho = None
        if "rho_re" in data:
            rho = np.array(data["rho_re"]) + 1j * np.array(data["rho_im"])
        cert = DualCertificate.from_json(data["cert"]) if "cert" in data else None
        return DGate(
            data["name"], tuple(data["qubits"]), float(data["gate_eps"]),
            float(data["eps"]), float(data["delta_in"]), float(data["delta_out"]),
            rho, cert, bool(data["reduced"]), _node_from_json(data["rest"]),
        )
    if kind == "meas":
        branches = tuple(
            (float(b["prob"]), _node_from_json(b["child"]) if b["child"] is not None else None)
            for b in data["branches"]
        )
        return DMeas(int(data["qubit"]), float(data["delta"]), float(data["eps"]), branches)
    if kind == "weaken":
        return DWeaken(float(data["eps"]), _node_from_json(data["child"]))
    raise CheckError(f"unknown derivation node kind {kind!r}")


def derivation_to_json(report: Report, program_text: str | None = None) -> str:
    doc = {
        "version": DERIV_VERSION,
        "epsilon": report.epsilon,
        "delta": report.delta,
        "root": _node_to_json(report.derivation),
    }
    if program_text is not None:
        doc["program"] = program_text
    return json.dumps(doc)


def derivation_from_json(text: str):
    doc = json.loads(text)
    if doc.get("version") != DERIV_VERSION:
        raise CheckError(f"unsupported derivation version {doc.get('version')!r}")
    return _node_from_json(doc["root"])
