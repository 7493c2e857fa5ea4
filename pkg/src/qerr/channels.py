"""Quantum channels in Kraus / superoperator / Choi form, noise models,
and the Pauli-twirling transformation.

Conventions (these matter for everything downstream):

* superoperators use column-stacking, ``vec(E rho E^+) = (conj(E) kron E) vec(rho)``;
* the Choi matrix is ``J(Phi) = sum_ij |i><j| (x) Phi(|i><j|)`` (input copy
  on the first tensor factor, unnormalized, trace d for a channel).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .circuit import BUILTIN_GATES, CircuitError, Gate, parse_complex

TP_TOL = 1e-9

_I2 = np.eye(2, dtype=complex)
_X = BUILTIN_GATES["x"].matrix
_Y = BUILTIN_GATES["y"].matrix
_Z = BUILTIN_GATES["z"].matrix
PAULIS = (_I2, _X, _Y, _Z)


class ChannelError(ValueError):
    pass


def _vec(m):
    return m.T.reshape(-1)


def _unvec(v, d):
    return v.reshape(d, d).T


@dataclass(frozen=True)
class Channel:
    """A CPTP map given by Kraus operators; superoperator and Choi are cached."""

    kraus: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(E, dtype=complex) for E in self.kraus)
        if not ops:
            raise ChannelError("channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if d not in (2, 4) or any(E.shape != (d, d) for E in ops):
            raise ChannelError(f"Kraus operators must all be {d}x{d} with d in {{2,4}}")
        dev = np.max(np.abs(sum(E.conj().T @ E for E in ops) - np.eye(d)))
        if dev > TP_TOL:
            raise ChannelError(f"channel is not trace preserving (deviation {dev:.2e})")
        for E in ops:
            E.setflags(write=False)
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self):
        return self.kraus[0].shape[0]

    @property
    def arity(self):
        return 1 if self.dim == 2 else 2

    @property
    def superoperator(self):
        s = getattr(self, "_super", None)
        if s is None:
            s = sum(np.kron(E.conj(), E) for E in self.kraus)
            object.__setattr__(self, "_super", s)
        return s

    @property
    def choi(self):
        j = getattr(self, "_choi", None)
        if j is None:
            j = choi_from_kraus(self.kraus)
            object.__setattr__(self, "_choi", j)
        return j

    def apply(self, rho):
        return sum(E @ rho @ E.conj().T for E in self.kraus)

    def compose(self, other):
        """Channel applying ``other`` first, then this one."""
        return Channel(tuple(A @ B for A in self.kraus for B in other.kraus))

    def tensor_identity(self):
        """Extend a 1-qubit channel to 2 qubits, acting on the first qubit."""
        if self.dim != 2:
            raise ChannelError("tensor extension only defined for 1-qubit channels")
        return Channel(tuple(np.kron(E, _I2) for E in self.kraus))

    def compress(self, tol=1e-12):
        """Minimal-rank Kraus set recovered from the Choi eigendecomposition."""
        d = self.dim
        w, v = np.linalg.eigh(self.choi)
        ops = []
        for lam, vec in zip(w, v.T):
            if lam > tol:
                # Choi eigenvector |i>|out> column-major in (input, output).
                ops.append(np.sqrt(lam) * vec.reshape(d, d).T)
        return Channel(tuple(ops))


def choi_from_kraus(kraus):
    d = kraus[0].shape[0]
    omega = np.zeros((d * d, 1), dtype=complex)
    omega[:: d + 1] = 1  # sum_i |i>|i>
    j = np.zeros((d * d, d * d), dtype=complex)
    for E in kraus:
        v = (np.kron(np.eye(d), E) @ omega).reshape(-1)
        j += np.outer(v, v.conj())
    return j


def choi_from_superoperator(S, d):
    """Choi matrix of the (not necessarily CP) map with superoperator S."""
    j = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for k in range(d):
            eij = np.zeros((d, d), dtype=complex)
            eij[i, k] = 1
            out = _unvec(S @ _vec(eij), d)
            j += np.kron(eij, out)
    return j


@dataclass(frozen=True)
class HermitianMap:
    """Difference of two channels, Phi = ideal - actual."""

    ideal: Channel
    actual: Channel

    def __post_init__(self):
        if self.ideal.dim != self.actual.dim:
            raise ChannelError("channel dimension mismatch in map difference")

    @property
    def dim(self):
        return self.ideal.dim

    @property
    def superoperator(self):
        return self.ideal.superoperator - self.actual.superoperator

    @property
    def choi(self):
        return self.ideal.choi - self.actual.choi

    def apply(self, rho):
        return self.ideal.apply(rho) - self.actual.apply(rho)


# ---------------------------------------------------------------------------
# Channel constructors
# ---------------------------------------------------------------------------


def channel_from_unitary(U):
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    if np.max(np.abs(U.conj().T @ U - np.eye(d))) > 1e-10:
        raise ChannelError("matrix is not unitary")
    return Channel((U,))


def identity_channel(arity=1):
    return Channel((np.eye(2 ** arity, dtype=complex),))


def _check_prob(p, name="p"):
    if not 0 <= p <= 1:
        raise ChannelError(f"{name}={p} outside [0, 1]")


def bit_flip(p):
    _check_prob(p)
    return Channel((np.sqrt(1 - p) * _I2, np.sqrt(p) * _X))


def phase_flip(p):
    _check_prob(p)
    return Channel((np.sqrt(1 - p) * _I2, np.sqrt(p) * _Z))


def depolarizing(p):
    _check_prob(p)
    return Channel(
        (np.sqrt(1 - p) * _I2, np.sqrt(p / 3) * _X, np.sqrt(p / 3) * _Y, np.sqrt(p / 3) * _Z)
    )


def decoherence(gamma, lam):
    """Combined amplitude (gamma) and phase (lam) damping.

    The Kraus set is the trace-preserving variant: the I and Z weights in the
    first operator are (1+s)/2 and (1-s)/2 with s = sqrt(1-gamma-lam), and the
    third operator is sqrt(lam)/2 (I - Z).  Trace preservation is re-checked
    numerically on construction.
    """
    if gamma < 0 or lam < 0 or gamma + lam > 1:
        raise ChannelError(f"need gamma, lam >= 0 and gamma+lam <= 1, got {gamma}, {lam}")
    s = np.sqrt(1 - gamma - lam)
    e1 = (1 + s) / 2 * _I2 + (1 - s) / 2 * _Z
    e2 = np.sqrt(gamma) / 2 * _X + 1j * np.sqrt(gamma) / 2 * _Y
    e3 = np.sqrt(lam) / 2 * _I2 - np.sqrt(lam) / 2 * _Z
    return Channel((e1, e2, e3))


def pauli_twirl(n):
    """Average of P . n . P over the four Paulis; yields a Pauli channel."""
    if n.dim != 2:
        raise ChannelError("pauli_twirl is defined for 1-qubit channels")
    ops = tuple(P @ E @ P / 2 for P in PAULIS for E in n.kraus)
    return Channel(ops).compress()


# ---------------------------------------------------------------------------
# Noise models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseRule:
    gate_name: str  # gate mnemonic or "*"
    qubits: tuple | None  # exact qubit tuple, or None for any
    channel: Channel
    replace: bool = False  # full replacement instead of noise-after-ideal


@dataclass(frozen=True)
class NoiseModel:
    """Ordered gate -> noise rules; first match wins."""

    rules: tuple = ()
    defaults: dict = field(default_factory=dict)  # arity -> Channel

    def lookup(self, g: Gate) -> Channel:
        """Noisy channel for a gate node (ideal channel if nothing matches)."""
        ideal, noise, replace = self.lookup_parts(g)
        if noise is None:
            return ideal
        return _attach(noise, ideal, g, replace)

    def lookup_parts(self, g: Gate):
        """(ideal, noise, replace) triple for a gate; noise is None when the
        gate is noiseless and is returned before any tensor extension."""
        ideal = channel_from_unitary(g.kind.matrix)
        for rule in self.rules:
            if rule.gate_name not in ("*", g.kind.name):
                continue
            if rule.qubits is not None and rule.qubits != tuple(g.qubits):
                continue
            return ideal, rule.channel, rule.replace
        default = self.defaults.get(g.kind.arity)
        if default is not None:
            return ideal, default, False
        return ideal, None, False


def _attach(noise, ideal, g, replace):
    if noise.arity == 1 and g.kind.arity == 2:
        noise = noise.tensor_identity()  # acts on the gate's first qubit
    if noise.arity != g.kind.arity:
        raise ChannelError(
            f"noise rule dimension mismatch for gate {g.kind.name} (arity {g.kind.arity})"
        )
    return noise if replace else noise.compose(ideal)


# ---------------------------------------------------------------------------
# Noise-model file format (.nm)
# ---------------------------------------------------------------------------
#
#   gate x : bitflip(1e-4)
#   gate h on q2 : depolarizing(0.01)
#   gate id : replace twirl(decoherence(0.551, 0.325))
#   default 1 : bitflip(1e-4)
#
# Channel expressions: bitflip(p), phaseflip(p), depolarizing(p),
# decoherence(g,l), kraus[[a b; c d], ...], twirl(expr).

_RULE_RE = re.compile(r"gate\s+([A-Za-z_*]\w*)\s*(?:on\s+((?:q\d+\s*)+))?:\s*(.*)$")
_DEFAULT_RE = re.compile(r"default\s+([12])\s*:\s*(.*)$")


def parse_noise_model(text):
    rules = []
    defaults = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if m:
            name, qubit_txt, expr = m.groups()
            qubits = tuple(int(q[1:]) for q in qubit_txt.split()) if qubit_txt else None
            replace = False
            if expr.startswith("replace"):
                replace = True
                expr = expr[len("replace") :].strip()
            try:
                chan = _parse_channel_expr(expr)
            except (ChannelError, CircuitError) as exc:
                raise CircuitError(f"{exc}", lineno) from None
            rules.append(NoiseRule(name, qubits, chan, replace))
            continue
        m = _DEFAULT_RE.match(line)
        if m:
            try:
                defaults[int(m.group(1))] = _parse_channel_expr(m.group(2))
            except (ChannelError, CircuitError) as exc:
                raise CircuitError(f"{exc}", lineno) from None
            continue
        raise CircuitError("malformed noise-model line", lineno)
    return NoiseModel(tuple(rules), defaults)


_FUNCS = {
    "bitflip": bit_flip,
    "phaseflip": phase_flip,
    "depolarizing": depolarizing,
    "decoherence": decoherence,
}


def _parse_channel_expr(expr):
    expr = expr.strip()
    m = re.fullmatch(r"twirl\s*\((.*)\)", expr, re.S)
    if m:
        return pauli_twirl(_parse_channel_expr(m.group(1)))
    m = re.fullmatch(r"(\w+)\s*\(([^()]*)\)", expr)
    if m and m.group(1) in _FUNCS:
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
        return _FUNCS[m.group(1)](*args)
    m = re.fullmatch(r"kraus\s*\[(.*)\]\s*", expr, re.S)
    if m:
        return Channel(tuple(_parse_matrix(t) for t in _split_matrices(m.group(1))))
    raise ChannelError(f"unrecognized channel expression {expr!r}")


def _split_matrices(body):
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "[":
            depth += 1
            if depth == 1:
                cur = []
                continue
        elif ch == "]":
            depth -= 1
            if depth == 0:
                parts.append("".join(cur))
                continue
        if depth >= 1:
            cur.append(ch)
    if depth != 0 or not parts:
        raise ChannelError("malformed kraus[...] expression")
    return parts


def _parse_matrix(text):
    rows = [r.split() for r in text.split(";")]
    return np.array([[parse_complex(e) for e in row] for row in rows], dtype=complex)
