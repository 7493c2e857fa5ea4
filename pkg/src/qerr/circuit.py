"""Quantum program AST, the ``.qc`` text format, and structural utilities.

Programs are straight-line gate sequences plus single-qubit measurement
branches::

    qubits 2
    h q0
    cnot q0 q1
    if q1 { x q0 } else { z q0 }

Statements are separated by newlines or ``;``.  Custom gates are declared
in the header as row-major complex matrices, e.g.::

    gate rz7 1 [ 0.995-0.0998i 0 ; 0 0.995+0.0998i ]

All AST nodes are immutable and safe to share.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

UNITARY_TOL = 1e-10


class CircuitError(ValueError):
    """Syntax or validation error in a circuit; carries line/column."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}" + (f", col {col}" if col is not None else "") + f": {message}"
        super().__init__(message)


@dataclass(frozen=True)
class GateKind:
    """A named k-qubit unitary (k in {1, 2})."""

    name: str
    arity: int
    matrix: np.ndarray = field(compare=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2 ** self.arity
        if self.arity not in (1, 2) or m.shape != (d, d):
            raise CircuitError(f"gate {self.name}: expected {d}x{d} matrix for arity {self.arity}")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(d)))
        if dev > UNITARY_TOL:
            raise CircuitError(f"gate {self.name}: matrix not unitary (deviation {dev:.2e})")
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)


def _k(name, arity, rows):
    return GateKind(name, arity, np.array(rows, dtype=complex))


_s = 1 / np.sqrt(2)
BUILTIN_GATES = {
    g.name: g
    for g in [
        _k("id", 1, [[1, 0], [0, 1]]),
        _k("x", 1, [[0, 1], [1, 0]]),
        _k("y", 1, [[0, -1j], [1j, 0]]),
        _k("z", 1, [[1, 0], [0, -1]]),
        _k("h", 1, [[_s, _s], [_s, -_s]]),
        _k("cnot", 2, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
        _k("cz", 2, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]]),
        _k("swap", 2, [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
    ]
}


class Node:
    """Base class for AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Skip(Node):
    pass


@dataclass(frozen=True)
class Gate(Node):
    kind: GateKind
    qubits: tuple


@dataclass(frozen=True)
class Seq(Node):
    first: Node
    second: Node


@dataclass(frozen=True)
class IfMeasure(Node):
    qubit: int
    then0: Node
    else1: Node


@dataclass(frozen=True)
class Program:
    body: Node
    nqubits: int
    gate_defs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _validate(self.body, self.nqubits)


@dataclass(frozen=True)
class BasisState:
    """Computational-basis input label, one bit per qubit."""

    bits: tuple

    @classmethod
    def from_string(cls, s):
        if not re.fullmatch(r"[01]+", s):
            raise CircuitError(f"invalid basis string {s!r} (expected e.g. '010')")
        return cls(tuple(int(c) for c in s))

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(str(b) for b in self.bits)


def _validate(node, nqubits):
    if isinstance(node, Skip):
        return
    if isinstance(node, Gate):
        if len(node.qubits) != node.kind.arity:
            raise CircuitError(f"gate {node.kind.name} takes {node.kind.arity} qubits, got {len(node.qubits)}")
        if len(set(node.qubits)) != len(node.qubits):
            raise CircuitError(f"gate {node.kind.name}: duplicate qubit arguments {node.qubits}")
        for q in node.qubits:
            if not 0 <= q < nqubits:
                raise CircuitError(f"qubit index q{q} out of range (qubits {nqubits})")
        return
    if isinstance(node, Seq):
        _validate(node.first, nqubits)
        _validate(node.second, nqubits)
        return
    if isinstance(node, IfMeasure):
        if not 0 <= node.qubit < nqubits:
            raise CircuitError(f"qubit index q{node.qubit} out of range (qubits {nqubits})")
        _validate(node.then0, nqubits)
        _validate(node.else1, nqubits)
        return
    raise CircuitError(f"unknown AST node {node!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\{|\}|;|[A-Za-z_]\w*")


def parse_complex(text):
    """Parse an ``a+bi`` literal ('1', '-0.5i', '0.7-0.7i', 'i')."""
    s = text.strip().replace("i", "j")
    s = re.sub(r"(?<![\dj.])j", "1j", s)  # bare j / +j / -j
    try:
        return complex(s)
    except ValueError:
        raise CircuitError(f"bad complex literal {text!r}") from None


def _format_complex(z):
    re_, im = float(z.real), float(z.imag)
    if im == 0:
        return repr(re_)
    if re_ == 0:
        return f"{im!r}i"
    return f"{re_!r}{'+' if im >= 0 else '-'}{abs(im)!r}i"


_GATE_DECL_RE = re.compile(r"gate\s+([A-Za-z_]\w*)\s+([12])\s*\[(.*)\]\s*$")


def _parse_gate_decl(line, lineno):
    m = _GATE_DECL_RE.match(line.strip())
    if not m:
        raise CircuitError("malformed gate declaration (expected: gate NAME ARITY [ row ; row ])", lineno)
    name, arity, body = m.group(1), int(m.group(2)), m.group(3)
    rows = [r.strip() for r in body.split(";")]
    d = 2 ** arity
    if len(rows) != d:
        raise CircuitError(f"gate {name}: expected {d} rows, got {len(rows)}", lineno)
    mat = []
    for r in rows:
        entries = r.split()
        if len(entries) != d:
            raise CircuitError(f"gate {name}: expected {d} entries per row, got {len(entries)}", lineno)
        mat.append([parse_complex(e) for e in entries])
    try:
        return GateKind(name, arity, np.array(mat, dtype=complex))
    except CircuitError as exc:
        raise CircuitError(str(exc), lineno) from None


class _Tok:
    __slots__ = ("text", "line", "col")

    def __init__(self, text, line, col):
        self.text = text
        self.line = line
        self.col = col


def _tokenize(lines):
    toks = []
    for off, raw in lines:
        line = raw.split("#", 1)[0]
        pos = 0
        for m in _TOKEN_RE.finditer(line):
            if line[pos : m.start()].strip():
                raise CircuitError(f"unexpected character {line[pos:m.start()].strip()[0]!r}", off, pos + 1)
            toks.append(_Tok(m.group(0), off, m.start() + 1))
            pos = m.end()
        if line[pos:].strip():
            raise CircuitError(f"unexpected character {line[pos:].strip()[0]!r}", off, pos + 1)
        toks.append(_Tok(";", off, len(line) + 1))  # newline separates statements
    return toks


class _Parser:
    def __init__(self, tokens, gates, nqubits):
        self.toks = tokens
        self.i = 0
        self.gates = gates
        self.nqubits = nqubits

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is not None:
            self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        if tok is None:
            raise CircuitError(msg)
        raise CircuitError(msg, tok.line, tok.col)

    def parse_block_body(self, stop_on_brace):
        stmts = []
        while True:
            t = self.peek()
            if t is None:
                if stop_on_brace:
                    self.error("unexpected end of input, expected '}'")
                break
            if t.text == ";":
                self.next()
                continue
            if t.text == "}":
                if not stop_on_brace:
                    self.error("unexpected '}'")
                break
            stmts.append(self.parse_stmt())
        if not stmts:
            return Skip()
        body = stmts[-1]
        for s in reversed(stmts[:-1]):
            body = Seq(s, body)
        return body

    def parse_stmt(self):
        t = self.next()
        if t.text == "skip":
            return Skip()
        if t.text == "if":
            q = self.parse_qubit()
            self.expect("{")
            then0 = self.parse_block_body(stop_on_brace=True)
            self.expect("}")
            self.expect("else")
            self.expect("{")
            else1 = self.parse_block_body(stop_on_brace=True)
            self.expect("}")
            return IfMeasure(q, then0, else1)
        kind = self.gates.get(t.text)
        if kind is None:
            self.error(f"unknown gate {t.text!r}", t)
        qubits = tuple(self.parse_qubit() for _ in range(kind.arity))
        if len(set(qubits)) != len(qubits):
            self.error(f"gate {kind.name}: duplicate qubit arguments", t)
        return Gate(kind, qubits)

    def parse_qubit(self):
        t = self.next()
        if t is None or not re.fullmatch(r"q\d+", t.text):
            self.error("expected qubit name like q0", t)
        q = int(t.text[1:])
        if q >= self.nqubits:
            self.error(f"qubit index q{q} out of range (qubits {self.nqubits})", t)
        return q

    def expect(self, text):
        t = self.next()
        if t is None or t.text != text:
            self.error(f"expected {text!r}", t)


def parse_program(text):
    """Parse ``.qc`` source into a :class:`Program`."""
    lines = list(enumerate(text.splitlines(), start=1))
    nqubits = None
    gates = dict(BUILTIN_GATES)
    defs = {}
    body_lines = []
    for lineno, raw in lines:
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("qubits"):
            if nqubits is not None:
                raise CircuitError("duplicate 'qubits' header", lineno)
            if body_lines:
                raise CircuitError("'qubits' header must precede statements", lineno)
            m = re.fullmatch(r"qubits\s+(\d+)", stripped)
            if not m or int(m.group(1)) < 1:
                raise CircuitError("expected 'qubits N' with N >= 1", lineno)
            nqubits = int(m.group(1))
        elif stripped.startswith("gate ") and "[" in stripped:
            if body_lines:
                raise CircuitError("gate declarations must precede statements", lineno)
            kind = _parse_gate_decl(stripped, lineno)
            gates[kind.name] = kind
            defs[kind.name] = kind
        else:
            body_lines.append((lineno, raw))
    if nqubits is None:
        raise CircuitError("missing 'qubits N' header")
    parser = _Parser(_tokenize(body_lines), gates, nqubits)
    body = parser.parse_block_body(stop_on_brace=False)
    return Program(body, nqubits, defs)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_program(p):
    """Render a :class:`Program` back to ``.qc`` text (parse round-trips)."""
    out = [f"qubits {p.nqubits}"]
    for kind in _custom_kinds(p):
        rows = " ; ".join(" ".join(_format_complex(z) for z in row) for row in kind.matrix)
        out.append(f"gate {kind.name} {kind.arity} [ {rows} ]")
    out.extend(_print_node(p.body))
    return "\n".join(out) + "\n"


def _custom_kinds(p):
    seen = {}

    def walk(node):
        if isinstance(node, Gate):
            k = node.kind
            builtin = BUILTIN_GATES.get(k.name)
            if builtin is None or not np.array_equal(builtin.matrix, k.matrix):
                seen.setdefault(k.name, k)
        elif isinstance(node, Seq):
            walk(node.first)
            walk(node.second)
        elif isinstance(node, IfMeasure):
            walk(node.then0)
            walk(node.else1)

    walk(p.body)
    for kind in p.gate_defs.values():
        seen.setdefault(kind.name, kind)
    return [seen[name] for name in sorted(seen)]


def _print_node(node):
    if isinstance(node, Skip):
        return ["skip"]
    if isinstance(node, Gate):
        return [node.kind.name + " " + " ".join(f"q{q}" for q in node.qubits)]
    if isinstance(node, Seq):
        return _print_node(node.first) + _print_node(node.second)
    if isinstance(node, IfMeasure):
        then_txt = "; ".join(_print_node(node.then0))
        else_txt = "; ".join(_print_node(node.else1))
        return [f"if q{node.qubit} {{ {then_txt} }} else {{ {else_txt} }}"]
    raise CircuitError(f"unknown AST node {node!r}")


# ---------------------------------------------------------------------------
# Structural utilities
# ---------------------------------------------------------------------------


def gate_count(p):
    """Number of Gate nodes, counting each syntactic occurrence once."""

    def count(node):
        if isinstance(node, Gate):
            return 1
        if isinstance(node, Seq):
            return count(node.first) + count(node.second)
        if isinstance(node, IfMeasure):
            return count(node.then0) + count(node.else1)
        return 0

    return count(p.body if isinstance(p, Program) else p)


def flatten(node):
    """Statement list of a (possibly nested) Seq tree, Skips removed."""
    out = []

    def walk(n):
        if isinstance(n, Seq):
            walk(n.first)
            walk(n.second)
        elif not isinstance(n, Skip):
            out.append(n)

    walk(node)
    return out


class BranchCapExceeded(CircuitError):
    pass


@dataclass(frozen=True)
class Collapse:
    """Marker in a branch's statement stream: project a qubit onto an outcome."""

    qubit: int
    bit: int


def enumerate_branches(p, cap=64):
    """All straight-line measurement-outcome paths through the program.

    Code sequenced after an ``if`` is duplicated into both paths.  Returns
    ``(label, stmts)`` pairs where label records measurement outcomes like
    ``"q1=0"`` and stmts is a list of Gate and Collapse nodes, the Collapse
    sitting where the measurement happens.
    """
    body = p.body if isinstance(p, Program) else p
    results = []

    def walk(stmts, label, acc):
        if len(results) >= cap:
            raise BranchCapExceeded(f"branch count exceeds cap {cap}; raise --branch-cap to proceed")
        for i, s in enumerate(stmts):
            if isinstance(s, IfMeasure):
                rest = stmts[i + 1 :]
                walk(
                    [Collapse(s.qubit, 0)] + flatten(s.then0) + rest,
                    label + [f"q{s.qubit}=0"],
                    list(acc),
                )
                walk(
                    [Collapse(s.qubit, 1)] + flatten(s.else1) + rest,
                    label + [f"q{s.qubit}=1"],
                    list(acc),
                )
                return
            acc.append(s)
        results.append((",".join(label), acc))

    walk(flatten(body), [], [])
    if len(results) > cap:
        raise BranchCapExceeded(f"branch count {len(results)} exceeds cap {cap}; raise --branch-cap to proceed")
    return results
