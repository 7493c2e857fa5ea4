"""Benchmark circuit generators.

All generators are deterministic in (kind, qubits, layers, seed) and emit
program text with custom rotation gates declared inline, so the output is
self-contained.
"""

from __future__ import annotations

import numpy as np

BENCH_KINDS = ("ising-chain", "qaoa-line", "qaoa-random")


def _fmt_signed(z: complex) -> str:
    re, im = float(z.real), float(z.imag)
    if abs(im) < 1e-15:
        return repr(re)
    if abs(re) < 1e-15:
        return repr(im) + "i"
    sign = "+" if im >= 0 else "-"
    return f"{re!r}{sign}{abs(im)!r}i"


def _rx_rows(theta: float):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return [[c, -1j * s], [-1j * s, c]]


def _rz_rows(theta: float):
    return [[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]]


def _zz_rows(theta: float):
    a, b = np.exp(-1j * theta / 2), np.exp(1j * theta / 2)
    return [[a, 0, 0, 0], [0, b, 0, 0], [0, 0, b, 0], [0, 0, 0, a]]


def _decl(name: str, rows) -> str:
    arity = 1 if len(rows) == 2 else 2
    body = " ; ".join(" ".join(_fmt_signed(z) for z in row) for row in rows)
    return f"gate {name} {arity} [ {body} ]"


def gen_bench(kind: str, qubits: int, layers: int = 1, seed: int = 0) -> str:
    """Generate benchmark program text; see BENCH_KINDS for valid kinds."""
    if kind == "ising-chain":
        return _ising_chain(qubits, layers, seed)
    if kind == "qaoa-line":
        return _qaoa_line(qubits, layers, seed)
    if kind == "qaoa-random":
        return _qaoa_random(qubits, layers, seed)
    raise ValueError(f"unknown benchmark kind {kind!r}; choose from {BENCH_KINDS}")


def _ising_chain(n: int, layers: int, seed: int) -> str:
    """Trotterized transverse-field Ising quench on a line.

    Starts from the all-plus state (Hadamard wall), then each layer applies
    (n - 1) ZZ couplings and n RX rotations: n + (2n - 1) layers gates."""
    rng = np.random.default_rng(seed)
    decls, stmts = [], []
    stmts.extend(f"h q{i}" for i in range(n))
    for l in range(layers):
        zz = f"zz_l{l}"
        rx = f"rx_l{l}"
        decls.append(_decl(zz, _zz_rows(float(rng.uniform(0.1, 1.0)))))
        decls.append(_decl(rx, _rx_rows(float(rng.uniform(0.1, 1.0)))))
        for i in range(n - 1):
            stmts.append(f"{zz} q{i} q{i + 1}")
        for i in range(n):
            stmts.append(f"{rx} q{i}")
    return "\n".join([f"qubits {n}"] + decls + stmts) + "\n"


def _qaoa_line(n: int, layers: int, seed: int) -> str:
    """QAOA on a line graph: a Hadamard wall, then per layer (n - 1) ZZ cost
    gates and RX mixers on the interior qubits."""
    rng = np.random.default_rng(seed)
    decls, stmts = [], []
    stmts.extend(f"h q{i}" for i in range(n))
    for l in range(layers):
        zz = f"zz_p{l}"
        rx = f"rx_p{l}"
        decls.append(_decl(zz, _zz_rows(float(rng.uniform(0.1, 1.0)))))
        decls.append(_decl(rx, _rx_rows(float(rng.uniform(0.1, 1.0)))))
        for i in range(n - 1):
            stmts.append(f"{zz} q{i} q{i + 1}")
        for i in range(1, n - 1):
            stmts.append(f"{rx} q{i}")
    return "\n".join([f"qubits {n}"] + decls + stmts) + "\n"


def _qaoa_random(n: int, layers: int, seed: int) -> str:
    """QAOA with a random graph: each layer picks n random edges."""
    rng = np.random.default_rng(seed)
    decls, stmts = [], []
    stmts.extend(f"h q{i}" for i in range(n))
    for l in range(layers):
        zz = f"zz_p{l}"
        rx = f"rx_p{l}"
        decls.append(_decl(zz, _zz_rows(float(rng.uniform(0.1, 1.0)))))
        decls.append(_decl(rx, _rx_rows(float(rng.uniform(0.1, 1.0)))))
        for _ in range(n):
            a, b = rng.choice(n, size=2, replace=False)
            stmts.append(f"{zz} q{a} q{b}")
        for i in range(n):
            stmts.append(f"{rx} q{i}")
    return "\n".join([f"qubits {n}"] + decls + stmts) + "\n"
