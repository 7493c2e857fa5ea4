"""Matrix product state approximator with certified truncation accounting.

Each truncation records a bound on the trace distance it can introduce: if a
step keeps a fraction f of the squared singular weight, the pre- and
post-truncation states have overlap sqrt(f) and the trace distance between
the corresponding pure density matrices is at most 2 sqrt(1 - f).  The sum
of these per-step bounds (``delta``) bounds the distance between the stored
approximation and the exact ideal output state.

Site tensors have shape (2, w_left, w_right).  Two-qubit gates act on
adjacent sites; non-adjacent operands are routed together with swap gates,
which are themselves truncated and accounted.  The site order is tracked in
``order`` (order[site] = logical qubit) and never swapped back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import BasisState, Collapse, Gate, Program, flatten, BUILTIN_GATES

SV_FLOOR = 1e-14


class MpsError(ValueError):
    pass


@dataclass
class Truncation:
    """One SVD truncation event."""

    sites: tuple
    discarded_weight: float
    delta: float


@dataclass
class MpsState:
    tensors: list
    width: int
    order: list  # order[site] = logical qubit held at that site
    delta: float = 0.0
    truncations: list = field(default_factory=list)

    @classmethod
    def from_basis(cls, state: BasisState, width: int) -> "MpsState":
        tensors = []
        for b in state.bits:
            a = np.zeros((2, 1, 1), dtype=complex)
            a[b, 0, 0] = 1
            tensors.append(a)
        return cls(tensors, width, list(range(len(state.bits))))

    @property
    def nqubits(self):
        return len(self.tensors)

    def copy(self) -> "MpsState":
        return MpsState(
            [t.copy() for t in self.tensors],
            self.width,
            list(self.order),
            self.delta,
            list(self.truncations),
        )

    def site_of(self, qubit: int) -> int:
        try:
            return self.order.index(qubit)
        except ValueError:
            raise MpsError(f"qubit {qubit} not in state") from None

    # -- gate application --------------------------------------------------

    def apply_1q(self, site: int, u: np.ndarray):
        self.tensors[site] = np.einsum("ts,sab->tab", u, self.tensors[site])

    def _canonicalize_around(self, site: int):
        """Left-orthonormalize sites < site and right-orthonormalize sites
        > site+1, so the two-site block carries the full state norm and the
        SVD truncation there is optimal in the true metric."""
        for k in range(site):
            a = self.tensors[k]
            s, wl, wr = a.shape
            q, r = np.linalg.qr(a.transpose(1, 0, 2).reshape(wl * s, wr))
            self.tensors[k] = q.reshape(wl, s, -1).transpose(1, 0, 2)
            self.tensors[k + 1] = np.einsum("ab,sbc->sac", r, self.tensors[k + 1])
        for k in range(self.nqubits - 1, site + 1, -1):
            a = self.tensors[k]
            s, wl, wr = a.shape
            m = a.transpose(1, 0, 2).reshape(wl, s * wr)
            q, r = np.linalg.qr(m.conj().T)
            self.tensors[k] = q.conj().T.reshape(-1, s, wr).transpose(1, 0, 2)
            self.tensors[k - 1] = np.einsum("sab,cb->sac", self.tensors[k - 1], r.conj())

    def apply_2q(self, site: int, u: np.ndarray):
        """Apply a 4x4 unitary to sites (site, site+1) and truncate."""
        self._canonicalize_around(site)
        a, b = self.tensors[site], self.tensors[site + 1]
        wl, wr = a.shape[1], b.shape[2]
        theta = np.einsum("sab,tbc->stac", a, b)
        theta = np.einsum("uvst,stac->uvac", u.reshape(2, 2, 2, 2), theta)
        m = theta.transpose(0, 2, 1, 3).reshape(2 * wl, 2 * wr)
        us, sv, vh = np.linalg.svd(m, full_matrices=False)
        total = float(np.sum(sv ** 2))
        keep = min(self.width, int(np.sum(sv > SV_FLOOR)))
        keep = max(keep, 1)
        kept = float(np.sum(sv[:keep] ** 2))
        discarded = max(0.0, 1.0 - kept / total) if total > 0 else 0.0
        if discarded > 1e-30:
            step = 2.0 * float(np.sqrt(discarded))
            self.delta += step
            self.truncations.append(Truncation((site, site + 1), discarded, step))
        sv = sv[:keep] / np.sqrt(kept)
        left = us[:, :keep].reshape(2, wl, keep)
        right = (sv[:, None] * vh[:keep]).reshape(keep, 2, wr).transpose(1, 0, 2)
        self.tensors[site] = left
        self.tensors[site + 1] = right

    def _swap_sites(self, site: int):
        """Swap the qubits held at sites (site, site+1)."""
        self.apply_2q(site, BUILTIN_GATES["swap"].matrix)
        self.order[site], self.order[site + 1] = self.order[site + 1], self.order[site]

    def apply_gate(self, g: Gate):
        if g.kind.arity == 1:
            self.apply_1q(self.site_of(g.qubits[0]), g.kind.matrix)
            return
        s0, s1 = self.site_of(g.qubits[0]), self.site_of(g.qubits[1])
        # route the farther operand next to the nearer one
        while abs(s0 - s1) > 1:
            if s0 < s1:
                self._swap_sites(s1 - 1)
                s1 -= 1
            else:
                self._swap_sites(s1)
                s1 += 1
        u = g.kind.matrix
        if s0 > s1:
            swap = BUILTIN_GATES["swap"].matrix
            u = swap @ u @ swap
            s0, s1 = s1, s0
        self.apply_2q(s0, u)

    # -- measurement -------------------------------------------------------

    def collapse(self, qubit: int, bit: int) -> float:
        """Project a qubit onto |bit>, renormalize; returns the outcome
        probability in the pre-collapse state."""
        site = self.site_of(qubit)
        a = self.tensors[site].copy()
        a[1 - bit] = 0
        saved = self.tensors[site]
        self.tensors[site] = a
        prob = float(np.real(self.norm_squared()))
        if prob < 1e-300:
            self.tensors[site] = saved
            return 0.0
        self.tensors[site] = a / np.sqrt(prob)
        return prob

    # -- contractions ------------------------------------------------------

    def norm_squared(self) -> float:
        env = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            env = np.einsum("ab,sac,sbd->cd", env, a.conj(), a)
        return float(np.real(env[0, 0]))

    def inner_product(self, other: "MpsState") -> complex:
        """<self|other>; the two states must hold qubits in the same order."""
        if self.order != other.order:
            raise MpsError("inner product requires identical site orders")
        env = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum("ab,sac,sbd->cd", env, a.conj(), b)
        return complex(env[0, 0])

    def to_statevector(self) -> np.ndarray:
        """Dense statevector in logical qubit order, qubit 0 most significant."""
        v = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            v = np.einsum("pa,sab->psb", v, a).reshape(-1, a.shape[2])
        v = v.reshape([2] * self.nqubits)
        inv = np.argsort(self.order)  # inv[logical] = site
        v = v.transpose(inv)
        return v.reshape(-1)

    def local_density(self, qubits: tuple) -> np.ndarray:
        """Exact reduced density matrix on one or two qubits, in the order given."""
        qubits = tuple(qubits)
        if len(qubits) == 1:
            return self._local_1(self.site_of(qubits[0]))
        if len(qubits) != 2:
            raise MpsError("local_density supports 1 or 2 qubits")
        sa, sb = self.site_of(qubits[0]), self.site_of(qubits[1])
        if sa == sb:
            raise MpsError("duplicate qubit in local_density")
        lo, hi = min(sa, sb), max(sa, sb)
        rho = self._local_2(lo, hi)  # ordered (site lo, site hi)
        if sa > sb:
            swap = BUILTIN_GATES["swap"].matrix
            rho = swap @ rho @ swap
        return rho

    def _left_env(self, site: int) -> np.ndarray:
        env = np.ones((1, 1), dtype=complex)
        for a in self.tensors[:site]:
            env = np.einsum("ab,sac,sbd->cd", env, a.conj(), a)
        return env

    def _right_env(self, site: int) -> np.ndarray:
        env = np.ones((1, 1), dtype=complex)
        for a in reversed(self.tensors[site + 1 :]):
            env = np.einsum("cd,sac,sbd->ab", env, a.conj(), a)
        return env

    def _local_1(self, site: int) -> np.ndarray:
        left = self._left_env(site)
        right = self._right_env(site)
        a = self.tensors[site]
        return np.einsum("ab,sac,tbd,cd->ts", left, a.conj(), a, right)

    def _local_2(self, lo: int, hi: int) -> np.ndarray:
        left = self._left_env(lo)
        a = self.tensors[lo]
        # m[s', s, c', c]: open physical pair at lo plus bond pair
        m = np.einsum("ab,sac,tbd->stcd", left, a.conj(), a)
        for mid in self.tensors[lo + 1 : hi]:
            m = np.einsum("stcd,ucx,udy->stxy", m, mid.conj(), mid)
        b = self.tensors[hi]
        right = self._right_env(hi)
        rho4 = np.einsum("stcd,ucx,vdy,xy->suvt", m, b.conj(), b, right)
        # rho4[s,u,v,t] = <s u| rho |t v> with first factor the lo site
        return rho4.transpose(0, 1, 3, 2).reshape(4, 4)


def run_branch(rho_in: BasisState, width: int, stmts) -> tuple:
    """Run one straight-line branch (Gate and Collapse nodes).

    Returns ``(state, prob)`` where prob is the product of measurement
    outcome probabilities along the branch (1.0 for straight-line code).
    """
    state = MpsState.from_basis(rho_in, width)
    prob = 1.0
    for s in stmts:
        if isinstance(s, Gate):
            state.apply_gate(s)
        elif isinstance(s, Collapse):
            prob *= state.collapse(s.qubit, s.bit)
            if prob == 0.0:
                break
        else:
            raise MpsError(
                f"cannot run {type(s).__name__} directly; enumerate branches first"
            )
    return state, prob


def run_tn(program: Program, rho_in: BasisState, width: int, branch_cap: int = 64):
    """Approximate every measurement branch of a program.

    Returns a list of ``(label, state, prob)`` triples, one per branch, in
    enumeration order.  Straight-line programs yield a single entry with an
    empty label and prob 1.
    """
    from .circuit import enumerate_branches

    out = []
    for label, stmts in enumerate_branches(program, cap=branch_cap):
        state, prob = run_branch(rho_in, width, stmts)
        out.append((label, state, prob))
    return out
