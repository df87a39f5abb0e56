"""Compilation passes from abstract circuits to native gate sets.

The central tool is the canonical (KAK) decomposition of a two-qubit
unitary U = phase * (k1a ox k1b) * exp(-i(tx XX + ty YY + tz ZZ)) * (k2a ox k2b)
with coordinates reduced into the Weyl chamber pi/4 >= tx >= ty >= |tz|.
Built on it: block compilation into arbitrary-angle ZZ/MS_XX gates, SWAP
mirroring (compile SWAP*U and relabel virtually when that lowers the total
entangling angle), and star-to-line routing for linear-chain devices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import (
    Circuit,
    Gate,
    gate_matrix,
    unitary_of,
)

__all__ = [
    "GateSetSpec",
    "TranspileOptions",
    "CanonicalCoords",
    "CompilationReport",
    "kak_decompose",
    "decompose_cry",
    "cnot_to_msxx",
    "cnot_to_cz",
    "swap_to_cz",
    "block_to_zz",
    "block_to_native",
    "mirror_swap_choice",
    "route_star_to_line",
    "merge_single_qubit_runs",
    "transpile",
    "allclose_up_to_global_phase",
]

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_RX_HALF = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)  # Rx(pi/2)
_PAULIS = (_X, _Y, _Z)
# keyed by the axis left untouched: conjugation by these swaps the other two axes
_AXIS_SWAPPERS = {2: _S, 1: _H, 0: _RX_HALF}

_SWAP4 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

# Magic (Bell) basis; CAN(t) is diagonal in it.
_B = np.array([[1, 0, 0, 1j],
               [0, 1j, 1, 0],
               [0, 1j, -1, 0],
               [1, 0, 0, -1j]], dtype=complex) / np.sqrt(2)
_BD = _B.conj().T

ENTANGLING_ANGLE = {"CNOT": np.pi / 4, "CZ": np.pi / 4, "SWAP": 3 * np.pi / 4}


def allclose_up_to_global_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    k = np.argmax(np.abs(b))
    if abs(b.flat[k]) < atol:
        return bool(np.max(np.abs(a)) < atol)
    phase = a.flat[k] / b.flat[k]
    if abs(abs(phase) - 1) > atol:
        return False
    return bool(np.max(np.abs(a - phase * b)) < atol)


@dataclass(frozen=True)
class GateSetSpec:
    """Native gates and connectivity of a target device."""

    native_two_qubit: str  # "MS_XX" | "ZZ" | "CZ"
    native_single_qubit: frozenset = frozenset({"RX", "RY", "RZ", "U1q"})
    connectivity: str = "all_to_all"  # "all_to_all" | "linear"
    chain_order: tuple[int, ...] = ()  # wires by chain position, linear only

    def __post_init__(self):
        if self.native_two_qubit not in ("MS_XX", "ZZ", "CZ"):
            raise ValueError(f"unsupported native two-qubit gate {self.native_two_qubit!r}")
        if self.connectivity not in ("all_to_all", "linear"):
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        object.__setattr__(self, "native_single_qubit", frozenset(self.native_single_qubit))
        object.__setattr__(self, "chain_order", tuple(self.chain_order))

    def allows_pair(self, qa: int, qb: int) -> bool:
        if self.connectivity == "all_to_all":
            return True
        return abs(qa - qb) == 1


@dataclass(frozen=True)
class TranspileOptions:
    use_zz: bool = False  # block-compile interaction pairs via the canonical decomposition
    mirror: bool = False  # SWAP-mirror blocks with virtual relabeling
    route: bool = False   # star-to-line routing onto a linear chain


@dataclass(frozen=True)
class CanonicalCoords:
    """Weyl-chamber coordinates and local factors of a two-qubit unitary."""

    t_x: float
    t_y: float
    t_z: float
    k1a: np.ndarray
    k1b: np.ndarray
    k2a: np.ndarray
    k2b: np.ndarray
    phase: complex

    @property
    def coords(self) -> tuple[float, float, float]:
        return (self.t_x, self.t_y, self.t_z)

    @property
    def entangling_cost(self) -> float:
        """Total two-qubit rotation, equal to half the sum of |ZZ angles|."""
        return self.t_x + self.t_y + abs(self.t_z)

    def canonical_matrix(self) -> np.ndarray:
        gen = (self.t_x * np.kron(_X, _X) + self.t_y * np.kron(_Y, _Y)
               + self.t_z * np.kron(_Z, _Z))
        w, v = np.linalg.eigh(gen)
        return (v * np.exp(-1j * w)) @ v.conj().T

    def reassemble(self) -> np.ndarray:
        return (self.phase * np.kron(self.k1a, self.k1b)
                @ self.canonical_matrix() @ np.kron(self.k2a, self.k2b))


def _simultaneously_diagonalize(m2: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Real orthogonal P with P.T @ m2 @ P diagonal, for complex symmetric unitary m2.

    Re(m2) and Im(m2) are commuting real symmetric matrices; diagonalize the
    real part, then the imaginary part within each degenerate cluster.
    Degenerate canonical classes (CNOT-like blocks) land here routinely.
    """
    a, b = m2.real, m2.imag
    w, v = np.linalg.eigh(a)
    p = v.copy()
    i = 0
    n = m2.shape[0]
    while i < n:
        j = i
        while j < n and w[j] - w[i] <= tol:
            j += 1
        if j - i > 1:
            block = v[:, i:j]
            sub = block.T @ b @ block
            _, r = np.linalg.eigh(0.5 * (sub + sub.T))
            p[:, i:j] = block @ r
        i = j
    return p


def _kron_factor(v: np.ndarray) -> tuple[complex, np.ndarray, np.ndarray]:
    """Split v = g * (a ox b) with a, b unitary 2x2; v must be a tensor product."""
    r = v.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    if s[0] < 1e-6 or s[1] > 1e-6:
        raise ValueError("matrix is not a tensor product of single-qubit unitaries")
    a = u[:, 0].reshape(2, 2) * np.sqrt(2)
    b = vh[0, :].reshape(2, 2) * np.sqrt(2)
    g = s[0] / 2
    return complex(g), a, b


def kak_decompose(u: np.ndarray, atol: float = 1e-9) -> CanonicalCoords:
    """Canonical decomposition of a two-qubit unitary, Weyl-chamber reduced."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or np.max(np.abs(u.conj().T @ u - np.eye(4))) > 1e-8:
        raise ValueError("input must be a 4x4 unitary")
    gamma = np.linalg.det(u) ** 0.25
    u_su = u / gamma
    m = _BD @ u_su @ _B
    m2 = m.T @ m
    p = _simultaneously_diagonalize(m2)
    d_full = p.T @ m2 @ p
    if np.max(np.abs(d_full - np.diag(np.diag(d_full)))) > 1e-7:
        raise ArithmeticError("failed to diagonalize in the magic basis")
    if np.linalg.det(p) < 0:
        p[:, 0] = -p[:, 0]
    theta = np.angle(np.diag(p.T @ m2 @ p)) / 2
    theta[3] = -theta[0] - theta[1] - theta[2]
    f = np.exp(1j * theta)
    o = (m @ p) * (1.0 / f)  # right-multiply by diag(1/f)
    if np.max(np.abs(o.imag)) > 1e-7:
        raise ArithmeticError("magic-basis orthogonal factor is not real")
    o = o.real
    k1 = _B @ o @ _BD
    k2 = _B @ p.T @ _BD
    # diagonal phases of CAN in the magic basis: theta = S @ (tx, ty, tz)
    t_x = (theta[2] + theta[3]) / 2
    t_y = (theta[2] + theta[0]) / 2
    t_z = (theta[2] + theta[1]) / 2
    g1, k1a, k1b = _kron_factor(k1)
    g2, k2a, k2b = _kron_factor(k2)
    coords = _canonicalize(
        [t_x, t_y, t_z], k1a, k1b, k2a, k2b, complex(gamma * g1 * g2))
    if np.max(np.abs(coords.reassemble() - u)) > atol:
        raise ArithmeticError("canonical decomposition failed to reassemble")
    return coords


def _canonicalize(v: list[float], k1a, k1b, k2a, k2b, phase: complex) -> CanonicalCoords:
    """Reduce coordinates into pi/4 >= tx >= ty >= |tz| by shift/negate/swap moves.

    Each move rewrites CAN(v) as locals * CAN(v') * locals, folding the local
    fixups into the surrounding single-qubit factors.
    """
    state = {"k1a": k1a, "k1b": k1b, "k2a": k2a, "k2b": k2b, "phase": phase}

    def shift(k: int, step: int):
        # exp(-i t PP) = exp(-i (t + s*pi/2) PP) * (i P ox P)^s
        v[k] += step * np.pi / 2
        state["phase"] *= 1j ** (step % 4)
        if step % 2:
            pauli = _PAULIS[k]
            state["k2a"] = pauli @ state["k2a"]
            state["k2b"] = pauli @ state["k2b"]

    def negate(ka: int, kb: int):
        # conjugating by (P_other ox I) flips the sign of the other two axes
        v[ka] *= -1
        v[kb] *= -1
        pauli = _PAULIS[3 - ka - kb]
        state["k1a"] = state["k1a"] @ pauli
        state["k2a"] = pauli @ state["k2a"]

    def swap_axes(ka: int, kb: int):
        v[ka], v[kb] = v[kb], v[ka]
        s = _AXIS_SWAPPERS[3 - ka - kb]
        sd = s.conj().T
        state["k1a"] = state["k1a"] @ sd
        state["k1b"] = state["k1b"] @ sd
        state["k2a"] = s @ state["k2a"]
        state["k2b"] = s @ state["k2b"]

    def canonical_shift(k: int):
        while v[k] <= -np.pi / 4 - 1e-12:
            shift(k, 1)
        while v[k] > np.pi / 4 + 1e-12:
            shift(k, -1)

    def sort_descending():
        if abs(v[0]) < abs(v[1]):
            swap_axes(0, 1)
        if abs(v[1]) < abs(v[2]):
            swap_axes(1, 2)
        if abs(v[0]) < abs(v[1]):
            swap_axes(0, 1)

    canonical_shift(0)
    canonical_shift(1)
    canonical_shift(2)
    sort_descending()
    if v[0] < 0:
        negate(0, 2)
    if v[1] < 0:
        negate(1, 2)
    canonical_shift(2)
    # boundary convention: at tx = pi/4 prefer tz >= 0
    if v[0] > np.pi / 4 - 1e-9 and v[2] < -1e-12:
        shift(0, -1)
        negate(0, 2)
    return CanonicalCoords(t_x=float(v[0]), t_y=float(v[1]), t_z=float(v[2]),
                           k1a=state["k1a"], k1b=state["k1b"],
                           k2a=state["k2a"], k2b=state["k2b"], phase=state["phase"])


# ---------------------------------------------------------------------------
# Fixed gate-for-gate decompositions

def decompose_cry(gate: Gate) -> list[Gate]:
    """CRY(theta) -> two CNOTs and two unconditional RY rotations."""
    if gate.kind != "CRY":
        raise ValueError(f"expected CRY, got {gate.kind}")
    ctrl, tgt = gate.qubits
    theta = gate.params[0]
    return [
        Gate("RY", (tgt,), (theta / 2,)),
        Gate("CNOT", (ctrl, tgt)),
        Gate("RY", (tgt,), (-theta / 2,)),
        Gate("CNOT", (ctrl, tgt)),
    ]


def cnot_to_msxx(gate: Gate) -> list[Gate]:
    """CNOT -> one MS_XX(pi/2) plus single-qubit rotations (up to global phase)."""
    if gate.kind != "CNOT":
        raise ValueError(f"expected CNOT, got {gate.kind}")
    ctrl, tgt = gate.qubits
    half = np.pi / 2
    return [
        Gate("RY", (ctrl,), (half,)),
        Gate("MS_XX", (ctrl, tgt), (half,)),
        Gate("RX", (ctrl,), (-half,)),
        Gate("RX", (tgt,), (-half,)),
        Gate("RY", (ctrl,), (-half,)),
    ]


def cnot_to_cz(gate: Gate) -> list[Gate]:
    """CNOT -> CZ conjugated by Hadamards on the target."""
    if gate.kind != "CNOT":
        raise ValueError(f"expected CNOT, got {gate.kind}")
    ctrl, tgt = gate.qubits
    return [Gate("H", (tgt,)), Gate("CZ", (ctrl, tgt)), Gate("H", (tgt,))]


def swap_to_cz(gate: Gate) -> list[Gate]:
    """SWAP -> exactly three CZ with Hadamard wrappers."""
    if gate.kind != "SWAP":
        raise ValueError(f"expected SWAP, got {gate.kind}")
    a, b = gate.qubits
    seq: list[Gate] = []
    for ctrl, tgt in ((a, b), (b, a), (a, b)):
        seq.extend(cnot_to_cz(Gate("CNOT", (ctrl, tgt))))
    return seq


# ---------------------------------------------------------------------------
# Single-qubit emission

def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with U1q(theta, phi, lam) = u up to global phase."""
    a, b = u[0, 0], u[0, 1]
    c = u[1, 0]
    theta = 2 * np.arctan2(abs(c), abs(a))
    if abs(c) < 1e-12:
        return 0.0, 0.0, float(np.angle(u[1, 1]) - np.angle(a))
    if abs(a) < 1e-12:
        return float(np.pi), float(np.angle(c)), float(np.angle(-b))
    g = np.angle(a)
    return float(theta), float(np.angle(c) - g), float(np.angle(-b) - g)


def emit_single_qubit(u: np.ndarray, wire: int, spec: GateSetSpec) -> list[Gate]:
    """Emit a 2x2 unitary (up to global phase) in the native single-qubit set."""
    if allclose_up_to_global_phase(u, _I2, atol=1e-12):
        return []
    theta, phi, lam = zyz_angles(u)
    if "U1q" in spec.native_single_qubit:
        return [Gate("U1q", (wire,), (theta, phi, lam))]
    if not {"RY", "RZ"} <= spec.native_single_qubit:
        raise ValueError("native single-qubit set cannot express arbitrary rotations")
    seq = []
    if abs(lam) > 1e-12:
        seq.append(Gate("RZ", (wire,), (lam,)))
    if abs(theta) > 1e-12:
        seq.append(Gate("RY", (wire,), (theta,)))
    if abs(phi) > 1e-12:
        seq.append(Gate("RZ", (wire,), (phi,)))
    return seq


def merge_single_qubit_runs(gates, width: int, spec: GateSetSpec) -> list[Gate]:
    """Fuse consecutive single-qubit gates per wire into one native emission."""
    pending: dict[int, np.ndarray] = {}
    out: list[Gate] = []

    def flush(wire: int):
        u = pending.pop(wire, None)
        if u is not None:
            out.extend(emit_single_qubit(u, wire, spec))

    for g in gates:
        if g.n_qubits == 1:
            w = g.qubits[0]
            pending[w] = gate_matrix(g) @ pending.get(w, _I2)
        else:
            for w in sorted(g.qubits):
                flush(w)
            out.append(g)
    for w in sorted(pending):
        flush(w)
    return out


# ---------------------------------------------------------------------------
# Block compilation

def _axis_sequence(axis: int, angle: float, qa: int, qb: int, native: str) -> list[Gate]:
    """exp(-i*angle*P_axis ox P_axis) on wires (qa, qb) in the native basis."""
    two = Gate(native, (qa, qb), (2 * angle,))
    if native == "ZZ":
        wrappers = {0: ("H", ()), 1: ("RX", (np.pi / 2,)), 2: None}
    else:  # MS_XX
        wrappers = {0: None, 1: ("RZ", (-np.pi / 2,)), 2: ("H", ())}
    wrap = wrappers[axis]
    if wrap is None:
        return [two]
    kind, params = wrap
    pre = [Gate(kind, (qa,), params), Gate(kind, (qb,), params)]
    if kind == "H":
        post = list(pre)
    else:
        post = [Gate(kind, (qa,), tuple(-p for p in params)),
                Gate(kind, (qb,), tuple(-p for p in params))]
    return pre + [two] + post


def block_to_native(u: np.ndarray, native: str = "ZZ", wires: tuple[int, int] = (0, 1),
                    atol: float = 1e-9) -> tuple[list[Gate], CanonicalCoords]:
    """Compile a two-qubit unitary into at most three native entangling gates.

    One entangling gate per nonzero canonical coordinate, each conjugated by
    the basis change that rotates its axis onto the native generator.
    """
    if native not in ("ZZ", "MS_XX"):
        raise ValueError("block compilation targets ZZ or MS_XX")
    coords = kak_decompose(u, atol=atol)
    qa, qb = wires
    seq: list[Gate] = []
    seq.extend(emit_single_qubit(coords.k2a, qa, _BLOCK_1Q_SPEC))
    seq.extend(emit_single_qubit(coords.k2b, qb, _BLOCK_1Q_SPEC))
    for axis, angle in enumerate(coords.coords):
        if abs(angle) > 1e-9:
            seq.extend(_axis_sequence(axis, angle, qa, qb, native))
    seq.extend(emit_single_qubit(coords.k1a, qa, _BLOCK_1Q_SPEC))
    seq.extend(emit_single_qubit(coords.k1b, qb, _BLOCK_1Q_SPEC))
    return seq, coords


_BLOCK_1Q_SPEC = GateSetSpec(native_two_qubit="ZZ")  # U1q available; merged later


def block_to_zz(u: np.ndarray, wires: tuple[int, int] = (0, 1)) -> list[Gate]:
    """Sequence over {ZZ(theta), single-qubit gates} equivalent to u up to phase."""
    seq, _ = block_to_native(u, native="ZZ", wires=wires)
    return seq


def mirror_swap_choice(u: np.ndarray, native: str = "ZZ",
                       wires: tuple[int, int] = (0, 1)) -> tuple[list[Gate], bool, float, float]:
    """Compare compiling u against SWAP*u with virtual relabeling; emit the cheaper.

    Returns (gates, mirrored, chosen_cost, unmirrored_cost).  The caller must
    fold a wire exchange into the readout permutation when mirrored is True.
    """
    direct = kak_decompose(u)
    mirrored = kak_decompose(_SWAP4 @ u)
    if mirrored.entangling_cost < direct.entangling_cost - 1e-12:
        seq, coords = block_to_native(_SWAP4 @ u, native=native, wires=wires)
        return seq, True, coords.entangling_cost, direct.entangling_cost
    seq, coords = block_to_native(u, native=native, wires=wires)
    return seq, False, coords.entangling_cost, direct.entangling_cost


# ---------------------------------------------------------------------------
# Routing

def default_chain_order(circuit: Circuit) -> tuple[int, ...]:
    """Chain placement with the cavity/environment wire at position 1."""
    em = circuit.emitter_wires
    return (em[0], circuit.cavity_wire, *em[1:]) if em else (circuit.cavity_wire,)


def route_star_to_line(circuit: Circuit, spec: GateSetSpec) -> tuple[Circuit, int]:
    """Insert SWAPs shuttling the cavity wire along a linear chain.

    Output gates act on chain positions; all two-qubit gates are adjacent.
    The readout relabeling is composed so the logical distribution is
    unchanged.  Returns (routed circuit, number of SWAPs inserted).
    """
    if spec.connectivity != "linear":
        raise ValueError("routing requires linear connectivity")
    order = spec.chain_order or default_chain_order(circuit)
    if sorted(order) != list(range(circuit.width)):
        raise ValueError("chain_order must be a permutation of the circuit wires")
    pos_of = {wire: p for p, wire in enumerate(order)}
    wire_at = {p: wire for p, wire in enumerate(order)}
    cav = circuit.cavity_wire
    out: list[Gate] = []
    n_swaps = 0
    for g in circuit.gates:
        if g.n_qubits == 1:
            out.append(Gate(g.kind, (pos_of[g.qubits[0]],), g.params))
            continue
        if cav not in g.qubits:
            raise ValueError("two-qubit gate does not involve the cavity wire; "
                             "circuit is not in star form")
        other = g.qubits[0] if g.qubits[1] == cav else g.qubits[1]
        while abs(pos_of[cav] - pos_of[other]) > 1:
            p = pos_of[cav]
            step = 1 if pos_of[other] > p else -1
            q = p + step
            out.append(Gate("SWAP", (p, q)))
            n_swaps += 1
            moved = wire_at[q]
            pos_of[cav], pos_of[moved] = q, p
            wire_at[p], wire_at[q] = moved, cav
        out.append(Gate(g.kind, tuple(pos_of[q] for q in g.qubits), g.params))
    new_relabel = tuple(pos_of[w] for w in circuit.relabeling)
    routed = replace(circuit, gates=tuple(out), relabeling=new_relabel)
    return routed, n_swaps


# ---------------------------------------------------------------------------
# Pipeline

@dataclass(frozen=True)
class CompilationReport:
    gate_census: dict[str, int]
    two_qubit_count: int
    total_entangling_angle: float
    unmirrored_entangling_angle: float
    swap_count: int
    blocks: int
    mirrored_blocks: int

    @property
    def mirror_reduction(self) -> float:
        if self.unmirrored_entangling_angle == 0:
            return 0.0
        return 1.0 - self.total_entangling_angle / self.unmirrored_entangling_angle


def entangling_angle(gate: Gate) -> float:
    """Canonical-coordinate cost of one gate (half the |ZZ/MS angle|)."""
    if gate.kind in ("ZZ", "MS_XX"):
        return abs(gate.params[0]) / 2
    if gate.kind == "CRY":
        return abs(gate.params[0]) / 4
    return ENTANGLING_ANGLE.get(gate.kind, 0.0)


def _group_blocks(gates) -> list[tuple[str, object]]:
    """Split a gate stream into 1q gates and maximal 2q runs on a fixed pair."""
    groups: list[tuple[str, object]] = []
    current: list[Gate] = []
    pair: frozenset[int] | None = None

    def close():
        nonlocal current, pair
        if current:
            groups.append(("block", (pair, tuple(current))))
            current, pair = [], None

    for g in gates:
        if g.n_qubits == 1:
            close()
            groups.append(("single", g))
        else:
            p = frozenset(g.qubits)
            if pair is not None and p != pair:
                close()
            pair = p
            current.append(g)
    close()
    return groups


def _block_unitary(gates: tuple[Gate, ...], qa: int, qb: int) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for g in gates:
        m = gate_matrix(g)
        if g.qubits == (qb, qa):
            m = _SWAP4 @ m @ _SWAP4
        elif g.qubits != (qa, qb):
            raise ValueError("gate outside block pair")
        u = m @ u
    return u


def _validate(circ: Circuit, spec: GateSetSpec):
    for g in circ.gates:
        if g.n_qubits == 2:
            if g.kind != spec.native_two_qubit:
                raise ValueError(f"non-native two-qubit gate {g.kind} in output")
            if not spec.allows_pair(*g.qubits):
                raise ValueError(f"gate {g} violates {spec.connectivity} connectivity")
        elif g.kind not in spec.native_single_qubit:
            raise ValueError(f"non-native single-qubit gate {g.kind} in output")


def transpile(circuit: Circuit, spec: GateSetSpec,
              options: TranspileOptions = TranspileOptions()) -> tuple[Circuit, CompilationReport]:
    """Lower an abstract circuit to the native gate set, respecting connectivity."""
    if options.mirror and not options.use_zz:
        raise ValueError("mirroring requires block compilation (use_zz)")
    if options.mirror and spec.connectivity != "all_to_all":
        raise ValueError("mirroring's virtual relabeling would break chain adjacency")
    if options.use_zz and spec.native_two_qubit == "CZ":
        raise ValueError("block compilation needs an arbitrary-angle two-qubit gate")
    if options.route != (spec.connectivity == "linear"):
        raise ValueError("route option must match linear connectivity")

    work = circuit
    swap_count = 0
    if options.route:
        work, swap_count = route_star_to_line(work, spec)

    out: list[Gate] = []
    wire_map = list(range(work.width))
    blocks = mirrored_blocks = 0
    chosen_angle = unmirrored_angle = 0.0

    if options.use_zz:
        for kind, payload in _group_blocks(work.gates):
            if kind == "single":
                g: Gate = payload
                out.append(Gate(g.kind, (wire_map[g.qubits[0]],), g.params))
                continue
            pair, gates = payload
            qa, qb = sorted(pair)
            u = _block_unitary(gates, qa, qb)
            pa, pb = wire_map[qa], wire_map[qb]
            blocks += 1
            if options.mirror:
                seq, was_mirrored, cost, direct_cost = mirror_swap_choice(
                    u, native=spec.native_two_qubit, wires=(pa, pb))
                if was_mirrored:
                    mirrored_blocks += 1
                    for w in range(len(wire_map)):
                        if wire_map[w] == pa:
                            wire_map[w] = pb
                        elif wire_map[w] == pb:
                            wire_map[w] = pa
            else:
                seq, coords = block_to_native(u, native=spec.native_two_qubit, wires=(pa, pb))
                cost = direct_cost = coords.entangling_cost
            chosen_angle += cost
            unmirrored_angle += direct_cost
            out.extend(seq)
        relabel = tuple(wire_map[w] for w in work.relabeling)
    else:
        for g in work.gates:
            if g.kind == "CRY":
                lowered: list[Gate] = []
                for sub in decompose_cry(g):
                    lowered.extend(_lower_fixed(sub, spec))
                out.extend(lowered)
            else:
                out.extend(_lower_fixed(g, spec))
        relabel = work.relabeling
        chosen_angle = unmirrored_angle = sum(entangling_angle(g) for g in out)

    merged = merge_single_qubit_runs(out, work.width, spec)
    result = replace(work, gates=tuple(merged), relabeling=relabel)
    _validate(result, spec)
    report = CompilationReport(
        gate_census=result.gate_census(),
        two_qubit_count=result.two_qubit_count(),
        total_entangling_angle=sum(entangling_angle(g) for g in result.gates),
        unmirrored_entangling_angle=unmirrored_angle,
        swap_count=swap_count,
        blocks=blocks,
        mirrored_blocks=mirrored_blocks,
    )
    return result, report


def _lower_fixed(g: Gate, spec: GateSetSpec) -> list[Gate]:
    """Lower a non-CRY gate to the native two-qubit basis (1q gates pass through)."""
    if g.n_qubits == 1:
        return [g]
    if g.kind == spec.native_two_qubit:
        return [g]
    if g.kind == "CNOT":
        if spec.native_two_qubit == "MS_XX":
            return cnot_to_msxx(g)
        if spec.native_two_qubit == "CZ":
            return cnot_to_cz(g)
        seq, _ = block_to_native(gate_matrix(g), native="ZZ", wires=g.qubits)
        return seq
    if g.kind == "SWAP":
        if spec.native_two_qubit == "CZ":
            return swap_to_cz(g)
        seq, _ = block_to_native(gate_matrix(g), native=spec.native_two_qubit, wires=g.qubits)
        return seq
    raise ValueError(f"cannot lower {g.kind} to {spec.native_two_qubit}")
