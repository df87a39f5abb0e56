"""Gate-level circuit IR, population-to-circuit synthesis, and ideal execution.

Bit ordering convention, used everywhere (counts, files, tests): qubit 0 is
the least significant bit of a basis-state index, i.e. the rightmost
character of a bitstring.  Gate matrices are written in the textbook
convention where the first listed qubit is the most significant index of the
gate-local matrix.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Gate",
    "Circuit",
    "Counts",
    "gate_matrix",
    "synthesize_qmarina",
    "qmarina_angles",
    "simulate_statevector",
    "sample_counts",
    "unitary_of",
    "circuit_to_text",
    "circuit_from_text",
]

# kind -> (number of qubits, number of angle parameters)
GATE_SIGNATURES: dict[str, tuple[int, int]] = {
    "X": (1, 0),
    "H": (1, 0),
    "RX": (1, 1),
    "RY": (1, 1),
    "RZ": (1, 1),
    "U1q": (1, 3),
    "CRY": (2, 1),
    "CNOT": (2, 0),
    "CZ": (2, 0),
    "ZZ": (2, 1),
    "MS_XX": (2, 1),
    "SWAP": (2, 0),
}

TWO_QUBIT_KINDS = frozenset(k for k, (n, _) in GATE_SIGNATURES.items() if n == 2)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_SIGNATURES:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        n_q, n_p = GATE_SIGNATURES[self.kind]
        if len(self.qubits) != n_q:
            raise ValueError(f"{self.kind} takes {n_q} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubits in {self.kind}: {self.qubits}")
        if len(self.params) != n_p:
            raise ValueError(f"{self.kind} takes {n_p} parameters, got {self.params}")

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]).astype(complex)


def _u1q(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of the gate in its own qubit order (first listed qubit = most significant)."""
    k, p = gate.kind, gate.params
    if k == "X":
        return _X
    if k == "H":
        return _H
    if k == "RX":
        return _rx(p[0])
    if k == "RY":
        return _ry(p[0])
    if k == "RZ":
        return _rz(p[0])
    if k == "U1q":
        return _u1q(*p)
    if k == "CNOT":
        return _CNOT
    if k == "CZ":
        return _CZ
    if k == "SWAP":
        return _SWAP
    if k == "CRY":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = _ry(p[0])
        return m
    if k == "ZZ":
        # exp(-i (theta/2) Z otimes Z)
        ph = np.exp(-0.5j * p[0])
        return np.diag([ph, ph.conjugate(), ph.conjugate(), ph]).astype(complex)
    if k == "MS_XX":
        # exp(-i (theta/2) X otimes X)
        c, s = np.cos(p[0] / 2), np.sin(p[0] / 2)
        m = np.eye(4, dtype=complex) * c
        m += -1j * s * np.fliplr(np.eye(4, dtype=complex))
        return m
    raise ValueError(f"unknown gate kind {k!r}")


def gate_inverse(gate: Gate) -> Gate:
    """Inverse of a gate as a gate of the same kind (angle-negated where needed)."""
    if gate.kind in ("X", "H", "CNOT", "CZ", "SWAP"):
        return gate
    if gate.kind == "U1q":
        theta, phi, lam = gate.params
        return Gate("U1q", gate.qubits, (-theta, -lam, -phi))
    return Gate(gate.kind, gate.qubits, tuple(-p for p in gate.params))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over `width` wires with role bookkeeping.

    `cavity_wire` / `emitter_wires` assign roles to *logical* qubits,
    i.e. positions after the readout relabeling has been applied.
    `relabeling[j]` is the physical wire whose measured bit is reported as
    logical bit j; passes that virtually move qubits (mirror SWAPs, routing)
    update it so the logical distribution is invariant.
    """

    width: int
    gates: tuple[Gate, ...]
    cavity_wire: int = 0
    emitter_wires: tuple[int, ...] = ()
    relabeling: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.emitter_wires:
            object.__setattr__(self, "emitter_wires", tuple(range(1, self.width)))
        object.__setattr__(self, "emitter_wires", tuple(self.emitter_wires))
        if not self.relabeling:
            object.__setattr__(self, "relabeling", tuple(range(self.width)))
        object.__setattr__(self, "relabeling", tuple(self.relabeling))
        if sorted(self.relabeling) != list(range(self.width)):
            raise ValueError("relabeling must be a permutation of all wires")
        role_wires = (self.cavity_wire, *self.emitter_wires)
        if sorted(role_wires) != list(range(self.width)):
            raise ValueError("roles must form a bijection onto the wires")
        for g in self.gates:
            if any(q >= self.width or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g} outside width {self.width}")

    @property
    def n_emitters(self) -> int:
        return len(self.emitter_wires)

    @property
    def roles(self) -> dict[int, str]:
        """Logical wire -> role name."""
        out = {self.cavity_wire: "cavity_env"}
        for i, w in enumerate(self.emitter_wires, start=1):
            out[w] = f"emitter{i}"
        return out

    def with_gates(self, gates) -> "Circuit":
        return replace(self, gates=tuple(gates))

    def gate_census(self) -> dict[str, int]:
        census: dict[str, int] = {}
        for g in self.gates:
            census[g.kind] = census.get(g.kind, 0) + 1
        return census

    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if g.n_qubits == 2)


@dataclass(frozen=True)
class Counts:
    """Shot counts keyed by logical bitstring (qubit 0 rightmost)."""

    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("negative count")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    def merged(self, other: "Counts") -> "Counts":
        merged = dict(self.counts)
        for k, v in other.counts.items():
            merged[k] = merged.get(k, 0) + v
        return Counts(merged, self.shots + other.shots)


# ---------------------------------------------------------------------------
# Synthesis

def qmarina_angles(target_emitters: np.ndarray, p_cav_env: float, excited: int,
                   eps: float = 1e-12) -> np.ndarray:
    """Controlled-Y angles matching the target populations sequentially.

    theta_1 loads the residual 1 - p_excited onto the cavity qubit; each
    following theta_i peels emitter i's population out of the remaining
    residual.  Degenerate residuals (<= eps) emit theta = 0.
    """
    n = len(target_emitters)
    p = np.asarray(target_emitters, dtype=float)
    total = p.sum() + p_cav_env
    if np.any(p < -1e-10) or p_cav_env < -1e-10 or abs(total - 1.0) > 1e-9:
        raise ValueError("target is not a valid population distribution")
    thetas = np.zeros(n)
    p_exc = min(p[excited - 1], 1.0)
    thetas[0] = 2.0 * np.arccos(np.sqrt(p_exc))
    residual = 1.0 - p_exc
    k = 1
    for i in range(n):
        if i == excited - 1:
            continue
        if residual <= eps:
            thetas[k] = 0.0
        else:
            ratio = p[i] / residual
            if ratio > 1.0 + 1e-9:
                raise ValueError(f"inconsistent target: emitter {i + 1} needs {p[i]} "
                                 f"from residual {residual}")
            thetas[k] = 2.0 * np.arcsin(np.sqrt(min(ratio, 1.0)))
            residual = max(residual - p[i], 0.0)
        k += 1
    return thetas


def synthesize_qmarina(target, excited: int | None = None) -> tuple[Circuit, np.ndarray]:
    """Emit the 2N+1 gate circuit whose ideal output reproduces `target`.

    `target` is a PopulationDistribution (or anything with p_emitters /
    p_cav_env).  Wire layout: cavity on wire 0, emitter i on wire i.
    Structure: X on the excited emitter; CRY (control = excited emitter,
    target = cavity) then CNOT (control = cavity, target = excited emitter);
    then per remaining emitter i, CRY (control = cavity, target = emitter i)
    and CNOT (control = emitter i, target = cavity).
    """
    p_em = np.asarray(target.p_emitters, dtype=float)
    n = len(p_em)
    if excited is None:
        excited = 1
    if not 1 <= excited <= n:
        raise ValueError("excited emitter index out of range")
    thetas = qmarina_angles(p_em, float(target.p_cav_env), excited)
    cav = 0
    gates = [Gate("X", (excited,))]
    gates.append(Gate("CRY", (excited, cav), (thetas[0],)))
    gates.append(Gate("CNOT", (cav, excited)))
    k = 1
    for i in range(1, n + 1):
        if i == excited:
            continue
        gates.append(Gate("CRY", (cav, i), (thetas[k],)))
        gates.append(Gate("CNOT", (i, cav)))
        k += 1
    circ = Circuit(width=n + 1, gates=tuple(gates), cavity_wire=cav,
                   emitter_wires=tuple(range(1, n + 1)))
    return circ, thetas


# ---------------------------------------------------------------------------
# Execution

def _apply_gate(state: np.ndarray, gate: Gate, width: int) -> np.ndarray:
    """Apply gate to a statevector shaped (2,)*width with axis k = qubit (width-1-k)."""
    k = gate.n_qubits
    axes = [width - 1 - q for q in gate.qubits]
    tensor = gate_matrix(gate).reshape((2,) * (2 * k))
    # contract gate input indices against the acted-on qubit axes, then put
    # the fresh output indices back where those axes were
    state = np.tensordot(tensor, state, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(state, list(range(k)), axes)


def statevector_of(circuit: Circuit) -> np.ndarray:
    """Final statevector over physical wires (before readout relabeling)."""
    state = np.zeros((2,) * circuit.width, dtype=complex)
    state[(0,) * circuit.width] = 1.0
    for gate in circuit.gates:
        state = _apply_gate(state, gate, circuit.width)
    return state.reshape(-1)


def _apply_relabeling(probs: np.ndarray, relabeling: tuple[int, ...]) -> np.ndarray:
    """Permute a probability vector from physical to logical bit order."""
    width = len(relabeling)
    if tuple(relabeling) == tuple(range(width)):
        return probs
    t = probs.reshape((2,) * width)
    # logical bit j reads physical wire relabeling[j]; axis of qubit q is width-1-q
    perm = [width - 1 - relabeling[width - 1 - ax] for ax in range(width)]
    return np.transpose(t, perm).reshape(-1)


def simulate_statevector(circuit: Circuit) -> np.ndarray:
    """Exact output probabilities over logical basis states (relabeling applied)."""
    if circuit.width > 24:
        raise ValueError("statevector simulation limited to 24 qubits")
    psi = statevector_of(circuit)
    probs = np.abs(psi) ** 2
    return _apply_relabeling(probs, circuit.relabeling)


def bitstring(index: int, width: int) -> str:
    return format(index, f"0{width}b")


def sample_counts(circuit: Circuit, shots: int, seed: int) -> Counts:
    """Multinomial shot sample of the exact distribution; deterministic per seed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = simulate_statevector(circuit)
    return sample_from_probs(probs, circuit.width, shots, seed)


def sample_from_probs(probs: np.ndarray, width: int, shots: int, seed: int) -> Counts:
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, probs)
    counts = {bitstring(i, width): int(c) for i, c in enumerate(draws) if c > 0}
    return Counts(counts, shots)


def unitary_of(circuit: Circuit) -> np.ndarray:
    """Full unitary over physical wires (relabeling is a readout step, not folded in)."""
    if circuit.width > 10:
        raise ValueError("unitary construction limited to 10 qubits")
    dim = 2 ** circuit.width
    u = np.eye(dim, dtype=complex).reshape((2,) * circuit.width + (dim,))
    for gate in circuit.gates:
        mat = gate_matrix(gate)
        axes = [circuit.width - 1 - q for q in gate.qubits]
        tensor = mat.reshape((2,) * (2 * gate.n_qubits))
        u = np.tensordot(tensor, u, axes=(list(range(gate.n_qubits, 2 * gate.n_qubits)), axes))
        u = np.moveaxis(u, list(range(gate.n_qubits)), axes)
    return u.reshape(dim, dim)


def populations_from_probs(probs: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Hamming-weight-1 population vector (p_1..p_N, p_cav_env) from a logical distribution.

    Only weight-1 basis states carry signal; their probabilities are taken
    as-is (callers postselect/renormalize as needed).
    """
    n = circuit.n_emitters
    out = np.zeros(n + 1)
    for i, w in enumerate(circuit.emitter_wires):
        out[i] = probs[1 << w]
    out[n] = probs[1 << circuit.cavity_wire]
    return out


# ---------------------------------------------------------------------------
# Serialization: header lines then one `KIND q0[,q1][,angle_rad]` line per gate.

def circuit_to_text(circuit: Circuit) -> str:
    buf = io.StringIO()
    buf.write(f"width {circuit.width}\n")
    buf.write(f"role {circuit.cavity_wire} cavity_env\n")
    for i, w in enumerate(circuit.emitter_wires, start=1):
        buf.write(f"role {w} emitter{i}\n")
    buf.write("relabel " + ",".join(str(q) for q in circuit.relabeling) + "\n")
    for g in circuit.gates:
        fields = [str(q) for q in g.qubits] + [repr(p) for p in g.params]
        buf.write(f"{g.kind} " + ",".join(fields) + "\n")
    return buf.getvalue()


def circuit_from_text(text: str) -> Circuit:
    width = None
    cavity = 0
    emitters: dict[int, int] = {}
    relabel: tuple[int, ...] = ()
    gates: list[Gate] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head == "width":
            width = int(rest)
        elif head == "role":
            wire_s, role = rest.split()
            wire = int(wire_s)
            if role == "cavity_env":
                cavity = wire
            elif role.startswith("emitter"):
                emitters[int(role[len("emitter"):])] = wire
            else:
                raise ValueError(f"unknown role {role!r}")
        elif head == "relabel":
            relabel = tuple(int(x) for x in rest.split(","))
        elif head in GATE_SIGNATURES:
            n_q, n_p = GATE_SIGNATURES[head]
            parts = rest.split(",")
            if len(parts) != n_q + n_p:
                raise ValueError(f"bad gate line: {line!r}")
            qubits = tuple(int(x) for x in parts[:n_q])
            params = tuple(float(x) for x in parts[n_q:])
            gates.append(Gate(head, qubits, params))
        else:
            raise ValueError(f"unrecognized line: {line!r}")
    if width is None:
        raise ValueError("missing width header")
    emitter_wires = tuple(emitters[i] for i in sorted(emitters))
    return Circuit(width=width, gates=tuple(gates), cavity_wire=cavity,
                   emitter_wires=emitter_wires, relabeling=relabel)
