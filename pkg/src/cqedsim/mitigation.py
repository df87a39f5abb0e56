"""Error-mitigation stack: postselection, identical-emitter averaging,
randomized compiling, and noise amplification with zero-noise extrapolation.

Postselection keeps only Hamming-weight-1 outcomes (total excitation number
is conserved by the ideal dynamics, so anything else is an error).
Randomized compiling wraps every two-qubit gate in random Pauli frames that
cancel logically; NOX replaces each two-qubit gate H by H (H^-1 H)^alpha and
extrapolates measured populations back to zero insertions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .circuit import (
    Circuit,
    Counts,
    Gate,
    gate_inverse,
    gate_matrix,
)
from .model import PopulationDistribution
from .transpiler import GateSetSpec, allclose_up_to_global_phase, merge_single_qubit_runs

__all__ = [
    "MitigationConfig",
    "postselect",
    "populations_from_counts",
    "raw_populations",
    "average_identical_emitters",
    "randomize_compile",
    "nox_amplify",
    "nox_extrapolate",
]


@dataclass(frozen=True)
class MitigationConfig:
    postselect: bool = True
    average_identical: tuple[int, ...] = ()
    rc_randomizations: int = 0
    nox_factors: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "average_identical", tuple(self.average_identical))
        object.__setattr__(self, "nox_factors", tuple(self.nox_factors))
        if self.rc_randomizations != 0 and not 2 <= self.rc_randomizations <= 10000:
            raise ValueError("rc_randomizations must be 0 or in [2, 10000]")
        if list(self.nox_factors) != sorted(self.nox_factors):
            raise ValueError("nox_factors must be sorted")
        if any(f < 1 or f % 2 == 0 for f in self.nox_factors):
            raise ValueError("nox_factors must be odd and >= 1")


def postselect(counts: Counts) -> tuple[Counts, float]:
    """Retain Hamming-weight-1 bitstrings; returns (retained, discard_fraction)."""
    kept = {b: c for b, c in counts.counts.items() if b.count("1") == 1}
    n_kept = sum(kept.values())
    discard = 1.0 - n_kept / counts.shots if counts.shots else 0.0
    return Counts(kept, n_kept), discard


def populations_from_counts(counts: Counts, circuit: Circuit) -> PopulationDistribution | None:
    """Populations from postselected counts; None when no shots survived."""
    if counts.shots == 0:
        return None
    n = circuit.n_emitters
    vec = np.zeros(n + 1)
    width = circuit.width
    for b, c in counts.counts.items():
        if b.count("1") != 1:
            raise ValueError("populations_from_counts expects postselected counts")
        wire = width - 1 - b.index("1")
        if wire == circuit.cavity_wire:
            vec[n] += c
        else:
            vec[circuit.emitter_wires.index(wire)] += c
    vec = vec / counts.shots
    return PopulationDistribution(p_emitters=vec[:-1], p_cav_env=float(vec[-1]))


def raw_populations(counts: Counts, circuit: Circuit) -> PopulationDistribution | None:
    """Non-postselected populations: per-role excitation marginals, renormalized.

    Raw counts need not conserve excitation number, so the marginals are
    scaled to sum to one to remain a comparable distribution.
    """
    if counts.shots == 0:
        return None
    n = circuit.n_emitters
    width = circuit.width
    vec = np.zeros(n + 1)
    for b, c in counts.counts.items():
        for pos, ch in enumerate(b):
            if ch != "1":
                continue
            wire = width - 1 - pos
            if wire == circuit.cavity_wire:
                vec[n] += c
            else:
                vec[circuit.emitter_wires.index(wire)] += c
    total = vec.sum()
    if total == 0:
        return None
    vec = vec / total
    return PopulationDistribution(p_emitters=vec[:-1], p_cav_env=float(vec[-1]))


def average_identical_emitters(pops: PopulationDistribution, identical,
                               excited: int) -> PopulationDistribution:
    """Replace the listed emitters' populations by their mean.

    Emitters prepared identically (same coupling, same initial ground state)
    have equal exact populations, so averaging halves-ish the sampling
    variance without bias.  The initially excited emitter is not identical
    to the rest and must not be included.
    """
    identical = tuple(identical)
    if not identical:
        return pops
    if excited in identical:
        raise ValueError("cannot average the initially excited emitter")
    if any(not 1 <= i <= pops.n_emitters for i in identical):
        raise ValueError("emitter index out of range")
    p = pops.p_emitters.copy()
    idx = [i - 1 for i in identical]
    p[idx] = p[idx].mean()
    return PopulationDistribution(p_emitters=p, p_cav_env=pops.p_cav_env)


# ---------------------------------------------------------------------------
# Randomized compiling

_PAULI_GATES = {
    0: None,
    1: ("RX", np.pi),
    2: ("RY", np.pi),
    3: ("RZ", np.pi),
}
_PAULI_MATS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1, -1]).astype(complex),
)
# per-qubit sign of P G P vs G for generators Z (ZZ gates) and X (MS gates)
_SIGN_UNDER_Z = {0: 1, 1: -1, 2: -1, 3: 1}
_SIGN_UNDER_X = {0: 1, 1: 1, 2: -1, 3: -1}

_CLIFFORD_FRAME_CACHE: dict[str, dict] = {}


def _pauli_gate(idx: int, wire: int) -> list[Gate]:
    entry = _PAULI_GATES[idx]
    if entry is None:
        return []
    kind, angle = entry
    return [Gate(kind, (wire,), (angle,))]


def _clifford_frame_table(kind: str) -> dict:
    """(pa, pb) -> (qa, qb) with G (Pa ox Pb) G^dag = phase * (Qa ox Qb)."""
    if kind not in _CLIFFORD_FRAME_CACHE:
        g = gate_matrix(Gate(kind, (0, 1)))
        table = {}
        for pa in range(4):
            for pb in range(4):
                m = g @ np.kron(_PAULI_MATS[pa], _PAULI_MATS[pb]) @ g.conj().T
                for qa in range(4):
                    for qb in range(4):
                        if allclose_up_to_global_phase(
                                m, np.kron(_PAULI_MATS[qa], _PAULI_MATS[qb]), 1e-9):
                            table[(pa, pb)] = (qa, qb)
                            break
                    else:
                        continue
                    break
        _CLIFFORD_FRAME_CACHE[kind] = table
    return _CLIFFORD_FRAME_CACHE[kind]


def _twirl_gate(gate: Gate, pa: int, pb: int) -> tuple[list[Gate], Gate, list[Gate]]:
    """Random Pauli frame around one two-qubit gate: (before, gate', after).

    before * gate' * after composes (in time order) to the original gate up
    to global phase.
    """
    wa, wb = gate.qubits
    before = _pauli_gate(pa, wa) + _pauli_gate(pb, wb)
    if gate.kind in ("ZZ", "MS_XX"):
        signs = _SIGN_UNDER_Z if gate.kind == "ZZ" else _SIGN_UNDER_X
        s = signs[pa] * signs[pb]
        out_gate = Gate(gate.kind, gate.qubits, (s * gate.params[0],))
        after = _pauli_gate(pa, wa) + _pauli_gate(pb, wb)
        return before, out_gate, after
    if gate.kind in ("CZ", "CNOT", "SWAP"):
        qa, qb = _clifford_frame_table(gate.kind)[(pa, pb)]
        after = _pauli_gate(qa, wa) + _pauli_gate(qb, wb)
        return before, gate, after
    raise ValueError(f"cannot twirl two-qubit gate {gate.kind}")


def randomize_compile(circuit: Circuit, n: int, seed: int,
                      spec: GateSetSpec | None = None) -> list[Circuit]:
    """n logically equivalent circuits with random Pauli frames per 2q gate.

    Frames are merged into neighboring single-qubit gates so the two-qubit
    gate count and placement are unchanged.
    """
    if n < 2:
        raise ValueError("need at least 2 randomizations")
    spec = spec or GateSetSpec(native_two_qubit="ZZ")
    out = []
    for k in range(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        gates: list[Gate] = []
        for g in circuit.gates:
            if g.n_qubits != 2:
                gates.append(g)
                continue
            pa, pb = int(rng.integers(4)), int(rng.integers(4))
            before, mid, after = _twirl_gate(g, pa, pb)
            gates.extend(before)
            gates.append(mid)
            gates.extend(after)
        merged = merge_single_qubit_runs(gates, circuit.width, spec)
        out.append(replace(circuit, gates=tuple(merged)))
    return out


# ---------------------------------------------------------------------------
# Noise amplification and extrapolation

def nox_amplify(circuit: Circuit, lam: int) -> Circuit:
    """Replace each two-qubit gate H by H followed by (lam-1)/2 pairs (H^-1, H)."""
    if lam < 1 or lam % 2 == 0:
        raise ValueError("amplification factor must be odd and >= 1")
    if lam == 1:
        return circuit
    gates: list[Gate] = []
    for g in circuit.gates:
        gates.append(g)
        if g.n_qubits == 2:
            inv = gate_inverse(g)
            for _ in range((lam - 1) // 2):
                gates.extend((inv, g))
    return replace(circuit, gates=tuple(gates))


def nox_extrapolate(results: dict, order: int = 1):
    """Least-squares fit of populations vs amplification factor, evaluated at 0.

    `results` maps odd factor -> list of PopulationDistribution (one per time
    step).  Returns (populations per step, clipped flags per step); outputs
    are clipped to [0, 1] and renormalized, flagging steps where clipping
    fired.
    """
    lams = sorted(results)
    if len(lams) < 2:
        raise ValueError("extrapolation needs at least two factors")
    n_steps = len(results[lams[0]])
    if any(len(results[lam]) != n_steps for lam in lams):
        raise ValueError("per-factor series must share the time grid")
    xs = np.array(lams, dtype=float)
    out: list[PopulationDistribution] = []
    clipped: list[bool] = []
    for step in range(n_steps):
        ys = np.stack([results[lam][step].as_array() for lam in lams])
        coeffs = np.polyfit(xs, ys, deg=min(order, len(lams) - 1))
        intercept = coeffs[-1]
        clip = bool(np.any(intercept < 0) or np.any(intercept > 1))
        vec = np.clip(intercept, 0.0, 1.0)
        total = vec.sum()
        if total <= 0:
            raise ArithmeticError(f"extrapolated distribution vanished at step {step}")
        vec = vec / total
        out.append(PopulationDistribution(p_emitters=vec[:-1], p_cav_env=float(vec[-1])))
        clipped.append(clip)
    return out, clipped
