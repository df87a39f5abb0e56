"""Noisy density-matrix execution of compiled circuits.

Error channels, applied gate by gate: depolarizing (per gate, optionally per
qubit pair), coherent over-rotation folded into gate angles, stochastic
amplitude jitter on MS/ZZ angles resampled per shot batch, and readout
bit flips applied to the output distribution.  A model with no active
channel delegates to the ideal sampler, so zero noise reproduces it exactly,
including the sampling seed path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    Circuit,
    Counts,
    Gate,
    gate_matrix,
    sample_counts,
    sample_from_probs,
    _apply_relabeling,
)

__all__ = [
    "NoiseModel",
    "FidelityTable",
    "noise_from_fidelity",
    "parse_fidelity_table",
    "load_fidelity_table",
    "noisy_distribution",
    "apply_noisy",
]

_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1, -1]).astype(complex),
)

_H2 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

# gates whose angle scales under coherent over-rotation / amplitude jitter
_ANGLED_KINDS = frozenset({"RX", "RY", "RZ", "CRY", "ZZ", "MS_XX", "U1q"})
_JITTERED_KINDS = frozenset({"ZZ", "MS_XX"})


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate-class error channels.

    depol_2q may be a single probability or a mapping {frozenset({a, b}):
    probability}; unlisted pairs fall back to the mean of the listed values.
    coherent_overrotation maps gate kind to a fractional angle error
    (e.g. {"ZZ": 0.03} stretches every ZZ angle by 3%); for the fixed-angle
    CZ/CNOT the stretch acts on their controlled-phase generator.
    amplitude_noise_coeff is the standard deviation of multiplicative angle
    jitter per unit |angle| on MS_XX/ZZ gates, resampled each shot batch.
    """

    depol_1q: float = 0.0
    depol_2q: float | dict = 0.0
    coherent_overrotation: dict = field(default_factory=dict)
    amplitude_noise_coeff: float = 0.0
    spam_flip: float = 0.0
    seed: int = 0

    def __post_init__(self):
        probs = [self.depol_1q, self.spam_flip]
        if isinstance(self.depol_2q, dict):
            probs.extend(self.depol_2q.values())
        else:
            probs.append(self.depol_2q)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("depolarizing/SPAM probabilities must lie in [0, 1]")
        if self.amplitude_noise_coeff < 0:
            raise ValueError("amplitude_noise_coeff must be >= 0")

    def depol_for_pair(self, qa: int, qb: int) -> float:
        if not isinstance(self.depol_2q, dict):
            return float(self.depol_2q)
        key = frozenset((qa, qb))
        if key in self.depol_2q:
            return float(self.depol_2q[key])
        return float(np.mean(list(self.depol_2q.values())))

    def is_trivial(self) -> bool:
        depol2 = (any(v > 0 for v in self.depol_2q.values())
                  if isinstance(self.depol_2q, dict) else self.depol_2q > 0)
        return not (self.depol_1q > 0 or depol2 or self.spam_flip > 0
                    or self.amplitude_noise_coeff > 0
                    or any(v != 0 for v in self.coherent_overrotation.values()))


@dataclass(frozen=True)
class FidelityTable:
    """Measured entangling-gate fidelities per qubit pair, plus a 1q scalar."""

    pairs: dict
    single_qubit: float

    def __post_init__(self):
        vals = list(self.pairs.values()) + [(self.single_qubit, 0.0, 0.0)]
        for f, _, _ in vals:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"fidelity {f} outside (0, 1]")


def parse_fidelity_table(text: str) -> FidelityTable:
    """Plain-text table: `pair qA,qB <label> <fidelity> +u -u` lines and one `single <f>`."""
    pairs: dict = {}
    single = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "pair":
            qa, qb = (int(tok.lstrip("q")) for tok in parts[1].split(","))
            fid = float(parts[3])
            plus = float(parts[4]) if len(parts) > 4 else 0.0
            minus = abs(float(parts[5])) if len(parts) > 5 else 0.0
            pairs[frozenset((qa, qb))] = (fid, plus, minus)
        elif parts[0] == "single":
            single = float(parts[1])
        else:
            raise ValueError(f"unrecognized fidelity table line: {line!r}")
    if single is None or not pairs:
        raise ValueError("fidelity table needs pair lines and a single line")
    return FidelityTable(pairs=pairs, single_qubit=single)


def load_fidelity_table(path) -> FidelityTable:
    with open(path) as fh:
        return parse_fidelity_table(fh.read())


def noise_from_fidelity(table: FidelityTable, coherent_overrotation: dict | None = None,
                        amplitude_noise_coeff: float = 0.0, spam_flip: float = 0.0,
                        seed: int = 0) -> NoiseModel:
    """Depolarizing model from average gate fidelities: p = (1 - F) * d / (d - 1).

    d = 4 per pair, d = 2 for single-qubit gates (average-gate-fidelity
    convention; recorded in the run report).
    """
    depol_2q = {pair: (1.0 - f) * 4.0 / 3.0 for pair, (f, _, _) in table.pairs.items()}
    depol_1q = (1.0 - table.single_qubit) * 2.0
    return NoiseModel(depol_1q=depol_1q, depol_2q=depol_2q,
                      coherent_overrotation=dict(coherent_overrotation or {}),
                      amplitude_noise_coeff=amplitude_noise_coeff,
                      spam_flip=spam_flip, seed=seed)


# ---------------------------------------------------------------------------
# Density-matrix machinery
#
# The density matrix is kept as a tensor of shape (2,)*(2*width): ket axes
# first, bra axes second, with axis (width-1-q) for qubit q on each side.
# Gates touch only their own axes, so the cost per gate is O(4^width * 4^k)
# instead of the O(8^width) of full-matrix conjugation.


def _apply_unitary(rho: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...],
                   width: int) -> np.ndarray:
    k = len(qubits)
    tensor = mat.reshape((2,) * (2 * k))
    in_idx = list(range(k, 2 * k))
    ket_axes = [width - 1 - q for q in qubits]
    bra_axes = [width + a for a in ket_axes]
    rho = np.tensordot(tensor, rho, axes=(in_idx, ket_axes))
    rho = np.moveaxis(rho, list(range(k)), ket_axes)
    rho = np.tensordot(tensor.conj(), rho, axes=(in_idx, bra_axes))
    return np.moveaxis(rho, list(range(k)), bra_axes)


def _noisy_gate_matrix(gate: Gate, noise: NoiseModel, jitter: float) -> np.ndarray:
    """Gate matrix with coherent over-rotation and amplitude jitter folded in."""
    stretch = 1.0 + noise.coherent_overrotation.get(gate.kind, 0.0) + jitter
    if stretch == 1.0:
        return gate_matrix(gate)
    if gate.kind in _ANGLED_KINDS:
        params = (gate.params[0] * stretch,) + gate.params[1:]
        return gate_matrix(Gate(gate.kind, gate.qubits, params))
    if gate.kind == "X":
        return gate_matrix(Gate("RX", gate.qubits, (np.pi * stretch,)))
    if gate.kind in ("CZ", "CNOT"):
        cphase = np.diag([1, 1, 1, np.exp(1j * np.pi * stretch)]).astype(complex)
        if gate.kind == "CZ":
            return cphase
        wrap = np.kron(np.eye(2), _H2)
        return wrap @ cphase @ wrap
    return gate_matrix(gate)  # H, SWAP: no over-rotation convention


def _depolarize(rho: np.ndarray, qubits: tuple[int, ...], width: int,
                p: float) -> np.ndarray:
    """(1 - p) rho + p * (maximally mixed on `qubits`) ox tr_qubits(rho)."""
    if p <= 0:
        return rho
    d_sub = 2 ** len(qubits)
    mixed = rho
    for q in qubits:
        ket, bra = width - 1 - q, 2 * width - 1 - q
        traced = np.trace(mixed, axis1=ket, axis2=bra)
        # re-insert an identity/2 factor at the traced-out axis pair
        eye = np.eye(2).reshape(2, 2, *([1] * traced.ndim))
        mixed = np.moveaxis(eye * traced[None, None, ...], (0, 1), (ket, bra))
    return (1.0 - p) * rho + p * (mixed / d_sub)


def _apply_spam(probs: np.ndarray, width: int, flip: float) -> np.ndarray:
    if flip <= 0:
        return probs
    t = probs.reshape((2,) * width)
    for q in range(width):
        ax = width - 1 - q
        t = (1.0 - flip) * t + flip * np.flip(t, axis=ax)
    return t.reshape(-1)


def noisy_distribution(circuit: Circuit, noise: NoiseModel,
                       jitter_rng: np.random.Generator | None = None) -> np.ndarray:
    """Output distribution over logical bitstrings under the noise model.

    jitter_rng supplies one multiplicative angle draw per MS/ZZ gate; pass
    None for jitter-free evaluation.
    """
    width = circuit.width
    if width > 10:
        raise ValueError("density-matrix simulation limited to 10 qubits")
    rho = np.zeros((2,) * (2 * width), dtype=complex)
    rho[(0,) * (2 * width)] = 1.0
    sigma = noise.amplitude_noise_coeff
    for gate in circuit.gates:
        jitter = 0.0
        if sigma > 0 and jitter_rng is not None and gate.kind in _JITTERED_KINDS:
            jitter = sigma * float(jitter_rng.standard_normal())
        rho = _apply_unitary(rho, _noisy_gate_matrix(gate, noise, jitter),
                             gate.qubits, width)
        if gate.n_qubits == 1:
            rho = _depolarize(rho, gate.qubits, width, noise.depol_1q)
        else:
            rho = _depolarize(rho, gate.qubits, width,
                              noise.depol_for_pair(*gate.qubits))
    dim = 2 ** width
    mat = rho.reshape(dim, dim)
    tr = float(np.real(np.trace(mat)))
    if abs(tr - 1.0) > 1e-9:
        raise FloatingPointError(f"density matrix trace drifted to {tr}")
    probs = np.clip(np.real(np.diag(mat)), 0.0, None)
    probs = _apply_spam(probs, width, noise.spam_flip)
    probs = probs / probs.sum()
    return _apply_relabeling(probs, circuit.relabeling)


def apply_noisy(circuit: Circuit, noise: NoiseModel, shots: int, seed: int,
                jitter_batches: int = 10) -> Counts:
    """Sample counts from the noisy circuit; deterministic for fixed arguments.

    With amplitude jitter active, shots are split into `jitter_batches`
    batches, each with independently drawn gate-angle jitter.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if noise.is_trivial():
        return sample_counts(circuit, shots, seed)
    if noise.amplitude_noise_coeff <= 0:
        probs = noisy_distribution(circuit, noise)
        return sample_from_probs(probs, circuit.width, shots, seed)
    batch_seeds = np.random.SeedSequence((seed, noise.seed)).spawn(jitter_batches)
    base, extra = divmod(shots, jitter_batches)
    merged: Counts | None = None
    for i, ss in enumerate(batch_seeds):
        n_i = base + (1 if i < extra else 0)
        if n_i == 0:
            continue
        rng = np.random.default_rng(ss)
        probs = noisy_distribution(circuit, noise, jitter_rng=rng)
        counts = sample_from_probs(probs, circuit.width, n_i,
                                   int(rng.integers(2 ** 63)))
        merged = counts if merged is None else merged.merged(counts)
    return merged
