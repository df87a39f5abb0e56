"""Exact reference dynamics of the open Tavis-Cummings system.

Two independent solvers are provided: a fast non-Hermitian propagator
restricted to the single-excitation subspace, and a full density-matrix
integrator over the truncated emitters+cavity Hilbert space.  They must
agree; the tests treat the density-matrix integrator as the oracle.

Unit convention: all rates and frequencies are angular, in rad/ns, with
hbar = 1, so ``g * t`` is dimensionless.  Evolution is carried out in the
frame rotating at the cavity frequency, so a resonant system has zero
diagonal Hermitian part.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "TCParams",
    "OperatorSet",
    "SingleExcitationState",
    "PopulationDistribution",
    "effective_hamiltonian",
    "evolve_single_excitation",
    "lindblad_oracle",
    "lindblad_trajectory",
    "populations",
    "rabi_frequency",
    "expected_spectral_peak",
]


@dataclass(frozen=True)
class TCParams:
    """Physical description of N two-level emitters coupled to one lossy cavity mode.

    ``couplings`` and ``emitter_freqs`` are per-emitter; ``excited_emitter``
    is the 1-based index of the emitter that starts excited.
    """

    n_emitters: int
    couplings: tuple[float, ...]
    kappa: float
    cavity_freq: float = 0.0
    emitter_freqs: tuple[float, ...] = ()
    excited_emitter: int = 1

    def __post_init__(self):
        if self.n_emitters < 1:
            raise ValueError("n_emitters must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        object.__setattr__(self, "couplings", tuple(float(g) for g in self.couplings))
        freqs = self.emitter_freqs or (self.cavity_freq,) * self.n_emitters
        object.__setattr__(self, "emitter_freqs", tuple(float(w) for w in freqs))
        if len(self.couplings) != self.n_emitters:
            raise ValueError("couplings must have one entry per emitter")
        if len(self.emitter_freqs) != self.n_emitters:
            raise ValueError("emitter_freqs must have one entry per emitter")
        if not 1 <= self.excited_emitter <= self.n_emitters:
            raise ValueError("excited_emitter out of range")

    @classmethod
    def uniform(cls, n_emitters: int, g: float, kappa: float, excited_emitter: int = 1) -> "TCParams":
        """Identical resonant emitters with common coupling g."""
        return cls(n_emitters=n_emitters, couplings=(g,) * n_emitters, kappa=kappa,
                   excited_emitter=excited_emitter)

    def detunings(self) -> np.ndarray:
        return np.array(self.emitter_freqs) - self.cavity_freq


@dataclass(frozen=True)
class SingleExcitationState:
    """Amplitudes over {|e_1>, ..., |e_N>, |1_cav>} plus already-emitted probability."""

    amplitudes: np.ndarray
    p_lost: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        total = float(np.sum(np.abs(amps) ** 2) + self.p_lost)
        if not -1e-10 <= self.p_lost <= 1 + 1e-10:
            raise ValueError(f"p_lost out of [0, 1]: {self.p_lost}")
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"state not normalized: sum |c|^2 + p_lost = {total}")

    @property
    def n_emitters(self) -> int:
        return len(self.amplitudes) - 1


@dataclass(frozen=True)
class PopulationDistribution:
    """Per-emitter excited populations plus the combined cavity/environment population."""

    p_emitters: np.ndarray
    p_cav_env: float

    def __post_init__(self):
        p = np.asarray(self.p_emitters, dtype=float)
        object.__setattr__(self, "p_emitters", p)
        object.__setattr__(self, "p_cav_env", float(self.p_cav_env))
        if np.any(p < -1e-10) or self.p_cav_env < -1e-10:
            raise ValueError("negative population")
        total = float(p.sum() + self.p_cav_env)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"populations sum to {total}, expected 1")

    def as_array(self) -> np.ndarray:
        """Full distribution vector (p_1, ..., p_N, p_cav_env)."""
        return np.append(self.p_emitters, self.p_cav_env)

    @property
    def n_emitters(self) -> int:
        return len(self.p_emitters)


@dataclass(frozen=True)
class OperatorSet:
    """Matrices for the truncated emitters+cavity space used by the density-matrix solver.

    Ordering of tensor factors: emitter 1, ..., emitter N, cavity mode.
    Emitter excited state is |1>; sigma_minus = |0><1|.  Precomputes the
    non-Hermitian half K = H - i(kappa/2) a^dag a so the master equation
    reads rho' = -i(K rho - rho K^dag) + kappa a rho a^dag.
    """

    params: TCParams
    fock_cutoff: int
    a: np.ndarray = field(repr=False, default=None)
    a_dag: np.ndarray = field(repr=False, default=None)
    cavity_number: np.ndarray = field(repr=False, default=None)
    hamiltonian: np.ndarray = field(repr=False, default=None)
    sigma_minus: tuple[np.ndarray, ...] = field(repr=False, default=None)
    number_ops: tuple[np.ndarray, ...] = field(repr=False, default=None)
    _k_half: np.ndarray = field(repr=False, default=None)
    _k_half_dag: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")
        p = self.params
        n_cav = self.fock_cutoff + 1
        a_local = np.diag(np.sqrt(np.arange(1, n_cav)), k=1).astype(complex)
        sm_local = np.array([[0, 1], [0, 0]], dtype=complex)
        sz_local = np.array([[-1, 0], [0, 1]], dtype=complex)

        def embed(op: np.ndarray, slot: int) -> np.ndarray:
            factors = [np.eye(2, dtype=complex)] * p.n_emitters + [np.eye(n_cav, dtype=complex)]
            factors[slot] = op
            out = factors[0]
            for f in factors[1:]:
                out = np.kron(out, f)
            return out

        a_full = embed(a_local, p.n_emitters)
        sms = tuple(embed(sm_local, i) for i in range(p.n_emitters))
        nums = tuple(sm.conj().T @ sm for sm in sms)
        # Rotating frame at cavity_freq: cavity term drops, emitter terms carry detunings.
        h = np.zeros_like(a_full)
        dets = p.detunings()
        for i, sm in enumerate(sms):
            sz = embed(sz_local, i)
            h += 0.5 * dets[i] * sz
            h += p.couplings[i] * (sm.conj().T @ a_full + a_full.conj().T @ sm)
        n_cav_op = a_full.conj().T @ a_full
        k_half = h - 0.5j * p.kappa * n_cav_op
        object.__setattr__(self, "a", a_full)
        object.__setattr__(self, "a_dag", a_full.conj().T.copy())
        object.__setattr__(self, "cavity_number", n_cav_op)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "sigma_minus", sms)
        object.__setattr__(self, "number_ops", nums)
        object.__setattr__(self, "_k_half", k_half)
        object.__setattr__(self, "_k_half_dag", k_half.conj().T.copy())

    def dissipator(self, rho: np.ndarray) -> np.ndarray:
        """D_a(rho) = 2 a rho a^dag - {a^dag a, rho}."""
        n_op = self.cavity_number
        return 2 * (self.a @ rho @ self.a_dag) - n_op @ rho - rho @ n_op

    def lindbladian(self, rho: np.ndarray) -> np.ndarray:
        deriv, _ = self._rhs(rho)
        return deriv

    def _rhs(self, rho: np.ndarray) -> tuple[np.ndarray, float]:
        """(d rho / dt, emission rate kappa <a^dag a>), sharing intermediates."""
        feed = self.a @ rho @ self.a_dag
        deriv = -1j * (self._k_half @ rho - rho @ self._k_half_dag)
        deriv += self.params.kappa * feed
        return deriv, self.params.kappa * float(np.real(np.trace(feed)))

    def initial_density_matrix(self) -> np.ndarray:
        p = self.params
        n_cav = self.fock_cutoff + 1
        dim = 2 ** p.n_emitters * n_cav
        ket = np.zeros(dim, dtype=complex)
        # Index of |excited emitter, vacuum cavity>: emitter i occupies tensor slot i-1.
        idx = 0
        for slot in range(p.n_emitters):
            bit = 1 if slot == p.excited_emitter - 1 else 0
            idx = idx * 2 + bit
        idx = idx * n_cav + 0
        ket[idx] = 1.0
        return np.outer(ket, ket.conj())


def effective_hamiltonian(params: TCParams) -> np.ndarray:
    """Non-Hermitian generator on the single-excitation basis {|e_1>..|e_N>, |1_cav>}.

    The Hermitian part is the Tavis-Cummings coupling in the rotating frame;
    the anti-Hermitian part is -i*kappa/2 on the cavity diagonal only.
    """
    n = params.n_emitters
    h = np.zeros((n + 1, n + 1), dtype=complex)
    dets = params.detunings()
    for i in range(n):
        h[i, i] = dets[i]
        h[i, n] = params.couplings[i]
        h[n, i] = params.couplings[i]
    h[n, n] = -0.5j * params.kappa
    return h


def evolve_single_excitation(params: TCParams, t: float) -> SingleExcitationState:
    """Propagate the initially excited emitter to time t (ns) within the single-excitation subspace."""
    if t < 0:
        raise ValueError("t must be >= 0")
    h = effective_hamiltonian(params)
    psi0 = np.zeros(params.n_emitters + 1, dtype=complex)
    psi0[params.excited_emitter - 1] = 1.0
    psi = expm(-1j * h * t) @ psi0
    p_lost = 1.0 - float(np.sum(np.abs(psi) ** 2))
    return SingleExcitationState(amplitudes=psi, p_lost=max(p_lost, 0.0))


def populations(state: SingleExcitationState) -> PopulationDistribution:
    """Observable populations; cavity and environment are pooled into one channel."""
    probs = np.abs(state.amplitudes) ** 2
    return PopulationDistribution(p_emitters=probs[:-1], p_cav_env=float(probs[-1] + state.p_lost))


def solve_populations(params: TCParams, times: np.ndarray) -> list[PopulationDistribution]:
    """Single-excitation populations on a time grid."""
    return [populations(evolve_single_excitation(params, float(t))) for t in times]


def rabi_frequency(params: TCParams) -> float:
    """Collective exchange rate sqrt(N)*g for identical resonant emitters (rad/ns)."""
    gs = set(params.couplings)
    if len(gs) != 1:
        raise ValueError("rabi_frequency requires identical couplings")
    if np.any(params.detunings() != 0):
        raise ValueError("rabi_frequency requires all emitters resonant with the cavity")
    return float(np.sqrt(params.n_emitters) * params.couplings[0])


def expected_spectral_peak(params: TCParams) -> float:
    """Cyclic frequency (1/ns) where the population spectra peak: Omega / 2 pi.

    For N >= 2 the initially excited emitter keeps a large static dark-state
    amplitude, so its population beats against the oscillating bright
    component at the collective rate Omega itself; that cross term dominates
    the squared (2*Omega) term in every channel sum.
    """
    if params.n_emitters < 2:
        raise ValueError("single-emitter populations oscillate at 2*g, not Omega")
    return rabi_frequency(params) / (2 * np.pi)


def _rk4_step(ops: OperatorSet, rho: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
    """One RK4 step; also returns the emitted-photon probability for this step.

    The loss integral kappa * <a^dag a> dt is accumulated with the same RK4
    quadrature as the state, so total-probability conservation holds to the
    integrator's order.
    """
    k1, f1 = ops._rhs(rho)
    k2, f2 = ops._rhs(rho + 0.5 * dt * k1)
    k3, f3 = ops._rhs(rho + 0.5 * dt * k2)
    k4, f4 = ops._rhs(rho + dt * k3)
    flux = (dt / 6.0) * (f1 + 2 * f2 + 2 * f3 + f4)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), flux


def _populations_from_rho(ops: OperatorSet, rho: np.ndarray) -> PopulationDistribution:
    p_em = np.array([float(np.real(np.trace(n_op @ rho))) for n_op in ops.number_ops])
    a = ops.a
    p_cav = float(np.real(np.trace(a.conj().T @ a @ rho)))
    # Probability missing from emitters and cavity photons has been emitted.
    p_env = 1.0 - float(p_em.sum()) - p_cav
    if np.any(p_em < -1e-9) or p_cav < -1e-9 or p_env < -1e-9:
        warnings.warn("density-matrix populations drifted negative beyond tolerance",
                      RuntimeWarning, stacklevel=3)
    p_em = np.clip(p_em, 0.0, None)
    p_cav_env = max(p_cav, 0.0) + max(p_env, 0.0)
    total = p_em.sum() + p_cav_env
    return PopulationDistribution(p_emitters=p_em / total, p_cav_env=p_cav_env / total)


def lindblad_trajectory(params: TCParams, times: np.ndarray, fock_cutoff: int = 2,
                        dt: float = 1e-4, return_loss: bool = False):
    """Integrate the master equation with fixed-step RK4, reporting populations at `times`.

    `times` must be sorted ascending.  Trace preservation is asserted to 1e-9.
    With return_loss=True also returns the integrated emission probability at
    each time, accumulated as an explicit scalar independent of the
    trace-residual accounting used for p_cav_env.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted and nonnegative")
    ops = OperatorSet(params=params, fock_cutoff=fock_cutoff)
    rho = ops.initial_density_matrix()
    out: list[PopulationDistribution] = []
    losses: list[float] = []
    lost = 0.0
    t_now = 0.0
    for t_target in times:
        span = t_target - t_now
        n_full = int(np.floor(span / dt + 1e-12))
        for _ in range(n_full):
            rho, flux = _rk4_step(ops, rho, dt)
            lost += flux
        rem = span - n_full * dt
        if rem > 1e-15:
            rho, flux = _rk4_step(ops, rho, rem)
            lost += flux
        t_now = t_target
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > 1e-9:
            raise FloatingPointError(f"trace drifted to {tr} at t={t_target}")
        out.append(_populations_from_rho(ops, rho))
        losses.append(lost)
    if return_loss:
        return out, losses
    return out


def lindblad_oracle(params: TCParams, t: float, fock_cutoff: int = 2,
                    dt: float = 1e-4) -> PopulationDistribution:
    """Master-equation populations at a single time (see lindblad_trajectory)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return lindblad_trajectory(params, np.array([t]), fock_cutoff=fock_cutoff, dt=dt)[0]
