"""Accuracy metrics and spectral analysis for simulated population dynamics.

The headline score is the Hellinger distance between the simulated and the
exact population distribution at each time step, averaged over the sweep
(mean over samples).  Confidence intervals come from shot-level bootstrap
resampling of the counts.  Spectral analysis extracts the dominant
population-oscillation frequency from mean-subtracted Fourier transforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Counts, sample_from_probs
from .mitigation import (
    average_identical_emitters,
    populations_from_counts,
    postselect,
    raw_populations,
)
from .model import PopulationDistribution

__all__ = [
    "TimeSeries",
    "Spectrum",
    "hellinger",
    "mean_hellinger",
    "bootstrap_ci",
    "fft_spectrum",
    "rabi_peak",
]


@dataclass(frozen=True)
class TimeSeries:
    """Population distributions on a strictly increasing time grid (ns)."""

    times: np.ndarray
    populations: tuple[PopulationDistribution, ...]
    shots_kept: tuple[int, ...] = ()
    discard_fractions: tuple[float, ...] = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "populations", tuple(self.populations))
        if len(times) != len(self.populations):
            raise ValueError("times and populations length mismatch")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")

    def as_matrix(self) -> np.ndarray:
        """Rows = time steps, columns = (p_1..p_N, p_cav_env)."""
        return np.stack([p.as_array() for p in self.populations])

    @property
    def channel_names(self) -> list[str]:
        n = self.populations[0].n_emitters
        return [f"emitter{i}" for i in range(1, n + 1)] + ["cav_env"]


@dataclass(frozen=True)
class Spectrum:
    """Per-channel magnitudes on the discrete frequency grid of the time grid."""

    frequencies: np.ndarray
    amplitudes: np.ndarray  # shape (n_freq, n_channels)
    channel_names: tuple[str, ...]


def hellinger(p, q) -> float:
    """H = sqrt(sum (sqrt(p_i) - sqrt(q_i))^2) / sqrt(2), in [0, 1]."""
    p = p.as_array() if isinstance(p, PopulationDistribution) else np.asarray(p, dtype=float)
    q = q.as_array() if isinstance(q, PopulationDistribution) else np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have equal length")
    for v in (p, q):
        if np.any(v < -1e-9) or abs(v.sum() - 1.0) > 1e-6:
            raise ValueError("inputs must be probability distributions")
    h = np.sqrt(np.sum((np.sqrt(np.clip(p, 0, None)) - np.sqrt(np.clip(q, 0, None))) ** 2) / 2.0)
    return float(min(h, 1.0))


def mean_hellinger(sim: TimeSeries, exact: TimeSeries) -> float:
    """Mean of H(t) over the shared sample grid."""
    if len(sim.times) != len(exact.times) or not np.allclose(sim.times, exact.times,
                                                             rtol=0, atol=1e-12):
        raise ValueError("time grids differ")
    return float(np.mean([hellinger(s, e)
                          for s, e in zip(sim.populations, exact.populations)]))


def resample_matrices(counts: Counts, circuit: Circuit):
    """Precompute (probs, post_map, raw_map) for vectorized count resampling.

    post_map maps count vectors onto (N+1 population slots, discard) for
    Hamming-weight-1 postselection; raw_map onto per-role excitation
    marginals.  Row order follows sorted bitstrings.
    """
    keys = sorted(counts.counts)
    vals = np.array([counts.counts[k] for k in keys], dtype=float)
    n = circuit.n_emitters
    width = circuit.width
    slot_of_wire = {w: i for i, w in enumerate(circuit.emitter_wires)}
    slot_of_wire[circuit.cavity_wire] = n
    post_map = np.zeros((len(keys), n + 2))
    raw_map = np.zeros((len(keys), n + 1))
    for row, b in enumerate(keys):
        ones = [width - 1 - i for i, ch in enumerate(b) if ch == "1"]
        if len(ones) == 1:
            post_map[row, slot_of_wire[ones[0]]] = 1.0
        else:
            post_map[row, n + 1] = 1.0
        for w in ones:
            raw_map[row, slot_of_wire[w]] += 1.0
    return vals / vals.sum(), post_map, raw_map


def resample_populations(draws: np.ndarray, post_map: np.ndarray, raw_map: np.ndarray,
                         postselected: bool, identical, excited: int) -> np.ndarray:
    """Population matrix (replicates x N+1) from resampled count vectors.

    Rows with no usable shots come back as NaN.
    """
    if postselected:
        slots = draws @ post_map
        kept = slots[:, :-1]
    else:
        kept = draws @ raw_map
    totals = kept.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pops = np.where(totals > 0, kept / totals, np.nan)
    if identical:
        idx = [i - 1 for i in identical]
        if excited in identical:
            raise ValueError("cannot average the initially excited emitter")
        pops[:, idx] = pops[:, idx].mean(axis=1, keepdims=True)
    return pops


def _hellinger_rows(pops: np.ndarray, exact_vec: np.ndarray) -> np.ndarray:
    diffs = np.sqrt(np.clip(pops, 0, None)) - np.sqrt(exact_vec)[None, :]
    return np.sqrt(np.sum(diffs ** 2, axis=1) / 2.0)


def bootstrap_ci(step_counts: list[Counts], circuit: Circuit, exact: TimeSeries,
                 postselected: bool = True, identical=(), excited: int = 1,
                 replicates: int = 1000, level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean Hellinger distance.

    Counts are resampled multinomially within each time step (shot-level
    resampling), the full postselection/averaging pipeline is re-run per
    replicate, and the interval is read off the replicate distribution.
    Steps that lose all shots in a replicate drop out of that replicate's
    mean, mirroring the run pipeline's exclusion rule.
    """
    if not step_counts or any(c.shots < 1 for c in step_counts):
        raise ValueError("every time step needs at least one shot")
    identical = tuple(identical)
    rng = np.random.default_rng(np.random.SeedSequence((seed, replicates)))
    h_rows = np.zeros((replicates, len(step_counts)))
    valid = np.ones((replicates, len(step_counts)), dtype=bool)
    for j, (counts, e_pop) in enumerate(zip(step_counts, exact.populations)):
        probs, post_map, raw_map = resample_matrices(counts, circuit)
        draws = rng.multinomial(counts.shots, probs, size=replicates).astype(float)
        pops = resample_populations(draws, post_map, raw_map, postselected,
                                    identical, excited)
        bad = np.isnan(pops[:, 0])
        valid[bad, j] = False
        pops = np.nan_to_num(pops)
        h_rows[:, j] = _hellinger_rows(pops, e_pop.as_array())
    counts_valid = valid.sum(axis=1)
    if np.any(counts_valid == 0):
        raise ArithmeticError("a bootstrap replicate lost every step")
    stats = np.where(valid, h_rows, 0.0).sum(axis=1) / counts_valid
    alpha = 1.0 - level
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def fft_spectrum(series: TimeSeries) -> Spectrum:
    """Magnitude of the discrete Fourier transform of each mean-subtracted channel."""
    times = series.times
    if len(times) < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    dt = steps[0]
    if np.any(np.abs(steps - dt) > 1e-9 * max(abs(times[-1]), 1.0)):
        raise ValueError("time grid must be uniform")
    data = series.as_matrix()
    data = data - data.mean(axis=0, keepdims=True)
    amps = np.abs(np.fft.rfft(data, axis=0))
    freqs = np.fft.rfftfreq(len(times), d=dt)
    return Spectrum(frequencies=freqs, amplitudes=amps,
                    channel_names=tuple(series.channel_names))


def rabi_peak(spec: Spectrum, channel: str | None = None) -> float:
    """Frequency of the largest nonzero-frequency amplitude (1/ns).

    With channel=None the amplitudes are summed over channels, which is
    robust because every population channel beats at the same collective
    exchange frequency.
    """
    if len(spec.frequencies) < 2:
        raise ValueError("spectrum has no nonzero-frequency bins")
    if channel is None:
        amps = spec.amplitudes.sum(axis=1)
    else:
        amps = spec.amplitudes[:, spec.channel_names.index(channel)]
    body = amps[1:]
    if np.max(body) < 1e-12:
        raise ValueError("flat spectrum: no oscillation to locate")
    return float(spec.frequencies[1 + int(np.argmax(body))])
