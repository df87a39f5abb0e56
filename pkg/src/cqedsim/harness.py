"""Experiment orchestration: config handling, the full time-sweep pipeline
(solve -> synthesize -> transpile -> noisy-execute -> mitigate -> analyze),
and persistence of run results.

A run is fully determined by its config and master seed: per-step and
per-variant RNG streams are derived by hashing stable keys, every CSV/JSON
output is written with canonical formatting, and wall-clock timing goes to a
separate provenance sidecar so the data files are byte-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import TimeSeries, bootstrap_ci, fft_spectrum, hellinger, rabi_peak
from .circuit import Circuit, Counts, synthesize_qmarina
from .mitigation import (
    MitigationConfig,
    average_identical_emitters,
    nox_amplify,
    nox_extrapolate,
    populations_from_counts,
    postselect,
    randomize_compile,
    raw_populations,
)
from .model import PopulationDistribution, TCParams, evolve_single_excitation, populations
from .noise import NoiseModel, apply_noisy, load_fidelity_table, noise_from_fidelity
from .transpiler import CompilationReport, GateSetSpec, TranspileOptions, transpile

__all__ = [
    "RunConfig",
    "RunResult",
    "run_experiment",
    "compare_variants",
    "load_run",
    "load_config",
    "config_from_dict",
    "config_to_dict",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    name: str
    model: TCParams
    gate_set: GateSetSpec
    options: TranspileOptions
    noise: NoiseModel
    mitigation: MitigationConfig
    t_start: float = 0.0
    t_max: float = 3.0
    n_steps: int = 51
    shots: int = 2000
    seed: int = 0
    jobs: int = 1
    out_dir: str | None = None
    fidelity_table: str | None = None
    jitter_batches: int = 10
    ci_replicates: int = 1000  # 0 disables the bootstrap interval

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.t_max <= self.t_start:
            raise ValueError("t_max must exceed t_start")

    def times(self) -> np.ndarray:
        # endpoints inclusive: 51 steps over [0, 3] gives a 0.06 ns pitch
        return np.linspace(self.t_start, self.t_max, self.n_steps)


# ---------------------------------------------------------------------------
# Config (de)serialization

def _model_to_dict(m: TCParams) -> dict:
    return {
        "n_emitters": m.n_emitters,
        "couplings": list(m.couplings),
        "kappa": m.kappa,
        "cavity_freq": m.cavity_freq,
        "emitter_freqs": list(m.emitter_freqs),
        "excited_emitter": m.excited_emitter,
    }


def _model_from_dict(d: dict) -> TCParams:
    n = int(d["n_emitters"])
    if "couplings" in d:
        couplings = tuple(float(g) for g in d["couplings"])
    else:
        couplings = (float(d["coupling"]),) * n
    return TCParams(
        n_emitters=n,
        couplings=couplings,
        kappa=float(d["kappa"]),
        cavity_freq=float(d.get("cavity_freq", 0.0)),
        emitter_freqs=tuple(float(w) for w in d.get("emitter_freqs", ())),
        excited_emitter=int(d.get("excited_emitter", 1)),
    )


def _noise_to_dict(n: NoiseModel) -> dict:
    depol_2q = n.depol_2q
    if isinstance(depol_2q, dict):
        depol_2q = {",".join(str(q) for q in sorted(k)): v for k, v in depol_2q.items()}
    return {
        "depol_1q": n.depol_1q,
        "depol_2q": depol_2q,
        "coherent_overrotation": dict(n.coherent_overrotation),
        "amplitude_noise_coeff": n.amplitude_noise_coeff,
        "spam_flip": n.spam_flip,
        "seed": n.seed,
    }


def _noise_from_dict(d: dict, base_dir: str = ".") -> tuple[NoiseModel, str | None]:
    table_path = d.get("fidelity_table")
    extras = {
        "coherent_overrotation": {str(k): float(v)
                                  for k, v in d.get("coherent_overrotation", {}).items()},
        "amplitude_noise_coeff": float(d.get("amplitude_noise_coeff", 0.0)),
        "spam_flip": float(d.get("spam_flip", 0.0)),
        "seed": int(d.get("seed", 0)),
    }
    if table_path:
        resolved = table_path if os.path.isabs(table_path) else os.path.join(base_dir, table_path)
        table = load_fidelity_table(resolved)
        return noise_from_fidelity(table, **extras), table_path
    depol_2q = d.get("depol_2q", 0.0)
    if isinstance(depol_2q, dict):
        depol_2q = {frozenset(int(q) for q in k.split(",")): float(v)
                    for k, v in depol_2q.items()}
    else:
        depol_2q = float(depol_2q)
    return NoiseModel(depol_1q=float(d.get("depol_1q", 0.0)), depol_2q=depol_2q,
                      **extras), None


def config_to_dict(cfg: RunConfig) -> dict:
    backend = {
        "native_two_qubit": cfg.gate_set.native_two_qubit,
        "native_single_qubit": sorted(cfg.gate_set.native_single_qubit),
        "connectivity": cfg.gate_set.connectivity,
        "chain_order": list(cfg.gate_set.chain_order),
        "use_zz": cfg.options.use_zz,
        "mirror": cfg.options.mirror,
        "route": cfg.options.route,
        "noise": _noise_to_dict(cfg.noise),
    }
    if cfg.fidelity_table:
        backend["noise"]["fidelity_table"] = cfg.fidelity_table
    return {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "model": _model_to_dict(cfg.model),
        "grid": {"t_start": cfg.t_start, "t_max": cfg.t_max, "n_steps": cfg.n_steps},
        "shots": cfg.shots,
        "backend": backend,
        "mitigation": {
            "postselect": cfg.mitigation.postselect,
            "average_identical": list(cfg.mitigation.average_identical),
            "rc_randomizations": cfg.mitigation.rc_randomizations,
            "nox_factors": list(cfg.mitigation.nox_factors),
            "seed": cfg.mitigation.seed,
        },
        "seed": cfg.seed,
        "jobs": cfg.jobs,
        "jitter_batches": cfg.jitter_batches,
        "ci_replicates": cfg.ci_replicates,
        "out_dir": cfg.out_dir,
    }


def config_from_dict(d: dict, base_dir: str = ".") -> RunConfig:
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}")
    backend = d["backend"]
    noise, table_path = _noise_from_dict(backend.get("noise", {}), base_dir)
    gate_set = GateSetSpec(
        native_two_qubit=backend["native_two_qubit"],
        native_single_qubit=frozenset(backend.get("native_single_qubit",
                                                  ("RX", "RY", "RZ", "U1q"))),
        connectivity=backend.get("connectivity", "all_to_all"),
        chain_order=tuple(backend.get("chain_order", ())),
    )
    options = TranspileOptions(
        use_zz=bool(backend.get("use_zz", False)),
        mirror=bool(backend.get("mirror", False)),
        route=bool(backend.get("route", gate_set.connectivity == "linear")),
    )
    mit = d.get("mitigation", {})
    grid = d.get("grid", {})
    return RunConfig(
        name=d.get("name", "run"),
        model=_model_from_dict(d["model"]),
        gate_set=gate_set,
        options=options,
        noise=noise,
        mitigation=MitigationConfig(
            postselect=bool(mit.get("postselect", True)),
            average_identical=tuple(int(i) for i in mit.get("average_identical", ())),
            rc_randomizations=int(mit.get("rc_randomizations", 0)),
            nox_factors=tuple(int(f) for f in mit.get("nox_factors", ())),
            seed=int(mit.get("seed", 0)),
        ),
        t_start=float(grid.get("t_start", 0.0)),
        t_max=float(grid.get("t_max", 3.0)),
        n_steps=int(grid.get("n_steps", 51)),
        shots=int(d.get("shots", 2000)),
        seed=int(d.get("seed", 0)),
        jobs=int(d.get("jobs", 1)),
        out_dir=d.get("out_dir"),
        fidelity_table=table_path,
        jitter_batches=int(d.get("jitter_batches", 10)),
        ci_replicates=int(d.get("ci_replicates", 1000)),
    )


def load_config(path: str, variant: str | None = None) -> RunConfig:
    """Load a config file; `variant` selects and deep-merges a named override."""
    with open(path) as fh:
        data = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))
    if "variants" in data:
        base = data.get("base", {})
        if variant is None:
            raise ValueError(f"config defines variants {sorted(data['variants'])}; "
                             "pick one with --variant")
        if variant not in data["variants"]:
            raise ValueError(f"unknown variant {variant!r}")
        merged = _deep_merge(base, data["variants"][variant])
        merged.setdefault("name", variant)
        return config_from_dict(merged, base_dir)
    if variant is not None:
        raise ValueError("config file has no variants section")
    return config_from_dict(data, base_dir)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def config_hash(cfg: RunConfig) -> str:
    d = config_to_dict(cfg)
    d.pop("out_dir", None)
    d.pop("jobs", None)
    return hashlib.sha256(canonical_json(d).encode()).hexdigest()


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a key tuple (independent of hash randomization)."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# Pipeline

@dataclass
class StepResult:
    index: int
    t: float
    exact: PopulationDistribution
    counts_by_factor: dict
    report: CompilationReport
    pops_post: PopulationDistribution | None = None
    pops_raw: PopulationDistribution | None = None
    discard_fraction: float = 0.0
    shots_kept: int = 0
    discard_by_factor: dict = field(default_factory=dict)


def _execute_step(cfg: RunConfig, index: int, t: float) -> StepResult:
    exact_pops = populations(evolve_single_excitation(cfg.model, t))
    abstract, _ = synthesize_qmarina(exact_pops, excited=cfg.model.excited_emitter)
    compiled, report = transpile(abstract, cfg.gate_set, cfg.options)

    n_rc = cfg.mitigation.rc_randomizations
    if n_rc:
        circuits = randomize_compile(compiled, n_rc,
                                     seed=derive_seed(cfg.mitigation.seed, "rc", index),
                                     spec=cfg.gate_set)
    else:
        circuits = [compiled]
    factors = cfg.mitigation.nox_factors or (1,)

    counts_by_factor: dict[int, Counts] = {}
    for lam in factors:
        merged: Counts | None = None
        base, extra = divmod(cfg.shots, len(circuits))
        for i, circ in enumerate(circuits):
            n_i = base + (1 if i < extra else 0)
            if n_i == 0:
                continue
            amplified = nox_amplify(circ, lam) if lam > 1 else circ
            counts = apply_noisy(amplified, cfg.noise, n_i,
                                 seed=derive_seed(cfg.seed, "exec", index, lam, i),
                                 jitter_batches=cfg.jitter_batches)
            merged = counts if merged is None else merged.merged(counts)
        counts_by_factor[lam] = merged

    step = StepResult(index=index, t=t, exact=exact_pops,
                      counts_by_factor=counts_by_factor, report=report)
    primary = counts_by_factor[factors[0]]
    kept, discard = postselect(primary)
    step.discard_fraction = discard
    step.shots_kept = kept.shots
    pops = populations_from_counts(kept, compiled)
    if pops is not None and cfg.mitigation.average_identical:
        pops = average_identical_emitters(pops, cfg.mitigation.average_identical,
                                          cfg.model.excited_emitter)
    step.pops_post = pops
    step.pops_raw = raw_populations(primary, compiled)
    for lam, counts in counts_by_factor.items():
        _, d = postselect(counts)
        step.discard_by_factor[lam] = d
    return step


def _step_worker(args) -> StepResult:
    cfg, index, t = args
    return _execute_step(cfg, index, t)


@dataclass
class RunResult:
    config: RunConfig
    config_hash: str
    times: np.ndarray
    exact: TimeSeries
    mitigated: TimeSeries | None
    raw: TimeSeries | None
    steps: list[StepResult]
    excluded_steps: list[int]
    mhd_post: float | None
    mhd_raw: float | None
    ci: tuple[float, float] | None
    peak_frequency: float | None
    exact_peak_frequency: float
    mean_discard: float
    discard_by_factor: dict
    total_entangling_angle: float
    unmirrored_entangling_angle: float
    swap_count: int
    two_qubit_count: int
    gate_census: dict
    nox_clipped_steps: int = 0
    elapsed_seconds: float = 0.0


def _mitigated_series(cfg: RunConfig, steps: list[StepResult], circuit_proto: Circuit):
    """Postselected (+averaged, +extrapolated) populations; returns (series, raw, excluded, clipped)."""
    factors = cfg.mitigation.nox_factors
    excluded: list[int] = []
    clipped_steps = 0
    if len(factors) >= 2:
        per_factor_post: dict[int, list] = {lam: [] for lam in factors}
        per_factor_raw: dict[int, list] = {lam: [] for lam in factors}
        for s in steps:
            ok = True
            post_by_lam = {}
            raw_by_lam = {}
            for lam in factors:
                kept, _ = postselect(s.counts_by_factor[lam])
                p = populations_from_counts(kept, circuit_proto)
                if p is not None and cfg.mitigation.average_identical:
                    p = average_identical_emitters(p, cfg.mitigation.average_identical,
                                                   cfg.model.excited_emitter)
                r = raw_populations(s.counts_by_factor[lam], circuit_proto)
                if p is None or r is None:
                    ok = False
                    break
                post_by_lam[lam] = p
                raw_by_lam[lam] = r
            if not ok:
                excluded.append(s.index)
                continue
            for lam in factors:
                per_factor_post[lam].append(post_by_lam[lam])
                per_factor_raw[lam].append(raw_by_lam[lam])
        post_pops, clipped = nox_extrapolate(per_factor_post)
        raw_pops, _ = nox_extrapolate(per_factor_raw)
        clipped_steps = sum(clipped)
        kept_steps = [s for s in steps if s.index not in excluded]
        times = np.array([s.t for s in kept_steps])
        post = TimeSeries(times=times, populations=tuple(post_pops),
                          shots_kept=tuple(s.shots_kept for s in kept_steps),
                          discard_fractions=tuple(s.discard_fraction for s in kept_steps))
        raw = TimeSeries(times=times, populations=tuple(raw_pops))
        return post, raw, excluded, clipped_steps
    for s in steps:
        if s.pops_post is None or s.pops_raw is None:
            excluded.append(s.index)
    kept_steps = [s for s in steps if s.index not in excluded]
    if not kept_steps:
        return None, None, excluded, 0
    times = np.array([s.t for s in kept_steps])
    post = TimeSeries(times=times, populations=tuple(s.pops_post for s in kept_steps),
                      shots_kept=tuple(s.shots_kept for s in kept_steps),
                      discard_fractions=tuple(s.discard_fraction for s in kept_steps))
    raw = TimeSeries(times=times, populations=tuple(s.pops_raw for s in kept_steps))
    return post, raw, excluded, 0


def run_experiment(cfg: RunConfig, persist: bool = True) -> RunResult:
    """Run the full sweep; persists to cfg.out_dir unless persist=False."""
    t0 = time.monotonic()
    times = cfg.times()
    work = [(cfg, k, float(t)) for k, t in enumerate(times)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            steps = list(pool.map(_step_worker, work))
    else:
        steps = [_execute_step(*w) for w in work]
    steps.sort(key=lambda s: s.index)

    exact = TimeSeries(times=times,
                       populations=tuple(s.exact for s in steps))
    # wire roles are identical across steps; synthesize a prototype for lookups
    proto, _ = synthesize_qmarina(steps[0].exact, excited=cfg.model.excited_emitter)
    mitigated, raw, excluded, clipped_steps = _mitigated_series(cfg, steps, proto)

    mhd_post = mhd_raw = None
    ci = None
    peak = None
    if mitigated is not None:
        kept_idx = [s.index for s in steps if s.index not in excluded]
        exact_kept = TimeSeries(times=mitigated.times,
                                populations=tuple(steps[i].exact for i in kept_idx))
        mhd_post = float(np.mean([hellinger(p, e) for p, e in
                                  zip(mitigated.populations, exact_kept.populations)]))
        mhd_raw = float(np.mean([hellinger(p, e) for p, e in
                                 zip(raw.populations, exact_kept.populations)]))
        if cfg.ci_replicates > 0:
            ci = _bootstrap_interval(cfg, steps, proto, exact_kept, excluded,
                                     replicates=cfg.ci_replicates)
        if not excluded:
            peak = rabi_peak(fft_spectrum(mitigated))
    exact_peak = rabi_peak(fft_spectrum(exact))

    factors = cfg.mitigation.nox_factors or (1,)
    discard_by_factor = {lam: float(np.mean([s.discard_by_factor[lam] for s in steps]))
                         for lam in factors}
    result = RunResult(
        config=cfg,
        config_hash=config_hash(cfg),
        times=times,
        exact=exact,
        mitigated=mitigated,
        raw=raw,
        steps=steps,
        excluded_steps=excluded,
        mhd_post=mhd_post,
        mhd_raw=mhd_raw,
        ci=ci,
        peak_frequency=peak,
        exact_peak_frequency=float(exact_peak),
        mean_discard=float(np.mean([s.discard_fraction for s in steps])),
        discard_by_factor=discard_by_factor,
        total_entangling_angle=float(sum(s.report.total_entangling_angle for s in steps)),
        unmirrored_entangling_angle=float(sum(s.report.unmirrored_entangling_angle
                                              for s in steps)),
        swap_count=sum(s.report.swap_count for s in steps),
        two_qubit_count=sum(s.report.two_qubit_count for s in steps),
        gate_census=_merge_census(s.report.gate_census for s in steps),
        nox_clipped_steps=clipped_steps,
        elapsed_seconds=time.monotonic() - t0,
    )
    if persist and cfg.out_dir:
        persist_run(result, cfg.out_dir)
    return result


def _merge_census(censuses) -> dict:
    total: dict[str, int] = {}
    for census in censuses:
        for k, v in census.items():
            total[k] = total.get(k, 0) + v
    return total


def _bootstrap_interval(cfg: RunConfig, steps, proto, exact_kept, excluded,
                        replicates: int = 1000) -> tuple[float, float]:
    factors = cfg.mitigation.nox_factors
    kept_steps = [s for s in steps if s.index not in excluded]
    seed = derive_seed(cfg.seed, "bootstrap")
    if len(factors) < 2:
        counts = [s.counts_by_factor[(cfg.mitigation.nox_factors or (1,))[0]]
                  for s in kept_steps]
        return bootstrap_ci(counts, proto, exact_kept,
                            postselected=cfg.mitigation.postselect,
                            identical=cfg.mitigation.average_identical,
                            excited=cfg.model.excited_emitter,
                            replicates=replicates, seed=seed)
    # NOX runs: resample every amplification factor and re-extrapolate
    from .analysis import resample_matrices, resample_populations

    rng = np.random.default_rng(np.random.SeedSequence((seed, replicates)))
    xs = np.array(factors, dtype=float)
    n_f = len(xs)
    denom = n_f * np.sum(xs ** 2) - np.sum(xs) ** 2
    intercept_w = (np.sum(xs ** 2) - np.sum(xs) * xs) / denom
    h_rows = np.zeros((replicates, len(kept_steps)))
    valid = np.ones((replicates, len(kept_steps)), dtype=bool)
    for j, s in enumerate(kept_steps):
        per_lam = []
        for lam in factors:
            counts = s.counts_by_factor[lam]
            probs, post_map, raw_map = resample_matrices(counts, proto)
            draws = rng.multinomial(counts.shots, probs, size=replicates).astype(float)
            pops = resample_populations(draws, post_map, raw_map, True,
                                        cfg.mitigation.average_identical,
                                        cfg.model.excited_emitter)
            valid[np.isnan(pops[:, 0]), j] = False
            per_lam.append(np.nan_to_num(pops))
        stack = np.stack(per_lam)  # (n_factors, replicates, channels)
        intercepts = np.einsum("l,lrc->rc", intercept_w, stack)
        intercepts = np.clip(intercepts, 0.0, 1.0)
        intercepts /= intercepts.sum(axis=1, keepdims=True)
        diffs = np.sqrt(intercepts) - np.sqrt(s.exact.as_array())[None, :]
        h_rows[:, j] = np.sqrt(np.sum(diffs ** 2, axis=1) / 2.0)
    n_valid = valid.sum(axis=1)
    if np.any(n_valid == 0):
        raise ArithmeticError("a bootstrap replicate lost every step")
    stats = np.where(valid, h_rows, 0.0).sum(axis=1) / n_valid
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Persistence

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _series_rows(times, series: TimeSeries, extra=None):
    for i, (t, pop) in enumerate(zip(times, series.populations)):
        row = [t, *pop.as_array()]
        if extra is not None:
            row.extend(extra(i))
        yield row


def persist_run(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    n = cfg.model.n_emitters
    pop_cols = [f"p_e{i}" for i in range(1, n + 1)] + ["p_cav_env"]

    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        fh.write(canonical_json(config_to_dict(cfg)))

    _write_csv(os.path.join(out_dir, "exact.csv"), ["t", *pop_cols],
               _series_rows(result.times, result.exact))
    if result.mitigated is not None:
        _write_csv(os.path.join(out_dir, "steps.csv"),
                   ["t", *pop_cols, "discard_fraction", "shots_kept"],
                   _series_rows(result.mitigated.times, result.mitigated,
                                extra=lambda i: [result.mitigated.discard_fractions[i],
                                                 result.mitigated.shots_kept[i]]))
        _write_csv(os.path.join(out_dir, "raw_steps.csv"), ["t", *pop_cols],
                   _series_rows(result.raw.times, result.raw))
        if not result.excluded_steps:
            spec = fft_spectrum(result.mitigated)
            rows = []
            for ci_, name in enumerate(spec.channel_names):
                for fi, f in enumerate(spec.frequencies):
                    rows.append([f, name, spec.amplitudes[fi, ci_]])
            _write_csv(os.path.join(out_dir, "spectrum.csv"),
                       ["frequency", "channel", "amplitude"], rows)

    count_rows = []
    for s in result.steps:
        for lam in sorted(s.counts_by_factor):
            counts = s.counts_by_factor[lam]
            for b in sorted(counts.counts):
                count_rows.append([s.index, s.t, lam, b, counts.counts[b]])
    _write_csv(os.path.join(out_dir, "counts.csv"),
               ["step", "t", "amplification", "bitstring", "count"], count_rows)

    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "version": __version__,
        "config_hash": result.config_hash,
        "seed": cfg.seed,
        "mhd_postselected": result.mhd_post,
        "mhd_raw": result.mhd_raw,
        "ci_low": None if result.ci is None else result.ci[0],
        "ci_high": None if result.ci is None else result.ci[1],
        "mean_discard_fraction": result.mean_discard,
        "discard_by_factor": {str(k): v for k, v in result.discard_by_factor.items()},
        "excluded_steps": result.excluded_steps,
        "peak_frequency": result.peak_frequency,
        "exact_peak_frequency": result.exact_peak_frequency,
        "total_entangling_angle": result.total_entangling_angle,
        "unmirrored_entangling_angle": result.unmirrored_entangling_angle,
        "swap_count": result.swap_count,
        "two_qubit_count": result.two_qubit_count,
        "gate_census": result.gate_census,
        "nox_clipped_steps": result.nox_clipped_steps,
        "depolarizing_convention": "p = (1 - F) * d / (d - 1), average gate fidelity",
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        fh.write(canonical_json(summary))
    # timing is deliberately kept out of the JSON/CSV outputs so reruns with
    # the same config and seed are byte-identical
    with open(os.path.join(out_dir, "provenance.txt"), "w") as fh:
        fh.write(f"elapsed_seconds {result.elapsed_seconds:.3f}\n")
        fh.write(f"written_at_unix {time.time():.0f}\n")


@dataclass
class StoredRun:
    path: str
    config: dict
    summary: dict


def load_run(path: str) -> StoredRun:
    with open(os.path.join(path, "summary.json")) as fh:
        summary = json.load(fh)
    with open(os.path.join(path, "config.json")) as fh:
        config = json.load(fh)
    expect = dict(config)
    expect.pop("out_dir", None)
    expect.pop("jobs", None)
    digest = hashlib.sha256(canonical_json(expect).encode()).hexdigest()
    if digest != summary["config_hash"]:
        raise ValueError(f"config hash mismatch in {path}")
    return StoredRun(path=path, config=config, summary=summary)


def compare_variants(runs: list[StoredRun]) -> list[dict]:
    """Summary table rows for runs sharing a model and time grid."""
    if not runs:
        raise ValueError("no runs to compare")
    ref = runs[0].config
    for r in runs[1:]:
        if r.config["model"] != ref["model"] or r.config["grid"] != ref["grid"]:
            raise ValueError(f"run {r.path} has a different model or grid")
    rows = []
    for r in runs:
        s = r.summary
        rows.append({
            "variant": s["name"],
            "mhd_raw": s["mhd_raw"],
            "mhd_postselected": s["mhd_postselected"],
            "ci_low": s["ci_low"],
            "ci_high": s["ci_high"],
            "mean_discard_fraction": s["mean_discard_fraction"],
            "total_entangling_angle": s["total_entangling_angle"],
        })
    return rows


def format_table(rows: list[dict]) -> str:
    cols = list(rows[0])
    widths = {c: max(len(c), *(len(_cell(r[c])) for r in rows)) for c in cols}
    buf = io.StringIO()
    buf.write("  ".join(c.ljust(widths[c]) for c in cols) + "\n")
    for r in rows:
        buf.write("  ".join(_cell(r[c]).ljust(widths[c]) for c in cols) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.5f}"
    return str(v)
