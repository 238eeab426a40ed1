"""Pipeline orchestration: synthetic runs, learning, mitigation, reports.

Five stages share one artifact directory.  `synth` samples randomized
measurements of noisy circuits built from an injected generator model and
stores the shot files.  `learn` refits the model from the stored benchmark
data.  `mitigate` applies the inverse-noise map to the stored shots.
`simulate` produces classical reference curves (and optional parameter
sweeps) from the injected truth.  `report` merges everything into the
final tables.  `run_pipeline` chains all five.

Configuration is one JSON or TOML document; physics parameters have no
hidden defaults and must be spelled out, scale parameters fall back to the
chosen profile.  Every random stream is derived from the config seed and a
fixed purpose key, so reruns with the same config reproduce all numbers
bit-exactly regardless of the thread count.

Exit codes: 0 success, 2 invalid configuration, 3 requested simulation
exceeds a hard resource cap, 4 finished but with model-violation warnings.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    fit_decay_rate,
    relative_error_report,
    signal_damping,
    theory_decay_rate,
    write_convergence_csv,
    write_decay_csv,
    write_overhead_csv,
)
from .circuits import (
    BrickworkCircuit,
    KickedIsingParams,
    build_brickwork,
    build_cycle_benchmark,
)
from .exact_sim import (
    MAX_DENSITY_QUBITS,
    MAX_STATEVECTOR_QUBITS,
    layer_tableau,
    noisy_expectation_dm,
    statevector_expectation,
)
from .learning import (
    CB_DEPTHS,
    ModelViolationError,
    benchmark_settings,
    fit_decay,
    fit_generators,
    finetune_splits,
    layer_conjugates,
    verify_coverage,
)
from .measurement import (
    BasisDistribution,
    ReadoutModel,
    SettingsPlan,
    ShotData,
    calibrate_readout,
    estimate,
    generate_shots,
    sample_settings,
)
from .noise import SparsePauliLindblad, random_sparse_model
from .pauli import PauliString, SparseBasis, build_anticommutation_matrices
from .tn import (
    build_tem_map,
    convergence_report,
    heisenberg_evolve,
    heisenberg_expectation,
    initial_state_expectation,
    mitigated_estimate,
    modify_observable,
)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_CAP_ERROR = 3
EXIT_MODEL_WARNINGS = 4

SWEEP_CSV_HEADER = ("b_offset", "t", "ideal", "noisy_sim", "mitigated")

# spawn keys for the per-purpose random streams
_S_TRUTH, _S_MAIN, _S_CLIFFORD, _S_CYCLE, _S_CAL, _S_SWEEP = range(6)


class ConfigError(ValueError):
    """Invalid or missing configuration; messages carry the field path."""


class SimulationCapError(RuntimeError):
    """The requested run exceeds a hard classical-simulation cap."""


# -- configuration -------------------------------------------------------------

PROFILES: dict[str, dict[str, Any]] = {
    "desk": {
        "sampling": {"n_settings": 256, "shots_per_setting": 256},
        "learning": {"n_settings": 64, "shots_per_setting": 32},
        "mitigation": {"chi": 64, "chi_sweep": (8, 16, 32)},
    },
    "large": {
        "sampling": {"n_settings": 1024, "shots_per_setting": 512},
        "learning": {"n_settings": 256, "shots_per_setting": 64},
        "mitigation": {"chi": 128, "chi_sweep": (16, 32, 64, 128)},
    },
}


@dataclass(frozen=True)
class PhysicsConfig:
    """Chain and drive parameters.  All fields are explicit by design."""

    n_qubits: int
    t_steps: int
    h_field: float
    j_coupling: float
    b_field: float


@dataclass(frozen=True)
class NoiseConfig:
    total_rate: float  # injected generator rates per layer sum to this
    seed: int | None = None
    readout_infidelity: float = 0.0


@dataclass(frozen=True)
class SamplingConfig:
    n_settings: int
    shots_per_setting: int
    method: str = "auto"  # auto | exact | trajectory
    signal_bias: float = 0.8  # basis weight on X at the signal qubit


@dataclass(frozen=True)
class LearningConfig:
    n_settings: int
    shots_per_setting: int
    depths: tuple[int, ...] = CB_DEPTHS
    splits: str = "finetuned"  # finetuned | symmetric
    residual_tol: float = 0.25
    checkpoint_slack: float = 0.02  # shot-noise margin on the fidelity window


@dataclass(frozen=True)
class MitigationConfig:
    chi: int | None
    chi_sweep: tuple[int, ...]
    cutoff: float = 1e-12
    light_cone: bool = True
    cone_margin: int = 1


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    profile: str
    physics: PhysicsConfig
    noise: NoiseConfig
    sampling: SamplingConfig
    learning: LearningConfig
    mitigation: MitigationConfig
    b_offsets: tuple[float, ...] = ()

    def times(self) -> tuple[int, ...]:
        return tuple(range(1, self.physics.t_steps + 1))


def _section(doc: Mapping, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"{key}: expected a table/object")
    return dict(value)


def _pop(section: dict, path: str, key: str, kind, default=...):
    if key not in section:
        if default is ...:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = section.pop(key)
    if kind is float and isinstance(value, (int, float)) and not isinstance(
        value, bool
    ):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return int(value)
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigError(f"{path}.{key}: expected {kind.__name__}")


def _reject_unknown(section: dict, path: str) -> None:
    if section:
        keys = ", ".join(sorted(section))
        raise ConfigError(f"{path}: unknown fields: {keys}")


def config_from_mapping(
    doc: Mapping,
    profile: str | None = None,
    seed: int | None = None,
    chi: int | None = None,
) -> PipelineConfig:
    """Resolve a config document against a profile and flag overrides."""
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a table/object")
    doc = dict(doc)
    known = {"seed", "profile", "physics", "noise", "sampling", "learning",
             "mitigation", "sweep"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level fields: {', '.join(sorted(unknown))}")

    profile = profile or doc.get("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"profile: must be one of {sorted(PROFILES)}")
    defaults = PROFILES[profile]

    if seed is None:
        if "seed" not in doc:
            raise ConfigError("seed: required field is missing (or pass --seed)")
        seed = doc["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")

    phys = _section(doc, "physics")
    physics = PhysicsConfig(
        n_qubits=_pop(phys, "physics", "n_qubits", int),
        t_steps=_pop(phys, "physics", "t_steps", int),
        h_field=_pop(phys, "physics", "h_field", float),
        j_coupling=_pop(phys, "physics", "j_coupling", float),
        b_field=_pop(phys, "physics", "b_field", float),
    )
    _reject_unknown(phys, "physics")
    if physics.n_qubits < 3 or physics.n_qubits % 2 == 0:
        raise ConfigError("physics.n_qubits: need an odd chain of at least 3")
    if physics.t_steps < 1:
        raise ConfigError("physics.t_steps: need at least one layer")
    if 2 * physics.t_steps > physics.n_qubits - 1:
        raise ConfigError(
            "physics.t_steps: light cone leaves the chain; "
            "need t_steps <= (n_qubits - 1) / 2"
        )

    noi = _section(doc, "noise")
    noise = NoiseConfig(
        total_rate=_pop(noi, "noise", "total_rate", float),
        seed=_pop(noi, "noise", "seed", int, None),
        readout_infidelity=_pop(noi, "noise", "readout_infidelity", float, 0.0),
    )
    _reject_unknown(noi, "noise")
    if noise.total_rate < 0:
        raise ConfigError("noise.total_rate: must be non-negative")
    if not 0.0 <= noise.readout_infidelity < 0.5:
        raise ConfigError("noise.readout_infidelity: must lie in [0, 0.5)")

    sam = _section(doc, "sampling")
    sampling = SamplingConfig(
        n_settings=_pop(sam, "sampling", "n_settings", int,
                        defaults["sampling"]["n_settings"]),
        shots_per_setting=_pop(sam, "sampling", "shots_per_setting", int,
                               defaults["sampling"]["shots_per_setting"]),
        method=_pop(sam, "sampling", "method", str, "auto"),
        signal_bias=_pop(sam, "sampling", "signal_bias", float, 0.8),
    )
    _reject_unknown(sam, "sampling")
    if sampling.method not in ("auto", "exact", "trajectory"):
        raise ConfigError("sampling.method: must be auto, exact or trajectory")
    if sampling.n_settings < 1 or sampling.shots_per_setting < 1:
        raise ConfigError("sampling: settings and shots must be positive")
    if not 1.0 / 3.0 <= sampling.signal_bias < 1.0:
        raise ConfigError("sampling.signal_bias: must lie in [1/3, 1)")

    lea = _section(doc, "learning")
    learning = LearningConfig(
        n_settings=_pop(lea, "learning", "n_settings", int,
                        defaults["learning"]["n_settings"]),
        shots_per_setting=_pop(lea, "learning", "shots_per_setting", int,
                               defaults["learning"]["shots_per_setting"]),
        depths=tuple(_pop(lea, "learning", "depths", list, list(CB_DEPTHS))),
        splits=_pop(lea, "learning", "splits", str, "finetuned"),
        residual_tol=_pop(lea, "learning", "residual_tol", float, 0.25),
        checkpoint_slack=_pop(lea, "learning", "checkpoint_slack", float, 0.02),
    )
    _reject_unknown(lea, "learning")
    if learning.splits not in ("finetuned", "symmetric"):
        raise ConfigError("learning.splits: must be finetuned or symmetric")
    if any(d < 0 or d % 2 for d in learning.depths) or 0 not in learning.depths:
        raise ConfigError("learning.depths: even non-negative depths incl. 0")
    if not 0.0 <= learning.checkpoint_slack < 1.0:
        raise ConfigError("learning.checkpoint_slack: must lie in [0, 1)")

    mit = _section(doc, "mitigation")
    chi_value = _pop(mit, "mitigation", "chi", int,
                     defaults["mitigation"]["chi"])
    if chi is not None:
        chi_value = chi
    mitigation = MitigationConfig(
        chi=chi_value,
        chi_sweep=tuple(_pop(mit, "mitigation", "chi_sweep", list,
                             list(defaults["mitigation"]["chi_sweep"]))),
        cutoff=_pop(mit, "mitigation", "cutoff", float, 1e-12),
        light_cone=bool(mit.pop("light_cone", True)),
        cone_margin=_pop(mit, "mitigation", "cone_margin", int, 1),
    )
    _reject_unknown(mit, "mitigation")
    if mitigation.chi is not None and mitigation.chi < 1:
        raise ConfigError("mitigation.chi: must be at least 1")
    if len(mitigation.chi_sweep) < 3:
        raise ConfigError("mitigation.chi_sweep: need at least three values")
    if mitigation.cone_margin < 0:
        raise ConfigError("mitigation.cone_margin: must be non-negative")

    swe = _section(doc, "sweep")
    b_offsets = tuple(
        float(x) for x in _pop(swe, "sweep", "b_offsets", list, [])
    )
    _reject_unknown(swe, "sweep")

    return PipelineConfig(seed, profile, physics, noise, sampling, learning,
                          mitigation, b_offsets)


def load_config(
    path: str | Path,
    profile: str | None = None,
    seed: int | None = None,
    chi: int | None = None,
) -> PipelineConfig:
    """Read a JSON (.json) or TOML (anything else) config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(raw.decode())
        else:
            doc = tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_mapping(doc, profile=profile, seed=seed, chi=chi)


def config_echo(config: PipelineConfig) -> dict:
    """Fully resolved config document; feeding it back reproduces the run.

    None-valued optionals are omitted: they mean "unset" and TOML has no
    null literal.
    """

    def table(mapping: dict) -> dict:
        return {k: v for k, v in mapping.items() if v is not None}

    return {
        "seed": config.seed,
        "profile": config.profile,
        "physics": table(vars(config.physics)),
        "noise": table(vars(config.noise)),
        "sampling": table(vars(config.sampling)),
        "learning": table({**vars(config.learning),
                           "depths": list(config.learning.depths)}),
        "mitigation": table({**vars(config.mitigation),
                             "chi_sweep": list(config.mitigation.chi_sweep)}),
        "sweep": {"b_offsets": list(config.b_offsets)},
    }


# -- seeds, artifacts, shared builders -----------------------------------------


def _rng(config: PipelineConfig, *key: int) -> np.random.Generator:
    base = config.noise.seed if key[:1] == (_S_TRUTH,) else None
    entropy = config.seed if base is None else base
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key))


def _params(config: PipelineConfig, t: int, h: float | None = None,
            b_offset: float = 0.0) -> KickedIsingParams:
    p = config.physics
    return KickedIsingParams(
        p.n_qubits, p.j_coupling, p.b_field + b_offset,
        p.h_field if h is None else h, t_steps=t,
    )


def _clifford_params(config: PipelineConfig, t: int) -> KickedIsingParams:
    # benchmark circuits always sit at the self-inverse Clifford point
    return KickedIsingParams(config.physics.n_qubits, np.pi / 4, np.pi / 4,
                             0.0, t_steps=t)


def _signal_observable(n: int, t: int) -> PauliString:
    return PauliString.single(n, t, "X")


def truth_channels(config: PipelineConfig) -> dict[str, SparsePauliLindblad]:
    """The injected per-slot models, rates summing to noise.total_rate."""
    basis = SparseBasis(config.physics.n_qubits)
    rng = _rng(config, _S_TRUTH)
    out = {}
    for slot in ("even", "odd"):
        model = random_sparse_model(basis, rng, scale=1.0, layer_id=slot)
        total = float(model.rates.sum())
        factor = config.noise.total_rate / total if total > 0 else 0.0
        out[slot] = model.scaled(factor)
    return out


def _readout(config: PipelineConfig) -> ReadoutModel | None:
    if config.noise.readout_infidelity <= 0:
        return None
    return ReadoutModel.uniform(config.physics.n_qubits,
                                config.noise.readout_infidelity)


def _calibration(config: PipelineConfig) -> np.ndarray | None:
    readout = _readout(config)
    if readout is None:
        return None
    rng = _rng(config, _S_CAL)
    return calibrate_readout(config.physics.n_qubits, readout, 64, 64,
                             rng).values


def _shot_method(config: PipelineConfig) -> str:
    n = config.physics.n_qubits
    method = config.sampling.method
    if method == "auto":
        method = "exact" if n <= MAX_DENSITY_QUBITS else "trajectory"
    if method == "exact" and n > MAX_DENSITY_QUBITS:
        raise SimulationCapError(
            f"exact shot sampling is capped at {MAX_DENSITY_QUBITS} qubits "
            f"(asked for {n}); use sampling.method = 'trajectory'"
        )
    if method == "trajectory" and n > MAX_STATEVECTOR_QUBITS:
        raise SimulationCapError(
            f"trajectory sampling is capped at {MAX_STATEVECTOR_QUBITS} "
            f"qubits (asked for {n})"
        )
    return method


def save_shot_data(path: str | Path, shots: ShotData) -> None:
    np.savez_compressed(
        path,
        n_qubits=np.int64(shots.n_qubits),
        probs=shots.probs,
        bases=shots.bases,
        flip_masks=shots.flip_masks,
        outcomes=shots.outcomes,
        twirl_seeds=shots.twirl_seeds,
    )


def load_shot_data(path: str | Path) -> ShotData:
    with np.load(path) as d:
        return ShotData(int(d["n_qubits"]), d["probs"], d["bases"],
                        d["flip_masks"], d["outcomes"], d["twirl_seeds"])


def _write_json(path: Path, doc: Mapping) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _update_manifest(out: Path, config: PipelineConfig, stage: str,
                     files: Sequence[str], warnings: Sequence[str]) -> None:
    path = out / "manifest.json"
    if path.is_file():
        manifest = json.loads(path.read_text())
    else:
        manifest = {
            "package": {"name": "temkit", "version": __version__},
            "environment": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
            "config": config_echo(config),
            "stages": {},
            "warnings": {},
        }
    manifest["stages"][stage] = {"files": sorted(files)}
    if warnings:
        manifest["warnings"][stage] = list(warnings)
    _write_json(path, manifest)


def _read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.is_file():
        raise ConfigError(f"missing artifact {path.name}; run earlier stages")
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def _column(header: list[str], rows: list[list[str]], name: str) -> list[float]:
    i = header.index(name)
    return [float(r[i]) for r in rows]


# -- synth ----------------------------------------------------------------------


def _sample_circuit_shots(config: PipelineConfig, t: int,
                          channels) -> ShotData:
    n = config.physics.n_qubits
    method = _shot_method(config)
    circuit = build_brickwork(_params(config, t), include_prep=True)
    rng = _rng(config, _S_MAIN, t)
    bias = config.sampling.signal_bias
    dist = BasisDistribution.ic_default(
        n, signal_qubit=t, signal=(bias, (1 - bias) / 2, (1 - bias) / 2)
    )
    plan = sample_settings(dist, config.sampling.n_settings, rng)
    return generate_shots(circuit, channels, _readout(config), plan,
                          config.sampling.shots_per_setting, rng,
                          method=method)


def _fixed_basis_bits(config: PipelineConfig, circuit: BrickworkCircuit,
                      channels, letters: str, n_settings: int, shots: int,
                      key: tuple[int, ...]) -> np.ndarray:
    """Twirl-corrected bits of a fixed-basis measurement, (C, M) uint64.

    Used for benchmark points where the target basis is known; the flip
    twirl still symmetrizes readout errors.
    """
    n = config.physics.n_qubits
    rng = _rng(config, *key)
    dist = BasisDistribution.ic_default(n)
    plan = SettingsPlan.from_strings(
        dist, [letters.replace("I", "Z")] * n_settings
    )
    data = generate_shots(circuit, channels, _readout(config), plan, shots,
                          rng, method=_shot_method(config))
    return data.outcomes ^ data.flip_masks


def _cycle_effective_bits(config: PipelineConfig, channels, slot: str,
                          letters: str, depth: int,
                          key: tuple[int, ...]) -> np.ndarray:
    """Bits of one benchmark point, measured in its preparation basis."""
    circuit = build_cycle_benchmark(_slot_layers(config)[slot],
                                    config.physics.n_qubits, letters, depth)
    return _fixed_basis_bits(config, circuit, channels, letters,
                             config.learning.n_settings,
                             config.learning.shots_per_setting, key)


def _slot_layers(config: PipelineConfig):
    n = config.physics.n_qubits
    even = build_brickwork(_clifford_params(config, 1),
                           include_prep=False).layers[0]
    odd = build_brickwork(_clifford_params(config, 2),
                          include_prep=False).layers[1]
    return {"even": even, "odd": odd}


def run_synth(config: PipelineConfig, out: str | Path,
              threads: int = 1) -> list[str]:
    """Generate and store all synthetic measurement data."""
    out = Path(out)
    (out / "shots").mkdir(parents=True, exist_ok=True)
    channels = truth_channels(config)
    files = []
    for slot, model in channels.items():
        name = f"truth_model_{slot}.json"
        (out / name).write_text(model.to_json() + "\n")
        files.append(name)

    for t in config.times():
        shots = _sample_circuit_shots(config, t, channels)
        save_shot_data(out / "shots" / f"main_t{t}.npz", shots)
        files.append(f"shots/main_t{t}.npz")
    if config.learning.splits == "finetuned":
        # percent-level checkpoints need the dedicated-basis variance,
        # not the randomized-measurement one
        n = config.physics.n_qubits
        eff = []
        for t in config.times():
            circuit = build_brickwork(_clifford_params(config, t),
                                      include_prep=True)
            letters = "".join("X" if q == t else "I" for q in range(n))
            eff.append(_fixed_basis_bits(
                config, circuit, channels, letters,
                config.sampling.n_settings,
                config.sampling.shots_per_setting, (_S_CLIFFORD, t),
            ))
        np.savez_compressed(out / "shots" / "clifford.npz",
                            n_qubits=np.int64(n),
                            ts=np.asarray(config.times(), dtype=np.int64),
                            eff=np.stack(eff))
        files.append("shots/clifford.npz")

    basis = SparseBasis(config.physics.n_qubits)
    settings = benchmark_settings(basis)
    verify_coverage(settings, basis)
    depths = config.learning.depths
    for slot_idx, slot in enumerate(("even", "odd")):
        tasks = [
            (s_idx, d_idx, setting.letters, depth)
            for s_idx, setting in enumerate(settings)
            for d_idx, depth in enumerate(depths)
        ]

        def one(task, slot=slot, slot_idx=slot_idx):
            s_idx, d_idx, letters, depth = task
            key = (_S_CYCLE, slot_idx, s_idx, d_idx)
            return _cycle_effective_bits(config, channels, slot, letters,
                                         depth, key)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, tasks))
        else:
            results = [one(task) for task in tasks]
        C = config.learning.n_settings
        M = config.learning.shots_per_setting
        eff = np.zeros((len(settings), len(depths), C, M), dtype=np.uint64)
        for (s_idx, d_idx, _, _), bits in zip(tasks, results):
            eff[s_idx, d_idx] = bits
        name = f"shots/cycle_{slot}.npz"
        np.savez_compressed(
            out / name,
            n_qubits=np.int64(config.physics.n_qubits),
            depths=np.asarray(depths, dtype=np.int64),
            letters=np.array([s.letters for s in settings]),
            eff=eff,
        )
        files.append(name)
    _update_manifest(out, config, "synth", files, [])
    return []


# -- learn ----------------------------------------------------------------------


def _pauli_products(eff: np.ndarray, support: Sequence[int]) -> np.ndarray:
    """Per-shot +-1 eigenvalue products over the given qubits."""
    vals = np.ones(eff.shape, dtype=float)
    for q in support:
        bit = ((eff >> np.uint64(q)) & np.uint64(1)).astype(float)
        vals *= 1.0 - 2.0 * bit
    return vals.reshape(-1)


def _fit_slot_fidelities(basis: SparseBasis, settings, depths, eff
                         ) -> np.ndarray:
    """Pair fidelity per basis entry from pooled fixed-basis counts."""
    covering = [[] for _ in range(len(basis))]
    for s_idx, setting in enumerate(settings):
        for i in setting.measured:
            covering[i].append(s_idx)
    fbar = np.zeros(len(basis))
    for i, entry in enumerate(basis.entries):
        means, errs = [], []
        for d_idx in range(len(depths)):
            vals = np.concatenate([
                _pauli_products(eff[s_idx, d_idx], entry.support)
                for s_idx in covering[i]
            ])
            means.append(float(vals.mean()))
            # floor: a mean of exactly +-1 still carries ~1/K uncertainty
            errs.append(max(float(vals.std(ddof=1) / np.sqrt(vals.size)),
                            1.0 / vals.size))
        try:
            fit = fit_decay(entry, np.asarray(depths, dtype=float),
                            means, errs)
        except ValueError as exc:
            raise ConfigError(
                f"cannot fit the decay of {entry}: {exc}; "
                "raise the learning shot budget or lower the noise"
            ) from exc
        fbar[i] = fit.pair_fidelity
    return fbar


def run_learn(config: PipelineConfig, out: str | Path) -> list[str]:
    """Refit the generator model from the stored benchmark data."""
    out = Path(out)
    n = config.physics.n_qubits
    basis = SparseBasis(n)
    settings = benchmark_settings(basis)
    warnings: list[str] = []

    pair_fids = {}
    for slot in ("even", "odd"):
        path = out / "shots" / f"cycle_{slot}.npz"
        if not path.is_file():
            raise ConfigError(f"missing artifact {path.name}; run synth first")
        with np.load(path) as d:
            depths = d["depths"]
            eff = d["eff"]
        pair_fids[slot] = _fit_slot_fidelities(basis, settings, depths, eff)

    alphas = {slot: None for slot in pair_fids}
    splits_used = "symmetric"
    if config.learning.splits == "finetuned":
        calibration = _calibration(config)
        path = out / "shots" / "clifford.npz"
        if not path.is_file():
            raise ConfigError("missing artifact clifford.npz; run synth first")
        with np.load(path) as d:
            cliff_ts = [int(t) for t in d["ts"]]
            cliff_eff = d["eff"]
        checkpoints = []
        for i, t in enumerate(cliff_ts):
            circuit = build_brickwork(_clifford_params(config, t),
                                      include_prep=True)
            obs = _signal_observable(n, t)
            value = float(_pauli_products(cliff_eff[i], [t]).mean())
            if calibration is not None:
                value /= float(calibration[t])
            checkpoints.append((circuit, obs, value))
        try:
            weights = finetune_splits(
                checkpoints, basis, pair_fids,
                slack=config.learning.checkpoint_slack,
            )
            alphas = {slot: weights.alphas[slot] for slot in pair_fids}
            splits_used = "finetuned"
        except ModelViolationError as exc:
            warnings.append(
                f"split fine-tuning failed ({exc}); falling back to "
                "symmetric splits"
            )

    layers = _slot_layers(config)
    doc: dict[str, Any] = {"version": 1, "splits": splits_used, "slots": {}}
    for slot, fbar in pair_fids.items():
        tableau = layer_tableau(layers[slot], n)
        conj = layer_conjugates(tableau, basis)
        m_direct, m_conj = build_anticommutation_matrices(basis, conj)
        fit = fit_generators(fbar, alphas[slot], m_direct, m_conj, basis,
                             layer_id=slot)
        if fit.residual > config.learning.residual_tol:
            warnings.append(
                f"layer {slot}: generator fit residual {fit.residual:.3g} "
                f"exceeds {config.learning.residual_tol}; the noise may not "
                "be a sparse generator channel"
            )
        doc["slots"][slot] = json.loads(fit.model.to_json())
        doc["slots"][slot]["fit_residual"] = fit.residual
    _write_json(out / "learned_model.json", doc)
    _update_manifest(out, config, "learn", ["learned_model.json"], warnings)
    return warnings


def load_learned_model(out: str | Path) -> dict[str, SparsePauliLindblad]:
    path = Path(out) / "learned_model.json"
    if not path.is_file():
        raise ConfigError("missing artifact learned_model.json; run learn first")
    doc = json.loads(path.read_text())
    channels = {}
    for slot, sub in doc["slots"].items():
        sub = {k: v for k, v in sub.items() if k != "fit_residual"}
        channels[slot] = SparsePauliLindblad.from_json(json.dumps(sub))
    return channels


# -- mitigate ---------------------------------------------------------------------


def run_mitigate(config: PipelineConfig, out: str | Path) -> list[str]:
    """Apply the learned inverse map to the stored main-circuit shots."""
    out = Path(out)
    n = config.physics.n_qubits
    channels = load_learned_model(out)
    calibration = _calibration(config)
    mit = config.mitigation
    raw_v, raw_e, mit_v, mit_e = [], [], [], []
    deepest = None
    for t in config.times():
        shots = load_shot_data(out / "shots" / f"main_t{t}.npz")
        circuit = build_brickwork(_params(config, t), include_prep=True)
        obs = _signal_observable(n, t)
        tem = build_tem_map(
            circuit, channels, chi_max=mit.chi, cutoff=mit.cutoff,
            light_cone=obs if mit.light_cone else None,
            cone_margin=mit.cone_margin,
        )
        cleaned = mitigated_estimate(shots, tem, obs,
                                     calibration=calibration,
                                     cutoff=mit.cutoff)
        raw = estimate(shots, obs, calibration=calibration)
        raw_v.append(raw.value)
        raw_e.append(raw.stderr)
        mit_v.append(cleaned.value)
        mit_e.append(cleaned.stderr)
        deepest = (shots, circuit, obs)
    write_decay_csv(out / "estimates.csv", list(config.times()),
                    unmitigated=raw_v, unmitigated_stderr=raw_e,
                    mitigated=mit_v, mitigated_stderr=mit_e)

    shots, circuit, obs = deepest
    values, states = [], []
    for chi in sorted(mit.chi_sweep):
        tem = build_tem_map(
            circuit, channels, chi_max=chi, cutoff=mit.cutoff,
            light_cone=obs if mit.light_cone else None,
            cone_margin=mit.cone_margin,
        )
        train = modify_observable(tem, obs, cutoff=mit.cutoff, chi_max=chi)
        states.append(train)
        values.append(estimate(shots, train, calibration=calibration).value)
    report = convergence_report(sorted(mit.chi_sweep), values, states=states)
    write_convergence_csv(out / "convergence.csv", report)
    _update_manifest(out, config, "mitigate",
                     ["estimates.csv", "convergence.csv"], [])
    return []


# -- simulate ---------------------------------------------------------------------


def _ideal_expectation(config: PipelineConfig, circuit: BrickworkCircuit,
                       obs: PauliString) -> float:
    if circuit.n_qubits <= MAX_STATEVECTOR_QUBITS:
        return statevector_expectation(circuit, obs)
    return heisenberg_expectation(circuit, obs,
                                  chi_max=config.mitigation.chi or 64)


def _noisy_expectation(config: PipelineConfig, circuit: BrickworkCircuit,
                       obs: PauliString, channels) -> float:
    if circuit.n_qubits <= MAX_DENSITY_QUBITS:
        return noisy_expectation_dm(circuit, channels, obs)
    return heisenberg_expectation(circuit, obs, channels=channels,
                                  chi_max=config.mitigation.chi or 64)


def _inmodel_mitigated(config: PipelineConfig, circuit: BrickworkCircuit,
                       obs: PauliString, channels) -> float:
    mit = config.mitigation
    tem = build_tem_map(circuit, channels, chi_max=mit.chi, cutoff=mit.cutoff,
                        light_cone=obs if mit.light_cone else None,
                        cone_margin=mit.cone_margin)
    train = modify_observable(tem, obs, cutoff=mit.cutoff, chi_max=mit.chi)
    back = heisenberg_evolve(circuit, train, chi_max=mit.chi,
                             cutoff=mit.cutoff, channels=channels)
    return initial_state_expectation(back)


def run_simulate(config: PipelineConfig, out: str | Path,
                 threads: int = 1) -> list[str]:
    """Classical reference curves from the injected truth model."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    n = config.physics.n_qubits
    channels = truth_channels(config)
    ts = list(config.times())

    ideal, noisy = [], []
    for t in ts:
        circuit = build_brickwork(_params(config, t), include_prep=True)
        obs = _signal_observable(n, t)
        ideal.append(_ideal_expectation(config, circuit, obs))
        noisy.append(_noisy_expectation(config, circuit, obs, channels))
    write_decay_csv(out / "reference.csv", ts, ideal=ideal, noisy_sim=noisy)

    cliff_ideal, cliff_noisy = [], []
    for t in ts:
        circuit = build_brickwork(_clifford_params(config, t),
                                  include_prep=True)
        obs = _signal_observable(n, t)
        cliff_ideal.append(_ideal_expectation(config, circuit, obs))
        cliff_noisy.append(_noisy_expectation(config, circuit, obs, channels))
    write_decay_csv(out / "clifford.csv", ts, ideal=cliff_ideal,
                    noisy_sim=cliff_noisy)
    files = ["reference.csv", "clifford.csv"]

    if config.b_offsets:
        def one(offset):
            rows = []
            for t in ts:
                circuit = build_brickwork(_params(config, t, b_offset=offset),
                                          include_prep=True)
                obs = _signal_observable(n, t)
                rows.append((
                    offset, t,
                    _ideal_expectation(config, circuit, obs),
                    _noisy_expectation(config, circuit, obs, channels),
                    _inmodel_mitigated(config, circuit, obs, channels),
                ))
            return rows

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                blocks = list(pool.map(one, config.b_offsets))
        else:
            blocks = [one(offset) for offset in config.b_offsets]
        with open(out / "sweep.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(SWEEP_CSV_HEADER)
            for block in blocks:
                for row in block:
                    w.writerow([repr(float(x)) for x in row])
        files.append("sweep.csv")
    _update_manifest(out, config, "simulate", files, [])
    return []


# -- report -----------------------------------------------------------------------


def run_report(config: PipelineConfig, out: str | Path) -> list[str]:
    """Merge references and estimates into the final tables."""
    out = Path(out)
    ref_header, ref_rows = _read_table(out / "reference.csv")
    est_header, est_rows = _read_table(out / "estimates.csv")
    cliff_header, cliff_rows = _read_table(out / "clifford.csv")
    ts = _column(ref_header, ref_rows, "t")
    if _column(est_header, est_rows, "t") != ts:
        raise ConfigError("reference.csv and estimates.csv disagree on t")
    ideal = _column(ref_header, ref_rows, "ideal")
    noisy = _column(ref_header, ref_rows, "noisy_sim")
    raw_v = _column(est_header, est_rows, "unmitigated")
    raw_e = _column(est_header, est_rows, "unmitigated_stderr")
    mit_v = _column(est_header, est_rows, "mitigated")
    mit_e = _column(est_header, est_rows, "mitigated_stderr")
    write_decay_csv(out / "decay.csv", ts, ideal=ideal, noisy_sim=noisy,
                    unmitigated=raw_v, unmitigated_stderr=raw_e,
                    mitigated=mit_v, mitigated_stderr=mit_e)

    summary: dict[str, Any] = {
        "theory_rate": theory_decay_rate(config.physics.h_field),
        "ideal_fit": None,
        "mitigated_fit": None,
    }
    try:
        fit = fit_decay_rate(zip(ts, ideal))
        summary["ideal_fit"] = {"rate": fit.rate, "stderr": fit.stderr}
    except ValueError:
        pass
    try:
        fit = fit_decay_rate(zip(ts, mit_v))
        summary["mitigated_fit"] = {"rate": fit.rate, "stderr": fit.stderr,
                                    "ci95": list(fit.ci95)}
    except ValueError:
        pass

    # damping of the deepest self-inverse benchmark sets the sampling cost
    c_ideal = _column(cliff_header, cliff_rows, "ideal")[-1]
    c_noisy = _column(cliff_header, cliff_rows, "noisy_sim")[-1]
    damping = signal_damping(c_ideal, c_noisy)
    write_overhead_csv(out / "overhead.csv",
                       [(f"clifford_t{int(ts[-1])}", damping)])
    summary["signal_damping"] = damping

    rel = relative_error_report(raw_v, mit_v, noisy, ideal)
    summary["relative_errors"] = {
        "unmitigated": list(rel.unmitigated),
        "mitigated": list(rel.mitigated),
        "unmitigated_index": list(rel.unmitigated_index),
        "mitigated_index": list(rel.mitigated_index),
    }
    _write_json(out / "summary.json", summary)
    _update_manifest(out, config, "report",
                     ["decay.csv", "overhead.csv", "summary.json"], [])
    return []


# -- pipeline and entry point -------------------------------------------------------


_STAGES = ("synth", "learn", "mitigate", "simulate", "report")


def run_pipeline(config, out: str | Path, threads: int = 1) -> Path:
    """Run all stages into one artifact directory and return its path."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    elif isinstance(config, Mapping):
        config = config_from_mapping(config)
    out = Path(out)
    warnings: list[str] = []
    warnings += run_synth(config, out, threads=threads)
    warnings += run_learn(config, out)
    warnings += run_mitigate(config, out)
    warnings += run_simulate(config, out, threads=threads)
    warnings += run_report(config, out)
    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temkit",
        description="Synthetic noisy-circuit experiments with "
                    "tensor-network error mitigation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "synth": "generate synthetic measurement data from the injected model",
        "learn": "refit the noise model from stored benchmark data",
        "mitigate": "apply the learned inverse map to stored shots",
        "simulate": "compute classical reference curves (and sweeps)",
        "report": "merge artifacts into the final tables",
    }
    for name in _STAGES:
        p = sub.add_parser(name, help=descriptions[name])
        p.add_argument("--config", required=True, help="JSON or TOML config")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent tasks")
        p.add_argument("--chi", type=int, default=None,
                       help="override the mitigation bond-dimension cap")
        p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                       help="scale profile supplying sampling defaults")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, profile=args.profile,
                             seed=args.seed, chi=args.chi)
        if args.command == "synth":
            warnings = run_synth(config, args.out, threads=args.threads)
        elif args.command == "learn":
            warnings = run_learn(config, args.out)
        elif args.command == "mitigate":
            warnings = run_mitigate(config, args.out)
        elif args.command == "simulate":
            warnings = run_simulate(config, args.out, threads=args.threads)
        else:
            warnings = run_report(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SimulationCapError as exc:
        print(f"simulation cap: {exc}", file=sys.stderr)
        return EXIT_CAP_ERROR
    for line in warnings:
        print(f"warning: {line}", file=sys.stderr)
    return EXIT_MODEL_WARNINGS if warnings else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
