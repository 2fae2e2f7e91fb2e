"""Declarative experiments: instances x settings -> one CSV row per criterion.

A config is a YAML mapping; relative paths resolve against the config file's
directory. Example::

    seed: 7
    workers: 4
    output: results.csv
    archive_dir: samples
    target: {k: 2}
    instances:
      - glob: instances/ran3_*.txt
    reads: 1000
    gauges: [1, 10]
    anneal_times: [2.0e-5, 4.0e-5]
    scales: [1.0, 0.5]
    ice: {sigma_h: 0.05, sigma_J: 0.035}
    criteria: [exact_ground, within_band]

Every instance runs the same random streams under every setting, so settings
are compared on paired samples.
"""

from __future__ import annotations

import glob as globlib
import hashlib
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .chimera import ChimeraGraph, build_chimera, read_working_graph
from .embedding import Embedding, default_kappa_grid, embed, estimate_kappa0, read_embedding
from .errors import ConfigError, OverLimitError
from .exact import ground_state
from .generators import InstanceSpec, planted_consistent, read_instance
from .ice import IceModel, success_band
from .ising import Hamiltonian, energy, rescale
from .metrics import CSV_COLUMNS, SuccessCriterion, rows_to_csv, st99, st99_time, success_prob
from .postprocess import STAGES, postprocess_pipeline
from .sampler import AnnealerConfig, chain_shim, run

logger = logging.getLogger(__name__)

_KNOWN_KEYS = {
    "seed", "workers", "output", "archive_dir", "target", "instances", "reads", "gauges",
    "anneal_times", "scales", "annealer", "ice", "h_bias", "kappa", "kappa_grid", "shim",
    "postprocess", "criteria", "exact_limit",
}


@dataclass(frozen=True)
class InstanceEntry:
    path: Path
    embedding: Path | None = None


@dataclass(frozen=True)
class ShimSettings:
    enabled: bool = False
    iterations: int = 5
    step: float = 0.05
    reads: int = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the file form."""

    instances: tuple[InstanceEntry, ...] = ()
    seed: int = 0
    workers: int = 1
    output: Path | None = None
    archive_dir: Path | None = None
    target: ChimeraGraph | None = None
    reads: int = 1000
    gauges: tuple[int, ...] = (10,)
    anneal_times: tuple[float, ...] | None = None
    scales: tuple[float, ...] = (1.0,)
    annealer: AnnealerConfig = field(default_factory=AnnealerConfig)
    ice: IceModel = field(default_factory=IceModel)
    h_bias: float = 0.0
    kappa: float | str = "calibrate"
    kappa_grid: tuple[float, ...] = tuple(default_kappa_grid())
    shim: ShimSettings = field(default_factory=ShimSettings)
    postprocess: tuple[tuple[str, ...], ...] = ((),)
    criteria: tuple[str, ...] = ("exact_ground", "within_band")
    exact_limit: int = 28

    @property
    def t_f_list(self) -> tuple[float, ...]:
        return self.anneal_times if self.anneal_times is not None else (self.annealer.t_f,)


def _as_tuple(value, name, cast):
    if value is None:
        return None
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        return tuple(cast(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _instances(raw, base: Path) -> tuple[InstanceEntry, ...]:
    out = []
    for item in raw or []:
        if isinstance(item, str):
            item = {"path": item}
        if not isinstance(item, dict):
            raise ConfigError(f"instance entries must be mappings or paths, got {item!r}")
        if "glob" in item:
            matches = sorted(globlib.glob(str(_resolve(base, item["glob"]))))
            matches = [m for m in matches if not m.endswith(".json")]
            out.extend(InstanceEntry(Path(m)) for m in matches)
        elif "path" in item:
            emb = item.get("embedding")
            out.append(InstanceEntry(_resolve(base, item["path"]), _resolve(base, emb) if emb else None))
        else:
            raise ConfigError(f"instance entry needs 'path' or 'glob': {item!r}")
    for entry in out:
        if not entry.path.exists():
            raise ConfigError(f"instance file not found: {entry.path}")
        if entry.embedding is not None and not entry.embedding.exists():
            raise ConfigError(f"embedding file not found: {entry.embedding}")
    return tuple(out)


def _target(raw, base: Path) -> ChimeraGraph | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("target must be a mapping with 'k' or 'working_graph'")
    if "working_graph" in raw:
        path = _resolve(base, raw["working_graph"])
        if not path.exists():
            raise ConfigError(f"working graph file not found: {path}")
        return read_working_graph(path)
    if "k" in raw:
        return build_chimera(int(raw["k"]))
    raise ConfigError("target must name 'k' or 'working_graph'")


def _postprocess(raw) -> tuple[tuple[str, ...], ...]:
    if raw is None:
        return ((),)
    if not isinstance(raw, list):
        raise ConfigError("postprocess must be a list of stage lists")
    out = []
    for stages in raw:
        stages = [stages] if isinstance(stages, str) else list(stages or [])
        for st in stages:
            if st not in STAGES:
                raise ConfigError(f"unknown postprocessing stage {st!r}")
        out.append(tuple(stages))
    return tuple(out) or ((),)


def parse_config(data: dict, base: Path = Path(".")) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed YAML mapping.

    Raises:
        ConfigError: unknown keys, malformed values or missing files.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a mapping")
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        annealer = AnnealerConfig(**(data.get("annealer") or {}))
        ice = IceModel(**(data.get("ice") or {})) if data.get("ice", {}) is not False else IceModel.off()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    shim_raw = data.get("shim") or {}
    if isinstance(shim_raw, bool):
        shim_raw = {"enabled": shim_raw}
    try:
        shim = ShimSettings(**shim_raw)
    except TypeError as exc:
        raise ConfigError(f"shim: {exc}") from None
    kappa = data.get("kappa", "calibrate")
    if kappa != "calibrate":
        try:
            kappa = float(kappa)
        except (TypeError, ValueError):
            raise ConfigError(f"kappa must be a number or 'calibrate', got {kappa!r}") from None
        if kappa <= 0:
            raise ConfigError("kappa must be positive")
    criteria = _as_tuple(data.get("criteria", ["exact_ground", "within_band"]), "criteria", str)
    for c in criteria:
        if c not in ("exact_ground", "within_band"):
            raise ConfigError(f"unknown criterion {c!r}")
    cfg = ExperimentConfig(
        instances=_instances(data.get("instances"), base),
        seed=int(data.get("seed", 0)),
        workers=int(data.get("workers", 1)),
        output=_resolve(base, data["output"]) if data.get("output") else None,
        archive_dir=_resolve(base, data["archive_dir"]) if data.get("archive_dir") else None,
        target=_target(data.get("target"), base),
        reads=int(data.get("reads", 1000)),
        gauges=_as_tuple(data.get("gauges", [10]), "gauges", int),
        anneal_times=_as_tuple(data.get("anneal_times"), "anneal_times", float),
        scales=_as_tuple(data.get("scales", [1.0]), "scales", float),
        annealer=annealer,
        ice=ice,
        h_bias=float(data.get("h_bias", 0.0)),
        kappa=kappa,
        kappa_grid=_as_tuple(data.get("kappa_grid", list(default_kappa_grid())), "kappa_grid", float),
        shim=shim,
        postprocess=_postprocess(data.get("postprocess")),
        criteria=criteria,
        exact_limit=int(data.get("exact_limit", 28)),
    )
    if cfg.workers < 1 or cfg.reads < 1:
        raise ConfigError("workers and reads must be >= 1")
    if any(p < 1 or p > cfg.reads for p in cfg.gauges):
        raise ConfigError("every gauge count must lie in 1..reads")
    if any(s <= 0 for s in cfg.scales):
        raise ConfigError("scales must be positive")
    for t_f in cfg.t_f_list:
        annealer.with_anneal_time(t_f)
    if any(e.embedding for e in cfg.instances) and cfg.target is None:
        raise ConfigError("embedded instances need a 'target' graph")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.parent)


# -- per-instance pipeline ----------------------------------------------------


def _stream_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _active_counts(H: Hamiltonian) -> tuple[int, int]:
    active = H.h != 0
    if len(H.J):
        active[H.edge_index.ravel()] = True
    return int(active.sum()), len(H.J)


def _reference_energy(H: Hamiltonian, spec: InstanceSpec | None, limit: int) -> tuple[float | None, str]:
    try:
        return ground_state(H, cap=1, limit=limit).energy, "exact"
    except OverLimitError:
        pass
    if spec is not None and spec.planted_state is not None and spec.cycles and planted_consistent(H, spec.cycles):
        return energy(H, np.asarray(spec.planted_state)), "planted"
    return None, "best_found"


def setting_label(p: int, t_f: float, scale: float) -> str:
    return f"p={p};t_f={t_f!r};scale={scale!r}"


def _archive(path: Path, states: np.ndarray, arrays: dict[str, np.ndarray]) -> dict:
    packed = np.packbits(states > 0, axis=1)
    np.savez_compressed(path, packed=packed, width=np.array(states.shape[1]), **arrays)
    digest = hashlib.sha256(np.ascontiguousarray(states).tobytes()).hexdigest()
    return {"file": path.name, "reads": int(states.shape[0]), "width": int(states.shape[1]), "states_sha256": digest}


def unpack_states(packed: np.ndarray, width: int) -> np.ndarray:
    bits = np.unpackbits(packed, axis=1, count=int(width))
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def run_instance(cfg: ExperimentConfig, index: int, entry: InstanceEntry) -> tuple[list[dict], list[dict]]:
    """Every setting for one instance; returns CSV rows and archive manifest entries."""
    inst = read_instance(entry.path)
    H0, spec = inst.H, inst.spec
    inst_id = entry.path.stem
    base_seed = _stream_seed(cfg.seed, index)
    base_cfg = replace(cfg.annealer, seed=base_seed)
    ice = replace(cfg.ice, seed=_stream_seed(cfg.seed, index, 1))

    emb: Embedding | None = None
    kappa = None
    if entry.embedding is not None:
        emb = read_embedding(entry.embedding, cfg.target)
        if cfg.kappa == "calibrate":
            est = estimate_kappa0(H0, emb, base_cfg, cfg.kappa_grid, ice=ice, reads=cfg.reads,
                                  gauges=1, h_bias=cfg.h_bias or None)
            kappa = est.kappa
        else:
            kappa = float(cfg.kappa)
        problem = embed(H0, emb, kappa)
        hardware, alpha = problem.hardware, problem.alpha
        N, M = emb.num_qubits, len(hardware.J)
        n_logical = H0.n
    else:
        hardware, alpha = H0, 1.0
        N, M = _active_counts(H0)
        n_logical = N

    bias = np.full(hardware.n, cfg.h_bias)
    if emb is not None and cfg.shim.enabled:
        shim = chain_shim(emb, kappa, base_cfg, ice, cfg.shim.iterations, cfg.shim.step,
                          reads=cfg.shim.reads, h_bias=bias, scale=alpha)
        bias = bias + shim.biases

    # solved-problem energies are reported in programmed units: logical energy times alpha
    ref_base, ref_kind = _reference_energy(H0, spec, cfg.exact_limit)

    results = []
    for p, t_f, scale in itertools.product(cfg.gauges, cfg.t_f_list, cfg.scales):
        run_cfg = base_cfg.with_anneal_time(t_f)
        programmed = hardware if scale == 1.0 else rescale(hardware, scale)
        ss = run(programmed, cfg.reads, p, run_cfg, ice, h_bias=bias if bias.any() else None)
        factor = alpha * scale
        for stages in cfg.postprocess:
            if emb is None and any(st != "descent_embedded" for st in stages):
                continue  # chain stages do not apply to native problems
            out = postprocess_pipeline(ss, stages, hardware=programmed, embedding=emb,
                                       logical=H0 if emb is not None else None,
                                       seed=_stream_seed(base_seed, 2))
            e = out.energies * factor if emb is not None else out.energies
            results.append((p, t_f, scale, stages, factor, e, ss))

    if ref_base is None:
        finite = [float(np.min(e / f)) for *_, f, e, _ in results if np.isfinite(e).any()]
        ref_base = min(finite) if finite else np.inf
    rows, manifest = [], []
    for i, (p, t_f, scale, stages, factor, e, ss) in enumerate(results):
        label = setting_label(p, t_f, scale)
        ref = ref_base * factor
        pp = "+".join(stages) if stages else "raw"
        k_per_gauge = -(-cfg.reads // p)
        for crit_name in cfg.criteria:
            crit = SuccessCriterion.exact(ref) if crit_name == "exact_ground" else SuccessCriterion.within(ref, success_band(N))
            pi = success_prob(e, crit)
            rows.append({
                "instance_id": inst_id, "class": spec.cls if spec else "", "n": n_logical, "N": N, "M": M,
                "setting": label, "reads": cfg.reads, "gauges": p, "t_f": float(t_f),
                "kappa": float(kappa) if kappa is not None else "", "postprocess": pp,
                "criterion": crit_name if ref_kind != "best_found" else f"{crit_name}@best_found",
                "reference_energy": float(ref), "band": float(crit.band), "pi": float(pi),
                "k99": float(st99(pi)), "st99_time_s": float(st99_time(pi, k_per_gauge, run_cfg.with_anneal_time(t_f))),
            })
        if cfg.archive_dir is not None:
            path = cfg.archive_dir / f"{inst_id}__{i:03d}.npz"
            meta = _archive(path, ss.states, {"energies": e, "gauge_index": ss.gauge_index})
            meta.update({"instance_id": inst_id, "setting": label, "postprocess": pp, "reference_energy": ref})
            manifest.append(meta)
    return rows, manifest


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run every instance and return the CSV text (also written to ``cfg.output``)."""
    if cfg.archive_dir is not None:
        cfg.archive_dir.mkdir(parents=True, exist_ok=True)
    jobs = list(enumerate(cfg.instances))
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda j: run_instance(cfg, *j), jobs))
    else:
        parts = [run_instance(cfg, *j) for j in jobs]
    rows = [r for part, _ in parts for r in part]
    text = rows_to_csv(rows, CSV_COLUMNS)
    if cfg.output is not None:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        cfg.output.write_text(text)
    if cfg.archive_dir is not None:
        manifest = [m for _, part in parts for m in part]
        (cfg.archive_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return text


def recompute_pi(archive_file, reference_energy: float, band: float = 0.0) -> float:
    """Success probability of an archived setting, from its stored energies."""
    with np.load(archive_file) as z:
        e = z["energies"]
    crit = SuccessCriterion.exact(reference_energy) if band == 0 else SuccessCriterion.within(reference_energy, band)
    return success_prob(e, crit)
