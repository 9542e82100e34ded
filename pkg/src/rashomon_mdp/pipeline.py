"""End-to-end experiment pipeline with file artifacts.

Each stage reads its upstream artifacts from the output directory and
writes its own, so stages can run standalone (given identical inputs
they are idempotent) or chained by `cmd_all`.  All report files are
byte-deterministic for a fixed config; wall-clock times live only in
the run manifest.
"""

from __future__ import annotations

import csv
import io
import json
import multiprocessing
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import rashomon_mdp
from rashomon_mdp.attribution import global_ranking
from rashomon_mdp.checker import TablePolicy, check_threshold, max_reach_mdp
from rashomon_mdp.cloning import (
    ExpertDataset,
    MlpPolicy,
    TrainConfig,
    extract_expert_dataset,
    init_policy,
    load_policy,
    read_dataset,
    save_policy,
    train,
    write_dataset,
)
from rashomon_mdp.mdp import (
    ExplicitMdp,
    model_fingerprint,
    read_explicit,
    validate_mdp,
    write_explicit,
)
from rashomon_mdp.proplang import PropertyQuery, parse_property
from rashomon_mdp.rashomon import (
    build_induced_dtmc,
    build_rashomon_set,
    canonical_chain_bytes,
    partition_induced,
    policy_id_key,
    shift_eval,
)
from rashomon_mdp.taxi import TaxiParams, build_taxi

import hashlib


class ConfigError(ValueError):
    """Raised when configuration text or values are invalid."""


class MissingArtifactError(FileNotFoundError):
    """Raised when a stage's upstream artifact has not been produced yet."""


# artifact file names, relative to the output directory
MODEL_FILE = "model.explicit"
BUILD_SIDECAR = "build.json"
EXPERT_POLICY_FILE = "expert_policy.txt"
DATASET_FILE = "expert_dataset.txt"
SYNTH_SIDECAR = "synthesize.json"
POLICY_DIR = "policies"
TRAIN_SIDECAR = "train.json"
VERIFY_CSV = "verify.csv"
VERIFY_SIDECAR = "verify.json"
ATTRIBUTION_CSV = "attribution.csv"
ATTRIBUTION_SIDECAR = "attribution.json"
RASHOMON_CSV = "rashomon.csv"
RASHOMON_SIDECAR = "rashomon.json"
SHIFT_CSV = "shift.csv"
SHIFT_SIDECAR = "shift.json"
MANIFEST_FILE = "run_manifest.json"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment parameters."""

    taxi: TaxiParams
    property_text: str
    seeds: tuple[int, ...]
    epochs: int
    learning_rate: float
    batch_size: int
    hidden: tuple[int, int]
    shift_jobs: tuple[int, ...]
    out_dir: str
    cap: int
    workers: int
    tol: float

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seed list must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds")
        if not self.shift_jobs:
            raise ConfigError("shift job range must be nonempty")
        if self.shift_jobs[0] != self.taxi.num_jobs:
            raise ConfigError(
                f"shift job range starts at {self.shift_jobs[0]}, "
                f"but the taxi trains at num_jobs={self.taxi.num_jobs}"
            )
        if list(self.shift_jobs) != sorted(set(self.shift_jobs)):
            raise ConfigError("shift job range must be strictly increasing")
        if self.cap < 1:
            raise ConfigError("state cap must be positive")
        if self.workers < 1:
            raise ConfigError("worker count must be positive")
        if self.tol <= 0.0:
            raise ConfigError("tolerance must be positive")
        try:
            query = parse_property(self.property_text)
        except ValueError as e:
            raise ConfigError(f"bad property: {e}") from None
        # fail early on hyperparameter errors
        try:
            TrainConfig(
                seed=self.seeds[0],
                epochs=self.epochs,
                learning_rate=self.learning_rate,
                batch_size=self.batch_size,
                hidden=self.hidden,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None
        object.__setattr__(self, "_query", query)

    @property
    def query(self) -> PropertyQuery:
        return object.__getattribute__(self, "_query")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            seed=seed,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            hidden=self.hidden,
        )

    def resolved_items(self) -> list[tuple[str, str]]:
        """Canonical key/value pairs identifying the experiment.

        The output directory and worker count are excluded: where results
        are written and how work is scheduled must not change them.
        """
        taxi = self.taxi
        return [
            ("batch_size", str(self.batch_size)),
            ("cap", str(self.cap)),
            ("depots", ";".join(f"{x},{y}" for x, y in taxi.depots)),
            ("epochs", str(self.epochs)),
            ("first_passenger", f"{taxi.first_passenger[0]},{taxi.first_passenger[1]}"),
            ("fuel_capacity", str(taxi.fuel_capacity)),
            ("height", str(taxi.height)),
            ("hidden", ",".join(str(h) for h in self.hidden)),
            ("jobs", ",".join(str(j) for j in self.shift_jobs)),
            ("learning_rate", repr(self.learning_rate)),
            ("num_jobs", str(taxi.num_jobs)),
            ("property", self.property_text),
            ("seeds", ",".join(str(s) for s in self.seeds)),
            ("taxi_start", f"{taxi.taxi_start[0]},{taxi.taxi_start[1]}"),
            ("tol", repr(self.tol)),
            ("width", str(taxi.width)),
        ]

    def checksum(self) -> str:
        text = "\n".join(f"{k} = {v}" for k, v in self.resolved_items())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _parse_pair(text: str, what: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{what} must be two comma-separated integers")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"{what} must be two comma-separated integers") from None


def parse_jobs_range(text: str) -> tuple[int, ...]:
    """Parse `min..max` (inclusive) or a comma list into job counts."""
    text = text.strip()
    if ".." in text:
        lo_text, _, hi_text = text.partition("..")
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError:
            raise ConfigError(f"bad job range {text!r}") from None
        if hi < lo:
            raise ConfigError(f"job range {text!r} is empty")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad job range {text!r}") from None


def read_config_file(path: Union[str, os.PathLike]) -> dict[str, str]:
    """Parse a flat `key = value` file with `#` comments."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ConfigError(f"line {lineno}: expected 'key = value'")
                key = key.strip()
                value = value.strip()
                if not key:
                    raise ConfigError(f"line {lineno}: empty key")
                if key in values:
                    raise ConfigError(f"line {lineno}: duplicate key {key!r}")
                values[key] = value
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    return values


_KNOWN_KEYS = {
    "width",
    "height",
    "fuel_capacity",
    "num_jobs",
    "depots",
    "taxi_start",
    "first_passenger",
    "property",
    "seeds",
    "seed_count",
    "base_seed",
    "epochs",
    "learning_rate",
    "batch_size",
    "hidden",
    "jobs",
    "out",
    "cap",
    "workers",
    "tol",
}


def load_config(
    path: Union[str, os.PathLike, None] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Resolve defaults, an optional config file and overrides, in that order."""
    values: dict[str, str] = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    def get_int(key: str, default: int) -> int:
        if key not in values:
            return default
        try:
            return int(values[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer") from None

    def get_float(key: str, default: float) -> float:
        if key not in values:
            return default
        try:
            return float(values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number") from None

    width = get_int("width", 3)
    height = get_int("height", 3)
    fuel_capacity = get_int("fuel_capacity", 39)
    num_jobs = get_int("num_jobs", 5)
    depots: tuple[tuple[int, int], ...] = ()
    if "depots" in values:
        cells = [cell for cell in values["depots"].split(";") if cell.strip()]
        depots = tuple(_parse_pair(cell.strip(), "depot") for cell in cells)
    taxi_start = (
        _parse_pair(values["taxi_start"], "taxi_start")
        if "taxi_start" in values
        else (0, 0)
    )
    first_passenger = (
        _parse_pair(values["first_passenger"], "first_passenger")
        if "first_passenger" in values
        else (1, 2)
    )
    try:
        taxi = TaxiParams(
            width=width,
            height=height,
            fuel_capacity=fuel_capacity,
            num_jobs=num_jobs,
            depots=depots,
            taxi_start=taxi_start,
            first_passenger=first_passenger,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None

    if "seeds" in values:
        try:
            seeds = tuple(int(part) for part in values["seeds"].split(","))
        except ValueError:
            raise ConfigError("seeds must be a comma list of integers") from None
    else:
        count = get_int("seed_count", 20)
        base = get_int("base_seed", 1)
        if count < 1:
            raise ConfigError("seed_count must be positive")
        seeds = tuple(range(base, base + count))

    property_text = values.get(
        "property", f"P=? [ F jobs_done={taxi.num_jobs} & done=1 ]"
    )
    if "jobs" in values:
        shift_jobs = parse_jobs_range(values["jobs"])
    else:
        shift_jobs = tuple(range(taxi.num_jobs, taxi.num_jobs + 6))

    hidden_text = values.get("hidden", "64,64")
    try:
        hidden_parts = tuple(int(part) for part in hidden_text.split(","))
    except ValueError:
        raise ConfigError("hidden must be a comma list of integers") from None
    if len(hidden_parts) != 2:
        raise ConfigError("hidden must name exactly two layer widths")

    return ExperimentConfig(
        taxi=taxi,
        property_text=property_text,
        seeds=seeds,
        epochs=get_int("epochs", 3000),
        learning_rate=get_float("learning_rate", 0.05),
        batch_size=get_int("batch_size", 32),
        hidden=hidden_parts,
        shift_jobs=shift_jobs,
        out_dir=values.get("out", "out"),
        cap=get_int("cap", 2_000_000),
        workers=get_int("workers", os.cpu_count() or 1),
        tol=get_float("tol", 1e-10),
    )


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(
            f"missing {path.name}; run the '{producer}' stage first"
        )
    return path


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _policy_id(seed: int) -> str:
    return str(seed)


def _sorted_policy_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=policy_id_key)


def _pool_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map, fanned out over forked workers when asked."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=min(workers, len(items))) as pool:
        return pool.map(fn, items, chunksize=1)


# ---------------------------------------------------------------- stages


def cmd_build(cfg: ExperimentConfig) -> list[str]:
    """Compile the taxi MDP and write the explicit model plus stats."""
    out = _out_dir(cfg)
    model = build_taxi(cfg.taxi, cap=cfg.cap)
    violations = [v for v in validate_mdp(model) if v.kind != "missing-action"]
    if violations:
        first = violations[0]
        raise RuntimeError(
            f"built model failed validation: {first.kind} at state {first.state}: "
            f"{first.message}"
        )
    text = write_explicit(model)
    _write_text(out / MODEL_FILE, text)
    stats = {
        "config_checksum": cfg.checksum(),
        "states": model.n_states,
        "transitions": model.n_transitions,
        "actions": list(model.actions),
        "fingerprint": model_fingerprint(model),
        "version": rashomon_mdp.__version__,
    }
    _write_text(out / BUILD_SIDECAR, _json_text(stats))
    return [MODEL_FILE, BUILD_SIDECAR]


def _load_model(cfg: ExperimentConfig) -> ExplicitMdp:
    out = _out_dir(cfg)
    model = read_explicit(_require(out / MODEL_FILE, "build"))
    if not isinstance(model, ExplicitMdp):
        raise RuntimeError(f"{MODEL_FILE} does not contain an MDP")
    return model


def cmd_synthesize(cfg: ExperimentConfig) -> list[str]:
    """Solve the property on the built model and emit expert policy + dataset."""
    out = _out_dir(cfg)
    model = _load_model(cfg)
    query = cfg.query
    result, expert = max_reach_mdp(model, query.predicate, tol=cfg.tol)
    lines = [f"TABLE {len(expert)}"]
    lines.extend(str(a) for a in expert.actions)
    _write_text(out / EXPERT_POLICY_FILE, "\n".join(lines) + "\n")
    dataset = extract_expert_dataset(model, expert)
    _write_text(out / DATASET_FILE, write_dataset(dataset))
    sidecar = {
        "config_checksum": cfg.checksum(),
        "property": cfg.property_text,
        "value": result.at_initial,
        "iterations": result.iterations,
        "residual": result.residual,
        "dataset_rows": len(dataset),
    }
    if query.mode == "threshold":
        sidecar["verdict"] = check_threshold(query, result.at_initial)
    _write_text(out / SYNTH_SIDECAR, _json_text(sidecar))
    return [EXPERT_POLICY_FILE, DATASET_FILE, SYNTH_SIDECAR]


def read_table_policy(path: Union[str, os.PathLike]) -> TablePolicy:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or not lines[0].startswith("TABLE"):
        raise ValueError("missing TABLE header")
    head = lines[0].split()
    if len(head) != 2 or not head[1].isdigit():
        raise ValueError("TABLE header needs a state count")
    count = int(head[1])
    if len(lines) - 1 != count:
        raise ValueError(f"expected {count} action lines, found {len(lines) - 1}")
    return TablePolicy(actions=tuple(int(line) for line in lines[1:]))


_TRAIN_DATASET: Optional[ExpertDataset] = None
_TRAIN_CFG: Optional[ExperimentConfig] = None


def _train_one(seed: int):
    data = _TRAIN_DATASET
    cfg = _TRAIN_CFG
    train_cfg = cfg.train_config(seed)
    policy = init_policy(data.schema, data.num_actions, train_cfg)
    trained, report = train(policy, data, train_cfg)
    return (
        seed,
        save_policy(trained),
        {
            "accuracy": report.final_accuracy,
            "early_stopped": report.early_stopped,
            "epochs_run": report.epochs_run,
            "final_loss": report.final_loss,
            "checksum": trained.checksum(),
        },
    )


def cmd_train(cfg: ExperimentConfig) -> list[str]:
    """Clone the expert dataset once per seed; write one policy file each."""
    global _TRAIN_DATASET, _TRAIN_CFG
    out = _out_dir(cfg)
    dataset = read_dataset(_require(out / DATASET_FILE, "synthesize"))
    _TRAIN_DATASET, _TRAIN_CFG = dataset, cfg
    try:
        results = _pool_map(_train_one, list(cfg.seeds), cfg.workers)
    finally:
        _TRAIN_DATASET, _TRAIN_CFG = None, None
    files = []
    per_seed = {}
    for seed, text, report in results:
        name = f"{POLICY_DIR}/policy_{seed}.txt"
        _write_text(out / name, text)
        files.append(name)
        per_seed[_policy_id(seed)] = report
    sidecar = {
        "config_checksum": cfg.checksum(),
        "policies": per_seed,
        "converged": _sorted_policy_ids(
            pid for pid, rep in per_seed.items() if rep["accuracy"] == 1.0
        ),
    }
    _write_text(out / TRAIN_SIDECAR, _json_text(sidecar))
    return files + [TRAIN_SIDECAR]


def _load_policies(cfg: ExperimentConfig, model: ExplicitMdp) -> dict[str, MlpPolicy]:
    out = _out_dir(cfg)
    policies = {}
    for seed in cfg.seeds:
        path = _require(out / POLICY_DIR / f"policy_{seed}.txt", "train")
        policies[_policy_id(seed)] = load_policy(path, model.schema)
    return policies


_VERIFY_MODEL: Optional[ExplicitMdp] = None
_VERIFY_CFG: Optional[ExperimentConfig] = None
_VERIFY_POLICIES: Optional[dict[str, MlpPolicy]] = None


def _verify_one(pid: str):
    model = _VERIFY_MODEL
    cfg = _VERIFY_CFG
    induced = build_induced_dtmc(
        model, _VERIFY_POLICIES[pid], cfg.query.predicate, policy_id=pid, cap=cfg.cap
    )
    canonical_chain_bytes(induced.chain)
    return induced


def cmd_verify(cfg: ExperimentConfig) -> list[str]:
    """Induce one chain per trained policy, partition and model-check classes."""
    global _VERIFY_MODEL, _VERIFY_CFG, _VERIFY_POLICIES
    out = _out_dir(cfg)
    model = _load_model(cfg)
    policies = _load_policies(cfg, model)
    ids = _sorted_policy_ids(policies)
    _VERIFY_MODEL, _VERIFY_CFG, _VERIFY_POLICIES = model, cfg, policies
    try:
        induced = _pool_map(_verify_one, ids, cfg.workers)
    finally:
        _VERIFY_MODEL, _VERIFY_CFG, _VERIFY_POLICIES = None, None, None
    classes = partition_induced(induced, tol=cfg.tol)

    class_ids = {}
    for idx, cls in enumerate(classes.classes):
        for pid in cls.policy_ids:
            class_ids[pid] = f"C{idx + 1}"
    rows = [
        (pid, class_ids[pid], repr(classes.classes[classes.class_of(pid)].value))
        for pid in ids
    ]
    _write_text(out / VERIFY_CSV, _csv_text(("policy_id", "class_id", "mc_value"), rows))

    sidecar = {
        "config_checksum": cfg.checksum(),
        "property": cfg.property_text,
        "mdp_fingerprint": classes.mdp_fingerprint,
        "classes": [
            {
                "class_id": f"C{idx + 1}",
                "policy_ids": _sorted_policy_ids(cls.policy_ids),
                "size": len(cls.policy_ids),
                "value": cls.value,
                "iterations": cls.check_iterations,
                "residual": cls.check_residual,
                "chain_states": cls.representative.chain.n_states,
                "chain_transitions": cls.representative.chain.n_transitions,
                **(
                    {"verdict": check_threshold(cfg.query, cls.value)}
                    if cfg.query.mode == "threshold"
                    else {}
                ),
            }
            for idx, cls in enumerate(classes.classes)
        ],
    }
    _write_text(out / VERIFY_SIDECAR, _json_text(sidecar))
    return [VERIFY_CSV, VERIFY_SIDECAR]


def _load_verify_sidecar(cfg: ExperimentConfig) -> dict:
    out = _out_dir(cfg)
    with open(_require(out / VERIFY_SIDECAR, "verify"), "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_attribute(cfg: ExperimentConfig) -> list[str]:
    """Rank features per trained policy by mean saliency over the dataset."""
    out = _out_dir(cfg)
    model = _load_model(cfg)
    dataset = read_dataset(_require(out / DATASET_FILE, "synthesize"))
    policies = _load_policies(cfg, model)
    verify_data = _load_verify_sidecar(cfg)
    value_of = {}
    for cls in verify_data["classes"]:
        for pid in cls["policy_ids"]:
            value_of[pid] = cls["value"]

    ids = _sorted_policy_ids(policies)
    rankings = {}
    for pid in ids:
        rankings[pid] = global_ranking(policies[pid], dataset)

    header = ("policy_id", *dataset.schema.names, "mc_value")
    rows = [
        (pid, *(str(r) for r in rankings[pid].ranks), repr(value_of[pid]))
        for pid in ids
    ]
    _write_text(out / ATTRIBUTION_CSV, _csv_text(header, rows))
    sidecar = {
        "config_checksum": cfg.checksum(),
        "features": list(dataset.schema.names),
        "rankings": {
            pid: {"ranks": list(rankings[pid].ranks), "mc_value": value_of[pid]}
            for pid in ids
        },
    }
    _write_text(out / ATTRIBUTION_SIDECAR, _json_text(sidecar))
    return [ATTRIBUTION_CSV, ATTRIBUTION_SIDECAR]


def cmd_rashomon(cfg: ExperimentConfig) -> list[str]:
    """Assemble the Rashomon set of the largest behavioral class."""
    from rashomon_mdp.attribution import FeatureRanking

    out = _out_dir(cfg)
    verify_data = _load_verify_sidecar(cfg)
    with open(
        _require(out / ATTRIBUTION_SIDECAR, "attribute"), "r", encoding="utf-8"
    ) as fh:
        attribution_data = json.load(fh)
    rankings = {
        pid: FeatureRanking(ranks=tuple(entry["ranks"]))
        for pid, entry in attribution_data["rankings"].items()
    }
    top = verify_data["classes"][0]
    selected = build_rashomon_set(top["policy_ids"], rankings)
    rows = [
        (pid, " ".join(str(r) for r in rankings[pid].ranks), repr(top["value"]))
        for pid in selected
    ]
    _write_text(
        out / RASHOMON_CSV, _csv_text(("policy_id", "ranking", "mc_value"), rows)
    )
    sidecar = {
        "config_checksum": cfg.checksum(),
        "class_id": top["class_id"],
        "class_size": top["size"],
        "class_value": top["value"],
        "rashomon_set": list(selected),
        "distinct_rankings": len(selected),
        "rankings": {pid: list(rankings[pid].ranks) for pid in selected},
    }
    _write_text(out / RASHOMON_SIDECAR, _json_text(sidecar))
    return [RASHOMON_CSV, RASHOMON_SIDECAR]


def cmd_shift(cfg: ExperimentConfig) -> list[str]:
    """Re-verify Rashomon-set members, ensemble and permissive union as the
    job count grows."""
    out = _out_dir(cfg)
    model = _load_model(cfg)
    with open(
        _require(out / RASHOMON_SIDECAR, "rashomon"), "r", encoding="utf-8"
    ) as fh:
        rashomon_data = json.load(fh)
    member_ids = rashomon_data["rashomon_set"]
    policies = _load_policies(cfg, model)
    members = {pid: policies[pid] for pid in member_ids}
    report = shift_eval(
        cfg.taxi, cfg.shift_jobs, members, tol=cfg.tol, cap=cfg.cap
    )

    job_cols = [f"jobs_{j}" for j in report.job_counts]
    rows = []
    for pid in report.member_ids:
        rows.append((pid, *(repr(v) for v in report.member_values[pid])))
    rows.append(("member_mean", *(repr(v) for v in report.member_mean)))
    rows.append(("ensemble", *(repr(v) for v in report.ensemble_values)))
    rows.append(("permissive_max", *(repr(v) for v in report.permissive_max)))
    rows.append(("permissive_min", *(repr(v) for v in report.permissive_min)))
    rows.append(("optimal", *(repr(v) for v in report.optimal_values)))
    _write_text(out / SHIFT_CSV, _csv_text(("row_label", *job_cols), rows))

    sidecar = {
        "config_checksum": cfg.checksum(),
        "job_counts": list(report.job_counts),
        "member_ids": list(report.member_ids),
        "member_values": {pid: report.member_values[pid] for pid in report.member_ids},
        "member_mean": report.member_mean,
        "ensemble": report.ensemble_values,
        "permissive_max": report.permissive_max,
        "permissive_min": report.permissive_min,
        "optimal": report.optimal_values,
        "members_diverge": report.members_diverge,
        "full_model_sizes": [list(s) for s in report.full_sizes],
        "permissive_induced_sizes": [list(s) for s in report.induced_sizes],
    }
    _write_text(out / SHIFT_SIDECAR, _json_text(sidecar))
    return [SHIFT_CSV, SHIFT_SIDECAR]


_STAGES: tuple[tuple[str, Callable[[ExperimentConfig], list[str]]], ...] = (
    ("build", cmd_build),
    ("synthesize", cmd_synthesize),
    ("train", cmd_train),
    ("verify", cmd_verify),
    ("rashomon", lambda cfg: cmd_attribute(cfg) + cmd_rashomon(cfg)),
    ("shift", cmd_shift),
)


def cmd_all(cfg: ExperimentConfig) -> dict:
    """Run every stage in order and write the run manifest.

    The manifest records, per stage, the files written and the wall-clock
    seconds spent; attribution runs inside the rashomon stage.  All other
    artifacts are byte-deterministic for a fixed config.
    """
    out = _out_dir(cfg)
    stages = {}
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    for name, fn in _STAGES:
        t0 = time.perf_counter()
        files = fn(cfg)
        stages[name] = {
            "files": files,
            "seconds": round(time.perf_counter() - t0, 3),
        }
        for rel in files:
            if not (out / rel).exists():
                raise RuntimeError(f"stage {name} reported missing file {rel}")
    manifest = {
        "config_checksum": cfg.checksum(),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "stages": stages,
        "started": started,
        "version": rashomon_mdp.__version__,
    }
    _write_text(out / MANIFEST_FILE, _json_text(manifest))
    return manifest
