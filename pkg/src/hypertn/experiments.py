"""Experiment drivers behind the command line: verification, sweeps, scans."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .blocks import (
    IntegrityError,
    NodeRecipe,
    build_frame,
    check_node_reduction,
    default_perfect_tensor,
    family_recipe,
    is_cyclic_symmetric,
    is_perfect,
    node_from_recipe,
    random_recipe,
    reduced_path_node,
    reduced_path_node_from_recipe,
)
from .blocks.frame import check_planar_2uniform
from .correlations import (
    BulkOperator,
    DegenerateSpectrumError,
    brute_force_sandwich,
    central_charge_bound,
    end_caps,
    intersection_kernel,
    random_density_matrix,
    random_traceless_probe,
    scaling_dimension,
    subleading_vectors,
    three_point_C,
    two_point_transfer,
)
from .gates import ConvergenceError, dual_family, haar_unitary, is_dual_unitary, named_gate
from .network import build_network, connected_pairs, no_triangle_check

THREADS_ENV = "HYPERTN_THREADS"

SPECTRAL_COLUMNS = (
    "run_id",
    "sample",
    "seed",
    "family",
    "params",
    "turn",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda5",
    "lambda6",
    "delta",
    "multiplicity",
    "deflation_residual",
    "sv_ratio",
    "C_real",
    "dismissed",
    "status",
)
THREE_POINT_COLUMNS = SPECTRAL_COLUMNS[:6] + ("lambda2", "deflation_residual", "sv_ratio", "C_real", "C_imag", "dismissed", "status")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanConfig:
    mode: str
    seed: int | None = None
    samples: int = 1
    grid: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    family: str = "f1"
    turns: tuple[str, ...] = ("right",)
    tol: float = 1e-9
    threads: int = 1
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in ("verify", "sweep", "random_scan", "three_point", "central_charge", "net_dump"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.samples < 1:
            raise ConfigError("sample count must be at least 1")
        if self.mode in ("random_scan", "three_point") and self.seed is None:
            raise ConfigError(f"{self.mode} needs a seed")
        if self.grid is not None:
            for axis in self.grid:
                if not axis:
                    raise ConfigError("grid axes must be non-empty")
                if min(axis) < 0 or max(axis) > 1:
                    raise ConfigError("grid values must lie in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for t in self.turns:
            if t not in ("right", "left"):
                raise ConfigError(f"unknown turn {t!r}")

    def run_id(self) -> str:
        payload = {
            "mode": self.mode,
            "seed": self.seed,
            "samples": self.samples,
            "grid": self.grid,
            "family": self.family,
            "turns": self.turns,
            "params": self.params,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=list).encode()).hexdigest()[:12]


@dataclass
class ScanRecord:
    row: dict[str, Any]
    provenance: dict[str, Any]
    wall_time: float


def resolve_threads(requested: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1")
        return value
    if requested is None:
        return 1
    if requested < 1:
        raise ConfigError("--threads must be at least 1")
    return requested


def sample_seeds(master: int, index: int) -> tuple[int, int]:
    """Two 64-bit seeds for sample ``index``; independent of the total sample count."""
    state = np.random.SeedSequence(master, spawn_key=(index,)).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def parallel_map(fn: Callable, items: Sequence, threads: int) -> Iterator:
    """Ordered map; results are identical to the serial loop."""
    if threads <= 1 or len(items) < 2:
        for item in items:
            yield fn(item)
        return
    chunk = max(1, len(items) // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, items, chunksize=chunk)


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x))


def _spectral_row(report, turn: str) -> dict[str, Any]:
    mods = report.moduli
    return {
        "turn": turn,
        **{f"lambda{k}": _fmt(mods[k - 1]) for k in range(2, 7)},
        "delta": _fmt(report.delta),
        "multiplicity": report.multiplicity,
        "deflation_residual": _fmt(report.deflation_residual),
    }


def spectral_rows(recipe: NodeRecipe, turns: Iterable[str]) -> list[dict[str, Any]]:
    rows = []
    for turn in turns:
        r = reduced_path_node_from_recipe(recipe, turn)
        try:
            rows.append({**_spectral_row(scaling_dimension(r), turn), "status": "ok"})
        except DegenerateSpectrumError:
            rows.append({"turn": turn, "status": "degenerate"})
    return rows


# sweeps ---------------------------------------------------------------------


def _sweep_point(args: tuple[str, float, float, tuple[str, ...]]) -> list[ScanRecord]:
    family, a, b, turns = args
    t0 = time.perf_counter()
    recipe = family_recipe(a, family, b)
    rows = spectral_rows(recipe, turns)
    wall = time.perf_counter() - t0
    prov = {"recipe": recipe.to_dict(), "recipe_id": recipe.recipe_id}
    return [ScanRecord({"family": family, "params": json.dumps({"a": a, "b": b}), **row}, prov, wall) for row in rows]


def run_sweep(cfg: ScanConfig) -> list[ScanRecord]:
    if cfg.grid is None:
        raise ConfigError("sweep needs a grid")
    a_values, b_values = cfg.grid
    items = [(cfg.family, float(a), float(b), cfg.turns) for a in a_values for b in b_values]
    records: list[ScanRecord] = []
    for k, recs in enumerate(parallel_map(_sweep_point, items, cfg.threads)):
        for rec in recs:
            rec.row.update({"run_id": cfg.run_id(), "sample": k, "seed": ""})
            records.append(rec)
    return records


def sweep_grid(records: Sequence[ScanRecord], turn: str = "right") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(a_values, b_values, delta[a, b])`` from sweep records of one turn."""
    pts = {}
    for rec in records:
        if rec.row.get("turn") != turn or rec.row.get("status") != "ok":
            continue
        p = json.loads(rec.row["params"])
        pts[(p["a"], p["b"])] = float(rec.row["delta"])
    a_vals = np.array(sorted({k[0] for k in pts}))
    b_vals = np.array(sorted({k[1] for k in pts}))
    grid = np.full((a_vals.size, b_vals.size), np.nan)
    for (a, b), d in pts.items():
        grid[np.searchsorted(a_vals, a), np.searchsorted(b_vals, b)] = d
    return a_vals, b_vals, grid


# random scans ------------------------------------------------------------------


def _scan_sample(args: tuple[int, int, tuple[str, ...]]) -> list[ScanRecord] | None:
    master, index, turns = args
    frame_seed, ent_seed = sample_seeds(master, index)
    t0 = time.perf_counter()
    try:
        recipe = random_recipe(frame_seed, ent_seed)
    except ConvergenceError:
        return None
    rows = spectral_rows(recipe, turns)
    wall = time.perf_counter() - t0
    prov = {"recipe": recipe.to_dict(), "recipe_id": recipe.recipe_id, "frame_seed": frame_seed, "entangler_seed": ent_seed}
    return [
        ScanRecord({"family": "random", "params": json.dumps({"frame_seed": frame_seed, "entangler_seed": ent_seed}), **row}, prov, wall)
        for row in rows
    ]


@dataclass
class ScanSummary:
    samples: int
    skipped: int
    delta_min: float
    delta_median: float
    delta_max: float
    lambda_stats: dict[str, tuple[float, float, float]]
    all_positive: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "samples": self.samples,
            "skipped": self.skipped,
            "delta": {"min": self.delta_min, "median": self.delta_median, "max": self.delta_max},
            "lambda": {k: {"min": v[0], "median": v[1], "max": v[2]} for k, v in self.lambda_stats.items()},
            "all_delta_positive": self.all_positive,
        }


def run_random_scan(cfg: ScanConfig) -> tuple[list[ScanRecord], ScanSummary]:
    items = [(int(cfg.seed), i, cfg.turns) for i in range(cfg.samples)]
    records: list[ScanRecord] = []
    skipped = 0
    for i, recs in enumerate(parallel_map(_scan_sample, items, cfg.threads)):
        if recs is None:
            skipped += 1
            continue
        for rec in recs:
            rec.row.update({"run_id": cfg.run_id(), "sample": i, "seed": cfg.seed})
            records.append(rec)
    return records, summarize(records, skipped)


def summarize(records: Sequence[ScanRecord], skipped: int = 0) -> ScanSummary:
    ok = [r.row for r in records if r.row.get("status") == "ok"]
    deltas = np.array([float(r["delta"]) for r in ok]) if ok else np.array([np.nan])
    stats = {}
    for k in range(2, 7):
        vals = np.array([float(r[f"lambda{k}"]) for r in ok]) if ok else np.array([np.nan])
        stats[f"lambda{k}"] = (float(vals.min()), float(np.median(vals)), float(vals.max()))
    return ScanSummary(
        samples=len({(r["sample"]) for r in ok}),
        skipped=skipped,
        delta_min=float(deltas.min()),
        delta_median=float(np.median(deltas)),
        delta_max=float(deltas.max()),
        lambda_stats=stats,
        all_positive=bool(np.all(deltas > 0)),
    )


# three-point scans ---------------------------------------------------------------


def run_three_point(cfg: ScanConfig) -> tuple[list[ScanRecord], dict[str, Any]]:
    a = float(cfg.params.get("a", 0.302))
    b = float(cfg.params.get("b", 0.817))
    ports = tuple(cfg.params.get("ports", (0, 2, 4)))
    bulk_mode = cfg.params.get("bulk", "wishart")
    recipe = family_recipe(a, cfg.family, b)
    node = node_from_recipe(recipe, verify=False)
    turn = cfg.turns[0]
    r = reduced_path_node(node, turn, "dense")
    vectors = subleading_vectors(r)
    kernel = intersection_kernel(node, vectors.v_left, ports) if vectors.sv_ratio >= 100 else None
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    records = []
    dismissed = 0
    for i in range(cfg.samples):
        t0 = time.perf_counter()
        bulk = BulkOperator.maximally_mixed() if bulk_mode == "mixed" else random_density_matrix(rng)
        rep = three_point_C(r, node, bulk, kernel=kernel, vectors=vectors)
        dismissed += rep.dismissed
        row = {
            "run_id": cfg.run_id(),
            "sample": i,
            "seed": cfg.seed,
            "family": cfg.family,
            "params": json.dumps({"a": a, "b": b, "ports": list(ports)}),
            "turn": turn,
            "lambda2": _fmt(abs(rep.lambda2)),
            "deflation_residual": _fmt(rep.deflation_residual),
            "sv_ratio": _fmt(rep.sv_ratio),
            "C_real": "" if rep.c_value is None else _fmt(rep.c_value.real),
            "C_imag": "" if rep.c_value is None else _fmt(rep.c_value.imag),
            "dismissed": int(rep.dismissed),
            "status": "dismissed" if rep.dismissed else "ok",
        }
        prov = {"recipe": recipe.to_dict(), "recipe_id": recipe.recipe_id, "bulk": _complex_list(bulk.matrix)}
        records.append(ScanRecord(row, prov, time.perf_counter() - t0))
    summary = {"samples": cfg.samples, "dismissed": dismissed, "dismissal_rate": dismissed / cfg.samples, "sv_ratio": vectors.sv_ratio}
    return records, summary


def _complex_list(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


# verification suite ------------------------------------------------------------


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.suite, "name": self.name, "passed": self.passed, "residual": self.residual, "detail": self.detail}


FAULTS = ("cnot-frame", "haar-frame")


def run_verify(tol: float = 1e-9, inject_fault: str | None = None, layers: int = 2) -> list[Check]:
    """Run the invariant suites; every check is recorded, none short-circuits."""
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ConfigError(f"unknown fault {inject_fault!r}; choose from {FAULTS}")
    checks: list[Check] = []

    def add(suite: str, name: str, residual: float, limit: float, detail: str = "") -> None:
        checks.append(Check(suite, name, bool(residual < limit), float(residual), detail))

    # gates
    verdicts = [is_dual_unitary(dual_family(a)) for a in np.linspace(0, 1, 11)]
    worst = max(max(v.unitary_residual, v.dual_residual) for v in verdicts)
    add("gates", "dual_family_orthogonality", worst, 1e-10)
    add("gates", "endpoint_swap", float(np.abs(dual_family(0).matrix - named_gate("SWAP").matrix).max()), 1e-12)
    add("gates", "endpoint_dcnot", float(np.abs(dual_family(1).matrix - named_gate("DCNOT").matrix).max()), 1e-12)

    # blocks
    perfect = default_perfect_tensor()
    add("blocks", "perfect_tensor", is_perfect(perfect.tensor).worst_residual, 1e-10)
    add("blocks", "perfect_cyclic", 0.0 if perfect.symmetrized and is_cyclic_symmetric(perfect) else 1.0, 0.5)
    if inject_fault == "cnot-frame":
        frame_gate = named_gate("CNOT")
    elif inject_fault == "haar-frame":
        frame_gate = haar_unitary(4, 1)
    else:
        frame_gate = dual_family(0.302)
    dv = is_dual_unitary(frame_gate)
    add("blocks", "frame_generator_dual_unitary", max(dv.unitary_residual, dv.dual_residual), 1e-10, f"generator={frame_gate.provenance.name}")
    fv = check_planar_2uniform(build_frame(frame_gate, check=False))
    add("blocks", "frame_planar_2uniform", fv.worst, tol, f"generator={frame_gate.provenance.name}")
    recipe = family_recipe(0.302, "f1", 0.817)
    node = node_from_recipe(recipe, verify=False)
    rv = check_node_reduction(node.array, tol)
    add("blocks", "node_reduction", rv.worst, tol)
    r = reduced_path_node(node, "right", "dense")
    add("blocks", "lambda1_is_32", abs(r.lambda1 - 32) / 32, 1e-8)
    add("blocks", "phi_eigenvector", r.phi_residual(), 1e-8)

    # network
    net = build_network(layers)
    try:
        net.validate()
        add("network", "tiling_valid", 0.0, 1.0)
    except Exception as exc:  # validate raises on any structural defect
        add("network", "tiling_valid", math.inf, 1.0, str(exc))
    pairs = connected_pairs(net)
    add("network", "path_uniqueness", float(max(pairs.values(), default=1) - 1), 0.5)
    add("network", "no_triangle", 0.0 if no_triangle_check(net).passed else 1.0, 0.5)

    # correlations
    rng = np.random.default_rng(0)
    v1, v2 = random_traceless_probe(rng), random_traceless_probe(rng)
    rho = random_density_matrix(rng)
    single = build_network(0)
    bf = brute_force_sandwich(single, node, rho, {0: v1, 2: v2})
    tp = two_point_transfer(r, 1, end_caps(node), v1, v2, rho)
    add("correlations", "oracle_n1", abs(bf - tp) / max(abs(bf), 1e-300), 1e-8)
    add("correlations", "central_charge", abs(central_charge_bound() - 18.948), 0.01)
    return checks


def checks_report(checks: Sequence[Check]) -> dict[str, Any]:
    failed = [c for c in checks if not c.passed]
    return {
        "passed": not failed,
        "checks": [c.to_dict() for c in checks],
        "first_failure": failed[0].to_dict() if failed else None,
    }


# writers ---------------------------------------------------------------------------


def write_csv(records: Sequence[ScanRecord], stream: io.TextIOBase, columns: Sequence[str] = SPECTRAL_COLUMNS) -> None:
    writer = csv.DictWriter(stream, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({c: rec.row.get(c, "") for c in columns})


def write_jsonl(records: Sequence[ScanRecord], stream: io.TextIOBase, include_wall_time: bool = True) -> None:
    for rec in records:
        entry = {"row": rec.row, "provenance": rec.provenance}
        if include_wall_time:
            entry["wall_time"] = rec.wall_time
        stream.write(json.dumps(entry, sort_keys=True) + "\n")


def recompute_row(provenance: dict[str, Any], turn: str = "right") -> dict[str, Any]:
    """Rebuild the spectral columns of a row from its provenance alone."""
    recipe = NodeRecipe.from_json(provenance["recipe"])
    if recipe.recipe_id != provenance.get("recipe_id", recipe.recipe_id):
        raise IntegrityError("provenance recipe id does not match its recipe")
    return spectral_rows(recipe, (turn,))[0]
