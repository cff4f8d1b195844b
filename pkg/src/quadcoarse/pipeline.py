"""End-to-end coarsening pipeline and its statistics row."""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, IoError, QuadCoarseError
from .extraction import extract_layout, format_layout, place, subdivide
from .generators import generate_test_mesh
from .highorder import SPACINGS, build_high_order, export_high_order
from .ilp import build_constraints, format_lp, format_quantization, integer_area
from .mesh import QuadMesh, classify_vertices, irregular_vertices, load_mesh, save_mesh
from .proxy import GeometryProxy
from .simplex import Budget
from .smoothing import layout_diameter, quality, reference_normals, winslow_smooth
from .tmesh import build_tmesh, compute_input_layout_count, format_tmesh, intersection_records, propagate_traces

log = logging.getLogger(__name__)

STATS_COLUMNS = ("model", "faces", "p_init", "irr", "vars", "p_final", "time", "quadgen", "ilp", "smooth")


@dataclass
class PipelineConfig:
    input: str | None = None
    generate: str | None = None
    alpha: float = math.pi / 4
    order: int = 5
    spacing: str = "eq"
    collapse_35: bool = True
    stop_rule: str = "one"
    max_iters: int | None = None
    tol: float | None = None
    relaxation: float = 0.7
    budget: Budget = field(default_factory=Budget)
    scale: float = 1.0
    out: str | None = None
    dump_all: bool = False
    threads: int | None = None
    mesh: QuadMesh | None = None

    def validate(self) -> None:
        if sum(x is not None for x in (self.input, self.generate, self.mesh)) != 1:
            raise InvalidSpec("exactly one of input, generate and mesh is required")
        if not 0.0 <= self.alpha <= math.pi / 4 + 1e-12:
            raise InvalidSpec("alpha must lie in [0, pi/4]")
        if self.order < 1:
            raise InvalidSpec("order must be >= 1")
        if self.spacing not in SPACINGS:
            raise InvalidSpec(f"spacing must be one of {SPACINGS}")
        if self.stop_rule not in ("one", "two"):
            raise InvalidSpec("stop rule must be 'one' or 'two'")

    @property
    def model_name(self) -> str:
        if self.generate is not None:
            return self.generate
        return Path(self.input).stem if self.input is not None else "mesh"


@dataclass
class RunStats:
    model: str
    faces: int
    p_init: int
    irr: int
    vars: int
    p_final: int
    time: float
    quadgen: float
    ilp: float
    smooth: float

    def csv_row(self) -> str:
        name = self.model.replace(",", ";")
        return (
            f"{name},{self.faces},{self.p_init},{self.irr},{self.vars},{self.p_final},"
            f"{self.time:.3f},{100 * self.quadgen:.1f},{100 * self.ilp:.1f},{100 * self.smooth:.1f}"
        )

    def summary(self) -> str:
        ratio = self.p_init / self.p_final if self.p_final else float("inf")
        return "\n".join([
            f"model     {self.model}",
            f"faces     {self.faces}",
            f"p_init    {self.p_init}",
            f"irregular {self.irr}",
            f"ilp vars  {self.vars}",
            f"p_final   {self.p_final}  (ratio {ratio:.2f})",
            f"time      {self.time:.2f} s  (load {100 * self.quadgen:.0f}%, "
            f"ilp {100 * self.ilp:.0f}%, smooth+ho {100 * self.smooth:.0f}%)",
        ])


@dataclass
class PipelineResult:
    stats: RunStats
    mesh: object
    tmesh: object
    model: object
    quantization: object
    layout: object
    fine: object
    positions: np.ndarray
    smoothing: object
    quality: object
    high_order: object
    repairs: list
    phase_times: dict[str, float]
    area: int


def _threads(config: PipelineConfig) -> int:
    if config.threads is not None:
        return max(1, int(config.threads))
    env = os.environ.get("QUADCOARSE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise InvalidSpec(f"QUADCOARSE_THREADS must be an integer, got {env!r}") from None


class _Phases:
    """Wall-clock accumulator that tags escaping errors with the phase name."""

    def __init__(self):
        self.times: dict[str, float] = {}
        self.name = None

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.times[self.name] = self.times.get(self.name, 0.0) + time.perf_counter() - self.t0
        if exc is not None and isinstance(exc, QuadCoarseError) and not hasattr(exc, "phase"):
            exc.phase = self.name
        return False


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    config.validate()
    threads = _threads(config)
    ph = _Phases()
    with ph("load"):
        if config.mesh is not None:
            mesh = config.mesh
        elif config.generate is not None:
            mesh = generate_test_mesh(config.generate)
        else:
            mesh = load_mesh(config.input)
        classes = classify_vertices(mesh)
    with ph("tmesh"):
        p_init = compute_input_layout_count(mesh, classes)
        traces = propagate_traces(mesh, classes, config.alpha, config.stop_rule)
        tm = build_tmesh(mesh, traces, classes)
        records = intersection_records(tm, config.alpha)
        model = build_constraints(tm, records, config.alpha, config.collapse_35, share_variables=True)
    with ph("ilp"):
        layout, sol, repairs = extract_layout(tm, model, config.budget)
        q = model.arc_values(sol.var_values)
    with ph("extract"):
        place(layout, tm, q)
        proxy = GeometryProxy(mesh, workers=threads)
        fine = subdivide(layout, mesh, config.scale, proxy)
    with ph("smooth"):
        X, report = winslow_smooth(
            fine.mesh, proxy, config.relaxation, config.tol, config.max_iters,
            diameter=layout_diameter(layout.quads, layout.n_vertices),
        )
        qrep = quality(X, fine.mesh.quads, reference_normals(X, fine.mesh.quads, proxy))
        ho = build_high_order(fine, config.order, config.spacing, proxy, X)
    total = sum(ph.times.values())
    frac = (lambda k: ph.times.get(k, 0.0) / total) if total > 0 else (lambda k: 0.0)
    stats = RunStats(
        config.model_name,
        mesh.n_quads,
        p_init,
        len(irregular_vertices(classes)),
        model.n_vars,
        layout.n_quads,
        total,
        frac("load"),
        frac("ilp"),
        frac("smooth"),
    )
    log.info("pipeline %s: %s", stats.model, stats.csv_row())
    result = PipelineResult(
        stats, mesh, tm, model, sol, layout, fine, X, report, qrep, ho, repairs, dict(ph.times),
        integer_area(tm, q),
    )
    if config.out is not None:
        with ph("export"):
            write_artifacts(result, config)
    return result


def write_artifacts(result: PipelineResult, config: PipelineConfig) -> None:
    """High-order mesh and stats always; every intermediate with ``dump_all``."""
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        export_high_order(result.high_order, out / "mesh.ho")
        if result.high_order.order == 1:
            export_high_order(result.high_order, out / "mesh.obj", format="obj")
        (out / "stats.csv").write_text(",".join(STATS_COLUMNS) + "\n" + result.stats.csv_row() + "\n")
        (out / "summary.txt").write_text(result.stats.summary() + "\n")
        if config.dump_all:
            save_mesh(result.mesh, out / "input.qcm")
            (out / "tmesh.txt").write_text(format_tmesh(result.tmesh))
            (out / "model.lp").write_text(format_lp(result.model))
            (out / "quantization.txt").write_text(format_quantization(result.model, result.quantization))
            (out / "layout.txt").write_text(format_layout(result.layout))
            fine = result.fine.mesh
            smoothed = QuadMesh(result.positions, fine.quads, _feature_pairs(fine), fine.corners)
            save_mesh(smoothed, out / "fine.qcm")
            (out / "quality.txt").write_text(result.quality.table() + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _feature_pairs(mesh) -> dict:
    return {tuple(int(x) for x in mesh.edges[e]): cid for e, cid in mesh.feature_edges.items()}


def read_stats(path) -> RunStats:
    """Parse a ``stats.csv`` written by :func:`write_artifacts`."""
    path = Path(path)
    if path.is_dir():
        path = path / "stats.csv"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    parts = lines[-1].split(",")
    if len(parts) != len(STATS_COLUMNS):
        raise IoError(f"{path}: expected {len(STATS_COLUMNS)} columns")
    pct = [float(x) / 100 for x in parts[7:]]
    return RunStats(parts[0], *(int(x) for x in parts[1:6]), float(parts[6]), *pct)
