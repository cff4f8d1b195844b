"""Quad mesh coarsening by T-mesh quantization."""

from .errors import QuadCoarseError
from .estimator import QuadCoarsener
from .extraction import BlockStructuredMesh, CoarseLayout, extract_layout, place, subdivide
from .generators import generate_test_mesh
from .highorder import HighOrderMesh, build_high_order, export_high_order, gauss_lobatto, import_high_order
from .ilp import IlpModel, Quantization, build_constraints, integer_area, solve
from .mesh import QuadMesh, VertexClass, classify_vertices, load_mesh, save_mesh
from .pipeline import PipelineConfig, RunStats, run_pipeline
from .proxy import GeometryProxy
from .smoothing import QualityReport, quality, winslow_smooth
from .tmesh import TMesh, build_tmesh, compute_input_layout_count, intersection_records, propagate_traces

__all__ = [
    "BlockStructuredMesh",
    "CoarseLayout",
    "GeometryProxy",
    "HighOrderMesh",
    "IlpModel",
    "PipelineConfig",
    "QualityReport",
    "QuadCoarseError",
    "QuadCoarsener",
    "QuadMesh",
    "Quantization",
    "RunStats",
    "TMesh",
    "VertexClass",
    "build_constraints",
    "build_high_order",
    "build_tmesh",
    "classify_vertices",
    "compute_input_layout_count",
    "export_high_order",
    "extract_layout",
    "gauss_lobatto",
    "generate_test_mesh",
    "import_high_order",
    "integer_area",
    "intersection_records",
    "load_mesh",
    "place",
    "propagate_traces",
    "quality",
    "run_pipeline",
    "save_mesh",
    "solve",
    "subdivide",
    "winslow_smooth",
]
