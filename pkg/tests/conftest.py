import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from quadcoarse.generators import SUITE  # noqa: E402
from quadcoarse.pipeline import PipelineConfig, run_pipeline  # noqa: E402

SMALL = ("grid(4,4)", "annulus(8,3)", "disk_with_pair", "ellipse_fig2")


@functools.lru_cache(maxsize=None)
def pipeline(spec: str, order: int = 5, spacing: str = "eq"):
    return run_pipeline(PipelineConfig(generate=spec, order=order, spacing=spacing))


@pytest.fixture(params=SMALL)
def small_result(request):
    return pipeline(request.param)


@pytest.fixture(params=SMALL + SUITE)
def any_result(request):
    return pipeline(request.param)
