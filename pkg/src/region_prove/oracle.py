"""Reference safe-rate estimators used to check the refinement results.

``grid_safe_rate`` evaluates ``y*`` at every cell centre of a uniform grid
and is the desk-scale ground truth for low-dimensional inputs.
``mc_safe_rate`` is the plain Monte Carlo estimate. Both only need an object
with an ``evaluate_batch`` method returning ``y*`` per row.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Hyperrectangle

MAX_CELLS = 10**8
CHUNK = 1 << 17


class OracleRefused(ValueError):
    pass


@dataclass(frozen=True)
class OracleReport:
    safe_rate: float
    violation_rate: float
    samples_or_cells: int
    method: str
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


def _report(safe: int, total: int, method: str, start: float) -> OracleReport:
    return OracleReport(
        safe_rate=safe / total,
        violation_rate=(total - safe) / total,
        samples_or_cells=total,
        method=method,
        wall_time=time.perf_counter() - start,
    )


def grid_safe_rate(net, region: Hyperrectangle, cells_per_dim: int) -> OracleReport:
    if cells_per_dim < 1:
        raise ValueError("cells_per_dim must be >= 1")
    d = region.dim
    total = cells_per_dim**d
    if total > MAX_CELLS:
        raise OracleRefused(f"{cells_per_dim}^{d} = {total} cells exceeds the limit of {MAX_CELLS}")
    start = time.perf_counter()
    lo, hi = region.as_arrays()
    width = (hi - lo) / cells_per_dim
    shape = (cells_per_dim,) * d
    safe = 0
    for first in range(0, total, CHUNK):
        idx = np.arange(first, min(first + CHUNK, total))
        cells = np.stack(np.unravel_index(idx, shape), axis=1)
        pts = lo + (cells + 0.5) * width
        safe += int(np.count_nonzero(net.evaluate_batch(pts) >= 0.0))
    return _report(safe, total, "grid", start)


def mc_safe_rate(net, region: Hyperrectangle, samples: int, seed: int = 0) -> OracleReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    lo, hi = region.as_arrays()
    safe = 0
    for first in range(0, samples, CHUNK):
        m = min(CHUNK, samples - first)
        pts = lo + (hi - lo) * rng.random((m, region.dim))
        safe += int(np.count_nonzero(net.evaluate_batch(pts) >= 0.0))
    return _report(safe, samples, "monte-carlo", start)


def region_violation_fraction(net, region: Hyperrectangle, cells_per_dim: int) -> float:
    """Share of grid cells in ``region`` whose centre violates the property."""
    return grid_safe_rate(net, region, cells_per_dim).violation_rate
