"""Sampling-based iterative refinement of the property domain.

Each candidate box is sampled uniformly, the sampled ``y*`` range decides
safe / unsafe / unknown, and unknown boxes are split with one of five
heuristics until they resolve or hit the depth cap.

Regions are identified by their heap index in the split tree (root 1,
children ``2k`` and ``2k + 1``). The sampling seed of a region depends only on
``(master_seed, heap index)``, so the outcome does not depend on the order in
which regions are processed or on the number of worker threads.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Hyperrectangle, RegionSet, pairwise_disjoint, split, total_volume, volume
from .network import AugmentedNetwork, Network, SafetyProperty, augment
from .tolerance import ToleranceParams


class Classification(str, enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"
    UNKNOWN = "unknown"


class Heuristic(str, enum.Enum):
    H1 = "h1"  # widest side, median of safe samples
    H2 = "h2"  # widest side, mean of safe samples
    H3 = "h3"  # random side, median
    H4 = "h4"  # random side, mean
    H5 = "h5"  # best safe/violation separator

    @classmethod
    def parse(cls, value) -> "Heuristic":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown heuristic {value!r}; choose from h1..h5") from None


class EngineTimeout(RuntimeError):
    pass


class InvariantError(AssertionError):
    pass


def region_seed(master_seed: int, node: int) -> int:
    """64-bit sampling seed of the region at heap index ``node``."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=(int(node),))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_region(region: Hyperrectangle, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = region.as_arrays()
    return lo + (hi - lo) * rng.random((n, region.dim))


@dataclass
class ReachableEstimate:
    """Sampled ``y*`` range over a region, with the samples kept for split heuristics."""

    lo: float
    hi: float
    points: np.ndarray
    values: np.ndarray

    @property
    def safe_mask(self) -> np.ndarray:
        return self.values >= 0.0

    @property
    def safe_points(self) -> np.ndarray:
        return self.points[self.safe_mask]

    @property
    def violation_points(self) -> np.ndarray:
        return self.points[~self.safe_mask]


def compute_reachable_set(
    net: AugmentedNetwork,
    region: Hyperrectangle,
    n: int,
    seed: int | np.random.Generator | None = None,
    points=None,
) -> ReachableEstimate:
    """Estimate ``[min y*, max y*]`` over ``region`` from ``n`` uniform samples.

    ``points`` overrides the sampler with a fixed sample (used for hand-worked
    fixtures); otherwise ``seed`` drives a fresh PCG64 stream.
    """
    if points is None:
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        pts = sample_region(region, n, rng)
    else:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != region.dim or len(pts) == 0:
            raise ValueError("injected points must be a non-empty (n, d) array")
    vals = net.evaluate_batch(pts)
    return ReachableEstimate(float(vals.min()), float(vals.max()), pts, vals)


def classify_region(est: ReachableEstimate) -> Classification:
    if est.lo >= 0.0:
        return Classification.SAFE
    if est.hi < 0.0:
        return Classification.UNSAFE
    return Classification.UNKNOWN


def _h5_split(region: Hyperrectangle, est: ReachableEstimate) -> tuple[int, float]:
    """Split on the dimension that best separates safe from violation samples.

    Each dimension is scored by the lowest size-weighted Gini impurity over
    all cuts between consecutive sorted samples; ties go to the lower
    dimension. If the samples are perfectly separated along the chosen
    dimension, the cut goes through the outermost safe sample (the safe
    maximum when safe points lie below, the safe minimum when above).
    Otherwise the side is halved: cuts placed on a noisy class boundary only
    shave thin slabs off the region and exhaust the split budget.
    """
    safe_mask = est.safe_mask
    n = len(safe_mask)
    ns = int(np.count_nonzero(safe_mask))
    nv = n - ns
    best_dim, best_score = None, np.inf
    for dim in range(est.points.shape[1]):
        order = np.argsort(est.points[:, dim], kind="stable")
        c = est.points[order, dim]
        s = safe_mask[order]
        valid = c[1:] > c[:-1]
        if not np.any(valid):
            continue
        s_left = np.cumsum(s)[:-1].astype(np.float64)
        n_left = np.arange(1, n, dtype=np.float64)
        v_left = n_left - s_left
        # sum over both sides of size * (1 - p_safe^2 - p_viol^2) = 2 * safe * viol / size
        score = 2.0 * (s_left * v_left / n_left + (ns - s_left) * (nv - v_left) / (n - n_left))
        score = float(np.min(np.where(valid, score, np.inf)))
        if score < best_score:
            best_dim, best_score = dim, score
    if best_dim is None:
        raise ValueError("samples do not vary along any dimension")
    coords = est.points[:, best_dim]
    safe_c, viol_c = coords[safe_mask], coords[~safe_mask]
    if safe_c.max() < viol_c.min():
        return best_dim, float(safe_c.max())
    if safe_c.min() > viol_c.max():
        return best_dim, float(safe_c.min())
    return best_dim, 0.5 * (region.lower[best_dim] + region.upper[best_dim])


def choose_split(
    region: Hyperrectangle,
    est: ReachableEstimate,
    heuristic: Heuristic | str,
    beta: float = 0.05,
    rng: np.random.Generator | None = None,
) -> tuple[int, float]:
    """Pick ``(dim, at)`` for splitting an unknown region.

    The split point is clamped to ``[lower + beta*side, upper - beta*side]`` so
    both children keep at least a ``beta`` fraction of the parent.
    """
    heuristic = Heuristic.parse(heuristic)
    if not 0.0 < beta <= 0.5:
        raise ValueError("beta must be in (0, 0.5]")
    sides = np.array(region.sides)
    if np.any(sides <= 0):
        raise ValueError("cannot split a region with a zero-width side")
    safe = est.safe_points

    if heuristic is Heuristic.H5 and len(safe) and len(safe) < len(est.points):
        dim, at = _h5_split(region, est)
    else:
        if heuristic in (Heuristic.H1, Heuristic.H2, Heuristic.H5):
            dim = int(np.argmax(sides))
        else:
            if rng is None:
                raise ValueError(f"{heuristic.name} needs a random stream")
            dim = int(rng.integers(region.dim))
        if len(safe) == 0:
            at = 0.5 * (region.lower[dim] + region.upper[dim])
        elif heuristic in (Heuristic.H1, Heuristic.H3, Heuristic.H5):
            at = float(np.median(safe[:, dim]))
        else:
            at = float(np.mean(safe[:, dim]))

    lo, hi = region.lower[dim], region.upper[dim]
    margin = beta * (hi - lo)
    at = min(max(at, lo + margin), hi - margin)
    return dim, at


@dataclass(frozen=True)
class EngineConfig:
    tolerance: ToleranceParams = field(default_factory=ToleranceParams.for_sample_size)
    heuristic: Heuristic = Heuristic.H5
    max_splits: int = 18
    min_side_eps: float | None = None
    master_seed: int = 0
    beta: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "heuristic", Heuristic.parse(self.heuristic))
        if self.max_splits < 0:
            raise ValueError("max_splits must be >= 0")
        if not 0.0 < self.beta <= 0.5:
            raise ValueError("beta must be in (0, 0.5]")
        if self.min_side_eps is not None and self.min_side_eps <= 0:
            raise ValueError("min_side_eps must be positive")


@dataclass(frozen=True)
class RegionRecord:
    """One leaf of the split tree with enough metadata to replay its samples."""

    kind: str
    box: Hyperrectangle
    depth: int
    seed: int
    node: int
    lo: float
    hi: float


@dataclass
class VerificationOutcome:
    domain: Hyperrectangle
    records: list[RegionRecord]
    params: ToleranceParams
    heuristic: Heuristic
    max_splits: int
    master_seed: int
    wall_time: float = 0.0
    prop: SafetyProperty | None = None
    evaluated_regions: int = 0

    def _set(self, kind: str) -> RegionSet:
        return RegionSet(kind, [r.box for r in self.records if r.kind == kind])

    @property
    def safe(self) -> RegionSet:
        return self._set("safe")

    @property
    def unsafe(self) -> RegionSet:
        return self._set("unsafe")

    @property
    def unknown(self) -> RegionSet:
        return self._set("unknown")

    def _rate(self, kind: str) -> float:
        return total_volume(self._set(kind)) / volume(self.domain)

    @property
    def safe_rate(self) -> float:
        return self._rate("safe")

    @property
    def unsafe_rate(self) -> float:
        return self._rate("unsafe")

    @property
    def unknown_rate(self) -> float:
        return self._rate("unknown")

    @property
    def region_count(self) -> int:
        """``max(#safe, #unsafe)``, the quantity the region bound ``m`` must cover."""
        return max(len(self.safe), len(self.unsafe))

    @property
    def guarantee_holds(self) -> bool:
        return self.region_count <= self.params.m

    def same_result(self, other: "VerificationOutcome") -> bool:
        """Equality ignoring wall time."""
        return (
            self.domain == other.domain
            and self.records == other.records
            and self.params == other.params
            and self.heuristic == other.heuristic
            and self.max_splits == other.max_splits
            and self.master_seed == other.master_seed
        )


def _process(aug: AugmentedNetwork, cfg: EngineConfig, node: tuple[Hyperrectangle, int, int]):
    box, depth, idx = node
    seed = region_seed(cfg.master_seed, idx)
    rng = np.random.default_rng(seed)
    est = compute_reachable_set(aug, box, cfg.tolerance.n, rng)
    kind = classify_region(est)
    if kind is Classification.UNKNOWN:
        if len(est.violation_points) == 0:
            raise InvariantError("unknown region without violation samples")
        too_thin = cfg.min_side_eps is not None and min(box.sides) < cfg.min_side_eps
        if depth < cfg.max_splits and not too_thin:
            dim, at = choose_split(box, est, cfg.heuristic, cfg.beta, rng)
            # a side narrower than a few ulps cannot be cut; the region stays unknown
            if box.lower[dim] < at < box.upper[dim]:
                left, right = split(box, dim, at)
                return None, [(left, depth + 1, 2 * idx), (right, depth + 1, 2 * idx + 1)]
    return RegionRecord(kind.value, box, depth, seed, idx, est.lo, est.hi), []


def run_eprove(
    net: Network,
    prop: SafetyProperty,
    cfg: EngineConfig | None = None,
    threads: int = 1,
    deadline: float | None = None,
) -> VerificationOutcome:
    """Enumerate safe, unsafe and unresolved boxes covering ``prop.domain``.

    ``deadline`` is a ``time.monotonic()`` value after which
    :class:`EngineTimeout` is raised.
    """
    cfg = cfg or EngineConfig()
    if not cfg.tolerance.consistent:
        t = cfg.tolerance
        raise ValueError(
            f"inconsistent tolerance parameters: (1 - {t.rate}^{t.n})^{t.m} = {t.joint_confidence:.6g} < alpha={t.alpha}"
        )
    aug = augment(net, prop)
    start = time.perf_counter()
    records: list[RegionRecord] = []
    evaluated = 0
    root = (prop.domain, 0, 1)

    def check_deadline():
        if deadline is not None and time.monotonic() > deadline:
            raise EngineTimeout("verification exceeded its deadline")

    if threads <= 1:
        stack = [root]
        while stack:
            check_deadline()
            rec, children = _process(aug, cfg, stack.pop())
            evaluated += 1
            if rec is not None:
                records.append(rec)
            stack.extend(reversed(children))
    else:
        frontier = [root]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while frontier:
                check_deadline()
                results = list(pool.map(lambda nd: _process(aug, cfg, nd), frontier))
                evaluated += len(frontier)
                frontier = []
                for rec, children in results:
                    if rec is not None:
                        records.append(rec)
                    frontier.extend(children)

    records.sort(key=lambda r: r.node)
    return VerificationOutcome(
        domain=prop.domain,
        records=records,
        params=cfg.tolerance,
        heuristic=cfg.heuristic,
        max_splits=cfg.max_splits,
        master_seed=cfg.master_seed,
        wall_time=time.perf_counter() - start,
        prop=prop,
        evaluated_regions=evaluated,
    )


def check_outcome(outcome: VerificationOutcome, rtol: float = 1e-9) -> None:
    """Raise :class:`InvariantError` unless the three sets tile the domain."""
    rates = outcome.safe_rate + outcome.unsafe_rate + outcome.unknown_rate
    if abs(rates - 1.0) > rtol:
        raise InvariantError(f"region volumes cover {rates!r} of the domain")
    boxes = [r.box for r in outcome.records]
    if not all(outcome.domain.contains_box(b) for b in boxes):
        raise InvariantError("region outside the property domain")
    if not pairwise_disjoint(boxes):
        raise InvariantError("overlapping regions in outcome")
    if any(r.depth > outcome.max_splits for r in outcome.records):
        raise InvariantError("region deeper than the split cap")


def replay_samples(record: RegionRecord, n: int) -> np.ndarray:
    """Regenerate the exact sample a region was classified with."""
    return sample_region(record.box, n, np.random.default_rng(record.seed))


@dataclass
class AuditReport:
    entries: list[tuple[RegionRecord, float]]
    threshold: float

    @property
    def exceed_count(self) -> int:
        return sum(1 for _, f in self.entries if f > self.threshold)

    @property
    def max_fraction(self) -> float:
        return max((f for _, f in self.entries), default=0.0)


def audit_safe_regions(
    outcome: VerificationOutcome,
    oracle_fn: Callable[[Hyperrectangle], float],
    rate: float | None = None,
) -> AuditReport:
    """Measure the violation fraction of every safe region with ``oracle_fn``."""
    rate = outcome.params.rate if rate is None else rate
    entries = [(r, float(oracle_fn(r.box))) for r in outcome.records if r.kind == "safe"]
    return AuditReport(entries, 1.0 - rate)
