"""Sample-size arithmetic for distribution-free one-sided tolerance limits.

With ``n`` i.i.d. samples, the probability that the sample minimum lies below
at least a fraction ``rate`` of the population is ``1 - rate**n``. Across ``m``
independently sampled regions the joint confidence is ``(1 - rate**n)**m``.
Everything here works in log space so values near 1 keep their precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

DEFAULT_ALPHA = 0.999
DEFAULT_RATE = 0.995
DEFAULT_N = 3500


class DoublingDiverged(RuntimeError):
    pass


def _check(rate: float, n: int) -> None:
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def log_miss_probability(n: int, rate: float) -> float:
    """``log(rate**n)``."""
    _check(rate, n)
    return n * math.log(rate)


def confidence_single(n: int, rate: float) -> float:
    """``1 - rate**n`` via ``-expm1(n log rate)``."""
    return -math.expm1(log_miss_probability(n, rate))


def log_confidence_joint(n: int, rate: float, m: int) -> float:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    # log(1 - rate**n) = log1p(-exp(n log rate))
    return m * math.log1p(-math.exp(log_miss_probability(n, rate)))


def confidence_joint(n: int, rate: float, m: int) -> float:
    return math.exp(log_confidence_joint(n, rate, m))


def required_sample_size(alpha: float, rate: float, m: int) -> int:
    """Smallest ``n`` with ``(1 - rate**n)**m >= alpha``.

    Starts from ``ceil(log(1 - alpha**(1/m)) / log(rate))`` and nudges by one
    in either direction until the direct check agrees, so floating-point
    rounding in the closed form cannot give an off-by-one answer.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    _check(rate, 1)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    # 1 - alpha**(1/m) = -expm1(log(alpha)/m)
    tail = -math.expm1(math.log(alpha) / m)
    n = max(1, math.ceil(math.log(tail) / math.log(rate)))
    log_alpha = math.log(alpha)
    while log_confidence_joint(n, rate, m) < log_alpha:
        n += 1
    while n > 1 and log_confidence_joint(n - 1, rate, m) >= log_alpha:
        n -= 1
    return n


def max_regions(n: int, rate: float, alpha: float) -> int:
    """Largest ``m`` for which ``n`` samples per region still reach ``alpha`` jointly."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    per_region = log_confidence_joint(n, rate, 1)
    if per_region == 0.0:
        return 2**62
    m = int(math.log(alpha) / per_region)
    while m >= 1 and log_confidence_joint(n, rate, m) < math.log(alpha):
        m -= 1
    while log_confidence_joint(n, rate, m + 1) >= math.log(alpha):
        m += 1
    return m


@dataclass(frozen=True)
class ToleranceParams:
    """Joint confidence ``alpha``, per-region safe fraction ``rate``,
    samples per region ``n`` and the region-count bound ``m``."""

    alpha: float = DEFAULT_ALPHA
    rate: float = DEFAULT_RATE
    n: int = DEFAULT_N
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"rate must be in (0, 1), got {self.rate}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")

    @classmethod
    def for_sample_size(cls, alpha=DEFAULT_ALPHA, rate=DEFAULT_RATE, n=DEFAULT_N) -> "ToleranceParams":
        """Fix ``n`` and take the largest region bound it supports."""
        return cls(alpha, rate, n, max(1, max_regions(n, rate, alpha)))

    @classmethod
    def for_region_bound(cls, alpha=DEFAULT_ALPHA, rate=DEFAULT_RATE, m=1) -> "ToleranceParams":
        return cls(alpha, rate, required_sample_size(alpha, rate, m), m)

    @property
    def per_region_confidence(self) -> float:
        return confidence_single(self.n, self.rate)

    @property
    def joint_confidence(self) -> float:
        return confidence_joint(self.n, self.rate, self.m)

    @property
    def consistent(self) -> bool:
        return log_confidence_joint(self.n, self.rate, self.m) >= math.log(self.alpha)


def doubling_m_schedule(
    run: Callable[[int], int],
    alpha: float = DEFAULT_ALPHA,
    rate: float = DEFAULT_RATE,
    max_doublings: int = 30,
) -> ToleranceParams:
    """Estimate the region bound ``m`` by doubling.

    ``run(n)`` performs a full verification with ``n`` samples per region and
    returns ``max(#safe, #unsafe)``. Starting from ``m = 1`` the guess doubles
    until the returned count fits under it.
    """
    m = 1
    for _ in range(max_doublings + 1):
        n = required_sample_size(alpha, rate, m)
        count = run(n)
        if count <= m:
            return ToleranceParams(alpha, rate, n, m)
        m *= 2
    raise DoublingDiverged(
        f"region count still exceeded m after {max_doublings} doublings (last m={m // 2}, count={count})"
    )
