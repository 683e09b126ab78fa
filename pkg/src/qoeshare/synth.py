"""Deterministic synthetic clip corpus with per-second complexity regimes.

Each clip follows a piecewise-constant complexity process: a regime
multiplier is held for a sampled dwell time, then resampled, with a
small per-window jitter on top.  Rates decay exponentially along the
CRF ladder; the window VMAF of an encode is a saturating monotone map
of its rate relative to the window's complexity, so busier windows need
more bits for the same quality.

Randomness comes from numpy's PCG64 generator; clip k of a corpus with
seed s uses SeedSequence(s, spawn_key=(k,)), so clips are independent
and the corpus is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .traces import LadderTrace

__all__ = ["ClipProfile", "GenParams", "default_gen_params", "generate_corpus", "rate_cv"]

DEFAULT_CRF_LADDER: Tuple[int, ...] = (20,) + tuple(range(25, 46))

# Rate halves every CRF_HALF_STEP ladder points.
CRF_HALF_STEP = 5.0


@dataclass(frozen=True)
class ClipProfile:
    """Complexity and quality shape of one synthetic clip.

    base_rate_bps is the rate of the lowest-CRF encode at regime
    multiplier 1 with no jitter.  quality_drop sets the gap to VMAF 100
    at the lowest CRF; quality_exponent shapes how fast quality falls
    along the ladder (and so how steeply demand rises with the target).
    """

    name: str
    base_rate_bps: float
    dwell_windows: Tuple[int, int] = (5, 30)
    multiplier_range: Tuple[float, float] = (0.5, 2.2)
    jitter: float = 0.1
    quality_drop: float = 3.0
    quality_exponent: float = 0.85

    def __post_init__(self) -> None:
        if self.base_rate_bps <= 0:
            raise ValueError("base rate must be positive")
        lo, hi = self.dwell_windows
        if not (1 <= lo <= hi):
            raise ValueError("bad dwell range")
        mlo, mhi = self.multiplier_range
        if not (0 < mlo <= mhi):
            raise ValueError("bad multiplier range")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        if self.quality_drop <= 0 or self.quality_exponent <= 0:
            raise ValueError("quality parameters must be positive")


@dataclass(frozen=True)
class GenParams:
    """Full recipe for a synthetic corpus."""

    profiles: Tuple[ClipProfile, ...]
    windows_per_clip: int = 1320
    crf_values: Tuple[int, ...] = DEFAULT_CRF_LADDER
    seed: int = 7
    window_duration_s: float = 1.0

    def __post_init__(self) -> None:
        if not self.profiles:
            raise ValueError("need at least one clip profile")
        if self.windows_per_clip <= 0:
            raise ValueError("windows_per_clip must be positive")
        if list(self.crf_values) != sorted(set(self.crf_values)):
            raise ValueError("crf_values must be strictly ascending")
        span = (max(self.crf_values) - min(self.crf_values)) / CRF_HALF_STEP
        for p in self.profiles:
            worst_drop = p.quality_drop * (1 + 0.5 * p.jitter) * 2 ** (span * p.quality_exponent)
            if worst_drop >= 100:
                raise ValueError(
                    f"profile {p.name}: quality curve leaves [0, 100] at the ladder bottom"
                )


def default_gen_params(seed: int = 7, windows_per_clip: int = 1320) -> GenParams:
    """Reference corpus: five clips spanning a ~35x complexity spread.

    clip3 carries long dwell times and a wide multiplier range so its
    six sessions see genuinely different average complexity; clip5 is
    heavy enough that an equal split of a 50 Mbps link cannot hold it
    at VMAF 50.
    """
    profiles = (
        ClipProfile("clip1", 1.5e6, (4, 28), (0.55, 2.10), 0.10, 2.5, 0.95),
        ClipProfile("clip2", 4.0e6, (6, 36), (0.50, 2.20), 0.08, 3.0, 0.90),
        ClipProfile("clip3", 9.0e6, (60, 240), (0.35, 2.60), 0.12, 3.0, 0.85),
        ClipProfile("clip4", 2.2e7, (8, 40), (0.50, 2.20), 0.09, 3.2, 0.82),
        ClipProfile("clip5", 5.5e7, (5, 32), (0.55, 2.15), 0.11, 3.5, 0.80),
    )
    return GenParams(profiles=profiles, windows_per_clip=windows_per_clip, seed=seed)


def _regime_series(rng: np.random.Generator, profile: ClipProfile, n: int) -> np.ndarray:
    """Piecewise-constant multiplier: dwell then level, both sampled."""
    lo, hi = profile.dwell_windows
    mlo, mhi = profile.multiplier_range
    out = np.empty(n)
    filled = 0
    while filled < n:
        dwell = int(rng.integers(lo, hi + 1))
        level = math.exp(rng.uniform(math.log(mlo), math.log(mhi)))
        out[filled : filled + dwell] = level
        filled += dwell
    return out


def _generate_clip(profile: ClipProfile, params: GenParams, clip_index: int) -> LadderTrace:
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(params.seed, spawn_key=(clip_index,)))
    )
    n = params.windows_per_clip
    regimes = _regime_series(rng, profile, n)
    jitter = rng.uniform(1.0 - profile.jitter, 1.0 + profile.jitter, n)
    wobble = rng.uniform(1.0 - 0.5 * profile.jitter, 1.0 + 0.5 * profile.jitter, n)

    crfs = np.asarray(params.crf_values, dtype=float)
    decay = 2.0 ** (-(crfs - crfs[0]) / CRF_HALF_STEP)

    scale = profile.base_rate_bps * regimes * jitter
    rates = scale[:, None] * decay[None, :]
    drop = profile.quality_drop * wobble
    vmafs = 100.0 - drop[:, None] * decay[None, :] ** (-profile.quality_exponent)
    return LadderTrace(
        clip_id=profile.name,
        crf_values=params.crf_values,
        rates_bps=rates,
        vmafs=vmafs,
        window_duration_s=params.window_duration_s,
    )


def generate_corpus(params: GenParams) -> List[LadderTrace]:
    """Generate all clips of a corpus (deterministic in params.seed)."""
    return [_generate_clip(p, params, i) for i, p in enumerate(params.profiles)]


def rate_cv(trace: LadderTrace, crf: int) -> float:
    """Coefficient of variation of the per-window rate of one encode."""
    if crf not in trace.crf_values:
        raise ValueError(f"crf {crf} not in ladder")
    col = trace.rates_bps[:, trace.crf_values.index(crf)]
    return float(col.std() / col.mean())
