"""Piecewise-linear mapping from picture quality (VMAF) to session utility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

__all__ = ["UtilityCurve", "DEFAULT_CURVE", "marginal_utility"]


@dataclass(frozen=True)
class UtilityCurve:
    """Utility as a function of VMAF.

    Zero below v_min, linear interpolation between the anchor points,
    and flat above v_max.  Anchors must be strictly increasing in both
    coordinates; the first anchor sits at v_min and the last at v_max.
    """

    v_min: float = 50.0
    v_max: float = 90.0
    anchors: Tuple[Tuple[float, float], ...] = ((50.0, 100.0), (70.0, 120.0), (90.0, 130.0))
    _xs: np.ndarray = field(init=False, repr=False, compare=False)
    _ys: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.anchors) < 2:
            raise ValueError("need at least two anchors")
        xs = np.array([a[0] for a in self.anchors], dtype=float)
        ys = np.array([a[1] for a in self.anchors], dtype=float)
        if not (np.all(np.diff(xs) > 0) and np.all(np.diff(ys) > 0)):
            raise ValueError("anchors must be strictly increasing in VMAF and utility")
        if xs[0] != self.v_min or xs[-1] != self.v_max:
            raise ValueError("anchors must start at v_min and end at v_max")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)

    def utility(self, vmaf: float) -> float:
        """Utility for a single (possibly fractional) VMAF value."""
        if vmaf < self.v_min:
            return 0.0
        return float(np.interp(vmaf, self._xs, self._ys))

    def utility_array(self, vmaf: np.ndarray) -> np.ndarray:
        """Vectorised utility; zero below v_min, clamped flat above v_max."""
        v = np.asarray(vmaf, dtype=float)
        out = np.interp(v, self._xs, self._ys)
        return np.where(v < self.v_min, 0.0, out)

    @property
    def max_utility(self) -> float:
        return float(self._ys[-1])


DEFAULT_CURVE = UtilityCurve()


def marginal_utility(
    curve: UtilityCurve,
    v_from: float,
    v_to: float,
    r_from: float,
    r_to: float,
) -> float:
    """Utility gained per extra bit/s when stepping a session from
    (v_from, r_from) to (v_to, r_to).

    v_from = 0 with r_from = 0 is the admission step.  A step with no
    rate increase and positive utility gain is infinitely attractive;
    a step with no utility gain is worthless.  An unreachable step
    (r_to = +inf) is also worthless.
    """
    if r_to < r_from:
        raise ValueError("rate must not decrease along a step")
    du = curve.utility(v_to) - (curve.utility(v_from) if v_from > 0 else 0.0)
    if du <= 0.0:
        return 0.0
    if math.isinf(r_to):
        return 0.0
    dr = r_to - r_from
    if dr == 0.0:
        return math.inf
    return du / dr
