"""Piecewise functions on ``[0, inf)`` with exact primitives.

A :class:`PiecewiseFn` is a list of breakpoints ``0 = b_0 < b_1 < ... < b_n``
and one closed-form piece per interval (the last one extends to infinity).
Each piece knows its own antiderivative, so ``F(y) = int_0^y f`` is exact up
to floating point and never goes through numerical quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special


class Piece:
    """A closed-form function of ``u`` on one interval."""

    def __call__(self, u):
        raise NotImplementedError

    def integral(self, a, b):
        """``int_a^b`` of the piece (vectorised over ``b``)."""
        raise NotImplementedError

    def tail_integral(self, a):
        """``int_a^inf``; ``inf`` unless the piece decays."""
        return math.inf


@dataclass(frozen=True)
class Poly(Piece):
    """``sum_k coef[k] * u**k`` in the global variable ``u``."""

    coef: tuple

    def __call__(self, u):
        return np.polynomial.polynomial.polyval(u, self.coef)

    def integral(self, a, b):
        anti = np.polynomial.polynomial.polyint(self.coef)
        pv = np.polynomial.polynomial.polyval
        return pv(b, anti) - pv(a, anti)

    def tail_integral(self, a):
        if all(c == 0 for c in self.coef):
            return 0.0
        return math.inf


@dataclass(frozen=True)
class Exp(Piece):
    """``scale * exp(-rate * u)``."""

    scale: float
    rate: float

    def __call__(self, u):
        return self.scale * np.exp(-self.rate * np.asarray(u, float))

    def integral(self, a, b):
        if self.rate == 0:
            return self.scale * (np.asarray(b, float) - a)
        b = np.asarray(b, float)
        return self.scale / self.rate * (np.exp(-self.rate * a) - np.exp(-self.rate * b))

    def tail_integral(self, a):
        if self.rate <= 0:
            return 0.0 if self.scale == 0 else math.inf
        return self.scale / self.rate * math.exp(-self.rate * a)


@dataclass(frozen=True)
class Gauss(Piece):
    """``scale * exp(-u**2 / 2)``."""

    scale: float

    def __call__(self, u):
        return self.scale * np.exp(-0.5 * np.square(np.asarray(u, float)))

    def _anti(self, u):
        return self.scale * math.sqrt(math.pi / 2) * special.erf(np.asarray(u, float) / math.sqrt(2))

    def integral(self, a, b):
        return self._anti(b) - self._anti(a)

    def tail_integral(self, a):
        return self.scale * math.sqrt(math.pi / 2) * special.erfc(a / math.sqrt(2))


@dataclass(frozen=True)
class PiecewiseFn:
    """Piecewise function with exact primitive ``F(y) = int_0^y f``.

    Parameters
    ----------
    breakpoints : increasing sequence starting at 0
    pieces : one :class:`Piece` per breakpoint; piece ``i`` lives on
        ``[b_i, b_{i+1})`` (or ``(b_i, b_{i+1}]`` when ``closed="right"``).
    closed : which end of each interval owns the breakpoint value.
    """

    breakpoints: np.ndarray
    pieces: tuple
    closed: str = "left"
    primitive_at: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size == 0 or bp[0] != 0.0:
            raise ValueError("breakpoints must be a 1-d sequence starting at 0")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != bp.size:
            raise ValueError("need exactly one piece per breakpoint")
        if self.closed not in ("left", "right"):
            raise ValueError("closed must be 'left' or 'right'")
        for a, b, p in zip(bp[:-1], bp[1:], self.pieces):
            if not np.isfinite(p.integral(a, b)):
                raise ValueError("piece is not integrable on its interval")
        prim = np.zeros(bp.size)
        for i in range(1, bp.size):
            prim[i] = prim[i - 1] + float(self.pieces[i - 1].integral(bp[i - 1], bp[i]))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "primitive_at", prim)

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "PiecewiseFn":
        return cls([0.0], (Poly((float(c),)),))

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "PiecewiseFn":
        return cls([0.0], (Poly((float(intercept), float(slope))),))

    @classmethod
    def power(cls, k: int, scale: float = 1.0) -> "PiecewiseFn":
        """``scale * u**k``."""
        coef = [0.0] * k + [float(scale)]
        return cls([0.0], (Poly(tuple(coef)),))

    @classmethod
    def exponential(cls, rate: float = 1.0, scale: float | None = None) -> "PiecewiseFn":
        """``scale * exp(-rate u)``; ``scale`` defaults to ``rate`` (a density)."""
        return cls([0.0], (Exp(rate if scale is None else scale, rate),))

    @classmethod
    def half_normal_density(cls) -> "PiecewiseFn":
        return cls([0.0], (Gauss(math.sqrt(2 / math.pi)),))

    @classmethod
    def indicator(cls, lo: float, hi: float = math.inf, closed: str = "left") -> "PiecewiseFn":
        """Indicator of ``[lo, hi)`` (``closed="left"``) or ``(lo, hi]``."""
        zero, one = Poly((0.0,)), Poly((1.0,))
        if hi <= lo:
            raise ValueError("empty indicator interval")
        if lo <= 0.0:
            bps, pieces = [0.0], [one]
            if closed == "right" and lo == 0.0:
                # (0, hi]: the value at 0 itself is irrelevant for F
                pass
        else:
            bps, pieces = [0.0, lo], [zero, one]
        if math.isfinite(hi):
            bps.append(hi)
            pieces.append(zero)
        return cls(bps, tuple(pieces), closed=closed)

    @classmethod
    def step(cls, breakpoints: Sequence[float], values: Sequence[float],
             closed: str = "left") -> "PiecewiseFn":
        """Piecewise-constant function."""
        return cls(list(breakpoints), tuple(Poly((float(v),)) for v in values), closed=closed)

    # -- evaluation ---------------------------------------------------
    def _piece_index(self, u):
        side = "right" if self.closed == "left" else "left"
        idx = np.searchsorted(self.breakpoints, u, side=side) - 1
        return np.clip(idx, 0, self.breakpoints.size - 1)

    def __call__(self, u):
        u_arr = np.asarray(u, dtype=float)
        idx = self._piece_index(u_arr)
        out = np.empty(u_arr.shape)
        for i, p in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = p(u_arr[sel])
        return out if out.ndim else float(out)

    def primitive(self, y):
        """``F(y) = int_0^y f(s) ds`` for ``y >= 0``."""
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr < 0):
            raise ValueError("primitive is defined on [0, inf)")
        idx = np.clip(np.searchsorted(self.breakpoints, y_arr, side="right") - 1,
                      0, self.breakpoints.size - 1)
        out = np.empty(y_arr.shape)
        for i, p in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = self.primitive_at[i] + p.integral(self.breakpoints[i], y_arr[sel])
        return out if out.ndim else float(out)

    def total_integral(self) -> float:
        """``int_0^inf f``."""
        return float(self.primitive_at[-1] + self.pieces[-1].tail_integral(self.breakpoints[-1]))

    def abs_integral(self, x: float, n: int = 4097) -> float:
        """``int_0^x |f|``; exact when ``f`` keeps a sign on every piece."""
        total = 0.0
        edges = np.append(self.breakpoints[self.breakpoints < x], x)
        for i in range(edges.size - 1):
            a, b = edges[i], edges[i + 1]
            p = self.pieces[i]
            grid = np.linspace(a, b, 17)
            vals = p(grid)
            if np.all(vals >= 0) or np.all(vals <= 0):
                total += abs(float(p.integral(a, b)))
            else:
                g = np.linspace(a, b, n)
                total += float(np.trapezoid(np.abs(p(g)), g))
        return total

    def is_nondecreasing_nonneg(self, upto: float, n: int = 2049) -> bool:
        """Check monotonicity and positivity on ``[0, upto]`` (dense grid + breakpoints)."""
        grid = np.union1d(np.linspace(0.0, max(upto, 0.0), n),
                          self.breakpoints[self.breakpoints <= upto])
        vals = self(grid)
        return bool(np.all(vals >= 0) and np.all(np.diff(vals) >= -1e-12))

    def step_table(self, upto: float, n: int = 4096):
        """Left-closed step approximation on ``[0, upto]`` for the path kernel.

        Exact when every piece is constant and ``closed="left"``.
        """
        if all(isinstance(p, Poly) and len(p.coef) <= 1 for p in self.pieces):
            return self.breakpoints.copy(), np.asarray(self(self.breakpoints), float)
        grid = np.linspace(0.0, upto, n + 1)
        mid = 0.5 * (grid[:-1] + grid[1:])
        return grid[:-1], np.asarray(self(mid), float)
