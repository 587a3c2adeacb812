"""Finite-atom probability measures on the real line.

Everything is a finite sum over sorted atoms. The tail convention is
``mu_bar(x) = mu([x, inf))``: the atom sitting at ``x`` is included, which
makes the tail left-continuous in ``x``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

LEFT = "left_continuous"
RIGHT = "right_continuous"

CENTERING_TOL = 1e-9
_WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Probability measure ``sum_i w_i delta_{x_i}``.

    Parameters
    ----------
    x : array_like
        Strictly increasing atom locations.
    w : array_like
        Strictly positive weights summing to one within ``1e-12``.
    """

    x: np.ndarray
    w: np.ndarray
    # cached running sums; _tail[i] = mu([x_i, inf)), _tail[K] = 0
    _tail: np.ndarray = field(init=False, repr=False, compare=False)
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)
    _upper_moment: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float).reshape(-1)
        if x.size == 0 or x.size != w.size:
            raise ValueError("need the same positive number of locations and weights")
        if not np.all(np.isfinite(x)):
            raise ValueError("atom locations must be finite")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if np.any(np.diff(x) <= 0):
            raise ValueError("atom locations must be strictly increasing")
        x.flags.writeable = False
        w.flags.writeable = False
        tail = np.append(np.cumsum(w[::-1])[::-1], 0.0)
        tail[0] = 1.0
        cdf = np.append(0.0, np.cumsum(w))
        cdf[-1] = 1.0
        upper = np.append(np.cumsum((w * x)[::-1])[::-1], 0.0)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "_tail", tail)
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_upper_moment", upper)

    # -- constructors -------------------------------------------------
    @classmethod
    def dirac(cls, x0: float) -> "AtomicMeasure":
        return cls([x0], [1.0])

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], normalize: bool = False) -> "AtomicMeasure":
        """Build from ``(location, weight)`` pairs; duplicates are merged."""
        arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
        xs, inv = np.unique(arr[:, 0], return_inverse=True)
        ws = np.bincount(inv, weights=arr[:, 1])
        if normalize and abs(ws.sum() - 1.0) > _WEIGHT_TOL:
            ws = ws / ws.sum()
        return cls(xs, ws)

    @classmethod
    def quantize(cls, ppf: Callable[[np.ndarray], np.ndarray], n: int) -> "AtomicMeasure":
        """``n`` equal-weight atoms at the quantile midpoints ``ppf((i + 1/2)/n)``."""
        u = (np.arange(n) + 0.5) / n
        return cls(np.asarray(ppf(u), dtype=float), np.full(n, 1.0 / n))

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "AtomicMeasure":
        """Quantization of the uniform law on ``[a, b]``."""
        return cls.quantize(lambda u: a + (b - a) * u, n)

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash((self.x.tobytes(), self.w.tobytes()))

    # -- basic functionals -------------------------------------------
    @property
    def size(self) -> int:
        return self.x.size

    def tail(self, x):
        """``mu([x, inf))``."""
        return self._tail[np.searchsorted(self.x, x, side="left")]

    def tail_strict(self, x):
        """``mu((x, inf))``."""
        return self._tail[np.searchsorted(self.x, x, side="right")]

    def cdf(self, x):
        """``mu((-inf, x])``."""
        return self._cdf[np.searchsorted(self.x, x, side="right")]

    def mass_at(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.x, x, side="left"), 0, self.size - 1)
        return np.where(self.x[i] == x, self.w[i], 0.0)

    def mean(self) -> float:
        return float(np.dot(self.w, self.x))

    def second_moment(self) -> float:
        return float(np.dot(self.w, self.x ** 2))

    def is_centered(self, tol: float = CENTERING_TOL) -> bool:
        return abs(self.mean()) <= tol

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.w, fn(self.x)))

    # -- generalized inverses ----------------------------------------
    def tail_inverse(self, p, kind: str = LEFT):
        """Generalized inverse of the tail at probability level ``p``.

        ``left_continuous`` gives ``sup{x : mu_bar(x) >= p}``: ``+inf`` at
        ``p = 0`` and the smallest atom at ``p = 1``.
        ``right_continuous`` gives ``sup{x : mu_bar(x) > p}``: ``-inf`` at
        ``p = 1`` and the largest atom at ``p = 0``.
        """
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise ValueError("p must lie in [0, 1]")
        t = self._tail[:-1]
        neg = -t  # nondecreasing
        if kind == LEFT:
            # number of atoms with tail >= p, minus one
            j = np.searchsorted(neg, -p_arr, side="right") - 1
            out = np.where(j >= 0, self.x[np.maximum(j, 0)], -np.inf)
            out = np.where(p_arr == 0, np.inf, out)
        elif kind == RIGHT:
            j = np.searchsorted(neg, -p_arr, side="left") - 1
            out = np.where(j >= 0, self.x[np.maximum(j, 0)], -np.inf)
        else:
            raise ValueError(f"unknown inverse kind {kind!r}")
        return out if out.ndim else float(out)

    # -- barycentre ---------------------------------------------------
    def _require_centered(self):
        if not self.is_centered():
            raise ValueError(f"measure is not centered (mean={self.mean():.3e})")

    @property
    def psi_at_atoms(self) -> np.ndarray:
        """Barycentre evaluated at each atom; the first entry is 0."""
        self._require_centered()
        t = self._tail[:-1]
        out = self._upper_moment[:-1] / t
        out[0] = 0.0
        return out

    def barycentre(self, x):
        """Barycentre ``Psi(x) = E[X | X >= x]`` with the boundary conventions.

        ``Psi = 0`` where the tail equals one and ``Psi(x) = x`` beyond the
        support.
        """
        self._require_centered()
        x_arr = np.asarray(x, dtype=float)
        i = np.searchsorted(self.x, x_arr, side="left")
        psi = np.concatenate([self.psi_at_atoms, [np.nan]])[i]
        out = np.where(i == self.size, x_arr, psi)
        return out if out.ndim else float(out)

    def barycentre_right_inverse(self, lam):
        """``inf{x : Psi(x) > lam}``."""
        psi = np.maximum.accumulate(self.psi_at_atoms)  # guard against rounding wobble
        lam_arr = np.asarray(lam, dtype=float)
        # Psi equals psi[i] on (x[i-1], x[i]] for i >= 1
        i = np.searchsorted(psi[1:], lam_arr, side="right") + 1
        inside = i < self.size
        out = np.where(inside, self.x[np.minimum(i, self.size - 1) - 1],
                       np.maximum(self.x[-1], lam_arr))
        out = np.where(lam_arr < 0, -np.inf, out)
        return out if out.ndim else float(out)

    # -- dual Hardy-Littlewood ----------------------------------------
    def _require_positive(self):
        if self.x[0] <= 0:
            raise ValueError("measure must live on (0, inf); atom at or below 0")

    def dual_hl_steps(self, atom_rule: str = "sum") -> np.ndarray:
        """Values ``S_1 <= ... <= S_{K-1}`` of the dual function on ``[y_i, y_{i+1})``.

        ``atom_rule="sum"`` adds ``y_i w_i / m_bar(y_i)`` per atom.
        ``atom_rule="log"`` adds ``y_i log(m_bar(y_i) / m_bar(y_i+))``, the
        value that makes the local-time embedding exact for atomic targets.
        """
        self._require_positive()
        t = self._tail
        y = self.x[:-1]
        if atom_rule == "sum":
            inc = y * self.w[:-1] / t[:-2]
        elif atom_rule == "log":
            inc = y * np.log(t[:-2] / t[1:-1])
        else:
            raise ValueError(f"unknown atom rule {atom_rule!r}")
        return np.cumsum(inc)

    def dual_hl(self, x, atom_rule: str = "sum"):
        """Dual Hardy-Littlewood function: 0 below the first atom, ``+inf`` from the last."""
        steps = np.concatenate([[0.0], self.dual_hl_steps(atom_rule), [np.inf]])
        x_arr = np.asarray(x, dtype=float)
        out = steps[np.searchsorted(self.x, x_arr, side="right")]
        return out if out.ndim else float(out)

    def dual_hl_right_inverse(self, y, atom_rule: str = "sum"):
        """``phi(y) = inf{x >= 0 : psi(x) > y}``; equals ``y_i`` on ``[S_{i-1}, S_i)``."""
        if np.any(np.asarray(y) < 0):
            raise ValueError("y must be nonnegative")
        breaks = np.concatenate([[0.0], self.dual_hl_steps(atom_rule)])
        y_arr = np.asarray(y, dtype=float)
        j = np.searchsorted(breaks, y_arr, side="right") - 1
        out = self.x[j]
        return out if out.ndim else float(out)

    # -- order comparisons --------------------------------------------
    def excess_wealth(self, p):
        """``E[(X - q)^+]`` at ``q`` the left-continuous tail inverse at ``p``."""
        q = np.atleast_1d(self.tail_inverse(p, LEFT))
        out = np.array([0.0 if np.isinf(qi) and qi > 0 else
                        float(np.dot(self.w, np.maximum(self.x - qi, 0.0))) for qi in q])
        return out if np.ndim(p) else float(out[0])

    # -- serialization ------------------------------------------------
    def to_pairs(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.x, self.w)]

    def to_json(self) -> str:
        return json.dumps(self.to_pairs())

    @classmethod
    def from_json(cls, text: str) -> "AtomicMeasure":
        return cls.from_pairs(json.loads(text), normalize=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "w"])
        wr.writerows((repr(float(a)), repr(float(b))) for a, b in zip(self.x, self.w))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AtomicMeasure":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls.from_pairs(((float(r["x"]), float(r["w"])) for r in rows), normalize=True)


# module-level functional API ----------------------------------------------
def tail(mu: AtomicMeasure, x):
    return mu.tail(x)


def mean(mu: AtomicMeasure) -> float:
    return mu.mean()


def tail_inverse(mu: AtomicMeasure, p, kind: str = LEFT):
    return mu.tail_inverse(p, kind)


def barycentre(mu: AtomicMeasure, x):
    return mu.barycentre(x)


def barycentre_right_inverse(mu: AtomicMeasure, lam):
    return mu.barycentre_right_inverse(lam)


def dual_hl(m: AtomicMeasure, x, atom_rule: str = "sum"):
    return m.dual_hl(x, atom_rule)


def dual_hl_right_inverse(m: AtomicMeasure, y, atom_rule: str = "sum"):
    return m.dual_hl_right_inverse(y, atom_rule)


def excess_wealth_leq(rho1: AtomicMeasure, rho2: AtomicMeasure, p_grid, tol: float = 1e-12):
    """Excess-wealth comparison ``rho1 <= rho2`` on a grid of tail levels.

    Returns
    -------
    holds : bool
    margins : ndarray
        ``W2(p) - W1(p)`` per grid point, ``W(p) = E[(X - q(p))^+]`` with
        ``q`` the left-continuous tail inverse.
    """
    p = np.asarray(p_grid, dtype=float)
    margins = np.atleast_1d(rho2.excess_wealth(p)) - np.atleast_1d(rho1.excess_wealth(p))
    return bool(np.all(margins >= -tol)), margins


def empirical_measure(samples, max_atoms: float = math.inf) -> AtomicMeasure:
    """Empirical law, collapsed to at most ``max_atoms`` atoms.

    With more distinct samples than ``max_atoms`` the sorted sample is cut
    into equal-count blocks and each block is replaced by its mean, so the
    overall mean is preserved exactly (up to rounding).
    """
    s = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if s.size == 0:
        raise ValueError("empirical_measure needs at least one sample")
    n = s.size
    xs, counts = np.unique(s, return_counts=True)
    if xs.size <= max_atoms:
        return AtomicMeasure(xs, counts / n)
    k = int(max_atoms)
    edges = np.linspace(0, n, k + 1).round().astype(np.int64)
    sums = np.add.reduceat(s, edges[:-1])
    sizes = np.diff(edges)
    locs = sums / sizes
    return AtomicMeasure.from_pairs(zip(locs, sizes / n))
