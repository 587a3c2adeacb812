"""Stopping rules driven by ``(t, B_t, sup, local time)``.

Each rule has two faces: a compact numeric encoding consumed by the
compiled path kernel, and a vectorized ``fire_mask`` used to stop a fully
materialized :class:`~maxmart.paths.PathGrid`.  Both implement the same
grid semantics: the rule is checked at every grid point, including ``t=0``,
with ``>=`` comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from maxmart import _kernel, _rng


@dataclass(frozen=True)
class Encoding:
    kind: int
    params: np.ndarray
    tab_x: np.ndarray
    tab_y: np.ndarray


_EMPTY = np.zeros(1)


class StoppingRule:
    """Base class; subclasses are frozen dataclasses."""

    #: True when the stopping time is bounded independently of the path
    bounded: bool = False

    def encode(self, dt: float) -> Encoding:
        raise NotImplementedError

    def fire_mask(self, t, b, sup, ell, seed: int = 0, path_index: int = 0) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FixedTime(StoppingRule):
    """Stop at deterministic time ``t`` (rounded to the nearest grid step)."""

    t: float

    def __post_init__(self):
        if not self.t >= 0:
            raise ValueError("FixedTime needs t >= 0")

    @property
    def bounded(self):
        return math.isfinite(self.t)

    def n_steps(self, dt: float) -> float:
        return math.inf if math.isinf(self.t) else float(round(self.t / dt))

    def encode(self, dt):
        return Encoding(_kernel.FIXED, np.array([self.n_steps(dt)]), _EMPTY, _EMPTY)

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        k = np.arange(np.size(b))
        dt = t[1] - t[0] if np.size(t) > 1 else 1.0
        return k >= self.n_steps(dt)

    def to_dict(self):
        return {"rule": "fixed", "t": self.t}


@dataclass(frozen=True)
class HittingLevel(StoppingRule):
    """First time ``B >= x`` (``x >= 0``) or ``B <= x`` (``x < 0``)."""

    x: float

    def encode(self, dt):
        return Encoding(_kernel.HIT, np.array([float(self.x)]), _EMPTY, _EMPTY)

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        b = np.asarray(b)
        return b >= self.x if self.x >= 0 else b <= self.x

    def to_dict(self):
        return {"rule": "hit", "x": self.x}


@dataclass(frozen=True)
class FirstExit(StoppingRule):
    """First exit from the open interval ``(a, b)``, ``a < 0 < b``."""

    a: float
    b: float
    bounded = False

    def __post_init__(self):
        if not self.a < 0 < self.b:
            raise ValueError("FirstExit needs a < 0 < b")

    def encode(self, dt):
        return Encoding(_kernel.EXIT, np.array([float(self.a), float(self.b)]), _EMPTY, _EMPTY)

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        b = np.asarray(b)
        return (b <= self.a) | (b >= self.b)

    def to_dict(self):
        return {"rule": "exit", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class AzemaYor(StoppingRule):
    """Stop as soon as ``sup >= Psi(B)`` for a step barycentre table.

    ``atoms`` are the target atoms and ``psi`` the barycentre at each atom
    (``psi[0] = 0``). The barycentre is constant equal to ``psi[i]`` on
    ``(atoms[i-1], atoms[i]]`` and equals the identity beyond the last atom,
    so the rule fires when ``B <= atoms[j]`` with ``j`` the last index with
    ``psi[j] <= sup``, or when ``B`` exceeds the last atom.
    """

    atoms: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)

    def __post_init__(self):
        psi = np.maximum.accumulate(np.asarray(self.psi, float))
        if psi[0] != 0.0 or np.any(np.diff(psi) < 0):
            raise ValueError("barycentre table must start at 0 and be nondecreasing")
        object.__setattr__(self, "atoms", np.asarray(self.atoms, float))
        object.__setattr__(self, "psi", psi)

    def encode(self, dt):
        return Encoding(_kernel.AZEMA_YOR, np.zeros(1), self.atoms, self.psi)

    def lower_barrier(self, sup):
        j = np.searchsorted(self.psi, sup, side="right") - 1
        return self.atoms[j]

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        b = np.asarray(b)
        return (b <= self.lower_barrier(np.asarray(sup))) | (b > self.atoms[-1])

    def to_dict(self):
        return {"rule": "azema_yor", "n_atoms": int(self.atoms.size)}


@dataclass(frozen=True)
class ValloisObloj(StoppingRule):
    """Stop as soon as ``|B| >= phi(ell)`` for a step function ``phi``.

    ``phi`` equals ``levels[i]`` on ``[breaks[i], breaks[i+1])`` with
    ``breaks[0] = 0``; the last level holds forever.
    """

    breaks: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)

    def __post_init__(self):
        br = np.asarray(self.breaks, float)
        lv = np.asarray(self.levels, float)
        if br.size != lv.size or br[0] != 0.0 or np.any(np.diff(br) <= 0):
            raise ValueError("breaks must start at 0 and increase, one per level")
        if np.any(lv < 0) or np.any(np.diff(lv) < 0):
            raise ValueError("levels must be nonnegative and nondecreasing")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "levels", lv)

    def encode(self, dt):
        return Encoding(_kernel.VALLOIS, np.zeros(1), self.breaks, self.levels)

    def phi(self, ell):
        return self.levels[np.searchsorted(self.breaks, ell, side="right") - 1]

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        return np.abs(np.asarray(b)) >= self.phi(np.asarray(ell))

    def to_dict(self):
        return {"rule": "vallois", "breaks": self.breaks.tolist(), "levels": self.levels.tolist()}


@dataclass(frozen=True)
class RandomizedAbsHitting(StoppingRule):
    """Independent coin picks a level ``levels[i]`` w.p. ``probs[i]``; stop when ``|B|`` hits it.

    The coin is drawn from the auxiliary RNG stream of the path, so it is
    independent of the increments and reproducible.
    """

    levels: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        lv = np.asarray(self.levels, float)
        pr = np.asarray(self.probs, float)
        if lv.size != pr.size or np.any(pr < 0) or abs(pr.sum() - 1) > 1e-12 or np.any(lv <= 0):
            raise ValueError("need positive levels and a probability vector")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "probs", pr)

    @classmethod
    def from_measure(cls, m) -> "RandomizedAbsHitting":
        return cls(m.x, m.w)

    def encode(self, dt):
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return Encoding(_kernel.RANDOM_ABS_HIT, np.zeros(1), cum, self.levels)

    def level(self, seed: int, path_index: int) -> float:
        u = _rng.aux_uniform(np.uint64(seed), np.uint64(path_index), np.uint64(0))
        cum = self.encode(1.0).tab_x
        idx = 0
        while idx + 1 < cum.size and u >= cum[idx]:
            idx += 1
        return float(self.levels[idx])

    def fire_mask(self, t, b, sup, ell, seed=0, path_index=0):
        return np.abs(np.asarray(b)) >= self.level(seed, path_index)

    def to_dict(self):
        return {"rule": "random_abs_hit", "levels": self.levels.tolist(), "probs": self.probs.tolist()}
