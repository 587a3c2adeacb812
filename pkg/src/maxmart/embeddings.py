"""Skorokhod embeddings: Azema-Yor for ``B_T`` and the Vallois local-time rule for ``|B_T|``."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from maxmart.measures import AtomicMeasure, empirical_measure
from maxmart.paths import PathBatch, SimConfig, simulate_batch
from maxmart.rules import AzemaYor, StoppingRule, ValloisObloj
from maxmart.stats import StatReport, ks_vs_atomic, mean_report

UNSTOPPED_FLAG = 0.01
REPORT_ATOMS = 200


def azema_yor_rule(mu: AtomicMeasure) -> AzemaYor:
    """Stop when the running maximum reaches the barycentre of the current position."""
    if not mu.is_centered():
        raise ValueError(f"target is not centered (mean={mu.mean():.3e})")
    return AzemaYor(mu.x, mu.psi_at_atoms)


def vallois_rule(m: AtomicMeasure, atom_rule: str = "log") -> ValloisObloj:
    """Stop when ``|B|`` reaches ``phi_m(ell)``, the right inverse of the dual function.

    ``atom_rule="log"`` (default) uses the atomic form of the dual
    Hardy-Littlewood increments, which embeds atomic targets exactly; see
    :meth:`AtomicMeasure.dual_hl_steps`.
    """
    if m.x[0] <= 0:
        raise ValueError("target must not charge (-inf, 0]")
    breaks = np.concatenate([[0.0], m.dual_hl_steps(atom_rule)])
    return ValloisObloj(breaks, m.x.copy())


def default_horizon(target: AtomicMeasure, factor: float = 50.0) -> float:
    """``factor`` times the second moment of the target (at least 1)."""
    return max(1.0, factor * target.second_moment())


@dataclass
class EmbeddingReport:
    """Stopped laws of one embedding run, compared to the target."""

    which: str
    n_paths: int
    seed: int
    unstopped_fraction: float
    ks: float
    ks_critical_1pct: float
    law_B: AtomicMeasure
    law_sup: AtomicMeasure
    law_ell: AtomicMeasure
    mean_B: StatReport
    mean_abs_B: StatReport
    mean_ell: StatReport
    mean_T: StatReport
    wall_time: float
    flags: list = field(default_factory=list)
    batch: PathBatch | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "unstopped_fraction": self.unstopped_fraction,
            "ks": self.ks,
            "ks_critical_1pct": self.ks_critical_1pct,
            "law_B": self.law_B.to_pairs(),
            "law_sup": self.law_sup.to_pairs(),
            "law_ell": self.law_ell.to_pairs(),
            "mean_B": self.mean_B.to_dict(),
            "mean_abs_B": self.mean_abs_B.to_dict(),
            "mean_ell": self.mean_ell.to_dict(),
            "mean_T": self.mean_T.to_dict(),
            "flags": list(self.flags),
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def run_embedding(rule: StoppingRule, target: AtomicMeasure, which: str,
                  config: SimConfig, report_atoms: int = REPORT_ATOMS) -> EmbeddingReport:
    """Simulate ``config.n_paths`` paths under ``rule`` and compare to ``target``.

    Parameters
    ----------
    which : {"B", "abs"}
        Compare the law of ``B_T`` or of ``|B_T|`` with ``target``.
    """
    if which not in ("B", "abs"):
        raise ValueError("which must be 'B' or 'abs'")
    t0 = time.perf_counter()
    batch = simulate_batch(config, rule)
    ok = batch.stopped
    vals = batch.B[ok] if which == "B" else np.abs(batch.B[ok])
    n_ok = int(ok.sum())
    flags = []
    if batch.unstopped_fraction > UNSTOPPED_FLAG:
        flags.append("unstopped_fraction_above_1pct")
    if n_ok == 0:
        raise RuntimeError("no path stopped before the horizon")
    ks = ks_vs_atomic(vals, target)
    crit = float(sps.kstwobign.isf(0.01) / math.sqrt(n_ok))
    seed = config.seed
    wall = time.perf_counter() - t0
    return EmbeddingReport(
        which=which, n_paths=config.n_paths, seed=seed,
        unstopped_fraction=batch.unstopped_fraction, ks=ks, ks_critical_1pct=crit,
        law_B=empirical_measure(batch.B[ok], report_atoms),
        law_sup=empirical_measure(batch.sup[ok], report_atoms),
        law_ell=empirical_measure(batch.ell[ok], report_atoms),
        mean_B=mean_report(batch.B[ok], seed), mean_abs_B=mean_report(np.abs(batch.B[ok]), seed),
        mean_ell=mean_report(batch.ell[ok], seed), mean_T=mean_report(batch.T[ok], seed),
        wall_time=wall, flags=flags, batch=batch)


def ay_pushforward_ks(batch: PathBatch, mu: AtomicMeasure) -> float:
    """Two-sample KS distance between ``sup_T`` and ``Psi(B_T)`` over stopped paths."""
    ok = batch.stopped
    return float(sps.ks_2samp(batch.sup[ok], mu.barycentre(batch.B[ok])).statistic)


def ui_diagnostic(rule: StoppingRule, config: SimConfig, checkpoints, k_grid=(1.0, 2.0, 4.0)):
    """Proxy for uniform integrability of the stopped process.

    Returns one dict per checkpoint ``t`` with ``E|B_{T^t}|`` and the tail
    masses ``E[|B_{T^t}|; |B_{T^t}| > K]``, plus a flag set when the tail
    mass beyond the largest ``K`` grows by more than three standard errors
    between the first and the last checkpoint.
    """
    checkpoints = np.sort(np.asarray(checkpoints, float))
    batch = simulate_batch(config.replace(horizon=float(checkpoints[-1])), rule,
                           snap_times=checkpoints)
    rows = []
    for t in checkpoints:
        a = np.abs(batch.snap(t)[:, 0])
        row = {"t": float(t), "E_abs_B": mean_report(a, config.seed).to_dict()}
        row["tail"] = {str(k): mean_report(a * (a > k), config.seed).to_dict() for k in k_grid}
        rows.append(row)
    kmax = str(k_grid[-1])
    first, last = rows[0]["tail"][kmax], rows[-1]["tail"][kmax]
    growth = last["estimate"] - first["estimate"]
    se = math.hypot(first["stderr"], last["stderr"])
    flag = bool(growth > 3 * se and growth > 0)
    return {"checkpoints": rows, "tail_growing": flag}
