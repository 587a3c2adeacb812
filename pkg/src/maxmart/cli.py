"""Command-line entry point: ``maxmart <subcommand> [flags]``.

Every subcommand prints a JSON summary and, with ``--out``, writes the
summary (``.json``) and its table (``.csv``).  Exit status is 0 when the
experiment's check passes, 2 when it ran but the check failed and 1 on
usage errors.  Output is byte-identical across reruns with the same flags
and seed, except for ``wall_time`` fields.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats as sps

EXIT_PASS, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- argument helpers -----------------------------------------------------------
def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def parse_fn(text: str):
    """Parse a function spec.

    ``const:c``, ``linear:slope[,intercept]``, ``power:k[,scale]``,
    ``exp[:rate]`` (the density ``rate e^{-rate u}``), ``halfnormal``,
    ``indicator:a[,b]`` (``[a, b)``), ``indicator_open:a[,b]`` (``(a, b]``).
    """
    from maxmart.piecewise import PiecewiseFn

    name, _, arg = text.partition(":")
    vals = _floats(arg) if arg else []
    try:
        if name == "const":
            return PiecewiseFn.constant(vals[0])
        if name == "linear":
            return PiecewiseFn.linear(vals[0], vals[1] if len(vals) > 1 else 0.0)
        if name == "power":
            return PiecewiseFn.power(int(vals[0]), vals[1] if len(vals) > 1 else 1.0)
        if name == "exp":
            return PiecewiseFn.exponential(vals[0] if vals else 1.0)
        if name == "halfnormal":
            return PiecewiseFn.half_normal_density()
        if name in ("indicator", "indicator_open"):
            hi = vals[1] if len(vals) > 1 else math.inf
            return PiecewiseFn.indicator(vals[0], hi, "left" if name == "indicator" else "right")
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad function spec {text!r}: {exc}") from exc
    raise UsageError(f"unknown function spec {text!r}")


def _load_measure(path: str):
    from maxmart.measures import AtomicMeasure

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        if path.endswith(".csv"):
            return AtomicMeasure.from_csv(text)
        return AtomicMeasure.from_json(text)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid measure file {path}: {exc}") from exc


def _sim_args(p: argparse.ArgumentParser, dt=1e-3, horizon=10.0, paths=100_000):
    p.add_argument("--dt", type=float, default=dt)
    p.add_argument("--horizon", type=float, default=horizon)
    p.add_argument("--paths", type=int, default=paths)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=None, help="downcrossing width")
    p.add_argument("--local-time", choices=("tanaka", "downcrossing"), default="tanaka")
    p.add_argument("--bridge", action="store_true", help="sample exact bridge extremes")


def _config(a, **over):
    from maxmart.paths import SimConfig

    kw = dict(dt=a.dt, horizon=a.horizon, n_paths=a.paths, seed=a.seed,
              local_time_epsilon=a.epsilon, local_time=a.local_time, bridge=a.bridge)
    kw.update(over)
    try:
        return SimConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, Fraction):
        return {"fraction": f"{obj.numerator}/{obj.denominator}", "value": float(obj)}
    return obj


def _emit(a, summary: dict, table: str | None, passed: bool) -> int:
    summary = dict(summary)
    summary["passed"] = bool(passed)
    summary.setdefault("seed", getattr(a, "seed", None))
    text = json.dumps(_jsonable(summary), indent=1, sort_keys=True)
    print(text)
    if a.out:
        out = Path(a.out)
        if out.suffix == ".json":
            json_path, csv_path = out, out.with_suffix(".csv")
        elif out.suffix == ".csv":
            json_path, csv_path = out.with_suffix(".json"), out
        else:
            out.mkdir(parents=True, exist_ok=True)
            json_path, csv_path = out / "summary.json", out / "table.csv"
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(text + "\n")
        if table is not None:
            csv_path.write_text(table)
    return EXIT_PASS if passed else EXIT_FAIL


# -- subcommands ------------------------------------------------------------------
def cmd_embed(a) -> int:
    from maxmart import embeddings as emb
    from maxmart.paths import simulate

    target = _load_measure(a.target)
    try:
        if a.method == "ay":
            rule, which = emb.azema_yor_rule(target), "B"
        else:
            rule, which = emb.vallois_rule(target, a.atom_rule), "abs"
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    horizon = a.horizon if a.horizon is not None else emb.default_horizon(target)
    cfg = _config(a, horizon=horizon)
    rep = emb.run_embedding(rule, target, which, cfg)
    summary = rep.to_dict()
    summary["method"] = a.method
    summary["config"] = cfg.to_dict()
    passed = rep.passed and (a.ks_tol is None or rep.ks <= a.ks_tol)
    table = None
    if a.dump_paths:
        rows = []
        for i in range(min(a.dump_paths, 100, cfg.n_paths)):
            pg = simulate(cfg, i, rule)
            rows += [(i, *r) for r in pg.to_csv_rows()]
        table = _csv_text(["path", "step", "t", "B", "sup", "ell"], rows)
    else:
        law = rep.law_B if which == "B" else None
        table = (law or emb.empirical_measure(np.abs(rep.batch.B[rep.batch.stopped]),
                                              emb.REPORT_ATOMS)).to_csv()
    return _emit(a, summary, table, passed)


def cmd_suplaw(a) -> int:
    from maxmart.bounds import sup_law_from_phi

    phi = parse_fn(a.phi)
    rows = []
    try:
        for y in _floats(a.y):
            rows.append((y, sup_law_from_phi(phi, y)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    vals = [r[1] for r in rows]
    mono = all(b <= c + 1e-15 for c, b in zip(vals[:-1], vals[1:])) if sorted(
        r[0] for r in rows) == [r[0] for r in rows] else True
    return _emit(a, {"phi": a.phi, "tail": rows, "nonincreasing": mono},
                 _csv_text(["y", "tail"], rows), mono)


def lt_law_tail(rule, x):
    """``exp(-int_0^x ds / phi(s))`` for the step function of a Vallois rule."""
    x = np.atleast_1d(np.asarray(x, float))
    br = np.append(rule.breaks, np.inf)
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        lo = np.minimum(br[:-1], xi)
        hi = np.minimum(br[1:], xi)
        out[i] = math.exp(-float(np.sum((hi - lo) / rule.levels)))
    return out


def cmd_ltlaw(a) -> int:
    from maxmart import embeddings as emb
    from maxmart.stats import mean_report

    target = _load_measure(a.target)
    try:
        rule = emb.vallois_rule(target, a.atom_rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    horizon = a.horizon if a.horizon is not None else emb.default_horizon(target)
    cfg = _config(a, horizon=horizon)
    rep = emb.run_embedding(rule, target, "abs", cfg)
    ell = rep.batch.ell[rep.batch.stopped]
    ks = sps.kstest(ell, lambda x: 1.0 - lt_law_tail(rule, x))
    mean_l = mean_report(ell, cfg.seed)
    ok_mean = mean_l.within(target.mean())
    grid = np.linspace(0, float(np.quantile(ell, 0.99)), 21)
    emp = np.array([(ell >= g).mean() for g in grid])
    table = _csv_text(["x", "tail_closed_form", "tail_empirical"],
                      zip(grid, lt_law_tail(rule, grid), emp))
    summary = {"ks_statistic": float(ks.statistic), "ks_pvalue": float(ks.pvalue),
               "mean_L": mean_l.to_dict(), "target_mean": target.mean(),
               "embedding_ks": rep.ks, "unstopped_fraction": rep.unstopped_fraction,
               "config": cfg.to_dict()}
    return _emit(a, summary, table, ks.pvalue >= 0.01 and ok_mean and rep.passed)


def cmd_doob(a) -> int:
    from maxmart.martingales import doob_lp_check, doob_maximal_check

    rows = []
    ok = True
    try:
        for n in range(1, a.n + 1) if a.all_n else [a.n]:
            for lam in _floats(a.lam) if a.lam else []:
                lhs, rhs, holds = doob_maximal_check(n, lam)
                rows.append((n, lam, float(lhs), float(rhs), holds))
                ok &= holds
            for p in _floats(a.p) if a.p else []:
                lhs, rhs, _, inter = doob_lp_check(n, p)
                holds = bool(lhs <= rhs) and inter
                rows.append((n, p, float(lhs), float(rhs), holds))
                ok &= holds
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not rows:
        raise UsageError("give --p and/or --lambda")
    table = _csv_text(["n", "p_or_lambda", "lhs", "rhs", "holds"], rows)
    sys.stderr.write(table)
    return _emit(a, {"rows": rows}, table, ok)


def cmd_balayage(a) -> int:
    from maxmart.martingales import exhaustive_suite

    res = exhaustive_suite(a.n)
    sm = {k: {"holds": v[0], "min_margin": v[1]} for k, v in res["supermartingale"].items()}
    passed = (res["balayage_max"] <= 1e-12 and all(v[0] for v in res["supermartingale"].values())
              and res["doob_maximal"] and res["doob_lp"])
    rows = [(k, v["holds"], float(v["min_margin"])) for k, v in sm.items()]
    summary = {"n_max": a.n, "balayage_max_discrepancy": res["balayage_max"],
               "supermartingale": sm, "doob_maximal": res["doob_maximal"], "doob_lp": res["doob_lp"]}
    return _emit(a, summary, _csv_text(["f", "holds", "min_margin"], rows), passed)


def cmd_bounds(a) -> int:
    from maxmart import bounds as bd
    from maxmart import embeddings as emb
    from maxmart.rules import FirstExit, FixedTime, RandomizedAbsHitting

    if a.mode == "sup":
        mu = _load_measure(a.target)
        rule = emb.azema_yor_rule(mu) if a.rule == "ay" else FirstExit(mu.x[0], mu.x[-1])
        rep = bd.verify_sup_bound(rule, mu, _floats(a.lambdas), _config(a))
        return _emit(a, rep.to_dict(), rep.to_csv(), rep.passed)
    if a.mode == "expect":
        rule = FixedTime(a.t) if a.rule == "fixed" else FirstExit(-a.level, a.level)
        cfg = _config(a, horizon=max(a.horizon, a.t))
        res = bd.expectation_bounds_check(rule, cfg)
        holds = res.holds()
        rows = [("sup", res.e_sup.estimate, res.rhs[0], res.e_sup.stderr, holds["sup"]),
                ("abs_sup", res.e_abs_sup.estimate, res.rhs[1], res.e_abs_sup.stderr, holds["abs_sup"]),
                ("range", res.e_range.estimate, res.rhs[2], res.e_range.stderr, holds["range"]),
                ("identity", res.identity.estimate, 0.0, res.identity.stderr, holds["identity"])]
        table = _csv_text(["point", "empirical", "bound", "stderr", "holds"], rows)
        return _emit(a, res.to_dict(), table, all(holds.values()))
    if a.mode == "ltime":
        m = _load_measure(a.target)
        rep = bd.local_time_bound_check(m, RandomizedAbsHitting.from_measure(m),
                                        _floats(a.p_grid), _config(a))
        ex = rep.extra
        means_ok = all(abs(ex[k]["estimate"] - ex["target_mean"]) <= 3 * ex[k]["stderr"]
                       for k in ("mean_L_alt", "mean_L_vallois"))
        return _emit(a, rep.to_dict(), rep.to_csv(), rep.passed and means_ok)
    if a.mode == "rogers":
        from maxmart.paths import simulate_batch

        if a.target:
            mu = _load_measure(a.target)
            rule = emb.azema_yor_rule(mu)
        else:
            rule = FirstExit(-1.0, 1.0)
        batch = simulate_batch(_config(a), rule)
        ok = batch.stopped
        rel, tab = bd.rogers_condition_check(batch.sup[ok], batch.sup[ok] - batch.B[ok], a.bins)
        rows = zip(tab["edges"][:-1], tab["lhs"], tab["rhs"], tab["mass"], tab["used"])
        table = _csv_text(["bin_left", "lhs", "rhs", "mass", "used"], rows)
        summary = {"max_relative_discrepancy": rel, "tolerance": a.tol, "n": int(ok.sum()),
                   "unstopped_fraction": batch.unstopped_fraction}
        return _emit(a, summary, table, rel <= a.tol)
    if a.mode == "laplace":
        f = parse_fn(a.f)
        res = bd.hitting_laplace_check(f, a.x, _config(a))
        rows = [(a.x, res.rhs, res.lhs, res.stderr, not res.holds())]
        return _emit(a, res.to_dict(), _csv_text(["point", "bound", "empirical", "stderr", "flag"], rows),
                     res.holds())
    raise UsageError(f"unknown bounds mode {a.mode!r}")


def parse_density(text: str):
    """Density spec for ``penalize``: ``exp[:rate]``, ``indicator:a`` (uniform on ``[0, a]``), ``halfnormal``."""
    from maxmart.piecewise import PiecewiseFn

    name, _, arg = text.partition(":")
    if name == "indicator":
        a = _floats(arg)[0] if arg else 1.0
        if not a > 0:
            raise UsageError("indicator density needs a > 0")
        return PiecewiseFn.step([0.0, a], [1.0 / a, 0.0])
    if name in ("exp", "halfnormal"):
        return parse_fn(text)
    raise UsageError(f"unknown density {text!r}; use exp[:rate], indicator:a or halfnormal")


def _parse_event(text: str):
    kind, _, arg = text.partition(":")
    if kind == "all":
        return ("all", 0.0)
    if kind not in ("endpoint", "sup") or not arg:
        raise UsageError(f"bad event {text!r}; use endpoint:a, sup:a or all")
    return (kind, float(arg))


def cmd_penalize(a) -> int:
    from maxmart import penalization as pen

    try:
        spec = pen.PenalizationSpec(parse_density(a.f), _parse_event(a.event), a.s, tuple(_floats(a.t)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cfg = _config(a, horizon=max(spec.t_list))
    batch = pen._batch(spec, cfg, spec.t_list)
    rows = pen.convergence_experiment(spec, cfg, batch)
    lim = pen.limit_probability(spec, cfg, batch)
    dens = {str(t): pen.denominator(spec, t, cfg, batch).to_dict() for t in spec.t_list}
    table = _csv_text(["t", "penalized", "limit", "gap", "stderr"],
                      [(r.t, r.penalized, r.limit, r.gap, r.stderr) for r in rows])
    summary = {"limit": lim.to_dict(), "rows": [r.to_dict() for r in rows], "denominators": dens,
               "config": cfg.to_dict()}
    return _emit(a, summary, table, pen.convergence_ok(rows))


def density_check(n_paths: int, dt: float, seed: int, n_bins: int = 40, t: float = 1.0,
                  bridge: bool = True):
    """Binned total variation between simulated ``(B_t, sup_t)`` and the closed form."""
    from maxmart.paths import SimConfig, joint_cdf_box, simulate_batch

    cfg = SimConfig(dt=dt, horizon=t, n_paths=n_paths, seed=seed, bridge=bridge)
    batch = simulate_batch(cfg)
    s = math.sqrt(t)
    xe = np.linspace(-4 * s, 4 * s, n_bins + 1)
    ye = np.linspace(0.0, 4 * s, n_bins // 2 + 1)
    # outer bins reach far enough that the excluded mass is below 1e-30
    xe = np.concatenate([[-12 * s], xe, [12 * s]])
    ye = np.concatenate([ye, [12 * s]])
    hist, _, _ = np.histogram2d(batch.B, batch.sup, bins=[xe, ye])
    hist /= n_paths
    X0, Y0 = np.meshgrid(xe[:-1], ye[:-1], indexing="ij")
    X1, Y1 = np.meshgrid(xe[1:], ye[1:], indexing="ij")
    exact = joint_cdf_box(t, X0, X1, Y0, Y1)
    tv = 0.5 * float(np.abs(hist - exact).sum())
    return tv, batch


def density_normalization(t: float = 1.0) -> float:
    """Adaptive quadrature of the joint density over its support ``{y >= 0, x <= y}``."""
    from scipy.integrate import dblquad

    from maxmart.paths import joint_density

    s = math.sqrt(t)
    val, _ = dblquad(lambda x, y: float(joint_density(t, x, y)), 0.0, 12 * s,
                     lambda y: y - 24 * s, lambda y: y)
    return float(val)


def cmd_density(a) -> int:
    tv, _ = density_check(a.paths, a.dt, a.seed, a.bins, a.t, a.bridge)
    norm = density_normalization(a.t)
    summary = {"tv": tv, "tv_tolerance": a.tol, "normalization": norm, "n": a.paths}
    table = _csv_text(["quantity", "value"], [("tv", tv), ("normalization", norm)])
    return _emit(a, summary, table, tv <= a.tol and abs(norm - 1) <= 1e-3)


def cmd_drift(a) -> int:
    from maxmart.martingales import martingale_drift_test

    fn = parse_fn(a.f)
    cfg = _config(a, horizon=a.t2)
    rep = martingale_drift_test(fn, cfg, a.t1, a.t2, kind=a.process)
    table = _csv_text(["estimate", "stderr", "n", "seed"], [(rep.estimate, rep.stderr, rep.n, rep.seed)])
    return _emit(a, {"drift": rep.to_dict(), "f": a.f, "process": a.process}, table, rep.within(0.0))


# -- parser -----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="maxmart", description="Max-martingale and Skorokhod-embedding experiments.")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: MAXMART_THREADS or all cores)")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def add(name, fn, **kw):
        sp = sub.add_parser(name, **kw)
        sp.add_argument("--out", default=None, help="output .json/.csv path or directory")
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        sp.set_defaults(func=fn)
        return sp

    sp = add("embed", cmd_embed, help="run an embedding and compare with its target")
    sp.add_argument("--target", required=True)
    sp.add_argument("--method", choices=("ay", "vallois"), required=True)
    sp.add_argument("--atom-rule", choices=("log", "sum"), default="log")
    sp.add_argument("--ks-tol", type=float, default=None)
    sp.add_argument("--dump-paths", type=int, default=0)
    _sim_args(sp, horizon=None)

    sp = add("suplaw", cmd_suplaw, help="closed-form supremum tail from phi")
    sp.add_argument("--phi", required=True)
    sp.add_argument("--y", required=True)

    sp = add("ltlaw", cmd_ltlaw, help="local time law of the Vallois embedding")
    sp.add_argument("--target", required=True)
    sp.add_argument("--atom-rule", choices=("log", "sum"), default="log")
    _sim_args(sp, dt=1e-4, horizon=None)

    sp = add("doob-enum", cmd_doob, help="exact Doob inequalities on |SRW|")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", default=None)
    sp.add_argument("--lambda", dest="lam", default=None)
    sp.add_argument("--all-n", action="store_true", help="every length 1..n")

    sp = add("balayage-check", cmd_balayage, help="exhaustive discrete balayage suite")
    sp.add_argument("--n", type=int, default=12)

    sp = add("bounds", cmd_bounds, help="bounds: sup, expect, ltime, rogers, laplace")
    sp.add_argument("mode", choices=("sup", "expect", "ltime", "rogers", "laplace"))
    sp.add_argument("--target", default=None)
    sp.add_argument("--rule", default="ay", help="sup: ay|exit; expect: fixed|exit")
    sp.add_argument("--lambdas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--level", type=float, default=1.0)
    sp.add_argument("--p-grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    sp.add_argument("--bins", type=int, default=50)
    sp.add_argument("--tol", type=float, default=0.1)
    sp.add_argument("--f", default="const:1")
    sp.add_argument("--x", type=float, default=1.0)
    _sim_args(sp, horizon=20.0)

    sp = add("penalize", cmd_penalize, help="penalization convergence experiment")
    sp.add_argument("--f", default="exp")
    sp.add_argument("--event", default="endpoint:0")
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--t", default="4,16,64")
    _sim_args(sp, dt=1e-2)

    sp = add("density-check", cmd_density, help="(B_t, sup_t) histogram vs closed form")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--bins", type=int, default=40)
    sp.add_argument("--tol", type=float, default=0.05)
    _sim_args(sp, dt=1e-2, horizon=1.0, paths=1_000_000)

    sp = add("mart-drift", cmd_drift, help="martingale drift between two times")
    sp.add_argument("--f", required=True)
    sp.add_argument("--process", choices=("max", "local_time", "signed_local_time"), default="max")
    sp.add_argument("--t1", type=float, default=0.5)
    sp.add_argument("--t2", type=float, default=1.0)
    _sim_args(sp)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
        if args.cmd is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        from maxmart.paths import set_threads

        set_threads(args.threads)
        t0 = time.perf_counter()
        code = args.func(args)
        sys.stderr.write(f"[maxmart] {args.cmd} finished in {time.perf_counter() - t0:.1f}s\n")
        return code
    except UsageError as exc:
        sys.stderr.write(f"maxmart: error: {exc}\n")
        return EXIT_USAGE
    except RuntimeError as exc:  # the experiment ran but produced nothing to check
        sys.stderr.write(f"maxmart: check failed: {exc}\n")
        return EXIT_FAIL
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
