"""Command line front end.

    sparse-ergodic [global flags] GROUP OP [op flags]
    sparse-ergodic --config run.json

A JSON config may hold {"command": [GROUP, OP], "args": {...}, "seed": s,
"out": dir}; flags given on the command line override it, and the
SPARSE_ERGODIC_SEED environment variable overrides the config seed.  With
--out every run writes report.json, series.csv and manifest.json; without
it the series goes to stdout.  Exit status: 0 pass, 1 a declared threshold
failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import BudgetExceeded, ConditionError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Result:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool | None = None          # None: no threshold declared
    lines: list[str] = field(default_factory=list)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if hasattr(x, "item"):
        return x.item()
    return x


def csv_bytes(res: Result) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.columns)
    for r in res.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def json_bytes(obj) -> bytes:
    return (json.dumps(_plain(obj), sort_keys=True, indent=1) + "\n").encode()


# ops: each takes the parsed namespace and the resolved seed

def _ints(s: str) -> list[int]:
    return [int(x) for x in str(s).replace(",", " ").split()]


def op_blocks_plan(a, seed) -> Result:
    from .blocks import generate_plan
    plan = generate_plan(a.K, rho=a.rho, u1=a.u1, a1=a.a1)
    conds = plan.conditions()
    res = Result(["k", "u", "a"], [[k + 1, u, b] for k, (u, b) in enumerate(zip(plan.u, plan.a))],
                 {"conditions": conds}, all(conds.values()))
    res.lines = [f"{n}: {'ok' if v else 'FAIL'}" for n, v in conds.items()]
    return res


def op_blocks_tempelman(a, seed) -> Result:
    from .blocks import generate_plan, running_max_by_k, tempelman_grid
    rows = tempelman_grid(generate_plan(a.K, rho=a.rho), kmax=a.kmax)
    rm = running_max_by_k(rows)
    return Result(["k", "r", "size", "ratio", "defect", "running_max"],
                  [[r.k, r.r, r.size, r.ratio, r.defect, r.running_max] for r in rows],
                  {"running_max_by_k": rm}, None,
                  [f"running max by k: {[round(float(x), 4) for x in rm]}"])


def op_blocks_diverge(a, seed) -> Result:
    from .blocks import divergence_witness, generate_square_plan
    rep = divergence_witness(generate_square_plan(a.kmax))
    rows = [[k, lf, float(lf), be, float(be), f] for k, lf, be, f in
            zip(rep.k, rep.left_face_average, rep.block_end_average, rep.block_end_formula)]
    ok = all(x > Fraction(1, 2) for x in rep.left_face_average)
    return Result(["k", "left_face", "left_face_float", "block_end", "block_end_float", "block_end_formula"],
                  rows, {"params": rep.params}, ok)


def op_blocks_count_en(a, seed) -> Result:
    from .blocks import unrestricted_divergence_count
    c = unrestricted_divergence_count(None, None, a.n)
    return Result(["n", "count", "ratio"], [[c["n"], c["count"], c["ratio"]]], c, None, [str(c["count"])])


def _speckled_cfg(a, seed):
    from .random_sparse import SpeckledConfig
    return SpeckledConfig(d=a.d, gamma=a.gamma, seed=seed, jmin=a.jmin, jmax=a.jmax)


def _plaid_cfg(a, seed):
    from .random_sparse import PlaidConfig
    return PlaidConfig(d=a.d, alpha=a.alpha, seed=seed, jmin=a.jmin, jmax=a.jmax)


def op_random(a, seed) -> Result:
    from . import random_sparse as R
    kind, op = a.kind, a.rop
    if op == "sample":
        cfg = _speckled_cfg(a, seed) if kind == "speckled" else _plaid_cfg(a, seed)
        j = a.j if a.j is not None else cfg.jmax
        mu, _ = (R.sample_speckled if kind == "speckled" else R.sample_plaid)(cfg, j)
        pts = sorted(mu.support())
        return Result([f"x{i}" for i in range(cfg.d)] + ["value"], [list(p) + [mu[p]] for p in pts],
                      {"j": j, "size": len(pts)})
    if op == "profile":
        if kind == "speckled":
            prof = R.cancellation_profile(_speckled_cfg(a, seed), trials=a.trials)
            rows = [[r.trial, r.seed, r.j, r.at0, r.sup_punctured, r.r_j, r.R_j] for r in prof.rows]
            return Result(["trial", "seed", "j", "at0", "sup_punctured", "r_j", "R_j"], rows,
                          {"slopes": prof.slopes, "expected_slope": prof.expected_slope})
        prof = R.plaid_profile(_plaid_cfg(a, seed), trials=a.trials)
        rows = [[t, j, " ".join(map(str, I)) or "-", v] for (t, j), s in sorted(prof.sups.items()) for I, v in s.items()]
        return Result(["trial", "j", "pattern", "sup"], rows,
                      {"reconstruction_exact": all(prof.reconstruction.values()),
                       "exponents": {" ".join(map(str, I)) or "-": e for I, e in prof.exponents.items()}},
                      all(prof.reconstruction.values()))
    if op == "sweep":
        from .lattice import SparseMeasure
        if kind == "speckled":
            cfg = _speckled_cfg(a, seed)
            fam = [R.sample_speckled(cfg, j)[0] for j in range(cfg.jmin, cfg.jmax + 1)]
        else:
            cfg = _plaid_cfg(a, seed)
            fam = [R.sample_plaid(cfg, j)[0] for j in range(cfg.jmin, cfg.jmax + 1)]
        f = SparseMeasure.delta((0,) * cfg.d)
        lams = [2.0 ** -k for k in range(0, a.levels + 1)]
        w = R.weak11_sweep(fam, f, lams)
        return Result(["lambda", "count", "constant"], [list(x) for x in zip(w.lambdas, w.counts, w.constants)],
                      {"constant": w.constant})
    if op == "enumerate":
        if kind != "speckled":
            raise UsageError("enumerate is defined for the speckled construction")
        seq = R.enumerate_sequence(_speckled_cfg(a, seed), a.count)
        return Result(["n"] + [f"x{i}" for i in range(a.d)], [[i + 1, *p] for i, p in enumerate(seq)])
    raise UsageError(op)


def _arith_params(a):
    from .arith import make_params
    return make_params(a.d, a.q, a.count)


def op_arith(a, seed) -> Result:
    from . import arith as A
    op = a.aop
    if op == "schedule":
        s = A.prime_schedule(a.mode, a.count, m=a.m)
        res = Result(["k", "p"], [[k + 1, p] for k, p in enumerate(s.primes)], {"fallback": s.fallback})
        if s.warning:
            res.lines.append(s.warning)
        return res
    if op == "build":
        P = _arith_params(a)
        k = a.k or P.K
        pts = A.build_arith_set(P, k)
        return Result(["j"] + [f"x{i}" for i in range(a.d)], [[j, *pt] for j, pt in enumerate(pts)],
                      {"primes": P.primes, "shifts": P.shifts})
    if op == "weil":
        r = A.weil_check(a.p, a.m)
        return Result(["p", "m", "max", "bound", "violations", "argmax"],
                      [[r.p, r.m, r.max_nonzero, r.bound, r.violations, r.argmax]],
                      {"max": r.max_nonzero, "bound": r.bound}, r.passed,
                      [f"max {r.max_nonzero!r} bound {r.bound!r} {'pass' if r.passed else 'FAIL'}"])
    if op == "psi":
        reps = [A.smoothing_psi_l1(p) for p in A.primes_between(a.pmin, a.pmax)]
        r = [x.ratio for x in reps]
        d2 = [x.d2_l1 * x.p for x in reps]
        ok = max(r) / min(r) <= 2 and max(d2) / min(d2) <= 3
        return Result(["p", "ratio", "p_d2_l1", "identity_residual"],
                      [[x.p, x.ratio, x.d2_l1 * x.p, x.identity_residual] for x in reps],
                      {"ratio_spread": max(r) / min(r), "d2_spread": max(d2) / min(d2)}, ok)
    if op == "transfer":
        t = A.gamma_transfer(a.p, a.q, a.d, n_freq=a.n_freq, seed=seed)
        ok = t.fourier_max_error <= 1e-9 and t.majorization and t.nu3_l1 <= 3 ** (a.q * a.d) + Fraction(1, 100)
        return Result(["p", "q", "d", "fourier_max_error", "majorization", "nu3_l1"],
                      [[t.p, t.q, t.d, t.fourier_max_error, t.majorization, t.nu3_l1]], {}, ok)
    if op == "osc":
        prof = A.osc_profile(_arith_params(a), grid=a.grid, seed=seed)
        return Result(["N", "supdiff"], [[n, s] for n, s in zip(prof.Ns, prof.sup_diff)],
                      {"telescoping": prof.telescoping, "fmult_sum": prof.fmult_sum,
                       "note": "grid sup is a lower bound of the true sup"},
                      all(s <= f + 1e-9 for s, f in prof.telescoping))
    if op == "product":
        primes = tuple(_ints(a.primes))
        r = A.product_weil_check(primes, a.m)
        rows = [[" ".join(map(str, sorted(k))), r.pattern_max[k], r.pattern_bound[k]] for k in sorted(r.pattern_max, key=sorted)]
        return Result(["pattern", "max", "bound"], rows,
                      {"literal_violations": r.literal_violations}, r.patterns_pass)
    raise UsageError(op)


def op_group(a, seed) -> Result:
    from . import groups as G
    op = a.gop
    model = G.get_model(a.group)
    if op == "ball":
        g = G.word_ball_growth(model, a.N, folner=False)
        rows = [[n, g.sizes[n], g.sizes[n] / n ** g.degree if n else ""] for n in range(len(g.sizes))]
        return Result(["N", "size", "ratio"], rows, {"degree": g.degree}, None, [f"inferred degree {g.degree}"])
    if op == "blocks":
        ells, shifts = G.default_group_blocks(model, a.K)
        rows = G.group_block_sequence(model, ells, shifts)
        return Result(["k", "r", "size", "diff", "ratio"], [[r.k, r.r, r.size, r.diff, r.ratio] for r in rows],
                      {"ells": ells, "shifts": shifts})
    if op == "random":
        rows = []
        for j in range(a.jmin, a.jmax + 1):
            s = G.sample_group_random(model, a.alpha, j, seed)
            rows.append([j, s.r_j, s.R_j, len(s.nu), s.var_sum])
        return Result(["j", "r_j", "R_j", "nu_support", "var_sum"], rows,
                      {"r_growth_constant": G.r_growth_constant([r[1] for r in rows])})
    if op == "ttstar":
        s = G.sample_group_random(model, a.alpha, a.j, seed)
        t = G.tt_star_norm(model, s.nu, a.M)
        return Result(["M", "l1", "l2", "op_upper"], [[t.M, t.l1, t.l2, t.op_upper]], {"var_sum": s.var_sum})
    if op == "gaps":
        if a.source == "cantor":
            seq = [(x,) for x in G.cantor_numbers(a.count)]
        else:
            from .random_sparse import SpeckledConfig, enumerate_sequence
            seq = enumerate_sequence(SpeckledConfig(d=2, gamma=a.gamma, seed=seed), a.count, max_j=16)
        gp = G.gap_profile_and_thin(seq, _ints(a.M_grid), budget=a.budget)
        rows = [[j, M, gp.beta[(j, M)]] for j in range(gp.jmax + 1) for M in gp.M_grid]
        return Result(["j", "M", "beta"], rows, {"schedule": gp.schedule, "ratio": gp.ratio,
                                                   "min_gap_ok": gp.min_gap_ok}, gp.min_gap_ok)
    if op == "banach":
        from .random_sparse import SpeckledConfig, speckled_points
        cfg = SpeckledConfig(d=2, gamma=a.gamma, seed=seed)
        Ns = _ints(a.N_list)
        import numpy as np
        jmax = max(Ns).bit_length() + 2
        pts = np.concatenate([speckled_points(cfg, j) for j in range(jmax + 1)])
        rows = []
        for N in Ns:
            r = G.banach_density_estimate(pts, N, seed=seed)
            rows.append([N, r["ratio"], r["shift"], r["shifts"]])
        return Result(["N", "ratio_lower_bound", "shift", "shifts"], rows,
                      {"note": "sampled shifts: values are lower bounds"})
    raise UsageError(op)


def op_dyn(a, seed) -> Result:
    import numpy as np
    from . import dynamics as Dy
    op = a.dop
    if op == "run":
        act = Dy.ActionModel.torus_rotation()
        f = Dy.Observable.cosine(2)
        if a.sequence == "arith":
            from .arith import arith_points_array, block_ends, make_params
            P = make_params(2, 1, a.blocks)
            pts = arith_points_array(P)
            sched = block_ends(P)
        else:
            pts = Dy.lattice_enumeration(2, a.Nmax)
            sched = sorted({int(round(10 ** (k / 4))) for k in range(0, 4 * len(str(a.Nmax)))} & set(range(1, a.Nmax + 1)))
        tr = Dy.evaluate_average(act, f, (0.1, 0.2), pts, sched)
        return Result(["N", "A_N", "deviation"], [list(r) for r in tr.rows()],
                      {"oscillation": tr.oscillation, "tail_deviation": tr.tail_deviation})
    if op == "maximal":
        from .lattice import SparseMeasure
        radii = _ints(a.radii)
        R = max(radii)
        mw = Dy.maximal_function_window(SparseMeasure.delta((0,) * a.d), Dy.ball_family(a.d, radii),
                                        ((-R,) * a.d, (R,) * a.d))
        lams = [Fraction(1, 2 ** k) for k in range(a.levels + 1)]
        return Result(["lambda", "count"], [[lam, c] for lam, c in mw.distribution(lams)])
    if op == "transfer":
        L = a.L
        F = np.zeros((L, L), dtype=np.int64)
        F[L // 2:L // 2 + 2, L // 2:L // 2 + 2] = 1
        rep = Dy.transference_check(L, Dy.ball_family(2, range(a.R + 1)), F, K=a.K)
        rows = [[r.lam, r.dyn_count, r.group_count, r.bound, r.holds] for r in rep.rows]
        return Result(["lambda", "dyn_count", "group_count", "bound", "holds"], rows,
                      {"edge_factor": rep.edge_factor, "interior_agrees": rep.interior_agrees}, rep.holds)
    raise UsageError(op)


# parser

def _common(p: argparse.ArgumentParser, top: bool) -> None:
    d = None if top else argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=d, help="global seed (overrides config and environment)")
    p.add_argument("--out", default=d, help="output directory for report.json, series.csv, manifest.json")
    p.add_argument("--format", choices=["csv", "json"], default=d, help="stdout format without --out")
    p.add_argument("--jobs", type=int, default=d, help="worker processes for job-level parallelism")
    p.add_argument("--config", default=d, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    P = argparse.ArgumentParser(prog="sparse-ergodic", description="Sparse ergodic averages at desk scale.")
    _common(P, True)
    sub = P.add_subparsers(dest="command")

    def leaf(parent, name, fn, **kw):
        s = parent.add_parser(name, **kw)
        _common(s, False)
        s.set_defaults(fn=fn)
        return s

    b = sub.add_parser("blocks").add_subparsers(dest="op")
    s = leaf(b, "plan", op_blocks_plan)
    s.add_argument("--K", type=int, default=8)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--u1", type=int, default=1)
    s.add_argument("--a1", type=int, default=2)
    s = leaf(b, "tempelman", op_blocks_tempelman)
    s.add_argument("--K", type=int, default=8)
    s.add_argument("--kmax", type=int, default=None)
    s.add_argument("--rho", type=float, default=1.0)
    s = leaf(b, "diverge", op_blocks_diverge)
    s.add_argument("--kmax", type=int, default=5)
    s = leaf(b, "count-en", op_blocks_count_en)
    s.add_argument("--n", type=int, required=True)

    r = sub.add_parser("random").add_subparsers(dest="kind")
    for kind in ("speckled", "plaid"):
        kp = r.add_parser(kind).add_subparsers(dest="rop")
        for op in ("sample", "profile", "sweep", "enumerate"):
            s = leaf(kp, op, op_random)
            s.set_defaults(kind=kind, rop=op)
            s.add_argument("--d", type=int, default=2)
            if kind == "speckled":
                s.add_argument("--gamma", type=float, default=0.8)
            else:
                s.add_argument("--alpha", type=float, default=0.4)
            s.add_argument("--jmin", type=int, default=1)
            s.add_argument("--jmax", type=int, default=6)
            s.add_argument("--j", type=int, default=None)
            s.add_argument("--trials", type=int, default=1)
            s.add_argument("--levels", type=int, default=10)
            s.add_argument("--count", type=int, default=100)

    ar = sub.add_parser("arith").add_subparsers(dest="aop")
    for op in ("schedule", "build", "weil", "psi", "transfer", "osc", "product"):
        s = leaf(ar, op, op_arith)
        s.set_defaults(aop=op)
        if op == "schedule":
            s.add_argument("--mode", choices=["ratio", "dyadic-half"], default="ratio")
            s.add_argument("--count", type=int, default=8)
            s.add_argument("--m", type=int, default=1)
        if op in ("build", "osc"):
            s.add_argument("--d", type=int, default=2)
            s.add_argument("--q", type=int, default=1)
            s.add_argument("--count", type=int, default=6)
            s.add_argument("--k", type=int, default=None)
            s.add_argument("--grid", type=int, default=64)
        if op == "weil":
            s.add_argument("--p", type=int, required=True)
            s.add_argument("--m", type=int, default=2)
        if op == "psi":
            s.add_argument("--pmin", type=int, default=11)
            s.add_argument("--pmax", type=int, default=199)
        if op == "transfer":
            s.add_argument("--p", type=int, default=11)
            s.add_argument("--q", type=int, default=1)
            s.add_argument("--d", type=int, default=2)
            s.add_argument("--n-freq", dest="n_freq", type=int, default=100)
        if op == "product":
            s.add_argument("--primes", default="5,7")
            s.add_argument("--m", type=int, default=2)

    g = sub.add_parser("group").add_subparsers(dest="gop")
    for op in ("ball", "blocks", "random", "ttstar", "gaps", "banach"):
        s = leaf(g, op, op_group)
        s.set_defaults(gop=op)
        s.add_argument("--group", default="heis3", help="z1, z2, z3, z2-sup or heis3")
        s.add_argument("--N", type=int, default=12)
        s.add_argument("--K", type=int, default=4)
        s.add_argument("--alpha", type=float, default=1.5)
        s.add_argument("--gamma", type=float, default=0.8)
        s.add_argument("--j", type=int, default=2)
        s.add_argument("--jmin", type=int, default=1)
        s.add_argument("--jmax", type=int, default=3)
        s.add_argument("--M", type=int, default=1)
        s.add_argument("--source", choices=["cantor", "speckled"], default="cantor")
        s.add_argument("--count", type=int, default=4095)
        s.add_argument("--M-grid", dest="M_grid", default="2,3,4,6,8")
        s.add_argument("--budget", type=float, default=0.5)
        s.add_argument("--N-list", dest="N_list", default="64,128,256")

    dy = sub.add_parser("dyn").add_subparsers(dest="dop")
    for op in ("run", "maximal", "transfer"):
        s = leaf(dy, op, op_dyn)
        s.set_defaults(dop=op)
        if op == "run":
            s.add_argument("--sequence", choices=["arith", "lattice"], default="arith")
            s.add_argument("--blocks", type=int, default=12)
            s.add_argument("--Nmax", type=int, default=10 ** 5)
        if op == "maximal":
            s.add_argument("--d", type=int, default=2)
            s.add_argument("--radii", default="0,1,2,4,8")
            s.add_argument("--levels", type=int, default=10)
        if op == "transfer":
            s.add_argument("--L", type=int, default=128)
            s.add_argument("--K", type=int, default=16)
            s.add_argument("--R", type=int, default=1)

    s = sub.add_parser("all-acceptance")
    _common(s, False)
    s.set_defaults(fn=None, group="all-acceptance")
    s.add_argument("--ids", default=None, help="comma separated criterion numbers")
    s.add_argument("--twice", action="store_true", help="run twice and compare report bytes")
    return P


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict) or not cfg:
        raise UsageError("config must be a non-empty JSON object")
    allowed = {"command", "args", "seed", "out", "jobs", "format"}
    extra = set(cfg) - allowed
    if extra:
        raise UsageError(f"unknown config keys {sorted(extra)}")
    if "command" not in cfg or not isinstance(cfg["command"], list):
        raise UsageError("config needs a 'command' list, e.g. [\"arith\", \"weil\"]")
    return cfg


_FLAG_NAMES = {"n_freq": "--n-freq", "M_grid": "--M-grid", "N_list": "--N-list"}


def _argv_from_config(cfg: dict) -> list[str]:
    argv = [str(c) for c in cfg["command"]]
    for k, v in (cfg.get("args") or {}).items():
        flag = _FLAG_NAMES.get(k, "--" + str(k))
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        else:
            argv += [flag, str(v)]
    return argv


def resolve_seed(flag: int | None, cfg: dict) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("SPARSE_ERGODIC_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SPARSE_ERGODIC_SEED must be an integer, got {env!r}") from None
    return int(cfg.get("seed", 0))


def manifest(config: dict, seed: int) -> dict:
    import numpy
    import scipy
    canon = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return {"config": _plain(config), "config_hash": hashlib.sha256(canon.encode()).hexdigest(), "seed": seed,
            "versions": {"sparse_ergodic": __version__, "python": platform.python_version(),
                         "numpy": numpy.__version__, "scipy": scipy.__version__}}


def _write(out: str, files: dict[str, bytes]) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (d / name).write_bytes(data)


def _run_acceptance(ns, seed: int, out: str | None, jobs: int, config: dict) -> int:
    from .acceptance import run_all, serialize_rows, summary
    ids = _ints(ns.ids) if getattr(ns, "ids", None) else None
    rows = run_all(seed, ids, jobs)
    data = serialize_rows(rows, seed)
    print(summary(rows))
    if getattr(ns, "twice", False):
        again = serialize_rows(run_all(seed, ids, jobs), seed)
        same = again == data
        print(f"[{'PASS' if same else 'FAIL'}] second run byte-identical: {same}")
        if not same:
            return EXIT_FAIL
    if out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "name", "passed", "detail"])
        for r in rows:
            w.writerow([r.id, r.name, r.passed, r.detail])
        _write(out, {"report.json": data, "series.csv": buf.getvalue().encode(),
                     "manifest.json": json_bytes(manifest(config, seed))})
    return EXIT_PASS if all(r.passed for r in rows) else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        cfg = _load_config(getattr(ns, "config", None))
        if cfg and ns.command is None:
            # the config supplies the command and its flags; global flags on the command line win
            merged = _argv_from_config(cfg) + [a for a in argv if a not in ("--config", ns.config)]
            try:
                ns = parser.parse_args(merged)
            except SystemExit as exc:
                return int(exc.code) if exc.code is not None else EXIT_USAGE
        if ns.command is None or (ns.command != "all-acceptance" and getattr(ns, "fn", None) is None):
            parser.print_usage(sys.stderr)
            print("sparse-ergodic: error: no command given", file=sys.stderr)
            return EXIT_USAGE
        seed = resolve_seed(getattr(ns, "seed", None), cfg)
        out = getattr(ns, "out", None) or cfg.get("out")
        jobs = getattr(ns, "jobs", None) or int(cfg.get("jobs", 1))
        fmt = getattr(ns, "format", None) or cfg.get("format", "csv")
        params = {k: v for k, v in vars(ns).items()
                  if k not in ("fn", "seed", "out", "format", "jobs", "config") and v is not None}
        op_path = [ns.command, *[getattr(ns, k) for k in ("op", "kind", "rop", "aop", "gop", "dop")
                                 if getattr(ns, k, None)]]
        # only what determines the numbers: the output location is left out
        config = {"command": op_path, "params": params, "seed": seed}
        if ns.command == "all-acceptance":
            return _run_acceptance(ns, seed, out, jobs, config)
        res: Result = ns.fn(ns, seed)
    except UsageError as exc:
        print(f"sparse-ergodic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConditionError, BudgetExceeded, ValueError) as exc:
        print(f"sparse-ergodic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"op": op_path, "params": params, "seed": seed, "summary": res.summary, "passed": res.passed}
    if out:
        _write(out, {"report.json": json_bytes(report), "series.csv": csv_bytes(res),
                     "manifest.json": json_bytes(manifest(config, seed))})
        for line in res.lines:
            print(line)
    elif fmt == "json":
        sys.stdout.write(json_bytes({**report, "columns": res.columns, "rows": res.rows}).decode())
    else:
        sys.stdout.write(csv_bytes(res).decode())
        for line in res.lines:
            print(f"# {line}")
    return EXIT_FAIL if res.passed is False else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
