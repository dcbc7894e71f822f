"""Batch experiment driver.

Every subcommand is deterministic given its arguments: repeated runs write
identical output bytes.  Each run also emits a manifest (config echo,
package version, wall time) next to its output, and `qsk rerun MANIFEST`
replays a run from its manifest.

Exit codes: 0 success, 2 usage error, 3 capacity error, 4 numerical-
integrity error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .asymptotics import (
    decay_rate,
    optimize_parameters,
    reference_rates,
    strong_limit,
    weak_limit,
    weak_limit_parameters,
)
from .baselines import aggregate_costs, instance_costs, sample_soluble, write_cost_csv
from .counting import exact_mean_psoln, prespecified_solution_probability
from .errors import QskError, UsageError
from .io import spec_to_json, to_dimacs
from .sat import Assignment, EnsembleSpec, sample_problem
from .sim import PhaseSchedule, p_solution, run, run_partial

SWEEP_COLUMNS = ["mu", "tau", "rho", "A", "prefactor", "det_re", "det_im", "residual",
                 "A_prespecified_bound", "random_selection", "amplified_random_selection",
                 "markov_bound"]


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("QSK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _resolve_m(args) -> int:
    if getattr(args, "m", None) is not None:
        return args.m
    if getattr(args, "mu", None) is not None:
        return round(args.mu * args.n)
    raise UsageError("specify --m or --mu")


def _schedule(args) -> PhaseSchedule:
    if getattr(args, "linear", None):
        ra, rb, ta, tb = (float(v) for v in args.linear.split(","))
        return PhaseSchedule.linear(ra, rb, ta, tb, args.steps)
    if args.rho is None or args.tau is None:
        raise UsageError("specify --rho and --tau (or --linear)")
    if getattr(args, "steps", 1) > 1:
        return PhaseSchedule.explicit([(args.rho, args.tau)] * args.steps)
    return PhaseSchedule.single(args.rho, args.tau)


def _write_manifest(args, command: str, elapsed: float, config: dict) -> None:
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "elapsed_seconds": elapsed,
    }
    target = getattr(args, "output", None) or getattr(args, "out_dir", None)
    if target:
        path = (target.rstrip("/") + "/manifest.json") if getattr(args, "out_dir", None) \
            else target + ".manifest.json"
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        print(json.dumps({"manifest": manifest}, sort_keys=True), file=sys.stderr)


def _config_dict(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _build_spec(args, seed=None) -> EnsembleSpec:
    m = _resolve_m(args)
    sol = None
    if args.ensemble == "prespecified":
        if args.solution is not None:
            bits = int(args.solution, 0) if isinstance(args.solution, str) else int(args.solution)
        else:
            bits = 0
        sol = Assignment(bits, args.n)
    return EnsembleSpec(kind=args.ensemble, n=args.n, k=args.k, m=m,
                        seed=args.seed if seed is None else seed, solution=sol)


# --------------------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    spec = _build_spec(args)
    os.makedirs(args.out_dir, exist_ok=True)
    children = np.random.SeedSequence(args.seed).spawn(args.count)
    for i in range(args.count):
        rng = np.random.Generator(np.random.Philox(children[i]))
        problem = sample_problem(spec, rng)
        comments = [f"qsk instance {i}", f"spec {spec_to_json(spec)}"]
        path = os.path.join(args.out_dir, f"instance_{i:04d}.cnf")
        with open(path, "w") as fh:
            fh.write(to_dimacs(problem, comments))
    index = {"spec": json.loads(spec_to_json(spec)), "count": args.count}
    with open(os.path.join(args.out_dir, "index.json"), "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.count} instances to {args.out_dir}")
    return 0


# ---------------------------------------------------------------------- simulate


def _simulate_one(payload):
    spec_dict, steps, sigma, partial, index, seed_words = payload
    sol = None
    if spec_dict.get("solution") is not None:
        sol = Assignment(spec_dict["solution"], spec_dict["n"])
    spec = EnsembleSpec(kind=spec_dict["kind"], n=spec_dict["n"], k=spec_dict["k"],
                        m=spec_dict["m"], seed=spec_dict["seed"], solution=sol)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_words)))
    problem = sample_problem(spec, rng)
    solutions = problem.count_solutions()
    if partial:
        rho, tau = steps[0]
        _, psoln = run_partial(problem, rho, tau, sigma or 0.0)
    else:
        state = run(problem, PhaseSchedule.explicit(steps, sigma=sigma))
        psoln = p_solution(state, problem)
    return index, psoln, solutions


def cmd_simulate(args) -> int:
    spec = _build_spec(args)
    schedule = _schedule(args)
    spec_dict = json.loads(spec_to_json(spec))
    children = np.random.SeedSequence(args.seed).spawn(args.samples)
    payloads = [(spec_dict, schedule.steps, args.sigma, args.partial, i,
                 [int(w) for w in children[i].generate_state(4)])
                for i in range(args.samples)]
    nthreads = _threads(args)
    if nthreads > 1:
        with ProcessPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(_simulate_one, payloads))
    else:
        results = [_simulate_one(p) for p in payloads]
    rows = sorted(results)
    psolns = np.array([r[1] for r in rows])
    soluble = np.array([r[2] > 0 for r in rows])
    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "psoln", "solutions"])
            for idx, p, s in rows:
                writer.writerow([idx, repr(p), s])
    summary = {
        "samples": args.samples,
        "mean_psoln": float(psolns.mean()),
        "std_error": float(psolns.std(ddof=1) / math.sqrt(len(psolns))) if len(psolns) > 1 else 0.0,
        "mean_psoln_sq": float((psolns**2).mean()),
        "soluble_fraction": float(soluble.mean()),
    }
    if soluble.any():
        summary["mean_psoln_soluble"] = float(psolns[soluble].mean())
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# -------------------------------------------------------------------------- exact


def cmd_exact(args) -> int:
    if args.weak_params:
        tau, rho = weak_limit_parameters(args.k)
    else:
        if args.rho is None or args.tau is None:
            raise UsageError("specify --rho and --tau (or --weak-params)")
        rho, tau = args.rho, args.tau
    m = _resolve_m(args)
    collect = [] if args.dump_groups else None
    if args.prespecified_bound:
        value = prespecified_solution_probability(args.n, args.k, m, rho, tau, method=args.method)
    else:
        value = exact_mean_psoln(args.n, args.k, m, rho, tau, method=args.method, collect=collect)
    if args.dump_groups:
        with open(args.dump_groups, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "w", "term_re", "term_im"])
            writer.writerows(collect)
    _emit(args, {"n": args.n, "k": args.k, "m": m, "rho": rho, "tau": tau,
                 "mean_psoln": value})
    return 0


# -------------------------------------------------------------------------- decay


def _decay_payload(res) -> dict:
    return {
        "k": res.k, "mu": res.mu, "tau": res.tau, "rho": res.rho,
        "ensemble": res.ensemble, "A": res.A, "prefactor": res.prefactor,
        "det_hessian": [res.det_hessian.real, res.det_hessian.imag],
        "point": {
            "w": [res.point.w.real, res.point.w.imag],
            "x": [res.point.x.real, res.point.x.imag],
            "y": [res.point.y.real, res.point.y.imag],
            "z": [res.point.z.real, res.point.z.imag],
        },
        "residual": res.residual,
        "converged": res.converged,
    }


def cmd_decay(args) -> int:
    res = decay_rate(args.k, args.mu, args.rho, args.tau, ensemble=args.ensemble)
    _emit(args, _decay_payload(res))
    return 0


# ----------------------------------------------------------------- optimize/sweep


def _mu_list(args) -> list[float]:
    if args.mu_list:
        return [float(t) for t in args.mu_list.split(",")]
    if args.mu_min is None or args.mu_max is None or args.points is None:
        raise UsageError("specify --mu-list or --mu-min/--mu-max/--points")
    if args.geometric:
        return list(np.geomspace(args.mu_min, args.mu_max, args.points))
    return list(np.linspace(args.mu_min, args.mu_max, args.points))


def _sweep_rows(k: int, mus, resume_rows=None, emit=None):
    done = {round(r, 12) for r in (resume_rows or [])}
    seed = None
    for mu in mus:
        if round(float(mu), 12) in done:
            continue
        opt = optimize_parameters(k, float(mu), seed=seed)
        res = opt.result
        seed = (opt.rho, opt.tau, res.point)
        rates = reference_rates(k, float(mu))
        row = [float(mu), opt.tau, opt.rho, res.A, res.prefactor,
               res.det_hessian.real, res.det_hessian.imag, res.residual,
               res.A + math.log(2) + float(mu) * math.log(1 - 2.0 ** (-k)),
               rates.random_selection, rates.amplified_random_selection,
               rates.markov_bound]
        if emit:
            emit(row)
        yield row


def cmd_optimize(args) -> int:
    mus = _mu_list(args)
    rows = list(_sweep_rows(args.k, mus))
    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            writer.writerows(rows)
    for row in rows:
        print(f"mu={row[0]:g} tau={row[1]:.6f} rho={row[2]:.6f} A={row[3]:.6f} "
              f"prefactor={row[4]:.4f}")
    return 0


def cmd_sweep(args) -> int:
    if not args.output:
        raise UsageError("sweep requires --output (checkpointed CSV)")
    mus = _mu_list(args)
    existing = []
    if args.resume and os.path.exists(args.output):
        with open(args.output, newline="") as fh:
            existing = [float(row["mu"]) for row in csv.DictReader(fh)]
    mode = "a" if existing else "w"
    with open(args.output, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not existing:
            writer.writerow(SWEEP_COLUMNS)
        for row in _sweep_rows(args.k, mus, resume_rows=existing):
            writer.writerow(row)
            fh.flush()
            print(f"mu={row[0]:g} A={row[3]:.6f}")
    return 0


# ------------------------------------------------------------------------- limits


def cmd_limits(args) -> int:
    wl = weak_limit(args.k)
    payload = {
        "k": args.k,
        "weak": {"tau": wl.tau, "rho": wl.rho, "alpha": wl.alpha},
    }
    if args.mu is not None:
        sl = strong_limit(args.k, args.mu)
        payload["strong"] = {"mu": args.mu, "tau": sl.tau, "rho": sl.rho,
                             "rate": sl.rate, "prefactor": sl.prefactor}
    _emit(args, payload)
    return 0


# ------------------------------------------------------------------------ compare


def _compare_one(payload):
    spec_dict, steps, gsat_trials, index, seed_words = payload
    spec = EnsembleSpec(kind=spec_dict["kind"], n=spec_dict["n"], k=spec_dict["k"],
                        m=spec_dict["m"], seed=spec_dict["seed"])
    ss = np.random.SeedSequence(seed_words)
    rng = np.random.Generator(np.random.Philox(ss))
    problem = sample_problem(spec, rng)
    if problem.count_solutions() == 0:
        return index, None
    rec = instance_costs(problem, PhaseSchedule.explicit(steps),
                         gsat_trials=gsat_trials, rng=rng, instance_id=index)
    return index, rec


def cmd_compare(args) -> int:
    spec = _build_spec(args)
    if spec.kind != "random":
        raise UsageError("compare operates on the random ensemble")
    schedule = _schedule(args)
    spec_dict = json.loads(spec_to_json(spec))
    nthreads = _threads(args)
    records = []
    draws = 0
    batch = max(args.instances, 64)
    stream = np.random.SeedSequence(args.seed)
    while len(records) < args.instances:
        children = stream.spawn(batch)
        payloads = [(spec_dict, schedule.steps, args.gsat_trials, draws + i,
                     [int(w) for w in children[i].generate_state(4)]) for i in range(batch)]
        draws += batch
        if nthreads > 1:
            with ProcessPoolExecutor(max_workers=nthreads) as pool:
                out = list(pool.map(_compare_one, payloads))
        else:
            out = [_compare_one(p) for p in payloads]
        for _, rec in sorted(out, key=lambda t: t[0]):
            if rec is not None and len(records) < args.instances:
                records.append(rec)
    if args.output:
        write_cost_csv(records, args.output)
    agg = aggregate_costs(records)
    print(json.dumps({
        "instances": agg.count,
        "inv_mean_psoln": agg.inv_mean_p,
        "median_inv_psoln": agg.median_inv_p,
        "mean_inv_psoln": agg.mean_inv_p,
    }, indent=2, sort_keys=True))
    return 0


# -------------------------------------------------------------------------- rerun


def cmd_rerun(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    argv = [manifest["command"]]
    for key, val in manifest["config"].items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        else:
            argv.extend([flag, str(val)])
    return main(argv)


# --------------------------------------------------------------------------- main


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker pool size (default: QSK_THREADS or CPU count)")
    p.add_argument("--output", type=str, default=None)


def _add_ensemble(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--ensemble", choices=["random", "prespecified"], default="random")
    p.add_argument("--solution", type=str, default=None,
                   help="prespecified solution bits (int literal)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsk", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write DIMACS instances")
    _add_ensemble(g)
    _add_common(g)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out-dir", type=str, required=True)
    g.set_defaults(func=cmd_gen, config_keys=["n", "k", "m", "mu", "ensemble", "solution",
                                              "seed", "count", "out_dir"])

    s = sub.add_parser("simulate", help="per-instance success probabilities")
    _add_ensemble(s)
    _add_common(s)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--rho", type=float, default=None)
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--steps", type=int, default=1)
    s.add_argument("--linear", type=str, default=None,
                   help="rhoA,rhoB,tauA,tauB linear multi-step rule")
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--partial", action="store_true",
                   help="search over variable-value-pair sets")
    s.set_defaults(func=cmd_simulate,
                   config_keys=["n", "k", "m", "mu", "ensemble", "solution", "seed",
                                "samples", "rho", "tau", "steps", "linear", "sigma",
                                "partial", "output"])

    e = sub.add_parser("exact", help="exact ensemble-mean success probability")
    _add_ensemble(e)
    _add_common(e)
    e.add_argument("--rho", type=float, default=None)
    e.add_argument("--tau", type=float, default=None)
    e.add_argument("--weak-params", action="store_true",
                   help="use the zero-density optimal (tau, rho) for this k")
    e.add_argument("--method", choices=["auto", "exact", "log"], default="auto")
    e.add_argument("--prespecified-bound", action="store_true")
    e.add_argument("--dump-groups", type=str, default=None,
                   help="CSV path for per-(x,y,z) term diagnostics")
    e.set_defaults(func=cmd_exact,
                   config_keys=["n", "k", "m", "mu", "rho", "tau", "weak_params",
                                "method", "prespecified_bound", "seed", "output"])

    d = sub.add_parser("decay", help="decay rate at fixed parameters")
    _add_common(d)
    d.add_argument("--k", type=int, default=3)
    d.add_argument("--mu", type=float, required=True)
    d.add_argument("--rho", type=float, required=True)
    d.add_argument("--tau", type=float, required=True)
    d.add_argument("--ensemble", choices=["random", "prespecified-bound"], default="random")
    d.set_defaults(func=cmd_decay, config_keys=["k", "mu", "rho", "tau", "ensemble",
                                                "seed", "output"])

    o = sub.add_parser("optimize", help="optimal (tau, rho, A) rows")
    _add_common(o)
    o.add_argument("--k", type=int, default=3)
    o.add_argument("--mu-list", type=str, default=None, help="comma-separated")
    o.add_argument("--mu-min", type=float, default=None)
    o.add_argument("--mu-max", type=float, default=None)
    o.add_argument("--points", type=int, default=None)
    o.add_argument("--geometric", action="store_true")
    o.set_defaults(func=cmd_optimize,
                   config_keys=["k", "mu_list", "mu_min", "mu_max", "points",
                                "geometric", "seed", "output"])

    w = sub.add_parser("sweep", help="checkpointed mu sweep of optima")
    _add_common(w)
    w.add_argument("--k", type=int, default=3)
    w.add_argument("--mu-list", type=str, default=None)
    w.add_argument("--mu-min", type=float, default=None)
    w.add_argument("--mu-max", type=float, default=None)
    w.add_argument("--points", type=int, default=None)
    w.add_argument("--geometric", action="store_true")
    w.add_argument("--resume", action="store_true")
    w.set_defaults(func=cmd_sweep,
                   config_keys=["k", "mu_list", "mu_min", "mu_max", "points",
                                "geometric", "resume", "seed", "output"])

    l = sub.add_parser("limits", help="weak/strong limiting closed forms")
    _add_common(l)
    l.add_argument("--k", type=int, default=3)
    l.add_argument("--mu", type=float, default=None)
    l.set_defaults(func=cmd_limits, config_keys=["k", "mu", "seed", "output"])

    c = sub.add_parser("compare", help="per-instance cost records vs GSAT")
    _add_ensemble(c)
    _add_common(c)
    c.add_argument("--instances", type=int, default=100)
    c.add_argument("--gsat-trials", type=int, default=0)
    c.add_argument("--rho", type=float, default=None)
    c.add_argument("--tau", type=float, default=None)
    c.add_argument("--steps", type=int, default=1)
    c.add_argument("--linear", type=str, default=None)
    c.set_defaults(func=cmd_compare,
                   config_keys=["n", "k", "m", "mu", "ensemble", "seed", "instances",
                                "gsat_trials", "rho", "tau", "steps", "linear", "output"])

    r = sub.add_parser("rerun", help="replay a run from its manifest")
    r.add_argument("manifest", type=str)
    r.set_defaults(func=cmd_rerun, config_keys=[])

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    start = time.monotonic()
    try:
        rc = args.func(args)
    except QskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.command != "rerun":
        config = _config_dict(args, args.config_keys)
        _write_manifest(args, args.command, time.monotonic() - start, config)
    return rc


if __name__ == "__main__":
    sys.exit(main())
