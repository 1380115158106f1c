"""Command-line interface: ``dikintrack {sample,track,anneal,predict,diagnose}``.

Every command reads a YAML run config (``--config``). Sample and decision
rows go to ``--out`` as CSV (stdout by default); JSON-lines reports go to
``--report`` (stdout when ``--out`` names a file, stderr otherwise). Nothing
is written until the command has finished, so a failing run leaves no
partial output behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .applications.anneal import anneal_minimize
from .applications.drift import DriftScheduler
from .applications.posterior import ExpFamilyModel, PosteriorTracker
from .applications.predict import best_fixed_comparator, default_eta, make_predictor, predict_round
from .barriers import Barrier, analytic_center
from .config import LineDict, load_run_config, parse_potential, read_csv_stream
from .diagnostics import empirical_moments, grid_density, property_report, tv_distance
from .errors import ConfigError, DikinError
from .potentials import step_size
from .walker import ChainParams, init_state, run, sample_path

logger = logging.getLogger("dikintrack")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def fmt(v: float) -> str:
    """Shortest round-trip text for a float; identical across runs and platforms."""
    return repr(float(v))


def csv_text(header: dict, columns: Sequence[str], rows) -> str:
    lines = [f"# {k}={v}" for k, v in header.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def jsonl(records) -> str:
    return "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in records)


class Outputs:
    """Buffers CSV and report text and writes them once the command succeeds."""

    def __init__(self, args):
        self.out = args.out
        self.report = args.report
        self.csv: str | None = None
        self.lines: list[str] = []

    def emit(self, *records):
        self.lines.append(jsonl(records))

    def flush(self):
        if self.csv is not None:
            if self.out in (None, "-"):
                sys.stdout.write(self.csv)
            else:
                Path(self.out).write_text(self.csv)
        text = "".join(self.lines)
        if not text:
            return
        if self.report not in (None, "-"):
            Path(self.report).write_text(text)
        elif self.out in (None, "-") and self.csv is not None:
            sys.stderr.write(text)
        else:
            sys.stdout.write(text)


def _section(cfg: LineDict, key: str) -> LineDict:
    sec = cfg.get(key)
    if sec is None:
        return LineDict()
    if not isinstance(sec, dict):
        raise ConfigError(f"{cfg.where(key)}: expected a mapping")
    return sec


def _seed(args, cfg: LineDict) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError(f"{cfg.where('seed')}: seed must be an integer in [0, 2^64)")
    return seed


def _int(cfg: LineDict, key: str, default: int | None, minimum: int = 0) -> int | None:
    v = cfg.get(key, default)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"{cfg.where(key)}: expected an integer >= {minimum}")
    return v


def _float(cfg: LineDict, key: str, default: float | None) -> float | None:
    v = cfg.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{cfg.where(key)}: expected a number")
    return float(v)


def _tracker_knobs(args, cfg: LineDict) -> dict:
    tk = _section(cfg, "tracker")
    C = args.constant_C if args.constant_C is not None else _float(tk, "C", 1.0)
    if not C > 0:
        raise ConfigError("constant C must be positive")
    policy = tk.get("policy", "onestep")
    if policy not in ("onestep", "accuracy"):
        raise ConfigError(f"{tk.where('policy')}: policy must be 'onestep' or 'accuracy'")
    eps = _float(tk, "eps", 0.1)
    if not eps > 0:
        raise ConfigError(f"{tk.where('eps')}: eps must be positive")
    warm = _float(tk, "warm_bound", 10.0)
    return {"C": C, "policy": policy, "eps": eps, "warm_bound": warm}


def _start_point(cfg: LineDict, barrier: Barrier) -> np.ndarray:
    if "x0" in cfg:
        x0 = np.atleast_1d(np.asarray(cfg["x0"], dtype=float))
        if x0.shape != (barrier.dim,):
            raise ConfigError(f"{cfg.where('x0')}: expected length {barrier.dim}")
        return x0
    return analytic_center(barrier)


def _open_stream(path: str | None):
    if path in (None, "-"):
        return sys.stdin
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"stream file {p} does not exist")
    return p.open()


def _chain_chunk(job):
    barrier, pot, r, x0, seeds, steps = job
    out = []
    for sd in seeds:
        st = init_state(barrier, x0, int(sd))
        path = sample_path(barrier, pot, ChainParams(r, int(sd)), st, steps)
        out.append((path, st.proposal_count, st.accept_count))
    return out


def cmd_sample(args, cfg: LineDict, barrier: Barrier, outputs: Outputs) -> int:
    seed = _seed(args, cfg)
    d = barrier.dim
    pot = parse_potential(cfg.get("potential"), d, barrier.enclosing_radius)
    steps = args.steps if args.steps is not None else _int(cfg, "steps", 1000)
    if steps < 0:
        raise ConfigError("--steps must be nonnegative")
    r = _float(cfg, "step_size", None)
    r = step_size(pot, d) if r is None else r
    ChainParams(r, seed).validate(d)
    chains = _int(cfg, "chains", 1, minimum=1)
    x0 = _start_point(cfg, barrier)
    init_state(barrier, x0, seed)  # validates the starting point

    if chains == 1:
        st = init_state(barrier, x0, seed)
        results = [(sample_path(barrier, pot, ChainParams(r, seed), st, steps), st.proposal_count, st.accept_count)]
    else:
        seeds = np.random.SeedSequence(seed).generate_state(chains, dtype=np.uint64)
        workers = max(1, args.workers)
        jobs = [(barrier, pot, r, x0, ch, steps) for ch in np.array_split(seeds, workers) if len(ch)]
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                parts = list(ex.map(_chain_chunk, jobs))
        else:
            parts = [_chain_chunk(j) for j in jobs]
        results = [res for part in parts for res in part]

    proposals = sum(p for _, p, _ in results)
    accepts = sum(a for _, _, a in results)
    rate = accepts / proposals if proposals else 0.0
    header = {"seed": seed, "r": fmt(r), "steps": steps, "chains": chains, "acceptance_rate": fmt(rate)}
    cols = [f"x_{i + 1}" for i in range(d)]
    if chains == 1:
        rows = (tuple(p) for p in results[0][0])
    else:
        cols = ["chain"] + cols
        rows = ((i, *p) for i, (path, _, _) in enumerate(results) for p in path)
    outputs.csv = csv_text(header, cols, rows)

    summary = {"command": "sample", "seed": seed, "r": r, "steps": steps, "chains": chains, "acceptance_rate": rate}
    X = np.concatenate([path for path, _, _ in results]) if steps else np.empty((0, d))
    if len(X) >= 2:
        mean, cov = empirical_moments(X)
        summary["mean"] = mean
        summary["cov"] = cov
    if d <= 2 and len(X):
        h = _float(cfg, "oracle_h", 1e-2)
        bins = _int(cfg, "tv_bins", 100 if d == 1 else 10, minimum=1)
        oracle = grid_density(barrier, pot, h)
        tv, outside = tv_distance(oracle, X, bins=bins, return_outside=True)
        summary["tv"] = tv
        summary["tv_bins"] = bins
        summary["outside"] = outside
    outputs.emit(summary)
    return EXIT_OK


_FAMILIES = {
    # A(x), Lipschitz constant of A on K, lambda_max of its Hessian, sup_K |A|
    "gaussian": lambda d, R: (lambda x: 0.5 * float(x @ x), R, 1.0, 0.5 * R * R),
    "bernoulli": lambda d, R: (
        lambda x: float(np.logaddexp(0.0, x).sum()),
        math.sqrt(d),
        0.25,
        d * math.log1p(math.exp(R)),
    ),
}


def _posterior_model(cfg: LineDict, d: int, R: float) -> ExpFamilyModel:
    mc = _section(cfg, "model")
    family = mc.get("family", "gaussian")
    if family not in _FAMILIES:
        raise ConfigError(f"{mc.where('family')}: unknown family {family!r} ({', '.join(_FAMILIES)})")
    A, lip, lam, sup = _FAMILIES[family](d, R)
    kappa1 = np.atleast_1d(np.asarray(mc.get("kappa1", [0.0] * d), dtype=float))
    if kappa1.shape != (d,):
        raise ConfigError(f"{mc.where('kappa1')}: expected length {d}")
    kappa2 = _float(mc, "kappa2", 0.0)
    return ExpFamilyModel(T=lambda y: np.asarray(y, dtype=float), A=A, kappa1=kappa1, kappa2=kappa2,
                          A_lipschitz=lip, A_lambda_max=lam, A_sup=sup)


def cmd_track(args, cfg: LineDict, barrier: Barrier, outputs: Outputs) -> int:
    seed = _seed(args, cfg)
    d = barrier.dim
    knobs = _tracker_knobs(args, cfg)
    scenario = cfg.get("scenario", "drift")
    cols = ["t"] + [f"x_{i + 1}" for i in range(d)]
    rows = []
    stream = _open_stream(args.stream)
    try:
        if scenario == "drift":
            dc = _section(cfg, "drift")
            sched = DriftScheduler(
                barrier,
                center_radius=_float(dc, "center_radius", 1.0),
                policy=knobs["policy"],
                eps=knobs["eps"],
                C=knobs["C"],
                warm_bound=knobs["warm_bound"],
                precision=_float(dc, "precision", 1.0),
                initial_center=dc.get("initial_center"),
            )
            state = init_state(barrier, _start_point(cfg, barrier), seed)
            params = ChainParams(sched.r, seed)
            run(barrier, sched.potential, params, state, sched.burn_in)
            rec = sched.initial_report()
            rows.append((0, *state.x))
            outputs.emit({**rec, "r": sched.r, "x": state.x})
            for c in read_csv_stream(stream, d):
                tau, pot, rec = sched.push(c)
                run(barrier, pot, params, state, tau)
                rows.append((rec["t"], *state.x))
                outputs.emit({**rec, "r": sched.r, "x": state.x})
            r_hdr = sched.r
        elif scenario == "posterior":
            model = _posterior_model(cfg, d, barrier.enclosing_radius)
            tracker = PosteriorTracker(model, barrier, eps=knobs["eps"], C=knobs["C"], seed=seed,
                                       warm_bound=knobs["warm_bound"], x0=_start_point(cfg, barrier))
            rows.append((0, *tracker.state.x))
            outputs.emit({**tracker.tracker.report(), "r": tracker.r, "x": tracker.state.x})
            for y in read_csv_stream(stream, d):
                rec = tracker.ingest(y)
                rows.append((rec["t"], *tracker.state.x))
                outputs.emit(rec)
            r_hdr = tracker.r
        else:
            raise ConfigError(f"{cfg.where('scenario')}: scenario must be 'drift' or 'posterior'")
    finally:
        if stream is not sys.stdin:
            stream.close()
    header = {"seed": seed, "r": fmt(r_hdr), "rounds": len(rows) - 1, "scenario": scenario}
    outputs.csv = csv_text(header, cols, rows)
    return EXIT_OK


def cmd_anneal(args, cfg: LineDict, barrier: Barrier, outputs: Outputs) -> int:
    seed = _seed(args, cfg)
    d = barrier.dim
    ac = _section(cfg, "anneal")
    if "direction" not in ac:
        raise ConfigError(f"{ac.where()}: anneal block needs a 'direction'")
    ell = np.atleast_1d(np.asarray(ac["direction"], dtype=float))
    if ell.shape != (d,) or not np.linalg.norm(ell) > 0:
        raise ConfigError(f"{ac.where('direction')}: expected a nonzero vector of length {d}")
    ell = ell / np.linalg.norm(ell)
    eps = _float(ac, "eps", 0.1)
    knobs = _tracker_knobs(args, cfg)
    x, value, rep = anneal_minimize(barrier, ell, eps, C=knobs["C"], seed=seed, warm_bound=knobs["warm_bound"],
                                    r=_float(ac, "step_size", None), x0=cfg.get("x0"))
    outputs.emit({"command": "anneal", "seed": seed, "point": x, "value": value, **rep})
    header = {"seed": seed, "k": rep["k"], "total_steps": rep["total_steps"]}
    outputs.csv = csv_text(header, [f"x_{i + 1}" for i in range(d)] + ["value"], [(*x, value)])
    return EXIT_OK


def cmd_predict(args, cfg: LineDict, barrier: Barrier, outputs: Outputs) -> int:
    seed = _seed(args, cfg)
    d = barrier.dim
    if d > 2:
        raise ConfigError("predict computes the comparator on a grid and supports d <= 2")
    pc = _section(cfg, "predict")
    knobs = _tracker_knobs(args, cfg)
    stream = _open_stream(args.stream)
    try:
        losses = list(read_csv_stream(stream, (d, d + 1)))
    finally:
        if stream is not sys.stdin:
            stream.close()
    T = _int(pc, "horizon", None, minimum=1) or max(1, len(losses))
    eta = _float(pc, "eta", None)
    eta = default_eta(d, barrier.nu, T) if eta is None else eta
    state = make_predictor(barrier, eta=eta, seed=seed, C=knobs["C"], bounded=bool(pc.get("bounded", True)),
                           policy=knobs["policy"], eps=knobs["eps"], warm_bound=knobs["warm_bound"])
    rows = []
    for t, row in enumerate(losses, start=1):
        g, offset = row[:d], (float(row[d]) if len(row) > d else 0.0)
        y, state = predict_round(state, barrier, g, offset)
        rows.append((t, *y, state.realized[-1], state.taus[-1]))
        outputs.emit({"t": t, "decision": y, "loss": state.realized[-1], "tau": state.taus[-1]})
    best_x, best = best_fixed_comparator(state, barrier, h=_float(pc, "comparator_h", 1e-3))
    total = float(np.sum(state.realized))
    outputs.emit({"command": "predict", "seed": seed, "T": len(losses), "eta": eta, "realized_loss": total,
                  "comparator": best_x, "comparator_loss": best, "regret": total - best})
    header = {"seed": seed, "eta": fmt(eta), "r": fmt(state.r), "rounds": len(losses)}
    cols = ["t"] + [f"y_{i + 1}" for i in range(d)] + ["loss", "tau"]
    outputs.csv = csv_text(header, cols, rows)
    return EXIT_OK


def cmd_diagnose(args, cfg: LineDict, barrier: Barrier, outputs: Outputs) -> int:
    seed = _seed(args, cfg)
    dc = _section(cfg, "diagnose")
    trials = args.steps if args.steps is not None else _int(dc, "trials", 1000, minimum=1)
    pot = parse_potential(cfg.get("potential"), barrier.dim, barrier.enclosing_radius)
    records = property_report(barrier, pot, r=_float(dc, "step_size", None), trials=trials, seed=seed)
    outputs.emit(*records)
    ok = all(rec["pass"] for rec in records)
    outputs.emit({"command": "diagnose", "seed": seed, "trials": trials, "pass": ok})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "sample": cmd_sample,
    "track": cmd_track,
    "anneal": cmd_anneal,
    "predict": cmd_predict,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dikintrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--steps", type=int, help="chain length (sample) or trial count (diagnose)")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--report", help="JSON-lines report path")
        p.add_argument("--workers", type=int, default=1, help="worker processes for multi-chain runs")
        p.add_argument("--constant-C", dest="constant_C", type=float, help="conductance constant C")
        if name in ("track", "predict"):
            p.add_argument("--stream", default="-", help="CSV input stream (default: stdin)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    outputs = Outputs(args)
    try:
        cfg, barrier = load_run_config(args.config)
        if "command" in cfg and cfg["command"] != args.command:
            raise ConfigError(f"{cfg.where('command')}: config is for '{cfg['command']}', not '{args.command}'")
        code = COMMANDS[args.command](args, cfg, barrier, outputs)
    except (DikinError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"dikintrack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    outputs.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
