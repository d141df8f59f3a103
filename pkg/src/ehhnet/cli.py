"""Command-line interface: ``ehhnet <command> [options]``.

Commands
--------
gen-benchmark  write Narendra-Li train/test CSV files
train          fit a NARX model with restarts (and an optional size sweep)
eval           one-step and free-run metrics of a saved model
anova          ranked ANOVA importance table
export         ``k, y, y_sim`` columns for plotting

Exit status is 0 on success.  Failures map to distinct codes: 2 usage,
3 invalid input, 4 resource cap, 5 training failure, 6 unstable simulation,
7 file system error, 8 malformed data file.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .anova import anova_importance
from .errors import EhhError, NumericOverflow
from .experiment import (evaluate, fingerprint, free_run_validation, narx_meta,
                         spec_from_meta, sweep_sizes, train_restarts)
from .serialize import load_model, model_hash, save_model
from .sysid import (NARENDRA_LI_SPEC, NarxSpec, build_regressors, load_csv,
                    narendra_li_generate, simulate_free_run, write_csv)
from .trainer import TrainConfig

log = logging.getLogger("ehhnet")

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_IO = 7

# run-level settings; everything else in a config file goes to TrainConfig
RUN_KEYS = ("seed", "restarts", "grid", "data", "test_data", "narx", "u_col", "y_col")
RUN_DEFAULTS = {"seed": 0, "restarts": 10, "grid": None, "data": None, "test_data": None,
                "narx": NARENDRA_LI_SPEC.to_dict(), "u_col": 0, "y_col": 1}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def _finite(x):
    """JSON has no infinities; report them as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_finite(v) for v in x]
    return x


def parse_grid(text):
    """``"5:30,5:40,10:30"`` -> ``[(5, 30), (5, 40), (10, 30)]``."""
    out = []
    for item in text.split(","):
        q, _, extra = item.strip().partition(":")
        if not extra:
            raise argparse.ArgumentTypeError(f"grid entry {item!r} is not q:n_intermediate")
        out.append((int(q), int(extra)))
    return out


def _floats(text):
    return [float(v) for v in text.split(",")]


# -- configuration -------------------------------------------------------------

def load_config(path):
    """Config document from a JSON file; a train manifest is accepted too."""
    with open(path) as fh:
        doc = json.load(fh)
    if "config" in doc and doc.get("kind") == "train":
        doc = doc["config"]
    return doc


def resolve_config(args):
    """Merge defaults, the config file and flags (flags win)."""
    doc = load_config(args.config) if args.config else {}
    run = dict(RUN_DEFAULTS)
    run.update({k: doc[k] for k in RUN_KEYS if k in doc})
    train_doc = dict(doc.get("train", {}))
    flags = {"seed": args.seed, "restarts": args.restarts, "data": args.data,
             "test_data": args.test_data, "u_col": args.u_col, "y_col": args.y_col}
    run.update({k: v for k, v in flags.items() if v is not None})
    if args.grid is not None:
        run["grid"] = args.grid
    if args.n_b is not None or args.n_a is not None or args.current_input is not None:
        narx = dict(run["narx"])
        for key, val in (("n_b", args.n_b), ("n_a", args.n_a),
                         ("current_input", args.current_input)):
            if val is not None:
                narx[key] = val
        run["narx"] = narx
    tflags = {"max_cycles": args.cycles, "mode": args.mode, "q": args.q,
              "n_neurons": args.neurons, "zeta_grid": args.zeta_grid,
              "penalize_intercept": args.penalize_intercept}
    train_doc.update({k: v for k, v in tflags.items() if v is not None})
    cfg = TrainConfig.from_dict(train_doc)
    if run["data"] is None:
        raise ValueError("no training data: pass --data or set 'data' in the config")
    if run["grid"] is not None:
        run["grid"] = [tuple(map(int, g)) for g in run["grid"]]
    return cfg, run


def _config_doc(cfg, run):
    doc = dict(run)
    doc["grid"] = None if run["grid"] is None else [list(g) for g in run["grid"]]
    doc["train"] = cfg.to_dict()
    return doc


# -- commands ------------------------------------------------------------------

def cmd_gen_benchmark(args):
    os.makedirs(args.out, exist_ok=True)
    train, test = narendra_li_generate(args.n_train, args.noise_variance, args.seed,
                                       args.n_test, args.test_noise)
    paths = {"train": os.path.join(args.out, "train.csv"),
             "test": os.path.join(args.out, "test.csv")}
    write_csv(paths["train"], train)
    write_csv(paths["test"], test)
    manifest = {
        "kind": "gen-benchmark", "version": __version__, "seed": args.seed,
        "n_train": args.n_train, "n_test": args.n_test,
        "noise_variance": args.noise_variance, "test_noise": args.test_noise,
        "files": {k: {"path": p, "sha256": fingerprint(p)} for k, p in paths.items()},
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"wrote {len(train)} training and {len(test)} test samples to {args.out}")
    return 0


def _save_run(out, cfg, run, spec, best, results, grid_table, timings, status):
    net = dataclasses.replace(best.net, meta=narx_meta(spec))
    model_path = os.path.join(out, "model.json")
    save_model(net, model_path)
    files = {"data": {"path": run["data"], "sha256": fingerprint(run["data"])}}
    if run["test_data"]:
        files["test_data"] = {"path": run["test_data"],
                              "sha256": fingerprint(run["test_data"])}
    manifest = {
        "kind": "train", "version": __version__, "status": status,
        "config": _config_doc(cfg, run),
        "files": files,
        "model": {"path": model_path, "sha256": model_hash(net)},
        "selected": {"restart": best.index, "seed": best.seed, "gcv": best.gcv,
                     "score": best.score, "cycles": best.state.cycle,
                     "cost": best.state.cost, "n_neurons": net.n_nodes},
        "metrics": best.metrics,
        "restarts": [{"restart": r.index, "seed": r.seed, "gcv": r.gcv, "score": r.score,
                      "cycles": r.state.cycle, "cost": r.state.cost,
                      "n_neurons": r.net.n_nodes, "wall_time": r.wall_time}
                     for r in results],
        "size_sweep": grid_table,
        "cycle_log": os.path.join(out, "cycles.jsonl"),
        "timings": timings,
    }
    _write_json(os.path.join(out, "manifest.json"), _finite(manifest))
    return net


def cmd_train(args):
    cfg, run = resolve_config(args)
    spec = NarxSpec(**run["narx"])
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    data = load_csv(run["data"], run["u_col"], run["y_col"])
    x, y = build_regressors(data, spec)
    validation = None
    if run["test_data"]:
        test = load_csv(run["test_data"], run["u_col"], run["y_col"])
        validation = free_run_validation(test, spec)
    timings = {"load": time.perf_counter() - t0}

    grid_table = None
    if run["grid"]:
        t1 = time.perf_counter()
        cfg, grid_table = sweep_sizes(cfg, x, y, run["grid"], run["seed"])
        timings["size_sweep"] = time.perf_counter() - t1
        log.info("size sweep picked q=%d, n_neurons=%d", cfg.q, cfg.n_neurons)
        run["grid"] = None  # the manifest records the chosen size directly

    log_path = os.path.join(args.out, "cycles.jsonl")
    with open(log_path, "w") as log_fh:
        def on_cycle(r, rec):
            log_fh.write(json.dumps(_finite(dict(rec, restart=r))) + "\n")
            log_fh.flush()

        t1 = time.perf_counter()
        try:
            best, results = train_restarts(cfg, x, y, run["restarts"], run["seed"],
                                           validation, on_cycle)
        except EhhError as exc:
            done = getattr(exc, "partial", [])
            if done:
                timings["train"] = time.perf_counter() - t1
                pick = (max(done, key=lambda t: t.score) if validation
                        else min(done, key=lambda t: t.gcv))
                _save_run(args.out, cfg, run, spec, pick, done, grid_table, timings,
                          "partial")
            raise
    timings["train"] = time.perf_counter() - t1
    net = _save_run(args.out, cfg, run, spec, best, results, grid_table, timings, "complete")
    msg = (f"restart {best.index} selected: {net.n_nodes} neurons, "
           f"{best.state.cycle} cycles, train GCV {best.gcv:.6g}")
    if validation is not None:
        msg += f", free-run VAF {best.score:.4f}"
    print(msg)
    return 0


def _model_and_spec(args):
    net = load_model(args.model)
    spec = spec_from_meta(net.meta, NARENDRA_LI_SPEC)
    return net, spec


def cmd_eval(args):
    net, spec = _model_and_spec(args)
    data = load_csv(args.data, args.u_col or 0, args.y_col or 1)
    metrics = _finite(evaluate(net, data, spec))
    text = json.dumps(metrics, indent=1)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def format_anova(report, names, top_k=None):
    rows = report.ranked() if top_k is None else report.top(top_k)
    width = max([len("ANOVA function")] + [len(e.label(names)) for e in rows])
    lines = [f"{'ANOVA function':<{width}}  {'sigma':>12}  {'GCV without':>12}"]
    for e in rows:
        flag = "  (singular refit)" if e.singular else ""
        lines.append(f"{e.label(names):<{width}}  {e.sigma:12.6g}  {e.gcv_removed:12.6g}{flag}")
    return "\n".join(lines)


def cmd_anova(args):
    net, spec = _model_and_spec(args)
    data = load_csv(args.data, args.u_col or 0, args.y_col or 1)
    x, y = build_regressors(data, spec)
    report = anova_importance(net, x, y)
    names = net.meta.get("regressors") or spec.labels()
    print(format_anova(report, names, args.top_k))
    if args.out:
        rows = report.ranked() if args.top_k is None else report.top(args.top_k)
        _write_json(args.out, _finite([
            {"variables": e.label(names), "members": list(e.members), "sigma": e.sigma,
             "gcv_removed": e.gcv_removed, "singular": e.singular} for e in rows]))
    return 0


def cmd_export(args):
    net, spec = _model_and_spec(args)
    data = load_csv(args.data, args.u_col or 0, args.y_col or 1)
    m = spec.max_lag
    rows = []
    if len(data) > m:
        sim = simulate_free_run(net, data.u, data.y[:m], spec)
        k = np.arange(m, len(data))
        rows = list(zip(k.tolist(), data.y[m:].tolist(), sim.y_sim[m:].tolist()))
    if args.window is not None:
        rows = rows[-args.window:] if args.window > 0 else []
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "y", "y_sim"])
        for k, yv, ys in rows:
            w.writerow([k, repr(yv), repr(ys)])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="ehhnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-benchmark", help="write Narendra-Li train/test CSV files")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-train", type=int, default=2000)
    g.add_argument("--n-test", type=int, default=200)
    g.add_argument("--noise-variance", type=float, default=0.1)
    g.add_argument("--test-noise", action="store_true", help="add noise to the test output")
    g.set_defaults(func=cmd_gen_benchmark)

    t = sub.add_parser("train", help="train a NARX model")
    t.add_argument("--config", help="JSON config file or a previous train manifest")
    t.add_argument("--data", help="training CSV (u, y)")
    t.add_argument("--test-data", help="validation CSV; restarts are ranked by free-run VAF")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int)
    t.add_argument("--restarts", type=int)
    t.add_argument("--cycles", type=int, help="maximum training cycles")
    t.add_argument("--mode", choices=["column", "element"])
    t.add_argument("--grid", type=parse_grid,
                   help="size sweep, e.g. 5:30,5:40,10:30 (offsets per input : extra neurons)")
    t.add_argument("--q", type=int, help="hinge offsets per input")
    t.add_argument("--neurons", type=int, help="total hidden neuron budget")
    t.add_argument("--zeta-grid", type=_floats, help="comma-separated multiples of std(y)")
    t.add_argument("--penalize-intercept", action=argparse.BooleanOptionalAction,
                   default=None)
    t.add_argument("--n-b", type=int, help="output lags")
    t.add_argument("--n-a", type=int, help="input lags")
    t.add_argument("--current-input", action=argparse.BooleanOptionalAction, default=None,
                   help="include u(k) in the regressor")
    t.set_defaults(func=cmd_train)

    for name, func, help_ in (("eval", cmd_eval, "evaluate a saved model"),
                              ("anova", cmd_anova, "ANOVA importance table"),
                              ("export", cmd_export, "free-run simulation as CSV")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--model", required=True)
        s.add_argument("--data", required=True)
        s.add_argument("--out", required=(name == "export"))
        s.set_defaults(func=func)
        if name == "anova":
            s.add_argument("--top-k", type=int)
        if name == "export":
            s.add_argument("--window", type=int, help="keep only the last N rows")

    for s in (t, *(sub.choices[n] for n in ("eval", "anova", "export"))):
        s.add_argument("--u-col", type=int)
        s.add_argument("--y-col", type=int)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EhhError as exc:
        print(f"ehhnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ehhnet: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"ehhnet: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
