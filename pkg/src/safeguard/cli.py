"""Command-line entry points.

    safeguard run    --config exp.cfg [--out DIR]
    safeguard synth  --n 100000 --noise 0.25 --seed 0 --out data.csv
    safeguard curves --in scored.csv --out curve.csv [--step 0.005]
    safeguard serve  [--tau 0.15 --budget B --port 0 ...]

Every command exits 0 on success and 1 with a one-line diagnostic on stderr
otherwise.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="safeguard",
        description="Concept-bottleneck selective prediction with budgeted "
                    "human confirmation.")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run an experiment from a config file")
    runp.add_argument("--config", required=True, help="key=value config file")
    runp.add_argument("--out", help="output directory (overrides the config)")

    synthp = sub.add_parser("synth", help="write a synthetic dataset")
    synthp.add_argument("--n", type=int, default=100_000)
    synthp.add_argument("--noise", type=float, default=0.25)
    synthp.add_argument("--seed", type=int, default=0)
    synthp.add_argument("--out", required=True)

    curvesp = sub.add_parser(
        "curves", help="accuracy/coverage curve from scored examples")
    curvesp.add_argument("--in", dest="infile", required=True,
                         help="CSV with header score,label")
    curvesp.add_argument("--out", required=True)
    curvesp.add_argument("--step", type=float, default=0.005)

    servep = sub.add_parser(
        "serve", help="start the concept-review HTTP service")
    servep.add_argument("--table", help="probability table to review")
    servep.add_argument("--frontend", help="saved front-end (required with --table)")
    servep.add_argument("--n", type=int, default=200,
                        help="demo instances when no table is given")
    servep.add_argument("--noise", type=float, default=0.25)
    servep.add_argument("--seed", type=int, default=0)
    servep.add_argument("--tau", type=float, default=0.15)
    servep.add_argument("--budget", type=float, default=None,
                        help="total confirmation budget (default unlimited)")
    servep.add_argument("--host", default="127.0.0.1")
    servep.add_argument("--port", type=int, default=8000,
                        help="0 picks an ephemeral port")
    servep.add_argument("--log", help="append-only audit log path")
    servep.add_argument("--ui", help="directory of static UI files to serve")
    servep.add_argument("--hide-truth", action="store_true",
                        help="do not expose true concepts in demo mode")
    return p


def _cmd_run(args) -> int:
    from .harness import emit_reports, load_config, run_experiment

    config = load_config(args.config)
    out_dir = args.out or config.out
    if not out_dir:
        raise ValueError("no output directory: pass --out or set out= in the config")
    result = run_experiment(config)
    files = emit_reports(result, out_dir)
    print(f"wrote {len(files)} files to {out_dir}")
    print(f"wall clock: {result.metadata['wall_clock_seconds']:.2f}s")
    return 0


def _cmd_synth(args) -> int:
    from .synthetic import SyntheticConfig, generate, write_dataset

    ds = generate(SyntheticConfig(n=args.n, noise=args.noise, seed=args.seed))
    write_dataset(ds, args.out)
    print(f"wrote {ds.n} rows to {args.out}")
    return 0


def _cmd_curves(args) -> int:
    from .gate import accuracy_coverage_curve, default_tau_grid, \
        write_curve_points

    scores, labels = [], []
    with open(args.infile) as fh:
        header = fh.readline().strip()
        if header != "score,label":
            raise ValueError(f"expected header 'score,label', got {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"line {line_no}: expected 2 fields")
            scores.append(float(parts[0]))
            labels.append(int(parts[1]))
    points = accuracy_coverage_curve(
        np.array(scores), np.array(labels), default_tau_grid(args.step))
    write_curve_points(points, args.out)
    print(f"wrote {len(points)} points to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import SessionRow, serve, start_session

    if args.table:
        if not args.frontend:
            raise ValueError("--table requires --frontend")
        from .detectors import ingest_probability_table
        from .frontend import load_frontend

        frontend = load_frontend(args.frontend)
        table = ingest_probability_table(args.table)
        rows = [
            SessionRow(
                id=str(table.ids[i]), q=table.probs[i],
                truth=None if table.concepts is None else table.concepts[i],
                label=int(table.labels[i]),
            )
            for i in range(table.n)
        ]
    else:
        from .synthetic import SyntheticConfig, generate, \
            oracle_concept_probs, oracle_frontend

        ds = generate(SyntheticConfig(n=args.n, noise=args.noise,
                                      seed=args.seed))
        frontend = oracle_frontend()
        q = oracle_concept_probs(ds.features, args.noise)
        rows = [
            SessionRow(id=str(i), q=q[i], truth=ds.concepts[i],
                       label=int(ds.labels[i]))
            for i in range(ds.n)
        ]

    session = start_session(
        frontend, rows, tau=args.tau, budget=args.budget,
        expose_truth=not args.hide_truth, log_path=args.log)
    httpd = serve(session, host=args.host, port=args.port, ui_dir=args.ui)
    host, port = httpd.server_address[:2]
    print(f"review service listening on http://{host}:{port}", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "synth": _cmd_synth,
    "curves": _cmd_curves,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:   # single diagnostic line, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
