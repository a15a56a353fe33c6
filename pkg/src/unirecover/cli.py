"""unirecover command line.

    unirecover bench rates --config rates.json --out results/rates
    unirecover recover --lattice fib:12 --function "bernoulli:r=2,2;phi=sign" --mode vp
    unirecover cubature exactness --m 144 --h 1 89 --d 2
    unirecover discretize certify --points fib:12 --n 2 --d 2
    unirecover runs list
    unirecover serve --port 8000
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler

from unirecover.bench import RunArchive, load_config, run_experiment, write_outputs
from unirecover.bench.config import ExperimentKind, build_lattice
from unirecover.config import get_settings
from unirecover.cubature import max_exact_cross
from unirecover.discretization import certify_collection
from unirecover.errors import UnirecoverError
from unirecover.function_classes import parse_function_spec, read_samples_file, samples_function
from unirecover.lattices import as_point_set
from unirecover.recovery import certified_budget, universal_cheb_recover, universal_vp_recover
from unirecover.utils import pretty_print_rows

logger = logging.getLogger("unirecover")
console = Console()


def _emit(payload: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(payload + "\n")
        logger.info(f"Wrote {out}")
    else:
        console.print_json(payload)


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if config.kind.value != args.kind:
        config = config.model_copy(update={"kind": ExperimentKind(args.kind)})
    run = run_experiment(config, threads=args.threads)

    rows = [r.flat() for r in run.records]
    pretty_print_rows(f"{run.kind.value} ({len(rows)} rows)", run.header(), rows, console)
    out = args.out or config.output
    if out:
        for path in write_outputs(run, out):
            logger.info(f"Wrote {path}")
    if args.archive is not None:
        stored = RunArchive(args.archive or None).save(run)
        logger.info(f"Archived run {stored.id}")
    if not run.passed:
        logger.error(f"{len(run.failed_rows)} row(s) failed")
    return 0 if run.passed else 1


def cmd_recover(args: argparse.Namespace) -> int:
    lattice = build_lattice(args.lattice)
    ps = as_point_set(lattice)
    if args.samples:
        f = samples_function(read_samples_file(args.samples), ps.dim, label=args.samples)
    else:
        f = parse_function_spec(args.function, ps.dim)

    budget = args.budget if args.budget is not None else certified_budget(lattice)
    if budget is None:
        raise UnirecoverError(f"{ps.label} certifies no shape; pass --budget")
    if args.mode == "vp":
        result = universal_vp_recover(lattice, f, budget)
    else:
        result = universal_cheb_recover(lattice, f, budget)
    _emit(result.summary().model_dump_json(indent=2), args.out)
    return 0


def cmd_cubature(args: argparse.Namespace) -> int:
    cert = max_exact_cross(args.m, args.h, args.d, args.nmax)
    payload = cert.model_dump()
    payload["gamma_hat"] = cert.gamma_hat
    _emit(json.dumps(payload), args.out)
    return 0


def cmd_discretize(args: argparse.Namespace) -> int:
    points = build_lattice(args.points if ":" in args.points else f"file:{args.points}")
    report = certify_collection(points, args.n, args.d, args.probes, seed=args.seed, exact=args.exact)
    _emit(report.model_dump_json(indent=2), args.out)
    return 0


def cmd_runs(args: argparse.Namespace) -> int:
    runs = RunArchive(args.archive).list_runs(args.kind)
    rows = [
        {"id": r.id, "kind": r.kind, "schema": r.schema, "pass": r.passed, "created_at": r.created_at}
        for r in runs
    ]
    pretty_print_rows("Archived runs", ["id", "kind", "schema", "pass", "created_at"], rows, console)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("unirecover.server:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unirecover", description="Universal sampling recovery toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run an experiment from a JSON config")
    bench.add_argument("kind", choices=[k.value for k in ExperimentKind])
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", help="output stem; writes <stem>.csv and <stem>.json")
    bench.add_argument("--archive", nargs="?", const="", default=None, metavar="URL")
    bench.add_argument("--threads", type=int)
    bench.set_defaults(func=cmd_bench)

    recover = sub.add_parser("recover", help="recover one function from its samples")
    recover.add_argument("--lattice", required=True, help="fib:<n> | korobov:<m>,<h...> | file:<path>")
    source = recover.add_mutually_exclusive_group(required=True)
    source.add_argument("--function", help='e.g. "bernoulli:r=2,2;alpha=0,0;K=4096"')
    source.add_argument("--samples", help="file of node values, one per line")
    recover.add_argument("--mode", choices=["vp", "cheb"], default="vp")
    recover.add_argument("--budget", type=int)
    recover.add_argument("--out")
    recover.set_defaults(func=cmd_recover)

    cubature = sub.add_parser("cubature", help="lattice cubature tools")
    cubature_sub = cubature.add_subparsers(dest="action", required=True)
    exactness = cubature_sub.add_parser("exactness", help="largest exact hyperbolic cross")
    exactness.add_argument("--m", type=int, required=True)
    exactness.add_argument("--h", type=int, nargs="+", required=True)
    exactness.add_argument("--d", type=int, required=True)
    exactness.add_argument("--nmax", type=int)
    exactness.add_argument("--out")
    exactness.set_defaults(func=cmd_cubature)

    discretize = sub.add_parser("discretize", help="discretization constants")
    discretize_sub = discretize.add_subparsers(dest="action", required=True)
    certify = discretize_sub.add_parser("certify", help="estimate D^ for H(n, d)")
    certify.add_argument("--points", required=True, help="point file or fib:<n> | korobov:<m>,<h...>")
    certify.add_argument("--n", type=int, required=True)
    certify.add_argument("--d", type=int, required=True)
    certify.add_argument("--probes", type=int)
    certify.add_argument("--seed", type=int)
    certify.add_argument("--exact", action="store_true", help="LP per grid point instead of probes")
    certify.add_argument("--out")
    certify.set_defaults(func=cmd_discretize)

    runs = sub.add_parser("runs", help="archived bench runs")
    runs_sub = runs.add_subparsers(dest="action", required=True)
    runs_list = runs_sub.add_parser("list")
    runs_list.add_argument("--archive", metavar="URL")
    runs_list.add_argument("--kind", choices=[k.value for k in ExperimentKind])
    runs_list.set_defaults(func=cmd_runs)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    get_settings.cache_clear()
    try:
        return args.func(args)
    except (UnirecoverError, ValueError, OSError) as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
