"""Command-line entry point: ``dynlbm fit | simulate | evaluate``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .core import AXIS_NAMES, ContractError, Hyperparams, TriPartition
from .icl import icl_exact
from .ingest import (
    BinningSpec,
    IngestError,
    aggregate,
    parse_contacts,
    read_dump,
    tensor_from_quads,
    write_dump,
)
from .report import build_report, read_assignments, write_assignments, write_report, write_time_clusters
from .search import SearchConfig, multi_restart
from .simulate import GenSpec, adjusted_rand_index, sample

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("dynlbm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_hyper(p):
    g = p.add_argument_group("priors")
    g.add_argument("--a", type=float, default=None, help="Gamma shape (default 1)")
    g.add_argument("--b", type=float, default=None, help="Gamma rate (default 1)")
    g.add_argument("--alpha", type=float, default=None, help="row Dirichlet concentration (default 1)")
    g.add_argument("--delta", type=float, default=None, help="column Dirichlet concentration (default 1)")
    g.add_argument("--gamma", type=float, default=None, help="time Dirichlet concentration (default 1)")
    g.add_argument("--delta-t", type=float, default=None, help="interval width in model time units (default 1)")


def _hyper_from(args, base: dict | None = None) -> Hyperparams:
    vals = dict(base or {})
    for name in ("a", "b", "alpha", "delta", "gamma", "delta_t"):
        v = getattr(args, name)
        if v is not None:
            vals[name] = v
    return Hyperparams(**vals)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynlbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the model to a count tensor or contact log")
    f.add_argument("--input", required=True)
    f.add_argument("--format", choices=("tsv_t_i_j", "csv_quad", "dump"), default="dump")
    f.add_argument("--bin-width", type=int, help="seconds per interval (tsv_t_i_j)")
    f.add_argument("--t-start", type=int, help="window start (tsv_t_i_j; default: first timestamp)")
    f.add_argument("--t-end", type=int, help="window end, exclusive (tsv_t_i_j)")
    f.add_argument("--drop-outside", action="store_true", help="ignore records outside the window")
    f.add_argument("--symmetric", action="store_true", help="store each contact at both orientations")
    f.add_argument("--n-intervals", type=int, help="U for csv_quad input (default: max interval + 1)")
    _add_hyper(f)
    for ax in "kgd":
        f.add_argument(f"--init-{ax}", type=int, help=f"initial {ax.upper()} (default min(size, 10))")
        f.add_argument(f"--fix-{ax}", type=int, help=f"hold {ax.upper()} fixed at this value")
    f.add_argument("--restarts", type=int, default=10)
    f.add_argument("--max-sweeps", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--no-new-clusters", action="store_true")
    f.add_argument("--jobs", type=int, default=1, help="parallel restarts")
    f.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("simulate", help="sample a tensor from a generator spec")
    s.add_argument("--spec", required=True, help="GenSpec JSON")
    s.add_argument("--seed", type=int, help="override the spec seed")
    s.add_argument("--out", required=True, help="dump prefix (writes PREFIX.csv and PREFIX.json)")

    e = sub.add_parser("evaluate", help="compare fitted assignments with simulation truth")
    e.add_argument("--truth", required=True, help="simulation dump (prefix, .csv or .json)")
    e.add_argument("--assignments", required=True, help="assignments.csv written by fit")
    e.add_argument("--report", help="fit report.json; its priors are used unless overridden")
    _add_hyper(e)
    return parser


def _load_tensor(args):
    """Return (tensor, row_ids, col_ids, delta_t, input_info)."""
    info = {"path": os.path.basename(args.input), "format": args.format}
    if args.format == "dump":
        dump = read_dump(args.input)
        return dump.tensor, dump.row_ids, dump.col_ids, dump.delta_t, info
    if args.format == "csv_quad":
        parsed = parse_contacts(args.input, "csv_quad")
        tensor = tensor_from_quads(parsed, args.n_intervals)
        return tensor, parsed.row_ids.ids, parsed.col_ids.ids, None, info
    if args.bin_width is None:
        raise UsageError("--bin-width is required for tsv_t_i_j input")
    parsed = parse_contacts(args.input, "tsv_t_i_j")
    times = [rc.t for rc in parsed.records]
    t_start = args.t_start if args.t_start is not None else (min(times) if times else 0)
    if args.t_end is not None:
        t_end = args.t_end
    else:
        span = (max(times) - t_start + 1) if times else 1
        t_end = t_start + args.bin_width * max(1, -(-span // args.bin_width))
    spec = BinningSpec(t_start, t_end, args.bin_width)
    tensor, ids = aggregate(parsed.records, spec, parsed.row_ids, symmetric=args.symmetric,
                            drop_outside=args.drop_outside)
    info.update({"t_start": t_start, "t_end": t_end, "bin_width": args.bin_width, "symmetric": args.symmetric})
    return tensor, ids.ids, ids.ids, None, info


def cmd_fit(args) -> int:
    inits = []
    for ax in "kgd":
        fixv, initv = getattr(args, f"fix_{ax}"), getattr(args, f"init_{ax}")
        if fixv is not None and initv is not None and fixv != initv:
            raise UsageError(f"--fix-{ax} and --init-{ax} disagree")
        value = fixv if fixv is not None else initv
        if value is not None and value < 1:
            raise UsageError(f"cluster count for {ax.upper()} must be positive")
        inits.append(value)
    if args.restarts < 1 or args.max_sweeps < 1 or args.jobs < 1:
        raise UsageError("--restarts, --max-sweeps and --jobs must be positive")
    tensor, row_ids, col_ids, dump_dt, info = _load_tensor(args)
    hyper = _hyper_from(args, {"delta_t": dump_dt} if dump_dt is not None else None)
    fixed = tuple(getattr(args, f"fix_{ax}") is not None for ax in "kgd")
    cfg = SearchConfig(
        init_K=inits[0], init_G=inits[1], init_D=inits[2],
        max_sweeps=args.max_sweeps, restarts=args.restarts, seed=args.seed,
        allow_new_clusters=not args.no_new_clusters, hyper=hyper, fixed=fixed,
    )
    cfg.init_counts(tensor.shape)  # validate against the data before searching
    result = multi_restart(tensor, cfg, n_jobs=args.jobs)
    if not math.isfinite(result.icl.total):
        print(f"dynlbm: non-finite ICL {result.icl.total}", file=sys.stderr)
        return EXIT_NUMERIC
    report, part = build_report(tensor, result, cfg, info)
    os.makedirs(args.out, exist_ok=True)
    write_report(os.path.join(args.out, "report.json"), report)
    write_assignments(os.path.join(args.out, "assignments.csv"), part, row_ids, col_ids)
    write_time_clusters(os.path.join(args.out, "time_clusters.csv"), report)
    print(f"ICL {result.icl.total:.6f}  K={part.K} G={part.G} D={part.D}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = GenSpec.from_json(args.spec)
    if args.seed is not None:
        spec = GenSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    tensor, truth = sample(spec)
    extra = {
        "truth": {name: lab.tolist() for name, lab in zip(AXIS_NAMES, truth.labels)},
        "gen_spec": spec.to_dict(),
    }
    csv_path, _ = write_dump(args.out, tensor, delta_t=spec.delta_t, extra=extra)
    print(f"wrote {csv_path}: shape {tensor.shape}, total {tensor.total}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dump = read_dump(args.truth)
    if "truth" not in dump.extra:
        raise IngestError(f"{args.truth} carries no truth labels")
    truth = TriPartition(*(dump.extra["truth"][name] for name in AXIS_NAMES))
    try:
        fitted = read_assignments(args.assignments)
    except ValueError as e:
        raise IngestError(str(e)) from None
    if fitted.shape != dump.tensor.shape:
        raise IngestError(f"assignment shape {fitted.shape} does not match tensor shape {dump.tensor.shape}")
    base = {"delta_t": dump.delta_t}
    if args.report:
        with open(args.report, encoding="utf-8") as fh:
            base = json.load(fh)["config"]["hyper"]
    hyper = _hyper_from(args, base)
    for name, p, q in zip(AXIS_NAMES, fitted.labels, truth.labels):
        print(f"ARI {name} {adjusted_rand_index(p, q):.6f}")
    icl_fit = icl_exact(dump.tensor, fitted, hyper).total
    icl_truth = icl_exact(dump.tensor, truth, hyper).total
    if not (math.isfinite(icl_fit) and math.isfinite(icl_truth)):
        return EXIT_NUMERIC
    print(f"ICL fitted {icl_fit:.6f}")
    print(f"ICL truth {icl_truth:.6f}")
    # positive gap: the fitted partition scores below the generating labels
    print(f"ICL gap (truth - fitted) {icl_truth - icl_fit:.6f}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"dynlbm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ContractError, OSError, json.JSONDecodeError) as e:
        print(f"dynlbm: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FloatingPointError as e:
        print(f"dynlbm: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
