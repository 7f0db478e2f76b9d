"""``rbcert`` command line: simulate, certify, report.

Exit codes: 0 when a dimension is certified (or the command succeeded),
2 when no dimension is supported by the data, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import reporting
from .certify import NO_DIMENSION_WARNING, build_report, certify_likelihoods, parse_prior_spec
from .mle import MlConfig, sweep_dimensions
from .polarimetry import PnrdModel, TwoModeSource, source_distribution, squeezing_db_to_r
from .quantum import DiagonalDataset, bhattacharyya_fidelity, embed, uhlmann_fidelity
from .simulate import SimConfig, mode_state, simulate_polarimetry, simulate_temporal

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_DIMENSION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which would collide with the
    # "no plausible dimension" code.
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _deltas(text: str) -> list:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from None
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("deltas must be nonnegative integers")
    return values


def _digits(text: str) -> int:
    value = int(text)
    if not 1 <= value <= reporting.MAX_DIGITS:
        raise argparse.ArgumentTypeError(f"digits must lie in [1, {reporting.MAX_DIGITS}]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rbcert", description="Relative-belief certification of the effective dimension of a quantum state.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="generate a seeded dataset")
    sim_sub = sim.add_subparsers(dest="scenario", required=True, parser_class=_Parser)

    t = sim_sub.add_parser("temporal", help="Haar-random bases measured on a single mode-index state")
    t.add_argument("--mode-index", type=int, required=True)
    t.add_argument("--bases", type=int, default=11)
    t.add_argument("--copies", type=int, default=1000, help="copies per basis")
    t.add_argument("--dmax", type=int, default=10)
    t.add_argument("--dark-rate", type=float, default=0.0)
    t.add_argument("--seed", type=_seed, required=True)
    t.add_argument("-o", "--output", required=True)

    p = sim_sub.add_parser("polarimetry", help="photon-number counts of a two-mode source")
    p.add_argument("--source", choices=("tmsv", "bell"), required=True)
    p.add_argument("--squeezing-db", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--n0", type=int, default=8)
    p.add_argument("--copies", type=int, default=10**6)
    p.add_argument("--dmax", type=int, default=9)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("-o", "--output", required=True)

    c = sub.add_parser("certify", help="sweep dimensions and certify")
    c.add_argument("dataset", help="dataset JSON or likelihood file")
    c.add_argument("--prior", default="uniform", help="uniform, gaussian:<center> or file:<path>")
    c.add_argument("--deltas", type=_deltas, default=[0, 1, 2])
    c.add_argument("--bias-threshold", type=float, default=None)
    c.add_argument("--restarts", type=int, default=None)
    c.add_argument("--max-iterations", type=int, default=5000)
    c.add_argument("--seed", type=_seed, default=None, help="required when the solver uses random restarts")
    c.add_argument("--n-total", type=int, default=None, help="copy count for BIC when certifying a likelihood file")
    c.add_argument("-o", "--output", required=True, help="report JSON path")
    c.add_argument("--table", default=None, help="text table path (default: report path with .txt)")
    c.add_argument("--digits", type=_digits, default=None)

    r = sub.add_parser("report", help="render a report as tables and CSV")
    r.add_argument("report")
    r.add_argument("--digits", type=_digits, default=None)
    r.add_argument("--csv-dir", default=None)
    r.add_argument("--table", default=None, help="write the table here instead of stdout")
    return parser


def cmd_simulate(args) -> int:
    if args.scenario == "temporal":
        config = SimConfig(
            seed=args.seed,
            copies_per_basis=args.copies,
            num_bases=args.bases,
            dim_max=args.dmax,
            dark_rate=args.dark_rate,
        )
        dataset = simulate_temporal(args.mode_index, config)
        reporting.save_dataset(dataset, args.output)
        print(f"wrote {args.output}: {len(dataset.bases)} bases, {dataset.total_copies} counts, D={dataset.dim_max}")
        return EXIT_OK
    source = TwoModeSource(args.source, squeezing_db_to_r(args.squeezing_db))
    model = PnrdModel(args.eta, args.n0)
    rng = np.random.default_rng(args.seed)
    extra = {"seed": args.seed, "squeezing_db": args.squeezing_db, "rng": "PCG64"}
    dataset = simulate_polarimetry(source, model, args.copies, rng, dim_max=args.dmax, provenance=extra)
    reporting.save_dataset(dataset, args.output)
    print(
        f"wrote {args.output}: {dataset.total_copies} counts, D={dataset.dim_max}, "
        f"source tail mass {dataset.provenance['tail_mass']:.3e}"
    )
    return EXIT_OK


def fidelities(dataset, sweep) -> tuple:
    """Fidelity of each ML estimator with the simulated truth, when known."""
    prov = dataset.provenance or {}
    gen = prov.get("generator")
    if gen == "temporal":
        truth = mode_state(int(prov["mode_index"]), dataset.dim_max)
        return "uhlmann", {r.dim: uhlmann_fidelity(embed(r.estimator, dataset.dim_max), truth) for r in sweep}
    if gen == "polarimetry" and isinstance(dataset, DiagonalDataset):
        p, _ = source_distribution(TwoModeSource(prov["source"], float(prov["r"])), dataset.dim_max - 1)
        out = {}
        for r in sweep:
            cols = dataset.columns[dataset.column_mask(r.dim)]
            truth = p[tuple(cols.T)]
            out[r.dim] = bhattacharyya_fidelity(r.populations, truth / truth.sum())
        return "bhattacharyya", out
    return None, {}


def cmd_certify(args) -> int:
    digits = reporting.display_digits(args.digits)
    table_path = args.table or os.path.splitext(args.output)[0] + ".txt"
    solver = None
    if reporting.is_likelihood_file(args.dataset):
        fixture = reporting.load_likelihood_fixture(args.dataset)
        prior = parse_prior_spec(args.prior, fixture.d_min, fixture.d_max)
        report = certify_likelihoods(
            fixture.likelihoods,
            prior,
            args.deltas,
            n_total=args.n_total or fixture.n_total,
            kappa_kind=fixture.kappa_kind,
        )
    else:
        dataset = reporting.load_dataset(args.dataset)
        prior = parse_prior_spec(args.prior, 2, dataset.dim_max)
        bias = args.bias_threshold
        if isinstance(dataset, DiagonalDataset) and bias:
            print("note: bias threshold ignored for photon-number datasets", file=sys.stderr)
            bias = None
        config = MlConfig(max_iterations=args.max_iterations, restarts=args.restarts, bias_threshold=bias)
        if config.n_starts > 1 and args.seed is None:
            raise UsageError("rbcert certify: error: --seed is required when the solver uses more than one start")
        seed = args.seed or 0
        sweep = sweep_dimensions(dataset, 2, dataset.dim_max, config, seed)
        report = build_report(dataset, sweep, prior, args.deltas)
        report.fidelity_kind, report.fidelities = fidelities(dataset, sweep)
        solver = {**config.as_dict(), "seed": seed}
    manifest = reporting.RunManifest(
        command="certify",
        inputs=[args.dataset],
        prior=args.prior,
        deltas=args.deltas,
        outputs=[args.output, table_path],
        seed=args.seed,
        solver=solver,
        digits=digits,
    )
    data = reporting.report_to_dict(report, manifest)
    reporting.atomic_write_text(args.output, json.dumps(data, indent=1) + "\n")
    table = reporting.render_table(data, digits)
    reporting.atomic_write_text(table_path, table)
    sys.stdout.write(table)
    if report.d_rb is None:
        print(f"warning: {NO_DIMENSION_WARNING}", file=sys.stderr)
        return EXIT_NO_DIMENSION
    return EXIT_OK


def cmd_report(args) -> int:
    data = reporting.load_report(args.report)
    table = reporting.render_table(data, args.digits)
    if args.table:
        reporting.atomic_write_text(args.table, table)
    else:
        sys.stdout.write(table)
    if args.csv_dir:
        for path in reporting.write_csvs(data, args.csv_dir, args.digits):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "certify":
            return cmd_certify(args)
        return cmd_report(args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        print(f"rbcert: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
