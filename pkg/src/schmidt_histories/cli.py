"""Command line front end.

Subcommands: `simulate` runs the selection loop and writes an output bundle,
`percentiles` estimates an epsilon(p, k) table, `verify-gue` checks the
ensemble moment identities by Monte Carlo, and `analytic` evaluates the
closed-form threshold laws.

Exit codes: 0 on success, 1 on configuration errors (including unknown
flags and bad config-file keys), 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gue, io, stats
from .histories import CONSISTENCY_KINDS, TRIVIALITY_MODES
from .selection import EPSILON_MODES, RunConfig, run


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class OutputBundle:
    directory: Path
    tree: Path
    consistency: Path
    projections: Path
    percentiles: Path | None  # present when a percentile schedule was used
    metadata: Path


def write_bundle(record, hash_value: str, out_dir, table_doc=None) -> OutputBundle:
    """Write every artifact of a finished run into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = OutputBundle(
        directory=out_dir,
        tree=out_dir / io.TREE_FILE,
        consistency=out_dir / io.CONSISTENCY_FILE,
        projections=out_dir / io.PROJECTIONS_FILE,
        percentiles=out_dir / io.PERCENTILES_FILE if table_doc is not None else None,
        metadata=out_dir / io.METADATA_FILE,
    )
    io.write_tree(record.tree, bundle.tree, hash_value)
    io.write_consistency_stats(record, bundle.consistency, hash_value)
    io.write_projection_times(record, bundle.projections, hash_value)
    table_hash = None
    if table_doc is not None:
        io.write_percentile_document(table_doc, bundle.percentiles)
        table_hash = table_doc.config_hash
    io.write_run_metadata(io.run_metadata(record, hash_value, table_hash), bundle.metadata)
    return bundle


# config-file key -> RunConfig field; keys mirror the simulate flags
_CONFIG_FIELDS = {
    "d1": "d1",
    "d2": "d2",
    "rank": "schmidt_rank",
    "criterion": "criterion_kind",
    "epsilon": "epsilon",
    "epsilon-mode": "epsilon_mode",
    "percentile-p": "percentile_p",
    "delta": "delta",
    "delta-mode": "delta_mode",
    "dt": "dt",
    "t-max": "t_max",
    "bisect-tol": "bisect_tol",
    "max-histories": "max_histories",
    "max-steps": "max_steps",
    "seed": "seed",
}

_KEY_TYPES = {
    "d1": int,
    "d2": int,
    "rank": int,
    "criterion": str,
    "epsilon": float,
    "epsilon-mode": str,
    "percentile-p": float,
    "percentile-table": str,
    "delta": float,
    "delta-mode": str,
    "dt": float,
    "t-max": float,
    "bisect-tol": float,
    "max-histories": int,
    "max-steps": int,
    "seed": int,
    "out": str,
}

_NULLABLE_KEYS = {"rank", "max-steps", "percentile-p", "percentile-table"}


def parse_config_file(path) -> dict:
    """Flat `key = value` file mirroring the simulate flags."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key, value = key.strip(), value.strip()
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _NULLABLE_KEYS and value.lower() == "none":
            values[key] = None
            continue
        try:
            values[key] = _KEY_TYPES[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _cmd_simulate(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    kwargs = {}
    for key, field in _CONFIG_FIELDS.items():
        value = getattr(args, key.replace("-", "_"))
        if value is None and key in file_values:
            value = file_values[key]
        if value is not None:
            kwargs[field] = value
    if "d1" not in kwargs or "d2" not in kwargs:
        raise ConfigError("d1 and d2 are required (flag or config file)")
    config = RunConfig(**kwargs)

    table_path = args.percentile_table
    if table_path is None:
        table_path = file_values.get("percentile-table")
    table_doc = None
    table = None
    if table_path is not None:
        table_doc = io.load_percentile_table(table_path)
        table = table_doc.table

    record = run(config, percentile_table=table)
    hash_value = io.config_hash(config)
    out = args.out if args.out is not None else file_values.get("out")
    out_dir = Path(out) if out is not None else Path(f"run-{hash_value}")
    bundle = write_bundle(record, hash_value, out_dir, table_doc)
    print(
        f"wrote {bundle.directory}: stop={record.stop_reason} "
        f"projections={len(record.events)} leaves={len(record.tree.leaf_ids())} "
        f"config={hash_value}"
    )
    if record.stop_reason == "degeneracy":
        print(
            "numerical failure: Schmidt spectrum stayed degenerate; outputs are partial",
            file=sys.stderr,
        )
        return 2
    return 0


def _parse_int_ranges(text: str) -> list[int]:
    """`2..30`, `2,5,9`, or a mix of both."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        lo, sep, hi = token.partition("..")
        if sep:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(token))
    if not out:
        raise ConfigError(f"no k values in {text!r}")
    return out


def _cmd_percentiles(args) -> int:
    k_values = _parse_int_ranges(args.k)
    p_values = [float(token) for token in args.p.split(",") if token.strip()]
    table = stats.estimate_percentiles(
        args.d1, args.d2, k_values, p_values, args.samples, seed=args.seed, kind=args.criterion
    )
    io.write_percentile_table(table, args.out)
    print(
        f"wrote {args.out}: {len(k_values)} k x {len(p_values)} p cells, "
        f"{args.samples} samples each, config={io.percentile_hash(table)}"
    )
    return 0


def _complex_text(z: complex) -> str:
    if z.imag == 0:
        return "%.6g" % z.real
    return "%.6g%+.6gj" % (z.real, z.imag)


def _cmd_verify_gue(args) -> int:
    checks = gue.identity_report(args.dim, args.samples, args.seed)
    width = max(len(c.kind) for c in checks)
    print(f"{'identity':<{width}}  {'analytic':>22}  {'estimate':>22}  {'std_error':>10}  status")
    failed = 0
    for c in checks:
        ok = c.passes()
        failed += not ok
        print(
            f"{c.kind:<{width}}  {_complex_text(c.analytic):>22}  "
            f"{_complex_text(c.estimate):>22}  {c.std_error:>10.3e}  "
            f"{'pass' if ok else 'FAIL'}"
        )
    if failed:
        print(f"numerical failure: {failed} identity check(s) failed", file=sys.stderr)
        return 2
    return 0


def _cmd_analytic(args) -> int:
    report = stats.threshold_report(
        lam=args.lam,
        q=args.q,
        r=args.r,
        d=args.d,
        k=args.k,
        p=args.p,
        n_p=args.n_p,
        epsilon=args.epsilon,
        support_norm_sq=args.support_norm_sq,
        regime=args.regime,
    )
    for name in sorted(report.inputs):
        value = report.inputs[name]
        print(f"input {name} = {io.fmt(value) if isinstance(value, float) else value}")
    for name in sorted(report.outputs):
        print(f"{name} = {io.fmt(report.outputs[name])}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="schmidt-histories", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run the selection loop and write an output bundle")
    sim.add_argument("--d1", type=int, help="system dimension")
    sim.add_argument("--d2", type=int, help="environment dimension (>= d1)")
    sim.add_argument("--rank", type=int, help="initial Schmidt rank (default: full, d1)")
    sim.add_argument("--criterion", choices=CONSISTENCY_KINDS, help="consistency functional")
    sim.add_argument("--epsilon", type=float, help="consistency threshold (const mode)")
    sim.add_argument("--epsilon-mode", choices=EPSILON_MODES, help="threshold schedule")
    sim.add_argument("--percentile-p", type=float, help="percentile for the scheduled threshold")
    sim.add_argument("--percentile-table", help="epsilon(p,k) table file for percentile mode")
    sim.add_argument("--delta", type=float, help="triviality threshold")
    sim.add_argument("--delta-mode", choices=TRIVIALITY_MODES, help="triviality normalization")
    sim.add_argument("--dt", type=float, help="scan step")
    sim.add_argument("--t-max", type=float, help="end of the scanned interval")
    sim.add_argument("--bisect-tol", type=float, help="projection-time bisection tolerance")
    sim.add_argument("--max-histories", type=int, help="stop once this many live histories exist")
    sim.add_argument("--max-steps", type=int, help="stop after this many scan steps")
    sim.add_argument("--seed", type=int, help="root seed for Hamiltonian and initial state")
    sim.add_argument("--config", help="flat key=value config file; flags override it")
    sim.add_argument("--out", help="output directory (default: run-<config hash>)")
    sim.set_defaults(func=_cmd_simulate)

    per = sub.add_parser("percentiles", help="estimate an epsilon(p,k) table by Monte Carlo")
    per.add_argument("--d1", type=int, required=True)
    per.add_argument("--d2", type=int, required=True)
    per.add_argument("--k", required=True, help="k values, e.g. `2..30` or `2,5,9`")
    per.add_argument("--p", required=True, help="comma-separated percentiles, e.g. `0.01,0.5,0.99`")
    per.add_argument("--samples", type=int, default=10000)
    per.add_argument("--seed", type=int, default=0)
    per.add_argument(
        "--criterion",
        choices=("medium-dhc", "weak-dhc"),
        default="medium-dhc",
        help="consistency functional sampled by the table",
    )
    per.add_argument("--out", default=io.PERCENTILES_FILE, help="output CSV path")
    per.set_defaults(func=_cmd_percentiles)

    ver = sub.add_parser("verify-gue", help="Monte Carlo check of the ensemble moment identities")
    ver.add_argument("--dim", type=int, default=8)
    ver.add_argument("--samples", type=int, default=100000)
    ver.add_argument("--seed", type=int, default=1)
    ver.set_defaults(func=_cmd_verify_gue)

    ana = sub.add_parser("analytic", help="evaluate threshold laws for the given inputs")
    ana.add_argument("--lam", type=float, help="squared-statistic value for the CDF laws")
    ana.add_argument("--q", type=float, help="target probability")
    ana.add_argument("--r", type=int, help="Schmidt rank")
    ana.add_argument("--d", type=int, help="total dimension d1*d2")
    ana.add_argument("--k", type=int, help="number of other histories")
    ana.add_argument("--p", type=float, help="percentile for the asymptotic threshold")
    ana.add_argument("--n-p", type=int, help="number of binary partitions")
    ana.add_argument("--epsilon", type=float, help="threshold for the reprojection floor")
    ana.add_argument("--support-norm-sq", type=float, default=1.0)
    ana.add_argument("--regime", choices=stats.ABSOLUTE_REGIMES, default="order-one-norms")
    ana.set_defaults(func=_cmd_analytic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
