"""Command-line entry point: scan, theory, validate, analyze, synth.

Exit codes: 0 success, 1 usage, 2 I/O or format, 3 threshold failure.
Every run writes a JSON manifest next to its outputs; ``--from-manifest``
replays it.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .knn import FORMATS, DatasetFormatError, TopKResult, exhaustive_knn, load_dataset, read_topk_csv, write_topk_csv
from .lid import NeighborProfile
from .model import AsymptoticDeltaModel, LidIndex, RankPair, asymptotic_cdf, asymptotic_pdf
from .pipeline import (
    DEFAULT_LID0,
    DeltaSampleSet,
    analyze,
    convergence_study,
    measure_array,
    measure_all,
    normalize_all,
    report_stem,
    theory_markers,
    write_reports,
)
from .stats_core import DegenerateSampleError, DomainError, ks_statistic
from .synthetic import make_power_law, parse_law, sample_order_stats

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_THRESHOLD = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ThresholdFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    argv: list
    seed: int
    options: dict = field(default_factory=dict)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nnperturb", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--from-manifest", metavar="PATH", help="replay the run recorded in a manifest")
    p.add_argument("--replay-out", metavar="DIR", help="output directory for --from-manifest replays")
    sub = p.add_subparsers(dest="subcommand")

    def common(sp, ranks=True):
        if ranks:
            sp.add_argument("--kt", type=int, required=True, help="target rank k_t")
            sp.add_argument("--kx", type=int, required=True, help="reference rank k_x")
        sp.add_argument("--seed", type=int, help="RNG seed (generated and recorded when omitted)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("scan", help="exact k-NN of queries against a dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--format", choices=FORMATS, required=True)
    sp.add_argument("--query-format", choices=FORMATS, help="defaults to --format")
    sp.add_argument("--kx", type=int, required=True, help="neighbors per query")
    sp.add_argument("--exclude-self", action="store_true", help="skip neighbors at distance 0")
    common(sp, ranks=False)

    sp = sub.add_parser("theory", help="tabulate the limit cdf/pdf and markers")
    sp.add_argument("--lid", type=float, nargs="+", required=True, help="one or more LID values")
    sp.add_argument("--grid", type=int, default=4001, help="grid points on [0, 1]")
    common(sp)

    sp = sub.add_parser("validate", help="synthetic convergence study and round trip")
    sp.add_argument("--law", default="power:10", help="power:<ell> or chi:<dim>")
    sp.add_argument("--n-sweep", type=_int_list, default=[100, 1000, 10000, 100000])
    sp.add_argument("--replicates", type=int, default=20000)
    sp.add_argument("--theory-lid", type=float, help="LID of the reference model (default: the law's index)")
    sp.add_argument("--lid0", type=float, default=DEFAULT_LID0)
    sp.add_argument("--rt-queries", type=int, default=20000, help="queries in the round trip")
    sp.add_argument("--rt-kx", type=int, default=1000, help="k_x of the round trip (k_t = 1)")
    sp.add_argument("--kt", type=int, default=2)
    sp.add_argument("--kx", type=int, default=4)
    common(sp, ranks=False)

    sp = sub.add_parser("analyze", help="compare measured profiles against the model")
    sp.add_argument("--profiles", required=True, help="CSV written by scan or synth")
    sp.add_argument("--dataset", help="dataset id used in report names (default: profile file stem)")
    sp.add_argument("--lid0", type=float, default=DEFAULT_LID0)
    sp.add_argument("--bin-width", type=float, default=5.0)
    sp.add_argument("--max-ks", type=float, help="fail (exit 3) if the normalized KS exceeds this")
    common(sp)

    sp = sub.add_parser("synth", help="write simulated neighbor profiles in scan's CSV layout")
    sp.add_argument("--law", default="power:10")
    sp.add_argument("--n", type=int, default=10**6, help="simulated dataset size")
    sp.add_argument("--kx", type=int, required=True)
    sp.add_argument("--count", type=int, default=1000, help="number of queries")
    common(sp, ranks=False)
    return p


def _ranks(args) -> RankPair:
    try:
        r = RankPair(args.kt, args.kx)
        r.require_toward()
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    return r


def _write_manifest(cfg: RunConfig, out: str, name: str, timings: dict, tallies: dict, outputs: list, extra=None):
    path = os.path.join(out, f"{name}_manifest.json")
    doc = {
        "tool": "nnperturb",
        "version": __version__,
        "config": asdict(cfg),
        "timings": timings,
        "tallies": tallies,
        "outputs": [os.path.basename(o) for o in outputs],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
    return path


def cmd_scan(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    data = load_dataset(args.dataset, args.format)
    queries = load_dataset(args.queries, args.query_format or args.format)
    if data.dim != queries.dim:
        raise DatasetFormatError(f"dimension mismatch: {args.dataset} has {data.dim}, {args.queries} has {queries.dim}")
    if not 1 <= args.kx <= data.count:
        raise UsageError(f"need 1 <= k <= n, got k={args.kx}, n={data.count}")
    t_load = time.perf_counter() - t0
    name = f"{os.path.splitext(os.path.basename(args.dataset))[0]}_k{args.kx}"
    out = os.path.join(args.out, f"{name}_topk.csv")
    rows = write_topk_csv(
        exhaustive_knn(data, queries, args.kx, exclude_self=args.exclude_self, threads=args.threads), out
    )
    timings = {"load_s": t_load, "scan_s": time.perf_counter() - t0 - t_load}
    tallies = {"points": data.count, "queries": queries.count, "rows": rows}
    _write_manifest(cfg, args.out, name, timings, tallies, [out])
    print(f"wrote {rows} rows to {out}")
    return EXIT_OK


def theory_rows(ranks: RankPair, lids, grid_size: int):
    grid = np.linspace(0.0, 1.0, grid_size)
    for ell in lids:
        model = AsymptoticDeltaModel(ranks, LidIndex(ell))
        cdf, pdf = asymptotic_cdf(model, grid), asymptotic_pdf(model, grid)
        for d, c, f in zip(grid, cdf, pdf):
            yield (repr(float(ell)), "curve", repr(float(d)), repr(float(c)), repr(float(f)), "")
        for name, m in theory_markers(model).items():
            v = m["value"]
            c = asymptotic_cdf(model, v) if math.isfinite(v) else float("nan")
            f = asymptotic_pdf(model, v) if math.isfinite(v) else float("nan")
            yield (repr(float(ell)), name, repr(float(v)), repr(float(c)), repr(float(f)), m["method"])


THEORY_HEADER = ("lid", "kind", "delta", "cdf", "pdf", "method")


def cmd_theory(args, cfg: RunConfig) -> int:
    ranks = _ranks(args)
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    try:
        lids = [LidIndex(v).ell for v in args.lid]
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    t0 = time.perf_counter()
    name = f"theory_kt{ranks.k_t}_kx{ranks.k_x}"
    out = os.path.join(args.out, f"{name}.csv")
    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(THEORY_HEADER)
        w.writerows(theory_rows(ranks, lids, args.grid))
    _write_manifest(cfg, args.out, name, {"total_s": time.perf_counter() - t0}, {"blocks": len(lids)}, [out])
    print(f"wrote {len(lids)} curve blocks to {out}")
    return EXIT_OK


def synthetic_profiles(law, n: int, k_x: int, count: int, rng, chunk: int = 10000):
    """Simulated sorted distance rows, produced in chunks to bound memory."""
    rng = np.random.default_rng(rng)
    for start in range(0, count, chunk):
        yield start, sample_order_stats(law, n, k_x, rng, min(chunk, count - start))


def round_trip(law, k_x: int, count: int, lid0: float, seed) -> tuple[float, dict]:
    """Power-law profiles with the law's index through measurement, normalization and KS."""
    ranks = RankPair(1, k_x)
    parts = []
    for start, rows in synthetic_profiles(law, max(10 * k_x, 10**6), k_x, count, seed):
        parts.append(measure_array(rows, ranks, np.arange(start, start + rows.shape[0])))
    samples = DeltaSampleSet.concat(parts)
    model = AsymptoticDeltaModel(ranks, LidIndex(lid0))
    ks = ks_statistic(normalize_all(samples, lid0), lambda z: asymptotic_cdf(model, z)).statistic
    return ks, samples.tallies()


def cmd_validate(args, cfg: RunConfig) -> int:
    try:
        law = parse_law(args.law)
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    ranks = _ranks(args)
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    try:
        table = convergence_study(law, ranks, args.n_sweep, args.replicates, np.random.default_rng(seeds[0]),
                                  theory_lid=args.theory_lid)
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    t_conv = time.perf_counter() - t0

    criteria = []
    if law.power_index is not None:
        thr = max(0.01, 2.5 / math.sqrt(args.replicates))
        worst = max(table.ks)
        criteria.append({"name": "convergence_floor", "value": worst, "threshold": thr, "passed": worst < thr})
    else:
        criteria.append({"name": "convergence_slope", "value": table.slope, "threshold": 0.0,
                         "passed": table.slope < 0})
        drop = table.ks[0] - table.ks[-1]
        criteria.append({"name": "convergence_drop", "value": drop, "threshold": 0.005, "passed": drop > 0.005})

    rt_law = make_power_law(law.rv_index)
    rt_ks, rt_tallies = round_trip(rt_law, args.rt_kx, args.rt_queries, args.lid0, seeds[1])
    criteria.append({"name": "round_trip", "value": rt_ks, "threshold": 0.02, "passed": rt_ks < 0.02})

    name = f"validate_{law.spec.replace(':', '')}_kt{ranks.k_t}_kx{ranks.k_x}"
    out = os.path.join(args.out, f"{name}.json")
    report = {"convergence": table.to_dict(), "criteria": criteria, "round_trip": {"ks": rt_ks, **rt_tallies}}
    with open(out, "w") as f:
        json.dump(report, f, indent=1)
    timings = {"convergence_s": t_conv, "total_s": time.perf_counter() - t0}
    _write_manifest(cfg, args.out, name, timings, rt_tallies, [out])
    for c in criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.5g} (threshold {c['threshold']:.5g})")
    failed = [c["name"] for c in criteria if not c["passed"]]
    if failed:
        raise ThresholdFailure(", ".join(failed))
    return EXIT_OK


def load_profiles(path) -> list[NeighborProfile]:
    out = []
    for res in read_topk_csv(path):
        try:
            out.append(NeighborProfile(res.query_id, res.distances))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: query {res.query_id!r}: {exc}")
    return out


def cmd_analyze(args, cfg: RunConfig) -> int:
    ranks = _ranks(args)
    try:
        lid0 = LidIndex(args.lid0).ell
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    t0 = time.perf_counter()
    profiles = load_profiles(args.profiles)
    if not profiles:
        raise DatasetFormatError(f"{args.profiles}: no profiles")
    dataset = args.dataset or os.path.splitext(os.path.basename(args.profiles))[0]
    samples = measure_all(profiles, ranks)
    t_measure = time.perf_counter() - t0
    try:
        result = analyze(samples, ranks, lid0, dataset=dataset, bin_width=args.bin_width)
    except DegenerateSampleError as exc:
        raise DatasetFormatError(f"{args.profiles}: {exc} (tallies {samples.tallies()})")
    outputs = write_reports(result, args.out, dataset, ranks, lid0)
    timings = {"measure_s": t_measure, "total_s": time.perf_counter() - t0}
    _write_manifest(cfg, args.out, report_stem(dataset, ranks, lid0), timings, result.tallies, outputs)
    ks = result.comparison.ks
    print(f"KS {ks:.5f} over {result.comparison.config['n_samples']} samples; tallies {result.tallies}")
    if args.max_ks is not None and not ks < args.max_ks:
        raise ThresholdFailure(f"max_ks: {ks:.5g} >= {args.max_ks:g}")
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    try:
        law = parse_law(args.law)
    except (ValueError, DomainError) as exc:
        raise UsageError(str(exc))
    if not 2 <= args.kx <= args.n or args.count < 1:
        raise UsageError("need 2 <= kx <= n and count >= 1")
    t0 = time.perf_counter()
    name = f"synth_{law.spec.replace(':', '')}_kx{args.kx}"
    out = os.path.join(args.out, f"{name}_topk.csv")

    def results():
        ids = np.arange(args.kx, dtype=np.int64)
        for start, rows in synthetic_profiles(law, args.n, args.kx, args.count, cfg.seed):
            for r, row in enumerate(rows):
                yield TopKResult(start + r, ids, row)

    rows = write_topk_csv(results(), out)
    _write_manifest(cfg, args.out, name, {"total_s": time.perf_counter() - t0}, {"rows": rows}, [out])
    print(f"wrote {rows} rows to {out}")
    return EXIT_OK


COMMANDS = {"scan": cmd_scan, "theory": cmd_theory, "validate": cmd_validate, "analyze": cmd_analyze,
            "synth": cmd_synth}


def _with_seed(argv: list, seed: int) -> list:
    """Subcommand argv with the seed made explicit."""
    if "--seed" in argv:
        return list(argv)
    return list(argv) + ["--seed", str(seed)]


def _replace_out(argv: list, out: str) -> list:
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = out
    else:
        argv += ["--out", out]
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.from_manifest:
        try:
            with open(args.from_manifest) as f:
                recorded = json.load(f)["config"]["argv"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"nnperturb: cannot read manifest {args.from_manifest}: {exc}", file=sys.stderr)
            return EXIT_IO
        if args.replay_out:
            recorded = _replace_out(recorded, args.replay_out)
        return main(recorded)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    sub_argv = argv[argv.index(args.subcommand):]
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().generate_state(1)[0])
    cfg = RunConfig(args.subcommand, _with_seed(sub_argv, args.seed), args.seed,
                    {k: v for k, v in vars(args).items() if k not in ("from_manifest", "replay_out")})
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.subcommand](args, cfg)
    except UsageError as exc:
        print(f"nnperturb {args.subcommand}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ThresholdFailure as exc:
        print(f"nnperturb {args.subcommand}: threshold failure: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (OSError, DatasetFormatError) as exc:
        print(f"nnperturb {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
