"""Command-line interface.

Commands: ``slhc``, ``estimate``, ``simulate frequency``, ``simulate
compare``, ``structures count|list``.  Every command is a pure function
of its inputs, flags and seed; reruns with the same seed produce
byte-identical outputs.  The environment variable DENDRO_MLE_THREADS
caps worker processes (0 = auto).

Exit codes: 0 success, 1 malformed input, 2 degenerate structure (slhc),
3 not enough Monte-Carlo samples, 64 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from . import io
from .core import SizeLimitError, count_structures, decompose, enumerate_structures
from .estimator import EstimationError, mle_estimate
from .experiments import ExperimentSpec, run_comparison_study, run_frequency_study
from .likelihood import LikelihoodConfig
from .mh import MHConfig
from .noise import NoiseSpec
from .rng import substream
from .samplers import InsufficientSamplesError, SamplerBudget
from .trees import slhc

EX_OK = 0
EX_BAD_INPUT = 1
EX_DEGENERATE = 2
EX_NO_SAMPLES = 3
EX_USAGE = 64

DEFAULT_SEED = 42


@dataclass(frozen=True)
class GlobalConfig:
    """Run-wide knobs shared by every command."""

    seed: int
    output_dir: Path | None
    log_level: str


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _add_mh_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--burn-in", type=int, default=1000, help="burn-in transitions")
    p.add_argument("--thinning", type=int, default=3, help="record every k-th state")
    p.add_argument("--n-theta", type=int, default=3000, help="recorded chain states")
    p.add_argument("--n-hypotheses", type=int, default=20, help="structures kept after pruning")
    p.add_argument("--proposal-sigma", type=float, default=None,
                   help="proposal std (default: the noise std)")


def _add_likelihood_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-omega", type=int, default=100, help="height samples per structure")
    p.add_argument("--proposals-per-cone", type=int, default=1000,
                   help="box proposals per fiber cone")
    p.add_argument("--min-fiber-samples", type=int, default=500,
                   help="pooled acceptance floor per fiber")


def _mh_config(args) -> MHConfig:
    return MHConfig(
        burn_in=args.burn_in,
        thinning=args.thinning,
        n_theta=args.n_theta,
        n_hypotheses=args.n_hypotheses,
        proposal_sigma=args.proposal_sigma,
    )


def _likelihood_config(args) -> LikelihoodConfig:
    return LikelihoodConfig(
        n_omega=args.n_omega,
        fiber_budget=SamplerBudget(
            proposals_per_cone=args.proposals_per_cone,
            min_total_accepted=args.min_fiber_samples,
        ),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dendro-mle", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p_slhc = sub.add_parser("slhc", help="single-linkage dendrogram of a dissimilarity CSV")
    p_slhc.add_argument("--input", required=True)
    p_slhc.add_argument("--out", default=None, help="output JSON path (default: stdout)")

    p_est = sub.add_parser("estimate", help="maximum-likelihood structure estimate")
    p_est.add_argument("--input", required=True)
    p_est.add_argument("--noise-std", type=float, required=True,
                       help="measurement standard deviation")
    p_est.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_est.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    _add_mh_flags(p_est)
    _add_likelihood_flags(p_est)

    p_sim = sub.add_parser("simulate", help="simulation studies")
    sim_sub = p_sim.add_subparsers(dest="study", required=True)

    p_freq = sim_sub.add_parser("frequency", help="appearance-frequency and rank study")
    p_freq.add_argument("--n", type=int, default=5)
    p_freq.add_argument("--noise-std", type=float, required=True)
    p_freq.add_argument("--measurements", type=int, default=200)
    p_freq.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_freq.add_argument("--out", required=True, help="output directory")
    p_freq.add_argument("--structure-index", type=int, default=None)
    _add_mh_flags(p_freq)

    p_cmp = sim_sub.add_parser("compare", help="MLE vs single-linkage success rates")
    p_cmp.add_argument("--n", type=int, default=5)
    p_cmp.add_argument("--noise-levels", default="0.05,0.1,0.2,0.3",
                       help="comma-separated noise standard deviations")
    p_cmp.add_argument("--heights", type=int, default=8)
    p_cmp.add_argument("--per-height", type=int, default=100)
    p_cmp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.add_argument("--structure-index", type=int, default=None)
    p_cmp.add_argument("--smoke", action="store_true",
                       help="tiny run: 2 heights x 20 measurements at std 0.3")
    _add_mh_flags(p_cmp)
    _add_likelihood_flags(p_cmp)

    p_str = sub.add_parser("structures", help="enumeration of merge hierarchies")
    str_sub = p_str.add_subparsers(dest="action", required=True)
    p_cnt = str_sub.add_parser("count", help="number of binary hierarchies")
    p_cnt.add_argument("--n", type=int, required=True)
    p_lst = str_sub.add_parser("list", help="canonical enumeration as JSON")
    p_lst.add_argument("--n", type=int, required=True)

    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n")


def _cmd_slhc(args) -> int:
    try:
        d = io.read_dissimilarity_csv(args.input)
    except (ValueError, OSError) as exc:
        print(f"dendro-mle: {exc}", file=sys.stderr)
        return EX_BAD_INPUT
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dendro = decompose(slhc(d))
    payload = io.dendrogram_to_dict(dendro)
    degenerate = dendro.is_degenerate
    if degenerate:
        payload["warning"] = "degenerate structure: simultaneous merges"
    _emit(io.dump_json(payload), args.out)
    return EX_DEGENERATE if degenerate else EX_OK


def _cmd_estimate(args) -> int:
    try:
        x = io.read_dissimilarity_csv(args.input)
    except (ValueError, OSError) as exc:
        print(f"dendro-mle: {exc}", file=sys.stderr)
        return EX_BAD_INPUT
    noise = NoiseSpec(args.noise_std**2)
    rng = substream(args.seed, "estimate")
    try:
        report = mle_estimate(x, noise, _mh_config(args), _likelihood_config(args), rng)
    except (InsufficientSamplesError, EstimationError) as exc:
        print(f"dendro-mle: estimation failed: {exc}", file=sys.stderr)
        return EX_NO_SAMPLES
    _emit(io.dump_json(io.report_to_dict(report)), args.out)
    return EX_OK


def _cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.study == "frequency":
        spec = ExperimentSpec(
            n=args.n,
            noise_std=args.noise_std,
            n_measurements=args.measurements,
            n_heights=1,
            mh_cfg=_mh_config(args),
            lik_cfg=LikelihoodConfig(),
            seed=args.seed,
        )
        try:
            hist, ranks = run_frequency_study(spec, structure_index=args.structure_index)
        except InsufficientSamplesError as exc:
            print(f"dendro-mle: simulation failed: {exc}", file=sys.stderr)
            return EX_NO_SAMPLES
        io.write_histogram_csv(out_dir / "histogram.csv", hist.bin_edges, hist.counts)
        io.write_ranks_csv(
            out_dir / "ranks.csv", ranks.rank_counts, ranks.n_measurements,
            count_structures(args.n),
        )
        return EX_OK
    # compare
    heights, per_height = args.heights, args.per_height
    levels = [float(s) for s in args.noise_levels.split(",") if s.strip()]
    if args.smoke:
        heights, per_height, levels = 2, 20, [0.3]
    spec = ExperimentSpec(
        n=args.n,
        noise_std=levels[0],
        n_measurements=per_height,
        n_heights=heights,
        mh_cfg=_mh_config(args),
        lik_cfg=_likelihood_config(args),
        seed=args.seed,
    )
    try:
        rows = run_comparison_study(spec, levels, structure_index=args.structure_index)
    except InsufficientSamplesError as exc:
        print(f"dendro-mle: simulation failed: {exc}", file=sys.stderr)
        return EX_NO_SAMPLES
    io.write_compare_csv(out_dir / "compare.csv", rows)
    return EX_OK


def _cmd_structures(args) -> int:
    try:
        if args.action == "count":
            sys.stdout.write(f"{count_structures(args.n)}\n")
        else:
            payload = [io.structure_to_lists(t) for t in enumerate_structures(args.n)]
            sys.stdout.write(io.dump_json(payload) + "\n")
    except (SizeLimitError, ValueError) as exc:
        print(f"dendro-mle: {exc}", file=sys.stderr)
        return EX_BAD_INPUT
    return EX_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    if args.command == "slhc":
        return _cmd_slhc(args)
    if args.command == "estimate":
        return _cmd_estimate(args)
    if args.command == "simulate":
        return _cmd_simulate(args)
    return _cmd_structures(args)


if __name__ == "__main__":
    sys.exit(main())
