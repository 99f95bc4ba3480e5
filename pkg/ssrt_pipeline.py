"""
SSRT pipeline command line.

Usage:
    python ssrt_pipeline.py simulate --go 450 50 100 --stop 220 30 50 --seed 1 --out trials.csv
    python ssrt_pipeline.py indices --input trials.csv
    python ssrt_pipeline.py fit-ibpa --input trials.csv --cluster A --seed 3 --out posterior.json
    python ssrt_pipeline.py pipeline --subjects 5 --seed 7 --out report.json

Every JSON result is wrapped in an envelope carrying the schema version, the
software version, the seed and the run configuration. Errors go to stderr as
`{"error": {...}}` with exit status 1; usage errors exit with status 2.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from logging_config import get_logger, log_run_summary
from ssrt_mixture import io
from ssrt_mixture.analysis import colonius_cdf, colonius_mixture_cdf, individual_comparison, weight_sweep
from ssrt_mixture.bayesfit import fit_all_clusters, fit_ibpa
from ssrt_mixture.errors import SsrtError
from ssrt_mixture.exgauss import exg_cdf
from ssrt_mixture.indices import ssrt_weighted
from ssrt_mixture.mixture import make_mixture, mixture_cdf
from ssrt_mixture.racesim import (
    cluster_mean_ssd,
    extract_views,
    meets_type_b_minimum,
    partition_clusters,
    simulate_cohort,
    simulate_sst,
)
from ssrt_mixture.sotest import ALTERNATIVES, compare_overall, ks_two_sample, pspdt
from ssrt_mixture.tsbpa import cohort_mean_weight, fit_stage2, overall_distributions, triples_from_cluster_fits
from ssrt_mixture.types import (
    DesignConfig,
    ExGaussianParams,
    IbpaConfig,
    PspdtConfig,
    Stage2Config,
    SubjectReport,
    SweepConfig,
)
from ssrt_mixture.utils import resolve_threads, spawn_seeds

logger = get_logger(__name__)


def _params(values: Optional[Sequence[float]]) -> Optional[ExGaussianParams]:
    if values is None:
        return None
    mu, sigma, tau = values
    return ExGaussianParams(mu=mu, sigma=sigma, tau=tau)


def _int_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def _run_config(args: argparse.Namespace) -> Dict[str, Any]:
    """Echo of the flags that determine the result (threads and output paths do not)."""
    skip = {"func", "threads", "progress", "out", "dump_chains", "summary"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args: argparse.Namespace, result: Any, path: Optional[str] = None) -> None:
    doc = io.envelope(result, config=_run_config(args), seed=getattr(args, "seed", None))
    target = path if path is not None else getattr(args, "out", None)
    if target:
        io.write_json(doc, target)
        logger.info(f"Wrote {target}")
    else:
        sys.stdout.write(io.dumps_envelope(doc))


def _design(args: argparse.Namespace) -> DesignConfig:
    return DesignConfig(
        n_trials=args.trials,
        stop_fraction=args.stop_fraction,
        initial_ssd_ms=args.initial_ssd,
        step_ms=args.step,
        placement=args.placement,
        tracking=not args.constant_ssd,
    )


def _ibpa_config(args: argparse.Namespace, threads: int) -> IbpaConfig:
    return IbpaConfig(
        n_chains=args.chains,
        n_iter=args.iter,
        n_burn=args.burn,
        seed=args.seed,
        truncate=tuple(args.truncate) if args.truncate else None,
        integral=args.integral,
        threads=threads,
        progress=args.progress,
    )


def _pspdt_config(args: argparse.Namespace, threads: int) -> PspdtConfig:
    return PspdtConfig(
        k=args.k,
        n=args.n,
        m=args.m,
        alpha=args.alpha,
        alternative=args.alternative,
        critical=args.critical,
        sampling=args.sampling,
        n_null=args.n_null,
        seed=args.seed,
        threads=threads,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> None:
    design = _design(args)
    go, stop, stop_b = _params(args.go), _params(args.stop), _params(args.stop_b)
    threads = resolve_threads(args.threads)

    if args.subjects is None:
        sessions = [simulate_sst(go, stop, design, args.seed, stop_b=stop_b)]
        io.write_trials_csv(sessions[0], args.out)
        names = [str(args.out)]
    else:
        sessions = simulate_cohort(go, stop, args.subjects, design, args.seed, stop_b=stop_b, threads=threads)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        names = []
        for i, d in enumerate(sessions):
            path = out_dir / f"subject_{i + 1:03d}.csv"
            io.write_trials_csv(d, path)
            names.append(str(path))

    rows = []
    for name, d in zip(names, sessions):
        p = partition_clusters(d)
        rows.append({
            "file": name,
            "n_trials": d.meta.n_trials,
            "n_stop": len(d.stop_trials()),
            "inhibition_rate": d.inhibition_rate(),
            "w_a": p.w_a,
        })
    _emit(args, {"sessions": rows}, path=args.summary)


def cmd_partition(args: argparse.Namespace) -> None:
    d = io.read_trials_csv(args.input)
    p = partition_clusters(d)
    ssd_a, ssd_b = cluster_mean_ssd(d, p)
    result = p.model_dump()
    result.update({"mean_ssd_a_ms": ssd_a, "mean_ssd_b_ms": ssd_b})
    _emit(args, result)


def cmd_indices(args: argparse.Namespace) -> None:
    d = io.read_trials_csv(args.input)
    _emit(args, ssrt_weighted(d, go_source=args.go_source))


def _ibpa_payload(fit) -> Dict[str, Any]:
    return {
        "summary": fit.summary,
        "rhat": fit.chains.rhat,
        "acceptance_rates": fit.chains.acceptance_rates,
        "warnings": fit.warnings,
    }


def cmd_fit_ibpa(args: argparse.Namespace) -> None:
    d = io.read_trials_csv(args.input)
    view = extract_views(d).by_cluster(args.cluster)
    fit = fit_ibpa(view, _ibpa_config(args, resolve_threads(args.threads)), label=f"type-{args.cluster}")
    if args.dump_chains:
        io.write_chains_csv(fit.chains, args.dump_chains)
    _emit(args, _ibpa_payload(fit))


def _stage2_config(args: argparse.Namespace, threads: int) -> Stage2Config:
    return Stage2Config(
        n_chains=args.chains,
        n_iter=args.iter,
        n_burn=args.burn,
        seed=args.seed,
        fix_slopes_zero=args.fix_slopes_zero,
        threads=threads,
        progress=args.progress,
    )


def _stage2_payload(post) -> Dict[str, Any]:
    return post.model_dump(exclude={"draws"})


def cmd_fit_tsbpa(args: argparse.Namespace) -> None:
    triples = io.read_triples_csv(args.triples, cluster=args.cluster)
    post = fit_stage2(triples, _stage2_config(args, resolve_threads(args.threads)))
    _emit(args, _stage2_payload(post))


def cmd_test_ks(args: argparse.Namespace) -> None:
    x = io.read_sample_csv(args.x)
    y = io.read_sample_csv(args.y)
    alternatives = ALTERNATIVES if args.alternative == "all" else (args.alternative,)
    _emit(args, {alt: ks_two_sample(x, y, alt) for alt in alternatives})


def cmd_pspdt(args: argparse.Namespace) -> None:
    dist1 = io.read_distribution(args.dist1)
    dist2 = io.read_distribution(args.dist2)
    _emit(args, pspdt(dist1, dist2, _pspdt_config(args, resolve_threads(args.threads))))


def cmd_colonius(args: argparse.Namespace) -> None:
    t = np.linspace(args.grid[0], args.grid[1], int(args.grid[2]))
    go, stop = _params(args.go), _params(args.stop)
    if args.go_b is None:
        retrieved = colonius_cdf(go, stop, args.ssd, t)
        reference = exg_cdf(stop, t)
    else:
        go_b, stop_b = _params(args.go_b), _params(args.stop_b)
        retrieved = colonius_mixture_cdf(go, stop, args.ssd, go_b, stop_b, args.ssd_b, args.w_a, t)
        reference = mixture_cdf(make_mixture(args.w_a, stop, stop_b), t)
    _emit(args, {
        "t_ms": t,
        "colonius_cdf": retrieved,
        "model_cdf": reference,
        "max_abs_diff": float(np.max(np.abs(np.asarray(retrieved) - np.asarray(reference)))),
    })


def cmd_sweep(args: argparse.Namespace) -> None:
    cohort = io.read_cohort_csv(args.cohort)
    pspdt_config = _pspdt_config(args, resolve_threads(args.threads)) if args.with_pspdt else None
    sweep = weight_sweep(cohort, SweepConfig(grid_points=args.grid_points, pspdt=pspdt_config))
    frame = pd.DataFrame({
        "w": sweep.grid,
        "delta_mean": sweep.delta_mean,
        "delta_var": sweep.delta_var,
        "pspdt_stat": sweep.pspdt_stat if sweep.pspdt_stat is not None else [None] * len(sweep.grid),
        "cutoff": [sweep.pspdt_cutoff] * len(sweep.grid),
    })
    frame.to_csv(args.out, index=False, float_format="%.6f", lineterminator="\n")
    _emit(args, {
        "mean_coefficients": sweep.mean_coefficients,
        "var_coefficients": sweep.var_coefficients,
        "argmax_var_w": sweep.argmax_var_w,
        "n_subjects": len(cohort),
        "csv": str(args.out),
    }, path=args.summary)


def _subject_report(name: str, d, args: argparse.Namespace, seed: np.random.SeedSequence, threads: int):
    fit_seed, ks_seed = seed.spawn(2)
    p = partition_clusters(d)
    config = _ibpa_config(args, threads).model_copy(update={"seed": _int_seed(fit_seed)})
    fits = fit_all_clusters(d, p, config)
    mixture = fits.mixture()
    theta_s = fits.theta_stop("S")
    row = individual_comparison(theta_s, mixture, args.n, args.m, seed=ks_seed, label=name)
    warnings = [w for fit in fits.fits.values() for w in fit.warnings]
    report = SubjectReport(
        subject=name,
        w_a=p.w_a,
        n_stop_a=len(p.stop_a),
        n_stop_b=len(p.stop_b),
        theta_s=theta_s,
        theta_a=mixture.theta_a,
        theta_b=mixture.theta_b,
        single_mean_ms=theta_s.mean,
        mixture_mean_ms=mixture.w_a * mixture.theta_a.mean + mixture.w_b * mixture.theta_b.mean,
        ks=row,
        warnings=warnings,
    )
    logger.info(
        f"{name}: w_a {p.w_a:.3f}, D {report.d:.4f}, p {row.two_sided.p_value:.4f} / "
        f"{row.greater.p_value:.4f} / {row.less.p_value:.4f}"
    )
    return report, fits


def cmd_pipeline(args: argparse.Namespace) -> None:
    threads = resolve_threads(args.threads)
    root = np.random.SeedSequence(args.seed)
    sim_seed, fit_seed = root.spawn(2)

    if args.input:
        sessions = [(Path(f).stem, io.read_trials_csv(f)) for f in args.input]
    else:
        go, stop, stop_b = _params(args.go), _params(args.stop), _params(args.stop_b)
        n = args.subjects or 1
        cohort = simulate_cohort(go, stop, n, _design(args), _int_seed(sim_seed), stop_b=stop_b, threads=threads)
        sessions = [(f"subject_{i + 1:03d}", d) for i, d in enumerate(cohort)]

    reports, all_fits, names, excluded = [], [], [], []
    for (name, d), child in zip(sessions, spawn_seeds(fit_seed, len(sessions))):
        if args.min_type_b is not None:
            p = partition_clusters(d)
            if not meets_type_b_minimum(p, args.min_type_b):
                logger.warning(f"{name}: {len(p.stop_b)} type-B stop trials, below {args.min_type_b}; skipped")
                excluded.append({"subject": name, "n_stop_b": len(p.stop_b)})
                continue
        report, fits = _subject_report(name, d, args, child, threads)
        reports.append(report)
        all_fits.append(fits)
        names.append(name)

    result: Dict[str, Any] = {"subjects": reports, "excluded": excluded}
    if args.stage2:
        stage2_config = Stage2Config(
            n_chains=args.chains,
            n_iter=args.stage2_iter,
            n_burn=args.stage2_burn,
            seed=args.seed,
            threads=threads,
        )
        posts = {
            c: fit_stage2(triples_from_cluster_fits(all_fits, c, names), stage2_config)
            for c in ("S", "A", "B")
        }
        w_bar = cohort_mean_weight(all_fits)
        overall = overall_distributions(posts["S"], posts["A"], posts["B"], w_bar)
        comparisons = compare_overall(overall, _pspdt_config(args, threads))
        result["stage2"] = {c: _stage2_payload(post) for c, post in posts.items()}
        result["overall"] = overall
        result["comparisons"] = comparisons
    _emit(args, result)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_design_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--go', nargs=3, type=float, default=[450.0, 50.0, 100.0], metavar=('MU', 'SIGMA', 'TAU'),
                        help='Go-process ExG parameters in ms')
    parser.add_argument('--stop', nargs=3, type=float, default=[220.0, 30.0, 50.0], metavar=('MU', 'SIGMA', 'TAU'),
                        help='SSRT ExG parameters in ms')
    parser.add_argument('--stop-b', nargs=3, type=float, default=None, metavar=('MU', 'SIGMA', 'TAU'),
                        help='SSRT of stop trials that follow a stop trial (default: --stop)')
    parser.add_argument('--trials', type=int, default=96, help='Trials per session')
    parser.add_argument('--stop-fraction', type=float, default=0.25, help='Fraction of stop trials')
    parser.add_argument('--initial-ssd', type=float, default=250.0, help='Initial SSD in ms')
    parser.add_argument('--step', type=float, default=50.0, help='SSD staircase step in ms')
    parser.add_argument('--placement', choices=['block', 'bernoulli'], default='block',
                        help='Stop-trial placement within 24-trial blocks or per trial')
    parser.add_argument('--constant-ssd', action='store_true', help='Disable SSD tracking')


def _add_mcmc_args(parser: argparse.ArgumentParser, n_iter: int, n_burn: int) -> None:
    parser.add_argument('--chains', type=int, default=3, help='Number of chains')
    parser.add_argument('--iter', type=int, default=n_iter, help='Iterations per chain, burn-in included')
    parser.add_argument('--burn', type=int, default=n_burn, help='Burn-in iterations')
    parser.add_argument('--progress', action='store_true', help='Show progress bars')


def _add_ibpa_args(parser: argparse.ArgumentParser) -> None:
    _add_mcmc_args(parser, 20000, 5000)
    parser.add_argument('--truncate', nargs=2, type=float, default=None, metavar=('LO', 'HI'),
                        help='Truncate go and stop densities to [LO, HI] ms')
    parser.add_argument('--integral', choices=['closed-form', 'quadrature'], default='closed-form',
                        help='Evaluation of the inhibit probability')


def _add_pspdt_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--k', type=int, default=44, help='Number of sample pairs')
    parser.add_argument('--n', type=int, default=96, help='Size of samples from the first distribution')
    parser.add_argument('--m', type=int, default=96, help='Size of samples from the second distribution')
    parser.add_argument('--alpha', type=float, default=0.05, help='Significance level')
    parser.add_argument('--alternative', choices=list(ALTERNATIVES), default='two-sided')
    parser.add_argument('--critical', choices=['standard', 'printed'], default='standard',
                        help='Critical coefficient: from alpha, or the fixed sqrt(-ln(1/2)/2)')
    parser.add_argument('--sampling', choices=['random', 'quantile'], default='random')
    parser.add_argument('--n-null', type=int, default=200, help='Null replicates for the Monte-Carlo p-value')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ssrt_pipeline', description='Stop-signal reaction time pipeline.')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='Random seed')
    common.add_argument('--threads', type=int, default=None,
                        help='Worker threads for chains and replicates (default: SSRT_THREADS or 1)')
    common.add_argument('--out', default=None, help='Output path (default: stdout)')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', parents=[common], help='Simulate stop-signal task sessions')
    _add_design_args(p)
    p.add_argument('--subjects', type=int, default=None, help='Simulate a cohort; --out is then a directory')
    p.add_argument('--summary', default=None, help='Write the JSON session summary here (default: stdout)')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('partition', parents=[common], help='Type-A / type-B partition of a session')
    p.add_argument('--input', required=True, help='Trial CSV')
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser('indices', parents=[common], help='Crude, Logan and weighted SSRT')
    p.add_argument('--input', required=True, help='Trial CSV')
    p.add_argument('--go-source', choices=['cluster', 'all'], default='cluster',
                   help='Go RTs for the cluster Logan indices')
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser('fit-ibpa', parents=[common], help='Individual Bayesian fit of one cluster view')
    p.add_argument('--input', required=True, help='Trial CSV')
    p.add_argument('--cluster', choices=['S', 'A', 'B'], default='S')
    p.add_argument('--dump-chains', default=None, help='Write every draw to this CSV')
    _add_ibpa_args(p)
    p.set_defaults(func=cmd_fit_ibpa)

    p = sub.add_parser('fit-tsbpa', parents=[common], help='Stage-2 pooling of subject SSRT triples')
    p.add_argument('--triples', required=True, help='CSV with columns subject,mu,sigma,tau')
    p.add_argument('--cluster', choices=['S', 'A', 'B'], default='S')
    p.add_argument('--fix-slopes-zero', action='store_true', help='Hold the regression slopes at zero')
    _add_mcmc_args(p, 100000, 5000)
    p.set_defaults(func=cmd_fit_tsbpa)

    p = sub.add_parser('test-ks', parents=[common], help='Two-sample KS test of two sample CSVs')
    p.add_argument('--x', required=True, help='First sample CSV (column `value`)')
    p.add_argument('--y', required=True, help='Second sample CSV (column `value`)')
    p.add_argument('--alternative', choices=['all'] + list(ALTERNATIVES), default='all')
    p.set_defaults(func=cmd_test_ks)

    p = sub.add_parser('pspdt', parents=[common], help='Paired samples parametric distribution test')
    p.add_argument('--dist1', required=True, help='JSON distribution (ExG or mixture)')
    p.add_argument('--dist2', required=True, help='JSON distribution (ExG or mixture)')
    _add_pspdt_args(p)
    p.set_defaults(func=cmd_pspdt)

    p = sub.add_parser('colonius', parents=[common], help='Colonius SSRT cdf retrieval on a grid')
    p.add_argument('--go', nargs=3, type=float, required=True, metavar=('MU', 'SIGMA', 'TAU'))
    p.add_argument('--stop', nargs=3, type=float, required=True, metavar=('MU', 'SIGMA', 'TAU'))
    p.add_argument('--ssd', type=float, required=True, help='Stop-signal delay in ms (type-A mean SSD for mixtures)')
    p.add_argument('--go-b', nargs=3, type=float, default=None, metavar=('MU', 'SIGMA', 'TAU'))
    p.add_argument('--stop-b', nargs=3, type=float, default=None, metavar=('MU', 'SIGMA', 'TAU'))
    p.add_argument('--ssd-b', type=float, default=None, help='Type-B mean SSD in ms')
    p.add_argument('--w-a', type=float, default=None, help='Type-A weight of the mixture form')
    p.add_argument('--grid', nargs=3, type=float, default=[1.0, 1000.0, 200], metavar=('START', 'STOP', 'NUM'))
    p.set_defaults(func=cmd_colonius)

    p = sub.add_parser('sweep', parents=[common], help='Mixture-vs-single disparity over the type-A weight')
    p.add_argument('--cohort', required=True, help='CSV with columns subject,cluster,mu,sigma,tau')
    p.add_argument('--grid-points', type=int, default=101)
    p.add_argument('--with-pspdt', action='store_true', help='Run a PSPDT at every grid weight')
    p.add_argument('--summary', default=None, help='Write the JSON coefficient summary here (default: stdout)')
    _add_pspdt_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('pipeline', parents=[common], help='Simulate or read, fit S/A/B and compare per subject')
    p.add_argument('--input', nargs='+', default=None, help='Trial CSVs; simulate when omitted')
    p.add_argument('--subjects', type=int, default=None, help='Subjects to simulate')
    p.add_argument('--stage2', action='store_true', help='Pool the cohort and compare overall distributions')
    p.add_argument('--stage2-iter', type=int, default=100000)
    p.add_argument('--stage2-burn', type=int, default=5000)
    p.add_argument('--min-type-b', type=int, default=None, metavar='N',
                   help='Skip subjects with fewer than N type-B stop trials (default: off)')
    _add_design_args(p)
    _add_ibpa_args(p)
    _add_pspdt_args(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _validate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if args.command in ('simulate', 'sweep') and not args.out:
        parser.error(f"{args.command} requires --out")
    if args.command == 'colonius':
        mixture_flags = [args.go_b, args.stop_b, args.ssd_b, args.w_a]
        if any(v is not None for v in mixture_flags) and any(v is None for v in mixture_flags):
            parser.error("the mixture form needs --go-b, --stop-b, --ssd-b and --w-a together")


def _error_body(exc: BaseException) -> Dict[str, Any]:
    if isinstance(exc, ValidationError):
        message = "; ".join(e["msg"] for e in exc.errors())
    else:
        message = str(exc)
    return {"error": {"type": type(exc).__name__, "message": message, "line": getattr(exc, "line", None)}}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)

    log_run_summary(args.command, getattr(args, 'seed', None))
    try:
        args.func(args)
    except (SsrtError, ValidationError, ValueError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        sys.stderr.write(json.dumps(_error_body(exc)) + "\n")
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
