"""Command-line pipeline: simulate | fit | outcomes | diagnose.

Every command is a pure function of (config file, input files, seed); reruns
write byte-identical outputs. Exit codes: 0 ok, 1 usage/config, 2 data,
3 numerical failure, 4 convergence warning (split R-hat above 1.1).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as smio
from .exceptions import ConfigError, DataError, NumericalError
from .gmrf import BetweenCov, LerouxMix
from .graph import load_adjacency
from .hazard import TransitionParams
from .likelihood import CohortData
from .mcmc import SamplerConfig, diagnostics, run
from .outcomes import OutcomeGrid, Profile, posterior_summary
from .simulate import SimConfig, simulate_cohort

RHAT_WARN = 1.1
_R_CONDITIONED = ("p22", "p23")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="spatialmsm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("simulate", "generate a synthetic cohort and its truth record"),
        ("fit", "sample the posterior for a cohort"),
        ("outcomes", "evaluate posterior outcome tables from fitted draws"),
        ("diagnose", "report convergence diagnostics for fitted draws"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the YAML run config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--threads", type=int, default=1, help="parallel chains for fit")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def _prepare(args):
    config = smio.load_config(args.config)
    if args.seed is not None:
        config = smio.RunConfig(**{**config.__dict__, "seed": int(args.seed)})
    out_dir = Path(args.out if args.out is not None else config.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir


def _check_outputs(paths, force: bool):
    clashes = [str(p) for p in paths if Path(p).exists()]
    if clashes and not force:
        raise ConfigError(f"refusing to overwrite {clashes}; pass --force")


def _load_graph(config):
    path = Path(config.paths.adjacency)
    if not path.exists():
        raise ConfigError(f"adjacency file not found: {path}")
    return load_adjacency(path.read_text(), config.paths.n_regions)


def cmd_simulate(args) -> int:
    config, out_dir = _prepare(args)
    if config.simulate is None:
        raise ConfigError("config has no simulate section")
    graph = _load_graph(config)
    outputs = [out_dir / "cohort.csv", out_dir / "truth.json"]
    _check_outputs(outputs, args.force)
    t = config.simulate.truth
    params = tuple(
        TransitionParams(shape=t.shapes[j], intercept=t.intercepts[j], coefficients=t.coefficients[j])
        for j in range(3)
    )
    sim = SimConfig(
        graph=graph,
        params=params,
        n_subjects=config.simulate.n_subjects,
        seed=config.seed,
        covariates=config.simulate.generators,
        mix=LerouxMix(gamma=t.gamma),
        between=BetweenCov(precisions=np.array(t.tau), correlations=np.array(t.rho)),
        horizon=config.simulate.horizon,
        dropout_rate=config.simulate.dropout_rate,
    )
    subjects, truth = simulate_cohort(sim)
    smio.write_cohort_csv(outputs[0], subjects, [g.name for g in config.simulate.generators])
    smio.write_truth_json(outputs[1], truth)
    print(f"wrote {outputs[0]} ({len(subjects)} subjects) and {outputs[1]}")
    return 0


def _load_cohort(config):
    if config.paths.cohort is None:
        raise ConfigError("config paths.cohort is not set")
    path = Path(config.paths.cohort)
    if not path.exists():
        raise ConfigError(f"cohort file not found: {path}")
    return smio.read_cohort_csv(path, list(config.covariates))


def cmd_fit(args) -> int:
    config, out_dir = _prepare(args)
    graph = _load_graph(config)
    subjects, centers = _load_cohort(config)
    outputs = [out_dir / "draws.csv", out_dir / "summary.json", out_dir / "diagnostics.csv"]
    _check_outputs(outputs, args.force)
    sampler = SamplerConfig(
        n_chains=config.n_chains,
        n_warmup=config.n_warmup,
        n_samples=config.n_samples,
        seed=config.seed,
        target_accept=config.target_accept,
        thin=config.thin,
    )
    names = tuple(s.name for s in config.covariates)
    draws = run(
        CohortData.from_subjects(subjects),
        graph,
        config.prior,
        sampler,
        covariate_names=names,
        threads=args.threads,
    )
    table = diagnostics(draws)
    smio.write_draws_csv(outputs[0], draws)
    rhat_max = float(np.nanmax(table["rhat"].to_numpy())) if config.n_chains > 1 else None
    smio.write_summary_json(
        outputs[1],
        table,
        draws,
        centers,
        {"n_regions": graph.n_regions, "rhat_max": rhat_max},
    )
    _write_diagnostics_csv(outputs[2], table)
    print(f"wrote {outputs[0]}, {outputs[1]}, {outputs[2]}")
    if rhat_max is not None and rhat_max > RHAT_WARN:
        print(f"warning: split R-hat {rhat_max:.3f} exceeds {RHAT_WARN}", file=sys.stderr)
        return 4
    return 0


def _write_diagnostics_csv(path, table) -> None:
    cols = ["parameter", "mean", "sd", "q025", "q975", "rhat", "ess_bulk", "degenerate"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in table[cols].itertuples(index=False):
            vals = [rec.parameter]
            for v in (rec.mean, rec.sd, rec.q025, rec.q975, rec.rhat, rec.ess_bulk):
                vals.append("" if np.isnan(v) else repr(float(v)))
            vals.append(str(bool(rec.degenerate)))
            fh.write(",".join(vals) + "\n")


def cmd_outcomes(args) -> int:
    import pandas as pd
    import json

    config, out_dir = _prepare(args)
    if config.outcomes is None:
        raise ConfigError("config has no outcomes section")
    draws_path = out_dir / "draws.csv"
    summary_path = out_dir / "summary.json"
    for p in (draws_path, summary_path):
        if not p.exists():
            raise ConfigError(f"fit artifact not found: {p} (run fit first)")
    out_path = out_dir / "outcomes.csv"
    _check_outputs([out_path], args.force)
    names = [s.name for s in config.covariates]
    draws = smio.read_draws_csv(draws_path, names)
    centers = json.loads(summary_path.read_text()).get("centering", {})
    oc = config.outcomes
    for measure in oc.measures:
        if measure in _R_CONDITIONED and oc.t12 is None:
            raise ConfigError(f"measure {measure} needs outcomes.t12")
    frames = []
    for req in oc.profiles:
        x = np.array([req.values.get(n, 0.0) - centers.get(n, 0.0) for n in names])
        profile = Profile(covariates=x, region=None, label=req.label)
        for measure in oc.measures:
            grid = OutcomeGrid(
                measure=measure,
                times=np.array(oc.times),
                s=oc.s,
                t12=oc.t12 if measure in _R_CONDITIONED else None,
            )
            frames.append(posterior_summary(draws, profile, grid, max_draws=oc.max_draws))
    smio.write_outcomes_csv(out_path, pd.concat(frames, ignore_index=True))
    print(f"wrote {out_path}")
    return 0


def cmd_diagnose(args) -> int:
    config, out_dir = _prepare(args)
    draws_path = out_dir / "draws.csv"
    if not draws_path.exists():
        raise ConfigError(f"fit artifact not found: {draws_path} (run fit first)")
    names = [s.name for s in config.covariates]
    draws = smio.read_draws_csv(draws_path, names)
    table = diagnostics(draws)
    with np.printoptions(precision=4):
        print(table.to_string(index=False))
    rhat = table["rhat"].to_numpy()
    if np.isfinite(rhat).any() and np.nanmax(rhat) > RHAT_WARN:
        print(f"warning: split R-hat {np.nanmax(rhat):.3f} exceeds {RHAT_WARN}", file=sys.stderr)
        return 4
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "simulate": cmd_simulate,
            "fit": cmd_fit,
            "outcomes": cmd_outcomes,
            "diagnose": cmd_diagnose,
        }[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
