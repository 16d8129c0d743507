"""File formats and run configuration.

Cohort CSV: subject_id, region (1-indexed), declared covariates, t1,
e1 in {0 censored, 1 illness, 2 death}, t2 (empty unless e1=1), e2 in
{0 censored, 1 death}. Times are decimal years.

Config: a YAML document with a required ``version`` field. Unknown keys are
errors everywhere, so a config replays exactly or not at all. All randomness
flows from the single top-level seed.

Every writer formats floats with shortest round-trip ``repr`` and unix line
endings, so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError, DataError
from .gmrf import N_TRANSITIONS, TRANSITIONS
from .likelihood import EVENT_ILLNESS, Subject
from .prior import PriorConfig
from .simulate import CovariateGen, default_covariates

_FLOAT = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# Cohort CSV
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovariateSchema:
    name: str
    kind: str = "continuous"  # "binary" | "continuous"
    center: bool = False

    def __post_init__(self):
        if self.kind not in ("binary", "continuous"):
            raise ConfigError(f"covariate {self.name}: type must be binary or continuous")
        if self.kind == "binary" and self.center:
            raise ConfigError(f"covariate {self.name}: binary covariates are not centered")


def write_cohort_csv(path, subjects: list[Subject], covariate_names: list[str]) -> None:
    lines = ["subject_id,region," + ",".join(covariate_names) + ",t1,e1,t2,e2"]
    for i, s in enumerate(subjects):
        covs = ",".join(_fmt(v) for v in s.covariates)
        if s.e1 == EVENT_ILLNESS:
            tail = f"{_fmt(s.t2)},{s.e2}"
        else:
            tail = ","
        lines.append(f"{i + 1},{s.region + 1},{covs},{_fmt(s.t1)},{s.e1},{tail}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_cohort_csv(path, schema: list[CovariateSchema]) -> tuple[list[Subject], dict[str, float]]:
    """Parse a cohort file, apply centering, and return (subjects, centers).

    ``centers`` maps each centered covariate to the subtracted cohort mean.
    Parse errors carry 1-based row numbers.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty cohort file")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["subject_id", "region"] + [s.name for s in schema] + ["t1", "e1", "t2", "e2"]
    if header != expected:
        raise DataError(f"{path}: header {header} != expected {expected}")
    n_cov = len(schema)
    raw = []
    for row_no, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(expected):
            raise DataError(f"{path} row {row_no}: expected {len(expected)} fields, got {len(parts)}")
        try:
            region = int(parts[1]) - 1
            covs = [float(p) for p in parts[2 : 2 + n_cov]]
            t1 = float(parts[2 + n_cov])
            e1 = int(parts[3 + n_cov])
            t2 = float(parts[4 + n_cov]) if parts[4 + n_cov] else None
            e2 = int(parts[5 + n_cov]) if parts[5 + n_cov] else None
        except ValueError as exc:
            raise DataError(f"{path} row {row_no}: {exc}") from None
        if region < 0:
            raise DataError(f"{path} row {row_no}: region index must be >= 1")
        raw.append((row_no, region, covs, t1, e1, t2, e2))
    x = np.array([r[2] for r in raw], dtype=float)
    centers: dict[str, float] = {}
    for idx, s in enumerate(schema):
        if s.center:
            centers[s.name] = float(x[:, idx].mean())
            x[:, idx] -= centers[s.name]
    subjects = []
    for i, (row_no, region, _, t1, e1, t2, e2) in enumerate(raw):
        try:
            subjects.append(
                Subject(region=region, covariates=x[i], t1=t1, e1=e1, t2=t2, e2=e2)
            )
        except DataError as exc:
            raise DataError(f"{path} row {row_no}: {exc}") from None
    return subjects, centers


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathsConfig:
    cohort: str | None
    adjacency: str
    n_regions: int
    out_dir: str


@dataclass(frozen=True, eq=False)
class TruthConfig:
    shapes: tuple[float, float, float]
    intercepts: tuple[float, float, float]
    coefficients: np.ndarray  # (3, L)
    gamma: float
    tau: tuple[float, float, float]
    rho: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class SimulateConfig:
    n_subjects: int
    horizon: float
    dropout_rate: float | None
    generators: tuple[CovariateGen, ...]
    truth: TruthConfig


@dataclass(frozen=True, eq=False)
class OutcomeRequest:
    label: str
    values: dict[str, float]


@dataclass(frozen=True, eq=False)
class OutcomesConfig:
    measures: tuple[str, ...]
    times: tuple[float, ...]
    s: float
    t12: float | None
    max_draws: int | None
    profiles: tuple[OutcomeRequest, ...]


@dataclass(frozen=True, eq=False)
class RunConfig:
    version: int
    seed: int
    paths: PathsConfig
    covariates: tuple[CovariateSchema, ...]
    prior: PriorConfig
    n_chains: int
    n_warmup: int
    n_samples: int
    thin: int
    target_accept: float
    simulate: SimulateConfig | None
    outcomes: OutcomesConfig | None


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _get(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


def load_config(path) -> RunConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    _require_keys(
        doc,
        {"version", "seed", "paths", "covariates", "prior", "sampler", "simulate", "outcomes"},
        str(path),
    )
    if _get(doc, "version", str(path)) != 1:
        raise ConfigError(f"{path}: unsupported config version {doc['version']!r}")
    seed = int(_get(doc, "seed", str(path)))

    p = _get(doc, "paths", str(path))
    _require_keys(p, {"cohort", "adjacency", "n_regions", "out_dir"}, "paths")
    paths = PathsConfig(
        cohort=p.get("cohort"),
        adjacency=str(_get(p, "adjacency", "paths")),
        n_regions=int(_get(p, "n_regions", "paths")),
        out_dir=str(_get(p, "out_dir", "paths")),
    )

    schema = []
    for i, c in enumerate(doc.get("covariates", [])):
        _require_keys(c, {"name", "type", "center"}, f"covariates[{i}]")
        schema.append(
            CovariateSchema(
                name=str(_get(c, "name", f"covariates[{i}]")),
                kind=str(c.get("type", "continuous")),
                center=bool(c.get("center", False)),
            )
        )
    names = [s.name for s in schema]
    if len(set(names)) != len(names):
        raise ConfigError("covariate names must be unique")

    pr = doc.get("prior", {}) or {}
    _require_keys(
        pr,
        {"beta_precision", "wishart_df", "wishart_scale", "shape_prior", "shape_sd", "pc_rate"},
        "prior",
    )
    scale = pr.get("wishart_scale", "identity")
    if isinstance(scale, str):
        if scale != "identity":
            raise ConfigError("prior.wishart_scale must be 'identity' or a 3x3 list")
        scale = np.eye(N_TRANSITIONS)
    else:
        scale = np.asarray(scale, dtype=float)
    prior = PriorConfig(
        beta_precision=float(pr.get("beta_precision", 0.001)),
        wishart_df=float(pr.get("wishart_df", 7)),
        wishart_scale=scale,
        shape_prior=str(pr.get("shape_prior", "lognormal")),
        shape_sd=float(pr.get("shape_sd", 1.0)),
        pc_rate=float(pr.get("pc_rate", 5.0)),
    )

    sa = doc.get("sampler", {}) or {}
    _require_keys(sa, {"chains", "warmup", "samples", "thin", "target_accept"}, "sampler")

    sim = None
    if doc.get("simulate") is not None:
        sm = doc["simulate"]
        _require_keys(
            sm,
            {"n_subjects", "horizon", "dropout_rate", "covariates", "truth"},
            "simulate",
        )
        gens = []
        for i, gspec in enumerate(sm.get("covariates", [])):
            _require_keys(gspec, {"name", "kind", "p", "mean", "sd", "lower"}, f"simulate.covariates[{i}]")
            gens.append(CovariateGen(**gspec))
        if not gens and schema:
            gens = [g for g in default_covariates() if g.name in names]
        if [g.name for g in gens] != names:
            raise ConfigError("simulate.covariates must match the declared covariate schema")
        truth = _parse_truth(sm.get("truth", {}) or {}, len(names))
        sim = SimulateConfig(
            n_subjects=int(_get(sm, "n_subjects", "simulate")),
            horizon=float(sm.get("horizon", 9.0)),
            dropout_rate=(None if sm.get("dropout_rate") is None else float(sm["dropout_rate"])),
            generators=tuple(gens),
            truth=truth,
        )

    outc = None
    if doc.get("outcomes") is not None:
        oc = doc["outcomes"]
        _require_keys(oc, {"measures", "times", "s", "t12", "max_draws", "profiles"}, "outcomes")
        profiles = []
        for i, prof in enumerate(oc.get("profiles", [])):
            _require_keys(prof, {"label", "values"}, f"outcomes.profiles[{i}]")
            values = dict(_get(prof, "values", f"outcomes.profiles[{i}]"))
            unknown = set(values) - set(names)
            if unknown:
                raise ConfigError(f"outcomes.profiles[{i}]: unknown covariates {sorted(unknown)}")
            profiles.append(OutcomeRequest(label=str(prof.get("label", f"profile{i}")), values=values))
        outc = OutcomesConfig(
            measures=tuple(str(m) for m in _get(oc, "measures", "outcomes")),
            times=tuple(float(t) for t in _get(oc, "times", "outcomes")),
            s=float(oc.get("s", 0.0)),
            t12=(None if oc.get("t12") is None else float(oc["t12"])),
            max_draws=(None if oc.get("max_draws") is None else int(oc["max_draws"])),
            profiles=tuple(profiles),
        )

    return RunConfig(
        version=1,
        seed=seed,
        paths=paths,
        covariates=tuple(schema),
        prior=prior,
        n_chains=int(sa.get("chains", 4)),
        n_warmup=int(sa.get("warmup", 2000)),
        n_samples=int(sa.get("samples", 2000)),
        thin=int(sa.get("thin", 1)),
        target_accept=float(sa.get("target_accept", 0.35)),
        simulate=sim,
        outcomes=outc,
    )


def _parse_truth(section: dict, n_cov: int) -> TruthConfig:
    _require_keys(section, {"transitions", "gamma", "tau", "rho"}, "simulate.truth")
    trans = section.get("transitions", {}) or {}
    _require_keys(trans, set(TRANSITIONS), "simulate.truth.transitions")
    shapes, intercepts, coefs = [], [], []
    for name in TRANSITIONS:
        t = trans.get(name, {}) or {}
        _require_keys(t, {"shape", "intercept", "coefficients"}, f"truth.transitions.{name}")
        shapes.append(float(t.get("shape", 1.0)))
        intercepts.append(float(t.get("intercept", math.log(0.2))))
        c = list(t.get("coefficients", [0.0] * n_cov))
        if len(c) != n_cov:
            raise ConfigError(
                f"truth.transitions.{name}: expected {n_cov} coefficients, got {len(c)}"
            )
        coefs.append([float(v) for v in c])
    tau = tuple(float(v) for v in section.get("tau", (4.0, 4.0, 4.0)))
    rho = tuple(float(v) for v in section.get("rho", (0.0, 0.0, 0.0)))
    if len(tau) != 3 or len(rho) != 3:
        raise ConfigError("truth.tau and truth.rho must have three entries")
    return TruthConfig(
        shapes=tuple(shapes),
        intercepts=tuple(intercepts),
        coefficients=np.array(coefs, dtype=float),
        gamma=float(section.get("gamma", 0.5)),
        tau=tau,
        rho=rho,
    )


# ---------------------------------------------------------------------------
# Draws / summary / outcomes artifacts
# ---------------------------------------------------------------------------


def write_draws_csv(path, draws) -> None:
    """Long format: chain, iteration, parameter, value."""
    series = draws.scalar_series()
    with open(path, "w") as fh:
        fh.write("chain,iteration,parameter,value\n")
        for name, x in series.items():
            for chain in range(x.shape[0]):
                for i, it in enumerate(draws.iterations):
                    fh.write(f"{chain},{int(it)},{name},{_fmt(x[chain, i])}\n")


def read_draws_csv(path, covariate_names: list[str]):
    """Rebuild PosteriorDraws from the long CSV written by ``write_draws_csv``."""
    from .mcmc import PosteriorDraws

    table: dict[str, dict[int, list[float]]] = {}
    iterations: list[int] = []
    seen_iter = set()
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "chain,iteration,parameter,value":
            raise DataError(f"{path}: unexpected draws header {header!r}")
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 4:
                raise DataError(f"{path} row {line_no}: expected 4 fields")
            chain, it, name, value = int(parts[0]), int(parts[1]), parts[2], float(parts[3])
            table.setdefault(name, {}).setdefault(chain, []).append(value)
            if name == "gamma" and chain == 0 and it not in seen_iter:
                seen_iter.add(it)
                iterations.append(it)
    if "gamma" not in table:
        raise DataError(f"{path}: no gamma draws found")
    chains = sorted(table["gamma"])
    n_chains, n_draws = len(chains), len(table["gamma"][chains[0]])

    def grab(name):
        if name not in table:
            raise DataError(f"{path}: missing parameter {name}")
        return np.array([table[name][c] for c in chains])

    L = len(covariate_names)
    region_names = sorted(
        (n for n in table if n.startswith("b_12_r")), key=lambda n: int(n.split("_r")[1])
    )
    K = len(region_names)
    alpha = np.stack([grab(f"alpha_{t}") for t in TRANSITIONS], axis=-1)
    beta0 = np.stack([grab(f"beta0_{t}") for t in TRANSITIONS], axis=-1)
    if L:
        beta = np.stack(
            [
                np.stack([grab(f"beta_{t}_{c}") for c in covariate_names], axis=-1)
                for t in TRANSITIONS
            ],
            axis=2,
        )
    else:
        beta = np.zeros((n_chains, n_draws, N_TRANSITIONS, 0))
    b = np.stack(
        [
            np.stack([grab(f"b_{t}_r{k + 1}") for k in range(K)], axis=-1)
            for t in TRANSITIONS
        ],
        axis=-1,
    )
    tau = np.stack([grab(f"tau_{t}") for t in TRANSITIONS], axis=-1)
    rho = np.stack(
        [grab(f"rho_{TRANSITIONS[i]}_{TRANSITIONS[j]}") for i, j in ((0, 1), (0, 2), (1, 2))],
        axis=-1,
    )
    return PosteriorDraws(
        alpha=alpha,
        beta0=beta0,
        beta=beta,
        b=b,
        gamma=grab("gamma"),
        tau=tau,
        rho=rho,
        log_post=np.zeros((n_chains, n_draws)),
        iterations=np.array(iterations, dtype=int),
        covariate_names=tuple(covariate_names),
    )


def write_summary_json(path, diag_table, draws, centers: dict[str, float], extra: dict) -> None:
    params = {}
    for rec in diag_table.to_dict("records"):
        params[rec["parameter"]] = {
            "mean": float(rec["mean"]),
            "sd": float(rec["sd"]),
            "q025": float(rec["q025"]),
            "q975": float(rec["q975"]),
            "rhat": None if np.isnan(rec["rhat"]) else float(rec["rhat"]),
            "ess_bulk": None if np.isnan(rec["ess_bulk"]) else float(rec["ess_bulk"]),
        }
    b_mean = draws.b.reshape(-1, *draws.b.shape[-2:]).mean(axis=0)
    doc = {
        "version": 1,
        "seed": draws.seed,
        "covariates": list(draws.covariate_names),
        "centering": {k: float(v) for k, v in sorted(centers.items())},
        "parameters": params,
        "region_effect_means": {
            name: b_mean[:, j].tolist() for j, name in enumerate(TRANSITIONS)
        },
        "acceptance": {k: [float(x) for x in v] for k, v in sorted(draws.acceptance.items())},
    }
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_outcomes_csv(path, frame) -> None:
    cols = ["region", "profile", "time", "measure", "mean", "sd", "q025", "q975"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in frame[cols].itertuples(index=False):
            fh.write(
                f"{int(rec.region)},{rec.profile},{_fmt(rec.time)},{rec.measure},"
                f"{_fmt(rec.mean)},{_fmt(rec.sd)},{_fmt(rec.q025)},{_fmt(rec.q975)}\n"
            )


def write_truth_json(path, truth: dict) -> None:
    Path(path).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
