"""Simulation and benchmarking harness.

Provides CSV ingestion with row filtering, the permuted-block null-feature
protocol, synthetic generators, three experiment runners (regression
selection, Ising graph recovery, criterion-vs-evidence equivalence), and
deterministic report emission.  Identical (config, seed) pairs produce
byte-identical serialized reports regardless of the worker count: each
replicate derives its own generator from (seed, task_index) and results are
merged in task order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    EmptyAfterFiltering,
    NumericalError,
    ParseError,
    ValidationError,
)
from .families import Dataset, Family, SupportSet
from .fitting import FitOptions, refit_candidates
from .lasso import PathOptions, candidate_supports, lasso_path
from .criteria import (
    cross_validate,
    ebic_score,
    select_best,
    stability_selection,
)
from .evidence import (
    GaussianPrior,
    equivalence_report,
    laplace_log_marginal,
    quadrature_log_marginal,
)
from .ising import (
    GraphEstimate,
    IsingParameters,
    combine_graph,
    gibbs_sample,
    graph_metrics,
    neighborhood_select,
    node_regression,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "CsvLoadResult",
    "load_csv",
    "make_permuted_design",
    "simulate_glm",
    "run_regression_experiment",
    "run_consistency_sweep",
    "run_ising_experiment",
    "run_equivalence_experiment",
    "emit_report",
    "report_to_json_bytes",
]

REPORT_SCHEMA = "ebic-report/1"

_KINDS = ("regression_permuted", "consistency_sweep", "ising_recovery", "equivalence")
_METHODS = ("ebic", "bic", "cv", "stability")
_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run.

    ``p_or_blocks`` is the covariate count for synthetic regression and
    equivalence runs, and the number of permuted null blocks for
    data-backed regression runs.
    """

    kind: str
    n: int
    p_or_blocks: int
    gamma_list: tuple[float, ...] = (1.0,)
    q_cap: int = 10
    replicates: int = 1
    seed: int = 0
    method_list: tuple[str, ...] = ("ebic",)
    family: str = "logistic"
    # synthetic signal
    true_support_size: int = 3
    signal_magnitude: float = 2.0
    # data-backed protocol
    data_path: str | None = None
    response_column: str | None = None
    # path and fitting knobs
    n_rho: int = 100
    rho_min_ratio: float = 1e-3
    with_intercept: bool = False
    # baseline selectors
    cv_folds: int = 10
    stability_subsamples: int = 50
    stability_frac: float = 0.5
    stability_q: int = 8
    stability_threshold: float = 0.6
    # equivalence extras
    prior_sigma: float = 5.0
    quad_max_dim: int = 0
    # consistency sweep
    n_list: tuple[int, ...] = ()
    kappa: float = 0.6
    # ising extras
    burn_in: int = 1000
    thin: int = 5
    rules: tuple[str, ...] = ("and", "or")
    # execution
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValidationError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.replicates < 1:
            raise ValidationError("replicates must be positive")
        if self.n < 1:
            raise ValidationError("n must be positive")
        bad = [m for m in self.method_list if m not in _METHODS]
        if bad:
            raise ValidationError(f"unknown methods {bad}; choose from {_METHODS}")
        if "ebic" in self.method_list and not self.gamma_list:
            raise ValidationError("gamma_list must be nonempty when method 'ebic' is used")
        if any(g < 0 for g in self.gamma_list):
            raise ValidationError("gamma values must be nonnegative")
        for name in ("gamma_list", "method_list", "n_list", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_bytes()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:  # pragma: no cover - py310 path
                import tomli as tomllib
            obj = tomllib.loads(text.decode("utf-8"))
        else:
            obj = json.loads(text.decode("utf-8"))
        if not isinstance(obj, dict):
            raise ValidationError("config file must contain a single table/object")
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass
class ExperimentReport:
    """Aggregated results plus per-replicate details.

    ``timing_s`` is informational and excluded from serialized output so
    reports stay byte-deterministic.
    """

    kind: str
    settings: list[dict]
    rows: list[dict]
    meta: dict
    timing_s: float = 0.0
    schema: str = REPORT_SCHEMA


@dataclass(frozen=True)
class CsvLoadResult:
    """Loaded dataset, count of dropped incomplete rows, and column names."""

    dataset: Dataset
    dropped_count: int
    feature_names: tuple[str, ...]


def load_csv(path: str | Path, response_column: str, family: Family | str) -> CsvLoadResult:
    """Read a numeric CSV with a header row.

    Rows containing any missing cell (empty or NA-like token) are dropped
    and counted; a non-numeric cell raises ParseError naming the cell.
    """
    fam = Family.from_name(family) if isinstance(family, str) else family
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such data file: {path}")
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyAfterFiltering(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if response_column not in header:
            raise ValidationError(
                f"response column {response_column!r} not in header {header}"
            )
        y_col = header.index(response_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != y_col)
        xs: list[list[float]] = []
        ys: list[float] = []
        dropped = 0
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_number} has {len(row)} cells, expected {len(header)}"
                )
            if any(cell.strip().lower() in _MISSING_TOKENS for cell in row):
                dropped += 1
                continue
            parsed = []
            for col, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_number}, column {col!r}: "
                        f"cannot parse {cell.strip()!r} as a number"
                    ) from None
            ys.append(parsed.pop(y_col))
            xs.append(parsed)
        if not xs:
            raise EmptyAfterFiltering(f"{path}: no complete rows remain")
    dataset = Dataset(x=np.asarray(xs), y=np.asarray(ys), family=fam)
    return CsvLoadResult(dataset=dataset, dropped_count=dropped, feature_names=feature_names)


def make_permuted_design(data: Dataset, k_blocks: int, seed: int = 0) -> Dataset:
    """Append k whole-row-permuted copies of the covariate block.

    Each block applies one independent row permutation to all original
    columns at once, preserving within-block covariance while breaking any
    relation to the response.  Output width is p * (1 + k_blocks).
    """
    if k_blocks < 0:
        raise ValidationError("k_blocks must be nonnegative")
    rng = np.random.default_rng(seed)
    blocks = [data.x]
    for _ in range(k_blocks):
        blocks.append(data.x[rng.permutation(data.n)])
    return Dataset(x=np.hstack(blocks), y=data.y, family=data.family)


def simulate_glm(
    family: Family,
    n: int,
    p: int,
    support_size: int,
    magnitude: float,
    rng: np.random.Generator,
) -> tuple[Dataset, SupportSet, np.ndarray]:
    """Standard-normal design with a sparse alternating-sign coefficient vector."""
    if support_size > p:
        raise ValidationError(f"support_size {support_size} exceeds p={p}")
    x = rng.standard_normal((n, p))
    idx = np.sort(rng.choice(p, size=support_size, replace=False))
    coeffs = np.zeros(p)
    for order, j in enumerate(idx):
        coeffs[j] = magnitude * (1.0 if order % 2 == 0 else -1.0)
    theta = x @ coeffs
    if family is Family.LOGISTIC:
        y = (rng.random(n) < expit(theta)).astype(float)
    elif family is Family.POISSON:
        y = rng.poisson(np.exp(np.clip(theta, None, 10.0))).astype(float)
    else:
        y = theta + rng.standard_normal(n)
    return Dataset(x=x, y=y, family=family), SupportSet.from_iterable(idx), coeffs


def _support_metrics(selected: SupportSet, truth: SupportSet) -> dict:
    sel = set(selected.indices)
    tru = set(truth.indices)
    psr = len(sel & tru) / len(tru) if tru else 0.0
    fdr = len(sel - tru) / len(sel) if sel else 0.0
    return {
        "psr": float(psr),
        "fdr": float(fdr),
        "exact": bool(sel == tru),
        "size": int(len(sel)),
    }


def _expanded_methods(config: ExperimentConfig) -> list[tuple[str, dict]]:
    """Method rows: ebic expands over gamma_list, others stand alone."""
    out: list[tuple[str, dict]] = []
    for method in config.method_list:
        if method == "ebic":
            for gamma in config.gamma_list:
                out.append((f"ebic(gamma={gamma:g})", {"kind": "ebic", "gamma": gamma}))
        elif method == "bic":
            out.append(("bic", {"kind": "ebic", "gamma": 0.0}))
        else:
            out.append((method, {"kind": method}))
    return out


def _select_all_methods(
    data: Dataset, config: ExperimentConfig, seed_pair: list[int]
) -> dict[str, SupportSet]:
    """Run the shared candidate pipeline once, then every requested selector."""
    popts = PathOptions(
        n_rho=config.n_rho,
        rho_min_ratio=config.rho_min_ratio,
        with_intercept=config.with_intercept,
    )
    fopts = FitOptions(with_intercept=config.with_intercept)
    path = lasso_path(data, popts)
    candidates = candidate_supports(path, q_max=config.q_cap)
    if not candidates:
        candidates = [SupportSet.empty()]
    fits = refit_candidates(data, candidates, fopts)
    selections: dict[str, SupportSet] = {}
    for label, spec in _expanded_methods(config):
        if spec["kind"] == "ebic":
            scores = [
                ebic_score(f, data.n, data.p, spec["gamma"]) for f in fits if f.converged
            ]
            if not scores:
                raise NumericalError("every candidate fit failed")
            selections[label] = select_best(scores)
        elif spec["kind"] == "cv":
            selections[label] = cross_validate(
                data, candidates, k=config.cv_folds, seed=seed_pair + [1], fit_opts=fopts
            )
        else:
            selections[label] = stability_selection(
                data,
                expected_q=config.stability_q,
                n_subsamples=config.stability_subsamples,
                subsample_frac=config.stability_frac,
                threshold=config.stability_threshold,
                seed=seed_pair + [2],
                path_opts=popts,
            )
    return selections


def _config_echo(config: ExperimentConfig) -> dict:
    # max_workers is an execution knob; reports must be byte identical
    # across worker counts, so it stays out of the echoed config.
    out = config.to_dict()
    del out["max_workers"]
    return out


def _run_tasks(fn: Callable[[int], dict], count: int, max_workers: int) -> list[dict]:
    if max_workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, range(count)))


def _aggregate_rows(
    settings: list[dict],
    methods: list[str],
    per_task: list[dict],
    metric_keys: Sequence[str],
    setting_of_task: Callable[[int], int],
) -> list[dict]:
    """Mean metrics per (setting, method); failed replicates counted aside."""
    rows: list[dict] = []
    for si, setting in enumerate(settings):
        task_ids = [t for t in range(len(per_task)) if setting_of_task(t) == si]
        for method in methods:
            values: dict[str, list[float]] = {key: [] for key in metric_keys}
            reps: list[dict] = []
            failed = 0
            for t in task_ids:
                result = per_task[t]
                if result.get("error") is not None:
                    failed += 1
                    reps.append({"error": result["error"]})
                    continue
                detail = result["methods"][method]
                reps.append(detail)
                for key in metric_keys:
                    if key in detail and detail[key] is not None:
                        values[key].append(float(detail[key]))
            metrics = {}
            for key in metric_keys:
                metrics[f"{key}_mean"] = (
                    float(np.mean(values[key])) if values[key] else None
                )
            metrics["n_failed"] = failed
            metrics["n_ok"] = len(task_ids) - failed
            rows.append(
                {
                    "method": method,
                    "setting": setting,
                    "metrics": metrics,
                    "replicates": reps,
                }
            )
    return rows


def _regression_truth_task(
    config: ExperimentConfig, base: Dataset | None, task_seed: list[int]
) -> tuple[Dataset, SupportSet]:
    """One replicate's dataset and true support for regression kinds."""
    rng = np.random.default_rng(task_seed)
    if base is not None:
        rows = np.sort(rng.choice(base.n, size=min(config.n, base.n), replace=False))
        sub = Dataset(base.x[rows], base.require_response()[rows], base.family)
        permuted = make_permuted_design(sub, config.p_or_blocks, seed=task_seed + [1])
        truth = SupportSet.from_iterable(range(base.p))
        return permuted, truth
    data, truth, _ = simulate_glm(
        Family.from_name(config.family),
        config.n,
        config.p_or_blocks,
        config.true_support_size,
        config.signal_magnitude,
        rng,
    )
    return data, truth


def run_regression_experiment(
    config: ExperimentConfig, base: Dataset | None = None
) -> ExperimentReport:
    """Sparse-recovery benchmark on synthetic or permuted-block data.

    With a base dataset (or config.data_path), each replicate subsamples n
    rows and appends p_or_blocks permuted null blocks; the original
    covariates count as true.  Without one, replicates draw synthetic
    sparse GLM data and the planted support is the truth.
    """
    start = time.perf_counter()
    if config.kind != "regression_permuted":
        raise ValidationError(f"config.kind must be regression_permuted, got {config.kind}")
    if base is None and config.data_path is not None:
        if config.response_column is None:
            raise ValidationError("response_column is required with data_path")
        base = load_csv(config.data_path, config.response_column, config.family).dataset
    if base is not None:
        p_total = base.p * (1 + config.p_or_blocks)
        setting = {"n": min(config.n, base.n), "p": p_total, "protocol": "permuted_blocks"}
    else:
        setting = {"n": config.n, "p": config.p_or_blocks, "protocol": "synthetic"}

    def one(task: int) -> dict:
        task_seed = [config.seed, task]
        try:
            data, truth = _regression_truth_task(config, base, task_seed)
            selections = _select_all_methods(data, config, task_seed)
            return {
                "error": None,
                "methods": {
                    label: {
                        **_support_metrics(sel, truth),
                        "selected": list(sel.indices),
                    }
                    for label, sel in selections.items()
                },
            }
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    per_task = _run_tasks(one, config.replicates, config.max_workers)
    methods = [label for label, _ in _expanded_methods(config)]
    rows = _aggregate_rows([setting], methods, per_task, ("psr", "fdr", "exact", "size"), lambda t: 0)
    report = ExperimentReport(
        kind=config.kind,
        settings=[setting],
        rows=rows,
        meta={"config": _config_echo(config)},
    )
    report.timing_s = time.perf_counter() - start
    return report


def run_consistency_sweep(config: ExperimentConfig) -> ExperimentReport:
    """Synthetic recovery sweep over n with p = ceil(n^kappa)."""
    start = time.perf_counter()
    if config.kind != "consistency_sweep":
        raise ValidationError(f"config.kind must be consistency_sweep, got {config.kind}")
    n_values = config.n_list or (config.n,)
    settings = [
        {"n": int(n), "p": int(math.ceil(n**config.kappa)), "protocol": "synthetic"}
        for n in n_values
    ]

    def one(task: int) -> dict:
        si, rep = divmod(task, config.replicates)
        setting = settings[si]
        local = replace(config, n=setting["n"], p_or_blocks=setting["p"])
        task_seed = [config.seed, task]
        try:
            rng = np.random.default_rng(task_seed)
            data, truth, _ = simulate_glm(
                Family.from_name(config.family),
                setting["n"],
                setting["p"],
                config.true_support_size,
                config.signal_magnitude,
                rng,
            )
            selections = _select_all_methods(data, local, task_seed)
            return {
                "error": None,
                "methods": {
                    label: {
                        **_support_metrics(sel, truth),
                        "selected": list(sel.indices),
                    }
                    for label, sel in selections.items()
                },
            }
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    total = len(settings) * config.replicates
    per_task = _run_tasks(one, total, config.max_workers)
    methods = [label for label, _ in _expanded_methods(config)]
    rows = _aggregate_rows(
        settings,
        methods,
        per_task,
        ("psr", "fdr", "exact", "size"),
        lambda t: t // config.replicates,
    )
    report = ExperimentReport(
        kind=config.kind,
        settings=settings,
        rows=rows,
        meta={"config": _config_echo(config)},
    )
    report.timing_s = time.perf_counter() - start
    return report


def run_ising_experiment(
    config: ExperimentConfig, truth_graph: GraphEstimate, params: IsingParameters
) -> ExperimentReport:
    """Graph recovery benchmark: sample, select per node, combine, score."""
    start = time.perf_counter()
    if config.kind != "ising_recovery":
        raise ValidationError(f"config.kind must be ising_recovery, got {config.kind}")
    if truth_graph.p != params.p:
        raise ValidationError("truth graph and parameters disagree on p")
    for rule in config.rules:
        if rule not in ("and", "or"):
            raise ValidationError(f"unknown combination rule {rule!r}")
    methods = _expanded_methods(config)
    settings = [{"n": config.n, "p": params.p, "rule": rule} for rule in config.rules]

    def one(task: int) -> dict:
        task_seed = [config.seed, task]
        try:
            sample = gibbs_sample(
                params, config.n, burn_in=config.burn_in, thin=config.thin, seed=task_seed
            )
            per_method: dict[str, dict] = {}
            for label, spec in methods:
                neighborhoods: list[SupportSet] = []
                for node in range(params.p):
                    neighborhoods.append(
                        _select_node(sample, node, spec, config, task_seed)
                    )
                per_method[label] = {}
                for rule in config.rules:
                    estimate = combine_graph(neighborhoods, rule)  # type: ignore[arg-type]
                    gm = graph_metrics(estimate, truth_graph)
                    per_method[label][rule] = {
                        "psr": gm.psr,
                        "fdr": gm.fdr,
                        "edges": [list(e) for e in estimate.edges],
                    }
            return {"error": None, "methods": per_method}
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    per_task = _run_tasks(one, config.replicates, config.max_workers)
    rows: list[dict] = []
    for setting in settings:
        rule = setting["rule"]
        for label, _ in methods:
            psrs, fdrs, reps, failed = [], [], [], 0
            for result in per_task:
                if result.get("error") is not None:
                    failed += 1
                    reps.append({"error": result["error"]})
                    continue
                detail = result["methods"][label][rule]
                reps.append({"psr": detail["psr"], "fdr": detail["fdr"]})
                psrs.append(detail["psr"])
                fdrs.append(detail["fdr"])
            rows.append(
                {
                    "method": label,
                    "setting": setting,
                    "metrics": {
                        "psr_mean": float(np.mean(psrs)) if psrs else None,
                        "fdr_mean": float(np.mean(fdrs)) if fdrs else None,
                        "n_failed": failed,
                        "n_ok": len(per_task) - failed,
                    },
                    "replicates": reps,
                }
            )
    report = ExperimentReport(
        kind=config.kind,
        settings=settings,
        rows=rows,
        meta={
            "config": _config_echo(config),
            "truth": {"p": truth_graph.p, "edges": [list(e) for e in truth_graph.edges]},
        },
    )
    report.timing_s = time.perf_counter() - start
    return report


def _select_node(
    sample: Dataset,
    node: int,
    spec: dict,
    config: ExperimentConfig,
    task_seed: list[int],
) -> SupportSet:
    popts = PathOptions(
        n_rho=config.n_rho, rho_min_ratio=config.rho_min_ratio, with_intercept=True
    )
    fopts = FitOptions(with_intercept=True)
    if spec["kind"] == "ebic":
        return neighborhood_select(
            sample, node, gamma=spec["gamma"], q_cap=config.q_cap, path_opts=popts
        )
    reg, others = node_regression(sample, node)
    path = lasso_path(reg, popts)
    candidates = candidate_supports(path, q_max=config.q_cap)
    if not candidates:
        candidates = [SupportSet.empty()]
    if spec["kind"] == "cv":
        local = cross_validate(
            reg, candidates, k=config.cv_folds, seed=task_seed + [node, 1], fit_opts=fopts
        )
    else:
        local = stability_selection(
            reg,
            expected_q=config.stability_q,
            n_subsamples=config.stability_subsamples,
            subsample_frac=config.stability_frac,
            threshold=config.stability_threshold,
            seed=task_seed + [node, 2],
            path_opts=popts,
        )
    return SupportSet.from_iterable(others[j] for j in local)


def run_equivalence_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Criterion-vs-evidence comparison on synthetic sparse GLM data.

    Per replicate and gamma, candidates from one lasso path are scored by
    EBIC and by the Laplace evidence under a gaussian coefficient prior;
    the report tracks ranking agreement and the centered-gap spread.  When
    quad_max_dim > 0, low-dimensional candidates are also integrated by
    quadrature and the worst Laplace error is recorded.
    """
    start = time.perf_counter()
    if config.kind != "equivalence":
        raise ValidationError(f"config.kind must be equivalence, got {config.kind}")
    prior = GaussianPrior(sigma=config.prior_sigma)
    setting = {"n": config.n, "p": config.p_or_blocks, "protocol": "synthetic"}
    fam = Family.from_name(config.family)

    def one(task: int) -> dict:
        task_seed = [config.seed, task]
        rng = np.random.default_rng(task_seed)
        try:
            data, truth, _ = simulate_glm(
                fam,
                config.n,
                config.p_or_blocks,
                config.true_support_size,
                config.signal_magnitude,
                rng,
            )
            popts = PathOptions(n_rho=config.n_rho, rho_min_ratio=config.rho_min_ratio)
            path = lasso_path(data, popts)
            candidates = candidate_supports(path, q_max=config.q_cap)
            if not candidates:
                candidates = [SupportSet.empty()]
            fits = refit_candidates(data, candidates, FitOptions())
            usable = [f for f in fits if f.converged]
            if not usable:
                raise NumericalError("every candidate fit failed")
            out: dict[str, dict] = {}
            quad_err_max = None
            quad_ratio_max = None
            if config.quad_max_dim > 0:
                rate = math.sqrt(
                    math.log(config.n * config.p_or_blocks) / config.n
                )
                errs = []
                for fit in usable:
                    if not 0 < len(fit.support) <= config.quad_max_dim:
                        continue
                    lp = 0.0  # model prior cancels in the difference
                    lap = laplace_log_marginal(fit, prior, lp).log_marginal_laplace
                    quad = quadrature_log_marginal(
                        data, fit.support, prior, lp, fit=fit
                    )
                    errs.append(abs(lap - quad))
                if errs:
                    quad_err_max = float(max(errs))
                    quad_ratio_max = float(max(errs) / rate)
            for gamma in config.gamma_list:
                rep = equivalence_report(
                    usable, prior, gamma=gamma, q_cap=config.q_cap,
                    n=config.n, p=config.p_or_blocks,
                )
                out[f"ebic_vs_bayes(gamma={gamma:g})"] = {
                    "agreement": bool(rep.agreement),
                    "max_abs_gap": float(rep.max_abs_gap),
                    "gap_spread": float(rep.gap_spread),
                    "quad_err_max": quad_err_max,
                    "quad_err_over_rate": quad_ratio_max,
                    "ebic_choice": list(rep.ebic_choice.indices),
                    "bayes_choice": list(rep.bayes_choice.indices),
                    "true_support": list(truth.indices),
                }
            return {"error": None, "methods": out}
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    per_task = _run_tasks(one, config.replicates, config.max_workers)
    methods = [f"ebic_vs_bayes(gamma={g:g})" for g in config.gamma_list]
    rows = _aggregate_rows(
        [setting],
        methods,
        per_task,
        ("agreement", "max_abs_gap", "gap_spread", "quad_err_max", "quad_err_over_rate"),
        lambda t: 0,
    )
    report = ExperimentReport(
        kind=config.kind,
        settings=[setting],
        rows=rows,
        meta={"config": _config_echo(config)},
    )
    report.timing_s = time.perf_counter() - start
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def report_to_json_bytes(report: ExperimentReport, include_timing: bool = False) -> bytes:
    """Canonical JSON encoding; stable key order, no whitespace variance."""
    doc = {
        "schema": report.schema,
        "kind": report.kind,
        "settings": _jsonable(report.settings),
        "rows": _jsonable(report.rows),
        "meta": _jsonable(report.meta),
    }
    if include_timing:
        doc["timing_s"] = report.timing_s
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def report_from_json_bytes(blob: bytes) -> ExperimentReport:
    obj = json.loads(blob.decode("utf-8"))
    if obj.get("schema") != REPORT_SCHEMA:
        raise ValidationError(f"unexpected report schema {obj.get('schema')!r}")
    return ExperimentReport(
        kind=obj["kind"],
        settings=obj["settings"],
        rows=obj["rows"],
        meta=obj["meta"],
        timing_s=float(obj.get("timing_s", 0.0)),
    )


def _csv_table(report: ExperimentReport) -> str:
    """Long-format table: one row per (setting, method) with flat metrics."""
    setting_keys = sorted({k for s in report.settings for k in s})
    metric_keys = sorted({k for row in report.rows for k in row["metrics"]})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", *setting_keys, *metric_keys])
    for row in report.rows:
        record = [row["method"]]
        record.extend(row["setting"].get(k, "") for k in setting_keys)
        for key in metric_keys:
            value = row["metrics"].get(key, "")
            record.append("" if value is None else value)
        writer.writerow(record)
    return buf.getvalue()


def emit_report(
    report: ExperimentReport,
    fmt: str = "json",
    out_path: str | Path | None = None,
    include_timing: bool = False,
) -> bytes:
    """Serialize a report as canonical JSON or a flat CSV table.

    Returns the bytes and, when out_path is given, writes them there too.
    """
    if fmt == "json":
        blob = report_to_json_bytes(report, include_timing=include_timing)
    elif fmt == "csv_tables":
        blob = _csv_table(report).encode("utf-8")
    else:
        raise ValidationError(f"format must be 'json' or 'csv_tables', got {fmt!r}")
    if out_path is not None:
        Path(out_path).write_bytes(blob)
    return blob
