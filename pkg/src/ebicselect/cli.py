"""Command line interface.

Subcommands: fit, path, select, bayes, ising-sample, ising-select,
experiment.  Exit codes: 0 on success, 2 on validation errors (bad flags,
unparseable data, inconsistent shapes), 3 on numerical failures
(separation, singular Hessians, non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .families import Dataset, Family, SupportSet
from .fitting import FitOptions, fit_mle, refit_candidates
from .lasso import PathOptions, candidate_supports, lasso_path
from .criteria import PriorSpec, ebic_score, log_model_prior, select_best
from .evidence import GaussianPrior, laplace_log_marginal
from .harness import (
    ExperimentConfig,
    emit_report,
    load_csv,
    run_consistency_sweep,
    run_equivalence_experiment,
    run_ising_experiment,
    run_regression_experiment,
)
from .ising import (
    GraphEstimate,
    IsingParameters,
    combine_graph,
    gibbs_sample,
    grid_graph,
    neighborhood_select,
)

__all__ = ["main"]


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _load_dataset(args: argparse.Namespace) -> Dataset:
    if args.data is None:
        raise ValidationError("--data is required")
    if args.response is None:
        raise ValidationError("--response is required")
    return load_csv(args.data, args.response, args.family).dataset


def _parse_support(text: str | None, p: int) -> SupportSet:
    if text is None or text.strip() == "":
        return SupportSet.from_iterable(range(p))
    try:
        items = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse support list {text!r}") from exc
    return SupportSet.from_iterable(items)


def _json_dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _cmd_fit(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    support = _parse_support(args.support, data.p)
    fit = fit_mle(data, support, FitOptions(with_intercept=args.intercept))
    _write_output(
        _json_dump(
            {
                "schema": "ebic-fit/1",
                "support": list(fit.support.indices),
                "coeffs": [float(c) for c in fit.coeffs],
                "intercept": fit.intercept,
                "log_lik": fit.log_lik,
                "converged": fit.converged,
                "iterations": fit.iterations,
            }
        ),
        args.out,
    )
    return 0


def _path_options(args: argparse.Namespace) -> PathOptions:
    return PathOptions(
        n_rho=args.n_rho,
        rho_min_ratio=args.rho_min_ratio,
        with_intercept=args.intercept,
    )


def _cmd_path(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    path = lasso_path(data, _path_options(args))
    points = [
        {
            "rho": point.rho,
            "support": list(point.support.indices),
            "size": len(point.support),
            "intercept": point.intercept,
        }
        for point in path
    ]
    _write_output(
        _json_dump({"schema": "ebic-path/1", "n_points": len(points), "points": points}),
        args.out,
    )
    return 0


def _candidate_fits(data: Dataset, args: argparse.Namespace):
    path = lasso_path(data, _path_options(args))
    candidates = candidate_supports(path, q_max=args.q_cap)
    if not candidates:
        candidates = [SupportSet.empty()]
    fits = refit_candidates(data, candidates, FitOptions(with_intercept=args.intercept))
    return [f for f in fits if f.converged]


def _cmd_select(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    fits = _candidate_fits(data, args)
    if not fits:
        raise NumericalError("every candidate fit failed")
    gammas = args.gamma or [1.0]
    selections = {}
    for gamma in gammas:
        scores = [ebic_score(f, data.n, data.p, gamma) for f in fits]
        best = select_best(scores)
        best_score = min(s.ebic for s in scores if s.support == best)
        selections[f"{gamma:g}"] = {"support": list(best.indices), "ebic": best_score}
    _write_output(
        _json_dump(
            {
                "schema": "ebic-select/1",
                "n_candidates": len(fits),
                "selections": selections,
            }
        ),
        args.out,
    )
    return 0


def _cmd_bayes(args: argparse.Namespace) -> int:
    data = _load_dataset(args)
    fits = _candidate_fits(data, args)
    if not fits:
        raise NumericalError("every candidate fit failed")
    prior = GaussianPrior(sigma=args.prior_sigma)
    gammas = args.gamma or [1.0]
    out = {"schema": "ebic-bayes/1", "n_candidates": len(fits), "gammas": {}}
    for gamma in gammas:
        spec = PriorSpec(gamma=gamma, q_cap=args.q_cap)
        models = []
        for fit in fits:
            ms = ebic_score(fit, data.n, data.p, gamma)
            lp = log_model_prior(data.p, len(fit.support), spec)
            bs = laplace_log_marginal(fit, prior, lp)
            models.append(
                {
                    "support": list(fit.support.indices),
                    "ebic": ms.ebic,
                    "log_marginal": bs.log_marginal_laplace,
                    "gap": bs.log_marginal_laplace + 0.5 * ms.ebic,
                }
            )
        best_ebic = min(models, key=lambda m: (m["ebic"], len(m["support"]), m["support"]))
        best_bayes = min(
            models, key=lambda m: (-m["log_marginal"], len(m["support"]), m["support"])
        )
        out["gammas"][f"{gamma:g}"] = {
            "models": models,
            "ebic_choice": best_ebic["support"],
            "bayes_choice": best_bayes["support"],
            "agreement": best_ebic["support"] == best_bayes["support"],
        }
    _write_output(_json_dump(out), args.out)
    return 0


def _ising_params_from_file(path: str) -> IsingParameters:
    obj = json.loads(Path(path).read_text())
    if "grid" in obj:
        rows, cols = (int(v) for v in obj["grid"])
        graph = grid_graph(rows, cols)
        return IsingParameters.from_graph(
            graph,
            edge_weight=float(obj.get("theta_edge", 0.5)),
            zeta_value=float(obj.get("zeta", 0.0)),
        )
    if "zeta" not in obj or "theta" not in obj:
        raise ValidationError("params file needs either 'grid' or 'zeta' and 'theta'")
    return IsingParameters(np.asarray(obj["zeta"]), np.asarray(obj["theta"]))


def _cmd_ising_sample(args: argparse.Namespace) -> int:
    params = _ising_params_from_file(args.params)
    sample = gibbs_sample(
        params, n=args.n, burn_in=args.burn_in, thin=args.thin, seed=args.seed
    )
    target = args.out or "-"
    rows = sample.x.astype(int)
    header = [f"x{j}" for j in range(sample.p)]
    if target == "-":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows.tolist())
    else:
        with Path(target).open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows.tolist())
    return 0


def _load_binary_matrix(path: str) -> Dataset:
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path} is empty") from None
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {row_number} has {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {row_number}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    x = np.asarray(rows)
    if not np.all((x == 0.0) | (x == 1.0)):
        raise ValidationError("ising-select expects a binary 0/1 matrix")
    return Dataset(x=x, y=None, family=Family.LOGISTIC)


def _cmd_ising_select(args: argparse.Namespace) -> int:
    if args.data is None:
        raise ValidationError("--data is required")
    sample = _load_binary_matrix(args.data)
    gamma = (args.gamma or [0.5])[0]
    neighborhoods = [
        neighborhood_select(sample, node, gamma=gamma, q_cap=args.q_cap)
        for node in range(sample.p)
    ]
    graph = combine_graph(neighborhoods, args.rule)
    _write_output(graph.to_json(), args.out)
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ValidationError("--config is required")
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "seed": args.seed})
    if config.kind == "regression_permuted":
        report = run_regression_experiment(config)
    elif config.kind == "consistency_sweep":
        report = run_consistency_sweep(config)
    elif config.kind == "equivalence":
        report = run_equivalence_experiment(config)
    else:
        graph, params = _experiment_ising_inputs(args, config)
        report = run_ising_experiment(config, graph, params)
    blob = emit_report(report, fmt=args.format, out_path=None)
    if args.out is None or args.out == "-":
        sys.stdout.write(blob.decode("utf-8") + "\n")
    else:
        Path(args.out).write_bytes(blob)
    return 0


def _experiment_ising_inputs(
    args: argparse.Namespace, config: ExperimentConfig
) -> tuple[GraphEstimate, IsingParameters]:
    if args.ising_params is None:
        raise ValidationError("ising_recovery experiments need --ising-params")
    params = _ising_params_from_file(args.ising_params)
    edges = tuple(
        (j, k)
        for j in range(params.p)
        for k in range(j + 1, params.p)
        if params.theta[j, k] != 0.0
    )
    return GraphEstimate(p=params.p, edges=edges), params


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebicselect",
        description="Sparse GLM selection by extended BIC, Laplace evidence, "
        "and Ising neighborhood estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--response", help="name of the response column")
        p.add_argument(
            "--family",
            default="logistic",
            choices=["logistic", "poisson", "gaussian"],
            help="exponential family (default logistic)",
        )
        p.add_argument("--intercept", action="store_true", help="fit an unpenalized intercept")
        p.add_argument("--out", help="output path (default stdout)")

    def add_path_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n-rho", type=int, default=100, dest="n_rho")
        p.add_argument("--rho-min-ratio", type=float, default=1e-3, dest="rho_min_ratio")

    p_fit = sub.add_parser("fit", help="restricted maximum-likelihood fit")
    add_data_flags(p_fit)
    p_fit.add_argument("--support", help="comma-separated covariate indices (default: all)")
    p_fit.set_defaults(func=_cmd_fit)

    p_path = sub.add_parser("path", help="L1 penalty path")
    add_data_flags(p_path)
    add_path_flags(p_path)
    p_path.set_defaults(func=_cmd_path)

    p_select = sub.add_parser("select", help="EBIC selection over path candidates")
    add_data_flags(p_select)
    add_path_flags(p_select)
    p_select.add_argument("--gamma", type=float, action="append", help="repeatable")
    p_select.add_argument("--q-cap", type=int, default=10, dest="q_cap")
    p_select.set_defaults(func=_cmd_select)

    p_bayes = sub.add_parser("bayes", help="Laplace evidence per candidate")
    add_data_flags(p_bayes)
    add_path_flags(p_bayes)
    p_bayes.add_argument("--gamma", type=float, action="append", help="repeatable")
    p_bayes.add_argument("--q-cap", type=int, default=10, dest="q_cap")
    p_bayes.add_argument("--prior-sigma", type=float, default=10.0, dest="prior_sigma")
    p_bayes.set_defaults(func=_cmd_bayes)

    p_isample = sub.add_parser("ising-sample", help="Gibbs-sample a binary graphical model")
    p_isample.add_argument("--params", required=True, help="JSON parameter file")
    p_isample.add_argument("--n", type=int, default=1000)
    p_isample.add_argument("--burn-in", type=int, default=1000, dest="burn_in")
    p_isample.add_argument("--thin", type=int, default=5)
    p_isample.add_argument("--seed", type=int, default=0)
    p_isample.add_argument("--out", help="output CSV (default stdout)")
    p_isample.set_defaults(func=_cmd_ising_sample)

    p_iselect = sub.add_parser("ising-select", help="neighborhood-based graph estimate")
    p_iselect.add_argument("--data", help="CSV of binary samples (header row)")
    p_iselect.add_argument("--gamma", type=float, action="append", help="EBIC gamma")
    p_iselect.add_argument("--q-cap", type=int, default=10, dest="q_cap")
    p_iselect.add_argument("--rule", default="and", choices=["and", "or"])
    p_iselect.add_argument("--out", help="output path (default stdout)")
    p_iselect.set_defaults(func=_cmd_ising_select)

    p_exp = sub.add_parser("experiment", help="run a configured experiment")
    p_exp.add_argument("--config", help="TOML or JSON experiment config")
    p_exp.add_argument("--seed", type=int, help="override the config seed")
    p_exp.add_argument("--out", help="output path (default stdout)")
    p_exp.add_argument(
        "--format", default="json", choices=["json", "csv_tables"], dest="format"
    )
    p_exp.add_argument(
        "--ising-params", dest="ising_params", help="JSON parameter file for ising_recovery"
    )
    p_exp.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # unreadable or missing input/output paths are usage errors
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
