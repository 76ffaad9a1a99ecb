"""Command-line pipeline driver.

Exit codes: 0 success, 2 usage error, 3 data error, 4 convergence error.
All randomness flows from explicit --seed flags, so reruns with the same
inputs reproduce output files byte-identically.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .data import Dataset, impute_mean, load_csv, load_schema, save_csv, save_schema
from .eaml import fit_general_eaml, fit_hard_eaml, fit_soft_eaml, select_hyperparams
from .elicitation import aggregate, compute_delta_ranking, empirical_risks, outlier_rules
from .evaluation import learning_curve, shift_eval
from .linear import predict_linear
from .pipeline import PipelineConfig, run_rulefit
from .rules import build_rule_matrix
from .serialization import (
    gbm_to_dict,
    load_assessments,
    load_delta_report,
    load_model_document,
    load_rule_export,
    save_delta_report,
    save_model_document,
    save_rule_export,
)
from .synthetic import SyntheticSpec, generate
from .validation import ConvergenceError, DataError

EXIT_DATA_ERROR = 3
EXIT_CONVERGENCE_ERROR = 4


def pipeline_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConvergenceError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONVERGENCE_ERROR)
        except (DataError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA_ERROR)

    return wrapper


@click.group()
def main():
    """Rule-ensemble models augmented with expert assessments."""


def _load_dataset(data, schema, outcome) -> Dataset:
    return load_csv(data, load_schema(schema), outcome)


def _imputed(dataset: Dataset) -> Dataset:
    # each dataset (era) is imputed with its own means, as in the source prep
    return impute_mean(dataset) if dataset.has_missing() else dataset


@main.command("rulefit-fit")
@click.option("--data", required=True, type=click.Path())
@click.option("--schema", required=True, type=click.Path())
@click.option("--outcome", required=True)
@click.option("--config", "config_path", type=click.Path())
@click.option("--out-model", required=True, type=click.Path())
@click.option("--out-rules", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@pipeline_errors
def rulefit_fit(data, schema, outcome, config_path, out_model, out_rules, seed):
    """Impute, boost, extract rules, and select them along an L1 path."""
    dataset = _load_dataset(data, schema, outcome)
    config = (
        PipelineConfig.from_json(Path(config_path).read_text())
        if config_path
        else PipelineConfig()
    )
    result = run_rulefit(dataset, config, seed)

    fills = {spec.name: float(v) for spec, v in zip(result.imputer.features_, result.imputer.fill_values_)}
    save_model_document(
        out_model,
        schema=dataset.features,
        linear=result.linear,
        rules=result.rules,
        gbm=result.gbm_model,
        imputation={"fills": fills},
        metadata={"seed": seed, "selected_lambda": result.selected_lam,
                  "config": json.loads(config.to_json())},
    )
    matrix = build_rule_matrix(result.rules, result.train)
    save_rule_export(out_rules, result.rules, supports=matrix.supports, cards=result.cards)
    click.echo(f"selected lambda: {result.selected_lam:.6g}")
    click.echo(f"rules: {len(result.rules)}")
    click.echo(f"train auc: {result.train_auc:.4f}  balanced accuracy: {result.train_balanced_accuracy:.4f}")
    click.echo(f"test auc: {result.test_auc:.4f}  balanced accuracy: {result.test_balanced_accuracy:.4f}")


@main.command()
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--assessments", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--schema", required=True, type=click.Path())
@click.option("--outcome", required=True)
@click.option("--bins", default=5, show_default=True)
@click.option("--ci", default=0.90, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--out-csv", type=click.Path())
@pipeline_errors
def delta(rules_path, assessments, data, schema, outcome, bins, ci, out, out_csv):
    """Aggregate ratings, rank both ways, and report disagreement outliers."""
    rules, _, _ = load_rule_export(rules_path)
    records = load_assessments(assessments)
    if not records:
        raise DataError("assessments file is empty")
    dataset = _imputed(_load_dataset(data, schema, outcome))
    matrix = build_rule_matrix(rules, dataset)
    known = {r.id for r in rules}
    rated = {a.rule_id for a in records}
    if not rated <= known:
        raise DataError(f"assessments reference unknown rules: {sorted(rated - known)[:3]}")
    summaries = aggregate(records, expected_rule_ids=[r.id for r in rules])
    covered = {s.rule_id for s in summaries}
    risks = {rid: v for rid, v in empirical_risks(matrix, dataset.y).items() if rid in covered}
    deltas = compute_delta_ranking(summaries, risks, bins=bins)
    low, high = outlier_rules(deltas, ci=ci)
    save_delta_report(out, summaries, deltas, low, high)
    if out_csv:
        rule_by_id = {r.id: r for r in rules}
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rule_id", "rule", "empirical_risk", "mean_rating",
                             "rank_empirical", "rank_perceived", "delta", "abs_bin"])
            for d in sorted(deltas, key=lambda d: d.delta):
                writer.writerow([
                    d.rule_id, rule_by_id[d.rule_id].describe(),
                    f"{d.empirical_risk:.6f}",
                    f"{next(s.mean_rating for s in summaries if s.rule_id == d.rule_id):.4f}",
                    d.rank_empirical, d.rank_perceived, d.delta, d.abs_bin,
                ])
    click.echo(f"rules ranked: {len(deltas)}")
    click.echo(f"outliers outside {ci:.0%} interval: {len(low)} low, {len(high)} high")
    for d in low + high:
        click.echo(f"  {d.rule_id}  delta={d.delta:+.1f}  bin={d.abs_bin}")


def _matrix_for(rules, dataset):
    return build_rule_matrix(rules, dataset)


@main.command("eaml-fit")
@click.option("--mode", type=click.Choice(["hard", "soft", "general"]), required=True)
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--deltas", "deltas_path", required=True, type=click.Path())
@click.option("--data", required=True, type=click.Path())
@click.option("--schema", required=True, type=click.Path())
@click.option("--outcome", required=True)
@click.option("--max-bin", type=int)
@click.option("--lambda", "lam", type=float)
@click.option("--gamma", type=float)
@click.option("--norm", type=click.Choice(["1", "2"]), default="1")
@click.option("--grid", "grid_spec", help='e.g. "lam=0,0.01,0.1;gamma=0,1,4" or "max_bin=0,1,2;lam=0.01"')
@click.option("--validation-data", type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--out-scores", type=click.Path())
@pipeline_errors
def eaml_fit(mode, rules_path, deltas_path, data, schema, outcome, max_bin, lam,
             gamma, norm, grid_spec, validation_data, out, out_scores):
    """Refit with expert-informed penalties (hard, soft, or general form)."""
    rules, _, _ = load_rule_export(rules_path)
    summaries, deltas, _ = load_delta_report(deltas_path)
    dataset = _imputed(_load_dataset(data, schema, outcome))
    covered = {d.rule_id for d in deltas}
    rules = [r for r in rules if r.id in covered]
    matrix = _matrix_for(rules, dataset)

    if grid_spec:
        if validation_data is None:
            raise DataError("--grid requires --validation-data")
        val = _imputed(_load_dataset(validation_data, schema, outcome))
        val_matrix = _matrix_for(rules, val)
        grid = _parse_grid(grid_spec, mode)
        params, table = select_hyperparams(
            (matrix, dataset.y), (val_matrix, val.y), grid, mode=mode,
            deltas=deltas, summaries=summaries,
        )
        if out_scores:
            with open(out_scores, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                keys = sorted({k for row in table for k in row.params})
                writer.writerow(keys + ["train_auc", "validation_auc"])
                for row in table:
                    writer.writerow([row.params.get(k, "") for k in keys]
                                    + [f"{row.train_auc:.6f}", f"{row.validation_auc:.6f}"])
        click.echo("selected: " + json.dumps(params, sort_keys=True))
        lam = params.get("lam", lam)
        gamma = params.get("gamma", gamma)
        max_bin = params.get("max_bin", max_bin)

    if mode == "hard":
        if max_bin is None or lam is None:
            raise DataError("hard mode needs --max-bin and --lambda")
        model = fit_hard_eaml(matrix, dataset.y, deltas, max_bin, lam)
    elif mode == "soft":
        if lam is None or gamma is None:
            raise DataError("soft mode needs --lambda and --gamma")
        model = fit_soft_eaml(matrix, dataset.y, deltas, summaries, lam, gamma)
    else:
        if lam is None:
            raise DataError("general mode needs --lambda")
        model = fit_general_eaml(matrix, dataset.y, deltas, summaries, lam, norm=int(norm))

    kept_rules = [r for r in rules if r.id in set(model.rule_ids)]
    save_model_document(
        out,
        schema=dataset.features,
        linear=model,
        rules=kept_rules,
        metadata={"mode": mode, "lambda": lam, "gamma": gamma, "max_bin": max_bin},
    )
    scores = predict_linear(model, matrix.subset(model.rule_ids))
    from .evaluation import auc as _auc

    click.echo(f"mode: {mode}  rules kept: {len(model.rule_ids)}")
    click.echo(f"train auc: {_auc(scores, dataset.y):.4f}")


def _parse_grid(spec: str, mode: str):
    axes = {}
    for part in spec.split(";"):
        name, _, values = part.partition("=")
        name = name.strip()
        if not values:
            raise DataError(f"bad grid component {part!r}")
        axes[name] = [float(v) for v in values.split(",")]
    if mode == "soft":
        lams = axes.get("lam")
        gammas = axes.get("gamma")
        if not lams or not gammas:
            raise DataError("soft grid needs lam=... and gamma=...")
        return [{"lam": l, "gamma": g} for l in lams for g in gammas]
    if mode == "hard":
        bins_axis = axes.get("max_bin")
        lams = axes.get("lam")
        if not bins_axis or not lams:
            raise DataError("hard grid needs max_bin=... and lam=...")
        return [{"max_bin": int(b), "lam": l} for b in bins_axis for l in lams]
    raise DataError(f"grid selection is not supported for mode {mode!r}")


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_paths", multiple=True, required=True, type=click.Path())
@click.option("--schema", required=True, type=click.Path())
@click.option("--outcome", required=True)
@click.option("--tag", "tags", multiple=True)
@click.option("--out", type=click.Path())
@pipeline_errors
def eval_cmd(model_path, data_paths, schema, outcome, tags, out):
    """Score a saved model on one or more datasets."""
    doc = load_model_document(model_path)
    names = list(tags) + [Path(p).stem for p in data_paths[len(tags):]]
    eval_sets = {}
    for name, path in zip(names, data_paths):
        eval_sets[name] = _imputed(_load_dataset(path, schema, outcome))
    reports = shift_eval(doc["linear"], doc["rules"], eval_sets,
                         model_tag=Path(model_path).stem)
    rows = [["dataset", "model", "n", "auc", "balanced_accuracy"]] + [
        [r.dataset, r.model, r.n, f"{r.auc:.6f}", f"{r.balanced_accuracy:.6f}"]
        for r in reports
    ]
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)
    for row in rows:
        click.echo("\t".join(str(c) for c in row))


@main.command("learning-curve")
@click.option("--data", required=True, type=click.Path())
@click.option("--schema", required=True, type=click.Path())
@click.option("--outcome", required=True)
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--deltas", "deltas_path", type=click.Path())
@click.option("--max-bins", default="", help="comma list of hard thresholds; always includes 'all'")
@click.option("--eval-data", "eval_paths", multiple=True, required=True, type=click.Path())
@click.option("--sizes", required=True, help="comma list of subsample sizes")
@click.option("--subsamples", default=10, show_default=True)
@click.option("--lam", default=0.01, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@pipeline_errors
def learning_curve_cmd(data, schema, outcome, rules_path, deltas_path, max_bins,
                       eval_paths, sizes, subsamples, lam, seed, out):
    """Mean and sd of AUC over stratified subsamples of growing size."""
    rules, _, _ = load_rule_export(rules_path)
    pool = _imputed(_load_dataset(data, schema, outcome))
    subsets = {"all": [r.id for r in rules]}
    if max_bins:
        if deltas_path is None:
            raise DataError("--max-bins requires --deltas")
        _, deltas, _ = load_delta_report(deltas_path)
        bin_of = {d.rule_id: d.abs_bin for d in deltas}
        for b in [int(v) for v in max_bins.split(",")]:
            ids = [r.id for r in rules if bin_of.get(r.id, 0) <= b]
            if ids:
                subsets[f"bin<={b}"] = ids
    eval_sets = {
        Path(p).stem: _imputed(_load_dataset(p, schema, outcome))
        for p in eval_paths
    }
    size_list = [int(v) for v in sizes.split(",")]
    curves = learning_curve(pool, rules, subsets, eval_sets, size_list,
                            subsamples, lam, seed)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rule_subset", "eval_set", "size", "mean_auc", "sd_auc"])
        for (subset, eval_name), curve in sorted(curves.items()):
            for size, mean, sd in zip(curve.sizes, curve.means, curve.stds):
                writer.writerow([subset, eval_name, size, f"{mean:.6f}", f"{sd:.6f}"])
    click.echo(f"wrote {len(curves)} curves x {len(size_list)} sizes to {out}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@pipeline_errors
def synth(spec_path, out_dir):
    """Generate the confounded synthetic train/test datasets."""
    spec = SyntheticSpec.from_json(Path(spec_path).read_text())
    bundle = generate(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_schema(out / "schema.json", bundle.train.dataset.features)
    for name, dataset in bundle.datasets().items():
        save_csv(out / f"{name}.csv", dataset, "outcome")
    truth = {
        "train_true_risk": [float(v) for v in bundle.train.true_risk],
        "train_confounder": [int(v) for v in bundle.train.confounder],
    }
    (out / "truth.json").write_text(json.dumps(truth) + "\n", encoding="utf-8")
    click.echo(f"wrote 4 datasets to {out}")


@main.command()
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--store", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed", type=int, default=None, help="seed for session permutations")
@click.option("--ui", "ui_dir", type=click.Path(exists=True), help="static UI bundle to serve at /")
@pipeline_errors
def serve(rules_path, store, port, host, seed, ui_dir):
    """Serve the rule questionnaire over HTTP."""
    import uvicorn

    from .service import build_app

    app = build_app(rules_path, store, permutation_seed=seed, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--manifest", required=True, type=click.Path())
@pipeline_errors
def run(manifest):
    """Execute pipeline stages listed in a manifest file, in order."""
    payload = json.loads(Path(manifest).read_text())
    stages = payload.get("stages")
    if not stages:
        raise DataError("manifest has no stages")
    commands = {c.name: c for c in main.commands.values()}
    for stage in stages:
        stage = dict(stage)
        name = stage.pop("command", None)
        if name not in commands:
            raise DataError(f"unknown stage command {name!r}")
        click.echo(f"== {name} ==")
        command = commands[name]
        by_key = {}
        for p in command.params:
            by_key[p.name] = p
            for opt in p.opts:
                by_key[opt.lstrip("-").replace("-", "_")] = p
        kwargs = {}
        for key, value in stage.items():
            param = by_key.get(key.replace("-", "_"))
            if param is None:
                raise DataError(f"stage {name}: unknown option {key!r}")
            kwargs[param.name] = tuple(value) if param.multiple else value
        for p in command.params:
            kwargs.setdefault(p.name, () if p.multiple else p.default)
        ctx = click.Context(command, info_name=name)
        ctx.invoke(command.callback, **kwargs)


if __name__ == "__main__":
    main()
