"""Command-line pipeline: ingest -> select -> train-eval -> simulate.

One JSON config file (--config) can pre-set any option; explicit flags win.
The root seed comes from --seed, the config file, or HIERIDS_SEED, in that
order. Every artifact embeds the fully resolved configuration, and report
CSVs get PNG figure companions under <out>/figures/.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import click
import numpy as np

from . import attribution, boruta, dataset, deploysim, fedsim, figures, hierarchy, learners
from .reporting import atomic_write_text, metric_table_csv, write_csv, write_json
from .seeds import derive_seed, substream

_ENV_SEED = "HIERIDS_SEED"


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file {path}: {exc}")
    if not isinstance(doc, dict):
        raise click.UsageError(f"config file {path} must hold a JSON object")
    return doc


def _resolve(cli_value, config: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _resolve_seed(cli_value, config: dict) -> int:
    if cli_value is not None:
        return int(cli_value)
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get(_ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise click.UsageError(f"{_ENV_SEED} must be an integer, got {env!r}")
    return 0


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "figures").mkdir(exist_ok=True)
    return path


def _load_artifact_dataset(data: str) -> tuple[dataset.Dataset, dict]:
    """Read dataset.csv + summary.json as written by `ingest`."""
    root = Path(data)
    csv_path = root / "dataset.csv" if root.is_dir() else root
    meta_path = csv_path.parent / "summary.json"
    if not csv_path.exists():
        raise click.UsageError(f"no dataset at {csv_path}")
    meta = {}
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as handle:
            meta = json.load(handle)
    label_column = meta.get("label_column", "label")
    feature_kind = meta.get("feature_kind", "binary")
    try:
        schema = dataset.schema_from_csv(csv_path, label_column=label_column,
                                         feature_kind=feature_kind)
        ds = dataset.load_csv(csv_path, schema)
    except (dataset.SchemaError, dataset.ParseError, dataset.EmptyInputError) as exc:
        raise click.UsageError(str(exc))
    return ds, meta


def _read_feature_file(path: str) -> tuple[str, ...]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise click.UsageError(f"cannot read features file {path}: {exc}")
    names = tuple(line.strip() for line in lines if line.strip())
    if not names:
        raise click.UsageError(f"features file {path} is empty")
    return names


@click.group()
def main():
    """Hierarchical intrusion detection pipeline for IoV CAN traffic."""


@main.command("ingest")
@click.option("--input", "input_path", type=click.Path(), default=None,
              help="Traffic CSV to ingest.")
@click.option("--synth-spec", type=click.Path(), default=None,
              help="JSON recipe for synthetic data instead of a CSV.")
@click.option("--label-column", default=None, help="Label column name (default 'label').")
@click.option("--drop-columns", default=None,
              help="Comma-separated columns to ignore (extra label fields etc.).")
@click.option("--feature-kind", type=click.Choice(["binary", "real"]), default=None)
@click.option("--scale/--no-scale", "scale", default=None,
              help="Min-max scale features (default on).")
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_ingest(input_path, synth_spec, label_column, drop_columns, feature_kind,
               scale, out, seed, config_path):
    """Load (or synthesise) a dataset, scale it, and write the artifacts."""
    cfg_file = _load_config_file(config_path)
    seed = _resolve_seed(seed, cfg_file)
    input_path = _resolve(input_path, cfg_file, "input", None)
    synth_spec = _resolve(synth_spec, cfg_file, "synth_spec", None)
    label_column = _resolve(label_column, cfg_file, "label_column", "label")
    drop_columns = _resolve(drop_columns, cfg_file, "drop_columns", "")
    feature_kind = _resolve(feature_kind, cfg_file, "feature_kind", "binary")
    scale = _resolve(scale, cfg_file, "scale", True)
    if (input_path is None) == (synth_spec is None):
        raise click.UsageError("exactly one of --input / --synth-spec is required")

    run_config = {
        "command": "ingest", "input": input_path, "synth_spec": synth_spec,
        "label_column": label_column, "drop_columns": drop_columns,
        "feature_kind": feature_kind, "scale": bool(scale), "seed": seed, "out": out,
    }
    out_path = _out_dir(out)

    if synth_spec is not None:
        try:
            with open(synth_spec, "r", encoding="utf-8") as handle:
                recipe = json.load(handle)
            spec = dataset.SynthSpec(
                n_records=int(recipe["n_records"]),
                n_features=int(recipe["n_features"]),
                informative=tuple(
                    (f, str(c), float(b)) for f, c, b in recipe.get("informative", [])
                ),
                class_mix=tuple(
                    (str(c), float(p)) for c, p in recipe["class_mix"].items()
                ),
            )
            ds = dataset.synth_generate(spec, seed=seed)
        except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"bad synth spec: {exc}")
        label_column = ds.schema.label_column
    else:
        drops = tuple(c.strip() for c in str(drop_columns).split(",") if c.strip())
        try:
            schema = dataset.schema_from_csv(input_path, label_column=label_column,
                                             drop_columns=drops, feature_kind=feature_kind)
            ds = dataset.load_csv(input_path, schema)
        except FileNotFoundError:
            raise click.UsageError(f"input file not found: {input_path}")
        except (dataset.SchemaError, dataset.ParseError, dataset.EmptyInputError) as exc:
            raise click.UsageError(str(exc))

    if scale:
        ds_out, params = dataset.minmax_scale(ds)
    else:
        ds_out = ds
        params = dataset.ScalerParams(np.zeros(ds.n_features), np.ones(ds.n_features))

    dataset.write_csv(ds_out, out_path / "dataset.csv")
    write_json(out_path / "scaler.json", params.to_jsonable(), config=run_config)
    counts = ds_out.class_counts()
    total = ds_out.n_records
    write_json(out_path / "summary.json", {
        "n_records": total,
        "n_features": ds_out.n_features,
        "label_column": ds_out.schema.label_column,
        "feature_kind": ds_out.schema.feature_kind,
        "feature_names": list(ds_out.schema.feature_names),
        "class_counts": counts,
    }, config=run_config)
    figures.save_class_distribution(counts, out_path / "figures" / "class_distribution.png")

    click.echo(f"{'Class':<28}{'Records':>12}{'Percentage':>12}")
    for cls, cnt in counts.items():
        click.echo(f"{cls:<28}{cnt:>12}{100.0 * cnt / total:>11.2f}%")
    click.echo(f"{'Total':<28}{total:>12}{100.0:>11.2f}%")
    click.echo(f"artifacts written to {out_path}")


@main.command("select")
@click.option("--data", required=True, type=click.Path(), help="Ingest output dir or CSV.")
@click.option("--level", type=click.IntRange(1, 3), default=None)
@click.option("--max-runs", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--trees", type=int, default=None, help="Forest size inside the selector.")
@click.option("--max-depth", type=int, default=None)
@click.option("--budget", type=int, default=None, help="Max subset size for the search.")
@click.option("--cv-k", type=int, default=None)
@click.option("--target-class", default=None, help="Class whose negative-impact features are screened.")
@click.option("--attr-sample", type=int, default=None, help="Rows used for attribution.")
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_select(data, level, max_runs, alpha, trees, max_depth, budget, cv_k,
               target_class, attr_sample, out, seed, config_path):
    """Rank features with the shadow-feature selector, screen them with path
    attributions, and search the ranking for a minimal subset."""
    cfg_file = _load_config_file(config_path)
    seed = _resolve_seed(seed, cfg_file)
    level = int(_resolve(level, cfg_file, "level", 1))
    max_runs = int(_resolve(max_runs, cfg_file, "max_runs", 100))
    alpha = float(_resolve(alpha, cfg_file, "alpha", 0.05))
    trees = _resolve(trees, cfg_file, "trees", None)
    max_depth = _resolve(max_depth, cfg_file, "max_depth", None)
    cv_k = int(_resolve(cv_k, cfg_file, "cv_k", 5))
    attr_sample = int(_resolve(attr_sample, cfg_file, "attr_sample", 2000))
    target_class = _resolve(target_class, cfg_file, "target_class", None)

    ds, _ = _load_artifact_dataset(data)
    budget = int(_resolve(budget, cfg_file, "budget", ds.n_features))
    run_config = {
        "command": "select", "data": str(data), "level": level, "max_runs": max_runs,
        "alpha": alpha, "trees": trees, "max_depth": max_depth, "budget": budget,
        "cv_k": cv_k, "target_class": target_class, "attr_sample": attr_sample,
        "seed": seed, "out": out,
    }
    out_path = _out_dir(out)
    hier = dataset.DEFAULT_HIERARCHY
    labels = dataset.coarsen_labels(ds.labels, hier, level)

    forest_kw = {}
    if trees is not None:
        forest_kw["n_trees"] = int(trees)
    if max_depth is not None:
        forest_kw["max_depth"] = int(max_depth)
    config = boruta.BorutaConfig(
        max_runs=max_runs, alpha=alpha,
        forest=learners.ForestParams(**forest_kw),
        seed=derive_seed(seed, "boruta-seed"),
    )
    try:
        result = boruta.boruta_run(ds, labels, config)
    except ValueError as exc:
        raise click.ClickException(str(exc))

    write_json(out_path / "boruta.json", result.to_jsonable(), config=run_config)
    atomic_write_text(out_path / "ranking.txt", result.ranking_text())

    classes = sorted(set(labels.tolist()))
    if target_class is None:
        target_class = dataset.BENIGN if dataset.BENIGN in classes else classes[0]
    attr_rng = substream(seed, "attr-sample")
    rows = attr_rng.choice(ds.n_records, size=min(attr_sample, ds.n_records), replace=False)
    attr_forest = learners.fit_forest(
        ds.records[rows], labels[rows],
        learners.ForestParams(**forest_kw, seed=derive_seed(seed, "attr-forest")),
        classes=tuple(classes),
    )
    report = attribution.attribution_report(
        attr_forest, ds.records[rows], target_class, feature_names=ds.schema.feature_names
    )
    write_json(out_path / "attribution.json", report.to_jsonable(), config=run_config)

    search = attribution.guided_subset_search(
        result.ranking, ds, level, budget=budget,
        flagged=report.flagged,
        config=attribution.SearchConfig(
            cv_k=cv_k,
            forest=learners.ForestParams(**forest_kw) if forest_kw else attribution.SearchConfig().forest,
            seed=seed,
        ),
    )
    write_json(out_path / "search.json", search.to_jsonable(), config=run_config)
    write_csv(out_path / "search_trace.csv", search.trace_csv_rows(), config=run_config)
    atomic_write_text(out_path / "subset.txt", "\n".join(search.selected) + "\n")
    figures.save_f1_curve(search.trace, out_path / "figures" / "f1_vs_features.png")

    click.echo(f"ranking: {len(result.ranking)} features "
               f"({len(result.confirmed())} confirmed)")
    click.echo(f"selected subset ({len(search.selected)}): {', '.join(search.selected)}")
    click.echo(f"best weighted F1: {search.best_weighted_f1:.2f}"
               + (" (target reached)" if search.reached_target else ""))


def _level_specs(kind: str, feature_files: tuple[str, ...], params: dict):
    subsets = [_read_feature_file(f) for f in feature_files]
    if len(subsets) == 1:
        subsets = subsets * 3
    if len(subsets) != 3:
        raise click.UsageError("--features-file must be given once or three times")
    return tuple(hierarchy.LevelSpec(kind, feats, dict(params)) for feats in subsets)


@main.command("train-eval")
@click.option("--data", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["hier", "flat", "fed"]), default=None)
@click.option("--learner", type=click.Choice(list(hierarchy.LEARNER_KINDS)), default=None)
@click.option("--features-file", "feature_files", multiple=True, type=click.Path(),
              help="Ranked feature list; once for all levels or three times (L1 L2 L3).")
@click.option("--k", type=int, default=None, help="Cross-validation folds.")
@click.option("--trees", type=int, default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--level", "fed_level", type=click.Choice(["1", "2", "3", "all"]), default=None,
              help="Class setting(s) for fed mode.")
@click.option("--clients", type=int, default=None)
@click.option("--rounds", type=int, default=None)
@click.option("--local-epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_train_eval(data, mode, learner, feature_files, k, trees, max_depth, fed_level,
                   clients, rounds, local_epochs, batch_size, learning_rate,
                   out, seed, config_path):
    """Train and evaluate the cascade, a flat baseline, or the federated run."""
    cfg_file = _load_config_file(config_path)
    seed = _resolve_seed(seed, cfg_file)
    mode = _resolve(mode, cfg_file, "mode", "hier")
    learner = _resolve(learner, cfg_file, "learner", "forest")
    k = int(_resolve(k, cfg_file, "k", 10))
    trees = _resolve(trees, cfg_file, "trees", None)
    max_depth = _resolve(max_depth, cfg_file, "max_depth", None)
    fed_level = _resolve(fed_level, cfg_file, "level", "all")
    clients = int(_resolve(clients, cfg_file, "clients", 10))
    rounds = int(_resolve(rounds, cfg_file, "rounds", 5))
    local_epochs = int(_resolve(local_epochs, cfg_file, "local_epochs", 50))
    batch_size = int(_resolve(batch_size, cfg_file, "batch_size", 25))
    learning_rate = float(_resolve(learning_rate, cfg_file, "learning_rate", 1e-3))
    if not feature_files:
        file_cfg = cfg_file.get("features_file")
        if file_cfg:
            feature_files = tuple(file_cfg) if isinstance(file_cfg, list) else (file_cfg,)
    if not feature_files:
        raise click.UsageError("--features-file is required")

    ds, _ = _load_artifact_dataset(data)
    run_config = {
        "command": "train-eval", "data": str(data), "mode": mode, "learner": learner,
        "features_file": list(feature_files), "k": k, "trees": trees,
        "max_depth": max_depth, "level": fed_level, "clients": clients,
        "rounds": rounds, "local_epochs": local_epochs, "batch_size": batch_size,
        "learning_rate": learning_rate, "seed": seed, "out": out,
    }
    out_path = _out_dir(out)
    params = {}
    if trees is not None:
        params["n_trees"] = int(trees)
    if max_depth is not None:
        params["max_depth"] = int(max_depth)
    if learner == "logistic":
        params = {}

    try:
        folds = dataset.stratified_folds(ds, k, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    write_json(out_path / "folds.json", folds.to_jsonable(), config=run_config)

    def echo_table(title, table):
        click.echo(title)
        click.echo(f"  {'class':<26}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}")
        for row in table.csv_rows():
            click.echo(f"  {row[0]:<26}{row[1]:>10}{row[2]:>10}{row[3]:>10}{row[4]:>9}")

    if mode == "hier":
        specs = _level_specs(learner, feature_files, params)
        config = hierarchy.HierConfig(levels=specs, seed=seed)
        result = hierarchy.evaluate_hierarchy(ds, config, folds)
        tables = {f"level{lvl}": tab for lvl, tab in result.level_tables.items()}
        metric_table_csv(out_path / "metrics_hier.csv", tables, config=run_config)
        write_json(out_path / "metrics_hier.json",
                   {name: tab.to_jsonable() for name, tab in tables.items()},
                   config=run_config)
        write_json(out_path / "routed_stats.json", result.routed.to_jsonable(),
                   config=run_config)
        write_json(out_path / "timing_hier.json", result.timing.to_jsonable(),
                   config=run_config)
        figures.save_metric_bars(tables, out_path / "figures" / "metrics_hier.png")
        figures.save_timing_bars({"hierarchical": result.timing},
                                 out_path / "figures" / "timing_hier.png")
        # the deployable bundle: the cascade retrained on the full dataset
        full_model = hierarchy.train_hierarchy(ds, config, np.arange(ds.n_records))
        write_json(out_path / "cascade.json",
                   hierarchy.hier_model_to_document(full_model), config=run_config)
        for lvl in (1, 2, 3):
            echo_table(f"level {lvl} ({folds.k}-fold averages):",
                       result.level_tables[lvl])
        click.echo(f"routed accuracy {result.routed.accuracy:.2f}, "
                   f"disagreement rate {result.routed.disagreement_rate:.4f}")
    elif mode == "flat":
        feats = _read_feature_file(feature_files[-1])
        spec = hierarchy.LevelSpec(learner, feats, dict(params))
        result = hierarchy.flat_baseline(ds, spec, folds, seed=seed)
        metric_table_csv(out_path / "metrics_flat.csv", {"flat": result.table},
                         config=run_config)
        write_json(out_path / "metrics_flat.json", result.table.to_jsonable(),
                   config=run_config)
        write_json(out_path / "timing_flat.json", result.timing.to_jsonable(),
                   config=run_config)
        figures.save_metric_bars({"flat": result.table},
                                 out_path / "figures" / "metrics_flat.png")
        echo_table(f"flat 6-class ({folds.k}-fold averages):", result.table)
    else:
        feats = _read_feature_file(feature_files[-1])
        levels = (1, 2, 3) if fed_level == "all" else (int(fed_level),)
        fed_config = fedsim.FedConfig(
            n_clients=clients, rounds=rounds, local_epochs=local_epochs,
            batch_size=batch_size, learning_rate=learning_rate, seed=seed,
        )
        runs = {}
        rows = [["level", "round", "accuracy", "weighted_f1", "macro_f1"]]
        for lvl in levels:
            try:
                run = fedsim.run_federation(ds, lvl, feats, fed_config)
            except ValueError as exc:
                raise click.ClickException(str(exc))
            runs[lvl] = run
            for rec in run.rounds:
                rows.append([str(lvl), str(rec.round_idx), f"{rec.accuracy:.4f}",
                             f"{rec.table.weighted_f1:.4f}", f"{rec.table.macro_f1:.4f}"])
            click.echo(f"fed level {lvl}: final accuracy {run.final_accuracy:.2f} "
                       f"({len(run.client_sizes)} clients, {rounds} rounds)")
        write_json(out_path / "metrics_fed.json",
                   {f"level{lvl}": run.to_jsonable() for lvl, run in runs.items()},
                   config=run_config)
        write_csv(out_path / "fed_rounds.csv", rows, config=run_config)
        metric_table_csv(
            out_path / "metrics_fed.csv",
            {f"level{lvl}": run.rounds[-1].table for lvl, run in runs.items()},
            config=run_config,
        )
        for lvl, run in runs.items():
            figures.save_fed_rounds(run.rounds,
                                    out_path / "figures" / f"fed_rounds_level{lvl}.png")
    click.echo(f"artifacts written to {out_path}")


@main.command("simulate")
@click.option("--sim-config", type=click.Path(), default=None,
              help="JSON with network-configuration fields.")
@click.option("--stub-attack-rate", type=float, default=None)
@click.option("--stub-spoof-rate", type=float, default=None)
@click.option("--model-bundle", type=click.Path(), default=None,
              help="Trained cascade JSON (from the library) to classify with.")
@click.option("--dataset", "dataset_path", type=click.Path(), default=None,
              help="Record pool for --model-bundle classification.")
@click.option("--duration", type=float, default=None)
@click.option("--density", type=float, default=None)
@click.option("--vehicles-per-rsu", type=int, default=None)
@click.option("--rsus-per-edge", type=int, default=None)
@click.option("--sweep-density", default=None,
              help="Comma-separated densities for a sweep table.")
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_simulate(sim_config, stub_attack_rate, stub_spoof_rate, model_bundle,
                 dataset_path, duration, density, vehicles_per_rsu, rsus_per_edge,
                 sweep_density, out, seed, config_path):
    """Run the tiered-deployment simulator and write the overhead report."""
    cfg_file = _load_config_file(config_path)
    seed = _resolve_seed(seed, cfg_file)
    sim_fields = {}
    if sim_config:
        sim_fields = _load_config_file(sim_config)
    for key, value in (("duration_s", duration), ("density_veh_per_km", density)):
        if value is not None:
            sim_fields[key] = value
    sim_fields.setdefault("seed", seed)
    stub_attack_rate = _resolve(stub_attack_rate, cfg_file, "stub_attack_rate", None)
    stub_spoof_rate = _resolve(stub_spoof_rate, cfg_file, "stub_spoof_rate", 0.5)
    vehicles_per_rsu = int(_resolve(vehicles_per_rsu, cfg_file, "vehicles_per_rsu", 30))
    rsus_per_edge = int(_resolve(rsus_per_edge, cfg_file, "rsus_per_edge", 3))

    try:
        config = deploysim.SimConfig(**sim_fields)
        topo = deploysim.TierTopology(vehicles_per_rsu, rsus_per_edge)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid simulation config: {exc}")

    run_config = {
        "command": "simulate", "sim": config.to_jsonable(),
        "vehicles_per_rsu": vehicles_per_rsu, "rsus_per_edge": rsus_per_edge,
        "stub_attack_rate": stub_attack_rate, "stub_spoof_rate": stub_spoof_rate,
        "model_bundle": model_bundle, "dataset": dataset_path,
        "sweep_density": sweep_density, "seed": seed, "out": out,
    }
    out_path = _out_dir(out)

    classifier = None
    if model_bundle:
        if not dataset_path:
            raise click.UsageError("--model-bundle needs --dataset for a record pool")
        try:
            with open(model_bundle, "r", encoding="utf-8") as handle:
                model = hierarchy.hier_model_from_document(json.load(handle))
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot load model bundle: {exc}")
        ds, _ = _load_artifact_dataset(dataset_path)
        classifier = deploysim.ModelClassifier(model, ds.records)
    elif stub_attack_rate is not None:
        try:
            classifier = deploysim.RateStub(float(stub_attack_rate), float(stub_spoof_rate))
        except ValueError as exc:
            raise click.UsageError(str(exc))

    state = deploysim.build_topology(config, topo)
    report = deploysim.run_sim(state, classifier)
    write_json(out_path / "overhead.json", report.to_jsonable(), config=run_config)
    rows = deploysim.sweep_csv_rows([report])
    write_csv(out_path / "overhead.csv", rows, config=run_config)
    figures.save_overhead_panels(report, out_path / "figures" / "overhead.png")

    if sweep_density:
        try:
            densities = [float(v) for v in str(sweep_density).split(",") if v.strip()]
        except ValueError:
            raise click.UsageError(f"bad sweep density list: {sweep_density!r}")
        factory = None
        if stub_attack_rate is not None:
            factory = lambda cfg: deploysim.RateStub(float(stub_attack_rate),
                                                     float(stub_spoof_rate))
        reports = deploysim.sweep(config, topo, densities=densities,
                                  classifier_factory=factory)
        write_csv(out_path / "sweep.csv", deploysim.sweep_csv_rows(reports),
                  config=run_config)

    click.echo(f"vehicles {report.n_vehicles}, RSUs {report.n_rsus}, "
               f"near-edge nodes {report.n_edges}")
    click.echo(f"response-time overhead {report.response_overhead_pct:.4f}% "
               f"(memory {report.per_vehicle_memory_kb:g} KB/vehicle)")
    click.echo(f"forwarded to RSU: {report.forwarded_to_rsu} of {report.packets} packets")
    click.echo(f"artifacts written to {out_path}")


if __name__ == "__main__":
    main()
