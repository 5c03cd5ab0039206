"""Batch driver: the full pipeline as independently runnable subcommands.

Stages hand artifacts to each other through files (features.csv,
model.json, PNGs, agreement reports), so any stage can be rerun in
isolation. With a fixed seed a rerun is byte-identical; timestamps never
leak into artifacts.
"""

from __future__ import annotations

import json
import multiprocessing
import sys
from pathlib import Path

import click
import numpy as np

from . import agreement as agreement_mod
from . import core
from .classifier import (
    evaluate,
    default_grid,
    grid_search,
    labels_to_int,
    load_model,
    save_model,
    train_forest,
    train_logistic,
    write_cv_table,
)
from .enhance import EnhancementParams, enhance
from .features import extract_features, ingest_vlm_scores, read_features_csv, write_features_csv
from .postprocess import PostprocessParams, postprocess_mask
from .shapley import explain_shapley, write_explanations


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        return json.loads(text)
    if p.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # Python 3.10
            try:
                import tomli as tomllib
            except ImportError as exc:
                raise click.ClickException("TOML config needs Python >= 3.11 or the tomli package; JSON always works") from exc
        return tomllib.loads(text)
    raise click.ClickException(f"config must be .json or .toml, got {p.suffix!r}")


def _stage_params(ctx, stage: str, overrides: dict) -> dict:
    cfg = dict(ctx.obj.get("config", {}).get(stage, {}))
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    return cfg


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="TOML/JSON per-stage overrides")
@click.pass_context
def main(ctx, config_path):
    """Fundus image curation pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _load_config(config_path)


def _extract_one(args):
    image_path, vlm = args
    try:
        img = core.load_image(image_path)
        return extract_features(img, vlm=vlm), None
    except core.CurationError as exc:
        return None, str(exc)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=None, help="parallel workers (default 1)")
@click.pass_context
def features(ctx, manifest_path, out_dir, jobs):
    """Extract the quality-feature vector for every image."""
    params = _stage_params(ctx, "features", {"jobs": jobs})
    jobs = int(params.get("jobs") or 1)
    manifest = core.load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = sorted(manifest.entries, key=lambda e: e.image_id)
    vlm_cache: dict[str, dict] = {}
    tasks = []
    for e in entries:
        vlm = None
        if e.vlm_scores:
            sidecar = str(manifest.resolve(e.vlm_scores))
            if sidecar not in vlm_cache:
                vlm_cache[sidecar] = ingest_vlm_scores(sidecar)
            vlm = vlm_cache[sidecar].get(e.image_id)
        tasks.append((str(manifest.resolve(e.path)), vlm))
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_extract_one, tasks)
    else:
        results = [_extract_one(t) for t in tasks]
    rows, failures = [], []
    for e, (feats, err) in zip(entries, results):
        if err is not None:
            failures.append(f"{e.image_id}: {err}")
        else:
            rows.append((e.image_id, feats, e.quality))
    write_features_csv(out / "features.csv", rows)
    if failures:
        core.atomic_write_text(out / "features.log", "\n".join(failures) + "\n")
        for line in failures:
            click.echo(f"skipped {line}", err=True)
        click.echo(f"wrote {out / 'features.csv'} ({len(rows)} rows, {len(failures)} skipped)", err=True)
        sys.exit(2)
    click.echo(f"wrote {out / 'features.csv'} ({len(rows)} rows)")


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--kind", type=click.Choice(["forest", "logistic"]), default=None)
@click.option("--ratio", type=float, default=None, help="train fraction (default 0.7)")
@click.option("--seed", type=int, default=None)
@click.option("--folds", type=int, default=None, help="CV folds for grid search (default 5)")
@click.option("--grid/--no-grid", "use_grid", default=True, help="grid-search hyperparameters")
@click.option("--class-weight/--no-class-weight", default=None, help="inverse-frequency class weights")
@click.pass_context
def train(ctx, features_path, out_dir, kind, ratio, seed, folds, use_grid, class_weight):
    """Train the good/bad classifier and report held-out metrics."""
    params = _stage_params(
        ctx, "train",
        {"kind": kind, "ratio": ratio, "seed": seed, "folds": folds, "class_weight": class_weight},
    )
    kind = params.get("kind", "forest")
    ratio = float(params.get("ratio", 0.7))
    seed = int(params.get("seed", 0))
    folds = int(params.get("folds", 5))
    class_weight = bool(params.get("class_weight", False))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ids, x, labels, schema = read_features_csv(features_path)
    from .classifier import split_dataset

    train_ids, test_ids = split_dataset(ids, labels, ratio=ratio, seed=seed)
    pos = {i: k for k, i in enumerate(ids)}
    tr = np.asarray([pos[i] for i in train_ids])
    te = np.asarray([pos[i] for i in test_ids])
    y = labels_to_int(labels)

    if use_grid:
        best, table = grid_search(default_grid(kind), x[tr], y[tr], folds=folds, seed=seed)
        write_cv_table(out / "cv_table.csv", table)
    else:
        best = default_grid(kind)[0]
    hp = {k: v for k, v in best.items() if k != "kind"}
    if kind == "forest":
        model = train_forest(x[tr], y[tr], schema, seed=seed, class_weight=class_weight, **hp)
    else:
        model = train_logistic(x[tr], y[tr], schema, class_weight=class_weight, **hp)

    # fixed-seed background subsample makes the saved model explainable
    rng = np.random.RandomState(seed)
    take = min(100, tr.size)
    model.background = x[tr][rng.choice(tr.size, size=take, replace=False)]
    save_model(model, out / "model.json")

    rep = evaluate(model, x[te], y[te])
    core.atomic_write_text(out / "eval.json", json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    click.echo(f"model: {kind} {hp}")
    click.echo(
        f"test: precision={rep.precision:.3f} recall={rep.recall:.3f} "
        f"F2={rep.f2:.3f} accuracy={rep.accuracy:.3f} (n={rep.tp + rep.fp + rep.fn + rep.tn})"
    )


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--explain", is_flag=True, default=False, help="write Shapley explanations")
def assess(features_path, model_path, manifest_path, out_dir, explain):
    """Apply a trained model; write verdicts and a labeled manifest copy."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    ids, x, _labels, schema = read_features_csv(features_path)
    model.check_schema(schema)
    probs = model.predict_proba(x) if len(ids) else np.zeros(0)
    verdicts = {i: ("good" if p >= 0.5 else "bad") for i, p in zip(ids, probs)}

    lines = ["image_id,probability_good,label"]
    for i, p in zip(ids, probs):
        lines.append(f"{i},{float(p)!r},{verdicts[i]}")
    core.atomic_write_text(out / "verdicts.csv", "\n".join(lines) + "\n")

    # labeled copy of the manifest; paths absolutized so the copy resolves
    manifest = core.load_manifest(manifest_path)

    def absolutize(e: core.ManifestEntry) -> core.ManifestEntry:
        return core.ManifestEntry(
            image_id=e.image_id,
            path=str(manifest.resolve(e.path)),
            quality=verdicts.get(e.image_id, e.quality),
            vlm_scores=str(manifest.resolve(e.vlm_scores)) if e.vlm_scores else None,
            annotations=tuple(
                core.ManifestAnnotation(
                    path=str(manifest.resolve(a.path)),
                    annotator=a.annotator,
                    lesion=a.lesion,
                    confidence=a.confidence,
                    expertise=a.expertise,
                )
                for a in e.annotations
            ),
            predictions={k: str(manifest.resolve(v)) for k, v in e.predictions.items()},
        )

    labeled = core.DatasetManifest(root=manifest.root, entries=tuple(absolutize(e) for e in manifest.entries))
    core.save_manifest(labeled, out / "manifest.json")

    if explain:
        if model.background is None:
            raise click.ClickException("model.json carries no background sample; retrain to enable --explain")
        explanations = [
            explain_shapley(model, x[k], model.background, schema=model.schema)
            for k in range(len(ids))
        ]
        write_explanations(out / "explanation.json", explanations, ids)
    click.echo(f"assessed {len(ids)} images -> {out / 'verdicts.csv'}")


@main.command("enhance")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--clip", type=float, default=None, help="CLAHE clip multiple (default 3.0)")
@click.option("--no-clahe", is_flag=True, default=False, help="skip CLAHE, keep crop+gamma")
@click.option("--grid-cols", type=int, default=None)
@click.option("--grid-rows", type=int, default=None)
@click.option("--gamma", type=float, default=None, help="gamma exponent (default 0.8)")
@click.pass_context
def enhance_cmd(ctx, manifest_path, out_dir, clip, no_clahe, grid_cols, grid_rows, gamma):
    """Write <id>.enhanced.png for every manifest image."""
    p = _stage_params(
        ctx, "enhance",
        {"clip": clip, "grid_cols": grid_cols, "grid_rows": grid_rows, "gamma": gamma},
    )
    params = EnhancementParams(
        clahe_clip=None if no_clahe else float(p.get("clip", 3.0)),
        tile_grid=(int(p.get("grid_cols", 8)), int(p.get("grid_rows", 8))),
        gamma=float(p.get("gamma", 0.8)),
    )
    manifest = core.load_manifest(manifest_path)
    stage_dir = Path(out_dir) / "enhance"
    stage_dir.mkdir(parents=True, exist_ok=True)
    for e in sorted(manifest.entries, key=lambda e: e.image_id):
        img = core.load_image(manifest.resolve(e.path))
        result, _box = enhance(img, params)
        core.save_image(result, stage_dir / f"{Path(e.path).stem}.enhanced.png")
    click.echo(f"enhanced {len(manifest.entries)} images -> {stage_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--window", type=int, default=None)
@click.option("--k-bright", type=float, default=None)
@click.option("--k-dark", type=float, default=None)
@click.option("--min-area", type=int, default=None)
@click.pass_context
def postprocess(ctx, manifest_path, out_dir, window, k_bright, k_dark, min_area):
    """Filter predicted lesion masks; writes <id>_<lesion>.pp.png."""
    p = _stage_params(
        ctx, "postprocess",
        {"window": window, "k_bright": k_bright, "k_dark": k_dark, "min_area": min_area},
    )
    params = PostprocessParams(
        window=int(p.get("window", 25)),
        k_bright=float(p.get("k_bright", 1.0)),
        k_dark=float(p.get("k_dark", 1.0)),
        min_area=int(p.get("min_area", 5)),
    )
    manifest = core.load_manifest(manifest_path)
    stage_dir = Path(out_dir) / "postprocess"
    stage_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for e in sorted(manifest.entries, key=lambda e: e.image_id):
        if not e.predictions:
            raise click.ClickException(f"missing predictions for image {e.image_id!r}")
        img = core.load_image(manifest.resolve(e.path))
        for lesion in sorted(e.predictions, key=lambda les: les.value):
            mask = core.load_mask(manifest.resolve(e.predictions[lesion]), lesion)
            filtered = postprocess_mask(img, mask, params)
            core.save_mask(filtered, stage_dir / f"{e.image_id}_{lesion.value}.pp.png")
            written += 1
    click.echo(f"post-processed {written} masks -> {stage_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--pairwise-low", type=float, default=None)
@click.option("--overall-discard", type=float, default=None)
@click.option("--outlier-count", type=int, default=None)
@click.pass_context
def agree(ctx, manifest_path, out_dir, pairwise_low, overall_discard, outlier_count):
    """Per-image agreement reports plus a corpus keep/discard summary."""
    p = _stage_params(
        ctx, "agree",
        {"pairwise_low": pairwise_low, "overall_discard": overall_discard, "outlier_count": outlier_count},
    )
    thresholds = agreement_mod.ProtocolThresholds(
        pairwise_low=float(p.get("pairwise_low", 0.4)),
        overall_discard=float(p.get("overall_discard", 0.4)),
        outlier_count=p.get("outlier_count"),
    )
    manifest = core.load_manifest(manifest_path)
    stage_dir = Path(out_dir) / "agree"
    stage_dir.mkdir(parents=True, exist_ok=True)
    counts = {"keep": 0, "discard": 0, "insufficient": 0}
    for e in sorted(manifest.entries, key=lambda e: e.image_id):
        annotations = core.load_annotations(manifest, e)
        rep = agreement_mod.report(e.image_id, annotations, thresholds)
        counts[rep.verdict] += 1
        core.atomic_write_text(stage_dir / f"{e.image_id}.agreement_report.json", rep.to_json())
        core.atomic_write_text(
            stage_dir / f"{e.image_id}.agreement_report.txt",
            rep.to_text(thresholds.per_lesion_slight),
        )
    core.atomic_write_text(stage_dir / "summary.json", json.dumps(counts, indent=2, sort_keys=True) + "\n")
    click.echo(f"agreement: {counts['keep']} keep / {counts['discard']} discard / {counts['insufficient']} insufficient")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8340)
@click.option("--thresholds", "thresholds_path", type=click.Path(exists=True), default=None)
def serve(store_dir, host, port, thresholds_path):
    """Run the annotation HTTP service over a manifest directory."""
    import uvicorn

    from .service import create_app, load_thresholds

    thresholds = load_thresholds(thresholds_path) if thresholds_path else None
    app = create_app(Path(store_dir), thresholds)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
