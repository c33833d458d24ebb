"""Command-line interface.

Commands:
  featurize         call-graph documents -> profile + feature-image caches
  train-encoder     contrastive pretraining on a dataset directory
  train-classifier  linear head on a frozen encoder
  classify          label call graphs with a trained checkpoint
  explain           class-activation heatmap + feature attribution
  ssim-matrix       family-by-family heatmap similarity matrix
  obfuscate         apply a transform spec to a graph document
  synth             generate a labeled synthetic dataset directory
  benchmark         ten-fold CV + per-obfuscator robustness table

Exit codes: 1 usage, 2 input format, 3 hash mismatch, 4 numeric failure.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from .callgraph import ApiRegistry, default_registry, load_graph, load_registry, serialize_graph
from .centrality import KatzParams, profile, save_profile
from .dataset import LabeledDataset
from .errors import GraphFamError, InputFormatError
from .explain import (
    attribute,
    attribution_csv_rows,
    gradcam_pp,
    heatmap_csv_rows,
    heatmap_family_matrix,
    save_heatmap_png,
    write_csv,
)
from .imagegen import FeatureImage, export_png, layout_for, save_image, to_image
from .nnet import load_checkpoint, save_checkpoint
from .obfusim import parse_transform
from .report import (
    FAMILIAL_CLASSIFICATION,
    IMAGE_GENERATION,
    INTERPRETATION,
    STATIC_ANALYSIS,
    RunReport,
)
from .synth import SynthConfig, gen_dataset
from .training import (
    AugmentationPolicy,
    SupConConfig,
    classify as classify_image,
    train_classifier,
    train_encoder,
)


def _load_registry_arg(path: str | None) -> ApiRegistry:
    if path is None:
        return default_registry()
    return load_registry(Path(path).read_bytes())


def _read_graph(path, registry: ApiRegistry):
    return load_graph(Path(path).read_bytes(), registry)


def load_dataset_dir(path, registry: ApiRegistry,
                     katz: KatzParams = KatzParams()) -> LabeledDataset:
    """Read a synth output directory (manifest.json + graph documents)."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise InputFormatError(f"{root}: no manifest.json (not a dataset directory)")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("registry_hash") != registry.content_hash:
        from .errors import HashMismatchError

        raise HashMismatchError(f"{root}: dataset was generated for a different registry")
    items = manifest["items"]
    layout = layout_for(registry.size)
    images = np.zeros((len(items), layout.side, layout.side))
    labels = np.zeros(len(items), dtype=np.int64)
    label_names = tuple(manifest["label_names"])
    graphs = []
    for i, item in enumerate(items):
        g = _read_graph(root / item["path"], registry)
        graphs.append(g)
        images[i] = to_image(profile(g, registry, katz), layout).pixels
        labels[i] = label_names.index(item["family"])
    return LabeledDataset(images=images, labels=labels, label_names=label_names,
                          layout=layout, registry_hash=registry.content_hash,
                          graphs=graphs)


def _default_cache_dir() -> str:
    return os.environ.get("GRAPHFAM_CACHE_DIR", "graphfam-cache")


@click.group()
def cli():
    """Call-graph familial classification toolkit."""


def _featurize_one(args) -> list[str]:
    graph_path, registry_path, out_dir, png = args
    registry = _load_registry_arg(registry_path)
    g = _read_graph(graph_path, registry)
    prof = profile(g, registry, KatzParams())
    img = to_image(prof, layout_for(registry.size))
    stem = Path(graph_path).stem
    out = Path(out_dir)
    written = []
    save_profile(prof, out / f"{stem}.cprof")
    written.append(str(out / f"{stem}.cprof"))
    save_image(img, out / f"{stem}.cimg")
    written.append(str(out / f"{stem}.cimg"))
    if png:
        export_png(img, out / f"{stem}.png")
        written.append(str(out / f"{stem}.png"))
    return written


@cli.command()
@click.argument("graphs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True), help="registry file (default: bundled)")
@click.option("--out-dir", default=None, help="cache directory (env GRAPHFAM_CACHE_DIR)")
@click.option("--png/--no-png", default=False, help="also export grayscale PNGs")
@click.option("--jobs", default=1, show_default=True, help="parallel workers")
def featurize(graphs, registry, out_dir, png, jobs):
    """Turn call-graph documents into centrality profiles and feature images."""
    out = Path(out_dir or _default_cache_dir())
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(command="featurize")
    tasks = [(g, registry, str(out), png) for g in graphs]
    with report.stage(IMAGE_GENERATION):
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_featurize_one, tasks))
        else:
            results = [_featurize_one(t) for t in tasks]
    for written in results:
        for path in written:
            report.add_output(path)
            click.echo(f"wrote {path}")
    report.save(out / "featurize_report.json")
    for line in report.summary_lines():
        click.echo(line)


@cli.command("train-encoder")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=100, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--learning-rate", default=0.05, show_default=True)
@click.option("--temperature", default=0.07, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--aug", type=click.Choice(["pixel", "graph"]), default="pixel",
              show_default=True, help="augmentation policy for the two views")
@click.option("--pool-views", default=4, show_default=True,
              help="precomputed views per item in graph mode")
def train_encoder_cmd(dataset_dir, registry, out, epochs, batch_size,
                      learning_rate, temperature, seed, aug, pool_views):
    """Contrastive pretraining; writes the encoder checkpoint + loss log."""
    reg = _load_registry_arg(registry)
    report = RunReport(command="train-encoder", seed=seed)
    with report.stage(STATIC_ANALYSIS):
        ds = load_dataset_dir(dataset_dir, reg)
    cfg = SupConConfig(temperature=temperature, learning_rate=learning_rate,
                       batch_size=batch_size, epochs=epochs, seed=seed)
    policy = AugmentationPolicy(mode=aug)
    with report.stage(FAMILIAL_CLASSIFICATION):
        if aug == "graph":
            from .training import build_augmentation_pool

            ds = build_augmentation_pool(ds, policy, reg, views=pool_views, seed=seed)
        result = train_encoder(ds, cfg, policy, registry=reg)
    save_checkpoint(result.checkpoint, out)
    report.add_output(out)
    loss_csv = Path(out).with_suffix(".losses.csv")
    write_csv([["epoch", "mean_loss"]] +
              [[i + 1, f"{v:.8f}"] for i, v in enumerate(result.epoch_losses)], loss_csv)
    report.add_output(loss_csv)
    click.echo(f"wrote {out} and {loss_csv}")
    for line in report.summary_lines():
        click.echo(line)


@cli.command("train-classifier")
@click.option("--encoder", "encoder_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=100, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--learning-rate", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_classifier_cmd(encoder_path, dataset_dir, registry, out, epochs,
                         batch_size, learning_rate, seed):
    """Fit the one-layer classifier head on a frozen encoder."""
    reg = _load_registry_arg(registry)
    encoder = load_checkpoint(encoder_path, registry=reg)
    report = RunReport(command="train-classifier", seed=seed)
    with report.stage(STATIC_ANALYSIS):
        ds = load_dataset_dir(dataset_dir, reg)
    cfg = SupConConfig(learning_rate=learning_rate, batch_size=batch_size,
                       epochs=epochs, seed=seed)
    with report.stage(FAMILIAL_CLASSIFICATION):
        result = train_classifier(encoder, ds, cfg)
    save_checkpoint(result.checkpoint, out)
    report.add_output(out)
    click.echo(f"wrote {out}")
    for line in report.summary_lines():
        click.echo(line)


def _featurize_pixels(args):
    graph_path, registry_path = args
    registry = _load_registry_arg(registry_path)
    g = _read_graph(graph_path, registry)
    img = to_image(profile(g, registry, KatzParams()), layout_for(registry.size))
    return img.pixels


@cli.command("classify")
@click.argument("graphs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True))
@click.option("--jobs", default=1, show_default=True, help="parallel featurization workers")
def classify_cmd(graphs, ckpt_path, registry, jobs):
    """Print the predicted family and score vector for each graph."""
    reg = _load_registry_arg(registry)
    ck = load_checkpoint(ckpt_path, registry=reg)
    report = RunReport(command="classify", config_digest=ck.config.digest())
    layout = layout_for(reg.size)
    with report.stage(IMAGE_GENERATION):
        tasks = [(path, registry) for path in graphs]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                pixel_stacks = list(pool.map(_featurize_pixels, tasks))
        else:
            pixel_stacks = [_featurize_pixels(t) for t in tasks]
    for path, pixels in zip(graphs, pixel_stacks):
        img = FeatureImage(pixels=pixels, layout=layout,
                           registry_hash=reg.content_hash, source_hash="00" * 32)
        with report.stage(FAMILIAL_CLASSIFICATION):
            label, scores = classify_image(ck, img)
        score_str = " ".join(f"{lab}={s:.4f}" for lab, s in zip(ck.labels, scores))
        click.echo(f"{path}\t{label}\t{score_str}")
    for line in report.summary_lines():
        click.echo(line)


@cli.command("explain")
@click.argument("graphs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--target", default=None, help="family to explain (default: prediction)")
@click.option("--top-k", default=10, show_default=True)
@click.option("--jobs", default=1, show_default=True, help="parallel featurization workers")
def explain_cmd(graphs, ckpt_path, registry, out_dir, target, top_k, jobs):
    """Write heatmaps (PNG + CSV), attribution CSVs, and figures."""
    from .figures import heatmap_figure

    reg = _load_registry_arg(registry)
    ck = load_checkpoint(ckpt_path, registry=reg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(command="explain", config_digest=ck.config.digest())
    layout = layout_for(reg.size)
    with report.stage(IMAGE_GENERATION):
        tasks = [(path, registry) for path in graphs]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                pixel_stacks = list(pool.map(_featurize_pixels, tasks))
        else:
            pixel_stacks = [_featurize_pixels(t) for t in tasks]
    for path, pixels in zip(graphs, pixel_stacks):
        img = FeatureImage(pixels=pixels, layout=layout,
                           registry_hash=reg.content_hash, source_hash="00" * 32)
        with report.stage(FAMILIAL_CLASSIFICATION):
            label, _scores = classify_image(ck, img)
        explained = target if target is not None else label
        with report.stage(INTERPRETATION):
            heat = gradcam_pp(ck, img, explained)
            att = attribute(heat, img.layout, top_k)
        stem = Path(path).stem
        save_heatmap_png(heat, out / f"{stem}.heatmap.png")
        write_csv(heatmap_csv_rows(heat, img.layout, reg), out / f"{stem}.heatmap.csv")
        write_csv(attribution_csv_rows(att, reg), out / f"{stem}.attribution.csv")
        heatmap_figure(heat.grid, out / f"{stem}.heatmap_fig.png",
                       title=f"{stem}: {explained}")
        for suffix in (".heatmap.png", ".heatmap.csv", ".attribution.csv",
                       ".heatmap_fig.png"):
            report.add_output(out / f"{stem}{suffix}")
        click.echo(f"{path}: predicted {label}; explained {explained}")
        for api, kind, weight in att.entries:
            click.echo(f"  {weight:.4f}  {reg.entries[api]} [{kind}]")
    report.save(out / "explain_report.json")
    for line in report.summary_lines():
        click.echo(line)


@cli.command("ssim-matrix")
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--per-family", default=8, show_default=True,
              help="heatmaps sampled per family")
def ssim_matrix_cmd(ckpt_path, dataset_dir, registry, out_dir, per_family):
    """Mean pairwise heatmap similarity within and across families."""
    from .figures import similarity_matrix_figure

    reg = _load_registry_arg(registry)
    ck = load_checkpoint(ckpt_path, registry=reg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(command="ssim-matrix", config_digest=ck.config.digest())
    with report.stage(STATIC_ANALYSIS):
        ds = load_dataset_dir(dataset_dir, reg)
    heatmaps, labels = [], []
    with report.stage(INTERPRETATION):
        for fam_idx, fam in enumerate(ds.label_names):
            idx = np.flatnonzero(ds.labels == fam_idx)[:per_family]
            for i in idx:
                img = FeatureImage(pixels=ds.images[i], layout=ds.layout,
                                   registry_hash=ds.registry_hash,
                                   source_hash="00" * 32)
                heatmaps.append(gradcam_pp(ck, img, fam))
                labels.append(fam)
        matrix, order = heatmap_family_matrix(heatmaps, labels)
    rows = [["family"] + list(order)]
    for i, fam in enumerate(order):
        rows.append([fam] + [f"{v:.6f}" for v in matrix[i]])
    write_csv(rows, out / "ssim_matrix.csv")
    similarity_matrix_figure(matrix, order, out / "ssim_matrix.png")
    report.add_output(out / "ssim_matrix.csv")
    report.add_output(out / "ssim_matrix.png")
    within = float(np.mean(np.diag(matrix)))
    between = float((matrix.sum() - np.trace(matrix)) / max(matrix.size - len(order), 1))
    click.echo(f"mean within-family SSIM  {within:.4f}")
    click.echo(f"mean between-family SSIM {between:.4f}")
    report.save(out / "ssim_report.json")
    for line in report.summary_lines():
        click.echo(line)


@cli.command("obfuscate")
@click.argument("graph", type=click.Path(exists=True))
@click.option("--transform", "spec", required=True,
              help="e.g. rename+callind:0.5+junk:20:2 (see obfusim docs)")
@click.option("--seed", default=0, show_default=True)
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def obfuscate_cmd(graph, spec, seed, registry, out):
    """Apply a transform spec to a call-graph document."""
    reg = _load_registry_arg(registry)
    g = _read_graph(graph, reg)
    pipe = parse_transform(spec)
    transformed = pipe.apply(g, reg, seed)
    Path(out).write_bytes(serialize_graph(transformed))
    click.echo(f"wrote {out} ({transformed.node_count} nodes, "
               f"{transformed.edge_count} edges)")


@cli.command("synth")
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--families", default=10, show_default=True)
@click.option("--variants", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--core-size", default=8, show_default=True)
@click.option("--core-overlap", default=8, show_default=True)
@click.option("--noise-rate", default=0.05, show_default=True)
def synth_cmd(registry, out_dir, families, variants, seed, core_size,
              core_overlap, noise_rate):
    """Generate a labeled synthetic dataset directory (graphs + manifest)."""
    reg = _load_registry_arg(registry)
    cfg = SynthConfig(families=families, variants=variants, seed=seed,
                      core_size=core_size, overlap_budget=core_overlap,
                      noise_api_rate=noise_rate)
    res = gen_dataset(cfg, reg)
    out = Path(out_dir)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    manifest = dict(res.manifest)
    manifest["label_names"] = list(res.dataset.label_names)
    for i, item in enumerate(manifest["items"]):
        rel = f"graphs/{item['family']}_{item['variant']:05d}.json"
        (out / rel).write_bytes(serialize_graph(res.dataset.graphs[i]))
        item["path"] = rel
        item["label"] = int(res.dataset.labels[i])
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    click.echo(f"wrote {len(manifest['items'])} graphs under {out} "
               f"(digest {res.dataset.digest()[:16]})")


@cli.command("benchmark")
@click.option("--registry", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True),
              help="reuse an existing dataset directory instead of generating")
@click.option("--families", default=10, show_default=True)
@click.option("--variants", default=200, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--encoder-epochs", default=6, show_default=True)
@click.option("--classifier-epochs", default=50, show_default=True)
@click.option("--no-contrastive", is_flag=True,
              help="ablation: joint cross-entropy training, no contrastive stage")
@click.option("--indirection-rate", default=1.0, show_default=True)
def benchmark_cmd(registry, out_dir, dataset_dir, families, variants, folds,
                  seed, encoder_epochs, classifier_epochs, no_contrastive,
                  indirection_rate):
    """Ten-fold CV plus the per-obfuscator robustness table."""
    from .figures import confusion_figure, robustness_figure

    reg = _load_registry_arg(registry)
    cfg = bench_mod.BenchmarkConfig(
        families=families, variants=variants, folds=folds, seed=seed,
        contrastive=not no_contrastive, encoder_epochs=encoder_epochs,
        classifier_epochs=classifier_epochs, indirection_rate=indirection_rate,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(command="benchmark", seed=seed)
    dataset = None
    if dataset_dir is not None:
        with report.stage(STATIC_ANALYSIS):
            dataset = load_dataset_dir(dataset_dir, reg)
    result = bench_mod.run_benchmark(reg, cfg, dataset=dataset, report=report)
    mode = "contrastive" if cfg.contrastive else "no-contrastive"
    write_csv(result.robustness_csv_rows(), out / f"robustness_{mode}.csv")
    fold_rows = [["fold", "accuracy", "macro_f1"]]
    fold_rows += [[i, f"{m.accuracy:.6f}", f"{m.macro_f1:.6f}"]
                  for i, m in enumerate(result.cv.fold_metrics)]
    fold_rows.append(["mean", f"{result.cv.mean_accuracy:.6f}",
                      f"{result.cv.mean_macro_f1:.6f}"])
    write_csv(fold_rows, out / f"crossval_{mode}.csv")
    with open(out / f"metrics_{mode}.json", "w") as fh:
        json.dump([m.to_dict() for m in result.cv.fold_metrics], fh, indent=1)
    from .training import Metrics

    aggregate = Metrics(labels=result.cv.fold_metrics[0].labels,
                        confusion=result.cv.confusion_total)
    write_csv(aggregate.csv_rows(), out / f"per_family_{mode}.csv")
    robustness_figure([(name, f1) for name, f1, _ in result.robustness],
                      out / f"robustness_{mode}.png")
    labels = result.cv.fold_metrics[0].labels
    confusion_figure(result.cv.confusion_total, labels, out / f"confusion_{mode}.png")
    for suffix in (f"robustness_{mode}.csv", f"crossval_{mode}.csv",
                   f"metrics_{mode}.json", f"robustness_{mode}.png",
                   f"confusion_{mode}.png"):
        report.add_output(out / suffix)
    click.echo(f"mode: {mode}; dataset digest {result.dataset_digest[:16]}")
    for line in result.table_lines():
        click.echo(line)
    report.save(out / f"benchmark_report_{mode}.json")
    for line in report.summary_lines():
        click.echo(line)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except GraphFamError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
