"""
transpose-kit command line.

Every command maps to one experiment step. Failures are rendered on stderr
and exit with status 2; `detect` exits with status 1 on a malicious verdict.
"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import Annotated, TypeVar

import numpy as np
import orjson
import polars as pl
import typer
from returns.result import Failure, Success, safe
from rich.console import Console
from rich.table import Table

from transpose_kit.config.experiment import ExperimentConfig, load_experiment
from transpose_kit.data.dataset import balanced_counts, select_memorized
from transpose_kit.detection.probe import detect as run_detect
from transpose_kit.detection.probe import mean_image
from transpose_kit.detection.threshold import select_threshold
from transpose_kit.errors import ConfigError, TransposeKitError
from transpose_kit.experiments.pipeline import prepare, run_training
from transpose_kit.experiments.sweeps import (
    ablation_study,
    capacity_sweep,
    detection_study,
    fine_tune_table,
    weight_decay_sweep,
)
from transpose_kit.extraction.extract import extract_all, quality_report
from transpose_kit.extraction.retrain import retrain_utility
from transpose_kit.extraction.store import load_extracted, save_extracted
from transpose_kit.indexing import IndexerConfig, SpatialIndexer
from transpose_kit.io.modelfile import load_model, read_model_file, save_model
from transpose_kit.log import get_logger, setup_logging
from transpose_kit.nn.architectures import parse_preset, preset
from transpose_kit.nn.oracles import run_oracle_suite
from transpose_kit.settings import RuntimeSettings
from transpose_kit.stego.embed import (
    StegoMethod,
    images_to_payload,
    load_manifest,
    manifest_path,
    payload_intact,
    save_manifest,
    stego_embed,
    stego_extract,
)
from transpose_kit.stego.noise import StegoVariant, TransposeVariant, noise_sweep

logger = get_logger(__name__)

app = typer.Typer(
    name="transpose-kit",
    help="Train, extract from, attack and defend bidirectional (transposed) models.",
    no_args_is_help=True,
)
sweep_app = typer.Typer(help="Experiment sweeps; each writes one CSV table.", no_args_is_help=True)
app.add_typer(sweep_app, name="sweep")

console = Console()
err_console = Console(stderr=True)

T = TypeVar("T")

EXIT_MALICIOUS = 1
EXIT_ERROR = 2


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Show debug logs.")] = False,
) -> None:
    settings = RuntimeSettings()
    setup_logging(
        theme=settings.log_theme,
        log_dir=settings.log_dir,
        app_name="transpose-kit",
        console_level="DEBUG" if verbose else "INFO",
    )


def _run(action: Callable[[], T]) -> T:
    """Run `action`; library and I/O errors end the command with exit status 2."""
    match safe(exceptions=(TransposeKitError, OSError))(action)():
        case Success(value):
            return value
        case Failure(error):
            err_console.print(f"[bold red]error:[/] {error}")
            logger.error("Command failed", extra={"error": str(error), "type": type(error).__name__})
            raise typer.Exit(EXIT_ERROR)
    raise AssertionError("unreachable")


def parse_counts(text: str, num_classes: int) -> dict[int, int]:
    """
    `0:10,1:10` gives explicit per-class counts; a bare integer is spread
    evenly over `num_classes`.
    """
    text = text.strip()
    if text.isdigit():
        return balanced_counts(num_classes, int(text))
    counts: dict[int, int] = {}
    for item in filter(None, text.split(",")):
        label, sep, count = item.partition(":")
        if not sep or not label.strip().isdigit() or not count.strip().isdigit():
            raise ConfigError(f"malformed count '{item}' (expected class:count)")
        counts[int(label)] = int(count)
    return counts


def parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"malformed number list '{text}'") from exc


def _write_frame(frame: pl.DataFrame, out: Path | None, title: str) -> None:
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.write_csv(out)
        logger.info("Wrote table", extra={"path": str(out), "rows": frame.height})
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(column)
    for row in frame.iter_rows():
        table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)


ConfigOption = Annotated[Path, typer.Option("--config", "-c", help="Experiment YAML file.")]


@app.command()
def train(
    config: ConfigOption,
    primary_only: Annotated[
        bool, typer.Option("--primary-only", help="Benign baseline: skip the memorization task.")
    ] = False,
) -> None:
    """Tandem training of the primary and memorization tasks."""

    def action() -> None:
        artifacts = run_training(load_experiment(config), primary_only)
        final = artifacts.report.final
        console.print(f"run directory: {artifacts.run_dir}")
        for key, value in final.items():
            console.print(f"  {key}: {value:.6g}")

    _run(action)


@app.command()
def extract(
    model: Annotated[Path, typer.Option("--model", "-m", help="Trained model file.")],
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory.")],
    counts: Annotated[
        str | None,
        typer.Option(help="Per-class counts '0:10,1:10' or a total; defaults to the trained counts."),
    ] = None,
    batch_size: int = 256,
) -> None:
    """Query the transposed model at every spatial index."""

    def action() -> None:
        loaded = read_model_file(model)
        meta = loaded.metadata
        if "indexer" not in meta:
            raise ConfigError(f"{model} carries no indexer metadata")
        indexer = SpatialIndexer(IndexerConfig.model_validate(meta["indexer"]))
        if counts is None:
            wanted = {int(k): int(v) for k, v in meta.get("counts", {}).items()}
        else:
            wanted = parse_counts(counts, int(meta.get("num_classes", 10)))
        extracted = extract_all(loaded.model, indexer, wanted, batch_size)
        save_extracted(extracted, out)
        console.print(f"extracted {len(extracted)} samples to {out}")

    _run(action)


@app.command(name="eval")
def evaluate(
    extracted: Annotated[Path, typer.Option(help="Directory written by `extract`.")],
    reference: Annotated[Path, typer.Option(help="Experiment YAML whose dataset holds the originals.")],
    aux: Annotated[Path | None, typer.Option(help="Auxiliary classifier model file.")] = None,
    out: Annotated[Path | None, typer.Option(help="Per-class CSV.")] = None,
) -> None:
    """MSE, SSIM and feature accuracy of extracted samples."""

    def action() -> None:
        samples = load_extracted(extracted)
        cfg = load_experiment(reference)
        train_set, _ = cfg.dataset.load(cfg.seed)
        indexer = SpatialIndexer(IndexerConfig.model_validate(samples.indexer))
        originals = select_memorized(train_set, samples.counts(), indexer)
        report = quality_report(samples, originals.images, load_model(aux) if aux else None)
        console.print(f"mean MSE:  {report.mean_mse:.6g}")
        console.print(f"mean SSIM: {report.mean_ssim:.6g}")
        if report.feature_accuracy is not None:
            console.print(f"feature accuracy: {report.feature_accuracy:.4f}")
        _write_frame(report.per_class_frame(), out, "per-class quality")

    _run(action)


@app.command()
def retrain(
    extracted: Annotated[Path, typer.Option(help="Directory written by `extract`.")],
    arch: Annotated[str, typer.Option(help="Preset, e.g. 'mnist_fc:width=256,depth=2'.")],
    config: ConfigOption,
) -> None:
    """Train a fresh classifier on extracted samples and report held-out accuracy."""

    def action() -> None:
        cfg = load_experiment(config)
        train_set, test_set = cfg.dataset.load(cfg.seed)
        samples = load_extracted(extracted).as_dataset(train_set.num_classes)
        name, options = parse_preset(arch)
        merged: dict[str, object] = {
            "classes": train_set.num_classes,
            "image_shape": train_set.sample_shape,
            **options,
        }
        specs, shape = preset(name, **merged)
        score = retrain_utility(samples, specs, shape, cfg.train, test_set)
        console.print(f"test accuracy from {len(samples)} extracted samples: {score:.4f}")

    _run(action)


@app.command()
def stego(
    action_name: Annotated[str, typer.Argument(metavar="embed|extract")],
    model: Annotated[Path, typer.Option("--model", "-m")],
    out: Annotated[Path, typer.Option("--out", "-o", help="Carrier model or payload file.")],
    method: Annotated[str, typer.Option(help="lsb, last_bytes or dead_kernel.")] = "lsb",
    payload: Annotated[Path | None, typer.Option(help="Raw payload file to hide.")] = None,
    config: Annotated[Path | None, typer.Option(help="Hide images from this experiment's dataset.")] = None,
    images: Annotated[int, typer.Option(help="Number of dataset images to hide.")] = 64,
    bits: Annotated[int, typer.Option(help="Bits per parameter for lsb.")] = 8,
    encoding: Annotated[str, typer.Option(help="dead_kernel encoding: raw or pixel.")] = "raw",
) -> None:
    """Hide data in parameter bytes, or read it back."""

    def embed() -> None:
        shapes: list[list[int]] = []
        if payload is not None:
            data = payload.read_bytes()
        elif config is not None:
            cfg = load_experiment(config)
            train_set, _ = cfg.dataset.load(cfg.seed)
            data, shapes = images_to_payload(train_set.images[:images])
        else:
            raise ConfigError("stego embed needs --payload or --config")
        if method not in ("lsb", "last_bytes", "dead_kernel") or encoding not in ("raw", "pixel"):
            raise ConfigError(f"unknown stego method/encoding '{method}'/'{encoding}'")
        chosen: StegoMethod = method  # type: ignore[assignment]
        loaded = read_model_file(model)
        carrier, manifest = stego_embed(
            loaded.model, data, chosen, bits, encoding, shapes  # type: ignore[arg-type]
        )
        save_model(carrier, out, loaded.metadata)
        save_manifest(manifest, manifest_path(out))
        console.print(
            f"embedded {manifest.payload_bytes} bytes "
            f"({manifest.capacity_used:.1%} of {manifest.capacity_bytes}) into {out}"
        )

    def extract_payload() -> None:
        manifest = load_manifest(manifest_path(model))
        data = stego_extract(load_model(model), manifest)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)
        state = "intact" if payload_intact(data, manifest) else "damaged"
        console.print(f"recovered {len(data)} bytes ({state}) to {out}")

    if action_name not in ("embed", "extract"):
        err_console.print(f"[bold red]error:[/] unknown stego action '{action_name}'")
        raise typer.Exit(EXIT_ERROR)
    _run(embed if action_name == "embed" else extract_payload)


@app.command(name="noise-sweep")
def noise_sweep_command(
    models: Annotated[str, typer.Option(help="Comma-separated model files.")],
    sigmas: Annotated[str, typer.Option(help="Comma-separated increasing noise levels.")],
    config: ConfigOption,
    seeds: Annotated[int, typer.Option(help="Noise draws per level.")] = 1,
    mode: Annotated[str, typer.Option(help="absolute or relative sigma.")] = "absolute",
    out: Annotated[Path | None, typer.Option(help="CSV output.")] = None,
) -> None:
    """
    Robustness of stego carriers vs transposed models under parameter noise.

    A model with a `.stego.json` manifest next to it is a stego carrier;
    any other model is evaluated as a transposed model.
    """

    def action() -> None:
        cfg = load_experiment(config)
        prepared = prepare(cfg)
        stego_variants, transpose_variants = [], []
        for text in filter(None, models.split(",")):
            path = Path(text)
            loaded = load_model(path)
            if manifest_path(path).exists():
                manifest = load_manifest(manifest_path(path))
                stego_variants.append(
                    StegoVariant(path.stem, loaded, manifest, stego_extract(loaded, manifest))
                )
            else:
                transpose_variants.append(TransposeVariant(path.stem, loaded, prepared.memorized))
        frame = noise_sweep(
            stego_variants,
            transpose_variants,
            parse_floats(sigmas),
            prepared.test,
            tuple(range(seeds)),
            mode,  # type: ignore[arg-type]
        )
        _write_frame(frame, out, "noise sweep")

    _run(action)


def _threshold_value(text: str, xbar: np.ndarray, cutoff: float, seed: int) -> float:
    if text == "auto":
        return select_threshold(xbar, cutoff=cutoff, seed=seed).threshold
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"threshold must be a number or 'auto', got '{text}'") from exc


@app.command()
def detect(
    model: Annotated[Path, typer.Option("--model", "-m")],
    mean_from: Annotated[Path, typer.Option(help="Experiment YAML whose dataset gives the mean image.")],
    threshold: Annotated[str, typer.Option(help="Decision threshold or 'auto'.")] = "auto",
    out: Annotated[Path | None, typer.Option(help="JSON report.")] = None,
) -> None:
    """Probe a model for a hidden transposed task; exit status 1 when flagged."""

    def action() -> str:
        cfg: ExperimentConfig = load_experiment(mean_from)
        train_set, _ = cfg.dataset.load(cfg.seed)
        xbar = mean_image(train_set, cfg.detect.mean_samples, cfg.seed)
        value = _threshold_value(threshold, xbar, cfg.detect.ssim_cutoff, cfg.seed)
        report = run_detect(load_model(model), xbar, value, cfg.detect)
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(orjson.dumps(report.model_dump(), option=orjson.OPT_INDENT_2))
        console.print(
            f"min score {report.min_score:.6g} vs threshold {report.threshold:.6g}: "
            f"[bold]{report.verdict}[/]"
        )
        return report.verdict

    if _run(action) == "malicious":
        raise typer.Exit(EXIT_MALICIOUS)


@app.command()
def threshold(
    mean_from: Annotated[Path, typer.Option(help="Experiment YAML whose dataset gives the mean image.")],
    cutoff: Annotated[float, typer.Option(help="SSIM level to cross.")] = 0.5,
    seed: int = 0,
) -> None:
    """Pick the detection threshold from noise added to the dataset mean image."""

    def action() -> None:
        cfg = load_experiment(mean_from)
        train_set, _ = cfg.dataset.load(cfg.seed)
        selection = select_threshold(
            mean_image(train_set, cfg.detect.mean_samples, cfg.seed), cutoff=cutoff, seed=seed
        )
        console.print(
            f"sigma {selection.sigma:.6g}, SSIM {selection.ssim:.4f}, "
            f"threshold {selection.threshold:.6g}"
        )

    _run(action)


@app.command()
def gradcheck(
    seeds: Annotated[int, typer.Option(help="Seeds per case.")] = 10,
) -> None:
    """Finite-difference oracle over every layer in both directions."""
    results = _run(lambda: run_oracle_suite(tuple(range(seeds))))
    table = Table(title="gradient oracle")
    for column in ("case", "worst error", "tolerance", "status"):
        table.add_column(column)
    by_case: dict[str, list[float]] = {}
    tolerances: dict[str, float] = {}
    for result in results:
        by_case.setdefault(result.case, []).append(result.error)
        tolerances[result.case] = result.tolerance
    failed = 0
    for case, errors in by_case.items():
        worst = max(errors)
        ok = worst < tolerances[case]
        failed += not ok
        table.add_row(
            case, f"{worst:.2e}", f"{tolerances[case]:.0e}", "[green]ok[/]" if ok else "[red]FAIL[/]"
        )
    console.print(table)
    if failed:
        raise typer.Exit(EXIT_ERROR)


SeedsOption = Annotated[int, typer.Option(help="Number of seeds (0..n-1).")]
OutOption = Annotated[Path | None, typer.Option(help="CSV output.")]


@sweep_app.command("capacity")
def sweep_capacity(
    config: ConfigOption,
    widths: Annotated[str, typer.Option(help="Comma-separated widths.")],
    totals: Annotated[str, typer.Option(help="Comma-separated memorized sample counts.")],
    width_option: Annotated[str, typer.Option(help="Preset option that sets the width.")] = "width",
    seeds: SeedsOption = 1,
    out: OutOption = None,
) -> None:
    def action() -> pl.DataFrame:
        return capacity_sweep(
            load_experiment(config),
            [int(w) for w in parse_floats(widths)],
            [int(t) for t in parse_floats(totals)],
            tuple(range(seeds)),
            width_option,
        )

    _write_frame(_run(action), out, "capacity sweep")


@sweep_app.command("ablation")
def sweep_ablation(config: ConfigOption, seeds: SeedsOption = 1, out: OutOption = None) -> None:
    frame = _run(lambda: ablation_study(load_experiment(config), seeds=tuple(range(seeds))))
    _write_frame(frame, out, "indexing ablation")


@sweep_app.command("weight-decay")
def sweep_weight_decay(
    config: ConfigOption,
    decays: Annotated[str, typer.Option(help="Comma-separated decay factors.")],
    seeds: SeedsOption = 1,
    out: OutOption = None,
) -> None:
    frame = _run(
        lambda: weight_decay_sweep(load_experiment(config), parse_floats(decays), tuple(range(seeds)))
    )
    _write_frame(frame, out, "weight decay")


@sweep_app.command("fine-tune")
def sweep_fine_tune(
    config: ConfigOption,
    epochs: int = 5,
    seeds: SeedsOption = 1,
    out: OutOption = None,
) -> None:
    frame = _run(lambda: fine_tune_table(load_experiment(config), epochs, tuple(range(seeds))))
    _write_frame(frame, out, "fine-tuning defense")


@sweep_app.command("detection")
def sweep_detection(config: ConfigOption, seeds: SeedsOption = 5, out: OutOption = None) -> None:
    frame, auc, value = _run(lambda: detection_study(load_experiment(config), tuple(range(seeds))))
    _write_frame(frame, out, "detection")
    console.print(f"AUC {auc:.4f} at threshold {value:.6g}")


if __name__ == "__main__":
    app()
