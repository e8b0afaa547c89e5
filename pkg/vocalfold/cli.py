"""Cli entrypoint of the detection pipeline.

Provides commands to generate synthetic recordings, extract features, train and evaluate classifiers, and classify
single recordings. See `vocalfold --help` for further options.
"""
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Annotated, Any

from pydantic import TypeAdapter, ValidationError
from rich.console import Console
from rich.padding import Padding
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TaskID, TextColumn, TimeElapsedColumn
from rich.table import Column, Table
from rich.theme import Theme
from typer import Option, Typer
from typer.main import get_command
from typing_extensions import override

from vocalfold.ann import init_mlp, predict_proba, train as train_mlp
from vocalfold.config import VocalfoldConfig
from vocalfold.evaluation import EvalReport, SweepRow, cross_validate, sweep_features, sweep_hidden
from vocalfold.evaluation import write_plot_data, write_sweep_csv
from vocalfold.features import NUM_FEATURES, Label, extract_dataset, extract_features, read_feature_csv
from vocalfold.features import read_manifest, write_feature_csv
from vocalfold.modelfile import PipelineModel, load_model, save_model
from vocalfold.pca import ReductionMode, fit_pca, reduce
from vocalfold.signal_io import read_wav
from vocalfold.synth import synth_dataset
from vocalfold.util import ExceptionInfo, ParameterError, ProgressUi, VocalfoldBaseException

# newer typer releases ship their own copy of click
try:
    from typer._click.core import Context
    from typer._click.exceptions import Abort, ClickException, UsageError
except ImportError:
    from click.core import Context
    from click.exceptions import Abort, ClickException, UsageError

__all__ = ("app", "main", "run")

PROG_NAME = "vocalfold"
help_message = """Detection of vocal fold pathologies from sustained vowel recordings.

Extracts MFCC and wavelet packet features, reduces them with PCA and classifies them with a small neural network.
"""
app = Typer(pretty_exceptions_enable=False, help=help_message, add_completion=False, no_args_is_help=True)
theme = Theme({
    "success": "green",
    "warning": "orange3",
    "error": "red",
    "attention": "magenta2",
    "heading": "blue",
    "info": "dim cyan",
})
console = Console(theme=theme)

ConfigOption = Annotated[
    Path | None,
    Option(help="Config file to use instead of ./vocalfold.toml.", show_default=False),
]
FeaturesOption = Annotated[Path, Option(help="Feature CSV written by `vocalfold extract`.")]
SeedOption = Annotated[int | None, Option(help="Seed of the fold split and the weight initialization.")]
FoldsOption = Annotated[int | None, Option(help="Number of cross-validation folds.")]
ModeOption = Annotated[ReductionMode | None, Option(help="Project onto components or select original features.")]


class CliUi(ProgressUi):
    """Ui that draws progress bars to the console."""

    descriptions = {"extract": "Extracting features", "synth": "Synthesizing recordings", "folds": "Running folds"}

    def __init__(self) -> None:
        self.progress = Progress(
            TextColumn("[heading]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=console,
            transient=True,
        )
        self.tasks: dict[str, TaskID] = {}

    def __enter__(self) -> "CliUi":
        self.progress.start()
        return self

    def __exit__(self, *args: object) -> None:
        self.progress.stop()

    @override
    def start_task(self, name: str, total: int) -> None:
        self.tasks[name] = self.progress.add_task(self.descriptions.get(name, name), total=total)

    @override
    def advance(self, name: str) -> None:
        if name in self.tasks:
            self.progress.advance(self.tasks[name])

    @override
    def finish_task(self, name: str) -> None:
        if name in self.tasks:
            self.progress.remove_task(self.tasks.pop(name))


def _check_range(flag: str, value: int, low: int, high: int | None = None) -> int:
    if value < low or (high is not None and value > high):
        bound = f"between {low} and {high}" if high is not None else f"at least {low}"
        raise ParameterError(f"{flag} must be {bound}, got {value}.")
    return value


def parse_hidden_range(text: str) -> list[int]:
    """Parses an inclusive range like `1:15`."""
    parts = text.split(":")
    try:
        low, high = (int(part) for part in parts)
    except ValueError as e:
        raise ParameterError(f"--range must look like '1:15', got '{text}'.") from e
    _check_range("--range", low, 1)
    if high < low:
        raise ParameterError(f"--range must not be empty, got '{text}'.")
    return list(range(low, high + 1))


def parse_counts(text: str) -> list[int]:
    """Parses a list of feature counts like `1,36,139` or an arithmetic progression like `5,10,...,139`.

    A progression continues with the step of its first two values and ends with its last value even if the step does
    not reach it exactly.
    """
    items = [item.strip() for item in text.split(",") if item.strip()]
    try:
        if "..." in items:
            dots = items.index("...")
            if dots < 2 or dots != len(items) - 2:
                raise ParameterError(f"--counts must look like '5,10,...,139', got '{text}'.")
            head = [int(item) for item in items[:dots]]
            end = int(items[-1])
            step = head[-1] - head[-2]
            if step <= 0:
                raise ParameterError(f"--counts progressions must increase, got '{text}'.")
            counts = head + list(range(head[-1] + step, end + 1, step))
            if counts[-1] < end:
                counts.append(end)
        else:
            counts = [int(item) for item in items]
    except ValueError as e:
        raise ParameterError(f"--counts must be a comma separated list of integers, got '{text}'.") from e
    if not counts:
        raise ParameterError("--counts must not be empty.")
    for count in counts:
        _check_range("--counts", count, 1, NUM_FEATURES)
    return counts


def _report_table(report: EvalReport) -> Table:
    table = Table(Column("Statistic"), Column("Value", justify="right"), title="[heading]Cross-validation")
    table.add_row("Accuracy", f"{report.accuracy:.2%}")
    table.add_row("Sensitivity", f"{report.sensitivity:.2%}")
    table.add_row("Specificity", f"{report.specificity:.2%}")
    (tn, fp), (fn, tp) = report.confusion
    table.add_row("TN / FP / FN / TP", f"{tn} / {fp} / {fn} / {tp}")
    table.add_row("Fold accuracies", " ".join(f"{acc:.2f}" for acc in report.per_fold))
    return table


def _sweep_table(rows: Sequence[SweepRow], param: str, title: str) -> Table:
    table = Table(
        Column(param, justify="right"),
        Column("Accuracy", justify="right"),
        Column("Sensitivity", justify="right"),
        Column("Specificity", justify="right"),
        title=f"[heading]{title}",
    )
    best = max(rows, key=lambda row: (row.accuracy, -row.param))
    for row in rows:
        style = "success" if row is best else None
        table.add_row(
            str(row.param), f"{row.accuracy:.2%}", f"{row.sensitivity:.2%}", f"{row.specificity:.2%}", style=style
        )
    return table


def _write_sweep(out: Path | None, rows: Sequence[SweepRow], param: str) -> None:
    if out is None:
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out, rows)
    plot = out.with_suffix(".dat")
    write_plot_data(plot, rows, param)
    console.print(f"Saved the sweep to {out} and the plot data to {plot}")


@app.command()
def synth(
    out: Annotated[Path, Option(help="Folder the recordings and the manifest are written to.")],
    seed: Annotated[int | None, Option(help="Master seed, all file seeds are derived from it.")] = None,
    n_path: Annotated[int, Option(help="Number of pathological recordings.")] = 75,
    n_healthy: Annotated[int, Option(help="Number of healthy recordings.")] = 55,
    config: ConfigOption = None,
) -> None:
    """Generates a labeled set of synthetic sustained vowels."""
    cfg = VocalfoldConfig.load(config)
    _check_range("--n-path", n_path, 0)
    _check_range("--n-healthy", n_healthy, 0)
    if seed is not None:
        _check_range("--seed", seed, 0)
    with CliUi() as ui:
        result = synth_dataset(out, n_path, n_healthy, cfg.synth, seed, parallel=cfg.project.parallel, ui=ui)
    console.print(f"[success]Wrote {len(result.entries)} recordings[/] and their manifest to {result.manifest}")


@app.command()
def extract(
    manifest: Annotated[Path, Option(help="CSV listing the recordings as `id,path,label`.")],
    out: Annotated[Path, Option(help="Feature CSV to write.")],
    config: ConfigOption = None,
) -> None:
    """Extracts the 139 features of every recording in a manifest."""
    cfg = VocalfoldConfig.load(config)
    entries = read_manifest(manifest)
    with CliUi() as ui:
        result = extract_dataset(entries, cfg.frames, parallel=cfg.project.parallel, ui=ui)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(out, result.dataset)
    console.print(f"[success]Extracted the features of {len(result.dataset)} recordings[/] to {out}")
    if result.excluded:
        err_path = out.with_suffix(".errors.json")
        err_path.write_bytes(TypeAdapter(dict[str, ExceptionInfo]).dump_json(result.excluded, indent=2))
        console.print(f"[warning]{len(result.excluded)} recordings could not be processed[/], see {err_path}")


@app.command()
def train(
    features: FeaturesOption,
    out: Annotated[Path, Option(help="Model file to write.")],
    k: Annotated[int | None, Option(help="Length of the reduced feature vector.")] = None,
    hidden: Annotated[int | None, Option(help="Number of hidden units.")] = None,
    mode: ModeOption = None,
    seed: Annotated[int | None, Option(help="Seed of the weight initialization.")] = None,
    config: ConfigOption = None,
) -> None:
    """Trains the reduction and the network on a whole feature set and saves them as a model file."""
    cfg = VocalfoldConfig.load(config)
    k = _check_range("--k", k if k is not None else cfg.evaluation.k_features, 1, NUM_FEATURES)
    hidden = _check_range("--hidden", hidden if hidden is not None else cfg.train.hidden, 1)
    updates: dict[str, Any] = {"hidden": hidden} | ({"seed": seed} if seed is not None else {})
    train_cfg = cfg.train.model_copy(update=updates)

    dataset = read_feature_csv(features)
    dataset.require_both_classes(f"'{features}'")
    with console.status("Training"):
        pca = fit_pca(dataset, k, mode=mode or cfg.evaluation.mode)
        inputs = reduce(pca, dataset.features)
        mlp = train_mlp(init_mlp(k, train_cfg), inputs, dataset.targets, train_cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, PipelineModel(pca, mlp))
    accuracy = float(((predict_proba(mlp, inputs) > 0.5) == dataset.targets).mean())
    console.print(f"[success]Saved the model[/] to {out}, training accuracy {accuracy:.2%}")


@app.command()
def evaluate(
    features: FeaturesOption,
    k: Annotated[int | None, Option(help="Length of the reduced feature vector.")] = None,
    hidden: Annotated[int | None, Option(help="Number of hidden units.")] = None,
    folds: FoldsOption = None,
    seed: SeedOption = None,
    mode: ModeOption = None,
    out: Annotated[Path | None, Option(help="JSON file to save the report to.", show_default=False)] = None,
    config: ConfigOption = None,
) -> EvalReport:
    """Estimates the accuracy of the pipeline by stratified k-fold cross-validation."""
    cfg = VocalfoldConfig.load(config)
    k = _check_range("--k", k if k is not None else cfg.evaluation.k_features, 1, NUM_FEATURES)
    hidden = _check_range("--hidden", hidden if hidden is not None else cfg.train.hidden, 1)
    folds = _check_range("--folds", folds if folds is not None else cfg.evaluation.folds, 2)
    train_cfg = cfg.train if seed is None else cfg.train.model_copy(update={"seed": seed})
    dataset = read_feature_csv(features)
    with CliUi() as ui:
        report = cross_validate(
            dataset,
            k,
            hidden,
            train_cfg,
            folds=folds,
            seed=seed if seed is not None else cfg.evaluation.seed,
            mode=mode or cfg.evaluation.mode,
            parallel=cfg.project.parallel,
            ui=ui,
        )
    console.print(Padding(_report_table(report), (1, 0, 0, 0)))
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.model_dump_json(indent=2))
        console.print("Saved the report to", out)
    return report


@app.command()
def classify(
    model: Annotated[Path, Option(help="Model file written by `vocalfold train`.")],
    wav: Annotated[Path, Option(help="Recording to classify.")],
    config: ConfigOption = None,
) -> Label:
    """Prints whether a recording sounds healthy or pathological, and the probability of the latter."""
    cfg = VocalfoldConfig.load(config)
    pipeline = load_model(model)
    probability = pipeline.predict_proba(extract_features(read_wav(wav), cfg.frames))
    label = Label.pathological if probability > 0.5 else Label.healthy
    style = "error" if label == Label.pathological else "success"
    console.print(f"[{style}]{label.name}[/] {probability:.6f}")
    return label


@app.command("sweep-neurons")
def sweep_neurons(
    features: FeaturesOption,
    range_: Annotated[str, Option("--range", help="Inclusive range of hidden layer sizes, like `1:15`.")] = "1:15",
    k: Annotated[int, Option(help="Length of the reduced feature vector.")] = NUM_FEATURES,
    folds: FoldsOption = None,
    seed: SeedOption = None,
    mode: ModeOption = None,
    out: Annotated[Path | None, Option(help="CSV file to save the table to.", show_default=False)] = None,
    config: ConfigOption = None,
) -> list[SweepRow]:
    """Cross-validates the pipeline for every hidden layer size in a range."""
    cfg = VocalfoldConfig.load(config)
    hidden_values = parse_hidden_range(range_)
    k = _check_range("--k", k, 1, NUM_FEATURES)
    folds = _check_range("--folds", folds if folds is not None else cfg.evaluation.folds, 2)
    train_cfg = cfg.train if seed is None else cfg.train.model_copy(update={"seed": seed})
    dataset = read_feature_csv(features)
    with CliUi() as ui:
        rows = sweep_hidden(
            dataset,
            k,
            hidden_values,
            train_cfg,
            folds=folds,
            seed=seed if seed is not None else cfg.evaluation.seed,
            mode=mode or cfg.evaluation.mode,
            parallel=cfg.project.parallel,
            ui=ui,
        )
    console.print(Padding(_sweep_table(rows, "Hidden units", "Hidden layer sweep"), (1, 0, 0, 0)))
    _write_sweep(out, rows, "hidden")
    return rows


@app.command("sweep-features")
def sweep_features_cmd(
    features: FeaturesOption,
    counts: Annotated[str, Option(help="Reduced vector lengths, like `1,36,139` or `5,10,...,139`.")] = "5,10,...,139",
    hidden: Annotated[int | None, Option(help="Number of hidden units.")] = None,
    folds: FoldsOption = None,
    seed: SeedOption = None,
    mode: ModeOption = None,
    out: Annotated[Path | None, Option(help="CSV file to save the table to.", show_default=False)] = None,
    config: ConfigOption = None,
) -> list[SweepRow]:
    """Cross-validates the pipeline for every reduced feature vector length in a list."""
    cfg = VocalfoldConfig.load(config)
    feature_counts = parse_counts(counts)
    hidden = _check_range("--hidden", hidden if hidden is not None else cfg.train.hidden, 1)
    folds = _check_range("--folds", folds if folds is not None else cfg.evaluation.folds, 2)
    train_cfg = cfg.train if seed is None else cfg.train.model_copy(update={"seed": seed})
    dataset = read_feature_csv(features)
    with CliUi() as ui:
        result = sweep_features(
            dataset,
            feature_counts,
            hidden,
            train_cfg,
            folds=folds,
            seed=seed if seed is not None else cfg.evaluation.seed,
            mode=mode or cfg.evaluation.mode,
            parallel=cfg.project.parallel,
            ui=ui,
        )
    console.print(Padding(_sweep_table(result.rows, "Features", "Feature count sweep"), (1, 0, 0, 0)))
    console.print(f"Best length [attention]{result.best_count}[/], selected features: {result.selected.describe()}")
    _write_sweep(out, result.rows, "features")
    return result.rows


def _print_usage(ctx: Context | None) -> None:
    if ctx is not None:
        console.print(ctx.get_usage(), markup=False, highlight=False)
    console.print(f"Try '{PROG_NAME} --help' for help.", markup=False, highlight=False)


def run(argv: Sequence[str] | None = None) -> int:
    """Runs the cli with the given arguments and returns its exit status.

    The status is 0 on success, 1 for usage errors such as unknown commands or flags, and 2 if the input data or a
    parameter value is invalid.
    """
    args = list(sys.argv[1:] if argv is None else argv)
    command = get_command(app)
    if not args:
        _print_usage(Context(command, info_name=PROG_NAME))
        return 1
    try:
        command.main(args=args, prog_name=PROG_NAME, standalone_mode=False)
    except UsageError as e:
        console.print(f"[error]Error:[/] {e.format_message()}", highlight=False)
        _print_usage(e.ctx)
        return 1
    except ClickException as e:
        console.print(f"[error]Error:[/] {e.format_message()}", highlight=False)
        return 1
    except Abort:
        console.print("[error]Aborted")
        return 1
    except VocalfoldBaseException as e:
        console.print(f"[error]Error:[/] {e.message}", highlight=False)
        if e.detail:
            details = e.detail if isinstance(e.detail, list) else [e.detail]
            for detail in details:
                console.print(f"  [info]{detail}", highlight=False)
        return 2
    except ValidationError as e:
        console.print(f"[error]Invalid configuration:[/]\n{e}", highlight=False)
        return 2
    return 0


def main() -> None:
    """Console script entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
