"""Command-line front end: files in, CSV / PNM / model files out"""

import csv
import io
import sys
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import structlog
import typer
from rich.console import Console

from ..config import configure_logging, settings
from ..core.bitmeasures import FEATURE_COUNT, FeatureVector, MeasureConfig, batch_feature_vectors
from ..core.classifier import MulticlassModel, Sample, SvmConfig, evaluate, predict_classes, train_multiclass
from ..core.detector import (
    CalibrationCurve,
    calibrate,
    combine_gamma,
    estimate_k,
    estimate_k_model,
    forced_embedding_curve,
    model_table,
)
from ..core.errors import CalibrationError, InsufficientDataError, StegwaveError, TrainingError
from ..core.imageio import load_image, save_image
from ..core.stego import EmbedOrder, StegoParams, embed_lsb, extract_lsb_plane
from ..core.wavelet import second_level_subbands

logger = structlog.get_logger(__name__)
console = Console(stderr=True, highlight=False)

app = typer.Typer(
    name="stegwave",
    help="Steganalysis toolkit: bit-stream measures, kernel SVM and a wavelet forced-embedding detector.",
    add_completion=False,
    no_args_is_help=True,
)

MU_COLUMNS = [f"mu{n}" for n in range(1, FEATURE_COUNT + 1)]
CURVE_COLUMNS = ["image", "k", "i", "eta", "gamma_db"]
GEOMETRY_COLUMNS = ["width", "height", "channels"]
MEAN_ROW = "mean"


class Band(str, Enum):
    ll = "ll"
    lh = "lh"
    hl = "hl"
    hh = "hh"


# -- csv helpers -----------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Optional[Path], header: Sequence[str], rows) -> None:
    """Header plus rows, reals at 17 significant digits, '\\n' terminated; stdout when path is None"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    if path is None:
        sys.stdout.write(buffer.getvalue())
    else:
        with open(path, "w", encoding="ascii", newline="") as handle:
            handle.write(buffer.getvalue())


def read_csv(path: Path, required: Sequence[str]) -> List[Dict[str, str]]:
    with open(path, "r", encoding="ascii", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise InsufficientDataError(f"{path}: missing columns {', '.join(missing)}")
        rows = []
        for row in reader:
            if None in row or None in row.values():
                raise InsufficientDataError(
                    f"{path}:{reader.line_num}: expected {len(reader.fieldnames)} fields"
                )
            rows.append(row)
        return rows


def parse_field(path: Path, row: Dict[str, str], column: str, kind=float):
    try:
        return kind(row[column])
    except ValueError:
        raise InsufficientDataError(f"{path}: column {column} holds {row[column]!r}")


def split_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_reals(text: str, option: str) -> List[float]:
    try:
        values = [float(part) for part in split_list(text)]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated reals, got {text!r}", param_hint=option)
    if not values:
        raise typer.BadParameter("expected at least one value", param_hint=option)
    return values


def read_feature_rows(path: Path) -> List[Tuple[str, int, np.ndarray]]:
    rows = []
    for row in read_csv(path, ["file", "window"] + MU_COLUMNS):
        mu = np.array([parse_field(path, row, c) for c in MU_COLUMNS])
        rows.append((row["file"], parse_field(path, row, "window", int), mu))
    if not rows:
        raise InsufficientDataError(f"{path}: no feature rows")
    return rows


def read_labels(path: Path) -> Dict[str, int]:
    return {row["path"]: parse_field(path, row, "label", int) for row in read_csv(path, ["path", "label"])}


def labelled_samples(features: Path, labels: Path) -> List[Sample]:
    label_of = read_labels(labels)
    samples, unlabelled = [], set()
    for name, _, mu in read_feature_rows(features):
        if name in label_of:
            samples.append(Sample(features=FeatureVector(mu), label=label_of[name]))
        else:
            unlabelled.add(name)
    if unlabelled:
        logger.warning("unlabelled_files_skipped", files=sorted(unlabelled))
    if not samples:
        raise TrainingError("no feature rows match the labels file")
    return samples


def curve_geometry(path: Path, rows: List[Dict[str, str]]) -> Dict[str, Optional[int]]:
    """Calibration width/height/channels when every chosen row records the same values"""
    if not rows or any(c not in rows[0] for c in GEOMETRY_COLUMNS):
        return dict.fromkeys(GEOMETRY_COLUMNS)
    shapes = {tuple(row[c] for c in GEOMETRY_COLUMNS) for row in rows}
    if len(shapes) != 1 or "" in next(iter(shapes)):
        return dict.fromkeys(GEOMETRY_COLUMNS)
    return {c: parse_field(path, rows[0], c, int) for c in GEOMETRY_COLUMNS}


def curve_from_csv(path: Path) -> CalibrationCurve:
    """Curve from the ``mean`` rows of a calibrate CSV, or the per-k average of all rows"""
    rows = read_csv(path, CURVE_COLUMNS)
    chosen = [row for row in rows if row["image"] == MEAN_ROW] or rows
    if not chosen:
        raise CalibrationError(f"{path}: no curve rows")
    i_values = {parse_field(path, row, "i") for row in chosen}
    if len(i_values) != 1:
        raise CalibrationError(f"{path}: curve rows mix forced levels {sorted(i_values)}")
    by_k: Dict[float, List[float]] = {}
    for row in chosen:
        by_k.setdefault(parse_field(path, row, "k"), []).append(parse_field(path, row, "eta"))
    points = tuple((k, float(np.mean(by_k[k]))) for k in sorted(by_k))
    return CalibrationCurve(i_fixed=i_values.pop(), points=points, **curve_geometry(path, chosen))



# -- commands --------------------------------------------------------------

@app.command()
def features(
    in_: str = typer.Option(..., "--in", help="Input file, or a comma-separated list"),
    out: Path = typer.Option(..., "--out"),
    lsb: bool = typer.Option(False, "--lsb", help="Measure the LSB plane of a PNM image"),
    words: Optional[int] = typer.Option(None, "--words", min=1, help="Window size in 32-bit words"),
):
    """Feature vectors (mu1..mu9) per window of each input"""
    config = MeasureConfig.from_settings()
    if words is not None:
        config = MeasureConfig(window_words=words, entropy_weights=config.entropy_weights)
    rows = []
    for name in split_list(in_):
        data = extract_lsb_plane(load_image(name)).to_bytes() if lsb else Path(name).read_bytes()
        for window, vector in enumerate(batch_feature_vectors(data, config)):
            rows.append([name, window] + [float(v) for v in vector.mu])
    write_csv(out, ["file", "window"] + MU_COLUMNS, rows)
    logger.info("features_written", rows=len(rows), out=str(out))


@app.command()
def train(
    features_csv: Path = typer.Option(..., "--features"),
    labels: Path = typer.Option(..., "--labels"),
    model: Path = typer.Option(..., "--model"),
    gamma: Optional[float] = typer.Option(None, "--gamma"),
    c: Optional[float] = typer.Option(None, "--c"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: int = typer.Option(settings.app.workers, "--workers", min=1),
):
    """Train a one-vs-one RBF SVM and save it"""
    config = SvmConfig.from_settings(gamma=gamma, C=c, seed=seed)
    fitted = train_multiclass(labelled_samples(features_csv, labels), config, workers=workers)
    fitted.save(model)
    console.print(f"trained {len(fitted.pair_models)} pair models over classes {list(fitted.labels)}")


@app.command()
def predict(
    model: Path = typer.Option(..., "--model"),
    features_csv: Path = typer.Option(..., "--features"),
    out: Path = typer.Option(..., "--out"),
):
    """Predicted label per feature row"""
    fitted = MulticlassModel.load(model)
    rows = read_feature_rows(features_csv)
    predicted = predict_classes(fitted, np.stack([mu for _, _, mu in rows]))
    write_csv(out, ["file", "window", "label"], [[name, w, p] for (name, w, _), p in zip(rows, predicted)])


@app.command(name="evaluate")
def evaluate_command(
    model: Path = typer.Option(..., "--model"),
    features_csv: Path = typer.Option(..., "--features"),
    labels: Path = typer.Option(..., "--labels"),
    out: Path = typer.Option(..., "--out"),
):
    """Row-normalized confusion matrix with an accuracy footer"""
    matrix = evaluate(MulticlassModel.load(model), labelled_samples(features_csv, labels))
    header = ["true"] + [str(label) for label in matrix.labels]
    rows = [[label] + [float(v) for v in matrix.matrix[r]] for r, label in enumerate(matrix.labels)]
    rows.append(["accuracy", matrix.accuracy])
    write_csv(out, header, rows)
    console.print(f"accuracy {matrix.accuracy:.4f}")


@app.command()
def embed(
    in_: Path = typer.Option(..., "--in"),
    level: float = typer.Option(..., "--level", min=0.0, max=1.0),
    out: Path = typer.Option(..., "--out"),
    seed: int = typer.Option(settings.app.seed, "--seed", min=0),
    order: EmbedOrder = typer.Option(EmbedOrder.RANDOMIZED, "--order"),
):
    """LSB-embed a fraction of pixels"""
    image = load_image(in_)
    save_image(embed_lsb(image, StegoParams(level=level, seed=seed, order=order)), out)


@app.command()
def wavelet(
    in_: Path = typer.Option(..., "--in"),
    band: Band = typer.Option(..., "--band"),
    out: Path = typer.Option(..., "--out"),
):
    """One 2nd-level sub-band as row,col,value (channels stacked in R, G, B order)"""
    image = load_image(in_)
    rows = []
    for channel, plane in enumerate(image.planes()):
        coefficients = second_level_subbands(plane).band(band.value)
        offset = channel * coefficients.shape[0]
        for (r, col), value in np.ndenumerate(coefficients):
            rows.append([offset + r, col, float(value)])
    write_csv(out, ["row", "col", "value"], rows)


@app.command()
def etacurve(
    in_: Path = typer.Option(..., "--in"),
    i: str = typer.Option(..., "--i", help="Comma-separated forced levels"),
    out: Path = typer.Option(..., "--out"),
    seed: int = typer.Option(settings.app.seed, "--seed", min=0),
    k: float = typer.Option(0.0, "--k", help="Known initial level, copied into the k column"),
):
    """eta and Gamma against forced level i"""
    readings = forced_embedding_curve(load_image(in_), parse_reals(i, "--i"), seed)
    write_csv(out, CURVE_COLUMNS, [[0, k, r.i, r.eta, r.gamma_db] for r in readings])


@app.command(name="calibrate")
def calibrate_command(
    in_: str = typer.Option(..., "--in", help="Comma-separated PNM images"),
    k: str = typer.Option(..., "--k", help="Comma-separated initial levels"),
    out: Path = typer.Option(..., "--out"),
    i_fixed: Optional[float] = typer.Option(None, "--i-fixed", min=0.0, max=1.0,
                                            help="Forced level; defaults to the detector setting"),
    gamma: bool = typer.Option(False, "--gamma", help="Gamma-vs-k run at the Gamma forced level"),
    seed: int = typer.Option(settings.app.seed, "--seed", min=0),
    repeats: int = typer.Option(1, "--repeats", min=1),
    workers: int = typer.Option(settings.app.workers, "--workers", min=1),
):
    """Per-image eta at i_fixed for each k, followed by the mean curve"""
    if i_fixed is None:
        i_fixed = settings.detector.gamma_i_fixed if gamma else settings.detector.i_fixed
    images = [load_image(name) for name in split_list(in_)]
    curve = calibrate(images, parse_reals(k, "--k"), i_fixed, seed, repeats=repeats, workers=workers)
    rows = []
    for m, image in enumerate(images):
        shape = [image.width, image.height, image.channel_count]
        for k_value in curve.ks:
            at = [row for row in curve.rows if row.image == m and row.k == k_value]
            gamma_db = combine_gamma([row.gamma_db for row in at])
            rows.append([m, float(k_value), i_fixed, float(np.mean([row.eta for row in at])), gamma_db] + shape)
    shape = ["" if v is None else v for v in (curve.width, curve.height, curve.channels)]
    for (k_value, mean_eta), gamma_db in zip(curve.points, curve.mean_gamma_db):
        rows.append([MEAN_ROW, k_value, i_fixed, mean_eta, gamma_db] + shape)
    write_csv(out, CURVE_COLUMNS + GEOMETRY_COLUMNS, rows)
    logger.info("calibration_written", i_fixed=i_fixed, images=len(images), out=str(out))



@app.command()
def estimate(
    in_: Path = typer.Option(..., "--in"),
    curve: Optional[Path] = typer.Option(None, "--curve"),
    seed: int = typer.Option(settings.app.seed, "--seed", min=0),
    repeats: int = typer.Option(settings.detector.estimate_repeats, "--repeats", min=1),
    model_only: bool = typer.Option(False, "--model-only", help="Invert the analytic model instead of a curve"),
    cover_p: float = typer.Option(settings.detector.cover_p, "--cover-p", min=0.0, max=1.0),
    i: float = typer.Option(settings.detector.i_fixed, "--i", min=0.0, max=1.0,
                            help="Forced level for --model-only"),
):
    """Print k_hat=<value>"""
    image = load_image(in_)
    if model_only:
        k_hat = estimate_k_model(image, i, seed, cover_p=cover_p, repeats=repeats)
    elif curve is None:
        raise typer.BadParameter("--curve is required unless --model-only is given", param_hint="--curve")
    else:
        k_hat = estimate_k(image, curve_from_csv(curve), seed, repeats=repeats)
    typer.echo(f"k_hat={fmt(float(k_hat))}")


@app.command()
def prmodel(
    p: float = typer.Option(..., "--p", min=0.0, max=1.0),
    k_grid: str = typer.Option(..., "--k-grid"),
    i_grid: str = typer.Option(..., "--i-grid"),
    out: Optional[Path] = typer.Option(None, "--out"),
    width: int = typer.Option(800, "--width", min=4),
    height: int = typer.Option(600, "--height", min=4),
    channels: int = typer.Option(3, "--channels"),
):
    """Analytic table k,i,p_prime,pr,expected_eta"""
    if channels not in (1, 3):
        raise typer.BadParameter("channels must be 1 or 3", param_hint="--channels")
    rows = model_table(p, parse_reals(k_grid, "--k-grid"), parse_reals(i_grid, "--i-grid"),
                       channels=channels, width=width, height=height)
    write_csv(out, ["k", "i", "p_prime", "pr", "expected_eta"], rows)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; 0 on success, 1 on usage errors, 2 on data errors"""
    configure_logging(settings.app.log_level, settings.app.log_format)
    args = list(sys.argv[1:] if argv is None else argv)
    command = typer.main.get_command(app)
    try:
        result = command.main(args=args, prog_name="stegwave", standalone_mode=False)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except (StegwaveError, OSError, ValueError, csv.Error) as exc:
        logger.debug("command_failed", error=str(exc), kind=type(exc).__name__)
        console.print(f"error: {exc}", markup=False, soft_wrap=True)
        return 2
    return result if isinstance(result, int) else 0
