"""Command-line front end: generate, evaluate, roundtrip, plot.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 no detection.
"""
from __future__ import annotations

import argparse
import csv
import logging
import struct
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from .classify import cross_validate, save_model
from .config import RunConfig
from .errors import NoDetectionError, ParameterError
from .features import fit_standardization, save_descriptors
from .inversion import estimate_form_function
from .physics import FluidMedium, ShellTarget
from .pipeline import descriptor_matrix, process_recording
from .signal import Waveform, envelope, forward_transform, matched_filter
from .synth import DC_CUTOFF_HZ, add_noise, draw_scene, filler_label, generate_dataset, scene_form_function, synthesize_echo

log = logging.getLogger("shellsonar")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NO_DETECTION = 4

MANIFEST = "manifest.csv"
MANIFEST_FIELDS = (
    "id", "file", "label", "radius_m", "thickness_m", "range_m", "snr_db",
    "filler_density", "filler_sound_speed", "seed", "perturbed_bins",
)
MAX_FAILURE_FRACTION = 0.01
_RAW_HEADER = struct.Struct("<Qd")


class DatasetError(OSError):
    """Dataset missing, empty or inconsistent on disk."""


# -- raw sample files ---------------------------------------------------------

def write_raw(path, w: Waveform) -> None:
    """uint64 sample count and float64 rate, then float32 samples (all LE)."""
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(len(w), w.sample_rate_hz))
        fh.write(np.asarray(w.samples, dtype="<f4").tobytes())


def read_raw(path) -> Waveform:
    data = Path(path).read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise DatasetError(f"{path}: truncated header")
    count, rate = _RAW_HEADER.unpack_from(data)
    body = data[_RAW_HEADER.size :]
    if len(body) != 4 * count:
        raise DatasetError(f"{path}: header says {count} samples, file holds {len(body) // 4}")
    return Waveform(np.frombuffer(body, dtype="<f4").astype(float), rate)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


@contextmanager
def run_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out / ".shellsonar.lock"), timeout=0)
    try:
        lock.acquire()
    except Timeout as exc:
        raise OSError(f"another run holds the lock on {out}") from exc
    try:
        yield
    finally:
        lock.release()


# -- dataset on disk ----------------------------------------------------------

def read_manifest(dataset_dir: Path) -> list[dict]:
    path = dataset_dir / MANIFEST
    if not path.is_file():
        raise DatasetError(f"no dataset manifest at {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DatasetError(f"dataset manifest {path} lists no recordings")
    return rows


def _target_of(row, cfg: RunConfig) -> ShellTarget:
    ranges = cfg.param_ranges()
    filler = FluidMedium(float(row["filler_density"]), float(row["filler_sound_speed"]))
    return ShellTarget(float(row["radius_m"]), float(row["thickness_m"]), ranges.shell, filler, ranges.host)


def cmd_generate(cfg: RunConfig, jobs: int = 1) -> int:
    pulse = cfg.pulse()
    n = int(cfg.raw["dataset"]["n_per_class"])
    master = cfg.seeds["master"]
    dataset = generate_dataset(n, cfg.param_ranges(), master, pulse, cfg.synth_settings(), jobs)
    root = cfg.path("dataset")
    rec_dir = root / "recordings"
    rec_dir.mkdir(parents=True, exist_ok=True)
    write_raw(root / "pulse.f32", pulse)
    rows, keep = [], set()
    for i, ex in enumerate(dataset):
        name = f"{i:05d}.f32"
        keep.add(name)
        write_raw(rec_dir / name, ex.recording)
        t = ex.truth
        rows.append([
            i, f"recordings/{name}", ex.label, _num(t.target.outer_radius_m), _num(t.target.thickness_m),
            _num(t.range_m), _num(t.snr_db), _num(t.target.filler.density),
            _num(t.target.filler.sound_speed), t.seed, ex.flagged_bins,
        ])
    for stale in rec_dir.glob("*.f32"):
        if stale.name not in keep:
            stale.unlink()
    _write_csv(root / MANIFEST, MANIFEST_FIELDS, rows)
    (root / "config.yaml").write_text(cfg.dump())
    counts = {lab: sum(r[2] == lab for r in rows) for lab in ("air", "water")}
    flagged = sum(r[-1] for r in rows)
    print(f"wrote {len(rows)} recordings to {root} (air {counts['air']}, water {counts['water']}; master seed {master})")
    if flagged:
        log.info("%d form-function bins were solved at perturbed frequencies", flagged)
    return EXIT_OK


def _process_row(row, root, pulse, host, band, log_mag):
    rec = read_raw(root / row["file"])
    try:
        return process_recording(rec, pulse, host, band, log_mag, row["label"])
    except NoDetectionError as exc:
        return exc


def _format_table(kinds, names, reports) -> str:
    header = ["descriptor"] + names
    body = [[k] + [reports[(k, n)].cell for n in names] for k in kinds]
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    line = lambda r: "  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip()  # noqa: E731
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), rule] + [line(r) for r in body]) + "\n"


def cmd_evaluate(cfg: RunConfig, jobs: int = 1) -> int:
    root = cfg.path("dataset")
    rows = read_manifest(root)
    pulse = read_raw(root / "pulse.f32")
    host = cfg.param_ranges().host
    band = cfg.band()
    log_mag = bool(cfg.raw["features"]["log_magnitude"])
    args = (root, pulse, host, band, log_mag)
    if jobs == 1:
        results = [_process_row(r, *args) for r in rows]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(delayed(_process_row)(r, *args) for r in rows)
    failed = [r["id"] for r, res in zip(rows, results) if isinstance(res, Exception)]
    ok = [(r, res) for r, res in zip(rows, results) if not isinstance(res, Exception)]
    if len(failed) > MAX_FAILURE_FRACTION * len(rows):
        log.warning("no detection in %d of %d recordings (ids %s)", len(failed), len(rows), ", ".join(failed))
    elif failed:
        log.info("no detection in %d of %d recordings (ids %s)", len(failed), len(rows), ", ".join(failed))
    k = int(cfg.raw["classifiers"]["folds"])
    labels = np.array([r["label"] for r, _ in ok])
    y = (labels == "water").astype(int)
    if min(np.sum(y == 0), np.sum(y == 1)) < k:
        raise NoDetectionError(f"too few detected echoes per class for {k}-fold evaluation")

    report_dir = cfg.path("report")
    report_dir.mkdir(parents=True, exist_ok=True)
    desc_dir = root / "descriptors"
    desc_dir.mkdir(exist_ok=True)
    ids = np.array([int(r["id"]) for r, _ in ok])
    processed = [p for _, p in ok]
    classifiers = cfg.classifiers()
    names = [c.name for c in classifiers]
    cv_seed = cfg.seeds["cv"]
    reports = {}
    for kind in cfg.kinds:
        X = descriptor_matrix(processed, kind)
        save_descriptors(desc_dir / f"{kind}.npz", kind, X, labels, ids)
        for clf in classifiers:
            reports[(kind, clf.name)] = cross_validate(X, y, clf, k, cv_seed, kind)
            log.info("%s / %s: %s", kind, clf.name, reports[(kind, clf.name)].cell)

    _write_csv(
        report_dir / "table.csv",
        ["descriptor"] + names,
        [[kind] + [reports[(kind, n)].cell for n in names] for kind in cfg.kinds],
    )
    _write_csv(
        report_dir / "folds.csv",
        ["descriptor", "classifier", "fold", "accuracy"],
        [
            [kind, n, f, f"{acc:.6f}"]
            for kind in cfg.kinds
            for n in names
            for f, acc in enumerate(reports[(kind, n)].fold_accuracies)
        ],
    )
    _write_csv(report_dir / "failures.csv", ["id"], [[i] for i in failed])
    table = _format_table(cfg.kinds, names, reports)
    (report_dir / "table.txt").write_text(table)
    print(table, end="")

    if cfg.raw["classifiers"]["save_models"]:
        model_dir = cfg.path("models")
        model_dir.mkdir(parents=True, exist_ok=True)
        for kind in cfg.kinds:
            X = descriptor_matrix(processed, kind)
            stats = fit_standardization(X)
            np.savez(model_dir / f"{kind}_standardization.npz", mean=stats.mean, std=stats.std)
            Xs = stats.apply(X)
            for clf in classifiers:
                model = clf.train(Xs, y, cv_seed)
                save_model(model_dir / f"{kind}_{clf.name.lower()}.bin", model)
    return EXIT_OK


def cmd_roundtrip(cfg: RunConfig, jobs: int = 1) -> float:
    """Noiseless (or noisy) synthesis followed by estimation on the same window.

    Returns the largest per-bin relative error over bins where the pulse
    spectrum is within ``roundtrip.band_db`` of its peak.
    """
    rt = cfg.raw["roundtrip"]
    pulse = cfg.pulse()
    ranges, settings = cfg.param_ranges(), cfg.synth_settings()
    host = ranges.host
    n_fft = int(rt["n_fft"])
    fs = pulse.sample_rate_hz
    spec = forward_transform(pulse, n_fft)
    power = np.abs(spec.values) ** 2
    strong = power >= power.max() * 10.0 ** (float(rt["band_db"]) / 10.0)
    # synthesis zeroes the bins below the DC cutoff, so nothing is recoverable there
    strong &= spec.freq_hz >= DC_CUTOFF_HZ
    lo_hz, hi_hz = spec.freq_hz[strong].min(), spec.freq_hz[strong].max()
    # evaluate the analytic form function exactly on the transform bins
    grid = spec.freq_hz[(spec.freq_hz >= lo_hz) & (spec.freq_hz <= hi_hz)]
    snr = rt["snr_db"]
    out_dir = cfg.out / "roundtrip"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, worst, dumped = [], 0.0, False
    for i in range(int(rt["n_targets"])):
        scene = draw_scene(i, ranges, cfg.seeds["roundtrip"], settings, pulse)
        truth = scene_form_function(scene.target, grid)
        echo = synthesize_echo(pulse, truth, scene.range_m, host, n_fft)
        if snr is not None:
            echo = add_noise(echo, float(snr), scene.seed)
        est = estimate_form_function(echo, pulse, scene.range_m, host, (lo_hz, hi_hz), n_fft=n_fft)
        use = strong[np.searchsorted(spec.freq_hz, est.freq_hz)]
        ref = truth.values
        err = float(np.max(np.abs(est.values[use] - ref[use]) / np.abs(ref[use])))
        worst = max(worst, err)
        t = scene.target
        rows.append([i, filler_label(t.filler), _num(t.outer_radius_m), _num(t.thickness_m), _num(scene.range_m), f"{err:.3e}"])
        if not dumped and filler_label(t.filler) == "water":
            ka = 2 * np.pi * est.freq_hz * t.outer_radius_m / host.sound_speed
            _write_csv(
                out_dir / "form_function.csv",
                ["ka", "abs_f_analytic", "abs_f_estimated"],
                [[_num(a), _num(b), _num(c)] for a, b, c in zip(ka, np.abs(ref), np.abs(est.values))],
            )
            dumped = True
    _write_csv(out_dir / "roundtrip.csv", ["target", "filler", "radius_m", "thickness_m", "range_m", "max_rel_error"], rows)
    label = "noiseless" if snr is None else f"snr {float(snr):g} dB"
    print(f"roundtrip ({label}, {len(rows)} targets, bins within {float(rt['band_db']):g} dB "
          f"of the pulse peak, {lo_hz / 1e3:.1f}-{hi_hz / 1e3:.1f} kHz): max relative error {worst:.3e}")
    return worst


def _xy(path, header, x, y) -> None:
    _write_csv(path, header, [[_num(a), _num(b)] for a, b in zip(x, y)])


def _png(path, x, y, xlabel, ylabel) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(x, y, lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def cmd_plot(cfg: RunConfig, jobs: int = 1) -> int:
    root = cfg.path("dataset")
    rows = read_manifest(root)
    wanted = str(cfg.raw["plot"]["example"])
    matches = [r for r in rows if r["id"] == wanted]
    if not matches:
        raise DatasetError(f"example {wanted} is not in the dataset manifest")
    row = matches[0]
    rec = read_raw(root / row["file"])
    pulse = read_raw(root / "pulse.f32")
    png = bool(cfg.raw["plot"]["png"])
    out = cfg.path("plots")
    out.mkdir(parents=True, exist_ok=True)
    fs = rec.sample_rate_hz

    env = envelope(matched_filter(rec, pulse))
    t = np.arange(len(env)) / fs
    _xy(out / "matched_filter.csv", ["time_s", "envelope"], t, env)
    target = _target_of(row, cfg)
    ff = scene_form_function(target, cfg.synth_settings().ff_grid())
    _xy(out / "form_function.csv", ["freq_hz", "abs_f"], ff.freq_hz, np.abs(ff.values))
    if png:
        _png(out / "matched_filter.png", t * 1e3, env, "time (ms)", "matched-filter envelope")
        _png(out / "form_function.png", ff.ka(target.host.sound_speed), np.abs(ff.values), "ka", "|f|")

    proc = process_recording(rec, pulse, target.host, cfg.band(), bool(cfg.raw["features"]["log_magnitude"]))
    est = proc.form_function
    _xy(out / "estimated_form_function.csv", ["freq_hz", "abs_f"], est.freq_hz, np.abs(est.values))
    for kind, d in proc.descriptors.items():
        _xy(out / f"descriptor_{kind}.csv", ["index", "value"], np.arange(d.values.size), d.values)
    print(f"example {wanted}: direct peak at sample {proc.direct_index}, echo peak at sample {proc.peak_index}, "
          f"range {proc.range_m:.4f} m (true {float(row['range_m']):.4f} m); dumps in {out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "roundtrip": cmd_roundtrip,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shellsonar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override every seed in the configuration")
        p.add_argument("--out", type=Path, help="output root (overrides the config's 'out')")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.jobs < 1:
        log.error("--jobs must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = RunConfig.load(args.config, args.seed, args.out)
    except OSError as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_IO
    except (ParameterError, ValueError, TypeError, KeyError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    try:
        with run_lock(cfg.out):
            result = COMMANDS[args.command](cfg, args.jobs)
    except NoDetectionError as exc:
        log.error("no detection: %s", exc)
        return EXIT_NO_DETECTION
    except ParameterError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK if args.command == "roundtrip" else result


if __name__ == "__main__":
    sys.exit(main())
