"""Run configuration: a YAML document merged over built-in defaults."""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import BAND_HZ
from .classify import MLPClassifier, MLPHyper, SVMClassifier
from .errors import ParameterError
from .features import KINDS, L
from .physics import parse_material
from .signal import Waveform, make_chirp
from .synth import ParamRanges, SynthSettings

DEFAULTS = {
    "out": "run",
    "seeds": {"master": 0, "cv": 0, "roundtrip": 0},
    "paths": {"dataset": "dataset", "models": "models", "report": "report", "plots": "plots"},
    "pulse": {
        "f_start_hz": 160.0e3,
        "f_end_hz": 30.0e3,
        "duration_s": 1.0e-3,
        "sample_rate_hz": 1.0e6,
        "taper": 0.0,
    },
    "dataset": {
        "n_per_class": 430,
        "radius_m": [0.03, 0.08],
        "thickness_m": [0.002, 0.008],
        "range_m": [1.5, 3.0],
        "snr_db": [10.0, 30.0],
        "shell": "aluminium",
        "host": "water",
        "fillers": ["air", "water"],
        "n_samples": 32768,
        "clutter": True,
        "direct_ratio": 10.0,
        "ff_band_hz": [15.0e3, 175.0e3],
        "ff_step_hz": 1.0e6 / 8192,
    },
    "features": {
        "band_hz": list(BAND_HZ),
        "kinds": list(KINDS),
        "log_magnitude": False,
    },
    "classifiers": {
        "folds": 3,
        "save_models": True,
        "mlp": {
            "epochs": 150,
            "batch": 32,
            "lr": 1.0e-3,
            "dropout_p": 0.5,
            "hidden": [256, 128, 64, 32],
            "val_fraction": 0.15,
        },
        "svm": {
            "C_grid": [10.0, 1.0, 100.0],
            "gamma_scales": [1.0, 0.1, 10.0],
            "tol": 1.0e-3,
            "val_fraction": 0.2,
        },
    },
    "roundtrip": {"n_targets": 20, "snr_db": None, "n_fft": 8192, "band_db": -20.0},
    "plot": {"example": 0, "png": False},
}


def _merge(base, override, where=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ParameterError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ParameterError(f"config key {where}{key!r} must be a mapping")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _pair(value, name):
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{name} must be a [low, high] pair") from exc
    if not lo <= hi:
        raise ParameterError(f"{name} must satisfy low <= high (got {lo}, {hi})")
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    out: Path

    @classmethod
    def load(cls, path=None, seed: int | None = None, out=None) -> "RunConfig":
        doc = {}
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            text = path.read_text()
            try:
                doc = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise ParameterError(f"cannot parse {path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ParameterError(f"{path} must hold a mapping at the top level")
            base = path.parent
        raw = _merge(DEFAULTS, doc)
        if seed is not None:
            raw["seeds"] = {k: int(seed) for k in raw["seeds"]}
        for k, v in raw["seeds"].items():
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ParameterError(f"seed {k!r} must be a non-negative integer (was {v!r})")
        root = Path(out) if out is not None else base / raw["out"]
        cfg = cls(raw, root)
        cfg.validate()
        return cfg

    def validate(self):
        # Build every derived object once so bad values fail at start-up.
        self.pulse()
        self.param_ranges()
        self.synth_settings()
        self.band()
        self.classifiers()
        kinds = self.kinds
        if not kinds or any(k not in KINDS for k in kinds):
            raise ParameterError(f"features.kinds must be a non-empty subset of {KINDS}")
        if int(self.raw["dataset"]["n_per_class"]) < 1:
            raise ParameterError("dataset.n_per_class must be >= 1")
        if int(self.raw["classifiers"]["folds"]) < 2:
            raise ParameterError("classifiers.folds must be >= 2")

    def path(self, key: str) -> Path:
        return self.out / self.raw["paths"][key]

    @property
    def seeds(self) -> dict:
        return self.raw["seeds"]

    @property
    def kinds(self) -> list[str]:
        return list(self.raw["features"]["kinds"])

    def pulse(self) -> Waveform:
        p = self.raw["pulse"]
        return make_chirp(
            float(p["f_start_hz"]), float(p["f_end_hz"]), float(p["duration_s"]), float(p["sample_rate_hz"]), float(p["taper"])
        )

    def param_ranges(self) -> ParamRanges:
        d = self.raw["dataset"]
        fillers = tuple(parse_material(f) for f in d["fillers"])
        if len(fillers) != 2:
            raise ParameterError("dataset.fillers must list exactly two fillers (air-like, water-like)")
        return ParamRanges(
            radius_m=_pair(d["radius_m"], "dataset.radius_m"),
            thickness_m=_pair(d["thickness_m"], "dataset.thickness_m"),
            range_m=_pair(d["range_m"], "dataset.range_m"),
            snr_db=_pair(d["snr_db"], "dataset.snr_db"),
            shell=parse_material(d["shell"]),
            host=parse_material(d["host"]),
            fillers=fillers,
        )

    def synth_settings(self) -> SynthSettings:
        d = self.raw["dataset"]
        return SynthSettings(
            n_samples=int(d["n_samples"]),
            ff_band_hz=_pair(d["ff_band_hz"], "dataset.ff_band_hz"),
            ff_step_hz=float(d["ff_step_hz"]),
            clutter=bool(d["clutter"]),
            direct_ratio=float(d["direct_ratio"]),
        )

    def band(self) -> tuple[float, float]:
        return _pair(self.raw["features"]["band_hz"], "features.band_hz")

    def classifiers(self) -> list:
        c = self.raw["classifiers"]
        m, s = c["mlp"], c["svm"]
        hidden = tuple(int(h) for h in m["hidden"])
        hyper = MLPHyper(
            epochs=int(m["epochs"]),
            batch=int(m["batch"]),
            lr=float(m["lr"]),
            layer_sizes=(L,) + hidden + (1,),
            dropout_p=float(m["dropout_p"]),
        )
        mlp = MLPClassifier(hyper, float(m["val_fraction"]))
        svm = SVMClassifier(
            tuple(float(v) for v in s["C_grid"]),
            tuple(float(v) for v in s["gamma_scales"]),
            float(s["tol"]),
            float(s["val_fraction"]),
        )
        return [mlp, svm]

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True)
