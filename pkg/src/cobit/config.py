"""Run configuration: YAML schema, strict validation, shipped presets.

A config file is a single YAML document; every key is optional and unknown
keys are rejected so typos fail loudly (exit code 2 in the CLI).  The
defaults describe a noiseless single-copy experiment.  See the README for
the full schema.

A config may carry calibration steps.  Each step bisects one noise
parameter until the mean success rate hits a target; steps run in order
before any estimation, seeded from the run seed, so a config plus a seed
pins the entire run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .noise import (
    CalibrationResult,
    CoherentSource,
    DriftSchedule,
    ExperimentConfig,
    HeraldedSource,
    NoiseModel,
    calibrate_to_target,
)


class ConfigError(ValueError):
    """Malformed run configuration."""


@dataclass(frozen=True)
class CalibrationSpec:
    """One bisection step: fit free_param so mean success hits target."""

    free_param: str
    target: float
    bounds: tuple[float, float] = (0.0, 0.5)
    trials: int = 400_000
    at_min: float = 0.0  # clock time at which the target must hold
    tol: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    trials: int = 100_000
    calibration: tuple[CalibrationSpec, ...] = ()
    duration_min: float = 210.0
    points: int = 6
    wire_copies: int = 1
    timeout_s: float = 5.0

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.points < 2:
            raise ConfigError("points must be >= 2")
        if self.duration_min <= 0:
            raise ConfigError("duration_min must be > 0")
        if self.wire_copies < 1:
            raise ConfigError("wire_copies must be >= 1")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be > 0")


def _take(doc: dict, allowed: dict[str, type | tuple[type, ...]], where: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(doc).__name__}")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    for key, types in allowed.items():
        if key in doc and doc[key] is not None and not isinstance(doc[key], types):
            raise ConfigError(f"{where}.{key} has wrong type {type(doc[key]).__name__}")
    return doc


_NUM = (int, float)


def _parse_source(doc: dict | None):
    if doc is None:
        return None
    _take(
        doc,
        {
            "kind": str,
            "rate_hz": _NUM,
            "mean_detected_per_window": _NUM,
            "window_ref_s": _NUM,
        },
        "source",
    )
    kind = doc.get("kind")
    if kind == "heralded":
        return HeraldedSource(rate_hz=float(doc.get("rate_hz", 300.0)))
    if kind == "coherent":
        return CoherentSource(
            mean_detected_per_window=float(doc.get("mean_detected_per_window", 3.0)),
            window_ref_s=float(doc.get("window_ref_s", 1.0)),
        )
    raise ConfigError(f"source.kind must be 'heralded' or 'coherent', got {kind!r}")


def _parse_noise(doc: dict | None) -> NoiseModel:
    if doc is None:
        return NoiseModel()
    _take(
        doc,
        {
            "loss_prob": _NUM,
            "plate_jitter_sigma": _NUM,
            "detector_efficiency": _NUM,
            "dark_count_prob": _NUM,
            "deadtime_s": _NUM,
            "drift": dict,
        },
        "noise",
    )
    drift_doc = doc.get("drift")
    if drift_doc is not None:
        _take(
            drift_doc,
            {"epsilon0": _NUM, "slope_per_min": _NUM, "sigma_round": _NUM},
            "noise.drift",
        )
        drift = DriftSchedule(
            epsilon0=float(drift_doc.get("epsilon0", 0.0)),
            slope_per_min=float(drift_doc.get("slope_per_min", 0.0)),
            sigma_round=float(drift_doc.get("sigma_round", 0.0)),
        )
    else:
        drift = DriftSchedule()
    try:
        return NoiseModel(
            loss_prob=float(doc.get("loss_prob", 0.0)),
            plate_jitter_sigma=float(doc.get("plate_jitter_sigma", 0.0)),
            drift=drift,
            detector_efficiency=float(doc.get("detector_efficiency", 1.0)),
            dark_count_prob=float(doc.get("dark_count_prob", 0.0)),
            deadtime_s=float(doc.get("deadtime_s", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_calibration(doc) -> tuple[CalibrationSpec, ...]:
    if doc is None:
        return ()
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise ConfigError("calibration must be a mapping or a list of mappings")
    specs = []
    for i, step in enumerate(doc):
        _take(
            step,
            {
                "free_param": str,
                "target": _NUM,
                "bounds": list,
                "trials": int,
                "at_min": _NUM,
                "tol": _NUM,
            },
            f"calibration[{i}]",
        )
        if "free_param" not in step or "target" not in step:
            raise ConfigError(f"calibration[{i}] needs free_param and target")
        bounds = step.get("bounds", [0.0, 0.5])
        if len(bounds) != 2:
            raise ConfigError(f"calibration[{i}].bounds must have two entries")
        specs.append(
            CalibrationSpec(
                free_param=str(step["free_param"]),
                target=float(step["target"]),
                bounds=(float(bounds[0]), float(bounds[1])),
                trials=int(step.get("trials", 400_000)),
                at_min=float(step.get("at_min", 0.0)),
                tol=float(step.get("tol", 1e-3)),
            )
        )
    return tuple(specs)


def config_from_dict(doc: dict | None) -> RunConfig:
    if doc is None:
        return RunConfig()
    _take(
        doc,
        {
            "mode": str,
            "copies": int,
            "trials": int,
            "window_s": _NUM,
            "time_min": _NUM,
            "source": dict,
            "noise": dict,
            "calibration": (dict, list),
            "duration_min": _NUM,
            "points": int,
            "wire_copies": int,
            "timeout_s": _NUM,
        },
        "config",
    )
    try:
        experiment = ExperimentConfig(
            mode=doc.get("mode", "plates"),
            source=_parse_source(doc.get("source")),
            n_copies=int(doc.get("copies", 1)),
            window_s=float(doc.get("window_s", 1.0)),
            noise=_parse_noise(doc.get("noise")),
            time_min=float(doc.get("time_min", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        experiment=experiment,
        trials=int(doc.get("trials", 100_000)),
        calibration=_parse_calibration(doc.get("calibration")),
        duration_min=float(doc.get("duration_min", 210.0)),
        points=int(doc.get("points", 6)),
        wire_copies=int(doc.get("wire_copies", 1)),
        timeout_s=float(doc.get("timeout_s", 5.0)),
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Load a RunConfig from YAML; None gives the noiseless defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad YAML in {path}: {exc}") from exc
    return config_from_dict(doc)


def apply_calibration(
    run: RunConfig, seed: int
) -> tuple[ExperimentConfig, list[CalibrationResult]]:
    """Run the config's calibration steps in order; returns the fitted experiment."""
    exp = run.experiment
    results: list[CalibrationResult] = []
    for i, spec in enumerate(run.calibration):
        at_time = dataclasses.replace(exp, time_min=spec.at_min)
        res = calibrate_to_target(
            target=spec.target,
            config=at_time,
            free_param=spec.free_param,
            bounds=spec.bounds,
            n_trials=spec.trials,
            seed=seed + i,
            tol=spec.tol,
        )
        fitted = dataclasses.replace(at_time, time_min=exp.time_min)
        exp = _set_noise_param(fitted, spec.free_param, res.value)
        results.append(res)
    return exp, results


def _set_noise_param(exp: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    from .noise import _with_param

    return _with_param(exp, name, value)


# ---------------------------------------------------------------------------
# presets mirrored by the YAML files in configs/


def heralded_run(trials: int = 400_000) -> RunConfig:
    """Single detected photon per round, jitter fitted to 98.8% mean success."""
    return RunConfig(
        experiment=ExperimentConfig(
            mode="plates", source=HeraldedSource(rate_hz=300.0), window_s=1.0
        ),
        trials=trials,
        calibration=(
            CalibrationSpec(
                free_param="plate_jitter_sigma", target=0.988, trials=trials
            ),
        ),
    )


def coherent_run(trials: int = 400_000) -> RunConfig:
    """Poisson-count windows with majority vote, fitted to 98.2% mean success."""
    return RunConfig(
        experiment=ExperimentConfig(
            mode="plates",
            source=CoherentSource(mean_detected_per_window=3.0),
            window_s=1.0,
            noise=NoiseModel(deadtime_s=10e-6),
        ),
        trials=trials,
        calibration=(
            CalibrationSpec(
                free_param="plate_jitter_sigma", target=0.982, trials=trials
            ),
        ),
    )


def stability_run(trials: int = 400_000) -> RunConfig:
    """Coherent run plus drift slope fitted so success decays to 97.1% at 210 min."""
    base = coherent_run(trials)
    return dataclasses.replace(
        base,
        calibration=base.calibration
        + (
            CalibrationSpec(
                free_param="drift_slope_per_min",
                target=0.971,
                bounds=(0.0, 0.01),
                trials=trials,
                at_min=210.0,
            ),
        ),
        duration_min=210.0,
        points=6,
    )


PRESETS = {
    "heralded": heralded_run,
    "coherent": coherent_run,
    "stability": stability_run,
}
