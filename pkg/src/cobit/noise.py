"""Noise model, photon sources and success-rate estimation.

The physical imperfections modelled here are the ones that move the measured
NAND success rate: photon loss, plate-setting jitter, slow polarization
drift in the fibers, finite detector efficiency, dark counts, and detector
deadtime as a hard cap on counts per window.

Loss is drawn once per photon per round (end-to-end survival), so in
single-photon rounds the inconclusive fraction equals loss_prob directly.
Drift applies the same small rotation to the forward and return fiber paths
of a round.

estimate_success runs a vectorized Monte Carlo over independent rounds.  It
reproduces round_trip semantics from protocol.run_round (cross-checked in
the test suite) but batches the 2x2 algebra so calibration sweeps at 1e6+
trials stay cheap.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .plates import PHI, THETA
from .states import rotation, ry

_CHUNK = 1 << 18


@dataclass(frozen=True)
class DriftSchedule:
    """Slow rotation drift epsilon(t) = epsilon0 + slope*t plus round noise.

    Angles in radians, time in minutes.  sigma_round is the standard
    deviation of an extra zero-mean rotation drawn fresh each round.
    """

    epsilon0: float = 0.0
    slope_per_min: float = 0.0
    sigma_round: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_round < 0.0:
            raise ValueError("sigma_round must be >= 0")

    def mean_at(self, t_min: float) -> float:
        return self.epsilon0 + self.slope_per_min * t_min

    def sample(self, t_min: float, rng: np.random.Generator) -> float:
        eps = self.mean_at(t_min)
        if self.sigma_round > 0.0:
            eps += rng.normal(0.0, self.sigma_round)
        return eps


@dataclass(frozen=True)
class NoiseModel:
    """Per-round noise parameters; the default instance is noiseless."""

    loss_prob: float = 0.0
    plate_jitter_sigma: float = 0.0
    drift: DriftSchedule = field(default_factory=DriftSchedule)
    detector_efficiency: float = 1.0
    dark_count_prob: float = 0.0
    deadtime_s: float = 0.0

    def __post_init__(self) -> None:
        for name in ("loss_prob", "detector_efficiency", "dark_count_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v!r}")
        if self.plate_jitter_sigma < 0.0:
            raise ValueError("plate_jitter_sigma must be >= 0")
        if self.deadtime_s < 0.0:
            raise ValueError("deadtime_s must be >= 0")

    def is_noiseless(self) -> bool:
        return (
            self.loss_prob == 0.0
            and self.plate_jitter_sigma == 0.0
            and self.dark_count_prob == 0.0
            and self.detector_efficiency == 1.0
            and self.drift == DriftSchedule()
        )


@dataclass(frozen=True)
class HeraldedSource:
    """Heralded single photons; one signal photon per herald."""

    rate_hz: float = 300.0

    def __post_init__(self) -> None:
        if self.rate_hz < 0.0:
            raise ValueError("rate_hz must be >= 0")


@dataclass(frozen=True)
class CoherentSource:
    """Attenuated coherent beam.

    mean_detected_per_window is the mean number of *detected* photons in one
    reference window (detector efficiency already folded in, so it is not
    applied again when sampling).
    """

    mean_detected_per_window: float = 3.0
    window_ref_s: float = 1.0

    def __post_init__(self) -> None:
        if self.mean_detected_per_window < 0.0:
            raise ValueError("mean_detected_per_window must be >= 0")
        if self.window_ref_s <= 0.0:
            raise ValueError("window_ref_s must be > 0")


Source = HeraldedSource | CoherentSource


def sample_photon_count(
    source: Source, window_s: float, rng: np.random.Generator
) -> int:
    """Poisson photon count for one detection window."""
    if window_s < 0.0:
        raise ValueError("window_s must be >= 0")
    if isinstance(source, HeraldedSource):
        lam = source.rate_hz * window_s
    else:
        lam = source.mean_detected_per_window * window_s / source.window_ref_s
    return int(rng.poisson(lam))


def drift_rotation(
    drift: DriftSchedule, t_min: float, rng: np.random.Generator
) -> np.ndarray:
    """One round's fiber rotation, sampled from the schedule."""
    return rotation(drift.sample(t_min, rng))


def apply_noise(state, model: NoiseModel, t_min: float, rng: np.random.Generator):
    """Transit noise for one photon: loss draw, then drift rotation.

    Returns None when the photon is lost.  Imported lazily by callers that
    hold CobitState objects; the vectorized estimator below never builds
    them.
    """
    from .states import apply

    if model.loss_prob > 0.0 and rng.random() < model.loss_prob:
        return None
    return apply(drift_rotation(model.drift, t_min, rng), state)


# ---------------------------------------------------------------------------
# success estimation


@dataclass(frozen=True)
class EstimateWithError:
    """Fraction estimate with Poissonian standard error sqrt(max(k,1))/n."""

    p_hat: float
    stderr: float
    n: int

    @classmethod
    def from_counts(cls, k: int, n: int) -> "EstimateWithError":
        if n <= 0:
            return cls(float("nan"), float("nan"), 0)
        return cls(k / n, math.sqrt(max(k, 1)) / n, n)


@dataclass(frozen=True)
class SuccessEstimate:
    """Success fraction among conclusive rounds, with pad-conditional splits."""

    overall: EstimateWithError
    by_r: tuple[EstimateWithError, EstimateWithError]
    n_trials: int
    n_conclusive: int

    @property
    def inconclusive_fraction(self) -> float:
        return 1.0 - self.n_conclusive / self.n_trials


@dataclass(frozen=True)
class ExperimentConfig:
    """One repeated-round experiment: transform mode, source, noise, clock."""

    mode: str = "plates"  # "plates" | "abstract"
    source: Source | None = None  # None: fixed n_copies per round
    n_copies: int = 1
    window_s: float = 1.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    time_min: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("plates", "abstract"):
            raise ValueError(f"mode must be 'plates' or 'abstract', got {self.mode!r}")
        if self.n_copies < 1:
            raise ValueError("n_copies must be >= 1")
        if self.window_s <= 0.0:
            raise ValueError("window_s must be > 0")


def _hwp_product(angles: np.ndarray) -> np.ndarray:
    """Cumulative operator for a (T, 4) batch of plate angles, as (T, 2, 2)."""
    c = np.cos(2.0 * angles)
    s = np.sin(2.0 * angles)
    plates = np.empty(angles.shape + (2, 2))
    plates[..., 0, 0] = c
    plates[..., 0, 1] = s
    plates[..., 1, 0] = s
    plates[..., 1, 1] = -c
    cum = plates[:, 0]
    for i in range(1, angles.shape[1]):
        cum = plates[:, i] @ cum
    return cum


def _abstract_operator(a: int, b: int, r: int) -> np.ndarray:
    u = ry(math.pi / 2.0)
    op = np.linalg.matrix_power(u, a + b)
    if a ^ b:
        op = u.conj().T @ op
    if r:
        op = np.array([[0.0, 1.0], [1.0, 0.0]]) @ op
    # ry is real-valued, so the product carries no imaginary part
    return np.ascontiguousarray(op.real)


def _chunk_outcomes(
    a: int, b: int, config: ExperimentConfig, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate n rounds; returns (s, r) with s = -1 for inconclusive."""
    noise = config.noise
    r = rng.integers(0, 2, size=n)

    if config.mode == "plates":
        base = np.array([THETA * a, -THETA * b, -THETA * (a ^ b), 0.0])
        angles = np.tile(base, (n, 1))
        angles[:, 3] = PHI * r
        if noise.plate_jitter_sigma > 0.0:
            angles += rng.normal(0.0, noise.plate_jitter_sigma, size=angles.shape)
        client = _hwp_product(angles)
    else:
        ops = np.stack([_abstract_operator(a, b, 0), _abstract_operator(a, b, 1)])
        client = ops[r]

    drift = noise.drift
    eps = np.full(n, drift.mean_at(config.time_min))
    if drift.sigma_round > 0.0:
        eps += rng.normal(0.0, drift.sigma_round, size=n)
    if np.any(eps != 0.0):
        ce, se = np.cos(eps), np.sin(eps)
        rot = np.empty((n, 2, 2))
        rot[:, 0, 0] = ce
        rot[:, 0, 1] = -se
        rot[:, 1, 0] = se
        rot[:, 1, 1] = ce
        total = rot @ client @ rot
    else:
        total = client
    p1 = np.clip(np.abs(total[:, 1, 0]) ** 2, 0.0, 1.0)

    arrive = noise.detector_efficiency * (1.0 - noise.loss_prob)
    if config.source is None:
        detected = rng.binomial(config.n_copies, arrive, size=n)
    elif isinstance(config.source, HeraldedSource):
        # One herald per round; the rate only sets the wall-clock pace.
        detected = rng.binomial(1, arrive, size=n)
    else:
        src = config.source
        lam = src.mean_detected_per_window * config.window_s / src.window_ref_s
        detected = rng.poisson(lam, size=n)
    if noise.deadtime_s > 0.0:
        detected = np.minimum(detected, int(config.window_s / noise.deadtime_s))

    ones = rng.binomial(detected, p1)
    total_counts = detected
    if noise.dark_count_prob > 0.0:
        dark = rng.random(n) < noise.dark_count_prob
        ones = ones + (dark & (rng.integers(0, 2, size=n) == 1))
        total_counts = total_counts + dark

    zeros = total_counts - ones
    s = np.where(ones > zeros, 1, np.where(ones < zeros, 0, rng.integers(0, 2, size=n)))
    s = np.where(total_counts == 0, -1, s)
    return s, r


def _tally(
    a: int, b: int, config: ExperimentConfig, n_trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Counts array [[k_succ, n_conc] for r in (0, 1)]."""
    nand = 1 - (a & b)
    out = np.zeros((2, 2), dtype=np.int64)
    done = 0
    while done < n_trials:
        n = min(_CHUNK, n_trials - done)
        s, r = _chunk_outcomes(a, b, config, n, rng)
        conclusive = s >= 0
        decoded = s ^ 1 ^ r
        for rv in (0, 1):
            sel = conclusive & (r == rv)
            out[rv, 0] += int(np.count_nonzero(decoded[sel] == nand))
            out[rv, 1] += int(np.count_nonzero(sel))
        done += n
    return out


def _estimate_from_tally(tally: np.ndarray, n_trials: int) -> SuccessEstimate:
    k, n = int(tally[:, 0].sum()), int(tally[:, 1].sum())
    return SuccessEstimate(
        overall=EstimateWithError.from_counts(k, n),
        by_r=(
            EstimateWithError.from_counts(int(tally[0, 0]), int(tally[0, 1])),
            EstimateWithError.from_counts(int(tally[1, 0]), int(tally[1, 1])),
        ),
        n_trials=n_trials,
        n_conclusive=n,
    )


def estimate_success(
    a: int,
    b: int,
    config: ExperimentConfig,
    n_trials: int,
    rng: np.random.Generator,
) -> SuccessEstimate:
    """Monte Carlo success fraction for one input pair, pad drawn fresh."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    return _estimate_from_tally(_tally(a, b, config, n_trials, rng), n_trials)


def estimate_mean_success(
    config: ExperimentConfig, n_trials: int, rng: np.random.Generator
) -> SuccessEstimate:
    """Success fraction averaged over the four input pairs (trials split evenly)."""
    if n_trials < 4:
        raise ValueError("n_trials must be >= 4")
    tally = np.zeros((2, 2), dtype=np.int64)
    per = n_trials // 4
    for a in (0, 1):
        for b in (0, 1):
            tally += _tally(a, b, config, per, rng)
    return _estimate_from_tally(tally, 4 * per)


# ---------------------------------------------------------------------------
# calibration


class CalibrationError(RuntimeError):
    """Target success rate unreachable inside the given parameter bounds."""


_FREE_PARAMS = ("plate_jitter_sigma", "drift_sigma_round", "drift_slope_per_min")


def _with_param(config: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    if name == "plate_jitter_sigma":
        noise = dataclasses.replace(config.noise, plate_jitter_sigma=value)
    elif name == "drift_sigma_round":
        drift = dataclasses.replace(config.noise.drift, sigma_round=value)
        noise = dataclasses.replace(config.noise, drift=drift)
    elif name == "drift_slope_per_min":
        drift = dataclasses.replace(config.noise.drift, slope_per_min=value)
        noise = dataclasses.replace(config.noise, drift=drift)
    else:
        raise ValueError(f"free_param must be one of {_FREE_PARAMS}, got {name!r}")
    return dataclasses.replace(config, noise=noise)


@dataclass(frozen=True)
class CalibrationResult:
    free_param: str
    value: float
    achieved: SuccessEstimate


def calibrate_to_target(
    target: float,
    config: ExperimentConfig,
    free_param: str = "plate_jitter_sigma",
    bounds: tuple[float, float] = (0.0, 0.5),
    n_trials: int = 400_000,
    seed: int = 0,
    tol: float = 1e-3,
    max_iter: int = 48,
) -> CalibrationResult:
    """Bisect a noise parameter until mean success hits the target.

    The map parameter -> success must be monotone decreasing over bounds.
    Every evaluation reuses the same seed (common random numbers), which
    keeps the empirical map smooth enough for bisection at finite trials.
    """
    if not 0.5 < target <= 1.0:
        raise ValueError(f"target must be in (0.5, 1.0], got {target!r}")
    lo, hi = bounds
    if not 0.0 <= lo < hi:
        raise ValueError(f"bad bounds {bounds!r}")

    def success_at(x: float) -> SuccessEstimate:
        rng = np.random.default_rng(seed)
        return estimate_mean_success(_with_param(config, free_param, x), n_trials, rng)

    est_lo = success_at(lo)
    if est_lo.overall.p_hat < target - tol:
        raise CalibrationError(
            f"success at lower bound {lo} is {est_lo.overall.p_hat:.4f} < target {target}"
        )
    if est_lo.overall.p_hat <= target + tol:
        return CalibrationResult(free_param, lo, est_lo)
    est_hi = success_at(hi)
    if est_hi.overall.p_hat > target + tol:
        raise CalibrationError(
            f"success at upper bound {hi} is {est_hi.overall.p_hat:.4f} > target {target}"
        )

    best: tuple[float, SuccessEstimate] | None = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        est = success_at(mid)
        gap = abs(est.overall.p_hat - target)
        if best is None or gap < abs(best[1].overall.p_hat - target):
            best = (mid, est)
        if gap <= tol:
            return CalibrationResult(free_param, mid, est)
        if est.overall.p_hat > target:
            lo = mid
        else:
            hi = mid
    assert best is not None
    if abs(best[1].overall.p_hat - target) <= 2.0 * tol:
        return CalibrationResult(free_param, best[0], best[1])
    raise CalibrationError(f"no parameter within tolerance after {max_iter} bisections")


# ---------------------------------------------------------------------------
# stability over time


@dataclass(frozen=True)
class StabilityPoint:
    t_min: float
    estimate: SuccessEstimate


def stability_series(
    config: ExperimentConfig,
    duration_min: float = 210.0,
    n_points: int = 6,
    n_trials: int = 200_000,
    rng: np.random.Generator | None = None,
) -> list[StabilityPoint]:
    """Mean success sampled at evenly spaced times from 0 to duration_min."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if duration_min <= 0.0:
        raise ValueError("duration_min must be > 0")
    if rng is None:
        rng = np.random.default_rng(0)
    points = []
    for i in range(n_points):
        t = duration_min * i / (n_points - 1)
        cfg = dataclasses.replace(config, time_min=t)
        points.append(StabilityPoint(t, estimate_mean_success(cfg, n_trials, rng)))
    return points
