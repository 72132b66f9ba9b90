"""Checks that the server's view carries no information about the inputs.

The client's pad bit r acts as a one-time pad on the delegated round: over
the two values of r, the state the server receives averages to the
maximally mixed state regardless of (a, b), and the multiset of output rays
{|0>, |1>} is the same for every input pair.  This module verifies those
facts three ways:

* exact algebra: pad-averaged density matrices, pairwise trace distances,
  and phase-quotiented multiset comparisons, including many identical
  copies and server-chosen probe states;
* Monte Carlo: empirical views under input-independent noise stay
  indistinguishable up to sampling error;
* adversarially: guessing strategies fed the server's observations do no
  better than chance, while a sanity strategy that is handed the pad
  recovers AND(a, b) perfectly.

The n-copy check uses the fact that all copies in a round are identical:
the r-ensemble of n-copy product states coincides across inputs exactly
when the generating single-copy rays coincide as multisets, so no
2^n-dimensional object is ever formed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .noise import EstimateWithError
from .plates import compile_nand_program, cumulative_operator
from .protocol import RoundConfig, abstract_round_operator, run_round
from .states import (
    ATOL,
    CobitState,
    MAXIMALLY_MIXED,
    apply,
    basis_state,
    equal_up_to_global_phase,
    trace_distance,
)

INPUT_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


def round_operator(a: int, b: int, r: int, mode: str = "plates") -> np.ndarray:
    """Cumulative client operator for one (a, b, r) setting."""
    if mode == "plates":
        return cumulative_operator(compile_nand_program(a, b, r))
    if mode == "abstract":
        return abstract_round_operator(a, b, r)
    raise ValueError(f"mode must be 'plates' or 'abstract', got {mode!r}")


def output_state(a: int, b: int, r: int, mode: str = "plates") -> CobitState:
    """Exact noiseless state handed back to the server."""
    return apply(round_operator(a, b, r, mode), basis_state(0))


def view_multiset(a: int, b: int, mode: str = "plates") -> tuple[CobitState, CobitState]:
    """The two output rays (r = 0, 1) in canonical phase gauge."""
    return (
        output_state(a, b, 0, mode).canonical_phase(),
        output_state(a, b, 1, mode).canonical_phase(),
    )


def averaged_view(a: int, b: int, mode: str = "plates") -> np.ndarray:
    """Pad-averaged density matrix (1/2) sum_r |psi_r><psi_r|."""
    rho = sum(output_state(a, b, r, mode).density() for r in (0, 1)) / 2.0
    return rho


def _multisets_equal(
    m1: tuple[CobitState, ...], m2: tuple[CobitState, ...], tol: float
) -> bool:
    """Phase-quotiented multiset equality via greedy matching (size <= 2)."""
    remaining = list(m2)
    for s in m1:
        for i, t in enumerate(remaining):
            if equal_up_to_global_phase(s, t, tol):
                del remaining[i]
                break
        else:
            return False
    return not remaining


def probe_views(a: int, b: int, probe: CobitState) -> tuple[CobitState, CobitState]:
    """Output rays when the server substitutes its own probe state.

    Probes are always pushed through the plate compilation: that is what the
    client hardware applies to whatever light arrives.  The abstract
    shorthand agrees with it on the protocol input |0> but is not
    constrained off that input.
    """
    return tuple(
        apply(round_operator(a, b, r, "plates"), probe).canonical_phase()
        for r in (0, 1)
    )


def _global_sign_appendix() -> tuple[str, ...]:
    """Informational only: the global sign of each cumulative operator.

    Density matrices and detection statistics are blind to these signs; no
    security verdict is attached to them here.
    """
    lines = []
    flip = np.array([[0.0, -1.0], [1.0, 0.0]])  # maps |0> to |1>, |1> to -|0>
    for a, b in INPUT_PAIRS:
        for r in (0, 1):
            op = round_operator(a, b, r)
            for sign, base, label in (
                (1, np.eye(2), "+identity"),
                (-1, np.eye(2), "-identity"),
                (1, flip, "+flip"),
                (-1, flip, "-flip"),
            ):
                if np.allclose(op, sign * base, atol=ATOL):
                    lines.append(f"(a={a}, b={b}, r={r}): {label}")
                    break
            else:
                lines.append(f"(a={a}, b={b}, r={r}): not proportional to identity/flip")
    return tuple(lines)


ZERO_ROTATION_RULE = (
    "cumulative operator is identity up to global phase exactly when "
    "NAND(a, b) ^ 1 ^ r == 0, i.e. when the reported outcome s is 0"
)


@dataclass(frozen=True)
class BlindnessReport:
    """Outcome of the exact blindness audit at a fixed tolerance."""

    mode: str
    tolerance: float
    pad_removed: bool
    max_distance_from_mixed: float
    max_pairwise_distance: float
    multiset_ok: bool
    multi_copy_ok: bool
    n_copies: int
    probe_ok: bool
    n_probes: int
    passed: bool
    zero_rotation_rule: str = ZERO_ROTATION_RULE
    global_signs: tuple[str, ...] = ()
    # Attacks that rely on the server using a different transform mode than
    # the client assumes are out of scope; views are compared within one
    # mode only.
    mode_mismatch_modeled: bool = False

    def to_lines(self) -> list[str]:
        lines = [
            f"mode: {self.mode}",
            f"tolerance: {self.tolerance:g}",
            f"pad_removed: {self.pad_removed}",
            f"max_distance_from_mixed: {self.max_distance_from_mixed:.3e}",
            f"max_pairwise_distance: {self.max_pairwise_distance:.3e}",
            f"multiset_ok: {self.multiset_ok}",
            f"multi_copy_ok: {self.multi_copy_ok} (n_copies={self.n_copies})",
            f"probe_ok: {self.probe_ok} (n_probes={self.n_probes})",
            f"mode_mismatch_modeled: {self.mode_mismatch_modeled}",
            f"zero_rotation_rule: {self.zero_rotation_rule}",
            f"verdict: {'PASS' if self.passed else 'FAIL'}",
            "global_signs (informational):",
        ]
        lines += [f"  {line}" for line in self.global_signs]
        return lines


def _random_state(rng: np.random.Generator) -> CobitState:
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return CobitState(complex(v[0], v[1]), complex(v[2], v[3]))


def run_blindness_audit(
    mode: str = "plates",
    n_copies: int = 100,
    n_probes: int = 50,
    tol: float = ATOL,
    seed: int = 0,
    pad_removed: bool = False,
) -> BlindnessReport:
    """Exact audit of the noiseless server view across all input pairs.

    With pad_removed=True the pad is pinned to r = 0, which is the negative
    control: views become perfectly distinguishable and the audit fails.
    """
    if mode not in ("plates", "abstract"):
        raise ValueError(f"mode must be 'plates' or 'abstract', got {mode!r}")
    rng = np.random.default_rng(seed)

    if pad_removed:
        views = {ab: output_state(*ab, 0, mode).density() for ab in INPUT_PAIRS}
        multisets = {
            ab: (output_state(*ab, 0, mode).canonical_phase(),) for ab in INPUT_PAIRS
        }
    else:
        views = {ab: averaged_view(*ab, mode) for ab in INPUT_PAIRS}
        multisets = {ab: view_multiset(*ab, mode) for ab in INPUT_PAIRS}

    max_mixed = max(trace_distance(v, MAXIMALLY_MIXED) for v in views.values())
    pairs = [
        (p, q) for i, p in enumerate(INPUT_PAIRS) for q in INPUT_PAIRS[i + 1 :]
    ]
    max_pair = max(trace_distance(views[p], views[q]) for p, q in pairs)
    multiset_ok = all(_multisets_equal(multisets[p], multisets[q], tol) for p, q in pairs)

    # Identical copies: n-copy ensembles match iff the generating rays match.
    multi_copy_ok = multiset_ok and n_copies >= 1

    probe_ok = True
    for _ in range(n_probes):
        probe = _random_state(rng)
        if pad_removed:
            fam = {ab: (probe_views(*ab, probe)[0],) for ab in INPUT_PAIRS}
        else:
            fam = {ab: probe_views(*ab, probe) for ab in INPUT_PAIRS}
        if not all(_multisets_equal(fam[p], fam[q], tol) for p, q in pairs):
            probe_ok = False
            break

    passed = (
        max_mixed <= tol
        and max_pair <= tol
        and multiset_ok
        and multi_copy_ok
        and probe_ok
    )
    return BlindnessReport(
        mode=mode,
        tolerance=tol,
        pad_removed=pad_removed,
        max_distance_from_mixed=max_mixed,
        max_pairwise_distance=max_pair,
        multiset_ok=multiset_ok,
        multi_copy_ok=multi_copy_ok,
        n_copies=n_copies,
        probe_ok=probe_ok,
        n_probes=n_probes,
        passed=passed,
        global_signs=_global_sign_appendix(),
    )


def estimate_noisy_view(
    a: int, b: int, config: RoundConfig, n_rounds: int, rng: np.random.Generator
) -> np.ndarray:
    """Empirical per-copy density of the states the server receives."""
    config = dataclasses.replace(config, record_view=True)
    acc = np.zeros((2, 2), dtype=complex)
    count = 0
    for _ in range(n_rounds):
        view = run_round(a, b, config, rng).view
        for state in view.states:
            acc += state.density()
            count += 1
    if count == 0:
        raise RuntimeError("no states survived; cannot estimate a view")
    return acc / count


# ---------------------------------------------------------------------------
# adversary harness


@dataclass(frozen=True)
class Observation:
    """What a guessing strategy is shown for one round."""

    s: int | None
    states: tuple[CobitState, ...] = ()
    raw: bytes = b""
    leaked_r: int | None = None  # populated only for pad-leak sanity checks


@dataclass(frozen=True)
class Guess:
    ab: tuple[int, int]
    and_: int


class Strategy:
    """Base class; subclasses map an Observation to a Guess."""

    name = "strategy"
    needs_pad_leak = False

    def guess(self, obs: Observation) -> Guess:  # pragma: no cover - abstract
        raise NotImplementedError


class OutcomeFollower(Strategy):
    """Reads s as if it were AND(a, b) directly."""

    name = "outcome-follower"

    def guess(self, obs: Observation) -> Guess:
        s = obs.s if obs.s is not None else 0
        return Guess(ab=(s, s), and_=s)


class OutcomeInverter(Strategy):
    """Bets the pad flipped the outcome."""

    name = "outcome-inverter"

    def guess(self, obs: Observation) -> Guess:
        s = obs.s if obs.s is not None else 0
        return Guess(ab=(1, 1) if s == 0 else (0, 1), and_=1 - s)


class StateReader(Strategy):
    """Reads the dominant amplitude of the first transformed state."""

    name = "state-reader"

    def guess(self, obs: Observation) -> Guess:
        if obs.states:
            bit = int(abs(obs.states[0].amp1) > abs(obs.states[0].amp0))
        else:
            bit = obs.s if obs.s is not None else 0
        return Guess(ab=(bit, bit), and_=bit)


class UniformGuesser(Strategy):
    """Fresh uniform guesses every round."""

    name = "uniform"

    def __init__(self, seed: int = 0) -> None:
        self._rng = np.random.default_rng(seed)

    def guess(self, obs: Observation) -> Guess:
        a, b, g = (int(x) for x in self._rng.integers(0, 2, size=3))
        return Guess(ab=(a, b), and_=g)


class PadLeakSanity(Strategy):
    """Given the leaked pad, recovers AND(a, b) = s ^ r exactly."""

    name = "pad-leak-sanity"
    needs_pad_leak = True

    def guess(self, obs: Observation) -> Guess:
        if obs.s is None or obs.leaked_r is None:
            return Guess(ab=(0, 0), and_=0)
        and_ = obs.s ^ obs.leaked_r
        return Guess(ab=(1, 1) if and_ else (0, 0), and_=and_)


def builtin_strategies(seed: int = 0) -> list[Strategy]:
    """Chance-level strategies; the pad-leak sanity check is separate."""
    return [OutcomeFollower(), OutcomeInverter(), StateReader(), UniformGuesser(seed)]


@dataclass(frozen=True)
class StrategyScore:
    name: str
    inputs_accuracy: EstimateWithError
    and_accuracy: EstimateWithError


def generate_observations(
    n_rounds: int, config: RoundConfig, rng: np.random.Generator
) -> list[tuple[tuple[int, int], Observation]]:
    """Run rounds with uniform inputs, recording what the server saw."""
    config = dataclasses.replace(config, record_view=True)
    out = []
    for _ in range(n_rounds):
        a, b = (int(x) for x in rng.integers(0, 2, size=2))
        result = run_round(a, b, config, rng)
        obs = Observation(
            s=result.view.s,
            states=result.view.states,
            leaked_r=result.transcript.r,
        )
        out.append(((a, b), obs))
    return out


def score_strategies(
    strategies: list[Strategy],
    observations: list[tuple[tuple[int, int], Observation]],
) -> list[StrategyScore]:
    """Accuracy of each strategy at guessing (a, b) and AND(a, b).

    The leaked pad is withheld from every strategy that does not declare
    needs_pad_leak.
    """
    scores = []
    for strat in strategies:
        hit_ab = hit_and = 0
        for (a, b), obs in observations:
            if not strat.needs_pad_leak and obs.leaked_r is not None:
                obs = dataclasses.replace(obs, leaked_r=None)
            g = strat.guess(obs)
            hit_ab += g.ab == (a, b)
            hit_and += g.and_ == (a & b)
        n = len(observations)
        scores.append(
            StrategyScore(
                name=strat.name,
                inputs_accuracy=EstimateWithError.from_counts(hit_ab, n),
                and_accuracy=EstimateWithError.from_counts(hit_and, n),
            )
        )
    return scores


def adversary_guess_experiment(
    strategies: list[Strategy],
    n_rounds: int,
    config: RoundConfig = RoundConfig(),
    rng: np.random.Generator | None = None,
) -> list[StrategyScore]:
    """End-to-end harness: uniform rounds, then score every strategy."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return score_strategies(strategies, generate_observations(n_rounds, config, rng))
