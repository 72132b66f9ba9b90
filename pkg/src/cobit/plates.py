"""Half-wave-plate algebra and the four-plate NAND program.

A half-wave plate at axis angle alpha acts on the polarization vector as the
reflection hwp(alpha) = [[cos 2a, sin 2a], [sin 2a, -cos 2a]].  Anchors:
hwp(0) = sigma_z, hwp(pi/8) = Hadamard, hwp(pi/4) = sigma_x.

The client encodes a NAND round (inputs a, b, pad bit r) as four plates in
application order

    [hwp(THETA*a), hwp(-THETA*b), hwp(-THETA*(a^b)), hwp(PHI*r)]

with THETA = pi/8 and PHI = pi/4.  An exponent of zero means the plate is
present at angle zero (sigma_z), never absent; the identity of the plate
sequence must not depend on the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .states import _frozen

THETA = math.pi / 8.0
PHI = math.pi / 4.0


def hwp(alpha: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at angle alpha."""
    c, s = math.cos(2.0 * alpha), math.sin(2.0 * alpha)
    return _frozen([[c, s], [s, -c]])


def canonical_plate_angle(alpha: float) -> float:
    """Reduce a plate angle to (-pi/2, pi/2]; hwp has period pi in alpha."""
    r = math.remainder(alpha, math.pi)
    if r <= -math.pi / 2.0:
        r += math.pi
    return r


@dataclass(frozen=True)
class PlateProgram:
    """Ordered plate angles, first-applied first; angles stored canonically."""

    angles: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "angles", tuple(canonical_plate_angle(a) for a in self.angles)
        )

    def __len__(self) -> int:
        return len(self.angles)


def _bit(x: int, name: str) -> int:
    if x not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {x!r}")
    return x


def compile_nand_program(a: int, b: int, r: int) -> PlateProgram:
    """Four-plate program for one NAND round; always length 4."""
    a, b, r = _bit(a, "a"), _bit(b, "b"), _bit(r, "r")
    return PlateProgram(
        (THETA * a, -THETA * b, -THETA * (a ^ b), PHI * r)
    )


def cumulative_operator(program: PlateProgram) -> np.ndarray:
    """Ordered product of the program's plates, last plate leftmost."""
    ops = [hwp(a) for a in program.angles]
    return reduce(lambda acc, op: op @ acc, ops, np.eye(2))


def three_plate_nand(a: int, b: int) -> np.ndarray:
    """Cumulative operator of the first three plates (pad plate omitted).

    Equals sigma_z for (0,0), (0,1), (1,0); for (1,1) it maps |0> to |1>
    up to global phase.
    """
    a, b = _bit(a, "a"), _bit(b, "b")
    prog = compile_nand_program(a, b, 0)
    return cumulative_operator(PlateProgram(prog.angles[:3]))
