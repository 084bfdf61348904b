"""Gait phase generation: desired per-foot contact schedule and phase signals.

Foot order is (FL, FR, RL, RR).  Default gait is a trot: diagonal pairs
share a phase, offsets (0, 0.5, 0.5, 0), 2 Hz, duty factor 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TROT_OFFSETS = (0.0, 0.5, 0.5, 0.0)


@dataclass
class GaitCommand:
    phase_offsets: tuple[float, float, float, float] = TROT_OFFSETS
    frequency_hz: float = 2.0
    duty_factor: float = 0.5

    def __post_init__(self):
        if not all(0.0 <= o < 1.0 for o in self.phase_offsets):
            raise ValueError("phase offsets must lie in [0, 1)")
        if not 0.0 < self.frequency_hz <= 5.0:
            raise ValueError("gait frequency must lie in (0, 5] Hz")
        if not 0.0 < self.duty_factor < 1.0:
            raise ValueError("duty factor must lie in (0, 1)")


def foot_phases(g: GaitCommand, t: float) -> np.ndarray:
    """Per-foot cyclic phase in [0, 1)."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    return np.mod(t * g.frequency_hz + np.asarray(g.phase_offsets), 1.0)


def desired_contact(g: GaitCommand, t: float) -> np.ndarray:
    """Desired contact state c_cmd per foot: 1 in stance, 0 in swing."""
    return (foot_phases(g, t) < g.duty_factor).astype(np.float64)


def phase_signals(g: GaitCommand, t: float) -> np.ndarray:
    """(sin, cos) of 2*pi*phase for each foot, 8 values, feet-major order."""
    phi = foot_phases(g, t)
    sig = np.empty(8)
    sig[0::2] = np.sin(2.0 * math.pi * phi)
    sig[1::2] = np.cos(2.0 * math.pi * phi)
    return sig
