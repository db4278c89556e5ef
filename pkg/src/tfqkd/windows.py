"""Window classification and the fixed bit convention.

A time window is a Z window when both parties chose signal windows, and an
X window when both chose decoy windows, sent the same nonzero intensity,
and the announced phases pass the alignment criterion
``1 - |cos(theta_A - theta_B - psi_AB)| <= lambda``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

TWO_PI = 2.0 * math.pi


class WindowClass(Enum):
    Z = "Z"
    X1 = "X1"
    X2 = "X2"
    DISCARD = "discard"


@dataclass(frozen=True)
class WindowRecord:
    """One pulse-pair window as the simulator sees it."""

    a_basis: str
    b_basis: str
    a_intensity: int
    b_intensity: int
    theta_a: float
    theta_b: float
    drift_phase: float
    outcome: str  # none, det1, det2, both


def classify_window(a_window: str, b_window: str, a_intensity: int,
                    b_intensity: int, theta_a: float, theta_b: float,
                    psi_ab: float, lam: float) -> WindowClass:
    """Classify one announced window.

    ``psi_ab`` is the reference phase both parties agree on (here the
    phase-tracking estimate); ``lam`` is the alignment threshold.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must be in (0, 1]")
    if a_window == "Z" and b_window == "Z":
        return WindowClass.Z
    if a_window == "X" and b_window == "X":
        if a_intensity == b_intensity and a_intensity in (1, 2):
            if 1.0 - abs(math.cos(theta_a - theta_b - psi_ab)) <= lam:
                return WindowClass.X1 if a_intensity == 1 else WindowClass.X2
    return WindowClass.DISCARD


def alice_bit(sent: bool) -> int:
    """Alice records 1 when she sends, 0 when she stays silent."""
    return 1 if sent else 0


def bob_bit(sent: bool) -> int:
    """Bob records the complementary convention: 0 when he sends."""
    return 0 if sent else 1


def z_event_is_error(alice_sent: bool, bob_sent: bool) -> bool:
    """A heralded Z event is an error when both or neither sent."""
    return alice_sent == bob_sent


def wrapped_mismatch(angle: float) -> float:
    """Angular distance of ``angle`` from the nearest of {0, pi}, in [0, pi/2]."""
    a = math.fmod(angle, math.pi)
    if a < 0.0:
        a += math.pi
    return min(a, math.pi - a)


def lambda_to_ds_half_deg(lam: float) -> float:
    """Half-width (degrees) of the slice equivalent to 1 - |cos| <= lam."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must be in (0, 1]")
    return math.degrees(math.acos(1.0 - lam))
