"""Protocol and security parameter types with validation.

Parameter sets mirror the experiment's configuration tables: source
intensities, window/intensity probabilities, pulse-train timing, and the
security coefficients entering the final key-length formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


class ParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


_PROB_TOL = 1e-6


@dataclass(frozen=True)
class ProtocolParams:
    """Source and window configuration of one protocol run.

    Intensities are mean photon numbers per pulse. ``p_z1`` is the
    sending probability inside a signal window (the protocol's epsilon);
    ``p0, p1, p2`` are the vacuum / weak / strong decoy probabilities
    inside a decoy window.
    """

    mu1: float
    mu2: float
    mu_z: float
    mu_ref: float
    p_x: float
    p_z: float
    p0: float
    p1: float
    p2: float
    p_z1: float
    p_z0: float
    n_total: float
    n_phase_slices: int = 16
    pulses_per_period: int = 15
    period_ns: float = 1000.0
    signal_width_ns: float = 1.0
    ref_width_ns: float = 100.0

    def intensity(self, index: int) -> float:
        """Mean photon number for intensity index 0..3 (vacuum, mu1, mu2, mu_z)."""
        return (0.0, self.mu1, self.mu2, self.mu_z)[index]

    def errors(self) -> list[str]:
        errs = []
        for name in ("mu1", "mu2", "mu_z", "mu_ref"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be >= 0")
        if not self.mu1 < self.mu2:
            errs.append("mu1 < mu2 required")
        for name in ("p_x", "p_z", "p0", "p1", "p2", "p_z0", "p_z1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                errs.append(f"{name} must be in [0, 1]")
        if abs(self.p_x + self.p_z - 1.0) > _PROB_TOL:
            errs.append("window probabilities must sum to 1 (p_x + p_z)")
        if abs(self.p0 + self.p1 + self.p2 - 1.0) > _PROB_TOL:
            errs.append("decoy probabilities must sum to 1")
        if abs(self.p_z0 + self.p_z1 - 1.0) > _PROB_TOL:
            errs.append("send/not-send probabilities must sum to 1")
        if not self.n_total > 0:
            errs.append("n_total must be > 0")
        if self.n_phase_slices < 1:
            errs.append("n_phase_slices must be >= 1")
        if self.pulses_per_period < 1:
            errs.append("pulses_per_period must be >= 1")
        return errs


@dataclass(frozen=True)
class SecurityParams:
    """Failure-probability budget and error-correction efficiency.

    ``xi`` is the per-invocation Chernoff failure probability; the
    protocol's total failure probability is ``eps_tol = 22 * xi`` under
    the budget eps_cor + 2*eps_hat + 4*(3 xi) + eps_pa + 6 xi.
    """

    xi: float = 1e-10
    eps_cor: float = 1e-10
    eps_pa: float = 1e-10
    eps_hat: float = 1e-10
    f: float = 1.1

    @property
    def eps_tol(self) -> float:
        return 22.0 * self.xi

    def errors(self) -> list[str]:
        errs = []
        if not 0.0 < self.xi < 1.0:
            errs.append("xi must be in (0, 1)")
        for name in ("eps_cor", "eps_pa", "eps_hat"):
            if not 0.0 < getattr(self, name) < 1.0:
                errs.append(f"{name} must be in (0, 1)")
        if self.f < 1.0:
            errs.append("f must be >= 1")
        return errs


def validate_params(protocol: ProtocolParams, security: SecurityParams):
    """Check all invariants; return the pair or raise ParameterError.

    Every violated invariant is reported with its field name so a config
    file can be fixed in one pass.
    """
    errs = protocol.errors() + security.errors()
    if errs:
        raise ParameterError(errs)
    return protocol, security


def protocol_from_dict(d: dict) -> ProtocolParams:
    known = {f.name for f in fields(ProtocolParams)}
    return ProtocolParams(**{k: v for k, v in d.items() if k in known})


def security_from_dict(d: dict) -> SecurityParams:
    known = {f.name for f in fields(SecurityParams)}
    return SecurityParams(**{k: v for k, v in d.items() if k in known})
