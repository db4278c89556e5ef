"""Relative-phase drift, the reference-pulse estimator, and post-selection.

The twin fields drift apart with a rate that is Gaussian over millisecond
scales.  Instead of active compensation, four strong reference pulses per
period (sender phases 0, pi/2, pi, 3pi/2 against a fixed pi) are counted
over a block of periods; the relative phase is recovered by least squares
against the interference fringe and applied to the same block's signal
windows in post-processing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .windows import wrapped_mismatch

TWO_PI = 2.0 * math.pi

# Alice-minus-Bob phase differences of the four reference settings.
REF_PHASE_DIFFS = np.array([math.pi, 1.5 * math.pi, 0.0, 0.5 * math.pi])


@dataclass(frozen=True)
class DriftModel:
    """Piecewise-linear phase drift with Gaussian rate.

    The drift rate (rad/ms) is redrawn from N(0, rate_std^2) every
    ``resample_interval_ms``; the phase integrates continuously.
    """

    rate_std_rad_per_ms: float
    resample_interval_ms: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rate_std_rad_per_ms < 0:
            raise ValueError("rate_std must be >= 0")
        if self.resample_interval_ms <= 0:
            raise ValueError("resample_interval must be > 0")


@dataclass
class ReferenceFrame:
    """Accumulated reference counts of one estimation block.

    ``counts[i]`` sums both detectors at effective phase difference
    REF_PHASE_DIFFS[i]: detector-2 clicks see the fringe shifted by pi and
    are therefore accumulated into the complementary setting (i + 2 mod 4).
    """

    counts: np.ndarray
    periods_accumulated: int = 12
    timestamp_ms: float = 0.0
    true_phase: float | None = None

    def total(self) -> float:
        return float(np.sum(self.counts))


@dataclass(frozen=True)
class PhaseEstimate:
    delta_phi: float
    residual: float
    accepted: bool = True


def sample_drift(model: DriftModel, duration_ms: float, rng=None):
    """Drift path over ``duration_ms`` as (knot_times_ms, knot_phases, rates).

    Phase at time t inside interval k is knot_phases[k] +
    rates[k] * (t - knot_times[k]); deterministic given the model seed.
    """
    if duration_ms <= 0:
        raise ValueError("duration must be > 0")
    if rng is None:
        rng = np.random.default_rng(model.seed)
    n = int(math.ceil(duration_ms / model.resample_interval_ms))
    rates = rng.normal(0.0, model.rate_std_rad_per_ms, size=n)
    knot_times = np.arange(n + 1) * model.resample_interval_ms
    knot_phases = np.concatenate([[0.0], np.cumsum(rates * model.resample_interval_ms)])
    return knot_times, knot_phases, rates


def drift_phase_at(knot_times, knot_phases, rates, t_ms):
    """Evaluate a sampled drift path at arbitrary times (vectorized)."""
    t_ms = np.asarray(t_ms, dtype=float)
    dt = knot_times[1] - knot_times[0]
    idx = np.clip((t_ms / dt).astype(int), 0, len(rates) - 1)
    return knot_phases[idx] + rates[idx] * (t_ms - knot_times[idx])


def reference_probs(delta_phi: float):
    """Detector-1 fringe values cos^2((dtheta_i + delta_phi)/2) per setting."""
    return np.cos((REF_PHASE_DIFFS + delta_phi) / 2.0) ** 2


def _grid_probs(phis: np.ndarray) -> np.ndarray:
    # shape (4, len(phis))
    return np.cos((REF_PHASE_DIFFS[:, None] + phis[None, :]) / 2.0) ** 2


_COARSE_GRID = np.arange(0.0, TWO_PI, math.radians(0.5))
_COARSE_PROBS = _grid_probs(_COARSE_GRID)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def estimate_phase_batch(counts: np.ndarray, tol: float = 1e-4):
    """Least-squares phase estimates for many frames at once.

    ``counts`` has shape (n_frames, 4).  Normalized count probabilities
    p_i = 2 N_i / sum(N) are matched against the fringe model by a
    0.5-degree grid scan followed by golden-section refinement.
    Frames with zero total counts get NaN estimates and infinite residuals.
    """
    counts = np.asarray(counts, dtype=float)
    totals = counts.sum(axis=1)
    ok = totals > 0
    p = np.zeros_like(counts)
    p[ok] = 2.0 * counts[ok] / totals[ok, None]

    err = ((p[:, :, None] - _COARSE_PROBS[None, :, :]) ** 2).sum(axis=1)
    best = np.argmin(err, axis=1)
    step = _COARSE_GRID[1] - _COARSE_GRID[0]
    lo = _COARSE_GRID[best] - step
    hi = _COARSE_GRID[best] + step

    def err_at(phi):
        model = np.cos((REF_PHASE_DIFFS[None, :] + phi[:, None]) / 2.0) ** 2
        return ((p - model) ** 2).sum(axis=1)

    a, b = lo.copy(), hi.copy()
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = err_at(c), err_at(d)
    width = float(np.max(b - a))
    n_iter = max(1, int(math.ceil(math.log(tol / width) / math.log(_GOLDEN))))
    for _ in range(n_iter):
        shrink_right = fc < fd
        b = np.where(shrink_right, d, b)
        a = np.where(shrink_right, a, c)
        c_new = np.where(shrink_right, b - _GOLDEN * (b - a), d)
        d_new = np.where(shrink_right, c, a + _GOLDEN * (b - a))
        probe = np.where(shrink_right, c_new, d_new)
        fprobe = err_at(probe)
        fc, fd = (np.where(shrink_right, fprobe, fd),
                  np.where(shrink_right, fc, fprobe))
        c, d = c_new, d_new
    phi = 0.5 * (a + b)
    resid = err_at(phi)
    phi = np.mod(phi, TWO_PI)
    phi[~ok] = np.nan
    resid[~ok] = np.inf
    return phi, resid


def estimate_phase(frame: ReferenceFrame, tol: float = 1e-4) -> PhaseEstimate:
    """Estimate the block's relative phase from its reference counts."""
    if frame.total() <= 0:
        raise ValueError("cannot estimate phase from an all-zero frame")
    phi, resid = estimate_phase_batch(frame.counts[None, :], tol=tol)
    return PhaseEstimate(delta_phi=float(phi[0]), residual=float(resid[0]))


def accept_frames(estimates, rc: float):
    """Keep the rc fraction of frames with the smallest residuals.

    Returns the accepted subset in the original order.  All data inside a
    rejected frame is discarded before announcement.
    """
    if not 0.0 < rc <= 1.0:
        raise ValueError("rc must be in (0, 1]")
    ests = list(estimates)
    if rc >= 1.0 or not ests:
        return ests
    n_keep = int(math.floor(rc * len(ests)))
    if n_keep == 0:
        return []
    cutoff = sorted(e.residual for e in ests)[n_keep - 1]
    out, kept = [], 0
    for e in ests:
        if e.residual <= cutoff and kept < n_keep:
            out.append(e)
            kept += 1
    return out


def slice_accept(theta_a: float, theta_b: float, delta_phi: float,
                 ds_half_deg: float):
    """X-basis post-selection on the phase mismatch angle.

    The mismatch is the angular distance of theta_a - theta_b + delta_phi
    from the nearest of {0, pi}; the pair is accepted when it lies within
    ``ds_half_deg``.  Returns (accepted, mismatch_deg).
    """
    if not 0.0 < ds_half_deg <= 90.0:
        raise ValueError("ds_half_deg must be in (0, 90]")
    mismatch = math.degrees(wrapped_mismatch(theta_a - theta_b + delta_phi))
    return mismatch <= ds_half_deg, mismatch
