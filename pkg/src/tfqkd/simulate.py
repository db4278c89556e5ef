"""End-to-end protocol simulation and its deterministic expected-value twin.

Monte Carlo mode walks the pulse train window by window: window type and
intensity draws, phase slices, continuous phase drift, reference-pulse
counting and phase estimation per 12-period block, interference clicks,
and tally classification.  Expected mode produces the same tally shape
with expectation values computed from the click model, averaging over the
relative-phase grid and folding the phase-estimation error into the
mismatch-angle histograms.

Runs are organized in fixed-size segments with per-segment RNG streams
spawned from the master seed, so any sharding of segments merges to the
identical tally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams
from .params import ProtocolParams, SecurityParams, validate_params
from .phasetrack import (DriftModel, ReferenceFrame, drift_phase_at,
                         estimate_phase_batch, sample_drift)
from .tally import (DetectionTally, N_DS_BINS, N_RES_BINS, RES_BIN_EDGES,
                    label_name, tally_merge)

TWO_PI = 2.0 * math.pi

# Alice's four reference phases; Bob holds pi.
REF_SETTINGS = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi])

MAX_MC_WINDOWS = 2 ** 40


@dataclass(frozen=True)
class SimConfig:
    protocol: ProtocolParams
    channel: ChannelParams
    drift: DriftModel
    security: SecurityParams = field(default_factory=SecurityParams)
    mode: str = "montecarlo"
    n_windows: int = 10 ** 6
    master_seed: int = 0
    shard_count: int = 1
    frame_periods: int = 12
    frames_per_segment: int = 5000

    def __post_init__(self):
        if self.mode not in ("montecarlo", "expected"):
            raise ValueError("mode must be 'montecarlo' or 'expected'")
        if self.mode == "montecarlo" and not 0 < self.n_windows <= MAX_MC_WINDOWS:
            raise ValueError(f"n_windows must be in (0, {MAX_MC_WINDOWS}]")

    @property
    def windows_per_segment(self) -> int:
        return (self.frames_per_segment * self.frame_periods
                * self.protocol.pulses_per_period)


def _intensity_table(p: ProtocolParams) -> np.ndarray:
    return np.array([0.0, p.mu1, p.mu2, p.mu_z])


def _draw_choices(rng, n, p: ProtocolParams):
    """Basis (0=Z, 1=X) and intensity index per side, in a fixed draw order."""
    u_basis_a = rng.random(n)
    u_basis_b = rng.random(n)
    u_int_a = rng.random(n)
    u_int_b = rng.random(n)
    slice_a = rng.integers(0, p.n_phase_slices, size=n)
    slice_b = rng.integers(0, p.n_phase_slices, size=n)

    basis_a = (u_basis_a < p.p_x).astype(np.int8)
    basis_b = (u_basis_b < p.p_x).astype(np.int8)

    def intensity_index(basis, u):
        idx = np.empty(n, dtype=np.int8)
        z = basis == 0
        idx[z] = np.where(u[z] < p.p_z1, 3, 0)
        x = ~z
        edges = np.array([p.p0, p.p0 + p.p1])
        idx[x] = np.searchsorted(edges, u[x], side="right").astype(np.int8)
        return idx

    return (basis_a, basis_b, intensity_index(basis_a, u_int_a),
            intensity_index(basis_b, u_int_b), slice_a, slice_b)


def _ref_frame_counts(rng, n_periods, frame_periods, phi_ref, per_setting_mean):
    """Poisson reference counts folded into per-frame fringe bins.

    ``phi_ref`` has shape (n_periods, 4): the true drift phase at each
    reference-pulse time.  Detector 2 sees the fringe shifted by pi, so
    its clicks accumulate into the complementary setting (i + 2) mod 4.
    """
    delta = REF_SETTINGS[None, :] - math.pi + phi_ref
    p1 = np.cos(delta / 2.0) ** 2
    det1 = rng.poisson(per_setting_mean * p1)
    det2 = rng.poisson(per_setting_mean * (1.0 - p1))
    n_frames = (n_periods + frame_periods - 1) // frame_periods
    counts = np.zeros((n_frames, 4))
    frame_of_period = np.arange(n_periods) // frame_periods
    det2_shifted = np.roll(det2, 2, axis=1)
    for i in range(4):
        np.add.at(counts[:, i], frame_of_period, det1[:, i] + det2_shifted[:, i])
    return counts


def _simulate_segment(cfg: SimConfig, seed_seq, n_win: int) -> DetectionTally:
    p, ch = cfg.protocol, cfg.channel
    rng = np.random.default_rng(seed_seq)
    per_period = p.pulses_per_period
    n_periods = (n_win + per_period - 1) // per_period
    frame_periods = cfg.frame_periods
    duration_ms = n_periods * p.period_ns * 1e-6

    knots = sample_drift(cfg.drift, max(duration_ms, cfg.drift.resample_interval_ms),
                         rng=rng)

    # Reference detections and per-frame phase estimates.
    ref_slot = p.pulses_per_period * 30.0  # reference pulses start after signals
    ref_t_ns = (np.arange(n_periods)[:, None] * p.period_ns
                + 450.0 + 100.0 * np.arange(4)[None, :] + 50.0)
    phi_ref = drift_phase_at(*knots, ref_t_ns * 1e-6)
    per_setting_mean = ch.ref_counts_per_frame / (frame_periods * 4.0)
    counts = _ref_frame_counts(rng, n_periods, frame_periods, phi_ref,
                               per_setting_mean)
    phi_est, resid = estimate_phase_batch(counts)
    res_bin = np.where(np.isfinite(resid),
                       np.searchsorted(RES_BIN_EDGES, resid, side="right"),
                       N_RES_BINS - 1).astype(np.int32)

    # Window draws.
    widx = np.arange(n_win)
    period_idx = widx // per_period
    slot = widx - period_idx * per_period
    t_ns = period_idx * p.period_ns + slot * 30.0
    phi_true = drift_phase_at(*knots, t_ns * 1e-6)
    frame_idx = (period_idx // frame_periods).astype(np.int32)

    basis_a, basis_b, int_a, int_b, slice_a, slice_b = _draw_choices(rng, n_win, p)
    mu = _intensity_table(p)
    mu_a, mu_b = mu[int_a], mu[int_b]
    slice_step = TWO_PI / p.n_phase_slices
    theta_ab = (slice_a.astype(float) - slice_b.astype(float)) * slice_step
    delta_true = theta_ab + phi_true

    la = ch.eta_a * mu_a
    lb = ch.eta_b * mu_b
    cross = np.sqrt(la * lb) * np.cos(delta_true)
    half = 0.5 * (la + lb)
    q1 = 1.0 - (1.0 - ch.p_noise) * np.exp(-(half + cross))
    q2 = 1.0 - (1.0 - ch.p_noise) * np.exp(-(half - cross))
    click1 = rng.random(n_win) < q1
    click2 = rng.random(n_win) < q2
    heralded = click1 ^ click2
    chan = np.where(click1, 0, 1).astype(np.int8)  # valid only where heralded

    both_x = (basis_a == 1) & (basis_b == 1)
    flip_idx = np.flatnonzero(heralded & both_x)
    if flip_idx.size and ch.x_flip_prob > 0.0:
        flips = rng.random(flip_idx.size) < ch.x_flip_prob
        chan[flip_idx[flips]] ^= 1

    tally = DetectionTally.empty()
    label_id = (((basis_a.astype(np.int32) * 2 + basis_b) * 4 + int_a) * 4 + int_b)
    sent_counts = np.bincount(label_id, minlength=64)
    det_counts = np.bincount(label_id[heralded], minlength=64)
    for a_basis_i, a_name in enumerate("ZX"):
        for b_basis_i, b_name in enumerate("ZX"):
            for ai in range(4):
                for bi in range(4):
                    lid = ((a_basis_i * 2 + b_basis_i) * 4 + ai) * 4 + bi
                    if sent_counts[lid] == 0:
                        continue
                    lab = label_name(a_name, b_name, ai, bi)
                    tally.sent[lab] = tally.sent.get(lab, 0.0) + float(sent_counts[lid])
                    tally.detected[lab] = tally.detected.get(lab, 0.0) + float(det_counts[lid])
    tally.detected_valid_det1 = float(np.count_nonzero(heralded & (chan == 0)))
    tally.detected_valid_det2 = float(np.count_nonzero(heralded & (chan == 1)))

    zz = heralded & (basis_a == 0) & (basis_b == 0)
    a_sent = int_a == 3
    b_sent = int_b == 3
    tally.zz_cats["ss"] = float(np.count_nonzero(zz & a_sent & b_sent))
    tally.zz_cats["s0"] = float(np.count_nonzero(zz & a_sent & ~b_sent))
    tally.zz_cats["0s"] = float(np.count_nonzero(zz & ~a_sent & b_sent))
    tally.zz_cats["00"] = float(np.count_nonzero(zz & ~a_sent & ~b_sent))
    tally.zz_error = tally.zz_cats["ss"] + tally.zz_cats["00"]
    tally.zz_correct = tally.zz_cats["s0"] + tally.zz_cats["0s"]

    # X-basis same-intensity pairs: histogram by (frame residual, mismatch).
    est_ok = np.isfinite(phi_est)
    for which, level in (("xx11", 1), ("xx22", 2)):
        pair = both_x & (int_a == level) & (int_b == level) & est_ok[frame_idx]
        if not np.any(pair):
            continue
        idx = np.flatnonzero(pair)
        ang = theta_ab[idx] + phi_est[frame_idx[idx]]
        mism = np.abs(np.mod(ang + 0.5 * math.pi, math.pi) - 0.5 * math.pi)
        mism_deg = np.degrees(mism)
        ds_bin = np.minimum(mism_deg.astype(np.int32), N_DS_BINS - 1)
        rb = res_bin[frame_idx[idx]]
        sent_bins = getattr(tally, f"{which}_sent_bins")
        np.add.at(sent_bins, (rb, ds_bin), 1.0)
        her = heralded[idx]
        hidx = idx[her]
        if hidx.size:
            hang = theta_ab[hidx] + phi_est[frame_idx[hidx]]
            expected_ch = np.where(np.cos(hang) > 0.0, 0, 1).astype(np.int8)
            hrb = res_bin[frame_idx[hidx]]
            hds = ds_bin[her]
            hch = chan[hidx]
            det_bins = getattr(tally, f"{which}_det_bins")
            cor_bins = getattr(tally, f"{which}_cor_bins")
            np.add.at(det_bins, (hrb, hch, hds), 1.0)
            cor = hch == expected_ch
            np.add.at(cor_bins, (hrb[cor], hch[cor], hds[cor]), 1.0)

    n_frames = counts.shape[0]
    np.add.at(tally.frames_by_res_bin, res_bin, 1.0)
    tally.frames_total = float(n_frames)
    tally.windows_total = float(n_win)
    return tally


def simulate_experiment(cfg: SimConfig) -> DetectionTally:
    """Run the Monte Carlo simulation; deterministic given the master seed.

    Work is split into fixed-size segments with RNG streams spawned from
    the master seed, so the merged tally does not depend on how segments
    are grouped into shards.
    """
    validate_params(cfg.protocol, cfg.security)
    seg_windows = cfg.windows_per_segment
    n_segments = (cfg.n_windows + seg_windows - 1) // seg_windows
    seeds = np.random.SeedSequence(cfg.master_seed).spawn(n_segments)
    total = None
    remaining = cfg.n_windows
    for seg, seed_seq in enumerate(seeds):
        n_win = min(seg_windows, remaining)
        remaining -= n_win
        part = _simulate_segment(cfg, seed_seq, n_win)
        total = part if total is None else tally_merge(total, part)
    total.meta = {"mode": "montecarlo", "master_seed": cfg.master_seed,
                  "n_windows": cfg.n_windows, "n_segments": n_segments}
    return total


def simulate_shard(cfg: SimConfig, shard_index: int) -> DetectionTally:
    """Simulate the subset of segments owned by one shard."""
    if not 0 <= shard_index < cfg.shard_count:
        raise ValueError("shard_index out of range")
    seg_windows = cfg.windows_per_segment
    n_segments = (cfg.n_windows + seg_windows - 1) // seg_windows
    seeds = np.random.SeedSequence(cfg.master_seed).spawn(n_segments)
    total = DetectionTally.empty()
    for seg in range(shard_index, n_segments, cfg.shard_count):
        n_win = min(seg_windows, cfg.n_windows - seg * seg_windows)
        part = _simulate_segment(cfg, seeds[seg], n_win)
        total = tally_merge(total, part)
    return total


# -- expected-value mode --------------------------------------------------------

_PHASE_GRID = TWO_PI * (np.arange(256) + 0.5) / 256.0

# Gauss-Hermite quadrature for the phase-estimation error smear.
_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(21)
_GH_W = _GH_W / _GH_W.sum()


def _pair_probs(mu_a, mu_b, ch: ChannelParams):
    """Phase-averaged (p_det1_only, p_det2_only) for one source pair."""
    la, lb = ch.eta_a * mu_a, ch.eta_b * mu_b
    if la > 0.0 and lb > 0.0:
        cross = math.sqrt(la * lb) * np.cos(_PHASE_GRID)
    else:
        cross = np.zeros(1)
    half = 0.5 * (la + lb)
    q1 = 1.0 - (1.0 - ch.p_noise) * np.exp(-(half + cross))
    q2 = 1.0 - (1.0 - ch.p_noise) * np.exp(-(half - cross))
    return float(np.mean(q1 * (1.0 - q2))), float(np.mean(q2 * (1.0 - q1)))


def _window_weights(p: ProtocolParams) -> dict:
    w = {}
    for a_basis in "ZX":
        pa = {"Z": p.p_z, "X": p.p_x}[a_basis]
        a_choices = {0: p.p_z0, 3: p.p_z1} if a_basis == "Z" else {0: p.p0, 1: p.p1, 2: p.p2}
        for b_basis in "ZX":
            pb = {"Z": p.p_z, "X": p.p_x}[b_basis]
            b_choices = {0: p.p_z0, 3: p.p_z1} if b_basis == "Z" else {0: p.p0, 1: p.p1, 2: p.p2}
            for ai, wa in a_choices.items():
                for bi, wb in b_choices.items():
                    w[(a_basis, b_basis, ai, bi)] = pa * wa * pb * wb
    return w


def _smeared_x_bins(mu: float, ch: ChannelParams, sent_pairs: float):
    """Expected per-mismatch-bin detections for a same-intensity X pair.

    For estimated mismatch m the true interference angle is m + e with
    e ~ N(0, sigma_est^2); the wrong-port and right-port click
    probabilities follow from the port means T/2 -+ C cos(m + e).
    Returns (sent_per_bin, det_per_bin[ch], cor_per_bin[ch]) arrays.
    """
    t_half = 0.5 * (ch.eta_a + ch.eta_b) * mu
    c = math.sqrt(ch.eta_a * ch.eta_b) * mu
    sigma = ch.phase_est_err_std_rad
    m_mid = np.radians(np.arange(N_DS_BINS) + 0.5)
    x = m_mid[:, None] + sigma * _GH_X[None, :]
    lam_right = t_half + c * np.cos(x)
    lam_wrong = t_half - c * np.cos(x)
    q_r = 1.0 - (1.0 - ch.p_noise) * np.exp(-lam_right)
    q_w = 1.0 - (1.0 - ch.p_noise) * np.exp(-lam_wrong)
    p_right = (q_r * (1.0 - q_w) @ _GH_W)
    p_wrong = (q_w * (1.0 - q_r) @ _GH_W)
    fl = ch.x_flip_prob
    p_right, p_wrong = ((1.0 - fl) * p_right + fl * p_wrong,
                        (1.0 - fl) * p_wrong + fl * p_right)
    sent_per_bin = sent_pairs / N_DS_BINS
    det = np.stack([(p_right + p_wrong) * 0.5, (p_right + p_wrong) * 0.5]) * sent_per_bin
    cor = np.stack([p_right * 0.5, p_right * 0.5]) * sent_per_bin
    return np.full(N_DS_BINS, sent_per_bin), det, cor


def expected_tally(cfg: SimConfig, n_windows: float | None = None) -> DetectionTally:
    """Deterministic expected-value companion of simulate_experiment."""
    validate_params(cfg.protocol, cfg.security)
    p, ch = cfg.protocol, cfg.channel
    n = float(p.n_total if n_windows is None else n_windows)
    mu = _intensity_table(p)
    tally = DetectionTally.empty()
    for (a_basis, b_basis, ai, bi), w in _window_weights(p).items():
        sent = n * w
        lab = label_name(a_basis, b_basis, ai, bi)
        p1, p2 = _pair_probs(mu[ai], mu[bi], ch)
        tally.sent[lab] = sent
        tally.detected[lab] = sent * (p1 + p2)
        tally.detected_valid_det1 += sent * p1
        tally.detected_valid_det2 += sent * p2
        if a_basis == "Z" and b_basis == "Z":
            cat = ("s" if ai == 3 else "0") + ("s" if bi == 3 else "0")
            key = {"ss": "ss", "s0": "s0", "0s": "0s", "00": "00"}[cat]
            tally.zz_cats[key] += sent * (p1 + p2)
    tally.zz_error = tally.zz_cats["ss"] + tally.zz_cats["00"]
    tally.zz_correct = tally.zz_cats["s0"] + tally.zz_cats["0s"]

    # Same-intensity X pairs: spread uniformly over residual bins so an
    # rc cut keeps exactly the rc fraction.
    n_res_spread = RES_BIN_EDGES.size  # leave the overflow bin empty
    for which, level in (("xx11", 1), ("xx22", 2)):
        lab = label_name("X", "X", level, level)
        sent_pairs = tally.sent[lab]
        sent_b, det_b, cor_b = _smeared_x_bins(mu[level], ch, sent_pairs)
        getattr(tally, f"{which}_sent_bins")[:n_res_spread] = sent_b / n_res_spread
        getattr(tally, f"{which}_det_bins")[:n_res_spread] = det_b / n_res_spread
        getattr(tally, f"{which}_cor_bins")[:n_res_spread] = cor_b / n_res_spread
        tally.detected[lab] = float(det_b.sum())
    per_frame = cfg.frame_periods * p.pulses_per_period
    tally.frames_total = n / per_frame
    tally.frames_by_res_bin[:n_res_spread] = tally.frames_total / n_res_spread
    tally.windows_total = n
    tally.meta = {"mode": "expected", "n_windows": n}
    return tally


def simulate_reference_stream(drift: DriftModel, ref_counts_per_frame: float,
                              duration_ms: float, frame_periods: int = 12,
                              period_ns: float = 1000.0, seed: int = 0):
    """Reference-pulse frames with ground-truth phases.

    Returns (frames, drift_path) where frames is a list of ReferenceFrame
    with ``true_phase`` set to the mid-frame drift phase, and drift_path
    the (knot_times, knot_phases, rates) triple for window-level truth.
    """
    rng = np.random.default_rng(seed)
    knots = sample_drift(drift, duration_ms, rng=rng)
    frame_ms = frame_periods * period_ns * 1e-6
    n_frames = int(duration_ms / frame_ms)
    n_periods = n_frames * frame_periods
    ref_t_ns = (np.arange(n_periods)[:, None] * period_ns
                + 450.0 + 100.0 * np.arange(4)[None, :] + 50.0)
    phi_ref = drift_phase_at(*knots, ref_t_ns * 1e-6)
    counts = _ref_frame_counts(rng, n_periods, frame_periods, phi_ref,
                               ref_counts_per_frame / (frame_periods * 4.0))
    mid_t_ms = (np.arange(n_frames) + 0.5) * frame_ms
    phi_mid = drift_phase_at(*knots, mid_t_ms)
    frames = [ReferenceFrame(counts=counts[i], periods_accumulated=frame_periods,
                             timestamp_ms=float(i * frame_ms),
                             true_phase=float(phi_mid[i]))
              for i in range(n_frames)]
    return frames, knots
