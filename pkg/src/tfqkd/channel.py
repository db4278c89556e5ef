"""Fiber transmission, detector response, and the re-Rayleigh noise model.

The dominant long-haul noise source beyond detector dark counts is
forward-propagating light produced by double Rayleigh backscatter of the
strong phase-reference pulses (RRSORS): the backward scatter of the seed
light is itself Rayleigh-scattered back into the signal direction and
arrives uniformly distributed in time, so a fraction of it falls inside
the signal detection gates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Photon energy at 1550 nm, h*c/lambda.
PLANCK_J_S = 6.62607015e-34
LIGHT_SPEED_M_S = 2.99792458e8


def photon_energy_j(wavelength_nm: float = 1550.0465) -> float:
    return PLANCK_J_S * LIGHT_SPEED_M_S / (wavelength_nm * 1e-9)


@dataclass(frozen=True)
class FiberSpec:
    """Per-arm fiber geometry and scattering coefficients.

    ``alpha_per_km`` is the intrinsic loss coefficient in natural-log
    units (1/km); ``s_per_km`` the backward Rayleigh capture coefficient.
    ``loss_db_a/b``, when given, override alpha * length for the arm
    transmittance (measured spool losses).
    """

    length_km_a: float = 0.0
    length_km_b: float = 0.0
    loss_db_a: float | None = None
    loss_db_b: float | None = None
    alpha_per_km: float = 0.046
    s_per_km: float = 1.8e-5
    wavelength_nm: float = 1550.0465

    def __post_init__(self):
        if self.alpha_per_km <= 0:
            raise ValueError("alpha_per_km must be > 0")
        if self.s_per_km < 0:
            raise ValueError("s_per_km must be >= 0")
        if self.length_km_a < 0 or self.length_km_b < 0:
            raise ValueError("lengths must be >= 0")

    def arm_loss_db(self, arm: str) -> float:
        override = self.loss_db_a if arm == "a" else self.loss_db_b
        if override is not None:
            return override
        length = self.length_km_a if arm == "a" else self.length_km_b
        return 10.0 * self.alpha_per_km * length / math.log(10.0)


@dataclass(frozen=True)
class NoiseBudget:
    """Per-detector noise rates and the per-gate noise probability."""

    dark_count_hz: float = 3.5
    rrsors_rate_hz: float = 0.0
    gate_width_ns: float = 1.0

    def __post_init__(self):
        if min(self.dark_count_hz, self.rrsors_rate_hz, self.gate_width_ns) < 0:
            raise ValueError("noise rates and gate width must be >= 0")
        if self.p_noise >= 1.0:
            raise ValueError("per-gate noise probability must be < 1")

    @property
    def p_noise(self) -> float:
        return (self.dark_count_hz + self.rrsors_rate_hz) * self.gate_width_ns * 1e-9


@dataclass(frozen=True)
class ArmEfficiency:
    """End-to-end transmittance per arm, photon at source to click anywhere.

    Includes fiber, measurement-station optics, both beam-splitter output
    paths with their detectors, and the detection-window fraction.
    """

    eta_a: float
    eta_b: float

    def __post_init__(self):
        if not (0.0 <= self.eta_a <= 1.0 and 0.0 <= self.eta_b <= 1.0):
            raise ValueError("arm efficiencies must be in [0, 1]")


def transmittance(loss_db: float) -> float:
    """Power transmittance of a loss expressed in dB."""
    if loss_db < 0:
        raise ValueError("loss_db must be >= 0")
    return 10.0 ** (-loss_db / 10.0)


def backscatter_total(p0: float, s: float, alpha: float, length_km: float) -> float:
    """Total backward Rayleigh scatter power returning to the input (W).

    P_B = (P0 * S / (2 alpha)) * (1 - exp(-2 alpha L)); saturates at
    P0 * S / (2 alpha) for long fiber.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return p0 * s / (2.0 * alpha) * -np.expm1(-2.0 * alpha * length_km)


def rerayleigh_power(p0: float, s: float, alpha: float, length_km: float) -> float:
    """Forward-propagating double-backscatter power at the fiber output (W).

    Closed form of the double integral over first and second scatter
    points (with the random-polarization factor 1/2 folded in):

        P_srs = (P0 S^2 / (4 alpha)) e^(-alpha l)
                * [l + e^(-2 alpha l)/(2 alpha) - 1/(2 alpha)]
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if length_km < 0:
        raise ValueError("length must be >= 0")
    al = alpha * length_km
    bracket = length_km + np.expm1(-2.0 * al) / (2.0 * alpha)
    return p0 * s * s / (4.0 * alpha) * math.exp(-al) * bracket


def rerayleigh_power_quadrature(p0: float, s: float, alpha: float,
                                length_km: float) -> float:
    """Brute-force double integral of the scatter density (oracle).

    Integrates (1/2) P0 S^2 e^(-a L) e^(-a (L - L')) e^(-a (l - L')) over
    0 <= L' <= L <= l with adaptive quadrature; independent of the closed
    form above.
    """
    from scipy.integrate import dblquad

    if length_km == 0.0:
        return 0.0

    def density(lp, lv):
        return (math.exp(-alpha * lv) * math.exp(-alpha * (lv - lp))
                * math.exp(-alpha * (length_km - lp)))

    val, _ = dblquad(density, 0.0, length_km, 0.0, lambda lv: lv,
                     epsabs=0.0, epsrel=1e-10)
    return 0.5 * p0 * s * s * val


def rrsors_noise_rate(p0: float, s: float, alpha: float, length_km: float,
                      photon_energy: float | None = None,
                      dark_count_hz: float = 0.0,
                      wavelength_nm: float = 1550.0465) -> float:
    """Detection noise rate (counts/s): double-backscatter flux plus darks."""
    e_nu = photon_energy if photon_energy is not None else photon_energy_j(wavelength_nm)
    if e_nu <= 0:
        raise ValueError("photon energy must be > 0")
    return rerayleigh_power(p0, s, alpha, length_km) / e_nu + dark_count_hz


def click_probabilities(mu_a: float, mu_b: float, delta: float, eta_a: float,
                        eta_b: float, p_noise: float):
    """One-window click probabilities of the two interferometer ports.

    Coherent states of means mu_a, mu_b with relative phase ``delta``
    interfere on a balanced splitter; the output-port mean photon numbers
    are ``(eta_a mu_a + eta_b mu_b)/2 +- sqrt(eta_a mu_a eta_b mu_b) cos(delta)``
    and each threshold detector fires independently with
    ``1 - (1 - p_noise) exp(-lambda_port)``.

    Returns (p_det1_only, p_det2_only, p_both).
    """
    la = eta_a * mu_a
    lb = eta_b * mu_b
    cross = math.sqrt(la * lb) * math.cos(delta)
    lam1 = 0.5 * (la + lb) + cross
    lam2 = 0.5 * (la + lb) - cross
    q1 = 1.0 - (1.0 - p_noise) * math.exp(-lam1)
    q2 = 1.0 - (1.0 - p_noise) * math.exp(-lam2)
    return q1 * (1.0 - q2), q2 * (1.0 - q1), q1 * q2


def port_means(mu_a, mu_b, delta, eta_a, eta_b):
    """Vectorized output-port mean photon numbers (lambda_plus, lambda_minus)."""
    la = np.asarray(eta_a * mu_a, dtype=float)
    lb = np.asarray(eta_b * mu_b, dtype=float)
    cross = np.sqrt(la * lb) * np.cos(delta)
    half = 0.5 * (la + lb)
    return half + cross, half - cross


def click_prob_arrays(lam1, lam2, p_noise):
    """Vectorized single-click and double-click probabilities."""
    q1 = 1.0 - (1.0 - p_noise) * np.exp(-lam1)
    q2 = 1.0 - (1.0 - p_noise) * np.exp(-lam2)
    return q1, q2


def noise_curve(lengths_km, s: float, alpha: float, dark_count_hz: float,
                target_detect_hz: float = 2.0e6, detect_eff: float = 0.28,
                wavelength_nm: float = 1550.0465):
    """Noise rate versus fiber length under a fixed reference-count policy.

    The reference launch power at each length is raised so the detected
    reference rate stays at ``target_detect_hz`` behind the fiber and the
    measurement optics (``detect_eff``); the returned rows are
    (length_km, noise_hz, rrsors_hz, dark_hz).
    """
    e_nu = photon_energy_j(wavelength_nm)
    rows = []
    for l in lengths_km:
        loss_db = 10.0 * alpha * l / math.log(10.0)
        p0 = target_detect_hz * e_nu / (transmittance(loss_db) * detect_eff)
        rr = rerayleigh_power(p0, s, alpha, l) / e_nu
        rows.append((float(l), rr + dark_count_hz, rr, dark_count_hz))
    return rows


def fit_noise_curve(lengths_km, noise_hz, alpha: float,
                    target_detect_hz: float = 2.0e6, detect_eff: float = 0.28):
    """Fit (S, dark rate) of the fixed-reference-count noise model to data.

    The RRSORS term is linear in S^2, so the fit is a two-parameter linear
    least squares in (S^2, D_c) with the non-negativity of both enforced.
    """
    from scipy.optimize import nnls

    e_nu = photon_energy_j()
    lengths_km = np.asarray(lengths_km, dtype=float)
    noise_hz = np.asarray(noise_hz, dtype=float)
    basis = np.empty_like(lengths_km)
    for i, l in enumerate(lengths_km):
        loss_db = 10.0 * alpha * l / math.log(10.0)
        p0 = target_detect_hz * e_nu / (transmittance(loss_db) * detect_eff)
        basis[i] = rerayleigh_power(p0, 1.0, alpha, l) / e_nu
    a = np.column_stack([basis, np.ones_like(basis)])
    coef, _ = nnls(a, noise_hz)
    return math.sqrt(coef[0]), coef[1]


# -- scenario channel configuration -------------------------------------------

@dataclass(frozen=True)
class ChannelParams:
    """Everything the simulator needs about the optical channel.

    ``eta_a``/``eta_b`` are the calibrated end-to-end arm efficiencies
    (summed over both detector paths, detection-window fraction included).
    ``components`` keeps the characterized element transmittances for
    derivation and for the detection-efficiency factor of the conditional
    repeaterless bound.
    """

    eta_a: float
    eta_b: float
    p_noise: float
    loss_db_a: float
    loss_db_b: float
    alpha_per_km: float
    r_gate: float
    x_flip_prob: float = 0.0
    phase_est_err_std_rad: float = 0.0
    ref_counts_per_frame: float = 40.0
    dark_count_hz: float = 3.5
    rrsors_rate_hz: float = 0.0
    gate_width_ns: float = 1.0
    components: dict = field(default_factory=dict)

    @property
    def total_loss_db(self) -> float:
        return self.loss_db_a + self.loss_db_b

    def detection_efficiency(self) -> float:
        """Measurement-station transmittance x detector efficiency (no fiber).

        Used by the conditional repeaterless bound; averages the two arms.
        Falls back to 0.28 when no component breakdown is available.
        """
        c = self.components
        if not c:
            return 0.28
        out = []
        for arm in ("a", "b"):
            optics = (c[f"pc_{arm}"] * c[f"cir_{arm}"] * c[f"dwdm_{arm}"]
                      * c[f"pbs_{arm}"])
            paths = (c[f"bs_{arm}_ch1"] * c["snspd_ch1"]
                     + c[f"bs_{arm}_ch2"] * c["snspd_ch2"])
            out.append(optics * paths)
        return 0.5 * (out[0] + out[1])

    def component_eta(self, arm: str) -> float:
        """Arm efficiency predicted by the characterization table alone."""
        c = self.components
        optics = c[f"pc_{arm}"] * c[f"cir_{arm}"] * c[f"dwdm_{arm}"] * c[f"pbs_{arm}"]
        paths = (c[f"bs_{arm}_ch1"] * c["snspd_ch1"]
                 + c[f"bs_{arm}_ch2"] * c["snspd_ch2"])
        loss = self.loss_db_a if arm == "a" else self.loss_db_b
        return transmittance(loss) * optics * paths * self.r_gate


def channel_from_dict(d: dict) -> ChannelParams:
    from dataclasses import fields as dc_fields

    known = {f.name for f in dc_fields(ChannelParams)}
    return ChannelParams(**{k: v for k, v in d.items() if k in known})
