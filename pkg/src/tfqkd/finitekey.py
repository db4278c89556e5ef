"""Finite-key post-processing: decoy bounds, AOPP, and the key length.

The pipeline follows the four-intensity sending-or-not-sending analysis:
counting rates of the five vacuum/decoy source pairs bound the
single-photon counting rates s01/s10, the wrong-fraction of the aligned
weak-decoy pairs bounds the phase-flip error rate, and actively
odd-parity pairing (AOPP) rejects bit errors before the key-length
formula is applied.  Every statistical step consumes one Chernoff-bound
invocation at failure probability xi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chernoff
from .params import ProtocolParams, SecurityParams, validate_params
from .tally import DetectionTally

# Label groups realizing the five analysed sources: (alice state, bob state)
# over {0: vacuum, 1: mu1, 2: mu2}.  Alice's vacuum instances come both from
# her decoy-window vacuum choice and from her not-send choice in Z windows
# (identical emitted states); Z-Z windows are excluded because those
# intensity choices stay private.
SOURCE_LABELS = {
    "00": ("ZX00", "XZ00", "XX00"),
    "01": ("ZX01", "XX01"),
    "02": ("ZX02", "XX02"),
    "10": ("XZ10", "XX10"),
    "20": ("XZ20", "XX20"),
    "z0": ("ZX30",),
    "0z": ("XZ03",),
}


class AnalysisError(ValueError):
    pass


@dataclass
class SourceRate:
    sent: float
    detected: float

    @property
    def rate(self) -> float:
        if self.sent <= 0:
            raise AnalysisError("source with zero sent count")
        return self.detected / self.sent


def source_rates(tally: DetectionTally) -> dict:
    out = {}
    for key, labels in SOURCE_LABELS.items():
        out[key] = SourceRate(tally.sum_sent(labels), tally.sum_detected(labels))
    return out


@dataclass
class DecoyBounds:
    """Single-photon counting-rate bounds from the decoy sources."""

    s01_lower: float
    s10_lower: float
    s1_lower: float
    s_lower: dict = field(default_factory=dict)
    s_upper: dict = field(default_factory=dict)
    s_observed: dict = field(default_factory=dict)
    abort: bool = False


def _rate_bounds(src: SourceRate, xi: float, asymptotic: bool):
    if src.sent <= 0:
        raise AnalysisError("source with zero sent count")
    if asymptotic:
        r = src.rate
        return r, r
    lo, hi = chernoff.expected_bounds_from_observed(src.detected, xi)
    return lo / src.sent, hi / src.sent


def decoy_bounds(tally: DetectionTally, protocol: ProtocolParams, xi: float,
                 asymptotic: bool = False) -> DecoyBounds:
    """Lower-bound the untagged-bit counting rates s01 and s10.

        s01 >= [mu2^2 e^mu1 S01_L - mu1^2 e^mu2 S02_U - (mu2^2 - mu1^2) S00_U]
               / (mu2 mu1 (mu2 - mu1))

    and symmetrically for s10 with S10/S20.  Negative numerators clamp to
    zero and raise the abort flag.
    """
    mu1, mu2 = protocol.mu1, protocol.mu2
    if not mu1 < mu2:
        raise AnalysisError("mu1 < mu2 required")
    rates = source_rates(tally)
    s_lo, s_hi, s_obs = {}, {}, {}
    for key in ("00", "01", "02", "10", "20"):
        s_lo[key], s_hi[key] = _rate_bounds(rates[key], xi, asymptotic)
        s_obs[key] = rates[key].rate
    denom = mu2 * mu1 * (mu2 - mu1)
    coef_hi = mu1 * mu1 * math.exp(mu2)
    coef_lo = mu2 * mu2 * math.exp(mu1)
    coef_00 = mu2 * mu2 - mu1 * mu1
    num01 = coef_lo * s_lo["01"] - coef_hi * s_hi["02"] - coef_00 * s_hi["00"]
    num10 = coef_lo * s_lo["10"] - coef_hi * s_hi["20"] - coef_00 * s_hi["00"]
    abort = num01 < 0.0 or num10 < 0.0
    s01 = max(num01, 0.0) / denom
    s10 = max(num10, 0.0) / denom
    return DecoyBounds(s01_lower=s01, s10_lower=s10, s1_lower=0.5 * (s01 + s10),
                       s_lower=s_lo, s_upper=s_hi, s_observed=s_obs, abort=abort)


def phase_flip_bound(n_x1: float, m_x1: float, bounds: DecoyBounds,
                     protocol: ProtocolParams, xi: float,
                     asymptotic: bool = False) -> float:
    """Upper-bound the phase-flip error rate of the untagged bits.

    T_X1 = m_X1 / N_X1 is the wrong-effective-event fraction of the
    aligned mu1-mu1 pairs; the bound is
    (T_U - e^(-2 mu1) S00_L / 2) / (2 mu1 e^(-2 mu1) s1_L).
    """
    if n_x1 <= 0:
        raise AnalysisError("no X1-window instances")
    if bounds.s1_lower <= 0:
        raise AnalysisError("s1 lower bound vanished; abort")
    if asymptotic:
        t_upper = m_x1 / n_x1
    else:
        t_upper = chernoff.phi_upper(m_x1, xi) / n_x1
    mu1 = protocol.mu1
    att = math.exp(-2.0 * mu1)
    e1 = (t_upper - att * bounds.s_lower["00"] / 2.0) / (2.0 * mu1 * att * bounds.s1_lower)
    return max(e1, 0.0)


# -- AOPP ----------------------------------------------------------------------

@dataclass
class ZCategories:
    """Heralded Z-window event counts split by who actually sent."""

    ss: float
    s0: float
    zero_s: float
    zero_zero: float

    @property
    def n_t0(self) -> float:
        # Bob's 0 bits: events where Bob sent.
        return self.ss + self.zero_s

    @property
    def n_t1(self) -> float:
        return self.s0 + self.zero_zero

    @property
    def n_t(self) -> float:
        return self.ss + self.s0 + self.zero_s + self.zero_zero


def z_categories(tally: DetectionTally, protocol: ProtocolParams) -> ZCategories:
    """Split the Z-window error/correct counts into send categories.

    Simulated tallies carry the ground-truth split.  Recorded tallies only
    preserve the error/correct totals; both-send and neither-send events
    (the error side) are separated using the measured vacuum-vacuum yield,
    and the two single-send categories (the correct side) in proportion to
    the recorded single-send signal yields.
    """
    cats = tally.zz_cats
    if cats and sum(abs(v) for v in cats.values()) > 0:
        return ZCategories(ss=cats.get("ss", 0.0), s0=cats.get("s0", 0.0),
                           zero_s=cats.get("0s", 0.0),
                           zero_zero=cats.get("00", 0.0))
    rates = source_rates(tally)
    eps = protocol.p_z1
    sent_zz = tally.sent_zz()
    n00 = sent_zz * (1.0 - eps) ** 2 * rates["00"].rate
    n00 = min(n00, tally.zz_error)
    nss = tally.zz_error - n00
    try:
        rz0, r0z = rates["z0"].rate, rates["0z"].rate
    except AnalysisError:
        rz0 = r0z = 1.0
    if rz0 + r0z <= 0:
        rz0 = r0z = 1.0
    ns0 = tally.zz_correct * rz0 / (rz0 + r0z)
    n0s = tally.zz_correct - ns0
    return ZCategories(ss=nss, s0=ns0, zero_s=n0s, zero_zero=n00)


@dataclass
class AoppResult:
    """Outputs of actively odd-parity pairing on the Z strings."""

    n_p: float
    n_t_prime: float
    e_z_prime: float
    n1_prime: float
    e1ph_prime: float
    n1_prime_mean: float = 0.0
    e1ph_prime_mean: float = 0.0
    n1_before: float = 0.0
    n1_before_mean: float = 0.0
    n10_mean: float = 0.0
    n01_mean: float = 0.0
    abort: bool = False


def aopp_expected(cats: ZCategories, bounds: DecoyBounds,
                  protocol: ProtocolParams, xi: float, sent_zz: float,
                  e1ph_before: float, asymptotic: bool = False) -> AoppResult:
    """Expected AOPP outcome from the category counts and decoy bounds.

    Bob pairs each 0 bit with a random 1 bit; a pair survives when
    Alice's parity is odd.  Surviving pairs are either two single-send
    events (correct) or a both-send with a neither-send event (error), so

        E_Z' = n_vd / (n_cc + n_vd),  n_t' = n_cc + n_vd .

    The surviving untagged count follows the product rule
    n1' = (n01/n_t0)(n10/n_t1) n_p with n10 = N pz^2 eps(1-eps) mu_z
    e^(-mu_z) s10, and the real values are recovered from the expected
    values through the observed-from-expected Chernoff conversion.
    """
    if cats.n_t0 <= 0 or cats.n_t1 <= 0:
        raise AnalysisError("AOPP needs both 0 bits and 1 bits")
    n_p = min(cats.n_t0, cats.n_t1)
    p_cc = (cats.zero_s / cats.n_t0) * (cats.s0 / cats.n_t1)
    p_vd = (cats.ss / cats.n_t0) * (cats.zero_zero / cats.n_t1)
    n_cc, n_vd = n_p * p_cc, n_p * p_vd
    e_z = n_vd / (n_cc + n_vd) if (n_cc + n_vd) > 0 else 0.0
    n_t_prime = n_cc + n_vd

    eps = protocol.p_z1
    pref = sent_zz * eps * (1.0 - eps) * protocol.mu_z * math.exp(-protocol.mu_z)
    n10 = pref * bounds.s10_lower
    n01 = pref * bounds.s01_lower
    n1_before_mean = n10 + n01
    n1_mean = (n01 / cats.n_t0) * (n10 / cats.n_t1) * n_p
    e1_mean = 2.0 * e1ph_before * (1.0 - e1ph_before)
    e1_mean = min(max(e1_mean, 0.0), 0.5)

    if asymptotic:
        n1_real, e1_real, n1_before = n1_mean, e1_mean, n1_before_mean
    else:
        n1_real = chernoff.varphi_lower(n1_mean, xi)
        n1_before = chernoff.varphi_lower(n1_before_mean, xi)
        e1_real = (chernoff.varphi_upper(n1_mean * e1_mean, xi) / n1_mean
                   if n1_mean > 0 else 1.0)
    return AoppResult(n_p=n_p, n_t_prime=n_t_prime, e_z_prime=e_z,
                      n1_prime=n1_real, e1ph_prime=e1_real,
                      n1_prime_mean=n1_mean, e1ph_prime_mean=e1_mean,
                      n1_before=n1_before, n1_before_mean=n1_before_mean,
                      n10_mean=n10, n01_mean=n01,
                      abort=e1_real > 0.5 or n1_real <= 0)


def aopp_simulate(alice_bits, bob_bits, rng) -> dict:
    """Run AOPP on actual bit strings (oracle for aopp_expected).

    Bob pairs a random remaining 0 bit with a random remaining 1 bit;
    unpaired bits are discarded.  Alice announces the pair parity; odd
    pairs keep their second (1-bit-side) position.  Returns the surviving
    strings and the pair log counts.
    """
    alice = np.asarray(alice_bits, dtype=np.int8)
    bob = np.asarray(bob_bits, dtype=np.int8)
    if alice.shape != bob.shape:
        raise ValueError("bit strings must have equal length")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    zeros = np.flatnonzero(bob == 0)
    ones = np.flatnonzero(bob == 1)
    n_p = min(zeros.size, ones.size)
    if n_p == 0:
        empty = np.zeros(0, dtype=np.int8)
        return {"n_p": 0, "alice": empty, "bob": empty, "survived": 0, "errors": 0}
    zi = rng.permutation(zeros)[:n_p]
    oj = rng.permutation(ones)[:n_p]
    odd = (alice[zi] ^ alice[oj]) == 1
    keep = oj[odd]
    alice_out = alice[keep]
    bob_out = bob[keep]
    errors = int(np.count_nonzero(alice_out != bob_out))
    return {"n_p": int(n_p), "alice": alice_out, "bob": bob_out,
            "survived": int(keep.size), "errors": errors}


# -- key length ----------------------------------------------------------------

def shannon_entropy(x: float) -> float:
    """Binary Shannon entropy h(x) = -x log2 x - (1-x) log2 (1-x)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("entropy argument must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass
class KeyRateReport:
    l_a: float
    rate: float
    eps_tol: float
    f: float
    n_total: float
    abort: bool
    bounds: DecoyBounds | None = None
    aopp: AoppResult | None = None
    e1ph_before: float = 0.0
    intermediates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "l_a": self.l_a,
            "rate": self.rate,
            "eps_tol": self.eps_tol,
            "f": self.f,
            "n_total": self.n_total,
            "abort": self.abort,
            "e1ph_before": self.e1ph_before,
        }
        if self.bounds is not None:
            d["s01_lower"] = self.bounds.s01_lower
            d["s10_lower"] = self.bounds.s10_lower
            d["s1_lower"] = self.bounds.s1_lower
            d["s_observed"] = dict(self.bounds.s_observed)
            d["s_lower"] = dict(self.bounds.s_lower)
            d["s_upper"] = dict(self.bounds.s_upper)
            d["decoy_abort"] = self.bounds.abort
        if self.aopp is not None:
            a = self.aopp
            d.update({
                "n_p": a.n_p, "n_t_prime": a.n_t_prime, "e_z_prime": a.e_z_prime,
                "n1_prime": a.n1_prime, "e1ph_prime": a.e1ph_prime,
                "n1_prime_mean": a.n1_prime_mean,
                "e1ph_prime_mean": a.e1ph_prime_mean,
                "n1_before": a.n1_before, "n1_before_mean": a.n1_before_mean,
            })
        d.update(self.intermediates)
        return d


def key_length(aopp: AoppResult, sec: SecurityParams, n_total: float,
               f: float | None = None) -> KeyRateReport:
    """Secure key length

        l_A = n1' [1 - h(e1ph')] - f n_t' h(E_Z')
              - log2(2/eps_cor) - 2 log2(1/(sqrt(2) eps_PA eps_hat))

    reported with R = max(l_A, 0) / N_total and eps_tol = 22 xi.
    """
    f_used = sec.f if f is None else f
    abort = aopp.abort or aopp.e1ph_prime > 0.5
    e1 = min(aopp.e1ph_prime, 0.5)
    l_a = (aopp.n1_prime * (1.0 - shannon_entropy(e1))
           - f_used * aopp.n_t_prime * shannon_entropy(aopp.e_z_prime)
           - math.log2(2.0 / sec.eps_cor)
           - 2.0 * math.log2(1.0 / (math.sqrt(2.0) * sec.eps_pa * sec.eps_hat)))
    rate = max(l_a, 0.0) / n_total
    if l_a <= 0:
        abort = True
        rate = 0.0
    return KeyRateReport(l_a=l_a, rate=rate, eps_tol=sec.eps_tol, f=f_used,
                         n_total=n_total, abort=abort, aopp=aopp)


# -- end-to-end tally analysis ---------------------------------------------------

def analyze_tally(tally: DetectionTally, protocol: ProtocolParams,
                  security: SecurityParams, ds_half_deg: float,
                  rc: float = 1.0, f: float | None = None,
                  n_total: float | None = None,
                  asymptotic: bool = False) -> KeyRateReport:
    """Full finite-key analysis of one tally at one (rc, Ds) operating point."""
    validate_params(protocol, security)
    xi = security.xi
    bounds = decoy_bounds(tally, protocol, xi, asymptotic=asymptotic)

    cut = tally.x_cut(ds_half_deg, rc, "xx11")
    m_x1 = (cut["det1"] - cut["cor1"]) + (cut["det2"] - cut["cor2"])
    det_x1 = cut["det1"] + cut["det2"]
    e1ph = phase_flip_bound(cut["n_x"], m_x1, bounds, protocol, xi,
                            asymptotic=asymptotic)

    cats = z_categories(tally, protocol)
    aopp = aopp_expected(cats, bounds, protocol, xi, tally.sent_zz(), e1ph,
                         asymptotic=asymptotic)
    report = key_length(aopp, security, protocol.n_total if n_total is None else n_total, f=f)
    report.bounds = bounds
    report.e1ph_before = e1ph
    n_t = cats.n_t
    report.intermediates = {
        "ds_half_deg": ds_half_deg,
        "rc": rc,
        "n_x1": cut["n_x"],
        "m_x1": m_x1,
        "detected_x1": det_x1,
        "qber_x11": m_x1 / det_x1 if det_x1 > 0 else 0.0,
        "qber_z_before": tally.zz_error / n_t if n_t > 0 else 0.0,
        "qber_z_after": aopp.e_z_prime,
        "n_t": n_t,
        "n_t0": cats.n_t0,
        "n_t1": cats.n_t1,
        "z_categories": {"ss": cats.ss, "s0": cats.s0, "0s": cats.zero_s,
                         "00": cats.zero_zero},
    }
    if tally.detected:
        try:
            q22 = _qber_x22(tally, ds_half_deg, rc)
        except KeyError:
            q22 = None
        if q22 is not None:
            report.intermediates["qber_x22"] = q22
    return report


def _qber_x22(tally: DetectionTally, ds_half_deg: float, rc: float):
    cut = tally.x_cut(ds_half_deg, rc, "xx22")
    det = cut["det1"] + cut["det2"]
    if det <= 0:
        return None
    return ((cut["det1"] - cut["cor1"]) + (cut["det2"] - cut["cor2"])) / det
