"""Sending-or-not-sending twin-field QKD simulator and finite-key analyzer."""

__version__ = "0.1.0"

from .params import ProtocolParams, SecurityParams, validate_params
from .tally import DetectionTally, tally_merge, load_tally, save_tally
from .windows import classify_window, WindowClass
from .channel import (ArmEfficiency, ChannelParams, FiberSpec, NoiseBudget,
                      backscatter_total, click_probabilities, noise_curve,
                      rerayleigh_power, rrsors_noise_rate, transmittance)
from .phasetrack import (DriftModel, PhaseEstimate, ReferenceFrame,
                         accept_frames, estimate_phase, reference_probs,
                         sample_drift, slice_accept)
from .chernoff import expected_bounds_from_observed, observed_bounds_from_expected
from .finitekey import (AoppResult, DecoyBounds, KeyRateReport, analyze_tally,
                        aopp_expected, aopp_simulate, decoy_bounds, key_length,
                        phase_flip_bound, shannon_entropy)
from .scenarios import Scenario, load_scenario
