"""One-shot generator for the packaged scenario/tally/grid fixtures."""
import json
import os

OUT = os.path.join(os.path.dirname(__file__), "src", "tfqkd", "data")

SCHEMA = "tally_v1"

# Shared measurement-station characterization.
COMPONENTS = {
    "pc_a": 0.942, "pc_b": 0.928,
    "cir_a": 0.847, "cir_b": 0.852,
    "dwdm_a": 0.893, "dwdm_b": 0.887,
    "pbs_a": 0.911, "pbs_b": 0.865,
    "bs_a_ch1": 0.369, "bs_a_ch2": 0.386,
    "bs_b_ch1": 0.391, "bs_b_ch2": 0.414,
    "snspd_ch1": 0.580, "snspd_ch2": 0.560,
}

SCENARIOS = {
    "350km": {
        "protocol": dict(mu1=0.1, mu2=0.411, mu_z=0.496, mu_ref=29.382,
                         p_x=0.134, p_z=0.866, p0=0.036, p1=0.898, p2=0.066,
                         p_z1=0.275, p_z0=0.725, n_total=3.05e11),
        "channel": dict(loss_db_a=33.00, loss_db_b=33.20, alpha_per_km=0.046,
                        r_gate=0.51, dark_count_hz=3.5, gate_width_ns=1.0,
                        x_flip_prob=0.0164, phase_est_err_std_rad=0.21,
                        ref_counts_per_frame=40.0, components=COMPONENTS),
        "drift": dict(rate_std_rad_per_ms=6.89, resample_interval_ms=1.0),
        "security": dict(xi=1e-10, eps_cor=1e-10, eps_pa=1e-10, eps_hat=1e-10, f=1.1),
        "operating": dict(rc=1.0, ds_half_deg=15.0, r_rc=1.0),
        "reference": dict(rate=6.34e-7, n1_before=2444570, n1_after=412655,
                          e1ph_before=0.0582, e1ph_after=0.1113,
                          qber_z_before=0.2733, qber_z_after=0.00072,
                          qber_x11=0.033, qber_x22=0.018),
    },
    "408km": {
        "protocol": dict(mu1=0.150, mu2=0.393, mu_z=0.495, mu_ref=36.658,
                         p_x=0.113, p_z=0.887, p0=0.028, p1=0.874, p2=0.098,
                         p_z1=0.276, p_z0=0.724, n_total=5.20e11),
        "channel": dict(loss_db_a=34.38, loss_db_b=34.04, alpha_per_km=0.0385,
                        r_gate=0.48, dark_count_hz=3.5, gate_width_ns=1.0,
                        x_flip_prob=0.0155, phase_est_err_std_rad=0.21,
                        ref_counts_per_frame=40.0, components=COMPONENTS),
        "drift": dict(rate_std_rad_per_ms=9.52, resample_interval_ms=1.0),
        "security": dict(xi=1e-10, eps_cor=1e-10, eps_pa=1e-10, eps_hat=1e-10, f=1.1),
        "operating": dict(rc=1.0, ds_half_deg=12.0, r_rc=1.0),
        "reference": dict(rate=3.22e-7, n1_before=2828500, n1_after=411515,
                          e1ph_before=0.0678, e1ph_after=0.1283,
                          qber_z_before=0.2747, qber_z_after=0.00076,
                          qber_x11=0.030, qber_x22=0.030),
    },
    "509km": {
        "protocol": dict(mu1=0.1, mu2=0.384, mu_z=0.447, mu_ref=247.3,
                         p_x=0.224, p_z=0.776, p0=0.077, p1=0.850, p2=0.073,
                         p_z1=0.268, p_z0=0.732, n_total=1.55e12),
        "channel": dict(loss_db_a=42.50, loss_db_b=42.10, alpha_per_km=0.0385,
                        r_gate=0.35, dark_count_hz=3.5, gate_width_ns=1.0,
                        x_flip_prob=0.0167, phase_est_err_std_rad=0.21,
                        ref_counts_per_frame=40.0, components=COMPONENTS),
        "drift": dict(rate_std_rad_per_ms=9.58, resample_interval_ms=1.0),
        "security": dict(xi=1e-10, eps_cor=1e-10, eps_pa=1e-10, eps_hat=1e-10, f=1.1),
        "operating": dict(rc=0.5, ds_half_deg=15.0, r_rc=0.9996),
        "reference": dict(rate=1.79e-8, n1_before=729886, n1_after=128059,
                          e1ph_before=0.0646, e1ph_after=0.1240,
                          qber_z_before=0.2707, qber_z_after=0.00922,
                          qber_x11=0.038, qber_x22=0.022),
    },
}

TALLIES = {
    "350km": {
        "sent": {"ZZ": 228395800000, "ZX00": 912200000, "ZX01": 23068800000,
                 "ZX02": 1719800000, "ZX30": 345200000, "XZ00": 929000000,
                 "XZ10": 23040800000, "XZ20": 1690000000, "XZ03": 352800000,
                 "XX00": 7800000, "XX01": 178200000, "XX02": 17200000,
                 "XX10": 182200000, "XX20": 13200000, "XX11": 4409800000,
                 "XX22": 22200000},
        "detected": {"ZX00": 22, "ZX01": 214060, "ZX02": 62725, "ZX30": 16168,
                     "XZ00": 14, "XZ10": 215668, "XZ20": 61585, "XZ03": 15631,
                     "XX00": 0, "XX01": 1688, "XX02": 681, "XX10": 1736,
                     "XX20": 495, "XX11": 82448, "XX22": 1575},
        "valid": (3840607, 3706688),
        "xx11_ds": (7338, 7071, 7110, 6841),
        "zz": (1577237, 4194347),
    },
    "408km": {
        "sent": {"ZZ": 409130800000, "ZX00": 1079200000, "ZX01": 33283400000,
                 "ZX02": 3724600000, "ZX30": 399800000, "XZ00": 1074000000,
                 "XZ10": 33200000000, "XZ20": 3752600000, "XZ03": 408600000,
                 "XX00": 5200000, "XX01": 154000000, "XX02": 17000000,
                 "XX10": 163800000, "XX20": 19600000, "XX11": 5074800000,
                 "XX22": 62400000},
        "detected": {"ZX00": 15, "ZX01": 324071, "ZX02": 109410, "ZX30": 14097,
                     "XZ00": 17, "XZ10": 346605, "XZ20": 100798, "XZ03": 13294,
                     "XX00": 0, "XX01": 1441, "XX02": 466, "XX10": 1656,
                     "XX20": 571, "XX11": 102201, "XX22": 3606},
        "valid": (5073367, 4954148),
        "xx11_ds": (7341, 7107, 7139, 6880),
        "zz": (2107983, 5565128),
    },
    "509km": {
        "sent": {"ZZ": 935934600000, "ZX00": 15419600000, "ZX01": 168177400000,
                 "ZX02": 14383000000, "ZX30": 5596200000, "XZ00": 15330800000,
                 "XZ10": 168255400000, "XZ20": 14364400000, "XZ03": 5571400000,
                 "XX00": 466600000, "XX01": 5163400000, "XX02": 438000000,
                 "XX10": 5111800000, "XX20": 442200000, "XX11": 56133000000,
                 "XX22": 412400000},
        "detected": {"ZX00": 239, "ZX01": 120954, "ZX02": 36537, "ZX30": 20011,
                     "XZ00": 206, "XZ10": 132391, "XZ20": 41210, "XZ03": 17545,
                     "XX00": 6, "XX01": 3761, "XX02": 1139, "XX10": 3980,
                     "XX20": 1324, "XX11": 84034, "XX22": 2198},
        "valid": (1407071, 1353476),
        "xx11_ds": (7341, 7059, 7105, 6750),
        "zz": (458709, 1235589),
    },
}

RC_VALUES = [0.01, 0.05, 0.10, 0.50, 1.00]
DS_VALUES = [2, 5, 8, 10, 12, 15, 30]

GRID_509 = {
    "rc_values": RC_VALUES,
    "ds_half_deg_values": DS_VALUES,
    "xx11_qber": [
        [0.030, 0.031, 0.032, 0.033, 0.036, 0.036, 0.061],
        [0.030, 0.032, 0.032, 0.035, 0.037, 0.038, 0.061],
        [0.029, 0.032, 0.034, 0.035, 0.037, 0.037, 0.061],
        [0.029, 0.032, 0.034, 0.035, 0.037, 0.038, 0.062],
        [0.029, 0.033, 0.034, 0.035, 0.037, 0.038, 0.062],
    ],
    "xx11_detected": [
        [1078, 2436, 3827, 4736, 5667, 6945, 13806],
        [2016, 4496, 7027, 8645, 10297, 12693, 25040],
        [2231, 4963, 7748, 9515, 11350, 13955, 27477],
        [2286, 5114, 7990, 9814, 11710, 14400, 28354],
        [2287, 5117, 7994, 9818, 11715, 14405, 28365],
    ],
    "xx22_qber": [
        [0.0, 0.0, 0.011, 0.019, 0.015, 0.025, 0.040],
        [0.0, 0.010, 0.012, 0.021, 0.017, 0.021, 0.046],
        [0.0, 0.009, 0.011, 0.019, 0.015, 0.019, 0.047],
        [0.0, 0.016, 0.016, 0.023, 0.019, 0.022, 0.049],
        [0.0, 0.016, 0.016, 0.023, 0.019, 0.022, 0.049],
    ],
    "xx22_detected": [
        [27, 52, 92, 108, 131, 162, 351],
        [57, 105, 166, 195, 236, 285, 608],
        [62, 115, 183, 214, 259, 313, 675],
        [64, 122, 191, 222, 267, 324, 698],
        [64, 122, 191, 222, 267, 324, 698],
    ],
    # Exact wrong counts where the full record preserves them (operating cell).
    "xx11_wrong_exact": {"0.5,15": 545},
    # Recorded key-rate matrix, kept for cross-checks.
    "reference_rates": [
        [0.0, 3.29e-9, 4.95e-9, 5.35e-9, 5.05e-9, 5.64e-9, 1.35e-9],
        [4.02e-9, 1.16e-8, 1.37e-8, 1.45e-8, 1.42e-8, 1.48e-8, 6.28e-9],
        [6.37e-9, 1.41e-8, 1.59e-8, 1.68e-8, 1.64e-8, 1.73e-8, 7.59e-9],
        [7.38e-9, 1.47e-8, 1.67e-8, 1.76e-8, 1.72e-8, 1.79e-8, 7.71e-9],
        [7.40e-9, 1.44e-8, 1.65e-8, 1.75e-8, 1.70e-8, 1.78e-8, 7.63e-9],
    ],
}


def tally_json(spec, operating):
    d = {"schema": SCHEMA}
    for lab, v in spec["sent"].items():
        d[f"Sent-{lab}"] = v
    for lab, v in spec["detected"].items():
        d[f"Detected-{lab}"] = v
    d["Detected-Valid-Det1"], d["Detected-Valid-Det2"] = spec["valid"]
    det1, det2, cor1, cor2 = spec["xx11_ds"]
    d["Detected-XX11-Ds-Ch1"] = det1
    d["Detected-XX11-Ds-Ch2"] = det2
    d["Correct-XX11-Ds-Ch1"] = cor1
    d["Correct-XX11-Ds-Ch2"] = cor2
    d["Detected-ZZError"], d["Detected-ZZCorrect"] = spec["zz"]
    d["Operating-Ds-Half-Deg"] = operating["ds_half_deg"]
    d["Operating-Rc"] = operating["rc"]
    return d


def main():
    for sub in ("scenarios", "tallies", "grids"):
        os.makedirs(os.path.join(OUT, sub), exist_ok=True)
    for name, spec in SCENARIOS.items():
        spec = dict(spec)
        spec["name"] = name
        with open(os.path.join(OUT, "scenarios", f"{name}.json"), "w") as fh:
            json.dump(spec, fh, indent=1, sort_keys=True)
    for name, spec in TALLIES.items():
        sanity = all(spec["detected"][k] <= spec["sent"][k] for k in spec["detected"])
        assert sanity, name
        d = tally_json(spec, SCENARIOS[name]["operating"])
        with open(os.path.join(OUT, "tallies", f"{name}_tally.json"), "w") as fh:
            json.dump(d, fh, indent=1, sort_keys=True)
    with open(os.path.join(OUT, "grids", "509km_grid.json"), "w") as fh:
        json.dump(GRID_509, fh, indent=1, sort_keys=True)
    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
