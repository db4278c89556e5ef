"""Detection tally bookkeeping and the tally_v1 JSON interchange format.

A tally accumulates, per source-pair label, how many pulse pairs were sent
and how many produced a one-detector heralded event.  Labels follow the
"Sent-ABCD" convention: A/B are Alice's/Bob's basis (Z or X), C/D their
intensity index (0 vacuum, 1 weak decoy, 2 strong decoy, 3 signal).  The
X-basis same-intensity events additionally carry two histogram axes: the
wrapped phase-mismatch angle (1-degree bins over [0, 90)) and the
phase-estimation residual of the surrounding reference frame, so any
(rc, Ds) post-selection cut can be taken after the fact as a prefix sum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SCHEMA = "tally_v1"

# Mismatch-angle histogram: 1-degree bins over [0, 90).
N_DS_BINS = 90
# Residual histogram: log-spaced bins over [1e-4, 10); bin 0 catches smaller
# residuals, the last bin catches larger ones and frames with no estimate.
RES_BIN_EDGES = np.logspace(-4.0, 1.0, 41)
N_RES_BINS = RES_BIN_EDGES.size + 1  # 42

BASES = ("Z", "X")
INTENSITY_INDICES = (0, 1, 2, 3)


def label_name(a_basis: str, b_basis: str, a_idx: int, b_idx: int) -> str:
    return f"{a_basis}{b_basis}{a_idx}{b_idx}"


def all_labels() -> list[str]:
    """Every physically possible source-pair label.

    Z windows allow intensity indices {0, 3} (not-send / send), X windows
    {0, 1, 2}.
    """
    out = []
    for a_basis in BASES:
        for b_basis in BASES:
            a_set = (0, 3) if a_basis == "Z" else (0, 1, 2)
            b_set = (0, 3) if b_basis == "Z" else (0, 1, 2)
            for a in a_set:
                for b in b_set:
                    out.append(label_name(a_basis, b_basis, a, b))
    return out

LABELS = all_labels()


def res_bin_of(residual: float) -> int:
    """Residual histogram bin; NaN / out-of-range land in the last bin."""
    if not np.isfinite(residual):
        return N_RES_BINS - 1
    return int(np.searchsorted(RES_BIN_EDGES, residual, side="right"))


@dataclass
class DetectionTally:
    """Counts accumulated by one simulation run or transcribed from records.

    All count fields may be floats (expected-value mode) or ints
    (Monte Carlo / recorded data).
    """

    sent: dict = field(default_factory=dict)
    detected: dict = field(default_factory=dict)
    detected_valid_det1: float = 0.0
    detected_valid_det2: float = 0.0
    zz_error: float = 0.0
    zz_correct: float = 0.0
    # Ground-truth Z-window category counts (both-send, send/vac, vac/send,
    # vac/vac); available from simulation, absent from recorded tallies.
    zz_cats: dict = field(default_factory=dict)
    # [res_bin, ds_bin] sent pairs; [res_bin, channel, ds_bin] detections.
    xx11_sent_bins: np.ndarray | None = None
    xx11_det_bins: np.ndarray | None = None
    xx11_cor_bins: np.ndarray | None = None
    xx22_sent_bins: np.ndarray | None = None
    xx22_det_bins: np.ndarray | None = None
    xx22_cor_bins: np.ndarray | None = None
    frames_by_res_bin: np.ndarray | None = None
    windows_total: float = 0.0
    frames_total: float = 0.0
    # Single-cut X-basis counts keyed (ds_half_deg, rc) -> dict with
    # n_x1, det1, det2, cor1, cor2.  Used by recorded tallies that only
    # preserve one operating point.
    x_cuts: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def empty(cls, with_bins: bool = True) -> "DetectionTally":
        t = cls()
        t.sent = {lab: 0.0 for lab in LABELS}
        t.detected = {lab: 0.0 for lab in LABELS}
        t.zz_cats = {"ss": 0.0, "s0": 0.0, "0s": 0.0, "00": 0.0}
        if with_bins:
            t.xx11_sent_bins = np.zeros((N_RES_BINS, N_DS_BINS))
            t.xx11_det_bins = np.zeros((N_RES_BINS, 2, N_DS_BINS))
            t.xx11_cor_bins = np.zeros((N_RES_BINS, 2, N_DS_BINS))
            t.xx22_sent_bins = np.zeros((N_RES_BINS, N_DS_BINS))
            t.xx22_det_bins = np.zeros((N_RES_BINS, 2, N_DS_BINS))
            t.xx22_cor_bins = np.zeros((N_RES_BINS, 2, N_DS_BINS))
            t.frames_by_res_bin = np.zeros(N_RES_BINS)
        return t

    # -- aggregate views ------------------------------------------------------

    def sent_zz(self) -> float:
        return sum(v for k, v in self.sent.items() if k.startswith("ZZ"))

    def detected_zz(self) -> float:
        return self.zz_error + self.zz_correct

    def sum_sent(self, labels) -> float:
        return sum(self.sent.get(lab, 0.0) for lab in labels)

    def sum_detected(self, labels) -> float:
        return sum(self.detected.get(lab, 0.0) for lab in labels)

    def res_bin_cut(self, rc: float):
        """(full_bins, fraction_of_next) covering the rc fraction of frames.

        Frames are ranked best residual first; the boundary bin is included
        fractionally so the kept fraction equals rc up to within-bin
        granularity.
        """
        if self.frames_by_res_bin is None or self.frames_total <= 0 or rc >= 1.0:
            return N_RES_BINS, 0.0
        cum = np.cumsum(self.frames_by_res_bin)
        target = rc * self.frames_total
        k = int(np.searchsorted(cum, target, side="left"))
        if k >= N_RES_BINS:
            return N_RES_BINS, 0.0
        prev = cum[k - 1] if k > 0 else 0.0
        width = self.frames_by_res_bin[k]
        frac = float((target - prev) / width) if width > 0 else 0.0
        return k, min(max(frac, 0.0), 1.0)

    def x_cut(self, ds_half_deg: float, rc: float = 1.0, which: str = "xx11") -> dict:
        """X-basis counts inside the (rc, Ds) post-selection cut.

        Prefers the binned histograms; falls back to a stored single-cut
        entry for recorded tallies.
        """
        sent_bins = getattr(self, f"{which}_sent_bins")
        if sent_bins is not None:
            nb = min(N_DS_BINS, int(round(ds_half_deg)))
            k, frac = self.res_bin_cut(rc)
            det = getattr(self, f"{which}_det_bins")
            cor = getattr(self, f"{which}_cor_bins")

            def cut(arr, ch=None):
                if ch is None:
                    full = arr[:k, :nb].sum()
                    edge = arr[k, :nb].sum() if k < N_RES_BINS else 0.0
                else:
                    full = arr[:k, ch, :nb].sum()
                    edge = arr[k, ch, :nb].sum() if k < N_RES_BINS else 0.0
                return float(full + frac * edge)

            return {
                "n_x": cut(sent_bins),
                "det1": cut(det, 0),
                "det2": cut(det, 1),
                "cor1": cut(cor, 0),
                "cor2": cut(cor, 1),
            }
        key = _cut_key(ds_half_deg, rc, which)
        if key in self.x_cuts:
            return dict(self.x_cuts[key])
        raise KeyError(f"tally holds no X-basis cut for {key}")


def _cut_key(ds_half_deg: float, rc: float, which: str) -> str:
    return f"{which}:ds{ds_half_deg:g}:rc{rc:g}"


def store_x_cut(tally: DetectionTally, ds_half_deg: float, rc: float,
                which: str, counts: dict) -> None:
    tally.x_cuts[_cut_key(ds_half_deg, rc, which)] = dict(counts)


def tally_merge(a: DetectionTally, b: DetectionTally) -> DetectionTally:
    """Element-wise sum of two tallies (commutative, associative).

    Raises ValueError when the histogram layouts differ.
    """
    out = DetectionTally.empty(with_bins=False)
    for lab in set(a.sent) | set(b.sent):
        out.sent[lab] = a.sent.get(lab, 0.0) + b.sent.get(lab, 0.0)
    for lab in set(a.detected) | set(b.detected):
        out.detected[lab] = a.detected.get(lab, 0.0) + b.detected.get(lab, 0.0)
    out.detected_valid_det1 = a.detected_valid_det1 + b.detected_valid_det1
    out.detected_valid_det2 = a.detected_valid_det2 + b.detected_valid_det2
    out.zz_error = a.zz_error + b.zz_error
    out.zz_correct = a.zz_correct + b.zz_correct
    for k in set(a.zz_cats) | set(b.zz_cats):
        out.zz_cats[k] = a.zz_cats.get(k, 0.0) + b.zz_cats.get(k, 0.0)
    for name in ("xx11_sent_bins", "xx11_det_bins", "xx11_cor_bins",
                 "xx22_sent_bins", "xx22_det_bins", "xx22_cor_bins",
                 "frames_by_res_bin"):
        va, vb = getattr(a, name), getattr(b, name)
        if va is None and vb is None:
            setattr(out, name, None)
        elif va is not None and vb is not None:
            if va.shape != vb.shape:
                raise ValueError(f"tally layout mismatch on {name}")
            setattr(out, name, va + vb)
        else:
            raise ValueError(f"tally layout mismatch on {name}")
    out.windows_total = a.windows_total + b.windows_total
    out.frames_total = a.frames_total + b.frames_total
    if set(a.x_cuts) != set(b.x_cuts):
        raise ValueError("tally layout mismatch on x_cuts")
    for k in a.x_cuts:
        out.x_cuts[k] = {kk: a.x_cuts[k][kk] + b.x_cuts[k][kk] for kk in a.x_cuts[k]}
    out.meta = dict(a.meta)
    return out


# -- tally_v1 JSON ------------------------------------------------------------

def to_json_dict(tally: DetectionTally, operating: dict | None = None) -> dict:
    """Serialize with the recorded-data row labels.

    ``operating`` may carry {"ds_half_deg": ..., "rc": ...}; when the tally
    has binned histograms, the corresponding single-cut counts are emitted
    under the "Detected-XX11-Ds-Ch1" style keys so the file matches the
    recorded-table layout.
    """
    d = {"schema": SCHEMA}
    zz_sent = 0.0
    for lab in sorted(tally.sent):
        if lab.startswith("ZZ"):
            zz_sent += tally.sent[lab]
        else:
            d[f"Sent-{lab}"] = tally.sent[lab]
    d["Sent-ZZ"] = zz_sent
    for lab in sorted(tally.detected):
        if not lab.startswith("ZZ"):
            d[f"Detected-{lab}"] = tally.detected[lab]
    d["Detected-Valid-Det1"] = tally.detected_valid_det1
    d["Detected-Valid-Det2"] = tally.detected_valid_det2
    d["Detected-ZZError"] = tally.zz_error
    d["Detected-ZZCorrect"] = tally.zz_correct
    for k, v in tally.zz_cats.items():
        d[f"Detected-ZZ-Cat-{k}"] = v
    if operating and tally.xx11_sent_bins is not None:
        ds, rc = operating["ds_half_deg"], operating.get("rc", 1.0)
        for which, tag in (("xx11", "XX11"), ("xx22", "XX22")):
            c = tally.x_cut(ds, rc, which)
            d[f"Detected-{tag}-Ds-Ch1"] = c["det1"]
            d[f"Detected-{tag}-Ds-Ch2"] = c["det2"]
            d[f"Correct-{tag}-Ds-Ch1"] = c["cor1"]
            d[f"Correct-{tag}-Ds-Ch2"] = c["cor2"]
        d["Operating-Ds-Half-Deg"] = ds
        d["Operating-Rc"] = rc
    for key, c in tally.x_cuts.items():
        d[f"XCut-{key}"] = c
    bins = {}
    for name in ("xx11_sent_bins", "xx11_det_bins", "xx11_cor_bins",
                 "xx22_sent_bins", "xx22_det_bins", "xx22_cor_bins",
                 "frames_by_res_bin"):
        v = getattr(tally, name)
        if v is not None:
            bins[name] = v.tolist()
    if bins:
        d["bins"] = bins
    d["windows_total"] = tally.windows_total
    d["frames_total"] = tally.frames_total
    if tally.meta:
        d["meta"] = tally.meta
    return d


def from_json_dict(d: dict) -> DetectionTally:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported tally schema: {d.get('schema')!r}")
    t = DetectionTally.empty(with_bins=False)
    for key, v in d.items():
        if key.startswith("Sent-") and key != "Sent-ZZ":
            t.sent[key[5:]] = v
        elif key.startswith("Detected-ZZ-Cat-"):
            t.zz_cats[key[16:]] = v
        elif key.startswith("Detected-") and "-Ds-" not in key and not key.startswith(
                ("Detected-Valid", "Detected-ZZ")):
            t.detected[key[9:]] = v
    t.sent["ZZ"] = d.get("Sent-ZZ", 0.0)
    t.detected_valid_det1 = d.get("Detected-Valid-Det1", 0.0)
    t.detected_valid_det2 = d.get("Detected-Valid-Det2", 0.0)
    t.zz_error = d.get("Detected-ZZError", 0.0)
    t.zz_correct = d.get("Detected-ZZCorrect", 0.0)
    if "Detected-XX11-Ds-Ch1" in d:
        ds = d.get("Operating-Ds-Half-Deg", 0.0)
        rc = d.get("Operating-Rc", 1.0)
        for which, tag in (("xx11", "XX11"), ("xx22", "XX22")):
            if f"Detected-{tag}-Ds-Ch1" not in d:
                continue
            sent_key = "XX11" if which == "xx11" else "XX22"
            store_x_cut(t, ds, rc, which, {
                "n_x": d.get(f"NX-{tag}", t.sent.get(sent_key, 0.0) * 4.0 * ds / 360.0),
                "det1": d[f"Detected-{tag}-Ds-Ch1"],
                "det2": d[f"Detected-{tag}-Ds-Ch2"],
                "cor1": d[f"Correct-{tag}-Ds-Ch1"],
                "cor2": d[f"Correct-{tag}-Ds-Ch2"],
            })
        t.meta["operating_ds_half_deg"] = ds
        t.meta["operating_rc"] = rc
    for key, c in d.items():
        if key.startswith("XCut-"):
            t.x_cuts[key[5:]] = dict(c)
    for name, v in d.get("bins", {}).items():
        setattr(t, name, np.asarray(v, dtype=float))
    t.windows_total = d.get("windows_total", 0.0)
    t.frames_total = d.get("frames_total", 0.0)
    t.meta.update(d.get("meta", {}))
    return t


def save_tally(tally: DetectionTally, path, operating: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(tally, operating), fh, sort_keys=True, indent=1)


def load_tally(path) -> DetectionTally:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
