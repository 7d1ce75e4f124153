"""Preprocessing chain: zero-phase band-pass, line-noise removal, artifact
suppression.

Line noise is removed by least-squares fitting a sinusoid at the mains
frequency in overlapping 1 s windows (raised-cosine overlap-add), and
artifacts by windowed principal-subspace cleaning calibrated on the quietest
10 s stretch of the recording.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.linalg import eigh

from .errors import InputError
from .model import Recording, TrialEpoch


@dataclass(frozen=True)
class BandpassSpec:
    lo_hz: float
    hi_hz: float
    order: int = 4

    def validate(self, fs_hz: float) -> None:
        if not 0 < self.lo_hz < self.hi_hz < fs_hz / 2:
            raise InputError(
                f"band edges ({self.lo_hz}, {self.hi_hz}) invalid for fs {fs_hz} Hz"
            )
        if self.order < 1:
            raise InputError("filter order must be >= 1")


def bandpass(epoch: TrialEpoch, spec: BandpassSpec) -> TrialEpoch:
    """Forward-backward Butterworth band-pass, per channel, length preserved."""
    spec.validate(epoch.sample_rate_hz)
    sos = signal.butter(
        spec.order,
        [spec.lo_hz, spec.hi_hz],
        btype="bandpass",
        output="sos",
        fs=epoch.sample_rate_hz,
    )
    filtered = signal.sosfiltfilt(sos, epoch.samples, axis=1)
    return epoch.replace_samples(filtered)


def _fit_tone(seg: np.ndarray, t: np.ndarray, f_line: float) -> np.ndarray:
    """Least-squares sin/cos fit at f_line; returns the fitted tone per channel."""
    design = np.column_stack(
        [np.sin(2 * np.pi * f_line * t), np.cos(2 * np.pi * f_line * t)]
    )
    coef, *_ = np.linalg.lstsq(design, seg.T, rcond=None)
    return (design @ coef).T


def remove_line_noise(
    epoch: TrialEpoch, f_line: float = 50.0, window_s: float = 1.0
) -> TrialEpoch:
    """Subtract the locally fitted mains tone in overlapping windows.

    Windows are window_s long with 50% overlap; the per-window estimates are
    blended by raised-cosine overlap-add so the subtraction tracks slow
    amplitude or phase drift of the interference.
    """
    fs = epoch.sample_rate_hz
    if f_line >= fs / 2:
        raise InputError(f"line frequency {f_line} Hz is above Nyquist for fs {fs}")
    x = epoch.samples
    n = x.shape[1]
    win_len = round(window_s * fs)
    if n <= win_len:
        t = np.arange(n) / fs
        return epoch.replace_samples(x - _fit_tone(x, t, f_line))

    hop = win_len // 2
    tone = np.zeros_like(x)
    weight = np.zeros(n)
    for start in range(0, n, hop):
        stop = min(n, start + win_len)
        seg = x[:, start:stop]
        if seg.shape[1] < 16:
            break  # tail shorter than a fit's worth; prior window covers it
        t = np.arange(seg.shape[1]) / fs
        fit = _fit_tone(seg, t, f_line)
        # epsilon keeps the normalization exact where only one window reaches
        w = np.hanning(seg.shape[1]) + 1e-9
        tone[:, start:stop] += fit * w[None, :]
        weight[start:stop] += w
        if stop == n:
            break
    weight[weight == 0] = 1.0
    return epoch.replace_samples(x - tone / weight[None, :])


def suppress_artifacts(
    rec: Recording,
    cutoff: float = 20.0,
    window_s: float = 1.0,
    calib_s: float = 10.0,
) -> Recording:
    """Remove high-variance principal components in 1 s windows.

    Calibration statistics come from the lowest-RMS contiguous calib_s
    stretch. In each window, any calibration principal component whose
    variance exceeds cutoff times its calibration variance is dropped and
    the window is rebuilt from the remaining components. Windows with no
    flagged component are passed through untouched.
    """
    fs = rec.sample_rate_hz
    x = rec.samples
    n = x.shape[1]
    n_calib = round(calib_s * fs)
    if n < n_calib:
        raise InputError(
            f"recording of {n / fs:.2f} s is shorter than the {calib_s} s "
            "calibration window"
        )
    if cutoff <= 0:
        raise InputError("cutoff must be > 0")

    # quietest calib_s stretch by total energy, searched on 1 s hops
    energy = np.sum(x**2, axis=0)
    csum = np.concatenate([[0.0], np.cumsum(energy)])
    hop = max(1, round(fs))
    starts = range(0, n - n_calib + 1, hop)
    calib_start = min(starts, key=lambda s: csum[s + n_calib] - csum[s])
    calib = x[:, calib_start : calib_start + n_calib]

    mu = calib.mean(axis=1, keepdims=True)
    centered = calib - mu
    cov = centered @ centered.T / centered.shape[1]
    # a silent calibration stretch says nothing about artifact thresholds
    global_scale = float(np.mean(x**2))
    if np.trace(cov) <= 1e-15 * max(global_scale, 1e-30):
        return rec
    lam, vecs = eigh(cov)
    lam = np.maximum(lam, 1e-12 * np.trace(cov))

    win_len = round(window_s * fs)
    out = np.array(x)
    changed = False
    start = 0
    while start < n:
        stop = min(n, start + win_len)
        seg = x[:, start:stop] - mu
        scores = vecs.T @ seg
        var = np.mean(scores**2, axis=1)
        bad = var > cutoff * lam
        if np.any(bad):
            scores[bad] = 0.0
            out[:, start:stop] = vecs @ scores + mu
            changed = True
        start = stop
    if not changed:
        return rec
    return Recording(
        sample_rate_hz=fs,
        layout=rec.layout,
        samples=out,
        t0=rec.t0,
        times_s=rec.times_s,
    )
