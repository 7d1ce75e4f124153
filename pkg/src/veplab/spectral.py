"""Single-window boxcar PSD and the local-ratio SNR spectrum.

The PSD is one untapered FFT of the whole post-onset segment (the trial's
first skip_initial_s seconds are dropped to avoid the transient), normalized
so that sum(power) * resolution equals the segment variance. SNR at a bin is
its power over the mean power of n_neighbor bins on each side, skipping
n_skip guard bins next to it; edges without a full neighborhood are NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError
from .model import TrialEpoch


@dataclass(frozen=True)
class PowerSpectrum:
    freqs_hz: np.ndarray
    power: np.ndarray  # channels x bins, uV^2/Hz
    resolution_hz: float

    @property
    def n_bins(self) -> int:
        return len(self.freqs_hz)


@dataclass(frozen=True)
class SnrSpectrum:
    freqs_hz: np.ndarray
    snr_db: np.ndarray  # channels x bins, NaN where the neighborhood is undefined
    snr_linear: np.ndarray
    n_neighbor: int
    n_skip: int

    def defined(self) -> np.ndarray:
        return np.isfinite(self.snr_db).all(axis=0)


class SnrReadout(NamedTuple):
    bin_freq_hz: float
    snr_db: np.ndarray  # per channel
    snr_linear: np.ndarray


def psd_boxcar(epoch: TrialEpoch, skip_initial_s: float = 1.0) -> PowerSpectrum:
    """One-segment boxcar periodogram of the epoch after the onset skip."""
    if skip_initial_s < 0:
        raise InputError("skip_initial_s must be >= 0")
    fs = epoch.sample_rate_hz
    k0 = round(skip_initial_s * fs)
    if k0 >= epoch.n_samples:
        raise InputError(
            f"skip of {skip_initial_s} s leaves no samples from a "
            f"{epoch.duration_s} s epoch"
        )
    seg = epoch.samples[:, k0:]
    n = seg.shape[1]
    seg = seg - seg.mean(axis=1, keepdims=True)
    spec = np.fft.rfft(seg, axis=1)
    power = np.abs(spec) ** 2 / (fs * n)
    scale = np.full(power.shape[1], 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    power *= scale[None, :]
    return PowerSpectrum(
        freqs_hz=np.fft.rfftfreq(n, 1.0 / fs),
        power=power,
        resolution_hz=fs / n,
    )


def snr_spectrum(
    psd: PowerSpectrum, n_neighbor: int = 3, n_skip: int = 1
) -> SnrSpectrum:
    """Per-bin power over the mean of nearby bins, with guard bins skipped."""
    if n_neighbor < 1:
        raise InputError("n_neighbor must be >= 1")
    if n_skip < 0:
        raise InputError("n_skip must be >= 0")
    reach = n_skip + n_neighbor
    n_bins = psd.n_bins
    if n_bins < 2 * reach + 1:
        raise InputError(
            f"spectrum has {n_bins} bins; need at least {2 * reach + 1} for "
            f"n_neighbor={n_neighbor}, n_skip={n_skip}"
        )
    p = psd.power
    neigh = np.zeros_like(p)
    for off in range(n_skip + 1, reach + 1):
        neigh[:, reach:-reach] += p[:, reach - off : n_bins - reach - off]
        neigh[:, reach:-reach] += p[:, reach + off : n_bins - reach + off]
    neigh /= 2 * n_neighbor
    with np.errstate(divide="ignore", invalid="ignore"):
        linear = np.where(neigh > 0, p / np.where(neigh > 0, neigh, 1.0), np.inf)
        linear[:, :reach] = np.nan
        linear[:, n_bins - reach :] = np.nan
        db = 10.0 * np.log10(linear)
    return SnrSpectrum(
        freqs_hz=psd.freqs_hz,
        snr_db=db,
        snr_linear=linear,
        n_neighbor=n_neighbor,
        n_skip=n_skip,
    )


def snr_at(s: SnrSpectrum, f: float) -> SnrReadout:
    """SNR at the bin nearest to f (ties break toward the lower frequency)."""
    freqs = s.freqs_hz
    if not freqs[0] <= f <= freqs[-1]:
        raise InputError(
            f"{f} Hz outside spectrum range [{freqs[0]}, {freqs[-1]}] Hz"
        )
    res = freqs[1] - freqs[0]
    pos = (f - freqs[0]) / res
    low = int(np.floor(pos))
    idx = low if (pos - low) <= 0.5 else min(low + 1, len(freqs) - 1)
    return SnrReadout(
        bin_freq_hz=float(freqs[idx]),
        snr_db=s.snr_db[:, idx].copy(),
        snr_linear=s.snr_linear[:, idx].copy(),
    )


def dump_spectrum_csv(freqs_hz, per_channel, names, path) -> None:
    """Write `freq_hz,<ch...>` rows; works for PSD or SNR matrices."""
    arr = np.asarray(per_channel)
    if arr.shape[0] != len(names):
        raise InputError("channel count does not match names")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("freq_hz," + ",".join(names) + "\n")
        for i, f in enumerate(np.asarray(freqs_hz).tolist()):
            row = ",".join(repr(float(v)) for v in arr[:, i])
            fh.write(f"{f!r},{row}\n")
