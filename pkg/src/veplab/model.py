"""Core data types: recordings, marker streams, trial epochs, and their CSV I/O.

Recording CSV: UTF-8, header ``time_s,<ch1>,<ch2>,...``, one row per sample,
dot-decimal floats. Marker CSV: header ``time_s,label``. Floats are written
with Python's shortest round-trip representation, so save/load round-trips
are bit-exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParseError

MARKER_BASELINE = "baseline_start"
MARKER_ONSET = "trial_onset"
MARKER_OFFSET = "trial_offset"

# trial_onset:<paradigm>:<freq_hz> / trial_offset:<paradigm>:<freq_hz> / baseline_start
_LABEL_RE = re.compile(
    r"^(baseline_start|(trial_onset|trial_offset):[A-Za-z0-9_]+:[0-9.eE+-]+)$"
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelLayout:
    """Ordered channel labels plus provenance of derived (virtual) channels."""

    names: tuple[str, ...]
    virtual_sources: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.names:
            raise InputError("channel layout must have at least one channel")
        if len(set(self.names)) != len(self.names):
            raise InputError(f"duplicate channel names in layout: {self.names}")
        object.__setattr__(self, "names", tuple(self.names))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown channel {name!r}; have {self.names}") from None

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Recording:
    """Multichannel time series in microvolts, channels x samples."""

    sample_rate_hz: float
    layout: ChannelLayout
    samples: np.ndarray
    t0: float = 0.0
    # Timestamps as loaded from file, kept verbatim so save(load(f)) == f.
    times_s: np.ndarray | None = None

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if samples.shape[0] != len(self.layout):
            raise InputError(
                f"samples have {samples.shape[0]} rows but layout has "
                f"{len(self.layout)} channels"
            )
        if self.sample_rate_hz <= 0:
            raise InputError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise InputError("recording samples must be finite")
        object.__setattr__(self, "samples", _readonly(samples))
        if self.times_s is not None:
            times = np.asarray(self.times_s, dtype=np.float64)
            if times.shape != (samples.shape[1],):
                raise InputError("times_s length must match sample count")
            object.__setattr__(self, "times_s", _readonly(times))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def times(self) -> np.ndarray:
        if self.times_s is not None:
            return self.times_s
        return self.t0 + np.arange(self.n_samples) / self.sample_rate_hz

    def channel(self, name: str) -> np.ndarray:
        return self.samples[self.layout.index(name)]


@dataclass(frozen=True)
class MarkerStream:
    """Ordered (time_s, label) events; labels follow the declared vocabulary."""

    events: tuple[tuple[float, str], ...]

    def __post_init__(self):
        events = tuple((float(t), str(label)) for t, label in self.events)
        times = [t for t, _ in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise InputError("marker times must be non-decreasing")
        for t, label in events:
            if not _LABEL_RE.match(label):
                raise InputError(f"marker label {label!r} not in vocabulary")
        object.__setattr__(self, "events", events)

    def with_prefix(self, prefix: str) -> list[tuple[float, str, float]]:
        """Events whose label starts with prefix, as (time, paradigm, freq_hz)."""
        out = []
        for t, label in self.events:
            parts = label.split(":")
            if parts[0] != prefix:
                continue
            if len(parts) != 3:
                raise InputError(f"label {label!r} does not encode a target")
            out.append((t, parts[1], float(parts[2])))
        return out


@dataclass(frozen=True)
class TrialEpoch:
    """One stimulation trial: condition, target frequency, channels x samples."""

    condition: str
    target_freq_hz: float
    samples: np.ndarray
    sample_rate_hz: float
    onset_s: float

    def __post_init__(self):
        if self.target_freq_hz <= 0:
            raise InputError(f"target_freq_hz must be > 0, got {self.target_freq_hz}")
        if self.sample_rate_hz <= 0:
            raise InputError("sample_rate_hz must be > 0")
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "samples", _readonly(samples))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def replace_samples(self, samples: np.ndarray) -> "TrialEpoch":
        return TrialEpoch(
            condition=self.condition,
            target_freq_hz=self.target_freq_hz,
            samples=samples,
            sample_rate_hz=self.sample_rate_hz,
            onset_s=self.onset_s,
        )


def _fmt(x: float) -> str:
    # Shortest round-trip decimal form; the canonical formatter for all CSVs.
    return repr(float(x))


def save_recording(rec: Recording, path) -> None:
    times = rec.times()
    cols = rec.samples
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time_s," + ",".join(rec.layout.names) + "\n")
        # tolist() up front: iterating python floats is much faster than np scalars
        tlist = times.tolist()
        rows = cols.T.tolist()
        for t, row in zip(tlist, rows):
            fh.write(_fmt(t))
            for v in row:
                fh.write(",")
                fh.write(_fmt(v))
            fh.write("\n")


def load_recording(path) -> Recording:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        fields = header.split(",")
        if len(fields) < 2 or fields[0] != "time_s":
            raise ParseError(f"{path}: bad header {header!r}; expected time_s,<ch>,...")
        names = tuple(fields[1:])
        ncol = len(fields)
        times: list[float] = []
        data: list[list[float]] = []
        for i, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncol:
                raise ParseError(
                    f"{path}: row {i} has {len(parts)} fields, expected {ncol}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise ParseError(f"{path}: row {i} has a non-numeric cell") from None
            if not all(map(math.isfinite, vals)):
                raise ParseError(f"{path}: row {i} has a non-finite value")
            times.append(vals[0])
            data.append(vals[1:])
    if len(times) < 2:
        raise ParseError(f"{path}: need at least 2 sample rows to infer sample rate")
    tarr = np.array(times)
    dt = np.diff(tarr)
    if np.any(dt <= 0):
        row = int(np.argmax(dt <= 0)) + 3  # +2 header/1-based, +1 second row of pair
        raise ParseError(f"{path}: timestamps not increasing at row {row}")
    fs = (len(tarr) - 1) / (tarr[-1] - tarr[0])
    # snap to 9 significant digits so nominal rates (500, 250, ...) are exact
    fs = float(f"{fs:.9g}")
    return Recording(
        sample_rate_hz=fs,
        layout=ChannelLayout(names),
        samples=np.array(data).T,
        t0=float(tarr[0]),
        times_s=tarr,
    )


def save_markers(markers: MarkerStream, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time_s,label\n")
        for t, label in markers.events:
            fh.write(f"{_fmt(t)},{label}\n")


def load_markers(path) -> MarkerStream:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "time_s,label":
            raise ParseError(f"{path}: bad header {header!r}; expected time_s,label")
        for i, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                t_str, label = line.split(",", 1)
                t = float(t_str)
            except ValueError:
                raise ParseError(f"{path}: row {i} is not time_s,label") from None
            events.append((t, label))
    return MarkerStream(tuple(events))


def derive_virtual_channel(
    rec: Recording, new_name: str, sources: list[str] | tuple[str, ...]
) -> Recording:
    """Append a channel that is the sample-wise mean of the source channels."""
    if not sources:
        raise InputError("need at least one source channel")
    if new_name in rec.layout.names:
        raise InputError(f"channel name {new_name!r} already in use")
    idx = [rec.layout.index(s) for s in sources]
    virt = rec.samples[idx].mean(axis=0)
    layout = ChannelLayout(
        rec.layout.names + (new_name,),
        dict(rec.layout.virtual_sources, **{new_name: tuple(sources)}),
    )
    return Recording(
        sample_rate_hz=rec.sample_rate_hz,
        layout=layout,
        samples=np.vstack([rec.samples, virt[None, :]]),
        t0=rec.t0,
        times_s=rec.times_s,
    )


def extract_epochs(
    rec: Recording,
    markers: MarkerStream,
    window_s: tuple[float, float],
    marker_prefix: str = MARKER_ONSET,
) -> list[TrialEpoch]:
    """Cut one epoch per matching marker, snapped to the nearest sample.

    window_s is (start_offset, end_offset) relative to the marker time.
    Raises if any window falls outside the recording, listing the marker time.
    """
    start_off, end_off = window_s
    if end_off <= start_off:
        raise InputError(f"empty epoch window {window_s}")
    fs = rec.sample_rate_hz
    n_win = round((end_off - start_off) * fs)
    epochs = []
    for t, paradigm, freq in markers.with_prefix(marker_prefix):
        i0 = round((t + start_off - rec.t0) * fs)
        i1 = i0 + n_win
        if i0 < 0 or i1 > rec.n_samples:
            raise InputError(
                f"epoch window for marker at {t} s ([{i0}, {i1}) samples) exceeds "
                f"recording bounds [0, {rec.n_samples})"
            )
        epochs.append(
            TrialEpoch(
                condition=paradigm,
                target_freq_hz=freq,
                samples=rec.samples[:, i0:i1],
                sample_rate_hz=fs,
                onset_s=t + start_off,
            )
        )
    return epochs
