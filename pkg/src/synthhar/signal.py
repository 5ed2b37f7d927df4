"""Sensor streams, annotation tracks, filtering and windowing.

Two triaxial accelerometers are recorded per session: one on the upper
thigh (25 Hz) and one on the lower back (128 Hz). Accelerations are in g,
timestamps in seconds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError, FormatError, ParseError
from .labels import FineLabel, fine


class Sensor(str, Enum):
    UPPER_THIGH = "upper_thigh"
    LOWER_BACK = "lower_back"

    @property
    def short(self) -> str:
        return "ut" if self is Sensor.UPPER_THIGH else "lb"


class Origin(str, Enum):
    REAL = "real"
    SYNTHETIC = "synthetic"


NOMINAL_RATE_HZ = {Sensor.UPPER_THIGH: 25.0, Sensor.LOWER_BACK: 128.0}
WINDOW_S = 2.0
WINDOW_SAMPLES = {s: int(round(WINDOW_S * r)) for s, r in NOMINAL_RATE_HZ.items()}

# max relative deviation of a sample interval from the nominal period
_PERIOD_TOLERANCE = 0.10
_TIME_EPS = 1e-6


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TriaxialSeries:
    sensor: Sensor
    rate_hz: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sensor", Sensor(self.sensor))
        samples = _frozen_array(self.samples)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise DataError(f"samples must have shape (n, 3), got {samples.shape}")
        if samples.shape[0] == 0:
            raise DataError("empty series")
        if not np.all(np.isfinite(samples)):
            raise DataError("series contains non-finite samples")
        if not self.rate_hz > 0:
            raise DataError(f"rate_hz must be positive, got {self.rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.rate_hz

    @property
    def end_time(self) -> float:
        """Exclusive end of the covered span."""
        return self.start_time + self.duration

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.rate_hz

    def with_samples(self, samples: np.ndarray) -> "TriaxialSeries":
        return replace(self, samples=samples)

    def shifted(self, offset_s: float) -> "TriaxialSeries":
        return replace(self, start_time=self.start_time + offset_s)

    def slice_time(self, start: float, stop: float) -> np.ndarray:
        """Samples whose timestamps fall in ``[start, stop)``."""
        i0 = max(0, int(math.ceil((start - self.start_time) * self.rate_hz - _TIME_EPS)))
        i1 = min(len(self), int(math.ceil((stop - self.start_time) * self.rate_hz - _TIME_EPS)))
        return self.samples[i0:i1]


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    label: FineLabel

    def __post_init__(self):
        object.__setattr__(self, "label", fine(self.label))
        if not self.start < self.end:
            raise DataError(f"interval start {self.start} must precede end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def covers(self, start: float, stop: float) -> bool:
        return self.start <= start + _TIME_EPS and stop <= self.end + _TIME_EPS


@dataclass(frozen=True)
class AnnotationTrack:
    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        intervals = tuple(self.intervals)
        for prev, cur in zip(intervals, intervals[1:]):
            if cur.start < prev.start:
                raise DataError("annotation intervals must be sorted by start")
            if cur.start < prev.end - _TIME_EPS:
                raise DataError(
                    f"overlapping annotations: [{prev.start}, {prev.end}) {prev.label} "
                    f"and [{cur.start}, {cur.end}) {cur.label}"
                )
        object.__setattr__(self, "intervals", intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def first(self, label: FineLabel) -> Interval | None:
        for iv in self.intervals:
            if iv.label is label:
                return iv
        return None

    def covering(self, start: float, stop: float) -> Interval | None:
        for iv in self.intervals:
            if iv.covers(start, stop):
                return iv
            if iv.start > start + _TIME_EPS:
                break
        return None


@dataclass(frozen=True)
class RecordingSession:
    participant_id: str
    thigh: TriaxialSeries
    back: TriaxialSeries
    annotations: AnnotationTrack = field(default_factory=AnnotationTrack)

    def __post_init__(self):
        if self.thigh.sensor is not Sensor.UPPER_THIGH:
            raise DataError("thigh series must come from the upper-thigh sensor")
        if self.back.sensor is not Sensor.LOWER_BACK:
            raise DataError("back series must come from the lower-back sensor")

    @property
    def span(self) -> tuple[float, float]:
        """Time span covered by both streams."""
        return (max(self.thigh.start_time, self.back.start_time),
                min(self.thigh.end_time, self.back.end_time))

    def map_streams(self, fn) -> "RecordingSession":
        return replace(self, thigh=fn(self.thigh), back=fn(self.back))


@dataclass(frozen=True)
class LabeledWindow:
    participant_id: str
    label: FineLabel
    thigh: np.ndarray
    back: np.ndarray
    origin: Origin = Origin.REAL
    start_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", fine(self.label))
        object.__setattr__(self, "origin", Origin(self.origin))
        thigh = _frozen_array(self.thigh)
        back = _frozen_array(self.back)
        for name, arr in (("thigh", thigh), ("back", back)):
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 2:
                raise DataError(f"{name} slice must have shape (n >= 2, 3), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} slice contains non-finite samples")
        t_dur = thigh.shape[0] / NOMINAL_RATE_HZ[Sensor.UPPER_THIGH]
        b_dur = back.shape[0] / NOMINAL_RATE_HZ[Sensor.LOWER_BACK]
        if abs(t_dur - b_dur) > 1.0 / NOMINAL_RATE_HZ[Sensor.UPPER_THIGH] + _TIME_EPS:
            raise DataError(f"sensor slices span different durations ({t_dur} s vs {b_dur} s)")
        object.__setattr__(self, "thigh", thigh)
        object.__setattr__(self, "back", back)

    @property
    def duration(self) -> float:
        return self.thigh.shape[0] / NOMINAL_RATE_HZ[Sensor.UPPER_THIGH]

    def channels(self) -> list[np.ndarray]:
        """Six channels in order thigh x/y/z, back x/y/z."""
        return [self.thigh[:, i] for i in range(3)] + [self.back[:, i] for i in range(3)]


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _read_rows(path: Path, header: Sequence[str]):
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header") from None
        if [c.strip().lower() for c in first] != list(header):
            raise ParseError(path, 1, f"expected header {','.join(header)!r}, got {','.join(first)!r}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def load_series(path, sensor: Sensor, rate_hz: float | None = None) -> TriaxialSeries:
    """Read a ``t,x,y,z`` CSV into a :class:`TriaxialSeries`.

    Timestamps must increase strictly and stay within 10 % of the nominal
    sample period; irregular recordings are rejected, not resampled.
    """
    path = Path(path)
    sensor = Sensor(sensor)
    rate = float(rate_hz) if rate_hz is not None else NOMINAL_RATE_HZ[sensor]
    times, values = [], []
    for line, row in _read_rows(path, ("t", "x", "y", "z")):
        if len(row) != 4:
            raise ParseError(path, line, f"expected 4 fields, got {len(row)}")
        try:
            t, x, y, z = (float(c) for c in row)
        except ValueError:
            raise ParseError(path, line, f"non-numeric value in {row!r}") from None
        if not all(math.isfinite(v) for v in (t, x, y, z)):
            raise ParseError(path, line, "non-finite value")
        times.append(t)
        values.append((x, y, z))
    if not values:
        raise DataError(f"{path}: empty series")
    t = np.asarray(times)
    dt = np.diff(t)
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0)) + 2
        raise FormatError(f"{path}: non-monotone timestamps at data row {bad}")
    period = 1.0 / rate
    if dt.size and np.max(np.abs(dt - period)) >= _PERIOD_TOLERANCE * period:
        bad = int(np.argmax(np.abs(dt - period))) + 2
        raise FormatError(f"{path}: irregular sampling at data row {bad} (nominal rate {rate} Hz)")
    return TriaxialSeries(sensor, rate, np.asarray(values), start_time=float(t[0]))


def load_annotations(path) -> AnnotationTrack:
    path = Path(path)
    intervals = []
    for line, row in _read_rows(path, ("start", "end", "label")):
        if len(row) != 3:
            raise ParseError(path, line, f"expected 3 fields, got {len(row)}")
        try:
            start, end = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(path, line, f"non-numeric interval bound in {row!r}") from None
        try:
            intervals.append(Interval(start, end, row[2].strip()))
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
    intervals.sort(key=lambda iv: (iv.start, iv.end))
    return AnnotationTrack(tuple(intervals))


def load_session(thigh_csv, back_csv, annot_csv, participant_id: str | None = None) -> RecordingSession:
    pid = participant_id if participant_id is not None else Path(thigh_csv).stem
    return RecordingSession(
        participant_id=str(pid),
        thigh=load_series(thigh_csv, Sensor.UPPER_THIGH),
        back=load_series(back_csv, Sensor.LOWER_BACK),
        annotations=load_annotations(annot_csv),
    )


def write_series(path, series: TriaxialSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z"])
        for t, (x, y, z) in zip(series.times, series.samples):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(float(z))])


def write_annotations(path, track: AnnotationTrack) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start", "end", "label"])
        for iv in track:
            w.writerow([repr(iv.start), repr(iv.end), iv.label.value])


# ---------------------------------------------------------------------------
# Synchronization and filtering
# ---------------------------------------------------------------------------

def synchronize(session: RecordingSession, thigh_event_s: float, back_event_s: float) -> RecordingSession:
    """Re-base both streams on the first annotated sit-to-stand transfer.

    ``thigh_event_s`` and ``back_event_s`` are the times, on each stream's
    own clock, at which that transfer is visible in the acceleration signal.
    """
    anchor = session.annotations.first(FineLabel.SIT_TO_STAND)
    if anchor is None:
        raise DataError("annotation track has no sit_to_stand transfer to synchronize on")
    for name, series, event in (("thigh", session.thigh, thigh_event_s),
                                ("back", session.back, back_event_s)):
        if not series.start_time <= event < series.end_time:
            raise DataError(
                f"{name} event time {event} s outside stream span "
                f"[{series.start_time}, {series.end_time})"
            )
    return replace(
        session,
        thigh=session.thigh.shifted(anchor.start - thigh_event_s),
        back=session.back.shifted(anchor.start - back_event_s),
    )


def sgolay_frame(rate_hz: float, frame_s: float = 0.12, order: int = 2) -> int:
    """Frame length in samples: rounded, forced odd and at least ``order + 1``."""
    n = int(round(frame_s * rate_hz))
    n = max(n, order + 1)
    if n % 2 == 0:
        n += 1
    return n


def sgolay_smooth(series: TriaxialSeries, frame_s: float = 0.12, order: int = 2) -> TriaxialSeries:
    """Savitzky-Golay smoothing per axis with polynomial fits at the edges."""
    if order < 0:
        raise ConfigError("polynomial order must be non-negative")
    frame = sgolay_frame(series.rate_hz, frame_s, order)
    if len(series) < frame:
        raise DataError(f"series of {len(series)} samples is shorter than the {frame}-sample frame")
    smoothed = sps.savgol_filter(series.samples, frame, order, axis=0, mode="interp")
    return series.with_samples(smoothed)


def highpass_zero_phase_array(x: np.ndarray, rate_hz: float, cutoff_hz: float = 0.5,
                              order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth high-pass along axis 0.

    The forward-backward and backward-forward passes are averaged so the
    result commutes exactly with time reversal.
    """
    nyquist = rate_hz / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise ConfigError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")
    x = np.asarray(x, dtype=float)
    padlen = 3 * order
    if x.shape[0] <= padlen:
        raise DataError(f"need more than {padlen} samples to filter, got {x.shape[0]}")
    sos = sps.butter(order, cutoff_hz, btype="highpass", fs=rate_hz, output="sos")
    fb = sps.sosfiltfilt(sos, x, axis=0, padtype="odd", padlen=padlen)
    bf = sps.sosfiltfilt(sos, x[::-1], axis=0, padtype="odd", padlen=padlen)[::-1]
    return 0.5 * (fb + bf)


def highpass_zero_phase(series: TriaxialSeries, cutoff_hz: float = 0.5, order: int = 4) -> TriaxialSeries:
    return series.with_samples(highpass_zero_phase_array(series.samples, series.rate_hz, cutoff_hz, order))


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def segment(session: RecordingSession, window_s: float = WINDOW_S,
            origin: Origin = Origin.REAL) -> list[LabeledWindow]:
    """Cut non-overlapping windows tiled from the start of the common span.

    A window is kept only when a single annotation interval covers it
    completely; windows straddling a label change are dropped.
    """
    if window_s <= 0:
        raise ConfigError("window length must be positive")
    t0, t1 = session.span
    n_thigh = int(round(window_s * session.thigh.rate_hz))
    n_back = int(round(window_s * session.back.rate_hz))
    windows = []
    k = 0
    while True:
        w0 = t0 + k * window_s
        w1 = w0 + window_s
        if w1 > t1 + _TIME_EPS:
            break
        k += 1
        interval = session.annotations.covering(w0, w1)
        if interval is None:
            continue
        slices = []
        for series, n in ((session.thigh, n_thigh), (session.back, n_back)):
            i0 = int(round((w0 - series.start_time) * series.rate_hz))
            if i0 < 0 or i0 + n > len(series):
                break
            slices.append(series.samples[i0:i0 + n])
        else:
            windows.append(LabeledWindow(session.participant_id, interval.label,
                                         slices[0], slices[1], origin, start_time=w0))
    return windows


def preprocess(session: RecordingSession, frame_s: float = 0.12, order: int = 2) -> RecordingSession:
    """Savitzky-Golay smoothing of both streams."""
    return session.map_streams(lambda s: sgolay_smooth(s, frame_s, order))
