"""Simulated dual-accelerometer cohorts.

Used to exercise the full pipeline without the restricted study recordings.
A :class:`CohortSpec` lists each participant's activity schedule and one
generative model per activity; :func:`simulate_cohort` turns it into
recording sessions, deterministically for a given seed.

Per-sample model for one sensor axis during an interval of duration ``D``::

    value(tau) = gravity(tau) + offset_p
                 + scale_p * amplitude * sin(2 pi f_p tau + phase + phi)
                 + noise_std * N(0, 1)

``gravity`` ramps smoothly from ``gravity`` to ``gravity_end`` when the
latter is given (postural transfers). ``offset_p``, ``scale_p`` and ``f_p``
are per-participant draws; ``phi`` is drawn per interval.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .labels import FINE_LABELS, CoarseLabel, FineLabel, fine, to_coarse
from .signal import (NOMINAL_RATE_HZ, AnnotationTrack, Interval, RecordingSession,
                     Sensor, TriaxialSeries)


def _vec3(values, name) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in values)
    if len(vals) != 3:
        raise ConfigError(f"{name} needs three components, got {len(vals)}")
    return vals


@dataclass
class SensorModel:
    gravity: tuple = (0.0, 0.0, 1.0)
    gravity_end: tuple | None = None
    amplitude: tuple = (0.0, 0.0, 0.0)
    phase: tuple = (0.0, 0.0, 0.0)
    noise_std: tuple = (0.01, 0.01, 0.01)

    def __post_init__(self):
        self.gravity = _vec3(self.gravity, "gravity")
        if self.gravity_end is not None:
            self.gravity_end = _vec3(self.gravity_end, "gravity_end")
        self.amplitude = _vec3(self.amplitude, "amplitude")
        self.phase = _vec3(self.phase, "phase")
        self.noise_std = _vec3(self.noise_std, "noise_std")
        if min(self.noise_std) < 0:
            raise ConfigError("noise_std must be non-negative")


@dataclass
class ActivityModel:
    thigh: SensorModel = field(default_factory=SensorModel)
    back: SensorModel = field(default_factory=SensorModel)
    frequency_hz: float = 0.0

    def __post_init__(self):
        if isinstance(self.thigh, dict):
            self.thigh = SensorModel(**self.thigh)
        if isinstance(self.back, dict):
            self.back = SensorModel(**self.back)
        if self.frequency_hz < 0:
            raise ConfigError("frequency_hz must be non-negative")


@dataclass
class ParticipantSpec:
    participant_id: str
    schedule: list  # [(fine label, duration_s), ...]

    def __post_init__(self):
        sched = []
        for item in self.schedule:
            label, duration = item
            try:
                label = fine(label)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            duration = float(duration)
            if not duration > 0:
                raise ConfigError(
                    f"participant {self.participant_id}: duration of {label.value} must be positive, got {duration}")
            sched.append((label, duration))
        self.schedule = sched


@dataclass
class CohortSpec:
    participants: list
    activities: dict
    amplitude_jitter: float = 0.1
    frequency_jitter: float = 0.1
    orientation_jitter: float = 0.05
    thigh_rate_hz: float = NOMINAL_RATE_HZ[Sensor.UPPER_THIGH]
    back_rate_hz: float = NOMINAL_RATE_HZ[Sensor.LOWER_BACK]

    def __post_init__(self):
        self.participants = [p if isinstance(p, ParticipantSpec) else ParticipantSpec(**p)
                             for p in self.participants]
        acts = {}
        for key, model in self.activities.items():
            try:
                label = fine(key)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            acts[label] = model if isinstance(model, ActivityModel) else ActivityModel(**model)
        self.activities = acts
        for name in ("amplitude_jitter", "frequency_jitter", "orientation_jitter"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not (0 <= self.amplitude_jitter < 1 and 0 <= self.frequency_jitter < 1):
            raise ConfigError("relative jitters must lie in [0, 1)")
        if self.thigh_rate_hz <= 0 or self.back_rate_hz <= 0:
            raise ConfigError("sampling rates must be positive")
        ids = [p.participant_id for p in self.participants]
        if len(set(ids)) != len(ids):
            raise ConfigError("participant ids must be unique")
        for p in self.participants:
            for label, _ in p.schedule:
                if label not in self.activities:
                    raise ConfigError(f"no activity model for {label.value}")

    def to_dict(self) -> dict:
        return {
            "amplitude_jitter": self.amplitude_jitter,
            "frequency_jitter": self.frequency_jitter,
            "orientation_jitter": self.orientation_jitter,
            "thigh_rate_hz": self.thigh_rate_hz,
            "back_rate_hz": self.back_rate_hz,
            "activities": {k.value: asdict(v) for k, v in self.activities.items()},
            "participants": [
                {"participant_id": p.participant_id,
                 "schedule": [[lab.value, dur] for lab, dur in p.schedule]}
                for p in self.participants
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CohortSpec":
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "CohortSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def expected_windows(self, window_s: float = 2.0) -> dict[FineLabel, int]:
        """Window counts implied by the schedules on a grid anchored at t=0."""
        counts = {lab: 0 for lab in FINE_LABELS}
        for p in self.participants:
            t = 0.0
            for label, dur in p.schedule:
                first = int(np.ceil(t / window_s - 1e-9))
                last = int(np.floor((t + dur) / window_s + 1e-9))
                counts[label] += max(0, last - first)
                t += dur
        return counts


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _render(model: SensorModel, tau, duration, freq, scale, offset, phi, rng):
    g0 = np.asarray(model.gravity)
    if model.gravity_end is None:
        out = np.broadcast_to(g0, (tau.size, 3)).copy()
    else:
        w = _smoothstep(tau / duration)[:, None]
        out = g0 + (np.asarray(model.gravity_end) - g0) * w
    out += offset
    amp = np.asarray(model.amplitude) * scale
    if freq > 0 and np.any(amp):
        arg = 2 * np.pi * freq * tau[:, None] + np.asarray(model.phase) + phi
        out += amp * np.sin(arg)
    noise = np.asarray(model.noise_std)
    out += rng.standard_normal((tau.size, 3)) * noise
    return out


def simulate_cohort(spec: CohortSpec, seed: int) -> list[RecordingSession]:
    """Render every participant's schedule into a synchronized session.

    Streams start at t = 0 and the annotation track tiles the schedule
    back to back. Output is a pure function of ``(spec, seed)``.
    """
    if not isinstance(spec, CohortSpec):
        raise ConfigError("spec must be a CohortSpec")
    sessions = []
    for idx, part in enumerate(spec.participants):
        rng = np.random.default_rng([int(seed), idx])
        scale = 1.0 + spec.amplitude_jitter * rng.uniform(-1.0, 1.0)
        fscale = 1.0 + spec.frequency_jitter * rng.uniform(-1.0, 1.0)
        offsets = {s: rng.normal(0.0, spec.orientation_jitter, 3) if spec.orientation_jitter > 0
                   else np.zeros(3) for s in (Sensor.UPPER_THIGH, Sensor.LOWER_BACK)}

        intervals = []
        t = 0.0
        for label, dur in part.schedule:
            intervals.append(Interval(t, t + dur, label))
            t += dur
        total = t

        streams = {}
        for sensor, rate in ((Sensor.UPPER_THIGH, spec.thigh_rate_hz),
                             (Sensor.LOWER_BACK, spec.back_rate_hz)):
            n = int(round(total * rate))
            streams[sensor] = (rate, np.empty((n, 3)), np.arange(n) / rate)

        for iv in intervals:
            model = spec.activities[iv.label]
            phi = rng.uniform(0.0, 2 * np.pi)
            for sensor, smodel in ((Sensor.UPPER_THIGH, model.thigh),
                                   (Sensor.LOWER_BACK, model.back)):
                rate, buf, times = streams[sensor]
                i0 = int(np.ceil(iv.start * rate - 1e-9))
                i1 = min(buf.shape[0], int(np.ceil(iv.end * rate - 1e-9)))
                tau = times[i0:i1] - iv.start
                buf[i0:i1] = _render(smodel, tau, iv.duration, model.frequency_hz * fscale,
                                     scale, offsets[sensor], phi, rng)

        sessions.append(RecordingSession(
            participant_id=part.participant_id,
            thigh=TriaxialSeries(Sensor.UPPER_THIGH, spec.thigh_rate_hz, streams[Sensor.UPPER_THIGH][1]),
            back=TriaxialSeries(Sensor.LOWER_BACK, spec.back_rate_hz, streams[Sensor.LOWER_BACK][1]),
            annotations=AnnotationTrack(tuple(intervals)),
        ))
    return sessions


# ---------------------------------------------------------------------------
# Ready-made cohorts
# ---------------------------------------------------------------------------

# window counts per fine activity in the study dataset
STUDY_WINDOWS = {
    FineLabel.WALKING: 2244,
    FineLabel.STANDING: 3258,
    FineLabel.SITTING: 20677,
    FineLabel.SUPINE: 929,
    FineLabel.LEFT_LATERAL: 300,
    FineLabel.RIGHT_LATERAL: 311,
    FineLabel.SIT_TO_STAND: 178,
    FineLabel.STAND_TO_SIT: 163,
    FineLabel.SIT_TO_LIE: 35,
    FineLabel.LIE_TO_SIT: 41,
}

# coarse class shares (percent) as reported alongside those counts
STUDY_COARSE_PERCENT = {
    CoarseLabel.WALK: 8.0,
    CoarseLabel.STAND: 11.6,
    CoarseLabel.SIT: 73.5,
    CoarseLabel.LIE_DOWN: 5.5,
    CoarseLabel.TRANSFER: 1.4,
}

_UT_STAND = (-0.98, 0.05, 0.15)
_UT_SIT = (-0.10, 0.05, 0.99)
_UT_LIE = (0.20, 0.05, 0.97)
_UT_LEFT = (0.15, 0.70, 0.70)
_UT_RIGHT = (0.15, -0.70, 0.70)
_LB_UPRIGHT = (-0.99, 0.02, 0.10)
_LB_SIT = (-0.90, 0.02, 0.42)
_LB_SUPINE = (0.02, 0.02, 0.99)
_LB_LEFT = (0.02, 0.98, 0.10)
_LB_RIGHT = (0.02, -0.98, 0.10)


def default_activity_models(noise: float = 0.01) -> dict[FineLabel, ActivityModel]:
    """Plausible posture orientations, a gait oscillation and transfer ramps."""
    n3 = (noise, noise, noise)

    def static(ut, lb):
        return ActivityModel(SensorModel(ut, noise_std=n3), SensorModel(lb, noise_std=n3))

    def ramp(ut0, ut1, lb0, lb1):
        return ActivityModel(
            SensorModel(ut0, ut1, amplitude=(0.05, 0.02, 0.05), noise_std=n3),
            SensorModel(lb0, lb1, amplitude=(0.05, 0.02, 0.05), noise_std=n3),
            frequency_hz=0.5,
        )

    return {
        FineLabel.WALKING: ActivityModel(
            SensorModel(_UT_STAND, amplitude=(0.30, 0.08, 0.25), phase=(0.0, 1.2, 1.6),
                        noise_std=(2 * noise,) * 3),
            SensorModel(_LB_UPRIGHT, amplitude=(0.15, 0.06, 0.10), phase=(0.0, 0.7, 2.0),
                        noise_std=(2 * noise,) * 3),
            frequency_hz=0.9,
        ),
        FineLabel.STANDING: static(_UT_STAND, _LB_UPRIGHT),
        FineLabel.SITTING: static(_UT_SIT, _LB_SIT),
        FineLabel.SUPINE: static(_UT_LIE, _LB_SUPINE),
        FineLabel.LEFT_LATERAL: static(_UT_LEFT, _LB_LEFT),
        FineLabel.RIGHT_LATERAL: static(_UT_RIGHT, _LB_RIGHT),
        FineLabel.SIT_TO_STAND: ramp(_UT_SIT, _UT_STAND, _LB_SIT, _LB_UPRIGHT),
        FineLabel.STAND_TO_SIT: ramp(_UT_STAND, _UT_SIT, _LB_UPRIGHT, _LB_SIT),
        FineLabel.SIT_TO_LIE: ramp(_UT_SIT, _UT_LIE, _LB_SIT, _LB_SUPINE),
        FineLabel.LIE_TO_SIT: ramp(_UT_LIE, _UT_SIT, _LB_SUPINE, _LB_SIT),
    }


def _largest_remainder(total: int, weights: dict) -> dict:
    keys = list(weights)
    w = np.array([weights[k] for k in keys], dtype=float)
    raw = total * w / w.sum()
    base = np.floor(raw).astype(int)
    short = total - base.sum()
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return dict(zip(keys, base.tolist()))


def study_window_targets(total_windows: int) -> dict[FineLabel, int]:
    """Fine window counts with the reported coarse shares and within-class mix."""
    coarse_totals = _largest_remainder(total_windows, STUDY_COARSE_PERCENT)
    targets = {}
    for coarse, n in coarse_totals.items():
        members = {f: c for f, c in STUDY_WINDOWS.items() if to_coarse(f) is coarse}
        targets.update(_largest_remainder(n, members))
    return targets


# within-session ordering; transfers sit between the postures they connect
_SESSION_ORDER = (
    (FineLabel.SITTING, 0.4),
    (FineLabel.SIT_TO_STAND, None),
    (FineLabel.STANDING, 0.5),
    (FineLabel.WALKING, None),
    (FineLabel.STANDING, 0.5),
    (FineLabel.STAND_TO_SIT, None),
    (FineLabel.SITTING, 0.3),
    (FineLabel.SIT_TO_LIE, None),
    (FineLabel.SUPINE, None),
    (FineLabel.LEFT_LATERAL, None),
    (FineLabel.RIGHT_LATERAL, None),
    (FineLabel.LIE_TO_SIT, None),
    (FineLabel.SITTING, 0.3),
)


def study_cohort(n_participants: int = 24, windows_per_participant: int = 100,
                  window_s: float = 2.0, noise: float = 0.01) -> CohortSpec:
    """Cohort whose activity mix follows the study's class imbalance.

    Window totals per activity are spread over participants round-robin;
    lateral lying postures, like in the study, occur for few participants.
    Durations are multiples of ``window_s`` so every scheduled window
    survives segmentation.
    """
    if n_participants < 1 or windows_per_participant < 1:
        raise ConfigError("need at least one participant and one window per participant")
    targets = study_window_targets(n_participants * windows_per_participant)
    per_part = {i: {} for i in range(n_participants)}
    cursor = 0
    for label in FINE_LABELS:
        total = targets[label]
        if label in (FineLabel.LEFT_LATERAL, FineLabel.RIGHT_LATERAL):
            k = max(1, min(n_participants, int(np.ceil(n_participants * (5 if label is FineLabel.LEFT_LATERAL else 2) / 24))))
        else:
            k = n_participants
        k = max(1, min(k, total)) if total else 0
        share = _largest_remainder(total, {j: 1.0 for j in range(k)}) if k else {}
        for j, c in share.items():
            per_part[(cursor + j) % n_participants][label] = c
        cursor += max(k, 1)

    portions = {}
    for label, frac in _SESSION_ORDER:
        if frac is not None:
            portions.setdefault(label, []).append(frac)

    participants = []
    for i in range(n_participants):
        counts = per_part[i]
        splits = {lab: list(_largest_remainder(counts.get(lab, 0), dict(enumerate(fr))).values())
                  for lab, fr in portions.items()}
        schedule = []
        for label, frac in _SESSION_ORDER:
            c = splits[label].pop(0) if frac is not None else counts.get(label, 0)
            if c <= 0:
                continue
            if schedule and schedule[-1][0] is label:
                schedule[-1] = (label, schedule[-1][1] + c * window_s)
            else:
                schedule.append((label, c * window_s))
        participants.append(ParticipantSpec(f"P{i + 1:02d}", schedule))
    return CohortSpec(participants, default_activity_models(noise))


# oscillation amplitude of the thigh x axis per activity; coarse classes are
# contiguous bands separated by a factor of two or more
PLANTED_AMPLITUDE = {
    FineLabel.SITTING: 0.05,
    FineLabel.STANDING: 0.12,
    FineLabel.WALKING: 0.30,
    FineLabel.SUPINE: 0.70,
    FineLabel.LEFT_LATERAL: 0.80,
    FineLabel.RIGHT_LATERAL: 0.90,
    FineLabel.SIT_TO_STAND: 2.00,
    FineLabel.STAND_TO_SIT: 2.20,
    FineLabel.SIT_TO_LIE: 2.40,
    FineLabel.LIE_TO_SIT: 2.60,
}

# the only features whose class-conditional distributions differ
PLANTED_FEATURES = ("std_x_ut", "rms_x_ut", "min_x_ut", "max_x_ut", "iqr_x_ut", "svm_ut")


def planted_cohort(n_participants: int = 24, windows_per_class: int = 3,
                   frequency_hz: float = 1.0, noise: float = 0.02,
                   relative_noise: float = 0.05, orientation_jitter: float = 0.0) -> CohortSpec:
    """Cohort in which a single latent factor separates the activities.

    Every activity shares the same orientation and noise on all channels
    except the thigh x axis, which carries a 1 Hz oscillation whose
    amplitude depends on the activity (noise on that axis scales with the
    amplitude). The oscillation completes whole cycles within each 2 s
    window, so the scale-free features of that axis (mean, skewness,
    kurtosis, mean-crossing rate, correlations) do not depend on the
    activity. Only the six features in :data:`PLANTED_FEATURES` carry class
    structure.

    Transfers are scheduled as 2 s intervals and walking as one contiguous
    block so every activity has the same number of windows per participant.
    Participants differ only in amplitude by default; per-participant sensor
    offsets (``orientation_jitter``) interact with DTW averaging and give
    the averaged noise channels activity-dependent statistics.
    """
    if windows_per_class < 2:
        raise ConfigError("windows_per_class must be at least 2 (walking needs consecutive pairs)")
    n3 = (noise, noise, noise)
    activities = {}
    for label, amp in PLANTED_AMPLITUDE.items():
        activities[label] = ActivityModel(
            SensorModel((0.0, 0.0, 1.0), amplitude=(amp, 0.0, 0.0),
                        noise_std=(relative_noise * amp, noise, noise)),
            SensorModel((-1.0, 0.0, 0.0), noise_std=n3),
            frequency_hz=frequency_hz,
        )
    w = 2.0
    cycle = (FineLabel.STANDING, FineLabel.SIT_TO_STAND, FineLabel.SITTING, FineLabel.STAND_TO_SIT,
             FineLabel.SUPINE, FineLabel.SIT_TO_LIE, FineLabel.LEFT_LATERAL, FineLabel.LIE_TO_SIT,
             FineLabel.RIGHT_LATERAL)
    participants = []
    for i in range(n_participants):
        schedule = [(FineLabel.WALKING, windows_per_class * w)]
        for _ in range(windows_per_class):
            schedule.extend((lab, w) for lab in cycle)
        participants.append(ParticipantSpec(f"P{i + 1:02d}", schedule))
    return CohortSpec(participants, activities, amplitude_jitter=0.1,
                      frequency_jitter=0.0, orientation_jitter=orientation_jitter)
