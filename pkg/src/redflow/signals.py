"""Time-series containers and the signal transforms shared by the pipeline.

Everything downstream (decoding, information rates, reports) consumes the
types defined here: a single named channel (:class:`TimeSeries`), an aligned
set of channels for one trial (:class:`MultichannelRecording`), and a lag
range (:class:`LagWindow`). All values are immutable after construction and
safe for concurrent read-only use.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, hilbert, sosfilt

from .errors import (
    DataError,
    InvalidRate,
    ShapeMismatch,
    UnknownChannel,
    WindowTooLarge,
    ZeroVarianceSignal,
)

CONDITIONS = ("attended", "distractor", "unlabeled")

#: Left-temporal electrode subset in the extended 10-20 64-channel layout,
#: used as the default channel selection for rate analysis.
LEFT_TEMPORAL_LABELS = ("FT7", "T7", "TP7", "CP5", "FC5", "C5")


def _as_samples(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch("samples must be finite (no NaN/Inf)")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """One uniformly sampled real-valued sequence.

    Parameters
    ----------
    label : str
        Channel or signal name.
    rate_hz : float
        Sampling rate in samples per second, > 0.
    samples : array_like
        Finite real values; stored as a read-only float64 array.
    """

    label: str
    rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise InvalidRate(f"rate_hz must be > 0, got {self.rate_hz}")
        object.__setattr__(self, "samples", _as_samples(self.samples))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TimeSeries)
            and self.label == other.label
            and self.rate_hz == other.rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    def with_samples(self, samples, label: str | None = None) -> "TimeSeries":
        """Same rate and (by default) label, new sample values."""
        return TimeSeries(self.label if label is None else label, self.rate_hz, samples)


@dataclass(frozen=True, eq=False)
class MultichannelRecording:
    """Aligned set of channels for one trial.

    All channels must share the sampling rate and length, and labels must be
    unique. ``condition`` is one of ``attended``, ``distractor``,
    ``unlabeled``.
    """

    channels: tuple
    subject_id: str = ""
    trial_id: str = ""
    condition: str = "unlabeled"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ShapeMismatch("recording needs at least one channel")
        if self.condition not in CONDITIONS:
            raise ShapeMismatch(
                f"condition must be one of {CONDITIONS}, got {self.condition!r}"
            )
        rate = self.channels[0].rate_hz
        n = len(self.channels[0])
        for ch in self.channels:
            if ch.rate_hz != rate or len(ch) != n:
                raise ShapeMismatch(
                    f"channel {ch.label!r} does not match rate/length of the first channel"
                )
        labels = [ch.label for ch in self.channels]
        if len(set(labels)) != len(labels):
            raise ShapeMismatch(f"channel labels must be unique, got {labels}")

    @property
    def labels(self) -> tuple:
        return tuple(ch.label for ch in self.channels)

    @property
    def rate_hz(self) -> float:
        return self.channels[0].rate_hz

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    def channel(self, label: str) -> TimeSeries:
        for ch in self.channels:
            if ch.label == label:
                return ch
        raise UnknownChannel(label)

    def to_array(self) -> np.ndarray:
        """Samples as an (n_samples, n_channels) array, channel order preserved."""
        return np.column_stack([ch.samples for ch in self.channels])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultichannelRecording)
            and self.subject_id == other.subject_id
            and self.trial_id == other.trial_id
            and self.condition == other.condition
            and self.channels == other.channels
        )


@dataclass(frozen=True)
class LagWindow:
    """Inclusive sample-lag range [tau_min, tau_max]; negative lags look back."""

    tau_min: int
    tau_max: int

    def __post_init__(self):
        if self.tau_min > self.tau_max:
            raise ShapeMismatch(
                f"tau_min ({self.tau_min}) must be <= tau_max ({self.tau_max})"
            )

    @property
    def n_lags(self) -> int:
        return self.tau_max - self.tau_min + 1


def normalize(x: TimeSeries) -> TimeSeries:
    """Shift and scale to zero mean and unit population variance.

    The population convention (divide by n) is used so that for two
    normalized series a, b the identity mean((a-b)^2)/2 == 1 - pearson(a, b)
    holds exactly.

    Raises
    ------
    ZeroVarianceSignal
        If the input is constant.
    """
    if len(x) < 2:
        raise ShapeMismatch("normalize needs at least 2 samples")
    mu = float(np.mean(x.samples))
    var = float(np.mean((x.samples - mu) ** 2))
    if var <= 0.0:
        raise ZeroVarianceSignal(f"signal {x.label!r} is constant")
    return x.with_samples((x.samples - mu) / np.sqrt(var))


def extract_envelope(
    audio: TimeSeries, target_rate_hz: float, compression: float = 1.0
) -> TimeSeries:
    """Temporal envelope of a signal, resampled to ``target_rate_hz``.

    Pipeline: magnitude of the analytic signal (frequency-domain Hilbert
    transform), causal 4th-order Butterworth low-pass at ``target_rate_hz/2``
    applied as cascaded biquads, clip at zero, optional power-law compression
    ``env ** compression``, then integer-factor decimation. Timestamps refer
    to the first retained sample; no fractional-delay compensation is applied.

    Parameters
    ----------
    audio : TimeSeries
        Input signal; its rate must be an integer multiple of the target and
        at least twice the target.
    target_rate_hz : float
        Output sampling rate.
    compression : float
        Power-law exponent applied to the nonnegative envelope (1.0 = linear).

    Raises
    ------
    InvalidRate
        If ``target_rate_hz`` exceeds half the input rate, or the input rate
        is not an integer multiple of the target.
    """
    if target_rate_hz <= 0:
        raise InvalidRate(f"target rate must be > 0, got {target_rate_hz}")
    if audio.rate_hz < 2.0 * target_rate_hz:
        raise InvalidRate(
            f"input rate {audio.rate_hz} Hz must be >= 2x target {target_rate_hz} Hz"
        )
    factor = audio.rate_hz / target_rate_hz
    if abs(factor - round(factor)) > 1e-9:
        raise InvalidRate(
            f"input rate {audio.rate_hz} Hz is not an integer multiple of "
            f"target {target_rate_hz} Hz"
        )
    factor = int(round(factor))

    env = np.abs(hilbert(audio.samples))
    sos = butter(4, target_rate_hz / 2.0, btype="low", fs=audio.rate_hz, output="sos")
    env = sosfilt(sos, env)
    env = np.maximum(env, 0.0)
    if compression != 1.0:
        env = env**compression
    return TimeSeries(audio.label, float(target_rate_hz), env[::factor])


def lag_valid_slice(n: int, w: LagWindow) -> slice:
    """Row range of the original series for which every lag in ``w`` is in bounds."""
    lo = max(0, -w.tau_min)
    hi = n - 1 - max(0, w.tau_max)
    if hi < lo:
        raise WindowTooLarge(
            f"window [{w.tau_min}, {w.tau_max}] leaves no valid rows for length {n}"
        )
    return slice(lo, hi + 1)


def lag_embed(x: TimeSeries, w: LagWindow) -> np.ndarray:
    """Lagged design matrix of a series.

    Row i, column k holds ``x`` at time ``t_i + tau_min + k`` where ``t_i``
    runs over the indices for which every lag stays inside the series
    (truncation convention; no zero padding). Column count is
    ``w.n_lags``.

    Raises
    ------
    WindowTooLarge
        If no valid rows remain.
    """
    return _lag_embed_array(x.samples, w)


def _lag_embed_array(samples: np.ndarray, w: LagWindow) -> np.ndarray:
    n = samples.size
    sl = lag_valid_slice(n, w)
    m = sl.stop - sl.start
    out = np.empty((m, w.n_lags), dtype=np.float64)
    for k in range(w.n_lags):
        start = sl.start + w.tau_min + k
        out[:, k] = samples[start : start + m]
    return out


def select_channels(r: MultichannelRecording, labels) -> MultichannelRecording:
    """Subset and reorder channels by label.

    Output channel order follows the requested order; all other metadata is
    preserved.

    Raises
    ------
    UnknownChannel
        Naming the first requested label that is absent.
    """
    by_label = {ch.label: ch for ch in r.channels}
    picked = []
    for lab in labels:
        if lab not in by_label:
            raise UnknownChannel(lab)
        picked.append(by_label[lab])
    return MultichannelRecording(
        channels=tuple(picked),
        subject_id=r.subject_id,
        trial_id=r.trial_id,
        condition=r.condition,
    )


# ---------------------------------------------------------------------------
# CSV + JSON-sidecar recording files
# ---------------------------------------------------------------------------

def write_recording(r: MultichannelRecording, csv_path, extra_meta: dict | None = None) -> None:
    """Write one recording as CSV plus a JSON metadata sidecar.

    CSV layout: header row ``t,<label>,...``; first column is time in
    seconds, remaining columns one per channel. The sidecar (same path with
    ``.json``) carries ``subject_id``, ``trial_id``, ``condition``,
    ``rate_hz``, plus any ``extra_meta`` entries.
    """
    csv_path = Path(csv_path)
    data = r.to_array()
    t = np.arange(r.n_samples) / r.rate_hz
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *r.labels])
        for i in range(r.n_samples):
            writer.writerow([repr(float(t[i]))] + [repr(float(v)) for v in data[i]])
    meta = dict(extra_meta or {})
    meta.update(
        subject_id=r.subject_id,
        trial_id=r.trial_id,
        condition=r.condition,
        rate_hz=r.rate_hz,
    )
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_recording(csv_path) -> MultichannelRecording:
    """Read a recording written by :func:`write_recording`.

    Raises
    ------
    DataError
        If the CSV or its JSON sidecar is missing or malformed.
    """
    csv_path = Path(csv_path)
    meta_path = csv_path.with_suffix(".json")
    if not csv_path.exists():
        raise DataError(f"recording file not found: {csv_path}")
    if not meta_path.exists():
        raise DataError(f"metadata sidecar not found: {meta_path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    for key in ("subject_id", "trial_id", "condition", "rate_hz"):
        if key not in meta:
            raise DataError(f"{meta_path}: missing metadata key {key!r}")
    with open(csv_path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if not rows:
        raise DataError(f"{csv_path}: empty file")
    header = rows[0]
    if not header or header[0] != "t":
        raise DataError(f"{csv_path}: first column must be 't', got {header[:1]}")
    labels = header[1:]
    if not labels:
        raise DataError(f"{csv_path}: no channel columns")
    try:
        values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{csv_path}: non-numeric value ({exc})") from exc
    if values.ndim != 2 or values.shape[1] != len(labels):
        raise DataError(f"{csv_path}: ragged rows")
    rate = float(meta["rate_hz"])
    channels = tuple(
        TimeSeries(lab, rate, values[:, j]) for j, lab in enumerate(labels)
    )
    return MultichannelRecording(
        channels=channels,
        subject_id=str(meta["subject_id"]),
        trial_id=str(meta["trial_id"]),
        condition=str(meta["condition"]),
    )
