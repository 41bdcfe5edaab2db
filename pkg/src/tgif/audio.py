"""Deterministic waveform math: power, convolution, ratio gains, SI-SDR metrics.

All functions are pure, operate on :class:`AudioClip`, and compute in double
precision regardless of what precision a model trains in, so they can serve
as oracles for everything downstream.

Conventions:

* ``power`` is the mean-square amplitude (length-independent, so ratio math
  does not care about clip length).
* SI-SDR follows the projection form: ``alpha = <est, ref> / ||ref||^2``,
  ``SI-SDR = 10 log10(||alpha ref||^2 / ||alpha ref - est||^2)``. No mean
  subtraction is applied.
* Metrics that would be infinite (zero residual) return ``math.inf``;
  aggregation layers clamp with :func:`clamp_db` before averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    BadInputError,
    EmptySignalError,
    OrthogonalEstimateError,
    RateMismatchError,
    SilentSourceError,
)

#: Default sample rate of the framework (assets at other rates are rejected
#: at ingestion; there is no resampling).
DEFAULT_SAMPLE_RATE = 16000

#: dB value standing in for +/- infinity when metrics are aggregated.
DB_CLAMP = 60.0


@dataclass
class AudioClip:
    """A mono waveform with its sample rate and an opaque source identity.

    ``samples`` is always stored as a float64 1-D array and must be finite.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    source_id: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise BadInputError(f"expected mono 1-D samples, got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise BadInputError("samples contain NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise BadInputError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, gain: float, source_id: str | None = None) -> "AudioClip":
        return AudioClip(
            self.samples * float(gain),
            self.sample_rate,
            self.source_id if source_id is None else source_id,
        )


def _require_same_rate(*clips: AudioClip) -> None:
    rates = {c.sample_rate for c in clips}
    if len(rates) > 1:
        raise RateMismatchError(f"sample rates differ: {sorted(rates)}")


def _require_same_length(a: AudioClip, b: AudioClip) -> None:
    if len(a) != len(b):
        raise BadInputError(f"length mismatch: {len(a)} vs {len(b)}")


def mean_square(samples: np.ndarray) -> float:
    """Mean-square amplitude of a raw sample array (0.0 for empty input)."""
    if samples.size == 0:
        return 0.0
    return float(np.mean(np.square(samples, dtype=np.float64)))


def power(clip: AudioClip) -> float:
    """Mean-square amplitude of a clip. Raises on empty input."""
    if len(clip) == 0:
        raise EmptySignalError(f"empty clip {clip.source_id!r}")
    return mean_square(clip.samples)


def convolve_rir(signal: AudioClip, rir: AudioClip) -> AudioClip:
    """Linear convolution of ``signal`` with an impulse-response kernel,
    truncated to the length of ``signal`` so all streams in a mixture stay
    sample-aligned."""
    _require_same_rate(signal, rir)
    if len(rir) == 0:
        raise EmptySignalError("empty impulse response")
    if len(signal) == 0:
        raise EmptySignalError("empty signal")
    out = fftconvolve(signal.samples, rir.samples, mode="full")[: len(signal)]
    return AudioClip(out, signal.sample_rate, signal.source_id)


def gain_for_ratio(reference: AudioClip, adjustable: AudioClip, ratio_db: float) -> float:
    """Scalar gain g such that power(reference) / power(g * adjustable)
    equals ``ratio_db`` exactly (in dB)."""
    p_ref = power(reference)
    p_adj = power(adjustable)
    if p_ref == 0.0:
        raise SilentSourceError(f"silent reference {reference.source_id!r}")
    if p_adj == 0.0:
        raise SilentSourceError(f"silent source {adjustable.source_id!r}")
    return math.sqrt(p_ref / (p_adj * 10.0 ** (ratio_db / 10.0)))


def si_sdr(estimate: AudioClip, reference: AudioClip) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Returns ``math.inf`` when the projection residual is exactly zero
    (perfect reconstruction up to scale).
    """
    _require_same_rate(estimate, reference)
    _require_same_length(estimate, reference)
    e = estimate.samples
    r = reference.samples
    ref_energy = float(np.dot(r, r))
    if ref_energy == 0.0:
        raise SilentSourceError(f"silent reference {reference.source_id!r}")
    dot = float(np.dot(e, r))
    if dot == 0.0:
        raise OrthogonalEstimateError("estimate orthogonal to reference; projected target has zero energy")
    alpha = dot / ref_energy
    target_energy = alpha * alpha * ref_energy
    residual = alpha * r - e
    residual_energy = float(np.dot(residual, residual))
    if residual_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(target_energy / residual_energy)


def si_sdr_improvement(estimate: AudioClip, mixture: AudioClip, reference: AudioClip) -> float:
    """SI-SDR of the estimate minus SI-SDR of the unprocessed mixture,
    both against the same reference."""
    out_db = si_sdr(estimate, reference)
    in_db = si_sdr(mixture, reference)
    if out_db == in_db:
        # Covers the identity system and the doubly-infinite corner.
        return 0.0
    return out_db - in_db


def input_sdr(mixture: AudioClip, dry_target: AudioClip) -> float:
    """Non-scale-invariant SDR of the raw mixture: dry-target energy over
    the energy of (mixture - dry target)."""
    _require_same_rate(mixture, dry_target)
    _require_same_length(mixture, dry_target)
    s = dry_target.samples
    sig_energy = float(np.dot(s, s))
    if sig_energy == 0.0:
        raise SilentSourceError(f"silent target {dry_target.source_id!r}")
    d = mixture.samples - s
    dist_energy = float(np.dot(d, d))
    if dist_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(sig_energy / dist_energy)


def clamp_db(value: float, limit: float = DB_CLAMP) -> float:
    """Clamp a dB value (including +/- inf sentinels) to [-limit, +limit]
    so that means over record sets stay finite."""
    if value > limit:
        return limit
    if value < -limit:
        return -limit
    return float(value)
