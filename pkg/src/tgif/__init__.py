"""Talker group-informed familiarization of target-speaker extraction.

A desk-scale framework that synthesizes noisy reverberant multi-talker
mixtures, pretrains generalist teacher/student extraction models, adapts the
student to a small fixed talker group by distilling the teacher's pseudo
targets, and reports SI-SDR-based results.
"""

from .audio import (
    DEFAULT_SAMPLE_RATE,
    AudioClip,
    clamp_db,
    convolve_rir,
    gain_for_ratio,
    input_sdr,
    power,
    si_sdr,
    si_sdr_improvement,
)

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "AudioClip",
    "clamp_db",
    "convolve_rir",
    "gain_for_ratio",
    "input_sdr",
    "power",
    "si_sdr",
    "si_sdr_improvement",
]

__version__ = "0.1.0"
