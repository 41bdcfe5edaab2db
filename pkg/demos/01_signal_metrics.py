"""Walk through the waveform math that everything else builds on.

Run:  python demos/01_signal_metrics.py
"""

import numpy as np

from tgif.audio import (
    AudioClip,
    convolve_rir,
    gain_for_ratio,
    input_sdr,
    power,
    si_sdr,
    si_sdr_improvement,
)

rng = np.random.default_rng(0)
SR = 16000

print("=== power is the mean-square amplitude ===")
square_wave = AudioClip(np.tile([1.0, -1.0], 100), SR)
print(f"unit square wave: power = {power(square_wave):.3f}")

print("\n=== solving a gain for an exact level ratio ===")
target = AudioClip(rng.standard_normal(SR), SR, "target")
noise = AudioClip(0.3 * rng.standard_normal(SR), SR, "noise")
for want_db in (-5.0, 0.0, 10.0):
    g = gain_for_ratio(target, noise, want_db)
    got = 10 * np.log10(power(target) / power(noise.scaled(g)))
    print(f"requested {want_db:+6.2f} dB -> gain {g:.4f} -> measured {got:+6.2f} dB")

print("\n=== reverberation by convolution, truncated to the input length ===")
t = np.arange(int(0.2 * SR)) / SR
rir = AudioClip(np.exp(-t / 0.05) * rng.standard_normal(t.size), SR, "rir")
reverberant = convolve_rir(target, rir)
print(f"dry {len(target)} samples -> reverberant {len(reverberant)} samples (same)")

print("\n=== the SI-SDR family ===")
estimate = AudioClip(target.samples + 0.2 * rng.standard_normal(SR), SR)
mixture = AudioClip(target.samples + noise.samples, SR)
print(f"si_sdr(estimate, target)          = {si_sdr(estimate, target):+7.2f} dB")
print(f"si_sdr(2.5 * estimate, target)    = {si_sdr(estimate.scaled(2.5), target):+7.2f} dB  (scale-invariant)")
print(f"si_sdr(estimate == target)        = {si_sdr(target, target)}  (perfect reconstruction)")
print(f"si_sdr_improvement over mixture   = {si_sdr_improvement(estimate, mixture, target):+7.2f} dB")
print(f"input_sdr(mixture, target)        = {input_sdr(mixture, target):+7.2f} dB")
print(f"input_sdr(2 * mixture, target)    = {input_sdr(mixture.scaled(2.0), target):+7.2f} dB  (NOT scale-invariant)")
