"""Poke at the two extractor architectures.

Run:  python demos/03_models.py
"""

import numpy as np
import torch

from tgif.audio import AudioClip
from tgif.models import (
    StudentConfig,
    StudentExtractor,
    TeacherConfig,
    TeacherExtractor,
    parameter_count,
)
from tgif.models.inference import extract, speaker_embedding

torch.manual_seed(0)
rng = np.random.default_rng(0)
SR = 8000

print("=== capacity ladder ===")
teacher = TeacherExtractor(TeacherConfig())
for h in (64, 128, 256):
    student = StudentExtractor(StudentConfig(hidden_size=h))
    print(f"student h={h:<4d} {parameter_count(student):>9,d} params")
print(f"teacher      {parameter_count(teacher):>9,d} params "
      f"(shared twin multi-scale encoders, FiLM-injected separator)")

print("\n=== shape contract: estimate length == mixture length ===")
student = StudentExtractor(StudentConfig(hidden_size=32, inventory_size=8))
for t in (333, 8000, 48000):
    est, logits = student(torch.randn(1, t), torch.randn(1, 4000))
    print(f"mixture {t:>6d} samples -> estimate {est.shape[-1]:>6d}, logits {tuple(logits.shape)}")

print("\n=== enrollment conditioning ===")
mixture = AudioClip(rng.standard_normal(2 * SR), SR, "mix")
enroll_a = AudioClip(rng.standard_normal(SR), SR, "speaker A")
enroll_b = AudioClip(rng.standard_normal(SR), SR, "speaker B")
est_a, _ = extract(student, mixture, enroll_a)
est_b, _ = extract(student, mixture, enroll_b)
diff = np.max(np.abs(est_a.samples - est_b.samples))
print(f"same mixture, two enrollments: max |estimate difference| = {diff:.4f}")

emb = speaker_embedding(student, enroll_a)
print(f"speaker embedding: dim {emb.shape[0]}, finite={np.all(np.isfinite(emb))}")

print("\n=== teacher twin encoders share storage ===")
print("mixture encoder is the enrollment encoder:",
      teacher.enroll_encoders is teacher.encoders)
ests, _ = teacher.forward_all_scales(torch.randn(1, 1000), torch.randn(1, 1000))
print(f"{len(ests)} decoder scales exist; training consumes the finest one")
