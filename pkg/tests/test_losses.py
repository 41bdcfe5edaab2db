import math

import numpy as np
import pytest
import torch

from tgif.audio import AudioClip, si_sdr
from tgif.errors import BadLabelError, ConfigError, SilentSourceError
from tgif.losses import LossConfig, loss_ce, loss_mtl, loss_si_sdr


def t64(x):
    return torch.tensor(x, dtype=torch.float64)


class TestLossSiSdr:
    def test_perfect_reconstruction_clamped(self):
        x = t64(np.random.default_rng(0).standard_normal(64))
        assert loss_si_sdr(x, x).item() == -60.0

    def test_matches_metric_oracle(self):
        assert loss_si_sdr(t64([1.0, 1.0]), t64([1.0, 0.0])).item() == pytest.approx(0.0, abs=1e-9)

    def test_matches_metric_on_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            ref = rng.standard_normal(200)
            est = ref + rng.uniform(0.1, 2.0) * rng.standard_normal(200)
            expected = -si_sdr(AudioClip(est, 8000), AudioClip(ref, 8000))
            got = loss_si_sdr(t64(est), t64(ref)).item()
            assert got == pytest.approx(expected, abs=1e-6)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for trial in range(5):
            ref = t64(rng.standard_normal(48))
            est = t64(ref.numpy() + 0.5 * rng.standard_normal(48)).requires_grad_(True)
            loss = loss_si_sdr(est, ref)
            loss.backward()
            grad = est.grad.clone()
            h = 1e-6
            for i in rng.integers(0, 48, size=4):
                e_plus = est.detach().clone()
                e_plus[i] += h
                e_minus = est.detach().clone()
                e_minus[i] -= h
                fd = (loss_si_sdr(e_plus, ref) - loss_si_sdr(e_minus, ref)).item() / (2 * h)
                assert abs(fd - grad[i].item()) / max(abs(fd), 1e-12) < 1e-4

    def test_batched_mean(self):
        rng = np.random.default_rng(3)
        ref = rng.standard_normal((4, 100))
        est = ref + rng.standard_normal((4, 100))
        per = loss_si_sdr(t64(est), t64(ref), reduction="none")
        assert per.shape == (4,)
        assert loss_si_sdr(t64(est), t64(ref)).item() == pytest.approx(per.mean().item())

    def test_silent_target(self):
        with pytest.raises(SilentSourceError):
            loss_si_sdr(t64([1.0, 2.0]), t64([0.0, 0.0]))


class TestLossCe:
    def test_uniform_logits(self):
        assert loss_ce(t64([0.0, 0.0, 0.0, 0.0]), 2).item() == pytest.approx(math.log(4), abs=1e-9)

    def test_confident_correct(self):
        logits = torch.zeros(4, dtype=torch.float64)
        logits[1] = 1e6
        assert loss_ce(logits, 1).item() == pytest.approx(0.0, abs=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        logits = t64(rng.standard_normal(6)).requires_grad_(True)
        loss = loss_ce(logits, 3)
        loss.backward()
        h = 1e-7
        for i in range(6):
            lp = logits.detach().clone()
            lp[i] += h
            lm = logits.detach().clone()
            lm[i] -= h
            fd = (loss_ce(lp, 3) - loss_ce(lm, 3)).item() / (2 * h)
            assert abs(fd - logits.grad[i].item()) / max(abs(fd), 1e-12) < 1e-6

    def test_out_of_range_label(self):
        with pytest.raises(BadLabelError):
            loss_ce(t64([0.0, 0.0]), 5)


class TestLossMtl:
    def test_gamma_zero_is_reconstruction_only(self):
        rng = np.random.default_rng(5)
        ref, est = t64(rng.standard_normal(80)), t64(rng.standard_normal(80))
        logits = t64(rng.standard_normal(4))
        cfg = LossConfig(gamma=0.0)
        assert loss_mtl(est, ref, logits, 0, cfg).item() == loss_si_sdr(est, ref).item()

    def test_gamma_half_composition(self):
        rng = np.random.default_rng(6)
        ref, est = t64(rng.standard_normal(80)), t64(rng.standard_normal(80))
        logits = t64(rng.standard_normal(4))
        cfg = LossConfig(gamma=0.5)
        expected = loss_si_sdr(est, ref).item() + 0.5 * loss_ce(logits, 1).item()
        assert loss_mtl(est, ref, logits, 1, cfg).item() == pytest.approx(expected, abs=1e-12)

    def test_gamma_one_sum(self):
        rng = np.random.default_rng(7)
        ref, est = t64(rng.standard_normal(64)), t64(rng.standard_normal(64))
        logits = t64(rng.standard_normal(3))
        si = loss_si_sdr(est, ref).item()
        ce = loss_ce(logits, 2).item()
        got = loss_mtl(est, ref, logits, 2, LossConfig(gamma=1.0)).item()
        assert got == pytest.approx(si + ce, abs=1e-12)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ConfigError):
            LossConfig(gamma=-0.1)

    def test_role_defaults(self):
        assert LossConfig.for_role("student").gamma == 0.0
        assert LossConfig.for_role("teacher").gamma == 0.5
