"""Training losses.

Pre-training regression mix (fixed): 10 * phase + 2 * envelope + 1 * spectrum.
Adversarial-stage regularizer (fixed): (60 * env + 30 * phase + 3 * spec) / 155.
Adversarial objectives are least-squares (real -> 1, fake -> 0) plus the
standard feature matching loss on discriminator hidden activations.

The three regression losses are deliberately isolated, one function each,
so any of them can be swapped out independently.
"""

from __future__ import annotations

import torch

PRETRAIN_PHASE, PRETRAIN_ENV, PRETRAIN_SPEC = 10.0, 2.0, 1.0
REG_ENV, REG_PHASE, REG_SPEC = 60.0 / 155.0, 30.0 / 155.0, 3.0 / 155.0

SPEC_RESOLUTIONS = ((512, 128), (1024, 256), (2048, 512))
ENV_FFT, ENV_HOP, ENV_BANDS = 320, 80, 16


def _stft(x: torch.Tensor, n_fft: int, hop: int) -> torch.Tensor:
    window = torch.hann_window(n_fft, device=x.device)
    return torch.stft(x, n_fft, hop_length=hop, window=window,
                      return_complex=True)


def spectral_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Multi-resolution log-magnitude L1."""
    total = x.new_zeros(())
    for n_fft, hop in SPEC_RESOLUTIONS:
        sx = torch.log(_stft(x, n_fft, hop).abs() + 1e-5)
        sy = torch.log(_stft(y, n_fft, hop).abs() + 1e-5)
        total = total + (sx - sy).abs().mean()
    return total / len(SPEC_RESOLUTIONS)


def _band_energies(x: torch.Tensor) -> torch.Tensor:
    s = _stft(x, ENV_FFT, ENV_HOP).abs().square()
    n_bins = (s.shape[-2] // ENV_BANDS) * ENV_BANDS   # drop the Nyquist bin
    s = s[..., :n_bins, :]
    return s.reshape(*s.shape[:-2], ENV_BANDS, -1, s.shape[-1]).sum(-2)


def envelope_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """L1 between per-band log energy envelopes."""
    bands_x, bands_y = _band_energies(x), _band_energies(y)
    return (torch.log(bands_x + 1e-5) - torch.log(bands_y + 1e-5)).abs().mean()


def phase_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Cosine phase distance, weighted by the reference magnitude so only
    bins that actually carry energy (voiced harmonics) contribute."""
    sx = _stft(x, ENV_FFT, ENV_HOP)
    sy = _stft(y, ENV_FFT, ENV_HOP)
    w = sx.abs().square()
    cos = (sx * sy.conj()).real / (sx.abs() * sy.abs() + 1e-9)
    return ((1.0 - cos) * w).sum() / w.sum().clamp_min(1e-9)


def pretrain_loss(x: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    return (PRETRAIN_PHASE * phase_loss(x, y_hat)
            + PRETRAIN_ENV * envelope_loss(x, y_hat)
            + PRETRAIN_SPEC * spectral_loss(x, y_hat))


def regularizer_loss(x: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    return (REG_ENV * envelope_loss(x, y_hat)
            + REG_PHASE * phase_loss(x, y_hat)
            + REG_SPEC * spectral_loss(x, y_hat))


# ---------------------------------------------------------------------------
# least-squares adversarial pieces
# ---------------------------------------------------------------------------

def generator_adversarial_term(d_fake: torch.Tensor) -> torch.Tensor:
    """E[(1 - D(fake))^2] for one discriminator."""
    return (1.0 - d_fake).square().mean()


def discriminator_loss(d_real: torch.Tensor, d_fake: torch.Tensor) -> torch.Tensor:
    """E[D(fake)^2 + (1 - D(real))^2] for one discriminator."""
    return d_fake.square().mean() + (1.0 - d_real).square().mean()


def feature_matching_loss(feats_real: list[torch.Tensor],
                          feats_fake: list[torch.Tensor]) -> torch.Tensor:
    """Mean of per-layer L1 distances between hidden activations."""
    total = feats_real[0].new_zeros(())
    for fr, ff in zip(feats_real, feats_fake):
        total = total + (fr - ff).abs().mean()
    return total / len(feats_real)


def generator_loss(bank, x: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    """Full adversarial-stage objective: mean over discriminators of the
    LSGAN term plus feature matching, plus the fixed regularizer mix."""
    adv = x.new_zeros(())
    for disc in bank:
        d_fake, feats_fake = disc(y_hat)
        with torch.no_grad():
            _, feats_real = disc(x)
        adv = adv + generator_adversarial_term(d_fake) \
            + feature_matching_loss(feats_real, feats_fake)
    return adv / len(bank) + regularizer_loss(x, y_hat)
