"""Multi-resolution STFT discriminator bank.

Six discriminators over log-magnitude spectrograms of size 2^(k+5)
(64..2048) with 75% overlap. Frequency-axis conv strides grow with the
FFT size so every discriminator's receptive field spans the same
frequency range in Hz, and a sine-cosine frequency positional embedding
is concatenated to the input channels of every conv layer.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

STFT_SIZES = tuple(2 ** (k + 5) for k in range(1, 7))   # 64 .. 2048

# per-size frequency strides of the 4 conv layers; products scale with
# fft size so the receptive-field frequency span stays constant
FREQ_STRIDES = {
    64: (1, 1, 1, 1),
    128: (2, 1, 1, 1),
    256: (2, 2, 1, 1),
    512: (2, 2, 2, 1),
    1024: (2, 2, 2, 2),
    2048: (4, 2, 2, 2),
}
CHANNELS = (16, 32, 64, 128)
LEAKY = 0.2


def _freq_embedding(n_freq: int, n_time: int, device) -> torch.Tensor:
    """(1, 2, F, T) sine/cosine of the normalized frequency position."""
    pos = torch.linspace(0, 1, n_freq, device=device) * torch.pi
    emb = torch.stack([torch.sin(pos), torch.cos(pos)])        # (2, F)
    return emb[None, :, :, None].expand(1, 2, n_freq, n_time)


class SpectrogramDiscriminator(nn.Module):
    """One 2-D conv stack over a log-magnitude STFT."""

    def __init__(self, fft_size: int):
        super().__init__()
        self.fft_size = fft_size
        self.hop = fft_size // 4                               # 75% overlap
        strides = FREQ_STRIDES[fft_size]
        layers = []
        c_in = 1
        for c_out, s in zip(CHANNELS, strides):
            layers.append(nn.Conv2d(c_in + 2, c_out, kernel_size=3,
                                    stride=(s, 1), padding=1))
            c_in = c_out
        self.convs = nn.ModuleList(layers)
        self.head = nn.Conv2d(c_in + 2, 1, kernel_size=3, padding=1)

    def spectrogram(self, x: torch.Tensor) -> torch.Tensor:
        window = torch.hann_window(self.fft_size, device=x.device)
        s = torch.stft(x, self.fft_size, hop_length=self.hop, window=window,
                       return_complex=True)
        return torch.log(s.abs() + 1e-5).unsqueeze(1)          # (B,1,F,T)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Waveform in; (score map, hidden activations) out."""
        h = self.spectrogram(x)
        hidden = []
        for conv in self.convs:
            emb = _freq_embedding(h.shape[2], h.shape[3], h.device)
            h = F.leaky_relu(conv(torch.cat([h, emb.expand(h.shape[0], -1, -1, -1)],
                                            dim=1)), LEAKY)
            hidden.append(h)
        emb = _freq_embedding(h.shape[2], h.shape[3], h.device)
        score = self.head(torch.cat([h, emb.expand(h.shape[0], -1, -1, -1)], dim=1))
        return score, hidden


class DiscriminatorBank(nn.ModuleList):
    def __init__(self):
        super().__init__([SpectrogramDiscriminator(s) for s in STFT_SIZES])

    @property
    def stft_sizes(self) -> tuple[int, ...]:
        return tuple(d.fft_size for d in self)
