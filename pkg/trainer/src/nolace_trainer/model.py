"""Differentiable LACE/NoLACE models matching the engine's weight format.

Forward semantics follow the published format notes exactly: joint
kernel normalization with a 1e-6 denominator floor, gains bounded by
exp(+-limit * tanh), half-frame coefficient crossfade evaluated as
cur + (1-w)*(prev - cur), comb taps centered on the per-frame pitch lag
with the previous frame keeping its own lag, and the envelope/latent
conventions of the shaping stages. Everything runs on full sequences
(frames are conditionally independent given the latents, so there is no
frame loop in the signal path).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

EPS_NORM = 1e-6
EPS_ENV = 1e-6
LEAKY_SLOPE = 0.2
MIN_LAG, MAX_LAG = 32, 256
FALLBACK_LAG = 80

STAGE_LATENTS = {
    "adacomb1": 0, "adacomb2": 1, "adaconv1": 2,
    "adashape1": 3, "adaconv2": 3,
    "adashape2": 4, "adaconv3": 4,
    "adashape3": 5, "adaconv4": 5,
}
NOLACE_CONVS = [("adaconv1", 1, 2), ("adaconv2", 2, 2),
                ("adaconv3", 2, 2), ("adaconv4", 2, 1)]
LACE_CONVS = [("adaconv1", 1, 1)]


@dataclass
class HarnessConfig:
    """Mirror of the engine's configuration header."""

    variant: str = "nolace"
    n_r: int = 96
    n_h: int = 256
    n_f: int = 93
    frame_size: int = 80
    subframes_per_block: int = 4
    taps: dict = field(default_factory=dict)
    gain_limit: dict = field(default_factory=dict)
    max_lag: int = 264
    adashape_hidden: int = 128

    def __post_init__(self) -> None:
        stages = ["adacomb1", "adacomb2"] + [c[0] for c in self.convs()]
        if not self.taps:
            self.taps = {s: 15 for s in stages}
        if not self.gain_limit:
            self.gain_limit = {s: 2.0 for s in stages}

    def convs(self):
        return NOLACE_CONVS if self.variant == "nolace" else LACE_CONVS

    def header(self) -> dict:
        return {"variant": self.variant, "n_r": self.n_r, "n_h": self.n_h,
                "n_f": self.n_f, "frame_size": self.frame_size,
                "subframes_per_block": self.subframes_per_block,
                "taps": self.taps, "gain_limit": self.gain_limit,
                "max_lag": self.max_lag,
                "adashape_hidden": self.adashape_hidden}


def _causal_conv(conv: nn.Conv1d, x: torch.Tensor) -> torch.Tensor:
    return conv(F.pad(x, (conv.kernel_size[0] - 1, 0)))


def _fade(frame_size: int, device) -> torch.Tensor:
    """Weight of the previous filter per sample: 1-t/(N/2), zero after."""
    half = frame_size // 2
    w = torch.zeros(frame_size, device=device)
    w[:half] = 1.0 - torch.arange(half, device=device) / half
    return w


class AdaConv(nn.Module):
    def __init__(self, n_h: int, c_in: int, c_out: int, taps: int,
                 gain_limit: float, frame_size: int):
        super().__init__()
        self.c_in, self.c_out, self.taps = c_in, c_out, taps
        self.gain_limit = gain_limit
        self.frame = frame_size
        self.shape = nn.Linear(n_h, c_out * c_in * taps)
        self.gain = nn.Linear(n_h, c_out)

    def kernels(self, phi: torch.Tensor) -> torch.Tensor:
        """(B, n, n_h) -> impulse responses (B, n, out, in, taps)."""
        B, n, _ = phi.shape
        raw = self.shape(phi).view(B, n, self.c_out, self.c_in, self.taps)
        norms = raw.square().sum(-1).sqrt()
        denom = norms.sum(-1).clamp_min(EPS_NORM)
        kappa = raw / denom[..., None, None]
        g = torch.exp(self.gain_limit * torch.tanh(self.gain(phi)))
        return g[..., None, None] * kappa

    def forward(self, x: torch.Tensor, phi: torch.Tensor) -> torch.Tensor:
        """x (B, in, T), phi (B, n, n_h) -> (B, out, T)."""
        B, _, T = x.shape
        n = phi.shape[1]
        h = self.kernels(phi)
        h_prev = torch.cat([h[:, :1], h[:, :-1]], dim=1)
        ext = F.pad(x, (self.taps - 1, 0))
        win = ext.unfold(-1, self.taps, 1)                    # (B,in,T,taps)
        win = win.reshape(B, self.c_in, n, self.frame, self.taps)
        hr, hpr = h.flip(-1), h_prev.flip(-1)
        y_cur = torch.einsum("bintk,bnoik->bnot", win, hr)
        y_prev = torch.einsum("bintk,bnoik->bnot", win, hpr)
        fade = _fade(self.frame, x.device)
        y = y_cur + fade * (y_prev - y_cur)
        return y.permute(0, 2, 1, 3).reshape(B, self.c_out, T)


class AdaComb(nn.Module):
    def __init__(self, n_h: int, taps: int, gain_limit: float,
                 frame_size: int, max_lag: int):
        super().__init__()
        self.taps, self.gain_limit = taps, gain_limit
        self.frame, self.max_lag = frame_size, max_lag
        self.center = taps // 2
        self.shape = nn.Linear(n_h, taps)
        self.gain = nn.Linear(n_h, 1)
        self.feedthrough = nn.Linear(n_h, 1)

    def filters(self, phi: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        raw = self.shape(phi)                                  # (B, n, taps)
        denom = raw.square().sum(-1).sqrt().clamp_min(EPS_NORM)
        kappa = raw / denom[..., None]
        g = torch.exp(self.gain_limit * torch.tanh(self.gain(phi)))
        g0 = torch.exp(self.gain_limit * torch.tanh(self.feedthrough(phi)))
        return g * kappa, g0.squeeze(-1)                       # (B,n,taps), (B,n)

    def _delayed(self, ext: torch.Tensor, lags: torch.Tensor,
                 h: torch.Tensor, hist: int, n: int) -> torch.Tensor:
        """Sum over taps of h(tau) * x(t - lag + center - tau)."""
        B = ext.shape[0]
        dev = ext.device
        t_grid = (torch.arange(n, device=dev)[:, None] * self.frame
                  + torch.arange(self.frame, device=dev)[None, :])  # (n, N)
        tau = torch.arange(self.taps, device=dev)
        idx = (hist + t_grid[None, :, :, None] + self.center
               - lags[:, :, None, None] - tau)                  # (B,n,N,taps)
        win = ext.gather(1, idx.reshape(B, -1)).reshape(
            B, n, self.frame, self.taps)
        return torch.einsum("bntk,bnk->bnt", win, h)

    def forward(self, x: torch.Tensor, phi: torch.Tensor,
                lags: torch.Tensor) -> torch.Tensor:
        """x (B, T), phi (B, n, n_h), lags (B, n) long -> (B, T)."""
        B, T = x.shape
        n = phi.shape[1]
        h, g0 = self.filters(phi)
        h_prev = torch.cat([h[:, :1], h[:, :-1]], dim=1)
        g0_prev = torch.cat([g0[:, :1], g0[:, :-1]], dim=1)
        lag_prev = torch.cat([lags[:, :1], lags[:, :-1]], dim=1)

        hist = self.max_lag + self.taps
        ext = F.pad(x, (hist, 0))
        frames = x.view(B, n, self.frame)
        y_cur = (g0[..., None] * frames
                 + self._delayed(ext, lags, h, hist, n))
        y_prev = (g0_prev[..., None] * frames
                  + self._delayed(ext, lag_prev, h_prev, hist, n))
        fade = _fade(self.frame, x.device)
        return (y_cur + fade * (y_prev - y_cur)).reshape(B, T)


class AdaShape(nn.Module):
    def __init__(self, n_h: int, hidden: int, frame_size: int):
        super().__init__()
        self.frame = frame_size
        blocks = frame_size // 4
        self.conv1 = nn.Conv1d(blocks + 1 + n_h, hidden, 2)
        self.conv2 = nn.Conv1d(hidden, frame_size, 2)

    def forward(self, x: torch.Tensor, phi: torch.Tensor) -> torch.Tensor:
        """x (B, T), phi (B, n, n_h) -> (B, T)."""
        B, T = x.shape
        n = phi.shape[1]
        blocks = x.view(B, n, self.frame // 4, 4).abs().mean(-1)
        log_env = torch.log(blocks + EPS_ENV)
        mu = log_env.mean(-1, keepdim=True)
        u = torch.cat([log_env - mu, mu, phi], dim=-1)         # (B, n, in_dim)
        hid = F.leaky_relu(_causal_conv(self.conv1, u.transpose(1, 2)),
                           LEAKY_SLOPE)
        gains = torch.exp(_causal_conv(self.conv2, hid))       # (B, N, n)
        return (gains.transpose(1, 2).reshape(B, T) * x)


class Encoder(nn.Module):
    def __init__(self, cfg: HarnessConfig):
        super().__init__()
        self.conv1 = nn.Conv1d(cfg.n_f, cfg.n_r, 1)
        self.cpool = nn.Conv1d(cfg.n_r, cfg.n_h, 4, stride=4)
        self.conv2 = nn.Conv1d(cfg.n_h, cfg.n_h, 2)
        self.tconv = nn.ConvTranspose1d(cfg.n_h, cfg.n_h, 4, stride=4)
        self.gru = nn.GRU(cfg.n_h, cfg.n_h, batch_first=True)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """(B, n, n_f) -> (B, n, n_h); n must be a multiple of 4."""
        if features.shape[1] % 4 != 0:
            raise ValueError("subframe count must be a multiple of 4")
        a = torch.tanh(self.conv1(features.transpose(1, 2)))
        c = torch.tanh(self.cpool(a))
        d = torch.tanh(_causal_conv(self.conv2, c))
        e = torch.tanh(self.tconv(d))
        out, _ = self.gru(e.transpose(1, 2))
        return out


class Enhancer(nn.Module):
    """Complete signal-domain model for one variant."""

    def __init__(self, cfg: HarnessConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        if cfg.variant == "nolace":
            self.ftrans = nn.ModuleList(
                [nn.Conv1d(cfg.n_h, cfg.n_h, 2) for _ in range(5)])
            self.shapes = nn.ModuleList(
                [AdaShape(cfg.n_h, cfg.adashape_hidden, cfg.frame_size)
                 for _ in range(3)])
        else:
            self.ftrans = nn.ModuleList()
            self.shapes = nn.ModuleList()
        self.combs = nn.ModuleList(
            [AdaComb(cfg.n_h, cfg.taps[f"adacomb{i}"],
                     cfg.gain_limit[f"adacomb{i}"], cfg.frame_size,
                     cfg.max_lag) for i in (1, 2)])
        self.convs = nn.ModuleList(
            [AdaConv(cfg.n_h, c_in, c_out, cfg.taps[name],
                     cfg.gain_limit[name], cfg.frame_size)
             for name, c_in, c_out in cfg.convs()])

    def latents(self, features: torch.Tensor) -> list[torch.Tensor]:
        phi = self.encoder(features)
        chain = [phi]
        for conv in self.ftrans:
            chain.append(torch.tanh(
                _causal_conv(conv, chain[-1].transpose(1, 2))).transpose(1, 2))
        return chain

    def effective_lags(self, lags: torch.Tensor) -> torch.Tensor:
        """Unvoiced (0) frames reuse the last voiced lag; voiced clipped."""
        B, n = lags.shape
        last = torch.full((B,), FALLBACK_LAG, dtype=torch.long,
                          device=lags.device)
        out = []
        for m in range(n):
            cur = lags[:, m].long()
            last = torch.where(cur > 0, cur.clamp(MIN_LAG, MAX_LAG), last)
            out.append(last)
        return torch.stack(out, dim=1)

    def forward(self, signal: torch.Tensor, features: torch.Tensor,
                lags: torch.Tensor) -> torch.Tensor:
        """signal (B, T) pre-emphasized, features (B, n, n_f), lags (B, n)."""
        B, T = signal.shape
        n = features.shape[1]
        if T != n * self.cfg.frame_size:
            raise ValueError("signal length must be frame_size per feature frame")
        chain = self.latents(features)
        lat = ((lambda s: 0) if self.cfg.variant == "lace"
               else STAGE_LATENTS.__getitem__)
        eff = self.effective_lags(lags)
        s = self.combs[0](signal, chain[lat("adacomb1")], eff)
        s = self.combs[1](s, chain[lat("adacomb2")], eff)
        y = self.convs[0](s.unsqueeze(1), chain[lat("adaconv1")])
        for i, shape in enumerate(self.shapes):
            shaped = shape(y[:, 1], chain[lat(f"adashape{i + 1}")])
            y = self.convs[i + 1](torch.stack([y[:, 0], shaped], dim=1),
                                  chain[lat(f"adaconv{i + 2}")])
        return y[:, 0]

    # ------------------------------------------------------------------
    # container tensor mapping
    # ------------------------------------------------------------------

    def tensor_dict(self) -> dict:
        """State dict reorganized under the container naming convention."""
        import numpy as np

        def npy(t):
            return t.detach().cpu().numpy().astype(np.float32)

        cfg = self.cfg
        out = {
            "encoder.conv1.w": npy(self.encoder.conv1.weight),
            "encoder.conv1.b": npy(self.encoder.conv1.bias),
            "encoder.cpool.w": npy(self.encoder.cpool.weight),
            "encoder.cpool.b": npy(self.encoder.cpool.bias),
            "encoder.conv2.w": npy(self.encoder.conv2.weight),
            "encoder.conv2.b": npy(self.encoder.conv2.bias),
            "encoder.tconv.w": npy(self.encoder.tconv.weight.transpose(0, 1)),
            "encoder.tconv.b": npy(self.encoder.tconv.bias),
            "encoder.gru.w_ih": npy(self.encoder.gru.weight_ih_l0),
            "encoder.gru.w_hh": npy(self.encoder.gru.weight_hh_l0),
            "encoder.gru.b_ih": npy(self.encoder.gru.bias_ih_l0),
            "encoder.gru.b_hh": npy(self.encoder.gru.bias_hh_l0),
        }
        for k, conv in enumerate(self.ftrans, start=1):
            out[f"ftrans{k}.w"] = npy(conv.weight)
            out[f"ftrans{k}.b"] = npy(conv.bias)
        for i, comb in enumerate(self.combs, start=1):
            out[f"adacomb{i}.w_shape"] = npy(comb.shape.weight)
            out[f"adacomb{i}.b_shape"] = npy(comb.shape.bias)
            out[f"adacomb{i}.w_gain"] = npy(comb.gain.weight)
            out[f"adacomb{i}.b_gain"] = npy(comb.gain.bias)
            out[f"adacomb{i}.w_ft"] = npy(comb.feedthrough.weight)
            out[f"adacomb{i}.b_ft"] = npy(comb.feedthrough.bias)
        for (name, c_in, c_out), conv in zip(cfg.convs(), self.convs):
            taps = cfg.taps[name]
            out[f"{name}.w_shape"] = npy(conv.shape.weight).reshape(
                c_out, c_in, taps, cfg.n_h)
            out[f"{name}.b_shape"] = npy(conv.shape.bias).reshape(
                c_out, c_in, taps)
            out[f"{name}.w_gain"] = npy(conv.gain.weight)
            out[f"{name}.b_gain"] = npy(conv.gain.bias)
        for i, shape in enumerate(self.shapes, start=1):
            out[f"adashape{i}.conv1.w"] = npy(shape.conv1.weight)
            out[f"adashape{i}.conv1.b"] = npy(shape.conv1.bias)
            out[f"adashape{i}.conv2.w"] = npy(shape.conv2.weight)
            out[f"adashape{i}.conv2.b"] = npy(shape.conv2.bias)
        return out
