"""Training loops and export paths.

Full-scale presets are kept as data (PAPER_PRETRAIN / PAPER_ADVERSARIAL);
the functions themselves take explicit desk-scale arguments so toy runs
stay fast and deterministic.
"""

from __future__ import annotations

import numpy as np
import torch

from . import container
from .data import ClipDataset
from .discriminators import DiscriminatorBank
from .losses import (discriminator_loss, generator_loss, pretrain_loss)
from .model import Enhancer, HarnessConfig

# 50-epoch schedules used at full scale; desk runs override everything
PAPER_PRETRAIN = {"epochs": 50, "batch_size": 256, "seq_seconds": 0.5,
                  "betas": (0.9, 0.999), "lr_decay": 2.5e-5}
PAPER_ADVERSARIAL = {"epochs": 50, "batch_size": 64, "lr": 1e-4,
                     "betas": (0.9, 0.999)}


class DivergenceError(RuntimeError):
    pass


class ExportError(RuntimeError):
    pass


def _to_batch(batch: dict, device) -> tuple[torch.Tensor, ...]:
    clean = torch.from_numpy(batch["clean"]).to(device)
    coded = torch.from_numpy(batch["coded"]).to(device)
    feats = torch.from_numpy(batch["features"]).to(device)
    lags = torch.from_numpy(batch["lags"].astype(np.int64)).to(device)
    return clean, coded, feats, lags


def pretrain(model: Enhancer, dataset: ClipDataset, epochs: int,
             batch_size: int = 16, lr: float = 5e-4,
             lr_decay: float = PAPER_PRETRAIN["lr_decay"],
             seed: int = 0, device: str = "cpu") -> list[float]:
    """Regression pre-training; returns per-epoch average losses.

    Aborts with a diagnostic if the loss goes non-finite.
    """
    model.to(device).train()
    opt = torch.optim.Adam(model.parameters(), lr=lr,
                           betas=PAPER_PRETRAIN["betas"])
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda step: 1.0 / (1.0 + lr_decay * step))
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    history = []
    for epoch in range(epochs):
        total, count = 0.0, 0
        for batch in dataset.batches(batch_size, rng):
            clean, coded, feats, lags = _to_batch(batch, device)
            opt.zero_grad()
            y_hat = model(coded, feats, lags)
            loss = pretrain_loss(clean, y_hat)
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, step {count}")
            loss.backward()
            opt.step()
            sched.step()
            total += float(loss.detach())
            count += 1
        history.append(total / max(count, 1))
    return history


def adversarial_step(model: Enhancer, bank: DiscriminatorBank, batch: dict,
                     opt_g: torch.optim.Optimizer,
                     opt_d: torch.optim.Optimizer,
                     device: str = "cpu") -> tuple[float, list[float]]:
    """One generator update and one discriminator update.

    Returns (generator loss, per-discriminator losses).
    """
    clean, coded, feats, lags = _to_batch(batch, device)

    opt_g.zero_grad()
    y_hat = model(coded, feats, lags)
    loss_g = generator_loss(bank, clean, y_hat)
    loss_g.backward()
    opt_g.step()

    opt_d.zero_grad()
    with torch.no_grad():
        y_hat = model(coded, feats, lags)
    d_losses = []
    total_d = clean.new_zeros(())
    for disc in bank:
        d_real, _ = disc(clean)
        d_fake, _ = disc(y_hat)
        ld = discriminator_loss(d_real, d_fake)
        d_losses.append(float(ld.detach()))
        total_d = total_d + ld
    total_d.backward()
    opt_d.step()
    return float(loss_g.detach()), d_losses


def export_weights(model: Enhancer, path) -> None:
    """Write the model as an engine weight container; refuses non-finite
    parameters instead of producing a file that cannot validate."""
    tensors = model.tensor_dict()
    bad = [name for name, t in tensors.items() if not np.all(np.isfinite(t))]
    if bad:
        raise ExportError(f"non-finite parameters in: {', '.join(sorted(bad))}")
    container.write_container(path, model.cfg.header(), tensors)


def export_vectors(model: Enhancer, count: int, path, frames: int = 40,
                   tolerance: float = 1e-4, seed: int = 0,
                   device: str = "cpu") -> None:
    """Random graph-domain inputs plus this model's outputs, for engine
    parity checks."""
    cfg = model.cfg
    model.to(device).eval()
    rng = np.random.default_rng(seed)
    vectors = []
    with torch.no_grad():
        for _ in range(count):
            sig = (rng.standard_normal(frames * cfg.frame_size) * 0.3).astype(np.float32)
            feats = rng.standard_normal((frames, cfg.n_f)).astype(np.float32)
            lags = rng.integers(32, 257, size=frames).astype(np.int32)
            lags[rng.random(frames) < 0.2] = 0
            out = model(torch.from_numpy(sig)[None].to(device),
                        torch.from_numpy(feats)[None].to(device),
                        torch.from_numpy(lags.astype(np.int64))[None].to(device))
            if not torch.all(torch.isfinite(out)):
                raise ExportError("model produced non-finite output")
            vectors.append({"signal": sig, "features": feats,
                            "pitch_lags": lags,
                            "expected": out[0].cpu().numpy(),
                            "tolerance": tolerance})
    payload = container.encode_vectors(vectors)
    container.write_container(path, cfg.header(), {},
                              {container.SECTION_VECTORS: payload})


def make_model(variant: str = "nolace", **overrides) -> Enhancer:
    torch.manual_seed(overrides.pop("seed", 0))
    return Enhancer(HarnessConfig(variant=variant, **overrides))
