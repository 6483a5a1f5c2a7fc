"""The Slot Transformer Scoring Network assembled from its parts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import SlotDecoder, composite, reconstruction_loss
from .encoder import Encoder
from .nn import Module
from .reasoner import N_CONTEXT, Reasoner, task_loss, total_loss
from .slot_attention import SlotAttention, SlotSet
from .tensor import Tensor, as_tensor

N_PANELS = 16
# seed of the fixed slot-noise draw used when no rng is given (evaluation)
EVAL_NOISE_SEED = 20_221_017


@dataclass
class Reconstruction:
    image: Tensor  # (P, H, W, C) composite
    masks: Tensor  # (P, K, H, W, 1) softmax-normalized over K
    slot_recons: Tensor  # (P, K, H, W, C)


@dataclass
class ForwardOutput:
    scores: Tensor  # (B, 8)
    slots: SlotSet  # over B*16 panels
    recon: Reconstruction
    recon_loss: Tensor
    task_loss: Tensor | None = None
    loss: Tensor | None = None


class STSN(Module):
    """Encoder -> slot attention -> (decoder, reasoner).

    Component prefixes (``encoder.``, ``slot_attention.``, ``decoder.``,
    ``reasoner.``) are stable parameter-name namespaces used by the
    checkpoint and the pretraining regimes.
    """

    PERCEPTION = ("encoder.", "slot_attention.", "decoder.")

    def __init__(self, cfg, rng=None):
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        self.cfg = cfg
        self.K = cfg.effective_K
        self.encoder = Encoder(cfg.image_size, rng, channels=cfg.enc_channels, image_channels=cfg.image_channels)
        self.slot_attention = SlotAttention(cfg.enc_channels, cfg.D_slot, rng, iters=cfg.T)
        self.decoder = SlotDecoder(
            cfg.image_size,
            cfg.D_slot,
            rng,
            channels=cfg.dec_channels,
            n_conv=cfg.dec_layers,
            image_channels=cfg.image_channels,
        )
        self.reasoner = Reasoner(
            cfg.D_slot,
            rng,
            n_layers=cfg.effective_L,
            n_heads=cfg.H,
            d_head=cfg.D_head,
            d_mlp=cfg.D_MLP,
            dropout=cfg.effective_dropout,
            use_tcn=cfg.tcn,
        )

    def perception_parameters(self):
        return {k: v for k, v in self.named_parameters().items() if k.startswith(self.PERCEPTION)}

    def reasoner_parameters(self):
        return {k: v for k, v in self.named_parameters().items() if k.startswith("reasoner.")}

    # ------------------------------------------------------------------
    def encode(self, panels, rng=None):
        """Panels (P, H, W, C) -> :class:`SlotSet` over P panels.

        ``rng`` drives the slot initialization. With ``None`` every panel
        starts from the same fixed draw ``mu + sigma * eps``: deterministic,
        yet the slots stay distinct. Starting all slots at ``mu`` would keep
        them identical through every iteration.
        """
        feats = self.encoder(panels)
        if not self.cfg.slot_attention:
            return self.slot_attention.mean_value_slots(feats)
        init = None
        if rng is None:
            sa = self.slot_attention
            eps = np.random.default_rng(EVAL_NOISE_SEED).standard_normal((self.K, sa.d_slot))
            start = sa.mu + sa.log_sigma.exp() * Tensor(eps.astype(sa.mu.dtype))
            init = start.broadcast_to(feats.shape[:-2] + start.shape)
        return self.slot_attention(feats, self.K, rng, init=init)

    def reconstruct(self, slots):
        """Decode a :class:`SlotSet` back to composite images."""
        p, k, d = slots.slots.shape
        render = self.decoder(slots.slots.reshape(p * k, d))
        h, w, c = render.recon.shape[1:]
        recons = render.recon.reshape(p, k, h, w, c)
        image, masks = composite(recons, render.mask_logit.reshape(p, k, h, w, 1))
        return Reconstruction(image, masks, recons)

    def score(self, slots, batch, rng=None):
        k, d = slots.slots.shape[-2:]
        per = slots.slots.reshape(batch, N_PANELS, k, d)
        return self.reasoner.score(per[:, :N_CONTEXT], per[:, N_CONTEXT:], rng)

    def forward(self, images, answers=None, rng=None, lam=None):
        """Full pass over a batch of problems ``images`` (B, 16, H, W, C)."""
        images = as_tensor(images)
        if images.ndim == 4:
            images = images.reshape(images.shape + (1,))
        b = images.shape[0]
        panels = images.reshape((b * N_PANELS,) + images.shape[2:])
        slots = self.encode(panels, rng)
        recon = self.reconstruct(slots)
        r_loss = reconstruction_loss(panels, recon.image)
        scores = self.score(slots, b, rng)
        out = ForwardOutput(scores, slots, recon, r_loss)
        if answers is not None:
            out.task_loss = task_loss(scores, answers)
            out.loss = total_loss(r_loss, out.task_loss, self.cfg.lam if lam is None else lam)
        return out

    __call__ = forward

    def recon_forward(self, panels, rng=None):
        """Reconstruction-only pass over panels (P, H, W, C); returns (loss, Reconstruction)."""
        panels = as_tensor(panels)
        if panels.ndim == 3:
            panels = panels.reshape(panels.shape + (1,))
        recon = self.reconstruct(self.encode(panels, rng))
        return reconstruction_loss(panels, recon.image), recon
