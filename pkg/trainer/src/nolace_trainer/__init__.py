"""Toy-scale training harness for the nolace enhancement engine."""

from .data import ClipDataset
from .discriminators import DiscriminatorBank, STFT_SIZES
from .losses import (discriminator_loss, envelope_loss, feature_matching_loss,
                     generator_adversarial_term, generator_loss, phase_loss,
                     pretrain_loss, regularizer_loss, spectral_loss)
from .model import Enhancer, HarnessConfig
from .training import (DivergenceError, ExportError, adversarial_step,
                       export_vectors, export_weights, make_model, pretrain)

__version__ = "0.1.0"
