"""Gambling with side information and information engines, in nats."""
from .prob_core import (
    NORMALIZATION_TOL,
    ChannelKernel,
    DomainError,
    FinitePmf,
    JointPmf,
    binary_entropy,
    conditional_entropy,
    entropy,
    kl_divergence,
    min_kl_choice,
    mutual_information,
    star_convolve,
    symmetric_channel,
)
from .ledger import Ledger

__version__ = "0.1.0"
