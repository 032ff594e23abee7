# SPDX-License-Identifier: Apache-2.0
"""Residual-channel contrastive learning workbench.

Thin python layer over the C++ core: OFDM/IQ-imbalance simulation, LS/MMSE
channel estimation and residual-channel augmentation, SimSiam pretraining,
fine-tuning, and metrics. See ``rffsim._core`` for the full surface.
"""

from ._core import (  # noqa: F401
    SUBCARRIERS,
    DATA_FRAMES,
    SYMBOLS_PER_PACKET,
    ChannelConfig,
    ChannelRealization,
    ConfigError,
    DeviceProfile,
    DeviceSet,
    EqualizedSample,
    FrequencyFrame,
    ImpairedFrame,
    IoError,
    MmseStatistics,
    NumericError,
    ReceivedFrame,
    RunConfig,
    ShapeError,
    accuracy,
    add_awgn,
    apply_channel,
    apply_iq_imbalance,
    block_mask,
    build_frame,
    cmd_eval,
    cmd_finetune,
    cmd_gen,
    cmd_pretrain,
    cosine_lr,
    equalize,
    estimate_mmse_statistics,
    generate_dataset,
    kmeans,
    load_dataset,
    ls_estimate,
    lts_sequence,
    make_pair,
    mmse_estimate,
    nmi,
    qpsk_modulate,
    sample_channel,
    set_max_threads,
)

__version__ = "0.1.0"
