"""Mask-conditioned image synthesis: python access to the C++ core."""

from _maskforge import (
    ContractError,
    DataError,
    Discriminator,
    Generator,
    NumericError,
    bce_gan_losses,
    echo_config,
    generator_objective,
    gradient_suite,
    l1,
    lsgan_d_loss,
    mse,
    parse_nifti,
    phantom_pair,
    resize,
    run_training,
    set_parallelism,
    ssim,
    write_nifti,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "DataError",
    "Discriminator",
    "Generator",
    "NumericError",
    "bce_gan_losses",
    "echo_config",
    "generator_objective",
    "gradient_suite",
    "l1",
    "lsgan_d_loss",
    "mse",
    "parse_nifti",
    "phantom_pair",
    "resize",
    "run_training",
    "set_parallelism",
    "ssim",
    "write_nifti",
]
