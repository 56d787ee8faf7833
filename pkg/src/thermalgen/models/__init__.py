from .bundle import (
    GROUP_D,
    GROUP_G,
    GROUP_G_EMA,
    GROUP_I,
    GROUP_I_EMA,
    ModelBundle,
    load_bundle,
    save_bundle,
)
from .layers import (
    DownResBlock,
    ResBlock,
    SpadeModulation,
    SpadeSrResBlock,
    init_fan_in,
    param_free_norm,
)
from .networks import Discriminator, Generator, InversionEncoder, build_models

__all__ = [
    "Discriminator",
    "DownResBlock",
    "GROUP_D",
    "GROUP_G",
    "GROUP_G_EMA",
    "GROUP_I",
    "GROUP_I_EMA",
    "Generator",
    "InversionEncoder",
    "ModelBundle",
    "ResBlock",
    "SpadeModulation",
    "SpadeSrResBlock",
    "build_models",
    "init_fan_in",
    "load_bundle",
    "param_free_norm",
    "save_bundle",
]
