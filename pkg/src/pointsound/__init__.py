"""Vision-conditioned mono-to-binaural audio synthesis.

The package is organized as independent submodules (tensor, sparse,
vision, audionet, binaural, scenes, metrics, trainer, evaluate, cli);
they are imported lazily so that the command-line entry point can pin
BLAS thread counts before the numerical stack loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "audio",
    "audionet",
    "binaural",
    "checkpoint",
    "cli",
    "cloud",
    "evaluate",
    "metrics",
    "optim",
    "scenes",
    "sparse",
    "tensor",
    "trainer",
    "vision",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
