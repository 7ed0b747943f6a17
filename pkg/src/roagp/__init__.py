"""Probabilistic region-of-attraction estimation for swing-equation systems.

Kept import-light so the CLI can configure threading before NumPy loads;
submodules are resolved lazily.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "dynamics",
    "integrator",
    "lyapunov",
    "gp",
    "ucb",
    "certified",
    "region",
    "cli",
    "errors",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
