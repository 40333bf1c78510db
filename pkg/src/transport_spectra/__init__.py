"""Spectra, resolvents, and series diagnostics for bounce-back transport.

The package is organized as a stack: ``geometry`` (convex domains and
exit times), ``fields`` (collision frequencies, grids, separable
kernels), ``streaming`` (the explicit reflected evolution), ``resolvent``
(closed-form resolvent algebra on chords), ``spectra`` (spectrum point
clouds and membership tests), ``dyson`` (perturbation series, remainder
compactness proxies, high-frequency decay sweeps), and ``cli``.

Submodules load on first attribute access so that process-level knobs
(thread caps in particular) can be exported before the numerical stack
initializes.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "errors",
    "geometry",
    "fields",
    "streaming",
    "resolvent",
    "spectra",
    "dyson",
    "cli",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name: str):
    if name in _SUBMODULES:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
