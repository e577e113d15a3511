"""Backend selection for the per-point kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over.  Set ``NEWTONFLOW_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("NEWTONFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend or python_backend


def backend():
    """The module currently serving kernel calls."""
    return _active


def use(name: str) -> None:
    """Switch backend: ``"cython"`` or ``"python"``."""
    global _active
    if name == "python":
        _active = python_backend
    elif name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available")
        _active = compiled_backend
    else:
        raise ValueError(f"unknown backend {name!r}")


def wrap_angle(x):
    return _active.wrap_angle(x)


def psi_closed_form(*args):
    return _active.psi_closed_form(*args)


def wp_sum(*args):
    return _active.wp_sum(*args)


def wp_prime_sum(*args):
    return _active.wp_prime_sum(*args)


def wzeta_sum(*args):
    return _active.wzeta_sum(*args)


def wsigma_prod(*args):
    return _active.wsigma_prod(*args)


def strip_bins(*args):
    return _active.strip_bins(*args)


def level_mask(*args):
    return _active.level_mask(*args)
