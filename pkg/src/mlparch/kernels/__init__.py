"""Numerical kernels with a compiled core and a pure-numpy fallback.

The compiled Cython extension is used when it was built; otherwise the
numpy implementation is selected at import time. The choice can be forced
through the ``MLPARCH_KERNELS`` environment variable (``cython``,
``python`` or ``auto``), which is mainly useful for the kernel benchmark
and for testing both backends.

All three kernels take the parameter blocks as contiguous float64 arrays:

``forward(beta, a, b, W, X, kind) -> (n,) ndarray``
``loglik(beta, a, b, W, X, y, sigma2, kind) -> float``
``loglik_grad(beta, a, b, W, X, y, sigma2, kind) -> (float, (dim,) ndarray)``

``kind`` is the integer code of the transfer function (0 tanh, 1 logistic).
"""

import os

from . import _pure


def _load():
    choice = os.environ.get("MLPARCH_KERNELS", "auto").strip().lower()
    if choice not in ("auto", "cython", "python"):
        raise ValueError(
            f"MLPARCH_KERNELS={choice!r} not understood; use 'auto', 'cython' or 'python'"
        )
    if choice in ("auto", "cython"):
        try:
            from . import _speedups

            return _speedups, "cython"
        except ImportError:
            if choice == "cython":
                raise
    return _pure, "python"


_impl, BACKEND = _load()

forward = _impl.forward
loglik = _impl.loglik
loglik_grad = _impl.loglik_grad


def available_backends():
    """Importable backends, name -> module. Always contains 'python'."""
    backends = {"python": _pure}
    try:
        from . import _speedups

        backends["cython"] = _speedups
    except ImportError:
        pass
    return backends
