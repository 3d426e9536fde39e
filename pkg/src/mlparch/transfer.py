"""Hidden-unit transfer functions and their first three derivatives.

Both built-in kinds are bounded on the whole real line together with their
first, second and third derivatives, and are strictly increasing. ``tanh``
is the default; the logistic sigmoid is provided because the positivity
constraint on the hidden biases resolves the sign symmetry for sigmoidal
units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TANH_CODE = 0
LOGISTIC_CODE = 1


def _logistic(u):
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class TransferFunction:
    """A transfer function phi with evaluators for phi and phi', phi'', phi'''.

    Attributes
    ----------
    name : str
        Either ``"tanh"`` or ``"logistic"``.
    code : int
        Integer tag used to select the same function inside the numerical
        kernels.
    """

    name: str
    code: int

    def phi(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.code == TANH_CODE:
            return np.tanh(u)
        return _logistic(u)

    def d1(self, u):
        p = self.phi(u)
        if self.code == TANH_CODE:
            return 1.0 - p * p
        return p * (1.0 - p)

    def d2(self, u):
        p = self.phi(u)
        if self.code == TANH_CODE:
            return -2.0 * p * (1.0 - p * p)
        return p * (1.0 - p) * (1.0 - 2.0 * p)

    def d3(self, u):
        p = self.phi(u)
        if self.code == TANH_CODE:
            return (6.0 * p * p - 2.0) * (1.0 - p * p)
        return p * (1.0 - p) * (1.0 - 6.0 * p + 6.0 * p * p)

    def __call__(self, u):
        return self.phi(u)


TANH = TransferFunction("tanh", TANH_CODE)
LOGISTIC = TransferFunction("logistic", LOGISTIC_CODE)

_BY_NAME = {
    "tanh": TANH,
    "logistic": LOGISTIC,
    "logistic-sigmoid": LOGISTIC,
}


def get_transfer(name: str) -> TransferFunction:
    """Look up a transfer function by name (``tanh`` or ``logistic``)."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(
            f"unknown transfer function {name!r}; expected one of {sorted(_BY_NAME)}"
        ) from None
