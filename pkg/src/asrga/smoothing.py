"""Scalar smoothing kernels for nonsmooth penalties.

Two kernels are shipped:

``SMOOTHED_ABS`` smooths ``|t|``::

    phi_mu(t) = |t|                     if |t| > mu
              = t**2 / (2 mu) + mu / 2  otherwise

``SMOOTHED_PLUS`` smooths ``max(t, 0)`` through ``max(t, 0) = (|t| + t) / 2``::

    phi_mu(t) = (abs_mu(t) + t) / 2 + mu / 4

Both stay bounded below by ``sigma * mu`` (``sigma > 0``). ``[phi_mu]^p`` has a
Lipschitz gradient for every ``p in (0, 1]`` only because of this floor.
Each kernel carries the four constants ``(sigma, kappa, m_phi, l_phi)``:
value floor, Lipschitz constant in ``mu``, derivative bound, and the
derivative's Lipschitz constant scaled by ``mu``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


class KernelKind(str, enum.Enum):
    SMOOTHED_ABS = "smoothed_abs"
    SMOOTHED_PLUS = "smoothed_plus"


def _check_mu(mu):
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu) & (mu > 0)):
        raise ParameterError(f"smoothing parameter mu must be positive and finite, got {mu!r}")


def _abs_value_and_derivative(t, mu):
    a = np.abs(t)
    inside = a <= mu
    value = np.where(inside, t * t / (2 * mu) + mu / 2, a)
    deriv = np.where(inside, t / mu, np.sign(t))
    return value, deriv


@dataclass(frozen=True)
class SmoothingKernel:
    kind: KernelKind
    sigma: float
    kappa: float
    m_phi: float
    l_phi: float

    def value_and_derivative(self, t, mu):
        """Vectorized ``(phi_mu(t), phi_mu'(t))``; ``mu`` may be an array too."""
        _check_mu(mu)
        t = np.asarray(t, dtype=float)
        v, d = _abs_value_and_derivative(t, mu)
        if self.kind is KernelKind.SMOOTHED_PLUS:
            v = (v + t) / 2 + mu / 4
            d = (d + 1) / 2
        return v, d

    def value(self, t, mu):
        return self.value_and_derivative(t, mu)[0]

    def derivative(self, t, mu):
        return self.value_and_derivative(t, mu)[1]

    def base(self, t):
        """The nonsmooth function being approximated."""
        t = np.asarray(t, dtype=float)
        if self.kind is KernelKind.SMOOTHED_PLUS:
            return np.maximum(t, 0.0)
        return np.abs(t)

    def certified_constants(self):
        return (self.sigma, self.kappa, self.m_phi, self.l_phi)


# sigma: min_t phi = mu/2; kappa: |d phi / d mu| = |1/2 - t^2/(2 mu^2)| <= 1/2;
# derivative t/mu on the cap gives m_phi = 1, l_phi = 1.
SMOOTHED_ABS = SmoothingKernel(KernelKind.SMOOTHED_ABS, sigma=0.5, kappa=0.5, m_phi=1.0, l_phi=1.0)

# sigma from the mu/4 offset; d phi / d mu lies in [1/4, 1/2]; derivative
# (abs' + 1)/2 lies in [0, 1] with slope 1/(2 mu) on the cap.
SMOOTHED_PLUS = SmoothingKernel(
    KernelKind.SMOOTHED_PLUS, sigma=0.25, kappa=0.5, m_phi=1.0, l_phi=0.5
)

KERNELS = {k.kind: k for k in (SMOOTHED_ABS, SMOOTHED_PLUS)}


def get_kernel(kind):
    return KERNELS[KernelKind(kind)]


def value(kernel, t, mu):
    return kernel.value(t, mu)


def derivative(kernel, t, mu):
    return kernel.derivative(t, mu)


def certified_constants(kernel):
    return kernel.certified_constants()
