"""Finite spectral-Galerkin test models.

A model is a set of coordinate evaluators in the eigenbasis of the linear
part: the state is a vector y of n_h mode coefficients, the linear operator
is the diagonal a_spectrum, and the nonlinearities return coordinate vectors.

Evaluator contracts (n = n_h; "batch" is y's leading axes; vector arguments
u, v carry the same batch followed by any extra index axes, e.g. image boxes):

    f(y)                 -> batch + (n,)
    f_prime(y, v)        -> v.shape          directional derivative at y
    f_second(y, u, v)    -> broadcast(u, v)  bilinear, symmetric in (u, v)
    b(y, m)              -> batch + (m, n)   rows are B(y) e_r
    b_prime(y, u, m)     -> u.shape[:-1] + (m, n)   new basis axis appended
    b_second(y, u, v, m) -> broadcast(u, v).shape[:-1] + (m, n)

The built-in diagnostic is a 1-D stochastic heat equation: modes k = 1..n_h
with a_k = -nu pi^2 k^2, covariance eigenvalues lambda_r = r^{-2}, a bounded
smooth drift, and a diffusion that either mixes modes through per-component
matrices (genuinely non-commutative) or acts diagonally (commutative), with
component norms decaying like r^{-1} so the regularity exponent 1/2 applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .qwiener import QWienerSpec


def _align(prefactor: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Insert singleton axes so a batch + (n,) field multiplies a
    batch + extra + (n,) argument elementwise."""
    u = np.asarray(u)
    extra = u.ndim - prefactor.ndim
    if extra < 0:
        raise ValueError("argument has fewer axes than the state field")
    shape = prefactor.shape[:-1] + (1,) * extra + prefactor.shape[-1:]
    return prefactor.reshape(shape)


@dataclass(frozen=True)
class GalerkinModel:
    n_h: int
    a_spectrum: np.ndarray
    qspec: QWienerSpec
    initial: np.ndarray
    f: Callable
    f_prime: Callable
    f_second: Callable
    b: Callable
    b_prime: Callable
    b_second: Callable

    def __post_init__(self):
        if self.a_spectrum.shape != (self.n_h,) or self.initial.shape != (self.n_h,):
            raise ValueError("spectrum and initial value must have length n_h")

    def drift_total(self, y):
        """A y + F(y), the argument of the gradient-type terms."""
        return self.a_spectrum * y + self.f(y)


def heat_model(n_h: int = 16, nu: float = 0.02, f_amp: float = 0.5,
               noise: str = "mixing", sigma: float = 0.4,
               mix_seed: int = 7) -> GalerkinModel:
    """Stochastic heat equation in spectral coordinates.

    noise:
      "mixing"   per-component mixing matrices Gamma_r (non-commutative)
      "diagonal" shared smooth factor times fixed component vectors
                 (commutative: second-order images are r1 <-> r2 symmetric)
      "off"      zero diffusion
    ``f_amp = 0`` switches the drift nonlinearity off.
    """
    if noise not in ("mixing", "diagonal", "off"):
        raise ValueError("noise must be 'mixing', 'diagonal', or 'off'")
    k = np.arange(1, n_h + 1, dtype=float)
    a_spectrum = -nu * math.pi**2 * k**2
    initial = np.sin(k) / k**2
    qspec = QWienerSpec.power_law(c=1.0, rho=2.0)

    def f(y):
        return f_amp * np.sin(y)

    def f_prime(y, v):
        v = np.asarray(v)
        return _align(f_amp * np.cos(y), v) * v

    def f_second(y, u, v):
        uv = np.asarray(u) * np.asarray(v)
        return _align(-f_amp * np.sin(y), uv) * uv

    # fixed, reproducible diffusion structure; component scale r^{-1} keeps
    # the images inside the trace-weighted regularity class
    rng = np.random.default_rng(mix_seed)
    max_m = 64
    scale = sigma / np.arange(1, max_m + 1, dtype=float)
    if noise == "mixing":
        gam = rng.standard_normal((max_m, n_h, n_h)) / math.sqrt(n_h)
        base = rng.standard_normal((max_m, n_h)) / math.sqrt(n_h)

        def b(y, m):
            y = np.asarray(y)
            mixed = np.einsum("rkl,...l->...rk", gam[:m], np.sin(y))
            return scale[:m, None] * (base[:m] + mixed)

        def b_prime(y, u, m):
            w = _align(np.cos(np.asarray(y)), u) * u
            out = np.einsum("rkl,...l->...rk", gam[:m], w)
            return scale[:m, None] * out

        def b_second(y, u, v, m):
            uv = np.asarray(u) * np.asarray(v)
            w = _align(-np.sin(np.asarray(y)), uv) * uv
            out = np.einsum("rkl,...l->...rk", gam[:m], w)
            return scale[:m, None] * out

    elif noise == "diagonal":
        direction = 0.5 + rng.random((max_m, n_h))
        sd = scale[:max_m, None] * direction

        def b(y, m):
            y = np.asarray(y)
            fac = 1.0 + 0.5 * np.sin(y)
            return sd[:m] * fac[..., None, :]

        def b_prime(y, u, m):
            w = _align(0.5 * np.cos(np.asarray(y)), u) * u
            return np.einsum("rk,...k->...rk", sd[:m], w)

        def b_second(y, u, v, m):
            uv = np.asarray(u) * np.asarray(v)
            w = _align(-0.5 * np.sin(np.asarray(y)), uv) * uv
            return np.einsum("rk,...k->...rk", sd[:m], w)

    else:
        def b(y, m):
            return np.zeros(np.shape(y)[:-1] + (m, n_h))

        def b_prime(y, u, m):
            return np.zeros(np.shape(u)[:-1] + (m, n_h))

        def b_second(y, u, v, m):
            shape = np.broadcast_shapes(np.shape(u), np.shape(v))
            return np.zeros(shape[:-1] + (m, n_h))

    return GalerkinModel(n_h=n_h, a_spectrum=a_spectrum, qspec=qspec,
                         initial=initial, f=f, f_prime=f_prime,
                         f_second=f_second, b=b, b_prime=b_prime,
                         b_second=b_second)


def linear_drift_model(n_h: int = 4, rate: float = -0.8,
                       f_rate: float = 0.3) -> GalerkinModel:
    """Noise-free model with linear drift F(y) = f_rate * y, for exact checks."""
    base = heat_model(n_h=n_h, noise="off")

    def f(y):
        return f_rate * np.asarray(y)

    def f_prime(y, v):
        return f_rate * np.asarray(v)

    def f_second(y, u, v):
        return np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)))

    return GalerkinModel(n_h=n_h, a_spectrum=np.full(n_h, rate),
                         qspec=base.qspec, initial=np.linspace(0.5, 1.0, n_h),
                         f=f, f_prime=f_prime, f_second=f_second,
                         b=base.b, b_prime=base.b_prime, b_second=base.b_second)
