"""Spectral truncation of the driving noise and operator-integral assembly.

The driving noise is characterized by its covariance eigenvalues lambda_i
(trace class, indices 1, 2, ...).  Operator evaluations enter as precomputed
coordinate vectors per basis index -- "images" -- which keeps the assembly
model-agnostic:

    b_images[r-1]          = B(Z) e_r            shape (M, n)
    bb_images[r1-1, r2-1]  = B'(Z)(B(Z)e_r1)e_r2 shape (M, M, n)
    ...

All assemblies are linear in the images and broadcast over leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .integrals import GaussianBasisDraws, ItoIntegralBundle


@dataclass(frozen=True)
class QWienerSpec:
    """Eigenvalue sequence of the noise covariance, 1-based.

    Either a decay law (callable i -> lambda_i with a known trace) or an
    explicit finite list.  Eigenvalues must be positive; the default laws are
    non-increasing, which ``truncate_spectrum`` relies on for the tail
    supremum.
    """

    law: Callable[[int], float] | None = None
    explicit: tuple[float, ...] | None = None
    trace: float = field(default=float("nan"))

    def __post_init__(self):
        if (self.law is None) == (self.explicit is None):
            raise ValueError("provide exactly one of law or explicit list")
        if self.explicit is not None and any(v <= 0 for v in self.explicit):
            raise ValueError("eigenvalues must be positive")

    @staticmethod
    def power_law(c: float = 1.0, rho: float = 2.0) -> "QWienerSpec":
        """lambda_i = c * i^{-rho}, rho > 1; trace = c * zeta(rho)."""
        if rho <= 1:
            raise ValueError("need rho > 1 for a finite trace")
        from scipy.special import zeta
        return QWienerSpec(law=lambda i: c * i ** (-rho), trace=c * float(zeta(rho)))

    @staticmethod
    def geometric(ratio: float = 0.5) -> "QWienerSpec":
        """lambda_i = ratio^i; trace = ratio / (1 - ratio)."""
        if not 0 < ratio < 1:
            raise ValueError("need ratio in (0, 1)")
        return QWienerSpec(law=lambda i: ratio**i, trace=ratio / (1.0 - ratio))

    @staticmethod
    def from_list(values: Sequence[float]) -> "QWienerSpec":
        vals = tuple(float(v) for v in values)
        return QWienerSpec(explicit=vals, trace=sum(vals))

    def eigenvalue(self, i: int) -> float:
        if i < 1:
            raise ValueError("eigenvalue indices start at 1")
        if self.explicit is not None:
            if i > len(self.explicit):
                raise ValueError(f"explicit spectrum has {len(self.explicit)} values")
            return self.explicit[i - 1]
        return self.law(i)


def truncate_spectrum(spec: QWienerSpec, M: int) -> tuple[np.ndarray, float]:
    """First M eigenvalues and the supremum of the remainder.

    For a non-increasing sequence the tail supremum is lambda_{M+1}; the
    non-increasing property is checked on the available prefix and violations
    are rejected.
    """
    if M < 1:
        raise ValueError("need M >= 1")
    if spec.explicit is not None:
        vals = np.asarray(spec.explicit, dtype=float)
        if np.any(np.diff(vals) > 0):
            raise ValueError("explicit spectrum is not non-increasing")
        if M > len(vals):
            raise ValueError(f"explicit spectrum has {len(vals)} values")
        head = vals[:M]
        tail_sup = float(vals[M:].max()) if M < len(vals) else 0.0
        return head, tail_sup
    head = np.array([spec.eigenvalue(i) for i in range(1, M + 1)])
    nxt = spec.eigenvalue(M + 1)
    if np.any(np.diff(np.append(head, nxt)) > 1e-15):
        raise ValueError("spectrum law is not non-increasing")
    return head, float(nxt)


def _sqrt_lambda(spec: QWienerSpec, M: int) -> np.ndarray:
    head, _ = truncate_spectrum(spec, M)
    return np.sqrt(head)


def _check_images(images: np.ndarray, M: int, order: int) -> np.ndarray:
    images = np.asarray(images, dtype=float)
    if images.ndim < order + 1 or images.shape[-order - 1:-1] != (M,) * order:
        raise ValueError(f"expected image array with {order} leading index "
                         f"axes of size {M}")
    return images


# ---------------------------------------------------------------------------
# Single-sum assemblies (exact in zeta_0, zeta_1)
# ---------------------------------------------------------------------------

def assemble_J1(b_images, draws: GaussianBasisDraws, spec: QWienerSpec,
                M: int, step: float) -> np.ndarray:
    """sqrt(T-t) sum_r B(Z)e_r sqrt(lambda_r) zeta_0^{(r)}."""
    b = _check_images(b_images, M, 1)
    w = _sqrt_lambda(spec, M) * draws.values[..., :M, 0] * math.sqrt(step)
    return np.einsum("...r,rn->...n", w, b)


def assemble_J2(ab_images, draws: GaussianBasisDraws, spec: QWienerSpec,
                M: int, step: float) -> np.ndarray:
    """-(T-t)^{3/2}/(2 sqrt(3)) sum_r A B(Z)e_r sqrt(lambda_r) zeta_1^{(r)}."""
    ab = _check_images(ab_images, M, 1)
    w = _sqrt_lambda(spec, M) * draws.values[..., :M, 1]
    return -(step**1.5) / (2.0 * math.sqrt(3.0)) * np.einsum("...r,rn->...n", w, ab)


def assemble_J3(images, draws: GaussianBasisDraws, spec: QWienerSpec,
                M: int, step: float) -> np.ndarray:
    """(T-t)^{3/2}/2 sum_r B'(Z)(AZ+F(Z))e_r sqrt(lambda_r)
    (zeta_0 + zeta_1/sqrt(3)); the weight is the exact I01 coefficient."""
    im = _check_images(images, M, 1)
    z = (draws.values[..., :M, 0]
         + draws.values[..., :M, 1] / math.sqrt(3.0))
    w = _sqrt_lambda(spec, M) * z * step**1.5 / 2.0
    return np.einsum("...r,rn->...n", w, im)


def assemble_J4(images, draws: GaussianBasisDraws, spec: QWienerSpec,
                M: int, step: float) -> np.ndarray:
    """(T-t)^{3/2}/2 sum_r F'(Z)B(Z)e_r sqrt(lambda_r)
    (zeta_0 - zeta_1/sqrt(3)); the weight is the exact I10 coefficient."""
    im = _check_images(images, M, 1)
    z = (draws.values[..., :M, 0]
         - draws.values[..., :M, 1] / math.sqrt(3.0))
    w = _sqrt_lambda(spec, M) * z * step**1.5 / 2.0
    return np.einsum("...r,rn->...n", w, im)


# ---------------------------------------------------------------------------
# Multi-sum assemblies driven by the bundle
# ---------------------------------------------------------------------------

def assemble_I1(bb_images, bundle: ItoIntegralBundle, spec: QWienerSpec,
                M: int) -> np.ndarray:
    """sum_{r1,r2} B'(Z)(B(Z)e_r1)e_r2 sqrt(lambda_r1 lambda_r2) I11^{(r1 r2)}."""
    bb = _check_images(bb_images, M, 2)
    if bundle.m < M:
        raise ValueError(f"bundle covers {bundle.m} components, need {M}")
    s = _sqrt_lambda(spec, M)
    w = np.einsum("r,s,...rs->...rs", s, s, bundle.I11[..., :M, :M])
    return np.einsum("...rs,rsn->...n", w, bb)


def assemble_I2(bbb_images, bundle: ItoIntegralBundle, spec: QWienerSpec,
                M: int) -> np.ndarray:
    """Triple sum of B'(B'(B e_r1) e_r2) e_r3 weighted by I111^{(r1 r2 r3)}."""
    bbb = _check_images(bbb_images, M, 3)
    if bundle.I111 is None:
        raise ValueError("bundle lacks the third-order box")
    if bundle.m < M:
        raise ValueError(f"bundle covers {bundle.m} components, need {M}")
    s = _sqrt_lambda(spec, M)
    w = np.einsum("r,s,t,...rst->...rst", s, s, s, bundle.I111[..., :M, :M, :M])
    return np.einsum("...rst,rstn->...n", w, bbb)


def assemble_I3(b2_images, bundle: ItoIntegralBundle, spec: QWienerSpec,
                M: int) -> np.ndarray:
    """Triple sum of B''(B e_r1, B e_r2) e_r3 with the symmetrized weight
    I111^{(r1 r2 r3)} + I111^{(r2 r1 r3)} + 1_{r1=r2} I01^{(0 r3)}."""
    b2 = _check_images(b2_images, M, 3)
    if bundle.I111 is None:
        raise ValueError("bundle lacks the third-order box")
    if bundle.m < M:
        raise ValueError(f"bundle covers {bundle.m} components, need {M}")
    s = _sqrt_lambda(spec, M)
    box = bundle.I111[..., :M, :M, :M]
    comb = box + np.swapaxes(box, -3, -2)
    comb = comb + np.einsum("rs,...t->...rst", np.eye(M), bundle.I01[..., :M])
    w = np.einsum("r,s,t,...rst->...rst", s, s, s, comb)
    return np.einsum("...rst,rstn->...n", w, b2)


# ---------------------------------------------------------------------------
# Error-structure evaluation
# ---------------------------------------------------------------------------

def theorem3_bound(L_k: float, trace_q: float, k: int, gap: float) -> float:
    """Mean-square bound L_k (k!)^2 (tr Q)^k * (Parseval defect); the bound is
    independent of the spectral truncation M."""
    if min(L_k, trace_q, gap) < 0 or k < 1:
        raise ValueError("arguments must be nonnegative, k >= 1")
    return L_k * math.factorial(k) ** 2 * trace_q**k * gap


def theorem4_tail(spec: QWienerSpec, M: int, alpha: float) -> float:
    """M-dependent tail factor (sup_{i > M} lambda_i)^{2 alpha}.

    Only the decaying factor is computed; the multiplicative constants of the
    mean-square bounds are model-dependent and not estimated here.
    """
    if alpha <= 0:
        raise ValueError("need alpha > 0")
    _, tail_sup = truncate_spectrum(spec, M)
    return tail_sup ** (2.0 * alpha)


@dataclass(frozen=True)
class TruncationParams:
    """Joint truncation choice: spectral cut M, series cuts q and q1."""

    M: int
    q: int
    q1: int
    alpha: float = 0.5

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("need M >= 1")
        if self.q < 0 or self.q1 < 0:
            raise ValueError("need q, q1 >= 0")
        if self.alpha <= 0:
            raise ValueError("need alpha > 0")

    @property
    def q_max(self) -> int:
        return max(self.q, self.q1, 1)


@dataclass(frozen=True)
class OperatorBundle:
    """Assembled operator-valued integrals for one step, with provenance."""

    J1: np.ndarray
    J2: np.ndarray
    J3: np.ndarray
    J4: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    M: int
    q: int
    q1: int
    step: float
