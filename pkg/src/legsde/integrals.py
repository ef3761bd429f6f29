"""Gaussian-basis sampling and scalar iterated Ito integral approximations.

All approximations over one step [t, T] are driven by the matrix of basis
projections zeta[i, j] = int_t^T phi_j(s) dw_s^{(i)}, which are i.i.d.
standard normals.  Wiener components are numbered 1..m throughout (matching
the spectral index set of the driving noise); index 0 denotes the time
component where the general expansion supports it.

The per-step working set:

    I1(r)            = sqrt(T-t) zeta_0^{(r)}                        (exact)
    I01(r) / I10(r)  = (T-t)^{3/2}/2 (zeta_0 +/- zeta_1/sqrt(3))     (exact)
    I11(r1,r2; q)    = antisymmetric Legendre series + equal-index drift
    I111(r1,r2,r3;q1)= triple series with three pair corrections

Functions broadcast over leading batch axes of the draw matrix, so a Monte
Carlo batch is just an extra axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoeffTensor

#: default guard on the number of Wiener components kept per step; the
#: bundle allocates the full (m, m) and (m, m, m) boxes eagerly.
MAX_COMPONENTS = 64


def basis_stream(root_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent substream for one path.

    Substreams are derived from a single root seed through the SeedSequence
    spawn-key mechanism with the path index as the key, so any path can be
    regenerated in isolation and paths can run in parallel.
    """
    return np.random.default_rng(np.random.SeedSequence(root_seed,
                                                        spawn_key=(stream_id,)))


@dataclass(frozen=True)
class GaussianBasisDraws:
    """Basis projections zeta for one step: values[..., i-1, j], i = 1..m."""

    m: int
    q_max: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[-2:] != (self.m, self.q_max + 1):
            raise ValueError("draw matrix shape does not match (m, q_max+1)")

    def zeta(self, r: int, j: int):
        if not 1 <= r <= self.m:
            raise ValueError(f"component {r} outside 1..{self.m}")
        return self.values[..., r - 1, j]


def draw_basis(rng: np.random.Generator, m: int, q_max: int,
               batch: tuple[int, ...] = ()) -> GaussianBasisDraws:
    """Fill the zeta matrix from a deterministic stream; reproducible."""
    if m < 1 or q_max < 0:
        raise ValueError("need m >= 1 and q_max >= 0")
    values = rng.standard_normal(batch + (m, q_max + 1))
    return GaussianBasisDraws(m=m, q_max=q_max, values=values)


# ---------------------------------------------------------------------------
# Scalar approximations, Legendre basis
# ---------------------------------------------------------------------------

def approx_I1(draws: GaussianBasisDraws, r: int, step: float):
    return math.sqrt(step) * draws.zeta(r, 0)


def approx_I01(draws: GaussianBasisDraws, r: int, step: float):
    """Time-outer mixed integral int_t^T (s - t) dw_s; exact in zeta_0, zeta_1."""
    return step**1.5 / 2.0 * (draws.zeta(r, 0) + draws.zeta(r, 1) / math.sqrt(3.0))


def approx_I10(draws: GaussianBasisDraws, r: int, step: float):
    """Wiener-inner mixed integral int_t^T (W_s - W_t) ds; exact."""
    return step**1.5 / 2.0 * (draws.zeta(r, 0) - draws.zeta(r, 1) / math.sqrt(3.0))


def approx_I11(draws: GaussianBasisDraws, r1: int, r2: int, q: int, step: float):
    """Double integral at truncation q.

    (T-t)/2 [ zeta_0^{(r1)} zeta_0^{(r2)}
              + sum_{i=1}^{q} (zeta_{i-1}^{(r1)} zeta_i^{(r2)}
                               - zeta_i^{(r1)} zeta_{i-1}^{(r2)}) / sqrt(4i^2-1)
              - 1_{r1 = r2} ]
    """
    if q > draws.q_max:
        raise ValueError(f"truncation q={q} exceeds available draws {draws.q_max}")
    z1 = draws.values[..., r1 - 1, :]
    z2 = draws.values[..., r2 - 1, :]
    acc = z1[..., 0] * z2[..., 0]
    if q > 0:
        w = 1.0 / np.sqrt(4.0 * np.arange(1, q + 1) ** 2 - 1.0)
        acc = acc + np.einsum("...i,...i->...", w * z1[..., :q], z2[..., 1:q + 1])
        acc = acc - np.einsum("...i,...i->...", w * z1[..., 1:q + 1], z2[..., :q])
    if r1 == r2:
        acc = acc - 1.0
    return step / 2.0 * acc


def _scaled_tensor(tensor: CoeffTensor, q1: int, step: float) -> np.ndarray:
    if tensor.k != 3:
        raise ValueError("order-3 tensor required")
    if q1 > tensor.max_index:
        raise ValueError(f"tensor covers indices up to {tensor.max_index}, "
                         f"requested {q1}")
    box = (slice(0, q1 + 1),) * 3
    sub = CoeffTensor(k=3, max_index=q1, entries=tensor.entries[box])
    return sub.scaled(step)


def approx_I111(draws: GaussianBasisDraws, r1: int, r2: int, r3: int,
                q1: int, tensor: CoeffTensor, step: float):
    """Triple integral at truncation q1.

    sum over the (q1+1)^3 coefficient box of
        C_{j3 j2 j1} ( z_{j1}^{(r1)} z_{j2}^{(r2)} z_{j3}^{(r3)}
                       - 1_{r1=r2} 1_{j1=j2} z_{j3}^{(r3)}
                       - 1_{r2=r3} 1_{j2=j3} z_{j1}^{(r1)}
                       - 1_{r1=r3} 1_{j1=j3} z_{j2}^{(r2)} ).
    """
    if q1 > draws.q_max:
        raise ValueError(f"truncation q1={q1} exceeds available draws {draws.q_max}")
    C = _scaled_tensor(tensor, q1, step)  # [j3, j2, j1]
    z1 = draws.values[..., r1 - 1, :q1 + 1]
    z2 = draws.values[..., r2 - 1, :q1 + 1]
    z3 = draws.values[..., r3 - 1, :q1 + 1]
    acc = np.einsum("cba,...a,...b,...c->...", C, z1, z2, z3)
    if r1 == r2:
        acc = acc - np.einsum("c,...c->...", np.einsum("cjj->c", C), z3)
    if r2 == r3:
        acc = acc - np.einsum("a,...a->...", np.einsum("jja->a", C), z1)
    if r1 == r3:
        acc = acc - np.einsum("b,...b->...", np.einsum("jbj->b", C), z2)
    return acc


def equal_index_triple(draws: GaussianBasisDraws, r: int, step: float):
    """Closed form for all components equal: (T-t)^{3/2}/6 (zeta_0^3 - 3 zeta_0)."""
    z0 = draws.zeta(r, 0)
    return step**1.5 / 6.0 * (z0**3 - 3.0 * z0)


def hermite_closed_form(k: int, delta, Delta):
    """Equal-index iterated integral of order k <= 5 as a polynomial in
    (delta, Delta) = (int psi dw, int psi^2 ds); Ito/Hermite identities.
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(np.asarray(Delta) < 0):
        raise ValueError("Delta must be nonnegative")
    forms = {
        1: lambda d, D: d,
        2: lambda d, D: (d**2 - D) / 2.0,
        3: lambda d, D: (d**3 - 3.0 * d * D) / 6.0,
        4: lambda d, D: (d**4 - 6.0 * d**2 * D + 3.0 * D**2) / 24.0,
        5: lambda d, D: (d**5 - 10.0 * d**3 * D + 15.0 * d * D**2) / 120.0,
    }
    if k not in forms:
        raise ValueError("closed forms are available for k in 1..5")
    out = forms[k](delta, np.asarray(Delta, dtype=float))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Pair partitions and the general order-k expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairPartition:
    """Disjoint unordered pairs from {1..k} plus the leftover singles."""

    pairs: tuple[tuple[int, int], ...]
    singles: tuple[int, ...]

    def __post_init__(self):
        seen = [i for p in self.pairs for i in p] + list(self.singles)
        if len(seen) != len(set(seen)):
            raise ValueError("pairs and singles must be disjoint")


def enumerate_pair_partitions(k: int, r: int) -> list[PairPartition]:
    """All ways to form r disjoint unordered pairs out of {1..k}.

    Count is k! / ((k-2r)! r! 2^r).
    """
    if r < 0 or 2 * r > k:
        raise ValueError("need 0 <= 2r <= k")
    out: list[PairPartition] = []

    def rec(remaining: tuple[int, ...], pairs: tuple[tuple[int, int], ...]):
        if len(pairs) == r:
            out.append(PairPartition(pairs=pairs, singles=remaining))
            return
        first, rest = remaining[0], remaining[1:]
        for idx, partner in enumerate(rest):
            rec(rest[:idx] + rest[idx + 1:], pairs + ((first, partner),))

    rec(tuple(range(1, k + 1)), ())
    return out


def approx_general_k(draws: GaussianBasisDraws, indices, truncations,
                     coeff, step: float):
    """Order-k expansion for arbitrary component indices (0 = time).

    ``coeff`` is either an ndarray indexed ``[j_k, ..., j_1]`` covering the
    truncated box, or a callable ``coeff(j_k, ..., j_1) -> float``.  For the
    time component the basis projections are deterministic:
    zeta_j^{(0)} = sqrt(T-t) * 1_{j=0}.

    For k = 2, 3 with the scaled coefficient tensors this reproduces
    ``approx_I11`` / ``approx_I111`` on identical draws.
    """
    indices = tuple(indices)
    truncations = tuple(truncations)
    k = len(indices)
    if len(truncations) != k:
        raise ValueError("one truncation per index is required")
    if callable(coeff):
        accessor = coeff
    else:
        arr = np.asarray(coeff)
        if arr.ndim != k or any(arr.shape[k - 1 - pos] < truncations[pos] + 1
                                for pos in range(k)):
            raise ValueError("coefficient box does not cover the truncations")
        accessor = lambda *jk_to_j1: arr[jk_to_j1]

    batch = draws.values.shape[:-2]
    time_col = np.full(batch, math.sqrt(step))

    def zeta(pos: int, j: int):
        i = indices[pos - 1]
        if i == 0:
            return time_col if j == 0 else np.zeros(batch)
        return draws.zeta(i, j)

    partitions = [(r, p) for r in range(1, k // 2 + 1)
                  for p in enumerate_pair_partitions(k, r)]
    acc = np.zeros(batch)
    for j in itertools.product(*(range(p + 1) for p in truncations)):
        # j[pos-1] is the basis index attached to position pos (1-based)
        c = accessor(*j[::-1])
        if c == 0:
            continue
        term = np.ones(batch)
        for pos in range(1, k + 1):
            term = term * zeta(pos, j[pos - 1])
        for r, part in partitions:
            if any(indices[a - 1] != indices[b - 1] or indices[a - 1] == 0
                   or j[a - 1] != j[b - 1] for a, b in part.pairs):
                continue
            sub = np.ones(batch)
            for pos in part.singles:
                sub = sub * zeta(pos, j[pos - 1])
            term = term + (-1.0) ** r * sub
        acc = acc + c * term
    return acc if acc.ndim else float(acc)


# ---------------------------------------------------------------------------
# Per-step bundle over the spectral index box
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ItoIntegralBundle:
    """All scalar integrals one scheme step needs, over components 1..m.

    Arrays are batched like the draws: I1/I01/I10 have shape (..., m),
    I11 (..., m, m), I111 (..., m, m, m); entry [r1-1, r2-1, r3-1] holds the
    (r1, r2, r3) integral.
    """

    step: float
    q: int
    q1: int
    m: int
    I1: np.ndarray
    I01: np.ndarray
    I10: np.ndarray
    I11: np.ndarray
    I111: np.ndarray | None

    def component(self, name: str, *rs):
        arr = getattr(self, name)
        return arr[(..., *(r - 1 for r in rs))]


def build_bundle(draws: GaussianBasisDraws, step: float, q: int,
                 q1: int | None = None, tensor: CoeffTensor | None = None,
                 max_components: int = MAX_COMPONENTS) -> ItoIntegralBundle:
    """Assemble the full index-box bundle from one draw matrix.

    The third-order box is filled only when a coefficient tensor is supplied;
    memory grows like m^3, hence the component cap.
    """
    m = draws.m
    if m > max_components:
        raise ValueError(f"m={m} exceeds component cap {max_components}")
    if q > draws.q_max:
        raise ValueError(f"truncation q={q} exceeds available draws {draws.q_max}")
    Z = draws.values
    sqrt_step = math.sqrt(step)
    I1 = sqrt_step * Z[..., 0]
    half = step**1.5 / 2.0
    I01 = half * (Z[..., 0] + Z[..., 1] / math.sqrt(3.0))
    I10 = half * (Z[..., 0] - Z[..., 1] / math.sqrt(3.0))

    I11 = np.einsum("...r,...s->...rs", Z[..., 0], Z[..., 0])
    if q > 0:
        w = 1.0 / np.sqrt(4.0 * np.arange(1, q + 1) ** 2 - 1.0)
        lo = Z[..., :, :q]
        hi = Z[..., :, 1:q + 1]
        I11 = I11 + np.einsum("...ri,...si->...rs", w * lo, hi)
        I11 = I11 - np.einsum("...ri,...si->...rs", w * hi, lo)
    eye = np.eye(m)
    I11 = step / 2.0 * (I11 - eye)

    I111 = None
    if tensor is not None:
        if q1 is None:
            raise ValueError("q1 is required together with a tensor")
        if q1 > draws.q_max:
            raise ValueError(f"truncation q1={q1} exceeds available draws "
                             f"{draws.q_max}")
        C = _scaled_tensor(tensor, q1, step)
        Zq = Z[..., :, :q1 + 1]
        I111 = np.einsum("cba,...ra,...sb,...tc->...rst", C, Zq, Zq, Zq)
        # pair corrections act on the three diagonal planes of the box
        t3 = np.einsum("c,...rc->...r", np.einsum("cjj->c", C), Zq)
        t1 = np.einsum("a,...ra->...r", np.einsum("jja->a", C), Zq)
        t2 = np.einsum("b,...rb->...r", np.einsum("jbj->b", C), Zq)
        for r in range(m):
            I111[..., r, r, :] -= t3
            I111[..., :, r, r] -= t1
            I111[..., r, :, r] -= t2
    return ItoIntegralBundle(step=step, q=q, q1=-1 if q1 is None else q1, m=m,
                             I1=I1, I01=I01, I10=I10, I11=I11, I111=I111)


# ---------------------------------------------------------------------------
# Exact aggregation of bundles over consecutive subintervals
# ---------------------------------------------------------------------------

def aggregate_bundles(bundles: list[ItoIntegralBundle]) -> ItoIntegralBundle:
    """Combine integrals over consecutive steps into one coarse-step bundle.

    The chain rules are exact pathwise identities (split the ordering simplex
    by which subinterval each time falls into), so a coarse path driven by the
    aggregate sees the same noise realization as the fine path:

        I1   <- I1_L + I1_R
        I01  <- I01_L + I01_R + len_L * I1_R
        I11  <- I11_L + I11_R + I1_L (x) I1_R
        I111 <- I111_L + I111_R + I11_L (x) I1_R + I1_L (x) I11_R

    and I10 = step * I1 - I01.
    """
    if not bundles:
        raise ValueError("need at least one bundle")
    first = bundles[0]
    step = first.step
    acc1 = first.I1.copy()
    acc01 = first.I01.copy()
    acc11 = first.I11.copy()
    acc111 = None if first.I111 is None else first.I111.copy()
    elapsed = first.step
    for b in bundles[1:]:
        if b.m != first.m:
            raise ValueError("component counts differ across bundles")
        if acc111 is not None:
            if b.I111 is None:
                raise ValueError("third-order box missing in a later bundle")
            acc111 = (acc111 + b.I111
                      + np.einsum("...rs,...t->...rst", acc11, b.I1)
                      + np.einsum("...r,...st->...rst", acc1, b.I11))
        acc11 = acc11 + b.I11 + np.einsum("...r,...s->...rs", acc1, b.I1)
        acc01 = acc01 + b.I01 + elapsed * b.I1
        acc1 = acc1 + b.I1
        elapsed += b.step
        step += b.step
    return ItoIntegralBundle(step=step, q=first.q, q1=first.q1, m=first.m,
                             I1=acc1, I01=acc01, I10=step * acc1 - acc01,
                             I11=acc11, I111=acc111)


def draws_from_bundle(bundle: ItoIntegralBundle) -> GaussianBasisDraws:
    """Recover the first two basis projections of the bundle's interval.

    zeta_0 = I1 / sqrt(step) and zeta_1 = sqrt(3) (2 I01 / step^{3/2} - zeta_0)
    invert the exact I1/I01 formulas; an aggregated bundle thereby yields a
    valid (q_max = 1) draw matrix for its coarse interval.
    """
    step = bundle.step
    z0 = bundle.I1 / math.sqrt(step)
    z1 = math.sqrt(3.0) * (2.0 * bundle.I01 / step**1.5 - z0)
    values = np.stack([z0, z1], axis=-1)
    return GaussianBasisDraws(m=bundle.m, q_max=1, values=values)
