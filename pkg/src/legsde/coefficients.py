"""Exact Fourier-Legendre coefficients of iterated-integral kernels.

The unscaled coefficients live on the reference cube [-1, 1]^k and are pure
rationals, independent of the step length:

    cbar(j2, j1)     = int_{-1}^{1} P_{j2}(y) int_{-1}^{y} P_{j1}(x) dx dy
    cbar(j3, j2, j1) = int_{-1}^{1} P_{j3}(z) int_{-1}^{z} P_{j2}(y)
                           int_{-1}^{y} P_{j1}(x) dx dy dz

They are computed once by symbolic antiderivatives of the exact Legendre
polynomials and cached; floats enter only through ``scale_coeff``.  Residuals
(the Parseval defect of a truncated expansion) are kept exact as well, so
truncation-selection thresholds are free of roundoff.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .legendre import PolyRational, legendre_poly

#: squared L2 norm of the order-k simplex kernel on the unit-step cube
#: (volume of {t1 < ... < tk}), i.e. I_k / (T-t)^k.
UNIT_KERNEL_NORM2 = {2: Fraction(1, 2), 3: Fraction(1, 6)}

DEFAULT_SEARCH_CAP = 10**6


@lru_cache(maxsize=None)
def _inner_antiderivative(j1: int) -> PolyRational:
    return legendre_poly(j1).antiderivative_from()


@lru_cache(maxsize=None)
def _middle_antiderivative(j2: int, j1: int) -> PolyRational:
    return (legendre_poly(j2) * _inner_antiderivative(j1)).antiderivative_from()


@lru_cache(maxsize=None)
def cbar_double(j2: int, j1: int) -> Fraction:
    """Exact order-2 reference-cube coefficient."""
    if j1 < 0 or j2 < 0:
        raise ValueError("indices must be nonnegative")
    return (legendre_poly(j2) * _inner_antiderivative(j1)).integrate()


@lru_cache(maxsize=None)
def cbar_triple(j3: int, j2: int, j1: int) -> Fraction:
    """Exact order-3 reference-cube coefficient."""
    if min(j1, j2, j3) < 0:
        raise ValueError("indices must be nonnegative")
    return (legendre_poly(j3) * _middle_antiderivative(j2, j1)).integrate()


def _cbar(indices: tuple[int, ...]) -> Fraction:
    if len(indices) == 2:
        return cbar_double(*indices)
    if len(indices) == 3:
        return cbar_triple(*indices)
    raise ValueError("only orders 2 and 3 are tabulated")


def scale_coeff(cbar: Fraction, indices, step: float) -> float:
    """Fourier coefficient on [t, T] from a reference-cube value.

    C = sqrt(prod(2 j + 1)) * (T-t)^{k/2} / 2^k * cbar, with k = len(indices).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    k = len(indices)
    scale = math.sqrt(math.prod(2 * j + 1 for j in indices)) * step ** (k / 2.0) / 2**k
    return float(cbar) * scale


@dataclass(frozen=True)
class CoeffTensor:
    """Dense box of exact reference-cube coefficients of one order.

    ``entries`` is an object ndarray of Fractions of shape (q+1,)*k, indexed
    ``entries[j_k, ..., j_1]``.  Values do not depend on the step; immutable
    and shareable after construction.
    """

    k: int
    max_index: int
    entries: np.ndarray

    def __post_init__(self):
        if self.k not in (2, 3):
            raise ValueError("order must be 2 or 3")
        if self.entries.shape != (self.max_index + 1,) * self.k:
            raise ValueError("entry box does not match declared max index")

    def entry(self, *indices) -> Fraction:
        return self.entries[indices]

    def scaled(self, step: float) -> np.ndarray:
        """Float array of scaled coefficients C for the given step."""
        out = np.empty(self.entries.shape, dtype=float)
        for idx in np.ndindex(self.entries.shape):
            # entries are indexed [j_k, ..., j_1]; scale is symmetric in them
            out[idx] = scale_coeff(self.entries[idx], idx, step)
        return out

    def sum_hat_squares(self, q_sub: int | None = None) -> Fraction:
        """Exact sum of squared unit-step coefficients over the sub-box."""
        q_sub = self.max_index if q_sub is None else q_sub
        if q_sub > self.max_index:
            raise ValueError(f"tensor covers indices up to {self.max_index}, "
                             f"requested {q_sub}")
        total = Fraction(0)
        for idx in itertools.product(range(q_sub + 1), repeat=self.k):
            c = self.entries[idx]
            if c:
                total += Fraction(math.prod(2 * j + 1 for j in idx), 4**self.k) * c * c
        return total

    def __eq__(self, other):
        return (isinstance(other, CoeffTensor) and self.k == other.k
                and self.max_index == other.max_index
                and all(self.entries[i] == other.entries[i]
                        for i in np.ndindex(self.entries.shape)))


def build_coeff_tensor(k: int, q: int) -> CoeffTensor:
    """Compute the full coefficient box for order k up to index q."""
    if k not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if q < 0:
        raise ValueError("max index must be nonnegative")
    entries = np.empty((q + 1,) * k, dtype=object)
    for idx in np.ndindex(entries.shape):
        entries[idx] = _cbar(idx)
    return CoeffTensor(k=k, max_index=q, entries=entries)


# ---------------------------------------------------------------------------
# Mean-square truncation residuals
# ---------------------------------------------------------------------------

def pairwise_residual(q: int, step: float) -> float:
    """Mean-square error of the order-2 expansion truncated at q
    (components pairwise different).

    Defined as (T-t)^2/2 * (1/2 - sum_{i=1}^{q} 1/(4 i^2 - 1)).  Since
    1/(4i^2-1) = (1/2)(1/(2i-1) - 1/(2i+1)), the sum telescopes to
    q/(2q+1), which gives the equivalent closed form (T-t)^2 / (4 (2q+1))
    used here (derived, not tabulated).
    """
    if q < 0:
        raise ValueError("truncation must be nonnegative")
    if step <= 0:
        raise ValueError("step must be positive")
    return float(_pairwise_residual_fraction(q, Fraction(step)))


def _pairwise_residual_fraction(q: int, step: Fraction) -> Fraction:
    return step * step / (4 * (2 * q + 1))


_TRIPLE_GAP_CACHE: list[Fraction] = []  # unit-step defect at q1 = 0, 1, ...


def _triple_gap_fraction(q1: int) -> Fraction:
    """Exact unit-step defect 1/6 - sum_{box q1} hatC^2, cached incrementally."""
    while len(_TRIPLE_GAP_CACHE) <= q1:
        n = len(_TRIPLE_GAP_CACHE)
        prev = _TRIPLE_GAP_CACHE[-1] if n else UNIT_KERNEL_NORM2[3]
        shell = Fraction(0)
        for idx in itertools.product(range(n + 1), repeat=3):
            if max(idx) == n:
                c = cbar_triple(*idx)
                if c:
                    shell += Fraction(math.prod(2 * j + 1 for j in idx), 64) * c * c
        _TRIPLE_GAP_CACHE.append(prev - shell)
    return _TRIPLE_GAP_CACHE[q1]


def triple_residual(q1: int, step: float, tensor: CoeffTensor) -> float:
    """Mean-square error of the order-3 expansion truncated at q1
    (components pairwise different): (T-t)^3/6 - sum_{box q1} C^2.
    """
    if tensor.k != 3:
        raise ValueError("order-3 tensor required")
    if q1 > tensor.max_index:
        raise ValueError(f"tensor covers indices up to {tensor.max_index}, "
                         f"requested {q1}")
    if step <= 0:
        raise ValueError("step must be positive")
    gap = UNIT_KERNEL_NORM2[3] - tensor.sum_hat_squares(q1)
    return float(gap * Fraction(step) ** 3)


def parseval_gap(k: int, q: int, step: float, tensor: CoeffTensor) -> float:
    """Parseval defect I_k - sum_{box q} C^2 of the truncated kernel."""
    if tensor.k != k:
        raise ValueError(f"tensor order {tensor.k} does not match k={k}")
    if step <= 0:
        raise ValueError("step must be positive")
    gap = UNIT_KERNEL_NORM2[k] - tensor.sum_hat_squares(q)
    return float(gap * Fraction(step) ** k)


@dataclass(frozen=True)
class ResidualReport:
    k: int
    q: int
    step: float
    residual: float
    parseval_gap: float


def residual_report(k: int, q: int, step: float, tensor: CoeffTensor) -> ResidualReport:
    gap = parseval_gap(k, q, step, tensor)
    res = pairwise_residual(q, step) if k == 2 else triple_residual(q, step, tensor)
    return ResidualReport(k=k, q=q, step=step, residual=res, parseval_gap=gap)


# ---------------------------------------------------------------------------
# Minimal truncation selection (residual <= step^4)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimalQReport:
    """Smallest q meeting the criterion, with residuals around the decision.

    ``residuals`` maps q-1, q, q+1 (q-1 omitted when q == 0) to the exact
    residual as a float.  ``boundary`` is set when the accept/reject decision
    at q or q-1 sat within 3% of the threshold, i.e. printed-table entries
    one off from ours are plausible roundings.
    """

    step: float
    kind: str
    q: int
    residuals: dict[int, float]
    boundary: bool


def _residual_fraction(kind: str, q: int, step: Fraction) -> Fraction:
    if kind == "pairwise":
        return _pairwise_residual_fraction(q, step)
    if kind == "triple":
        return _triple_gap_fraction(q) * step**3
    raise ValueError("kind must be 'pairwise' or 'triple'")


def minimal_q_report(step: float, kind: str,
                     cap: int = DEFAULT_SEARCH_CAP) -> MinimalQReport:
    """Search for the smallest truncation with residual <= step^4, exactly."""
    if not 0 < step < 1:
        raise ValueError("step must lie in (0, 1)")
    s = Fraction(step)
    threshold = s**4
    q = None
    if kind == "pairwise":
        # residual = s^2 / (4 (2q+1)) <= s^4  <=>  2q+1 >= 1 / (4 s^2)
        need = 1 / (4 * s * s)
        q = max(0, math.ceil((need - 1) / 2))
        while q > 0 and _residual_fraction(kind, q - 1, s) <= threshold:
            q -= 1
        if q > cap:
            raise RuntimeError(f"search exceeded cap {cap}")
    else:
        for cand in range(cap + 1):
            if _residual_fraction(kind, cand, s) <= threshold:
                q = cand
                break
        if q is None:
            raise RuntimeError(f"search exceeded cap {cap}")
    residuals = {n: float(_residual_fraction(kind, n, s))
                 for n in range(max(0, q - 1), q + 2)}
    near = Fraction(3, 100)
    boundary = abs(_residual_fraction(kind, q, s) - threshold) <= near * threshold
    if q > 0:
        boundary = boundary or (
            abs(_residual_fraction(kind, q - 1, s) - threshold) <= near * threshold)
    return MinimalQReport(step=step, kind=kind, q=q, residuals=residuals,
                          boundary=boundary)


def minimal_q(step: float, kind: str, cap: int = DEFAULT_SEARCH_CAP) -> int:
    return minimal_q_report(step, kind, cap).q


# ---------------------------------------------------------------------------
# Plain-text coefficient cache (FLC format)
# ---------------------------------------------------------------------------
#
# line 1 : FLC 1 k=<k> q=<q>
# lines  : <j_k> ... <j_1> <numerator>/<denominator>   (lexicographic order,
#          zeros included, no omissions)
# last   : END <entry-count>

class CacheError(Exception):
    """Base class for coefficient-cache file problems."""


class MalformedHeaderError(CacheError):
    pass


class DeclaredOrderError(CacheError):
    pass


class TruncatedCacheError(CacheError):
    pass


class EntryCountError(CacheError):
    pass


class CacheEntryError(CacheError):
    pass


def save_cache(tensor: CoeffTensor, path) -> None:
    lines = [f"FLC 1 k={tensor.k} q={tensor.max_index}"]
    count = 0
    for idx in itertools.product(range(tensor.max_index + 1), repeat=tensor.k):
        c = tensor.entries[idx]
        lines.append(" ".join(str(j) for j in idx)
                     + f" {c.numerator}/{c.denominator}")
        count += 1
    lines.append(f"END {count}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_cache(path, expect_k: int | None = None) -> CoeffTensor:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].strip():
        raise MalformedHeaderError("empty cache file")
    head = lines[0].split()
    if (len(head) != 4 or head[0] != "FLC" or head[1] != "1"
            or not head[2].startswith("k=") or not head[3].startswith("q=")):
        raise MalformedHeaderError(f"unrecognized header: {lines[0]!r}")
    try:
        k = int(head[2][2:])
        q = int(head[3][2:])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer header fields: {lines[0]!r}") from exc
    if k not in (2, 3):
        raise DeclaredOrderError(f"unsupported order k={k}")
    if expect_k is not None and k != expect_k:
        raise DeclaredOrderError(f"cache declares order k={k}, expected {expect_k}")
    if q < 0:
        raise MalformedHeaderError(f"negative max index q={q}")

    expected = list(itertools.product(range(q + 1), repeat=k))
    body = [ln for ln in lines[1:] if ln.strip()]
    if not body or not body[-1].startswith("END"):
        raise TruncatedCacheError("missing END line")
    end_parts = body[-1].split()
    if len(end_parts) != 2:
        raise MalformedHeaderError(f"unrecognized END line: {body[-1]!r}")
    try:
        declared = int(end_parts[1])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer END count: {body[-1]!r}") from exc
    entry_lines = body[:-1]
    if len(entry_lines) < len(expected):
        raise TruncatedCacheError(
            f"expected {len(expected)} entries, file holds {len(entry_lines)}")
    if declared != len(entry_lines) or declared != len(expected):
        raise EntryCountError(
            f"END count {declared} disagrees with header box "
            f"({len(expected)}) or body ({len(entry_lines)})")

    entries = np.empty((q + 1,) * k, dtype=object)
    for lineno, (ln, idx) in enumerate(zip(entry_lines, expected), start=2):
        parts = ln.split()
        if len(parts) != k + 1:
            raise CacheEntryError(f"line {lineno}: expected {k} indices and a value")
        try:
            got = tuple(int(p) for p in parts[:k])
            num, den = parts[k].split("/")
            value = Fraction(int(num), int(den))
        except (ValueError, ZeroDivisionError) as exc:
            raise CacheEntryError(f"line {lineno}: unparsable entry {ln!r}") from exc
        if got != idx:
            raise CacheEntryError(
                f"line {lineno}: index {got} out of order, expected {idx}")
        entries[idx] = value
    return CoeffTensor(k=k, max_index=q, entries=entries)


def cache_checksum(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
