"""Closed-form constants and the data they come from.

Covers the sharp Young convolution constant (forward and inverse ranges), its
regularized version, the regularized Prekopa-Leindler constant in dimension one
and the gaussian hypercontractivity datum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datum import Datum, ordered_datum

YOUNG_MAPS = (
    np.array([[1.0, 0.0]]),   # (x, y) -> x
    np.array([[0.0, 1.0]]),   # (x, y) -> y
    np.array([[1.0, -1.0]]),  # (x, y) -> x - y
)


def _xlogx_power(c):
    # |c|^c with the convention 0^0 = 1
    return 1.0 if c == 0 else abs(c) ** c


def young_factor(c):
    """``(|1-c|^{1-c} / |c|^c)^{1/2}``."""
    return math.sqrt(_xlogx_power(1 - c) / _xlogx_power(c))


def young_constant(c0, c1, c2):
    """Sharp constant of Young's convolution inequality, ``prod_j young_factor(c_j)``.

    The exponents are reciprocals of the Lebesgue exponents and must sum to 2.
    Forward range: all ``c_j`` in ``(0, 1]``.  Inverse range: exactly one
    exponent negative and the other two at least 1.
    """
    c = (float(c0), float(c1), float(c2))
    if abs(sum(c) - 2) > 1e-12:
        raise ValueError("Young exponents must sum to 2")
    forward = all(0 < x <= 1 for x in c)
    neg = [x for x in c if x < 0]
    inverse = len(neg) == 1 and all(x >= 1 for x in c if x >= 0)
    if not (forward or inverse):
        raise ValueError(f"exponents {c} are outside the forward and inverse ranges")
    return young_factor(c[0]) * young_factor(c[1]) * young_factor(c[2])


def regularized_factor(c, sigma):
    """``(sigma^{1-c} / c)^{1/2}`` for ``c > 0``."""
    if not (c > 0 and sigma > 0):
        raise ValueError("regularized factor needs c > 0 and sigma > 0")
    return math.sqrt(sigma ** (1 - c) / c)


@dataclass(frozen=True)
class YoungSpec:
    """Exponents ``c_j`` and regularization widths ``sigma_j`` for the Young datum.

    The widths satisfy ``sigma0/(1-c0) = sigma1/c1 + sigma2/c2``.
    """

    c0: float
    c1: float
    c2: float
    sigma0: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if min(self.sigma0, self.sigma1, self.sigma2) <= 0:
            raise ValueError("widths must be positive")
        if self.c0 == 1 or self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("need c0 != 1 and c1, c2 > 0")
        lhs = self.sigma0 / (1 - self.c0)
        rhs = self.sigma1 / self.c1 + self.sigma2 / self.c2
        if abs(lhs - rhs) > 1e-10 * max(abs(lhs), abs(rhs)):
            raise ValueError("widths violate sigma0/(1-c0) = sigma1/c1 + sigma2/c2")

    @classmethod
    def from_widths(cls, c0, c1, c2, sigma1, sigma2):
        """Complete the spec by solving the width relation for ``sigma0``."""
        sigma0 = (1 - c0) * (sigma1 / c1 + sigma2 / c2)
        return cls(c0, c1, c2, sigma0, sigma1, sigma2)

    @property
    def c(self):
        return (self.c0, self.c1, self.c2)

    @property
    def sigma(self):
        return (self.sigma0, self.sigma1, self.sigma2)

    @property
    def regime(self):
        if all(x > 0 for x in self.c):
            return "forward"
        return "inverse"


def young_gammas(c, a):
    """``Gamma_j(a) = 1/a_j - sum_{k != j} c_k a_k / D`` with
    ``D = c0 c1 a0 a1 + c0 c2 a0 a2 + c1 c2 a1 a2``.

    ``Gamma_j`` is the scalar ``A_j^{-1} - B_j M^{-1} B_j^T`` of the Young datum.
    """
    c0, c1, c2 = c
    a0, a1, a2 = a
    D = c0 * c1 * a0 * a1 + c0 * c2 * a0 * a2 + c1 * c2 * a1 * a2
    return (
        1 / a0 - (c1 * a1 + c2 * a2) / D,
        1 / a1 - (c0 * a0 + c2 * a2) / D,
        1 / a2 - (c0 * a0 + c1 * a1) / D,
    )


@dataclass
class YoungResult:
    constant: float
    condition_holds: bool
    condition_lhs: float
    condition_bounds: tuple
    gammas: tuple
    regime: str

    def to_dict(self):
        return {
            "constant": self.constant,
            "condition_holds": self.condition_holds,
            "condition_lhs": self.condition_lhs,
            "condition_bounds": list(self.condition_bounds),
            "gammas": list(self.gammas),
            "regime": self.regime,
        }


def young_regularized(spec: YoungSpec, regime=None) -> YoungResult:
    """Candidate regularized Young constant and its validity condition.

    The candidate is ``F(c1,s1) F(c2,s2) / F(1-c0,s0)`` with
    ``F = regularized_factor``.  It is the regularized constant when
    ``c0(1-c0)/s0 >= max_j c_j(1-c_j)/s_j`` (forward, all c_j in (0,1)) or
    ``c0(1-c0)/s0 <= min_j c_j(1-c_j)/s_j`` (inverse, c0 < 0 and c1, c2 > 1).
    """
    regime = regime or spec.regime
    c0, c1, c2 = spec.c
    s0, s1, s2 = spec.sigma
    if regime == "forward":
        if not all(0 < x < 1 for x in spec.c):
            raise ValueError("forward regime needs all exponents in (0, 1)")
    elif regime == "inverse":
        if not (c0 < 0 and c1 > 1 and c2 > 1):
            raise ValueError("inverse regime needs c0 < 0 and c1, c2 > 1")
    else:
        raise ValueError("regime must be 'forward' or 'inverse'")
    const = regularized_factor(c1, s1) * regularized_factor(c2, s2) / regularized_factor(1 - c0, s0)
    lhs = c0 * (1 - c0) / s0
    others = (c1 * (1 - c1) / s1, c2 * (1 - c2) / s2)
    if regime == "forward":
        holds = lhs >= max(others)
    else:
        holds = lhs <= min(others)
    gam = young_gammas(spec.c, (1 / s0, 1 / s1, 1 / s2))
    return YoungResult(const, bool(holds), lhs, others, gam, regime)


def young_datum(spec: YoungSpec):
    """Young datum on ``R^2`` with ``G_j = 1/sigma_j``.

    Returns ``(datum, order)``: factors are reordered so that positive
    exponents come first and ``order[k]`` is the Young index of slot ``k``.
    """
    regs = [np.array([[1.0 / s]]) for s in spec.sigma]
    return ordered_datum(2, list(YOUNG_MAPS), list(spec.c), None, regs)


def young_unregularized_datum(c):
    return ordered_datum(2, list(YOUNG_MAPS), list(c))


@dataclass(frozen=True)
class PLSpec:
    c1: float
    c2: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if not (0 < self.c1 < 1 and 0 < self.c2 < 1):
            raise ValueError("Prekopa-Leindler exponents must lie in (0, 1)")
        if min(self.sigma1, self.sigma2) <= 0:
            raise ValueError("widths must be positive")


def pl_phi(c1, c2, a1, a2):
    """``a1^c1 a2^c2 (c1/a1 + c2/a2)``; works elementwise on arrays."""
    return a1 ** c1 * a2 ** c2 * (c1 / a1 + c2 / a2)


@dataclass
class PLResult:
    constant: float
    condition_holds: bool
    argmin: tuple
    branch: str

    def to_dict(self):
        return {"constant": self.constant, "condition_holds": self.condition_holds,
                "argmin": list(self.argmin), "branch": self.branch}


def pl_regularized(spec: PLSpec) -> PLResult:
    """Regularized Prekopa-Leindler constant ``(inf phi)^{-1/2}``.

    The infimum runs over ``0 < a_j <= 1/sigma_j``.  It sits at the corner when
    ``c1 s1 + c2 s2 <= min(s1, s2)``; otherwise on one of the two upper faces,
    where the one-variable minimizer is explicit.
    """
    c1, c2, s1, s2 = spec.c1, spec.c2, spec.sigma1, spec.sigma2
    if c1 + c2 >= 1:
        raise ValueError("need c1 + c2 < 1")
    holds = c1 * s1 + c2 * s2 <= min(s1, s2)
    if holds:
        const = math.sqrt(s1 ** c1 * s2 ** c2 / (c1 * s1 + c2 * s2))
        return PLResult(const, True, (1 / s1, 1 / s2), "corner")
    # face a2 = 1/s2: phi is unimodal in a1 with minimizer (1-c1)/(c2 s2)
    a1 = min((1 - c1) / (c2 * s2), 1 / s1)
    face1 = pl_phi(c1, c2, a1, 1 / s2)
    a2 = min((1 - c2) / (c1 * s1), 1 / s2)
    face2 = pl_phi(c1, c2, 1 / s1, a2)
    if face1 <= face2:
        return PLResult(face1 ** -0.5, False, (a1, 1 / s2), "face")
    return PLResult(face2 ** -0.5, False, (1 / s1, a2), "face")


def pl_datum(spec: PLSpec):
    """Inverse datum on ``R^2`` whose gaussian infimum encodes the PL constant.

    Maps ``x1``, ``x2`` with exponents ``1+c1``, ``1+c2`` and regularizers
    ``1/sigma_j``, plus ``u1 x1 + u2 x2`` with exponent ``-1`` where
    ``u1^2 = c1/(1+c2)``, ``u2^2 = c2/(1+c1)``.  Minimizing out the third
    factor leaves ``(4 / ((1+c1)(1+c2))^2) * pl_phi``, so

        PL = 2 / ((1+c1) (1+c2) I_g).

    The third regularizer is set to 3/4 of the largest value keeping
    ``sum c_j B_j^T G_j B_j`` definite; the inner minimizer stays below 2/3 of it.

    Returns ``(datum, factor)`` with ``factor = 2/((1+c1)(1+c2))``.
    """
    c1, c2, s1, s2 = spec.c1, spec.c2, spec.sigma1, spec.sigma2
    e1, e2 = 1 + c1, 1 + c2
    u = np.array([[math.sqrt(c1 / e2), math.sqrt(c2 / e1)]])
    g3 = 0.75 * e1 * e2 / (c1 * s1 + c2 * s2)
    maps = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), u]
    regs = [np.array([[1 / s1]]), np.array([[1 / s2]]), np.array([[g3]])]
    d = Datum(2, maps, [e1, e2, -1.0], None, regs)
    return d, 2.0 / (e1 * e2)


@dataclass(frozen=True)
class HCSpec:
    """Hypercontractivity exponents with ``exp(2s) = (q-1)/(p-1)``."""

    p: float
    q: float
    s: float

    def __post_init__(self):
        if self.s <= 0 or self.p == 1 or self.q in (0, 1) or self.p == 0:
            raise ValueError("need s > 0, p not in {0, 1}, q not in {0, 1}")
        target = (self.q - 1) / (self.p - 1)
        if abs(math.exp(2 * self.s) - target) > 1e-12 * max(1.0, abs(target)):
            raise ValueError("exp(2s) must equal (q-1)/(p-1)")

    @classmethod
    def from_p_s(cls, p, s):
        return cls(p, 1 + math.exp(2 * s) * (p - 1), s)

    @property
    def exponents(self):
        """``(1/p, 1/q')`` with ``q'`` the conjugate exponent of ``q``."""
        return 1 / self.p, 1 - 1 / self.q


def hc_constant(spec: HCSpec):
    """``(2 pi)^{(1/p + 1/q')/2 - 1} (1 - exp(-2s))^{-1/2}``."""
    c1, c2 = spec.exponents
    return (2 * math.pi) ** (0.5 * (c1 + c2) - 1) / math.sqrt(-math.expm1(-2 * spec.s))


def hc_datum(spec: HCSpec, regularizers=None):
    """Datum of the gaussian-measure hypercontractivity inequality on ``R^2``.

    Maps are the two coordinate projections with exponents ``(1/p, 1/q')`` and

        Q = [[1 - r/p, -e^{-s}], [-e^{-s}, 1 - r/q']] / (2 pi r),  r = 1 - e^{-2s}.

    Default regularizers are ``id / (2 pi)``.  Returns ``(datum, order, C)``.
    """
    c1, c2 = spec.exponents
    r = -math.expm1(-2 * spec.s)
    e = math.exp(-spec.s)
    Q = np.array([[1 - r * c1, -e], [-e, 1 - r * c2]]) / (2 * math.pi * r)
    if regularizers is None:
        regularizers = [np.array([[1 / (2 * math.pi)]])] * 2
    maps = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])]
    d, order = ordered_datum(2, maps, [c1, c2], Q, regularizers)
    return d, order, hc_constant(spec)
