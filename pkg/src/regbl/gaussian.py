"""Closed-form algebra of the Brascamp-Lieb functional on centred gaussians.

For a tuple ``A = (A_1, ..., A_m)`` of positive definite matrices the
functional is

    BL(A) = ( prod_j det(A_j)^{c_j} / det(Q + sum_j c_j B_j^T A_j B_j) )^{1/2}

whenever the denominator matrix is positive definite, and infinite otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .datum import Datum


class SingularGaussianError(ValueError):
    """The matrix Q + sum c_j B_j^T A_j B_j is not positive definite."""


class BLValue(NamedTuple):
    """Value of the gaussian functional.  ``finite`` is False for the infinite value."""

    log: float
    value: float
    finite: bool


def _check_tuple(d: Datum, A: Sequence[np.ndarray]):
    if len(A) != d.m:
        raise ValueError(f"expected {d.m} matrices, got {len(A)}")
    out = []
    for j, (Aj, nj) in enumerate(zip(A, d.dims)):
        Aj = np.asarray(Aj, dtype=float)
        if Aj.shape != (nj, nj):
            raise ValueError(f"A[{j}] has shape {Aj.shape}, expected {(nj, nj)}")
        out.append(Aj)
    return out


def m_matrix(d: Datum, A, include_Q=True):
    """``sum_j c_j B_j^T A_j B_j``, plus Q unless ``include_Q`` is False."""
    A = _check_tuple(d, A)
    M = d.Q.copy() if include_Q else np.zeros((d.n, d.n))
    for c, B, Aj in zip(d.exponents, d.maps, A):
        M += c * (B.T @ Aj @ B)
    return (M + M.T) / 2


def _cholesky(X):
    """Lower Cholesky factor, or None when X is not positive definite."""
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return None


def _logdet_chol(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def logdet_spd(X):
    L = _cholesky(X)
    if L is None:
        raise ValueError("matrix is not positive definite")
    return _logdet_chol(L)


def bl_gaussian(d: Datum, A) -> BLValue:
    A = _check_tuple(d, A)
    num = 0.0
    for j, (c, Aj) in enumerate(zip(d.exponents, A)):
        L = _cholesky(Aj)
        if L is None:
            raise ValueError(f"A[{j}] is not positive definite")
        num += c * _logdet_chol(L)
    L = _cholesky(m_matrix(d, A))
    if L is None:
        return BLValue(math.inf, math.inf, False)
    log_bl = 0.5 * (num - _logdet_chol(L))
    try:
        value = math.exp(log_bl)
    except OverflowError:
        value = math.inf
    return BLValue(log_bl, value, True)


def phi_and_gradient(d: Datum, A):
    """Return ``(phi, grads)`` with ``phi = 2 log BL(A)``.

    The gradient with respect to ``A_j`` (trace pairing) is
    ``c_j (A_j^{-1} - B_j Mt^{-1} B_j^T)`` with ``Mt = Q + sum c_k B_k^T A_k B_k``.
    """
    A = _check_tuple(d, A)
    L = _cholesky(m_matrix(d, A))
    if L is None:
        raise SingularGaussianError("Q + sum c_j B_j^T A_j B_j is not positive definite")
    phi = -_logdet_chol(L)
    Minv = linalg.cho_solve((L, True), np.eye(d.n))
    grads = []
    for c, B, Aj in zip(d.exponents, d.maps, A):
        phi += c * logdet_spd(Aj)
        Ainv = np.linalg.inv(Aj)
        g = c * (Ainv - B @ Minv @ B.T)
        grads.append((g + g.T) / 2)
    return phi, grads


def brackets(d: Datum, A):
    """``A_j^{-1} - B_j Mt^{-1} B_j^T`` for every factor."""
    A = _check_tuple(d, A)
    L = _cholesky(m_matrix(d, A))
    if L is None:
        raise SingularGaussianError("Q + sum c_j B_j^T A_j B_j is not positive definite")
    Minv = linalg.cho_solve((L, True), np.eye(d.n))
    out = []
    for B, Aj in zip(d.maps, A):
        X = np.linalg.inv(Aj) - B @ Minv @ B.T
        out.append((X + X.T) / 2)
    return out, Minv


@dataclass
class IdentityResult:
    lhs: float
    rhs: float
    gap: float
    scale: float
    x_star: np.ndarray


def key2_evaluate(d: Datum, A, v, x_star=None) -> IdentityResult:
    """Evaluate both sides of the quadratic identity behind the closure argument.

    Requires the stacked positive-exponent maps to be square invertible and
    ``M = sum c_j B_j^T A_j B_j`` (no Q) positive definite.  With
    ``wbar = sum c_j B_j^T v_j`` and ``x_star`` solving
    ``B_j x_star = A_j^{-1} v_j`` for the positive factors,

        lhs = <wbar, M^{-1} wbar> - sum_j c_j <v_j, A_j^{-1} v_j>
        rhs = <w', M w'> + sum_{c_j<0} |c_j| <v_j', A_j v_j'>

    where ``w' = x_star - M^{-1} wbar`` and ``v_j' = B_j x_star - A_j^{-1} v_j``.
    """
    A = _check_tuple(d, A)
    Bp = d.B_plus
    if Bp.shape[0] != d.n or np.linalg.matrix_rank(Bp) < d.n:
        raise ValueError("positive-exponent maps must stack to a square invertible matrix")
    if len(v) != d.m:
        raise ValueError(f"expected {d.m} vectors, got {len(v)}")
    v = [np.asarray(vj, dtype=float).reshape(-1) for vj in v]
    M = m_matrix(d, A, include_Q=False)
    L = _cholesky(M)
    if L is None:
        raise SingularGaussianError("sum c_j B_j^T A_j B_j is not positive definite")
    Ainv_v = [np.linalg.solve(Aj, vj) for Aj, vj in zip(A, v)]
    if x_star is None:
        rhs_vec = np.concatenate([Ainv_v[j] for j in d.positive_indices])
        x_star = np.linalg.solve(Bp, rhs_vec)
    x_star = np.asarray(x_star, dtype=float)

    wbar = sum(c * B.T @ vj for c, B, vj in zip(d.exponents, d.maps, v))
    Minv_w = linalg.cho_solve((L, True), wbar)
    quad_w = float(wbar @ Minv_w)
    terms = [float(c * vj @ av) for c, vj, av in zip(d.exponents, v, Ainv_v)]
    lhs = quad_w - sum(terms)

    wp = x_star - Minv_w
    rhs = float(wp @ M @ wp)
    rhs_terms = [rhs]
    for j in range(d.m):
        c = d.exponents[j]
        if c < 0:
            vp = d.maps[j] @ x_star - Ainv_v[j]
            t = float(-c * vp @ A[j] @ vp)
            rhs += t
            rhs_terms.append(t)
    scale = 1.0 + abs(quad_w) + sum(abs(t) for t in terms) + sum(abs(t) for t in rhs_terms)
    return IdentityResult(lhs, rhs, lhs - rhs, scale, x_star)


@dataclass
class ExtremizerReport:
    """First-order conditions for a candidate extremizer of the inverse problem.

    ``sign_max[j]`` is the largest eigenvalue of ``c_j * bracket_j``; the sign
    condition asks it to be ``<= tol``.  ``slack_norm[j]`` is the norm of
    ``bracket_j (G_j - A_j)`` divided by ``slack_scale[j]``.  ``forward_min[j]``
    is the smallest eigenvalue of ``bracket_j``, used for forward data.
    """

    tol: float
    sign_max: list
    forward_min: list
    slack_norm: list
    slack_scale: list

    @property
    def sign_condition(self):
        return all(x <= self.tol for x in self.sign_max)

    @property
    def slack_condition(self):
        return all(x <= self.tol for x in self.slack_norm)

    @property
    def passed(self):
        return self.sign_condition and self.slack_condition

    @property
    def forward_sign_condition(self):
        return all(x >= -self.tol for x in self.forward_min)

    @property
    def forward_passed(self):
        return self.forward_sign_condition and self.slack_condition

    def to_dict(self):
        return {
            "tol": self.tol,
            "sign_condition": self.sign_condition,
            "slack_condition": self.slack_condition,
            "passed": self.passed,
            "forward_passed": self.forward_passed,
            "sign_max": list(map(float, self.sign_max)),
            "forward_min": list(map(float, self.forward_min)),
            "slack_norm": list(map(float, self.slack_norm)),
        }


def extremizer_report(d: Datum, A, tol=None) -> ExtremizerReport:
    """Check ``c_j bracket_j <= 0`` and ``bracket_j (G_j - A_j) = 0`` for all j.

    The default tolerance is ``1e-8 * (1 + ||Mt^{-1}||)``.
    """
    if not d.has_regularizers:
        raise ValueError("extremizer conditions need a regularizer for every factor")
    A = _check_tuple(d, A)
    br, Minv = brackets(d, A)
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.linalg.norm(Minv, 2)))
    sign_max, fwd_min, slack, scales = [], [], [], []
    for c, X, Aj, G in zip(d.exponents, br, A, d.regularizers):
        ev = np.linalg.eigvalsh(X)
        sign_max.append(float(np.max(c * ev)))
        fwd_min.append(float(ev[0]))
        scale = 1.0 + float(np.linalg.norm(G, 2) * np.linalg.norm(np.linalg.inv(Aj), 2))
        slack.append(float(np.linalg.norm(X @ (G - Aj), 2)) / scale)
        scales.append(scale)
    return ExtremizerReport(float(tol), sign_max, fwd_min, slack, scales)


def is_feasible(d: Datum, A, tol=1e-10):
    """True when every A_j is positive definite and ``A_j <= G_j``."""
    A = _check_tuple(d, A)
    for Aj, G in zip(A, d.regularizers):
        if np.linalg.eigvalsh((Aj + Aj.T) / 2)[0] <= 0:
            return False
        if G is not None:
            gap = np.linalg.eigvalsh(G - (Aj + Aj.T) / 2)[0]
            if gap < -tol * max(1.0, float(np.linalg.norm(G, 2))):
                return False
    return True


def regularizer_tuple(d: Datum):
    return [np.array(d.regularizer(j)) for j in range(d.m)]
