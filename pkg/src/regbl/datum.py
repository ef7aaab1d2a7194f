"""Generalized Brascamp-Lieb data.

A datum is a family of surjective linear maps ``B_j : R^n -> R^{n_j}``, nonzero
exponents ``c_j`` (positive ones first), a symmetric quadratic weight ``Q`` on
``R^n`` and optional regularizing precisions ``G_j``.  This module validates
data, computes signatures, checks the non-degeneracy conditions of the inverse
problem and splits ``Q`` into positive and negative parts adapted to the
positive-exponent maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

# Relative half-width of the band treated as zero when classifying eigenvalues.
ZERO_BAND = 1e-10
SYMMETRY_TOL = 1e-12
RANK_TOL = 1e-10


class MalformedDatumError(ValueError):
    """Raised when a datum has inconsistent shapes or unparseable fields."""


class DegenerateDatumError(ValueError):
    """Raised when an operation needs a non-degenerate datum and did not get one."""


def _as_matrix(a, name):
    try:
        arr = np.array(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedDatumError(f"{name}: not a numeric matrix ({exc})") from None
    if arr.ndim != 2:
        raise MalformedDatumError(f"{name}: expected a 2-d matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise MalformedDatumError(f"{name}: contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _spectral_norm(a):
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True, eq=False)
class Datum:
    """Immutable generalized Brascamp-Lieb datum.

    ``Q=None`` means the zero form; ``regularizers`` may contain ``None`` for
    factors without a regularizer.  Construction only checks shapes; use
    :func:`validate_datum` for the mathematical invariants.
    """

    n: int
    maps: tuple
    exponents: np.ndarray
    Q: np.ndarray | None = None
    regularizers: tuple | None = None

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise MalformedDatumError(f"n: must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", n)
        maps = tuple(_as_matrix(B, f"maps[{j}]") for j, B in enumerate(self.maps))
        for j, B in enumerate(maps):
            if B.shape[1] != n:
                raise MalformedDatumError(
                    f"maps[{j}]: has {B.shape[1]} columns, expected n={n}")
            if B.shape[0] < 1:
                raise MalformedDatumError(f"maps[{j}]: target dimension must be >= 1")
        object.__setattr__(self, "maps", maps)

        c = np.array(self.exponents, dtype=float).reshape(-1)
        if c.size != len(maps):
            raise MalformedDatumError(
                f"exponents: {c.size} values for {len(maps)} maps")
        c.setflags(write=False)
        object.__setattr__(self, "exponents", c)

        if self.Q is None:
            Q = np.zeros((n, n))
            Q.setflags(write=False)
        else:
            Q = _as_matrix(self.Q, "Q")
            if Q.shape != (n, n):
                raise MalformedDatumError(f"Q: shape {Q.shape}, expected {(n, n)}")
        object.__setattr__(self, "Q", Q)

        regs = self.regularizers
        if regs is None:
            regs = (None,) * len(maps)
        if len(regs) != len(maps):
            raise MalformedDatumError(
                f"regularizers: {len(regs)} entries for {len(maps)} maps")
        out = []
        for j, G in enumerate(regs):
            if G is None:
                out.append(None)
                continue
            G = _as_matrix(G, f"regularizers[{j}]")
            nj = maps[j].shape[0]
            if G.shape != (nj, nj):
                raise MalformedDatumError(
                    f"regularizers[{j}]: shape {G.shape}, expected {(nj, nj)}")
            out.append(G)
        object.__setattr__(self, "regularizers", tuple(out))

    @property
    def m(self):
        return len(self.maps)

    @property
    def dims(self):
        return [B.shape[0] for B in self.maps]

    @property
    def m_plus(self):
        return int(np.sum(self.exponents > 0))

    @property
    def positive_indices(self):
        return [j for j in range(self.m) if self.exponents[j] > 0]

    @property
    def B_plus(self):
        """Stack of the positive-exponent maps, shape (sum n_j, n)."""
        rows = [self.maps[j] for j in self.positive_indices]
        if not rows:
            return np.zeros((0, self.n))
        return np.vstack(rows)

    @property
    def has_regularizers(self):
        return all(G is not None for G in self.regularizers)

    def regularizer(self, j):
        G = self.regularizers[j]
        if G is None:
            raise ValueError(f"factor {j} has no regularizer")
        return G

    def with_regularizers(self, regularizers):
        return Datum(self.n, self.maps, self.exponents, self.Q, tuple(regularizers))

    def to_dict(self):
        return {
            "n": self.n,
            "maps": [B.tolist() for B in self.maps],
            "exponents": self.exponents.tolist(),
            "Q": None if not np.any(self.Q) else self.Q.tolist(),
            "regularizers": [None if G is None else G.tolist() for G in self.regularizers],
        }

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict):
            raise MalformedDatumError("datum: expected a JSON object")
        for key in ("n", "maps", "exponents"):
            if key not in obj:
                raise MalformedDatumError(f"{key}: missing required field")
        if not isinstance(obj["n"], int) or isinstance(obj["n"], bool):
            raise MalformedDatumError("n: must be an integer")
        if not isinstance(obj["maps"], list):
            raise MalformedDatumError("maps: must be a list of matrices")
        exps = obj["exponents"]
        if not isinstance(exps, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in exps):
            raise MalformedDatumError("exponents: must be a list of numbers")
        regs = obj.get("regularizers")
        if regs is not None and not isinstance(regs, list):
            raise MalformedDatumError("regularizers: must be a list")
        return cls(obj["n"], obj["maps"], exps, obj.get("Q"),
                   None if regs is None else tuple(regs))

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedDatumError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(obj)


def ordered_datum(n, maps, exponents, Q=None, regularizers=None):
    """Build a datum with the positive exponents moved to the front.

    Returns ``(datum, order)`` where ``order[k]`` is the caller's index of the
    factor stored in slot ``k``.  The relative order within each sign class is
    kept.
    """
    exponents = np.asarray(exponents, dtype=float)
    order = [j for j in range(len(maps)) if exponents[j] > 0]
    order += [j for j in range(len(maps)) if exponents[j] <= 0]
    regs = None if regularizers is None else [regularizers[j] for j in order]
    d = Datum(n, [maps[j] for j in order], exponents[order], Q, regs)
    return d, order


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    """Outcome of a battery of named checks; the verdict is their conjunction."""

    checks: list = field(default_factory=list)

    @property
    def verdict(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.checks]

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "checks": [
                {"name": c.name, "passed": bool(c.passed), "margin": _json_float(c.margin),
                 "detail": c.detail}
                for c in self.checks
            ],
        }


def _json_float(x):
    x = float(x)
    if np.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def validate_datum(d: Datum) -> ValidationReport:
    """Check surjectivity, exponent ordering, symmetry of Q and positivity of G_j."""
    checks = []
    c = d.exponents
    nonzero = bool(np.all(c != 0))
    checks.append(Check("exponents_nonzero", nonzero, float(np.min(np.abs(c))) if c.size else 0.0))

    signs = np.sign(c)
    ordered = bool(np.all(np.diff(signs) <= 0)) if c.size else True
    checks.append(Check("exponent_order", ordered, 0.0,
                        "positive exponents must precede negative ones"))

    for j, B in enumerate(d.maps):
        nj = B.shape[0]
        sv = np.linalg.svd(B, compute_uv=False)
        ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
        ok = nj <= d.n and sv.size == nj and ratio > RANK_TOL
        checks.append(Check(f"surjective[{j}]", bool(ok), ratio,
                            f"smallest/largest singular value of a {nj}x{d.n} map"))

    defect = float(np.max(np.abs(d.Q - d.Q.T))) if d.Q.size else 0.0
    qscale = max(1.0, float(np.max(np.abs(d.Q))))
    checks.append(Check("Q_symmetric", defect <= SYMMETRY_TOL * qscale, defect))

    for j, G in enumerate(d.regularizers):
        if G is None:
            continue
        gdefect = float(np.max(np.abs(G - G.T)))
        lam = float(np.linalg.eigvalsh((G + G.T) / 2)[0])
        gscale = max(1.0, float(np.max(np.abs(G))))
        ok = gdefect <= SYMMETRY_TOL * gscale and lam > 0
        checks.append(Check(f"regularizer_spd[{j}]", bool(ok), lam))
    return ValidationReport(checks)


def signature(Q, tol=ZERO_BAND):
    """Return ``(s_plus, s_minus, s_zero)`` for a symmetric matrix.

    Eigenvalues within ``tol * ||Q||`` of zero count as zero.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("signature needs a square matrix")
    if Q.size == 0:
        return 0, 0, 0
    scale = float(np.max(np.abs(Q)))
    if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL * max(1.0, scale):
        raise ValueError("signature needs a symmetric matrix")
    ev = np.linalg.eigvalsh((Q + Q.T) / 2)
    band = tol * max(abs(ev[0]), abs(ev[-1]))
    s_plus = int(np.sum(ev > band))
    s_minus = int(np.sum(ev < -band))
    return s_plus, s_minus, Q.shape[0] - s_plus - s_minus


def _kernel_basis(B, n):
    """Orthonormal kernel basis with a deterministic sign convention."""
    if B.shape[0] == 0:
        return np.eye(n)
    P = linalg.null_space(B, rcond=RANK_TOL)
    for k in range(P.shape[1]):
        i = int(np.argmax(np.abs(P[:, k])))
        if P[i, k] < 0:
            P[:, k] = -P[:, k]
    return P


def _qscale(Q):
    return _spectral_norm(Q)


def check_nondegenerate(d: Datum) -> ValidationReport:
    """Non-degeneracy of the inverse problem.

    Checks (i) Q is positive definite on the kernel of the stacked
    positive-exponent maps, (ii) n >= s_plus(Q) + sum of n_j over positive
    exponents and, when every positive factor has a regularizer, (iii)
    Q + sum_{c_j>0} c_j B_j^T G_j B_j is positive definite.
    """
    checks = []
    P = _kernel_basis(d.B_plus, d.n)
    band = ZERO_BAND * _qscale(d.Q)
    if P.shape[1] == 0:
        checks.append(Check("kernel_positive", True, float("inf"), "kernel is trivial"))
    else:
        lam = float(np.linalg.eigvalsh(P.T @ d.Q @ P)[0])
        checks.append(Check("kernel_positive", lam > band, lam,
                            f"kernel of positive maps has dimension {P.shape[1]}"))

    s_plus = signature(d.Q)[0]
    need = s_plus + sum(d.dims[j] for j in d.positive_indices)
    checks.append(Check("dimension_count", d.n >= need, float(d.n - need),
                        f"n={d.n}, s_plus(Q)={s_plus}"))

    pos = d.positive_indices
    if all(d.regularizers[j] is not None for j in pos):
        R = d.Q + sum(d.exponents[j] * d.maps[j].T @ d.regularizers[j] @ d.maps[j] for j in pos)
        lam = float(np.linalg.eigvalsh((R + R.T) / 2)[0])
        rband = ZERO_BAND * max(_spectral_norm(R), 1e-300)
        checks.append(Check("regularized_positive", lam > rband, lam))
    return ValidationReport(checks)


@dataclass(frozen=True, eq=False)
class QDecomposition:
    """``Q = B0^T Qplus B0 - Bm1^T Qminus Bm1`` with Qplus, Qminus positive definite."""

    B0: np.ndarray
    Qplus: np.ndarray
    Bm1: np.ndarray
    Qminus: np.ndarray

    @property
    def n0(self):
        return self.B0.shape[0]

    @property
    def n_minus(self):
        return self.Bm1.shape[0]

    def reconstruct(self):
        return self.B0.T @ self.Qplus @ self.B0 - self.Bm1.T @ self.Qminus @ self.Bm1

    def residual(self, Q):
        Q = np.asarray(Q, dtype=float)
        return float(np.linalg.norm(self.reconstruct() - Q, 2)) / max(1.0, _spectral_norm(Q))

    def invariants(self, d: Datum):
        """Numeric margins for the structural properties of the splitting."""
        Bp = d.B_plus
        stacked = np.vstack([self.B0, Bp])
        square = stacked.shape[0] == d.n
        if square:
            sv = np.linalg.svd(stacked, compute_uv=False)
            bijective_margin = float(sv[-1] / sv[0])
        else:
            bijective_margin = 0.0
        P = _kernel_basis(Bp, d.n)
        if P.shape[1] and self.n_minus:
            leak = float(np.linalg.norm(self.Bm1 @ P, 2))
        else:
            leak = 0.0
        qp = float(np.linalg.eigvalsh(self.Qplus)[0]) if self.n0 else float("inf")
        qm = float(np.linalg.eigvalsh(self.Qminus)[0]) if self.n_minus else float("inf")
        return {
            "bijective": square and bijective_margin > RANK_TOL,
            "bijective_margin": bijective_margin,
            "kernel_leak": leak,
            "Qplus_min_eig": qp,
            "Qminus_min_eig": qm,
            "residual": self.residual(d.Q),
        }


def decompose_Q(d: Datum, tol=ZERO_BAND) -> QDecomposition:
    """Split Q along the kernel of the positive-exponent maps.

    With P an orthonormal basis of that kernel K, the oblique projection onto K
    along the Q-orthogonal complement is ``pi = P (P^T Q P)^{-1} P^T Q``.  Then
    ``B0 = P^T pi`` and ``Qplus = P^T Q P``, and the remainder
    ``B0^T Qplus B0 - Q`` is positive semidefinite; its range gives ``Bm1``.
    """
    report = check_nondegenerate(d)
    for name in ("kernel_positive", "dimension_count"):
        if not report[name].passed:
            raise DegenerateDatumError(f"cannot split Q: check '{name}' fails")
    n = d.n
    Q = (d.Q + d.Q.T) / 2
    P = _kernel_basis(d.B_plus, n)
    if P.shape[1]:
        Qplus = P.T @ Q @ P
        Qplus = (Qplus + Qplus.T) / 2
        B0 = np.linalg.solve(Qplus, P.T @ Q)
    else:
        Qplus = np.zeros((0, 0))
        B0 = np.zeros((0, n))
    R = B0.T @ Qplus @ B0 - Q
    R = (R + R.T) / 2
    ev, V = np.linalg.eigh(R)
    band = tol * max(_qscale(Q), 1e-300)
    keep = ev > band
    Qminus = np.diag(ev[keep])
    Bm1 = V[:, keep].T
    for k in range(Bm1.shape[0]):
        i = int(np.argmax(np.abs(Bm1[k])))
        if Bm1[k, i] < 0:
            Bm1[k] = -Bm1[k]
    return QDecomposition(B0, Qplus, Bm1, Qminus)


def decompose_psd(Q, tol=ZERO_BAND) -> QDecomposition:
    """Splitting of a positive semidefinite Q with no negative part.

    Used for forward (all exponents positive) data, where the kernel-adapted
    splitting of :func:`decompose_Q` is not available.
    """
    Q = np.asarray(Q, dtype=float)
    Q = (Q + Q.T) / 2
    n = Q.shape[0]
    ev, V = np.linalg.eigh(Q)
    band = tol * max(_spectral_norm(Q), 1e-300)
    if np.any(ev < -band):
        raise ValueError("Q is not positive semidefinite")
    keep = ev > band
    return QDecomposition(V[:, keep].T, np.diag(ev[keep]), np.zeros((0, n)), np.zeros((0, 0)))
