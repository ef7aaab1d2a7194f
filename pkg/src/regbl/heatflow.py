"""Heat-flow verification of the gaussian saturation principle.

Inputs of type G are finite gaussian mixtures with a common precision ``G_j``.
Under the flow ``d/dt u = (1/4 pi) div(A_j^{-1} grad u)`` such a mixture stays a
mixture, with precision ``(G_j^{-1} + (t-1) A_j^{-1})^{-1}`` at time ``t``.  The
functional

    Q(t) = t^{-alpha} int prod_j u_j(t, B_j x)^{c_j} dx

is estimated by importance sampling and compared against the monotonicity and
large-time predictions; pointwise quantities (closure residual, Li-Yau bounds)
are evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .datum import Datum, check_nondegenerate, decompose_Q, decompose_psd
from .gaussian import bl_gaussian, extremizer_report, is_feasible, m_matrix

DEFAULT_T_GRID = (1.0, 2.0, 5.0, 10.0, 50.0, 100.0)
BATCH = 16384


class IntegrationError(RuntimeError):
    """The integrand of Q(t) is not integrable or evaluated to a non-finite value."""


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """``f(x) = sum_k w_k g_P(x - y_k)`` with ``g_P(x) = det(P)^{1/2} exp(-pi <x, P x>)``."""

    precision: np.ndarray
    weights: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.array(self.precision, dtype=float))
        w = np.array(self.weights, dtype=float).reshape(-1)
        y = np.array(self.centers, dtype=float).reshape(len(w), -1)
        if P.shape[0] != P.shape[1] or y.shape[1] != P.shape[0]:
            raise ValueError("precision and centers have inconsistent dimensions")
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be nonnegative with positive sum")
        if np.linalg.eigvalsh((P + P.T) / 2)[0] <= 0:
            raise ValueError("precision must be positive definite")
        object.__setattr__(self, "precision", (P + P.T) / 2)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", y)

    @property
    def dim(self):
        return self.precision.shape[0]

    @property
    def mass(self):
        return float(self.weights.sum())

    @property
    def mean_center(self):
        return self.weights @ self.centers / self.weights.sum()

    def _log_atoms(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        diff = x[:, None, :] - self.centers[None, :, :]
        Pd = diff @ self.precision
        quad = np.sum(diff * Pd, axis=-1)
        _, logdet = np.linalg.slogdet(self.precision)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw[None, :] + 0.5 * logdet - math.pi * quad, Pd

    def log_eval(self, x):
        la, _ = self._log_atoms(x)
        return logsumexp(la, axis=1)

    def __call__(self, x):
        return np.exp(self.log_eval(x))

    def derivatives(self, x):
        """``(log f, grad log f, hessian of log f)`` at the rows of ``x``."""
        la, Pd = self._log_atoms(x)
        logf = logsumexp(la, axis=1)
        r = softmax(la, axis=1)
        g = -2 * math.pi * Pd
        grad = np.einsum("nk,nki->ni", r, g)
        second = np.einsum("nk,nki,nkj->nij", r, g, g)
        hess = -2 * math.pi * self.precision[None] + second - grad[:, :, None] * grad[:, None, :]
        return logf, grad, hess

    def to_dict(self):
        return {"precision": self.precision.tolist(), "weights": self.weights.tolist(),
                "centers": self.centers.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["precision"], obj["weights"], obj["centers"])


def evolve_mixture(f: GaussianMixture, A, t) -> GaussianMixture:
    """Advance a time-1 mixture to time ``t >= 1`` under the flow driven by ``A``."""
    if t < 1:
        raise ValueError("the flow starts at t = 1")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != f.precision.shape:
        raise ValueError("flow matrix and mixture precision differ in shape")
    cov = np.linalg.inv(f.precision) + (t - 1) * np.linalg.inv(A)
    return GaussianMixture(np.linalg.inv((cov + cov.T) / 2), f.weights, f.centers)


def sample_typeG(G, k, box, rng) -> GaussianMixture:
    """Random mixture of ``k`` atoms with precision ``G``.

    Centres are uniform in ``[-box, box]`` per coordinate and weights uniform in
    ``[0.5, 1.5]``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if k < 1:
        raise ValueError("need at least one atom")
    box = np.broadcast_to(np.asarray(box, dtype=float), (G.shape[0],))
    centers = rng.uniform(-box, box, size=(k, G.shape[0]))
    weights = rng.uniform(0.5, 1.5, size=k)
    return GaussianMixture(G, weights, centers)


@dataclass
class _Slot:
    B: np.ndarray
    c: float
    flow: np.ndarray
    mixture: GaussianMixture
    label: str


def _unit_gaussian(P):
    """``exp(-pi <x, P x>)`` written as a one-atom mixture."""
    _, logdet = np.linalg.slogdet(P)
    return GaussianMixture(P, [math.exp(-0.5 * logdet)], np.zeros((1, P.shape[0])))


@dataclass(eq=False)
class FlowRun:
    """A datum, a candidate extremizer and one type-G input per factor."""

    datum: Datum
    A: list
    mixtures: list
    t_grid: tuple = DEFAULT_T_GRID
    samples: int = 100_000
    seed: int = 0
    proposal_widening: float = 0.5
    decomposition: object = field(init=False, default=None)

    def __post_init__(self):
        d = self.datum
        if d.n > 3:
            raise ValueError("Monte-Carlo integration is sized for n <= 3")
        if not d.has_regularizers:
            raise ValueError("a flow run needs a regularizer for every factor")
        if len(self.A) != d.m or len(self.mixtures) != d.m:
            raise ValueError("need one matrix and one mixture per factor")
        self.A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A]
        if not is_feasible(d, self.A):
            raise ValueError("the tuple A must satisfy 0 < A_j <= G_j")
        for j, f in enumerate(self.mixtures):
            if not np.allclose(f.precision, d.regularizers[j], rtol=1e-12, atol=1e-14):
                raise ValueError(f"mixture {j} does not have precision G_{j}")
        ts = [float(t) for t in self.t_grid]
        if not ts or ts[0] < 1 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t_grid must be increasing and start at or after 1")
        self.t_grid = tuple(ts)
        if self.samples < 2:
            raise ValueError("samples must be at least 2")
        nd = check_nondegenerate(d)
        if nd["kernel_positive"].passed and nd["dimension_count"].passed:
            self.decomposition = decompose_Q(d)
        elif np.all(d.exponents > 0):
            self.decomposition = decompose_psd(d.Q)
        else:
            raise ValueError("Q admits no splitting adapted to this datum")

    def slots(self):
        """All factors of the flow including the two coming from Q."""
        d, dec = self.datum, self.decomposition
        out = []
        if dec.n0:
            out.append(_Slot(dec.B0, 1.0, dec.Qplus, _unit_gaussian(dec.Qplus), "Q+"))
        for j in range(d.m):
            out.append(_Slot(d.maps[j], float(d.exponents[j]), self.A[j], self.mixtures[j], str(j)))
        if dec.n_minus:
            out.append(_Slot(dec.Bm1, -1.0, dec.Qminus, _unit_gaussian(dec.Qminus), "Q-"))
        return out

    @property
    def alpha(self):
        return 0.5 * (self.datum.n - sum(s.c * s.B.shape[0] for s in self.slots()))

    @property
    def masses(self):
        return [f.mass for f in self.mixtures]

    def large_time_limit(self):
        """``BL(A) * prod_j mass_j^{c_j}``."""
        bl = bl_gaussian(self.datum, self.A)
        if not bl.finite:
            return math.inf
        logm = sum(c * math.log(m) for c, m in zip(self.datum.exponents, self.masses))
        return math.exp(bl.log + logm)

    def to_dict(self):
        return {
            "datum": self.datum.to_dict(),
            "A": [a.tolist() for a in self.A],
            "mixtures": [f.to_dict() for f in self.mixtures],
            "t_grid": list(self.t_grid),
            "samples": self.samples,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            Datum.from_dict(obj["datum"]),
            obj["A"],
            [GaussianMixture.from_dict(f) for f in obj["mixtures"]],
            tuple(obj.get("t_grid", DEFAULT_T_GRID)),
            int(obj.get("samples", 100_000)),
            int(obj.get("seed", 0)),
        )


def _evolved(run: FlowRun, t):
    return [(s, evolve_mixture(s.mixture, s.flow, t)) for s in run.slots()]


def log_integrand(run: FlowRun, t, x):
    """``log U(t, x)`` with ``U = t^{-alpha} prod_j u_j(t, B_j x)^{c_j}``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.full(x.shape[0], -run.alpha * math.log(t))
    for s, u in _evolved(run, t):
        out += s.c * u.log_eval(x @ s.B.T)
    return out


@dataclass
class QEstimate:
    t: float
    value: float
    stderr: float

    def to_dict(self):
        return {"t": self.t, "value": self.value, "stderr": self.stderr}


def _standard_normals(seed, samples, n):
    nb = -(-samples // BATCH)
    seqs = np.random.SeedSequence(seed).spawn(nb)
    parts = []
    for b, ss in enumerate(seqs):
        size = min(BATCH, samples - b * BATCH)
        parts.append(np.random.default_rng(ss).standard_normal((size, n)))
    return np.concatenate(parts)


def functional_Q(run: FlowRun, t) -> QEstimate:
    """Importance-sampling estimate of ``Q(t)`` with its standard error.

    The proposal is a gaussian whose precision is ``proposal_widening`` times
    the quadratic form governing the integrand's tails, so the importance
    weights stay bounded.  The same standard normal draws are reused for every
    ``t`` of a run.
    """
    d = run.datum
    evolved = _evolved(run, t)
    K = np.zeros((d.n, d.n))
    rhs = np.zeros(d.n)
    for s, u in evolved:
        K += s.c * s.B.T @ u.precision @ s.B
        rhs += s.c * s.B.T @ u.precision @ u.mean_center
    K = (K + K.T) / 2
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        neg = [s.label for s in run.slots() if s.c < 0]
        raise IntegrationError(
            f"integrand at t={t} is not integrable: tail form indefinite "
            f"(negative-exponent factors {neg})") from None
    mu = np.linalg.solve(K, rhs)
    cov = np.linalg.inv(2 * math.pi * run.proposal_widening * K)
    L = np.linalg.cholesky((cov + cov.T) / 2)
    z = _standard_normals(run.seed, run.samples, d.n)
    x = mu + z @ L.T
    log_q = -0.5 * np.sum(z * z, axis=1) - 0.5 * d.n * math.log(2 * math.pi) \
        - float(np.sum(np.log(np.diag(L))))
    log_u = np.full(len(x), -run.alpha * math.log(t))
    for s, u in evolved:
        part = s.c * u.log_eval(x @ s.B.T)
        if not np.all(np.isfinite(part)):
            raise IntegrationError(f"factor {s.label} evaluated to a non-finite value at t={t}")
        log_u += part
    logw = log_u - log_q
    shift = float(np.max(logw))
    w = np.exp(logw - shift)
    mean = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(len(w)))
    return QEstimate(float(t), mean * math.exp(shift), se * math.exp(shift))


def bl_ratio(run: FlowRun):
    """``Q(1) / prod_j mass_j^{c_j}`` and its standard error."""
    est = functional_Q(run, 1.0)
    logm = sum(c * math.log(m) for c, m in zip(run.datum.exponents, run.masses))
    scale = math.exp(-logm)
    return est.value * scale, est.stderr * scale


@dataclass
class MonotonicityReport:
    direction: str
    precondition: bool
    estimates: list
    violations: list
    limit: float
    limit_ratio: float
    limit_rtol: float

    @property
    def monotone(self):
        return not self.violations

    @property
    def limit_ok(self):
        return abs(self.limit_ratio - 1) <= self.limit_rtol

    @property
    def passed(self):
        return self.precondition and self.monotone and self.limit_ok

    def to_dict(self):
        return {
            "direction": self.direction,
            "precondition": self.precondition,
            "monotone": self.monotone,
            "limit_ok": self.limit_ok,
            "passed": self.passed,
            "estimates": [e.to_dict() for e in self.estimates],
            "violations": self.violations,
            "limit": self.limit,
            "limit_ratio": self.limit_ratio,
        }


def check_monotonicity(run: FlowRun, direction="inverse", n_sigma=3.0, limit_rtol=0.01,
                       tol=None) -> MonotonicityReport:
    """Estimate Q on the run's time grid and test its predicted monotonicity.

    ``inverse``: Q should not increase; ``forward``: Q should not decrease.
    Consecutive values may violate the order by at most ``n_sigma`` combined
    standard errors.  The last value is compared to the large-time limit.
    """
    if direction not in ("inverse", "forward"):
        raise ValueError("direction must be 'inverse' or 'forward'")
    rep = extremizer_report(run.datum, run.A, tol)
    pre = rep.passed if direction == "inverse" else rep.forward_passed
    est = [functional_Q(run, t) for t in run.t_grid]
    sgn = 1.0 if direction == "inverse" else -1.0
    bad = []
    for a, b in zip(est, est[1:]):
        allow = n_sigma * math.hypot(a.stderr, b.stderr)
        if sgn * (b.value - a.value) > allow:
            bad.append({"t0": a.t, "t1": b.t, "increase": sgn * (b.value - a.value), "allowed": allow})
    limit = run.large_time_limit()
    return MonotonicityReport(direction, bool(pre), est, bad, limit, est[-1].value / limit, limit_rtol)


@dataclass
class ResidualResult:
    """Pointwise ``U^{-1}(d/dt U - (1/4 pi) div(Mt^{-1} grad U))`` and its parts.

    ``value = (first + second) / (4 pi)`` where ``first`` collects the
    gradient terms and ``second`` the hessian and time-weight terms.
    """

    value: np.ndarray
    first: np.ndarray
    second: np.ndarray
    scale: np.ndarray


def closure_residual(run: FlowRun, t, x) -> ResidualResult:
    d = run.datum
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Mt = m_matrix(d, run.A)
    Minv = np.linalg.inv(Mt)
    n_pts = x.shape[0]
    first = np.zeros(n_pts)
    second = np.full(n_pts, -4 * math.pi * run.alpha / t)
    wbar = np.zeros((n_pts, d.n))
    scale = np.full(n_pts, 4 * math.pi * abs(run.alpha) / t)
    for s, u in _evolved(run, t):
        _, v, H = u.derivatives(x @ s.B.T)
        Ainv = np.linalg.inv(s.flow)
        bracket = Ainv - s.B @ Minv @ s.B.T
        qa = np.einsum("ni,ij,nj->n", v, Ainv, v)
        first += s.c * qa
        tr = np.einsum("ij,nji->n", bracket, H)
        second += s.c * tr
        wbar += s.c * v @ s.B
        scale += abs(s.c) * (abs(qa) + np.abs(np.einsum("ij,nji->n", Ainv, H))
                             + np.abs(np.einsum("ij,nji->n", s.B @ Minv @ s.B.T, H)))
    qw = np.einsum("ni,ij,nj->n", wbar, Minv, wbar)
    first -= qw
    scale += np.abs(qw)
    value = (first + second) / (4 * math.pi)
    return ResidualResult(value, first, second, scale / (4 * math.pi))


def log_integrand_derivatives(run: FlowRun, t, x):
    """``(log U, grad log U, hessian of log U, d/dt log U)`` in closed form."""
    d = run.datum
    x = np.atleast_2d(np.asarray(x, dtype=float))
    logU = np.full(x.shape[0], -run.alpha * math.log(t))
    grad = np.zeros((x.shape[0], d.n))
    hess = np.zeros((x.shape[0], d.n, d.n))
    dt = np.full(x.shape[0], -run.alpha / t)
    for s, u in _evolved(run, t):
        lf, v, H = u.derivatives(x @ s.B.T)
        Ainv = np.linalg.inv(s.flow)
        logU += s.c * lf
        grad += s.c * v @ s.B
        hess += s.c * np.einsum("ai,nab,bj->nij", s.B, H, s.B)
        dt += s.c * (np.einsum("ij,nji->n", Ainv, H) + np.einsum("ni,ij,nj->n", v, Ainv, v)) / (4 * math.pi)
    return logU, grad, hess, dt


@dataclass
class LiYauReport:
    min_eig: np.ndarray
    tol: float

    @property
    def worst(self):
        return float(np.min(self.min_eig))

    @property
    def passed(self):
        return self.worst >= -self.tol


def li_yau_check(f: GaussianMixture, points, tol=1e-9) -> LiYauReport:
    """Smallest eigenvalue of ``hessian(log f) + 2 pi P`` at each point."""
    _, _, H = f.derivatives(points)
    ev = np.linalg.eigvalsh(H + 2 * math.pi * f.precision[None])
    return LiYauReport(ev[:, 0], tol)


def harmonic_mean_check(run: FlowRun, t, points, tol=1e-9) -> LiYauReport:
    """Lower bound ``hessian(log U) >= -2 pi (Mt(G)^{-1} + (t-1) Mt(A)^{-1})^{-1}``.

    Reports the smallest eigenvalue of the difference at each point.
    """
    d = run.datum
    MG = m_matrix(d, list(d.regularizers))
    MA = m_matrix(d, run.A)
    bound = np.linalg.inv(np.linalg.inv(MG) + (t - 1) * np.linalg.inv(MA))
    _, _, H, _ = log_integrand_derivatives(run, t, points)
    ev = np.linalg.eigvalsh(H + 2 * math.pi * bound[None])
    return LiYauReport(ev[:, 0], tol)
