"""Numerical extremization of the gaussian functional over ``0 < A_j <= G_j``.

Each factor is parametrized as ``A_j = G_j^{1/2} s(S_j) G_j^{1/2}`` where ``S_j``
is an unconstrained symmetric matrix and ``s`` is the logistic function applied
through the spectral decomposition.  The box constraint then holds by
construction and the problem becomes a smooth unconstrained one, solved by
BFGS with a backtracking line search and random restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from .datum import Datum, DegenerateDatumError
from .gaussian import bl_gaussian, extremizer_report

DIRECTIONS = ("infimum", "supremum")


@dataclass
class OptConfig:
    direction: str = "infimum"
    max_iter: int = 2000
    gtol: float = 1e-10
    restarts: int = 8
    seed: int = 0
    init_scale: float = 1.0
    armijo: float = 1e-4
    max_step: float = 8.0
    snap_tol: float = 1e-8
    stationarity_tol: float = 1e-7

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be positive")
        if not self.gtol > 0:
            raise ValueError("gtol must be positive")


@dataclass
class OptResult:
    value: float
    log_value: float
    A: list
    direction: str
    converged: bool
    iterations: int
    grad_norm: float
    restart_log_values: list
    at_upper: list
    at_lower: list
    seed: int
    report: object = None

    @property
    def restart_spread(self):
        """Largest relative deviation of the restart values from the best one."""
        vals = np.array(self.restart_log_values)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return math.inf
        return float(np.max(np.abs(np.expm1(vals - self.log_value))))

    def to_dict(self):
        return {
            "direction": self.direction,
            "value": self.value,
            "log_value": self.log_value,
            "A": [a.tolist() for a in self.A],
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "restart_log_values": list(map(float, self.restart_log_values)),
            "at_upper": self.at_upper,
            "at_lower": self.at_lower,
            "seed": self.seed,
            "extremizer_report": None if self.report is None else self.report.to_dict(),
        }


def _logistic_divided_difference(a, b):
    """Matrix of divided differences of the logistic function, stable for all inputs.

    Uses ``s(a) - s(b) = sinh((a-b)/2) / (2 cosh(a/2) cosh(b/2))``.
    """
    a = a[:, None]
    b = b[None, :]
    h = np.abs(a - b) / 2
    small = h < 1e-4
    hs = np.where(small, 1.0, h)
    log_sinhc = np.where(
        small,
        np.log1p(h * h / 6),
        hs + np.log1p(-np.exp(-2 * hs)) - np.log(2 * hs),
    )

    def logcosh(x):
        x = np.abs(x)
        return x + np.log1p(np.exp(-2 * x)) - math.log(2)

    return np.exp(log_sinhc - logcosh(a / 2) - logcosh(b / 2) - math.log(4))


class LogisticChart:
    """Unconstrained coordinates for the box ``0 < A_j <= G_j``."""

    def __init__(self, d: Datum):
        if not d.has_regularizers:
            raise ValueError("optimization needs a regularizer for every factor")
        self.d = d
        self.sqrtG, self.logdetG = [], []
        for G in d.regularizers:
            ev, V = np.linalg.eigh(G)
            self.sqrtG.append((V * np.sqrt(ev)) @ V.T)
            self.logdetG.append(float(np.sum(np.log(ev))))
        self.triu = [np.triu_indices(nj) for nj in d.dims]
        self.sizes = [len(t[0]) for t in self.triu]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.dim = int(self.offsets[-1])

    def unpack(self, theta):
        out = []
        for j, nj in enumerate(self.d.dims):
            S = np.zeros((nj, nj))
            S[self.triu[j]] = theta[self.offsets[j]:self.offsets[j + 1]]
            out.append(S + np.triu(S, 1).T)
        return out

    def pack(self, mats):
        return np.concatenate([M[t] for M, t in zip(mats, self.triu)])

    def tuple_from(self, theta):
        A = []
        for H, S in zip(self.sqrtG, self.unpack(theta)):
            s, U = np.linalg.eigh(S)
            A.append(H @ ((U * expit(s)) @ U.T) @ H)
        return [(a + a.T) / 2 for a in A]

    def theta_from(self, A, clip=30.0):
        """Inverse chart, clipping the logistic argument to ``[-clip, clip]``."""
        mats = []
        for H, Aj in zip(self.sqrtG, A):
            W = np.linalg.solve(H, np.linalg.solve(H, Aj).T)
            w, U = np.linalg.eigh((W + W.T) / 2)
            w = np.clip(w, expit(-clip), expit(clip))
            mats.append((U * (np.log(w) - np.log1p(-w))) @ U.T)
        return self.pack(mats)

    def phi_and_grad(self, theta):
        """``phi = 2 log BL`` in chart coordinates and its gradient.

        Returns ``(inf, None)`` when the tuple is outside the domain.
        """
        d = self.d
        eig, A, phi = [], [], 0.0
        for j, S in enumerate(self.unpack(theta)):
            s, U = np.linalg.eigh(S)
            H = self.sqrtG[j]
            A.append(H @ ((U * expit(s)) @ U.T) @ H)
            eig.append((s, U))
            phi += d.exponents[j] * (self.logdetG[j] + float(np.sum(log_expit(s))))
        M = d.Q.copy()
        for c, B, Aj in zip(d.exponents, d.maps, A):
            M += c * (B.T @ Aj @ B)
        try:
            L = np.linalg.cholesky((M + M.T) / 2)
        except np.linalg.LinAlgError:
            return math.inf, None
        phi -= 2.0 * float(np.sum(np.log(np.diag(L))))
        Minv = linalg.cho_solve((L, True), np.eye(d.n))
        grads = []
        for j, (s, U) in enumerate(eig):
            HB = self.sqrtG[j] @ d.maps[j]
            K = U.T @ (HB @ Minv @ HB.T) @ U
            F = _logistic_divided_difference(s, s)
            inner = np.diag(expit(-s)) - F * K
            g = d.exponents[j] * (U @ inner @ U.T)
            g = (g + g.T) / 2
            g = 2 * g - np.diag(np.diag(g))
            grads.append(g)
        return phi, self.pack(grads)


def _bfgs(fun, x0, cfg: OptConfig):
    """Minimize ``fun`` (returning value and gradient) from a feasible start."""
    x = x0.copy()
    f, g = fun(x)
    n = x.size
    Hinv = np.eye(n)
    scaled = False
    stall = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if np.max(np.abs(g)) <= cfg.gtol:
            it -= 1
            break
        p = -Hinv @ g
        slope = float(g @ p)
        if slope >= 0:
            Hinv = np.eye(n)
            p = -g
            slope = float(g @ p)
        pmax = float(np.max(np.abs(p)))
        step = min(1.0, cfg.max_step / pmax)
        accepted = False
        while step * pmax > 1e-14 * (1.0 + float(np.max(np.abs(x)))):
            x_new = x + step * p
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + cfg.armijo * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                Hinv = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        stall = stall + 1 if f - f_new <= 1e-15 * (1.0 + abs(f)) else 0
        x, f, g = x_new, f_new, g_new
        if stall >= 20:
            break
    return x, f, g, it


def _feasible_start(chart: LogisticChart, rng, cfg: OptConfig):
    d = chart.d
    base = []
    for c, nj in zip(d.exponents, d.dims):
        if cfg.direction == "infimum":
            base.append(np.eye(nj) * (2.0 if c > 0 else -2.0))
        else:
            base.append(np.zeros((nj, nj)))
    noise = rng.normal(scale=cfg.init_scale, size=chart.dim)
    theta = chart.pack(base) + noise
    neg = np.concatenate([
        np.full(sz, d.exponents[j] < 0) for j, sz in enumerate(chart.sizes)])
    diag = np.concatenate([
        (t[0] == t[1]) for t in chart.triu])
    for _ in range(40):
        f, _g = chart.phi_and_grad(theta)
        if np.isfinite(f):
            return theta
        # shrink the negative-exponent factors and push the positive ones
        # towards G until the form becomes definite
        theta = theta - 2.0 * (neg & diag) + 2.0 * (~neg & diag)
    raise DegenerateDatumError(
        "no feasible starting tuple: Q + sum c_j B_j^T A_j B_j stays indefinite")


def _snap_to_upper(chart: LogisticChart, A, tol):
    """Round whitened eigenvalues within ``tol`` of 1 up to exactly 1."""
    out, counts = [], []
    for H, Aj in zip(chart.sqrtG, A):
        W = np.linalg.solve(H, np.linalg.solve(H, Aj).T)
        w, U = np.linalg.eigh((W + W.T) / 2)
        hit = w >= 1 - tol
        w = np.where(hit, 1.0, w)
        B = H @ ((U * w) @ U.T) @ H
        out.append((B + B.T) / 2)
        counts.append(int(np.sum(hit)))
    return out, counts


def _lower_contacts(chart: LogisticChart, A, tol=1e-12):
    counts = []
    for H, Aj in zip(chart.sqrtG, A):
        W = np.linalg.solve(H, np.linalg.solve(H, Aj).T)
        counts.append(int(np.sum(np.linalg.eigvalsh((W + W.T) / 2) < tol)))
    return counts


def optimize_gaussian(d: Datum, cfg: OptConfig | None = None) -> OptResult:
    """Infimum or supremum of the gaussian functional over ``0 < A_j <= G_j``."""
    cfg = cfg or OptConfig()
    chart = LogisticChart(d)
    sign = 1.0 if cfg.direction == "infimum" else -1.0

    def fun(theta):
        f, g = chart.phi_and_grad(theta)
        if g is None:
            return math.inf, None
        return sign * f, sign * g

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    runs = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        theta0 = _feasible_start(chart, rng, cfg)
        theta, f, g, iters = _bfgs(fun, theta0, cfg)
        runs.append((f, theta, g, iters))

    best = min(runs, key=lambda r: r[0])
    f_best, theta, g, iters = best
    A = chart.tuple_from(theta)
    snapped, upper = _snap_to_upper(chart, A, cfg.snap_tol)
    val_raw = bl_gaussian(d, A)
    val_snap = bl_gaussian(d, snapped)
    if val_snap.finite and sign * val_snap.log <= sign * val_raw.log + 1e-13 * (1 + abs(val_raw.log)):
        A, val = snapped, val_snap
    else:
        val = val_raw
        upper = [0] * d.m
    # on flat optima prefer the regularizer tuple itself when it does as well
    G = [np.array(x) for x in d.regularizers]
    val_G = bl_gaussian(d, G)
    if val_G.finite and sign * val_G.log <= sign * val.log + 1e-13 * (1 + abs(val.log)):
        A, val, upper = G, val_G, list(d.dims)
    grad_norm = float(np.max(np.abs(g))) if g is not None and g.size else 0.0
    report = extremizer_report(d, A) if cfg.direction == "infimum" else None
    return OptResult(
        value=val.value,
        log_value=val.log,
        A=A,
        direction=cfg.direction,
        converged=bool(grad_norm <= max(cfg.gtol, cfg.stationarity_tol * max(1.0, float(np.max(np.abs(d.exponents)))))),
        iterations=int(iters),
        grad_norm=grad_norm,
        restart_log_values=[0.5 * sign * r[0] for r in runs],
        at_upper=upper,
        at_lower=_lower_contacts(chart, A),
        seed=cfg.seed,
        report=report,
    )


@dataclass
class GridSpec:
    points: int = 40
    lower_ratio: float = 1e-3
    direction: str = "infimum"
    max_points: int = 4_000_000


@dataclass
class OracleResult:
    value: float
    log_value: float
    A: list


def brute_force_oracle(d: Datum, grid: GridSpec | None = None) -> OracleResult:
    """Extremize over diagonal tuples on a log-spaced grid.

    Each diagonal entry of ``A_j`` ranges over ``G_j[k, k] * r`` with ``r``
    log-spaced in ``[lower_ratio, 1]`` (endpoint included).  Only factors with
    ``n_j <= 2`` are supported; grid points violating ``A_j <= G_j`` are
    discarded.
    """
    grid = grid or GridSpec()
    if grid.direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    if not d.has_regularizers:
        raise ValueError("the grid oracle needs a regularizer for every factor")
    if any(nj > 2 for nj in d.dims):
        raise ValueError("the grid oracle supports n_j <= 2 only")
    axes, owner = [], []
    ratios = np.logspace(np.log10(grid.lower_ratio), 0.0, grid.points)
    for j, G in enumerate(d.regularizers):
        for k in range(d.dims[j]):
            axes.append(G[k, k] * ratios)
            owner.append((j, k))
    total = grid.points ** len(axes)
    if total > grid.max_points:
        raise ValueError(f"grid has {total} points, above the limit {grid.max_points}")

    sign = 1.0 if grid.direction == "infimum" else -1.0
    best_val, best_pt = math.inf, None
    # rows b_{jk} of each map, weighted by the exponent
    rows = [d.exponents[j] * np.outer(d.maps[j][k], d.maps[j][k]) for j, k in owner]
    rows = np.array(rows)
    expo = np.array([d.exponents[j] for j, _ in owner])
    chunk = 200_000
    idx_all = np.array(np.unravel_index(np.arange(total), [grid.points] * len(axes))).T
    for start in range(0, total, chunk):
        idx = idx_all[start:start + chunk]
        vals = np.stack([axes[a][idx[:, a]] for a in range(len(axes))], axis=1)
        ok = np.ones(len(vals), dtype=bool)
        for j, G in enumerate(d.regularizers):
            if d.dims[j] == 2 and G[0, 1] != 0:
                cols = [a for a, (jj, _) in enumerate(owner) if jj == j]
                g0 = G[0, 0] - vals[:, cols[0]]
                g1 = G[1, 1] - vals[:, cols[1]]
                ok &= (g0 >= 0) & (g1 >= 0) & (g0 * g1 >= G[0, 1] ** 2)
        M = d.Q[None] + np.einsum("pa,aij->pij", vals, rows)
        sgn, logdet = np.linalg.slogdet(M)
        pd = sgn > 0
        if pd.any():
            # slogdet sign alone does not certify definiteness
            pd[pd] = np.linalg.eigvalsh(M[pd])[:, 0] > 0
        logbl = 0.5 * (np.log(vals) @ expo - logdet)
        obj = np.where(ok & pd, sign * logbl, math.inf)
        k = int(np.argmin(obj))
        if obj[k] < best_val:
            best_val = float(obj[k])
            best_pt = vals[k]
    if best_pt is None:
        raise DegenerateDatumError("no admissible grid point")
    A = [np.zeros((nj, nj)) for nj in d.dims]
    for a, (j, k) in enumerate(owner):
        A[j][k, k] = best_pt[a]
    log_value = sign * best_val
    return OracleResult(math.exp(log_value), log_value, A)


def amplify(d: Datum, c_plus: float, lam: float) -> Datum:
    """Append the factor ``(id, -c_plus, lam * id)``.

    The resulting datum is amplifying when ``c_plus`` exceeds the largest
    positive exponent minus one.
    """
    c = d.exponents
    cmax = float(np.max(c[c > 0])) if np.any(c > 0) else -math.inf
    if not c_plus > 0:
        raise ValueError("c_plus must be positive")
    if not c_plus > cmax - 1:
        raise ValueError(f"c_plus={c_plus} must exceed max positive exponent minus one ({cmax - 1})")
    if not lam > 0:
        raise ValueError("lam must be positive")
    maps = list(d.maps) + [np.eye(d.n)]
    exps = list(c) + [-float(c_plus)]
    regs = list(d.regularizers) + [lam * np.eye(d.n)]
    return Datum(d.n, maps, exps, d.Q, regs)


def is_amplifying(d: Datum):
    c = d.exponents
    cmax = float(np.max(c[c > 0])) if np.any(c > 0) else -math.inf
    eye = np.eye(d.n)
    for j in range(d.m):
        B = d.maps[j]
        if c[j] < 0 and B.shape == (d.n, d.n) and np.allclose(B, eye) and -c[j] > cmax - 1:
            return True
    return False


@dataclass
class WolffResult:
    t: float
    C: float
    log_C: float
    sup_value: float
    bound_sq: float
    holds: bool
    lam_inf: float
    augmented: OptResult = field(repr=False, default=None)
    sensitivity: float | None = None

    def to_dict(self):
        return {
            "t": self.t, "C": self.C, "log_C": self.log_C, "sup_value": self.sup_value,
            "bound_sq": self.bound_sq, "holds": self.holds, "lam_inf": self.lam_inf,
            "sensitivity": self.sensitivity,
        }


def wolff_augmented(d: Datum, t: float, lam_inf: float) -> Datum:
    """Inverse datum ``((id, B), (1+t, -c t), (lam_inf id, G))`` with weight ``-t Q``."""
    maps = [np.eye(d.n)] + list(d.maps)
    exps = [1.0 + t] + [-t * c for c in d.exponents]
    regs = [lam_inf * np.eye(d.n)] + list(d.regularizers)
    return Datum(d.n, maps, exps, -t * d.Q, regs)


def wolff_forward(d: Datum, t: float, cfg: OptConfig | None = None, sup_result: OptResult | None = None,
                  lam_inf: float | None = None, check_sensitivity=False) -> WolffResult:
    """Forward constant through the inverse problem of an augmented datum.

    ``C(t) = I_g(augmented)^{-1/t}`` and the comparison bound is
    ``C(t)^2 <= (1+t)^{n/t} (1+1/t)^n  sup_{A<=G} BL(A)^2``.  The slot that
    should be unregularized uses ``lam_inf * id`` with
    ``lam_inf = 1e6 * max eig(G)`` by default.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if np.any(d.exponents <= 0):
        raise ValueError("the forward route needs positive exponents")
    if not d.has_regularizers:
        raise ValueError("the forward route needs regularizers")
    if np.linalg.eigvalsh(d.Q)[0] < -1e-12 * max(1.0, float(np.abs(d.Q).max())):
        raise ValueError("the forward route needs Q positive semidefinite")
    cfg = cfg or OptConfig()
    if lam_inf is None:
        lam_inf = 1e6 * max(float(np.linalg.eigvalsh(G)[-1]) for G in d.regularizers)
    inv_cfg = OptConfig(**{**cfg.__dict__, "direction": "infimum"})
    aug = optimize_gaussian(wolff_augmented(d, t, lam_inf), inv_cfg)
    log_C = -aug.log_value / t
    if sup_result is None:
        sup_result = optimize_gaussian(d, OptConfig(**{**cfg.__dict__, "direction": "supremum"}))
    n = d.n
    log_bound = (n / t) * math.log1p(t) + n * math.log1p(1.0 / t) + 2 * sup_result.log_value
    holds = 2 * log_C <= log_bound + 1e-9
    sens = None
    if check_sensitivity:
        aug2 = optimize_gaussian(wolff_augmented(d, t, lam_inf / 100), inv_cfg)
        sens = abs(-aug2.log_value / t - log_C)
    return WolffResult(t, math.exp(log_C), log_C, sup_result.value, math.exp(log_bound),
                       bool(holds), lam_inf, aug, sens)
