"""Iterative reconstruction: Landweber, nonnegative CGLS and a CGLS-TV hybrid."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import aslinearoperator

METHODS = ("landweber", "nncgls", "cgls_tv")


class SolverDivergence(RuntimeError):
    """Raised when the Landweber residual keeps growing."""


@dataclass(frozen=True)
class SolverConfig:
    method: str = "landweber"
    iterations: int = 200
    m: int = 10
    m1: int = 20
    m2: int = 1
    tv_lambda: float = 0.0
    tv_inner: int = 50
    step: float | None = None
    restart: int = 10
    tolerance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        method = self.method.replace("-", "_")
        if method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        object.__setattr__(self, "method", method)
        for name in ("iterations", "m", "m1", "m2", "tv_inner", "restart"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.tv_lambda < 0:
            raise ValueError("tv_lambda must be nonnegative")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class ReconResult:
    x: np.ndarray
    residuals: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    best_iteration: int | None = None
    breakdown: bool = False
    info: dict = field(default_factory=dict)


def relative_error(x, x_ref) -> float:
    x_ref = np.asarray(x_ref, dtype=float).ravel()
    ref = np.linalg.norm(x_ref)
    if ref == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(x_ref - np.asarray(x, dtype=float).ravel()) / ref)


def operator_norm_sq(op, iterations=30, seed=0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``A^T A``."""
    A = aslinearoperator(op)
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = A.rmatvec(A.matvec(v))
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


def landweber(op, b, config: SolverConfig = SolverConfig(), x_ref=None) -> ReconResult:
    """``x <- x + omega A^T (b - A x)`` from zero.

    With a reference image the iterate of smallest relative error is
    returned; otherwise the last one.
    """
    A = aslinearoperator(op)
    b = np.asarray(b, dtype=float).ravel()
    omega = config.step
    if omega is None:
        sigma2 = operator_norm_sq(A, seed=config.seed)
        omega = 1.8 / sigma2 if sigma2 > 0 else 1.0
    x = np.zeros(A.shape[1])
    r = b.copy()
    res = [float(np.linalg.norm(r))]
    errs, best, best_x = [], None, x
    if x_ref is not None:
        errs.append(relative_error(x, x_ref))
        best, best_x = 0, x.copy()
    rises = 0
    for k in range(1, config.iterations + 1):
        x = x + omega * A.rmatvec(r)
        r = b - A.matvec(x)
        res.append(float(np.linalg.norm(r)))
        # rounding noise at the floor must not count as growth
        if res[-1] - res[-2] > 1e-10 * res[0]:
            rises += 1
            if rises >= 3:
                raise SolverDivergence(f"residual grew for 3 iterations (step {omega:.3g}, "
                                       f"residuals {res[-4:]})")
        else:
            rises = 0
        if x_ref is not None:
            errs.append(relative_error(x, x_ref))
            if errs[-1] < errs[best]:
                best, best_x = k, x.copy()
        if config.tolerance and res[-1] <= config.tolerance * res[0]:
            break
    if x_ref is None:
        best, best_x = len(res) - 1, x
    return ReconResult(best_x, res, errs, best, info={"step": omega})


def _cgls_block(A, b, x, iterations):
    r = b - A.matvec(x)
    s = A.rmatvec(r)
    p = s.copy()
    gamma = float(s @ s)
    res = []
    breakdown = False
    for _ in range(iterations):
        if gamma == 0.0:
            break
        q = A.matvec(p)
        delta = float(q @ q)
        if delta == 0.0:
            breakdown = True
            break
        a = gamma / delta
        x = x + a * p
        r = r - a * q
        res.append(float(np.linalg.norm(r)))
        s = A.rmatvec(r)
        gamma_new = float(s @ s)
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return x, res, breakdown


def cgls(op, b, iterations, x0=None) -> ReconResult:
    """Plain CGLS on the normal equations."""
    A = aslinearoperator(op)
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros(A.shape[1]) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    res0 = float(np.linalg.norm(b - A.matvec(x)))
    x, res, breakdown = _cgls_block(A, b, x, iterations)
    return ReconResult(x, [res0] + res, breakdown=breakdown)


def nncgls(op, b, iterations, x0=None, restart=10) -> ReconResult:
    """CGLS restarted every ``restart`` iterations from the nonnegative projection."""
    A = aslinearoperator(op)
    b = np.asarray(b, dtype=float).ravel()
    x = np.zeros(A.shape[1]) if x0 is None else np.maximum(np.asarray(x0, float).ravel(), 0)
    res = [float(np.linalg.norm(b - A.matvec(x)))]
    done, breakdown = 0, False
    while done < iterations:
        block = min(restart, iterations - done)
        x, block_res, breakdown = _cgls_block(A, b, x, block)
        x = np.maximum(x, 0.0)
        res.extend(block_res)
        done += block
        if breakdown or not block_res:
            break
    return ReconResult(x, res, breakdown=breakdown)


def _grad(u):
    g = np.zeros((u.ndim,) + u.shape)
    for ax in range(u.ndim):
        d = np.diff(u, axis=ax)
        sl = [slice(None)] * u.ndim
        sl[ax] = slice(0, -1)
        g[(ax,) + tuple(sl)] = d
    return g


def _grad_adj(p):
    """Adjoint of the forward difference (minus the divergence)."""
    out = np.zeros(p.shape[1:])
    for ax in range(p.shape[0]):
        q = p[ax].copy()
        last = [slice(None)] * q.ndim
        last[ax] = -1
        # the last forward difference along each axis is identically zero
        q[tuple(last)] = 0.0
        out -= np.diff(q, axis=ax, prepend=0.0)
    return out


def _project_unit(p):
    norm = np.sqrt(np.sum(p * p, axis=0))
    return p / np.maximum(norm, 1.0)


def tv_prox(vol, lam, inner_iters=50, tol=None):
    """Approximate ``argmin_u 0.5 ||u - vol||^2 + lam TV(u)`` (isotropic TV).

    Fast gradient projection on the dual problem, forward differences with
    Neumann boundaries.  Stops after ``inner_iters`` iterations or once the
    primal iterate changes by less than ``tol`` (relative).
    """
    b = np.asarray(vol, dtype=float)
    if lam == 0:
        return b.copy()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    step = 1.0 / (4.0 * b.ndim * lam)
    p_prev = np.zeros((b.ndim,) + b.shape)
    r = p_prev.copy()
    t = 1.0
    u_prev = b
    for _ in range(inner_iters):
        p = _project_unit(r + step * _grad(b - lam * _grad_adj(r)))
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        r = p + ((t - 1) / t_next) * (p - p_prev)
        p_prev, t = p, t_next
        if tol is not None:
            u = b - lam * _grad_adj(p)
            if np.linalg.norm(u - u_prev) <= tol * max(np.linalg.norm(u), 1e-300):
                return u
            u_prev = u
    return b - lam * _grad_adj(p_prev)


def tv_objective(u, b, lam):
    g = _grad(np.asarray(u, float))
    return 0.5 * float(np.sum((u - b) ** 2)) + lam * float(np.sum(np.sqrt(np.sum(g * g, 0))))


def cgls_tv(op, b, config: SolverConfig, vol_shape, x_ref=None) -> ReconResult:
    """``m`` rounds of ``m1`` NNCGLS iterations followed by ``m2`` TV prox steps."""
    x = None
    res, errs = [], []
    breakdown = False
    for _ in range(config.m):
        out = nncgls(op, b, config.m1, x0=x, restart=config.restart)
        res.extend(out.residuals)
        breakdown |= out.breakdown
        x = out.x
        for _ in range(config.m2):
            x = tv_prox(x.reshape(vol_shape), config.tv_lambda, config.tv_inner).ravel()
        if x_ref is not None:
            errs.append(relative_error(x, x_ref))
    x = np.maximum(x, 0.0)
    return ReconResult(x, res, errs, breakdown=breakdown)


def reconstruct(op, b, config: SolverConfig, vol_shape, x_ref=None) -> ReconResult:
    if config.method == "landweber":
        return landweber(op, b, config, x_ref)
    if config.method == "nncgls":
        out = nncgls(op, b, config.iterations, restart=config.restart)
        if x_ref is not None:
            out.errors = [relative_error(out.x, x_ref)]
        return out
    return cgls_tv(op, b, config, vol_shape, x_ref)


def select_tv_lambda(op, b, x_ref, lambdas, config: SolverConfig, vol_shape):
    """Grid search of the TV weight minimizing the relative error.

    Returns ``(best_lambda, best_result, table)`` with ``table`` a list of
    ``(lambda, eps_r)`` pairs.
    """
    table, best = [], None
    for lam in lambdas:
        cfg = SolverConfig(**{**config.to_dict(), "method": "cgls_tv", "tv_lambda": float(lam)})
        out = cgls_tv(op, b, cfg, vol_shape)
        err = relative_error(out.x, x_ref)
        table.append((float(lam), err))
        if best is None or err < best[1]:
            best = (float(lam), err, out)
    return best[0], best[2], table
