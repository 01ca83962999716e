"""Numerical plumbing: RNG streams, sampling, quadrature, minimisation, Jacobians."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

__all__ = [
    "RngStream",
    "MinimizerReport",
    "normal_pdf",
    "normal_cdf",
    "sample_mvnormal",
    "minimize",
    "quadrature_normal_expectation",
    "gauss_legendre_normal_expectation",
    "numerical_jacobian",
]

_SQRT2PI = np.sqrt(2.0 * np.pi)


class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints; distinct ids give
    independent PCG64 streams through :class:`numpy.random.SeedSequence`
    spawn keys, so results never depend on which worker draws them.
    """

    def __init__(self, master_seed, stream_id=0):
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        self.master_seed = int(master_seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __getattr__(self, name):
        # delegate draws (normal, uniform, choice, ...) to the generator
        return getattr(self.generator, name)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT2PI


def normal_cdf(x):
    return ndtr(x)


def sample_mvnormal(mean, covariance, rng, size=None):
    """Draw from N(mean, covariance) using a Cholesky-type factor.

    Semi-definite covariances are handled through an eigendecomposition,
    which places degenerate draws on the supporting subspace.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise ValueError("covariance shape does not match mean")
    if not np.allclose(cov, cov.T):
        raise np.linalg.LinAlgError("covariance is not symmetric")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise np.linalg.LinAlgError("covariance is not positive semi-definite")
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    shape = (mean.size,) if size is None else (size, mean.size)
    z = rng.standard_normal(shape)
    return mean + z @ factor.T


@dataclass
class MinimizerReport:
    argmin: np.ndarray
    objective_at_min: float
    iterations: int
    converged: bool


def minimize(objective, start, tolerance=1e-10, max_iter=2000, restarts=3, initial_step=None):
    """Derivative-free Nelder-Mead minimisation with restarts.

    Stops when the simplex diameter (max vertex offset from the best
    vertex) drops below ``tolerance``. Each restart rebuilds the simplex
    around the incumbent, which repairs collapsed simplices; the run is
    converged once a restart no longer moves the incumbent.
    """
    x = np.atleast_1d(np.asarray(start, dtype=float)).copy()

    def f(v):
        val = float(objective(v))
        if not np.isfinite(val):
            raise FloatingPointError(f"objective is not finite at {v!r}")
        return val

    fx = f(x)
    if initial_step is None:
        step = np.maximum(0.05 * np.abs(x), 0.05)
    else:
        step = np.broadcast_to(np.asarray(initial_step, dtype=float), x.shape).copy()

    total, converged = 0, False
    for attempt in range(restarts + 1):
        simplex = np.vstack([x, x + np.diag(step)])
        res = optimize.minimize(
            f, x, method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": tolerance, "fatol": np.inf,
                     "maxiter": max(1, max_iter - total), "maxfev": 10 * max_iter},
        )
        total += int(res.nit)
        moved = float(np.max(np.abs(res.x - x))) if res.fun < fx else 0.0
        if res.fun < fx:
            x, fx = np.asarray(res.x, dtype=float), float(res.fun)
        converged = res.status == 0
        if not converged or total >= max_iter or moved <= 10 * tolerance:
            break
        step = np.full_like(x, max(moved, 100 * tolerance))
    return MinimizerReport(argmin=x, objective_at_min=fx, iterations=total, converged=bool(converged))


def quadrature_normal_expectation(f, tol=1e-10, order=40):
    """Return E[f(nu)] for nu ~ N(0, 1).

    Gauss-Hermite with ``order`` nodes, cross-checked against twice the
    order. If the two disagree by more than ``tol`` an adaptive integral
    settles the value, and an adaptive error estimate above 10 * tol
    raises.
    """
    def gh(m):
        x, w = np.polynomial.hermite.hermgauss(m)
        return float(np.sum(w * np.asarray(f(np.sqrt(2.0) * x), dtype=float)) / np.sqrt(np.pi))

    coarse, fine = gh(order), gh(2 * order)
    if abs(coarse - fine) <= tol:
        return fine

    def integrand(v):
        return float(f(np.asarray(v))) * np.exp(-0.5 * v * v) / _SQRT2PI

    val, err = integrate.quad(integrand, -np.inf, np.inf, epsabs=tol * 0.1, epsrel=0, limit=500)
    if err > 10 * tol:
        raise ArithmeticError(f"normal expectation did not converge (error estimate {err:.2e})")
    return float(val)


_GL_CACHE = {}


def _gauss_legendre(m):
    if m not in _GL_CACHE:
        _GL_CACHE[m] = np.polynomial.legendre.leggauss(m)
    return _GL_CACHE[m]


def gauss_legendre_normal_expectation(f, breakpoints, order=8, half_width=10.0, spacing=2.0):
    """Vectorised E[f_i(nu)] for nu ~ N(0, 1), one integral per row.

    ``breakpoints`` is an (n, k) array of per-row points where f_i may
    fail to be smooth; the real line truncated at +-half_width is split
    there and at a fixed grid with the given ``spacing``; each piece gets
    an ``order``-point Gauss-Legendre rule.
    ``f`` receives an (n, pieces * order) array of nodes and must return
    values of the same shape (or a tuple of such arrays).
    """
    x, w = _gauss_legendre(order)
    bp = np.atleast_2d(np.asarray(breakpoints, dtype=float))
    n = bp.shape[0]
    grid = np.arange(-half_width + spacing, half_width, spacing)
    bp = np.concatenate([bp, np.broadcast_to(grid, (n, grid.size))], axis=1)
    edges = np.clip(np.sort(bp, axis=1), -half_width, half_width)
    lo = np.concatenate([np.full((n, 1), -half_width), edges], axis=1)
    hi = np.concatenate([edges, np.full((n, 1), half_width)], axis=1)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, :, None] + half[:, :, None] * x[None, None, :]).reshape(n, -1)
    weights = (half[:, :, None] * w[None, None, :]).reshape(n, -1) * normal_pdf(nodes)
    vals = f(nodes)
    if isinstance(vals, tuple):
        return tuple(np.sum(weights * v, axis=1) for v in vals)
    return np.sum(weights * vals, axis=1)


def numerical_jacobian(g, x):
    """Central-difference Jacobian of ``g`` at ``x``.

    Step for coordinate j is cbrt(eps) * max(1, |x_j|).
    """
    x = np.asarray(x, dtype=float)
    g0 = np.atleast_1d(np.asarray(g(x), dtype=float))
    jac = np.empty((g0.size, x.size))
    h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(x))
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        gp = np.atleast_1d(np.asarray(g(xp), dtype=float))
        gm = np.atleast_1d(np.asarray(g(xm), dtype=float))
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise FloatingPointError(f"function not finite near coordinate {j} of {x!r}")
        jac[:, j] = (gp - gm) / (xp[j] - xm[j])
    return jac


def newton_root(g, x0, tol=1e-12, max_iter=50, jac=None, max_step=None):
    """Damped Newton for a small square system using numerical Jacobians.

    ``max_step`` caps the largest coordinate of each full step.

    Returns ``(x, ||g(x)||, iterations, converged)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    gx = np.asarray(g(x), dtype=float)
    norm = np.linalg.norm(gx)
    for it in range(1, max_iter + 1):
        if norm < tol:
            return x, norm, it - 1, True
        J = jac(x) if jac is not None else numerical_jacobian(g, x)
        try:
            step = np.linalg.solve(J, gx)
        except np.linalg.LinAlgError:
            return x, norm, it, False
        if not np.all(np.isfinite(step)):
            return x, norm, it, False
        if max_step is not None:
            big = np.max(np.abs(step))
            if big > max_step:
                step = step * (max_step / big)
        t = 1.0
        for _ in range(30):
            xn = x - t * step
            gn = np.asarray(g(xn), dtype=float)
            nn = np.linalg.norm(gn)
            if np.isfinite(nn) and nn < norm:
                break
            t *= 0.5
        else:
            return x, norm, it, False
        x, gx, norm = xn, gn, nn
    return x, norm, max_iter, norm < tol
