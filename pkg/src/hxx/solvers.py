"""Krylov solvers: thick-restart Lanczos, tridiagonalization, resolvents."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


def _matvec(a):
    if callable(a) and not hasattr(a, "matvec"):
        return a
    if hasattr(a, "matvec"):
        return lambda x: np.asarray(a.matvec(x)).reshape(-1)
    return lambda x: a @ x


@dataclass
class LanczosConfig:
    nsearchedeigen: int = 10
    max_basis: Optional[int] = None
    tol: float = 1e-8
    max_restarts: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.nsearchedeigen < 1:
            raise ValueError("nsearchedeigen must be >= 1")
        if self.max_basis is None:
            self.max_basis = max(2 * self.nsearchedeigen + 10, 40)
        if self.max_basis <= self.nsearchedeigen:
            raise ValueError("max_basis must exceed nsearchedeigen")


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    restarts: int = 0


def _orthonormal_random(rng, basis, dim):
    w = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    for _ in range(2):
        w -= basis @ (basis.conj().T @ w)
    return w / np.linalg.norm(w)


def lanczos_thick_restart(a, dim: int, config: LanczosConfig | None = None, v0=None) -> EigResult:
    """Lowest eigenpairs of a Hermitian operator by thick-restart Lanczos.

    The Krylov window holds ``max_basis`` vectors with full
    reorthogonalization.  When the window is full the lowest Ritz vectors
    (wanted ones plus a buffer) are kept together with the residual
    direction, which makes the projected matrix an arrowhead followed by a
    tridiagonal tail.  Once the wanted pairs converge, one extra round is run
    from a fresh random direction orthogonal to the kept vectors; this picks
    up degenerate partners that a single Krylov sequence cannot see.
    """
    cfg = config or LanczosConfig()
    mv = _matvec(a)
    nev = min(cfg.nsearchedeigen, dim)
    m = min(max(cfg.max_basis, nev + 2), dim)
    rng = np.random.default_rng(cfg.seed)

    V = np.zeros((dim, m), dtype=complex)
    T = np.zeros((m, m), dtype=complex)
    if v0 is None:
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    else:
        v = np.asarray(v0, dtype=complex).copy()
    V[:, 0] = v / np.linalg.norm(v)

    k = 0
    verifying = False
    theta_ref = None
    best = None
    for restart in range(cfg.max_restarts + 1):
        anorm = np.abs(T[:k, :k]).max() if k else 0.0
        beta = 0.0
        w = None
        for j in range(k, m):
            w = mv(V[:, j])
            h = (w.conj() @ V[:, : j + 1]).conj()
            w = w - V[:, : j + 1] @ h
            h2 = (w.conj() @ V[:, : j + 1]).conj()
            w = w - V[:, : j + 1] @ h2
            h = h + h2
            T[: j + 1, j] = h
            T[j, : j + 1] = h.conj()
            T[j, j] = h[j].real
            beta = np.linalg.norm(w)
            anorm = max(anorm, abs(h[j]), beta)
            if j + 1 == m:
                break
            if beta <= 1e-12 * max(anorm, 1e-300):
                # invariant subspace: continue in a fresh orthogonal direction
                V[:, j + 1] = _orthonormal_random(rng, V[:, : j + 1], dim)
            else:
                V[:, j + 1] = w / beta
                T[j + 1, j] = T[j, j + 1] = beta

        theta, Y = np.linalg.eigh(T)
        res = beta * np.abs(Y[m - 1, :])
        if m == dim:
            res = np.zeros_like(res)
        best = res[:nev]
        done = bool(np.all(res[:nev] <= cfg.tol))
        inject = False
        if done and m < dim:
            if not (verifying and np.all(theta[:nev] >= theta_ref - 10 * cfg.tol)):
                # first convergence, or the fresh round lowered a wanted value
                verifying, theta_ref = True, theta[:nev].copy()
                done, inject = False, True
        if done:
            X = V @ Y[:, :nev]
            true_res = np.array([np.linalg.norm(mv(X[:, i]) - theta[i] * X[:, i]) for i in range(nev)])
            log.debug("thick-restart Lanczos converged after %d restarts", restart)
            return EigResult(theta[:nev].copy(), X, true_res, restart)

        # thick restart
        keep = min(m - 2, nev + max(2, (m - nev) // 3))
        keep = max(keep, nev)
        Vk = V @ Y[:, :keep]
        V[:] = 0
        V[:, :keep] = Vk
        T[:] = 0
        T[:keep, :keep] = np.diag(theta[:keep])
        if inject or beta <= 1e-12 * max(anorm, 1e-300):
            V[:, keep] = _orthonormal_random(rng, V[:, :keep], dim)
        else:
            wn = w / beta
            for _ in range(2):
                wn -= V[:, :keep] @ (V[:, :keep].conj().T @ wn)
            V[:, keep] = wn / np.linalg.norm(wn)
        k = keep
    raise ConvergenceError(
        f"thick-restart Lanczos did not converge in {cfg.max_restarts} restarts", residuals=best
    )


@dataclass
class TridiagResult:
    alphas: np.ndarray
    betas: np.ndarray
    seed_norm_sq: float

    def matrix(self) -> np.ndarray:
        return np.diag(self.alphas) + np.diag(self.betas, 1) + np.diag(self.betas, -1)

    def ritz(self):
        """Ritz values and their spectral weights (summing to ``seed_norm_sq``)."""
        vals, vecs = np.linalg.eigh(self.matrix())
        return vals, self.seed_norm_sq * np.abs(vecs[0]) ** 2


REORTH_MAX_DIM = 4096


def tridiagonalize(a, seed, nsteps: int, reorthogonalize: bool | None = None) -> TridiagResult:
    """Lanczos recurrence from ``seed``.

    Large spaces use the plain three-term recurrence; spaces up to
    ``REORTH_MAX_DIM`` (or ``reorthogonalize=True``) keep the basis and
    reorthogonalize fully, so that ``nsteps = dim`` reproduces the exact
    resolvent element.
    """
    if nsteps < 1:
        raise ValueError("need at least one step")
    mv = _matvec(a)
    x = np.asarray(seed, dtype=complex)
    nrm2 = float(np.vdot(x, x).real)
    if nrm2 == 0:
        raise ValueError("zero seed vector")
    if reorthogonalize is None:
        reorthogonalize = len(x) <= REORTH_MAX_DIM
    v = x / np.sqrt(nrm2)
    v_prev = np.zeros_like(v)
    if reorthogonalize:
        basis = np.zeros((len(x), min(nsteps, len(x)) + 1), dtype=complex)
        basis[:, 0] = v
    beta = 0.0
    alphas, betas = [], []
    scale = 0.0
    for step in range(nsteps):
        w = mv(v) - beta * v_prev
        alpha = float(np.vdot(v, w).real)
        w = w - alpha * v
        if reorthogonalize:
            vb = basis[:, : step + 1]
            w = w - vb @ (w.conj() @ vb).conj()
        alphas.append(alpha)
        scale = max(scale, abs(alpha), beta)
        if step == nsteps - 1:
            break
        beta_new = float(np.linalg.norm(w))
        if beta_new <= 1e-12 * scale or (reorthogonalize and step + 1 >= basis.shape[1] - 1):
            break
        betas.append(beta_new)
        v_prev, v, beta = v, w / beta_new, beta_new
        if reorthogonalize:
            basis[:, step + 1] = v
    return TridiagResult(np.array(alphas), np.array(betas), nrm2)


def continued_fraction(t: TridiagResult, omega, gamma):
    """``|seed|^2 / (z - a0 - b1^2 / (z - a1 - ...))`` with ``z = omega + i gamma``."""
    z = np.asarray(omega) + 1j * np.asarray(gamma)
    g = z - t.alphas[-1]
    for k in range(len(t.alphas) - 2, -1, -1):
        g = z - t.alphas[k] - t.betas[k] ** 2 / g
    return t.seed_norm_sq / g


def _shifted_lanczos(mv, z, b, rtol, maxiter):
    """Galerkin solve of ``(z - A) y = b`` on the Lanczos basis of ``A``.

    LU of the shifted tridiagonal matrix is built on the fly (CG-like short
    recurrence); with ``Im z != 0`` no pivot can vanish.
    """
    bn = np.linalg.norm(b)
    v = b / bn
    v_prev = np.zeros_like(v)
    p_prev = np.zeros_like(v)
    y = np.zeros_like(v)
    beta = 0.0
    eta_prev = None
    zeta = bn
    for j in range(maxiter):
        w = mv(v) - beta * v_prev
        alpha = np.vdot(v, w).real
        w = w - alpha * v
        diag = z - alpha
        if j == 0:
            eta = diag
        else:
            lam = -beta / eta_prev
            eta = diag - beta**2 / eta_prev
            zeta = -lam * zeta
        p = (v + beta * p_prev) / eta
        y = y + zeta * p
        beta_next = np.linalg.norm(w)
        if beta_next * abs(zeta / eta) <= rtol * bn or beta_next == 0:
            break
        v_prev, v, beta = v, w / beta_next, beta_next
        p_prev, eta_prev = p, eta
    return y


def resolvent_apply(a, omega: float, gamma: float, x, tol: float = 1e-10, maxiter: int = 2000, max_refine: int = 8):
    """Solve ``(omega - A + i gamma) y = x`` for Hermitian ``A``."""
    if gamma == 0:
        raise ValueError("gamma must be nonzero")
    mv = _matvec(a)
    x = np.asarray(x, dtype=complex)
    xn = np.linalg.norm(x)
    if xn == 0:
        raise ValueError("zero right-hand side")
    z = omega + 1j * gamma
    y = np.zeros_like(x)
    r = x.copy()
    rn = xn
    for _ in range(max_refine):
        y = y + _shifted_lanczos(mv, z, r, 0.5 * tol * xn / rn, maxiter)
        r = x - (z * y - mv(y))
        rn = np.linalg.norm(r)
        if rn <= tol * xn:
            return y
    raise ConvergenceError(f"resolvent residual {rn / xn:.3e} above {tol:.1e}", residuals=rn / xn)
