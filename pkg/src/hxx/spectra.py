"""Absorption, RIXS and ground-state counters from assembled operators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .solvers import (
    LanczosConfig,
    _matvec,
    continued_fraction,
    lanczos_thick_restart,
    resolvent_apply,
    tridiagonalize,
)

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-10
WEIGHT_FLOOR = 1e-10  # relative spectral weight below which Ritz values do not set the grid


@dataclass
class GroundManifold:
    energies: np.ndarray
    vectors: np.ndarray  # (dim, n) columns
    weights: np.ndarray
    temperature: float = 0.009
    erange: float = 0.1
    tolefact: float = 1e-6

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def e0(self) -> float:
        return float(self.energies[0])


def boltzmann_weights(energies, temp: float, erange: float, tolefact: float):
    """Indices kept and their normalized weights."""
    energies = np.asarray(energies, dtype=float)
    if temp <= 0:
        raise ValueError("temperature must be positive")
    de = energies - energies.min()
    keep = np.flatnonzero(de <= erange + DEGENERACY_TOL)
    w = np.exp(-de[keep] / temp)
    w /= w.sum()
    ok = w >= tolefact
    keep, w = keep[ok], w[ok]
    return keep, w / w.sum()


def ground_manifold(
    h,
    dim: int,
    nsearchedeigen: int = 10,
    temp: float = 0.009,
    erange: float = 0.1,
    tolefact: float = 1e-6,
    config: LanczosConfig | None = None,
) -> GroundManifold:
    cfg = config or LanczosConfig(nsearchedeigen=nsearchedeigen)
    res = lanczos_thick_restart(h, dim, cfg)
    order = np.argsort(res.eigenvalues)
    e, x = res.eigenvalues[order], res.eigenvectors[:, order]
    keep, w = boltzmann_weights(e, temp, erange, tolefact)
    if len(keep) == len(e) and len(e) < dim and e[-1] - e[0] <= erange:
        log.warning("all %d computed states lie within erange; increase nsearchedeigen", len(e))
    return GroundManifold(e[keep], x[:, keep], w, temp, erange, tolefact)


@dataclass
class BroadeningModel:
    all1: float = 0.1
    all2: float = 0.1
    El2l3: float = 700.0
    shift: float = 0.0

    def __post_init__(self):
        if self.all1 <= 0 or self.all2 <= 0:
            raise ValueError("Lorentzian widths must be positive")

    def gamma(self, x):
        """Half-width at points ``x`` of the shifted output axis."""
        return np.where(np.asarray(x) < self.El2l3, self.all1, self.all2)


@dataclass
class SpectrumResult:
    energies: np.ndarray
    channels: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        for ch in self.channels:
            if len(ch) != len(self.energies):
                raise ValueError("channel length differs from energy grid")

    def __getitem__(self, i):
        # res[0] is the grid, res[i >= 1] the channels
        return self.energies if i == 0 else self.channels[i - 1]

    def __len__(self) -> int:
        return 1 + len(self.channels)

    def total(self) -> np.ndarray:
        return np.sum(self.channels, axis=0)


def spectrum_grid(npunti: int, dxleft: float, dxright: float, emin: float, emax: float, shift: float = 0.0) -> np.ndarray:
    """Uniform grid from ``emin + shift + dxleft`` to ``emax + shift + dxright``."""
    if npunti < 2:
        raise ValueError("npunti must be >= 2")
    lo, hi = emin + shift + dxleft, emax + shift + dxright
    if not hi > lo:
        centre = 0.5 * (lo + hi)
        lo, hi = centre - 0.5, centre + 0.5
    return np.linspace(lo, hi, npunti)


def _ritz_extent(t, e_ref):
    vals, w = t.ritz()
    sel = w > WEIGHT_FLOOR * t.seed_norm_sq
    vals = vals[sel] if sel.any() else vals
    return vals.min() - e_ref, vals.max() - e_ref


def absorption(
    h_exci,
    transitions: Sequence,
    manifold: GroundManifold,
    npunti: int = 500,
    dxleft: float = -0.1,
    dxright: float = 0.1,
    broadening: BroadeningModel | None = None,
    nsteps: int = 250,
    energies=None,
    labels=None,
) -> SpectrumResult:
    """Boltzmann-averaged absorption, one channel per transition operator.

    For each ground state ``X_n`` and channel the seed ``D X_n`` starts a
    Lanczos tridiagonalization of the excited Hamiltonian; the continued
    fraction is evaluated at ``z = (x - shift) + E_n + i gamma(x)`` where
    ``x`` is the output axis (transition energy plus shift).  Channels hold
    the complex conjugate of the resolvent element, so the imaginary part is
    the (non-negative) absorption.
    """
    b = broadening or BroadeningModel()
    ops = [_matvec(d) for d in transitions]
    runs = []
    lo, hi = np.inf, -np.inf
    for n in range(len(manifold)):
        x0 = manifold.vectors[:, n]
        per = []
        for mv in ops:
            seed = np.asarray(mv(x0)).reshape(-1)
            if not np.any(np.abs(seed) > 0):
                per.append(None)
                continue
            t = tridiagonalize(h_exci, seed, nsteps)
            a, c = _ritz_extent(t, manifold.energies[n])
            lo, hi = min(lo, a), max(hi, c)
            per.append(t)
        runs.append(per)
    if energies is None:
        if not np.isfinite(lo):
            lo = hi = 0.0
        energies = spectrum_grid(npunti, dxleft, dxright, lo, hi, b.shift)
    energies = np.asarray(energies, dtype=float)
    gam = b.gamma(energies)
    channels = [np.zeros(len(energies), dtype=complex) for _ in ops]
    for n, per in enumerate(runs):
        omega = energies - b.shift + manifold.energies[n]
        for ch, t in zip(channels, per):
            if t is not None:
                ch += manifold.weights[n] * np.conj(continued_fraction(t, omega, gam))
    return SpectrumResult(energies, channels, list(labels) if labels else [f"ch{i}" for i in range(len(ops))])


@dataclass
class RIXSConfig:
    ein: float
    eout1: float
    eout2: float
    dout: float
    gammain: float = 0.2
    gammaout: tuple = (0.5, 20.0, 1.0)

    def __post_init__(self):
        if not self.eout1 < self.eout2:
            raise ValueError("need eout1 < eout2")
        if self.dout <= 0 or self.gammain <= 0:
            raise ValueError("dout and gammain must be positive")
        if len(self.gammaout) != 3 or self.gammaout[0] <= 0 or self.gammaout[2] <= 0:
            raise ValueError("gammaout = (gamma_low, crossover, gamma_high) with positive widths")

    def grid(self) -> np.ndarray:
        n = int(round((self.eout2 - self.eout1) / self.dout)) + 1
        return self.eout1 + self.dout * np.arange(n)

    def gamma_out(self, w):
        low, cross, high = self.gammaout
        return np.where(np.asarray(w) < cross, low, high)


def rixs_vector(h_exci, d_in, d_out, e0: float, x0, cfg: RIXSConfig, tol: float = 1e-10):
    """``D_out (E0 + ein - H + i gammain)^-1 D_in X0``; ``None`` if it vanishes."""
    b = np.asarray(_matvec(d_in)(x0)).reshape(-1)
    if not np.any(b):
        return None
    g = resolvent_apply(h_exci, e0 + cfg.ein, cfg.gammain, b, tol=tol)
    v = np.asarray(_matvec(d_out)(g)).reshape(-1)
    return v if np.any(np.abs(v) > 0) else None


def rixs(h_exci, h_final, d_in, d_out, e0: float, x0, cfg: RIXSConfig, nsteps: int = 250) -> SpectrumResult:
    """RIXS from the single ground state ``x0`` on the ``eout`` grid."""
    grid = cfg.grid()
    v = rixs_vector(h_exci, d_in, d_out, e0, x0, cfg)
    if v is None:
        return SpectrumResult(grid, [np.zeros(len(grid), dtype=complex)], ["rixs"])
    t = tridiagonalize(h_final, v, nsteps)
    return SpectrumResult(grid, [np.conj(continued_fraction(t, grid, cfg.gamma_out(grid)))], ["rixs"])


COUNTER_NAMES = ("E", "S2", "L2", "SL2", "occP", "Sz", "Lz")


def counters(manifold: GroundManifold, ops: dict) -> dict:
    """Per-state expectation values; ``ops`` maps counter names (minus E) to operators."""
    out = {"E": [float(e) for e in manifold.energies]}
    for name in COUNTER_NAMES[1:]:
        mv = _matvec(ops[name]) if name in ops else None
        vals = []
        for n in range(len(manifold)):
            x = manifold.vectors[:, n]
            vals.append(float(np.vdot(x, mv(x)).real) if mv else float("nan"))
        out[name] = vals
    return out
