"""Hamiltonian and transition operators as :class:`OperatorSum` objects.

Atomic shells use complex harmonics ``m = -l..l`` and spin-orbital indices
from :class:`~hxx.space.Shell`.  Geometry-dependent one-particle terms are
built over real harmonics and transformed to the ``m`` basis.

Every builder that corresponds to a tunable parameter returns unit-strength
operators; the physical value enters later as a coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import angular
from .fock import LadderOp, OperatorSum, one_body
from .space import BondGeometry, HybridizationParams, LigandReduction, ShellLayout


@dataclass
class SlaterParams:
    F: dict = field(default_factory=dict)
    G: dict = field(default_factory=dict)
    reduc: float = 1.0

    def __post_init__(self):
        if not 0 < self.reduc <= 1:
            raise ValueError("reduction factor must lie in (0, 1]")
        for v in list(self.F.values()) + list(self.G.values()):
            if not np.isfinite(v):
                raise ValueError("non-finite Slater integral")

    def radial(self, name: str) -> float:
        kind, k = name[0], int(name[1:])
        table = self.F if kind == "F" else self.G
        if k not in table:
            raise KeyError(f"missing Slater integral {name}")
        return table[k] * (self.reduc if k > 0 else 1.0)


@dataclass
class ExchangeField:
    s_zero: complex = 1e-5
    s_minus: complex = 0.0
    s_plus: complex = 0.0

    @classmethod
    def from_vector(cls, h) -> "ExchangeField":
        """Field ``h . S`` for a Cartesian vector ``h``."""
        hx, hy, hz = h
        return cls(hz, (hx + 1j * hy) / 2, (hx - 1j * hy) / 2)


def _c(layout, shell, m, spin):
    s = layout[shell]
    return s.index(m + s.l, spin)


def _l(layout, shell) -> int:
    l = layout[shell].l
    if l is None:
        raise ValueError(f"shell {shell} has no angular momentum")
    return l


def slater_names(la: int, lb: int | None = None) -> list[str]:
    """Radial integral names needed for a shell (``lb is None``) or shell pair."""
    if lb is None:
        return [f"F{k}" for k in range(0, 2 * la + 1, 2)]
    direct = [f"F{k}" for k in range(0, 2 * min(la, lb) + 1, 2)]
    exchange = [f"G{k}" for k in range(abs(la - lb), la + lb + 1) if (la + lb + k) % 2 == 0]
    return direct + exchange


def _two_body(layout, sa, sb, sc, sd, k, weight=1.0):
    """``weight * sum <ab|cd>_k c+_a c+_b c_d c_c`` over the given shells (unit R^k)."""
    la, lb, lc, ld = (_l(layout, s) for s in (sa, sb, sc, sd))
    terms = []
    for ma in range(-la, la + 1):
        for mc in range(-lc, lc + 1):
            ac = angular.gaunt_ck(la, ma, lc, mc, k)
            if ac == 0:
                continue
            for mb in range(-lb, lb + 1):
                md = ma + mb - mc
                if abs(md) > ld:
                    continue
                bd = angular.gaunt_ck(ld, md, lb, mb, k)
                if bd == 0:
                    continue
                for s1 in (0, 1):
                    for s2 in (0, 1):
                        a, b = _c(layout, sa, ma, s1), _c(layout, sb, mb, s2)
                        c, d = _c(layout, sc, mc, s1), _c(layout, sd, md, s2)
                        terms.append((weight * ac * bd, (LadderOp(a, True), LadderOp(b, True), LadderOp(d, False), LadderOp(c, False))))
    return OperatorSum(terms)


def coulomb_components(layout: ShellLayout, shell: str, other: str | None = None) -> dict[str, OperatorSum]:
    """Unit-radial Coulomb operators keyed by integral name (F0, F2, ..., G1, ...)."""
    la = _l(layout, shell)
    if other is None:
        return {n: _two_body(layout, shell, shell, shell, shell, int(n[1:]), 0.5) for n in slater_names(la)}
    if other == shell:
        raise ValueError("inter-shell Coulomb needs two distinct shells")
    lb = _l(layout, other)
    out = {}
    for name in slater_names(la, lb):
        k = int(name[1:])
        if name[0] == "F":
            op = _two_body(layout, shell, other, shell, other, k, 0.5) + _two_body(layout, other, shell, other, shell, k, 0.5)
        else:
            op = _two_body(layout, shell, other, other, shell, k, 0.5) + _two_body(layout, other, shell, shell, other, k, 0.5)
        out[name] = op
    return out


def _combine(components: dict, params: SlaterParams) -> OperatorSum:
    total = OperatorSum()
    for name, op in components.items():
        total = total + params.radial(name) * op
    return total


def coulomb_intra(layout: ShellLayout, shell: str, params: SlaterParams) -> OperatorSum:
    return _combine(coulomb_components(layout, shell), params)


def coulomb_inter(layout: ShellLayout, shell_a: str, shell_b: str, params: SlaterParams) -> OperatorSum:
    return _combine(coulomb_components(layout, shell_a, shell_b), params)


def _spin_orbital_matrix(l: int, lz, lp, lm):
    """One-particle l.s over (m, spin) with spin-major ordering."""
    n = 2 * l + 1
    h = np.zeros((2 * n, 2 * n))
    h[:n, :n] = 0.5 * lz
    h[n:, n:] = -0.5 * lz
    # 1/2 (l+ s- + l- s+): s- takes up -> down, s+ takes down -> up
    h[n:, :n] = 0.5 * lp
    h[:n, n:] = 0.5 * lm
    return h


def spin_orbit(layout: ShellLayout, shell: str, zeta: float = 1.0) -> OperatorSum:
    """``zeta * sum l.s`` over one shell; zero for s shells."""
    l = _l(layout, shell)
    if l == 0:
        return OperatorSum()
    h = _spin_orbital_matrix(l, *angular.angular_momentum(l))
    pos = list(layout[shell].positions)
    return zeta * one_body(h, pos, pos)


def spin_ops(layout: ShellLayout, shell: str):
    """``(S_z, S_+, S_-)`` restricted to one shell."""
    s = layout[shell]
    up, dn = s.spin_positions(0), s.spin_positions(1)
    eye = np.eye(s.norb)
    sz = one_body(0.5 * eye, up, up) + one_body(-0.5 * eye, dn, dn)
    return sz, one_body(eye, up, dn), one_body(eye, dn, up)


def orbital_ops(layout: ShellLayout, shell: str):
    """``(L_z, L_+, L_-)`` restricted to one shell."""
    s = layout[shell]
    lz, lp, lm = angular.angular_momentum(_l(layout, shell))
    ops = []
    for mat in (lz, lp, lm):
        ops.append(sum((one_body(mat, s.spin_positions(sp), s.spin_positions(sp)) for sp in (0, 1)), OperatorSum()))
    return tuple(ops)


def number_op(layout: ShellLayout, shell: str) -> OperatorSum:
    pos = list(layout[shell].positions)
    return one_body(np.eye(len(pos)), pos, pos)


def exchange_field(layout: ShellLayout, shell: str, fld: ExchangeField) -> OperatorSum:
    """``s_zero S_z + s_minus S_- + s_plus S_+`` on ``shell``."""
    sz, sp, sm = spin_ops(layout, shell)
    return complex(fld.s_zero) * sz + complex(fld.s_minus) * sm + complex(fld.s_plus) * sp


def exchange_components(layout: ShellLayout, shell: str) -> dict[str, OperatorSum]:
    sz, sp, sm = spin_ops(layout, shell)
    return {"Sop_Zero": sz, "Sop_Minus": sm, "Sop_Plus": sp}


def counter_dl(layout: ShellLayout, ligand: str, energy: float = 1.0) -> OperatorSum:
    return energy * number_op(layout, ligand)


def square_ops(layout: ShellLayout, shell: str):
    """``(S^2, L^2, 2 S.L)`` for one shell."""
    sz, sp, sm = spin_ops(layout, shell)
    lz, lp, lm = orbital_ops(layout, shell)
    s2 = sz * sz + 0.5 * (sp * sm + sm * sp)
    l2 = lz * lz + 0.5 * (lp * lm + lm * lp)
    sl = 2 * (sz * lz) + sp * lm + sm * lp
    return s2, l2, sl


def _real_to_shell_op(layout, shell, h_real) -> OperatorSum:
    s = layout[shell]
    h = angular.real_to_complex_matrix(s.l, h_real)
    return sum((one_body(h, s.spin_positions(sp), s.spin_positions(sp)) for sp in (0, 1)), OperatorSum())


# bond-frame diagonal slots per parameter: d -> VC0 sigma, VC1 pi; f adds VC2 delta
_CF_SLOTS = {2: {"VC0": (0,), "VC1": (1, 2)}, 3: {"VC0": (0,), "VC1": (1, 2), "VC2": (3, 4)}}


def crystal_field_matrix(l: int, geom: BondGeometry, alphavc: float, values: dict) -> np.ndarray:
    """Real-harmonic one-particle crystal field summed over bonds."""
    h = np.zeros((2 * l + 1, 2 * l + 1))
    for rot, s in zip(geom.rotations(), geom.scales(alphavc, with_facts=False)):
        m = angular.real_rotation(l, rot)
        for name, slots in _CF_SLOTS[l].items():
            v = values.get(name, 0.0)
            for i in slots:
                h += s * v * np.outer(m[:, i], m[:, i])
    return h


def crystal_field_components(layout: ShellLayout, shell: str, geom: BondGeometry, alphavc: float) -> dict[str, OperatorSum]:
    l = _l(layout, shell)
    if l not in _CF_SLOTS:
        raise ValueError(f"bond crystal field defined for d and f shells, not l={l}")
    return {
        name: _real_to_shell_op(layout, shell, crystal_field_matrix(l, geom, alphavc, {name: 1.0}))
        for name in _CF_SLOTS[l]
    }


def crystal_field_d(layout, shell, geom, alphavc, VC0, VC1) -> OperatorSum:
    comps = crystal_field_components(layout, shell, geom, alphavc)
    return VC0 * comps["VC0"] + VC1 * comps["VC1"]


def crystal_field_f(layout, shell, geom, alphavc, VC0, VC1, VC2) -> OperatorSum:
    comps = crystal_field_components(layout, shell, geom, alphavc)
    return VC0 * comps["VC0"] + VC1 * comps["VC1"] + VC2 * comps["VC2"]


def _hop_op(layout, shell, ligand, t_red) -> OperatorSum:
    """``sum T[k, mu] (a+_mu L_k + h.c.)`` with real orbital ``mu`` of ``shell``."""
    s, lig = layout[shell], layout[ligand]
    if t_red.shape[0] != lig.norb:
        raise ValueError(f"ligand shell has {lig.norb} orbitals, reduction retains {t_red.shape[0]}")
    coef = angular.complex_to_real(s.l) @ t_red.T  # [m, k]
    terms = []
    for sp in (0, 1):
        for mi in range(s.norb):
            for k in range(lig.norb):
                c = coef[mi, k]
                if abs(c) < 1e-14:
                    continue
                a, b = s.index(mi, sp), lig.index(k, sp)
                terms.append((c, (LadderOp(a, True), LadderOp(b, False))))
                terms.append((np.conj(c), (LadderOp(b, True), LadderOp(a, False))))
    return OperatorSum(terms)


def slater_koster_hopping(layout: ShellLayout, reduction: LigandReduction, shell: str = "3d", ligand: str = "L"):
    """Unit sigma and pi hybridization operators in the retained ligand basis."""
    return (
        _hop_op(layout, shell, ligand, reduction.hop_sigma),
        _hop_op(layout, shell, ligand, reduction.hop_pi),
    )


def multipole_op(layout: ShellLayout, shell_from: str, shell_to: str, k: int, pol) -> OperatorSum:
    """``sum_q pol[q] C^k_q`` promoting electrons from ``shell_from`` to ``shell_to``."""
    pol = np.asarray(pol, dtype=complex)
    if pol.shape != (2 * k + 1,):
        raise ValueError(f"rank-{k} polarization needs {2 * k + 1} coefficients")
    lf, lt = _l(layout, shell_from), _l(layout, shell_to)
    if (lf + lt + k) % 2 or not abs(lf - lt) <= k <= lf + lt:
        raise ValueError(f"rank-{k} transition {shell_from} -> {shell_to} is forbidden")
    terms = []
    for mt in range(-lt, lt + 1):
        for mf in range(-lf, lf + 1):
            q = mt - mf
            if abs(q) > k or pol[q + k] == 0:
                continue
            g = angular.gaunt_ck(lt, mt, lf, mf, k)
            if g == 0:
                continue
            for sp in (0, 1):
                a, b = _c(layout, shell_to, mt, sp), _c(layout, shell_from, mf, sp)
                terms.append((pol[q + k] * g, (LadderOp(a, True), LadderOp(b, False))))
    return OperatorSum(terms)


def dipole_op(layout, shell_from, shell_to, pol) -> OperatorSum:
    """Dipole operator; ``pol`` = coefficients for ``q = -1, 0, 1``."""
    if abs(_l(layout, shell_from) - _l(layout, shell_to)) != 1:
        raise ValueError("dipole transitions need |l_from - l_to| = 1")
    return multipole_op(layout, shell_from, shell_to, 1, pol)


def quadrupole_op(layout, shell_from, shell_to, pol) -> OperatorSum:
    """Quadrupole operator; ``pol`` = coefficients for ``q = -2..2``."""
    if abs(_l(layout, shell_from) - _l(layout, shell_to)) not in (0, 2):
        raise ValueError("quadrupole transitions need |l_from - l_to| in {0, 2}")
    return multipole_op(layout, shell_from, shell_to, 2, pol)


def cartesian_polarization(vec) -> np.ndarray:
    """Spherical dipole coefficients (q = -1, 0, 1) of a Cartesian vector."""
    ex, ey, ez = (complex(v) for v in vec)
    r2 = np.sqrt(2.0)
    return np.array([(ex + 1j * ey) / r2, ez, (-ex + 1j * ey) / r2])


def effective_dipole_components(
    layout: ShellLayout,
    geom: BondGeometry,
    hyb: HybridizationParams,
    reduction: LigandReduction,
    pol,
    core: str = "1s",
    ligand: str = "L",
):
    """Dipole into a virtual p shell, carried onto the ligands by p-ligand hopping.

    Returns unit ``(sigma, pi)`` operators; multiply by Dips and Dipp.  Each
    term removes a core electron and adds a ligand electron.
    """
    pol = np.asarray(pol, dtype=complex)
    if pol.shape != (3,):
        raise ValueError("dipole polarization needs 3 coefficients")
    lc = _l(layout, core)
    if lc != 0:
        raise ValueError("effective dipole expects an s core shell")
    if geom.nbonds == 0:
        raise ValueError("effective dipole needs bonds")
    t_sigma, t_pi = (reduction.orbitals.T @ t for t in _p_hopping(geom, hyb))
    cmat = angular.complex_to_real(1)  # real_nu = sum_m C[m, nu] Y_m
    lig, cs = layout[ligand], layout[core]
    out = []
    for t in (t_sigma, t_pi):
        terms = []
        for q in (-1, 0, 1):
            if pol[q + 1] == 0:
                continue
            g = angular.gaunt_ck(1, q, 0, 0, 1)
            amp = pol[q + 1] * g * (t @ cmat[q + 1].conj())  # over ligand k
            for k in range(lig.norb):
                if abs(amp[k]) < 1e-14:
                    continue
                for sp in (0, 1):
                    terms.append((amp[k], (LadderOp(lig.index(k, sp), True), LadderOp(cs.index(0, sp), False))))
        out.append(OperatorSum(terms))
    return tuple(out)


def _p_hopping(geom: BondGeometry, hyb: HybridizationParams):
    from .space import bond_frame_hopping

    return bond_frame_hopping(geom, 1, hyb.alphadipo)


def effective_dipole_rixs(layout, geom, hyb, reduction, pol, core="1s", ligand="L") -> OperatorSum:
    sigma, pi = effective_dipole_components(layout, geom, hyb, reduction, pol, core, ligand)
    return hyb.Dips * sigma + hyb.Dipp * pi
