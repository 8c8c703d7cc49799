"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import time
from math import comb

import numpy as np
import scipy.sparse as sps
from scipy.spatial.transform import Rotation

from hxx.case import build_case, load_case, write_case
from hxx.fock import Determinant, apply_annihilate, apply_create, bits_to_str, parity_chain, str_to_bits
from hxx.hamiltonian import (
    ExchangeField,
    SlaterParams,
    coulomb_inter,
    coulomb_intra,
    crystal_field_d,
    slater_koster_hopping,
    spin_orbit,
)
from hxx.params import OCTAHEDRON, ParamSet
from hxx.run import (
    _combine,
    base_manifold,
    get_counters,
    get_rixs,
    get_spectrum,
    hamiltonian,
    polarization_out,
    transition_channels,
)
from hxx.solvers import LanczosConfig, continued_fraction, lanczos_thick_restart, resolvent_apply, tridiagonalize
from hxx.space import (
    BondGeometry,
    ConfigConstraint,
    HybridizationParams,
    ShellLayout,
    enumerate_configurations,
    expand,
    ligand_reduction,
)
from hxx.sparse import project
from hxx.spectra import RIXSConfig, rixs

from oracles import coulomb_dense, crystal_field_m, d2_term_energies, dense_resolvent_element, dense_rixs, list_annihilate, list_create

MN = ShellLayout([("2p", 1), ("3d", 2), ("L", None, 5)])
D = ShellLayout([("3d", 2)])


def _levels(vals, tol=1e-8):
    out = []
    for v in np.sort(vals):
        if out and abs(v - out[-1][0]) < tol:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def _hermitian(n, seed, density=None):
    rng = np.random.default_rng(seed)
    if density is None:
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return (a + a.conj().T) / 2
    a = sps.random(n, n, density=density, random_state=seed, format="csr")
    a = a + 1j * sps.random(n, n, density=density, random_state=seed + 1, format="csr")
    return ((a + a.conj().T) / 2 + sps.diags(rng.normal(size=n))).tocsr()


def test_01_bit_rules_random(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(10_000):
        width = int(rng.integers(1, 100))
        occ = tuple(sorted(rng.choice(width, size=int(rng.integers(0, width + 1)), replace=False).tolist()))
        d = Determinant.from_occupied(occ, width)
        p = int(rng.integers(0, width))
        for ours, ref in ((apply_create(p, d), list_create(p, occ)), (apply_annihilate(p, d), list_annihilate(p, occ))):
            if (ours is None) != (ref is None):
                bad += 1
            elif ours is not None and ((tuple(ours[0].occupied()), ours[1]) != ref or ours[0].signs != parity_chain(ours[0].val, width)):
                bad += 1
    dt = time.perf_counter() - t0
    criterion(1, "bit rules vs list oracle, 1e4 cases", bad == 0 and dt < 1.0, f"{bad} mismatches, {dt:.2f} s")


def test_02_paper_bit_example(criterion):
    signs = bits_to_str(parity_chain(str_to_bits("00010010"), 8), 8)
    d = Determinant.from_str("00010010")
    ok = signs == "00001110" and d.signs == str_to_bits("00001110")
    criterion(2, "parity chain of 00010010", ok, f"got {signs}")


def test_03_dimensions_and_expand(criterion):
    t0 = time.perf_counter()
    d5 = enumerate_configurations(D, ConfigConstraint("3d", 5))
    base = ConfigConstraint("3d", 4, 2, "L")
    exci = ConfigConstraint("3d", 5, 2, "L", {"2p": 5})
    dims = (d5.dim, enumerate_configurations(MN, base).dim, enumerate_configurations(MN, exci).dim)
    want = (comb(10, 5), 12180, 46512)
    # a low-symmetry wanderer couples every configuration
    geom = BondGeometry(np.random.default_rng(1).normal(size=(3, 3)))
    hs, hp = slater_koster_hopping(MN, ligand_reduction(geom, HybridizationParams(2.0, 1.0)))
    wanderer = (
        coulomb_intra(MN, "3d", SlaterParams({0: 5.0, 2: 8.0, 4: 5.0}))
        + coulomb_inter(MN, "2p", "3d", SlaterParams({0: 1.0, 2: 3.0}, {1: 2.0, 3: 1.0}))
        + spin_orbit(MN, "3d") + spin_orbit(MN, "2p")
        + crystal_field_d(MN, "3d", geom, -3.0, 0.3, 0.1) + hs + hp
    )
    same = []
    for c in (base, exci):
        grown = expand(MN, [c.seed(MN)], wanderer, c)
        same.append(grown.basis == enumerate_configurations(MN, c).basis)
    dt = time.perf_counter() - t0
    ok = dims == want and all(same) and dt < 30
    criterion(3, "space dimensions and expand == enumerate", ok, f"dims {dims}, expand match {same}, {dt:.1f} s")


def test_04_d2_brute_force(criterion):
    t0 = time.perf_counter()
    F = {0: 4.0, 2: 9.0, 4: 6.0}
    space = enumerate_configurations(D, ConfigConstraint("3d", 2))
    h = project(coulomb_intra(D, "3d", SlaterParams(F)), space).toarray()
    basis, ref = coulomb_dense(2, 2, F)
    perm = [space.lookup[sum(1 << p for p in occ)] for occ in basis]
    err = np.abs(h[np.ix_(perm, perm)] - ref).max()
    levels = _levels(np.linalg.eigvalsh(h))
    terms = sorted(d2_term_energies(4.0, 9.0, 6.0).values())
    eok = np.allclose([e for e, _ in levels], [e for e, _ in terms], atol=1e-10, rtol=0)
    degs = sorted(n for _, n in levels)
    dt = time.perf_counter() - t0
    ok = err < 1e-10 and eok and degs == [1, 5, 9, 9, 21] and dt < 5
    criterion(4, "d2 Coulomb vs brute force", ok, f"max err {err:.1e}, degeneracies {degs}, {dt:.1f} s")


def test_05_d4_hund_and_singlet(criterion):
    p = ParamSet("2p3d", Vs=0.0, Vp=0.0, VC0=0.0, base_SO_1=0.0, base_Sop_Zero=0.0, nsearchedeigen=30, erange=1e-3)
    case = build_case("2p3d", 4, 0, False, p)
    res = lanczos_thick_restart(hamiltonian(case, p, "base"), case.spaces["base"].dim, LanczosConfig(nsearchedeigen=30))
    e = res.eigenvalues
    deg = int(np.sum(e < e[0] + 1e-8))
    cnt = get_counters(case, p)
    s2_ok = np.allclose(cnt["S2"], 6.0, atol=1e-8) and np.allclose(cnt["L2"], 6.0, atol=1e-8)
    # less than half filled: spin-orbit leaves a J = 0 singlet lowest
    q = p.copy()
    q["base_SO_1"] = 0.05
    q["nsearchedeigen"] = 4
    so = lanczos_thick_restart(hamiltonian(case, q, "base"), case.spaces["base"].dim, LanczosConfig(nsearchedeigen=4)).eigenvalues
    c2 = get_counters(case, q)
    j2 = c2["S2"][0] + c2["L2"][0] + c2["SL2"][0]
    ok = deg == 25 and len(cnt["E"]) == 25 and s2_ok and so[1] - so[0] > 1e-3 and abs(j2) < 1e-3
    criterion(5, "d4 Hund ground term and J=0 singlet", ok, f"deg {deg}, gap {so[1] - so[0]:.4f}, <J^2> {j2:.1e}")


def test_06_octahedral_crystal_field(criterion):
    geom = BondGeometry(np.array(OCTAHEDRON))
    one = enumerate_configurations(D, ConfigConstraint("3d", 1))
    up = [one.lookup[1 << D["3d"].index(k, 0)] for k in range(5)]
    out = []
    for vc0, vc1 in ((0.2, 0.0), (0.0, 0.2)):
        h = project(crystal_field_d(D, "3d", geom, -3.0, vc0, vc1), one).toarray()[np.ix_(up, up)]
        ref = crystal_field_m(2, OCTAHEDRON, [vc0, vc1, 0.0])
        e = np.linalg.eigvalsh(h)
        out.append((np.abs(h - ref).max(), e))
    split = out[0][1][-1] - out[0][1][0]
    t2g = out[1][1][-1]
    ok = max(o[0] for o in out) < 1e-10 and abs(split - 0.6) < 1e-10 and abs(t2g - 0.8) < 1e-10 and abs(out[1][1][0]) < 1e-10
    criterion(6, "octahedral eg-t2g = 3 VC0, t2g = 4 VC1", ok, f"eg-t2g {split:.12f}, t2g {t2g:.12f}")


def test_07_ligand_reduction(criterion):
    worst = 0.0
    for seed in range(5):
        bonds = np.random.default_rng(seed).normal(size=(seed + 2, 3))
        q = ligand_reduction(BondGeometry(bonds), HybridizationParams(2.0, 1.0)).orbitals
        worst = max(worst, np.abs(q.T @ q - np.eye(q.shape[1])).max())
    vs, vp = 2.0, 1.0
    red = ligand_reduction(BondGeometry(np.array(OCTAHEDRON)), HybridizationParams(vs, vp))
    norms = np.sum(red.images**2, axis=0)
    want = np.array([3 * vs**2, 4 * vp**2, 4 * vp**2, 3 * vs**2, 4 * vp**2])
    nerr = np.abs(norms - want).max()
    ok = worst < 1e-12 and nerr < 1e-10
    criterion(7, "ligand orbitals orthonormal, octahedral norms", ok, f"Gram err {worst:.1e}, norm err {nerr:.1e}")


def test_08_solvers(criterion):
    t0 = time.perf_counter()
    eig_err = 0.0
    for n, seed in ((100, 0), (500, 1), (2000, 2)):
        a = _hermitian(n, seed, density=None if n <= 500 else 5.0 / n)
        ref = np.linalg.eigvalsh(a if n <= 500 else a.toarray())[:5]
        got = lanczos_thick_restart(a, n, LanczosConfig(nsearchedeigen=5)).eigenvalues
        eig_err = max(eig_err, np.abs(got - ref).max())
    cf_err = 0.0
    for n in (50, 200):
        a = _hermitian(n, n)
        x = np.random.default_rng(n).normal(size=n) + 0j
        omega = np.linspace(-15, 15, 301)
        got = continued_fraction(tridiagonalize(a, x, n), omega, 0.2)
        ref = dense_resolvent_element(a, x, omega, np.full_like(omega, 0.2))
        cf_err = max(cf_err, np.abs(got - ref).max() / np.abs(ref).max())
    a = _hermitian(2000, 7, density=4.0 / 2000)
    x = np.random.default_rng(7).normal(size=2000) + 0j
    res_err = 0.0
    for omega, gamma in ((0.3, 0.05), (-1.0, 0.5)):
        y = resolvent_apply(a, omega, gamma, x)
        res_err = max(res_err, np.linalg.norm(x - ((omega + 1j * gamma) * y - a @ y)) / np.linalg.norm(x))
    dt = time.perf_counter() - t0
    ok = eig_err < 1e-8 and cf_err < 1e-6 and res_err <= 1e-8 and dt < 120
    criterion(8, "Lanczos, continued fraction, resolvent", ok, f"eig {eig_err:.1e}, CF {cf_err:.1e}, residual {res_err:.1e}, {dt:.1f} s")


def test_09_sum_rule(criterion):
    p = ParamSet("2p3d", all1=0.1, all2=0.1)
    case = build_case("2p3d", 5, 0, False, p)
    ops, _ = transition_channels(case, p)
    gm = base_manifold(case, p)
    want = sum(w * np.linalg.norm(d @ gm.vectors[:, k]) ** 2 for d in ops for k, w in enumerate(gm.weights))
    probe = get_spectrum(case, p)
    lo, hi = probe.energies[0] - 300, probe.energies[-1] + 300
    grid = np.arange(lo, hi, 0.01)
    res = get_spectrum(case, p, energies=grid)
    got = sum(np.trapezoid(np.abs(c.imag), grid) for c in res.channels) / np.pi
    rel = abs(got - want) / want
    criterion(9, "sum rule on a wide grid", rel < 0.02, f"integral {got:.6f}, |D X0|^2 {want:.6f}, rel {rel:.1e}")


def _rotated_params(rot):
    h = rot.apply([0.0, 0.0, 0.02])
    fld = ExchangeField.from_vector(h)
    p = ParamSet("2p3d", nsearchedeigen=10)
    p["BONDS"] = rot.apply(np.array(OCTAHEDRON)).tolist()
    for pre in ("base", "exci"):
        p[f"{pre}_Sop_Zero"] = complex(fld.s_zero)
        p[f"{pre}_Sop_Minus"] = complex(fld.s_minus)
        p[f"{pre}_Sop_Plus"] = complex(fld.s_plus)
    return p


def test_10_rotational_invariance(criterion):
    grid = np.linspace(-10, 25, 700)
    totals = []
    for rot in (Rotation.identity(), Rotation.random(random_state=11)):
        p = _rotated_params(rot)
        case = build_case("2p3d", 8, 2, False, p)
        totals.append(get_spectrum(case, p, energies=grid).total())
    rel = np.abs(totals[1] - totals[0]).max() / np.abs(totals[0]).max()
    criterion(10, "Mz-summed spectrum invariant under rotation", rel < 1e-8, f"rel diff {rel:.1e}")


def test_11_toy_rixs(criterion):
    t0 = time.perf_counter()
    errs = []
    # toy matrices
    rng = np.random.default_rng(5)
    h0, hi, hf = (_hermitian(n, s) + off for n, s, off in ((4, 1, 0), (6, 2, 20), (5, 3, 2)))
    d_in = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    d_out = rng.normal(size=(5, 6))
    cfg = RIXSConfig(21.0, -3.0, 8.0, 0.05, 0.3, (0.2, 2.0, 0.4))
    e, v = np.linalg.eigh(h0)
    got = rixs(hi, hf, d_in, d_out, e[0], v[:, 0], cfg, nsteps=6).channels[0]
    w = cfg.grid()
    ref = dense_rixs(h0, hi, hf, d_in, d_out, 21.0, 0.3, w, cfg.gamma_out(w))
    errs.append(np.abs(got - ref).max() / np.abs(ref).max())
    # the smallest rixs case through the pipeline
    p = ParamSet("rixs", base_Sop_Zero=0.01)  # split the ground doublet well beyond the tolerance
    case = build_case("rixs", 9, 0, False, p)
    mats = [hamiltonian(case, p, s).toarray() for s in ("base", "exci", "final")]
    e0, ex, fin = (np.linalg.eigvalsh(m) for m in mats)
    cfg = RIXSConfig(ex[0] - e0[0], fin[0] - 3.0, fin[-1] + 3.0, 0.02, 0.5, (0.1, fin[-1], 0.2))
    pol_in, pol_out = [1, 0, 0, 0, 1], [1, 0]
    got = get_rixs(case, p, cfg, pol_in, pol_out).channels[0]
    d_in = transition_channels(case, p, pol_in)[0][0].toarray()
    d_out = _combine(case.transitions["emit"], polarization_out(pol_out)).toarray()
    w = cfg.grid()
    ref = dense_rixs(*mats, d_in, d_out, cfg.ein, cfg.gammain, w, cfg.gamma_out(w))
    errs.append(np.abs(got - ref).max() / np.abs(ref).max())
    dt = time.perf_counter() - t0
    dims = tuple(case.dims().values())
    ok = max(errs) < 1e-8 and max(dims) <= 10 and np.abs(ref).max() > 0 and dt < 1.0
    criterion(11, "toy RIXS vs dense", ok, f"rel err {max(errs):.1e}, case dims {dims}, {dt:.2f} s")


def test_12_case_round_trip(criterion, tmp_path):
    p = ParamSet("2p3d", npunti=200)
    case = build_case("2p3d", 8, 1, False, p)
    write_case(case, tmp_path / "case")
    back = load_case(tmp_path / "case")
    comps = all(
        back.components[s].components[k].triples() == cs.components[k].triples()
        for s, cs in case.components.items()
        for k in cs.components
    )
    trans = all(back.transitions[t][q].triples() == ops[q].triples() for t, ops in case.transitions.items() for q in ops)
    bases = all(back.spaces[s].basis == case.spaces[s].basis for s in case.spaces)
    a, b = get_spectrum(case, p), get_spectrum(back, p)
    same = np.array_equal(a.energies, b.energies) and all(np.array_equal(x, y) for x, y in zip(a.channels, b.channels))
    ok = comps and trans and bases and same
    criterion(12, "case files round trip, identical spectrum", ok, f"components {comps}, transitions {trans}, spectrum {same}")
