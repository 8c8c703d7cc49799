from math import comb

import numpy as np
import pytest

from hxx.fock import Determinant, OperatorSum
from hxx.hamiltonian import SlaterParams, coulomb_intra, crystal_field_d, slater_koster_hopping, spin_orbit
from hxx.params import OCTAHEDRON
from hxx.space import (
    BondGeometry,
    ConfigConstraint,
    HybridizationParams,
    ShellLayout,
    enumerate_configurations,
    expand,
    ligand_reduction,
    read_basis,
    write_basis,
)

S3 = np.sqrt(3.0)
D_ONLY = ShellLayout([("3d", 2)])
MN = ShellLayout([("2p", 1), ("3d", 2), ("L", None, 5)])
F = SlaterParams({0: 5.0, 2: 8.0, 4: 5.0})


def _sk_pd(direction, vs, vp):
    """Slater-Koster p-d table: rows p_x, p_y, p_z; columns z^2, xz, yz, x^2-y^2, xy."""
    l, m, n = np.asarray(direction, float) / np.linalg.norm(direction)
    cos = {"x": l, "y": m, "z": n}
    out = np.zeros((3, 5))
    for i, a in enumerate("xyz"):
        la = cos[a]

        def t2g(b, c):
            return S3 * la * cos[b] * cos[c] * vs + ((a == b) * cos[c] + (a == c) * cos[b] - 2 * la * cos[b] * cos[c]) * vp

        out[i, 1] = t2g("x", "z")
        out[i, 2] = t2g("y", "z")
        out[i, 4] = t2g("x", "y")
        out[i, 3] = S3 / 2 * la * (l * l - m * m) * vs + ((a == "x") * l - (a == "y") * m - la * (l * l - m * m)) * vp
        pi_z2 = {"x": -S3 * l * n * n, "y": -S3 * m * n * n, "z": S3 * n * (l * l + m * m)}[a]
        out[i, 0] = la * (n * n - (l * l + m * m) / 2) * vs + pi_z2 * vp
    return out


def _sk_gram(bonds, vs, vp):
    return sum(_sk_pd(b, vs, vp).T @ _sk_pd(b, vs, vp) for b in bonds)


# --- layouts and constraints ----------------------------------------------------

def test_layout_widths_and_indices():
    assert MN.width == 26
    assert MN["3d"].index(0, 0) == 6 and MN["3d"].index(4, 1) == 15
    assert list(MN["L"].positions) == list(range(16, 26))
    with pytest.raises(ValueError):
        ShellLayout([("a", 1, 5)])
    with pytest.raises(ValueError):
        ShellLayout([("a", 1), ("a", 2)])
    assert ShellLayout.from_header(MN.to_header()) == MN


def test_enumerate_counts():
    assert enumerate_configurations(D_ONLY, ConfigConstraint("3d", 5)).dim == 252
    base = enumerate_configurations(MN, ConfigConstraint("3d", 4, 2, "L"))
    assert base.dim == comb(10, 4) + comb(10, 5) * 10 + comb(10, 6) * comb(10, 8) == 12180
    exci = enumerate_configurations(MN, ConfigConstraint("3d", 5, 2, "L", {"2p": 5}))
    assert exci.dim == 6 * (252 + 210 * 10 + 120 * 45) == 46512


def test_spinfixed_maximal_sz():
    sp = enumerate_configurations(D_ONLY, ConfigConstraint("3d", 4, spinfixed=True))
    assert sp.dim == 5
    assert {D_ONLY.twice_sz(v) for v in sp.basis} == {4}
    low = enumerate_configurations(D_ONLY, ConfigConstraint("3d", 4, spinfixed=True, fixed_sz=0))
    assert low.dim == comb(5, 2) ** 2
    with pytest.raises(ValueError):
        ConfigConstraint("3d", 4, spinfixed=True, fixed_sz=0.5).seed(D_ONLY)


def test_constraint_errors():
    with pytest.raises(ValueError):
        ConfigConstraint("3d", 4, nhopped=-1)
    with pytest.raises(ValueError):
        ConfigConstraint("3d", 11).configurations(D_ONLY)


def test_basis_order_is_canonical():
    sp = enumerate_configurations(MN, ConfigConstraint("3d", 4, 1, "L"))
    occ = [MN.occupations(v)[1] for v in sp.basis]
    assert occ == sorted(occ)
    first = sp.basis[: comb(10, 4)]
    assert first == sorted(first)
    assert all(sp.lookup[v] == i for i, v in enumerate(sp.basis))


# --- expansion ------------------------------------------------------------------

def _low_symmetry(seed=0):
    return BondGeometry(np.random.default_rng(seed).normal(size=(3, 3)))


def test_expand_coulomb_keeps_sz():
    c = ConfigConstraint("3d", 5, fixed_sz=0.5)
    seed = [c.seed(D_ONLY)]
    # Coulomb alone also conserves M_L, and this seed is alone in its M_L sector
    assert expand(D_ONLY, seed, coulomb_intra(D_ONLY, "3d", F), c).dim == 1
    cf = crystal_field_d(D_ONLY, "3d", _low_symmetry(), -3.0, 0.3, 0.1)
    sp = expand(D_ONLY, seed, coulomb_intra(D_ONLY, "3d", F) + cf, c)
    assert sp.dim == comb(5, 3) * comb(5, 2) == 100
    full = expand(D_ONLY, seed, coulomb_intra(D_ONLY, "3d", F) + cf + spin_orbit(D_ONLY, "3d"), c)
    assert full.dim == 252


def test_expand_matches_enumeration_with_hybridization():
    lay = ShellLayout([("3d", 2), ("L", None, 5)])
    geom = _low_symmetry(1)
    red = ligand_reduction(geom, HybridizationParams(2.0, 1.0))
    hs, hp = slater_koster_hopping(lay, red)
    cf = crystal_field_d(lay, "3d", geom, -3.0, 0.3, 0.1)
    wanderer = coulomb_intra(lay, "3d", F) + spin_orbit(lay, "3d") + cf + hs + hp
    for c in (ConfigConstraint("3d", 4, 2, "L"), ConfigConstraint("3d", 4, 2, "L", spinfixed=True)):
        grown = expand(lay, [c.seed(lay)], wanderer, c)
        ref = enumerate_configurations(lay, c)
        assert grown.basis == ref.basis
        # idempotent
        again = expand(lay, [Determinant.from_val(v, lay.width) for v in grown.basis], wanderer, c)
        assert again.basis == grown.basis


def test_expand_filters_and_errors():
    c = ConfigConstraint("3d", 5, spinfixed=True)
    sp = expand(D_ONLY, [c.seed(D_ONLY)], spin_orbit(D_ONLY, "3d"), c)
    assert {D_ONLY.twice_sz(v) for v in sp.basis} == {5}
    with pytest.raises(ValueError):
        expand(D_ONLY, [], OperatorSum(), c)
    with pytest.raises(ValueError):
        expand(D_ONLY, [Determinant.from_occupied([0], 10)], OperatorSum(), c)


def test_expand_multiword_layout():
    # four full f shells + d: 66 bits, exercises the arbitrary-width path
    lay = ShellLayout([("a", 3), ("b", 3), ("c", 3), ("e", 3), ("3d", 2)])
    c = ConfigConstraint("3d", 2, core_occupation={k: 14 for k in "abce"})
    cf = crystal_field_d(lay, "3d", _low_symmetry(), -3.0, 0.3, 0.1)
    grown = expand(lay, [c.seed(lay)], coulomb_intra(lay, "3d", F) + spin_orbit(lay, "3d") + cf, c)
    assert lay.width == 66 and grown.dim == comb(10, 2)
    assert grown.basis == enumerate_configurations(lay, c).basis


# --- basis files ----------------------------------------------------------------

def test_basis_round_trip(tmp_path):
    sp = enumerate_configurations(MN, ConfigConstraint("3d", 4, 1, "L"))
    path = tmp_path / "base.basis"
    write_basis(sp, path)
    assert path.read_text().startswith(f"#HXX-BASIS width=26 dim={sp.dim}")
    back = read_basis(path)
    assert back.same_basis(sp)
    write_basis(back, tmp_path / "again")
    assert (tmp_path / "again").read_bytes() == path.read_bytes()


@pytest.mark.parametrize(
    "body, match",
    [
        ("nonsense\n", ":1:"),
        ("#HXX-BASIS width=4 dim=1\n0101\n0110\n", "dim=1"),
        ("#HXX-BASIS width=4 dim=1\n01\n", ":2:"),
        ("#HXX-BASIS width=4 dim=2\n0101\n01a1\n", ":3:"),
        ("#HXX-BASIS width=4 dim=2\n0101\n0101\n", "duplicate"),
    ],
)
def test_basis_read_errors(tmp_path, body, match):
    p = tmp_path / "b"
    p.write_text(body)
    with pytest.raises(ValueError, match=match):
        read_basis(p)


# --- ligand reduction -----------------------------------------------------------

def test_octahedral_image_norms():
    vs, vp = 2.3, 1.1
    red = ligand_reduction(BondGeometry(np.array(OCTAHEDRON)), HybridizationParams(vs, vp))
    norms = np.sum(red.images**2, axis=0)
    assert norms[0] == pytest.approx(3 * vs**2)  # z^2
    assert norms[3] == pytest.approx(3 * vs**2)  # x^2 - y^2
    for i in (1, 2, 4):
        assert norms[i] == pytest.approx(4 * vp**2)
    assert red.nretained == 5


@pytest.mark.parametrize("seed", range(4))
def test_images_match_slater_koster_table(seed):
    rng = np.random.default_rng(seed)
    bonds = rng.normal(size=(int(rng.integers(1, 7)), 3))
    bonds /= np.linalg.norm(bonds, axis=1, keepdims=True)
    vs, vp = rng.uniform(0.5, 3), rng.uniform(0.2, 2)
    red = ligand_reduction(BondGeometry(bonds), HybridizationParams(vs, vp))
    assert np.allclose(red.images.T @ red.images, _sk_gram(bonds, vs, vp), atol=1e-12)
    # orthonormal retained orbitals spanning every image
    q = red.orbitals
    assert np.allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-12)
    assert np.linalg.norm(red.images - q @ (q.T @ red.images)) < 1e-10
    assert np.allclose(q @ (vs * red.hop_sigma + vp * red.hop_pi), red.images, atol=1e-12)


def test_bond_length_scaling():
    geom = BondGeometry(np.array([[0, 0, 2.0]]), dref=1.0)
    red = ligand_reduction(geom, HybridizationParams(1.0, 0.0, alphavsp=-3))
    assert np.sum(red.images[:, 0] ** 2) == pytest.approx(2.0**-6)


def test_single_bond_retains_three():
    red = ligand_reduction(BondGeometry(np.array([[0, 0, 1.0]])), HybridizationParams(2.0, 1.0))
    assert red.nretained == 3


def test_reduction_errors():
    with pytest.raises(ValueError):
        ligand_reduction(BondGeometry(np.array(OCTAHEDRON)), HybridizationParams(0.0, 0.0))
    with pytest.raises(ValueError):
        BondGeometry(np.array([[0.0, 0.0, 0.0]]))
