"""Hilbert-space generation and the reduced ligand orbital basis."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import angular
from .fock import Determinant, FockError, OperatorSum, bits_to_str, str_to_bits

WORD = 64


@dataclass(frozen=True)
class Shell:
    name: str
    l: Optional[int]  # None for the effective ligand shell
    offset: int
    norb: int  # spatial orbitals

    @property
    def width(self) -> int:
        return 2 * self.norb

    @property
    def positions(self) -> range:
        return range(self.offset, self.offset + self.width)

    def index(self, k: int, spin: int) -> int:
        """Spin-orbital index; ``k`` is ``m + l`` for atomic shells, spin 0 is up."""
        if not 0 <= k < self.norb or spin not in (0, 1):
            raise IndexError(f"orbital ({k}, {spin}) not in shell {self.name}")
        return self.offset + spin * self.norb + k

    def spin_positions(self, spin: int) -> list[int]:
        return [self.index(k, spin) for k in range(self.norb)]

    @property
    def mask(self) -> int:
        return ((1 << self.width) - 1) << self.offset

    def spin_mask(self, spin: int) -> int:
        return ((1 << self.norb) - 1) << (self.offset + spin * self.norb)


class ShellLayout:
    """Ordered, contiguous spin-orbital ranges, one per shell.

    >>> layout = ShellLayout([("2p", 1), ("3d", 2), ("L", None, 5)])
    >>> layout.width
    26
    """

    def __init__(self, spec: Sequence[tuple]):
        shells, offset = [], 0
        for item in spec:
            name, l = item[0], item[1]
            if l is None:
                norb = int(item[2])
            else:
                norb = 2 * l + 1
                if len(item) > 2 and item[2] != norb:
                    raise ValueError(f"shell {name}: l={l} needs {norb} orbitals")
            shells.append(Shell(name, l, offset, norb))
            offset += 2 * norb
        if len({s.name for s in shells}) != len(shells):
            raise ValueError("duplicate shell names")
        self.shells = tuple(shells)
        self.width = offset

    def __getitem__(self, name: str) -> Shell:
        for s in self.shells:
            if s.name == name:
                return s
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(s.name == name for s in self.shells)

    def __eq__(self, other) -> bool:
        return isinstance(other, ShellLayout) and self.spec() == other.spec()

    def spec(self) -> list[tuple]:
        return [(s.name, s.l, s.norb) for s in self.shells]

    def to_header(self) -> str:
        return ";".join(f"{s.name}:{'L' if s.l is None else s.l}:{s.norb}" for s in self.shells)

    @classmethod
    def from_header(cls, text: str) -> "ShellLayout":
        spec = []
        for chunk in text.split(";"):
            name, l, norb = chunk.split(":")
            spec.append((name, None if l == "L" else int(l), int(norb)))
        return cls(spec)

    def occupations(self, val: int) -> tuple[int, ...]:
        return tuple((val & s.mask).bit_count() for s in self.shells)

    def twice_sz(self, val: int) -> int:
        return sum(
            (val & s.spin_mask(0)).bit_count() - (val & s.spin_mask(1)).bit_count()
            for s in self.shells
        )


def _popcount(vals: np.ndarray, mask: int) -> np.ndarray:
    return np.bitwise_count(vals & np.uint64(mask)).astype(np.int64)


@dataclass
class ConfigConstraint:
    """Configurations ``valence^(n+i) ligand^(full-i)`` for ``i = 0..nhopped``.

    Shells other than the valence and ligand shells are fixed by
    ``core_occupation`` (default: full).
    """

    valence: str
    min_d_occupation: int
    nhopped: int = 0
    ligand: Optional[str] = None
    core_occupation: dict = field(default_factory=dict)
    spinfixed: bool = False
    fixed_sz: Optional[float] = None

    def __post_init__(self):
        if self.nhopped < 0:
            raise ValueError("nhopped must be >= 0")

    def configurations(self, layout: ShellLayout) -> list[tuple[int, ...]]:
        val_shell = layout[self.valence]
        lig_full = layout[self.ligand].width if self.ligand else 0
        for name, n in self.core_occupation.items():
            if not 0 <= n <= layout[name].width:
                raise ValueError(f"occupation {n} exceeds capacity of shell {name}")
        steps = self.nhopped if self.ligand else 0
        out = []
        for i in range(steps + 1):
            nd, nl = self.min_d_occupation + i, lig_full - i
            if not 0 <= nd <= val_shell.width or nl < 0:
                continue
            occ = []
            for s in layout.shells:
                if s.name == self.valence:
                    occ.append(nd)
                elif s.name == self.ligand:
                    occ.append(nl)
                else:
                    occ.append(self.core_occupation.get(s.name, s.width))
            out.append(tuple(occ))
        if not out:
            raise ValueError("constraint admits no configuration")
        return out

    def seed(self, layout: ShellLayout) -> Determinant:
        """Maximal-S_z determinant of the lowest configuration, or one at ``fixed_sz``."""
        occ = self.configurations(layout)[0]
        ups = [min(n, s.norb) for n, s in zip(occ, layout.shells)]
        if self.fixed_sz is not None:
            excess = sum(2 * u - n for u, n in zip(ups, occ)) - round(2 * self.fixed_sz)
            if excess < 0 or excess % 2:
                raise ValueError(f"S_z = {self.fixed_sz} unreachable in lowest configuration")
            flips = excess // 2
            for i, s in enumerate(layout.shells):
                while flips and ups[i] > 0 and occ[i] - ups[i] < s.norb:
                    ups[i] -= 1
                    flips -= 1
            if flips:
                raise ValueError(f"S_z = {self.fixed_sz} unreachable in lowest configuration")
        occupied = []
        for n, u, s in zip(occ, ups, layout.shells):
            occupied += s.spin_positions(0)[:u] + s.spin_positions(1)[: n - u]
        return Determinant.from_occupied(occupied, layout.width)

    def target_twice_sz(self, layout: ShellLayout) -> Optional[int]:
        if not self.spinfixed:
            return None
        if self.fixed_sz is not None:
            return round(2 * self.fixed_sz)
        return layout.twice_sz(self.seed(layout).val)

    def admits(self, layout: ShellLayout, vals) -> np.ndarray:
        """Vectorized membership test (``vals`` is a uint64 array or list of ints)."""
        allowed = set(self.configurations(layout))
        tsz = self.target_twice_sz(layout)
        if layout.width <= WORD:
            vals = np.asarray(vals, dtype=np.uint64)
            counts = np.stack([_popcount(vals, s.mask) for s in layout.shells], axis=1)
            ok = np.zeros(len(vals), dtype=bool)
            for occ in allowed:
                ok |= np.all(counts == np.asarray(occ), axis=1)
            if tsz is not None:
                twice = sum(
                    _popcount(vals, s.spin_mask(0)) - _popcount(vals, s.spin_mask(1))
                    for s in layout.shells
                )
                ok &= twice == tsz
            return ok
        return np.array(
            [
                layout.occupations(v) in allowed and (tsz is None or layout.twice_sz(v) == tsz)
                for v in vals
            ],
            dtype=bool,
        )


class HilbertSpace:
    """Ordered determinant basis with index lookup."""

    def __init__(self, layout: ShellLayout, basis: Sequence[int], name: str = ""):
        self.layout = layout
        self.name = name
        self.basis = [int(v) for v in basis]
        self.lookup = {v: i for i, v in enumerate(self.basis)}
        if len(self.lookup) != len(self.basis):
            raise ValueError("duplicate determinants in basis")
        if layout.width <= WORD:
            self.vals = np.array(self.basis, dtype=np.uint64)
            self._order = np.argsort(self.vals, kind="stable")
            self._sorted = self.vals[self._order]
        else:
            self.vals = None

    @property
    def width(self) -> int:
        return self.layout.width

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __len__(self) -> int:
        return self.dim

    def determinant(self, i: int) -> Determinant:
        return Determinant.from_val(self.basis[i], self.width)

    def index(self, d) -> int:
        val = d.val if isinstance(d, Determinant) else int(d)
        try:
            return self.lookup[val]
        except KeyError:
            raise FockError(f"determinant {bits_to_str(val, self.width)} not in space {self.name!r}") from None

    def find(self, vals: np.ndarray) -> np.ndarray:
        """Indices of uint64 ``vals``; -1 where absent (single-word layouts)."""
        pos = np.searchsorted(self._sorted, vals)
        pos = np.minimum(pos, max(self.dim - 1, 0))
        if self.dim == 0:
            return np.full(len(vals), -1)
        hit = self._sorted[pos] == vals
        return np.where(hit, self._order[pos], -1)

    def same_basis(self, other: "HilbertSpace") -> bool:
        return self.layout == other.layout and self.basis == other.basis


def _sort_canonical(layout: ShellLayout, constraint: ConfigConstraint, vals) -> list[int]:
    order = {occ: i for i, occ in enumerate(constraint.configurations(layout))}
    return sorted((int(v) for v in vals), key=lambda v: (order[layout.occupations(v)], v))


def apply_term_array(factors, vals: np.ndarray):
    """Apply a product of ladder operators to many single-word determinants.

    Returns ``(source_index, result_vals, signs)`` for the surviving inputs.
    """
    idx = np.arange(len(vals))
    cur = vals.copy()
    sign = np.ones(len(vals), dtype=np.int8)
    for op in reversed(factors):
        bit = np.uint64(1 << op.position)
        occ = (cur & bit) != 0
        keep = ~occ if op.create else occ
        if not keep.all():
            idx, cur, sign = idx[keep], cur[keep], sign[keep]
            if not len(idx):
                break
        below = np.bitwise_count(cur & np.uint64((1 << op.position) - 1)) & 1
        sign = np.where(below == 1, -sign, sign)
        cur = cur ^ bit
    return idx, cur, sign


def _wander(layout, wanderer: OperatorSum, frontier):
    """All determinants reachable from ``frontier`` by one wanderer term."""
    factors = [f for _, f in wanderer.terms if f]
    if layout.width <= WORD:
        arr = np.array(frontier, dtype=np.uint64)
        outs = [apply_term_array(f, arr)[1] for f in factors]
        return np.unique(np.concatenate(outs)) if outs else np.array([], dtype=np.uint64)
    from .fock import apply_factors

    found = set()
    for v in frontier:
        d = Determinant.from_val(v, layout.width)
        for f in factors:
            res = apply_factors(f, d)
            if res is not None:
                found.add(res[0].val)
    return sorted(found)


def expand(
    layout: ShellLayout,
    seed: Sequence[Determinant],
    wanderer: OperatorSum,
    constraint: ConfigConstraint,
    name: str = "",
) -> HilbertSpace:
    """Grow a basis from ``seed`` by repeated application of ``wanderer``.

    Breadth-first closure: each round applies every wanderer term to the
    frontier, keeps new determinants admitted by ``constraint`` and stops
    when a round finds nothing new.  The final basis is sorted canonically
    (configuration, then occupancy value).
    """
    if not seed:
        raise ValueError("empty seed basis")
    seed_vals = [d.val if isinstance(d, Determinant) else int(d) for d in seed]
    if not constraint.admits(layout, seed_vals).all():
        raise ValueError("seed determinant violates the configuration constraint")
    known = set(seed_vals)
    frontier = sorted(known)
    while frontier:
        cand = _wander(layout, wanderer, frontier)
        if len(cand):
            keep = constraint.admits(layout, cand)
            cand = [int(v) for v, k in zip(cand, keep) if k]
        frontier = [v for v in cand if v not in known]
        known.update(frontier)
    return HilbertSpace(layout, _sort_canonical(layout, constraint, known), name)


def enumerate_configurations(layout: ShellLayout, constraint: ConfigConstraint, name: str = "") -> HilbertSpace:
    """Every determinant of every admitted configuration, canonically ordered."""
    tsz = constraint.target_twice_sz(layout)
    basis = []
    for occ in constraint.configurations(layout):
        per_shell = []
        for n, s in zip(occ, layout.shells):
            opts = []
            for combo in itertools.combinations(s.positions, n):
                v = sum(1 << p for p in combo)
                twice = (v & s.spin_mask(0)).bit_count() - (v & s.spin_mask(1)).bit_count()
                opts.append((v, twice))
            per_shell.append(opts)
        block = []
        for parts in itertools.product(*per_shell):
            if tsz is not None and sum(t for _, t in parts) != tsz:
                continue
            block.append(sum(v for v, _ in parts))
        basis += sorted(block)
    return HilbertSpace(layout, basis, name)


def write_basis(space: HilbertSpace, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"#HXX-BASIS width={space.width} dim={space.dim} layout={space.layout.to_header()}\n")
        for v in space.basis:
            fh.write(bits_to_str(v, space.width) + "\n")


def read_basis(path, name: str = "") -> HilbertSpace:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "#HXX-BASIS":
            raise ValueError(f"{path}:1: missing #HXX-BASIS header")
        meta = dict(tok.split("=", 1) for tok in header[1:])
        width, dim = int(meta["width"]), int(meta["dim"])
        layout = ShellLayout.from_header(meta["layout"]) if "layout" in meta else ShellLayout([("X", None, width // 2)])
        if layout.width != width:
            raise ValueError(f"{path}:1: layout width {layout.width} != {width}")
        basis = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            if len(line.strip()) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} bits")
            try:
                basis.append(str_to_bits(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if len(basis) != dim:
        raise ValueError(f"{path}: header says dim={dim}, found {len(basis)} determinants")
    return HilbertSpace(layout, basis, name)


# --- ligand reduction -------------------------------------------------------


@dataclass
class BondGeometry:
    bonds: np.ndarray
    dref: float = 1.0
    facts_hop: Optional[Sequence[float]] = None

    def __post_init__(self):
        self.bonds = np.atleast_2d(np.asarray(self.bonds, dtype=float))
        if self.bonds.shape[1] != 3:
            raise ValueError("bonds must be 3-vectors")
        if np.any(np.linalg.norm(self.bonds, axis=1) == 0):
            raise ValueError("bond of zero length")
        if self.facts_hop is not None and len(self.facts_hop) != len(self.bonds):
            raise ValueError("facts_hop needs one factor per bond")

    @property
    def nbonds(self) -> int:
        return len(self.bonds)

    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.bonds, axis=1)

    def scales(self, alpha: float, with_facts: bool = True) -> np.ndarray:
        s = (self.lengths() / self.dref) ** alpha
        if with_facts and self.facts_hop is not None:
            s = s * np.asarray(self.facts_hop, dtype=float)
        return s

    def rotations(self) -> list[np.ndarray]:
        return [angular.bond_rotation(b) for b in self.bonds]


@dataclass
class HybridizationParams:
    Vs: float = 2.0
    Vp: float = 1.0
    alphavsp: float = -3.0
    factorhopexci: float = 1.0
    Dips: float = 0.0
    Dipp: float = 0.0
    alphadipo: float = -3.0


def bond_frame_hopping(geom: BondGeometry, l: int, alpha: float):
    """Unit sigma and pi hopping from real ``l`` orbitals to bond-frame ligand p.

    Returns ``(t_sigma, t_pi)`` of shape ``(3 * nbonds, 2l+1)``; ligand rows
    are ordered (p_z~, p_x~, p_y~) per bond and entry ``[k, mu]`` is the
    coefficient of ``d+_mu p_k``.
    """
    n = 2 * l + 1
    t_sigma = np.zeros((3 * geom.nbonds, n))
    t_pi = np.zeros((3 * geom.nbonds, n))
    for b, (rot, s) in enumerate(zip(geom.rotations(), geom.scales(alpha))):
        m = angular.real_rotation(l, rot)
        t_sigma[3 * b] = s * m[:, 0]
        t_pi[3 * b + 1] = s * m[:, 1]
        t_pi[3 * b + 2] = s * m[:, 2]
    return t_sigma, t_pi


@dataclass
class LigandReduction:
    orbitals: np.ndarray  # (3 * nbonds, r) orthonormal columns over bond-frame ligand p
    hop_sigma: np.ndarray  # (r, 5) unit sigma couplings in the retained basis
    hop_pi: np.ndarray  # (r, 5)
    images: np.ndarray  # (3 * nbonds, 5) full hopping images of the d orbitals
    Vs: float
    Vp: float

    @property
    def nretained(self) -> int:
        return self.orbitals.shape[1]


def ligand_reduction(geom: BondGeometry, hyb: HybridizationParams, drop_tol: float = 1e-10) -> LigandReduction:
    """Orthonormal ligand orbitals spanned by the d-orbital hopping images.

    The images are Gram-Schmidt orthonormalized in real-harmonic order
    (z^2, xz, yz, x^2-y^2, xy); images whose projected norm falls below
    ``drop_tol`` are dropped.  Spin is carried separately by the layout.
    """
    if geom.nbonds == 0:
        raise ValueError("ligand reduction needs at least one bond")
    t_sigma, t_pi = bond_frame_hopping(geom, 2, hyb.alphavsp)
    images = hyb.Vs * t_sigma + hyb.Vp * t_pi
    q = np.zeros((images.shape[0], 0))
    for col in images.T:
        w = col.copy()
        for _ in range(2):
            w -= q @ (q.T @ w)
        nrm = np.linalg.norm(w)
        if nrm < drop_tol:
            continue
        q = np.column_stack([q, w / nrm])
    if q.shape[1] == 0:
        raise ValueError("all hopping images vanish (Vs = Vp = 0); use an unhybridized layout")
    return LigandReduction(q, q.T @ t_sigma, q.T @ t_pi, images, hyb.Vs, hyb.Vp)
