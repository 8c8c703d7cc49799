"""Case directories: Hilbert spaces plus unit-coefficient component matrices.

A case is built once per class, minimum valence occupation, hopping depth
and spin constraint; every parameter-dependent spectrum afterwards only
rescales and sums the stored components.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hamiltonian as ham
from .params import ParamSet
from .space import (
    BondGeometry,
    ConfigConstraint,
    HilbertSpace,
    HybridizationParams,
    ShellLayout,
    enumerate_configurations,
    ligand_reduction,
    read_basis,
    write_basis,
)
from .sparse import ComponentSet, SparseOp, project, read_component, write_component

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
LIGAND = "L"
INERT_LIGAND_ORBITALS = 5
# S_- and S_+ are stored as they are; only their weighted sum is Hermitian
LADDER_COMPONENTS = ("Sop_Minus", "Sop_Plus")


class CaseError(RuntimeError):
    """Missing, stale or incompatible case directory."""


@dataclass(frozen=True)
class SpaceDef:
    name: str
    prefix: str  # parameter block prefix
    core: str  # shell paired with the valence shell in the couche0_1 terms
    core_occupation: tuple
    extra: int  # valence electrons above nmin
    core_so: bool = True


@dataclass(frozen=True)
class TransitionDef:
    name: str
    src: str
    dst: str
    kind: str  # dipole | quadrupole | edip_sigma | edip_pi
    shell_from: str
    shell_to: str

    @property
    def rank(self) -> int:
        return 2 if self.kind == "quadrupole" else 1


@dataclass(frozen=True)
class ClassDef:
    name: str
    shells: tuple
    valence: str
    hybridized: bool
    spaces: tuple
    transitions: tuple

    def space(self, name: str) -> SpaceDef:
        for s in self.spaces:
            if s.name == name:
                return s
        raise KeyError(name)

    def transition(self, name: str) -> TransitionDef:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)


CLASS_DEFS = {
    "2p3d": ClassDef(
        "2p3d",
        (("2p", 1), ("3d", 2)),
        "3d",
        True,
        (
            SpaceDef("base", "base", "2p", (("2p", 6),), 0),
            SpaceDef("exci", "exci", "2p", (("2p", 5),), 1),
        ),
        (TransitionDef("dip", "base", "exci", "dipole", "2p", "3d"),),
    ),
    "rixs": ClassDef(
        "rixs",
        (("1s", 0), ("3p", 1), ("3d", 2)),
        "3d",
        True,
        (
            SpaceDef("base", "base", "1s", (("1s", 2), ("3p", 6)), 0, False),
            SpaceDef("exci", "exci", "1s", (("1s", 1), ("3p", 6)), 1, False),
            SpaceDef("final", "fin", "3p", (("1s", 2), ("3p", 5)), 1),
        ),
        (
            TransitionDef("quad", "base", "exci", "quadrupole", "1s", "3d"),
            TransitionDef("edip_sigma", "base", "exci", "edip_sigma", "1s", LIGAND),
            TransitionDef("edip_pi", "base", "exci", "edip_pi", "1s", LIGAND),
            TransitionDef("emit", "exci", "final", "dipole", "3p", "1s"),
        ),
    ),
    "df": ClassDef(
        "df",
        (("3d", 2), ("4f", 3)),
        "4f",
        False,
        (
            SpaceDef("base", "base", "3d", (("3d", 10),), 0),
            SpaceDef("exci", "exci", "3d", (("3d", 9),), 1),
        ),
        (TransitionDef("dip", "base", "exci", "dipole", "3d", "4f"),),
    ),
}

# geometry-type parameters baked into the stored components
GEOMETRY_KEYS = {
    "2p3d": ("BONDS", "DREF", "ALPHAVC", "ALPHAVSP", "facts_hop"),
    "rixs": ("BONDS", "DREF", "ALPHAVC", "ALPHAVSP", "facts_hop", "ALPHADIPO"),
    "df": ("BONDS", "DREF", "ALPHAVC"),
}


def geometry_of(params: ParamSet) -> BondGeometry:
    return BondGeometry(np.asarray(params["BONDS"], dtype=float), params["DREF"], params.get("facts_hop"))


def hybridization_of(params: ParamSet) -> HybridizationParams:
    return HybridizationParams(
        Vs=params["Vs"],
        Vp=params["Vp"],
        alphavsp=params["ALPHAVSP"],
        factorhopexci=params["factorhopexci"],
        Dips=params.get("Dips", 0.0),
        Dipp=params.get("Dipp", 0.0),
        alphadipo=params.get("ALPHADIPO", -3.0),
    )


@dataclass
class Case:
    cls: str
    nmin: int
    nhopped: int
    spinfixed: bool
    layout: ShellLayout
    spaces: dict
    components: dict  # space name -> ComponentSet
    transitions: dict  # transition name -> {q: SparseOp}
    geometry: dict = field(default_factory=dict)
    hopping: dict = field(default_factory=dict)  # Vs, Vp used for the ligand reduction
    path: str | None = None
    _counter_ops: dict | None = None

    @property
    def cdef(self) -> ClassDef:
        return CLASS_DEFS[self.cls]

    def dims(self) -> dict:
        return {k: s.dim for k, s in self.spaces.items()}

    def manifest(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "class": self.cls,
            "nmin": self.nmin,
            "nhopped": self.nhopped,
            "spinfixed": self.spinfixed,
            "layout": self.layout.to_header(),
            "spaces": {k: {"file": f"basis_{k}.txt", "dim": s.dim} for k, s in self.spaces.items()},
            "components": {k: sorted(cs.components) for k, cs in self.components.items()},
            "transitions": {k: sorted(v) for k, v in self.transitions.items()},
            "geometry": self.geometry,
            "hopping": self.hopping,
        }

    def counter_ops(self) -> dict:
        """Base-space operators for the ground-state counters (valence shell and ligands)."""
        if self._counter_ops is None:
            base = self.spaces["base"]
            v = self.cdef.valence
            s2, l2, sl = ham.square_ops(self.layout, v)
            sz, _, _ = ham.spin_ops(self.layout, v)
            lz, _, _ = ham.orbital_ops(self.layout, v)
            ops = {"S2": s2, "L2": l2, "SL2": sl, "Sz": sz, "Lz": lz}
            if LIGAND in self.layout:
                ops["occP"] = ham.number_op(self.layout, LIGAND)
            self._counter_ops = {
                k: project(op, base, truncate=self.spinfixed, hermitian=True) for k, op in ops.items()
            }
        return self._counter_ops


def _component_file(space: str, name: str) -> str:
    return f"{space}_{name}.txt"


def _transition_file(name: str, q: int) -> str:
    return f"T_{name}_q{q:+d}.txt"


def _space_operators(cdef: ClassDef, sd: SpaceDef, layout: ShellLayout, reduction, with_hopping: bool) -> dict:
    v = cdef.valence
    ops = {f"couche1_{k}": op for k, op in ham.coulomb_components(layout, v).items()}
    ops.update({f"couche0_1_{k}": op for k, op in ham.coulomb_components(layout, sd.core, v).items()})
    if sd.core_so:
        ops["SO_0"] = ham.spin_orbit(layout, sd.core)
    ops["SO_1"] = ham.spin_orbit(layout, v)
    ops.update(ham.exchange_components(layout, v))
    if cdef.hybridized:
        ops["counterDL"] = ham.counter_dl(layout, LIGAND)
        if with_hopping:
            ops["hop_sigma"], ops["hop_pi"] = ham.slater_koster_hopping(layout, reduction, v, LIGAND)
    return ops


def build_case(cls: str, nmin: int, nhopped: int = 0, spinfixed: bool = False, params: ParamSet | None = None) -> Case:
    """Build spaces and all component matrices in memory."""
    if cls not in CLASS_DEFS:
        raise CaseError(f"unknown class {cls!r}")
    cdef = CLASS_DEFS[cls]
    params = params or ParamSet(cls)
    if params.cls != cls:
        raise CaseError(f"parameters are for class {params.cls}, case is {cls}")
    params.validate()
    if nhopped < 0:
        raise CaseError("nhopped must be >= 0")
    geom = geometry_of(params)
    reduction = None
    hopping = {}
    if cdef.hybridized:
        hyb = hybridization_of(params)
        hopping = {"Vs": hyb.Vs, "Vp": hyb.Vp}
        if hyb.Vs == 0 and hyb.Vp == 0:
            log.warning("Vs = Vp = 0: ligand shell kept inert, no hopping components")
            nlig = INERT_LIGAND_ORBITALS
        else:
            reduction = ligand_reduction(geom, hyb)
            nlig = reduction.nretained
    elif nhopped:
        raise CaseError(f"class {cls} has no ligand shell; nhopped must be 0")
    spec = [(name, l) for name, l in cdef.shells]
    if cdef.hybridized:
        spec.append((LIGAND, None, nlig))
    layout = ShellLayout(spec)
    with_hopping = reduction is not None and nhopped > 0

    spaces = {}
    base_sz = None
    for sd in cdef.spaces:
        cons = ConfigConstraint(
            cdef.valence,
            nmin + sd.extra,
            nhopped,
            LIGAND if cdef.hybridized else None,
            dict(sd.core_occupation),
            spinfixed,
            None if sd.name == "base" else base_sz,
        )
        spaces[sd.name] = enumerate_configurations(layout, cons, sd.name)
        if spaces[sd.name].dim == 0:
            raise CaseError(f"space {sd.name} is empty")
        if sd.name == "base" and spinfixed:
            base_sz = cons.target_twice_sz(layout) / 2
        log.info("space %s: dim %d", sd.name, spaces[sd.name].dim)

    components = {}
    for sd in cdef.spaces:
        sp = spaces[sd.name]
        ops = _space_operators(cdef, sd, layout, reduction, with_hopping)
        ops.update(ham.crystal_field_components(layout, cdef.valence, geom, params["ALPHAVC"]))
        cs = ComponentSet(sd.name, sd.name)
        for name, op in ops.items():
            # hopping leaves the space at the last allowed configuration
            trunc = spinfixed or name.startswith("hop_")
            cs.add(name, project(op, sp, truncate=trunc, hermitian=name not in LADDER_COMPONENTS))
        components[sd.name] = cs

    transitions = {}
    for td in cdef.transitions:
        src, dst = spaces[td.src], spaces[td.dst]
        per = {}
        k = td.rank
        for q in range(-k, k + 1):
            pol = np.zeros(2 * k + 1)
            pol[q + k] = 1.0
            if td.kind in ("dipole", "quadrupole"):
                op = ham.multipole_op(layout, td.shell_from, td.shell_to, k, pol)
            else:
                if reduction is None:
                    break
                sig, pi = ham.effective_dipole_components(layout, geom, hybridization_of(params), reduction, pol, td.shell_from, LIGAND)
                op = sig if td.kind == "edip_sigma" else pi
            per[q] = project(op, src, dst, truncate=spinfixed)
        if per:
            transitions[td.name] = per

    snapshot = {k: params[k] for k in GEOMETRY_KEYS[cls]}
    return Case(cls, nmin, nhopped, bool(spinfixed), layout, spaces, components, transitions, snapshot, hopping)


def _identity(m: dict) -> dict:
    return {k: m[k] for k in ("format", "class", "nmin", "nhopped", "spinfixed", "layout", "geometry", "hopping")}


def write_case(case: Case, path, force: bool = False) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    mpath = path / "manifest.json"
    manifest = case.manifest()
    if mpath.exists() and not force:
        try:
            old = json.loads(mpath.read_text())
        except (OSError, ValueError):
            raise CaseError(f"{mpath} is unreadable; use --force to overwrite") from None
        if _identity(old) != _identity(json.loads(json.dumps(manifest))):
            raise CaseError(f"{path} holds an incompatible case; use --force to overwrite")
    for name, sp in case.spaces.items():
        write_basis(sp, path / f"basis_{name}.txt")
    for sname, cs in case.components.items():
        for name, m in cs.components.items():
            write_component(path / _component_file(sname, name), m)
    for tname, per in case.transitions.items():
        for q, m in per.items():
            write_component(path / _transition_file(tname, q), m)
    tmp = mpath.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=1) + "\n")
    os.replace(tmp, mpath)
    case.path = str(path)


def expand_case(cls: str, nmin: int, path, nhopped: int = 0, spinfixed: bool = False,
                params: ParamSet | None = None, force: bool = False) -> Case:
    case = build_case(cls, nmin, nhopped, spinfixed, params)
    write_case(case, path, force)
    return case


def load_case(path) -> Case:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise CaseError(f"{path} is not a case directory (no manifest.json); run 'hxx expand' first")
    m = json.loads(mpath.read_text())
    if m.get("format") != FORMAT_VERSION:
        raise CaseError(f"{mpath}: unsupported format {m.get('format')!r}")
    layout = ShellLayout.from_header(m["layout"])
    spaces = {}
    for name, info in m["spaces"].items():
        sp = read_basis(path / info["file"], name)
        if sp.dim != info["dim"] or sp.layout != layout:
            raise CaseError(f"{path / info['file']} does not match the manifest")
        spaces[name] = sp
    components = {}
    for sname, names in m["components"].items():
        cs = ComponentSet(sname, sname)
        for name in names:
            f = path / _component_file(sname, name)
            if not f.exists():
                raise CaseError(f"missing component file {f}")
            comp = read_component(f)
            if comp.shape != (spaces[sname].dim,) * 2:
                raise CaseError(f"{f} has shape {comp.shape}, space {sname} has dim {spaces[sname].dim}")
            cs.add(name, comp)
        components[sname] = cs
    transitions = {}
    cdef = CLASS_DEFS[m["class"]]
    for tname, qs in m["transitions"].items():
        td = cdef.transition(tname)
        per = {}
        for q in qs:
            f = path / _transition_file(tname, int(q))
            if not f.exists():
                raise CaseError(f"missing transition file {f}")
            comp = read_component(f)
            if comp.shape != (spaces[td.dst].dim, spaces[td.src].dim):
                raise CaseError(f"{f} has shape {comp.shape}, expected {(spaces[td.dst].dim, spaces[td.src].dim)}")
            per[int(q)] = comp
        transitions[tname] = dict(sorted(per.items()))
    return Case(
        m["class"], m["nmin"], m["nhopped"], m["spinfixed"], layout, spaces, components,
        transitions, m["geometry"], m.get("hopping", {}), str(path),
    )
