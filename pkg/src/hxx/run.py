"""Spectra, RIXS and counters from a case and a parameter set."""
from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.sparse as sps

from .case import GEOMETRY_KEYS, Case, CaseError
from .hamiltonian import cartesian_polarization
from .params import ParamSet
from .solvers import LanczosConfig
from .spectra import (
    BroadeningModel,
    GroundManifold,
    RIXSConfig,
    SpectrumResult,
    absorption,
    counters,
    ground_manifold,
    rixs,
)
from .sparse import merged

log = logging.getLogger(__name__)

RATIO_WARN = 0.10


def _same(a, b) -> bool:
    if isinstance(a, (list, tuple)) or isinstance(b, (list, tuple)):
        if a is None or b is None:
            return a is b
        return np.shape(a) == np.shape(b) and np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=0, atol=1e-12)
    if a is None or b is None:
        return a is b
    return abs(float(a) - float(b)) <= 1e-12 * max(1.0, abs(float(a)))


def _ratio_changed(vs0, vp0, vs, vp) -> bool:
    if vp0 == 0 or vp == 0:
        return (vp0 == 0) != (vp == 0)
    r0, r = vs0 / vp0, vs / vp
    return abs(r - r0) > RATIO_WARN * abs(r0) if r0 else r != 0


def check_params(case: Case, params: ParamSet) -> None:
    """Geometry parameters must match the ones the case was built with."""
    if params.cls != case.cls:
        raise CaseError(f"parameters are for class {params.cls}, case is {case.cls}")
    params.validate()
    for key in GEOMETRY_KEYS[case.cls]:
        if key in case.geometry and not _same(case.geometry[key], params[key]):
            raise CaseError(f"{key} differs from the value used at expand time; re-run 'hxx expand'")
    if case.hopping:
        vs0, vp0 = case.hopping["Vs"], case.hopping["Vp"]
        vs, vp = params["Vs"], params["Vp"]
        if (vs0 or vp0) and (vs or vp) and _ratio_changed(vs0, vp0, vs, vp):
            warnings.warn(
                f"Vs/Vp = {vs}/{vp} differs from the expand-time ratio {vs0}/{vp0}; "
                "the retained ligand orbitals may not span the new hopping images",
                stacklevel=2,
            )
        elif not (vs0 or vp0) and (vs or vp):
            warnings.warn("case was expanded with Vs = Vp = 0; hopping is ignored", stacklevel=2)


def coefficients(case: Case, params: ParamSet, space: str) -> dict:
    """Parameter value multiplying each stored component of ``space``."""
    sd = case.cdef.space(space)
    out = {}
    for name in case.components[space].components:
        if name.startswith("couche1_"):
            v = params[f"{sd.prefix}_{name}"]
            if int(name[len("couche1_F"):]) > 0:
                v = v * params["reduc_1"]
        elif name.startswith("couche0_1_"):
            v = params[f"{sd.prefix}_{name}"]
            if int(name[len("couche0_1_F"):]) > 0:
                v = v * params["reduc_0_1"]
        elif name in ("hop_sigma", "hop_pi"):
            v = params["Vs"] if name == "hop_sigma" else params["Vp"]
            if space != "base":
                v = v * params["factorhopexci"]
        elif name.startswith("VC"):
            v = params[name]
        else:
            v = params[f"{sd.prefix}_{name}"]
        out[name] = v
    return out


def hamiltonian(case: Case, params: ParamSet, space: str) -> sps.csr_matrix:
    return merged(case.components[space].components, coefficients(case, params, space))


def _combine(per: dict, pol) -> sps.csr_matrix:
    out = None
    for q, c in zip(sorted(per), pol):
        if c == 0:
            continue
        term = complex(c) * per[q].tocsr()
        out = term if out is None else out + term
    if out is None:
        out = sps.csr_matrix(next(iter(per.values())).shape, dtype=complex)
    return out


def _effective_dipole(case: Case, params: ParamSet):
    """Per-q operators ``Dips sigma_q + Dipp pi_q``; zero when no ligand orbitals were kept."""
    if "edip_sigma" not in case.transitions:
        quad = case.transitions["quad"][0]
        return {q: sps.csr_matrix(quad.shape, dtype=complex) for q in (-1, 0, 1)}
    sig, pi = case.transitions["edip_sigma"], case.transitions["edip_pi"]
    return {q: params["Dips"] * sig[q].tocsr() + params["Dipp"] * pi[q].tocsr() for q in (-1, 0, 1)}


def transition_channels(case: Case, params: ParamSet, pol=None):
    """Absorption operators and labels: three Mz channels, or one for ``pol``."""
    if case.cls == "rixs":
        if pol is None:
            per = _effective_dipole(case, params)
            return [per[q] for q in (-1, 0, 1)], ["Mz=-1", "Mz=0", "Mz=1"]
        if len(pol) == 5:
            return [_combine(case.transitions["quad"], pol)], ["quadrupole"]
        if len(pol) == 3:
            per = _effective_dipole(case, params)
            return [sum(complex(c) * per[q] for q, c in zip((-1, 0, 1), pol))], ["dipole"]
        raise ValueError("polarization needs 3 (dipole) or 5 (quadrupole) coefficients")
    per = case.transitions["dip"]
    if pol is None:
        return [per[q].tocsr() for q in (-1, 0, 1)], ["Mz=-1", "Mz=0", "Mz=1"]
    if len(pol) != 3:
        raise ValueError(f"class {case.cls} takes 3 dipole polarization coefficients")
    return [_combine(per, pol)], ["dipole"]


def lanczos_config(params: ParamSet) -> LanczosConfig:
    return LanczosConfig(nsearchedeigen=params["nsearchedeigen"])


def base_manifold(case: Case, params: ParamSet, h_base=None) -> GroundManifold:
    h = hamiltonian(case, params, "base") if h_base is None else h_base
    return ground_manifold(
        h,
        case.spaces["base"].dim,
        params["nsearchedeigen"],
        params["temp"],
        params["erange"],
        params["tolefact"],
        lanczos_config(params),
    )


def broadening_of(params: ParamSet) -> BroadeningModel:
    return BroadeningModel(params["all1"], params["all2"], params["El2l3"], params["shift"])


def get_spectrum(case: Case, params: ParamSet, pol=None, energies=None) -> SpectrumResult:
    check_params(case, params)
    ops, labels = transition_channels(case, params, pol)
    manifold = base_manifold(case, params)
    log.info("ground manifold: %d state(s), E0 = %.10g", len(manifold), manifold.e0)
    return absorption(
        hamiltonian(case, params, "exci"),
        ops,
        manifold,
        params["npunti"],
        params["dxleft"],
        params["dxright"],
        broadening_of(params),
        params["NstepsTridiag"],
        energies=energies,
        labels=labels,
    )


def polarization_out(pol) -> np.ndarray:
    """Emission polarization: 2 Cartesian (in-plane) or 3 spherical coefficients."""
    pol = list(pol)
    if len(pol) == 2:
        return cartesian_polarization([pol[0], pol[1], 0.0])
    if len(pol) == 3:
        return np.asarray(pol, dtype=complex)
    raise ValueError("polarisationOut needs 2 Cartesian or 3 spherical coefficients")


def get_rixs(case: Case, params: ParamSet, cfg: RIXSConfig, pol_in, pol_out) -> SpectrumResult:
    if case.cls != "rixs" or "final" not in case.spaces:
        raise CaseError("RIXS needs a case of class rixs")
    check_params(case, params)
    d_in = transition_channels(case, params, list(pol_in))[0][0]
    d_out = _combine(case.transitions["emit"], polarization_out(pol_out))
    h_base = hamiltonian(case, params, "base")
    # lowest state only, whatever temp and erange say
    gm = ground_manifold(h_base, case.spaces["base"].dim, params["nsearchedeigen"], params["temp"], 0.0, params["tolefact"], lanczos_config(params))
    return rixs(
        hamiltonian(case, params, "exci"),
        hamiltonian(case, params, "final"),
        d_in,
        d_out,
        gm.e0,
        gm.vectors[:, 0],
        cfg,
        params["NstepsTridiag"],
    )


def get_counters(case: Case, params: ParamSet) -> dict:
    check_params(case, params)
    manifold = base_manifold(case, params)
    ops = dict(case.counter_ops())
    out = counters(manifold, ops)
    if "occP" not in ops:
        out["occP"] = [0.0] * len(manifold)
    return out
