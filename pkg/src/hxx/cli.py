"""``hxx`` command line: expand, spectrum, rixs, counters, params."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .case import CaseError, expand_case, load_case
from .params import CLASSES, ParamError, ParamSet
from .spectra import COUNTER_NAMES, RIXSConfig, SpectrumResult

log = logging.getLogger("hxx")


def write_columns(result: SpectrumResult, path) -> None:
    """Energy column, then (real, imag) per channel."""
    cols = [result.energies]
    head = ["energy"]
    for label, ch in zip(result.labels, result.channels):
        cols += [ch.real, ch.imag]
        head += [f"re({label})", f"im({label})"]
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=" ".join(head))


def _complex_list(text: str) -> list:
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse coefficient list {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse number list {text!r}") from None


def _range(text: str):
    try:
        a, b, d = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:step") from None
    return a, b, d


def _load_params(args, cls=None) -> ParamSet:
    if args.params:
        ps = ParamSet.load(args.params, default_class=cls or "2p3d")
    else:
        ps = ParamSet(cls or "2p3d")
    if getattr(args, "case", None):
        ps["case"] = args.case
    return ps


def _case_and_params(args):
    path = args.case
    if path is None:
        if not args.params:
            raise CaseError("give --case or a parameter file with a 'case' entry")
        path = ParamSet.load(args.params)["case"]
    case = load_case(path)
    params = _load_params(args, case.cls)
    if params.cls != case.cls:
        raise CaseError(f"parameter file is for class {params.cls}, case {path} is {case.cls}")
    return case, params


def cmd_expand(args) -> int:
    params = _load_params(args, args.cls)
    if params.cls != args.cls:
        raise ParamError(f"parameter file is for class {params.cls}, not {args.cls}")
    case = expand_case(args.cls, args.nmin, args.case, args.nhopped, args.spinfixed, params, args.force)
    for name, dim in case.dims().items():
        print(f"{name:6s} dim {dim}")
    print(f"case written to {args.case}")
    return 0


def cmd_spectrum(args) -> int:
    from .run import get_spectrum

    case, params = _case_and_params(args)
    res = get_spectrum(case, params, args.pol)
    write_columns(res, args.out)
    print(f"{len(res.energies)} points, {len(res.channels)} channel(s) written to {args.out}")
    return 0


def cmd_rixs(args) -> int:
    from .run import get_rixs

    case, params = _case_and_params(args)
    e1, e2, d = args.eout
    g = tuple(args.gammaout)
    cfg = RIXSConfig(args.ein, e1, e2, d, args.gammain, g)
    res = get_rixs(case, params, cfg, args.polin, args.polout)
    write_columns(res, args.out)
    print(f"{len(res.energies)} points written to {args.out}")
    return 0


def cmd_counters(args) -> int:
    from .run import get_counters

    case, params = _case_and_params(args)
    table = get_counters(case, params)
    lines = ["# " + " ".join(f"{n:>18s}" for n in COUNTER_NAMES)]
    for row in zip(*(table[n] for n in COUNTER_NAMES)):
        lines.append("  " + " ".join(f"{v:18.10f}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def cmd_params(args) -> int:
    if args.action == "show":
        ps = ParamSet.load(args.file) if args.file else ParamSet(args.cls)
        print(ps.show())
        return 0
    if len(args.assignments) % 2:
        raise ParamError("params set takes NAME VALUE pairs")
    path = Path(args.file)
    ps = ParamSet.load(path) if path.exists() else ParamSet(args.cls)
    for name, value in zip(args.assignments[::2], args.assignments[1::2]):
        ps.set_text(name, value)
    ps.validate()
    ps.save(path)
    print(f"{path} updated")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hxx", description="Exact-diagonalization core-level spectroscopy.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("expand", help="build Hilbert spaces and component files")
    e.add_argument("--class", dest="cls", choices=CLASSES, default="2p3d")
    e.add_argument("--nmin", type=int, required=True, help="minimum valence occupation")
    e.add_argument("--case", required=True, help="case directory")
    e.add_argument("--nhopped", type=int, default=0)
    e.add_argument("--spinfixed", action="store_true")
    e.add_argument("--params", help="parameter file (geometry and hopping are baked in)")
    e.add_argument("--force", action="store_true", help="overwrite an incompatible case")
    e.set_defaults(func=cmd_expand)

    s = sub.add_parser("spectrum", help="absorption spectrum")
    s.add_argument("--params")
    s.add_argument("--case")
    s.add_argument("--pol", type=_complex_list, help="comma-separated polarization coefficients")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("rixs", help="RIXS spectrum from the lowest ground state")
    r.add_argument("--params")
    r.add_argument("--case")
    r.add_argument("--ein", type=float, required=True)
    r.add_argument("--eout", type=_range, required=True, help="start:stop:step")
    r.add_argument("--gammain", type=float, default=0.2)
    r.add_argument("--gammaout", type=_float_list, default=[0.5, 20.0, 1.0])
    r.add_argument("--polin", type=_complex_list, required=True)
    r.add_argument("--polout", type=_complex_list, required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rixs)

    c = sub.add_parser("counters", help="ground-state expectation values")
    c.add_argument("--params")
    c.add_argument("--case")
    c.add_argument("--out")
    c.set_defaults(func=cmd_counters)

    m = sub.add_parser("params", help="show or edit parameter files")
    msub = m.add_subparsers(dest="action", required=True)
    ms = msub.add_parser("show")
    ms.add_argument("file", nargs="?")
    ms.add_argument("--class", dest="cls", choices=CLASSES, default="2p3d")
    mset = msub.add_parser("set")
    mset.add_argument("file")
    mset.add_argument("assignments", nargs="+", metavar="NAME VALUE")
    mset.add_argument("--class", dest="cls", choices=CLASSES, default="2p3d")
    m.set_defaults(func=cmd_params)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CaseError, ParamError, ValueError, OSError) as exc:
        print(f"hxx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
