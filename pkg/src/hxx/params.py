"""Named parameter sets for the 2p3d, rixs and df classes, with text round trip."""
from __future__ import annotations

import ast
import copy
import math
from typing import Any, Iterator

OCTAHEDRON = [[-1.0, 0, 0], [1.0, 0, 0], [0, -1.0, 0], [0, 1.0, 0], [0, 0, -1.0], [0, 0, 1.0]]
CLASSES = ("2p3d", "rixs", "df")


class ParamError(ValueError):
    """Bad parameter name, value or file."""


# kind tags: f real, c complex allowed, i int, s string, b bond list, h facts list or None
def _block(prefix: str, entries) -> list[tuple[str, str, Any]]:
    return [(f"{prefix}_{name}", "c" if name.startswith("Sop_") else "f", value) for name, value in entries]


_MN_BASE = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 12.4156828106),
    ("couche1_F4", 7.81967819912),
    ("couche0_1_F0", 5.5),
    ("couche0_1_F2", 6.86721502072),
    ("couche0_1_G1", 5.02109490016),
    ("couche0_1_G3", 2.85321756768),
    ("SO_0", 6.568603656),
    ("SO_1", 0.05238772),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4),
]
_MN_EXCI = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 13.1769757147),
    ("couche1_F4", 8.299507532),
    ("couche0_1_F0", 5.5),
    ("couche0_1_F2", 7.6574518),
    ("couche0_1_G1", 5.77390099368),
    ("couche0_1_G3", 3.28715525784),
    ("SO_0", 6.845918392),
    ("SO_1", 0.066403136),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4),
]

# 1s-3p RIXS on Mn: base and 1s-hole blocks carry the 1s-3d pair, the final
# block the 3p-3d pair.  Values are illustrative, not fitted.
_RIXS_BASE = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 12.4156828106),
    ("couche1_F4", 7.81967819912),
    ("couche0_1_F0", 5.5),
    ("couche0_1_G2", 0.05),
    ("SO_1", 0.05238772),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4),
]
_RIXS_EXCI = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 13.1769757147),
    ("couche1_F4", 8.299507532),
    ("couche0_1_F0", 5.5),
    ("couche0_1_G2", 0.06),
    ("SO_1", 0.066403136),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4),
]
_RIXS_FIN = [
    ("couche1_F0", 5.0),
    ("couche1_F2", 12.9),
    ("couche1_F4", 8.1),
    ("couche0_1_F0", 5.5),
    ("couche0_1_F2", 9.0),
    ("couche0_1_G1", 11.5),
    ("couche0_1_G3", 7.0),
    ("SO_0", 0.8),
    ("SO_1", 0.06),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
    ("counterDL", -4),
]

# Ho 3d -> 4f, illustrative
_HO_BASE = [
    ("couche1_F0", 0.0),
    ("couche1_F2", 12.0),
    ("couche1_F4", 7.5),
    ("couche1_F6", 5.4),
    ("couche0_1_F0", 0.0),
    ("couche0_1_F2", 7.0),
    ("couche0_1_F4", 3.3),
    ("couche0_1_G1", 5.3),
    ("couche0_1_G3", 3.1),
    ("couche0_1_G5", 2.2),
    ("SO_0", 15.2),
    ("SO_1", 0.27),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
]
_HO_EXCI = [
    ("couche1_F0", 0.0),
    ("couche1_F2", 12.7),
    ("couche1_F4", 7.9),
    ("couche1_F6", 5.7),
    ("couche0_1_F0", 0.0),
    ("couche0_1_F2", 7.4),
    ("couche0_1_F4", 3.5),
    ("couche0_1_G1", 5.6),
    ("couche0_1_G3", 3.3),
    ("couche0_1_G5", 2.3),
    ("SO_0", 15.5),
    ("SO_1", 0.29),
    ("Sop_Zero", 1e-05),
    ("Sop_Minus", 0.0),
    ("Sop_Plus", 0.0),
]

_CALC_HEAD = [
    ("case", "s", "./"),
    ("reduc_1", "f", 0.8),
    ("reduc_0_1", "f", 0.8),
    ("all1", "f", 0.1),
    ("El2l3", "f", 700),
    ("all2", "f", 0.1),
    ("shift", "f", 0),
    ("npunti", "i", 500),
    ("dxleft", "f", -0.1),
    ("dxright", "f", 0.1),
    ("temp", "f", 0.009),
    ("erange", "f", 0.1),
    ("tolefact", "f", 1e-06),
    ("shift_invert", "i", 0),
    ("nsearchedeigen", "i", 10),
    ("NstepsTridiag", "i", 250),
]
_HYB = [
    ("Vs", "f", 2.0),
    ("Vp", "f", 1.0),
    ("VC0", "f", 0.2),
    ("VC1", "f", 0.0),
    ("DREF", "f", 1.0),
    ("ALPHAVC", "f", -3.0),
    ("ALPHAVSP", "f", -3.0),
    ("BONDS", "b", OCTAHEDRON),
    ("factorhopexci", "f", 1.0),
    ("facts_hop", "h", None),
]
_DIPO = [("Dips", "f", 1.0), ("Dipp", "f", 0.5), ("ALPHADIPO", "f", -3.0)]
_DF_GEOM = [
    ("VC0", "f", 0.01),
    ("VC1", "f", 0.0),
    ("VC2", "f", 0.0),
    ("DREF", "f", 1.0),
    ("ALPHAVC", "f", -3.0),
    ("BONDS", "b", OCTAHEDRON),
]

TABLES = {
    "2p3d": [
        ("BASE HAMILTONIAN", _block("base", _MN_BASE)),
        ("EXCITED HAMILTONIAN", _block("exci", _MN_EXCI)),
        ("CALCULATION PARAMETERS", _CALC_HEAD + _HYB),
    ],
    "rixs": [
        ("BASE HAMILTONIAN", _block("base", _RIXS_BASE)),
        ("EXCITED HAMILTONIAN", _block("exci", _RIXS_EXCI)),
        ("FINAL HAMILTONIAN", _block("fin", _RIXS_FIN)),
        ("CALCULATION PARAMETERS", _CALC_HEAD + _HYB + _DIPO),
    ],
    "df": [
        ("BASE HAMILTONIAN", _block("base", _HO_BASE)),
        ("EXCITED HAMILTONIAN", _block("exci", _HO_EXCI)),
        ("CALCULATION PARAMETERS", _CALC_HEAD + _DF_GEOM),
    ],
}


def _coerce(name: str, kind: str, value):
    def num(v, allow_complex=False):
        if isinstance(v, bool):
            raise ParamError(f"{name}: expected a number, got {v!r}")
        if isinstance(v, complex):
            if not allow_complex:
                raise ParamError(f"{name}: complex value not allowed")
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ParamError(f"{name}: non-finite value")
            return v
        if not isinstance(v, (int, float)):
            raise ParamError(f"{name}: expected a number, got {v!r}")
        if not math.isfinite(v):
            raise ParamError(f"{name}: non-finite value")
        return v

    if kind == "s":
        if not isinstance(value, str):
            raise ParamError(f"{name}: expected a string")
        return value
    if kind == "i":
        v = num(value)
        if int(v) != v:
            raise ParamError(f"{name}: expected an integer, got {value!r}")
        return int(v)
    if kind in ("f", "c"):
        return num(value, allow_complex=kind == "c")
    if kind == "b":
        try:
            bonds = [[float(num(x)) for x in b] for b in value]
        except TypeError:
            raise ParamError(f"{name}: expected a list of 3-vectors") from None
        if any(len(b) != 3 for b in bonds):
            raise ParamError(f"{name}: every bond must have 3 components")
        return bonds
    if kind == "h":
        if value is None:
            return None
        try:
            return [float(num(x)) for x in value]
        except TypeError:
            raise ParamError(f"{name}: expected None or a list of numbers") from None
    raise AssertionError(kind)


class ParamSet:
    """Ordered parameter table of one calculation class."""

    def __init__(self, cls: str = "2p3d", **overrides):
        if cls not in TABLES:
            raise ParamError(f"unknown class {cls!r} (expected one of {', '.join(CLASSES)})")
        self.cls = cls
        self._kinds: dict[str, str] = {}
        self._values: dict[str, Any] = {}
        for _, entries in TABLES[cls]:
            for name, kind, default in entries:
                self._kinds[name] = kind
                self._values[name] = _coerce(name, kind, default)
        for k, v in overrides.items():
            self[k] = v

    def __getitem__(self, name: str):
        try:
            return self._values[name]
        except KeyError:
            raise ParamError(f"unknown parameter {name!r} for class {self.cls}") from None

    def __setitem__(self, name: str, value) -> None:
        if name not in self._kinds:
            raise ParamError(f"unknown parameter {name!r} for class {self.cls}")
        self._values[name] = _coerce(name, self._kinds[name], value)

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamSet) and self.cls == other.cls and self._values == other._values

    def get(self, name: str, default=None):
        return self._values.get(name, default)

    def items(self):
        return self._values.items()

    def copy(self) -> "ParamSet":
        p = ParamSet(self.cls)
        p._values = copy.deepcopy(self._values)
        return p

    def set_text(self, name: str, text: str) -> None:
        """Set from command-line text (strings for ``case`` need no quotes)."""
        if name not in self._kinds:
            raise ParamError(f"unknown parameter {name!r} for class {self.cls}")
        self[name] = _parse_value(self._kinds[name], text, name)

    def validate(self) -> None:
        v = self._values
        if v["npunti"] < 2:
            raise ParamError("npunti must be >= 2")
        if v["temp"] <= 0:
            raise ParamError("temp must be positive")
        if not 0 < v["tolefact"] < 1:
            raise ParamError("tolefact must lie in (0, 1)")
        if v["all1"] <= 0 or v["all2"] <= 0:
            raise ParamError("all1 and all2 must be positive")
        if v["erange"] < 0:
            raise ParamError("erange must be >= 0")
        if v["nsearchedeigen"] < 1 or v["NstepsTridiag"] < 1:
            raise ParamError("nsearchedeigen and NstepsTridiag must be >= 1")
        if not 0 < v["reduc_1"] <= 1 or not 0 < v["reduc_0_1"] <= 1:
            raise ParamError("reduction factors must lie in (0, 1]")
        if self.cls != "df" and not v["BONDS"]:
            raise ParamError("BONDS must be non-empty for hybridized classes")
        if v.get("facts_hop") is not None and len(v["facts_hop"]) != len(v["BONDS"]):
            raise ParamError("facts_hop needs one factor per bond")
        if v["DREF"] <= 0:
            raise ParamError("DREF must be positive")
        for pre in ("base", "exci", "fin"):
            if f"{pre}_Sop_Zero" not in v:
                continue
            z, m, p = (complex(v[f"{pre}_Sop_{k}"]) for k in ("Zero", "Minus", "Plus"))
            if abs(z.imag) > 1e-12 or abs(p - m.conjugate()) > 1e-12:
                raise ParamError(f"{pre}_Sop_* must give a Hermitian field: Sop_Zero real, Sop_Plus = conj(Sop_Minus)")

    def dumps(self) -> str:
        lines = ["# hxx parameter file", f"class = {self.cls}"]
        for title, entries in TABLES[self.cls]:
            lines.append("")
            lines.append(f"# ---- {title} ----")
            for name, kind, _ in entries:
                lines.append(f"{name} = {_format_value(kind, self._values[name])}")
        return "\n".join(lines) + "\n"

    def show(self) -> str:
        """Numbered listing in table order."""
        out, n = [], 0
        for title, entries in TABLES[self.cls]:
            out.append(f"---- {title} ---")
            for name, kind, _ in entries:
                n += 1
                out.append(f"{n:3d}) {name:<16}:     {_format_value(kind, self._values[name])}")
        return "\n".join(out)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, source: str = "<string>", default_class: str = "2p3d") -> "ParamSet":
        entries = []
        klass = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParamError(f"{source}:{lineno}: expected 'name = value'")
            name, value = (s.strip() for s in line.split("=", 1))
            if name == "class":
                klass = value.strip("'\"")
                continue
            entries.append((lineno, name, value))
        klass = klass or default_class
        if klass not in TABLES:
            raise ParamError(f"{source}: unknown class {klass!r}")
        ps = ParamSet(klass)
        seen = set()
        for lineno, name, value in entries:
            if name not in ps._kinds:
                raise ParamError(f"{source}:{lineno}: unknown parameter {name!r} for class {ps.cls}")
            if name in seen:
                raise ParamError(f"{source}:{lineno}: {name} given twice")
            seen.add(name)
            try:
                ps[name] = _parse_value(ps._kinds[name], value, name)
            except ParamError as exc:
                raise ParamError(f"{source}:{lineno}: {exc}") from None
        return ps

    @classmethod
    def load(cls, path, default_class: str = "2p3d") -> "ParamSet":
        with open(path) as fh:
            return cls.loads(fh.read(), str(path), default_class)

    def __repr__(self) -> str:
        return f"ParamSet({self.cls!r}, {len(self._values)} parameters)"


def _parse_value(kind: str, text: str, name: str):
    text = text.strip()
    if kind == "s":
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
            return text[1:-1]
        return text
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise ParamError(f"{name}: cannot parse value {text!r}") from None


def _format_value(kind: str, value) -> str:
    if kind == "s":
        return value
    return repr(value)


def load_params(path, default_class: str = "2p3d") -> ParamSet:
    return ParamSet.load(path, default_class)


def save_params(params: ParamSet, path) -> None:
    params.save(path)
