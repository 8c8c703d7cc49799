"""Triple-format sparse matrices between Hilbert spaces, and their files."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import LinearOperator

from .fock import PRUNE_TOL, Determinant, FockError, OperatorSum, apply_factors, bits_to_str
from .space import WORD, HilbertSpace, apply_term_array


class FormatError(ValueError):
    """Malformed component or basis file."""


class SparseOp:
    """Sparse matrix stored as sorted ``(j, i, c_ji)`` triples.

    ``j`` indexes the codomain (rows), ``i`` the domain (columns); triples
    are unique per ``(j, i)`` and sorted by ``(i, j)``.
    """

    def __init__(self, rows: int, cols: int, j=(), i=(), c=(), src: str = "", dst: str = ""):
        j = np.asarray(j, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        c = np.asarray(c, dtype=complex)
        if not (j.shape == i.shape == c.shape):
            raise ValueError("triple arrays differ in length")
        if len(j) and (j.min() < 0 or j.max() >= rows or i.min() < 0 or i.max() >= cols):
            raise ValueError("triple index out of range")
        m = sps.coo_matrix((c, (j, i)), shape=(rows, cols)).tocsc()
        m.sum_duplicates()
        m.eliminate_zeros()
        m = m.tocoo()
        keep = np.abs(m.data) > PRUNE_TOL
        jj, ii, cc = m.row[keep], m.col[keep], m.data[keep]
        order = np.lexsort((jj, ii))
        self.rows, self.cols = rows, cols
        self.j, self.i, self.c = jj[order].astype(np.int64), ii[order].astype(np.int64), cc[order]
        self.src, self.dst = src, dst
        self._csr = None

    @property
    def nnz(self) -> int:
        return len(self.c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def triples(self):
        return list(zip(self.j.tolist(), self.i.tolist(), self.c.tolist()))

    def tocsr(self) -> sps.csr_matrix:
        if self._csr is None:
            self._csr = sps.csr_matrix((self.c, (self.j, self.i)), shape=self.shape)
        return self._csr

    def toarray(self) -> np.ndarray:
        return self.tocsr().toarray()

    def __matmul__(self, x):
        return matvec(self, x)

    def conj_transpose(self) -> "SparseOp":
        return SparseOp(self.cols, self.rows, self.i, self.j, self.c.conj(), self.dst, self.src)

    def hermitize(self) -> "SparseOp":
        """Average with the conjugate transpose so stored pairs are exact conjugates."""
        h = (self.tocsr() + self.tocsr().conj().T) * 0.5
        h = h.tocoo()
        return SparseOp(self.rows, self.cols, h.row, h.col, h.data, self.src, self.dst)

    def is_real(self) -> bool:
        return not np.any(self.c.imag)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseOp)
            and self.shape == other.shape
            and np.array_equal(self.j, other.j)
            and np.array_equal(self.i, other.i)
            and np.array_equal(self.c, other.c)
        )

    def __repr__(self) -> str:
        return f"SparseOp({self.rows}x{self.cols}, nnz={self.nnz}, {self.src!r}->{self.dst!r})"


def project(
    op: OperatorSum,
    src: HilbertSpace,
    dst: HilbertSpace | None = None,
    truncate: bool = False,
    hermitian: bool = False,
) -> SparseOp:
    """Matrix of ``op`` from ``src`` to ``dst``; column ``i`` is the image of basis vector ``i``.

    Determinants leaving ``dst`` raise :class:`FockError` unless ``truncate``
    (then the operator is projected onto ``dst``).
    """
    dst = src if dst is None else dst
    if src.layout != dst.layout:
        raise ValueError("spaces are built over different shell layouts")
    rows, cols, vals = [], [], []
    if src.width <= WORD and src.dim:
        for coef, factors in op.terms:
            idx, out, sign = apply_term_array(factors, src.vals)
            if not len(idx):
                continue
            j = dst.find(out)
            miss = j < 0
            if miss.any():
                if not truncate:
                    bad = int(out[np.argmax(miss)])
                    raise FockError(f"determinant {bits_to_str(bad, src.width)} escapes space {dst.name!r}")
                idx, j, sign = idx[~miss], j[~miss], sign[~miss]
            rows.append(j)
            cols.append(idx)
            vals.append(coef * sign)
    else:
        terms = op.terms
        for i, v in enumerate(src.basis):
            d = Determinant.from_val(v, src.width)
            for coef, factors in terms:
                res = apply_factors(factors, d)
                if res is None:
                    continue
                out, sign = res
                j = dst.lookup.get(out.val)
                if j is None:
                    if truncate:
                        continue
                    raise FockError(f"determinant {out} escapes space {dst.name!r}")
                rows.append([j])
                cols.append([i])
                vals.append([coef * sign])
    cat = (lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt))
    m = SparseOp(dst.dim, src.dim, cat(rows, np.int64), cat(cols, np.int64), cat(vals, complex), src.name, dst.name)
    return m.hermitize() if hermitian else m


def matvec(a: SparseOp, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != a.cols:
        raise ValueError(f"vector of length {x.shape[0]} for matrix with {a.cols} columns")
    return a.tocsr() @ x


@dataclass
class ComponentSet:
    """Named unit-coefficient components acting between two spaces."""

    src: str
    dst: str
    components: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> SparseOp:
        return self.components[name]

    def __contains__(self, name: str) -> bool:
        return name in self.components

    def add(self, name: str, m: SparseOp) -> None:
        if self.components:
            first = next(iter(self.components.values()))
            if first.shape != m.shape:
                raise ValueError(f"component {name} has shape {m.shape}, expected {first.shape}")
        self.components[name] = m

    @property
    def shape(self):
        return next(iter(self.components.values())).shape


def assemble(components: ComponentSet | Mapping[str, SparseOp], coefficients: Mapping[str, complex]) -> LinearOperator:
    """Lazy ``sum_k coeff_k * component_k``."""
    comps = components.components if isinstance(components, ComponentSet) else dict(components)
    unknown = [k for k in coefficients if k not in comps]
    if unknown:
        raise KeyError(f"unknown component(s): {', '.join(unknown)}")
    if not comps:
        raise ValueError("no components to assemble")
    shape = next(iter(comps.values())).shape
    # sorted names: the same sum bit for bit whatever order the components were loaded in
    active = [(complex(coefficients[k]), comps[k].tocsr()) for k in sorted(coefficients) if coefficients[k] != 0]
    real = all(c.imag == 0 and not np.any(m.data.imag) for c, m in active)

    def mv(x):
        x = np.asarray(x).reshape(shape[1], -1)
        y = np.zeros((shape[0], x.shape[1]), dtype=complex)
        for c, m in active:
            y += c * (m @ x)
        return y

    def rmv(x):
        x = np.asarray(x).reshape(shape[0], -1)
        y = np.zeros((shape[1], x.shape[1]), dtype=complex)
        for c, m in active:
            y += np.conj(c) * (m.conj().T @ x)
        return y

    op = LinearOperator(shape, matvec=mv, rmatvec=rmv, matmat=mv, dtype=complex)
    op.is_real = real
    return op


def merged(components: Mapping[str, SparseOp], coefficients: Mapping[str, complex]) -> sps.csr_matrix:
    """Explicitly merged sum, used where a single matrix is preferable."""
    out = None
    for k in sorted(coefficients):
        c = coefficients[k]
        if k not in components:
            raise KeyError(f"unknown component: {k}")
        if c == 0:
            continue
        term = complex(c) * components[k].tocsr()
        out = term if out is None else out + term
    if out is None:
        out = sps.csr_matrix(next(iter(components.values())).shape, dtype=complex)
    return out.tocsr()


def write_component(path, m: SparseOp) -> None:
    with open(path, "w") as fh:
        fh.write(f"#HXX-SPARSE from={m.src or '-'} to={m.dst or '-'} rows={m.rows} cols={m.cols} nnz={m.nnz}\n")
        for j, i, c in zip(m.j.tolist(), m.i.tolist(), m.c.tolist()):
            fh.write(f"{j} {i} {c.real:.17g} {c.imag:.17g}\n")


def _read_header(fh, path):
    header = fh.readline().split()
    if not header or header[0] != "#HXX-SPARSE":
        raise FormatError(f"{path}:1: missing #HXX-SPARSE header")
    try:
        meta = dict(tok.split("=", 1) for tok in header[1:])
        rows, cols, nnz = int(meta["rows"]), int(meta["cols"]), int(meta["nnz"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}:1: bad header ({exc})") from None
    return meta, rows, cols, nnz


def _read_body_slow(fh, path, rows, cols, nnz):
    j = np.empty(nnz, dtype=np.int64)
    i = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=complex)
    n = 0
    for lineno, line in enumerate(fh, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4 or n >= nnz:
            raise FormatError(f"{path}:{lineno}: expected 'j i re im' within nnz={nnz}")
        try:
            jj, ii = int(parts[0]), int(parts[1])
            cc = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse {line.strip()!r}") from None
        if not (0 <= jj < rows and 0 <= ii < cols):
            raise FormatError(f"{path}:{lineno}: index ({jj}, {ii}) out of range {rows}x{cols}")
        j[n], i[n], c[n] = jj, ii, cc
        n += 1
    if n != nnz:
        raise FormatError(f"{path}: header says nnz={nnz}, found {n}")
    return j, i, c


def read_component(path) -> SparseOp:
    with open(path) as fh:
        meta, rows, cols, nnz = _read_header(fh, path)
        body_start = fh.tell()
        data = None
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)  # empty body is legal when nnz == 0
                data = np.loadtxt(fh, dtype=float, ndmin=2)
        except ValueError:
            pass
        ok = (
            data is not None
            and (nnz == 0 and data.size == 0 or data.shape == (nnz, 4))
        )
        if ok and nnz:
            j = data[:, 0].astype(np.int64)
            i = data[:, 1].astype(np.int64)
            ok = (
                np.array_equal(j, data[:, 0]) and np.array_equal(i, data[:, 1])
                and j.min() >= 0 and j.max() < rows and i.min() >= 0 and i.max() < cols
            )
        if ok:
            if nnz:
                c = data[:, 2] + 1j * data[:, 3]
            else:
                j = i = np.zeros(0, np.int64)
                c = np.zeros(0, complex)
        else:
            # rescan line by line to report where the file is wrong
            fh.seek(body_start)
            j, i, c = _read_body_slow(fh, path, rows, cols, nnz)
    src = meta.get("from", "-")
    dst = meta.get("to", "-")
    return SparseOp(rows, cols, j, i, c, "" if src == "-" else src, "" if dst == "-" else dst)
