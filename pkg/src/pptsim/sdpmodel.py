"""SDP intermediate representation and compiler.

Problems are built from Hermitian matrix variables and affine matrix
expressions, then compiled to a block LMI form

    maximize  b . y   s.t.   G0_b + sum_k y_k Gk_b  >= 0  per block,
                             E y = e,

where y collects real parameters of all variables. Variables may carry a
swap symmetry tag; the compiler then parameterizes only the symmetric or
antisymmetric part, which is what shrinks the twirled problems. The
compiled form feeds the native solver, the real embedding, the SDPA
exporter and the external-solver adapters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .tensor import LabeledOperator

_CHUNK = 128


# ---------------------------------------------------------------------------
# framing steps


@dataclass(frozen=True)
class Transpose:
    """Partial transpose on the listed subsystems."""

    subs: tuple[int, ...]

    def out_dims(self, dims):
        return dims

    def apply(self, batch, dims):
        n = len(dims)
        t = batch.reshape((-1,) + dims + dims)
        axes = list(range(1 + 2 * n))
        for i in self.subs:
            axes[1 + i], axes[1 + n + i] = axes[1 + n + i], axes[1 + i]
        side = batch.shape[1]
        return t.transpose(axes).reshape(-1, side, side)


@dataclass(frozen=True)
class Trace:
    """Partial trace dropping the listed subsystems."""

    drop: tuple[int, ...]

    def out_dims(self, dims):
        return tuple(d for i, d in enumerate(dims) if i not in set(self.drop))

    def apply(self, batch, dims):
        n = len(dims)
        drop = set(self.drop)
        keep = [i for i in range(n) if i not in drop]
        t = batch.reshape((-1,) + dims + dims)
        row = [1 + i for i in range(n)]
        col = [1 + i if i in drop else 1 + n + i for i in range(n)]
        out_labels = [0] + [1 + i for i in keep] + [1 + n + i for i in keep]
        out = np.einsum(t, [0] + row + col, out_labels)
        side = int(np.prod([dims[i] for i in keep])) if keep else 1
        return out.reshape(-1, side, side)


@dataclass(frozen=True)
class Reorder:
    """Subsystem permutation: output factor j is input factor perm[j]."""

    perm: tuple[int, ...]

    def out_dims(self, dims):
        return tuple(dims[i] for i in self.perm)

    def apply(self, batch, dims):
        n = len(dims)
        p = list(self.perm)
        t = batch.reshape((-1,) + dims + dims)
        axes = [0] + [1 + i for i in p] + [1 + n + i for i in p]
        side = batch.shape[1]
        return t.transpose(axes).reshape(-1, side, side)


@dataclass(frozen=True)
class TensorLeft:
    """Kronecker a constant on the left: X -> C (x) X."""

    op: np.ndarray
    dims: tuple[int, ...]

    def out_dims(self, dims):
        return self.dims + dims

    def apply(self, batch, dims):
        out = np.einsum("pq,bij->bpiqj", self.op, batch)
        side = batch.shape[1] * self.op.shape[0]
        return out.reshape(-1, side, side)


@dataclass(frozen=True)
class TensorRight:
    """Kronecker a constant on the right: X -> X (x) C."""

    op: np.ndarray
    dims: tuple[int, ...]

    def out_dims(self, dims):
        return dims + self.dims

    def apply(self, batch, dims):
        out = np.einsum("bij,pq->bipjq", batch, self.op)
        side = batch.shape[1] * self.op.shape[0]
        return out.reshape(-1, side, side)


@dataclass(frozen=True)
class Contract:
    """X -> Tr_subs[(W on subs (x) I) X]; W is a matrix over the subs space."""

    op: np.ndarray
    subs: tuple[int, ...]

    def out_dims(self, dims):
        return tuple(d for i, d in enumerate(dims) if i not in set(self.subs))

    def apply(self, batch, dims):
        n = len(dims)
        subs = list(self.subs)
        keep = [i for i in range(n) if i not in set(subs)]
        sdims = tuple(dims[i] for i in subs)
        w = self.op.reshape(sdims + sdims)
        t = batch.reshape((-1,) + dims + dims)
        # out[i, j] = sum_{s, u} W[s, u] X[(u, i), (s, j)]
        w_labels = [1 + n + n + k for k in range(len(subs))] + [1 + i for i in subs]
        row = [1 + i for i in range(n)]
        col = [1 + n + n + subs.index(i) if i in set(subs) else 1 + n + i for i in range(n)]
        out_labels = [0] + [1 + i for i in keep] + [1 + n + i for i in keep]
        out = np.einsum(w, w_labels, t, [0] + row + col, out_labels)
        side = int(np.prod([dims[i] for i in keep])) if keep else 1
        return out.reshape(-1, side, side)


@dataclass(frozen=True)
class Sandwich:
    """X -> L X L^dag; collapses subsystem structure to a single factor."""

    left: np.ndarray

    def out_dims(self, dims):
        return (self.left.shape[0],)

    def apply(self, batch, dims):
        return np.matmul(np.matmul(self.left, batch), self.left.conj().T)


@dataclass(frozen=True)
class Slice:
    """Take the (i, j) block with respect to one subsystem index."""

    sub: int
    i: int
    j: int

    def out_dims(self, dims):
        return tuple(d for k, d in enumerate(dims) if k != self.sub)

    def apply(self, batch, dims):
        n = len(dims)
        t = batch.reshape((-1,) + dims + dims)
        t = np.take(t, self.i, axis=1 + self.sub)
        t = np.take(t, self.j, axis=1 + self.sub + (n - 1))
        side = int(np.prod(self.out_dims(dims))) if n > 1 else 1
        return t.reshape(-1, side, side)


def quadrant(i: int, j: int, n: int = 2) -> TensorLeft:
    """Embed into block (i, j) of an n x n block matrix."""
    e = np.zeros((n, n), dtype=np.complex128)
    e[i, j] = 1.0
    return TensorLeft(e, (n,))


# ---------------------------------------------------------------------------
# variables, expressions, problems


@dataclass(frozen=True)
class SdpVariable:
    """Hermitian matrix variable, optionally constrained to the +1 or -1
    eigenspace of a subsystem-swap conjugation."""

    name: str
    dims: tuple[int, ...]
    swap: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    swap_sign: int = 1

    @property
    def side(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


@dataclass(frozen=True)
class Term:
    coeff: complex
    var: str
    steps: tuple = ()


@dataclass(frozen=True)
class MatrixExpr:
    """constant + sum of framed variable terms; all terms share one shape."""

    dims: tuple[int, ...]
    terms: tuple[Term, ...]
    constant: np.ndarray | None = None
    hermitian: bool = True

    @property
    def side(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


def term(coeff, var: str, *steps) -> Term:
    return Term(complex(coeff), var, tuple(steps))


class SdpProblem:
    """Container for variables, PSD and equality constraints, objective."""

    def __init__(self) -> None:
        self.variables: dict[str, SdpVariable] = {}
        self.psd_constraints: list[tuple[str, MatrixExpr]] = []
        self.eq_constraints: list[tuple[str, MatrixExpr]] = []
        self.objective: list[tuple[float, str, np.ndarray | None]] = []
        self.obj_offset: float = 0.0
        self.obj_sign: float = 1.0

    def add_variable(
        self,
        name: str,
        dims: Iterable[int],
        swap: tuple[tuple[int, ...], tuple[int, ...]] | None = None,
        swap_sign: int = 1,
    ) -> SdpVariable:
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        v = SdpVariable(name, tuple(int(d) for d in dims), swap, swap_sign)
        if v.side < 1:
            raise ValueError(f"variable {name!r} has empty shape")
        self.variables[name] = v
        return v

    def _check_expr(self, e: MatrixExpr) -> None:
        for t in e.terms:
            if t.var not in self.variables:
                raise ValueError(f"expression references undeclared variable {t.var!r}")
            dims = self.variables[t.var].dims
            for s in t.steps:
                dims = s.out_dims(dims)
            if tuple(dims) != tuple(e.dims):
                raise ValueError(
                    f"term on {t.var!r} produces dims {dims}, expression has {e.dims}"
                )
        if e.constant is not None and e.constant.shape != (e.side, e.side):
            raise ValueError("constant shape does not match expression dims")

    def add_psd(self, expr: MatrixExpr, name: str = "") -> None:
        self._check_expr(expr)
        self.psd_constraints.append((name or f"psd{len(self.psd_constraints)}", expr))

    def add_eq(self, expr: MatrixExpr, name: str = "") -> None:
        if not expr.hermitian:
            raise ValueError("equality rows must be Hermitian expressions")
        self._check_expr(expr)
        self.eq_constraints.append((name or f"eq{len(self.eq_constraints)}", expr))

    def set_objective(
        self,
        terms: Sequence[tuple[float, str, np.ndarray | None]],
        offset: float = 0.0,
        sign: float = 1.0,
    ) -> None:
        """Objective functional sum_v coeff * Re Tr[W X_v], reported with
        the given offset added. sign=+1 maximizes it, sign=-1 minimizes;
        either way the reported value is the functional itself.
        """
        for _, var, w in terms:
            if var not in self.variables:
                raise ValueError(f"objective references undeclared variable {var!r}")
            side = self.variables[var].side
            if w is not None and w.shape != (side, side):
                raise ValueError(f"objective weight for {var!r} has wrong shape")
        self.objective = list(terms)
        self.obj_offset = float(offset)
        self.obj_sign = float(sign)


# ---------------------------------------------------------------------------
# parameterization of variables


def _perm_flat_index(dims: tuple[int, ...], groups) -> np.ndarray:
    """Flat-index image of the subsystem permutation swapping two groups."""
    n = len(dims)
    a, b = groups
    perm = list(range(n))
    for i, j in zip(a, b):
        perm[i], perm[j] = perm[j], perm[i]
    digits = np.indices(dims).reshape(n, -1)
    strides = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]
    return sum(digits[perm[j]] * strides[j] for j in range(n))


def _swap_isometries(var: SdpVariable) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the +1 / -1 eigenspaces of the swap."""
    img = _perm_flat_index(var.dims, var.swap)
    side = var.side
    fixed = np.nonzero(img == np.arange(side))[0]
    first = np.nonzero(img > np.arange(side))[0]
    k_s = len(fixed) + len(first)
    k_a = len(first)
    us = np.zeros((side, k_s))
    ua = np.zeros((side, k_a))
    col = 0
    for i in fixed:
        us[i, col] = 1.0
        col += 1
    r = 1.0 / np.sqrt(2.0)
    for t, i in enumerate(first):
        us[i, col + t] = r
        us[img[i], col + t] = r
        ua[i, t] = r
        ua[img[i], t] = -r
    return us, ua


def _herm_table(side: int) -> np.ndarray:
    """Rows (i, j, kind): kind 0 diagonal, 1 real part, 2 imaginary part."""
    rows = []
    for i in range(side):
        rows.append((i, i, 0))
        for j in range(i + 1, side):
            rows.append((i, j, 1))
            rows.append((i, j, 2))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _herm_chunk(table: np.ndarray, side: int) -> np.ndarray:
    out = np.zeros((len(table), side, side), dtype=np.complex128)
    for t, (i, j, kind) in enumerate(table):
        if kind == 0:
            out[t, i, i] = 1.0
        elif kind == 1:
            out[t, i, j] = 1.0
            out[t, j, i] = 1.0
        else:
            out[t, i, j] = 1j
            out[t, j, i] = -1j
    return out


def _herm_fill(table: np.ndarray, y: np.ndarray, side: int) -> np.ndarray:
    out = np.zeros((side, side), dtype=np.complex128)
    for (i, j, kind), v in zip(table, y):
        if kind == 0:
            out[i, i] += v
        elif kind == 1:
            out[i, j] += v
            out[j, i] += v
        else:
            out[i, j] += 1j * v
            out[j, i] += -1j * v
    return out


class _VarParams:
    """Parameter layout and basis-matrix generator for one variable."""

    def __init__(self, var: SdpVariable, offset: int):
        self.var = var
        self.offset = offset
        side = var.side
        if var.swap is None:
            self.kind = "plain"
            self.table = _herm_table(side)
            self.count = len(self.table)
        else:
            self.us, self.ua = _swap_isometries(var)
            k_s, k_a = self.us.shape[1], self.ua.shape[1]
            if var.swap_sign > 0:
                self.kind = "sym"
                self.table_s = _herm_table(k_s)
                self.table_a = _herm_table(k_a)
                self.count = len(self.table_s) + len(self.table_a)
            else:
                self.kind = "asym"
                rows = [
                    (i, j, kind)
                    for i in range(k_s)
                    for j in range(k_a)
                    for kind in (1, 2)
                ]
                self.table = np.array(rows, dtype=np.int64).reshape(-1, 3)
                self.count = len(self.table)

    def chunks(self):
        """Yield (global param ids, dense Hermitian basis stack)."""
        side = self.var.side
        if self.kind == "plain":
            for lo in range(0, self.count, _CHUNK):
                tab = self.table[lo : lo + _CHUNK]
                ids = np.arange(self.offset + lo, self.offset + lo + len(tab))
                yield ids, _herm_chunk(tab, side)
        elif self.kind == "sym":
            n_s = len(self.table_s)
            for lo in range(0, n_s, _CHUNK):
                tab = self.table_s[lo : lo + _CHUNK]
                ids = np.arange(self.offset + lo, self.offset + lo + len(tab))
                sec = _herm_chunk(tab, self.us.shape[1])
                yield ids, np.matmul(self.us, np.matmul(sec, self.us.T))
            for lo in range(0, len(self.table_a), _CHUNK):
                tab = self.table_a[lo : lo + _CHUNK]
                base = self.offset + n_s + lo
                ids = np.arange(base, base + len(tab))
                sec = _herm_chunk(tab, self.ua.shape[1])
                yield ids, np.matmul(self.ua, np.matmul(sec, self.ua.T))
        else:
            for lo in range(0, self.count, _CHUNK):
                tab = self.table[lo : lo + _CHUNK]
                ids = np.arange(self.offset + lo, self.offset + lo + len(tab))
                out = np.zeros((len(tab), side, side), dtype=np.complex128)
                for t, (i, j, kind) in enumerate(tab):
                    c = 1.0 if kind == 1 else 1j
                    m = c * np.outer(self.us[:, i], self.ua[:, j])
                    out[t] = m + m.conj().T
                yield ids, out

    def reconstruct(self, y: np.ndarray) -> np.ndarray:
        mine = y[self.offset : self.offset + self.count]
        side = self.var.side
        if self.kind == "plain":
            return _herm_fill(self.table, mine, side)
        if self.kind == "sym":
            n_s = len(self.table_s)
            ms = _herm_fill(self.table_s, mine[:n_s], self.us.shape[1])
            ma = _herm_fill(self.table_a, mine[n_s:], self.ua.shape[1])
            return self.us @ ms @ self.us.T + self.ua @ ma @ self.ua.T
        k_s, k_a = self.us.shape[1], self.ua.shape[1]
        c = np.zeros((k_s, k_a), dtype=np.complex128)
        for (i, j, kind), v in zip(self.table, mine):
            c[i, j] += v if kind == 1 else 1j * v
        m = self.us @ c @ self.ua.T
        return m + m.conj().T


# ---------------------------------------------------------------------------
# compiled form


@dataclass
class CompiledBlock:
    name: str
    side: int
    g0: np.ndarray
    params: np.ndarray  # global parameter ids appearing in this block
    indptr: np.ndarray  # entry ranges per parameter
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def is_real(self) -> bool:
        return bool(
            np.abs(self.g0.imag).max(initial=0.0) == 0.0
            and np.abs(self.vals.imag).max(initial=0.0) == 0.0
        )

    def matrix(self, y: np.ndarray) -> np.ndarray:
        """Dense G0 + sum_k y_k Gk."""
        out = self.g0.copy()
        flat = out.reshape(-1)
        pe = np.repeat(self.params, np.diff(self.indptr))
        np.add.at(flat, self.rows * self.side + self.cols, y[pe] * self.vals)
        return out

    def gather(self, t: np.ndarray, out: np.ndarray) -> None:
        """out[k] += Re <Gk, T> for each parameter in the block."""
        contrib = (np.conj(self.vals) * t[self.rows, self.cols]).real
        sums = np.add.reduceat(contrib, self.indptr[:-1]) if len(self.vals) else None
        if sums is not None:
            empty = np.diff(self.indptr) == 0
            if empty.any():
                sums = np.where(empty, 0.0, sums)
            np.add.at(out, self.params, sums)


@dataclass
class CompiledProblem:
    m: int
    b: np.ndarray
    obj_offset: float
    obj_sign: float
    blocks: list[CompiledBlock]
    eq_mat: np.ndarray | None
    eq_rhs: np.ndarray | None
    var_params: dict[str, _VarParams] = field(default_factory=dict)

    @property
    def n_eq(self) -> int:
        return 0 if self.eq_mat is None else self.eq_mat.shape[0]

    @property
    def is_real(self) -> bool:
        return all(b.is_real for b in self.blocks)

    def reconstruct(self, y: np.ndarray) -> dict[str, np.ndarray]:
        return {name: vp.reconstruct(y) for name, vp in self.var_params.items()}

    def objective_value(self, y: np.ndarray) -> float:
        return self.obj_sign * float(self.b @ y) + self.obj_offset


def _sparsify_into(block_lists, ids, dense):
    """Append nonzero entries of a dense basis stack to per-block COO lists."""
    params, rows, cols, vals = block_lists
    nz = np.nonzero(dense)
    if len(nz[0]) == 0:
        return
    params.append(ids[nz[0]])
    rows.append(nz[1])
    cols.append(nz[2])
    vals.append(dense[nz])


def _compile_expr(expr: MatrixExpr, var_params: dict[str, _VarParams]):
    """Return (G0 dense, params, indptr, rows, cols, vals) for one expression."""
    side = expr.side
    g0 = np.zeros((side, side), dtype=np.complex128)
    if expr.constant is not None:
        g0 += expr.constant
    by_var: dict[str, list[Term]] = {}
    for t in expr.terms:
        by_var.setdefault(t.var, []).append(t)
    params_l, rows_l, cols_l, vals_l = [], [], [], []
    for name, terms in by_var.items():
        vp = var_params[name]
        dims_v = vp.var.dims
        for ids, basis in vp.chunks():
            acc = np.zeros((len(ids), side, side), dtype=np.complex128)
            for t in terms:
                cur = basis
                dims = dims_v
                for s in t.steps:
                    cur = s.apply(cur, dims)
                    dims = s.out_dims(dims)
                acc += t.coeff * cur
            _sparsify_into((params_l, rows_l, cols_l, vals_l), ids, acc)
    if params_l:
        params = np.concatenate(params_l)
        rows = np.concatenate(rows_l).astype(np.int64)
        cols = np.concatenate(cols_l).astype(np.int64)
        vals = np.concatenate(vals_l).astype(np.complex128)
        order = np.argsort(params, kind="stable")
        params, rows, cols, vals = params[order], rows[order], cols[order], vals[order]
        uniq, counts = np.unique(params, return_counts=True)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    else:
        uniq = np.zeros(0, dtype=np.int64)
        indptr = np.zeros(1, dtype=np.int64)
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.complex128)
    return g0, uniq, indptr, rows, cols, vals


def _scalarize_eq(name, g0, params, indptr, rows, cols, vals, side, m):
    """Hermitian equality block -> real rows (upper triangle re/im)."""
    row_map = -np.ones((side, side), dtype=np.int64)
    n_rows = 0
    labels = []
    for i in range(side):
        for j in range(i, side):
            row_map[i, j] = n_rows
            labels.append((i, j))
            n_rows += 1 if i == j else 2
    e_mat = np.zeros((n_rows, m))
    e_rhs = np.zeros(n_rows)
    pe = np.repeat(params, np.diff(indptr))
    for idx in range(len(vals)):
        r, c, v, k = rows[idx], cols[idx], vals[idx], pe[idx]
        if r > c:
            continue
        base = row_map[r, c]
        e_mat[base, k] += v.real
        if r != c:
            e_mat[base + 1, k] += v.imag
    for i in range(side):
        for j in range(i, side):
            base = row_map[i, j]
            e_rhs[base] = -g0[i, j].real
            if i != j:
                e_rhs[base + 1] = -g0[i, j].imag
    return e_mat, e_rhs


def _filter_rows(e_mat: np.ndarray, e_rhs: np.ndarray):
    """Keep a maximal independent subset of rows; verify dropped rows are
    implied (consistent right-hand sides)."""
    if e_mat.shape[0] == 0:
        return e_mat, e_rhs
    q, r, piv = scipy.linalg.qr(e_mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if len(diag) == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > max(1e-10 * diag[0], 1e-13)))
    kept = piv[:rank]
    dropped = piv[rank:]
    if len(dropped):
        # row_piv[j] = sum_i coeffs[i] * row_piv[i<rank] with coeffs from R
        coeffs = scipy.linalg.solve_triangular(
            r[:rank, :rank], r[:rank, rank:], lower=False
        )
        scale = max(1.0, np.abs(e_rhs).max())
        resid = np.abs(e_rhs[dropped] - coeffs.T @ e_rhs[kept]).max()
        if resid > 1e-8 * scale:
            raise ValueError(
                f"inconsistent equality rows (residual {resid:.3e}); builder bug"
            )
    kept = np.sort(kept)
    return e_mat[kept], e_rhs[kept]


def compile_problem(p: SdpProblem) -> CompiledProblem:
    var_params: dict[str, _VarParams] = {}
    offset = 0
    for name, var in p.variables.items():
        vp = _VarParams(var, offset)
        var_params[name] = vp
        offset += vp.count
    m = offset
    b = np.zeros(m)
    for coeff, name, w in p.objective:
        vp = var_params[name]
        side = vp.var.side
        weight = np.array([[1.0]], dtype=np.complex128) if w is None else w
        for ids, basis in vp.chunks():
            b[ids] += coeff * np.einsum("ij,bji->b", weight, basis).real
    b *= p.obj_sign
    blocks = []
    for name, expr in p.psd_constraints:
        g0, params, indptr, rows, cols, vals = _compile_expr(expr, var_params)
        blocks.append(CompiledBlock(name, expr.side, g0, params, indptr, rows, cols, vals))
    e_parts, rhs_parts = [], []
    for name, expr in p.eq_constraints:
        g0, params, indptr, rows, cols, vals = _compile_expr(expr, var_params)
        e_mat, e_rhs = _scalarize_eq(
            name, g0, params, indptr, rows, cols, vals, expr.side, m
        )
        e_parts.append(e_mat)
        rhs_parts.append(e_rhs)
    if e_parts:
        e_all = np.vstack(e_parts)
        rhs_all = np.concatenate(rhs_parts)
        e_mat, e_rhs = _filter_rows(e_all, rhs_all)
    else:
        e_mat = e_rhs = None
    return CompiledProblem(
        m=m,
        b=b,
        obj_offset=p.obj_offset,
        obj_sign=p.obj_sign,
        blocks=blocks,
        eq_mat=e_mat,
        eq_rhs=e_rhs,
        var_params=var_params,
    )


# ---------------------------------------------------------------------------
# evaluation (dense, independent of the compiled data), real embedding, SDPA


def evaluate(
    expr: MatrixExpr, assignment: dict[str, np.ndarray], variables: dict[str, SdpVariable]
) -> LabeledOperator:
    """Evaluate an expression at a concrete variable assignment."""
    side = expr.side
    out = np.zeros((side, side), dtype=np.complex128)
    if expr.constant is not None:
        out += expr.constant
    for t in expr.terms:
        if t.var not in assignment:
            raise KeyError(f"assignment missing variable {t.var!r}")
        cur = assignment[t.var][None, :, :].astype(np.complex128)
        dims = variables[t.var].dims
        for s in t.steps:
            cur = s.apply(cur, dims)
            dims = s.out_dims(dims)
        out += t.coeff * cur[0]
    return LabeledOperator(expr.dims, out, hermitian=False)


def embed_matrix(h: np.ndarray) -> np.ndarray:
    """The real representation [[Re, -Im], [Im, Re]]; doubles the spectrum."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def embed_real(p: SdpProblem | CompiledProblem) -> CompiledProblem:
    """Real-symmetric form of a compiled problem.

    Coefficient blocks become (1/2) [[Re G, -Im G], [Im G, Re G]], which
    preserves every inner product and therefore the optimal value; the
    parameter vector and equality rows are unchanged.
    """
    c = compile_problem(p) if isinstance(p, SdpProblem) else p
    blocks = []
    for blk in c.blocks:
        n = blk.side
        g0 = 0.5 * embed_matrix(blk.g0).astype(np.complex128)
        rows = np.concatenate([blk.rows, blk.rows + n, blk.rows + n, blk.rows])
        cols = np.concatenate([blk.cols, blk.cols + n, blk.cols, blk.cols + n])
        vals = 0.5 * np.concatenate(
            [blk.vals.real, blk.vals.real, blk.vals.imag, -blk.vals.imag]
        ).astype(np.complex128)
        params4 = np.tile(np.repeat(blk.params, np.diff(blk.indptr)), 4)
        order = np.argsort(params4, kind="stable")
        rows, cols, vals, params4 = rows[order], cols[order], vals[order], params4[order]
        keep = vals != 0
        rows, cols, vals, params4 = rows[keep], cols[keep], vals[keep], params4[keep]
        uniq, counts = np.unique(params4, return_counts=True)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        blocks.append(
            CompiledBlock(blk.name, 2 * n, g0, uniq, indptr, rows, cols, vals)
        )
    return CompiledProblem(
        m=c.m,
        b=c.b.copy(),
        obj_offset=c.obj_offset,
        obj_sign=c.obj_sign,
        blocks=blocks,
        eq_mat=None if c.eq_mat is None else c.eq_mat.copy(),
        eq_rhs=None if c.eq_rhs is None else c.eq_rhs.copy(),
        var_params=c.var_params,
    )


def export_sdpa(p: SdpProblem | CompiledProblem, path: str) -> None:
    """Write SDPA sparse format (.dat-s).

    The file encodes the minimization min c.x with c = -b and F_0 = -G0,
    so the SDPA optimum is the negative of this problem's maximum (before
    the stored offset/sign bookkeeping). Equality rows are written as
    paired diagonal entries in a trailing diagonal block. Floats use
    shortest round-trip decimals, making re-export byte-stable.
    """
    c = compile_problem(p) if isinstance(p, SdpProblem) else p
    if not c.is_real:
        raise ValueError("export needs a real problem; apply embed_real first")

    def fmt(v) -> str:
        return repr(float(v))

    n_eq = c.n_eq
    lines = [f"*EQROWS={n_eq}", f"*OFFSET={fmt(c.obj_offset)}", f"*SIGN={fmt(c.obj_sign)}"]
    lines.append(f"{c.m}")
    n_blocks = len(c.blocks) + (1 if n_eq else 0)
    lines.append(f"{n_blocks}")
    sizes = [str(b.side) for b in c.blocks] + ([str(-2 * n_eq)] if n_eq else [])
    lines.append(" ".join(sizes))
    lines.append(" ".join(fmt(-v) for v in c.b))
    entries: list[str] = []
    for bi, blk in enumerate(c.blocks, start=1):
        f0 = -blk.g0.real
        for i in range(blk.side):
            for j in range(i, blk.side):
                if f0[i, j] != 0.0:
                    entries.append(f"0 {bi} {i + 1} {j + 1} {fmt(f0[i, j])}")
    if n_eq:
        bi = len(c.blocks) + 1
        for i in range(n_eq):
            v = c.eq_rhs[i]
            if v != 0.0:
                entries.append(f"0 {bi} {2 * i + 1} {2 * i + 1} {fmt(v)}")
                entries.append(f"0 {bi} {2 * i + 2} {2 * i + 2} {fmt(-v)}")
    by_param: dict[int, list[str]] = {}
    for bi, blk in enumerate(c.blocks, start=1):
        pe = np.repeat(blk.params, np.diff(blk.indptr))
        for idx in range(len(blk.vals)):
            i, j = int(blk.rows[idx]), int(blk.cols[idx])
            if i > j:
                continue
            v = blk.vals[idx].real
            if v != 0.0:
                by_param.setdefault(int(pe[idx]), []).append(
                    f"{bi} {i + 1} {j + 1} {fmt(v)}"
                )
    if n_eq:
        bi = len(c.blocks) + 1
        cols_nz = np.nonzero(np.abs(c.eq_mat).sum(axis=0))[0]
        for k in cols_nz:
            for i in range(n_eq):
                v = c.eq_mat[i, k]
                if v != 0.0:
                    by_param.setdefault(int(k), []).append(
                        f"{bi} {2 * i + 1} {2 * i + 1} {fmt(v)}"
                    )
                    by_param.setdefault(int(k), []).append(
                        f"{bi} {2 * i + 2} {2 * i + 2} {fmt(-v)}"
                    )
    for k in sorted(by_param):
        entries.extend(f"{k + 1} {s}" for s in by_param[k])
    with open(path, "w") as fh:
        fh.write("\n".join(lines + entries) + "\n")


def sdpa_objective_value(c: CompiledProblem, objective: float) -> float:
    """Map an SDPA solver's primal objective back onto this problem's value
    convention: undo the c = -b flip, then reapply sign and offset."""
    return c.obj_sign * (-float(objective)) + c.obj_offset


def parse_sdpa(path: str) -> CompiledProblem:
    """Read a .dat-s file written by export_sdpa back into compiled form."""
    n_eq = 0
    offset = 0.0
    sign = 1.0
    tokens: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("*") or line.startswith('"'):
                if line.startswith("*EQROWS="):
                    n_eq = int(line.split("=", 1)[1])
                elif line.startswith("*OFFSET="):
                    offset = float(line.split("=", 1)[1])
                elif line.startswith("*SIGN="):
                    sign = float(line.split("=", 1)[1])
                continue
            tokens.extend(line.replace(",", " ").replace("{", " ").replace("}", " ").split())
    pos = 0

    def take() -> str:
        nonlocal pos
        pos += 1
        return tokens[pos - 1]

    m = int(take())
    n_blocks = int(take())
    sizes = [int(take()) for _ in range(n_blocks)]
    b = -np.array([float(take()) for _ in range(m)])
    n_psd = n_blocks - (1 if n_eq else 0)
    psd_sizes = sizes[:n_psd]
    if n_eq and sizes[-1] != -2 * n_eq:
        raise ValueError("equality block size does not match EQROWS header")
    g0s = [np.zeros((s, s), dtype=np.complex128) for s in psd_sizes]
    coo: list[list] = [[] for _ in range(n_psd)]
    eq_mat = np.zeros((n_eq, m)) if n_eq else None
    eq_rhs = np.zeros(n_eq) if n_eq else None
    while pos < len(tokens):
        matno = int(take())
        blkno = int(take())
        i = int(take())
        j = int(take())
        v = float(take())
        if n_eq and blkno == n_blocks:
            row = (i - 1) // 2
            if (i - 1) % 2 == 1:
                continue  # the paired negated entry
            if matno == 0:
                eq_rhs[row] = v
            else:
                eq_mat[row, matno - 1] = v
        else:
            blk = blkno - 1
            if matno == 0:
                g0s[blk][i - 1, j - 1] = -v
                if i != j:
                    g0s[blk][j - 1, i - 1] = -v
            else:
                coo[blk].append((matno - 1, i - 1, j - 1, v))
                if i != j:
                    coo[blk].append((matno - 1, j - 1, i - 1, v))
    blocks = []
    for blk in range(n_psd):
        if coo[blk]:
            params = np.array([e[0] for e in coo[blk]], dtype=np.int64)
            rows = np.array([e[1] for e in coo[blk]], dtype=np.int64)
            cols = np.array([e[2] for e in coo[blk]], dtype=np.int64)
            vals = np.array([e[3] for e in coo[blk]], dtype=np.complex128)
            order = np.argsort(params, kind="stable")
            params, rows, cols, vals = params[order], rows[order], cols[order], vals[order]
            uniq, counts = np.unique(params, return_counts=True)
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        else:
            uniq = np.zeros(0, dtype=np.int64)
            indptr = np.zeros(1, dtype=np.int64)
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0, dtype=np.complex128)
        blocks.append(
            CompiledBlock(f"block{blk}", psd_sizes[blk], g0s[blk], uniq, indptr, rows, cols, vals)
        )
    return CompiledProblem(
        m=m,
        b=b,
        obj_offset=offset,
        obj_sign=sign,
        blocks=blocks,
        eq_mat=eq_mat,
        eq_rhs=eq_rhs,
        var_params={},
    )
