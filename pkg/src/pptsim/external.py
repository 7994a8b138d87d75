"""Bridges to external conic solvers.

A compiled problem is already in the standard dual form

    maximize  b.y   subject to   G0 + sum_k y_k Gk  PSD per block,  E y = e,

which transposes directly onto the (zero cone + PSD cone) format consumed
by off-the-shelf conic solvers: minimize -b.y over A y + s = h with the
slack split across one zero cone for the equalities and one scaled-triangle
PSD cone per block. Having a second, independently implemented solver for
the exact same problem data is what makes the built-in one auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .sdpmodel import (
    CompiledProblem,
    Contract,
    Reorder,
    Sandwich,
    SdpProblem,
    Slice,
    TensorLeft,
    TensorRight,
    Trace,
    Transpose,
    _perm_flat_index,
    compile_problem,
    embed_real,
)

try:  # pragma: no cover - availability depends on the environment
    import clarabel as _clarabel
except ImportError:  # pragma: no cover
    _clarabel = None

try:  # pragma: no cover
    import scs as _scs
except ImportError:  # pragma: no cover
    _scs = None


@dataclass(frozen=True)
class ExternalResult:
    """Outcome of an external solve, mapped back to the problem's value
    convention (sign and offset applied)."""

    value: float
    status: str
    backend: str
    y: np.ndarray
    iters: int | None = None
    gap: float | None = None


def available_backends() -> tuple[str, ...]:
    out = []
    if _clarabel is not None:
        out.append("clarabel")
    if _scs is not None:
        out.append("scs")
    return tuple(out)


def _ensure_real(p: SdpProblem | CompiledProblem) -> CompiledProblem:
    c = compile_problem(p) if isinstance(p, SdpProblem) else p
    if not c.is_real:
        c = embed_real(c)
    return c


def _triangle_entries(side: int, rows, cols, vals, lower: bool):
    """Map symmetric matrix entries onto scaled-triangle positions.

    Entries arrive with both (i, j) and (j, i) present for off-diagonal
    positions; only one representative is kept and scaled by sqrt(2).
    ``lower`` selects column-stacked lower-triangle order, otherwise
    column-stacked upper-triangle order.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    vals = np.asarray(vals).real
    keep = rows <= cols
    i, j, v = rows[keep], cols[keep], vals[keep].copy()
    off = i < j
    v[off] *= np.sqrt(2.0)
    if lower:
        # position of (j, i) in the lower triangle stacked by columns
        idx = i * side - (i * (i - 1)) // 2 + (j - i)
    else:
        idx = (j * (j + 1)) // 2 + i
    return idx, v, keep


def _cone_data(c: CompiledProblem, lower: bool):
    """Assemble (A, h, cone sides) with zero-cone rows first."""
    n_eq = c.n_eq
    a_rows: list[np.ndarray] = []
    a_cols: list[np.ndarray] = []
    a_vals: list[np.ndarray] = []
    h_parts: list[np.ndarray] = []
    if n_eq:
        em = scipy.sparse.coo_matrix(c.eq_mat)
        a_rows.append(em.row)
        a_cols.append(em.col)
        a_vals.append(em.data)
        h_parts.append(np.asarray(c.eq_rhs, dtype=float))
    offset = n_eq
    sides = []
    for blk in c.blocks:
        tri = blk.side * (blk.side + 1) // 2
        pe = np.repeat(blk.params, np.diff(blk.indptr))
        idx, v, keep = _triangle_entries(blk.side, blk.rows, blk.cols, blk.vals, lower)
        a_rows.append(idx + offset)
        a_cols.append(pe[keep])
        a_vals.append(-v)
        g0 = np.zeros(tri)
        gi, gj = np.nonzero(blk.g0.real)
        if len(gi):
            idx0, v0, _ = _triangle_entries(blk.side, gi, gj, blk.g0.real[gi, gj], lower)
            g0[idx0] = v0
        h_parts.append(g0)
        sides.append(blk.side)
        offset += tri
    a = scipy.sparse.csc_matrix(
        (np.concatenate(a_vals), (np.concatenate(a_rows), np.concatenate(a_cols))),
        shape=(offset, c.m),
    )
    return a, np.concatenate(h_parts), sides


def _solve_clarabel(c: CompiledProblem, eps: float, max_iters: int) -> ExternalResult:
    a, h, sides = _cone_data(c, lower=False)
    cones = []
    if c.n_eq:
        cones.append(_clarabel.ZeroConeT(c.n_eq))
    cones.extend(_clarabel.PSDTriangleConeT(s) for s in sides)
    settings = _clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iters
    settings.tol_gap_abs = eps
    settings.tol_gap_rel = eps
    settings.tol_feas = eps
    p = scipy.sparse.csc_matrix((c.m, c.m))
    solver = _clarabel.DefaultSolver(p, -np.asarray(c.b, dtype=float), a, h, cones, settings)
    sol = solver.solve()
    y = np.asarray(sol.x, dtype=float)
    return ExternalResult(
        value=c.objective_value(y),
        status=str(sol.status),
        backend="clarabel",
        y=y,
        iters=int(sol.iterations),
    )


def _solve_scs(c: CompiledProblem, eps: float, max_iters: int) -> ExternalResult:
    a, h, sides = _cone_data(c, lower=True)
    cone: dict = {}
    if c.n_eq:
        cone["z"] = c.n_eq
    cone["s"] = sides
    solver = _scs.SCS(
        {"A": a, "b": h, "c": -np.asarray(c.b, dtype=float)},
        cone,
        eps_abs=eps,
        eps_rel=eps,
        max_iters=max_iters,
        verbose=False,
    )
    out = solver.solve()
    y = np.asarray(out["x"], dtype=float)
    return ExternalResult(
        value=c.objective_value(y),
        status=str(out["info"]["status"]),
        backend="scs",
        y=y,
        iters=int(out["info"]["iter"]),
        gap=float(out["info"]["gap"]),
    )


def _pick_backend(backend: str | None) -> str:
    if backend is None:
        order = available_backends()
        if not order:
            raise RuntimeError("no external conic solver installed")
        return order[0]
    if backend not in ("clarabel", "scs"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend not in available_backends():
        raise RuntimeError(f"{backend} is not installed")
    return backend


def solve_external(
    p: SdpProblem | CompiledProblem,
    backend: str | None = None,
    eps: float = 1e-8,
    max_iters: int = 100_000,
) -> ExternalResult:
    """Solve through an installed external conic solver.

    ``backend`` may be "clarabel", "scs", or None to pick the first
    available in that order. Raises RuntimeError when none is installed.
    """
    c = _ensure_real(p)
    backend = _pick_backend(backend)
    if backend == "clarabel":
        return _solve_clarabel(c, eps, max_iters)
    return _solve_scs(c, eps, max_iters)


# ---------------------------------------------------------------------------
# direct sparse assembly
#
# The dense compile path materializes every framed basis element of every
# variable, which is fine up to a few thousand parameters but hopeless for
# the largest instances (a six-qutrit extension variable alone carries
# ~2.7e5 real parameters). All framing steps are sparse linear maps on the
# row-major vectorization, so the cone data can instead be assembled
# symbolically. The assembly below is restricted to problems whose data is
# entirely real: conjugating any feasible point then preserves feasibility
# and objective, so restricting Hermitian variables to real symmetric ones
# loses nothing and the real-triangle parameterization is exact.


def _decompose(idx: np.ndarray, dims) -> np.ndarray:
    out = np.empty((len(dims), idx.size), dtype=np.int64)
    rem = idx.copy()
    for k in range(len(dims) - 1, -1, -1):
        out[k] = rem % dims[k]
        rem //= dims[k]
    return out


def _compose(multi: np.ndarray, dims) -> np.ndarray:
    idx = np.zeros(multi.shape[1], dtype=np.int64)
    for k in range(len(dims)):
        idx = idx * dims[k] + multi[k]
    return idx


def _real_data(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a)
    if np.iscomplexobj(a) and np.abs(a.imag).max(initial=0.0) > 1e-14:
        raise ValueError(f"sparse assembly needs real data, {what} has imaginary part")
    return a.real.astype(float)


def _step_matrix(step, dims):
    """Sparse transfer of one framing step on row-major vectorizations."""
    side = int(np.prod(dims)) if dims else 1
    nsq = side * side
    arange = np.arange(nsq)
    r, c = np.divmod(arange, side)

    if isinstance(step, Sandwich):
        left = scipy.sparse.csr_matrix(_real_data(step.left, "sandwich operator"))
        return scipy.sparse.kron(left, left, format="csr"), (step.left.shape[0],)

    rm = _decompose(r, dims)
    cm = _decompose(c, dims)

    if isinstance(step, Transpose):
        rn, cn = rm.copy(), cm.copy()
        for s in step.subs:
            rn[s], cn[s] = cm[s], rm[s]
        out_idx = _compose(rn, dims) * side + _compose(cn, dims)
        mat = scipy.sparse.csr_matrix(
            (np.ones(nsq), (out_idx, arange)), shape=(nsq, nsq)
        )
        return mat, tuple(dims)

    if isinstance(step, Reorder):
        odims = step.out_dims(dims)
        rn = rm[list(step.perm)]
        cn = cm[list(step.perm)]
        out_idx = _compose(rn, odims) * side + _compose(cn, odims)
        mat = scipy.sparse.csr_matrix(
            (np.ones(nsq), (out_idx, arange)), shape=(nsq, nsq)
        )
        return mat, odims

    if isinstance(step, Trace):
        odims = step.out_dims(dims)
        oside = int(np.prod(odims)) if odims else 1
        keep = [i for i in range(len(dims)) if i not in set(step.drop)]
        mask = np.ones(nsq, dtype=bool)
        for s in step.drop:
            mask &= rm[s] == cm[s]
        out_idx = _compose(rm[keep][:, mask], odims) * oside + _compose(
            cm[keep][:, mask], odims
        )
        mat = scipy.sparse.csr_matrix(
            (np.ones(mask.sum()), (out_idx, arange[mask])),
            shape=(oside * oside, nsq),
        )
        return mat, odims

    if isinstance(step, Contract):
        odims = step.out_dims(dims)
        oside = int(np.prod(odims)) if odims else 1
        subs = list(step.subs)
        keep = [i for i in range(len(dims)) if i not in set(subs)]
        sdims = [dims[i] for i in subs]
        w = _real_data(step.op, "contract operator")
        # out[i, j] = sum W[s, u] X[(u, i), (s, j)]: the column subs-part
        # indexes W rows, the row subs-part indexes W columns
        u = _compose(rm[subs], sdims)
        s = _compose(cm[subs], sdims)
        vals = w[s, u]
        nz = vals != 0.0
        out_idx = _compose(rm[keep][:, nz], odims) * oside + _compose(
            cm[keep][:, nz], odims
        )
        mat = scipy.sparse.csr_matrix(
            (vals[nz], (out_idx, arange[nz])), shape=(oside * oside, nsq)
        )
        return mat, odims

    if isinstance(step, (TensorLeft, TensorRight)):
        op = _real_data(step.op, "tensor operand")
        odims = step.out_dims(dims)
        oside = side * op.shape[0]
        p, q = np.nonzero(op)
        k = len(p)
        vals = np.repeat(op[p, q], nsq)
        p = np.repeat(p, nsq)
        q = np.repeat(q, nsq)
        rr = np.tile(r, k)
        cc = np.tile(c, k)
        if isinstance(step, TensorLeft):
            out_idx = (p * side + rr) * oside + (q * side + cc)
        else:
            fac = op.shape[0]
            out_idx = (rr * fac + p) * oside + (cc * fac + q)
        mat = scipy.sparse.csr_matrix(
            (vals, (out_idx, np.tile(arange, k))), shape=(oside * oside, nsq)
        )
        return mat, odims

    if isinstance(step, Slice):
        odims = step.out_dims(dims)
        oside = int(np.prod(odims)) if odims else 1
        keep = [i for i in range(len(dims)) if i != step.sub]
        mask = (rm[step.sub] == step.i) & (cm[step.sub] == step.j)
        out_idx = _compose(rm[keep][:, mask], odims) * oside + _compose(
            cm[keep][:, mask], odims
        )
        mat = scipy.sparse.csr_matrix(
            (np.ones(mask.sum()), (out_idx, arange[mask])),
            shape=(oside * oside, nsq),
        )
        return mat, odims

    raise TypeError(f"unsupported framing step {type(step).__name__}")


def _tri_index(i: np.ndarray, j: np.ndarray, n: int) -> np.ndarray:
    """Row-major upper-triangle linear index for i <= j."""
    return i * n - (i * (i - 1)) // 2 + (j - i)


def _var_columns(var) -> scipy.sparse.csr_matrix:
    """Sparse map from a variable's free parameters to its vectorization.

    Parameters are scaled-triangle entries; swap-graded variables are cut
    down to one parameter per swap orbit (entries forced to zero by an
    odd grading drop out entirely).
    """
    n = var.side
    iu, ju = np.triu_indices(n)
    tri = len(iu)
    scale = np.where(iu < ju, 1.0 / np.sqrt(2.0), 1.0)
    rows = np.concatenate([iu * n + ju, ju * n + iu])
    tri_ids = np.concatenate([np.arange(tri)] * 2)
    vals = np.concatenate([scale, scale])
    mirror = np.concatenate([np.ones(tri, dtype=bool), iu < ju])
    d = scipy.sparse.csr_matrix(
        (vals[mirror], (rows[mirror], tri_ids[mirror])), shape=(n * n, tri)
    )
    if var.swap is None:
        return d
    flat = _perm_flat_index(var.dims, var.swap)
    pi, pj = flat[iu], flat[ju]
    partner = _tri_index(np.minimum(pi, pj), np.maximum(pi, pj), n)
    own = np.arange(tri)
    sign = float(var.swap_sign)
    fixed_idx = np.nonzero(partner == own)[0]
    if sign < 0:
        fixed_idx = fixed_idx[:0]
    lead_idx = np.nonzero(own < partner)[0]
    nf, nl = len(fixed_idx), len(lead_idx)
    if nf + nl == 0:
        return scipy.sparse.csr_matrix((n * n, 0))
    s = scipy.sparse.csr_matrix(
        (
            np.concatenate([np.ones(nf + nl), np.full(nl, sign)]),
            (
                np.concatenate([fixed_idx, lead_idx, partner[lead_idx]]),
                np.concatenate([np.arange(nf + nl), nf + np.arange(nl)]),
            ),
        ),
        shape=(tri, nf + nl),
    )
    return (d @ s).tocsr()


def _triangle_reader(side: int, lower: bool):
    """Triangle entries (i <= j) in the backend's svec order, with scales.

    Column-stacked lower triangle visits pairs ordered by (i, j); the
    upper-triangle variant orders by (j, i).
    """
    iu, ju = np.triu_indices(side)
    if lower:
        i, j = iu, ju
    else:
        order = np.lexsort((iu, ju))
        i, j = iu[order], ju[order]
    scale = np.where(i != j, np.sqrt(2.0), 1.0)
    return i, j, scale


def sparse_cone_data(p: SdpProblem, lower: bool = True):
    """Cone-form data (A, h, PSD sides, zero rows, b, offset, sign) built
    without ever densifying a variable basis. Real-data problems only."""
    cols: dict[str, scipy.sparse.csr_matrix] = {}
    offsets: dict[str, int] = {}
    m = 0
    for name, var in p.variables.items():
        pv = _var_columns(var)
        cols[name] = pv
        offsets[name] = m
        m += pv.shape[1]

    def term_transfer(t) -> scipy.sparse.csr_matrix:
        var = p.variables[t.var]
        mat = cols[t.var]
        dims = var.dims if var.dims else ()
        for st in t.steps:
            sm, dims = _step_matrix(st, dims)
            mat = sm @ mat
        if abs(complex(t.coeff).imag) > 1e-14:
            raise ValueError("sparse assembly needs real data, coefficient is complex")
        return complex(t.coeff).real * mat

    def expr_transfer(expr):
        """Stacked (nsq x m) transfer of all terms plus the dense constant."""
        side = expr.side
        total = scipy.sparse.csr_matrix((side * side, m))
        for t in expr.terms:
            tm = term_transfer(t).tocoo()
            shifted = scipy.sparse.csr_matrix(
                (tm.data, (tm.row, tm.col + offsets[t.var])), shape=(side * side, m)
            )
            total = total + shifted
        const = np.zeros((side, side))
        if expr.constant is not None:
            const = _real_data(expr.constant, "constraint constant")
        return total, const

    a_parts: list[scipy.sparse.csr_matrix] = []
    h_parts: list[np.ndarray] = []
    n_eq = 0
    for name, expr in p.eq_constraints:
        total, const = expr_transfer(expr)
        side = expr.side
        iu, ju = np.triu_indices(side)
        upper = total[iu * side + ju]
        low = total[ju * side + iu]
        rows = 0.5 * (upper + low)
        a_parts.append(rows.tocsr())
        h_parts.append(-const[iu, ju])
        n_eq += len(iu)
    sides = []
    for name, expr in p.psd_constraints:
        total, const = expr_transfer(expr)
        side = expr.side
        i, j, scale = _triangle_reader(side, lower)
        sym = 0.5 * (total[i * side + j] + total[j * side + i])
        a_parts.append(
            scipy.sparse.diags(-scale) @ sym
        )
        h_parts.append(scale * const[i, j])
        sides.append(side)

    b = np.zeros(m)
    for coeff, name, w in p.objective:
        var = p.variables[name]
        if w is None:
            weight = np.array([[1.0]])
        else:
            weight = _real_data(w, "objective weight")
        g = weight.T.reshape(-1)  # Tr[W X] = vec(W^T) . vec(X)
        b[offsets[name] : offsets[name] + cols[name].shape[1]] += coeff * (
            cols[name].T @ g
        )
    b *= p.obj_sign
    a = scipy.sparse.vstack(a_parts, format="csc")
    h = np.concatenate(h_parts)
    return a, h, sides, n_eq, b, p.obj_offset, p.obj_sign


def solve_external_sparse(
    p: SdpProblem,
    backend: str | None = None,
    eps: float = 1e-8,
    max_iters: int = 100_000,
) -> ExternalResult:
    """External solve through the direct sparse assembly.

    Use for instances too large for :func:`compile_problem`; the solution
    value matches :func:`solve_external` on anything both can handle. The
    default backend is scs: interior-point factorizations densify the
    triangle of each PSD block, which is exactly what large instances
    cannot afford.
    """
    if backend is None and _scs is not None:
        backend = "scs"
    backend = _pick_backend(backend)
    a, h, sides, n_eq, b, offset, sign = sparse_cone_data(p, lower=(backend == "scs"))
    if backend == "clarabel":
        cones = []
        if n_eq:
            cones.append(_clarabel.ZeroConeT(n_eq))
        cones.extend(_clarabel.PSDTriangleConeT(s) for s in sides)
        settings = _clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iters
        settings.tol_gap_abs = eps
        settings.tol_gap_rel = eps
        settings.tol_feas = eps
        q = scipy.sparse.csc_matrix((a.shape[1], a.shape[1]))
        solver = _clarabel.DefaultSolver(q, -b, a, h, cones, settings)
        sol = solver.solve()
        y = np.asarray(sol.x, dtype=float)
        return ExternalResult(
            value=sign * float(b @ y) + offset,
            status=str(sol.status),
            backend="clarabel",
            y=y,
            iters=int(sol.iterations),
        )
    cone: dict = {}
    if n_eq:
        cone["z"] = n_eq
    cone["s"] = sides
    solver = _scs.SCS(
        {"A": a, "b": h, "c": -b},
        cone,
        eps_abs=eps,
        eps_rel=eps,
        max_iters=max_iters,
        verbose=False,
    )
    out = solver.solve()
    y = np.asarray(out["x"], dtype=float)
    return ExternalResult(
        value=sign * float(b @ y) + offset,
        status=str(out["info"]["status"]),
        backend="scs",
        y=y,
        iters=int(out["info"]["iter"]),
        gap=float(out["info"]["gap"]),
    )
