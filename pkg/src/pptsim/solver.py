"""Interior-point solver for the compiled block LMI form.

Infeasible-start Mehrotra predictor-corrector with Nesterov-Todd scaling,
working directly on complex Hermitian blocks:

    maximize  b . y   s.t.   S_b(y) = G0_b + sum_k y_k Gk_b >= 0,  E y = e.

The multiplier blocks X_b track the other side; the duality gap is
sum_b <X_b, S_b>. Each iteration forms the Schur complement
H[k,l] = sum_b Tr[Gk W_b Gl W_b] from the per-block sparse coefficient
stacks, factors it once, and reuses the factorization for the predictor
and corrector solves. Everything is deterministic dense linear algebra.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .sdpmodel import CompiledProblem, SdpProblem, compile_problem

_SCHUR_CHUNK = 384


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.98

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.feas_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (0 < self.step_fraction < 1):
            raise ValueError("step_fraction must lie in (0, 1)")


@dataclass
class SolverResult:
    status: str  # "optimal" | "max_iters" | "infeasible-suspected" | "stalled" | "numerical-limit"
    value: float
    primal: dict[str, np.ndarray]
    dual: list[np.ndarray]
    gap: float
    iters: int
    y: np.ndarray
    nu: np.ndarray
    info: dict


class FactorizationError(RuntimeError):
    """Raised when the KKT system cannot be factored; usually means the
    problem is numerically ill-conditioned or badly scaled."""


def _chol(a: np.ndarray, jitters=(0.0, 1e-14, 1e-12, 1e-10, 1e-8)):
    n = a.shape[0]
    scale = max(np.abs(np.diag(a)).max(), 1.0)
    for j in jitters:
        try:
            return scipy.linalg.cholesky(
                a + (j * scale) * np.eye(n), lower=True, check_finite=False
            )
        except scipy.linalg.LinAlgError:
            continue
    raise FactorizationError("Cholesky failed after jitter retries")


def _step_to_boundary(chol_l: np.ndarray, delta: np.ndarray) -> float:
    """Largest alpha with P + alpha*Delta >= 0, for P = L L^dag."""
    k = scipy.linalg.solve_triangular(chol_l, delta, lower=True, check_finite=False)
    k = scipy.linalg.solve_triangular(
        chol_l, k.conj().T, lower=True, check_finite=False
    )
    lam_min = scipy.linalg.eigvalsh((k + k.conj().T) / 2.0)[0]
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


class _BlockWork:
    """Per-block state: sparse coefficient stack and NT scaling data."""

    # coefficient matrices at least this dense fall back to W @ G @ W
    _GROUP_NNZ_MAX = 32

    def __init__(self, blk):
        self.blk = blk
        n = blk.side
        self.n = n
        m_b = len(blk.params)
        self.m_b = m_b
        counts = np.diff(blk.indptr)
        plocal = np.repeat(np.arange(m_b), counts)
        flat = blk.rows * n + blk.cols
        self.sel = scipy.sparse.csr_matrix(
            (blk.vals, (plocal, flat)), shape=(m_b, n * n)
        )
        self.sel_conj = self.sel.conj().tocsr()
        self.g0 = blk.g0
        # params bucketed by coefficient count, so W Gk W becomes a batched
        # (n, c) @ (c, n) product instead of a dense n-by-n sandwich
        self.groups = []
        for c in np.unique(counts):
            if c == 0 or c > self._GROUP_NNZ_MAX:
                continue
            pl = np.nonzero(counts == c)[0]
            eidx = blk.indptr[pl][:, None] + np.arange(c)[None, :]
            self.groups.append((int(c), pl, eidx))
        self.dense_params = np.nonzero(counts > self._GROUP_NNZ_MAX)[0]

    def lincomb(self, y: np.ndarray) -> np.ndarray:
        """sum_k y_k Gk_b as a dense matrix."""
        if self.m_b == 0:
            return np.zeros((self.n, self.n), dtype=np.complex128)
        out = (self.sel.T @ y[self.blk.params]).reshape(self.n, self.n)
        return np.asarray(out)

    def gather(self, t: np.ndarray, out: np.ndarray) -> None:
        """out[params] += Re <Gk, T>."""
        if self.m_b == 0:
            return
        vals = np.asarray(self.sel_conj @ t.reshape(-1)).real
        np.add.at(out, self.blk.params, vals)

    def _accumulate_cols(self, mid: np.ndarray, pl: np.ndarray, h: np.ndarray) -> None:
        cols = np.asarray(self.sel_conj @ mid.reshape(len(pl), -1).T).real
        h[np.ix_(self.blk.params, self.blk.params[pl])] += cols

    def schur_accumulate(self, w: np.ndarray, h: np.ndarray) -> None:
        """h += block contribution Tr[Gk W Gl W] on its parameter square."""
        if self.m_b == 0:
            return
        n = self.n
        rows, cols_, vals = self.blk.rows, self.blk.cols, self.blk.vals
        for c, pl, eidx in self.groups:
            step = max(1, _SCHUR_CHUNK // max(1, c * n // 64))
            for lo in range(0, len(pl), step):
                sl = slice(lo, lo + step)
                ei = eidx[sl]
                left = np.transpose(w[:, rows[ei]], (1, 0, 2)) * vals[ei][:, None, :]
                right = w[cols_[ei], :]
                self._accumulate_cols(np.matmul(left, right), pl[sl], h)
        if len(self.dense_params):
            for lo in range(0, len(self.dense_params), _SCHUR_CHUNK):
                pl = self.dense_params[lo : lo + _SCHUR_CHUNK]
                dense = self.sel[pl].toarray().reshape(len(pl), n, n)
                self._accumulate_cols(np.matmul(np.matmul(w, dense), w), pl, h)


class _KktFactors:
    def __init__(self, h: np.ndarray, e_mat: np.ndarray | None):
        scale = max(np.abs(np.diag(h)).max(), 1.0)
        self.h = h
        self.c_h = None
        for j in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
            try:
                self.c_h = scipy.linalg.cho_factor(
                    h + (j * scale) * np.eye(h.shape[0]),
                    lower=True,
                    check_finite=False,
                )
                break
            except scipy.linalg.LinAlgError:
                continue
        if self.c_h is None:
            raise FactorizationError("Schur complement factorization failed")
        self.e_mat = e_mat
        if e_mat is not None and e_mat.shape[0]:
            # one triangular sweep gives the equality Schur complement; the
            # full H-solve against E^T is never materialized
            half = scipy.linalg.solve_triangular(
                self.c_h[0], e_mat.T, lower=self.c_h[1], trans=0, check_finite=False
            )
            b = half.T @ half
            b = (b + b.T) / 2.0
            scale_b = max(np.abs(np.diag(b)).max(), 1.0)
            self.c_b = None
            for j in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
                try:
                    self.c_b = scipy.linalg.cho_factor(
                        b + (j * scale_b) * np.eye(b.shape[0]),
                        lower=True,
                        check_finite=False,
                    )
                    break
                except scipy.linalg.LinAlgError:
                    continue
            if self.c_b is None:
                raise FactorizationError("equality Schur factorization failed")

    def _solve_once(self, g: np.ndarray, re: np.ndarray | None):
        u2 = scipy.linalg.cho_solve(self.c_h, g, check_finite=False)
        if self.e_mat is None or not self.e_mat.shape[0]:
            return u2, np.zeros(0)
        dnu = scipy.linalg.cho_solve(
            self.c_b, self.e_mat @ u2 - re, check_finite=False
        )
        corr = scipy.linalg.cho_solve(self.c_h, self.e_mat.T @ dnu, check_finite=False)
        return u2 - corr, dnu

    def solve(self, g: np.ndarray, re: np.ndarray | None):
        """Factored solve plus iterative refinement against the true system;
        the refinement recovers the digits lost to conditioning and jitter."""
        dy, dnu = self._solve_once(g, re)
        has_eq = self.e_mat is not None and self.e_mat.shape[0]
        for _ in range(3):
            res_g = g - self.h @ dy
            if has_eq:
                res_g -= self.e_mat.T @ dnu
                res_e = re - self.e_mat @ dy
            else:
                res_e = re
            scale = max(np.abs(g).max(initial=0.0), 1.0)
            err = np.abs(res_g).max(initial=0.0)
            if has_eq:
                err = max(err, np.abs(res_e).max(initial=0.0))
            if err <= 1e-14 * scale:
                break
            cy, cnu = self._solve_once(res_g, res_e)
            dy = dy + cy
            dnu = dnu + cnu
        return dy, dnu


def solve(problem: SdpProblem | CompiledProblem, config: SolverConfig | None = None) -> SolverResult:
    """Solve the block LMI problem; see module docstring for the form.

    Post-conditions on status "optimal": relative duality gap at most
    gap_tol and scaled residual norms at most feas_tol. "max_iters"
    returns the last iterate; "infeasible-suspected" flags divergence or
    step stalls and is a heuristic, not a certificate.
    """
    cfg = config or SolverConfig()
    c = compile_problem(problem) if isinstance(problem, SdpProblem) else problem
    if not c.blocks:
        raise ValueError("problem has no PSD blocks")
    works = [_BlockWork(blk) for blk in c.blocks]
    m = c.m
    e_mat, e_rhs = c.eq_mat, c.eq_rhs
    n_eq = 0 if e_mat is None else e_mat.shape[0]
    tau = 1.0 + max(np.abs(w.g0).max(initial=0.0) for w in works)
    xs = [tau * np.eye(w.n, dtype=np.complex128) for w in works]
    ss = [tau * np.eye(w.n, dtype=np.complex128) for w in works]
    y = np.zeros(m)
    nu = np.zeros(n_eq)
    ntot = sum(w.n for w in works)
    rp_scale = 1.0 + np.abs(c.b).max(initial=0.0)
    rs_scale = tau
    re_scale = 1.0 + (np.abs(e_rhs).max() if n_eq else 0.0)

    status = "max_iters"
    iters = 0
    stall = 0
    feas0 = gap0 = None
    gap_rel = np.inf
    history: list[tuple[float, float]] = []
    best_crit = np.inf
    best_age = 0
    best = None

    for _ in range(cfg.max_iters):
        rs = [w.g0 + w.lincomb(y) - s for w, s in zip(works, ss)]
        rp = c.b.copy()
        for w, x in zip(works, xs):
            w.gather(x, rp)
        if n_eq:
            rp -= e_mat.T @ nu
            re = e_rhs - e_mat @ y
        else:
            re = None
        gap = sum(np.vdot(x, s).real for x, s in zip(xs, ss))
        obj = float(c.b @ y)
        gap_rel = gap / max(1.0, abs(obj))
        ys_feas = max(
            max(np.abs(r).max(initial=0.0) for r in rs) / rs_scale,
            (np.abs(re).max(initial=0.0) / re_scale) if n_eq else 0.0,
        )
        feas = max(np.abs(rp).max(initial=0.0) / rp_scale, ys_feas)
        history.append((float(gap_rel), float(feas)))
        if os.environ.get("PPTSIM_DEBUG"):
            print(
                f"DBG it{iters:3d} gap {gap_rel:+.2e} "
                f"rp {np.abs(rp).max(initial=0.0):.2e} "
                f"rs {max(np.abs(r).max(initial=0.0) for r in rs):.2e} "
                f"re {(np.abs(re).max(initial=0.0) if n_eq else 0.0):.2e} "
                f"|X| {max(np.abs(x).max() for x in xs):.2e} "
                f"|nu| {np.abs(nu).max(initial=0.0):.2e} "
                f"|y| {np.abs(y).max(initial=0.0):.2e}"
            )
        # best-iterate bookkeeping weighs only the quantities that certify the
        # reported value: gap and the y-side residuals
        crit = max(abs(gap_rel), ys_feas)
        if crit < 0.98 * best_crit:
            best_crit = crit
            best = (
                y.copy(),
                nu.copy(),
                [x.copy() for x in xs],
                [s.copy() for s in ss],
                float(gap_rel),
                float(feas),
            )
            best_age = 0
        else:
            best_age += 1
        if feas0 is None:
            feas0, gap0 = feas, gap
        if gap_rel <= cfg.gap_tol and feas <= cfg.feas_tol:
            status = "optimal"
            break
        big = max(max(np.abs(x).max() for x in xs), max(np.abs(s).max() for s in ss))
        if (feas > 1e4 * (feas0 + 1.0) and gap > 1e4 * (gap0 + 1.0)) or big > 1e10 * tau:
            status = "infeasible-suspected"
            break
        if stall >= 5:
            status = "infeasible-suspected"
            break
        if best_age >= 12:
            # no measurable progress for a dozen iterations; typical of a
            # degenerate optimal face where the multiplier side is unattained
            status = "stalled"
            break

        try:
            # Nesterov-Todd scaling point per block
            lxs, lss, rscale, rinv, wmats, lams = [], [], [], [], [], []
            for w, x, s in zip(works, xs, ss):
                lx = _chol(x)
                ls = _chol(s)
                u, lam, vh = scipy.linalg.svd(ls.conj().T @ lx)
                lam = np.maximum(lam, 1e-100)
                r = (lx @ vh.conj().T) * (lam ** -0.5)
                lx_inv = scipy.linalg.solve_triangular(
                    lx, np.eye(w.n), lower=True, check_finite=False
                )
                ri = (lam ** 0.5)[:, None] * (vh @ lx_inv)
                lxs.append(lx)
                lss.append(ls)
                rscale.append(r)
                rinv.append(ri)
                wmats.append(r @ r.conj().T)
                lams.append(lam)

            h = np.zeros((m, m))
            for w, wm in zip(works, wmats):
                w.schur_accumulate(wm, h)
            kkt = _KktFactors(h, e_mat if n_eq else None)
        except FactorizationError:
            # Iterates reached the edge of representable positive definiteness;
            # keep the last point rather than abort, the caller sees the status.
            status = "numerical-limit"
            break

        mu = max(gap / ntot, 1e-300)

        def newton(t_blocks):
            g = rp.copy()
            for w, t in zip(works, t_blocks):
                w.gather(t, g)
            dy, dnu = kkt.solve(g, re)
            dxs, dss = [], []
            for w, r, t, wm in zip(works, rs, t_blocks, wmats):
                lc = w.lincomb(dy)
                dss.append(r + lc)
                dxs.append(t - wm @ lc @ wm)
            return dy, dnu, dxs, dss

        # predictor: target 0, so the scaled right side is -Lambda
        t_aff = [
            -x - wm @ r_s @ wm for x, wm, r_s in zip(xs, wmats, rs)
        ]
        dy_a, dnu_a, dxs_a, dss_a = newton(t_aff)
        ap = min(
            [1.0] + [_step_to_boundary(lx, dx) for lx, dx in zip(lxs, dxs_a)]
        )
        ad = min(
            [1.0] + [_step_to_boundary(ls, ds) for ls, ds in zip(lss, dss_a)]
        )
        mu_aff = sum(
            np.vdot(x + ap * dx, s + ad * ds).real
            for x, dx, s, ds in zip(xs, dxs_a, ss, dss_a)
        ) / ntot
        sigma = min(max(mu_aff, 0.0) / mu, 1.0) ** 3

        # corrector with Mehrotra second-order term in the scaled space
        t_cor = []
        for w, r, ri, lam, dx_a, ds_a, wm, r_s in zip(
            works, rscale, rinv, lams, dxs_a, dss_a, wmats, rs
        ):
            dxh = ri @ dx_a @ ri.conj().T
            dsh = r.conj().T @ ds_a @ r
            cross = dxh @ dsh
            f = -np.diag(lam * lam) - (cross + cross.conj().T) / 2.0
            f[np.diag_indices_from(f)] += sigma * mu
            f *= 2.0 / np.add.outer(lam, lam)
            t_cor.append(r @ f @ r.conj().T - wm @ r_s @ wm)
        dy, dnu, dxs, dss = newton(t_cor)
        ap = min(
            [1.0]
            + [
                cfg.step_fraction * _step_to_boundary(lx, dx)
                for lx, dx in zip(lxs, dxs)
            ]
        )
        ad = min(
            [1.0]
            + [
                cfg.step_fraction * _step_to_boundary(ls, ds)
                for ls, ds in zip(lss, dss)
            ]
        )
        xs = [x + ap * dx for x, dx in zip(xs, dxs)]
        ss = [s + ad * ds for s, ds in zip(ss, dss)]
        y = y + ad * dy
        if n_eq:
            # nu pairs with X in the stationarity residual, so it takes the
            # X-side step length
            nu = nu + ap * dnu
        iters += 1
        stall = stall + 1 if max(ap, ad) < 1e-8 else 0

    best_gap = best_feas = np.nan
    if status != "optimal" and best is not None:
        # report the best iterate seen, not whatever the breakdown left behind
        y, nu, xs, ss, best_gap, best_feas = best
        if best_gap <= cfg.gap_tol and best_feas <= cfg.feas_tol:
            status = "optimal"
    gap = sum(np.vdot(x, s).real for x, s in zip(xs, ss))
    gap_rel = gap / max(1.0, abs(float(c.b @ y)))
    dual_obj = sum(np.vdot(w.g0, x).real for w, x in zip(works, xs))
    if n_eq:
        dual_obj += float(nu @ e_rhs)
    primal = c.reconstruct(y) if c.var_params else {"y": y.copy()}
    return SolverResult(
        status=status,
        value=c.objective_value(y),
        primal=primal,
        dual=[x.copy() for x in xs],
        gap=float(gap_rel),
        iters=iters,
        y=y.copy(),
        nu=nu.copy(),
        info={
            "primal_obj": float(c.b @ y),
            "dual_obj": float(dual_obj),
            "config": dataclasses.asdict(cfg),
            "history": history,
            "best_gap": float(best_gap),
            "best_feas": float(best_feas),
        },
    )
