"""SDP lower bounds on the error of simulating a channel from a resource.

Two families are covered.  Teleportation: simulate a target channel from a
shared bipartite state with one round of classical communication.  Error
correction: simulate the identity from a resource channel used once, with
free classical feedback.  In both cases the free operations are relaxed to
two-PPT-extendible (and, where it applies, non-signaling) superchannels,
which keeps everything semi-definite.

Each bound comes in a general form, posed on the full extension variable,
and a symmetry-reduced form valid when the target is the identity channel.
The general form is deliberately kept free of the tripartite symmetry
machinery so it can serve as an independent oracle for the reduced one.

The distance-to-target is always one half of the diamond norm; the reduced
forms also equal one minus the best entanglement fidelity, which is what
:func:`reconstruct_simulation_channel` exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import LabeledOperator, min_eigenvalue
from .qobjects import ChoiChannel, DensityState, max_entangled_unnormalized
from .sdpmodel import (
    Contract,
    MatrixExpr,
    SdpProblem,
    Sandwich,
    TensorLeft,
    TensorRight,
    Trace,
    Transpose,
    _swap_isometries,
    evaluate,
    quadrant,
    term,
)
from .solver import SolverConfig, SolverResult, solve
from .symbasis import build_sym_basis

__all__ = [
    "BoundResult",
    "diamond_distance_half",
    "root_fidelity",
    "e2pe_general",
    "e2pe_teleport_reduced",
    "cpptp_general",
    "e2pe_superchannel_general",
    "e2pe_qec_reduced",
    "reconstruct_simulation_channel",
    "build_teleport_general",
    "build_teleport_reduced",
    "build_cpptp_general",
    "build_qec_general",
    "build_qec_reduced",
]

# A solved bound may sit a little outside [0, 1] by solver tolerance; values
# beyond this guard indicate a builder or solver defect rather than roundoff.
VALUE_GUARD = 1e-6


@dataclass(frozen=True)
class BoundResult:
    """A solved error bound.

    :param value: the bound, in [0, 1] up to solver tolerance
    :param solver: raw solver outcome, including the primal optimizer
    :param reconstruction: for reduced bounds, the simulating channel's Choi
        operator rebuilt from the optimum
    :param residuals: per-constraint worst violation at the returned primal
    """

    value: float
    solver: SolverResult
    reconstruction: ChoiChannel | None
    residuals: dict[str, float]

    def __post_init__(self) -> None:
        if not -VALUE_GUARD <= self.value <= 1.0 + VALUE_GUARD:
            raise ValueError(f"bound value {self.value} outside [0, 1] guard band")


def _eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def _audit(problem: SdpProblem, assignment: dict[str, np.ndarray]) -> dict[str, float]:
    """Worst violation of every declared constraint at a primal point."""
    out: dict[str, float] = {}
    for name, expr in problem.psd_constraints:
        v = evaluate(expr, assignment, problem.variables)
        out[name] = max(0.0, -min_eigenvalue(v))
    for name, expr in problem.eq_constraints:
        v = evaluate(expr, assignment, problem.variables)
        out[name] = float(np.abs(v.data).max())
    return out


def _solve_bound(
    problem: SdpProblem,
    config: SolverConfig | None,
    reconstruction: "callable | None" = None,
) -> BoundResult:
    res = solve(problem, config)
    residuals = _audit(problem, res.primal)
    if res.status != "optimal":
        # At exactly solvable instances the optimal face is degenerate and the
        # multiplier side stalls; accept anyway when the returned point itself
        # is near-feasible with a closed duality gap.
        worst = max(residuals.values(), default=0.0)
        if not (abs(res.gap) <= 1e-7 and worst <= 1e-7):
            raise RuntimeError(
                f"solver returned status {res.status!r} "
                f"(gap {res.gap:.2e}, residual {worst:.2e})"
            )
    rec = reconstruction(res) if reconstruction is not None else None
    return BoundResult(value=res.value, solver=res, reconstruction=rec, residuals=residuals)


def _single_sub_channel(ch: ChoiChannel, what: str) -> tuple[int, int]:
    if len(ch.in_dims) != 1 or len(ch.out_dims) != 1:
        raise ValueError(f"{what} must have single input and output subsystems, got {ch.in_dims}->{ch.out_dims}")
    return ch.in_dims[0], ch.out_dims[0]


# ---------------------------------------------------------------------------
# diamond distance and root fidelity (used as independent error oracles)


def _check_same_shape(n: ChoiChannel, m: ChoiChannel) -> None:
    if n.in_dims != m.in_dims or n.out_dims != m.out_dims:
        raise ValueError(
            f"channel shapes differ: {n.in_dims}->{n.out_dims} vs {m.in_dims}->{m.out_dims}"
        )


def diamond_distance_half(n: ChoiChannel, m: ChoiChannel, config: SolverConfig | None = None) -> float:
    """One half the diamond-norm distance between two channels."""
    _check_same_shape(n, m)
    rdims, ddims = n.in_dims, n.out_dims
    dr = n.d_in
    zdims = rdims + ddims
    out_subs = tuple(range(len(rdims), len(zdims)))
    p = SdpProblem()
    p.add_variable("mu", ())
    p.add_variable("Z", zdims)
    p.add_psd(MatrixExpr((), (term(1.0, "mu"),)), "mu-nonneg")
    p.add_psd(MatrixExpr(zdims, (term(1.0, "Z"),)), "Z-psd")
    p.add_psd(
        MatrixExpr(
            zdims,
            (term(1.0, "Z"),),
            constant=(m.choi.data - n.choi.data),
        ),
        "dominates-difference",
    )
    p.add_psd(
        MatrixExpr(
            rdims,
            (
                term(1.0, "mu", TensorLeft(_eye(dr), rdims)),
                term(-1.0, "Z", Trace(out_subs)),
            ),
        ),
        "input-marginal",
    )
    p.set_objective([(1.0, "mu", None)], sign=-1.0)
    res = solve(p, config)
    if res.status != "optimal":
        raise RuntimeError(f"diamond SDP status {res.status!r}")
    return float(res.value)


def _support(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis of the support of a PSD matrix and the compression onto it."""
    vals, vecs = np.linalg.eigh(a)
    keep = vals > 1e-12 * max(vals.max(), 1.0)
    basis = vecs[:, keep]
    return basis, basis.conj().T @ a @ basis


def root_fidelity(n: ChoiChannel, m: ChoiChannel, config: SolverConfig | None = None) -> float:
    """Square root of the worst-case channel fidelity between two channels.

    The doubled operator carrying the two Choi matrices on its diagonal is
    compressed onto their supports first; the pinned diagonal blocks are
    then full rank, which keeps the problem strictly feasible even for
    rank-deficient channels such as the identity.
    """
    _check_same_shape(n, m)
    rdims, ddims = n.in_dims, n.out_dims
    r = n.d_in
    dd = n.d_out
    pm, gm = _support(m.choi.data)
    pn, gn = _support(n.choi.data)
    km, kn = gm.shape[0], gn.shape[0]
    k = km + kn
    embed_m = np.zeros((r * dd, k), dtype=np.complex128)
    embed_m[:, :km] = pm
    embed_n = np.zeros((r * dd, k), dtype=np.complex128)
    embed_n[:, km:] = pn
    sel_m = np.zeros((km, k), dtype=np.complex128)
    sel_m[:, :km] = np.eye(km)
    sel_n = np.zeros((kn, k), dtype=np.complex128)
    sel_n[:, km:] = np.eye(kn)

    p = SdpProblem()
    p.add_variable("lam", ())
    p.add_variable("Y", (k,))
    p.add_psd(MatrixExpr((k,), (term(1.0, "Y"),)), "doubled-psd")
    p.add_eq(
        MatrixExpr((km,), (term(1.0, "Y", Sandwich(sel_m)),), constant=-gm),
        "pin-first-block",
    )
    p.add_eq(
        MatrixExpr((kn,), (term(1.0, "Y", Sandwich(sel_n)),), constant=-gn),
        "pin-second-block",
    )
    # Re Tr_D of the cross block, written through the polarization identity
    # A Y B^dag + B Y A^dag = (A+B) Y (A+B)^dag - A Y A^dag - B Y B^dag
    overlap = [term(-1.0, "lam", TensorLeft(_eye(r), (r,)))]
    for idx in range(dd):
        bra = np.zeros((1, dd), dtype=np.complex128)
        bra[0, idx] = 1.0
        pick = np.kron(np.eye(r, dtype=np.complex128), bra)
        a_d = pick @ embed_m
        b_d = pick @ embed_n
        overlap.append(term(0.5, "Y", Sandwich(a_d + b_d)))
        overlap.append(term(-0.5, "Y", Sandwich(a_d)))
        overlap.append(term(-0.5, "Y", Sandwich(b_d)))
    p.add_psd(MatrixExpr((r,), tuple(overlap)), "overlap-dominates")
    p.set_objective([(1.0, "lam", None)], sign=1.0)
    res = solve(p, config)
    if res.status != "optimal":
        raise RuntimeError(f"fidelity SDP status {res.status!r}")
    return float(res.value)


# ---------------------------------------------------------------------------
# general teleportation bound


def build_teleport_general(target: ChoiChannel, rho: DensityState) -> SdpProblem:
    """Two-PPT-extendible simulation error for an arbitrary target channel
    and resource state, posed on the full extension variable.

    Subsystem order of the extension Choi operator M is
    [A, Ahat, Bhat1, B1, Bhat2, B2]; the pair (Bhat1, B1) swaps with
    (Bhat2, B2).
    """
    da, db = _single_sub_channel(target, "target")
    if len(rho.dims) != 2:
        raise ValueError(f"resource state must have two subsystems, got dims {rho.dims}")
    dah, dbh = rho.dims
    mdims = (da, dah, dbh, db, dbh, db)
    p = SdpProblem()
    p.add_variable("mu", ())
    p.add_variable("Z", (da, db))
    mvar = p.add_variable("M", mdims, swap=((2, 3), (4, 5)), swap_sign=1)
    us, ua = _swap_isometries(mvar)

    p.add_psd(MatrixExpr((), (term(1.0, "mu"),)), "mu-nonneg")
    p.add_psd(MatrixExpr((da, db), (term(1.0, "Z"),)), "Z-psd")
    p.add_psd(
        MatrixExpr((us.shape[1],), (term(1.0, "M", Sandwich(us.T)),)), "cp-sym"
    )
    p.add_psd(
        MatrixExpr((ua.shape[1],), (term(1.0, "M", Sandwich(ua.T)),)), "cp-asym"
    )

    # simulation defect: Z dominates the target Choi minus the simulation
    rho_t = rho.op.data.T
    p.add_psd(
        MatrixExpr(
            (da, db),
            (
                term(1.0, "Z"),
                term(1.0 / dbh, "M", Trace((4, 5)), Contract(rho_t, (1, 2))),
            ),
            constant=-target.choi.data,
        ),
        "simulation-defect",
    )
    p.add_psd(
        MatrixExpr(
            (da,),
            (
                term(1.0, "mu", TensorLeft(_eye(da), (da,))),
                term(-1.0, "Z", Trace((1,))),
            ),
        ),
        "input-marginal",
    )

    p.add_eq(
        MatrixExpr(
            (da, dah, dbh, dbh),
            (term(1.0, "M", Trace((3, 5))),),
            constant=-_eye(da * dah * dbh * dbh),
        ),
        "trace-preserving",
    )
    p.add_eq(
        MatrixExpr(
            (da, dah, dbh, db, dbh),
            (
                term(1.0, "M", Trace((5,))),
                term(-1.0 / dbh, "M", Trace((4, 5)), TensorRight(_eye(dbh), (dbh,))),
            ),
        ),
        "extension-marginal",
    )

    p.add_psd(
        MatrixExpr(
            (us.shape[1],), (term(1.0, "M", Transpose((0, 1)), Sandwich(us.T)),)
        ),
        "ppt-alice-sym",
    )
    p.add_psd(
        MatrixExpr(
            (ua.shape[1],), (term(1.0, "M", Transpose((0, 1)), Sandwich(ua.T)),)
        ),
        "ppt-alice-asym",
    )
    p.add_psd(
        MatrixExpr(mdims, (term(1.0, "M", Transpose((4, 5))),)), "ppt-extension"
    )
    p.set_objective([(1.0, "mu", None)], sign=-1.0)
    return p


def e2pe_general(
    target: ChoiChannel, rho: DensityState, config: SolverConfig | None = None
) -> BoundResult:
    """Simulation error of ``target`` from the state ``rho`` under
    two-PPT-extendible one-way protocols; a lower bound on the LOCC error."""
    return _solve_bound(build_teleport_general(target, rho), config)


# ---------------------------------------------------------------------------
# C-PPT-P baseline (no extension variable)


def build_cpptp_general(target: ChoiChannel, rho: DensityState) -> SdpProblem:
    """Simulation error over completely-PPT-preserving bipartite channels.

    The channel variable K takes (A, Ahat, Bhat) to B; PPT holds across the
    Alice/Bob cut, which on the Choi operator is a transpose of the
    (Bhat, B) pair.
    """
    da, db = _single_sub_channel(target, "target")
    if len(rho.dims) != 2:
        raise ValueError(f"resource state must have two subsystems, got dims {rho.dims}")
    dah, dbh = rho.dims
    kdims = (da, dah, dbh, db)
    p = SdpProblem()
    p.add_variable("mu", ())
    p.add_variable("Z", (da, db))
    p.add_variable("K", kdims)
    p.add_psd(MatrixExpr((), (term(1.0, "mu"),)), "mu-nonneg")
    p.add_psd(MatrixExpr((da, db), (term(1.0, "Z"),)), "Z-psd")
    p.add_psd(MatrixExpr(kdims, (term(1.0, "K"),)), "cp")
    p.add_psd(MatrixExpr(kdims, (term(1.0, "K", Transpose((2, 3))),)), "ppt")
    p.add_eq(
        MatrixExpr(
            (da, dah, dbh),
            (term(1.0, "K", Trace((3,))),),
            constant=-_eye(da * dah * dbh),
        ),
        "trace-preserving",
    )
    rho_t = rho.op.data.T
    p.add_psd(
        MatrixExpr(
            (da, db),
            (
                term(1.0, "Z"),
                term(1.0, "K", Contract(rho_t, (1, 2))),
            ),
            constant=-target.choi.data,
        ),
        "simulation-defect",
    )
    p.add_psd(
        MatrixExpr(
            (da,),
            (
                term(1.0, "mu", TensorLeft(_eye(da), (da,))),
                term(-1.0, "Z", Trace((1,))),
            ),
        ),
        "input-marginal",
    )
    p.set_objective([(1.0, "mu", None)], sign=-1.0)
    return p


def cpptp_general(
    target: ChoiChannel, rho: DensityState, config: SolverConfig | None = None
) -> BoundResult:
    """Simulation error over C-PPT-P channels; never above the
    two-PPT-extendible bound."""
    return _solve_bound(build_cpptp_general(target, rho), config)


# ---------------------------------------------------------------------------
# general error-correction bound (superchannel simulation)


def build_qec_general(target: ChoiChannel, resource: ChoiChannel) -> SdpProblem:
    """Two-PPT-extendible non-signaling superchannel simulation error of a
    target channel given one use of a resource channel.

    Same extension variable layout as the teleportation form, plus the
    condition that the outer input A cannot signal the resource input Ahat.
    """
    da, db = _single_sub_channel(target, "target")
    dah, dbh = _single_sub_channel(resource, "resource")
    mdims = (da, dah, dbh, db, dbh, db)
    p = SdpProblem()
    p.add_variable("mu", ())
    p.add_variable("Z", (da, db))
    mvar = p.add_variable("M", mdims, swap=((2, 3), (4, 5)), swap_sign=1)
    us, ua = _swap_isometries(mvar)

    p.add_psd(MatrixExpr((), (term(1.0, "mu"),)), "mu-nonneg")
    p.add_psd(MatrixExpr((da, db), (term(1.0, "Z"),)), "Z-psd")
    p.add_psd(MatrixExpr((us.shape[1],), (term(1.0, "M", Sandwich(us.T)),)), "cp-sym")
    p.add_psd(MatrixExpr((ua.shape[1],), (term(1.0, "M", Sandwich(ua.T)),)), "cp-asym")

    gamma_t = resource.choi.data.T
    p.add_psd(
        MatrixExpr(
            (da, db),
            (
                term(1.0, "Z"),
                term(1.0 / dbh, "M", Trace((4, 5)), Contract(gamma_t, (1, 2))),
            ),
            constant=-target.choi.data,
        ),
        "simulation-defect",
    )
    p.add_psd(
        MatrixExpr(
            (da,),
            (
                term(1.0, "mu", TensorLeft(_eye(da), (da,))),
                term(-1.0, "Z", Trace((1,))),
            ),
        ),
        "input-marginal",
    )

    p.add_eq(
        MatrixExpr(
            (da, dbh, dbh),
            (term(1.0, "M", Trace((1, 3, 5))),),
            constant=-_eye(da * dbh * dbh),
        ),
        "trace-preserving",
    )
    p.add_eq(
        MatrixExpr(
            (da, dah, dbh, db, dbh),
            (
                term(1.0, "M", Trace((5,))),
                term(-1.0 / dbh, "M", Trace((4, 5)), TensorRight(_eye(dbh), (dbh,))),
            ),
        ),
        "extension-marginal",
    )
    p.add_eq(
        MatrixExpr(
            (da, dbh, db, dbh, db),
            (
                term(1.0, "M", Trace((1,))),
                term(-1.0 / da, "M", Trace((0, 1)), TensorLeft(_eye(da), (da,))),
            ),
        ),
        "outer-nonsignaling",
    )

    p.add_psd(
        MatrixExpr((us.shape[1],), (term(1.0, "M", Transpose((0, 1)), Sandwich(us.T)),)),
        "ppt-alice-sym",
    )
    p.add_psd(
        MatrixExpr((ua.shape[1],), (term(1.0, "M", Transpose((0, 1)), Sandwich(ua.T)),)),
        "ppt-alice-asym",
    )
    p.add_psd(MatrixExpr(mdims, (term(1.0, "M", Transpose((4, 5))),)), "ppt-extension")
    p.set_objective([(1.0, "mu", None)], sign=-1.0)
    return p


def e2pe_superchannel_general(
    target: ChoiChannel, resource: ChoiChannel, config: SolverConfig | None = None
) -> BoundResult:
    """Simulation error of ``target`` from one use of ``resource`` under
    two-PPT-extendible non-signaling superchannels."""
    return _solve_bound(build_qec_general(target, resource), config)


# ---------------------------------------------------------------------------
# symmetry-reduced forms (identity target)


def _reduced_labels(d: int) -> tuple[list[str], float]:
    """Variable labels present at target dimension d and sqrt(d^2-1)."""
    basis = build_sym_basis(d)
    labels = ["Mp", "M0", "M1", "M2", "M3"]
    if basis.has_minus:
        labels.insert(1, "Mm")
    return labels, float(np.sqrt(d * d - 1.0))


def _add_reduced_variables(p: SdpProblem, labels: list[str], hdims: tuple[int, int, int]) -> None:
    for name in labels:
        sign = -1 if name in ("M2", "M3") else 1
        p.add_variable(name, hdims, swap=((1,), (2,)), swap_sign=sign)


def _doubled_block(entries: dict[str, list[tuple[complex, str, tuple]]], dims, name, p):
    """PSD block [[B0+B3, B1-iB2], [B1+iB2, B0-B3]] from component term lists."""
    terms = []
    for coeff, var, steps in entries["0"]:
        terms.append(term(coeff, var, *steps, quadrant(0, 0)))
        terms.append(term(coeff, var, *steps, quadrant(1, 1)))
    for coeff, var, steps in entries["3"]:
        terms.append(term(coeff, var, *steps, quadrant(0, 0)))
        terms.append(term(-coeff, var, *steps, quadrant(1, 1)))
    for coeff, var, steps in entries["1"]:
        terms.append(term(coeff, var, *steps, quadrant(0, 1)))
        terms.append(term(coeff, var, *steps, quadrant(1, 0)))
    for coeff, var, steps in entries["2"]:
        terms.append(term(-1j * coeff, var, *steps, quadrant(0, 1)))
        terms.append(term(1j * coeff, var, *steps, quadrant(1, 0)))
    p.add_psd(MatrixExpr((2,) + dims, tuple(terms)), name)


def _reduced_common(p: SdpProblem, d: int, hdims: tuple[int, int, int], has_minus: bool) -> None:
    """Constraint blocks shared by the teleportation and QEC reduced forms:
    positivity of the swap-graded components and both PPT families."""
    root = float(np.sqrt(d * d - 1.0))
    ta = (Transpose((0,)),)
    tab = (Transpose((0, 1)),)

    _doubled_block(
        {
            "0": [(1.0, "M0", ())],
            "3": [(1.0, "M3", ())],
            "1": [(1.0, "M1", ())],
            "2": [(1.0, "M2", ())],
        },
        hdims,
        "cp-block",
        p,
    )
    p.add_psd(MatrixExpr(hdims, (term(1.0, "Mp"),)), "plus-psd")
    if has_minus:
        p.add_psd(MatrixExpr(hdims, (term(1.0, "Mm"),)), "minus-psd")

    # PPT on Alice's resource input alone
    p.add_psd(
        MatrixExpr(
            hdims,
            (
                term(2.0 / (d + 2.0), "Mp", *ta),
                term(1.0, "M0", *ta),
                term(1.0, "M1", *ta),
            ),
        ),
        "ppt-a-plus",
    )
    if has_minus:
        p.add_psd(
            MatrixExpr(
                hdims,
                (
                    term(2.0 / (d - 2.0), "Mm", *ta),
                    term(1.0, "M1", *ta),
                    term(-1.0, "M0", *ta),
                ),
            ),
            "ppt-a-minus",
        )
    kappa = float(np.sqrt(3.0 * (d * d - 1.0))) / 2.0
    g0 = [(1.0, "Mp", ta), (0.5, "M0", ta), (-d / 2.0, "M1", ta)]
    g1 = [(1.0, "Mp", ta), (0.5, "M1", ta), (-d / 2.0, "M0", ta)]
    if has_minus:
        g0.append((1.0, "Mm", ta))
        g1.append((-1.0, "Mm", ta))
    _doubled_block(
        {
            "0": g0,
            "1": g1,
            "2": [(kappa, "M2", ta)],
            "3": [(kappa, "M3", ta)],
        },
        hdims,
        "ppt-a-block",
        p,
    )

    # PPT on the pair (Alice resource input, Bob's first share)
    b1 = [
        (d / (d + 2.0), "Mp", tab),
        (d / 2.0, "M0", tab),
        (-0.5, "M1", tab),
        (-root / 2.0, "M2", tab),
    ]
    if has_minus:
        b1.append((1.0, "Mm", tab))
    p.add_psd(MatrixExpr(hdims, tuple(term(c, v, *s) for c, v, s in b1)), "ppt-b-plus")
    if has_minus:
        b2 = [
            (1.0, "Mp", tab),
            (d / (d - 2.0), "Mm", tab),
            (-d / 2.0, "M0", tab),
            (0.5, "M1", tab),
            (root / 2.0, "M2", tab),
        ]
        p.add_psd(MatrixExpr(hdims, tuple(term(c, v, *s) for c, v, s in b2)), "ppt-b-minus")

    dd = d * d - 1.0
    e0 = [
        (d / dd, "Mp", tab),
        ((d * d - 2.0) / (2.0 * dd), "M0", tab),
        (d / (2.0 * dd), "M1", tab),
        (d * root / (2.0 * dd), "M2", tab),
    ]
    e1 = [
        (-1.0 / dd, "Mp", tab),
        (d / (2.0 * dd), "M0", tab),
        ((2.0 * d * d - 3.0) / (2.0 * dd), "M1", tab),
        (-root / (2.0 * dd), "M2", tab),
    ]
    e2 = [
        (1.0 / root, "Mp", tab),
        (-d / (2.0 * root), "M0", tab),
        (1.0 / (2.0 * root), "M1", tab),
        (-0.5, "M2", tab),
    ]
    if has_minus:
        e0.append((-d / dd, "Mm", tab))
        e1.append((1.0 / dd, "Mm", tab))
        e2.append((-1.0 / root, "Mm", tab))
    _doubled_block(
        {
            "0": e0,
            "1": e1,
            "2": e2,
            "3": [(1.0, "M3", tab)],
        },
        hdims,
        "ppt-b-block",
        p,
    )


def _p_combination(d: int) -> list[tuple[float, str]]:
    root = float(np.sqrt(d * d - 1.0))
    return [(d / (2.0 * d), "M0"), (1.0 / (2.0 * d), "M1"), (root / (2.0 * d), "M2")]


def _add_link_row(p: SdpProblem, combo: list[tuple[float, str]], hdims, dbh: int, name: str) -> None:
    """Equality X = Tr_last[X] (x) I / dbh for a variable combination X."""
    terms = []
    for c, v in combo:
        terms.append(term(c, v))
        terms.append(term(-c / dbh, v, Trace((2,)), TensorRight(_eye(dbh), (dbh,))))
    p.add_eq(MatrixExpr(hdims, tuple(terms)), name)


def build_teleport_reduced(rho: DensityState, d: int) -> SdpProblem:
    """Symmetry-reduced two-PPT-extendible error for teleporting a
    d-dimensional identity channel through the state ``rho``.

    Variables are the six swap-graded components of the twirled extension;
    at d=2 the antisymmetric-sector component is absent and every
    constraint carrying a 1/(d-2) factor is dropped with it.
    """
    if d < 2:
        raise ValueError(f"target dimension must be >= 2, got {d}")
    if len(rho.dims) != 2:
        raise ValueError(f"resource state must have two subsystems, got dims {rho.dims}")
    dah, dbh = rho.dims
    hdims = (dah, dbh, dbh)
    labels, root = _reduced_labels(d)
    has_minus = "Mm" in labels
    p = SdpProblem()
    _add_reduced_variables(p, labels, hdims)
    _reduced_common(p, d, hdims, has_minus)

    # the components form a complete measurement-like family
    comp = [term(1.0, "Mp"), term(1.0, "M0")]
    if has_minus:
        comp.append(term(1.0, "Mm"))
    p.add_eq(
        MatrixExpr(hdims, tuple(comp), constant=-_eye(dah * dbh * dbh)),
        "completeness",
    )
    _add_link_row(p, _p_combination(d), hdims, dbh, "link-reduction")

    w = np.kron(rho.op.data.T, _eye(dbh))
    scale = 1.0 / (2.0 * d * dbh)
    p.set_objective(
        [
            (-d * scale, "M0", w),
            (-1.0 * scale, "M1", w),
            (-root * scale, "M2", w),
        ],
        offset=1.0,
        sign=-1.0,
    )
    return p


def _reduced_reconstruction(d: int):
    def build(res: SolverResult) -> ChoiChannel:
        return _error_mixture_choi(1.0 - res.value, d)

    return build


def e2pe_teleport_reduced(
    rho: DensityState, d: int, config: SolverConfig | None = None
) -> BoundResult:
    """Reduced-form teleportation error bound; agrees with
    :func:`e2pe_general` on an identity target."""
    return _solve_bound(build_teleport_reduced(rho, d), config, _reduced_reconstruction(d))


def build_qec_reduced(resource: ChoiChannel, d: int) -> SdpProblem:
    """Symmetry-reduced two-PPT-extendible non-signaling error for
    simulating a d-dimensional identity channel from one use of
    ``resource``.

    Differs from the teleportation form in three ways: trace preservation
    only pins the resource-input marginal, a second link-reduction row
    appears, and the outer-input non-signaling condition adds trace
    equalities on Alice's resource input.
    """
    if d < 2:
        raise ValueError(f"target dimension must be >= 2, got {d}")
    dah, dbh = _single_sub_channel(resource, "resource")
    hdims = (dah, dbh, dbh)
    labels, root = _reduced_labels(d)
    has_minus = "Mm" in labels
    p = SdpProblem()
    _add_reduced_variables(p, labels, hdims)
    _reduced_common(p, d, hdims, has_minus)

    tp = [term(1.0, "Mp", Trace((0,))), term(1.0, "M0", Trace((0,)))]
    if has_minus:
        tp.append(term(1.0, "Mm", Trace((0,))))
    p.add_eq(
        MatrixExpr((dbh, dbh), tuple(tp), constant=-_eye(dbh * dbh)),
        "trace-preserving",
    )

    _add_link_row(p, _p_combination(d), hdims, dbh, "link-reduction")
    q = [(1.0, "Mp"), (0.5, "M0"), (-1.0 / (2.0 * d), "M1"), (-root / (2.0 * d), "M2")]
    if has_minus:
        q.append((1.0, "Mm"))
    _add_link_row(p, q, hdims, dbh, "link-reduction-complement")

    # outer-input non-signaling, resolved on the swap-graded components
    tr = (Trace((0,)),)
    bdims = (dbh, dbh)
    dd = d * d - 1.0
    row1 = [
        term(2.0 / ((d + 2.0) * (d - 1.0)) - 2.0 / (d * (d + 1.0)), "Mp", *tr),
        term(-1.0 / (d * (d + 1.0)), "M0", *tr),
        term(-1.0 / (d * (d + 1.0)), "M1", *tr),
    ]
    p.add_eq(MatrixExpr(bdims, tuple(row1)), "nonsignaling-plus")
    if has_minus:
        row2 = [
            term(2.0 / ((d - 2.0) * (d + 1.0)) - 2.0 / (d * (d - 1.0)), "Mm", *tr),
            term(-1.0 / (d * (d - 1.0)), "M0", *tr),
            term(1.0 / (d * (d - 1.0)), "M1", *tr),
        ]
        p.add_eq(MatrixExpr(bdims, tuple(row2)), "nonsignaling-minus")
    row3 = [
        term(0.5, "M0", *tr),
        term(1.0 / (d * dd), "Mp", *tr),
        term(1.0 / (d * dd), "M1", *tr),
    ]
    if has_minus:
        row3.append(term(-1.0 / (d * dd), "Mm", *tr))
    p.add_eq(
        MatrixExpr(bdims, tuple(row3), constant=-_eye(dbh * dbh) / dd),
        "nonsignaling-zero",
    )
    row4 = [
        term(0.5 - 1.0 / dd, "M1", *tr),
        term(-1.0 / dd, "Mp", *tr),
    ]
    if has_minus:
        row4.append(term(1.0 / dd, "Mm", *tr))
    p.add_eq(
        MatrixExpr(bdims, tuple(row4), constant=_eye(dbh * dbh) / (d * dd)),
        "nonsignaling-one",
    )
    p.add_eq(MatrixExpr(bdims, (term(1.0, "M2", *tr),)), "nonsignaling-two")
    p.add_eq(MatrixExpr(bdims, (term(1.0, "M3", *tr),)), "nonsignaling-three")

    w = np.kron(resource.choi.data.T, _eye(dbh))
    scale = 1.0 / (2.0 * d * dbh)
    p.set_objective(
        [
            (-d * scale, "M0", w),
            (-1.0 * scale, "M1", w),
            (-root * scale, "M2", w),
        ],
        offset=1.0,
        sign=-1.0,
    )
    return p


def e2pe_qec_reduced(
    resource: ChoiChannel, d: int, config: SolverConfig | None = None
) -> BoundResult:
    """Reduced-form error-correction bound; agrees with
    :func:`e2pe_superchannel_general` on an identity target."""
    return _solve_bound(build_qec_reduced(resource, d), config, _reduced_reconstruction(d))


# ---------------------------------------------------------------------------
# optimal-channel reconstruction


def _error_mixture_choi(ef: float, d: int) -> ChoiChannel:
    ef = min(1.0, max(0.0, float(ef)))
    gamma = max_entangled_unnormalized(d).data
    choi = ef * gamma + (1.0 - ef) * (d * _eye(d * d) - gamma) / (d * d - 1.0)
    return ChoiChannel(LabeledOperator((d, d), choi, hermitian=True), (d,), (d,))


def reconstruct_simulation_channel(result: BoundResult, d: int) -> ChoiChannel:
    """Choi operator of the simulating channel at a reduced-form optimum.

    The optimum is a mixture that applies the identity with the achieved
    entanglement fidelity and otherwise applies the uniform randomizing
    channel, so the whole channel is fixed by the bound value.
    """
    if not result.solver.primal:
        raise ValueError("result carries no optimizer data")
    return _error_mixture_choi(1.0 - result.value, d)
