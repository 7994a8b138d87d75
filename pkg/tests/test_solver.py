"""Interior-point solver on a small library of analytically solvable SDPs."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pptsim.sdpmodel import (
    MatrixExpr,
    SdpProblem,
    TensorLeft,
    Trace,
    compile_problem,
    embed_real,
    term,
)
from pptsim.solver import SolverConfig, SolverResult, solve

seeds = st.integers(0, 2**32 - 1)


def _scalar_bound():
    """T1: max t s.t. I - t I >= 0 on a 2x2 block; optimum 1."""
    p = SdpProblem()
    p.add_variable("t", ())
    p.add_psd(
        MatrixExpr(
            (2,),
            (term(-1.0, "t", TensorLeft(np.eye(2, dtype=complex), (2,))),),
            constant=np.eye(2, dtype=complex),
        )
    )
    p.set_objective([(1.0, "t", None)])
    return p


def _trace_one():
    """T2: max <diag(1,-1), X> s.t. Tr X = 1, X >= 0; optimum 1."""
    p = SdpProblem()
    p.add_variable("X", (2,))
    p.add_psd(MatrixExpr((2,), (term(1.0, "X"),)))
    p.add_eq(
        MatrixExpr((), (term(1.0, "X", Trace((0,))),), constant=-np.ones((1, 1)))
    )
    p.set_objective([(1.0, "X", np.diag([1.0, -1.0]).astype(complex))])
    return p


def _min_eig():
    """T3: smallest eigenvalue of [[2, i], [-i, 2]] as max t with A - tI >= 0;
    optimum 1."""
    a = np.array([[2.0, 1j], [-1j, 2.0]])
    p = SdpProblem()
    p.add_variable("t", ())
    p.add_psd(
        MatrixExpr(
            (2,),
            (term(-1.0, "t", TensorLeft(np.eye(2, dtype=complex), (2,))),),
            constant=a,
        )
    )
    p.set_objective([(1.0, "t", None)])
    return p


def _coupled_scalars():
    """T4: max x s.t. diag(1-x-y, x, y) >= 0 and y = 2x; optimum 1/3."""
    p = SdpProblem()
    p.add_variable("x", ())
    p.add_variable("y", ())
    c0 = np.diag([1.0, 0.0, 0.0]).astype(complex)
    gx = np.diag([-1.0, 1.0, 0.0]).astype(complex)
    gy = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    p.add_psd(
        MatrixExpr(
            (3,),
            (term(1.0, "x", TensorLeft(gx, (3,))), term(1.0, "y", TensorLeft(gy, (3,)))),
            constant=c0,
        )
    )
    p.add_eq(MatrixExpr((), (term(1.0, "y"), term(-2.0, "x"))))
    p.set_objective([(1.0, "x", None)])
    return p


def _marginal_overlap():
    """T5: max <Phi, X> s.t. Tr_B X = I/2, X >= 0, with Phi the normalized
    maximally entangled projector; optimum 1."""
    phi = np.zeros((4, 4), dtype=complex)
    v = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
    phi += np.outer(v, v)
    p = SdpProblem()
    p.add_variable("X", (2, 2))
    p.add_psd(MatrixExpr((2, 2), (term(1.0, "X"),)))
    p.add_eq(
        MatrixExpr(
            (2,),
            (term(1.0, "X", Trace((1,))),),
            constant=-0.5 * np.eye(2, dtype=complex),
        )
    )
    p.set_objective([(1.0, "X", phi)])
    return p


TOYS = [
    (_scalar_bound, 1.0),
    (_trace_one, 1.0),
    (_min_eig, 1.0),
    (_coupled_scalars, 1.0 / 3.0),
    (_marginal_overlap, 1.0),
]


@pytest.mark.parametrize("make,expect", TOYS)
def test_toy_values(make, expect):
    res = solve(make())
    assert res.status == "optimal"
    assert abs(res.value - expect) < 1e-7
    assert res.gap <= SolverConfig().gap_tol


@pytest.mark.parametrize("make,expect", TOYS)
def test_toy_values_after_real_embedding(make, expect):
    res = solve(embed_real(make()))
    assert res.status == "optimal"
    assert abs(res.value - expect) < 1e-7


@pytest.mark.parametrize("make,_", TOYS)
def test_weak_duality_slack(make, _):
    res = solve(make())
    assert res.info["dual_obj"] >= res.info["primal_obj"] - 1e-6


def test_deterministic_reruns():
    r1 = solve(_marginal_overlap())
    r2 = solve(_marginal_overlap())
    assert r1.iters == r2.iters
    assert np.abs(r1.y - r2.y).max() <= 1e-10
    assert abs(r1.value - r2.value) <= 1e-10


def test_primal_matrices_are_reconstructed():
    res = solve(_trace_one())
    x = res.primal["X"]
    assert x.shape == (2, 2)
    assert abs(np.trace(x).real - 1.0) < 1e-6
    # optimum concentrates on the +1 eigenvector of the weight
    assert abs(x[0, 0].real - 1.0) < 1e-5


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(step_fraction=1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)


def test_no_blocks_rejected():
    p = SdpProblem()
    p.add_variable("x", ())
    p.set_objective([(1.0, "x", None)])
    with pytest.raises(ValueError):
        solve(p)


def test_infeasible_problem_flagged():
    # x >= 1 and -x >= 0 cannot both hold
    p = SdpProblem()
    p.add_variable("x", ())
    p.add_psd(
        MatrixExpr((), (term(1.0, "x"),), constant=-np.ones((1, 1), dtype=complex))
    )
    p.add_psd(MatrixExpr((), (term(-1.0, "x"),)))
    p.set_objective([(1.0, "x", None)])
    res = solve(p, SolverConfig(max_iters=60))
    assert res.status != "optimal"


def test_unbounded_problem_flagged():
    p = SdpProblem()
    p.add_variable("x", ())
    p.add_psd(MatrixExpr((), (term(1.0, "x"),)))
    p.set_objective([(1.0, "x", None)])
    res = solve(p, SolverConfig(max_iters=60))
    assert res.status != "optimal"


def test_max_iters_status():
    res = solve(_marginal_overlap(), SolverConfig(max_iters=2))
    assert res.status in ("max_iters", "optimal")
    assert res.iters <= 2


@given(seeds)
@settings(max_examples=15, deadline=None)
def test_smallest_eigenvalue_agrees_with_eigh(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    a = (a + a.conj().T) / 2
    p = SdpProblem()
    p.add_variable("t", ())
    p.add_psd(
        MatrixExpr(
            (3,),
            (term(-1.0, "t", TensorLeft(np.eye(3, dtype=complex), (3,))),),
            constant=a,
        )
    )
    p.set_objective([(1.0, "t", None)])
    res = solve(p)
    assert res.status == "optimal"
    assert abs(res.value - np.linalg.eigvalsh(a)[0]) < 1e-6


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_equality_constrained_random_diagonal(seed):
    # max c.z with z on the simplex (diagonal X): matches max over c
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1.0, 1.0, size=3)
    p = SdpProblem()
    p.add_variable("X", (3,))
    p.add_psd(MatrixExpr((3,), (term(1.0, "X"),)))
    p.add_eq(
        MatrixExpr((), (term(1.0, "X", Trace((0,))),), constant=-np.ones((1, 1)))
    )
    # off-diagonal entries do not enter the objective; the optimum still
    # concentrates all trace on the largest coefficient
    p.set_objective([(1.0, "X", np.diag(c).astype(complex))])
    res = solve(p)
    assert res.status == "optimal"
    assert abs(res.value - c.max()) < 1e-6
