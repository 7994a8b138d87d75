"""External conic bridges: triangle orderings, backends, sparse assembly."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pptsim.bounds import build_teleport_general, build_teleport_reduced
from pptsim.external import (
    _step_matrix,
    _var_columns,
    available_backends,
    solve_external,
    solve_external_sparse,
    sparse_cone_data,
)
from pptsim.qobjects import DensityState, identity_channel, max_entangled_unnormalized
from pptsim.resources import mixed_resource, random_density
from pptsim.sdpmodel import (
    Contract,
    MatrixExpr,
    Reorder,
    Sandwich,
    SdpProblem,
    SdpVariable,
    Slice,
    TensorLeft,
    TensorRight,
    Trace,
    Transpose,
    _perm_flat_index,
    term,
)
from pptsim.solver import solve
from pptsim.tensor import LabeledOperator

seeds = st.integers(0, 2**32 - 1)
BACKENDS = available_backends()

# the zero pattern is asymmetric on purpose: any mixup between the two
# triangle stacking orders scrambles this matrix into a different one
_DISCRIMINATOR = np.array(
    [[0.2, 0.5, 0.0], [0.5, -0.3, 0.1], [0.0, 0.1, 0.9]]
)


def _min_eig_problem(m0: np.ndarray) -> SdpProblem:
    """max t subject to m0 - t I >= 0, so the optimum is the least eigenvalue."""
    side = m0.shape[0]
    p = SdpProblem()
    p.add_variable("t", ())
    p.add_psd(
        MatrixExpr(
            (side,),
            (term(-1.0, "t", TensorLeft(np.eye(side, dtype=np.complex128), (side,))),),
            constant=m0.astype(np.complex128),
        )
    )
    p.set_objective([(1.0, "t", None)])
    return p


def _box_problem(w: np.ndarray, var=None) -> SdpProblem:
    """max Tr[w X] over 0 <= X <= I; the optimum sums the positive spectrum."""
    side = w.shape[0]
    p = SdpProblem()
    if var is None:
        p.add_variable("X", (side,))
    else:
        p.add_variable("X", *var)
    p.add_psd(MatrixExpr((side,), (term(1.0, "X"),)))
    p.add_psd(
        MatrixExpr(
            (side,), (term(-1.0, "X"),), constant=np.eye(side, dtype=np.complex128)
        )
    )
    p.set_objective([(1.0, "X", w.astype(np.complex128))])
    return p


@pytest.mark.skipif(not BACKENDS, reason="no external conic solver installed")
def test_backend_listing_prefers_interior_point():
    assert BACKENDS[0] == "clarabel" or "clarabel" not in BACKENDS


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="unknown backend"):
        solve_external(_min_eig_problem(_DISCRIMINATOR), backend="sedumi")


@pytest.mark.parametrize("backend", BACKENDS)
def test_triangle_order_discriminator(backend):
    want = float(np.linalg.eigvalsh(_DISCRIMINATOR)[0])
    r = solve_external(_min_eig_problem(_DISCRIMINATOR), backend=backend, eps=1e-10)
    assert abs(r.value - want) < 1e-7
    rs = solve_external_sparse(_min_eig_problem(_DISCRIMINATOR), backend=backend, eps=1e-10)
    assert abs(rs.value - want) < 1e-7


@pytest.mark.parametrize("backend", BACKENDS)
def test_complex_box_through_real_embedding(backend):
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    w = (a + a.conj().T) / 2
    want = float(np.clip(np.linalg.eigvalsh(w), 0.0, None).sum())
    r = solve_external(_box_problem(w), backend=backend, eps=1e-10)
    assert abs(r.value - want) < 1e-7


@pytest.mark.parametrize("backend", BACKENDS)
def test_equality_rows_map_to_zero_cone(backend):
    # max <w> over density matrices: the top eigenvalue
    rng = np.random.default_rng(8)
    a = rng.standard_normal((3, 3))
    w = (a + a.T) / 2
    p = _box_problem(w)
    p.add_eq(
        MatrixExpr(
            (), (term(1.0, "X", Trace((0,))),), constant=-np.eye(1, dtype=np.complex128)
        )
    )
    r = solve_external(p, backend=backend, eps=1e-10)
    assert abs(r.value - float(np.linalg.eigvalsh(w)[-1])) < 1e-7


# ---------------------------------------------------------------------------
# sparse assembly against the dense framing semantics

_STEPS = [
    (Transpose((0, 2)), (2, 3, 2)),
    (Trace((1,)), (2, 2, 3)),
    (Trace((0, 1)), (2, 3)),
    (Reorder((2, 0, 1)), (2, 3, 2)),
    (TensorLeft(np.array([[0.3, 1.1], [0.0, -0.7]]), (2,)), (3,)),
    (TensorRight(np.array([[0.3, 1.1], [0.0, -0.7]]), (2,)), (3,)),
    (Contract(np.arange(16.0).reshape(4, 4) / 7.0, (0, 2)), (2, 3, 2)),
    (Sandwich(np.arange(12.0).reshape(2, 6) / 5.0), (2, 3)),
    (Slice(0, 1, 0), (2, 3)),
]


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_step_matrices_match_dense_apply(seed):
    rng = np.random.default_rng(seed)
    for step, dims in _STEPS:
        side = int(np.prod(dims))
        x = rng.standard_normal((side, side))
        want = step.apply(x[None].astype(np.complex128), tuple(dims))[0].real
        mat, odims = _step_matrix(step, tuple(dims))
        got = np.asarray(mat @ x.reshape(-1)).reshape(want.shape)
        assert np.abs(got - want).max() < 1e-12, type(step).__name__


@pytest.mark.parametrize("sign", [1, -1])
def test_var_columns_parameterize_graded_symmetric_space(sign):
    var = SdpVariable("Y", (2, 2), swap=((0,), (1,)), swap_sign=sign)
    cols = _var_columns(var).toarray()
    img = _perm_flat_index(var.dims, var.swap)
    perm = np.zeros((4, 4))
    perm[img, np.arange(4)] = 1.0
    rng = np.random.default_rng(3)
    y = cols @ rng.standard_normal(cols.shape[1])
    mat = y.reshape(4, 4)
    assert np.abs(mat - mat.T).max() < 1e-14
    assert np.abs(perm @ mat @ perm.T - sign * mat).max() < 1e-14
    # free parameter count equals the dimension of the graded subspace
    sym_dim = 0
    for i in range(4):
        for j in range(i, 4):
            e = np.zeros((4, 4))
            e[i, j] = e[j, i] = 1.0
            if np.abs((e + sign * perm @ e @ perm.T)).max() > 0:
                sym_dim += 1 if (min(img[i], img[j]), max(img[i], img[j])) >= (i, j) else 0
    assert cols.shape[1] == sym_dim
    assert np.linalg.matrix_rank(cols) == cols.shape[1]


def _diag_state(probs) -> DensityState:
    return DensityState(
        LabeledOperator((len(probs),), np.diag(np.asarray(probs, dtype=complex)))
    )


def test_sparse_assembly_rejects_complex_data():
    rho = mixed_resource(0.3, random_density(2, 11), random_density(2, 12))
    with pytest.raises(ValueError, match="real data"):
        sparse_cone_data(build_teleport_general(identity_channel(2), rho))
    real_rho = mixed_resource(0.3, _diag_state([0.6, 0.4]), _diag_state([0.8, 0.2]))
    with pytest.raises(ValueError, match="real data"):
        sparse_cone_data(build_teleport_reduced(real_rho, 2))


@pytest.mark.skipif("scs" not in BACKENDS, reason="scs not installed")
def test_antisymmetric_grading_box_value():
    # max Tr[W Y] over swap-odd symmetric Y with -I <= Y <= I equals the
    # nuclear norm of the swap-odd part of W; a PSD floor would instead
    # force Y = 0 because swap-odd spectra are symmetric about zero
    rng = np.random.default_rng(17)
    a = rng.standard_normal((4, 4))
    w = (a + a.T) / 2
    img = _perm_flat_index((2, 2), ((0,), (1,)))
    perm = np.zeros((4, 4))
    perm[img, np.arange(4)] = 1.0
    wg = (w - perm @ w @ perm.T) / 2
    want = float(np.abs(np.linalg.eigvalsh(wg)).sum())
    eye = np.eye(4, dtype=np.complex128)
    p = SdpProblem()
    p.add_variable("Y", (2, 2), swap=((0,), (1,)), swap_sign=-1)
    p.add_psd(MatrixExpr((2, 2), (term(-1.0, "Y"),), constant=eye))
    p.add_psd(MatrixExpr((2, 2), (term(1.0, "Y"),), constant=eye))
    p.set_objective([(1.0, "Y", w.astype(np.complex128))])
    internal = solve(p)
    assert internal.status == "optimal"
    assert abs(internal.value - want) < 1e-6
    ext = solve_external_sparse(p, backend="scs", eps=1e-10)
    assert abs(ext.value - want) < 1e-6


@pytest.mark.skipif("scs" not in BACKENDS, reason="scs not installed")
def test_sparse_assembly_matches_internal_on_general_bound():
    phi = max_entangled_unnormalized(2).data / 2.0
    rho = DensityState(
        LabeledOperator((2, 2), 0.7 * phi + 0.3 * np.diag([0.4, 0.1, 0.3, 0.2]))
    )
    prob = build_teleport_general(identity_channel(2), rho)
    internal = solve(prob)
    assert internal.status == "optimal"
    ext = solve_external_sparse(prob, backend="scs", eps=1e-9)
    assert ext.status.startswith("solved")
    assert abs(ext.value - internal.value) < 5e-7
