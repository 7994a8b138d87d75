import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptsim.qobjects import haar_unitary
from pptsim.symbasis import (
    LABELS,
    build_sym_basis,
    partial_trace_identity_residuals,
    transfer_matrices_check,
    tripartite_twirl,
)
from pptsim.tensor import LabeledOperator

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture(scope="module")
def basis2():
    return build_sym_basis(2)


@pytest.fixture(scope="module")
def basis3():
    return build_sym_basis(3)


def test_rejects_small_dimension():
    with pytest.raises(ValueError):
        build_sym_basis(1)


def test_trace_table_d2(basis2):
    assert basis2.s_traces == {"+": 4.0, "-": 0.0, "0": 4.0}
    assert abs(np.trace(basis2.S[0].data) - 4.0) <= 1e-12


def test_trace_table_d3(basis3):
    assert basis3.s_traces == {"+": 15.0, "-": 6.0, "0": 6.0}
    for i, lab in enumerate(("+", "-", "0")):
        assert abs(np.trace(basis3.S[i].data).real - basis3.s_traces[lab]) <= 1e-12


def test_minus_sector_vanishes_at_d2(basis2):
    assert not basis2.has_minus
    assert np.abs(basis2.S[1].data).max() <= 1e-12
    assert np.abs(basis2.R[1].data).max() <= 1e-12


def test_minus_sector_present_at_d3(basis3):
    assert basis3.has_minus
    assert np.abs(basis3.S[1].data).max() > 0.1


def test_z_inverse_d3(basis3):
    assert np.abs(basis3.Z @ basis3.Zinv - np.eye(6)).max() <= 1e-12


@pytest.mark.parametrize("d", [2, 3])
def test_transfer_identities(d):
    res = transfer_matrices_check(build_sym_basis(d))
    assert res["max"] <= 1e-10, res


@pytest.mark.parametrize("d", [2, 3])
def test_partial_trace_identities(d):
    res = partial_trace_identity_residuals(build_sym_basis(d))
    assert res["max"] <= 1e-10, res


def test_plus_minus_zero_are_projectors(basis3):
    for i in range(3):
        m = basis3.S[i].data
        assert np.abs(m @ m - m).max() <= 1e-12


def test_twirl_fixes_basis_elements(basis3):
    s_plus = basis3.S[0]
    out = tripartite_twirl(s_plus, basis3)
    assert np.abs(out.data - s_plus.data).max() <= 1e-11
    eye = LabeledOperator((3, 3, 3), np.eye(27), hermitian=True)
    assert np.abs(tripartite_twirl(eye, basis3).data - np.eye(27)).max() <= 1e-11


def test_twirl_rejects_wrong_dims(basis3):
    with pytest.raises(ValueError):
        tripartite_twirl(LabeledOperator((3, 3), np.eye(9)), basis3)


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_twirl_idempotent_and_trace_preserving(seed, d):
    rng = np.random.default_rng(seed)
    basis = build_sym_basis(d)
    g = rng.normal(size=(d**3, d**3)) + 1j * rng.normal(size=(d**3, d**3))
    x = LabeledOperator((d, d, d), g + g.conj().T, hermitian=True)
    once = tripartite_twirl(x, basis)
    twice = tripartite_twirl(once, basis)
    assert np.abs(once.data - twice.data).max() <= 1e-10
    assert abs(once.trace() - x.trace()) <= 1e-9


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_twirl_invariant_under_group_conjugation(seed):
    rng = np.random.default_rng(seed)
    d = 2
    basis = build_sym_basis(d)
    g = rng.normal(size=(d**3, d**3)) + 1j * rng.normal(size=(d**3, d**3))
    x = g + g.conj().T
    u = haar_unitary(d, rng)
    big = np.kron(u.conj(), np.kron(u, u))
    rotated = big @ x @ big.conj().T
    a = tripartite_twirl(LabeledOperator((d, d, d), x, hermitian=True), basis)
    b = tripartite_twirl(LabeledOperator((d, d, d), rotated, hermitian=True), basis)
    assert np.abs(a.data - b.data).max() <= 1e-9


def test_twirl_output_is_in_invariant_span(basis3):
    """Twirled operators commute with the group action generators."""
    rng = np.random.default_rng(42)
    d = 3
    g = rng.normal(size=(27, 27)) + 1j * rng.normal(size=(27, 27))
    out = tripartite_twirl(LabeledOperator((3, 3, 3), g + g.conj().T, hermitian=True), basis3)
    u = haar_unitary(d, rng)
    big = np.kron(u.conj(), np.kron(u, u))
    assert np.abs(big @ out.data - out.data @ big).max() <= 1e-9
