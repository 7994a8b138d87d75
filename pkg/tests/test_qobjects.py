import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptsim.qobjects import (
    ChoiChannel,
    DensityState,
    KrausChannel,
    apply_channel,
    bilateral_twirl,
    choi_from_kraus,
    haar_unitary,
    heisenberg_weyl,
    identity_channel,
    max_entangled_unnormalized,
    propagate_superchannel,
    randomizing_channel_choi,
)
from pptsim.tensor import LabeledOperator, kron_compose, partial_trace, permute_subsystems

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _rand_state(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return DensityState(LabeledOperator((d,), rho / np.trace(rho), hermitian=True))


def _rand_kraus(rng, d_in, d_out, n=2):
    gs = [
        rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))
        for _ in range(n)
    ]
    s = sum(g.conj().T @ g for g in gs)
    evals, vecs = np.linalg.eigh(s)
    s_isqrt = (vecs / np.sqrt(evals)) @ vecs.conj().T
    return KrausChannel(tuple(g @ s_isqrt for g in gs))


def _product_comb(pre: ChoiChannel, post: ChoiChannel) -> ChoiChannel:
    """Superchannel Choi on [C, B, A, D] for independent pre (C->A) and post (B->D)."""
    big = kron_compose([pre.choi, post.choi])  # [C, A, B, D]
    reordered = permute_subsystems(big, [0, 2, 1, 3])
    return ChoiChannel(
        reordered, (pre.in_dims[0], post.in_dims[0]), (pre.out_dims[0], post.out_dims[0])
    )


def test_density_state_rejects_bad_trace():
    with pytest.raises(ValueError):
        DensityState(LabeledOperator((2,), np.eye(2)))


def test_density_state_rejects_negative():
    with pytest.raises(ValueError):
        DensityState(LabeledOperator((2,), np.diag([1.5, -0.5])))


def test_choi_channel_rejects_non_tp():
    with pytest.raises(ValueError):
        ChoiChannel(LabeledOperator((2, 2), np.eye(4)), (2,), (2,))


def test_kraus_channel_rejects_incomplete():
    with pytest.raises(ValueError):
        KrausChannel((np.array([[1.0, 0.0], [0.0, 0.5]]),))


def test_max_entangled_trivial():
    assert np.array_equal(max_entangled_unnormalized(1).data, [[1.0]])
    g = max_entangled_unnormalized(2)
    assert np.allclose(g.data @ g.data, 2 * g.data)
    d3 = max_entangled_unnormalized(3)
    assert np.allclose(partial_trace(d3, [0], mode="keep").data, np.eye(3))


def test_heisenberg_weyl_qubit_table():
    assert np.allclose(heisenberg_weyl(2, 1, 0), np.diag([1.0, -1.0]))
    assert np.allclose(heisenberg_weyl(2, 0, 1), np.array([[0, 1], [1, 0]]))
    assert np.allclose(heisenberg_weyl(2, 1, 1), np.array([[0, 1], [-1, 0]]))
    assert np.allclose(heisenberg_weyl(3, 0, 0), np.eye(3))


def test_heisenberg_weyl_rejects_out_of_range():
    with pytest.raises(ValueError):
        heisenberg_weyl(2, 2, 0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.data())
def test_heisenberg_weyl_unitary(d, data):
    z = data.draw(st.integers(min_value=0, max_value=d - 1))
    x = data.draw(st.integers(min_value=0, max_value=d - 1))
    w = heisenberg_weyl(d, z, x)
    assert np.allclose(w.conj().T @ w, np.eye(d), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_heisenberg_weyl_completeness(seed, d):
    rng = np.random.default_rng(seed)
    rho = _rand_state(rng, d).op.data
    avg = sum(
        heisenberg_weyl(d, z, x) @ rho @ heisenberg_weyl(d, z, x).conj().T
        for z in range(d)
        for x in range(d)
    ) / (d * d)
    assert np.abs(avg - np.trace(rho) * np.eye(d) / d).max() <= 1e-10


@pytest.mark.parametrize("d", [2, 3, 4])
def test_randomizing_choi_closed_form(d):
    choi = randomizing_channel_choi(d).choi.data
    gamma = max_entangled_unnormalized(d).data
    expect = (d * np.eye(d * d) - gamma) / (d * d - 1)
    assert np.abs(choi - expect).max() <= 1e-12


def test_randomizing_choi_orthogonal_to_gamma():
    d = 3
    choi = randomizing_channel_choi(d).choi.data
    gamma = max_entangled_unnormalized(d).data
    assert abs(np.trace(gamma @ choi)) <= 1e-12


def test_randomizing_rejects_small_d():
    with pytest.raises(ValueError):
        randomizing_channel_choi(1)


def test_choi_from_kraus_identity_and_unitary():
    d = 3
    ident = choi_from_kraus(KrausChannel((np.eye(d),)), (d,), (d,))
    assert np.allclose(ident.choi.data, max_entangled_unnormalized(d).data)
    rng = np.random.default_rng(0)
    u = haar_unitary(d, rng)
    got = choi_from_kraus(KrausChannel((u,)), (d,), (d,)).choi.data
    iu = np.kron(np.eye(d), u)
    expect = iu @ max_entangled_unnormalized(d).data @ iu.conj().T
    assert np.allclose(got, expect, atol=1e-12)


def test_choi_from_kraus_depolarizing_is_replacer():
    d = 2
    ks = tuple(
        heisenberg_weyl(d, z, x) / d for z in range(d) for x in range(d)
    )
    got = choi_from_kraus(KrausChannel(ks), (d,), (d,)).choi.data
    assert np.allclose(got, np.eye(d * d) / d, atol=1e-12)


def test_apply_identity_channel_is_noop():
    rng = np.random.default_rng(3)
    rho = _rand_state(rng, 3)
    out = apply_channel(identity_channel(3), rho)
    assert np.allclose(out.op.data, rho.op.data, atol=1e-12)


def test_apply_randomizing_matches_kraus_enumeration():
    d = 2
    chan = randomizing_channel_choi(d)
    rho = DensityState(LabeledOperator((2,), np.diag([1.0, 0.0]), hermitian=True))
    got = apply_channel(chan, rho).op.data
    ws = [heisenberg_weyl(2, 1, 0), heisenberg_weyl(2, 0, 1), heisenberg_weyl(2, 1, 1)]
    expect = sum(w @ rho.op.data @ w.conj().T for w in ws) / 3
    assert np.allclose(got, expect, atol=1e-12)
    assert np.allclose(got, np.diag([1 / 3, 2 / 3]), atol=1e-12)


def test_apply_replacer_choi():
    d = 3
    rep = ChoiChannel(
        LabeledOperator((d, d), np.kron(np.eye(d), np.eye(d) / d), hermitian=True),
        (d,),
        (d,),
    )
    rng = np.random.default_rng(5)
    out = apply_channel(rep, _rand_state(rng, d))
    assert np.allclose(out.op.data, np.eye(d) / d, atol=1e-12)


def test_propagate_identity_superchannel():
    rng = np.random.default_rng(9)
    d = 2
    n = choi_from_kraus(_rand_kraus(rng, d, d), (d,), (d,))
    comb = _product_comb(identity_channel(d), identity_channel(d))
    out = propagate_superchannel(comb, n)
    assert np.allclose(out.choi.data, n.choi.data, atol=1e-10)


def test_propagate_pre_post_unitaries():
    rng = np.random.default_rng(13)
    d = 2
    u = haar_unitary(d, rng)
    v = haar_unitary(d, rng)
    n = choi_from_kraus(_rand_kraus(rng, d, d), (d,), (d,))
    comb = _product_comb(
        choi_from_kraus(KrausChannel((u,)), (d,), (d,)),
        choi_from_kraus(KrausChannel((v,)), (d,), (d,)),
    )
    got = propagate_superchannel(comb, n)
    # sequential composition oracle: K(rho) = V N(U rho U^dag) V^dag
    rho_tests = [_rand_state(np.random.default_rng(s), d) for s in range(4)]
    for rho in rho_tests:
        lhs = apply_channel(got, rho).op.data
        inner = apply_channel(
            n,
            DensityState(
                LabeledOperator((d,), u @ rho.op.data @ u.conj().T, hermitian=True)
            ),
        ).op.data
        rhs = v @ inner @ v.conj().T
        assert np.allclose(lhs, rhs, atol=1e-10)


def test_propagate_sequential_composition():
    rng = np.random.default_rng(21)
    d = 2
    pre = _rand_kraus(rng, d, d)
    post = _rand_kraus(rng, d, d)
    comb = _product_comb(
        choi_from_kraus(pre, (d,), (d,)), choi_from_kraus(post, (d,), (d,))
    )
    got = propagate_superchannel(comb, identity_channel(d))
    composed = KrausChannel(
        tuple(kb @ ka for kb in post.kraus for ka in pre.kraus)
    )
    expect = choi_from_kraus(composed, (d,), (d,))
    assert np.allclose(got.choi.data, expect.choi.data, atol=1e-10)


def test_propagate_output_is_tp():
    rng = np.random.default_rng(31)
    d = 2
    comb = _product_comb(
        choi_from_kraus(_rand_kraus(rng, d, d), (d,), (d,)),
        choi_from_kraus(_rand_kraus(rng, d, d), (d,), (d,)),
    )
    n = choi_from_kraus(_rand_kraus(rng, d, d), (d,), (d,))
    out = propagate_superchannel(comb, n)  # ChoiChannel construction checks TP
    marg = partial_trace(out.choi, [0], mode="keep")
    assert np.abs(marg.data - np.eye(d)).max() <= 1e-9


def test_bilateral_twirl_fixed_points():
    d = 3
    phi = max_entangled_unnormalized(d).data / d
    out = bilateral_twirl(LabeledOperator((d, d), phi, hermitian=True), d)
    assert np.allclose(out.data, phi, atol=1e-12)
    eye = LabeledOperator((d, d), np.eye(d * d), hermitian=True)
    assert np.allclose(bilateral_twirl(eye, d).data, np.eye(d * d), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_bilateral_twirl_idempotent_trace_preserving(seed, d):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    x = LabeledOperator((d, d), g + g.conj().T, hermitian=True)
    once = bilateral_twirl(x, d)
    twice = bilateral_twirl(once, d)
    assert np.allclose(once.data, twice.data, atol=1e-11)
    assert abs(once.trace() - x.trace()) <= 1e-10


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_bilateral_twirl_invariant_under_uu_conjugation(seed):
    rng = np.random.default_rng(seed)
    d = 3
    g = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    x = g + g.conj().T
    u = haar_unitary(d, rng)
    big = np.kron(u, u.conj())
    rotated = big @ x @ big.conj().T
    a = bilateral_twirl(LabeledOperator((d, d), x, hermitian=True), d)
    b = bilateral_twirl(LabeledOperator((d, d), rotated, hermitian=True), d)
    assert np.abs(a.data - b.data).max() <= 1e-10
