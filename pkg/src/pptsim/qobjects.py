"""Quantum-information primitives.

States and channels (Choi and Kraus form), Heisenberg-Weyl operators, the
randomizing channel, the superchannel propagation rule and the bilateral
twirl. Choi operators order subsystems as [inputs..., outputs...].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    LabeledOperator,
    kron_compose,
    min_eigenvalue,
    partial_trace,
    permute_subsystems,
)

PSD_ATOL = 1e-9
TP_ATOL = 1e-9


def _as_hermitian(op: LabeledOperator) -> LabeledOperator:
    if op.hermitian:
        return op
    return LabeledOperator(op.dims, op.data, hermitian=True)


@dataclass(frozen=True)
class DensityState:
    """Positive semi-definite unit-trace operator."""

    op: LabeledOperator

    def __post_init__(self) -> None:
        object.__setattr__(self, "op", _as_hermitian(self.op))
        lam = min_eigenvalue(self.op)
        if lam < -PSD_ATOL:
            raise ValueError(f"state has negative eigenvalue {lam:.3e}")
        tr = self.op.trace()
        if abs(tr - 1.0) > TP_ATOL:
            raise ValueError(f"state trace deviates from 1 by {abs(tr - 1.0):.3e}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims


@dataclass(frozen=True)
class ChoiChannel:
    """A channel represented by its Choi operator.

    :param choi: operator with dims ``in_dims + out_dims``
    :param in_dims: input subsystem dimensions
    :param out_dims: output subsystem dimensions

    Construction checks complete positivity (smallest Choi eigenvalue
    >= -1e-9) and trace preservation (Tr over outputs equals the identity
    on the inputs, entrywise within 1e-9).
    """

    choi: LabeledOperator
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        in_dims = tuple(int(d) for d in self.in_dims)
        out_dims = tuple(int(d) for d in self.out_dims)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)
        if self.choi.dims != in_dims + out_dims:
            raise ValueError(
                f"choi dims {self.choi.dims} do not split as {in_dims} + {out_dims}"
            )
        object.__setattr__(self, "choi", _as_hermitian(self.choi))
        lam = min_eigenvalue(self.choi)
        if lam < -PSD_ATOL:
            raise ValueError(f"choi has negative eigenvalue {lam:.3e}: not CP")
        marg = partial_trace(self.choi, range(len(in_dims)), mode="keep")
        dev = float(np.abs(marg.data - np.eye(marg.side)).max())
        if dev > TP_ATOL:
            raise ValueError(f"channel is not TP, marginal deviates by {dev:.3e}")

    @property
    def d_in(self) -> int:
        n = 1
        for d in self.in_dims:
            n *= d
        return n

    @property
    def d_out(self) -> int:
        n = 1
        for d in self.out_dims:
            n *= d
        return n


@dataclass(frozen=True)
class KrausChannel:
    """A channel given by Kraus operators (each out x in)."""

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        ks = tuple(np.asarray(k, dtype=np.complex128) for k in self.kraus)
        if not ks:
            raise ValueError("need at least one Kraus operator")
        shape = ks[0].shape
        if any(k.shape != shape for k in ks):
            raise ValueError("Kraus operators must share a common shape")
        object.__setattr__(self, "kraus", ks)
        s = sum(k.conj().T @ k for k in ks)
        dev = float(np.abs(s - np.eye(shape[1])).max())
        if dev > TP_ATOL:
            raise ValueError(f"Kraus completeness sum deviates from I by {dev:.3e}")


def max_entangled_unnormalized(d: int) -> LabeledOperator:
    """The operator sum_ij |ii><jj| on two d-dimensional factors; trace d."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    v = np.zeros(d * d, dtype=np.complex128)
    v[:: d + 1] = 1.0
    return LabeledOperator((d, d), np.outer(v, v.conj()), hermitian=True)


def heisenberg_weyl(d: int, z: int, x: int) -> np.ndarray:
    """The unitary W^{z,x} = Z(z) X(x).

    Z(z)|k> = exp(2 pi i z k / d)|k> and X(x)|k> = |k + x mod d>.
    """
    if not (0 <= z < d and 0 <= x < d):
        raise ValueError(f"indices (z={z}, x={x}) out of range for d={d}")
    k = np.arange(d)
    phases = np.exp(2j * np.pi * z * k / d)
    w = np.zeros((d, d), dtype=np.complex128)
    w[(k + x) % d, k] = phases[(k + x) % d]
    return w


def choi_from_kraus(k: KrausChannel, in_dims, out_dims) -> ChoiChannel:
    """Choi operator sum_K (I (x) K) Gamma (I (x) K)^dag."""
    in_dims = tuple(int(d) for d in in_dims)
    out_dims = tuple(int(d) for d in out_dims)
    d_in = int(np.prod(in_dims))
    d_out = int(np.prod(out_dims))
    if k.kraus[0].shape != (d_out, d_in):
        raise ValueError(
            f"Kraus shape {k.kraus[0].shape} does not match in {in_dims} -> out {out_dims}"
        )
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for op in k.kraus:
        v = op.T.reshape(-1)  # v[i*d_out + a] = K[a, i]
        choi += np.outer(v, v.conj())
    return ChoiChannel(
        LabeledOperator(in_dims + out_dims, choi, hermitian=True), in_dims, out_dims
    )


def identity_channel(d: int) -> ChoiChannel:
    return ChoiChannel(max_entangled_unnormalized(d), (d,), (d,))


def randomizing_channel_choi(d: int) -> ChoiChannel:
    """The channel averaging over all nontrivial Heisenberg-Weyl conjugations.

    Built from its Kraus operators W^{z,x} / sqrt(d^2 - 1), (z, x) != (0, 0);
    the Choi operator works out to (d I - Gamma) / (d^2 - 1).
    """
    if d < 2:
        raise ValueError(f"randomizing channel needs d >= 2, got {d}")
    scale = 1.0 / np.sqrt(d * d - 1.0)
    ks = [
        scale * heisenberg_weyl(d, z, x)
        for z in range(d)
        for x in range(d)
        if (z, x) != (0, 0)
    ]
    return choi_from_kraus(KrausChannel(tuple(ks)), (d,), (d,))


def apply_channel(c: ChoiChannel, rho: DensityState) -> DensityState:
    """Contract a state through a Choi operator: Tr_in[(rho^T (x) I) Choi]."""
    if rho.dims != c.in_dims:
        raise ValueError(f"state dims {rho.dims} do not match channel input {c.in_dims}")
    n_in = len(c.in_dims)
    weight = kron_compose(
        [
            LabeledOperator(c.in_dims, rho.op.data.T),
            LabeledOperator(c.out_dims, np.eye(c.d_out)),
        ]
    )
    prod = LabeledOperator(c.choi.dims, weight.data @ c.choi.data)
    out = partial_trace(prod, range(n_in), mode="drop")
    return DensityState(_as_hermitian(out))


def propagate_superchannel(gamma_p: ChoiChannel, gamma_n: ChoiChannel) -> ChoiChannel:
    """Choi of the output channel of a superchannel acting on a channel.

    ``gamma_p`` is the Choi of a superchannel taking channels A -> B to
    channels C -> D, ordered [C, B, A, D] (inputs first). ``gamma_n`` is
    the Choi of the argument channel on [A, B]. The output Choi on [C, D]
    is Tr_AB[T_AB(Gamma^N) Gamma^P].
    """
    if len(gamma_n.in_dims) != 1 or len(gamma_n.out_dims) != 1:
        raise ValueError("argument channel must be single-system A -> B")
    if len(gamma_p.in_dims) != 2 or len(gamma_p.out_dims) != 2:
        raise ValueError("superchannel Choi must be ordered [C, B, A, D]")
    d_c, d_b = gamma_p.in_dims
    d_a, d_d = gamma_p.out_dims
    if (d_a, d_b) != (gamma_n.in_dims[0], gamma_n.out_dims[0]):
        raise ValueError(
            f"superchannel slot ({d_a}->{d_b}) does not match channel "
            f"({gamma_n.in_dims[0]}->{gamma_n.out_dims[0]})"
        )
    # T_AB(Gamma^N) reordered to [B, A], then embedded into [C, B, A, D]
    n_t = permute_subsystems(
        LabeledOperator((d_a, d_b), gamma_n.choi.data.T), [1, 0]
    )
    weight = kron_compose(
        [
            LabeledOperator((d_c,), np.eye(d_c)),
            n_t,
            LabeledOperator((d_d,), np.eye(d_d)),
        ]
    )
    prod = LabeledOperator(gamma_p.choi.dims, weight.data @ gamma_p.choi.data)
    out = partial_trace(prod, [1, 2], mode="drop")
    return ChoiChannel(_as_hermitian(out), (d_c,), (d_d,))


def bilateral_twirl(x: LabeledOperator, d: int) -> LabeledOperator:
    """Project onto span{Phi, I - Phi}: the average of (U (x) conj(U))
    conjugations over the unitary group."""
    if x.dims != (d, d):
        raise ValueError(f"expected dims ({d}, {d}), got {x.dims}")
    phi = max_entangled_unnormalized(d).data / d
    rest = np.eye(d * d) - phi
    out = phi * np.trace(phi @ x.data) + rest * (np.trace(rest @ x.data) / (d * d - 1))
    return LabeledOperator((d, d), out, hermitian=x.hermitian)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: Ginibre matrix, QR, phase-normalized R diagonal."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    lam = np.diag(r)
    return q * (lam / np.abs(lam))[None, :]
