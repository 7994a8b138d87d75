"""Dense operators on multipartite tensor-product spaces.

Every operator carries an ordered tuple of subsystem dimensions next to
its matrix, so partial traces, partial transposes and subsystem
permutations can be phrased in terms of subsystem indices. Indexing is
0-based with the leftmost Kronecker factor at index 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class LabeledOperator:
    """A complex square matrix together with its tensor factorization.

    :param dims: ordered subsystem dimensions; their product is the matrix side
    :param data: complex matrix, copied and frozen on construction
    :param hermitian: when True the matrix is checked to be Hermitian
        (entrywise tolerance ``HERMITIAN_ATOL``) and operations that
        preserve Hermiticity propagate the flag
    """

    dims: tuple[int, ...]
    data: np.ndarray
    hermitian: bool = False

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)
        data = np.array(self.data, dtype=np.complex128)
        side = 1
        for d in dims:
            side *= d
        if data.shape != (side, side):
            raise ValueError(
                f"matrix shape {data.shape} does not match dims {dims} (side {side})"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.hermitian:
            dev = float(np.abs(data - data.conj().T).max())
            if dev > HERMITIAN_ATOL:
                raise ValueError(f"operator marked hermitian deviates by {dev:.3e}")

    @property
    def side(self) -> int:
        return self.data.shape[0]

    def tensor_view(self) -> np.ndarray:
        """Reshape to a rank-2k tensor, row indices first, then column indices."""
        return self.data.reshape(self.dims + self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))


def _as_index_set(indices: Iterable[int], n: int) -> tuple[int, ...]:
    idx = tuple(sorted({int(i) for i in indices}))
    for i in idx:
        if i < 0 or i >= n:
            raise IndexError(f"subsystem index {i} out of range for {n} subsystems")
    return idx


def kron_compose(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    """Kronecker product in the given order; dims concatenate."""
    if not ops:
        raise ValueError("kron_compose needs at least one operator")
    data = ops[0].data
    for op in ops[1:]:
        data = np.kron(data, op.data)
    dims = tuple(d for op in ops for d in op.dims)
    return LabeledOperator(dims, data, hermitian=all(op.hermitian for op in ops))


def partial_trace(
    x: LabeledOperator, keep_or_drop: Iterable[int], mode: str = "drop"
) -> LabeledOperator:
    """Trace out subsystems.

    ``mode="drop"`` traces out the listed subsystems, ``mode="keep"``
    retains exactly the listed ones. Surviving subsystems keep their
    original order. Tracing everything leaves a 1x1 operator with empty
    dims.
    """
    n = len(x.dims)
    idx = _as_index_set(keep_or_drop, n)
    if mode == "drop":
        drop = set(idx)
    elif mode == "keep":
        drop = set(range(n)) - set(idx)
    else:
        raise ValueError(f"mode must be 'keep' or 'drop', got {mode!r}")
    keep = [i for i in range(n) if i not in drop]
    row_labels = list(range(n))
    col_labels = [i if i in drop else n + i for i in range(n)]
    out_labels = keep + [n + i for i in keep]
    out = np.einsum(x.tensor_view(), row_labels + col_labels, out_labels)
    dims = tuple(x.dims[i] for i in keep)
    side = 1
    for d in dims:
        side *= d
    return LabeledOperator(dims, out.reshape(side, side), hermitian=x.hermitian)


def partial_transpose(x: LabeledOperator, subsystems: Iterable[int]) -> LabeledOperator:
    """Transpose the listed subsystems in the computational basis. Involutive."""
    n = len(x.dims)
    subs = _as_index_set(subsystems, n)
    axes = list(range(2 * n))
    for i in subs:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    t = x.tensor_view().transpose(axes)
    return LabeledOperator(x.dims, t.reshape(x.side, x.side), hermitian=x.hermitian)


def permute_subsystems(x: LabeledOperator, perm: Sequence[int]) -> LabeledOperator:
    """Reorder tensor factors: output factor ``j`` is input factor ``perm[j]``.

    The spectrum is preserved; only the basis is reindexed.
    """
    n = len(x.dims)
    p = [int(i) for i in perm]
    if sorted(p) != list(range(n)):
        raise ValueError(f"perm {perm} is not a permutation of 0..{n - 1}")
    axes = p + [n + i for i in p]
    t = x.tensor_view().transpose(axes)
    dims = tuple(x.dims[i] for i in p)
    return LabeledOperator(dims, t.reshape(x.side, x.side), hermitian=x.hermitian)


def min_eigenvalue(x: LabeledOperator) -> float:
    """Smallest eigenvalue of a Hermitian operator."""
    dev = float(np.abs(x.data - x.data.conj().T).max())
    if dev > HERMITIAN_ATOL:
        raise ValueError(f"min_eigenvalue needs a Hermitian input, deviation {dev:.3e}")
    return float(np.linalg.eigvalsh(x.data)[0])


def hs_inner(a: LabeledOperator, b: LabeledOperator) -> complex:
    """Hilbert-Schmidt inner product Tr[a^dag b]."""
    return complex(np.vdot(a.data, b.data))
