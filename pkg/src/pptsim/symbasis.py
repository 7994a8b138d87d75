"""Group-invariant operator bases on a tripartite space [A, B1, B2].

Everything lives on three subsystems of equal dimension d. The module
builds the six system-permutation unitaries, the partially transposed
family used for PPT constraints, the S/R/C operator bases that block-
diagonalize twirled SDPs, the 6x6 transfer matrices between those bases,
and the tripartite twirl itself. Basis label order is fixed throughout as
("+", "-", "0", "1", "2", "3").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import LabeledOperator, partial_trace, partial_transpose, permute_subsystems

LABELS = ("+", "-", "0", "1", "2", "3")

# label -> which base operator the trace-orthogonality weight refers to
def _g(i: int) -> int:
    return i if i < 2 else 2


def _perm_operator(d: int, source: tuple[int, int, int]) -> LabeledOperator:
    """Unitary mapping |a0, a1, a2> to |a_source[0], a_source[1], a_source[2]>."""
    side = d**3
    digits = np.indices((d, d, d)).reshape(3, -1)
    out = digits[source[0]] * d * d + digits[source[1]] * d + digits[source[2]]
    u = np.zeros((side, side))
    u[out, np.arange(side)] = 1.0
    return LabeledOperator((d, d, d), u)


def _matrices(d: int):
    s = np.sqrt(d * d - 1.0)
    r3 = np.sqrt(3.0)
    dd = float(d * d - 1)
    y = np.array(
        [
            [0.5, -0.5 / (d + 1), -0.5 / (d + 1), 0.5, -0.5 / (d + 1), -0.5 / (d + 1)],
            [0.5, -0.5 / (d - 1), -0.5 / (d - 1), -0.5, 0.5 / (d - 1), 0.5 / (d - 1)],
            [0, d / dd, d / dd, 0, -1 / dd, -1 / dd],
            [0, -1 / dd, -1 / dd, 0, d / dd, d / dd],
            [0, 1 / s, -1 / s, 0, 0, 0],
            [0, 0, 0, 0, 1j / s, -1j / s],
        ],
        dtype=np.complex128,
    )
    z = np.array(
        [
            [1 / 6] * 6,
            [1 / 6, -1 / 6, -1 / 6, -1 / 6, 1 / 6, 1 / 6],
            [2 / 3, 0, 0, 0, -1 / 3, -1 / 3],
            [0, -1 / 3, -1 / 3, 2 / 3, 0, 0],
            [0, 1 / r3, -1 / r3, 0, 0, 0],
            [0, 0, 0, 0, 1j / r3, -1j / r3],
        ],
        dtype=np.complex128,
    )
    zinv = np.array(
        [
            [1, 1, 1, 0, 0, 0],
            [1, -1, 0, -0.5, r3 / 2, 0],
            [1, -1, 0, -0.5, -r3 / 2, 0],
            [1, -1, 0, 1, 0, 0],
            [1, 1, -0.5, 0, 0, -1j * r3 / 2],
            [1, 1, -0.5, 0, 0, 1j * r3 / 2],
        ],
        dtype=np.complex128,
    )
    yinv = np.array(
        [
            [1, 1, 1, 0, 0, 0],
            [0, 0, d / 2, 0.5, s / 2, 0],
            [0, 0, d / 2, 0.5, -s / 2, 0],
            [1, -1, 0, 1, 0, 0],
            [0, 0, 0.5, d / 2, 0, -1j * s / 2],
            [0, 0, 0.5, d / 2, 0, 1j * s / 2],
        ],
        dtype=np.complex128,
    )
    pperm = np.zeros((6, 6), dtype=np.complex128)
    for row, col in enumerate([0, 3, 1, 2, 4, 5]):
        pperm[row, col] = 1.0
    yzinv = np.array(
        [
            [(d - 1) / (d + 1), 0, (d + 2) / (2 * (d + 1)), (d + 2) / (2 * (d + 1)), 0, 0],
            [0, (d + 1) / (d - 1), (d - 2) / (2 * (d - 1)), -(d - 2) / (2 * (d - 1)), 0, 0],
            [2 / (d + 1), -2 / (d - 1), 1 / dd, -d / dd, 0, 0],
            [2 / (d + 1), 2 / (d - 1), -d / dd, 1 / dd, 0, 0],
            [0, 0, 0, 0, r3 / s, 0],
            [0, 0, 0, 0, 0, r3 / s],
        ],
        dtype=np.complex128,
    )
    ypyi = np.array(
        [
            [
                d / (2 * (d + 1)),
                (d + 2) / (2 * (d + 1)),
                d * (d + 2) / (4 * (d + 1)),
                -(d + 2) / (4 * (d + 1)),
                (d + 2) * s / (4 * (d + 1)),
                0,
            ],
            [
                (d - 2) / (2 * (d - 1)),
                d / (2 * (d - 1)),
                -d * (d - 2) / (4 * (d - 1)),
                (d - 2) / (4 * (d - 1)),
                -(d - 2) * s / (4 * (d - 1)),
                0,
            ],
            [d / dd, -d / dd, (d * d - 2) / (2 * dd), d / (2 * dd), -d / (2 * s), 0],
            [-1 / dd, 1 / dd, d / (2 * dd), (2 * d * d - 3) / (2 * dd), 1 / (2 * s), 0],
            [-1 / s, 1 / s, d / (2 * s), -1 / (2 * s), -0.5, 0],
            [0, 0, 0, 0, 0, 1],
        ],
        dtype=np.complex128,
    )
    return y, z, zinv, yinv, pperm, yzinv, ypyi


@dataclass(frozen=True)
class SymBasis:
    """Invariant bases and transfer matrices at a fixed dimension d.

    ``perms`` holds the plain permutation unitaries in label order
    (I, V_AB1, V_AB2, V_B1B2, cycle A->B1->B2, inverse cycle), ``V`` their
    A-partial-transposes (the PPT family), ``S``/``R``/``C``/``W`` the
    operator bases, and the 6x6 matrices translate coefficient vectors
    between them. ``has_minus`` is False at d = 2 where the "-" sector is
    identically zero.
    """

    d: int
    perms: tuple[LabeledOperator, ...]
    V: tuple[LabeledOperator, ...]
    S: tuple[LabeledOperator, ...]
    R: tuple[LabeledOperator, ...]
    C: tuple[LabeledOperator, ...]
    W: tuple[LabeledOperator, ...]
    Y: np.ndarray
    Z: np.ndarray
    Zinv: np.ndarray
    Yinv: np.ndarray
    Pperm: np.ndarray
    YZinv: np.ndarray
    YPinvYinv: np.ndarray
    s_traces: dict
    r_traces: dict
    proj_sym: LabeledOperator
    proj_asym: LabeledOperator
    has_minus: bool

    def trace_s(self, i: int) -> float:
        """Normalization weight Tr[S^{g(i)}] in the twirl expansion."""
        return self.s_traces[LABELS[_g(i)]]


def build_sym_basis(d: int) -> SymBasis:
    """Construct the full basis family at dimension d >= 2."""
    if d < 2:
        raise ValueError(f"basis needs d >= 2, got {d}")
    sources = [(0, 1, 2), (1, 0, 2), (2, 1, 0), (0, 2, 1), (2, 0, 1), (1, 2, 0)]
    perms = tuple(_perm_operator(d, src) for src in sources)
    vts = tuple(partial_transpose(p, [0]) for p in perms)
    p0, p1, p2, p3, p4, p5 = (p.data for p in perms)
    v1, v2, v4, v5 = vts[1].data, vts[2].data, vts[4].data, vts[5].data
    s = np.sqrt(d * d - 1.0)
    dd = float(d * d - 1)
    dims = (d, d, d)

    def herm(m):
        return LabeledOperator(dims, m, hermitian=True)

    s_ops = (
        herm(0.5 * (p0 + p3 - (v1 + v2 + v4 + v5) / (d + 1))),
        herm(0.5 * (p0 - p3 - (v1 + v2 - v4 - v5) / (d - 1))),
        herm((d * (v1 + v2) - (v4 + v5)) / dd),
        herm((d * (v4 + v5) - (v1 + v2)) / dd),
        herm((v1 - v2) / s),
        herm(1j * (v4 - v5) / s),
    )
    r3 = np.sqrt(3.0)
    r_ops = (
        herm((p0 + p1 + p2 + p3 + p4 + p5) / 6),
        herm((p0 - p1 - p2 - p3 + p4 + p5) / 6),
        herm((2 * p0 - p4 - p5) / 3),
        herm((2 * p3 - p1 - p2) / 3),
        herm((p1 - p2) / r3),
        herm(1j * (p4 - p5) / r3),
    )
    y, z, zinv, yinv, pperm, yzinv, ypyi = _matrices(d)
    # W^j = T_B1(V^{p(j)}) with p read off the rows of Pperm
    psrc = [int(np.argmax(np.abs(pperm[row]))) for row in range(6)]
    w_ops = tuple(partial_transpose(perms[psrc[row]], [1]) for row in range(6))
    c_ops = tuple(permute_subsystems(op, [2, 0, 1]) for op in s_ops)
    s_traces = {
        "+": d * (d + 2) * (d - 1) / 2.0,
        "-": d * (d - 2) * (d + 1) / 2.0,
        "0": 2.0 * d,
    }
    r_traces = {
        "+": d * (d + 1) * (d + 2) / 6.0,
        "-": d * (d - 1) * (d - 2) / 6.0,
        "0": 2.0 * d * (d * d - 1) / 3.0,
    }
    swap2 = np.zeros((d * d, d * d))
    idx = np.indices((d, d)).reshape(2, -1)
    swap2[idx[1] * d + idx[0], np.arange(d * d)] = 1.0
    proj_sym = LabeledOperator((d, d), (np.eye(d * d) + swap2) / 2, hermitian=True)
    proj_asym = LabeledOperator((d, d), (np.eye(d * d) - swap2) / 2, hermitian=True)
    return SymBasis(
        d=d,
        perms=perms,
        V=vts,
        S=s_ops,
        R=r_ops,
        C=c_ops,
        W=w_ops,
        Y=y,
        Z=z,
        Zinv=zinv,
        Yinv=yinv,
        Pperm=pperm,
        YZinv=yzinv,
        YPinvYinv=ypyi,
        s_traces=s_traces,
        r_traces=r_traces,
        proj_sym=proj_sym,
        proj_asym=proj_asym,
        has_minus=d > 2,
    )


def tripartite_twirl(x: LabeledOperator, basis: SymBasis) -> LabeledOperator:
    """Project onto the span of the S-basis.

    Equals the average of (conj(U_A) (x) U_B1 (x) U_B2)-conjugations with
    U_B1 = U_B2 over the unitary group.
    """
    d = basis.d
    if x.dims != (d, d, d):
        raise ValueError(f"expected dims {(d, d, d)}, got {x.dims}")
    out = np.zeros_like(x.data)
    for i, s_op in enumerate(basis.S):
        if i == 1 and not basis.has_minus:
            continue
        out += s_op.data * (np.trace(s_op.data @ x.data) / basis.trace_s(i))
    return LabeledOperator((d, d, d), out, hermitian=x.hermitian)


def transfer_matrices_check(basis: SymBasis) -> dict:
    """Residuals of the change-of-basis identities; all should vanish.

    Checks, entrywise in operator norm terms:
      - S^i against the Y-matrix expansion over the PPT family
      - R^i against the Z-matrix expansion over the plain permutations
      - C^i against the Y-matrix expansion over the W family
      - T_A(S^i) = sum_k [Y Z^-1]_{ik} R^k
      - T_AB1(S^i) = sum_j [Y P^-1 Y^-1]_{ij} C^j
      - matrix-level consistency of the stored transfer matrices
      - the B1<->B2 swap fixes S^{+,-,0,1} and flips S^{2,3}
    """
    res: dict[str, float] = {}

    def expand(mats, coeffs, row):
        return sum(coeffs[row, j] * mats[j].data for j in range(6))

    res["S_vs_Y"] = max(
        float(np.abs(basis.S[i].data - expand(basis.V, basis.Y, i)).max()) for i in range(6)
    )
    res["R_vs_Z"] = max(
        float(np.abs(basis.R[i].data - expand(basis.perms, basis.Z, i)).max())
        for i in range(6)
    )
    res["C_vs_YW"] = max(
        float(np.abs(basis.C[i].data - expand(basis.W, basis.Y, i)).max()) for i in range(6)
    )
    res["TA_S_vs_YZinv_R"] = max(
        float(
            np.abs(
                partial_transpose(basis.S[i], [0]).data - expand(basis.R, basis.YZinv, i)
            ).max()
        )
        for i in range(6)
    )
    res["TAB1_S_vs_YPinvYinv_C"] = max(
        float(
            np.abs(
                partial_transpose(basis.S[i], [0, 1]).data
                - expand(basis.C, basis.YPinvYinv, i)
            ).max()
        )
        for i in range(6)
    )
    eye6 = np.eye(6)
    res["Z_Zinv"] = float(np.abs(basis.Z @ basis.Zinv - eye6).max())
    res["Y_Yinv"] = float(np.abs(basis.Y @ basis.Yinv - eye6).max())
    res["YZinv_product"] = float(np.abs(basis.Y @ basis.Zinv - basis.YZinv).max())
    res["YPinvYinv_product"] = float(
        np.abs(basis.Y @ np.linalg.inv(basis.Pperm) @ basis.Yinv - basis.YPinvYinv).max()
    )
    swap = basis.perms[3].data
    flip = [1, 1, 1, 1, -1, -1]
    res["swap_B1B2"] = max(
        float(np.abs(swap @ basis.S[i].data @ swap - flip[i] * basis.S[i].data).max())
        for i in range(6)
    )
    res["max"] = max(v for k, v in res.items() if k != "max")
    return res


def partial_trace_identity_residuals(basis: SymBasis) -> dict:
    """Residuals of the closed-form partial traces of the S-basis."""
    d = basis.d
    s = np.sqrt(d * d - 1.0)
    dd = float(d * d - 1)
    eye_a = np.eye(d)
    phi = np.zeros(d * d, dtype=np.complex128)
    phi[:: d + 1] = 1.0
    phi = np.outer(phi, phi.conj()) / d
    rest = np.eye(d * d) - phi
    res: dict[str, float] = {}

    def tr(i, keep):
        return partial_trace(basis.S[i], keep, mode="keep").data

    # over both B systems
    full = [
        (d + 2) * (d - 1) / 2 * eye_a,
        (d - 2) * (d + 1) / 2 * eye_a,
        2 * eye_a,
        np.zeros((d, d)),
        np.zeros((d, d)),
        np.zeros((d, d)),
    ]
    res["trace_B1B2"] = max(
        float(np.abs(tr(i, [0]) - full[i]).max()) for i in range(6)
    )
    # over B2 only
    b2 = [
        d * (d + 2) / (2 * (d + 1)) * rest,
        d * (d - 2) / (2 * (d - 1)) * rest,
        (d / dd) * rest + d * phi,
        phi - rest / dd,
        s * phi - rest / s,
        np.zeros((d * d, d * d)),
    ]
    res["trace_B2"] = max(float(np.abs(tr(i, [0, 1]) - b2[i]).max()) for i in range(6))
    # over A only
    ps, pa = basis.proj_sym.data, basis.proj_asym.data
    a_only = [
        (d + 2) * (d - 1) / (d + 1) * ps,
        (d - 2) * (d + 1) / (d - 1) * pa,
        2 / (d + 1) * ps + 2 / (d - 1) * pa,
        2 / (d + 1) * ps - 2 / (d - 1) * pa,
        np.zeros((d * d, d * d)),
        np.zeros((d * d, d * d)),
    ]
    res["trace_A"] = max(float(np.abs(tr(i, [1, 2]) - a_only[i]).max()) for i in range(6))
    # projector resolutions on B1B2
    s0, s1 = basis.S[2].data, basis.S[3].data
    res["proj_sym_resolution"] = float(
        np.abs(np.kron(eye_a, ps) - (basis.S[0].data + 0.5 * (s0 + s1))).max()
    )
    res["proj_asym_resolution"] = float(
        np.abs(np.kron(eye_a, pa) - (basis.S[1].data + 0.5 * (s0 - s1))).max()
    )
    # completeness and trace table
    res["completeness"] = float(
        np.abs(basis.S[0].data + basis.S[1].data + basis.S[2].data - np.eye(d**3)).max()
    )
    res["R_completeness"] = float(
        np.abs(basis.R[0].data + basis.R[1].data + basis.R[2].data - np.eye(d**3)).max()
    )
    res["trace_table"] = max(
        abs(float(np.trace(basis.S[i].data).real) - basis.s_traces[LABELS[i]])
        for i in range(3)
    )
    res["R_trace_table"] = max(
        abs(float(np.trace(basis.R[i].data).real) - basis.r_traces[LABELS[i]])
        for i in range(3)
    )
    # trace orthogonality <S^i, S^j> = Tr[S^{g(i)}] delta_ij
    gram = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            gram[i, j] = float(np.trace(basis.S[i].data @ basis.S[j].data).real)
    expect = np.diag([basis.trace_s(i) for i in range(6)])
    res["orthogonality"] = float(np.abs(gram - expect).max())
    res["max"] = max(v for k, v in res.items() if k != "max")
    return res
