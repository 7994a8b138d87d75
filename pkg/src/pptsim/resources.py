"""Resource states and channels used in sweeps and tests.

Everything here is a small deterministic generator: mixed isotropic-like
states, truncated two-mode squeezed vacuum, multi-level amplitude damping,
and seeded Ginibre density matrices.  Sweep grids are described by
:class:`SweepSpec` and expanded into concrete instances by
:func:`sweep_points` / :func:`build_instance`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import LabeledOperator, kron_compose
from .qobjects import DensityState, KrausChannel, max_entangled_unnormalized

__all__ = [
    "SweepSpec",
    "mixed_resource",
    "tmsv_truncated",
    "amp_damp3",
    "amp_damp_qubit",
    "dephasing_qubit",
    "replacer_channel",
    "random_density",
    "sweep_points",
    "build_instance",
]


def mixed_resource(p: float, sigma_a: DensityState, sigma_b: DensityState) -> DensityState:
    """Convex mixture ``p * Phi + (1 - p) * sigma_a (x) sigma_b``.

    ``Phi`` is the normalized maximally entangled state on two copies of the
    common dimension of the sigmas.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {p}")
    if sigma_a.dims != sigma_b.dims:
        raise ValueError(f"sigma dims differ: {sigma_a.dims} vs {sigma_b.dims}")
    if len(sigma_a.dims) != 1:
        raise ValueError("sigmas must be single-subsystem states")
    d = sigma_a.dims[0]
    phi = max_entangled_unnormalized(d).data / d
    product = kron_compose([sigma_a.op, sigma_b.op]).data
    data = p * phi + (1.0 - p) * product
    return DensityState(LabeledOperator((d, d), data, hermitian=True))


def tmsv_truncated(lam: float, n_max: int) -> DensityState:
    """Two-mode squeezed vacuum truncated to ``n_max`` excitations.

    Ket amplitudes are ``lam**n`` for n = 0..n_max, renormalized to a unit
    vector; the result is the rank-one state on two (n_max+1)-level systems.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"squeezing parameter must lie in [0, 1), got {lam}")
    if n_max < 0:
        raise ValueError(f"truncation level must be >= 0, got {n_max}")
    d = n_max + 1
    amps = lam ** np.arange(d)
    amps = amps / np.linalg.norm(amps)
    ket = np.zeros(d * d, dtype=np.complex128)
    ket[:: d + 1] = amps
    return DensityState(LabeledOperator((d, d), np.outer(ket, ket.conj()), hermitian=True))


def amp_damp3(gamma10: float, gamma21: float, gamma20: float) -> KrausChannel:
    """Three-level amplitude damping with decays 1->0, 2->1 and 2->0."""
    for name, g in (("gamma10", gamma10), ("gamma21", gamma21), ("gamma20", gamma20)):
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {g}")
    if gamma21 + gamma20 > 1.0 + 1e-12:
        raise ValueError(f"gamma21 + gamma20 = {gamma21 + gamma20} exceeds 1")
    k0 = np.diag([1.0, np.sqrt(1.0 - gamma10), np.sqrt(max(1.0 - gamma21 - gamma20, 0.0))])
    k1 = np.zeros((3, 3))
    k1[0, 1] = np.sqrt(gamma10)
    k2 = np.zeros((3, 3))
    k2[1, 2] = np.sqrt(gamma21)
    k3 = np.zeros((3, 3))
    k3[0, 2] = np.sqrt(gamma20)
    return KrausChannel((k0, k1, k2, k3))


def amp_damp_qubit(gamma: float) -> KrausChannel:
    """Standard qubit amplitude damping with decay probability ``gamma``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    k0 = np.diag([1.0, np.sqrt(1.0 - gamma)])
    k1 = np.zeros((2, 2))
    k1[0, 1] = np.sqrt(gamma)
    return KrausChannel((k0, k1))


def dephasing_qubit(p: float) -> KrausChannel:
    """Phase flip with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    k0 = np.sqrt(1.0 - p) * np.eye(2)
    k1 = np.sqrt(p) * np.diag([1.0, -1.0])
    return KrausChannel((k0, k1))


def replacer_channel(d: int) -> KrausChannel:
    """Channel that discards its input and outputs the maximally mixed state."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    ks = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = 1.0 / np.sqrt(d)
            ks.append(k)
    return KrausChannel(tuple(ks))


def random_density(dim: int, seed: int) -> DensityState:
    """Seeded Ginibre density matrix ``G G^dag / Tr``."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityState(LabeledOperator((dim,), rho, hermitian=True))


_KINDS = ("mixed-state", "tmsv", "amp-damp")


@dataclass(frozen=True)
class SweepSpec:
    """A grid of resource instances for one sweep.

    ``grid`` maps parameter names to explicit value lists:

    - ``mixed-state``: key ``p``; sigmas are Ginibre draws from ``seed``
    - ``tmsv``: key ``lam``
    - ``amp-damp``: keys ``gamma10``, ``gamma21``, ``gamma20`` (the first
      varies, the others are usually singletons)

    Points are the cartesian product in declaration order.
    """

    kind: str
    grid: dict[str, tuple[float, ...]]
    d: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}, expected one of {_KINDS}")
        if self.d < 2:
            raise ValueError(f"target dimension must be >= 2, got {self.d}")
        grid = {str(k): tuple(float(x) for x in v) for k, v in self.grid.items()}
        object.__setattr__(self, "grid", grid)
        if self.kind == "mixed-state":
            self._require_keys({"p"})
            self._require_range("p", 0.0, 1.0)
        elif self.kind == "tmsv":
            self._require_keys({"lam"})
            for x in grid["lam"]:
                if not 0.0 <= x < 1.0:
                    raise ValueError(f"lam value {x} outside [0, 1)")
        else:
            self._require_keys({"gamma10", "gamma21", "gamma20"})
            for key in ("gamma10", "gamma21", "gamma20"):
                self._require_range(key, 0.0, 1.0)
            for g21 in grid["gamma21"]:
                for g20 in grid["gamma20"]:
                    if g21 + g20 > 1.0 + 1e-12:
                        raise ValueError(f"gamma21 + gamma20 = {g21 + g20} exceeds 1")

    def _require_keys(self, keys: set[str]) -> None:
        if set(self.grid) != keys:
            raise ValueError(f"{self.kind} sweep needs grid keys {sorted(keys)}, got {sorted(self.grid)}")
        for k, v in self.grid.items():
            if not v:
                raise ValueError(f"grid key {k!r} has no values")

    def _require_range(self, key: str, lo: float, hi: float) -> None:
        for x in self.grid[key]:
            if not lo <= x <= hi:
                raise ValueError(f"{key} value {x} outside [{lo}, {hi}]")


def sweep_points(spec: SweepSpec) -> list[dict[str, float]]:
    """Expand the grid into parameter dicts, cartesian product in key order."""
    points: list[dict[str, float]] = [{}]
    for key, values in spec.grid.items():
        points = [{**pt, key: v} for pt in points for v in values]
    return points


def build_instance(spec: SweepSpec, point: dict[str, float]):
    """Materialize one grid point as a DensityState or KrausChannel."""
    if spec.kind == "mixed-state":
        seed = 0 if spec.seed is None else spec.seed
        sigma_a = random_density(spec.d, seed)
        sigma_b = random_density(spec.d, seed + 1)
        return mixed_resource(point["p"], sigma_a, sigma_b)
    if spec.kind == "tmsv":
        # truncation at two excitations; the target dimension is spec.d
        return tmsv_truncated(point["lam"], 2)
    return amp_damp3(point["gamma10"], point["gamma21"], point["gamma20"])
