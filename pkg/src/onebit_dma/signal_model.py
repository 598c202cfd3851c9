"""Physical front end of the DMA receiver.

Users' channels, microstrip geometry, Lorentzian analog weights and the
lossless waveguide propagation, up to the (pre-quantization) microstrip
outputs ``z = Q A y``.

Index map used throughout the package: element ``l`` of microstrip ``i``
(both zero-based) sits at flat index ``n = i * N_e + l``. Reshaping any
length-``N`` vector to ``(N_d, N_e)`` in C order recovers the microstrip
blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi

#: Default per-element propagation phase ``beta * d_e`` (sub-wavelength spacing).
DEFAULT_BETA_DE = TWO_PI / 5.0


@dataclass(frozen=True)
class SystemDims:
    """Dimensions of the multi-user uplink.

    Parameters
    ----------
    K : int
        Number of single-antenna users.
    N_d : int
        Number of microstrips (one 1-bit RF chain each).
    N_e : int
        Metamaterial elements per microstrip.
    N_RF : int, optional
        RF chains of the fully digital baseline. Defaults to ``K``.
    """

    K: int
    N_d: int
    N_e: int
    N_RF: Optional[int] = None

    def __post_init__(self):
        if self.N_RF is None:
            object.__setattr__(self, "N_RF", self.K)
        for name in ("K", "N_d", "N_e", "N_RF"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def N(self) -> int:
        return self.N_d * self.N_e


@dataclass(frozen=True)
class MicrostripGeometry:
    """Element-to-port distances ``distances[i, l]`` (m) and wavenumber ``beta`` (rad/m)."""

    distances: np.ndarray
    beta: float

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        if d.ndim != 2:
            raise ValueError("distances must have shape (N_d, N_e)")
        if np.any(d < 0):
            raise ValueError("distances must be nonnegative")
        if d.shape[1] > 1 and np.any(np.diff(d, axis=1) <= 0):
            raise ValueError("distances must increase strictly along each microstrip")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def uniform(cls, dims: SystemDims, beta_de: float = DEFAULT_BETA_DE,
                spacing: float = 1.0) -> "MicrostripGeometry":
        """Uniform spacing ``d_e`` with ``l = 1..N_e`` elements; ``beta * d_e = beta_de``."""
        l = np.arange(1, dims.N_e + 1, dtype=float) * spacing
        distances = np.tile(l, (dims.N_d, 1))
        return cls(distances, beta_de / spacing)


@dataclass(frozen=True)
class PropagationMatrix:
    """Diagonal waveguide propagation ``A``; only the diagonal is stored."""

    diag: np.ndarray

    def __post_init__(self):
        a = np.array(self.diag, dtype=complex).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "diag", a)

    @property
    def N(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag)


@dataclass(frozen=True)
class AnalogCombiner:
    """Lorentzian-constrained analog weights of all DMA elements.

    The combiner is stored as ``N`` phases. Row ``i`` of the ``N_d x N``
    matrix ``Q`` holds the weights ``(j + exp(j phi)) / 2`` of microstrip
    ``i`` on its own ``N_e`` columns and zeros elsewhere; :meth:`dense`
    materializes it (test oracle only).
    """

    phases: np.ndarray
    dims: SystemDims

    def __post_init__(self):
        phi = np.array(self.phases, dtype=float).ravel()
        if phi.size != self.dims.N:
            raise ValueError(f"expected {self.dims.N} phases, got {phi.size}")
        phi = np.mod(phi, TWO_PI)
        # np.mod can round tiny negatives up to exactly 2*pi
        phi[phi >= TWO_PI] = 0.0
        phi.setflags(write=False)
        object.__setattr__(self, "phases", phi)

    @property
    def weights(self) -> np.ndarray:
        """Flat length-``N`` vector of Lorentzian weights."""
        return 0.5 * (1j + np.exp(1j * self.phases))

    @property
    def blocks(self) -> np.ndarray:
        """Weights reshaped to ``(N_d, N_e)``."""
        return self.weights.reshape(self.dims.N_d, self.dims.N_e)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Compute ``Q @ X`` for ``X`` of shape ``(N,)`` or ``(N, m)``."""
        X = np.asarray(X)
        d = self.dims
        if X.shape[0] != d.N:
            raise ValueError(f"leading dimension must be {d.N}, got {X.shape[0]}")
        Xb = X.reshape(d.N_d, d.N_e, *X.shape[1:])
        w = self.blocks.reshape(d.N_d, d.N_e, *([1] * (X.ndim - 1)))
        return (w * Xb).sum(axis=1)

    def gram_diag(self) -> np.ndarray:
        """Diagonal of ``Q Q^H`` (the squared row norms ``|q_i|^2``)."""
        return np.sum(np.abs(self.blocks) ** 2, axis=1)

    def dense(self) -> np.ndarray:
        d = self.dims
        Q = np.zeros((d.N_d, d.N), dtype=complex)
        for i in range(d.N_d):
            Q[i, i * d.N_e:(i + 1) * d.N_e] = self.blocks[i]
        return Q


@dataclass(frozen=True)
class Scenario:
    """Everything that fixes the link besides the channel draw."""

    dims: SystemDims
    rho: float
    geometry: MicrostripGeometry = field(default=None)
    eta: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.geometry is None:
            object.__setattr__(self, "geometry", MicrostripGeometry.uniform(self.dims))
        if self.geometry.distances.shape != (self.dims.N_d, self.dims.N_e):
            raise ValueError("geometry does not match dims")

    @classmethod
    def from_db(cls, dims: SystemDims, rho_db: float, beta_de: float = DEFAULT_BETA_DE,
                eta: float = 1.0) -> "Scenario":
        return cls(dims, db_to_linear(rho_db), MicrostripGeometry.uniform(dims, beta_de), eta)

    @property
    def propagation(self) -> PropagationMatrix:
        return build_propagation_matrix(self.geometry, self.dims)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. standard complex normal samples, CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channel(dims: SystemDims, rng) -> np.ndarray:
    """Draw the ``N x K`` Rayleigh channel ``H``. ``rng`` may be a seed or a Generator."""
    rng = np.random.default_rng(rng)
    return complex_normal(rng, (dims.N, dims.K))


def build_propagation_matrix(geometry: MicrostripGeometry, dims: SystemDims) -> PropagationMatrix:
    if geometry.distances.shape != (dims.N_d, dims.N_e):
        raise ValueError(
            f"geometry has shape {geometry.distances.shape}, expected {(dims.N_d, dims.N_e)}")
    return PropagationMatrix(np.exp(1j * geometry.beta * geometry.distances).ravel())


def assemble_analog_combiner(phases, dims: SystemDims) -> AnalogCombiner:
    return AnalogCombiner(phases, dims)


def random_combiner(dims: SystemDims, rng) -> AnalogCombiner:
    """Phases i.i.d. uniform on ``[0, 2 pi)``."""
    rng = np.random.default_rng(rng)
    return AnalogCombiner(rng.uniform(0.0, TWO_PI, dims.N), dims)


def frontend_output(Q: AnalogCombiner, A: PropagationMatrix, y: np.ndarray) -> np.ndarray:
    """Microstrip outputs ``z = Q A y`` (``y`` may carry trailing sample axes)."""
    y = np.asarray(y)
    if y.shape[0] != A.N or A.N != Q.dims.N:
        raise ValueError("dimension mismatch between Q, A and y")
    a = A.diag.reshape(-1, *([1] * (y.ndim - 1)))
    return Q.apply(a * y)
