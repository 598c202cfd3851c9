"""1-bit quantizer and its Bussgang statistics.

Closed forms hold exactly for jointly Gaussian ``z``, which is the case
conditioned on ``H`` because the transmit symbols and noise are Gaussian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_model import (AnalogCombiner, PropagationMatrix, Scenario, SystemDims,
                           complex_normal, frontend_output)

#: Round-off slack allowed on normalized correlations before arcsin.
ARCSIN_SLACK = 1e-9


class DegenerateCovarianceError(ValueError):
    """A microstrip output has zero (or negative) variance."""


@dataclass(frozen=True)
class BussgangStats:
    C_z: np.ndarray
    G: np.ndarray
    C_r: np.ndarray
    C_d: np.ndarray
    C_rx: np.ndarray
    eta: float


def _sgn(x):
    # sgn(0) := +1
    return np.where(x >= 0, 1.0, -1.0)


def quantize_one_bit(z, eta: float = 1.0) -> np.ndarray:
    """``sqrt(eta/2) * (sgn(Re z) + j sgn(Im z))``, element-wise."""
    z = np.asarray(z)
    return np.sqrt(eta / 2.0) * (_sgn(z.real) + 1j * _sgn(z.imag))


def _hermitize(M):
    return 0.5 * (M + M.conj().T)


def compute_cz(Q: AnalogCombiner, A: PropagationMatrix, H: np.ndarray, rho: float) -> np.ndarray:
    """Covariance of ``z = Q A (sqrt(rho) H x + n)``: ``Q A (rho H H^H + I) A^H Q^H``."""
    H = np.asarray(H)
    if H.shape[0] != Q.dims.N or A.N != Q.dims.N:
        raise ValueError("dimension mismatch between Q, A and H")
    B = Q.apply(A.diag[:, None] * H)
    # Q A A^H Q^H is diagonal: rows of Q have disjoint supports
    noise = np.sum(np.abs(Q.blocks * A.diag.reshape(Q.blocks.shape)) ** 2, axis=1)
    return _hermitize(rho * (B @ B.conj().T) + np.diag(noise))


def _inv_sqrt_diag(C_z):
    d = np.real(np.diag(C_z))
    # round-off leaves ~1e-32 where every element of a microstrip is off
    dead = d <= 1e-12 * max(d.max(), 0.0)
    if np.any(dead) or np.any(d <= 0):
        bad = np.flatnonzero(dead | (d <= 0)).tolist()
        raise DegenerateCovarianceError(f"microstrip output(s) {bad} have zero variance")
    return 1.0 / np.sqrt(d)


def bussgang_gain(C_z: np.ndarray, eta: float = 1.0) -> np.ndarray:
    """Diagonal Bussgang gain ``sqrt(2 eta / pi) Diag(C_z)^(-1/2)``."""
    return np.diag(np.sqrt(2.0 * eta / np.pi) * _inv_sqrt_diag(C_z))


def _safe_arcsin(x):
    if np.any(np.abs(x) > 1.0 + ARCSIN_SLACK):
        raise ValueError(f"normalized correlation {np.max(np.abs(x))!r} exceeds 1")
    return np.arcsin(np.clip(x, -1.0, 1.0))


def arcsin_law(C_z: np.ndarray, eta: float = 1.0) -> np.ndarray:
    """Covariance of the 1-bit outputs of a zero-mean complex Gaussian vector."""
    s = _inv_sqrt_diag(C_z)
    R = s[:, None] * C_z * s[None, :]
    C_r = (2.0 * eta / np.pi) * (_safe_arcsin(R.real) + 1j * _safe_arcsin(R.imag))
    # diagonal is arcsin(1) exactly up to round-off
    np.fill_diagonal(C_r, eta)
    return C_r


def distortion_covariance(C_r: np.ndarray, G: np.ndarray, C_z: np.ndarray) -> np.ndarray:
    return _hermitize(C_r - G @ C_z @ G)


def cross_correlation(G: np.ndarray, Q: AnalogCombiner, A: PropagationMatrix,
                      H: np.ndarray, rho: float) -> np.ndarray:
    """``C_rx = E[r x^H] = sqrt(rho) G Q A H``."""
    H = np.asarray(H)
    if H.shape[0] != Q.dims.N or G.shape[0] != Q.dims.N_d:
        raise ValueError("dimension mismatch")
    return np.sqrt(rho) * G @ Q.apply(A.diag[:, None] * H)


def bussgang_stats(Q: AnalogCombiner, A: PropagationMatrix, H: np.ndarray, rho: float,
                   eta: float = 1.0) -> BussgangStats:
    C_z = compute_cz(Q, A, H, rho)
    G = bussgang_gain(C_z, eta)
    C_r = arcsin_law(C_z, eta)
    C_d = distortion_covariance(C_r, G, C_z)
    C_rx = cross_correlation(G, Q, A, H, rho)
    return BussgangStats(C_z, G, C_r, C_d, C_rx, eta)


def approx_gain_scalar(dims: SystemDims, rho: float, eta: float = 1.0) -> float:
    return float(np.sqrt(4.0 * eta / (np.pi * dims.N_e * (rho * dims.K + 1.0))))


def approx_distortion_scalar(eta: float = 1.0) -> float:
    return eta * (1.0 - 2.0 / np.pi)


def approx_large_k_stats(dims: SystemDims, rho: float, eta: float = 1.0):
    """Large-``K`` surrogates ``(G, C_d)``, both scalar multiples of ``I_{N_d}``.

    Built on ``[Q A H H^H A^H Q^H]_{nn} ~ K |q_n|^2`` and ``|q_n|^2 ~ N_e / 2``.
    """
    I = np.eye(dims.N_d)
    return approx_gain_scalar(dims, rho, eta) * I, approx_distortion_scalar(eta) * I


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample moments of the quantized chain and their standard errors.

    Standard errors of complex quantities are packed as ``se(Re) + 1j * se(Im)``.
    ``gain`` is the per-microstrip regression ``Re E[r z*] / E[|z|^2]``.
    """

    n_samples: int
    C_z: np.ndarray
    C_z_se: np.ndarray
    C_r: np.ndarray
    C_r_se: np.ndarray
    C_rx: np.ndarray
    C_rx_se: np.ndarray
    C_dz: np.ndarray
    C_dz_se: np.ndarray
    gain: np.ndarray
    gain_se: np.ndarray


class _ComplexMeanAccumulator:
    """Running mean and standard error of complex sample products."""

    def __init__(self, shape):
        self.n = 0
        self.s = np.zeros(shape, dtype=complex)
        self.s2_re = np.zeros(shape)
        self.s2_im = np.zeros(shape)

    def add(self, samples):
        # samples: (m, *shape)
        self.n += samples.shape[0]
        self.s += samples.sum(axis=0)
        self.s2_re += np.sum(samples.real ** 2, axis=0)
        self.s2_im += np.sum(samples.imag ** 2, axis=0)

    def result(self):
        n = self.n
        mean = self.s / n
        if n < 2:
            return mean, np.full(mean.shape, np.inf + 1j * np.inf)
        var_re = np.maximum(self.s2_re / n - mean.real ** 2, 0.0) * n / (n - 1)
        var_im = np.maximum(self.s2_im / n - mean.imag ** 2, 0.0) * n / (n - 1)
        return mean, np.sqrt(var_re / n) + 1j * np.sqrt(var_im / n)


def empirical_covariances(scenario: Scenario, Q: AnalogCombiner, H: np.ndarray,
                          n_samples: int, seed=None, chunk: int = 100_000) -> EmpiricalMoments:
    """Monte Carlo moments of ``z``, ``r = Q1(z)``, ``x`` and ``d = r - G z``.

    ``G`` for the distortion is the closed-form Bussgang gain.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    dims, rho, eta = scenario.dims, scenario.rho, scenario.eta
    A = scenario.propagation
    rng = np.random.default_rng(seed)
    G = np.diag(bussgang_gain(compute_cz(Q, A, H, rho), eta))

    acc_z = _ComplexMeanAccumulator((dims.N_d, dims.N_d))
    acc_r = _ComplexMeanAccumulator((dims.N_d, dims.N_d))
    acc_rx = _ComplexMeanAccumulator((dims.N_d, dims.K))
    acc_dz = _ComplexMeanAccumulator((dims.N_d, dims.N_d))
    # sums for the ratio estimator X/Y with X = Re(r z*), Y = |z|^2
    sx = np.zeros(dims.N_d); sy = np.zeros(dims.N_d)
    sxx = np.zeros(dims.N_d); syy = np.zeros(dims.N_d); sxy = np.zeros(dims.N_d)

    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x = complex_normal(rng, (dims.K, m))
        n = complex_normal(rng, (dims.N, m))
        z = frontend_output(Q, A, np.sqrt(rho) * (H @ x) + n)  # (N_d, m)
        r = quantize_one_bit(z, eta)
        d = r - G[:, None] * z
        zt, rt, dt, xt = z.T, r.T, d.T, x.T
        acc_z.add(zt[:, :, None] * zt.conj()[:, None, :])
        acc_r.add(rt[:, :, None] * rt.conj()[:, None, :])
        acc_rx.add(rt[:, :, None] * xt.conj()[:, None, :])
        acc_dz.add(dt[:, :, None] * zt.conj()[:, None, :])
        X = np.real(rt * zt.conj())
        Y = np.abs(zt) ** 2
        sx += X.sum(0); sy += Y.sum(0)
        sxx += (X * X).sum(0); syy += (Y * Y).sum(0); sxy += (X * Y).sum(0)
        done += m

    Cz, Cz_se = acc_z.result()
    Cr, Cr_se = acc_r.result()
    Crx, Crx_se = acc_rx.result()
    Cdz, Cdz_se = acc_dz.result()
    N = n_samples
    mx, my = sx / N, sy / N
    g_hat = mx / my
    # delta method: Var(X - g Y) / (n E[Y]^2)
    var_u = (sxx / N - mx ** 2) - 2 * g_hat * (sxy / N - mx * my) + g_hat ** 2 * (syy / N - my ** 2)
    g_se = np.sqrt(np.maximum(var_u, 0.0) / max(N - 1, 1)) / my
    return EmpiricalMoments(N, Cz, Cz_se, Cr, Cr_se, Crx, Crx_se, Cdz, Cdz_se, g_hat, g_se)
