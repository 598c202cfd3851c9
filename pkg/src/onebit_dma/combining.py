"""Digital combining, SINDR and sum rate.

All inverses are Cholesky solves; the ``N_d x N_d`` systems are small but
are solved many times inside the optimizer and the sweeps.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .quantization import bussgang_stats
from .signal_model import AnalogCombiner, PropagationMatrix, complex_normal


class SingularSystemError(np.linalg.LinAlgError):
    """The combiner system matrix is not positive definite."""


def _chol_solve(R, B):
    try:
        c = sla.cho_factor(R, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return sla.cho_solve(c, B, check_finite=False)


def effective_map(G: np.ndarray, Q: AnalogCombiner, A: PropagationMatrix) -> np.ndarray:
    """``K = G Q A`` as a dense ``N_d x N`` matrix (rows keep the block support of ``Q``)."""
    d = Q.dims
    if G.shape != (d.N_d, d.N_d) or A.N != d.N:
        raise ValueError("dimension mismatch between G, Q and A")
    rows = np.diag(G)[:, None] * Q.blocks * A.diag.reshape(d.N_d, d.N_e)
    K = np.zeros((d.N_d, d.N_d, d.N_e), dtype=complex)
    idx = np.arange(d.N_d)
    K[idx, idx, :] = rows
    return K.reshape(d.N_d, d.N)


def _system_matrix(KH, KKh, C_d, rho):
    """``K H H^H K^H + (K K^H + C_d) / rho``."""
    R = KH @ KH.conj().T + (KKh + C_d) / rho
    return 0.5 * (R + R.conj().T)


def lmmse_combiner(Keff: np.ndarray, H: np.ndarray, C_d: np.ndarray, rho: float) -> np.ndarray:
    """``W = sqrt(rho) (rho K H H^H K^H + K K^H + C_d)^(-1) K H``."""
    KH = Keff @ H
    R = rho * (KH @ KH.conj().T) + Keff @ Keff.conj().T + C_d
    return np.sqrt(rho) * _chol_solve(0.5 * (R + R.conj().T), KH)


def sindr_per_user(W: np.ndarray, Keff: np.ndarray, H: np.ndarray, C_d: np.ndarray,
                   rho: float) -> np.ndarray:
    """Per-user SINDR of an arbitrary combiner; an all-zero column scores 0."""
    WhK = W.conj().T @ Keff                # rows w_k^H K
    T = WhK @ H                            # T[k, j] = w_k^H K h_j
    p = rho * np.abs(T) ** 2
    signal = np.diag(p).copy()
    interference = p.sum(axis=1) - signal
    noise = np.sum(np.abs(WhK) ** 2, axis=1)
    distortion = np.real(np.einsum("ik,ij,jk->k", W.conj(), C_d, W))
    denom = interference + noise + distortion
    zero = ~np.any(W != 0, axis=0)
    out = np.zeros(W.shape[1])
    ok = ~zero
    if np.any(ok & (denom <= 0)):
        raise ZeroDivisionError("SINDR denominator vanished for a nonzero combiner")
    out[ok] = signal[ok] / denom[ok]
    return out


def optimal_sindr(Keff: np.ndarray, H: np.ndarray, C_d: np.ndarray, rho: float) -> np.ndarray:
    """SINDR of every user under its SINDR-maximizing linear combiner.

    ``h_k^H K^H (K H_-k H_-k^H K^H + K K^H / rho + C_d / rho)^(-1) K h_k``.
    """
    KH = Keff @ H
    R = _system_matrix(KH, Keff @ Keff.conj().T, C_d, rho)
    out = np.empty(H.shape[1])
    for k in range(H.shape[1]):
        a = KH[:, k]
        Rk = R - np.outer(a, a.conj())
        out[k] = np.real(a.conj() @ _chol_solve(Rk, a))
    return out


def max_sindr_eigen(Keff: np.ndarray, H: np.ndarray, C_d: np.ndarray, rho: float, k: int):
    """Generalized-eigenvector combiner of user ``k``: ``(w_k, SINDR_k)``.

    The SINDR is the Rayleigh quotient ``w^H N_k w / w^H D_k w``; whitening
    with ``D_k = L L^H`` turns it into a standard Hermitian eigenproblem.
    """
    KH = Keff @ H
    a = KH[:, k]
    others = np.delete(KH, k, axis=1)
    D = rho * others @ others.conj().T + Keff @ Keff.conj().T + C_d
    D = 0.5 * (D + D.conj().T)
    Nk = rho * np.outer(a, a.conj())
    try:
        L = np.linalg.cholesky(D)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("D_k is not positive definite") from exc
    Linv_N = sla.solve_triangular(L, Nk, lower=True)
    S = sla.solve_triangular(L, Linv_N.conj().T, lower=True).conj().T
    vals, vecs = np.linalg.eigh(0.5 * (S + S.conj().T))
    w = sla.solve_triangular(L.conj().T, vecs[:, -1], lower=False)
    return w, float(vals[-1])


def sum_rate(sindr) -> float:
    sindr = np.asarray(sindr, dtype=float)
    if np.any(sindr < 0):
        raise ValueError("SINDR values must be nonnegative")
    return float(np.sum(np.log2(1.0 + sindr)))


def exact_sindr(Q: AnalogCombiner, A: PropagationMatrix, H: np.ndarray, rho: float,
                eta: float = 1.0) -> np.ndarray:
    """End-to-end SINDR with exact Bussgang statistics and the LMMSE combiner."""
    stats = bussgang_stats(Q, A, H, rho, eta)
    return optimal_sindr(effective_map(stats.G, Q, A), H, stats.C_d, rho)


def exact_sum_rate(Q: AnalogCombiner, A: PropagationMatrix, H: np.ndarray, rho: float,
                   eta: float = 1.0) -> float:
    return sum_rate(exact_sindr(Q, A, H, rho, eta))


def fd_sindr(H: np.ndarray, rho: float) -> np.ndarray:
    """Infinite-resolution MMSE SINR, one antenna per RF chain."""
    n = H.shape[0]
    return optimal_sindr(np.eye(n), H, np.zeros((n, n)), rho)


def fd_baseline_rate(K: int, rho: float, rng, n_rf: int = None) -> float:
    """Sum rate of the fully digital array on its own ``N_RF x K`` Rayleigh draw."""
    rng = np.random.default_rng(rng)
    H = complex_normal(rng, (K if n_rf is None else n_rf, K))
    return sum_rate(fd_sindr(H, rho))
