"""Alternating design of the Lorentzian analog combiner.

Each outer iteration refreshes the quadratic-transform auxiliaries
``(Y, gamma)`` in closed form, folds them into a quadratic program in the
stacked weight vector ``q``, and solves it either through a semidefinite
relaxation or through the principal eigenvector of the lifted matrix.

Conventions
-----------
``Q`` holds the Lorentzian weights ``w_n = (j + exp(j phi_n)) / 2``. The
optimization variable is ``q = conj(w)`` (the stacked columns of ``Q^H``),
so ``q = (-j + p) / 2`` with the unit-modulus vector ``p = exp(-j phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numba
import numpy as np

from .combining import (_chol_solve, _system_matrix, effective_map, exact_sum_rate,
                        optimal_sindr)
from .quantization import approx_distortion_scalar, approx_gain_scalar, bussgang_stats
from .signal_model import (AnalogCombiner, PropagationMatrix, Scenario, SystemDims,
                           random_combiner)

SOLVERS = ("sdr", "closed_form", "random")


@dataclass(frozen=True)
class OptimizerConfig:
    max_outer_iterations: int = 50
    rate_tol: float = 1e-4
    solver: str = "sdr"
    sdr_rank: Optional[int] = None          # None -> ceil(sqrt(2 (N + 1)))
    sdr_sweeps: int = 200
    sdr_tol: float = 1e-8
    power_steps: int = 300
    power_tol: float = 1e-10
    inner_stats: str = "approx"             # "approx" | "exact"
    seed: Optional[int] = None

    def __post_init__(self):
        solver = self.solver.replace("-", "_")
        if solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        object.__setattr__(self, "solver", solver)
        if self.inner_stats not in ("approx", "exact"):
            raise ValueError(f"unknown inner_stats {self.inner_stats!r}")
        for name in ("max_outer_iterations", "sdr_sweeps", "power_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.rate_tol <= 0 or self.sdr_tol <= 0 or self.power_tol <= 0:
            raise ValueError("tolerances must be positive")

    def rank_for(self, n: int) -> int:
        if self.sdr_rank is not None:
            return min(self.sdr_rank, n)
        return min(math.ceil(math.sqrt(2 * n)), n)


@dataclass(frozen=True)
class QuadraticForm:
    """``2 Re[xi^H q] - q^H Psi q``."""

    xi: np.ndarray
    psi: np.ndarray


# --------------------------------------------------------------------------
# auxiliary-variable updates and the reformulated rate


def update_gamma(Keff, H, C_d, rho) -> np.ndarray:
    return optimal_sindr(Keff, H, C_d, rho)


def update_y(Keff, H, C_d, rho) -> np.ndarray:
    """``y_k = (K H H^H K^H + K K^H / rho + C_d / rho)^(-1) K h_k`` for all ``k``."""
    KH = Keff @ H
    return _chol_solve(_system_matrix(KH, Keff @ Keff.conj().T, C_d, rho), KH)


def reformulated_rate(Q: AnalogCombiner, gamma, Y, H, A: PropagationMatrix, G, C_d,
                      rho) -> float:
    """Quadratic-transform surrogate of the sum rate (tight at the optimal ``gamma, Y``)."""
    gamma = np.asarray(gamma, dtype=float)
    Keff = effective_map(G, Q, A)
    KH = Keff @ H
    R = _system_matrix(KH, Keff @ Keff.conj().T, C_d, rho)
    lin = 2.0 * np.real(np.sum(KH.conj() * Y, axis=0))
    quad = np.real(np.einsum("ik,ij,jk->k", Y.conj(), R, Y))
    return float(np.sum(np.log2(1.0 + gamma) - gamma + (1.0 + gamma) * (lin - quad)))


# --------------------------------------------------------------------------
# quadratic program in q


def _gain_vector(G, n_d):
    G = np.asarray(G)
    if G.ndim == 0:
        return np.full(n_d, float(G))
    return np.real(np.diag(G)) if G.ndim == 2 else np.real(G)


def assemble_xi_psi(H, A: PropagationMatrix, G, gamma, Y, rho, dims: SystemDims) -> QuadraticForm:
    """Linear and quadratic coefficients of the surrogate in ``q``.

    With ``i(n)`` the microstrip of element ``n`` and ``g`` the diagonal of ``G``:

        xi_n     = sum_k (1 + gamma_k) g_i(n) conj(y_k,i(n)) a_n h_k,n
        Psi_n,m  = sum_k (1 + gamma_k) g_i(n) g_i(m) conj(y_k,i(n)) y_k,i(m) * C_n,m
        C        = A (H H^H + I / rho) A^H

    i.e. the selection matrix ``E`` (``vec(Q^H) = E q``) just repeats each
    microstrip's coefficient over its ``N_e`` elements, so ``Psi`` is a
    Hadamard product of an expanded rank-``K`` weight matrix and ``C``.
    """
    H = np.asarray(H)
    Y = np.asarray(Y)
    if H.shape != (dims.N, dims.K) or Y.shape != (dims.N_d, dims.K) or A.N != dims.N:
        raise ValueError("dimension mismatch")
    w = 1.0 + np.asarray(gamma, dtype=float)
    g = _gain_vector(G, dims.N_d)
    Ye = np.repeat(g[:, None] * Y, dims.N_e, axis=0)          # (N, K)
    AH = A.diag[:, None] * H
    xi = (Ye.conj() * AH) @ w
    C = AH @ AH.conj().T
    C[np.diag_indices(dims.N)] += 1.0 / rho                   # |a_n|^2 = 1
    psi = ((Ye.conj() * w) @ Ye.T) * C
    psi = 0.5 * (psi + psi.conj().T)
    return QuadraticForm(xi, psi)


def objective_q(q, xi, psi) -> float:
    q = np.asarray(q)
    return float(2.0 * np.real(np.vdot(xi, q)) - np.real(np.vdot(q, psi @ q)))


def q_from_combiner(Q: AnalogCombiner) -> np.ndarray:
    return Q.weights.conj()


def build_sdr_matrix(xi, psi) -> np.ndarray:
    """Lifted matrix ``M`` with ``[p; 1]^H M [p; 1] = 2 objective_q((p - j) / 2) + const``."""
    xi = np.asarray(xi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    n = xi.size
    b = 2.0 * xi + 1j * psi.sum(axis=1)
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[:n, :n] = -psi
    M[:n, n] = b
    M[n, :n] = b.conj()
    return 0.5 * M


def lifted_value(M, p) -> float:
    v = np.append(p, 1.0)
    return float(np.real(np.vdot(v, M @ v)))


def _check_hermitian(M):
    if not np.allclose(M, M.conj().T, rtol=0.0, atol=1e-9 * max(1.0, np.abs(M).max())):
        raise ValueError("M must be Hermitian")


def _round_to_phases(f):
    """Unit-modulus rounding of a lifted vector ``f`` (last entry is the ``1``)."""
    ref = f[-1]
    if abs(ref) > 1e-12 * np.abs(f).max():
        f = f * (abs(ref) / ref)
    p = np.exp(1j * np.angle(f[:-1]))
    # zero entry -> element fully on (w = j, i.e. p = -j)
    p[np.abs(f[:-1]) == 0] = -1j
    return p


# --------------------------------------------------------------------------
# semidefinite relaxation: low-rank factorization + block-coordinate ascent


@numba.njit(cache=True)
def _bm_value(M, U):
    return np.real(np.sum(np.conj(U) * (M @ U)))


@numba.njit(cache=True)
def _bm_sweeps(M, U, max_sweeps, tol, trace):
    n, r = U.shape
    value = _bm_value(M, U)
    g = np.empty(r, dtype=np.complex128)
    sweeps = 0
    for s in range(max_sweeps):
        start = value
        for i in range(n):
            g[:] = 0.0
            for j in range(n):
                if j != i:
                    mij = M[i, j]
                    for c in range(r):
                        g[c] += mij * U[j, c]
            nrm = 0.0
            old = 0.0
            for c in range(r):
                nrm += g[c].real ** 2 + g[c].imag ** 2
                old += (np.conj(U[i, c]) * g[c]).real
            if nrm > 0.0:
                nrm = np.sqrt(nrm)
                for c in range(r):
                    U[i, c] = g[c] / nrm
                # row i enters the objective as 2 Re(u_i^H g)
                value += 2.0 * (nrm - old)
        trace[s] = value
        sweeps = s + 1
        if value - start < tol * max(1.0, abs(value)):
            break
    return sweeps


@dataclass
class SdrSolution:
    p: np.ndarray
    U: np.ndarray           # factor with P = U U^H, unit-norm rows
    value: float            # Tr(M P)
    sweeps: int
    trace: np.ndarray       # Tr(M P) after every sweep


def random_factor(n: int, r: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    U = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def solve_sdr(M, config: OptimizerConfig = OptimizerConfig(), U0=None) -> SdrSolution:
    """Maximize ``Tr(M P)`` over ``P >= 0`` with unit diagonal, then round.

    ``P = U U^H`` with unit-norm rows ``u_i``; each row update
    ``u_i <- normalize(sum_{j != i} M_ij u_j)`` maximizes the objective
    exactly in that row, so sweeps never decrease it.
    """
    M = np.ascontiguousarray(M, dtype=np.complex128)
    _check_hermitian(M)
    n = M.shape[0]
    if U0 is None:
        U = random_factor(n, config.rank_for(n), config.seed)
    else:
        U = np.array(U0, dtype=np.complex128, order="C")
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    trace = np.empty(config.sdr_sweeps)
    sweeps = _bm_sweeps(M, U, config.sdr_sweeps, config.sdr_tol, trace)
    # principal eigenvector of U U^H is the top left singular vector of U
    f = np.linalg.svd(U, full_matrices=False)[0][:, 0]
    return SdrSolution(_round_to_phases(f), U, float(_bm_value(M, U)), sweeps,
                       trace[:sweeps].copy())


# --------------------------------------------------------------------------
# closed-form eigenvector shortcut


@dataclass
class PowerIterationResult:
    p: np.ndarray
    eigenvector: np.ndarray
    eigenvalue: float
    iterations: int
    converged: bool


def principal_eigenvector(M, steps: int = 300, tol: float = 1e-10, x0=None, rng=None):
    """Dominant *algebraic* eigenpair of Hermitian ``M`` by shifted power iteration.

    The shift is the Gershgorin bound ``max_i sum_j |M_ij|``, which makes
    ``M + shift I`` positive semidefinite. Stops once the residual
    ``||M x - lambda x||`` drops below ``tol * shift``.

    Returns ``(x, lambda, iterations, converged)``.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    shift = float(np.max(np.sum(np.abs(M), axis=1)))
    if x0 is None:
        gen = np.random.default_rng(rng)
        x0 = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    x = np.asarray(x0, dtype=complex)
    x = x / np.linalg.norm(x)
    if shift == 0.0:
        return x, 0.0, 0, True
    Mx = M @ x
    lam = np.real(np.vdot(x, Mx))
    converged = False
    it = 0
    for it in range(1, steps + 1):
        y = Mx + shift * x
        x = y / np.linalg.norm(y)
        Mx = M @ x
        lam = np.real(np.vdot(x, Mx))
        if np.linalg.norm(Mx - lam * x) <= tol * shift:
            converged = True
            break
    return x, float(lam), it, converged


def closed_form_phases(M, config: OptimizerConfig = OptimizerConfig(),
                       x0=None) -> PowerIterationResult:
    M = np.asarray(M, dtype=complex)
    _check_hermitian(M)
    x, lam, it, ok = principal_eigenvector(M, config.power_steps, config.power_tol, x0,
                                           config.seed)
    return PowerIterationResult(_round_to_phases(x), x, lam, it, ok)


# --------------------------------------------------------------------------
# mapping between p and the combiner


def phases_from_p(p, dims: SystemDims) -> AnalogCombiner:
    """Combiner whose optimization vector is ``q = (-j + p) / 2`` (weights ``(j + conj p) / 2``)."""
    p = np.asarray(p, dtype=complex)
    if np.any(np.abs(np.abs(p) - 1.0) > 1e-8):
        raise ValueError("p must have unit-modulus entries")
    return AnalogCombiner(-np.angle(p), dims)


def p_from_combiner(Q: AnalogCombiner) -> np.ndarray:
    return np.exp(-1j * Q.phases)


# --------------------------------------------------------------------------
# outer loop


@dataclass
class OptimizationResult:
    combiner: AnalogCombiner
    rate: float                  # exact sum rate of the returned combiner
    initial_rate: float          # exact rate of the random initialization
    trace: List[float]           # exact rate after every outer iteration
    iterations: int
    converged: bool
    surrogate: List[dict] = field(default_factory=list)
    solver_steps: List[int] = field(default_factory=list)


def _inner_stats(Q, A, H, scenario, config, g_approx, cd_approx):
    d = scenario.dims
    if config.inner_stats == "exact":
        st = bussgang_stats(Q, A, H, scenario.rho, scenario.eta)
        return st.G, st.C_d
    return g_approx * np.eye(d.N_d), cd_approx * np.eye(d.N_d)


def optimize_analog(H, scenario: Scenario, config: OptimizerConfig = OptimizerConfig(),
                    initial: Optional[AnalogCombiner] = None) -> OptimizationResult:
    """Alternate closed-form ``(Y, gamma)`` updates with a ``q``-step until the exact rate settles.

    The returned combiner is the best iterate by exact sum rate, the random
    initialization included.
    """
    dims, rho, eta = scenario.dims, scenario.rho, scenario.eta
    A = scenario.propagation
    rng = np.random.default_rng(config.seed)
    Q = initial if initial is not None else random_combiner(dims, rng)
    rate0 = exact_sum_rate(Q, A, H, rho, eta)
    result = OptimizationResult(Q, rate0, rate0, [], 0, False)
    if config.solver == "random":
        result.converged = True
        return result

    g_approx = approx_gain_scalar(dims, rho, eta)
    cd_approx = approx_distortion_scalar(eta)
    U = random_factor(dims.N + 1, config.rank_for(dims.N + 1), rng)
    x = None
    prev = rate0
    gamma_prev = Y_prev = None
    for it in range(1, config.max_outer_iterations + 1):
        G_in, Cd_in = _inner_stats(Q, A, H, scenario, config, g_approx, cd_approx)
        Keff = effective_map(G_in, Q, A)
        Y = update_y(Keff, H, Cd_in, rho)
        gamma = update_gamma(Keff, H, Cd_in, rho)
        form = assemble_xi_psi(H, A, G_in, gamma, Y, rho, dims)
        M = build_sdr_matrix(form.xi, form.psi)

        record = {"tight": float(np.sum(np.log2(1.0 + gamma)))}
        if gamma_prev is not None:
            record["stale"] = reformulated_rate(Q, gamma_prev, Y_prev, H, A, G_in, Cd_in, rho)
            record["after_y"] = reformulated_rate(Q, gamma_prev, Y, H, A, G_in, Cd_in, rho)

        if config.solver == "sdr":
            sol = solve_sdr(M, config, U0=U)
            U, p, steps = sol.U, sol.p, sol.sweeps
        else:
            pw = closed_form_phases(M, config, x0=x)
            x, p, steps = pw.eigenvector, pw.p, pw.iterations
        Q_new = phases_from_p(p, dims)
        record["after_p"] = reformulated_rate(Q_new, gamma, Y, H, A, G_in, Cd_in, rho) \
            if config.inner_stats == "approx" else float("nan")
        result.surrogate.append(record)
        result.solver_steps.append(int(steps))

        Q = Q_new
        gamma_prev, Y_prev = gamma, Y
        rate = exact_sum_rate(Q, A, H, rho, eta)
        result.trace.append(rate)
        result.iterations = it
        if rate > result.rate:
            result.rate, result.combiner = rate, Q
        if abs(rate - prev) <= config.rate_tol * max(abs(prev), 1e-12):
            result.converged = True
            break
        prev = rate
    return result
