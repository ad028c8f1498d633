"""Closed-form asymptotic statistics of the mutual information.

Given a converged fixed-point solution this module evaluates the
deterministic-equivalent ergodic MI, assembles the 2M x 2M block matrix B
whose log-det gives the asymptotic variance, computes that variance, and
provides two cross checks: a Gaussian outage approximation and an
independent per-column linear-system evaluation of the same variance.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .errors import InvalidRegimeError
from .normal import norm_cdf
from .solver import DeltaSolution, Resolvents, solve_deltas

ORACLE_MAX_COLUMNS = 64


@dataclass(frozen=True)
class BMatrix:
    """Blocks of B = [[Pi, Gamma], [Xi + Lambda~, Pi^T]].

    All blocks are M x M real and entrywise nonnegative; Xi has a zero
    diagonal and Lambda~ is diagonal.
    """

    pi: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    lambda_tilde: np.ndarray

    @property
    def m(self) -> int:
        return self.pi.shape[0]

    def full(self) -> np.ndarray:
        top = np.hstack([self.pi, self.gamma])
        bottom = np.hstack([self.xi + np.diag(self.lambda_tilde), self.pi.T])
        return np.vstack([top, bottom])

    def leading(self, j: int) -> np.ndarray:
        """B_j: the 2j x 2j matrix built from the leading j x j blocks."""
        top = np.hstack([self.pi[:j, :j], self.gamma[:j, :j]])
        bottom = np.hstack([self.xi[:j, :j] + np.diag(self.lambda_tilde[:j]),
                            self.pi[:j, :j].T])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class AsymptoticStats:
    """Deterministic-equivalent mean and CLT variance at one noise level."""

    emi_nats: float
    variance: float
    zeta: float
    solution: DeltaSolution

    @property
    def emi_bits(self) -> float:
        return self.emi_nats / math.log(2.0)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def emi_deterministic(model: ChannelModel, solution: DeltaSolution,
                      res: Resolvents) -> float:
    """Deterministic equivalent of the ergodic MI, in nats.

    log det[zeta^{-1} T^{-1}] + sum_j log(1 + delta_j)
      - (zeta / M) sum_{ij} sigma^2_ij T_ii T~_jj

    The middle term is -log det[zeta psi~] written through the identity
    zeta psi~_j = 1/(1 + delta_j) that holds at z = -zeta.
    """
    n, m = model.dims
    zeta = solution.rho
    term1 = res.logdet_t_inv - n * math.log(zeta)
    term2 = float(np.sum(np.log1p(solution.delta)))
    term3 = (zeta / m) * float(res.t_diag @ model.profile.matrix @ res.t_tilde_diag)
    return term1 + term2 - term3


def build_b(model: ChannelModel, solution: DeltaSolution,
            res: Resolvents) -> BMatrix:
    """Assemble the four blocks of the variance matrix B.

    Pi_{j,k}    = a_k^H T D_j T a_k / (M (1+delta_k)^2)
    Xi_{j,k}    = |a_j^H T a_k|^2 / ((1+delta_j)^2 (1+delta_k)^2), j != k
    Gamma_{j,k} = tr(D_j T D_k T) / M^2
    Lambda~     = rho^2 diag(t~_jj^2)

    With w_k = T a_k the quadratic forms reduce to column sums against
    |w|^2, and the Gamma double trace to Sigma^T |T|^2 Sigma, because T is
    Hermitian.
    """
    m = model.dims[1]
    sigma = model.profile.matrix
    one_plus_sq = (1.0 + solution.delta) ** 2
    rho = solution.rho

    if np.any(model.los):
        w = res.t_mat @ model.los                      # w[:, k] = T a_k
        pi = (sigma.T @ (np.abs(w) ** 2)) / (m * one_plus_sq[None, :])
        gram = model.los.conj().T @ w                  # a_j^H T a_k
        xi = np.abs(gram) ** 2 / np.outer(one_plus_sq, one_plus_sq)
        np.fill_diagonal(xi, 0.0)
    else:
        pi = np.zeros((m, m))
        xi = np.zeros((m, m))

    gamma = sigma.T @ (np.abs(res.t_mat) ** 2) @ sigma / m ** 2
    gamma = 0.5 * (gamma + gamma.T)
    lam = (rho * res.t_tilde_diag) ** 2
    return BMatrix(pi=np.ascontiguousarray(pi), xi=xi, gamma=gamma,
                   lambda_tilde=lam)


def variance_clt(b: BMatrix) -> float:
    """Asymptotic variance -log det(I_{2M} - B), in nats^2.

    The identity is 2M x 2M to match B's block structure.  Evaluated by
    pivoted-LU log-det with sign tracking; a non-positive determinant means
    the spectral-radius condition failed and is reported as an invalid
    regime instead of a complex logarithm.
    """
    s = np.eye(2 * b.m) - b.full()
    sign, logabsdet = np.linalg.slogdet(s)
    if sign <= 0:
        raise InvalidRegimeError(
            f"det(I - B) is not positive (sign {sign:+.0f}); the variance "
            "formula does not apply -- check solver convergence")
    return -logabsdet


def oracle_from_blocks(b: BMatrix) -> float:
    """Per-column linear-system variance evaluation on given B blocks.

    For each j the vector p_j solves (I_{2j} - B_j) p_j = q_j with
    q_j = M [Gamma_{j,1..j}, Pi_{j,1..j}]^T, and the variance accumulates
    (1/M) sum_j (2 p_j[2j] - rho^2 t~_jj^2 p_j[j]).  The j systems are
    solved independently so this code path shares nothing with
    variance_clt beyond the blocks; agreement improves as M grows.
    """
    m = b.m
    lam = b.lambda_tilde
    total = 0.0
    for j in range(1, m + 1):
        s_j = np.eye(2 * j) - b.leading(j)
        q_j = m * np.concatenate([b.gamma[j - 1, :j], b.pi[j - 1, :j]])
        try:
            p_j = np.linalg.solve(s_j, q_j)
        except np.linalg.LinAlgError as exc:
            raise InvalidRegimeError(
                f"singular system at column {j} in the variance oracle") from exc
        total += 2.0 * p_j[2 * j - 1] - lam[j - 1] * p_j[j - 1]
    return total / m


def variance_linear_system_oracle(model: ChannelModel, solution: DeltaSolution,
                                  res: Resolvents,
                                  max_columns: int = ORACLE_MAX_COLUMNS) -> float:
    """Independent variance cross-check of variance_clt (see oracle_from_blocks)."""
    m = model.dims[1]
    if m > max_columns:
        raise ValueError(
            f"oracle limited to M <= {max_columns} columns (got {m}); "
            "its cost grows like M^4")
    return oracle_from_blocks(build_b(model, solution, res))


def outage_probability(stats: AsymptoticStats, rate_nats: float) -> float:
    """Gaussian outage approximation P(C < R) = Phi((R - mean)/std)."""
    if stats.variance <= 0:
        raise ValueError("variance must be positive")
    return float(norm_cdf((rate_nats - stats.emi_nats) / stats.std))


def outage_curve(stats: AsymptoticStats, rates) -> list[tuple[float, float]]:
    return [(float(r), outage_probability(stats, float(r))) for r in rates]


def auto_rate_grid(stats: AsymptoticStats, half_width_sigmas: float = 5.0,
                   points: int = 101) -> np.ndarray:
    """Default rate grid: mean +/- 5 sigma, 101 points."""
    lo = stats.emi_nats - half_width_sigmas * stats.std
    hi = stats.emi_nats + half_width_sigmas * stats.std
    return np.linspace(lo, hi, points)


def analyze_model(model: ChannelModel, tol: float = 1e-12,
                  max_iter: int = 10_000, damping: float = 1.0):
    """Solve the fixed point and return (stats, b_matrix, solution, resolvents)."""
    solution, res = solve_deltas(model, tol=tol, max_iter=max_iter,
                                 damping=damping)
    emi = emi_deterministic(model, solution, res)
    b = build_b(model, solution, res)
    variance = variance_clt(b)
    stats = AsymptoticStats(emi_nats=emi, variance=variance,
                            zeta=solution.rho, solution=solution)
    return stats, b, solution, res
