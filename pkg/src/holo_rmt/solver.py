"""Fixed-point solution of the coupled deterministic-equivalent system.

For a channel H = A + Sigma^(o1/2) .* X of size N x M evaluated at
z = -rho (rho > 0), the system couples M scalars delta_j with N scalars
delta~_i through the resolvent-equivalent matrices

    T  = ( diag(rho (1 + delta~_i))  + rho A  psi~ A^H )^{-1}    (N x N)
    T~ = ( diag(rho (1 + delta_j))   + rho A^H psi  A  )^{-1}    (M x M)

with psi_i = 1 / (rho (1 + delta~_i)) and psi~_j = 1 / (rho (1 + delta_j)),
and the self-consistency conditions

    delta_j  = tr(D_j T) / M,     D_j  = diag of the j-th column of Sigma,
    delta~_i = tr(D~_i T~) / M,   D~_i = diag of the i-th row of Sigma.

Iteration follows the Gauss-Seidel order of the underlying algorithm: the
delta update uses the previous iterate's T, the delta~ update then uses the
T~ built from the fresh delta.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .channel import ChannelModel
from .errors import ConvergenceError, NumericalError

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
_HERMITIAN_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class DeltaSolution:
    """Converged fixed-point parameters at z = -rho."""

    delta: np.ndarray        # length M, positive
    delta_tilde: np.ndarray  # length N, positive
    rho: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class Resolvents:
    """Resolvent equivalents and their diagonals at z = -rho.

    ``t_diag`` and ``t_tilde_diag`` are the real diagonals of T and T~;
    ``psi`` / ``psi_tilde`` the diagonal weight vectors.  T and T~ are
    Hermitian positive definite by construction.
    """

    t_mat: np.ndarray
    t_tilde_mat: np.ndarray
    psi: np.ndarray
    psi_tilde: np.ndarray
    t_diag: np.ndarray
    t_tilde_diag: np.ndarray
    logdet_t_inv: float
    logdet_t_tilde_inv: float


def build_d_matrices(profile):
    """Diagonals of the per-column and per-row weighting matrices.

    Returns (d_cols, d_rows): row j of ``d_cols`` is the diagonal of D_j
    (the j-th column of Sigma); row i of ``d_rows`` is the diagonal of D~_i
    (the i-th row of Sigma).
    """
    sigma = profile.matrix
    return sigma.T.copy(), sigma.copy()


def _hpd_inverse(mat):
    """Inverse and log-determinant of a Hermitian positive definite matrix."""
    try:
        factor = sla.cho_factor(mat, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        eigmin = float(np.linalg.eigvalsh(mat).min())
        raise NumericalError(
            f"resolvent inverse argument is not positive definite "
            f"(min eigenvalue {eigmin:.3e})") from exc
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
    inv = sla.cho_solve(factor, np.eye(mat.shape[0], dtype=mat.dtype),
                        check_finite=False)
    return 0.5 * (inv + inv.conj().T), logdet


def _real_diag(mat):
    d = np.diag(mat)
    if np.iscomplexobj(d):
        worst = float(np.abs(d.imag).max()) if d.size else 0.0
        if worst > _HERMITIAN_IMAG_TOL:
            raise NumericalError(
                f"resolvent diagonal has imaginary part {worst:.3e}")
        return np.ascontiguousarray(d.real)
    return d.copy()


def compute_resolvents(model: ChannelModel, delta, delta_tilde,
                       rho: float) -> Resolvents:
    """Materialize T, T~, psi, psi~ for given fixed-point parameters."""
    delta = np.asarray(delta, dtype=float)
    delta_tilde = np.asarray(delta_tilde, dtype=float)
    if np.any(delta <= 0) or np.any(delta_tilde <= 0):
        raise ValueError("delta parameters must be entrywise positive")
    if rho <= 0:
        raise ValueError("rho must be positive")
    a = model.los
    real_path = not np.iscomplexobj(a) or not np.any(a.imag)
    if real_path:
        a = np.ascontiguousarray(a.real)

    psi = 1.0 / (rho * (1.0 + delta_tilde))
    psi_tilde = 1.0 / (rho * (1.0 + delta))

    t_inv = np.diag(rho * (1.0 + delta_tilde)).astype(a.dtype)
    t_inv += rho * (a * psi_tilde[None, :]) @ a.conj().T
    t_mat, logdet_t_inv = _hpd_inverse(t_inv)

    tt_inv = np.diag(rho * (1.0 + delta)).astype(a.dtype)
    tt_inv += rho * (a.conj().T * psi[None, :]) @ a
    t_tilde_mat, logdet_tt_inv = _hpd_inverse(tt_inv)

    return Resolvents(t_mat=t_mat, t_tilde_mat=t_tilde_mat, psi=psi,
                      psi_tilde=psi_tilde, t_diag=_real_diag(t_mat),
                      t_tilde_diag=_real_diag(t_tilde_mat),
                      logdet_t_inv=logdet_t_inv,
                      logdet_t_tilde_inv=logdet_tt_inv)


def _t_diag_only(a, delta, delta_tilde, rho):
    """Real diagonal of T alone (one Hermitian inversion per half-step)."""
    psi_tilde = 1.0 / (rho * (1.0 + delta))
    t_inv = np.diag(rho * (1.0 + delta_tilde)).astype(a.dtype)
    t_inv += rho * (a * psi_tilde[None, :]) @ a.conj().T
    return _real_diag(_hpd_inverse(t_inv)[0])


def _t_tilde_diag_only(a, delta, delta_tilde, rho):
    psi = 1.0 / (rho * (1.0 + delta_tilde))
    tt_inv = np.diag(rho * (1.0 + delta)).astype(a.dtype)
    tt_inv += rho * (a.conj().T * psi[None, :]) @ a
    return _real_diag(_hpd_inverse(tt_inv)[0])


def solve_deltas(model: ChannelModel, rho: float | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 damping: float = 1.0, init: float = 1.0):
    """Run the fixed-point iteration until the sup-norm update <= tol.

    ``rho`` defaults to the model's zeta.  ``damping`` in (0, 1] relaxes the
    update (1 = plain iteration); it exists because no convergence rate is
    guaranteed.  Returns (DeltaSolution, Resolvents).

    Raises ConvergenceError with the residual trace when max_iter is
    exhausted.
    """
    if rho is None:
        rho = model.zeta
    if rho <= 0:
        raise ValueError("rho must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")

    n, m = model.dims
    sigma = model.profile.matrix
    a = model.los
    if not np.any(a.imag):
        a = np.ascontiguousarray(a.real)
    centered = not np.any(a)

    delta = np.full(m, float(init))
    delta_tilde = np.full(n, float(init))
    residuals = []
    for iteration in range(1, max_iter + 1):
        if centered:
            # T and T~ are diagonal when A = 0; skip the matrix inversions.
            t_diag = 1.0 / (rho * (1.0 + delta_tilde))
            delta_new = _relax(delta, sigma.T @ t_diag / m, damping)
            tt_diag = 1.0 / (rho * (1.0 + delta_new))
            delta_tilde_new = _relax(delta_tilde, sigma @ tt_diag / m, damping)
        else:
            t_diag = _t_diag_only(a, delta, delta_tilde, rho)
            delta_new = _relax(delta, sigma.T @ t_diag / m, damping)
            tt_diag = _t_tilde_diag_only(a, delta_new, delta_tilde, rho)
            delta_tilde_new = _relax(delta_tilde, sigma @ tt_diag / m, damping)

        residual = max(float(np.abs(delta_new - delta).max()),
                       float(np.abs(delta_tilde_new - delta_tilde).max()))
        residuals.append(residual)
        delta, delta_tilde = delta_new, delta_tilde_new
        if residual <= tol:
            solution = DeltaSolution(delta=delta, delta_tilde=delta_tilde,
                                     rho=float(rho), iterations=iteration,
                                     residual=residual)
            return solution, compute_resolvents(model, delta, delta_tilde, rho)

    raise ConvergenceError(
        f"fixed point did not reach tol={tol:g} in {max_iter} iterations "
        f"(last residual {residuals[-1]:.3e})", residuals=residuals)


def _relax(old, new, damping):
    if damping == 1.0:
        return new
    return (1.0 - damping) * old + damping * new


def self_consistency_residual(model: ChannelModel, solution: DeltaSolution,
                              res: Resolvents) -> float:
    """sup-norm defect of the returned solution in the original equations."""
    m = model.dims[1]
    sigma = model.profile.matrix
    r1 = np.abs(solution.delta - sigma.T @ res.t_diag / m).max()
    r2 = np.abs(solution.delta_tilde - sigma @ res.t_tilde_diag / m).max()
    return float(max(r1, r2))


def delta_upper_bounds(model: ChannelModel, rho: float):
    """Trace-inequality bounds: delta_j <= (N/M) s2max/rho, delta~_i <= s2max/rho."""
    n, m = model.dims
    s2max = model.profile.sigma2_max
    return (n / m) * s2max / rho, s2max / rho
