"""Per-sample latent factor estimation by restricted probit likelihood.

Each sample's latent position maximizes the probit log-likelihood over the
fitted model, restricted to components whose noise standard deviation
exceeds a threshold picked so that m% of components participate (small
noise variances otherwise destabilize the objective).  The objective is
globally concave, so a damped Newton ascent with the Fisher information as
curvature, started from the origin, finds the maximizer; rows are
independent and optimized simultaneously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import std_normal_cdf, std_normal_pdf
from .moments import BinaryMatrix
from .spectral import FactorModel

_PHI_FLOOR = 1e-15  # cdf values are clipped into [floor, 1-floor] inside logs
_ALPHA_MIN = 1e-12  # smallest step-halving factor before a step is abandoned


@dataclass(frozen=True)
class ScoreConfig:
    """Scoring options: inclusion percentage, stopping rule, optional box."""

    m_percent: float = 90.0
    grad_tol: float = 1e-8
    max_iter: int = 100
    z_max: float | None = None

    def __post_init__(self):
        if not 0.0 < self.m_percent <= 100.0:
            raise ValueError(f"m_percent must be in (0, 100], got {self.m_percent}")
        if self.grad_tol <= 0.0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class LatentScores:
    """Estimated factors with per-sample convergence records."""

    z_hat: np.ndarray
    iterations: np.ndarray
    grad_norms: np.ndarray
    converged: np.ndarray
    ll_path: list | None = None

    @property
    def n(self) -> int:
        return self.z_hat.shape[0]


def select_tau_threshold(tau2_hat: np.ndarray, m_percent: float) -> float:
    """Threshold such that ceil(m * p / 100) components satisfy tau_j > tau.

    Sits just below the k-th largest noise standard deviation, so exact
    ties at the cut are all included rather than excluded.
    """
    tau2_hat = np.asarray(tau2_hat, dtype=float)
    if np.any(tau2_hat < 0.0):
        raise ValueError("noise variances must be non-negative")
    if not 0.0 < m_percent <= 100.0:
        raise ValueError(f"m_percent must be in (0, 100], got {m_percent}")
    tau_sd = np.sqrt(tau2_hat)
    p = tau_sd.size
    k = math.ceil(m_percent * p / 100.0)
    kth_largest = np.partition(tau_sd, p - k)[p - k]
    return float(kth_largest) - 1e-12


def restricted_loglik(
    z: np.ndarray, model: FactorModel, tau: float, y_row: np.ndarray
) -> float:
    """Restricted probit log-likelihood of one sample at latent position z."""
    z2, y2, incl = _single_row_args(z, model, tau, y_row)
    return float(_loglik_rows(z2, y2, incl, model.p)[0])


def loglik_gradient(
    z: np.ndarray, model: FactorModel, tau: float, y_row: np.ndarray
) -> np.ndarray:
    """Gradient of the restricted log-likelihood in z."""
    z2, y2, incl = _single_row_args(z, model, tau, y_row)
    return _gradient_rows(z2, y2, incl, model.p)[0]


def fisher_information(z: np.ndarray, model: FactorModel, tau: float) -> np.ndarray:
    """Fisher information of the restricted likelihood at z (d x d, PSD)."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.d:
        raise ValueError(f"z has length {z.size}, model has d={model.d}")
    incl = _inclusion(model, tau)
    return _fisher_rows(z[None, :], incl, model.p)[0]


def estimate_scores(
    y: BinaryMatrix,
    model: FactorModel,
    cfg: ScoreConfig | None = None,
    z0: np.ndarray | None = None,
    record_path: bool = False,
) -> LatentScores:
    """Estimate the latent factors of every sample.

    Damped Newton ascent with Fisher scoring: the step solves the Fisher
    system and is halved until the likelihood does not decrease, so the
    per-row likelihood path is non-decreasing.  A row stops once its
    gradient norm falls below ``cfg.grad_tol`` or after ``cfg.max_iter``
    steps.  Rows are independent; the result does not depend on their order.
    """
    cfg = cfg or ScoreConfig()
    if model.p != y.p:
        raise ValueError(f"model has p={model.p} but data has p={y.p}")
    n, d = y.n, model.d
    tau = select_tau_threshold(model.tau2_hat, cfg.m_percent)
    incl = _inclusion(model, tau)

    if z0 is None:
        z = np.zeros((n, d))
    else:
        z = np.array(z0, dtype=float)
        if z.shape != (n, d):
            raise ValueError(f"z0 must have shape {(n, d)}, got {z.shape}")

    if incl.b.shape[0] == 0:
        # Nothing to fit against: the start point is already stationary.
        return LatentScores(
            z_hat=z,
            iterations=np.zeros(n, dtype=int),
            grad_norms=np.zeros(n),
            converged=np.ones(n, dtype=bool),
            ll_path=[np.zeros(n)] if record_path else None,
        )

    y_incl = y.data[:, incl.mask].astype(np.float64)
    iters = np.zeros(n, dtype=int)
    gnorm = np.zeros(n)
    conv = np.zeros(n, dtype=bool)
    active = np.arange(n)
    ll = _loglik_rows(z, y_incl, incl, model.p)
    path = [ll.copy()] if record_path else None

    steps = 0
    while active.size:
        g = _gradient_rows(z[active], y_incl[active], incl, model.p)
        gn = np.linalg.norm(g, axis=1)
        done = gn <= cfg.grad_tol
        gnorm[active[done]] = gn[done]
        conv[active[done]] = True
        keep = ~done
        active = active[keep]
        if active.size == 0:
            break
        if steps >= cfg.max_iter:
            gnorm[active] = gn[keep]
            break
        g = g[keep]
        steps += 1

        fisher = _fisher_rows(z[active], incl, model.p)
        step = _solve_steps(fisher, g, d)

        # Step halving until the likelihood does not decrease, per row.
        alpha = np.ones(active.size)
        z_cur = z[active]
        ll_cur = ll[active]
        z_new = _candidate(z_cur, step, alpha, cfg.z_max)
        ll_new = _loglik_rows(z_new, y_incl[active], incl, model.p)
        bad = ll_new < ll_cur
        while bad.any() and alpha[bad].max() > _ALPHA_MIN:
            alpha[bad] *= 0.5
            z_new[bad] = _candidate(z_cur[bad], step[bad], alpha[bad], cfg.z_max)
            ll_new[bad] = _loglik_rows(z_new[bad], y_incl[active[bad]], incl, model.p)
            bad = ll_new < ll_cur
        # Rows whose step never stopped decreasing keep their position.
        z_new[bad] = z_cur[bad]
        ll_new[bad] = ll_cur[bad]

        z[active] = z_new
        ll[active] = ll_new
        iters[active] = steps
        if record_path:
            path.append(ll.copy())

    return LatentScores(
        z_hat=z,
        iterations=iters,
        grad_norms=gnorm,
        converged=conv,
        ll_path=path,
    )


def reconstruct(model: FactorModel, scores: LatentScores) -> np.ndarray:
    """Per-sample reconstructions: row i is b_hat @ z_i."""
    return scores.z_hat @ model.b_hat.T


@dataclass(frozen=True)
class _Inclusion:
    mask: np.ndarray
    b: np.ndarray
    c: np.ndarray
    tau_sd: np.ndarray


def _inclusion(model: FactorModel, tau: float) -> _Inclusion:
    tau_sd = np.sqrt(np.maximum(model.tau2_hat, 0.0))
    # A component with zero noise scale has a degenerate probit; it can
    # only pass the indicator when tau < 0, which the threshold rule never
    # produces for usable variances, so it is excluded outright.
    mask = (tau_sd > tau) & (tau_sd > 0.0)
    return _Inclusion(
        mask=mask,
        b=model.b_hat[mask],
        c=model.c_hat[mask],
        tau_sd=tau_sd[mask],
    )


def _single_row_args(z, model, tau, y_row):
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.d:
        raise ValueError(f"z has length {z.size}, model has d={model.d}")
    y_row = np.asarray(y_row, dtype=float).reshape(-1)
    if y_row.size != model.p:
        raise ValueError(f"y_row has length {y_row.size}, model has p={model.p}")
    incl = _inclusion(model, tau)
    return z[None, :], y_row[None, incl.mask], incl


def _standardized(z: np.ndarray, incl: _Inclusion) -> np.ndarray:
    return (z @ incl.b.T - incl.c[None, :]) / incl.tau_sd[None, :]


def _both_tails(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # 1 - Phi(x) formed by subtraction loses ~9 digits for moderate x;
    # the complementary tail Phi(-x) keeps full relative precision.
    lower = np.maximum(std_normal_cdf(x), _PHI_FLOOR)
    upper = np.maximum(std_normal_cdf(-x), _PHI_FLOOR)
    return lower, upper


def _loglik_rows(z, y_incl, incl: _Inclusion, p: int) -> np.ndarray:
    if incl.b.shape[0] == 0:
        return np.zeros(z.shape[0])
    x = _standardized(z, incl)
    cdf, cdf_c = _both_tails(x)
    terms = y_incl * np.log(cdf) + (1.0 - y_incl) * np.log(cdf_c)
    return terms.sum(axis=1) / p


def _gradient_rows(z, y_incl, incl: _Inclusion, p: int) -> np.ndarray:
    x = _standardized(z, incl)
    cdf, cdf_c = _both_tails(x)
    # y*cdf_c - (1-y)*cdf equals y - Phi(x) without the cancellation.
    w = (y_incl * cdf_c - (1.0 - y_incl) * cdf) * std_normal_pdf(x) / (cdf * cdf_c)
    return (w / incl.tau_sd[None, :]) @ incl.b / p


def _fisher_rows(z, incl: _Inclusion, p: int) -> np.ndarray:
    x = _standardized(z, incl)
    cdf, cdf_c = _both_tails(x)
    pdf = std_normal_pdf(x)
    u = pdf * pdf / (incl.tau_sd[None, :] ** 2 * cdf * cdf_c)
    return np.einsum("nm,mk,ml->nkl", u, incl.b, incl.b) / p


def _solve_steps(fisher: np.ndarray, g: np.ndarray, d: int) -> np.ndarray:
    try:
        return np.linalg.solve(fisher, g[..., None])[..., 0]
    except np.linalg.LinAlgError:
        pass
    # At least one row is singular: solve row by row, ridge-regularizing
    # the offenders.
    step = np.empty_like(g)
    eye = np.eye(d)
    for i in range(g.shape[0]):
        try:
            step[i] = np.linalg.solve(fisher[i], g[i])
        except np.linalg.LinAlgError:
            trace = float(np.trace(fisher[i]))
            if trace <= 0.0:
                step[i] = 0.0
            else:
                ridge = 1e-8 * trace / d
                step[i] = np.linalg.solve(fisher[i] + ridge * eye, g[i])
    return step


def _candidate(z, step, alpha, z_max):
    z_new = z + alpha[:, None] * step
    if z_max is not None:
        norms = np.linalg.norm(z_new, axis=1)
        over = norms > z_max
        if over.any():
            z_new[over] *= (z_max / norms[over])[:, None]
    return z_new
