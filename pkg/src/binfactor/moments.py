"""Moment estimation: binary data to thresholds and tetrachoric correlations.

For a 0/1 data matrix the column means estimate the marginal success
probabilities, whose normal quantiles give the probit thresholds
``c_j = -Phi^{-1}(P_j)``.  Each pairwise joint success frequency is then
inverted through the bivariate upper tail probability at those thresholds,
producing the tetrachoric correlation estimate ``sigma_{j1,j2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import RHO_CLAMP, std_normal_quantile, tetrachoric_invert


@dataclass(frozen=True)
class BinaryMatrix:
    """An n x p matrix of {0, 1} observations (rows are samples)."""

    data: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {data.shape}")
        n, p = data.shape
        if n < 1 or p < 2:
            raise ValueError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
        if not np.isin(data, (0, 1)).all():
            raise ValueError("entries must all be exactly 0 or 1")
        object.__setattr__(self, "data", np.ascontiguousarray(data, dtype=np.uint8))
        if self.column_names is not None:
            names = tuple(self.column_names)
            if len(names) != p:
                raise ValueError(f"{len(names)} column names for {p} columns")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MarginalSummary:
    """Marginal frequencies and the thresholds derived from them.

    ``c_hat[j] = -Phi^{-1}(clamped p_hat[j])``; ``clamp_count`` is the
    number of frequencies that had to be pulled into the open interval to
    keep the thresholds finite.
    """

    p_hat: np.ndarray
    c_hat: np.ndarray
    clamp_count: int


@dataclass(frozen=True)
class TetrachoricMatrix:
    """Symmetric correlation estimate with unit diagonal.

    ``clamp_flags`` holds the (j1, j2) pairs (j1 < j2) whose joint
    frequency fell on or outside the attainable bracket, where the
    correlation was clamped to ``+-(1 - RHO_CLAMP)``.
    """

    sigma: np.ndarray
    clamp_flags: frozenset = field(default_factory=frozenset)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def marginal_frequencies(y: BinaryMatrix) -> np.ndarray:
    """Column means of the binary matrix: the estimated P(Y_j = 1)."""
    return y.data.mean(axis=0, dtype=np.float64)


def thresholds(p_hat: np.ndarray, n: int) -> MarginalSummary:
    """Probit thresholds from marginal frequencies.

    Frequencies are clamped into [1/(2n), 1 - 1/(2n)] first: a degenerate
    all-zero or all-one column would otherwise give an infinite threshold.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    if np.any((p_hat < 0.0) | (p_hat > 1.0)):
        raise ValueError("frequencies must lie in [0, 1]")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    lo = 1.0 / (2.0 * n)
    clamped = np.clip(p_hat, lo, 1.0 - lo)
    clamp_count = int(np.count_nonzero(clamped != p_hat))
    c_hat = -std_normal_quantile(clamped)
    return MarginalSummary(p_hat.copy(), np.asarray(c_hat, dtype=float), clamp_count)


def pairwise_joint_frequency(y: BinaryMatrix, j1: int, j2: int) -> float:
    """Fraction of rows where columns j1 and j2 are both 1."""
    p = y.p
    if not (0 <= j1 < p and 0 <= j2 < p):
        raise ValueError(f"column indices ({j1}, {j2}) out of range for p={p}")
    if j1 == j2:
        raise ValueError("column indices must differ")
    both = y.data[:, j1] & y.data[:, j2]
    return float(both.mean(dtype=np.float64))


def joint_frequency_matrix(y: BinaryMatrix) -> np.ndarray:
    """All pairwise joint frequencies at once (diagonal holds marginals)."""
    x = y.data.astype(np.float64)
    return (x.T @ x) / y.n


def estimate_tetrachoric(y: BinaryMatrix) -> tuple[MarginalSummary, TetrachoricMatrix]:
    """Full moment pipeline: frequencies, thresholds, pairwise inversion.

    Every unordered column pair is inverted independently, so the result
    does not depend on evaluation order; row permutations of the input
    leave it unchanged.
    """
    ms = thresholds(marginal_frequencies(y), y.n)
    joint = joint_frequency_matrix(y)
    tetra = _invert_joint_matrix(ms.c_hat, joint)
    return ms, tetra


def tetrachoric_from_probabilities(
    p_marginal: np.ndarray,
    p_joint: np.ndarray,
    n: int | None = None,
) -> tuple[MarginalSummary, TetrachoricMatrix]:
    """Run the estimator on externally supplied probabilities.

    With exact population probabilities this recovers the true correlation
    matrix up to root-finder tolerance.  ``n`` enables the finite-sample
    frequency clamp; without it the marginals must lie strictly in (0, 1).
    """
    p_marginal = np.asarray(p_marginal, dtype=float)
    p_joint = np.asarray(p_joint, dtype=float)
    if p_joint.shape != (p_marginal.size, p_marginal.size):
        raise ValueError(
            f"joint matrix shape {p_joint.shape} does not match "
            f"{p_marginal.size} marginals"
        )
    if n is not None:
        ms = thresholds(p_marginal, n)
    else:
        if np.any((p_marginal <= 0.0) | (p_marginal >= 1.0)):
            raise ValueError("marginal probabilities must lie strictly in (0, 1)")
        ms = MarginalSummary(
            p_marginal.copy(),
            np.asarray(-std_normal_quantile(p_marginal), dtype=float),
            0,
        )
    return ms, _invert_joint_matrix(ms.c_hat, p_joint)


def _invert_joint_matrix(c_hat: np.ndarray, joint: np.ndarray) -> TetrachoricMatrix:
    p = c_hat.size
    sigma = np.eye(p)
    flagged = []
    for j1 in range(p):
        for j2 in range(j1 + 1, p):
            res = tetrachoric_invert(c_hat[j1], c_hat[j2], joint[j1, j2])
            sigma[j1, j2] = sigma[j2, j1] = res.rho_hat
            if res.clamped:
                flagged.append((j1, j2))
    return TetrachoricMatrix(sigma, frozenset(flagged))
