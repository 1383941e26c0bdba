"""Gaussian (linear) estimators of mutual information, conditional mutual
information, and transfer entropy with finite history embedding.

All quantities are plug-in estimates in bits, computed from empirical
covariances under a jointly Gaussian model. They are exact for linear
Gaussian processes and first-order approximations otherwise. Estimates are
invariant to per-variable invertible affine maps and clamped at zero (the
population quantity is nonnegative; the clamp only absorbs rounding).

Only pairwise (per-channel) conditioning is exposed: a target that is a
deterministic function of several sources jointly is handled by estimating
one source at a time, which keeps every covariance nondegenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCovariance,
    SeriesTooShort,
    ShapeMismatch,
    TooFewSamples,
)
from .signals import TimeSeries

LN2 = math.log(2.0)

#: Relative eigenvalue floor below which a covariance is treated as
#: rank-deficient (the Gaussian information quantity diverges).
_RANK_RTOL = 1e-12

#: Jitter ladder, as fractions of mean diagonal, tried in order when a
#: Cholesky factorization fails. Exhausting the ladder aborts.
_JITTER_LADDER = (0.0, 1e-12, 1e-9, 1e-6)


@dataclass(frozen=True)
class EmbedSpec:
    """Finite history embedding for transfer entropy.

    ``source_history`` past samples of the source, ending ``delay`` samples
    before the present; ``target_history`` past samples of the target,
    ending one sample before the present. ``delay >= 1`` keeps the source
    block strictly in the past.
    """

    source_history: int = 16
    target_history: int = 16
    delay: int = 1

    def __post_init__(self):
        if self.source_history < 1:
            raise ShapeMismatch("source_history must be >= 1")
        if self.target_history < 1:
            raise ShapeMismatch("target_history must be >= 1")
        if self.delay < 1:
            raise ShapeMismatch("delay must be >= 1")

    def to_dict(self) -> dict:
        return {
            "source_history": self.source_history,
            "target_history": self.target_history,
            "delay": self.delay,
        }


@dataclass(frozen=True)
class CovEstimate:
    """Empirical covariance with the jitter actually applied to make it
    factorizable. ``matrix`` is symmetric and positive definite after jitter."""

    matrix: np.ndarray
    n_samples: int
    jitter_applied: float


def estimate_covariance(data: np.ndarray) -> CovEstimate:
    """Maximum-likelihood covariance (divide by n) of row-sample data,
    symmetrized and jittered just enough to be Cholesky-factorizable.

    Raises
    ------
    DegenerateCovariance
        If the covariance is numerically rank-deficient (a deterministic
        linear dependence among columns) or cannot be factorized after the
        jitter ladder.
    """
    n = data.shape[0]
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    _check_rank(cov)
    jitter = _factorizable_jitter(cov)
    if jitter > 0.0:
        cov = cov + jitter * np.eye(cov.shape[0])
    return CovEstimate(matrix=cov, n_samples=n, jitter_applied=jitter)


def _check_rank(cov: np.ndarray) -> None:
    eigs = np.linalg.eigvalsh(cov)
    if eigs[-1] <= 0.0 or eigs[0] < _RANK_RTOL * eigs[-1]:
        raise DegenerateCovariance(
            "covariance is numerically rank-deficient; the Gaussian "
            "information quantity diverges (deterministic dependence?)"
        )


def _factorizable_jitter(cov: np.ndarray) -> float:
    scale = float(np.trace(cov)) / cov.shape[0]
    for eps in _JITTER_LADDER:
        try:
            np.linalg.cholesky(cov + eps * scale * np.eye(cov.shape[0]))
            return eps * scale
        except np.linalg.LinAlgError:
            continue
    raise DegenerateCovariance("covariance not factorizable after jitter escalation")


def _logdet_chol(cov: np.ndarray, idx: np.ndarray, jitter_scale: float) -> float:
    """log-determinant of a principal submatrix via Cholesky with the shared
    jitter ladder; ``jitter_scale`` is the mean diagonal of the full matrix."""
    if idx.size == 0:
        return 0.0
    sub = cov[np.ix_(idx, idx)]
    for eps in _JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(sub + eps * jitter_scale * np.eye(idx.size))
            return 2.0 * float(np.sum(np.log(np.diag(chol))))
        except np.linalg.LinAlgError:
            continue
    raise DegenerateCovariance("submatrix not factorizable after jitter escalation")


def _as_block(b) -> np.ndarray:
    arr = np.asarray(b, dtype=np.float64)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"blocks must be 1-D or 2-D, got ndim={arr.ndim}")
    return arr


def gaussian_cmi(
    x_block: np.ndarray, y_block: np.ndarray, cond_block: np.ndarray | None = None
) -> float:
    """Plug-in Gaussian conditional mutual information I(X; Y | C) in bits.

    Computes ``0.5 * log2(det S_XC * det S_YC / (det S_C * det S_XYC))``
    from the empirical joint covariance of the row-aligned blocks. With an
    empty conditioning block this is the Gaussian mutual information.

    Parameters
    ----------
    x_block, y_block : ndarray
        2-D arrays with one row per observation (1-D inputs are treated as
        single columns).
    cond_block : ndarray or None
        Conditioning variables, same row count; ``None`` or zero columns for
        unconditional MI.

    Raises
    ------
    DegenerateCovariance
        If the joint covariance is numerically rank-deficient.
    TooFewSamples
        If fewer than ``dim + 2`` rows are supplied.
    """
    x = _as_block(x_block)
    y = _as_block(y_block)
    blocks = [x, y]
    if cond_block is not None:
        c = _as_block(cond_block)
        if c.shape[1] > 0:
            blocks.append(c)
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ShapeMismatch(f"blocks disagree in row count: {sorted(rows)}")
    n = rows.pop()
    dx, dy = x.shape[1], y.shape[1]
    dc = blocks[2].shape[1] if len(blocks) == 3 else 0
    dim = dx + dy + dc
    if n < dim + 2:
        raise TooFewSamples(f"need at least dim+2 = {dim + 2} rows, got {n}")

    joint = np.concatenate(blocks, axis=1)
    if not np.all(np.isfinite(joint)):
        raise ShapeMismatch("blocks must be finite")
    est = estimate_covariance(joint)
    cov = est.matrix
    scale = float(np.trace(cov)) / dim

    ix = np.arange(dx)
    iy = np.arange(dx, dx + dy)
    ic = np.arange(dx + dy, dim)
    ld_xc = _logdet_chol(cov, np.concatenate([ix, ic]), scale)
    ld_yc = _logdet_chol(cov, np.concatenate([iy, ic]), scale)
    ld_c = _logdet_chol(cov, ic, scale)
    ld_all = _logdet_chol(cov, np.arange(dim), scale)
    value = 0.5 * (ld_xc + ld_yc - ld_c - ld_all) / LN2
    if not math.isfinite(value):
        raise DegenerateCovariance("non-finite determinant ratio")
    return max(0.0, value)


def mutual_information(x_block: np.ndarray, y_block: np.ndarray) -> float:
    """Plug-in Gaussian mutual information I(X; Y) in bits."""
    return gaussian_cmi(x_block, y_block, None)


def te_blocks(
    source: np.ndarray, target: np.ndarray, e: EmbedSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-aligned (source-past, target-present, target-past) blocks.

    For each valid time t: source at t-delay-source_history+1 .. t-delay,
    target at t, and target at t-target_history .. t-1. All three share the
    same valid t set (truncation convention).
    """
    n = source.size
    t0 = max(e.delay + e.source_history - 1, e.target_history)
    m = n - t0
    if m < 1:
        raise SeriesTooShort(f"series of length {n} leaves no valid rows")
    x = np.empty((m, e.source_history))
    for j in range(e.source_history):
        start = t0 - e.delay - e.source_history + 1 + j
        x[:, j] = source[start : start + m]
    cond = np.empty((m, e.target_history))
    for j in range(e.target_history):
        start = t0 - e.target_history + j
        cond[:, j] = target[start : start + m]
    y = target[t0 : t0 + m].reshape(-1, 1)
    return x, y, cond


def transfer_entropy(source: TimeSeries, target: TimeSeries, e: EmbedSpec) -> float:
    """Transfer entropy from ``source`` to ``target`` in bits.

    The information the source's past (ending ``delay`` samples back,
    ``source_history`` samples long) carries about the target's present,
    conditioned on the target's own past (``target_history`` samples).
    Estimated with :func:`gaussian_cmi` on row-aligned lag blocks.

    Raises
    ------
    SeriesTooShort
        If fewer than ``source_history + target_history + delay + dim + 2``
        samples are available.
    """
    if len(source) != len(target):
        raise ShapeMismatch(
            f"source length {len(source)} != target length {len(target)}"
        )
    if source.rate_hz != target.rate_hz:
        raise ShapeMismatch("source and target rates differ")
    dim = e.source_history + e.target_history + 1
    min_len = e.source_history + e.target_history + e.delay + dim + 2
    if len(source) <= min_len:
        raise SeriesTooShort(
            f"need more than {min_len} samples for this embedding, got {len(source)}"
        )
    x, y, cond = te_blocks(source.samples, target.samples, e)
    return gaussian_cmi(x, y, cond)


def plug_in_bias(n_samples: int, dim_x: int, dim_y: int = 1) -> float:
    """Analytic first-order bias of the plug-in Gaussian CMI, in bits.

    Reported alongside estimates; never subtracted automatically.
    """
    return dim_x * dim_y / (2.0 * n_samples * LN2)
