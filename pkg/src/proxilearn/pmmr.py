"""Single-stage moment-restriction estimator of the proxy bridge function.

The bridge h is fit by minimizing a kernelized V-statistic risk plus an
RKHS ridge penalty. The coefficients have the closed form
alpha = (L W L + lam L)^{-1} L W y, where L is the Gram matrix of the
h-side kernel on (A, W, X) and W the Gram matrix of the instrument-side
kernel on (A, Z, X). ``lam`` throughout this module refers to the ridge
of this closed form; the equivalent objective-space penalty is lam / n^2
because the V-statistic carries a 1/n^2 normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset, DoCurve
from .kernels import KernelSpecs, gram, hadamard
from .numerics import nystrom, woodbury_regularized_inverse_apply

# Ridge grid spanning [1/450^2, 1/2^2], 50 log-spaced points.
DEFAULT_LAMBDA_GRID = np.sort(
    1.0 / np.logspace(np.log10(2.0), np.log10(450.0), 50) ** 2
)

_JITTER_SCALE = 1e-8


def vstat_risk(residuals: np.ndarray, w_gram: np.ndarray) -> float:
    """V-statistic risk r' W r / n^2 of a residual vector."""
    r = np.asarray(residuals, dtype=float).ravel()
    w_gram = np.asarray(w_gram, dtype=float)
    if w_gram.shape != (r.size, r.size):
        raise ValueError(
            f"Gram shape {w_gram.shape} does not match {r.size} residuals"
        )
    return float(r @ w_gram @ r) / float(r.size) ** 2


@dataclass(frozen=True)
class PmmrModel:
    """Fitted bridge h(a, w, x) = sum_i alpha_i l((a_i, w_i, x_i), .)."""

    sample: Dataset
    specs: KernelSpecs
    alpha: np.ndarray
    lam: float

    @property
    def n(self) -> int:
        return self.sample.n


def h_side_gram(left: Dataset, right: Dataset, specs: KernelSpecs) -> np.ndarray:
    """Gram matrix of the kernel on (A, W, X) between two samples."""
    out = gram(left.a, right.a, specs.a)
    out = hadamard(out, gram(left.w, right.w, specs.w))
    return hadamard(out, gram(left.x, right.x, specs.x))


def instrument_gram(left: Dataset, right: Dataset,
                    specs: KernelSpecs) -> np.ndarray:
    """Gram matrix of the kernel on (A, Z, X) between two samples."""
    out = gram(left.a, right.a, specs.a)
    out = hadamard(out, gram(left.z, right.z, specs.z))
    return hadamard(out, gram(left.x, right.x, specs.x))


def jittered_l(l_gram: np.ndarray) -> np.ndarray:
    """L with the stabilizing diagonal used inside the normal equations."""
    n = l_gram.shape[0]
    return l_gram + (_JITTER_SCALE * np.trace(l_gram) / n) * np.eye(n)


def _solve_normal_equations(l_gram, w_gram, y, lam):
    lj = jittered_l(l_gram)
    lw = lj @ w_gram
    system = lw @ lj + lam * lj
    rhs = lw @ y
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError:
        bump = 1e-10 * max(np.trace(system) / system.shape[0], 1.0)
        factor = scipy.linalg.cho_factor(
            system + bump * np.eye(system.shape[0]), lower=True)
    return scipy.linalg.cho_solve(factor, rhs)


def pmmr_fit(data: Dataset, specs: KernelSpecs, lam: float) -> PmmrModel:
    """Closed-form fit alpha = (L W L + lam L)^{-1} L W y."""
    if data.n < 1:
        raise ValueError("need at least 1 training point")
    if not lam > 0:
        raise ValueError("lam must be positive")
    l_gram = h_side_gram(data, data, specs)
    w_gram = instrument_gram(data, data, specs)
    alpha = _solve_normal_equations(l_gram, w_gram, data.y, lam)
    return PmmrModel(sample=data, specs=specs, alpha=alpha, lam=lam)


def pmmr_fit_nystrom(data: Dataset, specs: KernelSpecs, lam: float,
                     rank: int, landmark_seed: int = 0) -> PmmrModel:
    """Low-rank fit via Nystrom factors of the instrument Gram over n^2.

    With ``rank == n`` this reproduces :func:`pmmr_fit`. The ridge handed
    to the low-rank solver is lam / n^2, matching the V-statistic
    normalization baked into the factored matrix.
    """
    if not 1 <= rank <= data.n:
        raise ValueError(f"rank must be in [1, {data.n}]")
    if not lam > 0:
        raise ValueError("lam must be positive")
    l_gram = h_side_gram(data, data, specs)
    w_gram = instrument_gram(data, data, specs)
    factors = nystrom(w_gram, rank, landmark_seed)
    alpha = woodbury_regularized_inverse_apply(
        jittered_l(l_gram), factors, lam / float(data.n) ** 2, data.y)
    return PmmrModel(sample=data, specs=specs, alpha=alpha, lam=lam)


def pmmr_h(model: PmmrModel, a, w, x=None):
    """Evaluate the kernel expansion of h.

    Scalar treatment input -> float; array inputs -> ndarray (nq,).
    """
    single = np.ndim(a) == 0
    queries = _query_dataset(model.sample, a, w, x)
    k_cross = h_side_gram(model.sample, queries, model.specs)
    vals = model.alpha @ k_cross
    return float(vals[0]) if single else vals


def _query_dataset(train: Dataset, a, w, x) -> Dataset:
    from .kpv import _query_block

    aq = _query_block(a, train.a.shape[1], "a")
    wq = _query_block(w, train.w.shape[1], "w", aq.shape[0])
    xq = _query_block(x, train.x.shape[1], "x", aq.shape[0])
    nq = aq.shape[0]
    return Dataset(a=aq, x=xq, z=np.zeros((nq, train.z.shape[1])),
                   w=wq, y=np.zeros(nq))


def pmmr_ate(model: PmmrModel, a_grid, x_adjust, w_adjust) -> DoCurve:
    """Causal-effect curve: mean of h over the adjustment sample."""
    from .kpv import _query_block

    wq = _query_block(w_adjust, model.sample.w.shape[1], "w")
    xq = _query_block(x_adjust, model.sample.x.shape[1], "x", wq.shape[0])
    nt = wq.shape[0]
    if nt == 0:
        raise ValueError("adjustment sample is empty")
    a_grid = np.asarray(a_grid, dtype=float).ravel()
    kw = hadamard(gram(model.sample.w, wq, model.specs.w),
                  gram(model.sample.x, xq, model.specs.x))   # n x nt
    ka = gram(model.sample.a, a_grid[:, None], model.specs.a)  # n x g
    weights = kw.mean(axis=1) * model.alpha                  # n
    return DoCurve(grid=a_grid, estimate=ka.T @ weights)


def pmmr_objective(l_gram: np.ndarray, w_gram: np.ndarray, y: np.ndarray,
                   lam: float, alpha: np.ndarray) -> float:
    """Quadratic objective whose exact minimizer is the closed-form fit.

    J(alpha) = (y - L alpha)' W (y - L alpha) / n^2
               + (lam / n^2) alpha' L alpha.
    """
    n = y.size
    resid = y - l_gram @ alpha
    return (float(resid @ w_gram @ resid)
            + lam * float(alpha @ l_gram @ alpha)) / float(n) ** 2


def pmmr_select_lambda(
    train: Dataset,
    validate: Dataset,
    specs: KernelSpecs,
    lam_grid=DEFAULT_LAMBDA_GRID,
) -> float:
    """Pick the ridge whose validation V-statistic risk is smallest.

    Fits on ``train`` at every grid point and scores the validation
    residuals with the validation-side instrument Gram; ties break toward
    the larger ridge.
    """
    from .kpv import _argmin_ties_larger

    lam_grid = np.atleast_1d(np.asarray(lam_grid, dtype=float))
    if (lam_grid <= 0).any():
        raise ValueError("grid must contain positive values")
    scores = pmmr_validation_scores(train, validate, specs, lam_grid)
    return _argmin_ties_larger(lam_grid, scores)


def pmmr_validation_scores(train: Dataset, validate: Dataset,
                           specs: KernelSpecs, lam_grid) -> np.ndarray:
    """Validation V-statistic risk for every ridge candidate."""
    l_train = h_side_gram(train, train, specs)
    w_train = instrument_gram(train, train, specs)
    l_cross = h_side_gram(train, validate, specs)
    w_val = instrument_gram(validate, validate, specs)
    scores = np.empty(len(lam_grid))
    for i, lam in enumerate(np.asarray(lam_grid, dtype=float)):
        try:
            alpha = _solve_normal_equations(l_train, w_train, train.y, lam)
        except np.linalg.LinAlgError:
            scores[i] = np.inf
            continue
        resid = validate.y - alpha @ l_cross
        scores[i] = vstat_risk(resid, w_val)
    if not np.isfinite(scores).any():
        raise ValueError("all ridge candidates failed to fit")
    return scores


def fit_pmmr(
    data: Dataset,
    specs: KernelSpecs | None = None,
    lam: float | None = None,
    lam_grid=DEFAULT_LAMBDA_GRID,
    rank: int | None = None,
    split_seed: int = 0,
    landmark_seed: int = 0,
) -> PmmrModel:
    """Full pipeline on one joint dataset.

    When ``lam`` is not given it is grid-searched on a 50/50 seeded
    train/validation split and the model is refit on the full data at the
    selected value. ``rank`` switches to the Nystrom-accelerated solve.
    """
    if specs is None:
        specs = KernelSpecs.from_data(data)
    if lam is None:
        train, validate = data.split_half(split_seed)
        lam = pmmr_select_lambda(train, validate, specs, lam_grid)
    if rank is None:
        return pmmr_fit(data, specs, lam)
    return pmmr_fit_nystrom(data, specs, lam, rank, landmark_seed)
