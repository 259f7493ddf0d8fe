"""Synthetic structural-equation generators and ground-truth effects.

The main generator draws from a nonlinear confounded model with a
two-dimensional hidden confounder U and two-dimensional proxies:

    U2 ~ Uniform[-1, 2]
    U1 ~ Uniform[0, 1] - 1[0 <= U2 <= 1]
    W  = [U1 + Uniform[-1, 1],  U2 + Normal(0, 3)]
    Z  = [U1 + Normal(0, 3),    U2 + Uniform[-1, 1]]
    A  = U2 + Normal(0, 0.05)
    Y  = U2 * cos(2 (A + 0.3 U1 + 0.2))

Neither proxy alone determines U, but jointly they do, which is the
regime the bridge-function estimators target. The covariate set X is
null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, DoCurve

NOISE_VAR = 3.0
TREATMENT_NOISE_VAR = 0.05


def _draw_confounder(rng: np.random.Generator, n: int):
    u2 = rng.uniform(-1.0, 2.0, size=n)
    u1 = rng.uniform(0.0, 1.0, size=n) - ((u2 >= 0.0) & (u2 <= 1.0))
    return u1, u2


def _outcome(a, u1, u2):
    return u2 * np.cos(2.0 * (a + 0.3 * u1 + 0.2))


@dataclass(frozen=True)
class SyntheticDraw:
    """One seeded draw of the synthetic model, hidden confounder included."""

    data: Dataset
    u: np.ndarray
    seed: int


def gen_main(n: int, seed: int = 0) -> SyntheticDraw:
    """Sample n rows of the main synthetic model, deterministically."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    u1, u2 = _draw_confounder(rng, n)
    w = np.column_stack([
        u1 + rng.uniform(-1.0, 1.0, size=n),
        u2 + rng.normal(0.0, np.sqrt(NOISE_VAR), size=n),
    ])
    z = np.column_stack([
        u1 + rng.normal(0.0, np.sqrt(NOISE_VAR), size=n),
        u2 + rng.uniform(-1.0, 1.0, size=n),
    ])
    a = u2 + rng.normal(0.0, np.sqrt(TREATMENT_NOISE_VAR), size=n)
    y = _outcome(a, u1, u2)
    data = Dataset(a=a, x=np.empty((n, 0)), z=z, w=w, y=y)
    return SyntheticDraw(data=data, u=np.column_stack([u1, u2]), seed=seed)


def true_ate(a_grid, mc_samples: int = 1_000_000, seed: int = 0,
             outcome=None) -> DoCurve:
    """Monte-Carlo ground truth E[Y | do(A=a)] for the main model.

    Pins the treatment at each grid value and averages the outcome
    equation over fresh confounder draws; deterministic given
    (grid, mc_samples, seed). ``outcome`` may replace the default
    outcome equation with another map (a, u1, u2) -> y.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be at least 1")
    if outcome is None:
        outcome = _outcome
    a_grid = np.asarray(a_grid, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    u1, u2 = _draw_confounder(rng, mc_samples)
    truth = np.array([np.mean(outcome(a, u1, u2)) for a in a_grid])
    return DoCurve(grid=a_grid, estimate=truth, truth=truth)


@dataclass(frozen=True)
class DiscreteToy:
    """Finite-state confounded model with its exactly solved bridge.

    ``h_star[k, j]`` is the bridge value at treatment level k and W level
    j; ``truth[k]`` the enumerated interventional mean at level k.
    """

    data: Dataset
    a_levels: np.ndarray
    w_levels: np.ndarray
    z_levels: np.ndarray
    h_star: np.ndarray
    truth: np.ndarray
    p_w: np.ndarray
    p_w_given_az: np.ndarray
    ey_given_az: np.ndarray

    def h_star_at(self, a_query, w_query) -> np.ndarray:
        """Exact bridge evaluated at (a, w) pairs on the support."""
        a_idx = _level_index(a_query, self.a_levels)
        w_idx = _level_index(w_query, self.w_levels)
        return self.h_star[a_idx, w_idx]

    def truth_curve(self) -> DoCurve:
        return DoCurve(grid=self.a_levels, estimate=self.truth,
                       truth=self.truth)


def _level_index(values, levels) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    idx = np.argmin(np.abs(values[:, None] - levels[None, :]), axis=1)
    if not np.allclose(values, levels[idx]):
        raise ValueError("query values are off the discrete support")
    return idx


# Fixed generic parameters of the discrete toy; proxies are sharp enough
# that every conditional matrix involved in identification is
# well-invertible (determinants around 0.5).
_P_U = np.array([0.45, 0.55])
_P_Z_GIVEN_U = np.array([[0.90, 0.10],
                         [0.10, 0.90]])
_P_W_GIVEN_U = np.array([[0.90, 0.10],
                         [0.10, 0.90]])
_P_A_GIVEN_U = np.array([[0.80, 0.20],
                         [0.20, 0.80]])
_Y_TABLE = np.array([[1.00, -0.50],
                     [-0.20, 0.80]])
# Wide level spacing keeps the Gaussian kernel contrast between levels
# high under the fallback unit bandwidth.
_A_LEVELS = np.array([0.0, 3.0])
_Z_LEVELS = np.array([0.0, 3.0])
_W_LEVELS = np.array([0.0, 3.0])


def gen_discrete_toy(n: int, seed: int = 0, p_u=None, p_z_given_u=None,
                     p_w_given_u=None, p_a_given_u=None,
                     y_table=None) -> DiscreteToy:
    """Sample the finite SEM and solve its bridge equation exactly.

    The hidden confounder, both proxies and the treatment each take two
    values; W and Z are conditionally independent of everything else
    given U, and Y is a deterministic table of (A, U). The bridge is the
    solution of E[Y | a, z] = sum_w h(a, w) p(w | a, z) per treatment
    level, and the enumerated interventional mean is sum_u p(u) y(a, u).
    The conditional tables can be overridden; a parameterization that
    breaks invertibility of p(w | a, z) is rejected.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p_u = _P_U if p_u is None else np.asarray(p_u, dtype=float)
    p_z = (_P_Z_GIVEN_U if p_z_given_u is None
           else np.asarray(p_z_given_u, dtype=float))
    p_w = (_P_W_GIVEN_U if p_w_given_u is None
           else np.asarray(p_w_given_u, dtype=float))
    p_a = (_P_A_GIVEN_U if p_a_given_u is None
           else np.asarray(p_a_given_u, dtype=float))
    y_table = _Y_TABLE if y_table is None else np.asarray(y_table, float)
    n_a, n_u = p_a.shape
    n_z = p_z.shape[0]
    n_w = p_w.shape[0]
    if not (n_w == n_z == n_u):
        raise ValueError("W, Z and U must have equal support sizes")

    h_star = np.empty((n_a, n_w))
    p_w_given_az = np.empty((n_a, n_z, n_w))
    ey_given_az = np.empty((n_a, n_z))
    for k in range(n_a):
        # p(u | a, z) over columns u, rows z
        joint_uz = p_u[None, :] * p_a[k][None, :] * p_z
        p_u_given_az = joint_uz / joint_uz.sum(axis=1, keepdims=True)
        if abs(np.linalg.det(p_u_given_az)) < 1e-12:
            raise np.linalg.LinAlgError("p(u|a,z) is singular")
        p_w_az = p_u_given_az @ p_w.T                   # rows z, cols w
        if abs(np.linalg.det(p_w_az)) < 1e-12:
            raise np.linalg.LinAlgError("p(w|a,z) is singular")
        ey_az = p_u_given_az @ y_table[k]
        h_star[k] = np.linalg.solve(p_w_az, ey_az)
        p_w_given_az[k] = p_w_az
        ey_given_az[k] = ey_az

    truth = y_table @ p_u
    marginal_w = p_w @ p_u

    rng = np.random.default_rng(seed)
    u_idx = rng.choice(n_u, size=n, p=p_u)
    z_idx = np.array([rng.choice(n_z, p=p_z[:, u]) for u in u_idx])
    w_idx = np.array([rng.choice(n_w, p=p_w[:, u]) for u in u_idx])
    a_idx = np.array([rng.choice(n_a, p=p_a[:, u]) for u in u_idx])
    y = y_table[a_idx, u_idx]
    data = Dataset(a=_A_LEVELS[a_idx], x=np.empty((n, 0)),
                   z=_Z_LEVELS[z_idx], w=_W_LEVELS[w_idx], y=y)
    return DiscreteToy(data=data, a_levels=_A_LEVELS[:n_a],
                       w_levels=_W_LEVELS[:n_w], z_levels=_Z_LEVELS[:n_z],
                       h_star=h_star, truth=truth, p_w=marginal_w,
                       p_w_given_az=p_w_given_az, ey_given_az=ey_given_az)
