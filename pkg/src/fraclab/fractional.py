"""Caputo derivatives of order in (0,1) or (1,2) on uniform time grids.

Two independent evaluation routes are provided.  ``caputo_oracle`` integrates
the defining convolution of the k-th classical derivative against the weakly
singular kernel by adaptive quadrature after a graded substitution that
removes the endpoint singularity.  ``caputo_apply`` discretizes sampled
series with L1-type product integration (piecewise-linear interpolation of
the integrand).  The two routes share no code, so they can be played against
each other as oracles.

The multi-term operator is the weighted sum of single-order derivatives with
unit leading weight and strictly decreasing orders.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma


class ConvergenceError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def _order_index(alpha: float) -> int:
    """Integer k with k-1 < alpha < k, restricted to k in {1, 2}.

    alpha = 1 sits on the boundary and is rejected here; discrete code paths
    treat it separately as the classical first derivative.
    """
    if not 0.0 < alpha < 2.0 or alpha == 1.0:
        raise ValueError(f"order must lie in (0,1) or (1,2), got {alpha}")
    return 1 if alpha < 1.0 else 2


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*dt, k = 0..n_steps."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")

    @classmethod
    def from_interval(cls, t_final: float, n_steps: int) -> "TimeGrid":
        return cls(dt=t_final / n_steps, n_steps=n_steps)

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps


@dataclass(frozen=True)
class Series:
    """Samples u(t_k) aligned with a :class:`TimeGrid`."""

    values: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) != self.grid.n_steps + 1:
            raise ValueError(
                f"series length {v.shape} does not match grid with "
                f"{self.grid.n_steps + 1} nodes"
            )

    @classmethod
    def from_function(cls, u, grid: TimeGrid) -> "Series":
        return cls(values=np.asarray(u(grid.nodes), dtype=float), grid=grid)


@dataclass(frozen=True)
class MultiTermSpec:
    """Orders and weights of the multi-term fractional operator.

    Orders are strictly decreasing in (0,2); the leading weight is 1 and all
    weights are positive.
    """

    orders: tuple = field(default=(0.5,))
    weights: tuple = field(default=(1.0,))

    def __post_init__(self):
        orders = tuple(float(a) for a in self.orders)
        weights = tuple(float(q) for q in self.weights)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "weights", weights)
        if len(orders) == 0 or len(orders) != len(weights):
            raise ValueError("orders and weights must be non-empty and of equal length")
        if not all(0.0 < a < 2.0 for a in orders):
            raise ValueError("every order must lie in (0,2)")
        if any(a2 >= a1 for a1, a2 in zip(orders, orders[1:])):
            raise ValueError("orders must be strictly decreasing")
        if weights[0] != 1.0:
            raise ValueError("leading weight must equal 1")
        if not all(q > 0.0 for q in weights):
            raise ValueError("weights must be positive")

    @property
    def m(self) -> int:
        return len(self.orders)

    @property
    def alpha(self) -> float:
        """Leading (largest) order."""
        return self.orders[0]

    @property
    def weight_sum(self) -> float:
        return float(sum(self.weights))


def caputo_power_rule(p: float, alpha: float, t) -> float:
    """Exact Caputo derivative of t**p for p > alpha - 1.

    Independent closed-form reference used by the tests:
    Gamma(p+1)/Gamma(p+1-alpha) * t**(p-alpha).  Valid for any order in
    (0,2), including exactly 1.
    """
    return gamma(p + 1.0) / gamma(p + 1.0 - alpha) * np.asarray(t) ** (p - alpha)


def caputo_oracle(u, derivative, alpha: float, t: float, tol: float = 1e-10,
                  max_subdivisions: int = 200) -> float:
    """Caputo derivative of a smooth function by adaptive quadrature.

    Parameters
    ----------
    u : callable
        The function itself.  Kept for interface symmetry and domain checks;
        only its k-th derivative enters the convolution.
    derivative : callable
        The k-th classical derivative of ``u``, where k = 1 for orders below
        1 and k = 2 above.
    alpha : float
        Order in (0,1) or (1,2).  Exactly 1 and anything outside (0,2) raise
        ``ValueError``.
    t : float
        Evaluation time, t > 0.
    tol : float
        Relative tolerance passed to the quadrature and enforced on its
        reported error estimate.
    max_subdivisions : int
        Adaptive subdivision budget; exceeding it (or failing the error
        check) raises :class:`ConvergenceError`.

    Notes
    -----
    With k = ceil(alpha) the integral of (t-s)**(k-1-alpha) u^(k)(s) is
    mapped by the graded substitution t - s = t*v**(1/(k-alpha)) onto
    t**(k-alpha)/(k-alpha) * integral_0^1 u^(k)(t - t*v**(1/(k-alpha))) dv,
    which absorbs the kernel exactly and leaves a bounded integrand.
    """
    k = _order_index(alpha)
    if t <= 0.0:
        raise ValueError("evaluation time must be positive")
    u(0.0)  # surfaces obviously broken callables early
    power = 1.0 / (k - alpha)

    def integrand(v):
        return derivative(t - t * v ** power)

    with warnings.catch_warnings():
        # subdivision exhaustion surfaces as ConvergenceError below
        warnings.simplefilter("ignore", IntegrationWarning)
        value, abserr = quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol,
                             limit=max_subdivisions)
    value *= t ** (k - alpha) / ((k - alpha) * gamma(k - alpha))
    abserr *= t ** (k - alpha) / ((k - alpha) * gamma(k - alpha))
    if abserr > tol * max(1.0, abs(value)):
        raise ConvergenceError(
            f"quadrature error estimate {abserr:.3e} exceeds tolerance "
            f"{tol:.3e} within {max_subdivisions} subdivisions"
        )
    return value


def l1_weights(alpha: float, m: int) -> np.ndarray:
    """Kernel weights b_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..m-1."""
    j = np.arange(m, dtype=float)
    return (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)


def _backward_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """First discrete derivative, causal; node 0 uses the zero extension."""
    v = np.zeros_like(values)
    v[1:] = np.diff(values, axis=0) / dt
    v[0] = values[0] / dt
    return v


def caputo_l1(values: np.ndarray, alpha: float, dt: float,
              history_window: int | None = None) -> np.ndarray:
    """L1 discrete Caputo derivative along axis 0 of ``values``.

    Orders in (0,1) use classical L1 product integration.  Order exactly 1
    falls back to the causal first difference.  Orders in (1,2) apply the L1
    scheme of order alpha-1 to the first discrete derivative, reducing the
    second-derivative kernel to the first-derivative one.

    ``history_window`` truncates the convolution to the most recent steps;
    it is None (full history, direct O(N^2) summation) in every certified
    run.
    """
    values = np.asarray(values, dtype=float)
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"order must lie in (0,2), got {alpha}")
    if alpha == 1.0:
        return _backward_difference(values, dt)
    if alpha > 1.0:
        v = _backward_difference(values, dt)
        return caputo_l1(v, alpha - 1.0, dt, history_window)

    n = values.shape[0] - 1
    if n < 1:
        return np.zeros_like(values)
    du = np.diff(values, axis=0)
    b = l1_weights(alpha, n)
    if history_window is not None:
        b = b.copy()
        b[history_window:] = 0.0
    if du.ndim == 1:
        conv = np.convolve(du, b)[:n]
    else:
        flat = du.reshape(n, -1)
        conv = np.empty_like(flat)
        for col in range(flat.shape[1]):
            conv[:, col] = np.convolve(flat[:, col], b)[:n]
        conv = conv.reshape(du.shape)
    out = np.zeros_like(values)
    out[1:] = conv / (gamma(2.0 - alpha) * dt ** alpha)
    return out


def rl_integral_l1(values: np.ndarray, mu: float, dt: float) -> np.ndarray:
    """Riemann-Liouville integral of order mu in (0,1] along axis 0.

    Piecewise-linear product integration: exact on linear interpolants of
    the data, matching the accuracy class of the L1 derivative weights.
    """
    values = np.asarray(values, dtype=float)
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"integral order must lie in (0,1], got {mu}")
    n = values.shape[0] - 1
    if n < 1:
        return np.zeros_like(values)
    m = np.arange(1, n + 1, dtype=float)
    upper = m ** (mu + 1.0) / (mu + 1.0) - (m - 1.0) * m ** mu / mu
    lower = (m - 1.0) ** (mu + 1.0) / (mu + 1.0) - (m - 1.0) ** mu * (m - 1.0) / mu
    a_w = upper - lower                              # weight of the older node
    upper = m * m ** mu / mu - m ** (mu + 1.0) / (mu + 1.0)
    lower = m * (m - 1.0) ** mu / mu - (m - 1.0) ** (mu + 1.0) / (mu + 1.0)
    b_w = upper - lower                              # weight of the newer node
    flat = values.reshape(values.shape[0], -1)
    res = np.zeros_like(flat)
    # J w(t_k) = dt^mu/Gamma(mu) * sum_m [a_m w_{k-m} + b_m w_{k-m+1}]
    for col in range(flat.shape[1]):
        older = np.convolve(flat[:-1, col], a_w)[:n]
        newer = np.convolve(flat[1:, col], b_w)[:n]
        res[1:, col] = older + newer
    return (dt ** mu / gamma(mu)) * res.reshape(values.shape)


def caputo_apply(series: Series, alpha: float,
                 history_window: int | None = None) -> Series:
    """Discrete Caputo derivative of a sampled series.

    The series must start at zero, matching the convention that solutions
    are supported on nonnegative times.  Orders in (0,1) are second-order
    accurate of order 2-alpha on smooth data; order exactly 1 is accepted
    and means the causal first difference.
    """
    if series.values[0] != 0.0:
        raise ValueError("series must vanish at t = 0")
    out = caputo_l1(series.values, alpha, series.grid.dt, history_window)
    return Series(values=out, grid=series.grid)


def multiterm_apply(series: Series, spec: MultiTermSpec,
                    history_window: int | None = None) -> Series:
    """Weighted sum of Caputo derivatives over all orders of ``spec``."""
    if series.values[0] != 0.0:
        raise ValueError("series must vanish at t = 0")
    acc = np.zeros_like(series.values)
    for q, a in zip(spec.weights, spec.orders):
        acc += q * caputo_l1(series.values, a, series.grid.dt, history_window)
    return Series(values=acc, grid=series.grid)


def multiterm_l1(values: np.ndarray, spec: MultiTermSpec, dt: float,
                 history_window: int | None = None) -> np.ndarray:
    """Array-level multi-term operator along axis 0 (no support check)."""
    acc = np.zeros_like(np.asarray(values, dtype=float))
    for q, a in zip(spec.weights, spec.orders):
        acc += q * caputo_l1(values, a, dt, history_window)
    return acc


def multiterm_leading_coefficient(spec: MultiTermSpec, dt: float) -> float:
    """Coefficient of the newest node in the discrete multi-term operator.

    Needed by implicit time stepping: the discrete operator at step k is
    this coefficient times u_k plus a functional of the history.
    """
    c = 0.0
    for q, a in zip(spec.weights, spec.orders):
        if a == 1.0:
            c += q / dt
        elif a < 1.0:
            c += q * dt ** (-a) / gamma(2.0 - a)
        else:
            c += q * dt ** (-a) / gamma(3.0 - a)
    return c
