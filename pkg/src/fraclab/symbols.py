"""Symbols of the conjugated operator, Poisson brackets, and lower bounds.

Everything here evaluates closed-form expressions on cotangent samples
(t, x, tau, xi, sigma).  The weighted symbol substitutes
xi_n -> xi_n + i|sigma| (x_n - 2X) into the quadratic form of the operator
written in the convexified coordinates and keeps the full multi-term
fractional sum.  Partial derivatives are analytic; finite differences are
used only by the tests, as the independent oracle.

The three lower-bound certificates (characteristic-set bracket positivity,
its sharpened full-region variant, and the globally stretched stage
version) are sampling checks: they report the minimal ratio between the
assembled left-hand side and the anisotropic scale, and the run's value is
the certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import EllipticCoeffField
from .fractional import MultiTermSpec
from .geometry import HolmgrenMap, pushforward_operator, stretch_weights, \
    weighted_ellipticity_margin


@dataclass(frozen=True)
class PhasePoint:
    """A cotangent sample: base point (t, x) and duals (tau, xi, sigma)."""

    t: float
    x: np.ndarray
    tau: float
    xi: np.ndarray
    sigma: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)
        if x.shape != xi.shape:
            raise ValueError("x and xi must have the same dimension")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))
                and np.isfinite(self.t) and np.isfinite(self.tau)
                and np.isfinite(self.sigma)):
            raise ValueError("phase point components must be finite")


@dataclass(frozen=True)
class CarlemanWeightParams:
    """Layer thickness X of the quadratic weight psi = (x_n - 2X)^2 / 2.

    ``psi_shift`` adds a constant to psi; both sides of the weighted
    inequality pick up the same exponential factor, so ratios must not move.
    """

    X: float
    psi_shift: float = 0.0

    def __post_init__(self):
        if self.X <= 0.0:
            raise ValueError("layer thickness must be positive")

    def psi(self, x_n):
        return (0.5 * (np.asarray(x_n, dtype=float) - 2.0 * self.X) ** 2
                + self.psi_shift)

    def offset(self, x_n):
        """Signed distance x_n - 2X; negative throughout the layer."""
        return np.asarray(x_n, dtype=float) - 2.0 * self.X


@dataclass(frozen=True)
class SymbolValue:
    """Complex symbol value with optional analytic partials."""

    value: complex
    d_tau: complex | None = None
    d_xi: np.ndarray | None = None
    d_x: np.ndarray | None = None
    d_t: complex | None = None


@dataclass(frozen=True)
class BracketReport:
    """Bracket values at one phase point, with the anisotropic scale."""

    bracket: float          # full bracket, including the (tau, t) pair
    principal: float        # spatial pairs only
    scale: float            # (|xi|^2 + sigma^2 + |tau|^alpha)^(3/2)
    ratio: float            # principal / scale


# ---------------------------------------------------------------------------
# elementary symbols and the two scalar constants


def lambda_symbol(order: float, alpha: float, tau, xi):
    """Anisotropic weight ((1 + |xi|^2)^(1/alpha) + i tau)^(order*alpha/2).

    The base has real part at least 1, so the principal branch never crosses
    its cut.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    base = (1.0 + np.sum(xi * xi, axis=-1)) ** (1.0 / alpha) + 1j * tau
    out = base ** (order * alpha / 2.0)
    return complex(out) if out.ndim == 0 else out


def c_alpha(alpha: float) -> float:
    """Classical lower-bound constant min(sqrt(2)/2, sin(pi (1 - alpha/2))).

    Intended to bound |Im (1 + i tau)^alpha| from below by
    c_alpha * |1 + i tau|^alpha for |tau| >= 1.  See :func:`c_alpha_sharp`
    for the exact infimum; for orders below 1 this value overshoots it.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    return min(math.sqrt(2.0) / 2.0, math.sin(math.pi * (1.0 - alpha / 2.0)))


def c_alpha_sharp(alpha: float) -> float:
    """Exact infimum of |sin(alpha * arctan tau)| over |tau| >= 1.

    The infimum sits at one of the two ends of the angle range
    [alpha pi/4, alpha pi/2): min(sin(alpha pi/4), sin(pi (1 - alpha/2))).
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    return min(math.sin(alpha * math.pi / 4.0),
               math.sin(math.pi * (1.0 - alpha / 2.0)))


def real_part_constant(alpha: float) -> float:
    """Lower-bound constant cos(alpha pi / 4) for Re (1+i tau)^alpha, |tau| <= 1."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    return math.cos(alpha * math.pi / 4.0)


def imag_part_margin(alpha: float, taus, constant: float | None = None) -> float:
    """min over taus of |Im (1+i tau)^alpha| / |1+i tau|^alpha - constant."""
    if constant is None:
        constant = c_alpha(alpha)
    taus = np.asarray(taus, dtype=float)
    z = (1.0 + 1j * taus) ** alpha
    return float(np.min(np.abs(z.imag) / np.abs(1.0 + 1j * taus) ** alpha) - constant)


def real_part_margin(alpha: float, taus) -> float:
    """min over taus of Re (1+i tau)^alpha / |1+i tau|^alpha - cos(alpha pi/4)."""
    taus = np.asarray(taus, dtype=float)
    z = (1.0 + 1j * taus) ** alpha
    return float(np.min(z.real / np.abs(1.0 + 1j * taus) ** alpha)
                 - real_part_constant(alpha))


def fractional_symbol(tau, spec: MultiTermSpec, derivative: bool = False):
    """Multi-term factor sum q_l (1 + i tau)^alpha_l and optionally d/dtau."""
    tau = np.asarray(tau, dtype=float)
    val = np.zeros(tau.shape, dtype=complex)
    for q, a in zip(spec.weights, spec.orders):
        val = val + q * (1.0 + 1j * tau) ** a
    if not derivative:
        return val
    der = np.zeros(tau.shape, dtype=complex)
    for q, a in zip(spec.weights, spec.orders):
        der = der + q * a * 1j * (1.0 + 1j * tau) ** (a - 1.0)
    return val, der


def anisotropic_scale(xi, sigma, tau, alpha: float):
    """Base scale |xi|^2 + sigma^2 + |tau|^alpha (not yet raised to 3/2)."""
    xi = np.asarray(xi, dtype=float)
    return (np.sum(xi * xi, axis=-1) + np.asarray(sigma, dtype=float) ** 2
            + np.abs(np.asarray(tau, dtype=float)) ** alpha)


# ---------------------------------------------------------------------------
# batched assembly of the weighted symbol and its analytic partials


def _weighted_batch(t, x, tau, xi, sigma, spec, coeffs, c, X,
                    part: str = "full", grads: bool = False):
    """Assemble the weighted symbol over batched samples.

    Shapes: t (N,), x (N, n), tau (N,), xi (N, n), sigma (N,).  Returns a
    dict with 'value' and, when requested, 'd_tau', 'd_xi', 'd_x', 'd_t'.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n = x.shape[-1]

    a = np.asarray(coeffs.a(t, x), dtype=float)
    mu = np.abs(sigma) * (x[..., -1] - 2.0 * X)

    W = xi.astype(complex).copy()
    W[..., -1] = xi[..., -1] + 1j * mu
    W[..., :-1] = xi[..., :-1] + 2.0 * c * x[..., :-1] * W[..., -1:]
    G = np.einsum("...jk,...k->...j", a, W)

    out = {}
    if part in ("full", "corrections") or grads:
        S, dS = fractional_symbol(tau, spec, derivative=True)
        full_value = S + np.einsum("...j,...j->...", W, G)

    if part == "full":
        out["value"] = full_value
    elif part == "leading":
        out["value"] = _leading_value(a, xi, mu)
    elif part == "corrections":
        # explicit tilt terms B_j = 2 c x_j W_n plus the fractional sum
        B = 2.0 * c * x[..., :-1] * W[..., -1:]
        ajn = a[..., :-1, -1]
        app = a[..., :-1, :-1]
        val = S.copy()
        val = val + 2.0 * np.einsum("...j,...j->...", ajn, B) * W[..., -1]
        val = val + np.einsum("...jk,...j,...k->...", app, B, B)
        val = val + 2.0 * np.einsum("...jk,...j,...k->...",
                                    app, xi[..., :-1].astype(complex), B)
        out["value"] = val
    else:
        raise ValueError(f"unknown symbol part {part!r}")

    if not grads:
        return out

    da_dt = np.asarray(coeffs.da_dt(t, x), dtype=float)
    da_dx = np.asarray(coeffs.da_dy(t, x), dtype=float)
    WW = W[..., :, None] * W[..., None, :]
    tilt = np.einsum("...j,...j->...", x[..., :-1], G[..., :-1])

    d_xi = np.empty(W.shape, dtype=complex)
    d_xi[..., :-1] = 2.0 * G[..., :-1]
    d_xi[..., -1] = 2.0 * (G[..., -1] + 2.0 * c * tilt)

    d_x = np.empty(W.shape, dtype=complex)
    d_x[..., :] = np.einsum("...rjk,...jk->...r", da_dx, WW)
    d_x[..., :-1] += 4.0 * c * W[..., -1:] * G[..., :-1]
    d_x[..., -1] += 2j * np.abs(sigma) * (G[..., -1] + 2.0 * c * tilt)

    d_t = np.einsum("...jk,...jk->...", da_dt, WW)
    d_tau = dS

    if part != "full":
        lead = _leading_grads(a, da_dt, da_dx, xi, mu, sigma)
        if part == "leading":
            d_xi, d_x, d_t, d_tau = lead
        else:
            d_xi = d_xi - lead[0]
            d_x = d_x - lead[1]
            d_t = d_t - lead[2]
            d_tau = d_tau - lead[3]

    out.update(d_xi=d_xi, d_x=d_x, d_t=d_t, d_tau=d_tau)
    return out


def _leading_value(a, xi, mu):
    """x'-free quadratic core: a xi.xi - a_nn mu^2 + 2 i mu (a xi)_n."""
    quad = np.einsum("...jk,...j,...k->...", a, xi, xi)
    cross = np.einsum("...j,...j->...", a[..., -1, :], xi)
    return quad - a[..., -1, -1] * mu**2 + 2j * mu * cross


def _leading_grads(a, da_dt, da_dx, xi, mu, sigma):
    axi = np.einsum("...jk,...k->...j", a, xi)
    cross = axi[..., -1]
    d_xi = 2.0 * axi.astype(complex)
    d_xi += 2j * mu[..., None] * a[..., :, -1]

    def with_matrix(m):
        quad = np.einsum("...jk,...j,...k->...", m, xi, xi)
        cr = np.einsum("...j,...j->...", m[..., -1, :], xi)
        return quad - m[..., -1, -1] * mu**2 + 2j * mu * cr

    d_x = np.stack([with_matrix(da_dx[..., r, :, :])
                    for r in range(xi.shape[-1])], axis=-1).astype(complex)
    d_x[..., -1] += (-2.0 * a[..., -1, -1] * mu * np.abs(sigma)
                     + 2j * np.abs(sigma) * cross)
    d_t = with_matrix(da_dt)
    d_tau = np.zeros(mu.shape, dtype=complex)
    return d_xi, d_x, d_t, d_tau


def _point_batch(point: PhasePoint):
    return (np.asarray([point.t]), point.x[None, :], np.asarray([point.tau]),
            point.xi[None, :], np.asarray([point.sigma]))


# ---------------------------------------------------------------------------
# public scalar interfaces


def total_symbol(point: PhasePoint, spec: MultiTermSpec,
                 coeffs: EllipticCoeffField, map: HolmgrenMap,
                 drift: str | None = "displayed") -> SymbolValue:
    """Total symbol of the conjugated operator in the new coordinates.

    Quadratic form in the tilted duals plus the multi-term fractional sum,
    plus a first-order drift term proportional to X/T.  ``drift`` selects
    its tau-factor: "displayed" uses i^alpha (tau - i)^(alpha_l - 1),
    "conjugation" uses (1 + i tau)^(alpha_l - 1), and None drops the term.
    Requires sigma = 0; the extra dual enters only the weighted symbol.
    """
    if point.sigma != 0.0:
        raise ValueError("total symbol is defined on the sigma = 0 slice")
    args = _point_batch(point)
    quad = _weighted_batch(*args, spec, coeffs, map.c, 0.0, part="full")
    value = complex(quad["value"][0])
    if drift is not None:
        tau = point.tau
        xin = point.xi[-1]
        ratio = map.drift_ratio
        if drift == "displayed":
            factor = 1j ** spec.alpha
            low = sum(q * ratio * factor * (tau - 1j) ** (al - 1.0) * xin
                      for q, al in zip(spec.weights, spec.orders))
        elif drift == "conjugation":
            low = sum(q * ratio * (1.0 + 1j * tau) ** (al - 1.0) * xin
                      for q, al in zip(spec.weights, spec.orders))
        else:
            raise ValueError(f"unknown drift convention {drift!r}")
        value += low
    return SymbolValue(value=value)


def weighted_principal_symbol(point: PhasePoint, spec: MultiTermSpec,
                              coeffs: EllipticCoeffField,
                              weight: CarlemanWeightParams, c: float,
                              part: str = "full") -> SymbolValue:
    """Weighted symbol with xi_n shifted by i|sigma|(x_n - 2X).

    ``part`` selects "full", the x'-free quadratic core "leading", or the
    complementary "corrections" (tilt terms plus the fractional sum); the
    two parts add up to the full symbol exactly.
    """
    args = _point_batch(point)
    out = _weighted_batch(*args, spec, coeffs, c, weight.X, part=part)
    return SymbolValue(value=complex(out["value"][0]))


def symbol_gradients(point: PhasePoint, spec: MultiTermSpec,
                     coeffs: EllipticCoeffField,
                     weight: CarlemanWeightParams, c: float,
                     part: str = "full") -> SymbolValue:
    """Weighted symbol together with its analytic partial derivatives."""
    args = _point_batch(point)
    out = _weighted_batch(*args, spec, coeffs, c, weight.X, part=part,
                          grads=True)
    return SymbolValue(value=complex(out["value"][0]),
                       d_tau=complex(out["d_tau"][0]),
                       d_xi=out["d_xi"][0],
                       d_x=out["d_x"][0],
                       d_t=complex(out["d_t"][0]))


def _bracket_arrays(t, x, tau, xi, sigma, spec, coeffs, c, X):
    """Full and principal brackets of (Re, Im) of the weighted symbol."""
    out = _weighted_batch(t, x, tau, xi, sigma, spec, coeffs, c, X,
                          grads=True)
    d_xi, d_x = out["d_xi"], out["d_x"]
    principal = np.sum(d_xi.real * d_x.imag - d_x.real * d_xi.imag, axis=-1)
    extra = out["d_tau"].real * out["d_t"].imag - out["d_t"].real * out["d_tau"].imag
    return out, principal + extra, principal


def poisson_bracket(point: PhasePoint, spec: MultiTermSpec,
                    coeffs: EllipticCoeffField, weight: CarlemanWeightParams,
                    c: float, mode: str = "full") -> BracketReport:
    """Poisson bracket of the real and imaginary parts of the symbol.

    "full" includes the (tau, t) conjugate pair; "principal" keeps the
    spatial pairs only.  In both cases the report records the principal
    value and its ratio against the anisotropic scale.
    """
    if mode not in ("full", "principal"):
        raise ValueError("mode must be 'full' or 'principal'")
    args = _point_batch(point)
    _, full, principal = _bracket_arrays(*args, spec, coeffs, c, weight.X)
    scale = float(anisotropic_scale(point.xi, point.sigma, point.tau,
                                    spec.alpha) ** 1.5)
    principal = float(principal[0])
    bracket = float(full[0]) if mode == "full" else principal
    ratio = principal / scale if scale > 0.0 else math.inf
    return BracketReport(bracket=bracket, principal=principal, scale=scale,
                         ratio=ratio)


def poisson_bracket_generic(grads_f, grads_g) -> float:
    """Bracket of two real symbols from their gradient bundles.

    Each bundle is a dict with keys 'd_xi', 'd_x' (arrays) and 'd_tau',
    'd_t' (scalars).  Used by the algebra tests and as an oracle for the
    specialized bracket.
    """
    spatial = float(np.sum(np.asarray(grads_f["d_xi"]) * np.asarray(grads_g["d_x"])
                           - np.asarray(grads_f["d_x"]) * np.asarray(grads_g["d_xi"])))
    return spatial + grads_f["d_tau"] * grads_g["d_t"] \
        - grads_f["d_t"] * grads_g["d_tau"]


# ---------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class SampleRegion:
    """Base-point box: t range, per-coordinate |x'| bound, x_n range."""

    t_range: tuple = (0.0, 1.0)
    xn_range: tuple = (0.0, 0.05)
    xprime_halfwidth: float = 0.22

    def draw(self, rng, n_samples: int, n: int):
        t = rng.uniform(*self.t_range, n_samples)
        x = np.empty((n_samples, n))
        if n > 1:
            x[:, :-1] = rng.uniform(-self.xprime_halfwidth,
                                    self.xprime_halfwidth, (n_samples, n - 1))
        x[:, -1] = rng.uniform(*self.xn_range, n_samples)
        return t, x


def region_for(weight: CarlemanWeightParams, T: float = 1.0,
               xprime_factor: float = 1.0) -> SampleRegion:
    """Default sampling box |x'| <= factor*sqrt(X), 0 <= x_n <= X."""
    return SampleRegion(t_range=(0.0, T), xn_range=(0.0, weight.X),
                        xprime_halfwidth=xprime_factor * math.sqrt(weight.X))


@dataclass(frozen=True)
class CharacteristicSample:
    """Near-zeros of the weighted symbol with their certificates."""

    t: np.ndarray
    x: np.ndarray
    tau: np.ndarray
    xi: np.ndarray
    sigma: np.ndarray
    residual: np.ndarray        # |p| / scale at each point
    requested: int
    kappa: float                # max of (|xi|^2 + |1+i tau|^alpha)/(sigma X)^2

    @property
    def found(self) -> int:
        return len(self.tau)

    def points(self):
        return [PhasePoint(t=self.t[i], x=self.x[i], tau=self.tau[i],
                           xi=self.xi[i], sigma=self.sigma[i])
                for i in range(self.found)]


def char_set_sample(region: SampleRegion, spec: MultiTermSpec,
                    coeffs: EllipticCoeffField, weight: CarlemanWeightParams,
                    c: float, n_samples: int, tol: float = 1e-8,
                    rng=None, sigma_range: tuple | None = None,
                    seed_budget_factor: int = 8) -> CharacteristicSample:
    """Sample the characteristic set of the weighted symbol.

    For each random base point, dual direction and sigma, the two real
    equations Re p = Im p = 0 reduce to one scalar equation in tau (the
    imaginary equation fixes the radial scaling of xi), which is solved by
    bracketing and bisection.  Seeds whose scalar equation has no root in
    the search range, or whose solved point misses the residual
    certificate, are discarded; the result is partial if the seed budget
    runs out first.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    n = coeffs.n
    X = weight.X
    if sigma_range is None:
        floor = math.sqrt(spec.weight_sum / coeffs.delta) / X
        sigma_range = (3.0 * floor, 30.0 * floor)

    kept = []
    drawn = 0
    while sum(len(k[0]) for k in kept) < n_samples and \
            drawn < seed_budget_factor * n_samples:
        batch = min(2 * n_samples, seed_budget_factor * n_samples - drawn)
        drawn += batch
        got = _char_batch(region, spec, coeffs, c, X, batch, tol, rng,
                          sigma_range)
        if got is not None:
            kept.append(got)

    if not kept:
        empty = np.empty((0,))
        return CharacteristicSample(t=empty, x=np.empty((0, n)), tau=empty,
                                    xi=np.empty((0, n)), sigma=empty,
                                    residual=empty, requested=n_samples,
                                    kappa=math.nan)
    t = np.concatenate([k[0] for k in kept])[:n_samples]
    x = np.concatenate([k[1] for k in kept])[:n_samples]
    tau = np.concatenate([k[2] for k in kept])[:n_samples]
    xi = np.concatenate([k[3] for k in kept])[:n_samples]
    sigma = np.concatenate([k[4] for k in kept])[:n_samples]
    resid = np.concatenate([k[5] for k in kept])[:n_samples]
    kap = ((np.sum(xi**2, axis=-1) + np.abs(1.0 + 1j * tau) ** spec.alpha)
           / (sigma * X) ** 2)
    return CharacteristicSample(t=t, x=x, tau=tau, xi=xi, sigma=sigma,
                                residual=resid, requested=n_samples,
                                kappa=float(kap.max()) if len(kap) else math.nan)


def _char_batch(region, spec, coeffs, c, X, batch, tol, rng, sigma_range):
    n = coeffs.n
    t, x = region.draw(rng, batch, n)
    xihat = rng.normal(size=(batch, n))
    xihat /= np.linalg.norm(xihat, axis=1, keepdims=True)
    sigma = np.exp(rng.uniform(math.log(sigma_range[0]),
                               math.log(sigma_range[1]), batch))
    mu = sigma * (x[:, -1] - 2.0 * X)

    a = np.asarray(coeffs.a(t, x), dtype=float)
    what = xihat.copy()
    what[:, :-1] += 2.0 * c * x[:, :-1] * xihat[:, -1:]
    vhat = np.concatenate([2.0 * c * x[:, :-1], np.ones((batch, 1))], axis=1)
    A = np.einsum("ij,ijk,ik->i", what, a, what)
    B = np.einsum("ij,ijk,ik->i", what, a, vhat)
    C = np.einsum("ij,ijk,ik->i", vhat, a, vhat)

    S0 = fractional_symbol(np.zeros(batch), spec)
    keep = (np.abs(B) > 1e-10 * np.sqrt(np.abs(A * C))) & \
        (mu**2 * C > S0.real)
    if not keep.any():
        return None
    idx = np.nonzero(keep)[0]
    t, x, xihat, sigma, mu = t[idx], x[idx], xihat[idx], sigma[idx], mu[idx]
    A, B, C = A[idx], B[idx], C[idx]

    def gfun(tau):
        # zero iff (tau, rho(tau)) solves Re p = Im p = 0; negative at tau = 0
        s = fractional_symbol(tau, spec)
        return A * s.imag**2 - 4.0 * mu**2 * B**2 * (mu**2 * C - s.real)

    lo = np.zeros(len(idx))
    hi = np.ones(len(idx))
    for _ in range(60):
        bad = gfun(hi) <= 0.0
        if not bad.any():
            break
        hi[bad] *= 2.0
    good = gfun(hi) > 0.0
    if not good.any():
        return None
    lo, hi = lo[good], hi[good]
    t, x, xihat, sigma, mu = t[good], x[good], xihat[good], sigma[good], mu[good]
    A, B, C = A[good], B[good], C[good]

    for _ in range(90):
        mid = 0.5 * (lo + hi)
        g = gfun(mid)
        lo = np.where(g < 0.0, mid, lo)
        hi = np.where(g < 0.0, hi, mid)
    tau = 0.5 * (lo + hi)
    s = fractional_symbol(tau, spec)
    rho = -s.imag / (2.0 * B * mu)
    xi = rho[:, None] * xihat

    out = _weighted_batch(t, x, tau, xi, sigma, spec, coeffs, c, X)
    scale = anisotropic_scale(xi, sigma, tau, spec.alpha)
    resid = np.abs(out["value"]) / scale
    ok = resid <= tol
    if not ok.any():
        return None
    return (t[ok], x[ok], tau[ok], xi[ok], sigma[ok], resid[ok])


# ---------------------------------------------------------------------------
# lower-bound certificates


@dataclass(frozen=True)
class CertificateReport:
    """Minimum assembled-ratio over a sample cloud; positive means PASS."""

    min_ratio: float
    n_samples: int
    argmin: int
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.n_samples > 0 and self.min_ratio > 0.0


def lemma21_check(sample: CharacteristicSample, spec: MultiTermSpec,
                  coeffs: EllipticCoeffField, weight: CarlemanWeightParams,
                  c: float) -> CertificateReport:
    """Minimum of principal bracket / scale^(3/2) over characteristic samples."""
    if sample.found == 0:
        raise ValueError("empty characteristic sample")
    _, _, principal = _bracket_arrays(sample.t, sample.x, sample.tau,
                                      sample.xi, sample.sigma, spec, coeffs,
                                      c, weight.X)
    scale = anisotropic_scale(sample.xi, sample.sigma, sample.tau, spec.alpha)
    ratio = principal / scale**1.5
    i = int(np.argmin(ratio))
    return CertificateReport(min_ratio=float(ratio[i]), n_samples=len(ratio),
                             argmin=i, extras={"kappa": sample.kappa})


def full_region_sample(region: SampleRegion, spec: MultiTermSpec, n: int,
                       n_samples: int, rng, magnitude_range=(1.0, 1e3),
                       tau_stretch: float = 1.2):
    """Phase samples across all of phase space, not just the zero set.

    Magnitudes are log-uniform; tau is drawn on the anisotropic scale
    rho^(2/alpha) so all three scale contributions are exercised.
    """
    t, x = region.draw(rng, n_samples, n)
    rho = np.exp(rng.uniform(math.log(magnitude_range[0]),
                             math.log(magnitude_range[1]), n_samples))
    direction = rng.normal(size=(n_samples, n + 1))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    stretch = rng.uniform(0.2, 1.0, n_samples)
    xi = rho[:, None] * stretch[:, None] * direction[:, :n]
    sigma = rho * stretch * np.abs(direction[:, n])
    tau = (rng.choice([-1.0, 1.0], n_samples) * rho ** (2.0 / spec.alpha)
           * rng.uniform(0.0, tau_stretch, n_samples))
    return t, x, tau, xi, sigma


def garding_precondition_check(points, spec: MultiTermSpec,
                               coeffs: EllipticCoeffField,
                               weight: CarlemanWeightParams, c: float,
                               varpi: float) -> CertificateReport:
    """Minimum of [varpi scale^(-1/2) |p|^2 + 2 bracket] / scale^(3/2).

    ``points`` is a tuple of arrays (t, x, tau, xi, sigma); samples need not
    be characteristic.
    """
    elliptic, negative = _garding_terms(points, spec, coeffs, weight, c)
    ratio = varpi * elliptic + negative
    i = int(np.argmin(ratio))
    return CertificateReport(min_ratio=float(ratio[i]), n_samples=len(ratio),
                             argmin=i, extras={"varpi": varpi})


def _garding_terms(points, spec, coeffs, weight, c):
    t, x, tau, xi, sigma = points
    out, full, _ = _bracket_arrays(t, x, tau, xi, sigma, spec, coeffs, c,
                                   weight.X)
    scale = anisotropic_scale(xi, sigma, tau, spec.alpha)
    elliptic = np.abs(out["value"]) ** 2 / scale**2
    negative = 2.0 * full / scale**1.5
    return elliptic, negative


def find_min_varpi(points, spec: MultiTermSpec, coeffs: EllipticCoeffField,
                   weight: CarlemanWeightParams, c: float,
                   varpi_max: float = 1e8, iters: int = 60):
    """Bisect for the smallest varpi with a positive minimum ratio.

    Returns (varpi, report at that varpi).  Raises if even ``varpi_max``
    fails, which would refute the sharpened bound on this sample cloud.
    """
    elliptic, negative = _garding_terms(points, spec, coeffs, weight, c)

    def min_ratio(varpi):
        return float(np.min(varpi * elliptic + negative))

    if min_ratio(0.0) > 0.0:
        report = garding_precondition_check(points, spec, coeffs, weight, c, 0.0)
        return 0.0, report
    lo, hi = 0.0, 1.0
    while min_ratio(hi) <= 0.0:
        hi *= 2.0
        if hi > varpi_max:
            raise RuntimeError(
                f"no varpi below {varpi_max:g} gives a positive minimum")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if min_ratio(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    report = garding_precondition_check(points, spec, coeffs, weight, c, hi)
    return hi, report


def lemma61_check(sample: CharacteristicSample, spec: MultiTermSpec,
                  tilde_field: EllipticCoeffField, map: HolmgrenMap,
                  weight: CarlemanWeightParams,
                  ellipticity_probes: int = 4, rng=None) -> CertificateReport:
    """Stage-s certificate with the stretched scale.

    The coefficients live on the globally stretched space; the sample's
    base points are pulled back through the stage map to build the
    component weights (1 + yt_j^2)^(3/2).  The weighted two-sided
    ellipticity is re-verified at every sample; its worst slack is reported
    in the extras.
    """
    if sample.found == 0:
        raise ValueError("empty characteristic sample")
    if rng is None:
        rng = np.random.default_rng(7)
    frame = pushforward_operator(tilde_field, map)
    _, _, principal = _bracket_arrays(sample.t, sample.x, sample.tau,
                                      sample.xi, sample.sigma, spec,
                                      frame.field, map.c, weight.X)
    _, y_tilde = map.inverse(sample.t, sample.x)
    w = stretch_weights(y_tilde)
    eta_t = w * sample.xi
    sigma_t = w[..., -1] * sample.sigma
    scale = (np.sum(eta_t**2, axis=-1) + sigma_t**2
             + np.abs(sample.tau) ** spec.alpha)
    weight_factor = (1.0 + y_tilde[..., -1] ** 2) ** 1.5
    ratio = principal / (weight_factor * scale**1.5)

    probes = rng.normal(size=(ellipticity_probes, tilde_field.n))
    margins = [weighted_ellipticity_margin(tilde_field, sample.t[i],
                                           y_tilde[i], probes)
               for i in range(sample.found)]
    i = int(np.argmin(ratio))
    return CertificateReport(min_ratio=float(ratio[i]), n_samples=len(ratio),
                             argmin=i,
                             extras={"ellipticity_margin": float(min(margins)),
                                     "kappa": sample.kappa})


def bracket_report_batch(points, spec: MultiTermSpec,
                         coeffs: EllipticCoeffField,
                         weight: CarlemanWeightParams, c: float):
    """Arrays (bracket, principal, scale, ratio) for CSV-style listings."""
    t, x, tau, xi, sigma = points
    _, full, principal = _bracket_arrays(t, x, tau, xi, sigma, spec, coeffs,
                                         c, weight.X)
    scale = anisotropic_scale(xi, sigma, tau, spec.alpha) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(scale > 0.0, principal / scale, np.inf)
    return full, principal, scale, ratio
