"""Discrete test of the weighted a-priori inequality on bump families.

Both sides of the inequality are evaluated on compactly supported grid
functions: the left side sums beta-weighted, exponentially weighted squares
of the function and its first space derivatives (plus a time-derivative
block on the upper order branch), the right side is the weighted square of
the conjugated operator in the convexified coordinates.  Sweeping the large
parameter records the ratio per (beta, test function); a single finite
bound over the sweep is the empirical constant, and monotone growth of the
ratio in beta would refute the inequality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fractional import MultiTermSpec, rl_integral_l1
from .geometry import HolmgrenFrame
from .solver import LowerOrderTerm, SpaceTimeGrid, apply_discrete_operator
from .symbols import CarlemanWeightParams

BRANCH_THRESHOLD = 4.0 / 3.0


@dataclass(frozen=True)
class CompactBump:
    """Separable polynomial bump, vanishing to 4th order on its edges.

    value(t, x) = (s (1-s))^4 * prod_i (1 - r_i^2)^4 with s = t/t_span and
    r_i the rescaled distance to the i-th center.  Analytic space and time
    derivatives are provided for quadrature oracles.
    """

    centers: tuple
    halfwidths: tuple
    t_span: float
    amplitude: float = 1.0

    def _pieces(self, t, mesh):
        s = np.clip(np.asarray(t, dtype=float) / self.t_span, 0.0, 1.0)
        ts = (s * (1.0 - s)) ** 4
        rs = [(mesh[..., i] - c) / w
              for i, (c, w) in enumerate(zip(self.centers, self.halfwidths))]
        xs = [np.clip(1.0 - r**2, 0.0, None) ** 4 for r in rs]
        return s, ts, rs, xs

    def values(self, times, mesh):
        """Samples of shape (len(times), *mesh.shape[:-1])."""
        out = []
        for t in np.asarray(times, dtype=float):
            _, ts, _, xs = self._pieces(t, mesh)
            v = self.amplitude * ts
            for xb in xs:
                v = v * xb
            out.append(np.broadcast_to(v, mesh.shape[:-1]).copy())
        return np.stack(out)

    def space_gradient(self, times, mesh):
        """Analytic first derivatives, shape (nt, *space, ndim)."""
        nd = mesh.shape[-1]
        out = []
        for t in np.asarray(times, dtype=float):
            _, ts, rs, xs = self._pieces(t, mesh)
            grads = []
            for i in range(nd):
                g = self.amplitude * ts
                for j in range(nd):
                    if j == i:
                        base = np.clip(1.0 - rs[j] ** 2, 0.0, None)
                        g = g * (4.0 * base**3 * (-2.0 * rs[j])
                                 / self.halfwidths[j])
                    else:
                        g = g * xs[j]
                grads.append(np.broadcast_to(g, mesh.shape[:-1]).copy())
            out.append(np.stack(grads, axis=-1))
        return np.stack(out)

    def time_derivative(self, times, mesh):
        out = []
        for t in np.asarray(times, dtype=float):
            s, _, _, xs = self._pieces(t, mesh)
            dts = 4.0 * (s * (1.0 - s)) ** 3 * (1.0 - 2.0 * s) / self.t_span
            v = self.amplitude * dts
            for xb in xs:
                v = v * xb
            out.append(np.broadcast_to(v, mesh.shape[:-1]).copy())
        return np.stack(out)


def default_bump_family(weight: CarlemanWeightParams, grid: SpaceTimeGrid,
                        count: int = 5):
    """Bumps spread across the layer, strictly inside the box."""
    nd = grid.ndim
    bumps = []
    for i in range(count):
        frac = 0.30 + 0.40 * i / max(count - 1, 1)
        centers, widths = [], []
        for d, (lo, hi) in enumerate(grid.bounds):
            span = hi - lo
            if d == nd - 1:
                centers.append(lo + frac * span)
                widths.append(0.22 * span * (1.0 + 0.25 * (i % 3)))
            else:
                centers.append(lo + span * (0.45 + 0.02 * i))
                widths.append(0.30 * span)
        bumps.append(CompactBump(centers=tuple(centers),
                              halfwidths=tuple(widths),
                              t_span=grid.time.t_final,
                              amplitude=1.0 + 0.1 * i))
    return bumps


def _grid_gradient(values, spacing):
    """Centered interior differences per space axis; data vanish near edges."""
    grads = []
    for d in range(len(spacing)):
        grads.append(np.gradient(values, spacing[d], axis=d + 1, edge_order=2))
    return np.stack(grads, axis=-1)


def _weighted_integral(density, grid: SpaceTimeGrid, beta, weight):
    """Trapezoid of density * exp(2 beta psi(x_n)) over the cylinder."""
    mesh = grid.mesh()
    psi = weight.psi(mesh[..., -1])
    integrand = density * np.exp(2.0 * beta * psi)
    for ax in range(integrand.ndim - 1, 0, -1):
        integrand = np.trapezoid(integrand, dx=grid.spacing[ax - 1], axis=ax)
    return float(np.trapezoid(integrand, dx=grid.time.dt, axis=0))


def carleman_lhs(values, grid: SpaceTimeGrid, beta: float,
                 weight: CarlemanWeightParams, alpha: float,
                 gradient=None, time_derivative=None) -> float:
    """Left side: beta^3 |v|^2 + beta |grad v|^2 blocks under the weight.

    On the branch alpha >= 4/3 the block beta^(3 - 4/alpha) |d_t v|^2 is
    added.  ``gradient``/``time_derivative`` override the centered-difference
    derivatives with exact ones (used by the quadrature oracle tests).
    """
    values = np.asarray(values, dtype=float)
    total = beta**3 * _weighted_integral(values**2, grid, beta, weight)
    grads = _grid_gradient(values, grid.spacing) if gradient is None else gradient
    total += beta * _weighted_integral(np.sum(grads**2, axis=-1), grid, beta,
                                       weight)
    if alpha >= BRANCH_THRESHOLD:
        if time_derivative is None:
            dt_v = np.gradient(values, grid.time.dt, axis=0, edge_order=2)
        else:
            dt_v = time_derivative
        total += beta ** (3.0 - 4.0 / alpha) * _weighted_integral(
            dt_v**2, grid, beta, weight)
    return total


def _combine_lower(first: LowerOrderTerm, second: LowerOrderTerm) -> LowerOrderTerm:
    if first.b is None and first.b0 is None:
        return second
    if second.b is None and second.b0 is None:
        return first

    def add_b(t, Y):
        parts = [term.b(t, Y) for term in (first, second) if term.b is not None]
        return sum(np.asarray(p, dtype=float) for p in parts)

    def add_b0(t, Y):
        parts = [term.b0(t, Y) for term in (first, second) if term.b0 is not None]
        return sum(np.asarray(p, dtype=float) for p in parts)

    return LowerOrderTerm(
        b=add_b if (first.b is not None or second.b is not None) else None,
        b0=add_b0 if (first.b0 is not None or second.b0 is not None) else None)


def conjugated_operator(values, grid: SpaceTimeGrid, spec: MultiTermSpec,
                        frame: HolmgrenFrame, include_drift: bool = True,
                        lower=None) -> np.ndarray:
    """Apply the conjugated operator in the convexified coordinates.

    The composed second-order operator is rewritten as the effective
    quadratic form plus its first-order by-product and fed through the
    shared finite-difference operator with the conjugation flag.  The drift
    block, the trace of the time-derivative transformation, couples a
    fractional time integral of order k - alpha_l with the normal
    derivative and carries the X/T factor.  ``lower`` optionally adds the
    equation's own first-order term (off by default).  The image is set to
    zero on the boundary ring, where the test functions vanish to high
    order anyway.
    """
    values = np.asarray(values, dtype=float)
    nd = grid.ndim
    nt = grid.time.n_steps
    times = grid.time.nodes
    shape_t = (-1,) + (1,) * nd

    tilt = LowerOrderTerm(b=frame.tilt_drift, b0=None)
    if lower is not None:
        tilt = _combine_lower(tilt, lower)
    interior = apply_discrete_operator(values, spec, frame.effective_field(),
                                       tilt, grid, conjugated=True)
    image = np.zeros_like(values)
    image[(slice(None),) + grid.interior()] = interior

    if include_drift:
        w = values * np.exp(times).reshape(shape_t)
        dn = np.gradient(w, grid.spacing[-1], axis=nd, edge_order=2)
        drift = np.zeros_like(w)
        for q, al in zip(spec.weights, spec.orders):
            if al < 1.0:
                block = rl_integral_l1(dn.reshape(nt + 1, -1), 1.0 - al,
                                       grid.time.dt)
            elif al == 1.0:
                block = dn.reshape(nt + 1, -1)
            else:
                dtdn = np.zeros_like(dn)
                dtdn[1:] = np.diff(dn, axis=0) / grid.time.dt
                block = rl_integral_l1(dtdn.reshape(nt + 1, -1), 2.0 - al,
                                       grid.time.dt)
            drift += q * frame.drift_ratio * block.reshape(w.shape)
        drift *= np.exp(-times).reshape(shape_t)
        drift[(slice(None),) + _boundary_ring(grid)] = 0.0
        image += drift
    return image


def _boundary_ring(grid: SpaceTimeGrid):
    mask = np.ones(grid.shape, dtype=bool)
    mask[grid.interior()] = False
    return np.nonzero(mask)


def carleman_rhs(values, grid: SpaceTimeGrid, beta: float,
                 weight: CarlemanWeightParams, spec: MultiTermSpec,
                 frame: HolmgrenFrame, include_drift: bool = True,
                 lower=None) -> float:
    """Right side: weighted square of the conjugated operator image."""
    image = conjugated_operator(values, grid, spec, frame,
                                include_drift=include_drift, lower=lower)
    return _weighted_integral(image**2, grid, beta, weight)


@dataclass(frozen=True)
class BetaSweepConfig:
    """Sweep controls: betas, bump family, weight, branch order."""

    betas: tuple
    weight: CarlemanWeightParams
    spec: MultiTermSpec
    alpha: float = None
    include_drift: bool = True

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if any(b <= 0.0 for b in betas) or len(betas) < 2:
            raise ValueError("need at least two positive beta values")
        if sorted(betas) != list(betas):
            raise ValueError("beta grid must increase")
        if max(betas) / min(betas) < 10.0:
            raise ValueError("beta grid must span at least one decade")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.spec.alpha)


@dataclass(frozen=True)
class SweepRow:
    beta: float
    test_id: int
    lhs: float
    rhs: float
    ratio: float
    flagged: bool


@dataclass
class SweepResult:
    rows: list
    max_ratio: float
    min_ratio: float
    flagged: int

    def ratios_by_test(self):
        out = {}
        for row in self.rows:
            out.setdefault(row.test_id, []).append((row.beta, row.ratio))
        return out

    def top_half_monotone_growth(self) -> bool:
        """True if any test's ratio strictly increases across the top half
        of the beta grid, the divergence signature the sweep must rule out."""
        for pairs in self.ratios_by_test().values():
            pairs = sorted(pairs)
            top = [r for _, r in pairs[(len(pairs) - 1) // 2:]]
            if len(top) >= 2 and all(b > a for a, b in zip(top, top[1:])):
                return True
        return False

    def to_json(self, path=None) -> str:
        doc = {"max_ratio": self.max_ratio, "min_ratio": self.min_ratio,
               "flagged_rows": self.flagged,
               "spread": (self.max_ratio / self.min_ratio
                          if self.min_ratio > 0 else float("inf")),
               "top_half_monotone_growth": self.top_half_monotone_growth()}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def beta_sweep(config: BetaSweepConfig, bumps, grid: SpaceTimeGrid,
               frame: HolmgrenFrame, operator=None) -> SweepResult:
    """Evaluate both sides over the (beta, bump) lattice.

    ``operator`` may replace the conjugated-operator application (the tests
    use this to exercise the degenerate-row flag).  Rows with zero right
    side and positive left side are flagged rather than dropped.
    """
    mesh = grid.mesh()
    times = grid.time.nodes
    rows = []
    for test_id, bump in enumerate(bumps):
        values = bump.values(times, mesh)
        if operator is None:
            image = conjugated_operator(values, grid, config.spec, frame,
                                        include_drift=config.include_drift)
        else:
            image = operator(values)
        for beta in config.betas:
            lhs = carleman_lhs(values, grid, beta, config.weight, config.alpha)
            rhs = _weighted_integral(image**2, grid, beta, config.weight)
            # numerically zero right side with a nonzero left side means the
            # test function sits in the discrete kernel (both sides are
            # quadratic, so the threshold is squared solver precision)
            flagged = lhs > 0.0 and rhs <= 1e-20 * lhs
            ratio = lhs / rhs if rhs > 0.0 else math.inf
            rows.append(SweepRow(beta=beta, test_id=test_id, lhs=lhs,
                                 rhs=rhs, ratio=ratio, flagged=flagged))
    finite = [r.ratio for r in rows if math.isfinite(r.ratio)]
    return SweepResult(rows=rows,
                       max_ratio=max(finite) if finite else math.inf,
                       min_ratio=min(finite) if finite else math.inf,
                       flagged=sum(r.flagged for r in rows))


def sweep_rows_csv(result: SweepResult, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("beta,lhs,rhs,ratio,test_id\n")
        for r in result.rows:
            fh.write(f"{r.beta:.17g},{r.lhs:.17g},{r.rhs:.17g},"
                     f"{r.ratio:.17g},{r.test_id}\n")
