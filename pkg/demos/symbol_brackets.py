"""The weighted symbol, its exact derivatives, and the spatial bracket.

Shifting the normal dual by i|sigma|(x_n - 2X) turns the elliptic quadratic
form into a complex symbol whose real/imaginary bracket measures
subellipticity.  With constant coefficients and no convexification the
spatial bracket collapses to the two-term closed form
4|s|(sum a_jn xi_j)^2 + 4 a_nn^2 |s|^3 (x_n-2X)^2, checked here to machine
precision; the bracket is also exactly cubic under the anisotropic scaling
(xi, sigma) -> (rho xi, rho sigma), tau -> rho^(2/alpha) tau.
"""

import numpy as np

from fraclab import (CarlemanWeightParams, MultiTermSpec, PhasePoint,
                     constant_field, poisson_bracket, symbol_gradients,
                     weighted_principal_symbol)

print(__doc__)

spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
weight = CarlemanWeightParams(X=0.1)
field = constant_field(np.array([[1.0]]))

point = PhasePoint(t=0.0, x=np.array([0.0]), tau=0.0,
                   xi=np.array([1.0]), sigma=1.0)
sym = weighted_principal_symbol(point, spec, field, weight, c=1.0)
print(f"hand point (tau=0, xi_n=1, sigma=1, X=0.1): value = {sym.value}")
print("  (analytically 1 + (1 - 0.2i)^2 = 1.96 - 0.4i)")

g = symbol_gradients(point, spec, field, weight, c=1.0)
print(f"  d/dxi_n = {g.d_xi[0]}, d/dx_n = {g.d_x[0]}, d/dtau = {g.d_tau}")

rng = np.random.default_rng(1)
print("\nClosed-form bracket, random constant coefficients (n = 2, c = 0):")
m = rng.normal(size=(2, 2))
field2 = constant_field(m @ m.T + 2.0 * np.eye(2))
a = field2.a(0.0, np.zeros(2))
for _ in range(4):
    point = PhasePoint(t=0.3, x=np.array([0.0, rng.uniform(0.0, 0.1)]),
                       tau=rng.uniform(-2, 2), xi=rng.normal(size=2),
                       sigma=rng.uniform(0.5, 3.0))
    rep = poisson_bracket(point, spec, field2, weight, c=0.0,
                          mode="principal")
    mu = point.sigma * (point.x[-1] - 2.0 * weight.X)
    closed = (4.0 * point.sigma * (a[:, -1] @ point.xi) ** 2
              + 4.0 * a[-1, -1] ** 2 * point.sigma * mu**2)
    print(f"  bracket {rep.principal:16.10f}  closed {closed:16.10f}  "
          f"rel dev {abs(rep.principal-closed)/closed:.2e}")

print("\nCubic homogeneity of bracket/rho^3 along the anisotropic scaling:")
base = PhasePoint(t=0.4, x=np.array([0.05, 0.02]), tau=1.1,
                  xi=np.array([0.8, -1.2]), sigma=1.7)
ref = poisson_bracket(base, spec, field2, weight, 1.0, mode="principal")
for rho in (10.0, 100.0, 1000.0):
    scaled = PhasePoint(t=base.t, x=base.x,
                        tau=base.tau * rho ** (2.0 / spec.alpha),
                        xi=base.xi * rho, sigma=base.sigma * rho)
    rep = poisson_bracket(scaled, spec, field2, weight, 1.0, mode="principal")
    print(f"  rho = {rho:6.0f}: bracket/rho^3 = {rep.principal / rho**3:.12f}"
          f"  (base {ref.principal:.12f})")
