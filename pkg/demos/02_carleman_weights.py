"""How the Carleman weight redistributes the residual.

The parabolic weight phi = exp(lambda (x^2 - t^2)) is largest at the data
boundary x = 1, t = 0 and smallest at x = 0, t = +-1/2.  Raising lambda
sharpens that contrast, which is what convexifies the functional.
"""
import numpy as np

from carleman_cauchy import CwfSpec, build_grid, cwf_value, cwf_weight_grid, lambda_for_noise

grid = build_grid(128, 32)
for lam in (0.0, 1.0, 3.0):
    w = cwf_weight_grid(CwfSpec("ParabolicQuadratic", lam=lam), grid)
    print(f"lambda = {lam:g}: phi^2 ranges over [{w.min():.3g}, {w.max():.3g}], "
          f"ratio {w.max() / w.min():.3g}")

# other families from the theory, evaluated pointwise
spec = CwfSpec("HyperbolicQuadratic", lam=2.0, x0=np.array([0.0]), eta=0.5)
print("hyperbolic weight at x = 0.5, t = 0.2:", cwf_value(spec, np.array([0.5]), 0.2))

# the noise-driven schedule lambda(delta) = ln(delta^(-1/(2m)))
for delta in (0.1, 0.05, 0.01):
    print(f"delta = {delta}: lambda = {lambda_for_noise(delta, m=0.25):.3f}")
