"""How good is the conditional density approximation, and when?

The approximation replaces the joint law by its limiting point-process
intensity, which is only justified when the conditioning observations are
large.  Here we can see exactly how the quality improves with the
conditioning value, because the bivariate logistic admits a closed-form
conditional density to compare against.
"""

import numpy as np

from tailpred import LogisticModel, conditional_density, exact_conditional_oracle

beta = 0.3
model = LogisticModel(beta=beta, d=2)

print(f"bivariate logistic, dependence beta = {beta}")
print(f"{'z1':>8} {'sup-norm error':>16} {'% of oracle peak':>18} {'q95 approx':>12} {'q95 exact':>12}")

for z1 in (1.0, 5.0, 25.0, 125.0):
    cd = conditional_density([z1], model)

    # evaluate both densities on a wide common grid
    wide = np.geomspace(z1 * 1e-3, z1 * 1e3, 50000)
    oracle = exact_conditional_oracle([z1], beta, wide)
    approx = cd.density_at(wide)
    err = np.max(np.abs(approx - oracle))

    # quantiles: approximate from the predictive object, exact from the
    # oracle's own CDF
    ocdf = np.concatenate(
        [[0.0], np.cumsum(0.5 * (oracle[1:] + oracle[:-1]) * np.diff(wide))]
    )
    q95_exact = np.interp(0.95, ocdf, wide)
    q95_approx = cd.quantile(0.95)

    print(
        f"{z1:8.0f} {err:16.3e} {100 * err / oracle.max():17.2f}% "
        f"{q95_approx:12.3f} {q95_exact:12.3f}"
    )

print()
print("The error falls by orders of magnitude as the conditioning value grows,")
print("which is the regime the method is built for.")
