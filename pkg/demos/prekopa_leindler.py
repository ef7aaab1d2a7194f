"""Regularized Prekopa-Leindler constant in one dimension.

The constant is the inverse square root of a two-variable minimum over a box.
It is computed three ways: the closed form (corner or face), a nested grid
search, and the gaussian optimizer on a lifted inverse datum.
"""

import numpy as np

from regbl import PLSpec, optimize_gaussian, pl_datum, pl_regularized
from regbl.closed_forms import pl_phi


def grid_constant(spec, points=400):
    a1 = np.geomspace(1e-4 / spec.sigma1, 1 / spec.sigma1, points)
    a2 = np.geomspace(1e-4 / spec.sigma2, 1 / spec.sigma2, points)
    X, Y = np.meshgrid(a1, a2, indexing="ij")
    return float(np.min(pl_phi(spec.c1, spec.c2, X, Y))) ** -0.5


def main():
    for spec in (PLSpec(0.25, 0.25, 1.0, 1.0), PLSpec(0.3, 0.4, 1.0, 2.5), PLSpec(0.1, 0.5, 3.0, 0.5)):
        closed = pl_regularized(spec)
        d, factor = pl_datum(spec)
        opt = factor / optimize_gaussian(d).value
        print(f"{spec}: {closed.branch:6s} closed {closed.constant:.8f}  "
              f"grid {grid_constant(spec):.8f}  optimizer {opt:.8f}")


if __name__ == "__main__":
    main()
