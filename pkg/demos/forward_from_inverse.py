"""Forward Young constant obtained from an inverse problem.

Augmenting the forward datum by an identity factor with exponent 1 + t and
flipping the remaining exponents to -c t turns a supremum into an infimum.
For the symmetric exponents (2/3, 2/3, 2/3) the recovered constant is sqrt(3)/2
at every t.
"""

import math

from regbl import OptConfig, optimize_gaussian, wolff_forward
from regbl.closed_forms import YoungSpec, young_datum


def main():
    d, _ = young_datum(YoungSpec(2 / 3, 2 / 3, 2 / 3, 1.0, 1.0, 1.0))
    sup = optimize_gaussian(d, OptConfig(direction="supremum"))
    print(f"direct supremum {sup.value:.10f}   sqrt(3)/2 = {math.sqrt(3) / 2:.10f}")
    for t in (1.0, 10.0, 100.0):
        w = wolff_forward(d, t, sup_result=sup)
        print(f"t = {t:5.0f}: C(t) = {w.C:.10f}, C^2 = {w.C ** 2:.6f} <= bound {w.bound_sq:.6f}: {w.holds}")


if __name__ == "__main__":
    main()
