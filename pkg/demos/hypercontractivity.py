"""Gaussian hypercontractivity as a datum with a non-trivial quadratic weight.

Builds the datum for p = 2 and q = 4 and reports its signature, the
non-degeneracy checks and the normalization of the constant on constant
functions.
"""

import math

import numpy as np

from regbl import bl_gaussian, check_nondegenerate, signature
from regbl.closed_forms import HCSpec, hc_datum


def main():
    spec = HCSpec.from_p_s(2.0, 0.5 * math.log(3.0))
    d, _, C = hc_datum(spec)
    print(f"p = {spec.p}, q = {spec.q:.6f}, constant {C:.10f}")
    print("signature of Q (plus, minus, zero):", signature(d.Q))
    rep = check_nondegenerate(d)
    for chk in rep.checks:
        print(f"  {chk.name:22s} {chk.passed}  {chk.detail}")
    val = bl_gaussian(d, [np.array(G) for G in d.regularizers])
    print(f"C * gaussian functional at standard gaussians = {C * val.value:.12f}")


if __name__ == "__main__":
    main()
