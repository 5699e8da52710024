"""Galapon operator: exact CCR on sum-zero vectors and the Hilbert bound on its norm."""

import math

from oscitime.ccr import ccr_check
from oscitime.conjugates import galapon_operator
from oscitime.fock import SumZero, basis_vector, ccr_domain_sample
from oscitime.operators import hermitian_norm


def main():
    D = 256
    G = galapon_operator(D)
    phi = ccr_domain_sample(SumZero(), 0, D)
    print("[N, T_G] phi = -i phi on a sum-zero vector:", ccr_check(G, phi, -1j, 1e-13 * D).verdict.value)
    r = ccr_check(G, basis_vector(0, D), -1j, 1e-13 * D)
    print(f"on xi_0 the residual is {r.residual_norm:.3f} ({r.verdict.value})")
    print("\n   D    ||T_G||     pi - ||T_G||")
    for D in (64, 128, 256, 512, 1024, 2048):
        n = hermitian_norm(galapon_operator(D))
        print(f"{D:5d}  {n:.8f}  {math.pi - n:.3e}")


if __name__ == "__main__":
    main()
