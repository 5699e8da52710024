"""Heisenberg evolution of a boundary-family operator returns after 2 pi/m."""

import cmath
import math

from oscitime.evolution import EvolutionParams, periodicity_check, weak_weyl_failure_probe


def main():
    D, omega, m = 128, cmath.exp(0.7j), 2
    print(" t       ||T(t) - T(t + 2pi/m)||   ||T(t) - T||   diag drift")
    for t in (0.25, 0.5, 1.0, math.pi / 2, math.pi):
        p = EvolutionParams(t, omega, m)
        per = periodicity_check(p, D).deviation
        ww = weak_weyl_failure_probe(p, D)
        print(f"{t:6.3f}  {per:.2e}                  {ww.return_deviation:.3e}      {ww.diagonal_deviation:.1e}")
    print("T(t) returns to T at t = pi, so T(t) = T + t cannot hold: no weak Weyl relation")


if __name__ == "__main__":
    main()
