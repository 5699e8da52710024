"""Angle operator (i/2) log(sqrt((N+2)/(N+1)) L^2) on super-coherent vectors."""

from oscitime.ccr import ccr_check
from oscitime.conjugates import AngleContext
from oscitime.operators import apply


def main():
    for beta in (0.2, 0.5, 0.8):
        ctx = AngleContext("S0", 16)
        D, prec = ctx.plan(beta)
        ctx = ctx.with_dim(D)
        v = ctx.eigenvector(beta, prec=prec)
        eig = (apply(ctx.inner, v) - v.scaled(beta)).norm()
        r = ccr_check(lambda x: ctx.apply(x), v, -1j, 1e-8, budget_scale=0.5)
        print(f"beta={beta}: D={D}, eigen residual {float(eig):.1e}, CCR residual {r.residual_norm:.1e} ({r.verdict.value})")


if __name__ == "__main__":
    main()
