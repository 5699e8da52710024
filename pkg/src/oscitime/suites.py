"""Verification suites run by the command line tool.

Each suite expands its grid into independent cells.  A cell is a
top-level function of plain arguments, so cells can run in a process
pool; results come back in grid order and are written single-threaded.
Every cell returns a flat row dict with a ``verdict`` entry.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .ccr import Combination, UltraWeakForm, Verdict, ccr_check, kennard_check, ultraweak_ccr_check
from .conjugates import (
    AngleContext,
    ConjugateOperator,
    FamilyClass,
    _tails,
    classify,
    finite_ccr_root_solver,
    galapon_operator,
)
from .evolution import EvolutionParams, evolve, periodicity_check, weak_weyl_failure_probe
from .fock import (
    ResidueClassZero,
    SumZero,
    basis_vector,
    ccr_domain_sample,
    generalized_eigen_vector,
    geometric_vector,
    make_rng,
)
from .hermite import bridge_check
from .operators import Annihilate, Number, apply, hermitian_norm, make
from .opfunc import divergence_probe

__all__ = [
    "SUITES",
    "DEFAULT_GRID",
    "DEFAULT_TOLERANCES",
    "SuiteResult",
    "suite_cells",
    "collect",
    "table1_report",
    "render_table1",
]

PASS, FAIL, INCONCLUSIVE = Verdict.Pass.value, Verdict.Fail.value, Verdict.Inconclusive.value

SUITES = ("Ccr", "Classification", "Evolution", "Galapon", "Angle", "Bridge", "Divergence")

DEFAULT_GRID = {
    "omega": ["1", "1j", "0.5+0.8660254037844386j"],
    "m": [1, 2, 3],
    "kalpha": [0.3, 0.5, 0.7],
    "open_disc": [["0.8", 1, 0.2], ["0.5", 2, 0.1], ["0.6", 3, 0.5], ["0.5+0.3j", 2, 0.4], ["0.9", 2, 1.0]],
    "t": [-2.5, -1.3, -0.4, 0.0, 0.3, 0.7, 1.0, 1.3, 2.2, 3.0],
    "alpha": [0.3, 0.5, 0.8],
    "beta": [0.2, 0.5, 0.8],
    "galapon_dims": [64, 128, 256, 512, 1024, 2048],
    "divergence_m": [0, 1, 2, 3],
    "divergence_K": 10000,
    "n_max": 40,
    "ultraweak_pairs": 50,
}

DEFAULT_TOLERANCES = {
    "ccr": 1e-8,
    "exact": 1e-13,
    "periodicity": 1e-12,
    "diagonal": 1e-13,
    "galapon_norm": 1e-9,
    "bridge": 1e-8,
    "divergence": 0.01,
    "kennard": 1e-10,
    "ultraweak": 1e-8,
}

# the tolerance key that --tol overrides for each suite
PRIMARY_TOLERANCE = {
    "Ccr": "ccr",
    "Classification": "ccr",
    "Evolution": "periodicity",
    "Galapon": "galapon_norm",
    "Angle": "ccr",
    "Bridge": "bridge",
    "Divergence": "divergence",
}

CSV_NAMES = {
    "Ccr": "ccr.csv",
    "Classification": "classification.csv",
    "Evolution": "evolution.csv",
    "Galapon": "norms.csv",
    "Angle": "angle.csv",
    "Bridge": "bridge.csv",
    "Divergence": "divergence.csv",
}


def parse_complex(x):
    """``complex`` from a number, a string such as ``"0.5+1j"`` or a ``[re, im]`` pair."""
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"complex pairs need two entries, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", "").replace("i", "j").replace("jj", "j"))
    return complex(x)


def _verdict(ok):
    return PASS if ok else FAIL


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


def cell_galapon_sumzero(seed, D, tol):
    G = galapon_operator(D)
    phi = ccr_domain_sample(SumZero(), seed, D)
    r = ccr_check(G, phi, -1j, tol * D, domain_tag="SumZero", vector_id=seed)
    return _ccr_row("Galapon", 1, 1, f"seed={seed}", r)


def cell_galapon_negative(D):
    r = ccr_check(galapon_operator(D), basis_vector(0, D), -1j, 1e-13 * D, vector_id="xi_0")
    ok = r.verdict is Verdict.Fail and r.residual_norm >= 0.5
    row = _ccr_row("Galapon", 1, 1, "negative_control=xi_0", r)
    row["verdict"] = _verdict(ok)
    return row


def cell_boundary(omega, m, seed, D, tol, kennard_tol):
    op = ConjugateOperator(omega, m, D)
    S = op.symmetric_operator()
    phi = ccr_domain_sample(ResidueClassZero(omega, m), seed, D)
    r = ccr_check(S, phi, -1j, tol * D, domain_tag="ResidueClassZero", vector_id=seed)
    k = kennard_check(make(Number(), D), S, phi, slack_tol=kennard_tol)
    row = _ccr_row("Boundary", omega, m, f"seed={seed}", r)
    row["kennard_slack"] = k.slack
    if k.verdict is not Verdict.Pass and row["verdict"] == PASS:
        row["verdict"] = FAIL
    return row


def cell_zero(m, kalpha, tol):
    f = lambda n: n  # noqa: E731
    probe = ConjugateOperator(0.0, m, 64)
    v = generalized_eigen_vector(f, m, kalpha / m, 64)
    D, prec = probe.plan(_tails(v, [make(Number(), 64)]), kalpha, 1e-12)
    op = probe.with_dim(D)
    v = generalized_eigen_vector(f, m, kalpha / m, D, prec=prec)
    r = ccr_check(lambda x: op.apply(x), v, -1j, tol, budget_scale=1.0 / m, domain_tag="GeneralizedEigen")
    return _ccr_row("Zero", 0.0, m, f"kalpha={kalpha!r}", r)


def cell_open_disc(omega, m, c, tol):
    rs = finite_ccr_root_solver(omega, m, c)
    rows = []
    adm = rs.admissible_roots()
    count_ok = len(rs.roots) == m
    for a in adm:
        probe = ConjugateOperator(omega, m, 64)
        v = geometric_vector(a, 64)
        D, prec = probe.plan(_tails(v, [make(Number(), 64)]), a**m, 1e-12)
        op = probe.with_dim(D)
        v = geometric_vector(a, D, prec=prec)
        r = ccr_check(
            lambda x: op.apply(x, scale=-1j / c), v, -1j, tol, budget_scale=1.0 / abs(c), domain_tag="GeometricEigen"
        )
        row = _ccr_row("OpenDisc", omega, m, f"c={c!r};alpha={a!r}", r)
        if not count_ok:
            row["verdict"] = FAIL
        rows.append(row)
    if not adm:
        rows.append(
            {
                "family": "OpenDisc",
                "omega_re": complex(omega).real,
                "omega_im": complex(omega).imag,
                "m": m,
                "param": f"c={c!r};no admissible root",
                "residual": math.nan,
                "budget": math.nan,
                "kennard_slack": math.nan,
                "verdict": INCONCLUSIVE if count_ok else FAIL,
            }
        )
    return rows


def _ccr_row(family, omega, m, param, r):
    w = complex(omega)
    return {
        "family": family,
        "omega_re": w.real,
        "omega_im": w.imag,
        "m": int(m),
        "param": param,
        "residual": r.residual_norm,
        "budget": r.truncation_budget,
        "kennard_slack": math.nan,
        "verdict": r.verdict.value,
    }


def cell_evolution(omega, m, t, D, tol, diag_tol):
    p = EvolutionParams(float(t), omega, int(m))
    ctx = evolve(p, D)
    con = ctx.dense_deviation(symmetric=True)
    per = periodicity_check(p, D, tol=tol).deviation
    ww = weak_weyl_failure_probe(p, D)
    ok = con <= tol and per <= tol and ww.diagonal_deviation <= diag_tol
    w = complex(omega)
    return {
        "omega_re": w.real,
        "omega_im": w.imag,
        "m": int(m),
        "t": float(t),
        "deviation": per,
        "construction_deviation": con,
        "diagonal_deviation": ww.diagonal_deviation,
        "weyl_gap": ww.weyl_gap,
        "verdict": _verdict(ok),
    }


def cell_galapon_norm(D):
    return {"D": int(D), "norm": hermitian_norm(galapon_operator(D))}


def cell_angle(variant, beta, tol):
    ctx = AngleContext(variant, 16)
    D, prec = ctx.plan(beta)
    ctx = ctx.with_dim(D)
    v = ctx.eigenvector(beta, prec=prec)
    eig = (apply(ctx.inner, v) - v.scaled(beta)).norm()
    r = ccr_check(lambda x: ctx.apply(x), v, -1j, tol, budget_scale=0.5, domain_tag=f"{variant}-eigen")
    ok = eig <= 1e-10 and r.passed
    return {
        "check": "eigen+ccr",
        "variant": variant,
        "beta": float(beta),
        "dim": D,
        "eigen_residual": eig,
        "residual": r.residual_norm,
        "budget": r.truncation_budget,
        "verdict": _verdict(ok),
    }


def cell_ultraweak(betas, seed, pairs, tol):
    s0, s1 = AngleContext("S0", 16), AngleContext("S1", 16)
    plans = [c.plan(b, n) for c in (s0, s1) for b in betas for n in (0, 1)]
    D = max(p[0] for p in plans)
    prec = max(p[1] for p in plans)
    s0, s1 = s0.with_dim(D), s1.with_dim(D)
    form = UltraWeakForm(lambda v: s0.apply(v), lambda v: s1.apply(v), name="angle")
    for b in betas:
        for n in (0, 1):
            form.register(f"S0:{b!r}:{n}", s0.family_vector(b, n, prec=prec), 0)
            form.register(f"S1:{b!r}:{n}", s1.family_vector(b, n, prec=prec), 1)
    keys = form.keys()
    rng = make_rng(seed)
    worst = 0.0
    sym = 0.0
    for _ in range(int(pairs)):
        combos = []
        for _ in range(2):
            idx = rng.choice(len(keys), size=3, replace=False)
            coef = rng.standard_normal((3, 2))
            combos.append(Combination.of(*[(keys[i], complex(*c)) for i, c in zip(idx, coef)]))
        r = ultraweak_ccr_check(form, combos[0], combos[1])
        worst = max(worst, r.defect)
        sym = max(sym, r.symmetry_defect)
    return {
        "check": "ultraweak",
        "variant": "S0+S1",
        "beta": math.nan,
        "dim": D,
        "eigen_residual": math.nan,
        "residual": worst,
        "symmetry_defect": sym,
        "budget": math.nan,
        "verdict": _verdict(worst <= tol),
    }


def cell_bridge(alpha, n_max, tol):
    r = bridge_check(alpha, n_max, tol)
    return {
        "alpha": float(alpha),
        "n_max": int(n_max),
        "max_deviation": r.max_deviation,
        "norm_deviation": r.norm_deviation,
        "verdict": _verdict(r.passed and r.norm_deviation <= tol),
    }


def divergence_ratios(m, K):
    """``|s_k| / H_k`` of ``log a`` on ``xi_m`` probed at index ``m``, ``k = 1..K``."""
    D = max(16, m + 2)
    s = divergence_probe(make(Annihilate(), D), basis_vector(m, D), m, K)
    H = np.cumsum(1.0 / np.arange(1, K + 1))
    return np.abs(s) / H


def cell_divergence(m, K, tol):
    ratio = divergence_ratios(m, K)
    lo = min(1000, K // 10)
    window = ratio[lo - 1 :]
    spread = float((window.max() - window.min()) / window.mean())
    const = float(window[-1])
    return {
        "m": int(m),
        "K": int(K),
        "ratio_first": float(window[0]),
        "ratio_last": const,
        "relative_spread": spread,
        "verdict": _verdict(spread <= tol and const > 0),
    }


# ---------------------------------------------------------------------------
# suite expansion and collection
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    rows: list
    extra: dict = field(default_factory=dict)

    @property
    def csv_name(self):
        return CSV_NAMES[self.name]

    def counts(self):
        out = {PASS: 0, FAIL: 0, INCONCLUSIVE: 0}
        for r in self.rows:
            out[r["verdict"]] += 1
        for v in self.extra.get("verdicts", []):
            out[v] += 1
        return out


def suite_cells(name, cfg):
    """List of ``(function, args)`` cells for a suite.

    ``cfg`` supplies ``dim``, ``seeds``, ``grid`` and ``tolerances``.
    """
    g, tol, D = cfg.grid, cfg.tolerances, cfg.dim
    omegas = [parse_complex(w) for w in g["omega"]]
    if name == "Ccr":
        cells = [(cell_galapon_sumzero, (s, D, tol["exact"])) for s in cfg.seeds]
        cells.append((cell_galapon_negative, (D,)))
        cells += [
            (cell_boundary, (w, m, s, D, tol["exact"], tol["kennard"]))
            for m in g["m"]
            for w in omegas
            for s in cfg.seeds
        ]
        cells += [(cell_zero, (m, ka, tol["ccr"])) for m in g["m"] for ka in g["kalpha"]]
        cells += [(cell_open_disc, (parse_complex(w), int(m), float(c), tol["ccr"])) for w, m, c in g["open_disc"]]
        return cells
    if name == "Classification":
        return [(table1_report, (D, tol["ccr"]))]
    if name == "Evolution":
        return [
            (cell_evolution, (w, m, t, D, tol["periodicity"], tol["diagonal"]))
            for w in omegas
            for m in g["m"]
            for t in g["t"]
        ]
    if name == "Galapon":
        return [(cell_galapon_norm, (d,)) for d in g["galapon_dims"]]
    if name == "Angle":
        cells = [(cell_angle, (var, b, tol["ccr"])) for var in ("S0", "S1") for b in g["beta"]]
        seed = cfg.seeds[0] if cfg.seeds else 0
        cells.append((cell_ultraweak, (tuple(g["beta"]), seed, g["ultraweak_pairs"], tol["ultraweak"])))
        return cells
    if name == "Bridge":
        return [(cell_bridge, (a, g["n_max"], tol["bridge"])) for a in g["alpha"]]
    if name == "Divergence":
        return [(cell_divergence, (m, g["divergence_K"], tol["divergence"])) for m in g["divergence_m"]]
    raise ValueError(f"unknown suite {name!r}")


def collect(name, outputs, cfg):
    """Turn cell outputs into a :class:`SuiteResult`."""
    rows = []
    extra = {}
    if name == "Classification":
        doc = outputs[0]
        extra["table1"] = doc
        for r in doc["rows"]:
            rows.append(
                {
                    "region": r["region"],
                    "family": r["family"],
                    "bounded": r["bounded"],
                    "ccr_domain": r["ccr_domain"],
                    "witness_count": len(r["witnesses"]),
                    "verdict": r["verdict"],
                }
            )
        return SuiteResult(name, rows, extra)
    for out in outputs:
        rows.extend(out if isinstance(out, list) else [out])
    if name == "Galapon":
        bound = math.pi + cfg.tolerances["galapon_norm"]
        prev = -math.inf
        for r in rows:
            r["bound"] = bound
            r["nondecreasing"] = r["norm"] >= prev
            r["verdict"] = _verdict(r["norm"] <= bound and r["nondecreasing"])
            prev = r["norm"]
    return SuiteResult(name, rows, extra)


# ---------------------------------------------------------------------------
# Table 1
# ---------------------------------------------------------------------------


def table1_report(D=128, tol=1e-8, *, seeds=range(5)):
    """Classification table with computed witnesses.

    Rows: ``{0}`` (Zero family, generalized eigenvector CCR passes),
    ``D\\{0}`` (finite root listings) and ``dD`` (Boundary norm bound,
    dense-domain passes and ``T_G = T_{1,1} + T_{1,1}*``).
    """
    rows = []

    fam = classify(0.0, 1)
    wit = []
    for ka in (0.3, 0.5, 0.7):
        r = cell_zero(1, ka, tol)
        wit.append({"kalpha": ka, "m": 1, "residual": r["residual"], "verdict": r["verdict"]})
    ok = len(wit) >= 3 and all(w["verdict"] == PASS for w in wit)
    row = fam.to_dict(wit)
    row.update(region="{0}", ccr_domain_label="infinite dim.", verdict=_verdict(ok and not fam.bounded))
    rows.append(row)

    wit = []
    ok = True
    for w, m, c in ((0.8, 1, 0.2), (0.5, 2, 0.1), (0.6j, 3, 0.5)):
        rs = finite_ccr_root_solver(w, m, c)
        count = len(rs.roots)
        ok &= count == m
        wit.append({"omega": [complex(w).real, complex(w).imag], "m": m, "c": c, "root_count": count,
                    "admissible": sum(rs.admissible)})
    fam = classify(0.5, 2)
    row = fam.to_dict(wit)
    row.update(region="D\\{0}", ccr_domain_label="finite dim.", verdict=_verdict(ok and not fam.bounded))
    rows.append(row)

    fam = classify(1.0, 1)
    op = ConjugateOperator(1.0, 1, D)
    S = op.symmetric_operator()
    G = galapon_operator(D)
    ident = float(np.max(np.abs(S.to_dense() - G.to_dense())))
    norm = hermitian_norm(S)
    passes = 0
    for s in seeds:
        phi = ccr_domain_sample(ResidueClassZero(1.0, 1), s, D)
        passes += ccr_check(S, phi, -1j, 1e-13 * D).passed
    wit = [{"example": "T_G = T_{1,1}+T_{1,1}*", "identity_deviation": ident, "norm": norm,
            "norm_bound": math.pi, "dense_domain_passes": passes, "samples": len(list(seeds))}]
    ok = ident == 0.0 and norm <= math.pi and passes == len(list(seeds)) and fam.bounded
    row = fam.to_dict(wit)
    row.update(region="dD", ccr_domain_label="dense", verdict=_verdict(ok))
    rows.append(row)
    return {"dim": D, "rows": rows}


def render_table1(doc):
    """Markdown rendering of :func:`table1_report`."""
    lines = [
        f"Classification of T_(omega,m) at D = {doc['dim']}",
        "",
        "| omega region | family | bounded | CCR-domain | witnesses | verdict |",
        "|---|---|---|---|---|---|",
    ]
    for r in doc["rows"]:
        if r["family"] == FamilyClass.Boundary.value:
            w = r["witnesses"][0]
            desc = (f"example {w['example']} (deviation {w['identity_deviation']:.1e}), norm {w['norm']:.6f} <= pi, "
                    f"{w['dense_domain_passes']}/{w['samples']} dense-domain passes")
        elif r["family"] == FamilyClass.OpenDisc.value:
            desc = "; ".join(
                f"(omega={complex(*w['omega'])}, m={w['m']}): {w['root_count']} root{'' if w['root_count'] == 1 else 's'}"
                for w in r["witnesses"]
            )
        else:
            desc = f"{len(r['witnesses'])} eigen-family passes (max residual " \
                   f"{max(w['residual'] for w in r['witnesses']):.1e})"
        lines.append(
            f"| {r['region']} | {r['family']} | {'yes' if r['bounded'] else 'no'} | {r['ccr_domain_label']} "
            f"| {desc} | {r['verdict']} |"
        )
    return "\n".join(lines) + "\n"
