"""Command-line entry point producing verification reports and plot data.

Subcommands::

    bihartree nondegeneracy --N 9 --alpha 8 --kmax 20
    bihartree oracle-suite
    bihartree stability --N 9 --alpha 8 --k 2 --eps-list 1e-1,1e-2,1e-3
    bihartree multibubble --potential config.json --m 100

Every command writes a JSON report (and CSV tables where useful) into --out,
$BIHARTREE_OUT, or the working directory.  Exit code 0 means every check
passed; 1 means a check failed; 2 means invalid input.  Identical invocations
produce byte-identical files outside the single ``timing`` field.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import multibubble, quad, spectral, stability
from .bubble import Bubble, riesz_convolution_Wp
from .quad import QuadratureSpec, two_center_integral
from .reports import VerificationReport, output_dir, write_csv_atomic, write_json_atomic
from .specfun import ProblemParams, c_n_alpha, i_of_s, lambda_k, sharp_constants


def _params_from(args) -> ProblemParams:
    return ProblemParams(N=args.N, alpha=args.alpha)


def cmd_nondegeneracy(args) -> int:
    t0 = time.perf_counter()
    params = _params_from(args)
    check = spectral.nondegeneracy_check(params, args.kmax)
    spectra = check.pop("spectra")
    amp = c_n_alpha(params)

    report = VerificationReport(
        check_id="nondegeneracy",
        params={"N": params.N, "alpha": params.alpha, "p": params.p, "kmax": args.kmax},
    )
    report.add("rho1_minus_1", check["rho1_err"], 1e-10, "sector multiplier, closed form",
               check["rho1_err"] < 1e-10)
    report.add("rho0_margin", check["rho0_margin"], 1e-6, "rho_0 - 1 must exceed tolerance",
               check["rho0_margin"] > 1e-6)
    report.add("max_rho_k_ge2", check["max_rho_k_ge2"], 1e-6, "1 - rho_k must exceed tolerance for k >= 2",
               check["max_rho_k_ge2"] < 1.0 - 1e-6)
    report.add("kernel_dim", float(check["kernel_dim"]), 0.0, "sum of multiplicities at rho_k = 1",
               check["kernel_dim"] == params.N + 1)
    report.add("amplitude_solvability", amp.solvability, None, "gauge-fixed bubble amplitude")
    report.add("amplitude_printed", amp.printed, None, "general closed form")
    if amp.cd_quoted is not None:
        report.add("amplitude_alpha8_factorial_form", amp.cd_quoted, None, "alpha = 8 special form")
    report.add("amplitude_rel_discrepancy", amp.rel_discrepancy, None, "printed vs solvability")

    out = output_dir(args.out)
    stem = f"nondegeneracy_N{params.N}_alpha{args.alpha:g}"
    write_csv_atomic(
        os.path.join(out, stem + ".csv"),
        ["k", "lambda_k_N4", "lambda_k_alpha", "rho_k", "mu_k", "dim_k"],
        [[s.k, s.lambda_k_N4, s.lambda_k_alpha, s.rho_k, s.mu_k, s.dim_k] for s in spectra],
    )
    write_json_atomic(
        os.path.join(out, stem + ".json"), report.as_dict(time.perf_counter() - t0)
    )
    return 0 if report.status == "pass" else 1


def cmd_oracle_suite(args) -> int:
    t0 = time.perf_counter()
    spec = QuadratureSpec(
        rel_tol=args.rel_tol, max_subdivisions=args.max_subdivisions,
        mc_samples=args.mc_samples, seed=args.seed,
    )
    report = VerificationReport(check_id="oracle_suite", params={"quadrature": vars(args)["rel_tol"], "seed": args.seed})

    quad.bipolar_self_test.cache_clear()
    try:
        quad.bipolar_self_test(9, spec)
        report.add("bipolar_gate", 0.0, 1e-10, "d=0 Beta closed form + convolution identity", True)
    except quad.QuadratureError as exc:
        report.add("bipolar_gate", float(exc.best_estimate or np.nan), 1e-10, str(exc), False)

    for (N, s) in ((9, 8.0), (9, 5.0), (10, 6.0)):
        worst = 0.0
        for k in range(0, 11):
            closed = lambda_k(N, s, k)
            numeric = spectral.funk_hecke_numeric(N, s, k)
            worst = max(worst, abs(numeric - closed) / closed)
        report.add(f"funk_hecke_N{N}_s{s:g}_max_rel_err", worst, 1e-8,
                   "adaptive Gegenbauer quadrature vs Gamma closed form", worst < 1e-8)

    params = ProblemParams(9, 8.0)
    for k in (0, 1, 2):
        comp = spectral.composed_kernel_check(params, k)
        err = max(comp["fh12_rel_err"], comp["fh11_rel_err"])
        report.add(f"composed_kernel_k{k}_max_rel_err", err, 1e-6,
                   "two composed numeric Funk-Hecke passes", err < 1e-6)

    # closed Riesz convolution against the bipolar engine
    b = Bubble(params)
    prof = lambda r: b.profile(r) ** params.p
    kern = lambda v: v ** (-params.alpha)
    worst = 0.0
    for d in (0.5, 1.0, 2.0, 4.0, 8.0):
        got = two_center_integral(prof, kern, d, params.N, spec)
        want = riesz_convolution_Wp(b, np.array([d] + [0.0] * (params.N - 1)))
        worst = max(worst, abs(got - want) / want)
    report.add("riesz_convolution_max_rel_err", worst, 1e-6,
               "closed convolution vs two-center quadrature at 5 separations", worst < 1e-6)

    # Monte Carlo oracle agreement (3 sigma)
    f = lambda r: (1.0 + r * r) ** (-2.5)
    bi = two_center_integral(f, f, 2.0, 9, spec)
    mc, se = quad.monte_carlo_two_center(f, f, 2.0, 9, spec)
    z = abs(mc - bi) / se
    report.add("monte_carlo_z_score", z, 3.0, "importance-sampled MC vs bipolar", z < 3.0)

    out = output_dir(args.out)
    write_json_atomic(os.path.join(out, "oracle_suite.json"), report.as_dict(time.perf_counter() - t0))
    return 0 if report.status == "pass" else 1


def cmd_stability(args) -> int:
    t0 = time.perf_counter()
    params = _params_from(args)
    if params.p != 2.0 and not args.approximate:
        print(
            "error: only (N, alpha) with alpha = 8 (p = 2) is exact; "
            "pass --approximate to run the second-order truncation",
            file=sys.stderr,
        )
        return 2
    epsilons = [float(t) for t in args.eps_list.split(",")]
    exp = stability.deficit_experiment(params, args.k, epsilons, approximate=args.approximate)

    report = VerificationReport(
        check_id="stability",
        params={"N": params.N, "alpha": params.alpha, "p": params.p, "k": args.k,
                "epsilons": epsilons, "approximate": exp.approximate},
    )
    report.add("delta_k", exp.delta_k, None, "second-order deficit coefficient 1 - rho_k")
    report.add("ratio_smallest_eps", exp.ratios[-1], None, "deficit / dist^2 at the smallest eps")
    gap = abs(exp.ratios[-1] - exp.delta_k)
    report.add("ratio_gap_smallest_eps", gap, 10.0 * epsilons[-1], "distance from delta_k",
               gap < 10.0 * epsilons[-1])
    if len(epsilons) >= 2:
        report.add("fitted_order", exp.fitted_order, None, "log-log slope of |ratio - delta_k|",
                   exp.fitted_order >= 0.9)
    report.add("min_deficit", min(exp.deficits), 1e-10, "deficit may not be negative beyond tolerance",
               min(exp.deficits) > -1e-10)
    report.add("sandwich_lower_fitted", exp.sandwich[0], None, "min ratio over the sweep")
    report.add("sandwich_upper_fitted", exp.sandwich[1], None, "max ratio over the sweep")
    lower, upper = spectral.stability_constants(params)
    report.add("printed_lower_constant", lower, None, "2(mu_{N+3} - p), reported verbatim")
    report.add("printed_upper_constant", upper, None, "limsup bound, reported verbatim")
    if exp.approximate:
        report.warn("second-order truncation of the nonlocal term; remainder O(eps^3)")

    out = output_dir(args.out)
    stem = f"stability_N{params.N}_alpha{args.alpha:g}_k{args.k}"
    write_csv_atomic(
        os.path.join(out, stem + ".csv"),
        ["eps", "deficit", "dist_sq", "ratio"],
        [list(row) for row in exp.rows()],
    )
    write_json_atomic(os.path.join(out, stem + ".json"), report.as_dict(time.perf_counter() - t0))
    return 0 if report.status == "pass" else 1


def cmd_multibubble(args) -> int:
    t0 = time.perf_counter()
    try:
        config = multibubble.load_potential_config(args.potential)
    except (OSError, ValueError, multibubble.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    params = ProblemParams(N=args.N, alpha=args.alpha)
    model = config["model"]
    box = config["box"]
    L0 = args.L0 if args.L0 is not None else config["L0"]
    L1 = args.L1 if args.L1 is not None else config["L1"]

    if args.init:
        init_vals = [float(t) for t in args.init.split(",")]
        r0, xpp0 = init_vals[0], np.asarray(init_vals[1:], dtype=float)
        if xpp0.shape != (params.N - 2,):
            print(f"error: --init needs r plus {params.N - 2} transverse coordinates", file=sys.stderr)
            return 2
    else:
        r0 = 0.5 * (box["r"][0] + box["r"][1])
        xpp0 = box["xpp_center"].copy()

    report = VerificationReport(
        check_id="multibubble",
        params={"N": params.N, "alpha": params.alpha, "p": params.p, "m": args.m,
                "potential": model.expression, "L0": L0, "L1": L1},
    )
    if not multibubble.alpha_range_guard(params):
        report.warn(
            f"alpha = {params.alpha} is below 6 - 12/(N-4) = {6.0 - 12.0 / (params.N - 4.0)}; "
            "the reduction is outside its proven range"
        )

    consts = multibubble.interaction_constants(params)
    report.add("A1", consts.A1, None, "integral of the squared unit bubble")
    report.add("A2", consts.A2, consts.A2_rel_uncertainty, "pair-interaction extrapolation")

    sweep_ms = [args.m] + [int(t) for t in args.m_sweep.split(",") if t] if args.m_sweep else [args.m]
    rows = []
    solution = None
    for m in sweep_ms:
        guess_t = None
        initial = multibubble.PolygonConfig(
            m=m, r_bar=r0, x_bar_pp=xpp0, beta=1.0, params=params
        )
        # start from the closed-form beta balance at the initial (r, x'')
        a3 = consts.a3_for(initial)
        v0 = model.evaluate(r0, xpp0)
        guess_t = (a3 / (consts.A1 * v0)) ** (1.0 / (params.N - 8.0))
        initial = multibubble.PolygonConfig(
            m=m, r_bar=r0, x_bar_pp=xpp0,
            beta=guess_t * m ** ((params.N - 4.0) / (params.N - 8.0)), params=params,
        )
        try:
            sol, sol_report = multibubble.solve_reduced(
                model, m, initial, consts, L0=L0, L1=L1, box=box
            )
        except multibubble.SolverError as exc:
            report.add(f"solve_m{m}", float("nan"), None, f"solver failed: {exc}", False)
            report.extra[f"trace_m{m}"] = exc.trace
            continue
        rows.append([m, sol.r_bar, sol_report["t_star"], sol_report["beta_star"]])
        if m == args.m:
            solution = (sol, sol_report)
            report.add("residual_sup", sol_report["residual_sup_equilibrated"], 1e-10,
                       "equilibrated reduced-equation residual", True)
            report.add("r_star", sol.r_bar, None, "circle radius at the solution")
            report.add("t_star", sol_report["t_star"], None, "normalized scale")
            report.add("beta_star", sol_report["beta_star"], None, "concentration scale")
            report.add("t_in_range", float(sol_report["t_in_range"]), 0.0, f"t in [{L0}, {L1}]",
                       sol_report["t_in_range"])
            deg = sol_report.get("degree")
            if deg is not None:
                report.add("degree_estimate", float(deg["degree_estimate"]), None,
                           "boundary sign-sampling heuristic, not a certificate")
            report.extra["solution"] = {
                "m": sol.m, "r_bar": sol.r_bar, "x_bar_pp": sol.x_bar_pp.tolist(),
                "beta": sol.beta, "raw_residual": sol_report["raw_residual"],
            }
            report.extra["iteration_trace"] = sol_report["trace"]

    if solution is None:
        report.add("solved", 0.0, None, "no converged solve", False)

    out = output_dir(args.out)
    stem = f"multibubble_m{args.m}"
    if rows:
        write_csv_atomic(os.path.join(out, stem + "_sweep.csv"),
                         ["m", "r_star", "t_star", "beta_star"], rows)
    write_json_atomic(os.path.join(out, stem + ".json"), report.as_dict(time.perf_counter() - t0))
    return 0 if report.status == "pass" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bihartree",
        description="verification toolkit for the critical biharmonic Hartree equation",
    )
    parser.add_argument("--out", default=None, help="report directory (default: $BIHARTREE_OUT or cwd)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nondegeneracy", help="sector multipliers, mu ladder, kernel dimension")
    p.add_argument("--N", type=int, required=True, help="dimension, N >= 9")
    p.add_argument("--alpha", type=float, required=True, help="Riesz exponent in (0, N)")
    p.add_argument("--kmax", type=int, default=20, help="largest harmonic degree (default 20)")
    p.set_defaults(func=cmd_nondegeneracy)

    p = sub.add_parser("oracle-suite", help="quadrature oracles vs closed forms")
    p.add_argument("--rel-tol", type=float, default=1e-10, help="quadrature relative tolerance")
    p.add_argument("--max-subdivisions", type=int, default=200, help="adaptive subdivision budget")
    p.add_argument("--mc-samples", type=int, default=2_000_000, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, default=20240817, help="Monte Carlo seed")
    p.set_defaults(func=cmd_oracle_suite)

    p = sub.add_parser("stability", help="deficit/distance experiment along a sector")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--k", type=int, default=2, help="harmonic sector, k >= 2")
    p.add_argument("--eps-list", default="1e-1,1e-2,1e-3", help="comma-separated decreasing amplitudes")
    p.add_argument("--approximate", action="store_true",
                   help="allow the second-order truncation outside the p = 2 tier")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("multibubble", help="solve the reduced equations for a potential")
    p.add_argument("--potential", required=True, help="JSON config file (see README for the schema)")
    p.add_argument("--N", type=int, default=9)
    p.add_argument("--alpha", type=float, default=8.0)
    p.add_argument("--m", type=int, required=True, help="bubble count")
    p.add_argument("--init", default=None, help="comma-separated r,x3,...,xN starting point")
    p.add_argument("--L0", type=float, default=None, help="lower normalized-scale bound")
    p.add_argument("--L1", type=float, default=None, help="upper normalized-scale bound")
    p.add_argument("--m-sweep", default="", help="extra m values for the beta*(m) table, e.g. 200,400")
    p.set_defaults(func=cmd_multibubble)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
