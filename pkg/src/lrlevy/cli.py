"""Command-line entry point: ``lrlevy <command> [flags]``.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 calibration did
not converge (the result file is still written).
"""

from __future__ import annotations

import argparse
import datetime as dt
import math
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import calibration as cal
from . import closed_form as cf_mod
from . import data_io, lattice
from .errors import LRError, NonConvergence
from .fourier_pricing import CosConfig, FftConfig, carr_madan_prices, price_options
from .levy_models import BS, CGMY, NIG, VG, MarketLeg, RiskNeutralSetup, model_from_dict
from .mc_oracle import SimSpec, mc_price, simulate_terminal
from .shadow_rate import RollingConfig, TwoAssetSpec, benchmark_gap, rolling_shadow_series, shadow_rate_components

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3

# S&P 500 option fits used as defaults when no parameter file is given
REFERENCE_PARAMS = {
    "BS": BS(0.1579),
    "NIG": NIG(8.214, -1.235, 0.184),
    "CGMY": CGMY(1.128, 12.347, 14.562, 0.312),
    "VG": VG(0.12, 0.2, -0.14),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_model(kind: str, params_path: str | None):
    kind = kind.upper()
    if params_path is None:
        return REFERENCE_PARAMS[kind]
    data = data_io.read_json(params_path)
    data.setdefault("model", kind)
    model = model_from_dict(data)
    if model.name != kind:
        raise LRError(f"--model {kind} does not match parameter file tag {model.name}")
    return model


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# subcommands


def cmd_price(args) -> int:
    model = _load_model(args.model, args.params)
    leg = MarketLeg(args.spot, args.div, args.leg_sigma, args.kappa)
    strikes = np.asarray(args.strike, dtype=float)
    disc = math.exp(-args.rate * args.maturity)
    if args.method in ("cos", "fft", "p1p2"):
        setup = RiskNeutralSetup(model, leg, args.rate, args.maturity)
        prices = price_options(
            setup.cf, args.kind, args.spot, strikes, disc, args.method,
            cos=CosConfig(args.n_terms, args.cos_l), fft=FftConfig(args.alpha, args.fft_n, args.fft_eta),
        )
        errors = [math.nan] * len(strikes)
    elif args.method == "mc":
        spec = SimSpec(model, leg, replace(leg, label="Z"), args.rate, args.maturity, args.paths, args.steps, args.seed)
        sample = simulate_terminal(spec)
        sign = 1.0 if args.kind == "call" else -1.0
        results = [mc_price(sample, lambda s, z, k=k: np.maximum(sign * (s - k), 0.0)) for k in strikes]
        prices = [p for p, _ in results]
        errors = [e for _, e in results]
    else:
        if not isinstance(model, BS):
            raise LRError("the tree method prices diffusion (BS) models only")
        n = args.steps if args.steps > 1 else 1000
        # the prepaid forward of S grows at the rate, so dividends enter through its start value
        moves = lattice.diffusion_moves(model.sigma * abs(args.kappa), args.sigma_z, args.maturity / n, args.rate)
        s0 = args.spot * math.exp(-args.div * args.maturity)
        sign = 1.0 if args.kind == "call" else -1.0
        prices = [
            lattice.price_on_lattice(
                lattice.LatticeSpec(n, moves, s0, args.spot, lambda s, z, k=k: np.maximum(sign * (s - k), 0.0))
            ).price
            for k in strikes
        ]
        errors = [math.nan] * len(strikes)
    rows = [(float(k), float(p), float(e)) for k, p, e in zip(strikes, prices, errors)]
    for k, p, e in rows:
        print(_fmt(p) if math.isnan(e) else f"{_fmt(p)} {_fmt(e)}")
    if args.output:
        data_io.write_csv(args.output, ("strike", "price", "std_error"), rows)
    return EXIT_OK


def cmd_grid(args) -> int:
    model = _load_model(args.model, args.params)
    setup = RiskNeutralSetup(model, MarketLeg(args.spot, args.div, args.leg_sigma, args.kappa), args.rate, args.maturity)
    grid = carr_madan_prices(
        setup.cf, math.exp(-args.rate * args.maturity), FftConfig(args.alpha, args.fft_n, args.fft_eta),
        (args.k_min, args.k_max),
    )
    data_io.emit_report(grid, args.output, "csv")
    print(f"{len(grid.prices)} grid points written to {args.output}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    history, pair_report = data_io.load_pair_history(args.pair)
    spot = args.spot if args.spot is not None else float(history.price_s[-1])
    as_of = dt.date.fromisoformat(args.as_of) if args.as_of else history.dates[-1]
    chain, chain_report = data_io.load_option_chain(args.chain, spot, as_of, args.seed_rate, args.div_s)
    for v in chain_report.violations + pair_report.violations:
        print(f"warning: row {v.row}: {v.rule}: {v.detail}", file=sys.stderr)
    settings = cal.CalibrationSettings(
        eps=args.eps,
        max_iter=args.max_iter,
        kappa_s=args.kappa_s,
        kappa_z=args.kappa_z,
        div_z=args.div_z,
        include_jump_wedge=args.jump_wedge is not None,
        wedge_lambda=args.jump_wedge or 0.0,
        fit=cal.FitSettings(n_starts=args.starts, seed=args.seed, cgmy_two_step=args.two_step),
        pricer=cal.PricerConfig(cos=CosConfig(args.n_terms, args.cos_l)),
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergence)
        result = cal.calibrate(chain, history, args.model, args.seed_rate, settings)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    data_io.emit_report(result, args.output, "json")
    print(
        f"r_bar={_fmt(result.r_bar_star)} rmse={_fmt(result.rmse)} relative_rmse={_fmt(result.relative_rmse)} "
        f"iterations={result.iterations} converged={str(result.converged).lower()}"
    )
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_shadow_rate(args) -> int:
    if args.pair is None:
        needed = (args.mu_s, args.mu_z, args.sigma_s, args.sigma_z)
        if any(v is None for v in needed):
            raise _UsageError("give --pair, or all of --mu-s --mu-z --sigma-s --sigma-z")
        spec = TwoAssetSpec(
            args.mu_s, args.mu_z, args.sigma_s, args.sigma_z, args.kappa_s, args.kappa_z, args.lam
        )
        diffusion, wedge = shadow_rate_components(spec)
        print(f"r_bar={_fmt(diffusion + wedge)} diffusion={_fmt(diffusion)} jump_wedge={_fmt(wedge)}")
        return EXIT_OK
    history, report = data_io.load_pair_history(args.pair)
    for v in report.violations:
        print(f"warning: row {v.row}: {v.rule}: {v.detail}", file=sys.stderr)
    config = RollingConfig(window=args.window, jump_threshold=args.threshold, detect_jumps=not args.no_jumps)
    series = rolling_shadow_series(history, config=config)
    data_io.emit_report(series, args.output, "csv")
    flagged = sum(p.degenerate for p in series)
    print(f"{len(series)} points written to {args.output} ({flagged} degenerate)")
    if args.benchmark:
        bench, _ = data_io.load_benchmark(args.benchmark)
        gaps = benchmark_gap(series, bench)
        gap_path = args.gap_output or "gap.csv"
        data_io.write_csv(gap_path, ("date", "gap"), [(g.date, g.gap) for g in gaps])
        print(f"{len(gaps)} gap points written to {gap_path}")
    return EXIT_OK


def _lattice_payoff(args):
    eta, k = args.eta, args.strike

    def payoff(s, z):
        return np.maximum(eta * s + (1 - eta) * z - k, 0.0)

    return payoff


def cmd_tree(args) -> int:
    if args.sigma_s is not None:
        if args.sigma_z is None:
            raise _UsageError("--sigma-s needs --sigma-z")
        moves = lattice.diffusion_moves(args.sigma_s, args.sigma_z, args.maturity / args.steps, args.rate)
    else:
        if None in (args.U, args.D, args.Ut, args.Dt):
            raise _UsageError("give --U --D --Ut --Dt, or --sigma-s --sigma-z --maturity")
        moves = lattice.StepMoves(args.U, args.D, args.Ut, args.Dt)
    spec = lattice.LatticeSpec(args.steps, moves, args.s0, args.z0, _lattice_payoff(args))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = lattice.price_on_lattice(spec, keep_nodes=args.nodes is not None)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(
        f"price={_fmt(result.price)} q={_fmt(result.q[0])} R={_fmt(lattice.shadow_growth_factor(moves))} "
        f"growth={_fmt(result.growth[0])}"
    )
    if args.nodes:
        data_io.write_csv(args.nodes, ("step", "node", "s", "z", "value"), result.node_table)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load_model(args.model, args.params)
    leg_s = MarketLeg(args.spot_s, args.div_s, args.sigma_s, args.kappa_s, "S")
    leg_z = MarketLeg(args.spot_z, args.div_z, args.sigma_z, args.kappa_z, "Z")
    spec = SimSpec(
        model, leg_s, leg_z, args.rate, args.maturity, args.paths, args.steps, args.seed, args.rho, args.antithetic
    )
    sample = simulate_terminal(spec)
    mean_s, se_s = mc_price(sample, lambda s, z: s)
    print(f"discounted_mean_s={_fmt(mean_s)} std_error={_fmt(se_s)}")
    if args.strike is not None:
        price, se = mc_price(sample, lambda s, z: np.maximum(s - args.strike, 0.0))
        print(f"call_price={_fmt(price)} std_error={_fmt(se)}")
    if args.samples:
        data_io.write_csv(args.samples, ("s_t", "z_t"), zip(sample.s_t, sample.z_t))
    return EXIT_OK


def cmd_verify_pde(args) -> int:
    rows = []
    for t in args.t:
        for s in args.S:
            for z in args.Z:
                inp = cf_mod.LrInputs.from_constant(t, s, z, args.eta, args.strike, args.maturity, args.rate, args.sigma)
                y = cf_mod.solve_y_star(inp)
                rows.append(
                    (t, s, z, cf_mod.lr_closed_form_price(inp), cf_mod.pde_residual(inp, args.rate, args.sigma, args.h),
                     abs(cf_mod.root_residual(inp, y)))
                )
    worst = max(r[4] for r in rows)
    print(f"points={len(rows)} max_residual={_fmt(worst)} max_root_residual={_fmt(max(r[5] for r in rows))}")
    if args.output:
        data_io.write_csv(args.output, ("t", "s", "z", "price", "residual", "root_residual"), rows)
    return EXIT_OK if worst < args.tol else EXIT_DOMAIN


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parser


def _add_model_flags(p, models=("bs", "nig", "cgmy", "vg")):
    p.add_argument("--model", choices=models, type=str.lower, required=True)
    p.add_argument("--params", help="JSON file {\"model\": ..., parameters}; defaults to built-in reference fits")


def _add_fourier_flags(p):
    p.add_argument("--n-terms", type=int, default=1024, help="COS series length (default 1024)")
    p.add_argument("--cos-l", type=float, default=10.0, help="COS truncation multiplier (default 10)")
    p.add_argument("--alpha", type=float, default=1.25, help="FFT damping (default 1.25)")
    p.add_argument("--fft-n", type=int, default=4096, help="FFT grid size (default 4096)")
    p.add_argument("--fft-eta", type=float, default=0.25, help="FFT frequency spacing (default 0.25)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrlevy", description="Two-asset Levy option pricing with a shadow riskless rate")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="price European options on one leg")
    _add_model_flags(p)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strike", type=float, nargs="+", required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--rate", type=float, required=True, help="shadow rate used for drift and discounting")
    p.add_argument("--div", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=1.0, help="jump loading of the leg (default 1)")
    p.add_argument("--leg-sigma", type=float, default=0.0, help="extra diffusion volatility of the leg")
    p.add_argument("--kind", choices=("call", "put"), default="call")
    p.add_argument("--method", choices=("cos", "fft", "p1p2", "mc", "tree"), default="cos")
    _add_fourier_flags(p)
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-z", type=float, default=0.3, help="second-leg volatility for --method tree")
    p.add_argument("--output", help="CSV file strike,price,std_error")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("grid", help="Carr-Madan call price grid as CSV")
    _add_model_flags(p)
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--div", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--leg-sigma", type=float, default=0.0)
    p.add_argument("--k-min", type=float, required=True)
    p.add_argument("--k-max", type=float, required=True)
    _add_fourier_flags(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("calibrate", help="run the shadow-rate calibration loop")
    p.add_argument("--chain", required=True, help="CSV strike,maturity_years,kind,mid")
    p.add_argument("--pair", required=True, help="CSV date,price_s,price_z")
    p.add_argument("--model", choices=("bs", "nig", "cgmy", "vg"), type=str.lower, required=True)
    p.add_argument("--seed-rate", type=float, required=True, help="initial shadow rate, e.g. a T-bill yield")
    p.add_argument("--spot", type=float, help="spot of S (default: last price_s in --pair)")
    p.add_argument("--as-of", help="ISO date of the chain")
    p.add_argument("--kappa-s", type=float, default=1.0)
    p.add_argument("--kappa-z", type=float, default=1.0)
    p.add_argument("--div-s", type=float, default=0.0)
    p.add_argument("--div-z", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--two-step", action="store_true", help="CGMY: fit with Y fixed first, then release Y")
    p.add_argument("--jump-wedge", type=float, metavar="LAMBDA", help="add the jump wedge with this intensity")
    p.add_argument("--n-terms", type=int, default=512)
    p.add_argument("--cos-l", type=float, default=10.0)
    p.add_argument("--output", default="calibration.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("shadow-rate", help="shadow rate from drifts, or a rolling series from a price pair")
    p.add_argument("--pair", help="CSV date,price_s,price_z")
    p.add_argument("--window", type=int, default=60)
    p.add_argument("--threshold", type=float, default=3.0, help="jump threshold in daily standard deviations")
    p.add_argument("--no-jumps", action="store_true", help="disable the large-jump wedge estimate")
    p.add_argument("--benchmark", help="CSV date,yield")
    p.add_argument("--output", default="shadow_rate.csv")
    p.add_argument("--gap-output")
    for name in ("mu-s", "mu-z", "sigma-s", "sigma-z"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kappa-s", type=float, default=0.0)
    p.add_argument("--kappa-z", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.set_defaults(func=cmd_shadow_rate)

    p = sub.add_parser("tree", help="two-asset binomial lattice for max(eta S + (1-eta) Z - K, 0)")
    p.add_argument("--U", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--Ut", type=float)
    p.add_argument("--Dt", type=float)
    p.add_argument("--sigma-s", type=float, help="build diffusion-matched moves instead of --U/--D/--Ut/--Dt")
    p.add_argument("--sigma-z", type=float)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--rate", type=float, help="target per-year rate for diffusion-matched moves")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--z0", type=float, default=100.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--strike", type=float, default=100.0)
    p.add_argument("--nodes", help="CSV dump step,node,s,z,value")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("simulate", help="Monte Carlo of both legs with common jumps")
    _add_model_flags(p, ("nig", "vg"))
    p.add_argument("--spot-s", type=float, default=100.0)
    p.add_argument("--spot-z", type=float, default=100.0)
    p.add_argument("--kappa-s", type=float, default=1.0)
    p.add_argument("--kappa-z", type=float, default=1.0)
    p.add_argument("--sigma-s", type=float, default=0.0)
    p.add_argument("--sigma-z", type=float, default=0.0)
    p.add_argument("--div-s", type=float, default=0.0)
    p.add_argument("--div-z", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--strike", type=float, help="also price a call on S")
    p.add_argument("--samples", help="CSV dump s_t,z_t")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-pde", help="finite-difference PDE residuals of the closed-form value")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--strike", type=float, default=100.0)
    p.add_argument("--maturity", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=0.02)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--S", type=float, nargs="+", default=[80.0, 90.0, 100.0, 110.0, 120.0])
    p.add_argument("--Z", type=float, nargs="+", default=[80.0, 90.0, 100.0, 110.0, 120.0])
    p.add_argument("--t", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    p.add_argument("--h", type=float, default=1e-4, help="relative finite-difference step in S and Z")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--output", help="CSV t,s,z,price,residual,root_residual")
    p.set_defaults(func=cmd_verify_pde)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lrlevy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LRError, ZeroDivisionError) as exc:
        print(f"lrlevy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
