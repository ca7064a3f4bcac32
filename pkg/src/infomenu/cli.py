"""Command-line entry point: ``infomenu <command> [options]``.

Commands read a TOML config (see ``config``), write their artifacts into the
output directory and return an exit code: 0 success, 1 verification
failure, 2 input error, 3 solver failure. Wall-clock timings go to
``timings.json`` so the other outputs stay byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import warnings

import numpy as np

from . import __version__, assumptions, comparative, config, core, oracle, reports, solver
from .errors import (AssumptionRefusal, BudgetExceededError, ConfigError, DomainError,
                     InfoMenuError, SchemaError, ThresholdNotFoundError, UnsolvedMultiplierError,
                     UnsupportedKindError)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class Run:
    """Shared state for one command: config, output directory and timers."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.out = cfg.data["output"]["dir"]
        self.timings = {}
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def timed(self, label, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[label] = time.perf_counter() - t0

    def report(self, body):
        out = {"command": self.command, "version": __version__, "config": self.cfg.echo()}
        out.update(body)
        return out

    def finish(self):
        """Merge this command's timings into ``timings.json``."""
        import json
        path = self.path("timings.json")
        data = {}
        if os.path.exists(path):
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except (OSError, ValueError):
                data = {}
        data[self.command] = self.timings
        reports.write_json(path, data)


def _menu_summary(menu):
    return {
        "thresholds": menu.thresholds.as_dict(),
        "revenue": menu.revenue,
        "revenue_virtual": menu.revenue_virtual,
        "constraint_residual": menu.constraint_residual,
        "breaks": menu.breaks,
        "rows": int(menu.mu.size),
        "assumption_reports": [r.as_dict() for r in menu.assumption_reports],
    }


def _build(run, override):
    cfg = run.cfg
    V, f = config.build_value(cfg), config.build_density(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run.timed("build_menu", solver.build_menu, V, f, grid=cfg.data["grid"]["menu"],
                         bracket=tuple(cfg.data["lambda"]["bracket"]), override=override)


# --------------------------------------------------------------------------
# commands


def cmd_solve(run, args):
    menu = _build(run, args.override_assumptions)
    csv_path = run.path("menu.csv")
    reports.write_menu_csv(csv_path, menu)
    reports.write_json(run.path("thresholds.json"), menu.thresholds.as_dict())
    reports.write_json(run.path("report.json"), run.report(_menu_summary(menu)))
    reports.menu_svg_from_csv(csv_path, run.path("menu.svg"))
    th = menu.thresholds
    print(f"lambda={th.lam:.10g} mu_minus={th.mu_minus:.10g} mu0={th.mu0:.10g} "
          f"mu_plus={th.mu_plus:.10g} revenue={menu.revenue:.10g}")
    return EXIT_OK


def _csv_checks(m, V, f, tol):
    """Checks that need only the menu file: surplus identity, IC/IR among rows, revenue."""
    mu = m["mu"]
    if mu.size == 0:
        ic = oracle.check_gains(mu, np.zeros((0, 0)), [], [], tol)
        return ic, 0.0, 0.0
    is_l = m["orientation"] == core.REVEAL_L
    gains = oracle.simple_gains(mu, is_l, m["noise"], V)
    ic = oracle.check_gains(mu, gains, np.arange(mu.size), m["price"], tol)
    dv = m["gross_utility"] - V(mu)
    identity = float(np.max(np.abs(dv - m["price"] - m["surplus"])))
    rev = solver.revenue(mu, m["price"], f, m["orientation"])
    return ic, identity, rev


def cmd_verify(run, args):
    cfg = run.cfg
    path = args.menu or run.path("menu.csv")
    m = reports.read_menu_csv(path)
    V, f = config.build_value(cfg), config.build_density(cfg)
    V.require_smooth("verify")
    tol = cfg.data["tolerances"]["ic"]
    ic, identity, rev = run.timed("csv_checks", _csv_checks, m, V, f, tol)
    body = {"menu_file": os.path.abspath(path) if args.menu else "menu.csv",
            "rows": int(m["mu"].size), "ic_ir_rows": ic.as_dict(), "surplus_identity": identity,
            "revenue_from_csv": rev}
    ok = ic.passed and identity <= tol
    if m["mu"].size:
        lam = run.timed("lambda", solver.solve_lambda, V, f, tuple(cfg.data["lambda"]["bracket"]),
                        cfg.data["grid"]["menu"])
        th = solver.full_thresholds(V, f, lam)
        gates = run.timed("assumptions", assumptions.gate_reports, V, f, th)
        body["assumption_reports"] = [r.as_dict() for r in gates]
        ok = ok and all(r.passed for r in gates)
        report_path = os.path.join(os.path.dirname(os.path.abspath(path)), "report.json")
        if os.path.exists(report_path):
            import json
            with open(report_path) as fh:
                stated = json.load(fh).get("revenue")
            if stated is not None:
                diff = abs(rev - stated)
                body["revenue_stated"] = stated
                body["revenue_roundtrip_error"] = diff
                ok = ok and diff <= 1e-9
        # dense audit of the schedule the file encodes
        menu = run.timed("rebuild", solver.build_menu, V, f, grid=cfg.data["grid"]["menu"],
                         lam=lam, check=False)
        dense = run.timed("dense_ic_ir", oracle.verify_menu, menu, cfg.data["grid"]["verify"], tol)
        body["ic_ir_dense"] = dense.as_dict()
        ok = ok and dense.passed
    body["passed"] = bool(ok)
    reports.write_json(run.path("verify.json"), run.report(body))
    print(("PASS" if ok else "FAIL") + f" worst IC/IR violation {ic.worst:.3g}"
          + (f" ({ic.kind} at mu={ic.mu:.6g})" if ic.mu is not None and not ic.passed else ""))
    return EXIT_OK if ok else EXIT_VERIFY


def _catalog(o):
    if o["catalog"] == "null":
        return (core.SimpleExperiment.null(),)
    if o["catalog"] == "flat":
        return (core.SimpleExperiment.null(), core.SimpleExperiment.full())
    return tuple(oracle.simple_catalog(o["noise_step"]))


def cmd_oracle(run, args):
    cfg = run.cfg
    o, tol = cfg.data["oracle"], cfg.data["tolerances"]
    V, f = config.build_value(cfg), config.build_density(cfg)
    mus = np.linspace(o["lo"], o["hi"], o["types"])
    w = f.pdf(mus)
    w = w / w.sum() if w.sum() > 0 else np.full(mus.size, 1.0 / mus.size)
    inst = oracle.DiscreteInstance(mus, w, _catalog(o), V)
    mech = run.timed("oracle", oracle.brute_force_optimal, inst, budget=o["budget"],
                     restarts=o["restarts"], seed=o["seed"], fallback=o["fallback"],
                     workers=o["workers"])
    audit = oracle.verify_mechanism(inst, mech, tol["mechanism"])
    body = {"instance": {"types": mus, "weights": w, "catalog_size": len(inst.catalog)},
            "mechanism": mech.as_dict(inst), "ic_ir": audit.as_dict()}
    ok = audit.passed
    mu0 = float(f.ppf(0.5))
    if V.smooth and o["catalog"] == "simple":
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                menu = run.timed("build_menu", solver.build_menu, V, f,
                                 grid=cfg.data["grid"]["menu"], override=args.override_assumptions)
        except AssumptionRefusal as exc:
            body["closed_form"] = {"skipped": str(exc)}
        else:
            mu0 = menu.thresholds.mu0
            restricted, continuum = oracle.repriced_restriction(menu, inst)
            gap = abs(mech.revenue - restricted.revenue) / max(abs(restricted.revenue), 1e-300)
            body["closed_form"] = {"continuum_price_revenue": continuum,
                                   "repriced_revenue": restricted.revenue,
                                   "repriced_feasible": restricted.certified,
                                   "relative_gap": gap, "tolerance": tol["oracle_relative"]}
            ok = ok and restricted.certified and gap <= tol["oracle_relative"]
    pattern = oracle.mechanism_pattern(inst, mech, mu0)
    body["revealed_state_pattern"] = pattern.as_dict()
    ok = ok and (pattern.passed or not pattern.applicable)
    if o["catalog"] == "simple":
        small = oracle.DiscreteInstance(*oracle.uniform_types(o["three_signal_types"], o["lo"], o["hi"]),
                                        _catalog(o), V)
        ext = run.timed("three_signal", oracle.three_signal_no_improvement, small,
                        o["three_signal_step"], tol["three_signal"], o["seed"], o["restarts"])
        body["three_signal"] = ext.as_dict()
        ok = ok and ext.passed
    body["passed"] = bool(ok)
    reports.write_json(run.path("oracle.json"), run.report(body))
    print(f"{'PASS' if ok else 'FAIL'} oracle revenue={mech.revenue:.10g} ({mech.mode})")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(run, args):
    cfg = run.cfg
    V = config.build_value(cfg)
    fam = comparative.DispersionFamily(config.density_family(cfg))
    ts = sorted(set(float(t) for t in cfg.data["sweep"]["t"]))
    bad = [t for t in ts if t < 0 or t > fam.t_max + 1e-12]
    if bad:
        raise DomainError(f"t={bad[0]:.6g} is infeasible; max feasible t is {fam.t_max:.10g}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sweep = run.timed("solve_family", comparative.solve_family, fam, ts, V,
                          cfg.data["grid"]["menu"], args.override_assumptions)
    rows = []
    for t in sweep.ts:
        for r in sweep.menus[t].records():
            rows.append({"t": t, **r})
    csv_path = run.path("sweep.csv")
    reports.atomic_write(csv_path, reports.table_text(reports.SWEEP_COLUMNS, rows))
    reports.sweep_svg_from_csv(csv_path, run.path("sweep.svg"))
    probes = cfg.data["sweep"]["probes"]
    slack = cfg.data["tolerances"]["monotone"]
    checks = [comparative.thresholds_monotone(sweep, slack),
              comparative.blackwell_monotone(sweep, probes, slack),
              comparative.surplus_monotone(sweep, probes, slack)]
    chain, pairs = run.timed("dispersion", comparative.dispersion_chain, fam, ts)
    checks.append(chain)
    body = {"t": ts, "t_max": fam.t_max, "pivot": fam.pivot,
            "menus": {repr(t): _menu_summary(sweep.menus[t]) for t in sweep.ts},
            "failed": {repr(t): m for t, m in sweep.failed.items()},
            "reports": [c.as_dict() for c in checks], "dispersion_pairs": pairs}
    ok = all(c.passed for c in checks)
    body["passed"] = ok
    reports.write_json(run.path("sweep.json"), run.report(body))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} worst={c.worst:.3g}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_flat(run, args):
    cfg = run.cfg
    V, f = config.build_value(cfg), config.build_density(cfg)
    fp = run.timed("flat", solver.flat_price_optimum, V, f, cfg.data["grid"]["scan"] * 2)
    body = {"price": fp.price, "revenue": fp.revenue, "served": fp.served}
    if V.smooth:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                menu = run.timed("build_menu", solver.build_menu, V, f,
                                 grid=cfg.data["grid"]["menu"], override=args.override_assumptions)
            body["menu_revenue"] = menu.revenue
            body["menu_minus_flat"] = menu.revenue - fp.revenue
        except (AssumptionRefusal, ThresholdNotFoundError, UnsolvedMultiplierError) as exc:
            body["menu_revenue"] = None
            body["menu_skipped"] = str(exc)
    reports.write_json(run.path("flat.json"), run.report(body))
    served = "none" if fp.served is None else f"[{fp.served[0]:.6g}, {fp.served[1]:.6g}]"
    print(f"price={fp.price:.10g} revenue={fp.revenue:.10g} served={served}")
    return EXIT_OK


def cmd_assumptions(run, args):
    cfg = run.cfg
    V, f = config.build_value(cfg), config.build_density(cfg)
    V.require_smooth("assumptions")
    lam = run.timed("lambda", solver.solve_lambda, V, f, tuple(cfg.data["lambda"]["bracket"]),
                    cfg.data["grid"]["menu"])
    th = solver.full_thresholds(V, f, lam)
    gates = assumptions.gate_reports(V, f, th)
    extra = [assumptions.scd_signs(V, f, lam, th.mu0, th)]
    probes = (th.mu_minus / 2, (th.mu_minus + th.mu0) / 2, (th.mu0 + th.mu_plus) / 2, (1 + th.mu_plus) / 2)
    extra += [assumptions.h_scan(float(m), lam, V, f) for m in probes]
    flat = solver.flat_price_optimum(V, f)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        menu = solver.build_menu(V, f, grid=cfg.data["grid"]["menu"], lam=lam, check=False)
    extra.append(assumptions.check_exclusion_bound(V, f, lam, lam, max(menu.revenue, flat.revenue)))
    body = {"thresholds": th.as_dict(), "gates": [r.as_dict() for r in gates],
            "diagnostics": [r.as_dict() for r in extra]}
    ok = all(r.passed for r in gates)
    body["passed"] = ok
    reports.write_json(run.path("assumptions.json"), run.report(body))
    for r in gates + extra:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.condition} violation={r.violation:.3g}")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "oracle": cmd_oracle, "sweep": cmd_sweep,
            "flat": cmd_flat, "assumptions": cmd_assumptions}


def build_parser():
    p = argparse.ArgumentParser(prog="infomenu", description="Optimal menus of information experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML run configuration")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--grid", type=int, help="menu grid size (overrides grid.menu)")
        s.add_argument("--tol", type=float, help="IC/IR tolerance (overrides tolerances.ic)")
        s.add_argument("--seed", type=int, help="oracle seed (overrides oracle.seed)")
        s.add_argument("--override-assumptions", action="store_true",
                       help="solve even when a regularity check fails")
        if name == "verify":
            s.add_argument("--menu", help="menu CSV to verify (default: OUT/menu.csv)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load(args.config) if args.config else config.load()
        config.apply_overrides(cfg, args.grid, args.tol, args.seed, args.out)
        run = Run(args.command, cfg)
        code = COMMANDS[args.command](run, args)
        run.finish()
        return code
    except (ConfigError, SchemaError, DomainError, UnsupportedKindError, AssumptionRefusal,
            BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, AssumptionRefusal):
            for r in exc.reports:
                print(f"  {r.condition}: violation {r.violation:.3g} at {r.location}", file=sys.stderr)
            print("  rerun with --override-assumptions to solve anyway", file=sys.stderr)
        return EXIT_INPUT
    except (ThresholdNotFoundError, UnsolvedMultiplierError, InfoMenuError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
