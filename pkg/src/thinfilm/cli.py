"""Command line front end: ``thinfilm <command> --config FILE``.

Exit codes: 0 success, 1 configuration or precondition error, 2 solver
collapse, 3 inequality violated beyond slack, 4 no blow-up within the
horizon, 5 analysis failure (fit or spreading too small).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .config import load_config
from .errors import (
    ConfigError,
    DomainTooSmall,
    FitFailure,
    InsufficientSpread,
    NoBlowupWithinHorizon,
    NotNegativeEnergy,
    RegionError,
    StepCollapse,
    ThinFilmError,
)
from .io import fmt_exact, write_csv, write_ledger_csv, write_report, write_snapshot

log = logging.getLogger("thinfilm")

EXIT_OK, EXIT_CONFIG, EXIT_COLLAPSE, EXIT_INEQUALITY, EXIT_NO_BLOWUP, EXIT_ANALYSIS = range(6)


def _prepare_out(out: Path, force: bool, names: list[str]):
    out.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise ConfigError(f"{out}: would overwrite {', '.join(clash)} (use --force)")


def _snapshots(out: Path, ledger, p, count: int):
    snaps = ledger.snapshots
    if not snaps or count <= 0:
        return
    step = max(1, (len(snaps) - 1) // max(1, count - 1))
    picks = sorted(set(list(range(0, len(snaps), step)) + [len(snaps) - 1]))
    x = p.grid()
    for k, i in enumerate(picks):
        t, h = snaps[i]
        write_snapshot(out / "snapshots" / f"h_{k:05d}.txt", x, h, p, t, p.dx)


def cmd_simulate(cfg, out: Path, force: bool) -> int:
    _prepare_out(out, force, ["ledger.csv", "report.json"])
    ledger, report = ex.simulate(cfg)
    write_ledger_csv(out / "ledger.csv", ledger)
    _snapshots(out, ledger, cfg.problem, cfg.simulate.snapshots)
    write_report(out / "report.json", report)
    if report["collapsed"]:
        log.error("step size collapsed at t = %s", report["final_time"])
        return EXIT_COLLAPSE
    if report["violations"]:
        log.warning("inequality checks beyond slack: %s", ", ".join(report["violations"]))
        if cfg.simulate.severity == "error":
            return EXIT_INEQUALITY
    return EXIT_OK


def cmd_dispersion(cfg, out: Path, force: bool) -> int:
    _prepare_out(out, force, ["dispersion.csv"])
    d = cfg.dispersion
    try:
        modes = [int(k) for k in d.modes.split(",") if k.strip()]
    except ValueError:
        raise ConfigError(f"dispersion.modes: cannot read {d.modes!r}") from None
    rows = ex.dispersion_table(cfg.problem, cfg.solver, d.hbar, d.amplitude, modes, d.t_end, d.fit_tol)
    write_csv(out / "dispersion.csv", ("xi", "sigma_measured", "sigma_formula", "rel_err"), rows)
    for r in rows:
        print(",".join(repr(float(v)) for v in r))
    return EXIT_OK


def cmd_certify_blowup(cfg, out: Path, force: bool) -> int:
    _prepare_out(out, force, ["report.json", "moment.csv", "ledger.csv"])
    try:
        ledger, cert, report = ex.certify_blowup(cfg)
    except NoBlowupWithinHorizon as exc:
        if exc.ledger is not None:
            write_ledger_csv(out / "ledger.csv", exc.ledger)
        log.error("%s", exc)
        return EXIT_NO_BLOWUP
    write_ledger_csv(out / "ledger.csv", ledger)
    write_csv(out / "moment.csv", ("t", "LHS", "RHS", "margin"), cert.rows)
    write_report(out / "report.json", report)
    print(f"verdict={cert.verdict.value} T_star={cert.T_star!r} T_ub={cert.T_ub!r} margin={cert.margin!r}")
    return EXIT_INEQUALITY if cert.verdict.value == "InequalityViolated" else EXIT_OK


def cmd_spreading(cfg, out: Path, force: bool) -> int:
    _prepare_out(out, force, ["support.csv", "report.json"])
    trace, ledger, report = ex.spreading(cfg)
    rows = zip(trace.times, trace.left_edges, trace.right_edges, trace.Gamma)
    write_csv(out / "support.csv", ("t", "x_left", "x_right", "Gamma"), rows)
    write_ledger_csv(out / "ledger.csv", ledger)
    write_report(out / "report.json", report)
    print(f"exponent={report['fitted_exponent']!r} predicted={report['predicted_exponent']!r}")
    return EXIT_OK


def cmd_regime(cfg, out: Path, force: bool) -> int:
    _prepare_out(out, force, ["regime_map.csv"])
    rows = ex.regime_rows(cfg)
    lines = ["n,m,regime,existence_ok,fsp_ok,blowup_ok"]
    for n, m, regime, e, f, b in rows:
        lines.append(",".join([fmt_exact(n), fmt_exact(m), regime] + [str(v).lower() for v in (e, f, b)]))
    from .io import atomic_write
    atomic_write(out / "regime_map.csv", "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "dispersion": cmd_dispersion,
    "certify-blowup": cmd_certify_blowup,
    "spreading": cmd_spreading,
    "regime": cmd_regime,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thinfilm", description="Long-wave unstable thin film experiments")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="key-value configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides run.output_dir)")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized placement")
    ap.add_argument("--force", action="store_true",
                    help="overwrite outputs; for certify-blowup also skip the region check")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.run = replace(cfg.run, seed=args.seed)
        if args.force:
            cfg.certify = replace(cfg.certify, force=True)
        out = Path(args.out if args.out is not None else cfg.output_dir)
        return COMMANDS[args.command](cfg, out, args.force)
    except (ConfigError, RegionError, NotNegativeEnergy, DomainTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepCollapse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except (InsufficientSpread, FitFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except ThinFilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
