"""Command-line front end.

Exit codes: 0 success, 1 numerical failure (or failed verification), 2 invalid input.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report
from .analysis import SensitivityInputs, sensitivity_report, simulate, ugr_classifier
from .config import ConfigError, ExperimentConfig, build_spec, load_config, resolve_axis, with_value
from .core import IntphaseError, NumericalError, ValidationError
from .geometry import closure_check, solve_branches
from .trajectory import pair_kinematics

EXIT_OK, EXIT_NUMERICAL, EXIT_INVALID = 0, 1, 2


def _quad_tol(cfg: ExperimentConfig) -> float | None:
    # the environment override wins (fault injection)
    return None if os.environ.get("INTPHASE_QUAD_TOL") else cfg.numerics.quad_tol


def _oracle(args, cfg: ExperimentConfig) -> bool:
    if getattr(args, "oracle", None) is None:
        return cfg.numerics.oracle
    return args.oracle == "on"


def _load(args) -> tuple[ExperimentConfig, str]:
    path = Path(args.config)
    cfg = load_config(path)
    return cfg, path.read_text()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    cfg, text = _load(args)
    spec = build_spec(cfg)
    res = simulate(spec, _quad_tol(cfg), oracle=_oracle(args, cfg), wavepacket=cfg.numerics.wavepacket,
                   wavepacket_experimental=cfg.numerics.wavepacket_experimental)
    out = args.out or cfg.output.report
    _emit(report.write_report(None, report.result_body(res), report.metadata_header(text, "simulate")), out)
    return EXIT_OK


def _sweep_point(payload):
    cfg, axis, value, tol, oracle = payload
    c = with_value(cfg, axis, value)
    res = simulate(build_spec(c), tol, oracle=oracle, classify=False)
    return [value, res.phi, res.reference, res.residual]


def cmd_sweep(args) -> int:
    cfg, _ = _load(args)
    axis = resolve_axis(cfg, args.axis)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: non-numeric entry in {args.values!r}") from None
    if not values:
        raise ConfigError("--values: no values given")
    for v in values:  # validate every point before computing anything
        build_spec(with_value(cfg, axis, v))
    payload = [(cfg, axis, v, _quad_tol(cfg), _oracle(args, cfg)) for v in values]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(values))) as pool:
            rows = list(pool.map(_sweep_point, payload))
    else:
        rows = [_sweep_point(p) for p in payload]
    _emit(report.write_csv(None, [axis, "phi", "phi_ref", "residual"], rows), args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    cfg, text = _load(args)
    if cfg.sensitivity is None:
        raise ConfigError("sensitivity: config has no [sensitivity] block")
    sb = cfg.sensitivity
    spec = build_spec(cfg)
    dz0 = sb.dz0 if sb.dz0 is not None else spec.reference_separation
    inp = SensitivityInputs(sb.n_at, sb.T_av, sb.t_cyc, sb.t_red, dz0, spec.species.clock_frequency,
                            spec.environment.g)
    body = sensitivity_report(inp, spec.species.constants.c)
    _emit(report.write_report(None, body, report.metadata_header(text, "sensitivity")), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg, text = _load(args)
    spec = build_spec(cfg)
    res = ugr_classifier(spec, quad_tol=_quad_tol(cfg))
    body = {"geometry": spec.name, "classification": res.label, "diagnostics": res.diagnostics}
    _emit(report.write_report(None, body, report.metadata_header(text, "classify")), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    cfg, _ = _load(args)
    spec = build_spec(cfg)
    arms = solve_branches(spec, oracle=_oracle(args, cfg), quad_tol=_quad_tol(cfg))
    pair = pair_kinematics(*arms)
    n = max(2, int(round(spec.duration * cfg.output.trajectory_rate)) + 1)
    ts = np.linspace(spec.t_start, spec.t_end, n)
    zu, vu = arms[0].state(ts)
    zl, vl = arms[1].state(ts)
    rows = [[t, a, b, c, d, x, y, (a + b) / 2, e]
            for t, a, b, c, d, x, y, e in zip(ts, zu, zl, vu, vl, arms[0].zeta(ts), arms[1].zeta(ts), pair.dz(ts))]
    head = ["t", "z_upper", "z_lower", "v_upper", "v_lower", "zeta_upper", "zeta_lower", "zbar", "dz"]
    _emit(report.write_csv(None, head, rows), args.out)
    rep = closure_check(spec, pair)
    if rep.applicable and not rep.closed:
        print(f"warning: geometry not closed (dz={rep.dz_final:.3e} m)", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_verify
    only = None
    if args.criteria:
        try:
            only = {int(x) for x in args.criteria.split(",") if x.strip()}
        except ValueError:
            raise ConfigError(f"--criteria: expected comma-separated integers, got {args.criteria!r}") from None
    results = run_verify(oracle=args.oracle != "off", only=only)
    lines = []
    for crit in results:
        lines.append(crit.line())
        for ch in crit.checks:
            if ch.passed is not True or args.verbose:
                lines.append(f"    {ch.status} {ch.name}: {ch.detail}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(c.passed for c in results) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intphase", description="Perturbative phases of clock and atom-interferometer geometries.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--oracle", choices=("on", "off"))
        return sp

    common(sub.add_parser("simulate", help="run one configuration and write a JSON report")).set_defaults(fn=cmd_simulate)
    sw = common(sub.add_parser("sweep", help="sweep one parameter and write a CSV table"))
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True, metavar="CSV")
    sw.add_argument("--jobs", type=int, default=None)
    sw.set_defaults(fn=cmd_sweep)
    common(sub.add_parser("sensitivity", help="shot-noise sensitivity to alpha")).set_defaults(fn=cmd_sensitivity)
    common(sub.add_parser("classify", help="UGR/UFF classification")).set_defaults(fn=cmd_classify)
    common(sub.add_parser("export-trajectories", help="sampled branch trajectories as CSV")).set_defaults(fn=cmd_export)
    v = common(sub.add_parser("verify", help="run the built-in verification suite"), config=False)
    v.add_argument("--verbose", action="store_true")
    v.add_argument("--criteria", metavar="CSV", help="run only these criteria (e.g. 1,3)")
    v.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, IntphaseError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
