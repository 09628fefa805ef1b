"""Command-line front end.

    hqcgrape run --preset paper-2q --mode all --out runs/demo
    hqcgrape gradient-check --preset paper-2q
    hqcgrape error-budget --preset paper-2q --controls runs/demo/controls_grape.json
    hqcgrape noise-sweep --preset paper-2q --param pulse_fluctuation --values 0,0.05,0.1

Exit status: 0 on success, 2 for configuration errors, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts, config, metrology
from .encoding import ControlGrid, evolve_unitary
from .noise import NoiseModel, RelaxationParams
from .optimizer import MODES, compare_modes, error_budget, random_initial_controls, run_grape
from .sensor import Sensor, SensorConfig

logger = logging.getLogger("hqcgrape")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SWEEP_PARAMS = ("pulse_fluctuation", "initial_state_fidelity", "readout_sigma", "t1_scale", "t2_scale")


def resolve_config(args) -> config.RunConfig:
    """Config file (or preset) with command-line overrides applied."""
    if args.config:
        raw = config.load(args.config).to_dict()
    else:
        raw = {"preset": args.preset or "paper-2q"}
    if args.preset and args.config:
        raw = {"preset": args.preset, **raw}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.repeats is not None:
        raw["repeats"] = args.repeats
    if args.out is not None:
        raw["out"] = args.out
    if args.mode is not None:
        raw["modes"] = list(MODES) if args.mode == "all" else [args.mode]
    return config.from_dict(raw)


def _device_state(sc: SensorConfig, u: ControlGrid, repeats: int, seed) -> np.ndarray:
    """Mean final state over ``repeats`` device runs (exact state when noiseless)."""
    sensor = Sensor(sc, seed)
    n = 1 if sc.noise.is_noiseless else max(repeats, 1)
    return sum(sensor.evolve(u) for _ in range(n)) / n


def cmd_run(cfg: config.RunConfig) -> int:
    sc = cfg.sensor_config()
    oc = cfg.optimizer_config()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = compare_modes(sc, oc, cfg.modes, cfg.repeats)
    labels = [s.label for s in sc.control_specs]
    summary = {"seed": cfg.seed, "repeats": cfg.repeats, "modes": {}}
    for i, mode in enumerate(m for m in MODES if m in traces):
        tr = traces[mode]
        device = sc.noiseless() if mode == "grape" else sc
        rho = _device_state(device, tr.final_controls, cfg.repeats, np.random.SeedSequence([cfg.seed, 7, i]))
        (out / f"trace_{mode}.csv").write_text(artifacts.trace_csv(tr))
        artifacts.dump_json(artifacts.controls_to_json(tr.final_controls, labels), out / f"controls_{mode}.json")
        artifacts.dump_json(artifacts.state_to_json(rho), out / f"state_{mode}.json")
        last = tr.accepted[-1]
        summary["modes"][mode] = {
            "final_qfi": last.qfi,
            "final_qfi_std": last.qfi_std,
            "noon_fidelity": metrology.noon_fidelity(rho) if sc.hamiltonian.n_qubits == 2 else 0.0,
            "iterations": last.iteration,
            "evolutions": tr.records[-1].evolutions,
            "restart": tr.restart,
            "stop_reason": tr.stop_reason,
        }
        print(f"{mode:10s} F_Q = {last.qfi:.4f} +- {last.qfi_std:.4f} after {last.iteration} iterations")
    artifacts.validate_summary(summary)
    artifacts.dump_json(summary, out / "summary.json")
    (out / "config.yaml").write_text(cfg.dump())
    return EXIT_OK


def gradient_check(cfg: config.RunConfig, zero: bool = False, fd_step: float = 1e-4, doublings: int = 3) -> dict:
    """Compare the three gradient routes on one grid; the FD table refines the same pulse."""
    sc = cfg.sensor_config().noiseless()
    oc = cfg.optimizer_config()
    rng = np.random.default_rng(cfg.seed)
    u = ControlGrid.zeros(sc.K, sc.M, sc.T) if zero else random_initial_controls(sc.K, sc.M, sc.T, oc.init_amplitude_bound, rng)
    H, specs, rho0 = sc.hamiltonian, sc.control_specs, sc.probe
    analytic = metrology.analytic_gradient(H, specs, u, rho0)
    rotation = metrology.rotation_insertion_gradient(Sensor(sc), u)

    def objective(v):
        return metrology.qfi(evolve_unitary(H, specs, v, rho0), H.dh0_domega, v.T).normalized

    rows = []
    for j in range(doublings + 1):
        uf = u.refined(2**j)
        ga = metrology.analytic_gradient(H, specs, uf, rho0)
        gf = metrology.finite_difference_gradient(objective, uf, fd_step)
        nf = np.linalg.norm(gf)
        na = np.linalg.norm(ga)
        rows.append({
            "M": uf.M,
            "rel_l2": float(np.linalg.norm(ga - gf) / nf) if nf > 0 else 0.0,
            "cosine": float(ga.ravel() @ gf.ravel() / (na * nf)) if na * nf > 0 else 1.0,
            "max_abs": float(np.max(np.abs(ga - gf))),
        })
    return {"rotation_vs_analytic": float(np.max(np.abs(rotation - analytic))), "fd_table": rows}


def cmd_gradient_check(cfg: config.RunConfig, zero: bool, fd_step: float) -> int:
    report = gradient_check(cfg, zero, fd_step)
    print(f"max |rotation-insertion - analytic| = {report['rotation_vs_analytic']:.3e}")
    print(f"{'M':>5} {'rel L2 (analytic vs FD)':>24} {'cosine':>10} {'max abs':>11}")
    for r in report["fd_table"]:
        print(f"{r['M']:5d} {r['rel_l2']:24.6f} {r['cosine']:10.6f} {r['max_abs']:11.3e}")
    return EXIT_OK


def cmd_error_budget(cfg: config.RunConfig, controls_path: str, trials: int, summary_path: str | None) -> int:
    path = Path(controls_path)
    if not path.exists():
        raise FileNotFoundError(f"controls file {path} not found")
    u = artifacts.controls_from_json(json.loads(path.read_text()))
    sc = cfg.sensor_config()
    if u.K != sc.K:
        raise ValueError(f"controls have K={u.K}, configuration expects {sc.K}")
    sc = replace(sc, T=u.T, M=u.M)
    budget = error_budget(sc, u, cfg.noise_model(), trials=trials, seed=cfg.seed)
    measured = {}
    if summary_path:
        modes = json.loads(Path(summary_path).read_text())["modes"]
        measured = {m: v["final_qfi"] for m, v in modes.items() if m != "grape"}
    print(f"ideal F_Q = {budget.ideal:.4f}")
    for e in budget.isolated:
        print(f"  {e.label:14s} drop {e.drop:.3e}  (std {e.std:.2e})")
    for e in budget.cumulative:
        print(f"  {e.label:14s} F_Q {e.qfi:.4f}")
    for name, value in measured.items():
        print(f"  {name:14s} measured {value:.4f} -> compensated {budget.compensate(value):.4f}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "error_budget.csv").write_text(artifacts.budget_csv(budget, measured))
    return EXIT_OK


def _sweep_noise(base: NoiseModel, param: str, value: float) -> NoiseModel:
    if param in ("t1_scale", "t2_scale"):
        rel = base.relaxation or RelaxationParams()
        key = param[:2]
        scaled = tuple(t * value for t in getattr(rel, key))
        return NoiseModel(relaxation=replace(rel, **{key: scaled}))
    return NoiseModel(**{param: value})


def cmd_noise_sweep(cfg: config.RunConfig, param: str, values: list[float], controls_path: str | None, trials: int) -> int:
    sc = cfg.sensor_config()
    if controls_path:
        u = artifacts.controls_from_json(json.loads(Path(controls_path).read_text()))
        sc = replace(sc, T=u.T, M=u.M)
    else:
        u = run_grape(sc.noiseless(), cfg.optimizer_config()).final_controls
    lines = ["param,value,qfi_mean,qfi_std"]
    for i, v in enumerate(values):
        nm = _sweep_noise(cfg.noise_model(), param, v)
        sensor = Sensor(sc.with_noise(nm), np.random.SeedSequence([cfg.seed, i]))
        n = 1 if nm.is_noiseless else trials
        q = np.array([sensor.measure_qfi(u).qfi_normalized for _ in range(n)])
        std = float(q.std(ddof=1)) if n > 1 else 0.0
        lines.append(f"{param},{v!r},{float(q.mean())!r},{std!r}")
        print(f"{param}={v:g}: F_Q = {q.mean():.5f} +- {std:.5f}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"noise_sweep_{param}.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--preset", choices=sorted(config.PRESETS), help="built-in configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=[*MODES, "all"])
    common.add_argument("--out", help="output directory")
    common.add_argument("--repeats", type=int, help="device repeats for error bars (default 5)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hqcgrape", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="optimize controls in one or more modes")
    g = sub.add_parser("gradient-check", parents=[common], help="compare gradient routes")
    g.add_argument("--zero", action="store_true", help="use an all-zero control grid")
    g.add_argument("--fd-step", type=float, default=1e-4)
    e = sub.add_parser("error-budget", parents=[common], help="QFI loss per error source")
    e.add_argument("--controls", required=True, help="controls JSON written by 'run'")
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--summary", help="summary.json whose measured QFIs get compensated")
    s = sub.add_parser("noise-sweep", parents=[common], help="QFI of fixed controls vs one noise level")
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--controls", help="controls JSON (default: optimize with GRAPE first)")
    s.add_argument("--trials", type=int, default=200)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "noise-sweep":
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                raise config.ConfigError(f"--values: not a comma-separated list of numbers: {args.values!r}") from None
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "gradient-check":
            return cmd_gradient_check(cfg, args.zero, args.fd_step)
        if args.command == "error-budget":
            return cmd_error_budget(cfg, args.controls, args.trials, args.summary)
        return cmd_noise_sweep(cfg, args.param, values, args.controls, args.trials)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
