"""Command-line front end.

Every subcommand resolves its configuration (defaults, then ``--config``,
then flags), validates it before any computation and writes its artifacts
plus a checksummed ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import artifacts as art
from .config import RunConfig, load_config
from .errors import AopinnError, ConfigError
from .pinn import AdamState, save_checkpoint
from .pipeline import (
    build_scenario,
    run_baseline,
    run_proposed,
    train_inverse,
    train_proposed,
    trajectory_rmse,
)
from .seir import eval_many, make_rng

log = logging.getLogger("aopinn")

GRID_POINTS = 201


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    cfg = cfg.override(
        seed_data=args.seed_data,
        seed_init=args.seed_init,
        seed_bo=args.seed_bo,
        epochs=args.epochs,
        out=args.out,
    )
    return cfg.validate()


def _progress(args, label: str, total: int):
    if args.quiet:
        return None
    step = max(total // 10, 1)
    t0 = time.perf_counter()

    def report(epoch, record):
        if (epoch + 1) % step == 0 or epoch + 1 == total:
            print(
                f"[{label}] epoch {epoch + 1}/{total} loss={record.train_loss[-1]:.3e} "
                f"test={record.test_error[-1]:.3e} eps={record.epsilon[-1]:.5f} "
                f"({time.perf_counter() - t0:.0f}s)",
                file=sys.stderr,
                flush=True,
            )

    return report


def _bo_progress(args, label: str):
    if args.quiet:
        return None
    t0 = time.perf_counter()

    def report(k, eps, obj):
        print(f"[{label}] iteration {k} eps={eps:.5f} objective={obj:.4e} ({time.perf_counter() - t0:.0f}s)",
              file=sys.stderr, flush=True)

    return report


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _seeds(cfg: RunConfig) -> dict:
    return {"data": cfg.seed_data, "init": cfg.seed_init, "bo": cfg.seed_bo}


def _write_scenario(run: art.RunDir, scn) -> None:
    truth = scn.truth
    art.write_csv(run.path("trajectory.csv"), art.TRAJECTORY_HEADER, art.trajectory_rows(truth.times, truth.states))
    art.write_csv(run.path("observations_train.csv"), art.OBSERVATION_HEADER, art.observation_rows(scn.obs_train))
    art.write_csv(run.path("observations_test.csv"), art.OBSERVATION_HEADER, art.observation_rows(scn.obs_test))


def _training_settings(cfg: RunConfig, model) -> dict:
    """Choices the training run depends on beyond the config values."""
    adam = AdamState([], [])
    return {
        "layer_sizes": list(model.layer_sizes),
        "input_scale": model.t_scale,
        "adam": {"beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps, "lr": cfg.lr},
        "batch": "full",
        "collocation": "training times",
        "test_error": "weighted data loss on the test set with the mode's C weights",
    }


def _write_model(run: art.RunDir, scn, model, record, stem: str, title: str, obs=None) -> np.ndarray:
    """Training record, prediction table, checkpoint and comparison plot."""
    run.results["training"] = _training_settings(scn.cfg, model)
    art.write_csv(run.path(f"{stem}_record.csv"), art.RECORD_HEADER, record.rows())
    grid = np.linspace(0.0, scn.cfg.t_end, GRID_POINTS)
    truth = eval_many(scn.truth, grid)
    pred = model.values(grid)
    art.write_csv(run.path(f"{stem}_prediction.csv"), art.PREDICTION_HEADER, art.prediction_rows(grid, truth, pred))
    save_checkpoint(run.path(f"{stem}_model.npz"), model, _seeds(scn.cfg))
    with run.timed("plots"):
        art.plot_compartments(run.path(f"{stem}_fit.svg"), grid, truth, pred, obs, title)
    rmse = trajectory_rmse(model, scn.truth, GRID_POINTS)
    run.results["rmse"] = dict(zip("SEIR", map(float, rmse)))
    return rmse


def cmd_simulate(args, cfg: RunConfig) -> int:
    with art.RunDir(Path(cfg.out), "simulate", cfg.to_dict()) as run:
        with run.timed("simulate"):
            scn = build_scenario(cfg)
        drift = float(np.max(np.abs(scn.truth.states.sum(axis=1) - 1.0)))
        _write_scenario(run, scn)
        with run.timed("plots"):
            art.plot_compartments(run.path("trajectory.svg"), scn.truth.times, scn.truth.states,
                                  obs=scn.obs_train, title="ground truth")
        run.results.update(rows=len(scn.truth.times), max_conservation_error=drift)
    _say(args, f"{len(scn.truth.times)} time points, max |S+E+I+R-1| = {drift:.3e}")
    _say(args, f"wrote {cfg.out}")
    return 0


def cmd_train_forward(args, cfg: RunConfig) -> int:
    eps = cfg.epsilon_forward if cfg.epsilon_forward is not None else cfg.epsilon_true
    with art.RunDir(Path(cfg.out), "train-forward", cfg.to_dict()) as run:
        scn = build_scenario(cfg)
        _write_scenario(run, scn)
        with run.timed("train"):
            model, record = train_proposed(scn, eps, _progress(args, "forward", cfg.epochs))
        rmse = _write_model(run, scn, model, record, "forward", f"forward problem, epsilon = {eps:g}", scn.obs_train)
        run.results.update(epsilon=eps, min_test_error=record.min_test_error if len(record) else None)
    _say(args, f"epsilon = {eps:g}; RMSE S,E,I,R = " + ", ".join(f"{v:.3e}" for v in rmse))
    return 0


def cmd_train_inverse(args, cfg: RunConfig) -> int:
    eps0 = cfg.epsilon_initial
    with art.RunDir(Path(cfg.out), "train-inverse", cfg.to_dict()) as run:
        scn = build_scenario(cfg)
        _write_scenario(run, scn)
        with run.timed("train"):
            model, record = train_inverse(scn, eps0, _progress(args, "inverse", cfg.epochs))
        _write_model(run, scn, model, record, "inverse", f"inverse problem from epsilon = {eps0:g}", scn.obs_train)
        if len(record):
            art.plot_epsilon_history(run.path("inverse_epsilon.svg"), record, cfg.epsilon_true)
            run.results.update(epsilon0=eps0, epsilon1=record.epsilon_at_min_test,
                               epsilon2=record.epsilon_at_min_train, epsilon_final=model.epsilon)
    if len(record):
        _say(args, f"eps0 = {eps0:g}  eps1 = {record.epsilon_at_min_test:.6f}  eps2 = {record.epsilon_at_min_train:.6f}")
    return 0


def cmd_bo_proposed(args, cfg: RunConfig) -> int:
    with art.RunDir(Path(cfg.out), "bo-proposed", cfg.to_dict()) as run:
        scn = build_scenario(cfg)
        _write_scenario(run, scn)
        with run.timed("bo"):
            res = run_proposed(scn, _bo_progress(args, "bo-proposed"))
        art.write_csv(run.path("bo_trace.csv"), art.BO_HEADER, res.bo.rows())
        run.results["bo"] = res.bo.settings
        with run.timed("plots"):
            art.plot_bo_trace(run.path("bo_trace.svg"), res.bo, "proposed method")
        rmse = _write_model(run, scn, res.model, res.record, "proposed",
                            f"proposed method, epsilon = {res.epsilon_hat:.4g}", scn.obs_train)
        run.results.update(epsilon_hat=res.epsilon_hat, abs_error=abs(res.epsilon_hat - cfg.epsilon_true),
                           best_objective=res.bo.best_objective)
    _say(args, f"epsilon_hat = {res.epsilon_hat:.6f}  |error| = {abs(res.epsilon_hat - cfg.epsilon_true):.3e}")
    _say(args, "RMSE S,E,I,R = " + ", ".join(f"{v:.3e}" for v in rmse))
    return 0


def cmd_bo_baseline(args, cfg: RunConfig) -> int:
    with art.RunDir(Path(cfg.out), "bo-baseline", cfg.to_dict()) as run:
        scn = build_scenario(cfg)
        _write_scenario(run, scn)
        with run.timed("bo"):
            res = run_baseline(scn, _bo_progress(args, "bo-baseline"))
        art.write_csv(run.path("bo_trace.csv"), art.BO_HEADER, res.bo.rows())
        run.results["bo"] = res.bo.settings
        with run.timed("plots"):
            art.plot_bo_trace(run.path("bo_trace.svg"), res.bo, "baseline, initial epsilon")
        _write_model(run, scn, res.model, res.record, "baseline",
                     f"baseline, epsilon0 = {res.epsilon0:.4g}", scn.obs_train)
        art.plot_epsilon_history(run.path("baseline_epsilon.svg"), res.record, cfg.epsilon_true)
        run.results.update(
            epsilon0=res.epsilon0, epsilon1=res.epsilon1, epsilon2=res.epsilon2,
            min_test_epoch=res.record.best_test_epoch, min_train_epoch=res.record.best_train_epoch,
        )
    _say(args, f"eps0 = {res.epsilon0:.6f}  eps1 = {res.epsilon1:.6f}  eps2 = {res.epsilon2:.6f}")
    return 0


def cmd_observability(args) -> int:
    """Print the reduced basis and the recovery checks; the output is a pure
    function of the fixed ideal, so repeated runs print the same bytes."""
    from .observability import (
        build_seir_ideal,
        buchberger,
        check_observable,
        expected_e_relation,
        expected_s_relation,
        proportional,
        vanishes_on_samples,
    )

    ideal = build_seir_ideal()
    ring = ideal.ring
    basis = buchberger(ideal)
    lines = [f"// ring: (0,{','.join(ring.params)}),({','.join(ring.variables)}),lp"]
    lines.append(f"// reduced Groebner basis, {len(basis)} elements")
    lines += [f"G[{k}]={g.to_singular()}" for k, g in enumerate(basis, start=1)]
    ok = True
    for var, expected in (("E", expected_e_relation(ring)), ("S", expected_s_relation(ring))):
        rec = check_observable(var, basis)
        matches = rec.found and proportional(rec.polynomial, expected)
        vanish = rec.found and vanishes_on_samples([rec.polynomial], make_rng(0), samples=100)
        ok = ok and matches and vanish
        poly = rec.polynomial.to_singular() if rec.found else "none"
        lines.append(f"// {var}: {poly}")
        lines.append(f"//   expected relation up to a unit: {'yes' if matches else 'NO'}; "
                     f"vanishes on 100 exact samples: {'yes' if vanish else 'NO'}")
    lines.append("// result: " + ("E and S are algebraically observable from Y" if ok else "MISMATCH"))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        with art.RunDir(out, "observability", {}) as run:
            run.path("observability.txt").write_text(text)
            run.results["ok"] = ok
    sys.stdout.write(text)
    return 0 if ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "train-forward": cmd_train_forward,
    "train-inverse": cmd_train_inverse,
    "bo-proposed": cmd_bo_proposed,
    "bo-baseline": cmd_bo_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aopinn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "observability"):
        p = sub.add_parser(name)
        p.add_argument("--out", help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "observability":
            continue
        p.add_argument("--config", help="TOML file of key = value overrides")
        p.add_argument("--seed-data", type=int)
        p.add_argument("--seed-init", type=int)
        p.add_argument("--seed-bo", type=int)
        p.add_argument("--epochs", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    try:
        if args.command == "observability":
            return cmd_observability(args)
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg)
    except AopinnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
