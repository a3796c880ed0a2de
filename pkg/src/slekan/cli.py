"""Batch command-line entry point.

Subcommands::

    slekan synth      --beta 0.5,1,5,10          synthetic benchmark per beta
    slekan calibrate  --data uniaxial            SLE calibration of one file
    slekan regime     --data uniaxial --gamma 0.5,0.8
    slekan eval       --model m.json --data curve.csv

``--data`` takes a path or one of the bundled mode names. Settings come from
an optional ``--config`` file (``[section]`` headers, ``key: value`` lines,
``#`` comments) and are overridden by flags. The seed falls back to the
``SLEKAN_SEED`` environment variable, then to 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_io, sle
from .calibrate import CalibrationConfig, calibrate_sle
from .errors import ParseError, SlekanError
from .hybrid import RegimeSpec, run_regime
from .spline import local_slope, predict
from .training import (
    Dataset,
    LossWeights,
    TrainConfig,
    evaluate,
    metrics,
    run_synthetic,
)


@dataclass
class RunSection:
    seed: int | None = None
    out: str = "results"
    data: str | None = None


@dataclass
class SynthSection:
    betas: str = "0.5,1.0,5.0,10.0"
    alpha: float = 2.0
    n_samples: int = 400
    tau_lo: float = -10.0
    tau_hi: float = 10.0
    n_knots: int = 64


@dataclass
class TrainSection:
    learning_rate: float = 0.01
    iterations: int = 5000


@dataclass
class WeightsSection:
    w_data: float = 1.0
    w_mono: float = 10.0
    w_limit: float = 10.0
    w_flat: float = 0.01
    flat_threshold_fraction: float = 0.7


@dataclass
class CalibrationSection:
    alpha_lo: float = 0.2
    alpha_hi: float = 10.0
    e_lo: float = 0.01
    e_hi: float = 100.0
    beta_lo: float = 0.01
    beta_hi: float = 10.0
    robust_scale: float | None = None
    restarts: int = 8
    bisection_tol: float = 1e-10
    loss: str = "huber"


@dataclass
class ResidualSection:
    n_knots: int = 16
    learning_rate: float = 0.01
    iterations: int = 5000
    w_flat: float = 1e-3
    flat_threshold_fraction: float = 0.7


@dataclass
class RegimeSection:
    gammas: str = "0.5,0.8"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    synth: SynthSection = field(default_factory=SynthSection)
    train: TrainSection = field(default_factory=TrainSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    calibration: CalibrationSection = field(default_factory=CalibrationSection)
    residual: ResidualSection = field(default_factory=ResidualSection)
    regime: RegimeSection = field(default_factory=RegimeSection)

    @property
    def seed(self) -> int:
        if self.run.seed is not None:
            return int(self.run.seed)
        env = os.environ.get("SLEKAN_SEED")
        return int(env) if env else 0

    def train_config(self) -> TrainConfig:
        w = self.weights
        return TrainConfig(
            learning_rate=self.train.learning_rate,
            iterations=self.train.iterations,
            seed=self.seed,
            weights=LossWeights(w.w_data, w.w_mono, w.w_limit, w.w_flat, w.flat_threshold_fraction),
        )

    def residual_config(self) -> TrainConfig:
        r = self.residual
        return TrainConfig(
            learning_rate=r.learning_rate,
            iterations=r.iterations,
            seed=self.seed,
            weights=LossWeights(
                w_mono=0.0,
                w_limit=0.0,
                w_flat=r.w_flat,
                flat_threshold_fraction=r.flat_threshold_fraction,
            ),
        )

    def calibration_config(self) -> CalibrationConfig:
        c = self.calibration
        return CalibrationConfig(
            alpha_bounds=(c.alpha_lo, c.alpha_hi),
            modulus_bounds=(c.e_lo, c.e_hi),
            beta_bounds=(c.beta_lo, c.beta_hi),
            robust_scale=c.robust_scale,
            restarts=c.restarts,
            seed=self.seed,
            bisection_tol=c.bisection_tol,
            loss=c.loss,
        )


def _coerce(text: str, current_type: str):
    if text.lower() in ("none", ""):
        return None
    if "int" in current_type:
        return int(text)
    if "float" in current_type:
        return float(text)
    return text


def parse_config(path) -> RunConfig:
    """Read a sectioned ``key: value`` config file on top of the defaults."""
    path = Path(path)
    cfg = RunConfig()
    section = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        commented = line.startswith("#")
        if commented:
            # "# key: value" sets a known field; anything else is a comment
            line = line[1:].strip()
            if ":" not in line or line.startswith("["):
                continue
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(path, lineno, len(raw), "unterminated section header")
            name = line[1:-1].strip().lower()
            if not hasattr(cfg, name):
                raise ParseError(path, lineno, 2, f"unknown section {name!r}")
            section = getattr(cfg, name)
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ParseError(path, lineno, 1, "expected 'key: value'")
        key = key.strip().lower()
        target = section if section is not None else cfg.run
        types = {f.name: str(f.type) for f in dataclasses.fields(target)}
        if key not in types:
            if commented:
                continue
            raise ParseError(path, lineno, 1, f"unknown key {key!r}")
        try:
            setattr(target, key, _coerce(value.strip(), types[key]))
        except ValueError:
            col = raw.index(":") + 2
            raise ParseError(path, lineno, col, f"bad value for {key!r}: {value.strip()!r}") from None
    return cfg


def _float_list(text: str) -> list:
    items = [t for t in (s.strip() for s in str(text).split(",")) if t]
    return [float(t) for t in items]


def _tag(x: float) -> str:
    return repr(float(x))


def _resolve_data(name: str) -> Path:
    p = Path(name)
    if not p.exists() and name in data_io.EXPERIMENTAL_MODES:
        return data_io.bundled_path(name)
    return p


def _write_json(path, obj):
    data_io._atomic_write(path, json.dumps(obj, indent=2, allow_nan=False) + "\n")


def cmd_synth(betas, cfg: RunConfig, out: Path) -> list:
    s = cfg.synth
    train_cfg = cfg.train_config()
    summary = []
    for beta in betas:
        try:
            res = run_synthetic(
                beta,
                alpha=s.alpha,
                n_samples=s.n_samples,
                tau_range=(s.tau_lo, s.tau_hi),
                n_knots=s.n_knots,
                config=train_cfg,
            )
        except SlekanError as exc:
            raise SlekanError(f"beta={beta}: {exc}") from exc
        stem = out / f"synth_beta{_tag(beta)}"
        x = res.test_inputs
        true = sle.strain_from_stress(res.params, x)
        learned = predict(res.model, x)
        data_io.write_csv(f"{stem}_curve.csv", ("tau", "strain_true", "strain_pred"),
                          zip(x, true, learned))
        knots = res.model.grid.knots()
        data_io.write_csv(f"{stem}_spline.csv", ("knot", "coefficient", "strain_true"),
                          zip(knots, res.model.coefficients, sle.strain_from_stress(res.params, knots)))
        data_io.write_csv(f"{stem}_tangent.csv", ("tau", "slope_learned", "compliance_true"),
                          zip(x, local_slope(res.model, x), sle.tangent_compliance(res.params, x)))
        data_io.write_loss_history(f"{stem}_loss.csv", res.loss_history)
        data_io.save_spline(res.model, f"{stem}_model.json")
        m = res.test_metrics
        _write_json(f"{stem}_metrics.json", {"beta": beta, "alpha": s.alpha, **m.to_dict()})
        summary.append((beta, m.mae, m.rmse, m.r_squared))
    data_io.write_csv(out / "synth_summary.csv", ("beta", "mae", "rmse", "r_squared"), summary)
    return summary


def cmd_calibrate(data_path, cfg: RunConfig, out: Path):
    data = data_io.load_experimental(data_path)
    result = calibrate_sle(data, cfg.calibration_config())
    mode = data.mode_tag.value
    data_io.save_calibration(result, out / f"calibration_{mode}.json")
    pred = sle.stress_from_strain(result.params, np.log(data.inputs), cfg.calibration.bisection_tol)
    data_io.write_csv(out / f"calibration_{mode}_curve.csv", ("stretch", "stress_exp", "stress_sle"),
                      zip(data.inputs, data.targets, pred))
    return result


def cmd_regime(data_path, gammas, cfg: RunConfig, out: Path) -> list:
    data = data_io.load_experimental(data_path)
    cal = calibrate_sle(data, cfg.calibration_config())
    mode = data.mode_tag.value
    data_io.save_calibration(cal, out / f"calibration_{mode}.json")
    reports = []
    for gamma in gammas:
        _, report = run_regime(
            data,
            cal.params.alpha,
            cal.params.youngs_modulus,
            RegimeSpec(gamma),
            cfg.residual_config(),
            cfg.calibration.bisection_tol,
            cfg.residual.n_knots,
        )
        stem = f"regime_{mode}_gamma{_tag(gamma)}"
        report = dataclasses.replace(report, loss_history_file=f"{stem}_loss.csv")
        data_io.write_loss_history(out / f"{stem}_loss.csv", report.loss_history)
        data_io.write_csv(
            out / f"{stem}_points.csv",
            ("stretch", "stress_exp", "stress_sle", "stress_kan", "stress_pred", "saturated"),
            ((p.stretch, p.stress_exp, p.stress_sle, p.stress_kan, p.stress_pred, p.saturated)
             for p in report.points),
        )
        data_io.save_report(report, out / f"{stem}.json")
        reports.append(report)
    return reports


def cmd_eval(model_path, data_path, out: Path):
    model = data_io.load_spline(model_path)
    columns, table = data_io.read_csv(data_path)
    if table.shape[1] < 2:
        raise ParseError(data_path, 1, 1, "need an input and a target column")
    data = Dataset(table[:, 0], table[:, 1])
    pred = evaluate(model, data.inputs)
    data_io.write_csv(out / "eval_predictions.csv", (columns[0], columns[1], "prediction"),
                      zip(data.inputs, data.targets, pred))
    m = metrics(pred, data.targets)
    _write_json(out / "eval_metrics.json", m.to_dict())
    return m


_CONFIG_HELP = """config file sections and defaults:
  [run]          seed: (SLEKAN_SEED or 0)  out: results  data: none
  [synth]        betas: 0.5,1.0,5.0,10.0  alpha: 2.0  n_samples: 400
                 tau_lo: -10.0  tau_hi: 10.0  n_knots: 64
  [train]        learning_rate: 0.01  iterations: 5000
  [weights]      w_data: 1.0  w_mono: 10.0  w_limit: 10.0  w_flat: 0.01
                 flat_threshold_fraction: 0.7
  [calibration]  alpha_lo: 0.2  alpha_hi: 10  e_lo: 0.01  e_hi: 100
                 beta_lo: 0.01  beta_hi: 10  robust_scale: none (10% of max stress)
                 restarts: 8  bisection_tol: 1e-10  loss: huber
  [residual]     n_knots: 16  learning_rate: 0.01  iterations: 5000
                 w_flat: 0.001  flat_threshold_fraction: 0.7
  [regime]       gammas: 0.5,0.8
"""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common.add_argument("--config", help="sectioned key: value config file", default=None)
    common.add_argument("--seed", type=int, default=None,
                        help="unsigned 64-bit seed (falls back to [run] seed, then SLEKAN_SEED, then 0)")
    common.add_argument("--out", default=None, help="output directory ([run] out, default 'results')")

    parser = argparse.ArgumentParser(
        prog="slekan",
        description="Strain-limiting elasticity with constrained spline KANs.",
        epilog=_CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = sub.add_parser("synth", parents=[common], formatter_class=fmt,
                       help="synthetic benchmark over strain-limiting parameters")
    p.add_argument("--beta", default=None, help="comma-separated beta list ([synth] betas, default 0.5,1.0,5.0,10.0)")
    p = sub.add_parser("calibrate", parents=[common], formatter_class=fmt,
                       help="calibrate (alpha, E, beta) on an experimental file")
    p.add_argument("--data", default=None, help="experimental CSV or bundled mode name (uniaxial|biaxial|planar)")
    p = sub.add_parser("regime", parents=[common], formatter_class=fmt,
                       help="calibrate once, then run the hybrid fit per gamma")
    p.add_argument("--data", default=None, help="experimental CSV or bundled mode name (uniaxial|biaxial|planar)")
    p.add_argument("--gamma", default=None, help="comma-separated gamma list ([regime] gammas, default 0.5,0.8)")
    p = sub.add_parser("eval", parents=[common], formatter_class=fmt,
                       help="evaluate a saved spline model on a two-column CSV")
    p.add_argument("--model", required=True, help="spline model JSON written by synth")
    p.add_argument("--data", required=True, help="CSV with an input column and a target column")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stage = "config"
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                parser.error("--seed must be an unsigned 64-bit integer")
            cfg.run.seed = args.seed
        out = Path(args.out or cfg.run.out)

        if args.command == "synth":
            try:
                betas = _float_list(args.beta if args.beta is not None else cfg.synth.betas)
            except ValueError:
                parser.error("--beta must be a comma-separated list of numbers")
            if not betas or any(not b > 0 for b in betas):
                parser.error("--beta needs at least one positive value")
        elif args.command in ("calibrate", "regime"):
            data_spec = args.data or cfg.run.data
            if not data_spec:
                parser.error("--data is required")
            data_path = _resolve_data(data_spec)
            if args.command == "regime":
                try:
                    gammas = _float_list(args.gamma if args.gamma is not None else cfg.regime.gammas)
                except ValueError:
                    parser.error("--gamma must be a comma-separated list of numbers")
                if not gammas or any(not g > 0 for g in gammas):
                    parser.error("--gamma needs at least one positive value")

        stage = "output"
        out.mkdir(parents=True, exist_ok=True)
        stage = args.command
        if args.command == "synth":
            for beta, mae, rmse, r2 in cmd_synth(betas, cfg, out):
                print(f"beta={beta:g}  MAE={mae:.3e}  RMSE={rmse:.3e}  R2={r2:.6f}")
        elif args.command == "calibrate":
            r = cmd_calibrate(data_path, cfg, out)
            p = r.params
            print(f"{r.mode}: alpha={p.alpha:.4f} E={p.youngs_modulus:.4f} "
                  f"beta={p.beta:.4f} gamma={p.gamma():.4f} R2={r.metrics.r_squared:.4f}")
        elif args.command == "regime":
            for rep in cmd_regime(data_path, gammas, cfg, out):
                print(f"{rep.mode} gamma={rep.gamma:g}: SLE RMSE={rep.sle_metrics.rmse:.4g} "
                      f"hybrid RMSE={rep.hybrid_metrics.rmse:.4g} saturated={rep.n_saturated}")
        else:
            m = cmd_eval(args.model, args.data, out)
            print(f"MAE={m.mae:.3e}  RMSE={m.rmse:.3e}  R2={m.r_squared:.6f}")
    except (SlekanError, OSError, ValueError) as exc:
        print(f"slekan {args.command}: {stage} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
