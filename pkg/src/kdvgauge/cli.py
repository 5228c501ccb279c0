"""Configuration ingestion and run orchestration.

Configs are INI-style documents with sections [grid], [coefficients],
[split], [solver] and [experiment]; all values are strings parsed against a
typed schema.  Unknown keys are rejected with a spelling suggestion, and
every violation in the file is reported, not just the first.  A run is
identified by the SHA-256 of its canonical parsed content, so identical
configs produce byte-identical outputs.

Exit codes: 0 all verdicts pass, 1 failed verdicts, 2 errors (including a
failed hypothesis check without --allow-hypothesis-violation).
"""

from __future__ import annotations

import argparse
import configparser
import difflib
import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, check_hypotheses, split_beta
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentSpec,
    run_experiment,
    write_report,
)
from .expressions import ExpressionError, parse_coefficient
from .spectral import make_grid

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]


class ConfigError(ValueError):
    """Carries every violation found while validating a config."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


# key -> (type tag, default); None default means "required"
_SCHEMA = {
    "grid": {
        "half_width": ("const", "8*pi"),
        "num_points": ("int", "512"),
    },
    "coefficients": {
        "alpha": ("expr", "1"),
        "beta": ("expr", "0"),
        "gamma": ("expr", "0"),
        "delta": ("expr", "0"),
        "epsilon": ("expr", "1"),
        "alpha0": ("float", "1.0"),
    },
    "split": {
        "strategy": ("choice:user,softplus", "user"),
        "beta1": ("expr", None),
        "beta2": ("expr", None),
        "kappa": ("float", "10.0"),
    },
    "solver": {
        "dt": ("float_or_auto", "auto"),
        "t_final": ("float", "0.5"),
        "s": ("float", "1.0"),
        "dealias": ("bool", "true"),
        "blowup_threshold": ("float_or_auto", "auto"),
        "monitor_stride": ("int", "10"),
    },
    "experiment": {
        "kind": ("choice:" + ",".join(EXPERIMENT_KINDS), None),
        "seed": ("int", "0"),
        "refine_sweep": ("int_list", None),
        "gaussian_width": ("float", None),
        "gaussian_amplitude": ("float", None),
        "n_sweep": ("int_list", None),
        "reference_n": ("int", None),
        "spectrum_decay_offset": ("float", None),
        "xi0_sweep": ("float_list", None),
        "region_half_width": ("float", None),
        "region_beta0": ("float", None),
        "region_smoothing": ("float", None),
        "packet_width": ("float", None),
        "packet_launch": ("float", None),
        "perturbation_sizes": ("float_list", None),
        "band_sweep": ("int_list", None),
        "draws": ("int", None),
        "identity_draws": ("int", None),
        "resonance_draws": ("int", None),
        "kappa": ("float", None),
        "order_kappa": ("float", None),
        "dt_sweep": ("float_list", None),
        "order_t_final": ("float", None),
    },
}

# keys without schema defaults that still have required-at-build semantics
_REQUIRED = {("experiment", "kind")}


def _convert(tag: str, raw: str, where: str, violations: list):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if tag == "float_or_auto":
            return "auto" if raw.strip().lower() == "auto" else float(raw)
        if tag == "int_list":
            return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
        if tag == "float_list":
            return tuple(float(v.strip()) for v in raw.split(",") if v.strip())
        if tag == "const":
            expr = parse_coefficient(raw)
            if expr.depends_on_t or expr.depends_on_x:
                raise ValueError("must be a constant expression")
            return float(expr.eval(0.0, 0.0))
        if tag == "expr":
            parse_coefficient(raw)  # validated here, parsed again at build
            return raw
        if tag.startswith("choice:"):
            choices = tag.split(":", 1)[1].split(",")
            if raw.strip() not in choices:
                raise ValueError(f"must be one of {choices}")
            return raw.strip()
        raise RuntimeError(f"bad schema tag {tag}")  # pragma: no cover
    except ExpressionError as exc:
        violations.append(f"{where}: expression error: {exc}")
    except (ValueError, TypeError) as exc:
        violations.append(f"{where}: {exc}")
    return None


@dataclass
class RunConfig:
    values: dict  # canonical section -> key -> parsed value
    cset: CoefficientSet
    spec_kwargs: dict
    run_id: str
    config_hash: str

    @property
    def kind(self) -> str:
        return self.values["experiment"]["kind"]


def parse_config(path) -> RunConfig:
    """Read, validate and canonicalize a config file.

    Raises ConfigError listing every violation: unknown sections/keys (with
    a spelling suggestion), type failures, and expression errors with their
    source column.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"])
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"])

    violations: list[str] = []
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            hint = difflib.get_close_matches(section, _SCHEMA.keys(), n=1)
            extra = f"; did you mean [{hint[0]}]?" if hint else ""
            violations.append(f"unknown section [{section}]{extra}")
            continue
        known = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in known:
                hint = difflib.get_close_matches(key, known.keys(), n=1)
                extra = f"; did you mean {hint[0]!r}?" if hint else ""
                violations.append(f"[{section}] unknown key {key!r}{extra}")
                continue
            tag, _default = known[key]
            parsed = _convert(tag, raw, f"[{section}] {key}", violations)
            if parsed is not None:
                values.setdefault(section, {})[key] = parsed

    # defaults
    for section, keys in _SCHEMA.items():
        for key, (tag, default) in keys.items():
            if default is None:
                continue
            if key not in values.get(section, {}):
                parsed = _convert(tag, default, f"[{section}] {key} (default)", violations)
                values.setdefault(section, {})[key] = parsed

    for section, key in _REQUIRED:
        if key not in values.get(section, {}):
            violations.append(f"[{section}] missing required key {key!r}")

    if violations:
        raise ConfigError(violations)

    # assemble the coefficient set and split
    co = values["coefficients"]
    sp = values["split"]
    if sp["strategy"] == "softplus" and ("beta1" in sp or "beta2" in sp):
        raise ConfigError(
            ["[split] beta1/beta2 are only meaningful with strategy = user"]
        )
    try:
        beta_expr = parse_coefficient(co["beta"])
        if sp["strategy"] == "softplus":
            b1, b2 = split_beta(beta_expr, "softplus", kappa=sp["kappa"])
            b1_text, b2_text = "<softplus>", "<softplus>"
        else:
            b1_text = sp.get("beta1", co["beta"])
            b2_text = sp.get("beta2", "0")
            b1, b2 = parse_coefficient(b1_text), parse_coefficient(b2_text)
        cset = CoefficientSet(
            alpha=parse_coefficient(co["alpha"]),
            beta=beta_expr,
            gamma=parse_coefficient(co["gamma"]),
            delta=parse_coefficient(co["delta"]),
            epsilon=parse_coefficient(co["epsilon"]),
            beta1=b1,
            beta2=b2,
            alpha0=co["alpha0"],
        )
    except ExpressionError as exc:
        raise ConfigError([f"[coefficients]/[split]: {exc}"])

    values.setdefault("split", {})["beta1"] = b1_text
    values["split"]["beta2"] = b2_text

    canonical = json.dumps(values, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    ex = dict(values["experiment"])
    kind = ex.pop("kind")
    seed = ex.pop("seed")
    spec_kwargs = dict(
        kind=kind,
        seed=seed,
        half_width=values["grid"]["half_width"],
        num_points=values["grid"]["num_points"],
        s=values["solver"]["s"],
        t_final=values["solver"]["t_final"],
        dt=values["solver"]["dt"],
        dealias=values["solver"]["dealias"],
        blowup_threshold=values["solver"]["blowup_threshold"],
        monitor_stride=values["solver"]["monitor_stride"],
        **ex,
    )
    return RunConfig(
        values=values,
        cset=cset,
        spec_kwargs=spec_kwargs,
        run_id=digest[:12],
        config_hash=digest,
    )


def run(
    config: RunConfig,
    output_dir,
    seed_override: int | None = None,
    allow_hypothesis_violation: bool = False,
    gnuplot: bool = False,
    stream=None,
) -> int:
    """Hypothesis gate, experiment dispatch, output emission."""
    out = stream or sys.stdout
    try:
        grid = make_grid(config.values["grid"]["half_width"],
                         config.values["grid"]["num_points"])
        t_final = config.values["solver"]["t_final"]
        times = np.linspace(0.0, t_final, 3)
        for name in ("alpha", "beta", "gamma", "delta", "epsilon", "beta1", "beta2"):
            getattr(config.cset, name).screen(times, grid.x)

        hyp = check_hypotheses(config.cset, grid, t_final, t_samples=5)
        violating = not hyp.passed
        if violating and not allow_hypothesis_violation:
            out.write(hyp.format_text() + "\n")
            out.write(
                "hypothesis check failed; rerun with --allow-hypothesis-violation "
                "to proceed (outputs will be watermarked)\n"
            )
            return 2

        kwargs = dict(config.spec_kwargs)
        if seed_override is not None:
            kwargs["seed"] = int(seed_override)
        kwargs["hypothesis_violating"] = violating
        spec = ExperimentSpec(cset=config.cset, **kwargs)
        report = run_experiment(spec)
        run_id = config.run_id if seed_override is None else (
            hashlib.sha256(
                (config.config_hash + f":seed={seed_override}").encode()
            ).hexdigest()[:12]
        )
        write_report(report, output_dir, run_id, config.config_hash, gnuplot=gnuplot)
        for v in report.verdicts:
            out.write(
                f"{'PASS' if v.passed else 'FAIL'} {v.name}: value {v.value:.6g} "
                f"({v.threshold})\n"
            )
        return 0 if report.passed else 1
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 -- boundary: report and signal exit 2
        out.write(f"error: {exc}\n")
        return 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="kdvgauge",
        description="gauge-straightening studies for variable-coefficient "
        "third-order dispersive equations",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output-dir", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--allow-hypothesis-violation", action="store_true")
    p_run.add_argument("--gnuplot", action="store_true",
                       help="also write whitespace-separated .dat tables")

    p_check = sub.add_parser("check", help="hypothesis check only")
    p_check.add_argument("config")

    sub.add_parser("list-experiments", help="print the experiment kinds")

    args = ap.parse_args(argv)

    if args.command == "list-experiments":
        for kind in EXPERIMENT_KINDS:
            print(kind)
        return 0

    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        for line in exc.violations:
            print(f"config error: {line}", file=sys.stderr)
        return 2

    if args.command == "check":
        try:
            grid = make_grid(config.values["grid"]["half_width"],
                             config.values["grid"]["num_points"])
            hyp = check_hypotheses(
                config.cset, grid, config.values["solver"]["t_final"], t_samples=5
            )
        except Exception as exc:  # noqa: BLE001
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(hyp.format_text())
        return 0 if hyp.passed else 1

    return run(
        config,
        args.output_dir,
        seed_override=args.seed,
        allow_hypothesis_violation=args.allow_hypothesis_violation,
        gnuplot=args.gnuplot,
    )


if __name__ == "__main__":
    sys.exit(main())
