"""Run configuration, orchestration and the ``qls-ground`` command line.

A configuration is line-oriented ``key=value`` text.  Everything after a
``#`` is a comment, and blank lines are ignored.  Recognised keys::

    dim alpha beta L M boundary
    A.kind A.base A.floor A.terms A.periods      (same for B)
    solve.max_iters solve.grad_tol solve.step_init solve.recenter_every solve.positivity
    seed emit_fields validate_potentials

``A.terms`` is a semicolon-separated list of ``amplitude,axis,freq``
triples and ``A.periods`` a comma-separated list of periods.  Solve keys,
``seed``, ``emit_fields`` and ``validate_potentials`` may be omitted.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import BracketError, ConfigError, NoMaximizerError, QLSError, SolveError
from .fiber import find_fiber_max
from .functionals import ProblemSpec
from .grid import GridSpec, StatePair
from .io import read_field_binary, write_field_binary, write_field_csv
from .potentials import CosineTerm, PotentialSpec, validate
from .solver import SolveOptions, SolveReport, initial_state, minimize_on_manifold, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2

PROBLEM_KEYS = ("dim", "alpha", "beta", "L", "M", "boundary")
POTENTIAL_FIELDS = ("kind", "base", "floor", "terms", "periods")
SOLVE_KEYS = ("max_iters", "grad_tol", "step_init", "recenter_every", "positivity")
TOP_KEYS = ("seed", "emit_fields", "validate_potentials")
KNOWN_KEYS = (
    PROBLEM_KEYS
    + tuple(f"{w}.{f}" for w in "AB" for f in POTENTIAL_FIELDS)
    + tuple(f"solve.{k}" for k in SOLVE_KEYS)
    + TOP_KEYS
)
OPTIONAL_KEYS = {"A.terms", "A.periods", "B.terms", "B.periods"} | {f"solve.{k}" for k in SOLVE_KEYS} | set(TOP_KEYS)


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    solve: SolveOptions = field(default_factory=SolveOptions)
    outputs: str = "qls_output"
    emit_fields: bool = False
    validate_potentials: bool = False

    @property
    def seed(self) -> int:
        return self.solve.seed


# ---------------------------------------------------------------- parsing ----


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _float(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {text!r}")
    return value


def _bool(key, text):
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {text!r}")


def _terms(key, text):
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = [x.strip() for x in chunk.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"{key}: each term needs amplitude,axis,freq, got {chunk!r}")
        try:
            out.append(CosineTerm(_float(key, parts[0]), _int(key, parts[1]), _int(key, parts[2])))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return tuple(out)


def _periods(key, text):
    vals = tuple(_float(key, x.strip()) for x in text.split(",") if x.strip())
    return vals or None


def _split_lines(text: str) -> dict:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        entries[key] = value
    return entries


def _potential(prefix: str, entries: dict) -> PotentialSpec:
    k = lambda f: f"{prefix}.{f}"  # noqa: E731
    terms = _terms(k("terms"), entries[k("terms")]) if k("terms") in entries else ()
    periods = _periods(k("periods"), entries[k("periods")]) if k("periods") in entries else None
    try:
        return PotentialSpec(
            entries[k("kind")].strip(),
            _float(k("base"), entries[k("base")]),
            _float(k("floor"), entries[k("floor")]),
            terms,
            periods,
        )
    except ValueError as exc:
        raise ConfigError(f"potential {prefix}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration; raises :class:`ConfigError`."""
    entries = _split_lines(text)
    missing = [key for key in KNOWN_KEYS if key not in OPTIONAL_KEYS and key not in entries]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    try:
        grid = GridSpec(
            _int("dim", entries["dim"]),
            _float("L", entries["L"]),
            _int("M", entries["M"]),
            entries["boundary"].strip(),
        )
        problem = ProblemSpec(
            grid.dim,
            _float("alpha", entries["alpha"]),
            _float("beta", entries["beta"]),
            _potential("A", entries),
            _potential("B", entries),
            grid,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    defaults = SolveOptions()
    try:
        opts = SolveOptions(
            max_iters=_int("solve.max_iters", entries["solve.max_iters"]) if "solve.max_iters" in entries else defaults.max_iters,
            grad_tol=_float("solve.grad_tol", entries["solve.grad_tol"]) if "solve.grad_tol" in entries else defaults.grad_tol,
            step_init=_float("solve.step_init", entries["solve.step_init"]) if "solve.step_init" in entries else defaults.step_init,
            recenter_every=_int("solve.recenter_every", entries["solve.recenter_every"])
            if "solve.recenter_every" in entries
            else defaults.recenter_every,
            positivity_projection=_bool("solve.positivity", entries["solve.positivity"])
            if "solve.positivity" in entries
            else defaults.positivity_projection,
            seed=_int("seed", entries["seed"]) if "seed" in entries else defaults.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        problem=problem,
        solve=opts,
        emit_fields=_bool("emit_fields", entries["emit_fields"]) if "emit_fields" in entries else False,
        validate_potentials=_bool("validate_potentials", entries["validate_potentials"])
        if "validate_potentials" in entries
        else False,
    )


def _emit_potential(prefix: str, pot: PotentialSpec) -> list[str]:
    lines = [f"{prefix}.kind={pot.kind}", f"{prefix}.base={pot.base!r}", f"{prefix}.floor={pot.floor!r}"]
    if pot.terms:
        lines.append(f"{prefix}.terms=" + ";".join(f"{t.amplitude!r},{t.axis},{t.freq}" for t in pot.terms))
    if pot.periods is not None:
        lines.append(f"{prefix}.periods=" + ",".join(repr(x) for x in pot.periods))
    return lines


def emit_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c`` up to ``outputs``."""
    p, g, o = cfg.problem, cfg.problem.grid, cfg.solve
    lines = [
        f"dim={p.dim}",
        f"alpha={p.alpha!r}",
        f"beta={p.beta!r}",
        f"L={g.half_extent!r}",
        f"M={g.points_per_dim}",
        f"boundary={g.boundary}",
        *_emit_potential("A", p.potential_A),
        *_emit_potential("B", p.potential_B),
        f"solve.max_iters={o.max_iters}",
        f"solve.grad_tol={o.grad_tol!r}",
        f"solve.step_init={o.step_init!r}",
        f"solve.recenter_every={o.recenter_every}",
        f"solve.positivity={'true' if o.positivity_projection else 'false'}",
        f"seed={o.seed}",
        f"emit_fields={'true' if cfg.emit_fields else 'false'}",
        f"validate_potentials={'true' if cfg.validate_potentials else 'false'}",
    ]
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- run ----


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, list):
        return [_finite_or_none(y) for y in x]
    return x


def _report_payload(report: Optional[SolveReport], error: Optional[str] = None, **extra) -> dict:
    d = {k: _finite_or_none(v) for k, v in report.to_dict().items()} if report is not None else {}
    if error is not None:
        d["error"] = error
    d.update(extra)
    return d


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _validation_payload(cfg: RunConfig) -> dict:
    out = {}
    for name, pot in (("A", cfg.problem.potential_A), ("B", cfg.problem.potential_B)):
        rep = validate(pot, cfg.problem)
        out[name] = {
            "ok": rep.ok,
            "failed": rep.failed_checks(),
            "margins": rep.margins,
            "witnesses": {k: list(v) for k, v in rep.witnesses.items()},
        }
    return out


def run(cfg: RunConfig, log=sys.stderr) -> int:
    """Solve one configuration and write its artifacts; returns the exit status."""
    out = Path(cfg.outputs)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(emit_config(cfg), encoding="utf-8")
    except OSError as exc:
        print(f"cannot write to output directory {out}: {exc}", file=log)
        return EXIT_CONFIG
    report_path = out / "report.json"
    try:
        if cfg.validate_potentials:
            checks = _validation_payload(cfg)
            failed = {k: v["failed"] for k, v in checks.items() if not v["ok"]}
            if failed:
                msg = "potential validation failed: " + "; ".join(f"{k}: {', '.join(v)}" for k, v in failed.items())
                _write_json(report_path, _report_payload(None, msg, validation=checks))
                print(msg, file=log)
                return EXIT_CONFIG
        init = initial_state(cfg.problem, cfg.seed)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                state, report = minimize_on_manifold(cfg.problem, init, cfg.solve)
        except SolveError as exc:
            report = exc.report or SolveReport()
            _write_json(report_path, _report_payload(report, f"{type(exc).__name__}: {exc}"))
            write_trace_csv(report, out / "trace.csv")
            print(f"solve failed: {exc}", file=log)
            return EXIT_NOT_CONVERGED
        for w in caught:
            print(f"warning: {w.message}", file=log)
        _write_json(report_path, _report_payload(report))
        write_trace_csv(report, out / "trace.csv")
        if cfg.emit_fields:
            for name, f in (("u", state.u), ("v", state.v)):
                write_field_csv(f, out / f"{name}.csv")
                write_field_binary(f, out / f"{name}.bin")
    except ConfigError as exc:
        _safe_error(report_path, f"ConfigError: {exc}", log)
        return EXIT_CONFIG
    except OSError as exc:
        _safe_error(report_path, f"filesystem error: {exc}", log)
        return EXIT_CONFIG
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _safe_error(path: Path, msg: str, log) -> None:
    print(msg, file=log)
    try:
        _write_json(path, {"error": msg})
    except OSError:
        pass


# -------------------------------------------------------------------- CLI ----


def _load(path: str) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _cmd_solve(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, solve=replace(cfg.solve, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, outputs=args.out)
    return run(cfg)


def _cmd_validate(args) -> int:
    cfg = _load(args.config)
    checks = _validation_payload(cfg)
    print(json.dumps(checks, indent=2))
    return EXIT_OK if all(v["ok"] for v in checks.values()) else EXIT_CONFIG


def _cmd_fiber(args) -> int:
    cfg = _load(args.config)
    names = [x.strip() for x in args.state.split(",")]
    if len(names) != 2:
        raise ConfigError("--state takes two comma-separated binary files: u.bin,v.bin")
    g = cfg.problem.grid
    s = StatePair(read_field_binary(names[0], g), read_field_binary(names[1], g))
    try:
        res = find_fiber_max(s, cfg.problem)
    except (NoMaximizerError, BracketError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(res.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qls-ground", description="Ground states of a coupled quasilinear system.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="minimise the energy on the constraint manifold")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", default=None, help="output directory (default: qls_output)")
    p_solve.add_argument("--seed", type=int, default=None, help="override the initialiser seed")
    p_solve.set_defaults(func=_cmd_solve)
    p_val = sub.add_parser("validate", help="check the structural conditions on both potentials")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)
    p_fib = sub.add_parser("fiber", help="fiber maximiser of a stored state")
    p_fib.add_argument("config")
    p_fib.add_argument("--state", required=True, help="u.bin,v.bin")
    p_fib.set_defaults(func=_cmd_fiber)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, QLSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
