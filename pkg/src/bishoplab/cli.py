"""Command-line entry point: ``python -m bishoplab <command> [--key value ...]``.

Settings come from built-in defaults, then an optional flat ``key = value``
file given with ``--config``, then command-line flags. Every run writes a
JSON document with ``schema_version``, the full resolved configuration and
the result, either to ``--out`` (with a one-line summary on stdout) or to
stdout. Exit codes: 0 success, 2 invalid configuration, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import BishopLabError, ConfigError, NotErgodic

SCHEMA_VERSION = 1


def _int(s) -> int:
    if isinstance(s, int):
        return s
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


def _ints(s) -> list[int]:
    if isinstance(s, (list, tuple)):
        return [_int(v) for v in s]
    return [_int(v) for v in str(s).split(",") if v.strip()]


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


@dataclass(frozen=True)
class Key:
    conv: Callable
    default: Any
    help: str = ""


COMMON = {
    "precision_bits": Key(_int, 128, "fixed-point bits for orbits"),
    "seed": Key(_int, 0, "random seed"),
}

COMMANDS: dict[str, dict[str, Key]] = {
    "discrepancy": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "N": Key(_ints, [5], "orbit lengths, comma separated"),
        "x0": Key(float, 0.0, "starting point"),
        "direction": Key(str, "forward", "forward or backward"),
        "csv": Key(str, "", "optional CSV path for (N, D_N, bound)"),
        "m": Key(_int, 0, "Erdos-Turan cut-off for the CSV bound column; 0 picks max(1, sqrt N)"),
    },
    "type-check": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "psi": Key(str, "constant:3", "constant:c, power:k or stretched-exp:eps"),
        "Q": Key(_int, 10**4, "largest denominator"),
        "method": Key(str, "scan", "scan or convergents"),
    },
    "liouville-gen": {
        "base": Key(_int, 10, "base b"),
        "epsilon": Key(float, 1.0, "epsilon of the growth condition"),
        "n_max": Key(_int, 6, "number of series terms"),
    },
    "spectral-radius": {
        "weight": Key(str, "x", "weight descriptor"),
        "alpha": Key(str, "", "optional angle for a Birkhoff estimate"),
        "N": Key(_int, 10**5, "Birkhoff orbit length"),
        "x0": Key(float, 0.1, "Birkhoff starting point"),
    },
    "bounds-scan": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "weight": Key(str, "e*x", "weight descriptor"),
        "epsilon": Key(float, 1.0, "Beurling weight parameter"),
        "t": Key(float, 0.05, "exceptional-set parameter"),
        "n_list": Key(_ints, [100, 1000, 10000], "powers to scan"),
        "G": Key(_int, 20, "grid points"),
        "direction": Key(str, "both", "forward, backward or both"),
    },
    "exceptional-measure": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "weight": Key(str, "e*x", "weight whose zeros define E_t"),
        "t": Key(float, 0.05, "exceptional-set parameter"),
        "n_max": Key(_int, 1000, "depth of the backward orbit check"),
        "samples": Key(_int, 10_000, "Monte-Carlo samples"),
    },
    "calculus-apply": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "weight": Key(str, "e*x", "weight descriptor"),
        "epsilon": Key(float, 8.0, "Beurling weight parameter"),
        "t": Key(float, 0.05, "exceptional-set parameter"),
        "M": Key(_int, 4096, "truncation of the series"),
        "G": Key(_int, 256, "grid points"),
        "p": Key(float, 2.0, "norm exponent"),
        "f": Key(str, "ind:0.1,0.6", "function expression"),
        "center": Key(float, 0.25, "bump center"),
        "half_width": Key(float, 0.1, "bump half-width"),
        "n_mask": Key(_int, 1000, "depth of E_t membership"),
        "samples_out": Key(_bool, False, "include the grid values in the JSON"),
    },
    "demo-subspace": {
        "alpha": Key(str, "golden", "angle descriptor"),
        "weight": Key(str, "e*x", "weight descriptor"),
        "epsilon": Key(float, 8.0, "Beurling weight parameter"),
        "t": Key(float, 0.05, "exceptional-set parameter"),
        "M": Key(_int, 4096, "truncation of the series"),
        "G": Key(_int, 256, "grid points"),
        "p": Key(float, 2.0, "norm exponent"),
        "phi_center": Key(float, 0.25, "center of phi"),
        "psi_center": Key(float, 0.75, "center of psi"),
        "half_width": Key(float, 0.1, "bump half-width"),
        "shifts": Key(_ints, [1, 2, 3, 4, 5], "commutant samples T^j"),
        "g": Key(str, "ind:0.1,0.6", "seed function of the witness"),
        "u": Key(str, "1+cos:1", "generic test function"),
        "n_mask": Key(_int, 1000, "depth of E_t membership"),
    },
}

ERGODIC = {"bounds-scan", "exceptional-measure", "calculus-apply", "demo-subspace"}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    out: str = ""

    def keys(self) -> dict[str, Key]:
        return {**COMMANDS[self.command], **COMMON}

    @classmethod
    def resolve(cls, command: str, file_values: dict, flags: dict, out: str = "") -> "RunConfig":
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        cfg = cls(command, out=out)
        keys = cfg.keys()
        merged = {k: key.default for k, key in keys.items()}
        for source in (file_values, flags):
            for k, v in source.items():
                if k not in keys:
                    raise ConfigError(f"unknown key {k!r} for {command}")
                try:
                    merged[k] = keys[k].conv(v)
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"bad value for {k}: {e}") from None
        cfg.values = merged
        return cfg

    def to_text(self) -> str:
        lines = [f"command = {self.command}"]
        for k in sorted(self.values):
            v = self.values[k]
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        if self.out:
            lines.append(f"out = {self.out}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, command: str | None = None) -> "RunConfig":
        vals = parse_config_text(text)
        cmd = vals.pop("command", command)
        out = vals.pop("out", "")
        if cmd is None:
            raise ConfigError("no command given")
        return cls.resolve(cmd, vals, {}, out)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use - or _."""
    vals = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        vals[k.replace("-", "_")] = v
    return vals


# -- commands ------------------------------------------------------------------------------

def _rotation(v: dict, ergodic: bool):
    from .orbit import Rotation
    rot = Rotation.of(v["alpha"], v["precision_bits"])
    if ergodic:
        rot.require_ergodic()
    return rot


def _run_discrepancy(v):
    from .discrepancy import PointSequence, discrepancy_fast, kn_bound, write_bound_csv
    rot = _rotation(v, False)
    if v["direction"] not in ("forward", "backward"):
        raise ConfigError("direction must be forward or backward")
    rows, csv_rows = [], []
    for N in v["N"]:
        rep = discrepancy_fast(PointSequence.orbit(rot, v["x0"], N, v["direction"]))
        rows.append(rep.to_dict())
        if v["csv"]:
            m = v["m"] or max(1, int(math.isqrt(N)))
            csv_rows.append((N, rep.D_N, kn_bound(rot.alpha, N, m)))
    if v["csv"]:
        write_bound_csv(v["csv"], csv_rows)
    summary = ", ".join(f"D_{r['N']} = {r['D_N']:.10g}" for r in rows)
    return {"table": rows}, summary


def _run_type_check(v):
    from .diophantine import parse_alpha, type_check
    cert = type_check(parse_alpha(v["alpha"], v["precision_bits"]), v["psi"], v["Q"], v["method"])
    return cert.to_dict(), f"{cert.verdict} up to Q={cert.checked_up_to} (min q<qa> = {cert.min_product:.6g})"


def _run_liouville(v):
    from .diophantine import liouville_generate
    alpha, rep = liouville_generate(v["base"], v["epsilon"], v["n_max"])
    return ({"alpha": alpha.to_dict(), "report": rep.to_dict(), "value": float(alpha.value)},
            f"alpha ~ {float(alpha.value):.12g}, n0 = {rep.n0}")


def _run_spectral(v):
    from .weights import birkhoff_radius_estimate, parse_weight, spectral_radius
    w = parse_weight(v["weight"])
    res = spectral_radius(w).to_dict()
    summary = f"r = {res['r']:.12g}"
    if v["alpha"]:
        rot = _rotation(v, True)
        res["birkhoff"] = {"N": v["N"], "x0": v["x0"],
                           "estimate": birkhoff_radius_estimate(w, rot, v["N"], v["x0"])}
        summary += f", Birkhoff {res['birkhoff']['estimate']:.6g}"
    return res, summary


def _run_bounds(v):
    from .operator import BeurlingWeightFn, backward_bound_scan, forward_bound_scan
    from .weights import parse_weight
    rot = _rotation(v, True)
    w = parse_weight(v["weight"])
    bw = BeurlingWeightFn(v["epsilon"])
    xs = (np.arange(v["G"]) + 0.5) / v["G"]
    if v["direction"] not in ("forward", "backward", "both"):
        raise ConfigError("direction must be forward, backward or both")
    res = {}
    if v["direction"] in ("forward", "both"):
        res["forward"] = [r.to_dict() for r in forward_bound_scan(w, rot, v["n_list"], xs, bw)]
    if v["direction"] in ("backward", "both"):
        res["backward"] = [r.to_dict() for r in backward_bound_scan(w, rot, v["n_list"], v["t"], xs, bw)]
    bad = sum(not r["ok"] for rs in res.values() for r in rs)
    res["violations"] = bad
    return res, f"{bad} violations"


def _run_measure(v):
    from .operator import exceptional_set_measure
    from .weights import parse_weight
    rot = _rotation(v, True)
    zeros = parse_weight(v["weight"]).zeros
    est = exceptional_set_measure(zeros, rot, v["t"], v["n_max"], v["samples"], v["seed"])
    return est.to_dict(), f"|E_t| ~ {est.estimate:.4f} +- {est.sigma:.4f} (bound {est.lower_bound:.4f})"


def _run_calculus(v):
    from .beurling import bump
    from .calculus import OrbitWindow, apply_calculus
    from .operator import BeurlingWeightFn
    from .weights import parse_weight
    rot = _rotation(v, True)
    bw = BeurlingWeightFn(v["epsilon"])
    win = OrbitWindow.build(parse_weight(v["weight"]), rot, bw, v["t"], v["G"], 2 * v["M"] + 8, v["n_mask"])
    res = apply_calculus(bump(v["center"], v["half_width"], bw), win, v["f"], v["M"], v["p"])
    out = res.to_dict()
    if v["samples_out"]:
        out["values"] = res.value.to_dict()
    return out, f"||S_M|| = {out['norm']:.6g}, tail {res.tail_bound:.3g}, rounding {res.rounding_bound:.3g}"


def _run_demo(v):
    from .calculus import DemoConfig, hyperinvariant_demo
    cfg = DemoConfig(v["alpha"], v["weight"], v["epsilon"], v["t"], v["M"], v["G"], v["p"],
                     v["phi_center"], v["psi_center"], v["half_width"], tuple(v["shifts"]), v["g"], v["u"],
                     v["n_mask"], v["precision_bits"])
    _rotation(v, True)
    rep = hyperinvariant_demo(cfg)
    d = rep.to_dict()
    summary = "; ".join(f"{c.name} {'pass' if c.ok else 'FAIL'}" for c in rep.certificates)
    return d, summary


RUNNERS = {
    "discrepancy": _run_discrepancy,
    "type-check": _run_type_check,
    "liouville-gen": _run_liouville,
    "spectral-radius": _run_spectral,
    "bounds-scan": _run_bounds,
    "exceptional-measure": _run_measure,
    "calculus-apply": _run_calculus,
    "demo-subspace": _run_demo,
}


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute a resolved configuration; returns the exit code."""
    stdout = stdout or sys.stdout
    v = cfg.values
    try:
        result, summary = RUNNERS[cfg.command](v)
    except (ConfigError, NotErgodic) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BishopLabError as e:
        print(f"numeric abort [{e.stage or cfg.command}]: {e}", file=sys.stderr)
        return 3
    doc = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "config": v, "result": result}
    text = json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
        print(f"{cfg.command}: {summary}", file=stdout)
    else:
        stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bishoplab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, keys in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--out", help="JSON output path (stdout when omitted)")
        for k, key in {**keys, **COMMON}.items():
            flag = "--" + k.replace("_", "-")
            alias = ["--" + k] if "_" in k else []
            sp.add_argument(flag, *alias, dest=k, default=None, help=f"{key.help} (default {key.default})")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out") and v is not None}
    try:
        file_values = {}
        out = args.out or ""
        if args.config:
            file_values = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
            cmd = file_values.pop("command", args.command)
            if cmd != args.command:
                raise ConfigError(f"config file is for {cmd!r}, not {args.command!r}")
            out = out or file_values.pop("out", "")
            file_values.pop("out", None)
        cfg = RunConfig.resolve(args.command, file_values, flags, out)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
