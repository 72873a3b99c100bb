"""fockport command line: teleport, sweep-gain, classical-bound, reproduce.

Exit codes: 0 success, 1 acceptance failure, 2 usage/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from .channel import TeleportParams
from .fock import FockError
from .metrics import (
    ClassicalStrategy,
    classical_mc_fidelity,
    classical_threshold,
    optimize_classical_strategy,
    sweep_csv,
    sweep_gain,
    teleport_report,
)
from .qubit import NAMED_QUBITS, DualRailQubit, InputMixture, decompose_fractions
from . import reproduce as repro

log = logging.getLogger("fockport")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


DEFAULTS = {
    "teleport": {"qubit": "psi1", "eta": 0.69, "g": 0.79, "r": 1.01, "l": 0.25, "cutoff": 12},
    "sweep-gain": {"qubit": "psi1", "eta": 0.69, "r": [0.71, 1.01, 1.56], "l": 0.0,
                   "gains": [0.5, 0.63, 0.79, 1.0], "cutoff": 12},
    "classical-bound": {"eta": [0.693, 1.0], "mc_trials": 100000, "qubit": "psi1"},
    "reproduce": {"cutoff": 12, "mc_trials": 1000000, "l_override": None},
}


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(command: str, path: Optional[str], seed: Optional[int]) -> dict:
    config = dict(DEFAULTS[command])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(user) - set(config) - {"seed", "alpha", "beta"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        config.update(user)
    config["seed"] = int(seed if seed is not None else config.get("seed", 0))
    if not 0 <= config["seed"] < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return config


def _qubit(config: dict) -> DualRailQubit:
    if "alpha" in config or "beta" in config:
        try:
            return DualRailQubit.normalized(complex(*config["alpha"]), complex(*config["beta"]))
        except (KeyError, TypeError) as exc:
            raise UsageError("alpha and beta must both be given as [re, im]") from exc
    name = config["qubit"]
    if name not in NAMED_QUBITS:
        raise UsageError(f"qubit must be one of {sorted(NAMED_QUBITS)} or explicit alpha/beta")
    return NAMED_QUBITS[name]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _with_hash_csv(text: str, digest: str, seed: int) -> str:
    return f"# config_hash={digest} seed={seed}\n" + text


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_teleport(config: dict, fmt: str = "json") -> dict[str, str]:
    mix = InputMixture(float(config["eta"]), _qubit(config))
    params = TeleportParams(float(config["g"]), float(config["r"]), float(config["l"]))
    rho_in, rho_out, report = teleport_report(mix, params, int(config["cutoff"]))
    digest = config_hash(config)
    if fmt == "csv":
        buf = io.StringIO()
        row = report.to_dict()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow(row)
        return {"teleport.csv": _with_hash_csv(buf.getvalue(), digest, config["seed"])}
    out = {
        "config": config,
        "config_hash": digest,
        "seed": config["seed"],
        "input": rho_in.to_dict(),
        "output": rho_out.to_dict(),
        "fractions_in": decompose_fractions(rho_in).as_dict(),
        "fractions_out": decompose_fractions(rho_out).as_dict(),
        "report": report.to_dict(),
    }
    return {"teleport.json": _dump(out)}


def cmd_sweep_gain(config: dict, fmt: str = "csv") -> dict[str, str]:
    gains = _as_list(config["gains"])
    if not gains:
        raise UsageError("gain grid is empty")
    mix = InputMixture(float(config["eta"]), _qubit(config))
    sweeps = [sweep_gain(mix, float(r), float(config["l"]), gains, int(config["cutoff"]))
              for r in _as_list(config["r"])]
    digest = config_hash(config)
    if fmt == "csv":
        return {"sweep.csv": _with_hash_csv(sweep_csv(sweeps), digest, config["seed"])}
    rows = [{"r": sw.r, "l": sw.l, **rep.to_dict()} for sw in sweeps for rep in sw.reports]
    best = [{"r": sw.r, "best_gain_state": sw.best_gain_state, "best_gain_qubit": sw.best_gain_qubit}
            for sw in sweeps]
    return {"sweep.json": _dump({"config_hash": digest, "seed": config["seed"], "rows": rows, "best": best})}


def cmd_classical_bound(config: dict, fmt: str = "json") -> dict[str, str]:
    qubit = _qubit(config)
    rows = []
    for k, eta in enumerate(_as_list(config["eta"])):
        eta = float(eta)
        if eta == 0:
            # No qubit component: sending vacuum is perfect.
            rows.append({"eta": 0.0, "x": 0.0, "y": 1.0, "f_star": 1.0, "f_thr": 1.0,
                         "mc_fidelity": None, "mc_se": None})
            continue
        best = optimize_classical_strategy(eta)
        f_mc, se = classical_mc_fidelity(eta, ClassicalStrategy(best.x, best.y), qubit,
                                         int(config["mc_trials"]), seed=[config["seed"], k])
        rows.append({"eta": eta, "x": best.x, "y": best.y, "f_star": best.fidelity,
                     "f_thr": classical_threshold(eta), "mc_fidelity": f_mc, "mc_se": se})
    digest = config_hash(config)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return {"classical_bound.csv": _with_hash_csv(buf.getvalue(), digest, config["seed"])}
    return {"classical_bound.json": _dump({"config_hash": digest, "seed": config["seed"], "rows": rows})}


def cmd_reproduce(config: dict, fmt: str = "json") -> tuple[dict[str, str], bool]:
    """Run every acceptance criterion; returns (files, all_passed)."""
    l_override = config.get("l_override")
    results = repro.run_all(seed=config["seed"], cutoff=int(config["cutoff"]),
                            mc_trials=int(config["mc_trials"]),
                            l_override=None if l_override is None else float(l_override))
    digest = config_hash(config)
    evaluated = [r for r in results if r.passed is not None]
    failures = [r.number for r in evaluated if not r.passed]
    manifest = {
        "config": config,
        "config_hash": digest,
        "seed": config["seed"],
        "criteria": [r.to_dict() for r in results],
        "failures": failures,
        "all_passed": not failures,
    }
    mix = InputMixture(repro.ETA_EXP, NAMED_QUBITS["psi1"])
    table = [sweep_gain(mix, r, l, repro.COARSE_GAINS, int(config["cutoff"]))
             for l in (0.0, 0.25) for r in repro.SQUEEZINGS]
    files = {
        "manifest.json": _dump(manifest),
        "gain_table.csv": _with_hash_csv(sweep_csv(table), digest, config["seed"]),
        "summary.txt": f"# config_hash={digest} seed={config['seed']}\n"
        + "".join(r.line() + "\n" for r in results),
    }
    return files, not failures


def _write(files: dict[str, str], out: Optional[str]) -> None:
    if out is None:
        for name, text in files.items():
            if len(files) > 1:
                sys.stdout.write(f"== {name}\n")
            sys.stdout.write(text)
        return
    outdir = Path(out)
    for name, text in files.items():  # written in a fixed order, single-threaded
        (outdir / name).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockport", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "teleport": ("teleport one dual-rail input and report fidelities", "json"),
        "sweep-gain": ("fidelities over a grid of feedforward gains", "csv"),
        "classical-bound": ("best classical strategy per input qubit weight", "json"),
        "reproduce": ("run all acceptance criteria and write a manifest", "json"),
    }
    for name, (help_text, default_fmt) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file overriding the command defaults")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (default from config, else 0)")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=default_fmt)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("threads: %s", os.environ.get("FOCKPORT_THREADS", "1"))
    passed = True
    if args.out is not None:
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"fockport: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        config = load_config(args.command, args.config, args.seed)
        if args.command == "teleport":
            files = cmd_teleport(config, args.format)
        elif args.command == "sweep-gain":
            files = cmd_sweep_gain(config, args.format)
        elif args.command == "classical-bound":
            files = cmd_classical_bound(config, args.format)
        else:
            files, passed = cmd_reproduce(config, args.format)
    except (UsageError, FockError, KeyError, TypeError, ValueError) as exc:
        print(f"fockport: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fockport: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        _write(files, args.out)
    except OSError as exc:
        print(f"fockport: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
