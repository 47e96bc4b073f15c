"""Command line front end.

    qithermo run <config.json> [--out PATH] [--format json|csv]
    qithermo sweep <check> [--trials N] [--seed S] [--out PATH] [--format json|csv]

Exit status: 0 when no violation was found, 1 when at least one was,
2 when the configuration could not be read.  Reports contain no
timestamps, so equal inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .config import ConfigError, load_config, scenario_from_dict, scenario_to_dict
from .sweeps import CHECKS, sweep
from .thermo.process import TOL_FIRST_LAW, check_inequalities, run_process

EXIT_OK, EXIT_VIOLATION, EXIT_PARSE = 0, 1, 2


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _csv(rows: list) -> str:
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in keys})
    return buf.getvalue()


def run_report(cfg: dict) -> dict:
    """Report for a single-scenario config (raises ConfigError on bad input)."""
    sc = scenario_from_dict(cfg)
    led = run_process(sc)
    rep = check_inequalities(led)
    violations = []
    for name, value, bad in (("new", rep.new, rep.new < -1e-7), ("old", rep.old, rep.old < -1e-7),
                             ("lemma1", rep.lemma1, rep.lemma1 < -1e-7),
                             ("first_law", rep.first_law_residual,
                              rep.first_law_residual > TOL_FIRST_LAW * max(1.0, abs(led.work)))):
        if bad:
            violations.append({"check": name, "value": value, "scenario": scenario_to_dict(sc)})
    summary = led.summary()
    summary["W_ext_over_T_log2"] = led.work / (led.temperature * math.log(2))
    return {
        "tool": "qithermo",
        "tool_version": __version__,
        "scenario": sc.name,
        "seed": sc.meta.get("seed"),
        "ledger": summary,
        "slacks": rep.as_dict(),
        "violations": violations,
    }


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if isinstance(cfg, dict) and "sweep" in cfg:
            block = cfg["sweep"]
            if set(cfg) != {"sweep"} or not isinstance(block, dict) or not set(block) <= {"check", "trials", "seed"} \
                    or block.get("check") not in CHECKS:
                raise ConfigError("sweep block needs 'check' (a known check) and optional 'trials', 'seed'")
            return _emit_sweep(block["check"], int(block.get("trials", 100)), int(block.get("seed", 0)),
                               args.out, args.format)
        report = run_report(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.format == "csv":
        row = {"scenario": report["scenario"]}
        row.update({k: v for k, v in report["ledger"].items() if not isinstance(v, (list, dict))})
        row.update({f"slack_{k}": v for k, v in report["slacks"].items()})
        _write(_csv([_clean(row)]), args.out)
    else:
        _write(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_VIOLATION if report["violations"] else EXIT_OK


def _emit_sweep(check: str, trials: int, seed: int, out, fmt) -> int:
    rep = sweep(check, trials, seed)
    if fmt == "csv":
        _write(_csv([_clean({"trial": t.index, "passed": t.passed, **t.metrics}) for t in rep.trials]), out)
    else:
        _write(json.dumps(_clean(rep.to_dict()), indent=2, sort_keys=True) + "\n", out)
    return EXIT_VIOLATION if rep.violations else EXIT_OK


def _cmd_sweep(args) -> int:
    if args.trials < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_PARSE
    return _emit_sweep(args.check, args.trials, args.seed, args.out, args.format)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qithermo", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"qithermo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file and report ledger and slacks")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="run a randomised property sweep")
    s.add_argument("check", choices=sorted(CHECKS))
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
