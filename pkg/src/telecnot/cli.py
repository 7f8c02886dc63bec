"""Command-line front end.

    telecnot verify [--json]
    telecnot truth-table --shots 10000 --seed 1 --out results/
    telecnot entangle --config run.json
    telecnot sweep --config sweep.json --out results/
    telecnot ledger

Exit codes: 0 success, 1 verification failure, 2 config error, 3 runtime or
numeric error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, optics, protocol
from .noise import (
    IDEAL,
    NoiseParams,
    fidelity_sweep,
    monte_carlo,
    noisy_runner,
    rate_ledger,
)
from .protocol import CorrectionTable, DEFAULT_TABLE
from .qstate import BellKind, DensityMatrix, QubitState, bell_state, random_state
from .tomography import (
    ENTANGLING_INPUT,
    REFERENCE_EXPECTATIONS,
    REFERENCE_FIDELITY,
    TRUTH_INPUTS,
    classify_fidelity,
    pauli_fidelity_operator,
    truth_table,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("verify", "truth-table", "entangle", "sweep", "ledger")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "verify"
    shots: int = 10_000
    seed: int = 0
    out: str | None = None
    json: bool = False
    truncation: int = 8
    n_pairs_max: int = 2
    noise: dict | None = None
    grid: dict = field(
        default_factory=lambda: {"g": [0.0, 0.2, 0.4], "v": [1.0, 0.9, 0.8], "input_error": [0.0, 0.05, 0.1]}
    )

    def validate(self) -> None:
        if self.experiment not in COMMANDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.shots, int) or self.shots < 1:
            raise ConfigError("shots must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not isinstance(self.truncation, int) or self.truncation < 6:
            raise ConfigError("truncation must be an integer >= 6")
        if self.n_pairs_max not in (1, 2):
            raise ConfigError("n_pairs_max must be 1 or 2")
        if self.noise is not None:
            self.noise_params()
        if set(self.grid) != {"g", "v", "input_error"}:
            raise ConfigError("grid needs exactly the keys g, v, input_error")
        for k, vals in self.grid.items():
            if not vals or not all(isinstance(x, (int, float)) for x in vals):
                raise ConfigError(f"grid.{k} must be a non-empty list of numbers")
        if math.prod(len(v) for v in self.grid.values()) > 1000:
            raise ConfigError("grid exceeds 1000 points")

    def noise_params(self) -> NoiseParams:
        if self.noise is None:
            return IDEAL
        known = {f.name for f in dataclasses.fields(NoiseParams)} | {"g", "visibility"}
        unknown = set(self.noise) - known
        if unknown:
            raise ConfigError(f"unknown noise keys {sorted(unknown)}")
        kw = dict(self.noise)
        g = kw.pop("g", None)
        vis = kw.pop("visibility", None)
        if g is not None:
            kw.update(g1=g, g2=g, g3=g)
        if vis is not None:
            kw.update(v_pdbs=vis, v_bsm13=vis, v_bsm25=vis)
        kw.setdefault("n_pairs_max", self.n_pairs_max)
        kw.setdefault("truncation", self.truncation)
        try:
            return NoiseParams(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid noise parameters: {exc}") from None

    def echo(self) -> dict:
        # output location and console format do not affect results
        d = dataclasses.asdict(self)
        d.pop("json")
        d.pop("out")
        return d


def load_config(path: str | None, experiment: str, overrides: dict) -> RunConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    data["experiment"] = experiment
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# serialization


def _num(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _cell(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else format(float(x), ".17g")
    return "" if x is None else str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def envelope(cfg: RunConfig, payload: dict) -> dict:
    # wall-clock time would break byte-identical reruns; honour SOURCE_DATE_EPOCH instead
    stamp = os.environ.get("SOURCE_DATE_EPOCH")
    return {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.experiment,
        "config": cfg.echo(),
        "run": {"seed": cfg.seed, "version": __version__, "timestamp": int(stamp) if stamp else None},
        "payload": payload,
    }


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(cfg: RunConfig, name: str, payload: dict, csv_header=None, csv_rows=None) -> None:
    env = envelope(cfg, payload)
    out = _out_dir(cfg)
    if out is not None:
        (out / f"{name}.json").write_text(dumps(env) + "\n", encoding="utf-8")
        if csv_header is not None:
            write_csv(out / f"{name}.csv", csv_header, csv_rows)
    if cfg.json:
        print(dumps(env))


# ---------------------------------------------------------------------------
# verify


@dataclass
class Check:
    name: str
    ok: bool
    detail: str
    data: dict = field(default_factory=dict)


def run_checks(table: CorrectionTable = DEFAULT_TABLE, seed: int = 0) -> list[Check]:
    checks = []
    rng = np.random.default_rng(seed)
    inputs = [random_state(2, rng) for _ in range(3)] + [QubitState.from_label(l) for l in TRUTH_INPUTS]
    bad: dict[str, float] = {}
    overlaps = []
    for inp in inputs:
        rep = protocol.verify_decomposition(inp, table)
        overlaps.append([b.overlap for b in rep.branches])
        for b in rep.failures:
            bad[f"{b.k13}/{b.k25}"] = min(bad.get(f"{b.k13}/{b.k25}", 1.0), b.overlap)
    n_ok = 16 - len(bad)
    detail = f"{n_ok}/16 branch overlaps = 1"
    if bad:
        detail += "; failing branches: " + ", ".join(f"{k} (overlap {v:.6f})" for k, v in bad.items())
    checks.append(Check("decomposition", not bad, detail, {"min_overlap_per_input": [min(o) for o in overlaps]}))

    chi_c = protocol.build_chi_circuit()
    chi_o, p = protocol.build_chi_optical()
    ov = abs(np.vdot(chi_c.amps, chi_o.amps)) ** 2
    checks.append(Check(
        "chi_cross_construction", abs(ov - 1) < 1e-10 and abs(p - 1 / 9) < 1e-12,
        f"|<chi_circuit|chi_optical>|^2 = {ov:.15f}, success = {p:.15f}",
        {"overlap": ov, "success_prob": p},
    ))

    pre = optics.apply_beamsplitter(
        optics.tensor_optical(optics.pair_operator_power(("3", "4"), 1), optics.pair_operator_power(("5", "6"), 1)),
        ("4", "6"), optics.PDBS, ("4'", "6'"),
    )
    _, post = optics.postselect(pre, ["3", "4'", "5", "6'"])
    q = optics.to_qubit_state(
        optics.OpticalState(pre.modes, {k: v for k, v in pre.terms.items() if k in post.terms}, pre.n_max),
        ["3", "4'", "5", "6'"],
    )
    got = np.array([q.amps[i] for i in (0b0000, 0b0011, 0b1100, 0b1111)]) * 2
    want = np.array([1, 1 / np.sqrt(3), 1 / np.sqrt(3), -1 / 3])
    phase = got[0] / abs(got[0])
    err = float(np.max(np.abs(got / phase - want)))
    checks.append(Check("pdbs_coefficients", err < 1e-12, f"max deviation {err:.2e}", {"coefficients": [float(x.real) for x in got / phase]}))

    phi = bell_state(BellKind.PHI_PLUS).amps
    err = float(np.max(np.abs(pauli_fidelity_operator() - np.outer(phi, phi.conj()))))
    checks.append(Check("fidelity_operator_identity", err < 1e-14, f"max deviation {err:.2e}"))

    bsm_ok, rows = True, {}
    for kind in BellKind:
        st = optics.from_qubit_state(bell_state(kind), ["a", "b"])
        res = {o.coincidence: p for o, p, _ in protocol.bsm_optical(st, ("a", "b"))}
        rows[str(kind)] = res
        if kind is BellKind.PHI_PLUS:
            bsm_ok &= abs(res["++"] + res["--"] - 1) < 1e-10
        elif kind is BellKind.PHI_MINUS:
            bsm_ok &= abs(res["+-"] + res["-+"] - 1) < 1e-10
        else:
            bsm_ok &= abs(res["discard"] - 1) < 1e-10
    checks.append(Check("bsm_patterns", bool(bsm_ok), "Phi+ -> ++/--, Phi- -> +-/-+, Psi -> no coincidence", rows))

    led = rate_ledger()
    ok = all(abs(a - b) < 1e-12 for a, b in [(led.chi, 1 / 9), (led.bsm, 1 / 4), (led.polarizer, 1 / 2), (led.total, 1 / 72), (led.pipeline_total, 1 / 72)])
    checks.append(Check("rate_ledger", ok, f"total {led.total:.15f} (1/72 = {1 / 72:.15f})", led.as_dict()))
    return checks


def cmd_verify(cfg: RunConfig, table: CorrectionTable = DEFAULT_TABLE) -> int:
    checks = run_checks(table, cfg.seed)
    payload = {"checks": [dataclasses.asdict(c) for c in checks], "ok": all(c.ok for c in checks)}
    if not cfg.json:
        for c in checks:
            print(f"[{'PASS' if c.ok else 'FAIL'}] {c.name}: {c.detail}")
    _emit(cfg, "verify", payload)
    failed = [c.name for c in checks if not c.ok]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiments


def _runner(cfg: RunConfig) -> Callable[[QubitState], DensityMatrix]:
    if cfg.noise is None:
        return protocol.detected_output
    return noisy_runner(cfg.noise_params())


def cmd_truth_table(cfg: RunConfig) -> int:
    res = truth_table(_runner(cfg), cfg.shots, cfg.seed)
    header = ["input", *TRUTH_INPUTS, "fidelity", "stderr"]
    rows = [
        [lbl, *map(int, res.counts[i]), float(res.fidelities[i]), float(res.stderrs[i])]
        for i, lbl in enumerate(TRUTH_INPUTS)
    ]
    payload = {
        "columns": list(TRUTH_INPUTS),
        "counts": res.counts.tolist(),
        "fidelities": dict(zip(TRUTH_INPUTS, map(float, res.fidelities))),
        "stderrs": dict(zip(TRUTH_INPUTS, map(float, res.stderrs))),
        "average": res.average,
        "stderr": res.stderr,
        "stderr_pooled": res.stderr_pooled,
        "noise": None if cfg.noise is None else dataclasses.asdict(cfg.noise_params()),
    }
    if not cfg.json:
        print("input  " + "  ".join(f"{c:>7}" for c in TRUTH_INPUTS) + "  fidelity")
        for r in rows:
            print(f"{r[0]:<6} " + "  ".join(f"{c:>7d}" for c in r[1:5]) + f"  {r[5]:.4f} ± {r[6]:.4f}")
        print(f"average fidelity {res.average:.4f} ± {res.stderr:.4f}")
    _emit(cfg, "truth_table", payload, header, rows)
    return EXIT_OK


_OUTCOMES = {"XX": ("++", "+-", "-+", "--"), "YY": ("LL", "LR", "RL", "RR"), "ZZ": ("HH", "HV", "VH", "VV")}


def cmd_entangle(cfg: RunConfig) -> int:
    params = cfg.noise_params()
    inp = QubitState.from_label(ENTANGLING_INPUT)
    res = monte_carlo(params, inp, cfg.shots, cfg.seed, settings=("ZZ", "XX", "YY"))
    rep = res.fidelity_report
    header = ["setting", "o00", "o01", "o10", "o11", "expectation", "stderr"]
    sig = {"XX": (rep.exx, rep.sxx), "YY": (rep.eyy, rep.syy), "ZZ": (rep.ezz, rep.szz)}
    rows = [[s, *map(int, res.setting_counts[s]), *sig[s]] for s in ("ZZ", "XX", "YY")]
    bars = {
        s: dict(zip(_OUTCOMES[s], (res.setting_counts[s] / res.setting_counts[s].sum()).tolist()))
        for s in ("ZZ", "XX", "YY")
    }
    ref_ent, ref_est = classify_fidelity(REFERENCE_FIDELITY)
    payload = {
        "input": ENTANGLING_INPUT,
        "report": rep.as_dict(),
        "bars": bars,
        "counts": {s: res.setting_counts[s].tolist() for s in ("ZZ", "XX", "YY")},
        "reference": {
            "exx": REFERENCE_EXPECTATIONS["XX"], "eyy": REFERENCE_EXPECTATIONS["YY"],
            "ezz": REFERENCE_EXPECTATIONS["ZZ"], "fidelity": REFERENCE_FIDELITY,
            "entangled": ref_ent, "beats_estimation_limit": ref_est,
        },
        "noise": None if cfg.noise is None else dataclasses.asdict(params),
    }
    if not cfg.json:
        for s, e, sd in (("XX", rep.exx, rep.sxx), ("YY", rep.eyy, rep.syy), ("ZZ", rep.ezz, rep.szz)):
            print(f"<{s}> = {e:+.4f} ± {sd:.4f}")
        print(f"F = {rep.fidelity:.4f} ± {rep.stderr:.4f}  entangled={rep.entangled}  "
              f"beats_estimation_limit={rep.beats_estimation_limit}")
    _emit(cfg, "entangle", payload, header, rows)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    table = fidelity_sweep(
        cfg.grid["g"], cfg.grid["v"], cfg.grid["input_error"], cfg.n_pairs_max, cfg.truncation
    )
    header = ["g", "v", "input_error", "F_truth", "F_entangle", "rate_factor", "error"]
    rows = [[r.g, r.v, r.input_error, r.f_truth, r.f_entangle, r.rate_factor, r.error] for r in table.rows]
    led = rate_ledger()
    payload = {
        "rows": [dict(zip(header, r)) for r in rows],
        "monotone_in_g": table.monotone_in_g,
        "monotone_in_v": table.monotone_in_v,
        "truth_ge_entangle": table.truth_ge_entangle,
        "ledger": led.as_dict(),
    }
    if not cfg.json:
        for r in table.rows:
            msg = r.error or f"F_truth={r.f_truth:.4f} F_entangle={r.f_entangle:.4f}"
            print(f"g={r.g:<5} v={r.v:<5} e={r.input_error:<5} {msg}")
        print(f"monotone in g: {table.monotone_in_g}; in v: {table.monotone_in_v}; "
              f"truth >= entangle: {table.truth_ge_entangle}")
    _emit(cfg, "sweep", payload, header, rows)
    out = _out_dir(cfg)
    if out is not None:
        (out / "sweep_ledger.json").write_text(dumps(envelope(cfg, {"ledger": led.as_dict()})) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ledger(cfg: RunConfig) -> int:
    led = rate_ledger()
    rows = [[k, v] for k, v in led.as_dict().items()]
    if not cfg.json:
        for k, v in rows:
            print(f"{k:<15} {v:.15f}")
    _emit(cfg, "ledger", led.as_dict(), ["factor", "value"], rows)
    return EXIT_OK


HANDLERS = {
    "verify": cmd_verify,
    "truth-table": cmd_truth_table,
    "entangle": cmd_entangle,
    "sweep": cmd_sweep,
    "ledger": cmd_ledger,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telecnot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--shots", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--json", action="store_true", default=None)
        p.add_argument("--truncation", type=int, metavar="N")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"shots": args.shots, "seed": args.seed, "out": args.out, "json": args.json, "truncation": args.truncation}
    try:
        cfg = load_config(args.config, args.command, overrides)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[args.command](cfg)
    except OSError as exc:
        print(f"I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
