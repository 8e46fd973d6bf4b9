"""Command-line driver: ``python -m wqte <command> ...``.

Commands
--------
spectrum   acquire q(n), transform, threshold and write signal/spectrum/peaks
signs      run H and H + s0 and write signed peaks
sweep      repeat ``spectrum`` along one parameter axis and fit the error law
plan       sampling plan for a precision target
resources  full resource estimate

Every option may also come from ``--config file.json`` (keys are the option
names with dashes replaced by underscores); flags override the file.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acquisition import QSignal, SamplingPlan, acquire_signal, format_signal_csv
from .hamiltonian import (
    Hamiltonian,
    HamiltonianFormatError,
    add_offset,
    build_heisenberg_1d,
    build_heisenberg_2d,
    parse_hamiltonian,
)
from .oracle import MAX_DENSE_QUBITS, ReferenceState, diagonalize
from .planner import estimate_resources, plan_absolute, plan_relative
from .spectral import (
    PeakSet,
    Spectrum,
    default_threshold,
    detect_peaks,
    determine_signs,
    dft_amplitudes,
    evaluate_against_oracle,
    fit_inverse,
    fit_quadratic,
    format_spectrum_csv,
    track_peak,
)
from .statevector import NoiseModel, TrotterPlan

RUN_DEFAULTS = {
    "ref": "neel",
    "shots": "exact",
    "backend": "exact",
    "noise": 0.0,
    "peak_method": None,
    "overlap_floor": 5e-4,
    "chunk": 512,
    "out": "wqte-out",
}


class UsageError(Exception):
    """Bad flags, inconsistent configuration or unreadable inputs (exit code 2)."""


@dataclass
class RunConfig:
    H: Hamiltonian
    ref: ReferenceState
    plan: SamplingPlan
    backend: object
    noise: NoiseModel | None
    seed: int | None
    threshold: float | None
    peak_method: str
    overlap_floor: float
    oracle: bool
    chunk: int
    out: Path


def _add_run_options(p: argparse.ArgumentParser):
    model = p.add_argument_group("model (exactly one)")
    model.add_argument("--hamiltonian", metavar="FILE", help="Hamiltonian text file")
    model.add_argument("--heisenberg1d", nargs=3, type=float, metavar=("SITES", "J", "H"))
    model.add_argument("--heisenberg2d", nargs=4, type=float, metavar=("ROWS", "COLS", "J", "H"))
    p.add_argument("--ref", help="'neel' or a basis bitstring (default neel)")
    p.add_argument("--ref-file", help="file of 2^n amplitudes, whitespace separated")
    p.add_argument("--delta", type=float, help="sampling interval")
    p.add_argument("--n", type=int, help="number of samples N")
    p.add_argument("--tmax", type=float, help="total time N*delta (alternative to --n)")
    p.add_argument("--shots", help="shots per point or 'exact' (default exact)")
    p.add_argument("--trajectories", type=int, help="noise trajectories per point")
    p.add_argument("--backend", choices=["exact", "trotter"])
    p.add_argument("--tau", type=float, help="Trotter step (trotter backend)")
    p.add_argument("--noise", type=float, help="Pauli channel gamma (default 0)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, help="override the peak threshold")
    p.add_argument("--peak-method", choices=["runs", "local"],
                   help="default: runs for shot-sampled plans, local for exact")
    p.add_argument("--overlap-floor", type=float)
    p.add_argument("--oracle", action="store_true", default=None,
                   help="score peaks against exact diagonalization")
    p.add_argument("--chunk", type=int, help="time points per batched evolution")
    p.add_argument("--out", help="output directory")


def _add_config(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of option values; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wqte", description="Eigenvalue spectra from the controlled-evolution signal.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="acquire, transform and detect peaks")
    _add_config(p)
    _add_run_options(p)

    p = sub.add_parser("signs", help="signed peaks from H and H + s0")
    _add_config(p)
    _add_run_options(p)
    p.add_argument("--offset", type=float, help="constant offset s0 (> resolution)")

    p = sub.add_parser("sweep", help="one spectrum run per value of an axis")
    _add_config(p)
    _add_run_options(p)
    p.add_argument("--axis", choices=["tau", "tmax", "shots", "gamma"])
    p.add_argument("--values", nargs="+", type=float)

    p = sub.add_parser("plan", help="sampling plan for a precision target")
    _add_config(p)
    p.add_argument("--epsilon", type=float, help="absolute precision")
    p.add_argument("--e0", type=float, help="bound on the largest |E|")
    p.add_argument("--delta-cap", type=float)
    p.add_argument("--rel-err", type=float, help="relative precision for N")
    p.add_argument("--safety-factor", type=float)
    p.add_argument("--out", help="also write the JSON here")

    p = sub.add_parser("resources", help="full resource estimate")
    _add_config(p)
    p.add_argument("--L", type=int, help="system size")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--overlap", type=float, help="reference overlap p")
    p.add_argument("--pauli-terms", type=int)
    p.add_argument("--e0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--shot-budget", type=int)
    p.add_argument("--out", help="also write the JSON here")
    return parser


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        known = set(vars(args))
        unknown = set(k.replace("-", "_") for k in loaded) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    cfg.update({k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")})
    return cfg


def _load_hamiltonian(cfg: dict) -> Hamiltonian:
    sources = [k for k in ("hamiltonian", "heisenberg1d", "heisenberg2d") if cfg.get(k) is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one of --hamiltonian, --heisenberg1d, --heisenberg2d")
    try:
        if sources[0] == "hamiltonian":
            path = Path(cfg["hamiltonian"])
            if not path.is_file():
                raise UsageError(f"Hamiltonian file not found: {path}")
            return parse_hamiltonian(path.read_text())
        if sources[0] == "heisenberg1d":
            sites, J, h = cfg["heisenberg1d"]
            return build_heisenberg_1d(_as_int(sites, "sites"), float(J), float(h))
        rows, cols, J, h = cfg["heisenberg2d"]
        return build_heisenberg_2d(_as_int(rows, "rows"), _as_int(cols, "cols"), float(J), float(h))
    except (HamiltonianFormatError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _as_int(value, name: str) -> int:
    if float(value) != int(value):
        raise UsageError(f"{name} must be an integer, got {value}")
    return int(value)


def _load_reference(cfg: dict, n: int) -> ReferenceState:
    try:
        if cfg.get("ref_file"):
            path = Path(cfg["ref_file"])
            if not path.is_file():
                raise UsageError(f"reference file not found: {path}")
            amps = [complex(ast.literal_eval(tok)) for tok in path.read_text().split()]
            ref = ReferenceState.explicit(amps)
        elif cfg["ref"] == "neel":
            ref = ReferenceState.neel(n)
        else:
            ref = ReferenceState.basis(str(cfg["ref"]))
    except (ValueError, SyntaxError) as exc:
        raise UsageError(f"bad reference state: {exc}") from None
    if ref.n_qubits != n:
        raise UsageError(f"reference has {ref.n_qubits} qubits, Hamiltonian has {n}")
    return ref


def _parse_shots(value):
    if value is None or value == "exact":
        return None
    try:
        shots = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"--shots must be a positive integer or 'exact', got {value!r}") from None
    if shots < 1 or float(value) != shots:
        raise UsageError(f"--shots must be a positive integer or 'exact', got {value!r}")
    return shots


def _make_plan(cfg: dict) -> SamplingPlan:
    delta, n, tmax = cfg.get("delta"), cfg.get("n"), cfg.get("tmax")
    if delta is None:
        raise UsageError("--delta is required")
    if n is None and tmax is None:
        raise UsageError("give --n or --tmax")
    if n is None:
        n = int(round(tmax / delta))
    elif tmax is not None and not math.isclose(n * delta, tmax, rel_tol=1e-9):
        raise UsageError(f"--n {n} and --tmax {tmax} disagree for --delta {delta}")
    try:
        return SamplingPlan(float(delta), int(n), _parse_shots(cfg.get("shots")), cfg.get("trajectories"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_run_config(cfg: dict) -> RunConfig:
    """Validate merged options; raises :class:`UsageError` before anything runs."""
    H = _load_hamiltonian(cfg)
    ref = _load_reference(cfg, H.n_qubits)
    plan = _make_plan(cfg)
    if cfg["backend"] == "trotter":
        if cfg.get("tau") is None:
            raise UsageError("--backend trotter needs --tau")
        try:
            backend = TrotterPlan(float(cfg["tau"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif cfg["backend"] == "exact":
        backend = "exact"
    else:
        raise UsageError(f"unknown backend {cfg['backend']!r}")
    gamma = float(cfg["noise"])
    if not 0 <= gamma <= 1:
        raise UsageError("--noise must lie in [0, 1]")
    noise = NoiseModel(gamma) if gamma > 0 else None
    if noise is not None and plan.shots is None and plan.trajectories is None:
        raise UsageError("a noisy run needs --shots or --trajectories")
    seed = cfg.get("seed")
    if seed is not None and seed < 0:
        raise UsageError("--seed must be non-negative")
    method = cfg.get("peak_method") or ("local" if plan.shots is None else "runs")
    oracle = bool(cfg.get("oracle"))
    if oracle and H.n_qubits > MAX_DENSE_QUBITS:
        raise UsageError(f"--oracle needs at most {MAX_DENSE_QUBITS} qubits")
    return RunConfig(H, ref, plan, backend, noise, seed, cfg.get("threshold"), method,
                     float(cfg["overlap_floor"]), oracle, int(cfg["chunk"]), Path(cfg["out"]))


@dataclass
class RunResult:
    signal: QSignal
    spectrum: Spectrum
    peaks: PeakSet


def run_spectrum(rc: RunConfig, H: Hamiltonian | None = None) -> RunResult:
    H = rc.H if H is None else H
    signal = acquire_signal(H, rc.ref, rc.plan, rc.backend, rc.noise, rc.seed, rc.chunk)
    spectrum = dft_amplitudes(signal)
    thr = rc.threshold if rc.threshold is not None else default_threshold(rc.plan)
    return RunResult(signal, spectrum, detect_peaks(spectrum, thr, rc.peak_method))


def peaks_document(res: RunResult) -> dict:
    m = res.signal.meta
    plan = res.signal.plan
    spec = res.spectrum
    thr = res.peaks.threshold
    xs = spec.frequencies
    bins = [{"k": int(k), "x": float(xs[k]), "a": float(spec.amplitudes[k])}
            for k in np.flatnonzero(spec.amplitudes >= thr)]
    peaks = [{"k": p.k, "x": p.x, "a": p.amplitude, "abs_energy": p.energy_abs, "sign": p.sign}
             for p in res.peaks.all_peaks()]
    return {
        "meta": {
            "delta": plan.delta,
            "n": plan.n_samples,
            "shots": plan.shots,
            "gamma": m["gamma"],
            "tau": m["tau"],
            "seed": m["seed"],
            "gate_count": m["gate_count"],
            "backend": m["backend"],
            "trajectories": plan.trajectories,
            "resolution": plan.resolution,
            "peak_method": None,
        },
        "threshold": thr,
        "bins": bins,
        "peaks": peaks,
    }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write_run(rc: RunConfig, res: RunResult, out: Path, H: Hamiltonian | None = None):
    out.mkdir(parents=True, exist_ok=True)
    (out / "signal.csv").write_text(format_signal_csv(res.signal))
    (out / "spectrum.csv").write_text(format_spectrum_csv(res.spectrum))
    doc = peaks_document(res)
    doc["meta"]["peak_method"] = rc.peak_method
    (out / "peaks.json").write_text(_dump(doc))
    if rc.oracle:
        report = evaluate_against_oracle(res.peaks, diagonalize(H or rc.H, rc.ref), rc.overlap_floor)
        (out / "oracle.json").write_text(_dump(report.as_dict()))


def cmd_spectrum(cfg: dict) -> int:
    rc = build_run_config(cfg)
    res = run_spectrum(rc)
    _write_run(rc, res, rc.out)
    print(f"{len(res.peaks.all_peaks())} peaks -> {rc.out / 'peaks.json'}")
    return 0


def cmd_signs(cfg: dict) -> int:
    rc = build_run_config(cfg)
    s0 = cfg.get("offset")
    if s0 is None:
        raise UsageError("signs needs --offset")
    delta = rc.plan.resolution
    if not s0 > delta:
        raise UsageError(f"--offset {s0} must exceed the resolution {delta:.6g}")
    base = run_spectrum(rc)
    shifted_H = add_offset(rc.H, s0)
    shifted = run_spectrum(rc, shifted_H)
    signed = determine_signs(base.peaks, shifted.peaks, s0, delta)
    _write_run(rc, base, rc.out / "base")
    _write_run(rc, shifted, rc.out / "shifted", shifted_H)
    doc = peaks_document(RunResult(base.signal, base.spectrum, signed))
    doc["meta"]["peak_method"] = rc.peak_method
    doc["meta"]["offset"] = s0
    (rc.out / "peaks.json").write_text(_dump(doc))
    listed = " ".join(f"{p.sign}{p.energy_abs:.6g}" for p in signed.all_peaks())
    print(f"signed |E|: {listed} -> {rc.out / 'peaks.json'}")
    return 0


def _sweep_value(cfg: dict, axis: str, value: float) -> dict:
    c = dict(cfg)
    if axis == "tau":
        c["backend"], c["tau"] = "trotter", value
    elif axis == "tmax":
        c["tmax"], c["n"] = value, None
    elif axis == "shots":
        c["shots"] = _as_int(value, "shots")
    else:
        c["noise"] = value
    return c


def cmd_sweep(cfg: dict) -> int:
    axis, values = cfg.get("axis"), cfg.get("values")
    if axis is None:
        raise UsageError("sweep needs --axis")
    if not values:
        raise UsageError("sweep needs a non-empty --values list")
    configs = [build_run_config(_sweep_value(cfg, axis, v)) for v in values]
    # a tau sweep sets the Trotter step per run, so its base is the exact backend
    base_rc = build_run_config(dict(cfg, backend="exact") if axis == "tau" else cfg)
    dense = base_rc.H.n_qubits <= MAX_DENSE_QUBITS
    decomp = diagonalize(base_rc.H, base_rc.ref) if dense else None

    anchor = None
    if axis == "tau":
        ref_run = run_spectrum(base_rc)
        anchor = max(ref_run.peaks, key=lambda p: (p.amplitude, -p.k), default=None)
    order = np.argsort(values, kind="stable")
    runs = {}
    for i in order:
        rc = configs[i]
        runs[i] = run_spectrum(rc)
        _write_run(rc, runs[i], base_rc.out / f"{axis}_{values[i]!r}")
    shifts = {}
    if anchor is not None:
        tracked = track_peak([runs[i].peaks for i in order], anchor)
        for i, p in zip(order, tracked):
            shifts[i] = abs(p.energy_abs - anchor.energy_abs) if p is not None else math.nan

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "resolution", "n_peaks", "n_states", "n_matched",
                "max_abs_error", "mean_abs_error", "tracked_shift"])
    max_err = []
    for i, v in enumerate(values):
        res = runs[i]
        row = [repr(float(v)), repr(configs[i].plan.resolution), len(res.peaks.all_peaks())]
        if decomp is not None:
            rep = evaluate_against_oracle(res.peaks, decomp, configs[i].overlap_floor)
            row += [len(rep.states), len(rep.matched), repr(rep.max_abs_error), repr(rep.mean_abs_error)]
            max_err.append(rep.max_abs_error)
        else:
            row += ["", "", "", ""]
        row.append(repr(shifts[i]) if i in shifts else "")
        w.writerow(row)
    base_rc.out.mkdir(parents=True, exist_ok=True)
    (base_rc.out / "summary.csv").write_text(buf.getvalue())

    fit = None
    if axis == "tmax" and max_err:
        f = fit_inverse(values, max_err)
        fit = {"model": "A/x", "target": "max_abs_error", "coefficient": f.coefficient,
               "coefficient_over_2pi": f.coefficient / (2 * math.pi), "r_squared": f.r_squared}
    elif axis == "tau" and shifts:
        ys = [shifts[i] for i in range(len(values))]
        f = fit_quadratic(values, ys)
        fit = {"model": "a*x^2", "target": "tracked_shift", "coefficient": f.coefficient,
               "r_squared": f.r_squared}
    (base_rc.out / "fit.json").write_text(_dump({"axis": axis, "values": list(values), "fit": fit}))
    print(f"{len(values)} runs -> {base_rc.out / 'summary.csv'}")
    return 0


def _emit(doc: dict, out) -> None:
    text = _dump(doc)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_plan(cfg: dict) -> int:
    doc = {}
    if cfg.get("epsilon") is not None or cfg.get("e0") is not None:
        if cfg.get("epsilon") is None or cfg.get("e0") is None:
            raise UsageError("an absolute plan needs both --epsilon and --e0")
        try:
            plan = plan_absolute(cfg["epsilon"], cfg["e0"], cfg.get("delta_cap"))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        doc.update({"epsilon": cfg["epsilon"], "E0_bound": cfg["e0"],
                    "t_max": 2 * math.pi / cfg["epsilon"], "delta_max": math.pi / cfg["e0"],
                    "delta": plan.delta, "n_samples": plan.n_samples,
                    "resolution": plan.resolution})
    if cfg.get("rel_err") is not None:
        try:
            doc["n_relative"] = plan_relative(cfg["rel_err"], cfg.get("safety_factor") or 1.0)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        doc["rel_err"] = cfg["rel_err"]
    if not doc:
        raise UsageError("plan needs --epsilon/--e0 or --rel-err")
    _emit(doc, cfg.get("out"))
    return 0


def cmd_resources(cfg: dict) -> int:
    need = ["L", "epsilon", "overlap", "pauli_terms", "e0"]
    missing = [k for k in need if cfg.get(k) is None]
    if missing:
        raise UsageError("resources needs " + ", ".join("--" + k.replace("_", "-") for k in missing))
    try:
        est = estimate_resources(cfg["L"], cfg["epsilon"], cfg["overlap"], cfg["pauli_terms"],
                                 cfg["e0"], cfg.get("gamma"), cfg.get("shot_budget"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(est.as_dict(), cfg.get("out"))
    return 0


COMMANDS = {
    "spectrum": (cmd_spectrum, RUN_DEFAULTS),
    "signs": (cmd_signs, RUN_DEFAULTS),
    "sweep": (cmd_sweep, RUN_DEFAULTS),
    "plan": (cmd_plan, {}),
    "resources": (cmd_resources, {}),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    func, defaults = COMMANDS[args.command]
    try:
        return func(_merge(args, defaults))
    except UsageError as exc:
        print(f"wqte: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"wqte: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
