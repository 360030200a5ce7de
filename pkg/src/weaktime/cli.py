"""Command-line experiment runner.

    weaktime --config run.json [--mode MODE] [--seed N] [--out DIR]
             [--threads N] [--quiet]

Exit status: 0 success, 2 config error, 3 numerical/precondition error.
The default thread count comes from ``WEAKTIME_THREADS`` (0 or unset means
one thread per CPU); ``--threads`` overrides it.

Every run writes ``manifest.json`` next to its outputs. It holds the fully
resolved config (state files inlined), its sha256, library versions and the
summary metrics; ``weaktime --config manifest.json`` replays the run.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, check_state_grid, load_config
from .errors import ConfigError, WeakTimeError
from .grid import to_frequency
from .interferometer import forward_rates, two_photon_rates
from .noise import ShotNoiseConfig, estimator_variance_sweep, sample_counts
from .records import RecordTable
from .states import (DensityMatrix, PureState, TwoPhotonPureState, align_global_phase, fidelity,
                     pure_to_density, save_state, schmidt_coefficients, schmidt_number,
                     state_to_dict)
from .tomography import (kirkwood_from_fringes, kirkwood_function, max_phase_aligned_error,
                         reconstruct_density, retrieval_consistency, wavefunction_freq,
                         wavefunction_time)

log = logging.getLogger("weaktime")

THREADS_ENV = "WEAKTIME_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_complex_csv(path, label, xs, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([label, "re", "im"])
        for x, v in zip(xs, values):
            w.writerow([_fmt(x), _fmt(v.real), _fmt(v.imag)])


def resolve_threads(arg: int | None) -> int:
    if arg is None:
        env = os.environ.get(THREADS_ENV, "0")
        try:
            arg = int(env)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from e
    if arg < 0:
        raise ConfigError("thread count must be >= 0")
    return arg or (os.cpu_count() or 1)


def resolved_config(cfg: ExperimentConfig, state) -> dict:
    """Config as actually run: overrides applied, file states inlined."""
    raw = copy.deepcopy(cfg.raw)
    raw["mode"] = cfg.mode
    raw["seed"] = cfg.seed
    raw["output_dir"] = str(cfg.output_dir)
    if raw["state"]["family"] == "file":
        raw["state"] = {"family": "inline", "state": state_to_dict(state)}
    return raw


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ------------------------------------------------------------------ modes


def _density(state) -> DensityMatrix:
    return pure_to_density(state) if isinstance(state, PureState) else state


def _forward(cfg, state, thetas=None):
    return forward_rates(state, cfg.thetas if thetas is None else thetas, cfg.phis,
                         cfg.reference_times, cfg.omegas, cfg.reference_width)


def _peak_time(state) -> float:
    rho = _density(state)
    return float(rho.grid.times[np.argmax(np.real(np.diag(rho.rho)))])


def _input_records(cfg, state, out, default):
    if cfg.input_records:
        p = Path(cfg.input_records)
        if not p.is_absolute():
            p = cfg.base_dir / p
        try:
            return RecordTable.from_csv(p, cfg.grid, cfg.grid_2)
        except OSError as e:
            raise ConfigError(f"key 'input_records': cannot read {p}: {e}") from e
    return default()


def mode_forward(cfg, state, out, threads):
    rec = _forward(cfg, state)
    rec.to_csv(out / "rates.csv", cfg.grid)
    return {"n_records": len(rec), "max_rate": float(np.max(rec.value))}, ["rates.csv"]


def mode_sample(cfg, state, out, threads):
    if cfg.noise is None:
        raise ConfigError("key 'noise': sample mode needs a noise section")
    ncfg = ShotNoiseConfig(int(cfg.noise["total_pairs"]), cfg.seed)
    rates = _forward(cfg, state)
    counts = sample_counts(rates, ncfg, cfg.grid)
    counts.to_csv(out / "counts.csv", cfg.grid)
    metrics = {"n_records": len(counts), "total_counts": int(np.sum(counts.value))}
    files = ["counts.csv"]
    if "n_trials" in cfg.noise:
        thetas = cfg.noise.get("thetas", cfg.thetas)
        t_ref = cfg.reference_times[0] if cfg.reference_times else None
        k = cfg.omegas[0] if cfg.omegas else None
        rows = estimator_variance_sweep(state, thetas, ncfg, cfg.noise["n_trials"], t_ref, k,
                                        workers=threads)
        with open(out / "estimator_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "mean", "std", "stderr", "n_ok", "n_failed", "truth"])
            for r in rows:
                w.writerow([_fmt(r.theta), _fmt(r.mean), _fmt(r.std), _fmt(r.stderr),
                            r.n_ok, r.n_failed, _fmt(r.truth)])
        metrics["estimator_table"] = [r.__dict__ for r in rows]
        files.append("estimator_sweep.csv")
    return metrics, files


def mode_reconstruct_kirkwood(cfg, state, out, threads):
    theta = cfg.thetas[0]
    rec = _input_records(cfg, state, out, lambda: forward_rates(
        state, [theta], cfg.phis, reference_width=cfg.reference_width))
    k = kirkwood_from_fringes(rec, cfg.grid)
    rho = reconstruct_density(k)
    k.save(out / "kirkwood.json")
    save_state(rho, out / "density.json")
    truth = _density(state)
    k_true = kirkwood_function(truth)
    metrics = {
        "fidelity": fidelity(state, rho),
        "purity": float(rho.purity()),
        "purity_error": abs(float(rho.purity()) - float(truth.purity())),
        "normalization_residual": abs(k.normalization() - 1),
        "time_marginal_residual": float(np.max(np.abs(k.time_marginal() - k_true.time_marginal()))),
        "frequency_marginal_residual": float(np.max(np.abs(
            k.frequency_marginal() - k_true.frequency_marginal()))),
        "max_kirkwood_error": float(np.max(np.abs(k.values - k_true.values))),
    }
    return metrics, ["kirkwood.json", "density.json"]


def mode_reconstruct_wavefunction(cfg, state, out, threads):
    g = cfg.grid
    theta = cfg.thetas[0]
    omegas = cfg.omegas or [g.center_omega_index()]
    t_ref = cfg.reference_times[0] if cfg.reference_times else _peak_time(state)
    w_scan = forward_rates(state, [theta], cfg.phis, reference_times=[t_ref])
    psi_w = wavefunction_freq(w_scan, g)
    _write_complex_csv(out / "wavefunction_freq.csv", "omega", g.omegas, psi_w)
    t_scan = forward_rates(state, [theta], cfg.phis, omega_indices=omegas)
    psi_t = wavefunction_time(t_scan.select(t_scan.omega_index == omegas[0]), g)
    _write_complex_csv(out / "wavefunction_time.csv", "t", g.times, psi_t.amp)
    cross = align_global_phase(to_frequency(g, psi_t.amp), psi_w)
    metrics = {"basis_consistency_error": float(np.max(np.abs(cross - psi_w))),
               "reference_time": t_ref, "post_selected_omega_index": int(omegas[0])}
    if len(omegas) > 1:
        metrics["retrieval_consistency"] = retrieval_consistency(t_scan, g)
    if isinstance(state, PureState):
        metrics["time_error"] = max_phase_aligned_error(psi_t.amp, state.amp)
        metrics["frequency_error"] = max_phase_aligned_error(psi_w, state.spectrum())
    return metrics, ["wavefunction_time.csv", "wavefunction_freq.csv"]


def mode_two_photon(cfg, state, out, threads):
    g1, g2 = state.grid_1, state.grid_2
    k1, k2 = cfg.omega_pair or (g1.center_omega_index(), g2.center_omega_index())
    th1 = cfg.thetas[0]
    th2 = th1 if cfg.theta2 is None else cfg.theta2
    from .tomography import two_photon_wavefunction

    rec = two_photon_rates(state, th1, th2, cfg.phis, cfg.phis, k1, k2,
                           reference_widths=(cfg.reference_width, cfg.reference_width))
    rec.to_csv(out / "pair_rates.csv", g1, g2)
    psi = two_photon_wavefunction(rec, g1, g2)
    save_state(psi, out / "pair_state.json")
    lam_in = schmidt_coefficients(state)
    lam_out = schmidt_coefficients(psi)
    n = min(len(lam_in), 16)
    with open(out / "schmidt.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "input", "reconstructed"])
        for i in range(n):
            w.writerow([i, _fmt(lam_in[i]), _fmt(lam_out[i])])
    ov = abs(np.vdot(state.amp, psi.amp) * g1.dt * g2.dt) ** 2
    metrics = {"fidelity": float(ov),
               "max_schmidt_error": float(np.max(np.abs(lam_in - lam_out))),
               "schmidt_number_input": schmidt_number(state),
               "schmidt_number_reconstructed": schmidt_number(psi)}
    return metrics, ["pair_rates.csv", "pair_state.json", "schmidt.csv"]


MODE_FUNCS = {
    "forward": mode_forward,
    "sample": mode_sample,
    "reconstruct-kirkwood": mode_reconstruct_kirkwood,
    "reconstruct-wavefunction": mode_reconstruct_wavefunction,
    "two-photon": mode_two_photon,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def run(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Execute one configured experiment; returns the manifest."""
    state = cfg.build_state()
    check_state_grid(state, cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics, files = MODE_FUNCS[cfg.mode](cfg, state, out, threads)
    raw = resolved_config(cfg, state)
    manifest = {
        "kind": "weaktime-manifest",
        "manifest_version": 1,
        "config": raw,
        "config_sha256": config_hash(raw),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "threads": threads,
        "versions": {"weaktime": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "outputs": files,
        "metrics": _jsonable(metrics),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weaktime", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog=f"Threads default to ${THREADS_ENV} (0 = one per CPU).")
    p.add_argument("--config", required=True, help="JSON config or run manifest")
    p.add_argument("--mode", choices=sorted(MODE_FUNCS), help="override the config mode")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--threads", type=int, help="worker threads (0 = auto)")
    p.add_argument("-q", "--quiet", action="store_true", help="only report warnings and errors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.mode = args.mode
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.output_dir = args.out
        threads = resolve_threads(args.threads)
        manifest = run(cfg, threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (WeakTimeError, ValueError, ArithmeticError, IndexError, MemoryError) as e:
        print(f"error [{type(e).__module__}.{type(e).__name__}]: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        for k, v in manifest["metrics"].items():
            if not isinstance(v, (list, dict)):
                log.info("%s = %s", k, v)
        log.info("wrote %s", Path(cfg.output_dir) / "manifest.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
