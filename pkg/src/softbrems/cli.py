"""Command-line surface: every computation as a subcommand.

Exit codes: 0 success, 1 check/acceptance failure, 2 configuration error,
3 domain/kinematics error, 4 I/O error.

Output is CSV (repr floats, '.' decimal) or JSON (17 significant digits)
to stdout or --out; identical config and seed reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import checks as checks_mod
from . import fockspace as fs
from . import kernels
from .branches import build_branches, coherence_metrics, decoherence_matrix, return_probability
from .config import (
    ConfigError,
    RunConfig,
    apply_cli_overrides,
    default_config,
    load_config,
    serialize_config,
)
from .errors import SoftbremsError, TruncationTooSmall
from .kinematics import FourVector, classical_current
from .radiation import (
    SpectralCutoffs,
    divergence_coefficient,
    polarization_sum,
    spectral_density,
    v_functional,
)
from .rng import make_rng

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

SCHEMAS = {
    "current": (
        "omega", "kx", "ky", "kz",
        "re_jt", "re_jx", "re_jy", "re_jz",
        "im_jt", "im_jx", "im_jy", "im_jz",
        "kj_residual",
    ),
    "spectrum": ("omega", "density", "c_fit", "residual"),
    "overlap": ("omega_min", "v_pair", "overlap_pair", "v_vacuum", "overlap_vacuum"),
    "decohere": (
        "omega_min", "row", "col", "entry", "duplicate",
        "offdiag_norm", "purity_proxy",
    ),
    "fock-check": ("check", "value", "bound", "passed"),
    "rescatter": ("delta", "estimate", "ci_low", "ci_high", "slope_fit", "slope_err"),
    "demo": ("check", "passed", "metrics"),
}


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------


def _scalar(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def json_text(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits and stable ordering."""
    obj = _scalar(obj)
    pad = " " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return "null"
        return f"{obj:.17g}"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [
            f'{pad}  {json.dumps(str(k))}: {json_text(v, indent + 2)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        items = [f"{pad}  {json_text(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(value) -> str:
    value = _scalar(value)
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_rows(rows, columns, fmt: str) -> str:
    if fmt == "json":
        return json_text([{c: row[c] for c in columns} for row in rows]) + "\n"
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def write_text(text: str, out_path: str) -> None:
    if not out_path:
        sys.stdout.write(text)
        return
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_current(cfg: RunConfig) -> int:
    cur = cfg.current_at_angle(cfg.get("kinematics", "angle_deg"))
    rows = []
    for omega in cfg.get("photons", "omegas"):
        for vec in cfg.get("photons", "directions"):
            n = np.asarray(vec, dtype=float)
            n = n / np.linalg.norm(n)
            k = FourVector(omega, *(omega * n))
            j = classical_current(cur, k)
            kv = k.as_array()
            resid = abs(kv[0] * j[0] - kv[1] * j[1] - kv[2] * j[2] - kv[3] * j[3])
            rows.append(
                {
                    "omega": float(omega),
                    "kx": k.x, "ky": k.y, "kz": k.z,
                    "re_jt": j[0].real, "re_jx": j[1].real,
                    "re_jy": j[2].real, "re_jz": j[3].real,
                    "im_jt": j[0].imag, "im_jx": j[1].imag,
                    "im_jy": j[2].imag, "im_jz": j[3].imag,
                    "kj_residual": float(resid),
                }
            )
    text = render_rows(rows, SCHEMAS["current"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    cur = cfg.current_at_angle(cfg.get("kinematics", "angle_deg"))
    cutoffs = cfg.cutoffs()
    quad = cfg.quadrature()
    c_fit, resid = divergence_coefficient(cur, cutoffs, quad)
    omegas = np.geomspace(cutoffs.omega_min, cutoffs.omega_max, quad.n_omega)
    rows = [
        {
            "omega": float(om),
            "density": spectral_density(cur, float(om), quad),
            "c_fit": c_fit,
            "residual": resid,
        }
        for om in omegas
    ]
    text = render_rows(rows, SCHEMAS["spectrum"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK


def cmd_overlap(cfg: RunConfig) -> int:
    cur1 = cfg.current_at_angle(cfg.get("kinematics", "angle_deg"))
    cur2 = cfg.current_at_angle(cfg.get("kinematics", "angle2_deg"))
    quad = cfg.quadrature()
    omega_max = cfg.get("sweep", "omega_max")
    rows = []
    for om in cfg.sweep_omega_mins():
        cutoffs = SpectralCutoffs(float(om), omega_max)
        vp = v_functional(cur1, cur2, cutoffs, quad)
        vv = v_functional(cur1, None, cutoffs, quad)
        rows.append(
            {
                "omega_min": float(om),
                "v_pair": vp,
                "overlap_pair": math.exp(-vp),
                "v_vacuum": vv,
                "overlap_vacuum": math.exp(-vv),
            }
        )
    text = render_rows(rows, SCHEMAS["overlap"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK


def cmd_decohere(cfg: RunConfig) -> int:
    rng = make_rng(cfg.get("run", "seed"))
    bset = build_branches(
        cfg.electron_in(),
        cfg.neutrino_in(),
        cfg.get("branches", "n_branches"),
        rng,
        cfg.get("branches", "vacuum_rate"),
    )
    quad = cfg.quadrature()
    omega_max = cfg.get("sweep", "omega_max")
    omins = [float(om) for om in cfg.sweep_omega_mins()]

    def one_point(om):
        matrix = decoherence_matrix(bset, SpectralCutoffs(om, omega_max), quad)
        purity, offdiag = coherence_metrics(bset, matrix)
        return matrix, purity, offdiag

    threads = cfg.get("run", "threads")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_point, omins))
    else:
        results = [one_point(om) for om in omins]

    rows = []
    for om, (matrix, purity, offdiag) in zip(omins, results):
        m = matrix.entries
        for r in range(m.shape[0]):
            for c in range(m.shape[1]):
                dup = r != c and m[r, c] >= 1.0 - 1e-12
                rows.append(
                    {
                        "omega_min": om,
                        "row": r,
                        "col": c,
                        "entry": float(m[r, c]),
                        "duplicate": bool(dup),
                        "offdiag_norm": offdiag,
                        "purity_proxy": purity,
                    }
                )
    text = render_rows(rows, SCHEMAS["decohere"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK


def cmd_fock_check(cfg: RunConfig) -> int:
    cur = cfg.current_at_angle(cfg.get("kinematics", "angle_deg"))
    cutoffs = cfg.cutoffs()
    grid = fs.build_mode_grid(
        cutoffs,
        cfg.get("fock", "n_cos"),
        cfg.get("fock", "n_phi"),
        cfg.get("fock", "n_omega"),
    )
    rows = []

    def record(name, value, bound, passed):
        rows.append({"check": name, "value": value, "bound": bound, "passed": passed})
        return passed

    ok = True
    measure_gap = abs(grid.total_measure() / grid.closed_form_measure() - 1.0)
    ok &= record("cell_measure_closed_form", measure_gap, 1e-12, measure_gap <= 1e-12)

    spec = fs.project_current(cur, grid)
    occupancy = spec.total_occupancy()
    # same sum through the Lorentz-contraction route instead of the basis route
    e, px, py, pz, coeffs, _ = fs._leg_arrays(cur)
    dk = (
        np.outer(grid.k[:, 0], e)
        - grid.k[:, 1][:, None] * px[None, :]
        - grid.k[:, 2][:, None] * py[None, :]
        - grid.k[:, 3][:, None] * pz[None, :]
    )
    r = coeffs[None, :] / dk
    j4 = 1j * np.stack(
        [np.einsum("ml,l->m", r, comp) for comp in (e, px, py, pz)], axis=1
    )
    s_pol = np.array([polarization_sum(j4[m]) for m in range(grid.n_modes)])
    contraction = float(grid.weight @ s_pol)
    occ_gap = abs(occupancy / contraction - 1.0) if contraction else abs(occupancy)
    ok &= record("occupancy_vs_contraction", occ_gap, 1e-9, occ_gap <= 1e-9)

    n_max = cfg.get("fock", "n_max")
    if n_max < 0:
        n_max = fs.required_levels(float(np.max(np.abs(spec.alphas))))
    try:
        state = fs.displace_vacuum(spec, n_max)
    except TruncationTooSmall as exc:
        record("truncation_leak", math.nan, fs.LEAK_BOUND, False)
        sys.stderr.write(f"fock-check: {exc}\n")
        text = render_rows(rows, SCHEMAS["fock-check"], cfg.get("run", "format"))
        write_text(text, cfg.get("run", "out"))
        return EXIT_CHECK_FAILED

    leaks = state.mode_leaks()
    leak = float(np.max(leaks))
    ok &= record("truncation_leak", leak, fs.LEAK_BOUND, leak <= fs.LEAK_BOUND)

    resid = fs.bogoliubov_residual(spec, max(n_max, 40))
    ok &= record("bogoliubov_residual", resid, 1e-8, resid < 1e-8)

    vac = fs.displace_vacuum(fs.CoherentSpec(np.zeros_like(spec.alphas), grid), n_max)
    got = abs(fs.fock_overlap(state, vac))
    want = math.exp(-0.5 * occupancy)
    tol = 1e-9 + 10.0 * float(np.sum(leaks))
    overlap_gap = abs(got - want)
    ok &= record("vacuum_overlap_identity", overlap_gap, tol, overlap_gap <= tol)

    levels = np.arange(n_max + 1, dtype=float)
    mean_n = np.sum(np.abs(state.coeffs[0]) ** 2 * levels[None, :], axis=1)
    occ_dev = float(np.max(np.abs(mean_n - np.abs(spec.channel_alphas) ** 2)))
    ok &= record("mean_occupation", occ_dev, 1e-9, occ_dev <= 1e-9)

    text = render_rows(rows, SCHEMAS["fock-check"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_rescatter(cfg: RunConfig) -> int:
    deltas = list(cfg.get("mc", "deltas"))
    n_samples = cfg.get("mc", "n_samples")
    streams = make_rng(cfg.get("run", "seed")).spawn(len(deltas))
    e_in, nu_in = cfg.electron_in(), cfg.neutrino_in()
    rows = []
    for delta, stream in zip(deltas, streams):
        est, (lo, hi) = return_probability(e_in, nu_in, delta, n_samples, stream)
        rows.append({"delta": delta, "estimate": est, "ci_low": lo, "ci_high": hi})
    x = np.log(np.asarray(deltas))
    y = np.log(np.clip([r["estimate"] for r in rows], 1e-300, None))
    design = np.column_stack([np.ones_like(x), x])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ sol
    dof = max(len(deltas) - 2, 1)
    var = float(np.sum((y - fitted) ** 2)) / dof
    cov = var * np.linalg.inv(design.T @ design)
    slope, slope_err = float(sol[1]), float(math.sqrt(max(cov[1, 1], 0.0)))
    for row in rows:
        row["slope_fit"] = slope
        row["slope_err"] = slope_err
    text = render_rows(rows, SCHEMAS["rescatter"], cfg.get("run", "format"))
    write_text(text, cfg.get("run", "out"))
    return EXIT_OK


def cmd_demo(cfg: RunConfig, dry_run: bool = False) -> int:
    out_dir = cfg.get("run", "out") or "softbrems_demo"
    fmt = cfg.get("run", "format")
    names = [fn.__name__.replace("check_", "").replace("_", "-") for fn in checks_mod.ALL_CHECKS]
    planned = [f"{n}.{fmt}" for n in names] + ["summary.json", "config.ini"]
    if dry_run:
        sys.stdout.write(f"demo would write to {out_dir}/:\n")
        for item in planned:
            sys.stdout.write(f"  {item}\n")
        return EXIT_OK
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        sys.stderr.write(f"demo: output path not writable: {exc}\n")
        return EXIT_IO

    results = checks_mod.run_all_checks(
        cfg.get("run", "seed"), cfg.get("run", "threads")
    )
    summary = {
        "seed": cfg.get("run", "seed"),
        "backend": kernels.active_backend(),
        "all_passed": all(r.passed for r in results),
        "checks": [
            {"name": r.name, "passed": r.passed, "metrics": r.metrics}
            for r in results
        ],
    }
    for r in results:
        rows = r.rows if r.rows is not None else [r.metrics]
        columns = r.columns if r.columns else tuple(r.metrics.keys())
        path = os.path.join(out_dir, f"{r.name}.{fmt}")
        write_text(render_rows(rows, columns, fmt), path)
        status = "PASS" if r.passed else "FAIL"
        sys.stdout.write(f"{status} {r.name}\n")
        sys.stderr.write(f"  ({r.name}: {r.elapsed:.2f}s)\n")
    write_text(json_text(summary) + "\n", os.path.join(out_dir, "summary.json"))
    # echo the effective config with the output path normalized away, so
    # identical runs into different directories produce identical trees
    from .config import _with_overrides

    echo_cfg = _with_overrides(cfg, {("run", "out"): ""})
    write_text(serialize_config(echo_cfg), os.path.join(out_dir, "config.ini"))
    return EXIT_OK if summary["all_passed"] else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--out", help="output file (directory for demo)")
    common.add_argument("--threads", type=int, help="worker threads for sweeps")
    common.add_argument("--dry-run", action="store_true", help="plan only, write nothing")
    common.add_argument("--schema", action="store_true", help="print output fields and exit")

    parser = argparse.ArgumentParser(
        prog="softbrems",
        description="soft-photon clouds: currents, spectra, overlaps, decoherence",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("current", parents=[common], help="emission current at sample photons")
    sub.add_parser("spectrum", parents=[common], help="photon spectral density and log fit")
    sub.add_parser("overlap", parents=[common], help="pairwise cloud overlap vs infrared cutoff")
    sub.add_parser("decohere", parents=[common], help="decoherence matrices over a cutoff sweep")
    fock = sub.add_parser("fock-check", parents=[common], help="truncated Fock-space validation")
    fock.add_argument("--fock-n-max", type=int, help="override the per-channel level cap")
    sub.add_parser("rescatter", parents=[common], help="return-probability Monte Carlo ladder")
    sub.add_parser("demo", parents=[common], help="run every verification sweep")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.schema:
        sys.stdout.write(json_text(list(SCHEMAS[args.command])) + "\n")
        return EXIT_OK
    try:
        cfg = default_config()
        if args.config:
            try:
                cfg = load_config(args.config, cfg)
            except OSError as exc:
                sys.stderr.write(f"config: {exc}\n")
                return EXIT_CONFIG
        cfg = apply_cli_overrides(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"config: {exc}\n")
        return EXIT_CONFIG

    dry = bool(getattr(args, "dry_run", False))
    try:
        if args.command == "current":
            return EXIT_OK if dry else cmd_current(cfg)
        if args.command == "spectrum":
            return EXIT_OK if dry else cmd_spectrum(cfg)
        if args.command == "overlap":
            return EXIT_OK if dry else cmd_overlap(cfg)
        if args.command == "decohere":
            return EXIT_OK if dry else cmd_decohere(cfg)
        if args.command == "fock-check":
            return EXIT_OK if dry else cmd_fock_check(cfg)
        if args.command == "rescatter":
            return EXIT_OK if dry else cmd_rescatter(cfg)
        if args.command == "demo":
            return cmd_demo(cfg, dry_run=dry)
    except SoftbremsError as exc:
        sys.stderr.write(f"{args.command}: {exc}\n")
        return EXIT_DOMAIN
    except ValueError as exc:
        sys.stderr.write(f"{args.command}: {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        sys.stderr.write(f"{args.command}: I/O error: {exc}\n")
        return EXIT_IO
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
