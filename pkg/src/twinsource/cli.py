"""Command-line surface: one subcommand per reproducible figure or report.

    twinsource stack        reflectance spectrum + intracavity field profile
    twinsource tuning       signal/idler wavelengths vs pump incidence angle
    twinsource spectrum     photon-counting fluorescence spectrum
    twinsource hom          coincidence-dip simulation and fitting
    twinsource enhancement  cavity efficiency-enhancement report
    twinsource counts       detection-chain count budget report

Every command is deterministic given (config, seed). Data files are CSV
(header row, '.' decimal separator, LF endings) or JSON via --format; each
output gets a ``<name>.meta.json`` sidecar carrying the config hash, and the
command writes a run report listing every file it produced.

Exit status: 0 success, 2 input/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import efficiency, hom, modes, phasematch, spectra, stack
from .errors import (
    ConfigError,
    DegenerateScan,
    NoConvergence,
    NoResonanceInWindow,
    TwinSourceError,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


@dataclass
class RunReport:
    command: str
    config_hash: str
    outputs: list = field(default_factory=list)
    elapsed_s: float = 0.0
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "outputs": self.outputs,
            "elapsed_s": self.elapsed_s,
            "warnings": self.warnings,
        }


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_table(path: Path, columns: dict, fmt: str):
    """Write a column dict as CSV (default) or a JSON record list."""
    names = list(columns)
    rows = len(next(iter(columns.values())))
    if fmt == "json":
        records = [
            {name: (columns[name][i].item() if hasattr(columns[name][i], "item") else columns[name][i]) for name in names}
            for i in range(rows)
        ]
        path.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    lines = [",".join(names)]
    for i in range(rows):
        lines.append(",".join(_fmt(columns[name][i]) for name in names))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sidecar(path: Path, cfg_hash: str, extra: dict):
    meta = {"config_hash": cfg_hash, **extra}
    _write_json(path.with_suffix(path.suffix + ".meta.json"), meta)


class _Run:
    """Shared bookkeeping for one command invocation."""

    def __init__(self, args, command):
        self.args = args
        cfg = cfgmod.load_config(args.config)
        cfg = cfgmod.apply_overrides(cfg, args.set or [])
        if args.seed is not None:
            cfg["seed"] = args.seed
        self.cfg = cfg
        self.hash = cfgmod.config_hash(cfg)
        self.out_dir = Path(args.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.report = RunReport(command=command, config_hash=self.hash)
        self.t0 = time.monotonic()
        self.fmt = args.format
        model = cfgmod.dispersion_model(cfg)
        self.provenance = {
            "dispersion_model": model.name,
            "dispersion_coefficients": {k: list(v) for k, v in model.coefficients.items()},
        }

    def table_path(self, name: str) -> Path:
        ext = ".json" if self.fmt == "json" else ".csv"
        return self.out_dir / f"{name}{ext}"

    def emit_table(self, name: str, columns: dict, meta: dict) -> Path:
        path = self.table_path(name)
        _write_table(path, columns, self.fmt)
        _sidecar(path, self.hash, {**self.provenance, **meta})
        self.report.outputs.append(str(path))
        return path

    def emit_json(self, name: str, payload: dict, meta: dict) -> Path:
        path = self.out_dir / f"{name}.json"
        _write_json(path, payload)
        _sidecar(path, self.hash, {**self.provenance, **meta})
        self.report.outputs.append(str(path))
        return path

    def finish(self) -> RunReport:
        self.report.elapsed_s = round(time.monotonic() - self.t0, 6)
        _write_json(self.out_dir / f"{self.report.command}.report.json", self.report.as_dict())
        if not self.args.quiet:
            for line in self.report.warnings:
                print(f"warning: {line}", file=sys.stderr)
            for out in self.report.outputs:
                print(out)
        return self.report


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_stack(args) -> int:
    run = _Run(args, "stack")
    cfg = run.cfg
    model = cfgmod.dispersion_model(cfg)
    device = cfgmod.build_stack(cfg)
    if not device.layers:
        raise ConfigError("stack has no layers")
    lam_lo, lam_hi = (
        (args.lambda_min, args.lambda_max)
        if args.lambda_min is not None
        else tuple(cfg["resonance"]["window_nm"])
    )
    step = args.step
    theta = args.theta if args.theta is not None else 0.0
    pol = args.pol
    lams = lam_lo + step * np.arange(int(round((lam_hi - lam_lo) / step)) + 1)
    resp = [stack.stack_response(device, float(l), theta, pol, model) for l in lams]

    resonance_nm = None
    try:
        res = stack.find_resonance(device, (lam_lo, lam_hi), theta, pol, model)
        resonance_nm = res.wavelength_nm
    except (NoResonanceInWindow, stack.MultipleResonances, KeyError) as exc:
        run.report.warnings.append(f"resonance not flagged: {exc}")
    flag = np.zeros(len(lams), dtype=bool)
    if resonance_nm is not None:
        flag[int(np.argmin(np.abs(lams - resonance_nm)))] = True

    run.emit_table(
        "reflectance",
        {
            "lambda_nm": lams,
            "reflectance": [r.reflectance for r in resp],
            "transmittance": [r.transmittance for r in resp],
            "is_resonance": flag,
        },
        {
            "columns": "lambda_nm: vacuum wavelength; reflectance/transmittance: "
            "flux-normalized; is_resonance: 1 marks the row nearest the R dip",
            "theta_deg": theta,
            "polarization": pol,
            "resonance_nm": resonance_nm,
        },
    )

    lam_field = resonance_nm if resonance_nm is not None else 0.5 * (lam_lo + lam_hi)
    prof = stack.field_profile(device, lam_field, theta, pol, model)
    run.emit_table(
        "field_profile",
        {
            "depth_nm": prof.depth_nm,
            "re_amplitude": prof.amplitude.real,
            "im_amplitude": prof.amplitude.imag,
            "intensity": np.abs(prof.amplitude) ** 2,
        },
        {
            "columns": "depth_nm: 0 at top surface, increasing downward; "
            "amplitude: tangential field for unit incident amplitude",
            "wavelength_nm": lam_field,
            "theta_deg": theta,
            "polarization": pol,
        },
    )
    run.finish()
    return EXIT_OK


def cmd_tuning(args) -> int:
    run = _Run(args, "tuning")
    cfg = run.cfg
    device = cfgmod.build_stack(cfg)
    tcfg = cfg["tuning"]
    lo = args.theta_min if args.theta_min is not None else tcfg["theta_min_deg"]
    hi = args.theta_max if args.theta_max is not None else tcfg["theta_max_deg"]
    step = args.theta_step if args.theta_step is not None else tcfg["theta_step_deg"]
    thetas = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    lam_p = cfg["pump"]["wavelength_nm"]
    matcher = phasematch.matcher_for(device, cfgmod.dispersion_model(cfg))
    points, failures = matcher.tuning_curve(thetas, lam_p)
    for theta, inter_id, msg in failures:
        run.report.warnings.append(f"theta={theta} interaction={inter_id}: {msg}")
    if not points:
        print("error: every tuning point failed", file=sys.stderr)
        return EXIT_NUMERIC
    # flag the rows bracketing each branch crossing: the signed signal-idler
    # separation changes sign exactly at the degeneracy angle
    flags = [False] * len(points)
    for inter_id in (1, 2):
        idx = [i for i, p in enumerate(points) if p.interaction.id == inter_id]
        seps = [points[i].lambda_s_nm - points[i].lambda_i_nm for i in idx]
        for a, b in zip(range(len(idx) - 1), range(1, len(idx))):
            if seps[a] == 0.0 or (seps[a] < 0) != (seps[b] < 0):
                flags[idx[a]] = flags[idx[b]] = True
    run.emit_table(
        "tuning",
        {
            "interaction": [p.interaction.id for p in points],
            "theta_deg": [p.theta_deg for p in points],
            "lambda_s_nm": [p.lambda_s_nm for p in points],
            "lambda_i_nm": [p.lambda_i_nm for p in points],
            "near_degeneracy": flags,
        },
        {
            "columns": "signal copropagates with the in-plane pump momentum; "
            "near_degeneracy: 1 on the rows bracketing a branch crossing",
            "lambda_p_nm": lam_p,
        },
    )
    run.finish()
    return EXIT_OK


def cmd_spectrum(args) -> int:
    run = _Run(args, "spectrum")
    cfg = run.cfg
    device = cfgmod.build_stack(cfg)
    theta = args.theta if args.theta is not None else cfg["pump"]["angle_deg"]
    scfg = cfg["spectrum"]
    sp = spectra.fluorescence_spectrum(
        theta_deg=theta,
        lambda_p=cfg["pump"]["wavelength_nm"],
        length_mm=cfg["sample"]["length_mm"],
        s=device,
        noise_floor=scfg["noise_floor"],
        pump_fwhm_nm=cfg["pump"]["linewidth_fwhm_nm"],
        mono_fwhm_nm=scfg["monochromator_fwhm_nm"],
        long_peak_attenuation=cfg["sample"]["facet_reflectance"],
        half_span_nm=scfg["half_span_nm"],
        step_nm=scfg["step_nm"],
        matcher=phasematch.matcher_for(device, cfgmod.dispersion_model(cfg)),
    )
    run.emit_table(
        "spectrum",
        {"lambda_nm": sp.wavelength_nm, "intensity": sp.intensity},
        {"columns": "intensity normalized to unit tallest peak", **sp.metadata},
    )
    run.finish()
    return EXIT_OK


def _hom_model(cfg) -> hom.DipModel:
    hcfg = cfg["hom"]
    return hom.DipModel(
        visibility=cfgmod.hom_visibility(cfg),
        wavelength_nm=hcfg["degeneracy_wavelength_nm"],
        delta_lambda_nm=hcfg["delta_lambda_nm"],
    )


def cmd_hom_simulate(args) -> int:
    run = _Run(args, "hom-simulate")
    cfg = run.cfg
    hcfg = cfg["hom"]
    model = _hom_model(cfg)
    chain = cfgmod.build_detection_chain(cfg)
    positions = np.linspace(
        -hcfg["scan_half_span_mm"], hcfg["scan_half_span_mm"], int(hcfg["scan_points"])
    )
    scan = hom.simulate_scan(model, chain, positions, hcfg["dwell_s"], cfg["seed"])
    run.emit_table(
        "hom_scan",
        {
            "delta_z_mm": scan.delta_z_mm,
            "total_counts": scan.total_counts,
            "accidental_counts": scan.accidental_counts,
        },
        {
            "columns": "coincidence counts per dwell; accidental channel measured "
            "independently",
            "dwell_s": scan.dwell_s,
            "seed": scan.seed,
            "model": scan.metadata["model"],
        },
    )
    run.finish()
    return EXIT_OK


def _read_scan_csv(path: Path, dwell_s: float) -> hom.HomScan:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scan file: {exc}") from exc
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("scan file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["delta_z_mm", "total_counts", "accidental_counts"]
    if header != expected:
        raise ConfigError(f"scan header must be {expected}, got {header}")
    dz, tot, acc = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ConfigError(f"malformed scan row: {ln!r}")
        try:
            dz.append(float(parts[0]))
            tot.append(int(parts[1]))
            acc.append(int(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"malformed scan row {ln!r}: {exc}") from exc
    try:
        return hom.HomScan(
            np.array(dz), np.array(tot), np.array(acc), dwell_s=dwell_s
        )
    except ValueError as exc:
        raise ConfigError(f"scan violates invariants: {exc}") from exc


def cmd_hom_fit(args) -> int:
    run = _Run(args, "hom-fit")
    cfg = run.cfg
    scan = _read_scan_csv(Path(args.scan), cfg["hom"]["dwell_s"])
    lam = cfg["hom"]["degeneracy_wavelength_nm"]
    try:
        fit = hom.fit_dip(scan, lam)
    except (NoConvergence, DegenerateScan) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    model = hom.DipModel(fit.visibility, lam, fit.delta_lambda_nm)
    residuals = (
        scan.net_counts / fit.baseline_counts - hom.dip_value(model, scan.delta_z_mm)
    ).tolist()
    run.emit_json(
        "hom_fit",
        {
            "visibility": fit.visibility,
            "visibility_err": fit.visibility_err,
            "delta_lambda_nm": fit.delta_lambda_nm,
            "delta_lambda_err_nm": fit.delta_lambda_err,
            "dip_fwhm_mm": hom.dip_fwhm_mm(lam, fit.delta_lambda_nm),
            "baseline_counts": fit.baseline_counts,
            "residual_norm": fit.residual_norm,
            "normalized_residuals": residuals,
            "iterations": fit.iterations,
            "converged": fit.converged,
        },
        {"scan_file": str(args.scan), "wavelength_nm": lam},
    )
    run.finish()
    return EXIT_OK


def cmd_counts(args) -> int:
    run = _Run(args, "counts")
    chain = cfgmod.build_detection_chain(run.cfg)
    budget = efficiency.expected_counts(chain)
    run.emit_json(
        "counts",
        budget.as_dict(),
        {"chain": {k: getattr(chain, k) for k in (
            "pairs_per_pulse", "selected_fraction", "pulse_rate_hz",
            "detector_efficiency", "dark_rate_hz")}},
    )
    run.finish()
    return EXIT_OK


def cmd_enhancement(args) -> int:
    run = _Run(args, "enhancement")
    cfg = run.cfg
    overrides = cfg.get("enhancement_overrides", {})
    model = cfgmod.dispersion_model(cfg)
    needed = {"n_mean", "finesse", "t_up", "t_down"}
    payload = {}
    if not needed.issubset(overrides):
        device = cfgmod.build_stack(cfg)
        window = tuple(cfg["resonance"]["window_nm"])
        try:
            res = stack.find_resonance(device, window, pol=stack.TE, model=model)
        except (NoResonanceInWindow, stack.MultipleResonances) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        lam_deg = 2.0 * cfg["pump"]["wavelength_nm"]
        te = modes.guided_modes(device, lam_deg, stack.TE, model, max_modes=1)[0]
        tm = modes.guided_modes(device, lam_deg, stack.TM, model, max_modes=1)[0]
        payload = {
            "resonance_nm": res.wavelength_nm,
            "resonance_fwhm_nm": res.fwhm_nm,
            "free_spectral_range_nm": res.fsr_nm,
            "n_mean": 0.5 * (te.n_eff + tm.n_eff),
            "finesse": res.finesse,
            "t_up": res.t_up,
            "t_down": res.t_down,
        }
    params = efficiency.CavityParams(
        n_mean=overrides.get("n_mean", payload.get("n_mean")),
        finesse=overrides.get("finesse", payload.get("finesse")),
        t_up=overrides.get("t_up", payload.get("t_up")),
        t_down=overrides.get("t_down", payload.get("t_down")),
    )
    payload.update(
        {
            "n_mean": params.n_mean,
            "finesse": params.finesse,
            "t_up": params.t_up,
            "t_down": params.t_down,
            "enhancement_factor": efficiency.enhancement_factor(params),
        }
    )
    run.emit_json("enhancement", payload, {"overrides": sorted(overrides)})
    run.finish()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON config overlaying the defaults")
    parser.add_argument("--out", default=".", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, help="override the config RNG seed")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="dotted-path config override, e.g. --set pump.angle_deg=3.1",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress normal output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinsource",
        description="counterpropagating twin-photon source simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stack", help="reflectance spectrum and field profile")
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--theta", type=float)
    p.add_argument("--pol", choices=(stack.TE, stack.TM), default=stack.TE)
    _add_common(p)
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("tuning", help="signal/idler wavelengths vs pump angle")
    p.add_argument("--theta-min", type=float)
    p.add_argument("--theta-max", type=float)
    p.add_argument("--theta-step", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_tuning)

    p = sub.add_parser("spectrum", help="parametric fluorescence spectrum")
    p.add_argument("--theta", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("hom", help="two-photon interference scan")
    hom_sub = p.add_subparsers(dest="hom_command", required=True)
    ps = hom_sub.add_parser("simulate", help="Poisson-sampled coincidence scan")
    _add_common(ps)
    ps.set_defaults(func=cmd_hom_simulate)
    pf = hom_sub.add_parser("fit", help="fit the dip model to a scan CSV")
    pf.add_argument("--scan", required=True, metavar="CSV", help="input scan file")
    _add_common(pf)
    pf.set_defaults(func=cmd_hom_fit)

    p = sub.add_parser("enhancement", help="cavity enhancement report")
    _add_common(p)
    p.set_defaults(func=cmd_enhancement)

    p = sub.add_parser("counts", help="detection-chain count budget report")
    _add_common(p)
    p.set_defaults(func=cmd_counts)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoResonanceInWindow, NoConvergence, DegenerateScan) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TwinSourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
