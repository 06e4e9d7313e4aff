"""Command-line entry point: ``switchseq <command> CONFIG [--set k=v ...]``."""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .ambiguity import AmbiguityGrid, ambiguity_surface
from .array_model import ArrayModel, synthetic_patch_ula
from .bench import loglog_slope, time_fourier, time_general, time_xpr
from .config import RunConfig
from .errors import CapacityError, ConfigError, SwitchseqError
from .evaluator import (EstimatorGrid, Scenario, cdf_to_csv, estimate_cdf, run_monte_carlo)
from .fisher import PARAMS, FisherCostConfig, crlb_from_fim, fim
from .io import read_eadf, read_sampled_pattern, read_sequence, write_sequence
from .optimizer import (AnnealConfig, DesignConfig, design_ambiguity_baseline, design_ff,
                        design_kronecker_split)
from .signal_model import PathParameters, SoundingConfig, SwitchingSequence

COMMANDS = ("design", "evaluate", "ambiguity-map", "crlb", "bench")
MAX_SURFACE_POINTS = 4_000_000


# -- config -> objects ----------------------------------------------------------

def _array(cfg: RunConfig, side: str) -> ArrayModel:
    default = "ula" if side == "tx" else "single"
    kind = cfg.get_choice(f"{side}.kind", ("ula", "patch", "eadf", "pattern", "single"), default)
    if kind == "single":
        return ArrayModel.single_isotropic()
    if kind in ("ula", "patch"):
        M = cfg.get_int(f"{side}.elements", required=True, minimum=1)
        d = cfg.get_float(f"{side}.spacing", 0.5)
        if kind == "ula":
            return ArrayModel.ula(M, d)
        return synthetic_patch_ula(M, d, front_to_back=cfg.get_float(f"{side}.front_to_back", 0.1))
    eadfs = {}
    for pol in ("H", "V"):
        p = cfg.path(f"{side}.{kind}_{pol}")
        if p is not None:
            eadfs[pol] = read_eadf(p) if kind == "eadf" else read_sampled_pattern(p, pol)
    if not eadfs:
        raise ConfigError(f"{side}.kind = {kind} needs {side}.{kind}_V and/or {side}.{kind}_H")
    return ArrayModel.measured(**eadfs)


def _grid(cfg: RunConfig, required: bool) -> Optional[AmbiguityGrid]:
    if not cfg.has_section("grid"):
        if required:
            raise ConfigError("method 'ambiguity' needs a [grid] section (grid.n_phi_T, grid.n_nu, ...)")
        return None
    return AmbiguityGrid(cfg.get_int("grid.n_phi_T", 36, minimum=1), cfg.get_int("grid.n_theta_T", 1, minimum=1),
                         cfg.get_int("grid.n_phi_R", 1, minimum=1), cfg.get_int("grid.n_theta_R", 1, minimum=1),
                         cfg.get_int("grid.n_nu", 32, minimum=1), cfg.get_float("grid.nu_up"),
                         cfg.get_float("grid.power", 6.0))


def _design_config(cfg: RunConfig, method: str) -> DesignConfig:
    T0 = cfg.get_float("anneal.T0")
    ann = AnnealConfig(T0, cfg.get_float("anneal.alpha", 0.995), cfg.get_int("anneal.k_max", 5000, minimum=1),
                       0, cfg.get_bool("anneal.return_final"))
    fc = FisherCostConfig(cfg.get_int("fisher.n_phi", 181, minimum=2), cfg.get_int("fisher.n_theta", 91, minimum=1),
                          refine=cfg.get_bool("fisher.refine"))
    return DesignConfig(_array(cfg, "tx"), _array(cfg, "rx"), cfg.get_float("sequence.dt", 1.0), cfg.seed(),
                        cfg.get_float("fourier.confidence_level", 0.99), cfg.get_float("fourier.margin", 0.05),
                        cfg.get_float("fourier.prior", 0.5), ann, fc,
                        cfg.get_choice("design.cost", ("auto", "fisher", "isotropic"), "auto"),
                        _grid(cfg, method == "ambiguity"))


def _sequence(cfg: RunConfig, spec: str, key: str) -> SwitchingSequence:
    """``trivial``, ``ff``, ``ambiguity`` or ``file:PATH``."""
    dt = cfg.get_float("sequence.dt", 1.0)
    if spec == "trivial":
        return SwitchingSequence.trivial(_array(cfg, "tx").M * _array(cfg, "rx").M, dt)
    if spec == "ff":
        return design_ff(_design_config(cfg, "ff")).sequence
    if spec == "ambiguity":
        return design_ambiguity_baseline(_design_config(cfg, "ambiguity")).sequence
    if spec.startswith("file:"):
        p = Path(spec[5:])
        if not p.is_absolute() and cfg.source is not None:
            p = cfg.source.parent / p
        if not p.exists():
            raise ConfigError(f"{key}: sequence file {p} does not exist", cfg.entries[key].line if key in cfg.entries else None)
        return read_sequence(p)
    raise ConfigError(f"{key}: unknown sequence spec {spec!r} (trivial, ff, ambiguity, file:PATH)",
                      cfg.entries[key].line if key in cfg.entries else None)


# -- outputs --------------------------------------------------------------------

class Outputs:
    def __init__(self, cfg: RunConfig, command: str, out_dir: Optional[str]):
        d = out_dir or cfg.get("run.output", "out")
        p = Path(d)
        if not p.is_absolute() and cfg.source is not None and out_dir is None:
            p = cfg.source.parent / p
        self.dir = p
        self.cfg = cfg
        self.command = command
        self.files: List[str] = []

    def write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        path.write_text(text)
        self.files.append(name)
        return path

    def sequence(self, name: str, seq: SwitchingSequence) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        write_sequence(self.dir / name, seq)
        self.files.append(name)

    def manifest(self, extra: Optional[dict] = None) -> None:
        import scipy

        doc = {
            "command": self.command,
            "config": str(self.cfg.source) if self.cfg.source else None,
            "config_sha256": self.cfg.digest,
            "seeds": {"run.seed": self.cfg.get_int("run.seed")},
            "versions": {"switchseq": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "outputs": sorted(self.files),
        }
        if extra:
            doc.update(extra)
        self.write("manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_design(cfg: RunConfig, out: Outputs) -> int:
    method = cfg.get_choice("design.method", ("ff", "ambiguity", "kronecker-ff"), "ff")
    dc = _design_config(cfg, method)
    if method == "kronecker-ff":
        kd = design_kronecker_split(dc)
        out.sequence("tx_sequence.txt", kd.tx_report.sequence)
        out.sequence("rx_sequence.txt", kd.rx_report.sequence)
        out.sequence("sequence.txt", kd.joint)
        out.write("tx_design_report.txt", kd.tx_report.to_text())
        out.write("rx_design_report.txt", kd.rx_report.to_text())
        print(f"kronecker-ff: J_T={kd.tx_report.cost:.6g} J_R={kd.rx_report.cost:.6g} "
              f"wall={kd.wall_time:.3f}s")
    else:
        rep = design_ff(dc) if method == "ff" else design_ambiguity_baseline(dc)
        out.sequence("sequence.txt", rep.sequence)
        out.write("design_report.txt", rep.to_text())
        stages = " ".join(f"{k}={v:.3f}s" for k, v in rep.stages.items())
        print(f"{method}: final_cost={rep.final_cost:.6g} best_cost={rep.best_cost:.6g} "
              f"wall={rep.wall_time:.3f}s ({stages})")
    out.manifest({"method": method})
    return 0


def _snr_sweep(cfg: RunConfig, section: str) -> Tuple[float, ...]:
    explicit = cfg.get_float_list(f"{section}.snr_db")
    if explicit is not None:
        if not explicit:
            raise ConfigError(f"{section}.snr_db is empty")
        return tuple(explicit)
    lo = cfg.get_float(f"{section}.snr_min", -20.0)
    hi = cfg.get_float(f"{section}.snr_max", 10.0)
    n = cfg.get_int(f"{section}.snr_points", 21, minimum=1)
    return tuple(float(x) for x in np.linspace(lo, hi, n))


def cmd_evaluate(cfg: RunConfig, out: Outputs) -> int:
    trials = cfg.get_int("evaluate.trials", 2000)
    if trials < 1:
        raise ConfigError("evaluate.trials must be at least 1", cfg.entries["evaluate.trials"].line)
    specs = cfg.get_list("evaluate.sequences", ["trivial", "ff"])
    if not specs:
        raise ConfigError("evaluate.sequences is empty")
    seqs = tuple((s.replace("file:", "").replace("/", "_"), _sequence(cfg, s, "evaluate.sequences")) for s in specs)
    tx, rx = _array(cfg, "tx"), _array(cfg, "rx")
    path = PathParameters(phi_T=np.radians(cfg.get_float("evaluate.azimuth_deg", 90.0)),
                          nu=cfg.get_float("evaluate.doppler_hz", 0.0), r=cfg.get_float("evaluate.amplitude", 1.0))
    grid = EstimatorGrid(cfg.get_int("estimator.n_phi", 181, minimum=2),
                         (np.radians(cfg.get_float("estimator.phi_min_deg", -180.0)),
                          np.radians(cfg.get_float("estimator.phi_max_deg", 180.0))),
                         cfg.get_int("estimator.n_nu", 128, minimum=2))
    sc = Scenario(tx, rx, seqs, path, _snr_sweep(cfg, "evaluate"), trials, cfg.seed(), grid,
                  M_t=cfg.get_int("sequence.snapshots", 1, minimum=1))
    t0 = time.perf_counter()
    reports = run_monte_carlo(sc, progress=lambda i, n: print(f"\rSNR point {i}/{n}", end="", file=sys.stderr))
    print(file=sys.stderr)
    picks = cfg.get_float_list("evaluate.cdf_snr_db", None)
    for name, rep in reports.items():
        out.write(f"report_{name}.csv", rep.to_csv())
        snrs = picks if picks is not None else [float(rep.snr_db[len(rep.snr_db) // 2]), float(rep.snr_db[-1])]
        snrs = [float(rep.snr_db[np.argmin(np.abs(rep.snr_db - s))]) for s in snrs]
        out.write(f"cdf_{name}.csv", cdf_to_csv(name, estimate_cdf(rep, snrs)))
        for name2, seq in seqs:
            if name2 == name:
                out.sequence(f"sequence_{name}.txt", seq)
        print(f"{name}: az_rmse@{rep.snr_db[-1]:g}dB={rep.az_rmse[-1]:.4g} deg, "
              f"nu_rmse={rep.nu_rmse[-1]:.4g} Hz")
    print(f"evaluate: wall={time.perf_counter() - t0:.1f}s")
    out.manifest({"trials": trials, "snr_db": list(sc.snr_db)})
    return 0


def cmd_ambiguity_map(cfg: RunConfig, out: Outputs) -> int:
    dims = cfg.get_list("map.sweep", ["phi_T", "dnu"])
    allowed = ("phi_T", "theta_T", "phi_R", "theta_R", "dnu")
    line = cfg.entries["map.sweep"].line if cfg.has("map.sweep") else None
    if not 1 <= len(dims) <= 2 or any(d not in allowed for d in dims) or len(set(dims)) != len(dims):
        raise ConfigError(f"map.sweep must name one or two of {', '.join(allowed)}", line)
    seq = _sequence(cfg, cfg.get("map.sequence", "trivial"), "map.sequence")
    tx, rx = _array(cfg, "tx"), _array(cfg, "rx")
    sc = SoundingConfig(tx, rx, seq, M_t=cfg.get_int("sequence.snapshots", 1, minimum=1))
    dnu_max = cfg.get_float("map.dnu_max") or 1.0 / (2.0 * seq.dt)
    sweep = {}
    for d in dims:
        if d == "dnu":
            sweep[d] = np.linspace(-dnu_max, dnu_max, cfg.get_int("map.n_dnu", 129, minimum=1))
        else:
            lo = np.radians(cfg.get_float(f"map.{d}_min_deg", -180.0))
            hi = np.radians(cfg.get_float(f"map.{d}_max_deg", 180.0))
            sweep[d] = np.linspace(lo, hi, cfg.get_int(f"map.n_{d}", 361, minimum=1))
    points = int(np.prod([v.size for v in sweep.values()])) * seq.M
    if points > MAX_SURFACE_POINTS:
        raise CapacityError(f"ambiguity map needs {points} kernel evaluations, limit is {MAX_SURFACE_POINTS}")
    mu = PathParameters(phi_T=np.radians(cfg.get_float("map.azimuth_deg", 90.0)),
                        nu=cfg.get_float("map.doppler_hz", 0.0))
    surf = ambiguity_surface(sc, mu, sweep)
    out.write("surface.csv", surf.to_csv())
    out.sequence("sequence.txt", seq)
    print(f"ambiguity-map: {surf.data.shape} grid, max |X| = {surf.data.max():.6f}")
    out.manifest({"sweep": dims})
    return 0


def cmd_crlb(cfg: RunConfig, out: Outputs) -> int:
    seq = _sequence(cfg, cfg.get("crlb.sequence", "trivial"), "crlb.sequence")
    tx, rx = _array(cfg, "tx"), _array(cfg, "rx")
    sc = SoundingConfig(tx, rx, seq, M_t=cfg.get_int("sequence.snapshots", 1, minimum=1))
    path = PathParameters(theta_T=np.radians(cfg.get_float("crlb.elevation_deg", 0.0)),
                          phi_T=np.radians(cfg.get_float("crlb.azimuth_deg", 90.0)),
                          nu=cfg.get_float("crlb.doppler_hz", 0.0), r=cfg.get_float("crlb.amplitude", 1.0))
    params = cfg.get_list("crlb.params", ["phi_T", "nu", "r", "psi"])
    bad = [p for p in params if p not in PARAMS]
    if bad:
        raise ConfigError(f"crlb.params: unknown parameters {bad}",
                          cfg.entries["crlb.params"].line if cfg.has("crlb.params") else None)
    from .signal_model import noise_sigma_for_snr

    sigma = noise_sigma_for_snr(path, sc, cfg.get_float("crlb.snr_db", 10.0))
    F = fim(path, sc, sigma).sub(params)
    bound = crlb_from_fim(F)
    lines = ["parameter,fim_diagonal,crlb"]
    lines += [f"{p},{float(F.values[i, i])!r},{float(bound[i])!r}" for i, p in enumerate(params)]
    out.write("crlb.csv", "\n".join(lines) + "\n")
    for i, p in enumerate(params):
        print(f"{p}: F={F.values[i, i]:.6g} CRLB={bound[i]:.6g}")
    out.manifest({"params": params})
    return 0


def cmd_bench(cfg: RunConfig, out: Outputs) -> int:
    lists = {}
    for kind in ("general", "xpr", "fourier"):
        key = f"bench.{kind}_sizes"
        v = cfg.get_int_list(key, None)
        if v is not None and not v:
            raise ConfigError(f"{key} is empty", cfg.entries[key].line)
        if v is not None:
            lists[kind] = v
    if not lists and not cfg.has("bench.design_M_T"):
        raise ConfigError("bench needs at least one non-empty size list or bench.design_M_T")
    repeats = cfg.get_int("bench.repeats", 3, minimum=1)
    fns = {"general": time_general, "xpr": time_xpr, "fourier": time_fourier}
    rows, slopes = ["kind,size,seconds"], ["kind,slope"]
    for kind, sizes in lists.items():
        times = fns[kind](sizes, repeats)
        rows += [f"{kind},{n},{t!r}" for n, t in zip(sizes, times)]
        s = loglog_slope(sizes, times) if len(sizes) > 1 else float("nan")
        slopes.append(f"{kind},{s!r}")
        print(f"{kind}: log-log slope {s:.3f}")
    if cfg.has("bench.design_M_T"):
        M = cfg.get_int("bench.design_M_T", minimum=2)
        k = cfg.get_int("bench.design_k_max", 500, minimum=1)
        dc = DesignConfig(ArrayModel.ula(M), None, cfg.get_float("sequence.dt", 1.0), cfg.seed(),
                          anneal=AnnealConfig(k_max=k), grid=_grid(cfg, False) or AmbiguityGrid())
        t_ff = design_ff(dc).wall_time
        t_amb = design_ambiguity_baseline(dc).wall_time
        rows += [f"design_ff,{M},{t_ff!r}", f"design_ambiguity,{M},{t_amb!r}"]
        slopes.append(f"design_ratio,{t_amb / t_ff!r}")
        print(f"design M_T={M}: ff={t_ff:.3f}s ambiguity={t_amb:.3f}s ratio={t_amb / t_ff:.1f}")
    out.write("bench.csv", "\n".join(rows) + "\n")
    out.write("bench_slopes.csv", "\n".join(slopes) + "\n")
    out.manifest()
    return 0


HANDLERS = {"design": cmd_design, "evaluate": cmd_evaluate, "ambiguity-map": cmd_ambiguity_map,
            "crlb": cmd_crlb, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchseq", description=__doc__)
    ap.add_argument("--version", action="version", version=f"switchseq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("config", help="run configuration (section.key = value lines)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key; repeatable")
        p.add_argument("--out", default=None, help="output directory (overrides run.output)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.set)
        cfg.seed()
        out = Outputs(cfg, args.command, args.out)
        return HANDLERS[args.command](cfg, out)
    except SwitchseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
