"""Command-line front end: JSON experiment config in, CSV or JSON out.

Exit codes: 0 success, 1 model or runtime failure, 2 invalid config/usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import coherence as coh
from . import dynamics as dyn
from . import implant as imp
from . import levels as lev
from . import poltransfer as pt
from .errors import ConfigError, NVPairError
from .io import Table, config_hash, emit
from .spin import PhysicalConstants, basis_index, format_label, nv_n_pair, parse_label

log = logging.getLogger("nvpair")

COMMANDS = ("levels", "lac", "spectrum", "echo", "eseem", "poltransfer", "nuclear", "implant",
            "coherence", "version")
BUNDLED = ("fig2b", "fig2c", "fig3a", "fig3b", "fig4b", "fig4c")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_INT2 = {"type": "integer", "minimum": 2}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_LABEL = {"type": "string", "pattern": r"^\|.*>$"}


def _block(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "system": _block({
            "d_fs_mhz": _POS,
            "b_gauss": _NONNEG,
            "b_direction": _VEC3,
            "r_nm": _POS,
            "r_direction": _VEC3,
            "coupled": {"type": "boolean"},
            "n14_on_n": {"type": "boolean"},
            "n15_on_nv": {"type": "boolean"},
            "gamma_e_mhz_per_g": _POS,
            "d0_ee_mhz_nm3": _POS,
        }),
        "sweep": _block({
            "b_min_gauss": _NONNEG,
            "b_max_gauss": _NONNEG,
            "n_points": _INT2,
            "lac_b_lo_gauss": _NONNEG,
            "lac_b_hi_gauss": _NONNEG,
            "branch_pair": {"type": "array", "items": _LABEL, "minItems": 2, "maxItems": 2},
        }),
        "spectrum": _block({
            "linewidth_mhz": _POS,
            "n_points": _INT2,
            "f_min_mhz": _NUM,
            "f_max_mhz": _NUM,
            "n_polarization": {"type": "number", "minimum": -1, "maximum": 1},
        }),
        "echo": _block({
            "tau_max_us": _POS,
            "n_points": _INT2,
            "pulse_mode": {"enum": ["ideal", "finite"]},
            "partner_flip": {"type": "boolean"},
            "pi2_ns": _POS,
            "pi_ns": _POS,
            "t2_us": _POS,
            "t2_exponent": _POS,
            "pad_factor": {"type": "integer", "minimum": 1},
            "time_axis": {"enum": ["tau", "2tau"]},
        }),
        "poltransfer": _block({
            "delta_mhz": _POS,
            "gamma_opt_mhz": _NONNEG,
            "gamma_sl_nv_mhz": _NONNEG,
            "gamma_sl_n_mhz": _NONNEG,
            "gamma_deph_nv_dark_mhz": _NONNEG,
            "optical_broadening": _NONNEG,
            "gamma_deph_n_mhz": _POS,
            "overlap_variant": {"enum": ["outside", "inside"]},
            "b_min_gauss": _NONNEG,
            "b_max_gauss": _NONNEG,
            "n_points": _INT2,
            "hyperfine_split_mhz": _POS,
            "epsilon": _PROB,
            "gamma_nuc_mhz": _NONNEG,
        }),
        "implant": _block({
            "dimer_energy_kev": _POS,
            "straggle_long_nm": _POS,
            "straggle_lat_nm": _POS,
            "range_e0_nm": _NONNEG,
            "exponent": _NUM,
            "n_samples": {"type": "integer", "minimum": 1},
            "bin_width_nm": _POS,
            "max_spacing_nm": _POS,
            "conversion_prob": _PROB,
            "conversion_prob_cold": _PROB,
            "n_dimers": {"type": "integer", "minimum": 1},
            "cold": {"type": "boolean"},
        }),
        "coherence": _block({
            "s": {"enum": [0.5, 1, 1.5]},
            "a_nm": _POS,
            "abundance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "t2_us": _POS,
            "threshold_factor": _POS,
            "linewidth_hz": _POS,
            "delta_radius_nm": _POS,
        }),
        "output": _block({
            "format": {"enum": ["csv", "json"]},
            "path": {"type": "string"},
        }),
    },
}


def _path_of(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        parts.extend(extra[:1])
    return ".".join(parts) or "<root>"


def validate_config(config) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_path_of(err), err.message)
    for block, lo, hi in (("sweep", "b_min_gauss", "b_max_gauss"), ("sweep", "lac_b_lo_gauss", "lac_b_hi_gauss"),
                          ("poltransfer", "b_min_gauss", "b_max_gauss"), ("spectrum", "f_min_mhz", "f_max_mhz")):
        sub = config.get(block, {})
        if lo in sub and hi in sub and not sub[lo] < sub[hi]:
            raise ConfigError(f"{block}.{hi}", f"must exceed {block}.{lo}")
    for key in ("b_direction", "r_direction"):
        vec = config.get("system", {}).get(key)
        if vec is not None and not any(vec):
            raise ConfigError(f"system.{key}", "must be a non-zero vector")
    return config


def resolve_config_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in BUNDLED and path.parent == Path("."):
        return Path(str(resources.files("nvpair.configs") / f"{stem}.json"))
    raise ConfigError("--config", f"no such file or bundled config: {name}")


def load_config(name: str | None) -> dict:
    if name is None:
        return {}
    path = resolve_config_path(name)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return validate_config(config)


# config -> model objects

def build_system(config: dict, **overrides):
    s = dict(config.get("system", {}))
    s.update(overrides)
    constants = PhysicalConstants(gamma_e=s.get("gamma_e_mhz_per_g", 2.8025), d0_ee=s.get("d0_ee_mhz_nm3", 52.04))
    kwargs = {}
    if "r_direction" in s:
        kwargs["r_direction"] = tuple(s["r_direction"])
    if "b_direction" in s:
        kwargs["b_direction"] = tuple(s["b_direction"])
    return nv_n_pair(d_fs=s.get("d_fs_mhz", 2870.0), b_gauss=s.get("b_gauss", 40.0), r_nm=s.get("r_nm", 1.5),
                     coupled=s.get("coupled", True), constants=constants, n14_on_n=s.get("n14_on_n", False),
                     n15_on_nv=s.get("n15_on_nv", False), **kwargs)


def build_rate_params(config: dict) -> pt.RateParams:
    p = config.get("poltransfer", {})
    s = config.get("system", {})
    mapping = {"delta": "delta_mhz", "gamma_opt": "gamma_opt_mhz", "gamma_sl_nv": "gamma_sl_nv_mhz",
               "gamma_sl_n": "gamma_sl_n_mhz", "gamma_deph_nv_dark": "gamma_deph_nv_dark_mhz",
               "optical_broadening": "optical_broadening", "gamma_deph_n": "gamma_deph_n_mhz",
               "overlap_variant": "overlap_variant"}
    kwargs = {k: p[v] for k, v in mapping.items() if v in p}
    if "d_fs_mhz" in s:
        kwargs["d_fs"] = s["d_fs_mhz"]
    if "gamma_e_mhz_per_g" in s:
        kwargs["gamma_e"] = s["gamma_e_mhz_per_g"]
    return pt.RateParams(**kwargs)


def build_implant_params(config: dict, seed: int) -> imp.ImplantParams:
    p = config.get("implant", {})
    mapping = {"dimer_energy": "dimer_energy_kev", "straggle_long": "straggle_long_nm",
               "straggle_lat": "straggle_lat_nm", "range_e0": "range_e0_nm", "exponent": "exponent",
               "conversion_prob": "conversion_prob", "conversion_prob_cold": "conversion_prob_cold"}
    return imp.ImplantParams(seed=seed, **{k: p[v] for k, v in mapping.items() if v in p})


# subcommands; each returns a Table

def cmd_levels(config, args) -> Table:
    sw = config.get("sweep", {})
    system = build_system(config)
    sweep = lev.sweep_levels(system, sw.get("b_min_gauss", 0.0), sw.get("b_max_gauss", 700.0),
                             sw.get("n_points", 351))
    cols = {"b_gauss": sweep.b_values}
    for k in range(sweep.levels.shape[1]):
        cols[f"level_{k}_mhz"] = sweep.levels[:, k]
    branches = {format_label(lab): sweep.branch(lab) for lab in sweep.labels[0]}
    return Table("levels", cols, meta={"dim": system.dim}, extra={"branches": branches})


def cmd_lac(config, args) -> Table:
    sw = config.get("sweep", {})
    system = build_system(config)
    try:
        pair = tuple(parse_label(x) for x in sw.get("branch_pair", ["|0,+1/2>", "|-1,-1/2>"]))
        for lab in pair:
            basis_index(system, lab)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("sweep.branch_pair", str(exc)) from exc
    b_lac, gap = lev.find_lac(system, pair, sw.get("lac_b_lo_gauss", 400.0), sw.get("lac_b_hi_gauss", 620.0))
    gamma_e = system.constants.gamma_e
    d_fs = config.get("system", {}).get("d_fs_mhz", 2870.0)
    meta = {"b_lac": b_lac, "gap_mhz": gap, "b_resonance_gauss": d_fs / (2 * gamma_e),
            "branch_pair": " / ".join(format_label(x) for x in pair)}
    return Table("lac", {}, meta=meta)


def _spectrum_populations(config, system):
    pol = config.get("spectrum", {}).get("n_polarization")
    if pol is None:
        return None
    if system.dim != 6:
        raise ConfigError("spectrum.n_polarization", "only supported for the bare NV-N pair")
    return lev.pair_populations([(1 + pol) / 2, (1 - pol) / 2, 0.0, 0.0])


def cmd_spectrum(config, args) -> Table:
    sp = config.get("spectrum", {})
    system = build_system(config)
    grid = None
    if "f_min_mhz" in sp and "f_max_mhz" in sp:
        grid = np.linspace(sp["f_min_mhz"], sp["f_max_mhz"], sp.get("n_points", 4001))
    spec = lev.esr_spectrum(system, sp.get("linewidth_mhz", 1.0), populations=_spectrum_populations(config, system),
                            grid=grid, n_points=sp.get("n_points", 4001))
    comments = [
        f"line freq_mhz={line.frequency:.9g} intensity={line.intensity:.9g} "
        f"from={format_label(line.from_state)} to={format_label(line.to_state)}"
        for line in spec.lines
    ]
    lines = [line.as_row() for line in spec.lines]
    return Table("spectrum", {"freq_mhz": spec.grid, "amplitude": spec.amplitude},
                 meta={"n_lines": len(spec.lines), "linewidth_mhz": spec.linewidth},
                 comments=comments, extra={"lines": lines})


def _echo_curve(config):
    ec = config.get("echo", {})
    system = build_system(config)
    tau = np.linspace(0.0, ec.get("tau_max_us", 2.0), ec.get("n_points", 1024))
    env = (ec["t2_us"], ec.get("t2_exponent", 1.0)) if "t2_us" in ec else None
    curve = dyn.hahn_echo_curve(system, tau, pulse_mode=ec.get("pulse_mode", "ideal"), t2_envelope=env,
                                partner_flip=ec.get("partner_flip", True), pi2_ns=ec.get("pi2_ns", 15.0),
                                pi_ns=ec.get("pi_ns", 30.0))
    return system, curve


def cmd_echo(config, args) -> Table:
    _, curve = _echo_curve(config)
    return Table("echo", {"tau_us": curve.tau, "amplitude": curve.amplitude})


def cmd_eseem(config, args) -> Table:
    ec = config.get("echo", {})
    system, curve = _echo_curve(config)
    spec = dyn.eseem_spectrum(curve, pad_factor=ec.get("pad_factor", 4), time_axis=ec.get("time_axis", "tau"))
    meta = {"bin_width_mhz": spec.bin_width}
    if spec.peaks:
        meta["dominant_peak_mhz"] = spec.peaks[0][0]
    if system.dim == 6 and system.couplings:
        meta["doublet_splitting_mhz"] = lev.doublet_splitting(system)
    comments = [f"peak freq_mhz={f:.9g} magnitude={m:.9g}" for f, m in spec.peaks]
    return Table("eseem", {"freq_mhz": spec.freq, "magnitude": spec.magnitude}, meta=meta, comments=comments,
                 extra={"peaks": [{"freq_mhz": f, "magnitude": m} for f, m in spec.peaks]})


def _field_grid(config, default_lo=400.0, default_hi=620.0, default_n=2201):
    p = config.get("poltransfer", {})
    return np.linspace(p.get("b_min_gauss", default_lo), p.get("b_max_gauss", default_hi),
                       p.get("n_points", default_n))


def cmd_poltransfer(config, args) -> Table:
    params = build_rate_params(config)
    b, pol = pt.polarization_curve(params, _field_grid(config))
    k = int(np.argmax(np.abs(pol)))
    return Table("poltransfer", {"b_gauss": b, "polarization": pol},
                 meta={"b_resonance_gauss": params.b_resonance, "b_peak_gauss": b[k], "peak_polarization": pol[k]})


def cmd_nuclear(config, args) -> Table:
    params = build_rate_params(config)
    p = config.get("poltransfer", {})
    nuc = pt.NuclearParams(epsilon=p.get("epsilon", 0.05), gamma_nuc=p.get("gamma_nuc_mhz", 5e-5))
    b, i1, i2 = pt.nuclear_polarization_model(params, p.get("hyperfine_split_mhz", 3.03), _field_grid(config), nuc)
    return Table("nuclear", {"b_gauss": b, "i_component1": i1, "i_component2": i2},
                 meta={"b_resonance_gauss": params.b_resonance, "epsilon": nuc.epsilon})


def cmd_implant(config, args) -> Table:
    ic = config.get("implant", {})
    params = build_implant_params(config, args.seed_value)
    hist = imp.spacing_distribution(params, ic.get("n_samples", 10**6), bin_width=ic.get("bin_width_nm", 0.25),
                                    max_spacing=ic.get("max_spacing_nm", 30.0), threads=args.threads)
    conv = imp.conversion_yield(params, ic.get("n_dimers", 10**6), cold=ic.get("cold", False), threads=args.threads)
    meta = {"n_total": hist.n_total, "dimer_energy_kev": params.dimer_energy,
            "sigma_lat_nm": params.sigma_lat, "sigma_long_nm": params.sigma_long,
            "straggle_long_nm": params.straggle_long, "straggle_lat_nm": params.straggle_lat}
    for t, f in hist.fractions_below.items():
        meta[f"fraction_below_{t:g}_nm"] = f
    meta.update({"conversion_pairs": conv.n_pairs, "conversion_fraction": conv.fraction,
                 "conversion_ci95_lo": conv.ci95[0], "conversion_ci95_hi": conv.ci95[1]})
    extra = {"fractions_below": {f"{k:g}": v for k, v in hist.fractions_below.items()}}
    return Table("implant", {"bin_lo_nm": hist.bin_edges[:-1], "bin_hi_nm": hist.bin_edges[1:], "count": hist.counts},
                 meta=meta, extra=extra)


def cmd_coherence(config, args) -> Table:
    c = config.get("coherence", {})
    s = config.get("system", {})
    constants = PhysicalConstants(gamma_e=s.get("gamma_e_mhz_per_g", 2.8025), d0_ee=s.get("d0_ee_mhz_nm3", 52.04))
    bath = coh.BathParams(s=float(c.get("s", 1.0)), a=c.get("a_nm", 0.44), abundance=c.get("abundance", 0.011),
                          constants=constants)
    reports = [
        coh.frozen_core_radius(bath),
        coh.spectral_jump_estimate(c.get("delta_radius_nm", coh.PUBLISHED_FROZEN_CORE_NM), constants),
        coh.max_coupling_distance(c.get("t2_us", coh.PUBLISHED_T2_US), c.get("threshold_factor", 1.0), constants),
        coh.flipflop_time_from_linewidth(c.get("linewidth_hz", 100.0)),
    ]
    cols = {
        "estimator": [r.name for r in reports],
        "formula_output": [r.formula_output for r in reports],
        "units": [r.units for r in reports],
        "published_value": [("" if r.published_value is None else r.published_value) for r in reports],
    }
    comments = [f"{r.name}: {r.convention_notes}" for r in reports]
    return Table("coherence", cols, comments=comments, extra={"reports": [r.to_dict() for r in reports]})


HANDLERS = {
    "levels": cmd_levels, "lac": cmd_lac, "spectrum": cmd_spectrum, "echo": cmd_echo, "eseem": cmd_eseem,
    "poltransfer": cmd_poltransfer, "nuclear": cmd_nuclear, "implant": cmd_implant, "coherence": cmd_coherence,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError("argv", message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nvpair", description="NV-N pair spin simulations")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config path or bundled name (fig2b, fig2c, ...)")
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        raw = os.environ.get("NVPAIR_THREADS", "1")
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError("NVPAIR_THREADS", f"not an integer: {raw!r}") from exc
    if value < 1:
        raise ConfigError("--threads", "must be >= 1")
    return value


def run(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.command == "version":
            print(f"nvpair {__version__}")
            return 0
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else config.get("seed", 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed", "must be a 64-bit unsigned integer")
        args.seed_value = seed
        args.threads = _threads(args)
        out = config.get("output", {})
        fmt_name = args.format or out.get("format", "json" if args.command in ("lac", "coherence") else "csv")
        dest = args.out or out.get("path")
        provenance = {"tool": "nvpair", "version": __version__, "command": args.command, "seed": seed,
                      "config_hash": config_hash(config)}
        table = HANDLERS[args.command](config, args)
        emit(table, fmt_name, dest, provenance)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NVPairError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
