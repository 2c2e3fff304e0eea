"""Command-line harness: config parsing, subcommand dispatch, report emission.

Config files are flat `key = value` text with `#` comments and dotted key
names.  Command-line flags override config values; `--seed` overrides any
seed.  Every run writes its outputs atomically (temp file then rename) into
the `--out` directory, and floating point output uses 17 significant digits
so identical (config, seed) pairs reproduce identical bytes.

Exit codes: 0 when all verdicts pass, 2 when a verdict fails, 1 on
configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import experiments as X
from .errors import ConfigurationError, FalconerLabError
from .measures import (
    build_cantor_dust,
    ifs_to_config,
    measure_from_csv,
    measure_to_csv,
    sample_self_similar,
)
from .microlocal import threshold
from .spectral import LatticeSpec, measure_fourier

__all__ = ["main", "run", "parse_config", "ExperimentReport"]

_FMT = "{:.17g}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return _FMT.format(v)
    return str(v)


def _json_default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


@dataclass
class Param:
    type: type
    default: object
    help: str
    required: bool = False


def _float_list(text: str):
    return tuple(float(tok) for tok in str(text).split(",") if tok.strip())


_COMMON = {
    "seed": Param(int, 0, "master seed for every random draw"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "gen": {
        "d": Param(int, 2, "ambient dimension"),
        "ratio": Param(float, 1.0 / 3.0, "contraction ratio of the dust"),
        "branches": Param(int, 4, "number of corner branches"),
        "n": Param(int, 10000, "number of sampled points"),
        "depth": Param(int, 12, "chaos game composition depth"),
        **_COMMON,
    },
    "ft": {
        "measure": Param(str, None, "path to a measure CSV", required=True),
        "extent": Param(float, 16.0, "lattice extent"),
        "spacing": Param(float, 1.0, "lattice spacing"),
        **_COMMON,
    },
    "decay-fit": {
        "d": Param(int, 2, "ambient dimension of the inputs"),
        "grid": Param(int, 64, "lattice nodes across the diameter"),
        "imax": Param(int, 5, "largest band index"),
        "imin": Param(int, 2, "smallest band index"),
        "r": Param(float, 1.0, "averaging radius"),
        "trials": Param(int, 32, "random band pairs per (i,j) cell"),
        **_COMMON,
    },
    "bilinear-norm": {
        "d": Param(int, 2, "ambient dimension of the inputs"),
        "i": Param(int, 3, "band index of f"),
        "j": Param(int, 3, "band index of g"),
        "grid": Param(int, 64, "lattice nodes across the diameter"),
        "r": Param(float, 1.0, "averaging radius"),
        "trials": Param(int, 8, "random band pairs"),
        **_COMMON,
    },
    "distset": {
        "sigma": Param(float, 0.2, "Gaussian width of the test density"),
        "extent": Param(float, 4.0, "frequency lattice extent"),
        "grid": Param(int, 64, "lattice nodes across the diameter"),
        "r-lo": Param(float, 0.5, "smallest radius"),
        "r-hi": Param(float, 2.0, "largest radius"),
        "radii": Param(int, 16, "number of radii"),
        "samples": Param(int, 1_000_000, "Monte Carlo tuples"),
        "cloud": Param(int, 200_000, "atoms in the sampled cloud"),
        **_COMMON,
    },
    "energy": {
        "n": Param(int, 10000, "stratified sample size"),
        "s-values": Param(_float_list, (0.3, 0.5, 0.7), "energy exponents, comma separated"),
        "coarse-extent": Param(float, 2.5, "outer frequency extent"),
        "coarse-spacing": Param(float, 2e-5, "outer lattice spacing"),
        "fine-extent": Param(float, 0.02, "inner patch extent"),
        "fine-spacing": Param(float, 2e-7, "inner patch spacing"),
        **_COMMON,
    },
    "bands": {
        "d": Param(int, 2, "ambient dimension"),
        "ratio": Param(float, 1.0 / 3.0, "contraction ratio of the dust"),
        "branches": Param(int, 4, "number of corner branches"),
        "jmax": Param(int, 7, "largest band index"),
        "j-fit-min": Param(int, 3, "first band used in the slope fit"),
        "spacing": Param(float, 2.0, "lattice spacing"),
        **_COMMON,
    },
    "rank-check": {
        "d": Param(int, 2, "ambient dimension"),
        "k": Param(int, 3, "number of configuration points"),
        "partition": Param(str, "", "bipartite split like 01|23 (empty: canonical)"),
        "samples": Param(int, 100, "sampled conormal points"),
        "tol": Param(float, 1e-8, "relative singular value cutoff"),
        "epsilon": Param(float, 0.0, "quadratic form perturbation size"),
        "t": Param(float, 1.0, "level of the configuration function"),
        **_COMMON,
    },
    "threshold": {
        "d": Param(int, 2, "ambient dimension"),
        "k": Param(int, 3, "number of configuration points"),
        "variant": Param(str, "fio", "'fio' or 'bilinear'"),
    },
}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int | None
    started_utc: str
    duration_s: float
    rows: list
    fits: dict
    verdicts: list

    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.config.items()},
            "seed": self.seed,
            "started_utc": self.started_utc,
            "duration_s": self.duration_s,
            "n_rows": len(self.rows),
            "rows": self.rows,
            "fits": self.fits,
            "verdicts": [
                {"name": v.name, "passed": bool(v.passed), "value": v.value, "limit": v.limit}
                for v in self.verdicts
            ],
        }


# -- config handling -------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """Flat key=value lines with # comments; later keys override earlier ones."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _resolve(experiment: str, config: dict[str, str], overrides: dict) -> dict:
    schema = SCHEMAS[experiment]
    resolved = {}
    for key, raw in config.items():
        if key == "experiment":
            continue
        if key not in schema:
            near = difflib.get_close_matches(key, schema.keys(), n=1)
            hint = f"; nearest valid key: {near[0]!r}" if near else ""
            raise ConfigurationError(f"unknown config key {key!r} for {experiment!r}{hint}")
        resolved[key] = schema[key].type(raw)
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in schema:
            raise ConfigurationError(f"unknown override {key!r} for {experiment!r}")
        resolved[key] = schema[key].type(val)
    for key, par in schema.items():
        if key not in resolved:
            if par.required:
                raise ConfigurationError(f"missing required key {key!r} for {experiment!r}")
            resolved[key] = par.default
    return resolved


# -- output helpers ---------------------------------------------------------------

def _atomic_write(path: str, data: str) -> None:
    dirname = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=dirname, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(experiment: str, params: dict, columns: list[str], rows: list[dict],
              footer: dict | None = None) -> str:
    lines = [f"# experiment: {experiment}"]
    for key in sorted(params):
        val = params[key]
        if isinstance(val, tuple):
            val = ",".join(_fmt(v) for v in val)
        else:
            val = _fmt(val)
        lines.append(f"# {key}: {val}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    if footer is not None:
        lines.append("# fit: " + json.dumps(footer, sort_keys=True))
    return "\n".join(lines) + "\n"


# -- experiment drivers -------------------------------------------------------------

def _drive_gen(params, out_dir):
    ifs = build_cantor_dust(params["d"], params["ratio"], params["branches"])
    m = sample_self_similar(ifs, params["n"], params["depth"], params["seed"])
    files = {
        "measure.csv": measure_to_csv(m),
        "ifs.cfg": ifs_to_config(ifs),
    }
    fits = {"similarity_dimension": ifs.similarity_dimension()}
    return [], fits, [], files, f"wrote measure.csv with {m.n_points} points"


def _drive_ft(params, out_dir):
    with open(params["measure"]) as fh:
        m = measure_from_csv(fh.read())
    lattice = LatticeSpec(d=m.d, extent=params["extent"], spacing=params["spacing"])
    fld = measure_fourier(m, lattice)
    files = {"field.csv": fld.to_csv()}
    fits = {"mass_at_zero": float(fld.value_at_zero().real)}
    return [], fits, [], files, f"wrote field.csv on {lattice.nodes_per_axis}^{m.d} nodes"


def _drive_decay_fit(params, out_dir):
    res = X.decay_fit_table(
        d=params["d"], grid=params["grid"], imax=params["imax"], imin=params["imin"],
        r=params["r"], trials=params["trials"], seed=params["seed"],
    )
    fits = {
        "scale_slope": res.scale_slope,
        "min_slope": res.min_slope,
        "intercept": res.intercept,
        "residual": res.residual,
        "constant": res.constant,
    }
    files = {"decay_fit.csv": _csv_text(
        "decay-fit", params, ["d", "i", "j", "r", "ratio", "bound", "constant"],
        res.rows, footer=fits,
    )}
    msg = (f"scale slope {res.scale_slope:.3f}, min slope {res.min_slope:.3f}, "
           f"constant {res.constant:.3f}")
    return res.rows, fits, res.verdicts, files, msg


def _drive_bilinear_norm(params, out_dir):
    from .bilinear import decay_envelope, band_pair_l2_ratio
    extent = 2.0 ** (max(params["i"], params["j"]) + 1)
    lattice = LatticeSpec(d=params["d"], extent=extent, spacing=2.0 * extent / params["grid"])
    ratio = band_pair_l2_ratio(params["d"], params["i"], params["j"], params["r"], lattice,
                         trials=params["trials"], seed=params["seed"])
    bound = decay_envelope(params["d"], params["i"], params["j"])
    rows = [{"d": params["d"], "i": params["i"], "j": params["j"], "r": params["r"],
             "ratio": ratio, "bound": bound, "constant": ratio / bound}]
    files = {"bilinear_norm.csv": _csv_text(
        "bilinear-norm", params, ["d", "i", "j", "r", "ratio", "bound", "constant"], rows,
    )}
    return rows, {"ratio": ratio, "bound": bound}, [], files, f"ratio {ratio:.6g} (bound {bound:.6g})"


def _drive_distset(params, out_dir):
    res = X.distset_compare(
        sigma=params["sigma"], extent=params["extent"], grid=params["grid"],
        r_lo=params["r-lo"], r_hi=params["r-hi"], n_radii=params["radii"],
        samples=params["samples"], cloud_n=params["cloud"], seed=params["seed"],
    )
    fits = {"sup_rel_diff": res.sup_rel_diff, "imag_residue": res.imag_residue,
            "kept_fraction": res.kept_fraction}
    files = {"distset.csv": _csv_text(
        "distset", params, ["r", "density_pushforward", "density_fourier", "abs_rel_diff"],
        res.rows, footer=fits,
    )}
    return res.rows, fits, res.verdicts, files, f"sup relative difference {res.sup_rel_diff:.4f}"


def _drive_energy(params, out_dir):
    res = X.energy_two_sided(
        n=params["n"], s_values=params["s-values"], seed=params["seed"],
        coarse_extent=params["coarse-extent"], coarse_spacing=params["coarse-spacing"],
        fine_extent=params["fine-extent"], fine_spacing=params["fine-spacing"],
    )
    flat = []
    for row in res.rows:
        flat.append({"param": f"spatial[s={row['s']}]", "value": row["spatial"]})
        flat.append({"param": f"frequency[s={row['s']}]", "value": row["frequency"]})
        flat.append({"param": f"ratio[s={row['s']}]", "value": row["ratio"]})
    files = {"energy.csv": _csv_text(
        "energy", params, ["param", "value"], flat, footer={"ratio_spread": res.ratio_spread},
    )}
    return res.rows, {"ratio_spread": res.ratio_spread}, res.verdicts, files, \
        f"ratio spread {res.ratio_spread:.4f}"


def _drive_bands(params, out_dir):
    res = X.band_norms(
        d=params["d"], ratio=params["ratio"], branches=params["branches"],
        jmax=params["jmax"], j_fit_min=params["j-fit-min"], grid_spacing=params["spacing"],
    )
    flat = [{"param": f"band_norm[j={row['j']}]", "value": row["band_norm"]} for row in res.rows]
    files = {"bands.csv": _csv_text(
        "bands", params, ["param", "value"], flat,
        footer={"slope": res.slope, "limit": res.slope_limit, "dimension": res.dimension_s},
    )}
    return res.rows, {"slope": res.slope, "dimension": res.dimension_s}, res.verdicts, files, \
        f"band norm slope {res.slope:.4f} (limit {res.slope_limit:.4f})"


def _drive_rank_check(params, out_dir):
    res = X.rank_report(
        d=params["d"], k=params["k"], partition=params["partition"] or None,
        samples=params["samples"], tol=params["tol"], epsilon=params["epsilon"],
        seed=params["seed"], t=params["t"],
    )
    files = {"rank_report.json": json.dumps(res.report_dict, indent=2, sort_keys=True) + "\n"}
    rep = res.report_dict
    msg = f"min rank {rep['min_rank']} vs bound {rep['bound']} -> {'pass' if rep['pass'] else 'FAIL'}"
    return rep["per_sample"], {"min_rank": rep["min_rank"], "bound": rep["bound"]}, \
        res.verdicts, files, msg


def _drive_threshold(params, out_dir):
    frac = threshold(params["d"], params["k"], params["variant"])
    text = f"{frac.numerator}/{frac.denominator}"
    rows = [{"param": f"threshold[d={params['d']},k={params['k']},{params['variant']}]",
             "value": text}]
    files = {"threshold.csv": _csv_text("threshold", params, ["param", "value"], rows)}
    return rows, {"threshold": text}, [], files, text


_DRIVERS = {
    "gen": _drive_gen,
    "ft": _drive_ft,
    "decay-fit": _drive_decay_fit,
    "bilinear-norm": _drive_bilinear_norm,
    "distset": _drive_distset,
    "energy": _drive_energy,
    "bands": _drive_bands,
    "rank-check": _drive_rank_check,
    "threshold": _drive_threshold,
}


def run(config_path: str | None, subcommand: str, overrides: dict, out_dir: str = "out") -> int:
    """Execute one experiment; returns the process exit code."""
    try:
        if subcommand not in _DRIVERS:
            raise ConfigurationError(f"unknown subcommand {subcommand!r}")
        config: dict[str, str] = {}
        if config_path:
            with open(config_path) as fh:
                config = parse_config(fh.read())
        params = _resolve(subcommand, config, overrides)
        started = datetime.now(timezone.utc).isoformat()
        t0 = time.perf_counter()
        rows, fits, verdicts, files, message = _DRIVERS[subcommand](params, out_dir)
        duration = time.perf_counter() - t0
    except FalconerLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    os.makedirs(out_dir, exist_ok=True)
    report = ExperimentReport(
        experiment=subcommand, config=params, seed=params.get("seed"),
        started_utc=started, duration_s=duration, rows=rows, fits=fits, verdicts=verdicts,
    )
    for name, data in files.items():
        _atomic_write(os.path.join(out_dir, name), data)
    _atomic_write(os.path.join(out_dir, "report.json"),
                  json.dumps(report.to_json(), indent=2, sort_keys=True, default=_json_default) + "\n")
    print(message)
    for v in verdicts:
        status = "pass" if v.passed else "FAIL"
        print(f"  [{status}] {v.name}: {_fmt(v.value)} (limit {v.limit})")
    return 0 if report.passed() else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="falconer-lab",
        description="Numerical experiments around diagonal distance sets.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment",
                            description=f"Config keys for {name}:")
        sp.add_argument("--config", help="path to a key=value config file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        for key, par in schema.items():
            sp.add_argument(f"--{key}", dest=key, default=None,
                            help=f"{par.help} (default: {par.default})")
    return parser


def main(argv=None) -> int:
    if os.environ.get("FALCONER_LAB_THREADS"):
        try:
            import numba
            numba.set_num_threads(max(1, int(os.environ["FALCONER_LAB_THREADS"])))
        except (ValueError, ImportError):
            print("warning: FALCONER_LAB_THREADS ignored (not a valid integer)", file=sys.stderr)
    args = _build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in SCHEMAS[args.subcommand]
        if getattr(args, key, None) is not None
    }
    return run(args.config, args.subcommand, overrides, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
