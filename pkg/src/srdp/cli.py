"""Command-line front end: ``srdp <command> [options]``.

Commands: binary-surface, gaussian-family, region-search, bc-tools, osrb.

Every command takes its parameters either as ``--key value`` flags or from a
flat ``key = value`` file passed with ``--config``; flags win over the file
and unknown keys are rejected. Output goes to ``--out`` (stdout if omitted)
as CSV or JSON. CSV files start with ``#`` comment lines holding the library
version and every parameter, and numbers are written with 12 significant
digits.

Exit codes: 0 success, 1 a runtime guard failed, 2 invalid input,
3 enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from . import broadcast as bcm
from . import closed_forms as cf
from . import osrb as sim
from .noiseless import (DistortionMeasure, NoiselessWitness, RateTuple, SearchConfig,
                        certify_achievable, evaluate_witness)
from .prob import Channel, EnumerationCapError, JointPmf, Pmf
from .sideinfo import SiSearchConfig, SiWitnessBoth, si_search


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# value parsers


def _vector(s: str) -> list[float]:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"bad number list {s!r}") from e


def _matrix(s: str) -> np.ndarray:
    rows = [_vector(r) for r in s.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"bad matrix {s!r}: use 'a,b;c,d' with equal row lengths")
    return np.array(rows)


def _ints(s: str) -> list[int]:
    try:
        return [int(t) for t in s.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"bad integer list {s!r}") from e


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {s!r}")


def _targets(s: str) -> list[RateTuple]:
    out = []
    for row in _matrix(s):
        if row.size != 3:
            raise ConfigError("targets are 'R,R0,D' triples separated by ';'")
        out.append(RateTuple(*map(float, row)))
    return out


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


GLOBAL_KEYS = {
    "out": Key(str, None, "output path (stdout if omitted)"),
    "format": Key(str, "csv", "csv or json"),
    "seed": Key(int, 0, "seed for every random choice"),
    "jobs": Key(int, 1, "worker processes"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "binary-surface": {
        "r0_min": Key(float, 0.0, "smallest common-randomness rate"),
        "r0_max": Key(float, 1.0, "largest common-randomness rate"),
        "r0_steps": Key(int, 50, "grid points along R0"),
        "d_min": Key(float, 0.0, "smallest distortion"),
        "d_max": Key(float, 0.5, "largest distortion"),
        "d_steps": Key(int, 50, "grid points along D"),
        "tradeoff": Key(_bool, False, "emit the common-randomness trade-off table instead"),
    },
    "gaussian-family": {
        "eta": Key(float, 0.0, "correlation of X and Z"),
        "delta": Key(float, 1.0, "mean squared error target"),
        "nu": Key(_vector, None, "explicit nu values (comma separated)"),
        "nu_steps": Key(int, 20, "interior grid points in (rho^2, 1) when nu is not given"),
    },
    "region-search": {
        "mode": Key(str, "noiseless", "noiseless, dec (decoder side information) or both"),
        "source": Key(_vector, [0.5, 0.5], "source law Q_X"),
        "side_info": Key(_matrix, None, "joint law Q[x, z]; replaces source in SI modes"),
        "distortion": Key(str, "hamming", "'hamming' or a matrix 'a,b;c,d'"),
        "targets": Key(_targets, None, "'R,R0,D;R,R0,D;...'"),
        "starts": Key(int, 16, "optimizer starts per target"),
        "u_size": Key(int, None, "auxiliary alphabet size"),
        "jointly_iid": Key(_bool, False, "declare reconstruction and Z jointly i.i.d."),
    },
    "bc-tools": {
        "y_channel": Key(_matrix, None, "legitimate channel P(y|x)"),
        "z_channel": Key(_matrix, None, "eavesdropper channel P(z|x)"),
        "y_bsc": Key(float, None, "shortcut: legitimate BSC crossover"),
        "z_bsc": Key(float, None, "shortcut: eavesdropper BSC crossover"),
        "kappa": Key(float, 1.0, "channel uses per source symbol"),
        "rate": Key(float, None, "source rate for the separation check"),
        "source": Key(_vector, None, "witness source law"),
        "u_channel": Key(_matrix, None, "witness P(u|x)"),
        "recon_channel": Key(_matrix, None, "witness P(y|u)"),
        "x_dist": Key(_vector, None, "channel input law (capacity-achieving if omitted)"),
        "samples": Key(int, 1000, "random input laws for the more-capable scan"),
    },
    "osrb": {
        "alpha": Key(float, 0.2, "test-channel crossover of the binary cascade"),
        "beta": Key(float, 0.2, "reconstruction crossover of the binary cascade"),
        "delta": Key(float, 0.15, "offset above the corner rates"),
        "delta_r0": Key(float, None, "separate offset for the common-randomness rate"),
        "rate": Key(float, None, "message rate (overrides the offset)"),
        "cr_rate": Key(float, None, "common-randomness rate (overrides the offset)"),
        "source": Key(_vector, None, "source law for a general witness"),
        "u_channel": Key(_matrix, None, "general witness P(u|x)"),
        "recon_channel": Key(_matrix, None, "general witness P(y|u)"),
        "n_list": Key(_ints, [2, 4, 6, 8], "blocklengths"),
        "seeds": Key(int, 20, "codebook seeds per blocklength"),
    },
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value parameter file")
    for name, key in GLOBAL_KEYS.items():
        common.add_argument(f"--{name}", default=None, help=key.help)
    p = argparse.ArgumentParser(prog="srdp", description="Secure rate-distortion-perception toolkit.")
    p.add_argument("--version", action="version", version=f"srdp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd, parents=[common])
        for name, key in schema.items():
            sp.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None,
                            help=f"{key.help} (default: {key.default})")
    return p


def _read_config(path: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"config {path} is not flat key = value text: {e}") from e
    if len(cp.sections()) != 1:
        raise ConfigError("config files are flat: sections are not allowed")
    return dict(cp["run"])


def resolve(command: str, cli: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    """Merge defaults, config file and flags; parse and reject unknown keys."""
    schema = {**GLOBAL_KEYS, **SCHEMAS[command]}
    raw: dict[str, str] = {}
    if config_path:
        for k, v in _read_config(config_path).items():
            k = k.strip().replace("-", "_")
            if k == "command":
                if v.strip() != command:
                    raise ConfigError(f"config is for command {v.strip()!r}, not {command!r}")
                continue
            if k not in schema:
                raise ConfigError(f"unknown config key {k!r} for {command}")
            raw[k] = v.strip()
    for k, v in cli.items():
        if v is not None:
            raw[k] = v
    out = {}
    for k, key in schema.items():
        if k in raw:
            try:
                out[k] = key.parse(raw[k])
            except ConfigError:
                raise
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value for {k}: {raw[k]!r}") from e
        else:
            out[k] = key.default
    if out["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if out["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    return out


# --------------------------------------------------------------------------
# output


def _num(v: float) -> str:
    if v == 0:
        return "0"
    return format(v, ".12g")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(float(v))
    if isinstance(v, (dict, list)):
        return json.dumps(_jsonable(v), separators=(",", ":"))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return str(f)
        return 0.0 if f == 0 else float(format(f, ".12g"))
    return v


def _param_text(v) -> str:
    if isinstance(v, np.ndarray):
        return ";".join(",".join(_num(x) for x in row) for row in v)
    if isinstance(v, list):
        if v and isinstance(v[0], RateTuple):
            return ";".join(",".join(_num(x) for x in t.as_tuple()) for t in v)
        return ",".join(_cell(x) for x in v)
    return _cell(v)


def render(command: str, params: dict, columns: list[str], rows: list[dict], fmt: str,
           notes: dict | None = None) -> str:
    """Serialise a result table; identical inputs give identical bytes."""
    shown = {k: v for k, v in params.items() if k not in ("out", "format")}
    notes = notes or {}
    if fmt == "json":
        doc = {
            "version": __version__, "command": command,
            "params": {k: _jsonable(v.tolist() if isinstance(v, np.ndarray) else
                                    ([t.as_tuple() for t in v] if isinstance(v, list) and v
                                     and isinstance(v[0], RateTuple) else v))
                       for k, v in shown.items()},
            "notes": _jsonable(notes),
            "columns": columns,
            "rows": [_jsonable({c: r.get(c) for c in columns}) for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# srdp {__version__}\n# command: {command}\n")
    for k, v in shown.items():
        buf.write(f"# {k}: {_param_text(v)}\n")
    for k, v in notes.items():
        buf.write(f"# {k}: {_cell(v)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        cells = []
        for c in columns:
            s = _cell(r.get(c))
            if any(ch in s for ch in ",\"\n"):
                s = '"' + s.replace('"', '""') + '"'
            cells.append(s)
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands


def _linspace(lo: float, hi: float, steps: int, what: str) -> np.ndarray:
    if steps < 1:
        raise ConfigError(f"{what} steps must be >= 1")
    if not hi >= lo:
        raise ConfigError(f"{what} range is empty: [{lo}, {hi}]")
    return np.linspace(lo, hi, steps)


def cmd_binary_surface(p: dict):
    if p["tradeoff"]:
        t = cf.fig4_tradeoff_table()
        cols = ["D", "R0_low", "R0_high", "R_low_cr", "R_high_cr", "R_saving_fraction", "anchor"]
        rows = [vars(r) for r in t.rows]
        notes = {f"band_D={b.D}": f"increase {b.increase[0]}-{b.increase[1]} gives saving "
                 f"{_num(b.saving[0])}-{_num(b.saving[1])}; reported {b.reported[0]}-{b.reported[1]}; "
                 f"overlap {b.overlaps}" for b in t.bands}
        return cols, rows, notes
    if p["r0_min"] < 0 or p["d_min"] < 0:
        raise ConfigError("grid values must be nonnegative")
    r0s = _linspace(p["r0_min"], p["r0_max"], p["r0_steps"], "R0")
    ds = _linspace(p["d_min"], p["d_max"], p["d_steps"], "D")
    rows = []
    for r0 in r0s:
        for d in ds:
            r = cf.binary_min_R(float(r0), float(d))
            rows.append({"R0": r0, "D": d, "R_min": math.inf if r is None else r})
    return ["R0", "D", "R_min"], rows, {"R_min=inf": "no message rate reaches D at this R0"}


def cmd_gaussian_family(p: dict):
    eta, delta = p["eta"], p["delta"]
    thr = cf.zero_rate_threshold(eta)
    if not 0 < delta <= thr:
        raise ConfigError(f"delta = {delta} violates 0 < delta <= 2 - 2|eta| = {thr}")
    rho2 = (1.0 - delta / 2.0) ** 2
    nus = p["nu"]
    if nus is None:
        if p["nu_steps"] < 1:
            raise ConfigError("nu_steps must be >= 1")
        k = p["nu_steps"]
        nus = [rho2 + (1.0 - rho2) * (i + 1) / (k + 1) for i in range(k)]
    rows = []
    for nu in nus:
        r1, r2, r3, flag = cf.gaussian_rates_flagged(eta, delta, float(nu))
        rows.append({"nu": nu, "R_G1": r1, "R_G2": r2, "R_G3": r3, "flag": flag})
    notes = {
        "rho": 1.0 - delta / 2.0,
        "zero_rate_threshold": thr,
        "R_G1_limit_unbounded_cr": cf.gaussian_min_R_limit(eta, delta),
    }
    return ["nu", "R_G1", "R_G2", "R_G3", "flag"], rows, notes


def _distortion(spec: str, n: int) -> DistortionMeasure:
    if spec.strip().lower() == "hamming":
        return DistortionMeasure.hamming(n)
    d = DistortionMeasure(_matrix(spec))
    if d.matrix.shape != (n, n):
        raise ConfigError(f"distortion must be {n}x{n}")
    return d


def cmd_region_search(p: dict):
    mode = p["mode"]
    if mode not in ("noiseless", "dec", "both"):
        raise ConfigError("mode must be noiseless, dec or both")
    if not p["targets"]:
        raise ConfigError("region-search needs --targets")
    cols = ["target_R", "target_R0", "target_D", "status", "R_min", "R0_min", "sum_min", "D",
            "exact", "witness"]
    rows = []
    if mode == "noiseless":
        q = Pmf(p["source"], atol=1e-9)
        d = _distortion(p["distortion"], q.alphabet_size)
        cfg = SearchConfig(starts=p["starts"], seed=p["seed"], u_size=p["u_size"], jobs=p["jobs"])
        for t in p["targets"]:
            res = certify_achievable(q, d, t, cfg)
            row = {"target_R": t.R, "target_R0": t.R0, "target_D": t.D, "status": res.status}
            if res.found:
                row.update(R_min=res.corner.R, R0_min=res.corner.R0, D=res.corner.D, exact=True,
                           witness={"u_channel": res.witness.u_channel.matrix,
                                    "y_channel": res.witness.y_channel.matrix})
            rows.append(row)
        return cols, rows, {}
    if p["side_info"] is not None:
        joint = JointPmf(p["side_info"], atol=1e-9)
    else:
        joint = JointPmf(np.array(p["source"])[:, None], atol=1e-9)
    d = _distortion(p["distortion"], joint.shape[0])
    cfg = SiSearchConfig(starts=p["starts"], seed=p["seed"], u_size=p["u_size"])
    for t in p["targets"]:
        res = si_search(joint, d, t, mode, cfg, p["jointly_iid"])
        row = {"target_R": t.R, "target_R0": t.R0, "target_D": t.D, "status": res.status}
        if res.found:
            pt = res.point
            w = res.witness
            tables = ({"uy_channel": w.uy_channel.matrix} if isinstance(w, SiWitnessBoth)
                      else {"u_channel": w.u_channel.matrix, "y_channel": w.y_channel.matrix})
            row.update(R_min=pt.R_min, R0_min=pt.R0_min, sum_min=pt.sum_min, D=pt.D,
                       exact=True if mode == "both" else pt.exactness.exact, witness=tables)
        rows.append(row)
    return cols, rows, {}


def cmd_bc_tools(p: dict):
    def channel(mat_key, bsc_key):
        if p[mat_key] is not None:
            return Channel(p[mat_key], atol=1e-9)
        if p[bsc_key] is not None:
            return Channel.bsc(p[bsc_key])
        raise ConfigError(f"bc-tools needs --{mat_key.replace('_', '-')} or --{bsc_key.replace('_', '-')}")

    wy = channel("y_channel", "y_bsc")
    wz = channel("z_channel", "z_bsc")
    bc = bcm.BroadcastChannel.from_marginals(wy, wz)
    check = bcm.more_capable_check(bc, bcm.CheckConfig(samples=p["samples"], seed=p["seed"]))
    cap = bcm.blahut_arimoto(wy)
    rows = [
        {"quantity": "more_capable_status", "value": check.status},
        {"quantity": "more_capable_margin", "value": check.margin},
        {"quantity": "violating_input", "value": None if check.witness is None else check.witness.probs.tolist()},
        {"quantity": "C_unsecure", "value": cap.capacity},
        {"quantity": "capacity_input", "value": cap.input_law.probs.tolist()},
    ]
    rate = p["rate"]
    parts = [p["source"], p["u_channel"], p["recon_channel"]]
    if any(v is not None for v in parts):
        if any(v is None for v in parts):
            raise ConfigError("a witness needs source, u_channel and recon_channel together")
        w = NoiselessWitness(Pmf(p["source"], atol=1e-9), Channel(p["u_channel"], atol=1e-9),
                             Channel(p["recon_channel"], atol=1e-9))
        x_dist = Pmf(p["x_dist"], atol=1e-9) if p["x_dist"] is not None else cap.input_law
        d = DistortionMeasure.hamming(w.source.alphabet_size)
        if check.status == "violated":
            rows.append({"quantity": "region_point", "value": "refused: channel is not more capable"})
        else:
            pt = bcm.bc_inner_point(bcm.BcWitness(w, x_dist, Channel.identity(bc.input_size)), bc, d)
            rows += [{"quantity": k, "value": getattr(pt, k)} for k in ("R_lo", "R_hi", "R0_min", "R0_raw", "D")]
            rows.append({"quantity": "rate_interval_empty", "value": pt.empty})
        if rate is None:
            rate = evaluate_witness(w, d).R
    if rate is not None:
        rows.append({"quantity": "separation_rate", "value": rate})
        rows.append({"quantity": "separation_feasible", "value": bcm.separation_feasible(p["kappa"], rate, wy)})
    return ["quantity", "value"], rows, {}


def cmd_osrb(p: dict):
    explicit = [p["source"], p["u_channel"], p["recon_channel"]]
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise ConfigError("a general witness needs source, u_channel and recon_channel together")
        w = NoiselessWitness(Pmf(p["source"], atol=1e-9), Channel(p["u_channel"], atol=1e-9),
                             Channel(p["recon_channel"], atol=1e-9))
        corner = evaluate_witness(w, DistortionMeasure.hamming(w.source.alphabet_size))
        d0 = p["delta"] if p["delta_r0"] is None else p["delta_r0"]
        R = p["rate"] if p["rate"] is not None else max(corner.R + p["delta"], 0.0)
        R0 = p["cr_rate"] if p["cr_rate"] is not None else max(corner.R0 + d0, 0.0)
        base = sim.OsrbConfig.from_witness(w, 1, R, R0, p["seed"])
    else:
        base = sim.binary_cascade_config(p["alpha"], p["beta"], p["delta"], 1, p["seed"], p["delta_r0"])
        if p["rate"] is not None or p["cr_rate"] is not None:
            base = base.with_(R=base.R if p["rate"] is None else p["rate"],
                              R0=base.R0 if p["cr_rate"] is None else p["cr_rate"])
    if not p["n_list"] or min(p["n_list"]) < 1:
        raise ConfigError("n_list must hold positive blocklengths")
    table = sim.rate_sweep_experiment(base, p["n_list"], p["seeds"], jobs=p["jobs"])
    rows = [m.row() for m in table.runs]
    notes = {"R": base.R, "R0": base.R0}
    for tr in table.trend:
        notes[f"median n={tr.n}"] = ", ".join(f"{k}={_num(v)}" for k, v in tr.median.items())
    bad = [f"n={m.n} seed={m.seed}" for m in table.runs if m.unreliable]
    if bad:
        notes["unreliable_runs"] = "; ".join(bad)
    return list(sim.CSV_COLUMNS), rows, notes


COMMANDS = {
    "binary-surface": cmd_binary_surface,
    "gaussian-family": cmd_gaussian_family,
    "region-search": cmd_region_search,
    "bc-tools": cmd_bc_tools,
    "osrb": cmd_osrb,
}


def run(argv: list[str] | None = None) -> tuple[str, str | None]:
    """Execute one command; returns the rendered output and its destination."""
    args = _build_parser().parse_args(argv)
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    params = resolve(args.command, cli, args.config)
    cols, rows, notes = COMMANDS[args.command](params)
    return render(args.command, params, cols, rows, params["format"], notes), params["out"]


def main(argv: list[str] | None = None) -> int:
    try:
        text, out = run(argv)
    except EnumerationCapError as e:
        print(f"srdp: {e}", file=sys.stderr)
        return 3
    except (bcm.ConvergenceError, bcm.NotMoreCapableError) as e:
        print(f"srdp: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"srdp: {e}", file=sys.stderr)
        return 2
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
