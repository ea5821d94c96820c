"""Configuration parsing, scenario orchestration, and data emission.

Configs are flat ``key = value`` text (UTF-8, ``#`` comments, optional
``[section]`` headers that are ignored).  All frequencies are in
gamma-units; the coupling may be given directly (``C``), as the
dimensionless ``C_pow23`` target, or through the optional physical block
(``physical_gamma, band_n, band_a, band_c, dipole_d, epsilon_0``) that maps
stack geometry and dipole data to gamma-units via the band-structure
module.

Every emitted artifact starts with the resolved configuration between
``# config-begin`` / ``# config-end`` markers; that block re-parses to the
identical RunConfig, and identical config + seed produce byte-identical
output.

Exit status: 0 success, 2 configuration error, 3 numerical-accuracy error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AccuracyError,
    ConfigError,
    ParameterDomainError,
    PbgsimError,
    PoleError,
    SingularityError,
    StepperError,
)
from .inversion import ContourSpec, discretized_modes_oracle, nojump_populations
from .montecarlo import ensemble_average, photon_statistics
from .renewal import renewal_transform_check, solve_renewal
from .resolvent import BandEdgeReservoir, FlatReservoir, SystemParams
from .spectral import BandModel, CouplingModel, effective_coupling
from .steadystate import detuning_scan, free_space_branching

__all__ = ["RunConfig", "parse_config", "run_scenario", "main"]

SCENARIOS = ("nojump", "ensemble", "montecarlo", "scan", "oracle", "branching")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters (gamma-units)."""

    scenario: str = "nojump"
    gamma: float = 1.0
    v_ab: float = 1.0
    coupling_c: float = (1.0 / 3.0) ** 1.5
    gamma_prime: float = 1.0
    reservoir: str = "bandedge"
    omega_e_minus_omega_b: float = 0.0
    detuning: float = 0.0
    t_final: float = 30.0
    dt: float = 0.005
    window: float = 300.0
    grid_points: int = 600_001
    contour_offset: float = 0.0
    edge_halfwidth: float = 0.5
    edge_refinement: int = 24
    asymptote_subtraction: bool = True
    n_traj: int = 10_000
    master_seed: int = 20_260_809
    horizon: float | None = None
    modes: int = 2000
    omega_max_offset: float = 100.0
    delta_min: float = -3.0
    delta_max: float = 3.0
    delta_points: int = 61
    v_list: tuple = (0.5, 3.0)
    gamma_prime_list: tuple = (0.0, 0.5, 1.0, 2.0)
    out: str | None = None
    fmt: str = "csv"


def _parse_float(raw: str) -> float:
    raw = raw.strip()
    if "/" in raw:
        num, _, den = raw.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad rational literal {raw!r}") from exc
    return float(raw)


def _parse_int(raw: str) -> int:
    return int(raw.strip(), 10)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"bad boolean literal {raw!r}")


def _parse_float_list(raw: str) -> tuple:
    parts = [p for p in (s.strip() for s in raw.split(",")) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(_parse_float(p) for p in parts)


def _parse_opt_float(raw: str):
    return None if raw.strip().lower() == "none" else _parse_float(raw)


def _parse_opt_str(raw: str):
    return None if raw.strip().lower() == "none" else raw.strip()


def _parse_str(raw: str) -> str:
    return raw.strip()


# key -> (dataclass field, parser); field None marks pseudo-keys resolved
# during assembly (coupling and physical-units block)
_KEYS = {
    "scenario": ("scenario", _parse_str),
    "gamma": ("gamma", _parse_float),
    "V_ab": ("v_ab", _parse_float),
    "C": (None, _parse_float),
    "C_pow23": (None, _parse_float),
    "gamma_prime": ("gamma_prime", _parse_float),
    "reservoir": ("reservoir", _parse_str),
    "omega_e_minus_omega_b": ("omega_e_minus_omega_b", _parse_float),
    "detuning": ("detuning", _parse_float),
    "T": ("t_final", _parse_float),
    "dt": ("dt", _parse_float),
    "window": ("window", _parse_float),
    "grid_points": ("grid_points", _parse_int),
    "contour_offset": ("contour_offset", _parse_float),
    "edge_halfwidth": ("edge_halfwidth", _parse_float),
    "edge_refinement": ("edge_refinement", _parse_int),
    "asymptote_subtraction": ("asymptote_subtraction", _parse_bool),
    "N_traj": ("n_traj", _parse_int),
    "master_seed": ("master_seed", _parse_int),
    "horizon": ("horizon", _parse_opt_float),
    "modes": ("modes", _parse_int),
    "omega_max_offset": ("omega_max_offset", _parse_float),
    "delta_min": ("delta_min", _parse_float),
    "delta_max": ("delta_max", _parse_float),
    "delta_points": ("delta_points", _parse_int),
    "V_list": ("v_list", _parse_float_list),
    "gamma_prime_list": ("gamma_prime_list", _parse_float_list),
    "out": ("out", _parse_opt_str),
    "format": ("fmt", _parse_str),
    "physical_gamma": (None, _parse_float),
    "band_n": (None, _parse_float),
    "band_a": (None, _parse_float),
    "band_c": (None, _parse_float),
    "dipole_d": (None, _parse_float),
    "epsilon_0": (None, _parse_float),
}

_PHYSICAL_BLOCK = ("physical_gamma", "band_n", "band_a", "band_c",
                   "dipole_d", "epsilon_0")


def parse_config(text: str) -> RunConfig:
    """Parse and validate flat key = value configuration text.

    Unknown keys, duplicate keys, type mismatches and invariant violations
    raise ConfigError naming the key and line.
    """
    seen: dict[str, tuple] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body or (body.startswith("[") and body.endswith("]")):
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} "
                              f"(first set on line {seen[key][0]})")
        field, parser = _KEYS[key]
        try:
            value = parser(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from exc
        seen[key] = (lineno, field, value)

    fields = {}
    for key, (lineno, field, value) in seen.items():
        if field is not None:
            fields[field] = value

    coupling_keys = [k for k in ("C", "C_pow23") if k in seen]
    physical_keys = [k for k in _PHYSICAL_BLOCK if k in seen]
    if len(coupling_keys) == 2:
        raise ConfigError("keys 'C' and 'C_pow23' are mutually exclusive")
    if physical_keys and coupling_keys:
        raise ConfigError("the physical-units block conflicts with 'C'/'C_pow23'")
    if physical_keys and len(physical_keys) != len(_PHYSICAL_BLOCK):
        missing = sorted(set(_PHYSICAL_BLOCK) - set(physical_keys))
        raise ConfigError(f"incomplete physical-units block; missing {missing}")
    if "C" in seen:
        fields["coupling_c"] = seen["C"][2]
    elif "C_pow23" in seen:
        c23 = seen["C_pow23"][2]
        if c23 < 0:
            raise ConfigError("key 'C_pow23': invariant violated: C_pow23 must be >= 0")
        fields["coupling_c"] = c23 ** 1.5
    elif physical_keys:
        vals = {k: seen[k][2] for k in _PHYSICAL_BLOCK}
        try:
            band = BandModel(scatterer_radius=vals["band_a"],
                             refractive_index=vals["band_n"],
                             light_speed=vals["band_c"])
            micro = CouplingModel(dipole_moment=vals["dipole_d"],
                                  vacuum_permittivity=vals["epsilon_0"])
            c_phys = effective_coupling(micro, band)
        except ParameterDomainError as exc:
            raise ConfigError(f"physical-units block: {exc}") from exc
        if vals["physical_gamma"] <= 0:
            raise ConfigError("key 'physical_gamma': invariant violated: must be > 0")
        fields["coupling_c"] = c_phys / vals["physical_gamma"] ** 1.5

    cfg = RunConfig(**fields)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    def bad(key, rule):
        raise ConfigError(f"key {key!r}: invariant violated: {rule}")

    if cfg.scenario not in SCENARIOS:
        bad("scenario", f"must be one of {SCENARIOS}")
    if cfg.gamma < 0:
        bad("gamma", f"gamma must be >= 0 (got {cfg.gamma})")
    if cfg.v_ab < 0:
        bad("V_ab", "V_ab must be >= 0")
    if cfg.coupling_c < 0:
        bad("C", "C must be >= 0")
    if cfg.gamma_prime < 0:
        bad("gamma_prime", "gamma_prime must be >= 0")
    if cfg.reservoir not in ("bandedge", "flat"):
        bad("reservoir", "must be 'bandedge' or 'flat'")
    if cfg.t_final <= 0:
        bad("T", "T must be > 0")
    if cfg.dt <= 0 or cfg.dt > cfg.t_final:
        bad("dt", "dt must satisfy 0 < dt <= T")
    if cfg.window <= 0:
        bad("window", "window must be > 0")
    if cfg.grid_points < 2:
        bad("grid_points", "grid_points must be >= 2")
    if cfg.contour_offset < 0:
        bad("contour_offset", "contour_offset must be >= 0")
    if cfg.edge_halfwidth <= 0:
        bad("edge_halfwidth", "edge_halfwidth must be > 0")
    if cfg.edge_refinement < 1:
        bad("edge_refinement", "edge_refinement must be >= 1")
    if cfg.n_traj < 1:
        bad("N_traj", "N_traj must be >= 1")
    if cfg.master_seed < 0:
        bad("master_seed", "master_seed must be >= 0")
    if cfg.horizon is not None and cfg.horizon <= 0:
        bad("horizon", "horizon must be > 0 (or none)")
    if cfg.modes < 1:
        bad("modes", "modes must be >= 1")
    if cfg.omega_max_offset <= 0:
        bad("omega_max_offset", "omega_max_offset must be > 0")
    if cfg.delta_points < 2:
        bad("delta_points", "delta_points must be >= 2")
    if cfg.delta_max <= cfg.delta_min:
        bad("delta_max", "delta_max must exceed delta_min")
    if any(v < 0 for v in cfg.v_list):
        bad("V_list", "entries must be >= 0")
    if any(g < 0 for g in cfg.gamma_prime_list):
        bad("gamma_prime_list", "entries must be >= 0")
    if cfg.fmt not in ("csv", "jsonl"):
        bad("format", "must be 'csv' or 'jsonl'")
    if cfg.gamma == 0 and cfg.coupling_c == 0:
        bad("gamma", "at least one of gamma, C must be positive")


# ---------------------------------------------------------------------------
# emission


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TO_KEY = {field: key for key, (field, _) in _KEYS.items() if field is not None}
_FIELD_TO_KEY["coupling_c"] = "C"


def config_lines(cfg: RunConfig) -> list[str]:
    lines = []
    for f in dataclasses.fields(cfg):
        key = _FIELD_TO_KEY[f.name]
        lines.append(f"{key} = {_fmt_value(getattr(cfg, f.name))}")
    return lines


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _render(cfg: RunConfig, columns: dict, summary: dict | None) -> str:
    if cfg.fmt == "jsonl":
        return _render_jsonl(cfg, columns, summary)
    out = ["# pbgsim " + cfg.scenario, "# config-begin"]
    out += ["# " + line for line in config_lines(cfg)]
    out.append("# config-end")
    if summary:
        out.append("# summary = " + json.dumps(_jsonable(summary), sort_keys=True))
    names = list(columns)
    out.append(",".join(names))
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    for i in range(len(arrays[0])):
        out.append(",".join(_num(a[i]) for a in arrays))
    return "\n".join(out) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _render_jsonl(cfg: RunConfig, columns: dict, summary: dict | None) -> str:
    lines = [json.dumps({"config": {_FIELD_TO_KEY[f.name]: _jsonable(getattr(cfg, f.name))
                                    if not isinstance(getattr(cfg, f.name), tuple)
                                    else list(getattr(cfg, f.name))
                                    for f in dataclasses.fields(cfg)}},
                        sort_keys=True)]
    if summary:
        lines.append(json.dumps({"summary": _jsonable(summary)}, sort_keys=True))
    names = list(columns)
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    for i in range(len(arrays[0])):
        row = {n: _jsonable(a[i]) for n, a in zip(names, arrays)}
        lines.append(json.dumps({"row": row}, sort_keys=True))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# scenario orchestration


def _system_params(cfg: RunConfig, v_ab: float | None = None) -> SystemParams:
    return SystemParams(
        gamma=cfg.gamma,
        v_ab=cfg.v_ab if v_ab is None else v_ab,
        coupling_c=cfg.coupling_c,
        omega_b=-cfg.omega_e_minus_omega_b,  # omega_e = 0 fixes the scale
        omega_l=cfg.detuning,
        omega_e=0.0,
    )


def _reservoir(cfg: RunConfig, params: SystemParams):
    if cfg.reservoir == "flat":
        return FlatReservoir(gamma_prime=cfg.gamma_prime)
    return BandEdgeReservoir(coupling_c=params.coupling_c, omega_e=params.omega_e)


def _contour_spec(cfg: RunConfig) -> ContourSpec:
    return ContourSpec(
        window_halfwidth=cfg.window,
        offset=cfg.contour_offset,
        grid_points=cfg.grid_points,
        edge_refinement=cfg.edge_refinement,
        edge_halfwidth=cfg.edge_halfwidth,
        asymptote_subtraction=cfg.asymptote_subtraction,
    )


def _run_nojump(cfg: RunConfig):
    params = _system_params(cfg)
    sol = nojump_populations(params, _reservoir(cfg, params), _contour_spec(cfg),
                             T=cfg.t_final, dt=cfg.dt)
    cols = {"t": sol.t, "pi0_a": sol.pi0_a, "pi0_b": sol.pi0_b,
            "pi0_c": sol.pi0_c, "P": sol.norm}
    return cols, {"p_inf_estimate": sol.p_inf_estimate}


def _run_ensemble(cfg: RunConfig):
    params = _system_params(cfg)
    sol = nojump_populations(params, _reservoir(cfg, params), _contour_spec(cfg),
                             T=cfg.t_final, dt=cfg.dt)
    volterra = solve_renewal(sol)
    transform = renewal_transform_check(sol)
    sup = float(np.max(np.abs(volterra.pibar_b - transform.pibar_b)))
    cols = {"t": sol.t, "pibar_a": volterra.pibar_a, "pibar_b": volterra.pibar_b,
            "pibar_c": volterra.pibar_c, "pibar_b_transform": transform.pibar_b}
    return cols, {"transform_sup_diff": sup}


def _run_montecarlo(cfg: RunConfig):
    params = _system_params(cfg)
    sol = nojump_populations(params, _reservoir(cfg, params), _contour_spec(cfg),
                             T=cfg.t_final, dt=cfg.dt)
    horizon = cfg.horizon if cfg.horizon is not None else cfg.t_final
    stats = ensemble_average(cfg.n_traj, cfg.master_seed, sol, horizon=horizon)
    summary = {
        "N_traj": stats.n_traj,
        "master_seed": stats.master_seed,
        "mean_photons": stats.mean_photons,
        "histogram": stats.histogram.tolist(),
        "non_terminated_fraction": stats.non_terminated_fraction,
        "p_inf_estimate": sol.p_inf_estimate,
    }
    cols = {"t": stats.t, "mc_a": stats.mean_a, "mc_b": stats.mean_b,
            "mc_c": stats.mean_c, "se_a": stats.se_a, "se_b": stats.se_b,
            "se_c": stats.se_c}
    return cols, summary


def _run_oracle(cfg: RunConfig):
    if cfg.reservoir != "bandedge":
        raise ConfigError("the oracle scenario compares band-edge routes; "
                          "set reservoir = bandedge")
    params = _system_params(cfg)
    sol = nojump_populations(params, _reservoir(cfg, params), _contour_spec(cfg),
                             T=cfg.t_final, dt=cfg.dt)
    modes = discretized_modes_oracle(params, modes=cfg.modes,
                                     omega_max=params.omega_e + cfg.omega_max_offset,
                                     T=cfg.t_final, dt=cfg.dt)
    diff = np.abs(sol.pi0_b - modes.pi0_b)
    cols = {"t": sol.t, "pi0_b_contour": sol.pi0_b, "pi0_b_modes": modes.pi0_b,
            "abs_diff": diff}
    return cols, {"sup_norm_diff": float(diff.max()), "modes": cfg.modes,
                  "omega_max_offset": cfg.omega_max_offset}


def _run_branching(cfg: RunConfig):
    rows = {"gamma_prime": [], "V_ab": [], "P_T": [], "expected": [], "abs_err": []}
    for gp in cfg.gamma_prime_list:
        for v in cfg.v_list:
            p_t = free_space_branching(cfg.gamma, gp, v, omega_l=cfg.detuning,
                                       omega_b=-cfg.omega_e_minus_omega_b,
                                       T=cfg.t_final, dt=cfg.dt,
                                       spec=_contour_spec(cfg))
            expected = gp / (cfg.gamma + gp) if (cfg.gamma + gp) > 0 else 0.0
            rows["gamma_prime"].append(gp)
            rows["V_ab"].append(v)
            rows["P_T"].append(p_t)
            rows["expected"].append(expected)
            rows["abs_err"].append(abs(p_t - expected))
    cols = {k: np.asarray(v) for k, v in rows.items()}
    return cols, {"max_abs_err": float(cols["abs_err"].max())}


def run_scenario(cfg: RunConfig) -> dict:
    """Execute the configured scenario; returns {filename_or_None: text}.

    Scan runs emit one artifact per drive strength; every other scenario
    emits one.  A None key means stdout.
    """
    if cfg.scenario == "scan":
        params = _system_params(cfg)
        grid = np.linspace(cfg.delta_min, cfg.delta_max, cfg.delta_points)
        results = detuning_scan(params, grid, cfg.v_list)
        artifacts = {}
        for res in results:
            cols = {"delta": res.detuning, "P_inf": res.p_inf,
                    "mean_photons": res.mean_photons}
            summary = {"V_ab": res.v_ab, **res.params}
            if cfg.out is None:
                name = None
            else:
                path = Path(cfg.out)
                name = str(path.with_name(f"{path.stem}_V{res.v_ab!r}{path.suffix}"))
            text = _render(cfg, cols, summary)
            if name in artifacts:
                text = artifacts[name] + text
            artifacts[name] = text
        return artifacts

    runner = {
        "nojump": _run_nojump,
        "ensemble": _run_ensemble,
        "montecarlo": _run_montecarlo,
        "oracle": _run_oracle,
        "branching": _run_branching,
    }[cfg.scenario]
    cols, summary = runner(cfg)
    return {cfg.out: _render(cfg, cols, summary)}


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Driven three-level atom at a photonic band edge "
                    "(no-jump, renewal, Monte-Carlo and steady-state scenarios).",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", metavar="FILE", default=None)
    parser.add_argument("--seed", type=int, default=None, metavar="S")
    parser.add_argument("--out", default=None, metavar="PATH")
    parser.add_argument("--format", dest="fmt", choices=("csv", "jsonl"), default=None)
    args = parser.parse_args(argv)

    try:
        text = ""
        if args.config is not None:
            text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
        overrides = {"scenario": args.scenario}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            overrides["master_seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        if args.fmt is not None:
            overrides["fmt"] = args.fmt
        cfg = dataclasses.replace(cfg, **overrides)
        _validate(cfg)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ParameterDomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        artifacts = run_scenario(cfg)
    except (ConfigError, ParameterDomainError) as exc:
        print(f"config error [{cfg.scenario}]: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, PoleError, SingularityError, StepperError) as exc:
        print(f"numerical-accuracy error [{cfg.scenario}]: {exc}", file=sys.stderr)
        return 3
    except PbgsimError as exc:
        print(f"error [{cfg.scenario}]: {exc}", file=sys.stderr)
        return 3

    for name, text in artifacts.items():
        if name is None:
            sys.stdout.write(text)
        else:
            path = Path(name)
            if path.parent and not path.parent.exists():
                path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
