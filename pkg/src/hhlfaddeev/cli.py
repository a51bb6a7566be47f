"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``) and lets
flags override it. Exit codes: 0 success, 2 configuration error,
3 numerical or convergence failure. Results go to stdout or the output
file, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import re
import sys
from dataclasses import dataclass

from . import analysis
from .errors import ConfigurationError, SolverError
from .faddeev import POLE_HALF_WIDTH, P_COUNT, ROOT_TOL, WINDOW_MULTIPLIER
from .potentials import PotentialSpec, canonical_shape
from .twobody import bound_energies, default_two_body_grid, tune_magnitude, weinberg_solve
from .wavefunction import DEFAULT_EXTENT, DEFAULT_RESOLUTION, WaveField2D, fidelity, sample_field

log = logging.getLogger("hhlfaddeev")

DEFAULTS = {
    "potential": {"shape": "gaussian", "r": 1, "e2": -1e-4, "v0": None},
    "mass": {"alpha": 20.0},
    "two_body_grid": {"count": 200},
    "three_body_grid": {"count": P_COUNT, "pole_half_width": POLE_HALF_WIDTH},
    "channels": {"nu_max": 10, "include": None},
    "search": {"multiplier": WINDOW_MULTIPLIER, "steps": 48, "closest": 1e-6},
    "tolerances": {"root": ROOT_TOL},
    "field": {"extent": DEFAULT_EXTENT, "resolution": DEFAULT_RESOLUTION},
    "sweep": {"shapes": ["gaussian"], "r": [1], "e2_list": [-1e-3, -1e-4, -1e-5], "fidelity": False},
    "output": {"path": None, "format": "csv"},
}


def config_fields() -> list[str]:
    return [f"{sec}.{key}" for sec, body in DEFAULTS.items() for key in body]


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is None:
            return cls(data)
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigurationError("config root must be a JSON object")
        for sec, body in user.items():
            if sec not in DEFAULTS:
                raise ConfigurationError(f"unknown config section {sec!r}")
            if not isinstance(body, dict):
                raise ConfigurationError(f"config section {sec!r} must be an object")
            for key, val in body.items():
                if key not in DEFAULTS[sec]:
                    raise ConfigurationError(f"unknown config key {sec}.{key}")
                data[sec][key] = val
        return cls(data)

    def set(self, dotted: str, value) -> None:
        if value is not None:
            sec, key = dotted.split(".")
            self.data[sec][key] = value

    def get(self, dotted: str):
        sec, key = dotted.split(".")
        return self.data[sec][key]

    def settings(self) -> analysis.SolveSettings:
        d = self.data
        return analysis.SolveSettings(
            alpha=float(d["mass"]["alpha"]), nu_max=int(d["channels"]["nu_max"]),
            p_count=int(d["three_body_grid"]["count"]), k_count=int(d["two_body_grid"]["count"]),
            pole_half_width=float(d["three_body_grid"]["pole_half_width"]),
            multiplier=float(d["search"]["multiplier"]), scan_steps=int(d["search"]["steps"]),
            closest=float(d["search"]["closest"]), root_tol=float(d["tolerances"]["root"]),
            extent=float(d["field"]["extent"]), resolution=int(d["field"]["resolution"]))


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad integer list {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}") from exc


def _emit_json(obj, path=None) -> None:
    text = json.dumps(obj, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _apply_common(cfg: RunConfig, args) -> None:
    cfg.set("potential.shape", getattr(args, "shape", None))
    cfg.set("potential.r", getattr(args, "r", None))
    cfg.set("potential.e2", getattr(args, "e2", None))
    cfg.set("mass.alpha", getattr(args, "alpha", None))
    cfg.set("channels.nu_max", getattr(args, "nu_max", None))
    if getattr(args, "include", None) is not None:
        cfg.set("channels.include", _int_list(args.include))
    cfg.set("output.path", getattr(args, "out", None))
    cfg.set("output.format", getattr(args, "format", None))


def _symmetries(text: str | None):
    if text in (None, "both"):
        return ("boson", "fermion")
    return (text,)


def cmd_tune(cfg: RunConfig, args) -> int:
    shape = canonical_shape(cfg.get("potential.shape"))
    r, e2 = int(cfg.get("potential.r")), float(cfg.get("potential.e2"))
    grid = default_two_body_grid(e2, int(cfg.get("two_body_grid.count")))
    spec, info = tune_magnitude(shape, r, e2, grid)
    _emit_json({"shape": shape, "r": r, "target": e2, **info}, cfg.get("output.path"))
    return 0


def cmd_two_body(cfg: RunConfig, args) -> int:
    shape = canonical_shape(cfg.get("potential.shape"))
    r, e2 = int(cfg.get("potential.r")), float(cfg.get("potential.e2"))
    grid = default_two_body_grid(e2, int(cfg.get("two_body_grid.count")))
    v0 = cfg.get("potential.v0")
    spec = PotentialSpec(shape, float(v0)) if v0 is not None else tune_magnitude(shape, r, e2, grid)[0]
    states = bound_energies(spec, grid, r)
    out = {"shape": shape, "v0": spec.v0,
           "bound_states": [{"r": s.r, "energy": s.energy, "parity": s.parity} for s in states]}
    if args.energy is not None:
        nu = 1 if spec.is_rank_one else int(cfg.get("channels.nu_max"))
        sys_E = weinberg_solve(spec, args.energy, grid, nu)
        out["weinberg"] = {"energy": args.energy, "eta": sys_E.etas.tolist(), "parity": sys_E.parities.tolist()}
    _emit_json(out, cfg.get("output.path"))
    return 0


def cmd_spectrum(cfg: RunConfig, args) -> int:
    shape = canonical_shape(cfg.get("potential.shape"))
    r, e2 = int(cfg.get("potential.r")), float(cfg.get("potential.e2"))
    settings = cfg.settings()
    sol = analysis.solve_resonance(shape, r, e2, settings, cfg.get("channels.include"), _symmetries(args.symmetry))
    nu_max = 1 if sol.potential.is_rank_one else settings.nu_max
    _emit_json({"states": [{"n": s.n, "symmetry": s.symmetry, "energy": s.energy, "ratio": s.ratio}
                           for s in sol.states],
                "two_body_energy": e2, "v0": sol.potential.v0, "nu_max": nu_max,
                "deep_energies": {str(k): v for k, v in sol.deep_energies.items()}},
               cfg.get("output.path"))
    return 0


def cmd_wavefunction(cfg: RunConfig, args) -> int:
    shape = canonical_shape(cfg.get("potential.shape"))
    r, e2 = int(cfg.get("potential.r")), float(cfg.get("potential.e2"))
    settings = cfg.settings()
    sym = "boson" if args.n % 2 == 0 else "fermion"
    sol = analysis.solve_resonance(shape, r, e2, settings, cfg.get("channels.include"), sym)
    match = [s for s in sol.states if s.n == args.n]
    if not match:
        raise SolverError(f"state n={args.n} not found")
    out = cfg.get("output.path")
    if not out:
        raise ConfigurationError("wavefunction needs --out")
    field = sample_field(match[0], settings.extent, settings.resolution)
    field.to_csv(out)
    print(json.dumps({"n": args.n, "energy": match[0].energy, "ratio": match[0].ratio,
                      "norm": field.norm_certificate, "path": out}))
    return 0


def cmd_fidelity(cfg: RunConfig, args) -> int:
    a = WaveField2D.from_csv(args.a)
    b = WaveField2D.from_csv(args.b)
    _emit_json({"F": fidelity(a, b)})
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    settings = cfg.settings()
    if args.e2_list:
        cfg.set("sweep.e2_list", _float_list(args.e2_list))
    if args.fidelity:
        cfg.set("sweep.fidelity", True)
    shapes = [args.shape] if args.shape else cfg.get("sweep.shapes")
    rs = [args.r] if args.r is not None else cfg.get("sweep.r")
    records = []
    for shape in shapes:
        for r in rs:
            records += analysis.universality_sweep(shape, int(r), cfg.get("sweep.e2_list"), settings.alpha,
                                                   settings, bool(cfg.get("sweep.fidelity")), args.jobs)
    out = cfg.get("output.path")
    if out:
        analysis.emit(records, cfg.get("output.format"), out)
    else:
        _emit_json([rec.row() for rec in records])
    failed = [rec for rec in records if rec.error]
    return 3 if failed else 0


def cmd_ablate(cfg: RunConfig, args) -> int:
    settings = cfg.settings()
    masks = [_int_list(m) for m in args.masks.split("|")]
    e2_list = _float_list(args.e2_list) if args.e2_list else cfg.get("sweep.e2_list")
    shape = args.shape or cfg.get("potential.shape")
    records = analysis.ablation_study(shape, args.r, args.n, masks, e2_list, settings, args.jobs)
    out = cfg.get("output.path")
    if out:
        analysis.emit_ablation(records, cfg.get("output.format"), out)
    else:
        _emit_json([{"mask": list(rec.included), "limit_ratio": rec.limit_ratio, "trace": rec.trace}
                    for rec in records])
    return 0


def cmd_reference(cfg: RunConfig, args) -> int:
    ratios = analysis.reference_ratios(float(cfg.get("mass.alpha")), cfg.settings())
    _emit_json({"alpha": float(cfg.get("mass.alpha")),
                "bosons": {str(n): v for n, v in ratios.items() if n % 2 == 0},
                "fermions": {str(n): v for n, v in ratios.items() if n % 2 == 1}},
               cfg.get("output.path"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    fields = ", ".join(config_fields())
    parser = argparse.ArgumentParser(prog="hhlfaddeev", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, potential=True):
        p = sub.add_parser(name, help=help_text, description=help_text,
                           epilog=f"config fields honored: {fields}")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--alpha", type=float, help="mass ratio M/m")
        if potential:
            p.add_argument("--shape", help="lorentz3 | gauss | contact")
            p.add_argument("--r", type=int, help="resonance index")
            p.add_argument("--e2", type=float, help="target two-body energy E_r (negative)")
        p.set_defaults(func=func)
        return p

    p = add("tune", cmd_tune, "tune v0 so that the r-th two-body state sits at E_r")
    p.add_argument("--out")
    p = add("two-body", cmd_two_body, "two-body bound states and Weinberg eigenvalues")
    p.add_argument("--v0", type=float, help="use this magnitude instead of tuning")
    p.add_argument("--energy", type=float, help="also report eta_nu at this energy")
    p.add_argument("--nu-max", type=int)
    p.add_argument("--out")
    p = add("spectrum", cmd_spectrum, "three-body states of the resonance set")
    p.add_argument("--symmetry", choices=("boson", "fermion", "both"), default="both")
    p.add_argument("--include", help="comma-separated expansion terms to keep, e.g. 0,2")
    p.add_argument("--nu-max", type=int)
    p.add_argument("--out")
    p = add("wavefunction", cmd_wavefunction, "sample the normalized wave function of state n to CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--include")
    p.add_argument("--nu-max", type=int)
    p.add_argument("--out")
    p = add("fidelity", cmd_fidelity, "fidelity between two sampled fields", potential=False)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p = add("sweep", cmd_sweep, "energy ratios, deviations and fidelities over two-body energies")
    p.add_argument("--e2-list", help="comma-separated two-body energies")
    p.add_argument("--fidelity", action="store_true", help="also compute fidelities")
    p.add_argument("--nu-max", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out")
    p = add("ablate", cmd_ablate, "deep-dimer ablation of one state over a two-body energy sweep")
    p.set_defaults(r=2)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--masks", default="0,1,2|0,2|1,2|2")
    p.add_argument("--e2-list")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out")
    p = add("reference", cmd_reference, "contact-interaction energy ratios", potential=False)
    p.add_argument("--out")
    return parser


_NEGATIVE_NUMBER = re.compile(r"-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")


def _join_negative_values(argv: list[str]) -> list[str]:
    """argparse reads '-1e-4' as an option; glue such values to their flag."""
    out: list[str] = []
    for tok in argv:
        if out and _NEGATIVE_NUMBER.fullmatch(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        _apply_common(cfg, args)
        return args.func(cfg, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
