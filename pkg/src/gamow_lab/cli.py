"""gamow-lab: batch front end for bounds, energies, minimisation and certificates.

Every command resolves one JSON run configuration (from ``--config`` plus
flag overrides), validates it against the shipped schema and writes its
reports atomically into the output directory.  Exit codes: 0 success,
1 input or configuration error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
DEFAULT_OUT = "gamow_out"


class ConfigError(Exception):
    """Bad command line, configuration document or input file."""


# -- configuration ------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("gamow_lab").joinpath("schema/run_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _line_of(text: str | None, path) -> str:
    """Best-effort 'line N' for a JSON path inside the original document."""
    if not text:
        return ""
    pos = 0
    found = None
    for part in path:
        if isinstance(part, int):
            continue
        idx = text.find(f'"{part}"', pos)
        if idx < 0:
            break
        found, pos = idx, idx + 1
    if found is None:
        return ""
    return f"line {text.count(chr(10), 0, found) + 1}: "


def validate_config(config: dict, source_text: str | None = None) -> None:
    from jsonschema import Draft202012Validator

    validator = Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[-1]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{_line_of(source_text, err.absolute_path)}{where}: {err.message}")


def read_config(path: str) -> tuple[dict, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: invalid JSON in {path}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("line 1: the configuration must be a JSON object")
    return data, text


def _parse_lambdas(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda list {value!r}") from None


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def resolve_config(args: argparse.Namespace) -> tuple[dict, str | None]:
    """Merge the config file with command-line overrides."""
    text = None
    config: dict[str, Any] = {}
    if args.config:
        config, text = read_config(args.config)
        if config.get("command", args.command) != args.command:
            raise ConfigError(f"config is for command {config['command']!r}, not {args.command!r}")
    config["command"] = args.command
    model = dict(config.get("model", {}))
    if getattr(args, "n", None) is not None:
        model["n"] = args.n
    if getattr(args, "lam", None) is not None:
        model["lambda"] = args.lam
    if model:
        config["model"] = model
    options = dict(config.get("options", {}))
    for key in OPTION_FLAGS.get(args.command, ()):
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    if options or args.command != "bounds":
        config["options"] = options
    if args.command == "bounds" and "model" in config and "lambda" not in config["model"]:
        # the model's own lambda is only a default for the list
        lambdas = options.get("lambdas") or [None]
        if lambdas[0] is not None:
            config["model"]["lambda"] = lambdas[0]
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["output_dir"] = args.out
    validate_config(config, text)
    return config, text


OPTION_FLAGS = {
    "bounds": ("lambdas",),
    "energy": ("shape",),
    "minimize": ("mass", "init", "max_iters"),
    "certify": ("shape", "directions", "t_samples"),
    "scan": ("m_min", "m_max", "step", "minimize"),
    "align": ("shape_a", "shape_b", "search_radius"),
}


# -- building domain objects --------------------------------------------------


def build_params(config: dict):
    from .tension import ModelParams

    model = dict(config["model"])
    if "seed" in config:
        model["seed"] = config["seed"]
    try:
        return ModelParams.from_dict(model)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"model: {exc}") from None


def build_shape(spec, params, field_name: str = "shape"):
    from .shapes import StarShape, load_shape
    from .tension import wulff_shape

    try:
        if isinstance(spec, str):
            try:
                shape = load_shape(spec)
            except OSError as exc:
                raise ConfigError(f"{field_name}: cannot read {spec}: {exc.strerror}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{field_name}: line {exc.lineno}: invalid JSON in {spec}") from None
        elif "ball_mass" in spec:
            shape = StarShape.ball_of_mass(params.n, spec["ball_mass"], resolution=spec.get("resolution"))
        elif "wulff_mass" in spec:
            shape = wulff_shape(params.tension, spec.get("resolution")).scaled_to_mass(spec["wulff_mass"])
        else:
            shape = StarShape.from_dict(spec)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{field_name}: {exc}") from None
    if shape.n != params.n:
        raise ConfigError(f"{field_name}: shape lives in R^{shape.n} but the model has n={params.n}")
    return shape


# -- output -----------------------------------------------------------------------


def dumps_json(payload) -> str:
    return json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                         for v in row])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Reporter:
    def __init__(self, out_dir: Path, quiet: bool):
        self.out_dir = out_dir
        self.quiet = quiet
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> None:
        path = self.out_dir / name
        write_atomic(path, text)
        self.written.append(path)

    def say(self, message: str) -> None:
        if not self.quiet:
            print(message)


# -- commands -----------------------------------------------------------------------


def cmd_bounds(config: dict, rep: Reporter) -> int:
    from .bounds import mass_report

    params = build_params(config)
    lambdas = config.get("options", {}).get("lambdas", [params.lam])
    reports = []
    for lam in lambdas:
        if not 0 < lam < params.n:
            raise ConfigError(f"options/lambdas: lambda={lam} is outside (0, {params.n})")
        reports.append(mass_report(params.n, lam, params.tension))
    rows = [(r.n, r.lam, r.conjectured_m_star, r.crossover_mass_numeric, r.nonexistence_mass, r.ratio)
            for r in reports]
    rep.write("bounds.csv", csv_text(
        ("n", "lambda", "conjectured_mass", "crossover_numeric", "nonexistence_mass", "ratio"), rows))
    rep.write("bounds.json", dumps_json({"reports": [r.to_dict() for r in reports]}))
    for r in reports:
        nonex = "n/a" if r.nonexistence_mass is None else f"{r.nonexistence_mass:.4f}"
        rep.say(f"n={r.n} lambda={r.lam:g}: m*={r.conjectured_m_star:.4f} "
                f"crossover={r.crossover_mass_numeric:.4f} nonexistence={nonex}")
    return EXIT_OK


def _method(options: dict, params):
    from .riesz import MonteCarlo, method_from_dict

    if "riesz_method" in options:
        return method_from_dict(options["riesz_method"])
    return MonteCarlo(max(params.quadrature_budget, 10_000), params.seed)


def cmd_energy(config: dict, rep: Reporter) -> int:
    from .minimizer import evaluate_energy
    from .riesz import method_to_dict
    from .setops import deficit

    params = build_params(config)
    options = config["options"]
    shape = build_shape(options["shape"], params)
    method = _method(options, params)
    try:
        energy = evaluate_energy(shape, params.tension, params.lam, method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    payload = {"energy": energy.to_dict(), "deficit": deficit(shape, params.tension),
               "model": params.to_dict(), "riesz_method": method_to_dict(method)}
    rep.write("energy.json", dumps_json(payload))
    rep.say(f"E = {energy.total:.6g} (F = {energy.surface:.6g}, D = {energy.riesz:.6g} ± {energy.stderr_riesz:.2g})")
    return EXIT_OK


def _optimization_config(params, options: dict, mass: float | None = None):
    from .minimizer import OptimizationConfig

    init = options.get("init", "perturbed")
    if not isinstance(init, str) or init not in ("wulff", "ball", "perturbed"):
        init = build_shape(init, params, "options/init")
    kwargs = {k: options[k] for k in ("amplitude", "max_iters", "step_tolerance", "fd_step", "degree", "resolution")
              if k in options}
    if "riesz_method" in options:
        kwargs["riesz_method"] = _method(options, params)
    try:
        return OptimizationConfig(params, options["mass"] if mass is None else mass, init=init, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"options: {exc}") from None


def boundary_rows(shape):
    from .geometry import grid_directions

    pts = shape.center + shape.radial_values[..., None] * grid_directions(shape.grid_shape)
    if shape.n == 2:
        pts = np.vstack([pts, pts[:1]])
        return ("x", "y"), [tuple(p) for p in pts]
    n_theta, n_phi = shape.grid_shape
    return ("i_theta", "i_phi", "x", "y", "z"), [
        (i, j, *pts[i, j]) for i in range(n_theta) for j in range(n_phi)]


def cmd_minimize(config: dict, rep: Reporter) -> int:
    from .minimizer import TELEMETRY_COLUMNS, minimize_energy
    from .shapes import DegenerateShapeError

    params = build_params(config)
    opt = _optimization_config(params, config["options"])
    try:
        result = minimize_energy(opt)
    except DegenerateShapeError as exc:
        rep.say(f"aborted: {exc}")
        rep.write("result.json", dumps_json({"converged": False, "error": str(exc)}))
        return EXIT_NONCONVERGED
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    payload = result.to_dict()
    payload["model"] = params.to_dict()
    rep.write("result.json", dumps_json(payload))
    rep.write("telemetry.csv", csv_text(TELEMETRY_COLUMNS, [[row[c] for c in TELEMETRY_COLUMNS]
                                                              for row in result.telemetry]))
    header, rows = boundary_rows(result.shape)
    rep.write("boundary.csv", csv_text(header, rows))
    rep.say(f"{'converged' if result.converged else 'NOT converged'} after {result.iterations} iterations: "
            f"E = {result.energy.total:.8g}, deficit = {result.deficit:.3g}, "
            f"ratio to Wulff = {result.alignment_to_wulff.ratio:.3g}")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_certify(config: dict, rep: Reporter) -> int:
    from .certify import NON_MINIMAL, cut_test, slicing_certificate

    params = build_params(config)
    options = config["options"]
    shape = build_shape(options["shape"], params)
    certs = cut_test(shape, params, directions=options.get("directions"),
                     t_samples=options.get("t_samples", 21), samples=options.get("samples"))
    payload = {"model": params.to_dict(), "mass": shape.volume,
               "cut_certificates": [c.to_dict() for c in certs],
               "non_minimal_count": sum(c.verdict == NON_MINIMAL for c in certs)}
    if params.lam <= 1:
        payload["slicing_certificate"] = slicing_certificate(shape, params).to_dict()
    rep.write("certificates.json", dumps_json(payload))
    rep.say(f"{payload['non_minimal_count']} of {len(certs)} cuts certify non-minimality")
    if "slicing_certificate" in payload:
        rep.say(f"slicing bound: {payload['slicing_certificate']['verdict']}")
    return EXIT_OK


def cmd_scan(config: dict, rep: Reporter) -> int:
    from .bounds import ball_energy, two_cluster_energy
    from .minimizer import minimize_energy

    params = build_params(config)
    options = config["options"]
    lo, hi, step = options["m_min"], options["m_max"], options["step"]
    if hi < lo:
        raise ConfigError("options: m_max must not be below m_min")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    masses = [round(lo + k * step, 12) for k in range(count)]
    rows = []
    status = EXIT_OK
    for m in masses:
        deficit = None
        if options.get("minimize", False):
            scan_opts = {"mass": m, "max_iters": options.get("max_iters", 200)}
            result = minimize_energy(_optimization_config(params, scan_opts))
            deficit = result.deficit
            if not result.converged:
                status = EXIT_NONCONVERGED
        rows.append((m, ball_energy(params.n, params.lam, m).total,
                     two_cluster_energy(params.n, params.lam, m, 0.5), deficit))
    rep.write("scan.csv", csv_text(("m", "energy_ball", "energy_split", "deficit_of_minimizer"), rows))
    diff = [r[1] - r[2] for r in rows]
    for a, b, da, db in zip(rows, rows[1:], diff, diff[1:]):
        if da * db < 0:
            rep.say(f"ball/split crossover between m={a[0]:g} and m={b[0]:g}")
    return status


def cmd_align(config: dict, rep: Reporter) -> int:
    from .setops import align

    params = build_params(config)
    options = config["options"]
    a = build_shape(options["shape_a"], params, "options/shape_a")
    b = build_shape(options["shape_b"], params, "options/shape_b")
    result = align(a, b, search_radius=options.get("search_radius"))
    rep.write("align.json", dumps_json(result.to_dict()))
    rep.say(f"x0 = {np.array2string(result.x0, precision=6)}, ratio = {result.ratio:.6g}")
    return EXIT_OK


COMMANDS = {"bounds": cmd_bounds, "energy": cmd_energy, "minimize": cmd_minimize,
            "certify": cmd_certify, "scan": cmd_scan, "align": cmd_align}


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (validated against the shipped schema)")
    common.add_argument("--seed", type=_seed, default=None, help="unsigned 64-bit seed; overrides the config")
    common.add_argument("--out", default=None, help=f"output directory (default: {DEFAULT_OUT})")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    common.add_argument("--n", type=int, default=None, help="dimension")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="Riesz exponent")

    parser = argparse.ArgumentParser(prog="gamow-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[common], help="critical and non-existence masses")
    p.add_argument("--lambdas", type=_parse_lambdas, default=None, help="comma-separated lambda values")

    p = sub.add_parser("energy", parents=[common], help="energy breakdown of a shape")
    p.add_argument("--shape", default=None, help="shape file (StarShape JSON or voxel binary)")

    p = sub.add_parser("minimize", parents=[common], help="fixed-mass energy minimisation")
    p.add_argument("--mass", type=float, default=None)
    p.add_argument("--init", choices=("wulff", "ball", "perturbed"), default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)

    p = sub.add_parser("certify", parents=[common], help="cut and slicing certificates")
    p.add_argument("--shape", default=None)
    p.add_argument("--directions", type=int, default=None)
    p.add_argument("--t-samples", dest="t_samples", type=int, default=None)

    p = sub.add_parser("scan", parents=[common], help="ball versus split energy over a mass range")
    p.add_argument("--m-min", dest="m_min", type=float, default=None)
    p.add_argument("--m-max", dest="m_max", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--minimize", action="store_const", const=True, default=None,
                   help="also minimise at every mass and report the deficit")

    p = sub.add_parser("align", parents=[common], help="optimal translation between two shapes")
    p.add_argument("shape_a", nargs="?", default=None)
    p.add_argument("shape_b", nargs="?", default=None)
    p.add_argument("--search-radius", dest="search_radius", type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        config, _ = resolve_config(args)
        rep = Reporter(Path(config.get("output_dir", DEFAULT_OUT)), args.quiet)
        return COMMANDS[args.command](config, rep)
    except ConfigError as exc:
        print(f"gamow-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
