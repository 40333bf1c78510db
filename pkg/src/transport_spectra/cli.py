"""Command line interface: config ingestion, dispatch, CSV/JSON emission.

Configs are single JSON documents with closed vocabularies; nothing is
ever evaluated as code. Outputs are byte-deterministic for a fixed
config and seed: CSV numbers use one fixed format, JSON keys are
sorted, and no timestamps or host details are recorded.

Heavy numerical imports happen inside the dispatch path, after the
thread cap from ``--threads`` has been exported, so the linear-algebra
runtime sees the cap when it initializes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERICAL = 4

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_FMT = "{:.12e}"


def _fail(message: str) -> "ConfigError":
    return ConfigError(message)


class ConfigError(Exception):
    """Raised for any config shape, vocabulary, or precondition issue."""


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise _fail(f"unknown field '{unknown[0]}' in {where}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise _fail(f"missing field '{key}' in {where}")
    return section[key]


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def _build_domain(spec: dict):
    from . import geometry

    if not isinstance(spec, dict):
        raise _fail("domain must be an object")
    kind = _require(spec, "kind", "domain")
    if kind == "interval":
        _check_keys(spec, {"kind", "a", "b"}, "domain")
        return geometry.Interval(float(_require(spec, "a", "domain")),
                                 float(_require(spec, "b", "domain")))
    if kind == "disk":
        _check_keys(spec, {"kind", "center", "radius"}, "domain")
        center = spec.get("center", [0.0, 0.0])
        return geometry.Disk(center, float(_require(spec, "radius", "domain")))
    if kind == "polygon":
        _check_keys(spec, {"kind", "vertices"}, "domain")
        return geometry.ConvexPolygon(_require(spec, "vertices", "domain"))
    raise _fail(f"domain kind '{kind}' is not one of interval, disk, polygon")


def _build_sigma(spec: dict):
    from . import fields

    if not isinstance(spec, dict):
        raise _fail("sigma must be an object")
    kind = _require(spec, "kind", "sigma")
    if kind == "constant":
        _check_keys(spec, {"kind", "value"}, "sigma")
        value = float(_require(spec, "value", "sigma"))
        if value <= 0:
            raise _fail("sigma must be positive")
        return fields.CollisionFrequency.constant(value)
    if kind == "speed_affine":
        _check_keys(spec, {"kind", "base", "slope", "bound"}, "sigma")
        base = float(_require(spec, "base", "sigma"))
        slope = float(_require(spec, "slope", "sigma"))
        bound = float(_require(spec, "bound", "sigma"))
        if base <= 0 or slope < 0 or bound < base:
            raise _fail("speed_affine sigma needs base > 0, slope >= 0, bound >= base")

        def profile(speed):
            import numpy as np

            return base + slope * np.asarray(speed)

        return fields.CollisionFrequency.from_speed_profile(profile, bound)
    raise _fail(f"sigma kind '{kind}' is not one of constant, speed_affine")


def _build_spatial_field(spec: dict, where: str):
    from . import fields

    kind = _require(spec, "kind", where)
    if kind == "constant":
        _check_keys(spec, {"kind", "value"}, where)
        return fields.constant_field(float(_require(spec, "value", where)))
    if kind == "bump":
        _check_keys(spec, {"kind", "center", "radius", "amplitude"}, where)
        return fields.spatial_bump(
            _require(spec, "center", where),
            float(_require(spec, "radius", where)),
            float(spec.get("amplitude", 1.0)),
        )
    raise _fail(f"{where} kind '{kind}' is not one of constant, bump")


def _build_velocity_profile(spec: dict, where: str):
    from . import fields

    kind = _require(spec, "kind", where)
    if kind == "constant":
        _check_keys(spec, {"kind", "value"}, where)
        value = float(_require(spec, "value", where))

        def profile(v):
            import numpy as np

            return np.full(np.atleast_2d(v).shape[0], value)

        return profile
    if kind == "speed_bump":
        _check_keys(spec, {"kind", "a", "b", "amplitude"}, where)
        return fields.radial_bump(
            float(_require(spec, "a", where)),
            float(_require(spec, "b", where)),
            float(spec.get("amplitude", 1.0)),
        )
    raise _fail(f"{where} kind '{kind}' is not one of constant, speed_bump")


def _build_kernel(spec: dict):
    from . import fields

    if not isinstance(spec, dict):
        raise _fail("kernel must be an object")
    _check_keys(spec, {"a", "b", "terms"}, "kernel")
    a = float(_require(spec, "a", "kernel"))
    b = float(_require(spec, "b", "kernel"))
    term_specs = _require(spec, "terms", "kernel")
    if not isinstance(term_specs, list):
        raise _fail("kernel terms must be a list")
    terms = []
    for i, term_spec in enumerate(term_specs):
        where = f"kernel term {i}"
        if not isinstance(term_spec, dict):
            raise _fail(f"{where} must be an object")
        _check_keys(term_spec, {"alpha", "beta", "theta"}, where)
        terms.append(
            fields.KernelTerm(
                alpha=_build_spatial_field(_require(term_spec, "alpha", where), where + " alpha"),
                beta=_build_velocity_profile(_require(term_spec, "beta", where), where + " beta"),
                theta=_build_velocity_profile(_require(term_spec, "theta", where), where + " theta"),
            )
        )
    return fields.RegularCollisionKernel(tuple(terms), a, b)


def _build_phi(spec: dict, where: str = "phi"):
    if not isinstance(spec, dict):
        raise _fail(f"{where} must be an object")
    _check_keys(spec, {"space", "velocity"}, where)
    space_f = _build_spatial_field(_require(spec, "space", where), where + ".space")
    vel_f = _build_velocity_profile(_require(spec, "velocity", where), where + ".velocity")

    def phi(x, v):
        import numpy as np

        return np.asarray(space_f(x)) * np.asarray(vel_f(v))

    return phi


def _build_phase_grid(config: dict, domain, kernel=None):
    from . import fields

    space_spec = _require(config, "space", "config")
    vel_spec = _require(config, "velocity", "config")
    _check_keys(space_spec, {"n_radial", "n_angular", "n_cells"}, "space")
    _check_keys(vel_spec, {"a", "b", "n_speeds", "n_angles"}, "velocity")
    a = float(_require(vel_spec, "a", "velocity"))
    b = float(_require(vel_spec, "b", "velocity"))
    n_speeds = int(_require(vel_spec, "n_speeds", "velocity"))
    if domain.dim == 1:
        n_cells = int(_require(space_spec, "n_cells", "space"))
        space = fields.SpatialGrid.interval_midpoint(domain, n_cells)
        velocity = fields.VelocityGrid.line_symmetric(a, b, n_speeds)
    else:
        space = fields.SpatialGrid.disk_polar(
            domain,
            int(_require(space_spec, "n_radial", "space")),
            int(_require(space_spec, "n_angular", "space")),
        )
        velocity = fields.VelocityGrid.annulus_polar(
            a, b, n_speeds, int(vel_spec.get("n_angles", 8))
        )
    return fields.PhaseGrid(space, velocity)


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _fail(f"cannot read config: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise _fail("config must be a JSON object")
    return config


def _common_objects(config: dict):
    from .streaming import validate_gamma

    _check_keys(
        config,
        {"domain", "sigma", "gamma", "kernel", "space", "velocity",
         "scan", "evolve", "resolvent", "dyson", "rl"},
        "config",
    )
    domain = _build_domain(_require(config, "domain", "config"))
    sigma = _build_sigma(_require(config, "sigma", "config"))
    gamma = float(_require(config, "gamma", "config"))
    validate_gamma(gamma, allow_one=True)
    return domain, sigma, gamma


# ---------------------------------------------------------------------------
# deterministic emission
# ---------------------------------------------------------------------------

def _write_csv(path: Path, schema: str, columns: list[str], rows: list[list[str]]) -> None:
    lines = [f"# schema: transport-spectra {schema} v1", ",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_run_json(out_dir: Path, payload: dict) -> None:
    (out_dir / "run.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n"
    )


def _phase_function_rows(phi_fn) -> tuple[list[str], list[list[str]]]:
    import numpy as np

    grid = phi_fn.grid
    dim = grid.space.nodes.shape[1]
    vdim = grid.velocity.nodes.shape[1]
    columns = [f"x{i}" for i in range(dim)] + [f"v{i}" for i in range(vdim)]
    columns += ["re", "im", "weight"]
    weights = grid.weight_matrix()
    rows = []
    for i in range(grid.n_x):
        for j in range(grid.n_v):
            val = complex(phi_fn.values[i, j])
            row = [_FMT.format(c) for c in grid.space.nodes[i]]
            row += [_FMT.format(c) for c in grid.velocity.nodes[j]]
            row += [_FMT.format(val.real), _FMT.format(val.imag),
                    _FMT.format(float(weights[i, j]))]
            rows.append(row)
    return columns, rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_spectrum(config: dict, out_dir: Path, seed: int) -> dict:
    from . import spectra

    domain, sigma, gamma = _common_objects(config)
    scan_spec = dict(_require(config, "scan", "config"))
    _check_keys(
        scan_spec,
        {"n_radial", "n_angular", "a", "b", "n_speeds", "n_angles", "k_max", "tau_floor"},
        "scan",
    )
    try:
        scan = spectra.ScanConfig(**scan_spec)
    except TypeError as exc:
        raise _fail(f"scan section: {exc}") from exc
    samples = spectra.scan_spectrum(scan, domain, sigma, gamma)
    bound = spectra.spectral_bound(samples)

    dim = samples[0].x.shape[0] if samples else domain.dim
    columns = ["re", "im", "k", "tau", "theta"]
    columns += [f"x{i}" for i in range(dim)] + [f"v{i}" for i in range(dim)]
    rows = []
    for s in samples:
        row = [_FMT.format(s.value.real), _FMT.format(s.value.imag), str(s.k),
               _FMT.format(s.tau), _FMT.format(s.theta)]
        row += [_FMT.format(c) for c in s.x] + [_FMT.format(c) for c in s.v]
        rows.append(row)
    _write_csv(out_dir / "spectrum.csv", "spectrum", columns, rows)
    return {"samples": len(samples), "spectral_bound": bound,
            "outputs": ["spectrum.csv"]}


def _cmd_evolve(config: dict, out_dir: Path, seed: int) -> dict:
    from . import fields, streaming

    domain, sigma, gamma = _common_objects(config)
    section = _require(config, "evolve", "config")
    _check_keys(section, {"t", "phi"}, "evolve")
    t = float(_require(section, "t", "evolve"))
    grid = _build_phase_grid(config, domain)
    phi_fn = fields.PhaseGridFunction.sample(
        grid, _build_phi(_require(section, "phi", "evolve"), "evolve.phi")
    )
    result = streaming.evolve(phi_fn, t, sigma, gamma)
    columns, rows = _phase_function_rows(result)
    _write_csv(out_dir / "evolve.csv", "phase-function", columns, rows)
    return {
        "t": t,
        "norm_initial": fields.p_norm(phi_fn, 2.0),
        "norm_final": fields.p_norm(result, 2.0),
        "outputs": ["evolve.csv"],
    }


def _cmd_resolvent_verify(config: dict, out_dir: Path, seed: int) -> dict:
    import numpy as np

    from . import resolvent as res
    from .streaming import validate_gamma

    domain, sigma, gamma = _common_objects(config)
    validate_gamma(gamma, allow_one=False)
    section = _require(config, "resolvent", "config")
    _check_keys(
        section,
        {"lambdas", "phi", "n_points", "n_boundary", "n_offsets", "n_speeds", "speed_range"},
        "resolvent",
    )
    lambdas = [complex(float(p[0]), float(p[1]))
               for p in _require(section, "lambdas", "resolvent")]
    phi = _build_phi(_require(section, "phi", "resolvent"), "resolvent.phi")
    n_points = int(section.get("n_points", 4))
    speed_lo, speed_hi = section.get("speed_range", [1.0, 2.0])
    grid = res.trace_grid(
        domain,
        n_boundary=int(section.get("n_boundary", 24)),
        n_offsets=int(section.get("n_offsets", 5)) if domain.dim > 1 else 1,
        speed_range=(float(speed_lo), float(speed_hi)),
        n_speeds=int(section.get("n_speeds", 3)),
    )

    rng = np.random.default_rng(seed)
    pts, vels = _interior_samples(domain, rng, n_points, (float(speed_lo), float(speed_hi)))

    rows = []
    worst = {"laplace": 0.0, "boundary": 0.0}
    for lam in lambdas:
        lap_res = 0.0
        for x, v in zip(pts, vels, strict=True):
            p = _phase_point(x, v)
            direct = res.resolvent_apply(phi, p, lam, sigma, gamma, domain)
            oracle = res.laplace_resolvent_quadrature(phi, p, lam, sigma, gamma, domain)
            lap_res = max(lap_res, abs(direct - oracle) / max(1.0, abs(oracle)))
        out_vals = res.resolvent_apply_batch(
            phi, grid.points, grid.velocities, lam, sigma, gamma, domain
        )
        in_vals = res.resolvent_apply_batch(
            phi, grid.points, -grid.velocities, lam, sigma, gamma, domain
        )
        scale = np.maximum(1.0, np.abs(out_vals))
        bc_res = float(np.max(np.abs(in_vals - gamma * out_vals) / scale))
        for name, value in (("laplace", lap_res), ("boundary", bc_res)):
            rows.append([_FMT.format(lam.real), _FMT.format(lam.imag),
                         name, _FMT.format(value)])
            worst[name] = max(worst[name], value)
    _write_csv(out_dir / "resolvent.csv", "resolvent-verify",
               ["lam_re", "lam_im", "identity", "residual"], rows)
    return {"worst_laplace": worst["laplace"], "worst_boundary": worst["boundary"],
            "outputs": ["resolvent.csv"]}


def _phase_point(x, v):
    from .geometry import PhasePoint

    return PhasePoint(x, v)


def _interior_samples(domain, rng, count: int, speed_range: tuple[float, float]):
    """Deterministic interior phase samples via rejection from the box."""
    import numpy as np

    dim = domain.dim
    if dim == 1:
        lo, hi = domain.a, domain.b
        span = hi - lo
        pts = lo + 0.1 * span + 0.8 * span * rng.random((count, 1))
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        speeds = speed_range[0] + (speed_range[1] - speed_range[0]) * rng.random(count)
        vels = (signs * speeds)[:, None]
        return pts, vels
    pts = []
    d = domain.diameter
    center_guess = domain.clamp(np.zeros((1, dim)))[0]
    while len(pts) < count:
        cand = center_guess + d * (rng.random(dim) - 0.5)
        if domain.contains(cand[None, :])[0]:
            shrunk = center_guess + 0.9 * (cand - center_guess)
            pts.append(shrunk)
    angles = 2.0 * np.pi * rng.random(count)
    speeds = speed_range[0] + (speed_range[1] - speed_range[0]) * rng.random(count)
    vels = speeds[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.array(pts), vels


def _cmd_dyson(config: dict, out_dir: Path, seed: int) -> dict:
    from . import dyson as dy
    from . import fields

    domain, sigma, gamma = _common_objects(config)
    kernel = _build_kernel(_require(config, "kernel", "config"))
    section = _require(config, "dyson", "config")
    _check_keys(section, {"t", "j_max", "nodes_per_unit", "phi"}, "dyson")
    t = float(_require(section, "t", "dyson"))
    cfg = dy.DysonConfig(
        j_max=int(section.get("j_max", 3)),
        nodes_per_unit=int(section.get("nodes_per_unit", 32)),
    )
    grid = _build_phase_grid(config, domain)
    phi_fn = fields.PhaseGridFunction.sample(
        grid, _build_phi(_require(section, "phi", "dyson"), "dyson.phi")
    )
    result = dy.V_apply(phi_fn, t, cfg, kernel, sigma, gamma)
    columns, rows = _phase_function_rows(result.value)
    _write_csv(out_dir / "dyson.csv", "phase-function", columns, rows)
    return {
        "t": t,
        "j_max": cfg.j_max,
        "residual": result.residual,
        "term_norms": list(result.term_norms),
        "outputs": ["dyson.csv"],
    }


def _cmd_rl_scan(config: dict, out_dir: Path, seed: int) -> dict:
    from . import dyson as dy

    domain, sigma, gamma = _common_objects(config)
    kernel = _build_kernel(_require(config, "kernel", "config"))
    section = _require(config, "rl", "config")
    _check_keys(section, {"alpha", "betas", "n", "n_radial", "n_angular"}, "rl")
    sweep = dy.rl_sweep(
        float(_require(section, "alpha", "rl")),
        [float(b) for b in _require(section, "betas", "rl")],
        int(section.get("n", 0)),
        kernel,
        kernel,
        domain,
        sigma,
        gamma=gamma,
        n_radial=int(section.get("n_radial", 40)),
        n_angular=int(section.get("n_angular", 40)),
    )
    rows = [
        [_FMT.format(b), _FMT.format(e), _FMT.format(env), _FMT.format(bd)]
        for b, e, env, bd in zip(
            sweep.betas, sweep.estimates, sweep.envelope, sweep.bounds, strict=True
        )
    ]
    _write_csv(out_dir / "rl_scan.csv", "rl-scan",
               ["beta", "estimate", "envelope", "bound"], rows)
    return {"alpha": sweep.alpha, "n": sweep.n, "ratio": sweep.ratio,
            "outputs": ["rl_scan.csv"]}


def _cmd_selftest(config: dict, out_dir: Path | None, seed: int) -> dict:
    """Small, fast invariant battery; raises on any violation."""
    import numpy as np

    from . import fields, geometry, resolvent, streaming
    from .errors import NumericalFailure

    rng = np.random.default_rng(seed)
    disk = geometry.Disk((0.0, 0.0), 1.0)
    sigma = fields.CollisionFrequency.constant(1.0)
    gamma = 0.5
    checks: list[tuple[str, float, float]] = []

    pts, vels = _interior_samples(disk, rng, 400, (0.5, 2.0))
    tm, tp = disk.exit_times_batch(pts, vels)
    tm_b, tp_b = geometry.exit_times_bisection_batch(disk, pts, vels)
    checks.append(("geometry-oracle",
                   float(np.max(np.abs(tm - tm_b))) + float(np.max(np.abs(tp - tp_b))),
                   1e-9))

    tm2, tp2 = disk.exit_times_batch(pts, -vels)
    checks.append(("chord-evenness",
                   float(np.max(np.abs((tm + tp) - (tm2 + tp2)))), 1e-10))

    phi = _default_phi()
    for _ in range(3):
        x, v = pts[rng.integers(len(pts))], vels[rng.integers(len(vels))]
        t, s = 0.4 * rng.random() + 0.1, 0.4 * rng.random() + 0.1
        one = streaming.U_eval(phi, geometry.PhasePoint(x, v), t + s, sigma, gamma, disk)
        via = streaming.U_eval(
            lambda xx, vv: np.array(
                [streaming.U_eval(phi, geometry.PhasePoint(xr, vr), s, sigma, gamma, disk)
                 for xr, vr in zip(np.atleast_2d(xx), np.atleast_2d(vv), strict=True)]
            ),
            geometry.PhasePoint(x, v), t, sigma, gamma, disk,
        )
        checks.append(("semigroup-law", abs(one - via) / max(1.0, abs(one)), 1e-11))

    lam = 0.3 + 0.7j
    p = geometry.PhasePoint(np.array([0.2, -0.1]), np.array([1.1, 0.4]))
    direct = resolvent.resolvent_apply(phi, p, lam, sigma, gamma, disk)
    oracle = resolvent.laplace_resolvent_quadrature(phi, p, lam, sigma, gamma, disk)
    checks.append(("laplace-identity", abs(direct - oracle) / abs(oracle), 1e-4))

    grid = resolvent.trace_grid(disk, n_boundary=16, n_offsets=3, n_speeds=2)
    out_vals = resolvent.resolvent_apply_batch(
        phi, grid.points, grid.velocities, lam, sigma, gamma, disk
    )
    in_vals = resolvent.resolvent_apply_batch(
        phi, grid.points, -grid.velocities, lam, sigma, gamma, disk
    )
    bc = float(np.max(np.abs(in_vals - gamma * out_vals)
                      / np.maximum(1.0, np.abs(out_vals))))
    checks.append(("bounce-back-trace", bc, 1e-8))

    report = {}
    for name, value, tol in checks:
        status = "ok" if value < tol else "FAIL"
        print(f"{status} - {name}: {value:.3e} (tol {tol:.0e})")
        report[name] = value
        if value >= tol:
            raise NumericalFailure(f"selftest failed: {name} reached {value:.3e}")
    return {"checks": report, "outputs": []}


def _default_phi():
    import numpy as np

    def phi(x, v):
        x = np.atleast_2d(x)
        v = np.atleast_2d(v)
        return (1.0 + 0.3 * x[:, 0]) * np.exp(-0.5 * np.sum(v * v, axis=1))

    return phi


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "evolve": _cmd_evolve,
    "resolvent-verify": _cmd_resolvent_verify,
    "dyson": _cmd_dyson,
    "rl-scan": _cmd_rl_scan,
}


def _dispatch(args: argparse.Namespace) -> int:
    from .errors import (
        NearSingular,
        NumericalFailure,
        ResourceLimit,
        TransportError,
    )

    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "selftest":
            config = _load_config(args.config) if args.config else {}
            summary = _cmd_selftest(config, out_dir, args.seed)
        else:
            if not args.config:
                raise _fail("--config is required for this command")
            if out_dir is None:
                raise _fail("--out is required for this command")
            config = _load_config(args.config)
            summary = _COMMANDS[args.command](config, out_dir, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimit as exc:
        print(f"error: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericalFailure, NearSingular) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if out_dir is not None:
        payload = {
            "command": args.command,
            "version": _package_version(),
            "seed": args.seed,
            "threads": args.threads,
        }
        payload.update(summary)
        _write_run_json(out_dir, payload)
    print(f"{args.command}: done")
    return EXIT_OK


def _package_version() -> str:
    from . import __version__

    return __version__


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="transport-spectra",
        description="Spectra, resolvents, and series diagnostics for "
                    "bounce-back transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_COMMANDS, "selftest"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="path to a JSON config")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--threads", type=int, default=1,
                         help="linear-algebra thread cap (default 1)")
        cmd.add_argument("--seed", type=int, default=0,
                         help="seed for sampled verifications (default 0)")
    args = parser.parse_args(argv)

    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    for var in _THREAD_VARS:
        os.environ.setdefault(var, str(args.threads))

    return _dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
