"""Command-line frontend.

Subcommands: ``allocate``, ``sweep``, ``simulate``, ``verify``, ``synth``,
``impact`` and ``interpolate``.  Exit codes: 0 success, 2 data error,
3 configuration error, 4 scale guard, 1 any other library failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import data, svg
from .analysis import ImpactParams, expected_adverse, slope_condition, soft_nn_interpolate
from .data import DataError, fmt
from .engine import (
    EngineConfig,
    expected_rd,
    solve_access_aware,
    solve_bayesian,
    solve_minimax,
    solve_naive,
    sweep_eta,
)
from .errors import AccessAllocError, ScaleError, ValidationError
from .model import (
    Distance,
    EtaSpec,
    LocationProfile,
    Scenario,
    approx_rho_vector,
    distance_l1,
    distance_linf,
    exact_rho,
    naive_rho,
    rate_disparity,
    rd_approx,
)
from .optimize import VERTEX_MAX_LOCATIONS, enumerate_vertices
from .sim import (
    DP_MAX_POPULATION,
    RNG_ALGORITHM,
    TRAJECTORY_COLUMNS,
    SimConfig,
    dp_exact_rho,
    simulate_acquisition,
    trajectories,
)

EXIT_OK, EXIT_FAILURE, EXIT_DATA, EXIT_CONFIG, EXIT_SCALE = 0, 1, 2, 3, 4
SATURATION_TOL = 1e-12
OPTIMAL_GAP = 1e-6
APPROX_OPTIMAL_GAP = 1e-3
DEFAULT_SWEEP_GRID = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95"


class ConfigError(ValidationError):
    """Invalid flags or flag combinations."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Flag parsing helpers
# ---------------------------------------------------------------------------


def parse_eta(text: str) -> EtaSpec:
    """``0.5`` (point), ``0.1,0.2,0.3`` (grid) or ``dist:0.2:0.5,0.8:0.5``."""
    text = text.strip()
    try:
        if text.startswith("dist:"):
            pairs = [item.split(":") for item in text[5:].split(",")]
            if any(len(pair) != 2 for pair in pairs):
                raise ConfigError(f"bad eta distribution {text!r}; expected dist:value:weight,...")
            return EtaSpec.distribution([float(v) for v, _ in pairs], [float(w) for _, w in pairs])
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse eta {text!r}") from None
    return EtaSpec.point(values[0]) if len(values) == 1 else EtaSpec.grid(values)


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` evenly spaced, or an explicit comma list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            count = int(count)
            if count < 1:
                raise ConfigError("grid count must be >= 1")
            return np.linspace(float(start), float(stop), count)
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None


def _eta_json(spec: EtaSpec) -> dict:
    return {"kind": spec.kind, "values": list(spec.values), "weights": None if spec.weights is None else list(spec.weights)}


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(path: Path, items: Sequence[tuple[str, object]]) -> str:
    text = "".join(f"{key}: {fmt(value)}\n" for key, value in items)
    path.write_text(text, encoding="utf-8")
    return text


def _engine_config(args) -> EngineConfig:
    return EngineConfig(max_iterations=args.max_iterations, restarts=args.restarts, seed=args.seed)


def _scenario(args, spec: EtaSpec) -> Scenario:
    locations = data.read_locations(args.locations)
    return Scenario(tuple(locations), args.alpha, args.epsilon, Distance(args.distance), spec)


def _add_run_flags(p: argparse.ArgumentParser, eta_required: bool = True) -> None:
    p.add_argument("--locations", required=True, help="CSV with id,population,beta")
    p.add_argument("--alpha", type=float, required=True, help="resources per person, in (0, 1)")
    p.add_argument("--epsilon", type=float, default=0.1, help="distance budget (default 0.1)")
    p.add_argument("--distance", choices=[d.value for d in Distance], default="l1")
    p.add_argument("--eta", required=eta_required, help="point, comma grid, or dist:value:weight,...")
    p.add_argument("--model", choices=["approx", "naive"], default="approx")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--out", default=".", help="output directory")


def _shares(scenario: Scenario, n: np.ndarray, etas, weights, model: str):
    """Weighted acquisition shares at ``n`` and the saturation mask (any eta)."""
    rho = np.zeros(scenario.k)
    saturated = np.zeros(scenario.k, dtype=bool)
    coverage = scenario.alpha * n / scenario.p
    for eta, w in zip(etas, weights):
        if model == "naive":
            rho += w * naive_rho(scenario.betas, eta)
        else:
            rho += w * approx_rho_vector(n, scenario.p, scenario.alpha, scenario.betas, eta)
        saturated |= coverage > eta * scenario.betas + 1.0 - scenario.betas + SATURATION_TOL
    return rho, saturated


# ---------------------------------------------------------------------------
# allocate
# ---------------------------------------------------------------------------


def _allocate(scenario: Scenario, spec: EtaSpec, model: str, config: EngineConfig) -> dict:
    p = scenario.p
    etas, weights = spec.values, spec.probabilities
    if model == "naive":
        if spec.kind != "point":
            raise ConfigError("--model naive takes a single eta value")
        allocation, report = solve_naive(scenario, etas[0])
        result = dict(method="naive", allocation=allocation, rd=report.rd, rd_prop=report.rd_proportional,
                      iterations=1, converged=True, extra=[])
    elif spec.kind == "point":
        allocation, trace = solve_access_aware(scenario, etas[0], config)
        result = dict(method="access_aware", allocation=allocation,
                      rd=rd_approx(scenario, allocation.n, etas[0]), rd_prop=rd_approx(scenario, p, etas[0]),
                      iterations=len(trace.iterations), converged=trace.converged,
                      extra=[("cycle_detected", trace.cycle_detected),
                             ("restart_index_of_best", trace.restart_index_of_best)])
    elif spec.kind == "distribution":
        res = solve_bayesian(scenario, config, etas, weights)
        allocation = res.allocation
        result = dict(method="bayesian", allocation=allocation,
                      rd=expected_rd(scenario, allocation.n, etas, weights),
                      rd_prop=expected_rd(scenario, p, etas, weights),
                      iterations=len(res.trace.iterations), converged=res.trace.converged,
                      extra=[("cycle_detected", res.trace.cycle_detected),
                             ("restart_index_of_best", res.trace.restart_index_of_best)])
    else:
        res = solve_minimax(scenario, config, etas)
        allocation = res.allocation
        weights = tuple(float(w) for w in res.distribution)
        result = dict(method="minimax", allocation=allocation, rd=res.primal_value,
                      rd_prop=max(rd_approx(scenario, p, eta) for eta in etas),
                      iterations=res.steps, converged=res.converged,
                      extra=[("maximin_value", res.maximin_value),
                             ("bound_low", res.bound[0]), ("bound_high", res.bound[1]),
                             ("weak_duality_holds", res.weak_duality_holds),
                             ("worst_case_distribution", " ".join(fmt(w) for w in weights))])
    result["rho"], result["saturated"] = _shares(scenario, result["allocation"].n, etas, weights, model)
    return result


def cmd_allocate(args) -> int:
    spec = parse_eta(args.eta)
    scenario = _scenario(args, spec)
    config = _engine_config(args)
    res = _allocate(scenario, spec, args.model, config)
    out = _out_dir(args.out)
    n = res["allocation"].n
    p = scenario.p
    data.write_csv(
        out / "allocation.csv",
        ("id", "p", "n", "n_over_p", "rho", "saturated"),
        zip(scenario.ids, p, n, n / p, res["rho"], res["saturated"]),
    )
    report = [
        ("method", res["method"]),
        ("model", args.model),
        ("eta", args.eta),
        ("rd_access_aware", res["rd"]),
        ("rd_proportional", res["rd_prop"]),
        ("improvement", res["rd_prop"] - res["rd"]),
        ("d1", distance_l1(n, p)),
        ("dinf", distance_linf(n, p)),
        ("iterations", res["iterations"]),
        ("converged", res["converged"]),
        *res["extra"],
    ]
    text = _write_report(out / "report.txt", report)
    run = {
        "command": "allocate",
        "alpha": scenario.alpha,
        "epsilon": scenario.epsilon,
        "distance": scenario.distance.value,
        "eta": _eta_json(spec),
        "model": args.model,
        "method": res["method"],
        "restarts": args.restarts,
        "seed": args.seed,
        "max_iterations": args.max_iterations,
        "locations": {
            "ids": scenario.ids,
            "populations": [loc.population for loc in scenario.locations],
            "betas": [loc.beta for loc in scenario.locations],
        },
        "n": [float(v) for v in n],
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    spec = parse_eta(args.eta or DEFAULT_SWEEP_GRID)
    if spec.kind == "distribution":
        raise ConfigError("sweep takes a point or a grid of eta values")
    if args.model != "approx":
        raise ConfigError("sweep runs the access-aware heuristic (--model approx)")
    scenario = _scenario(args, spec)
    result = sweep_eta(scenario, _engine_config(args), spec.values)
    out = _out_dir(args.out)
    p = scenario.p
    data.write_csv(
        out / "sweep.csv",
        ("eta", "rd_aware", "rd_prop", "improvement", "allocation_stable"),
        ((r.eta, r.rd_access_aware, r.rd_proportional, r.improvement, result.allocation_stable) for r in result.rows),
    )
    data.write_csv(
        out / "curves_rd.csv",
        ("eta", "series", "rd"),
        [(r.eta, "access_aware", r.rd_access_aware) for r in result.rows]
        + [(r.eta, "proportional", r.rd_proportional) for r in result.rows],
    )
    behavior = []
    for r in result.rows:
        n = r.allocation.n
        for loc_id, beta, ratio in zip(scenario.ids, scenario.betas, n / p):
            behavior.append((r.eta, loc_id, beta, ratio, scenario.alpha * ratio))
    data.write_csv(out / "behavior.csv", ("eta", "id", "beta", "n_over_p", "coverage"), behavior)

    worst = min(r.improvement for r in result.rows)
    if worst < -1e-9:
        print(f"warning: access-aware RD exceeds proportional by {-worst:.3g}", file=sys.stderr)
    if args.svg:
        etas = [r.eta for r in result.rows]
        (out / "sweep.svg").write_text(
            svg.line_chart(
                [
                    ("access-aware", etas, [r.rd_access_aware for r in result.rows]),
                    ("proportional", etas, [r.rd_proportional for r in result.rows]),
                ],
                title="Rate disparity across access gaps",
                xlabel="eta",
                ylabel="RD",
            ),
            encoding="utf-8",
        )
        mid = result.rows[len(result.rows) // 2]
        (out / "behavior.svg").write_text(
            svg.line_chart(
                [(f"eta={fmt(mid.eta)}", list(scenario.betas), list(scenario.alpha * mid.allocation.n / p))],
                title="Coverage by disadvantaged share",
                xlabel="beta",
                ylabel="alpha n / p",
                markers_only=True,
            ),
            encoding="utf-8",
        )
    print(f"sweep: {len(result.rows)} eta values, allocation_stable={fmt(result.allocation_stable)}, "
          f"min improvement={fmt(worst)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = SimConfig(trials=args.trials, seed=args.seed, time_resolution=args.time_resolution)
    mean, stderr = simulate_acquisition(args.N, args.P, args.beta, args.eta, config)
    exact = exact_rho(args.N, args.P, args.beta, args.eta)
    traj_config = SimConfig(trials=args.trajectory_trials, seed=args.seed, time_resolution=args.time_resolution)
    stats = trajectories(args.P, args.beta, args.eta, traj_config)
    out = _out_dir(args.out)
    data.write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, stats.rows())
    report = [
        ("N", args.N),
        ("P", args.P),
        ("beta", args.beta),
        ("eta", args.eta),
        ("rho_estimate", mean),
        ("std_error", stderr),
        ("rho_exact", exact),
    ]
    if args.P <= DP_MAX_POPULATION:
        report.append(("rho_dp", dp_exact_rho(args.N, args.P, args.beta, args.eta)))
    report += [
        ("z_score", (mean - exact) / stderr if stderr > 0 else 0.0),
        ("trials", args.trials),
        ("trajectory_trials", args.trajectory_trials),
        ("seed", args.seed),
        ("rng", RNG_ALGORITHM),
    ]
    sys.stdout.write(_write_report(out / "simulate.txt", report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def verify_status(gap: float) -> str:
    if gap <= OPTIMAL_GAP:
        return "optimal"
    if gap <= APPROX_OPTIMAL_GAP:
        return "approximately optimal"
    return "suboptimal"


def cmd_verify(args) -> int:
    spec = parse_eta(args.eta)
    if spec.kind != "point" or args.model != "approx":
        raise ConfigError("verify audits the approximate model at a single eta")
    scenario = _scenario(args, spec)
    if scenario.k > VERTEX_MAX_LOCATIONS:
        raise ScaleError(f"vertex audit supports k <= {VERTEX_MAX_LOCATIONS}, got k={scenario.k}")
    eta = spec.values[0]
    heuristic, _ = solve_access_aware(scenario, eta, _engine_config(args))
    vertices = enumerate_vertices(scenario)
    rds = np.array([rd_approx(scenario, v.n, eta) for v in vertices])
    order = np.argsort(rds, kind="stable")
    rd_h = rd_approx(scenario, heuristic.n, eta)
    rd_p = rd_approx(scenario, scenario.p, eta)
    rd_min = float(rds[order[0]])
    gap = rd_h - rd_min

    out = _out_dir(args.out)
    rows = []
    for rank, idx in enumerate(order, start=1):
        n = vertices[idx].n
        is_heuristic = bool(np.max(np.abs(n - heuristic.n)) <= 1e-7)
        rows.append((rank, rds[idx], is_heuristic, *n))
    data.write_csv(out / "vertices.csv", ("rank", "rd", "heuristic", *(f"n_{i}" for i in scenario.ids)), rows)
    report = [
        ("vertices", len(vertices)),
        ("rd_min_vertex", rd_min),
        ("rd_max_vertex", float(rds[order[-1]])),
        ("rd_proportional", rd_p),
        ("rd_heuristic", rd_h),
        ("gap", gap),
        ("status", verify_status(gap)),
        ("heuristic_beats_proportional", rd_h <= rd_p + 1e-9),
    ]
    sys.stdout.write(_write_report(out / "verify.txt", report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / impact / interpolate
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        locations = data.synthesize_locations(args.k, args.seed, args.profile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    data.write_locations(path, locations)
    print(f"wrote {len(locations)} locations to {path}")
    return EXIT_OK


def _load_run(run_dir: Path) -> tuple[Scenario, dict]:
    path = run_dir / "run.json"
    try:
        run = json.loads(path.read_text(encoding="utf-8"))
        locs = run["locations"]
        spec = EtaSpec(tuple(run["eta"]["values"]), None if run["eta"]["weights"] is None else tuple(run["eta"]["weights"]))
        locations = tuple(
            LocationProfile(i, int(P), float(b)) for i, P, b in zip(locs["ids"], locs["populations"], locs["betas"])
        )
        scenario = Scenario(locations, run["alpha"], run["epsilon"], Distance(run["distance"]), spec)
        n = np.asarray(run["n"], dtype=float)
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed run file ({exc})") from None
    run["n"] = n
    return scenario, run


def impact_rows(scenario: Scenario, n: np.ndarray, eta: float, model: str, params: ImpactParams, samples: int = 5):
    """``(t, RD, expected adverse)`` along the segment from ``p`` to ``n``."""
    rows = []
    for t in np.linspace(0.0, 1.0, samples):
        m = (1.0 - t) * scenario.p + t * n
        rho, _ = _shares(scenario, m, (eta,), (1.0,), model)
        rows.append((float(t), rate_disparity(scenario, m, rho), expected_adverse(params, scenario, m, rho)))
    return rows


def collinearity(points) -> tuple[float, float]:
    """Slope through the end points and the largest deviation of any point from that line."""
    (x0, y0), (x1, y1) = points[0], points[-1]
    if x1 == x0:
        return float("nan"), 0.0
    slope = (y1 - y0) / (x1 - x0)
    residual = max(abs(y - (y0 + slope * (x - x0))) for x, y in points)
    return slope, residual


def cmd_impact(args) -> int:
    run_dir = Path(args.run)
    scenario, run = _load_run(run_dir)
    if scenario.eta.kind != "point":
        raise ConfigError("impact needs a run made with a single eta value")
    params = ImpactParams(args.x, args.delta, args.q, args.q_prime)
    eta = scenario.eta.values[0]
    model = run.get("model", "approx")
    rows = impact_rows(scenario, run["n"], eta, model, params)
    slope, residual = collinearity([(rd, adv) for _, rd, adv in rows])
    threshold, positive = slope_condition(args.delta, args.q, args.q_prime)
    scale = max(1.0, max(abs(adv) for _, _, adv in rows))
    out = _out_dir(args.out or run_dir)
    data.write_csv(out / "impact_segment.csv", ("t", "rd", "expected_adverse"), rows)
    report = [
        ("adverse_proportional", rows[0][2]),
        ("adverse_access_aware", rows[-1][2]),
        ("adverse_reduction", rows[0][2] - rows[-1][2]),
        ("rd_proportional", rows[0][1]),
        ("rd_access_aware", rows[-1][1]),
        ("threshold", threshold),
        ("delta", args.delta),
        ("delta_exceeds_threshold", positive),
        ("slope", slope),
        ("linearity_residual", residual),
        ("collinear", residual <= 1e-9 * scale),
    ]
    sys.stdout.write(_write_report(out / "impact.txt", report))
    return EXIT_OK


def cmd_interpolate(args) -> int:
    points = data.read_observations(args.observations)
    grid = parse_grid(args.grid)
    yhat = soft_nn_interpolate(points, args.lam, grid)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    data.write_csv(path, ("beta", "yhat"), zip(grid, yhat))
    print(f"wrote {grid.size} points to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="accessalloc", description="Access-aware allocation of scarce resources.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="solve one scenario")
    _add_run_flags(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("sweep", help="access-aware vs proportional across an eta grid")
    _add_run_flags(p, eta_required=False)
    p.add_argument("--svg", action="store_true", help="also render sweep.svg and behavior.svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo acquisition share and trajectories")
    p.add_argument("--N", type=int, required=True, help="units allocated")
    p.add_argument("--P", type=int, required=True, help="population")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--trajectory-trials", type=int, default=1000)
    p.add_argument("--time-resolution", type=int, default=101)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="audit the heuristic against every vertex")
    _add_run_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="generate a synthetic locations CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=["uniform", "clustered"], default="uniform")
    p.add_argument("--out", default="locations.csv", help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("impact", help="expected adverse outcomes for an allocate run")
    p.add_argument("--run", required=True, help="directory written by allocate")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--q-prime", type=float, required=True)
    p.add_argument("--out", default=None, help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("interpolate", help="soft nearest-neighbour smoothing over beta")
    p.add_argument("--observations", required=True, help="CSV with beta,y[,weight]")
    p.add_argument("--lambda", dest="lam", type=float, default=20.0)
    p.add_argument("--grid", default="0:1:101", help="start:stop:count or comma list")
    p.add_argument("--out", default="interpolation.csv", help="output CSV path")
    p.set_defaults(func=cmd_interpolate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ScaleError as exc:
        print(f"scale guard: {exc}", file=sys.stderr)
        return EXIT_SCALE
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AccessAllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
