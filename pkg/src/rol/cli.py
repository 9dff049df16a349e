"""Command-line front end: synthesize gains, simulate the closed loop,
optimize over candidate graphs, and certify attack classes.

Every command that writes files also writes ``run_manifest.json`` listing
each output with its SHA-256 content hash; given the same scenario, flags,
and seed, the data outputs (CSV/JSON/SVG) are byte-identical across runs —
only the manifest's timing entry varies.

Exit codes: 0 ok, 2 no admissible design, 3 invalid input, 4 numeric
divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    detect_attacked_nodes,
    tracking_error_energy,
    verify_performance_bound,
    weighted_error_energy,
)
from .attackclass import check_admissibility, realize_bias_model
from .errors import DivergenceError, InfeasibleError, ScenarioError
from .model import (
    Scenario,
    builtin_example_scenario,
    load_scenario,
    scenario_synthesis_hash,
)
from .plots import plot_run
from .simcore import simulate, state_layout, write_trajectory_csv
from .synthesis import (
    SynthesizedGains,
    gains_from_dict,
    gains_to_dict,
    optimize_over_graphs,
    synthesize,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_DIVERGED = 4

#: In-process gain cache keyed by (scenario content hash, design kind,
#: requested levels); lets repeated simulations and candidate evaluations
#: reuse synthesis work within one invocation.
_GAINS_CACHE: dict[tuple, SynthesizedGains] = {}


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _resolve_scenario(arg: str | None) -> tuple[Scenario, str]:
    """Scenario from a path, or the builtin example when ``arg`` is None or
    the literal ``builtin``."""
    if arg is None or arg == "builtin":
        return builtin_example_scenario(), "builtin"
    if not os.path.exists(arg):
        raise ScenarioError(f"scenario file not found: {arg}")
    return load_scenario(arg), arg


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    outdir: str,
    command: str,
    scenario_label: str,
    seed: int | None,
    started: float,
    files: list[str],
) -> None:
    manifest = {
        "command": command,
        "scenario": scenario_label,
        "seed": seed,
        "out": outdir,
        "version": __version__,
        "timing": {"wall_s": round(time.monotonic() - started, 3)},
        "files": {
            os.path.relpath(f, outdir): _sha256(f) for f in sorted(files)
        },
    }
    _write_json(os.path.join(outdir, "run_manifest.json"), manifest)


def _thread_count() -> int:
    raw = os.environ.get("ROL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise ScenarioError(f"ROL_THREADS must be a positive integer, got {raw!r}")
    if v < 1:
        raise ScenarioError(f"ROL_THREADS must be a positive integer, got {raw!r}")
    return v


def _synthesize_cached(
    scenario: Scenario,
    kind: str = "resilient",
    gamma2: float | None = None,
    bar_gamma2: float | None = None,
    ltv_horizon: float | None = None,
) -> SynthesizedGains:
    key = (scenario_synthesis_hash(scenario), kind, gamma2, bar_gamma2, ltv_horizon)
    hit = _GAINS_CACHE.get(key)
    if hit is None:
        hit = synthesize(
            scenario,
            kind=kind,
            gamma2=gamma2,
            bar_gamma2=bar_gamma2,
            ltv_horizon=ltv_horizon,
        )
        _GAINS_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    started = time.monotonic()
    scenario, label = _resolve_scenario(args.scenario)
    gains = _synthesize_cached(
        scenario,
        gamma2=args.gamma2,
        bar_gamma2=args.bar_gamma2,
        ltv_horizon=args.ltv_horizon,
    )
    os.makedirs(args.out, exist_ok=True)
    gains_path = os.path.join(args.out, "gains.json")
    report_path = os.path.join(args.out, "synthesis_report.json")
    _write_json(gains_path, gains_to_dict(gains))
    _write_json(
        report_path,
        {
            "kind": gains.kind,
            "label": gains.label,
            "gamma2": gains.gamma2,
            "bar_gamma2": gains.bar_gamma2,
            "scenario_hash": gains.scenario_hash,
            "diagnostics": gains.diagnostics,
        },
    )
    _write_manifest(args.out, "synthesize", label, None, started, [gains_path, report_path])
    if gains.gamma2 is not None:
        print(f"defence attenuation level gamma2 = {gains.gamma2:.6g}")
    print(f"observer attenuation level bar_gamma2 = {gains.bar_gamma2:.6g}")
    print(f"design: {gains.label}; wrote {gains_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.monotonic()
    scenario, label = _resolve_scenario(args.scenario)
    if args.step is not None:
        if not args.step > 0.0:
            raise ScenarioError(f"--step must be positive, got {args.step:g}")
        scenario = dataclasses.replace(
            scenario,
            simulation=dataclasses.replace(scenario.simulation, step=args.step),
        )

    if args.baseline:
        gains = _synthesize_cached(scenario, kind="baseline")
    else:
        gains_path = args.gains or os.path.join(args.out, "gains.json")
        if not os.path.exists(gains_path):
            raise ScenarioError(
                f"gains file not found: {gains_path} (run `rol synthesize` first)"
            )
        with open(gains_path) as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(
                    f"gains file parse error at line {exc.lineno}: {exc.msg}"
                )
        gains = gains_from_dict(payload)
        want = scenario_synthesis_hash(scenario)
        if gains.scenario_hash != want:
            raise ScenarioError(
                f"gains in {gains_path} were synthesized for a different "
                f"scenario (hash {gains.scenario_hash[:12]}.. != {want[:12]}..)"
            )

    traj = simulate(scenario, gains, seed=args.seed)

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "trajectory.csv")
    write_trajectory_csv(traj, csv_path)

    detection = detect_attacked_nodes(traj)
    report = {
        "kind": traj.kind,
        "seed": traj.seed,
        "joint_state_dimension": state_layout(scenario, gains).total,
        "weighted_error_energy": weighted_error_energy(traj, scenario.weights.P),
        "tracking_energies": [
            tracking_error_energy(traj, i) for i in range(1, scenario.N + 1)
        ],
        "max_abs_error": [
            float(np.max(np.abs(traj.e[:, i, :]))) for i in range(scenario.N)
        ],
        "max_abs_u": [
            float(np.max(np.abs(u))) if u.size else 0.0 for u in traj.u
        ],
        "detection": detection.to_dict(),
    }
    if gains.is_resilient:
        report["bound"] = verify_performance_bound(traj, scenario, gains).to_dict()
    else:
        report["bound"] = {
            "skipped": "baseline design carries no resilience certificate"
        }
    report_path = os.path.join(args.out, "report.json")
    _write_json(report_path, report)

    files = [csv_path, report_path]
    if args.plots:
        files += plot_run(traj, os.path.join(args.out, "plots"))
    _write_manifest(args.out, "simulate", label, args.seed, started, files)

    print(f"{traj.kind} run, seed {traj.seed}: {len(traj.t)} stored samples")
    if detection.flagged:
        onsets = ", ".join(
            f"node {i} at t={detection.onsets[i]:.3f}" for i in detection.flagged
        )
        print(f"attack flagged: {onsets}")
    else:
        print("attack flagged: none")
    if isinstance(report["bound"], dict) and "holds" in report["bound"]:
        b = report["bound"]
        print(
            f"performance bound: lhs={b['lhs']:.6g} rhs={b['rhs']:.6g} "
            f"holds={b['holds']}"
        )
    print(f"wrote {csv_path}")
    return EXIT_OK


def _parse_candidates(path) -> list[list[tuple[int, int]]]:
    if not os.path.exists(path):
        raise ScenarioError(f"candidates file not found: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"candidates file parse error at line {exc.lineno}: {exc.msg}"
            )
    if isinstance(data, dict):
        data = data.get("candidates")
    if not isinstance(data, list) or not data:
        raise ScenarioError(
            "candidates file must hold a non-empty list of edge lists "
            '(or {"candidates": [...]})'
        )
    out = []
    for ci, cand in enumerate(data):
        if not isinstance(cand, list):
            raise ScenarioError(f"candidate {ci} is not a list of edges")
        edges = []
        for ei, pair in enumerate(cand):
            ok = (
                isinstance(pair, list)
                and len(pair) == 2
                and all(isinstance(v, int) and v >= 1 for v in pair)
            )
            if not ok:
                raise ScenarioError(
                    f"candidate {ci}, edge {ei}: expected [j, i] with "
                    f"positive integer node ids, got {pair!r}"
                )
            edges.append((pair[0], pair[1]))
        out.append(edges)
    return out


def cmd_optimize_graphs(args) -> int:
    started = time.monotonic()
    paths = args.paths
    if len(paths) == 1:
        scenario_arg, cand_path = None, paths[0]
    elif len(paths) == 2:
        scenario_arg, cand_path = paths
    else:
        raise ScenarioError(
            "optimize-graphs takes [scenario] candidates, got "
            f"{len(paths)} positional arguments"
        )
    scenario, label = _resolve_scenario(scenario_arg)
    candidates = _parse_candidates(cand_path)
    res = optimize_over_graphs(
        scenario, candidates, max_workers=_thread_count()
    )
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "graph_search.json")
    _write_json(out_path, res.to_dict())
    _write_manifest(args.out, "optimize-graphs", label, None, started, [out_path])
    for c in res.candidates:
        if c.feasible:
            print(
                f"candidate {c.index}: gamma2={c.gamma2:.6g} "
                f"bar_gamma2={c.bar_gamma2:.6g}"
            )
        else:
            print(f"candidate {c.index}: infeasible ({c.message})")
    if res.all_infeasible:
        print("no admissible graph among the candidates")
        return EXIT_INFEASIBLE
    print(f"winner: candidate {res.winner}")
    return EXIT_OK


_SUPERSCRIPTS = str.maketrans({"⁰": "0", "¹": "1", "²": "2", "³": "3", "⁴": "4"})


def _strip_outer_parens(text: str) -> str:
    while text.startswith("(") and text.endswith(")"):
        depth = 0
        for idx, ch in enumerate(text):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0 and idx < len(text) - 1:
                return text
        text = text[1:-1]
    return text


_TERM_RE = re.compile(
    r"^([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\*?(s(?:\^(\d+))?)?$"
)


def _parse_polynomial(text: str, what: str) -> list[float]:
    """Coefficients (highest degree first) of a polynomial in s, e.g.
    ``s^2 + 3.5s - 1``."""
    text = _strip_outer_parens(text.replace(" ", ""))
    if not text:
        raise ScenarioError(f"empty {what} polynomial")
    # split into terms at top-level signs
    terms = []
    cur = ""
    for idx, ch in enumerate(text):
        if ch in "+-" and idx > 0 and text[idx - 1] not in "eE+-":
            terms.append(cur)
            cur = ch
        else:
            cur += ch
    terms.append(cur)
    coeffs: dict[int, float] = {}
    for term in terms:
        m = _TERM_RE.match(_strip_outer_parens(term))
        if not m or (m.group(2) is None and m.group(3) is None):
            raise ScenarioError(f"cannot parse {what} term {term!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) is not None else 1.0
        if m.group(3) is None:
            power = 0
        elif m.group(4) is None:
            power = 1
        else:
            power = int(m.group(4))
        coeffs[power] = coeffs.get(power, 0.0) + sign * coef
    deg = max(coeffs)
    return [coeffs.get(p, 0.0) for p in range(deg, -1, -1)]


def parse_rational(text: str) -> tuple[list[float], list[float]]:
    """Parse a shaping-filter spec like ``410/(s+40)`` into numerator and
    denominator coefficient lists (highest degree first)."""
    text = text.strip().replace("−", "-").translate(_SUPERSCRIPTS)
    depth = 0
    split = None
    for idx, ch in enumerate(text):
        depth += ch == "("
        depth -= ch == ")"
        if ch == "/" and depth == 0:
            if split is not None:
                raise ScenarioError("more than one top-level '/' in filter spec")
            split = idx
    if split is None:
        return _parse_polynomial(text, "numerator"), [1.0]
    return (
        _parse_polynomial(text[:split], "numerator"),
        _parse_polynomial(text[split + 1 :], "denominator"),
    )


def cmd_check_attack_class(args) -> int:
    num, den = parse_rational(args.filter)
    report = check_admissibility(num, den)
    if any("improper" in msg for msg in report.messages):
        print("improper shaping filter: " + "; ".join(report.messages), file=sys.stderr)
        return EXIT_INVALID
    if not report.admissible:
        bad = [r for r in report.poles if r.real >= 0.0]
        roots = ", ".join(f"{r.real:.6g}{r.imag:+.6g}j" for r in bad)
        print(
            "inadmissible attack class: " + "; ".join(report.messages),
            file=sys.stderr,
        )
        if roots:
            print(f"unstable closed-loop roots: {roots}", file=sys.stderr)
        return EXIT_INFEASIBLE
    bias = realize_bias_model(num, den, n_f=args.multiplicity)
    print("admissible: yes (all closed-loop roots in the open left half-plane)")
    print(f"g1 (step residual energy) = {report.g1:.6g}")
    print(f"g2 (peak residual gain)   = {report.g2:.6g}")
    print(
        f"bias-model realization: order {bias.n_eps} "
        f"({bias.n_eps // max(1, args.multiplicity)} per channel, "
        f"multiplicity {args.multiplicity})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rol",
        description=(
            "Synthesize, simulate, and analyse resilient distributed "
            "state-estimator networks."
        ),
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_out(sp):
        sp.add_argument(
            "--out",
            default="rol_out",
            metavar="DIR",
            help="output directory (default: rol_out)",
        )

    sp = sub.add_parser(
        "synthesize", help="design estimator and defence gains for a scenario"
    )
    sp.add_argument(
        "scenario",
        nargs="?",
        default=None,
        help="scenario JSON file (default: builtin six-node example)",
    )
    sp.add_argument(
        "--gamma2",
        type=float,
        default=None,
        help="fixed defence attenuation level (default: minimized by bisection)",
    )
    sp.add_argument(
        "--bar-gamma2",
        dest="bar_gamma2",
        type=float,
        default=None,
        help="fixed observer attenuation level (default: minimized by bisection)",
    )
    sp.add_argument(
        "--ltv-horizon",
        dest="ltv_horizon",
        type=float,
        default=None,
        help="finite certification horizon for time-varying data",
    )
    add_out(sp)
    sp.set_defaults(fn=cmd_synthesize)

    sp = sub.add_parser("simulate", help="run the closed loop and write reports")
    sp.add_argument(
        "scenario",
        nargs="?",
        default=None,
        help="scenario JSON file (default: builtin six-node example)",
    )
    sp.add_argument(
        "gains",
        nargs="?",
        default=None,
        help="gains JSON from `rol synthesize` (default: OUT/gains.json)",
    )
    sp.add_argument("--seed", type=int, default=0, help="run seed (default: 0)")
    sp.add_argument(
        "--step", type=float, default=None, help="integration step override"
    )
    sp.add_argument(
        "--baseline",
        action="store_true",
        help="simulate the plain observer network without the defence layer "
        "(its gains are synthesized on the fly)",
    )
    sp.add_argument(
        "--plots", action="store_true", help="also write SVG plots under OUT/plots"
    )
    add_out(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser(
        "optimize-graphs",
        help="minimize the attenuation levels over candidate graphs",
    )
    sp.add_argument(
        "paths",
        nargs="+",
        metavar="PATH",
        help="[scenario] candidates — candidate file holds a JSON list of "
        "edge lists [[j, i], ...]; ROL_THREADS caps parallel evaluation",
    )
    add_out(sp)
    sp.set_defaults(fn=cmd_optimize_graphs)

    sp = sub.add_parser(
        "check-attack-class",
        help="certify a shaping filter, e.g. '410/(s+40)'",
    )
    sp.add_argument("filter", help="rational filter spec N(s)/D(s)")
    sp.add_argument(
        "--multiplicity",
        type=int,
        default=1,
        help="number of attack channels sharing the filter (default: 1)",
    )
    sp.set_defaults(fn=cmd_check_attack_class)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
