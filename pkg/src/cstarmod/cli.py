"""Scenario-driven command line front end.

A scenario is a JSON file with a ``command``, command-specific ``params``,
an optional ``seed`` and optional ``tolerances``.  Reports are written as
``report.json`` in the output directory (plus CSV series where a command
produces plot data).  Exit codes: 0 verdict computed, 2 hypothesis failure,
3 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import boundary, regularity, separation
from .fibers import IntervalFiberModel
from .localization import check_core, localize_module, localize_operator
from .module import ModuleVector, Submodule
from .operators import (
    BoundaryField,
    ConstantField,
    DiagonalField,
    FunctionSymbol,
    MultiplicationField,
    bounded_transform,
    build_boundary_field,
    deficiency_data,
    functional_calculus,
)
from .perturbation import (
    PerturbationProblem,
    build_sum_operator,
    build_sum_problem,
    graph_comparison_check,
    hermite_pair,
    kato_rellich_check,
    module_sum_check,
    relative_bound_estimate,
    strong_vanishing_Rn,
    sum_selfadjoint_regular_check,
    wust_check,
)
from .space import AlgebraElement, BaseSpace, HypothesisError, StateSpec

COMMANDS = (
    "classify-lambda", "separate", "localize", "check-regularity",
    "verify-sum", "perturb", "demo-counterexample", "core-check",
)

_EXPR_NS = {
    "exp": np.exp, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "sqrt": np.sqrt, "abs": np.abs, "pi": np.pi, "e": np.e, "j": 1j,
    "log": np.log,
}


def _compile_expr(expr: str):
    code = compile(expr, "<scenario>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NS and name not in ("x", "t"):
            raise ValueError(f"unknown name {name!r} in expression {expr!r}")

    def f(x):
        return eval(code, {"__builtins__": {}}, {**_EXPR_NS, "x": x, "t": x})
    return f


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def emit_plot_data(series, path: Path) -> None:
    """Write (x, value) rows as CSV with a header and 15 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for x, v in series:
            writer.writerow([f"{float(x):.15g}", f"{float(v):.15g}"])


def _parse_lambda(data: dict) -> boundary.LambdaSpec:
    space = BaseSpace.from_json(data["space"])
    regions = []
    for r in data["regions"]:
        if r["mode"] == "singular":
            regions.append(boundary.Region("singular"))
        else:
            regions.append(boundary.Region("expr", _compile_expr(r["expr"])))
    bdata = []
    for b in data.get("breakpoint_data", []):
        limit = b.get("limit")
        bdata.append(boundary.BreakpointData(
            value=_as_complex(b["value"]),
            limit=None if limit is None else _as_complex(limit)))
    return boundary.LambdaSpec(space, tuple(data.get("breakpoints", [])),
                               tuple(regions), tuple(bdata))


def _parse_operator(data: dict):
    kind = data["type"]
    if kind == "boundary_field":
        lam = _parse_lambda(data["lambda"])
        T, _, _ = build_boundary_field(lam, int(data.get("fiber_n", 301)),
                                       data.get("scheme", "sbp42"))
        return T
    if kind == "extension_field":
        space = BaseSpace.from_json(data["space"])
        model = IntervalFiberModel(int(data.get("fiber_n", 301)),
                                   data.get("scheme", "sbp42"))
        op = model.extension(_as_complex(data["lam"]))
        return ConstantField(space, op)
    if kind == "diagonal":
        space = BaseSpace.from_json(data["space"])
        mats = np.asarray(data["mats"], dtype=float)
        return DiagonalField(space, mats[..., 0] + 1j * mats[..., 1])
    if kind == "multiplication":
        a = AlgebraElement.from_json(data["a"])
        return MultiplicationField(a, int(data.get("fiber_dim", 1)))
    raise ValueError(f"unknown operator type {kind!r}")


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _cmd_classify_lambda(params, rng, out):
    lam = _parse_lambda(params["lambda"])
    cls = boundary.classify_lambda(lam)
    verdict = regularity.classify_boundary_operator(cls)
    report = {"classification": cls.to_json(), "verdict": verdict.to_json()}
    report["regular"] = verdict.regular
    report["selfadjoint"] = verdict.selfadjoint
    if params.get("numeric_check", False):
        T, _, _ = build_boundary_field(lam, int(params.get("fiber_n", 201)))
        states = regularity.grid_pure_states(lam.space, params.get("states_max"))
        numeric = regularity.local_global_check(T, states, rng=rng)
        report["numeric"] = numeric.to_json()
        report["routes_agree"] = (
            numeric.regular == verdict.detail["selfadjoint_and_regular"])
    return report, []


def _cmd_separate(params, rng, out):
    prob_data = params["problem"]
    x0 = ModuleVector.from_json(prob_data["x0"])
    if "submodule" in prob_data:
        L = Submodule.from_json(prob_data["submodule"])
    else:
        L = separation.ConvexHull(tuple(
            ModuleVector.from_json(v) for v in prob_data["hull"]))
    problem = separation.SeparationProblem.build(L, x0, rng=rng)
    try:
        cert = separation.find_separating_state(problem)
    except separation.NoCertificateError as exc:
        raise HypothesisError(str(exc)) from exc
    return {"delta": problem.delta, "certificate": cert.to_json()}, []


def _cmd_localize(params, rng, out):
    shape_data = params["shape"]
    space = BaseSpace.from_json(shape_data["space"])
    omega = StateSpec.from_json(params["state"])
    T = _parse_operator(params["operator"]) if "operator" in params else None
    if T is not None:
        shape = T.module_shape
    else:
        from .module import ModuleShape
        shape = ModuleShape(space, int(shape_data["fiber_dim"]))
    loc = localize_module(shape, omega)
    report = {"localization": loc.to_json()}
    if T is not None:
        L = localize_operator(T, loc)
        d, margins = L.defect_indices(with_margins=True)
        report["operator"] = {"defects": list(d), "margins": margins,
                              "domain_dim": L.domain_dim()}
    return report, []


def _cmd_check_regularity(params, rng, out):
    T = _parse_operator(params["operator"])
    states = regularity.grid_pure_states(T.space, params.get("states_max"))
    verdict = regularity.local_global_check(T, states, tau=params.get("tau"), rng=rng)
    report = verdict.to_json()
    if params["operator"]["type"] == "boundary_field":
        lam = _parse_lambda(params["operator"]["lambda"])
        symbolic = regularity.classify_boundary_operator(boundary.classify_lambda(lam))
        report["symbolic"] = symbolic.to_json()
        report["routes_agree"] = (
            verdict.regular == symbolic.detail["selfadjoint_and_regular"])
    return report, []


def _cmd_verify_sum(params, rng, out):
    pair = params.get("pair", "hermite")
    if pair == "hermite":
        dim = int(params.get("dim", 200))
        S, T, _ = hermite_pair(dim)
        core_dim = int(params.get("core_dim", dim // 2))
        mu_grid = params.get("mu_grid", [20.0, -20.0, 40.0, -40.0])
        prob = build_sum_problem(S, T, core_dim, mu_grid,
                                 commutator=-1j * np.eye(dim), rng=rng)
        xi = [prob.core_sample(rng) for _ in range(6)]
        rn = strong_vanishing_Rn(prob, xi, params.get("n_list", [1, 10, 100, 1000]))
        gc = graph_comparison_check(prob, xi)
        D = build_sum_operator(prob)
        final = sum_selfadjoint_regular_check(prob, D, rng=rng)
        ev = np.linalg.eigvalsh(D.dense())
        kmax = int(params.get("kmax", 10))
        targets = np.sqrt(2.0 * np.arange(0, kmax + 1))
        spec_err = max(float(np.min(np.abs(ev - t))) for t in
                       np.concatenate([targets, -targets[1:]]))
        report = {
            "assumptions": prob.report,
            "strong_vanishing": rn,
            "graph_comparison": gc,
            "final": final,
            "spectrum_error": spec_err,
            "verdict": bool(final["verdict"] and rn["vanishes"] and gc["holds"]),
        }
        return report, []
    if pair == "interval_mult":
        space = BaseSpace.from_json(params["space"])
        model = IntervalFiberModel(int(params.get("fiber_n", 201)),
                                   params.get("scheme", "sbp42"))
        S = ConstantField(space, model.extension(_as_complex(params.get("lam", 1.0))))
        a = AlgebraElement.from_function(space, _compile_expr(params["multiplier"]))
        T = MultiplicationField(a, model.space)
        states = regularity.grid_pure_states(space, params.get("states_max"))
        report = module_sum_check(S, T, states)
        return report, []
    raise ValueError(f"unknown pair {pair!r}")


def _cmd_perturb(params, rng, out):
    model = IntervalFiberModel(int(params.get("fiber_n", 201)),
                               params.get("scheme", "sbp42"))
    T = model.extension(_as_complex(params.get("lam", 1.0)))
    vdata = params["v"]
    if vdata["type"] == "mult":
        f = _compile_expr(vdata["expr"])
        vals = np.array([f(t) for t in model.space.nodes], dtype=complex)
        from .fibers import FiberOperator
        V = FiberOperator(model.space, np.diag(vals), meta={"kind": "mult"})
    elif vdata["type"] == "transform_mix":
        a0 = float(vdata.get("a0", 0.0))
        c = float(vdata.get("c", 1.0))
        Z = bounded_transform(T)
        from .fibers import FiberOperator
        V = FiberOperator(model.space, a0 * T.dense() + c * Z, meta={"kind": "mix"})
    else:
        raise ValueError(f"unknown perturbation type {vdata['type']!r}")
    a_hat, b_hat = relative_bound_estimate(T, V, rng=rng)
    P = PerturbationProblem(T, V, float(params.get("a", a_hat)),
                            float(params.get("b", b_hat)))
    mode = params.get("mode", "auto")
    report = {"a_hat": a_hat, "b_hat": b_hat, "declared": {"a": P.a, "b": P.b}}
    if mode in ("kato", "auto") and P.a < 1.0:
        report["kato_rellich"] = kato_rellich_check(P, rng=rng)
        report["verdict"] = report["kato_rellich"]["verdict"]
    if mode in ("wust", "auto") and (P.a >= 1.0 or mode == "wust"):
        report["wust"] = wust_check(P, rng=rng)
        report["verdict"] = report["wust"]["verdict"]
    return report, []


def _cmd_demo_counterexample(params, rng, out):
    N = int(params.get("N", 10))
    eps = float(params.get("eps", 0.1))
    comb, flat_report = separation.flattening_combination(N)
    grid = comb.space
    series_comb = list(zip(grid.nodes, comb.values.real))
    hat = separation.hat_function(0.5, 4, BaseSpace.grid(0.0, 1.0, 201))
    series_hat = list(zip(hat.space.nodes, hat.values.real))
    pure = separation.pure_state_counterexample(eps)
    report = {"flattening": flat_report, "pure_state": pure}
    files = [("hat_function.csv", series_hat),
             ("flattening_combination.csv", series_comb)]
    return report, files


def _cmd_core_check(params, rng, out):
    T = _parse_operator(params["operator"])
    omega_list = [StateSpec.from_json(s) for s in params["states"]] \
        if "states" in params else regularity.grid_pure_states(T.space, 20)
    sub = Submodule.from_json(params["subdomain"])
    reports = check_core(T, sub, omega_list,
                         tol=float(params.get("tol", 1e-6)), rng=rng)
    return {"reports": [r.to_json() for r in reports]}, []


_DISPATCH = {
    "classify-lambda": _cmd_classify_lambda,
    "separate": _cmd_separate,
    "localize": _cmd_localize,
    "check-regularity": _cmd_check_regularity,
    "verify-sum": _cmd_verify_sum,
    "perturb": _cmd_perturb,
    "demo-counterexample": _cmd_demo_counterexample,
    "core-check": _cmd_core_check,
}


def run_scenario(scenario_path, out_dir, seed=None, threads: int = 1) -> int:
    """Execute one scenario file; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with open(scenario_path) as fh:
            scenario = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _write_report(out, {"error": f"cannot read scenario: {exc}"})
        return 3
    command = scenario.get("command")
    if command not in _DISPATCH:
        _write_report(out, {"error": f"unknown command {command!r}",
                            "known": list(COMMANDS)})
        return 3
    seed = scenario.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(int(seed))
    params = scenario.get("params", {})
    try:
        report, files = _DISPATCH[command](params, rng, out)
    except HypothesisError as exc:
        _write_report(out, {"command": command, "seed": int(seed),
                            "hypothesis_failure": str(exc)})
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        _write_report(out, {"command": command, "error": f"{type(exc).__name__}: {exc}"})
        return 3
    payload = {"command": command, "seed": int(seed), "report": report}
    _write_report(out, payload)
    for name, series in files:
        emit_plot_data(series, out / name)
    return 0


def _write_report(out: Path, payload: dict) -> None:
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cstarmod",
        description="Scenario runner for the Hilbert-module operator laboratory")
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (default 1 for reproducibility)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario's random seed")
    args = parser.parse_args(argv)
    return run_scenario(args.scenario, args.out, seed=args.seed, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
