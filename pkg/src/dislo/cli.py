"""Command line interface: simulate, verify, gronwall.

simulate writes a run directory containing ledger.json plus per-step CSV
snapshots (loops, plastic field, deformation).  verify replays every ledger
number from the snapshots and re-runs the invariant suites; its exit code is
zero only if everything passes.  gronwall tabulates the blow-up certificate
as a standalone utility.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import backend, evolve
from .currents import read_loops_csv, sweep_system, write_loops_csv
from .energy import read_deformation_csv, write_deformation_csv
from .evolve import (EvolutionState, RunResult, build_rescaling,
                     gronwall_bound_value, gronwall_certificate,
                     verify_difference_inequality, verify_energy_balance,
                     verify_flow, verify_rescaling, verify_stability)
from .plastic import det_residual, integrate_P, read_pfield_csv, \
    write_pfield_csv
from .scenario import ScenarioError, load_scenario, validate_scenario


def _snap_name(kind, k):
    return f"{kind}_{k:04d}.csv"


def write_run_artifacts(result: RunResult, scenario_raw: dict, out_dir: str,
                        snapshot_every: int = 1):
    os.makedirs(out_dir, exist_ok=True)
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    last = len(result.rows) - 1
    for k, state in enumerate(result.states):
        if k % snapshot_every and k != last:
            continue
        write_loops_csv(os.path.join(snap_dir, _snap_name("loops", k)), state.system)
        write_pfield_csv(os.path.join(snap_dir, _snap_name("pfield", k)), state.P)
        write_deformation_csv(os.path.join(snap_dir, _snap_name("deform", k)), state.y)
    ledger = {
        "schema_version": 1,
        "backend": backend.backend_name(),
        "seed": result.seed,
        "scenario": scenario_raw,
        "run": {
            "T": result.T,
            "N": result.N,
            "delta_t": result.T / result.N,
            "gronwall_constant": result.gronwall_constant,
            "t_infinity": gronwall_blowup_time(result.rows[0]["alpha"],
                                               result.gronwall_constant),
            "sigma": result.psi.sigma,
            "initial_stability_margin": result.initial_stability["margin"],
            "completed_steps": len(result.rows) - 1,
            "error": result.error,
        },
        "steps": result.rows,
    }
    with open(os.path.join(out_dir, "ledger.json"), "w") as fh:
        json.dump(ledger, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return ledger


def gronwall_blowup_time(alpha0, C):
    if C <= 0:
        return float("inf")
    with np.errstate(over="ignore"):
        return float(np.exp(-alpha0)) / C


def _print_summary(rows):
    print(f"{'k':>4} {'t':>10} {'s':>12} {'e':>14} {'d':>12} "
          f"{'alpha':>14} {'bound':>12}")
    for row in rows:
        print(f"{row['k']:>4} {row['t']:>10.6f} {row['s']:>12.6f} "
              f"{row['e']:>14.8f} {row['d']:>12.3e} {row['alpha']:>14.8f} "
              f"{row['gronwall_bound']:>12.6f}")


def cmd_simulate(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raw = scn.raw
    if args.seed is not None:
        raw["solver"]["seed"] = int(args.seed)
    if args.steps is not None:
        raw["N"] = int(args.steps)
    out = args.out or raw["output_dir"] or "run"
    model = scn.model()
    result = evolve.run(model, scn.system(), scn.T, scn.N, seed=scn.seed)
    write_run_artifacts(result, raw, out, scn.snapshot_every)
    _print_summary(result.rows)
    if result.error:
        print(f"aborted: {result.error}", file=sys.stderr)
        return 1
    print(f"ledger written to {os.path.join(out, 'ledger.json')}")
    return 0


# ---------------------------------------------------------------------------
# run-directory verification


def _load_states(run_dir, ledger, model):
    snap_dir = os.path.join(run_dir, "snapshots")
    states = []
    for row in ledger["steps"]:
        k = row["k"]
        system = read_loops_csv(os.path.join(snap_dir, _snap_name("loops", k)))
        P = read_pfield_csv(os.path.join(snap_dir, _snap_name("pfield", k)),
                            model.grid)
        y = read_deformation_csv(os.path.join(snap_dir, _snap_name("deform", k)),
                                 model.mesh)
        core = row["core"]
        states.append(EvolutionState(k=k, t=row["t"], y=y, P=P, system=system,
                                     energy=row["e"], objective=row["e"] - core))
    return states


def verify_run_dir(run_dir, stability_samples=8):
    """Replay every ledger quantity from the snapshots; returns (report, ok)."""
    with open(os.path.join(run_dir, "ledger.json")) as fh:
        ledger = json.load(fh)
    scn = validate_scenario(ledger["scenario"])
    model = scn.model()
    rows = ledger["steps"]
    dt = ledger["run"]["delta_t"]
    states = _load_states(run_dir, ledger, model)
    report = {"run_dir": run_dir, "checks": {}}
    checks = report["checks"]

    def record(name, passed, detail):
        checks[name] = {"passed": bool(passed), **detail}

    # determinant conservation from snapshots
    det_res = [det_residual(st.P) for st in states]
    record("det_residual", max(det_res) <= 1e-10, {"max": max(det_res)})

    # ledger bookkeeping: alpha, beta, s, gronwall bounds recomputable
    ok = True
    acc_d = 0.0
    beta = rows[0]["alpha"]
    prev_alpha = None
    C = ledger["run"]["gronwall_constant"]
    worst = 0.0
    for i, row in enumerate(rows):
        acc_d += row["d"]
        alpha = 1.0 + row["e"] + acc_d
        if i > 0:
            beta += max(alpha - prev_alpha, 0.0)
        prev_alpha = alpha
        bound = gronwall_bound_value(rows[0]["alpha"], C, row["t"])
        for name, val, ref in (("alpha", alpha, row["alpha"]),
                               ("beta", beta, row["beta"]),
                               ("gronwall_bound", bound, row["gronwall_bound"])):
            err = abs(val - ref) / (1.0 + abs(ref))
            worst = max(worst, err)
            ok = ok and err <= 1e-10
    psi = build_rescaling(rows)
    s_err = max(abs(float(s) - row["s"]) for s, row in zip(psi.s_points, rows))
    ok = ok and s_err <= 1e-10
    record("ledger_bookkeeping", ok, {"max_error": max(worst, s_err)})

    record("difference_inequality",
           verify_difference_inequality(rows, dt, C), {"constant": C})

    # alpha within the certificate bound below blow-up
    t_inf = ledger["run"]["t_infinity"]
    bound_ok = all(row["alpha"] <= row["gronwall_bound"]
                   + 1e-10 * (1 + abs(row["gronwall_bound"]))
                   for row in rows if row["t"] < t_inf)
    record("gronwall_bound", bound_ok, {"t_infinity": t_inf})

    # accepted never worse than neutral
    obj_ok = all(row["objective_accepted"] <= row["objective_neutral"]
                 for row in rows[1:])
    record("objective_vs_neutral", obj_ok, {})

    # step replay: trajectories, plastic integration, dissipation, energies
    from . import dissipation as dissip
    from .energy import core_energy, elastic_energy, load_pairing

    trajs = [None]
    paths = [None]
    step_ok = True
    replay_error = None
    max_p_err = 0.0
    max_d_err = 0.0
    max_e_err = 0.0
    max_flow = 0.0
    loading = scn.loading()
    try:
        for k in range(1, len(rows)):
            row = rows[k]
            disp = [np.asarray(d, dtype=float)
                    for d in row["accepted_candidate"]["displacements"]]
            traj = sweep_system(states[k - 1].system, disp, (0.0, 1.0))
            fwd = traj.final_system()
            for a, b in zip(fwd.loops, states[k].system.loops):
                if not np.allclose(a.nodes, b.nodes, atol=1e-12):
                    step_ok = False
            path = integrate_P(states[k - 1].P, traj, model.table, model.eta,
                               (0.0, 1.0), model.substeps, model.edge_gauss)
            dP = path.endpoint().flat() - states[k].P.flat()
            max_p_err = max(max_p_err, float(np.abs(dP).max()))
            d_re = dissip.dissipation(traj, path, model.dparams)
            max_d_err = max(max_d_err, abs(d_re - row["d"]) / (1.0 + abs(row["d"])))
            el = elastic_energy(states[k].y, states[k].P, model.elastic)
            e_re = el - load_pairing(states[k].y, loading, row["t"]) \
                + core_energy(states[k].system, model.zeta)
            max_e_err = max(max_e_err, abs(e_re - row["e"]) / (1.0 + abs(row["e"])))
            flow = verify_flow(path, traj, model)
            max_flow = max(max_flow,
                           abs(flow.max_residual - row["flow_residual"]))
            trajs.append(traj)
            paths.append(path)
    except (ValueError, RuntimeError) as exc:
        step_ok = False
        replay_error = str(exc)
    while len(trajs) < len(rows):
        trajs.append(None)
        paths.append(None)
    step_ok = step_ok and max_p_err <= 1e-8 and max_d_err <= 1e-8 \
        and max_e_err <= 1e-8 and max_flow <= 1e-9
    record("step_replay", step_ok,
           {"max_p_error": max_p_err, "max_diss_error": max_d_err,
            "max_energy_error": max_e_err, "max_flow_mismatch": max_flow,
            "error": replay_error})

    # rescaling construction
    result = RunResult(rows=rows, states=states, trajs=trajs, paths=paths,
                       model=model, T=ledger["run"]["T"],
                       N=ledger["run"]["N"], seed=ledger["seed"], psi=psi,
                       gronwall_constant=C, initial_stability=None)
    resc = verify_rescaling(result)
    record("rescaling", resc.passed,
           {"min_increment": resc.min_increment, "dt": resc.dt,
            "max_slope": float(resc.slopes.max()),
            "max_unit_dissipation": float(resc.unit_dissipation.max())
            if resc.unit_dissipation.size else 0.0})

    bal = verify_energy_balance(rows, loading)
    record("energy_balance", bal.passed,
           {"min_gap": float(bal.gaps.min()) if bal.gaps.size else 0.0})

    try:
        stab = verify_stability(states[-1], model, samples=stability_samples,
                                seed=ledger["seed"] + 1)
        record("stability", stab.passed,
               {"worst_violation": stab.worst_violation,
                "samples": stability_samples})
    except (ValueError, RuntimeError) as exc:
        record("stability", False, {"error": str(exc)})

    ok_all = all(c["passed"] for c in checks.values())
    report["passed"] = ok_all
    return report, ok_all


def cmd_verify(args) -> int:
    try:
        report, ok = verify_run_dir(args.run_dir, args.stability_samples)
    except OSError as exc:
        print(f"error: missing run artifact: {exc}", file=sys.stderr)
        return 2
    for name, chk in report["checks"].items():
        status = "PASS" if chk["passed"] else "FAIL"
        print(f"{status} {name}")
    out = os.path.join(args.run_dir, "verification.json")
    with open(out, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"report written to {out}")
    return 0 if ok else 1


def cmd_gronwall(args) -> int:
    table = gronwall_certificate(args.alpha0, args.C, args.T, args.N)
    print(f"T_infinity = {table.t_infinity}")
    print(f"{'k':>5} {'t':>12} {'iterate':>14} {'bound':>14}")
    for k, (t, a, b) in enumerate(zip(table.times, table.iterates, table.bounds)):
        bstr = f"{b:>14.8f}" if math.isfinite(b) else "  past-blow-up"
        astr = f"{a:>14.8f}" if math.isfinite(a) else f"{a:>14}"
        print(f"{k:>5} {t:>12.6f} {astr} {bstr}")
    print("certificate:", "PASS" if table.passed else "FAIL")
    return 0 if table.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dislo",
        description="Discrete dislocation-driven elasto-plastic evolution "
                    "(incremental minimization, verification, blow-up certificate)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and emit artifacts")
    sim.add_argument("scenario")
    sim.add_argument("--out", default=None, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--steps", type=int, default=None, help="override the step count N")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="replay a run directory and check invariants")
    ver.add_argument("run_dir")
    ver.add_argument("--stability-samples", type=int, default=8)
    ver.set_defaults(func=cmd_verify)

    gro = sub.add_parser("gronwall", help="blow-up certificate table")
    gro.add_argument("--alpha0", type=float, required=True)
    gro.add_argument("--C", type=float, required=True)
    gro.add_argument("--T", type=float, required=True)
    gro.add_argument("--N", type=int, required=True)
    gro.set_defaults(func=cmd_gronwall)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gronwall" and args.C <= 0:
        parser.error("--C must be positive")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
