"""Command-line pipeline: linear states, continuation, sweeps, spectra,
transition scans, time evolution, and the validation oracle suite.

Independent jobs (branches, spectrum points) run on a bounded thread pool;
the heavy kernels release the GIL inside LAPACK.  Every artifact is written
through the schema-versioned writers in ``io`` and each subcommand leaves a
manifest recording configuration, tolerances, versions, and wall time.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bound_states as bstates
from . import evolution as evol
from . import fem, io, linear, potential, shooting, stability
from .config import RunConfig, load_config
from .errors import ConfigurationError

TOLERANCES = {
    "bvp_tol": 1e-10,
    "hydrogen_abs": 1e-4,
    "oracle_rel": 1e-5,
    "pohozaev_pass": 1e-4,
    "pohozaev_flag": 1e-2,
    "slope_fd_rel": 1e-3,
    "negative_count_threshold": stability.NEGATIVE_COUNT_THRESHOLD,
}


def build_potential(cfg: RunConfig):
    if cfg.potential == "smoothed-exponential":
        return potential.smoothed_potential(cfg.potential_Z)
    if cfg.potential == "point-coulomb":
        return potential.point_coulomb(cfg.potential_Z)
    return potential.zero_potential()


class Pipeline:
    """Shared mesh/operator/state cache for one configured run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.V = build_potential(cfg)
        self._ops = {}
        self._linear = {}
        self._prob = {}

    def ops(self, n: int, r_max: float) -> fem.AssembledOperators:
        key = (n, r_max)
        if key not in self._ops:
            mesh = fem.build_sinh_mesh(n, r_max)
            self._ops[key] = fem.assemble(mesh, self.V)
        return self._ops[key]

    def problem(self, n: int, r_max: float) -> bstates.SchrodingerPoissonBVP:
        key = (n, r_max)
        if key not in self._prob:
            self._prob[key] = bstates.SchrodingerPoissonBVP(
                self.ops(n, r_max).mesh, self.V)
        return self._prob[key]

    def linear_pairs(self, n: int, r_max: float, k: int):
        key = (n, r_max, k)
        if key not in self._linear:
            self._linear[key] = linear.solve_linear_states(
                self.ops(n, r_max), k)
        return self._linear[key]

    def gamma_one(self, j: int, n: int, r_max: float,
                  keep_path: bool = False):
        pairs = self.linear_pairs(n, r_max, j + 1)
        return bstates.gamma_continuation(
            self.problem(n, r_max), self.ops(n, r_max), pairs[j],
            dgamma=self.cfg.dgamma, target_mass=self.cfg.target_mass,
            tol=self.cfg.bvp_tol, keep_path=keep_path)

    def state_at(self, j: int, E: float, n: int, r_max: float):
        g1 = self.gamma_one(j, n, r_max)
        if abs(E - g1.E) < 1e-14:
            return g1
        grid = bstates.geometric_E_grid(g1.E, E, self.cfg.E_per_decade)
        curve = bstates.sweep_E(self.problem(n, r_max), g1, grid,
                                tol=self.cfg.bvp_tol)
        if not curve.states or abs(curve.states[-1].E - E) > 1e-12:
            raise ConfigurationError(
                f"could not reach E={E:g} on branch {j}: {curve.stop_reason}")
        return curve.states[-1]

    def out(self, *parts) -> Path:
        p = Path(self.cfg.out_dir).joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p


def _manifest(pipe: Pipeline, sub: str, outputs, t0: float, **extra):
    return io.write_manifest(
        pipe.out(f"manifest_{sub.replace('-', '_')}.json"), sub,
        pipe.cfg.to_dict(), TOLERANCES, outputs, time.time() - t0,
        extra=extra or None)


def cmd_linear(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    k = args.k
    ops = pipe.ops(cfg.mesh_n, cfg.mesh_rmax)
    pairs = pipe.linear_pairs(cfg.mesh_n, cfg.mesh_rmax, k)
    linear.sturm_check(pairs)
    rows = [(p.node_count, p.eigenvalue, p.E,
             linear.rayleigh_defect(p, ops)) for p in pairs]
    outs = [io.write_csv(pipe.out("linear_eigs.csv"), "linear-eigs",
                         io.SCHEMAS["linear-eigs"][2], rows)]
    for p in pairs:
        seed = bstates.seed_from_linear(ops.mesh, ops, p)
        outs.append(io.write_csv(
            pipe.out(f"profile_linear_{p.node_count}.csv"), "profile",
            io.SCHEMAS["profile"][2], io.profile_rows(seed)))
    _manifest(pipe, "linear", outs, t0)
    print(f"linear: {len(pairs)} bound states, node counts "
          f"{[p.node_count for p in pairs]}")
    return 0


def cmd_continue_gamma(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    branches = [args.branch] if args.branch is not None else list(cfg.branches)

    def job(j):
        state, path = pipe.gamma_one(j, cfg.mesh_n, cfg.mesh_rmax,
                                     keep_path=True)
        return j, state, path

    outs = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        for j, state, path in ex.map(job, branches):
            outs.append(io.write_csv(
                pipe.out(f"branch_{j}_gamma.csv"), "branch",
                io.SCHEMAS["branch"][2], io.branch_rows(path)))
            outs.append(io.write_csv(
                pipe.out(f"profile_branch{j}_gamma1.csv"), "profile",
                io.SCHEMAS["profile"][2], io.profile_rows(state)))
            print(f"continue-gamma: branch {j} reached gamma=1 at "
                  f"E={state.E:.8f}, mass={state.mass:.8f}, "
                  f"{state.zero_crossings()} crossings")
    _manifest(pipe, "continue-gamma", outs, t0)
    return 0


def _full_curve(pipe: Pipeline, j: int) -> bstates.BranchCurve:
    cfg = pipe.cfg
    prob = pipe.problem(cfg.mesh_n, cfg.mesh_rmax)
    g1 = pipe.gamma_one(j, cfg.mesh_n, cfg.mesh_rmax)
    pairs = pipe.linear_pairs(cfg.mesh_n, cfg.mesh_rmax, j + 1)
    E_lin = pairs[j].E
    if cfg.E_values:
        vals = sorted(cfg.E_values)
        down = bstates.sweep_E(prob, g1,
                               [v for v in vals[::-1] if v < g1.E],
                               tol=cfg.bvp_tol)
        up = bstates.sweep_E(prob, g1, [v for v in vals if v >= g1.E],
                             tol=cfg.bvp_tol)
    else:
        gap_hi = g1.E - E_lin
        gaps = np.geomspace(gap_hi, cfg.E_down_gap * gap_hi,
                            int(np.ceil(cfg.E_per_decade
                                        * abs(np.log10(cfg.E_down_gap)))))
        down = bstates.sweep_E(prob, g1, E_lin + gaps, tol=cfg.bvp_tol)
        up = bstates.sweep_E(
            prob, g1,
            bstates.geometric_E_grid(g1.E, cfg.E_sweep_factor * g1.E,
                                     cfg.E_per_decade), tol=cfg.bvp_tol)
    return down.merged_with(up)


def cmd_sweep_E(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    branches = [args.branch] if args.branch is not None else list(cfg.branches)
    outs = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        for j, curve in zip(branches, ex.map(lambda j: _full_curve(pipe, j),
                                             branches)):
            rep = bstates.d_second_sign(curve,
                                        pipe.ops(cfg.mesh_n, cfg.mesh_rmax))
            outs.append(io.write_csv(
                pipe.out(f"branch_{j}.csv"), "branch",
                io.SCHEMAS["branch"][2], io.branch_rows(curve.states)))
            msg = curve.stop_reason or "grid exhausted"
            print(f"sweep-E: branch {j}: {len(curve.states)} states, "
                  f"E in [{curve.E.min():.6g}, {curve.E.max():.6g}], "
                  f"p(d'')={rep.p}, d'=M defect {rep.max_rel_err:.2e} "
                  f"(down-sweep stop: {msg})")
    _manifest(pipe, "sweep-E", outs, t0)
    return 0


def _local_p(pipe: Pipeline, j: int, E: float, n: int, r_max: float) -> int:
    """p(d'') from a short fixed-E sweep bracketing E."""
    prob = pipe.problem(n, r_max)
    st = pipe.state_at(j, E, n, r_max)
    grid = np.linspace(0.96 * E, 1.04 * E, 5)
    curve = bstates.sweep_E(prob, st, grid[grid <= E][::-1],
                            tol=pipe.cfg.bvp_tol).merged_with(
        bstates.sweep_E(prob, st, grid[grid >= E], tol=pipe.cfg.bvp_tol))
    return bstates.d_second_sign(curve, pipe.ops(n, r_max)).p


def cmd_spectrum(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    j = args.branch if args.branch is not None else 0
    E = args.E
    n, r_max = cfg.stability_n, cfg.stability_rmax
    ops = pipe.ops(n, r_max)
    st = pipe.state_at(j, E, n, r_max)

    em, ep, nm, npl = stability.spectra_Lpm(st, ops)
    rep = stability.spectrum_JL(st, ops)
    rep.eigs_minus, rep.eigs_plus, rep.n_minus, rep.n_plus = em, ep, nm, npl
    p = _local_p(pipe, j, E, n, r_max)
    stability.classify(rep, p, cfg.sigma_threshold_scale)
    norms = potential.potential_norms(pipe.V)
    bound = stability.unstable_bound(st, norms)

    rows = [("Lminus", float(x), 0.0) for x in em]
    rows += [("Lplus", float(x), 0.0) for x in ep]
    rows += [("JL", float(l.real), float(l.imag)) for l in rep.eigs_JL]
    tag = f"b{j}_E{E:g}".replace(".", "p")
    outs = [io.write_csv(pipe.out(f"spectrum_{tag}.csv"), "spectrum",
                         io.SCHEMAS["spectrum"][2], rows)]
    verdict = {
        "branch": j, "E": E, "mesh_n": n, "n_minus": nm, "n_plus": npl,
        "n_L": nm + npl, "p": p, "sigma_max": rep.sigma_max,
        "quartets": [[q.real, q.imag] for q in rep.quartets],
        "spurious_real_candidates": [abs(c) for c in rep.spurious_real],
        "symmetry_defect": rep.symmetry_defect,
        "verdict": rep.verdict, "detail": rep.verdict_detail,
        "unstable_bound": bound.bound, "bound_L3": bound.bound_L3,
        "bound_grad": bound.bound_grad,
        "C_HLS": bound.C_HLS, "C_GN": bound.C_GN,
    }
    vp = pipe.out(f"verdict_{tag}.json")
    import json
    vp.write_text(json.dumps(verdict, indent=2) + "\n")
    outs.append(vp)
    _manifest(pipe, "spectrum", outs, t0, verdict=verdict)
    print(f"spectrum: branch {j} E={E:g}: n(L-)={nm}, n(L+)={npl}, "
          f"sigma_max={rep.sigma_max:.3e}, verdict={rep.verdict}")
    return 0


def cmd_transition(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    j = args.branch if args.branch is not None else 1
    n, r_max = cfg.stability_n, cfg.stability_rmax
    ops = pipe.ops(n, r_max)
    prob = pipe.problem(n, r_max)
    norms = potential.potential_norms(pipe.V)

    g1 = pipe.gamma_one(j, n, r_max)
    E_lo = args.E_min if args.E_min else 1.25 * pipe.linear_pairs(
        n, r_max, j + 1)[j].E
    E_hi = args.E_max if args.E_max else 0.16
    scan = np.linspace(E_lo, E_hi, args.points)
    down = bstates.sweep_E(prob, g1, sorted([e for e in scan if e < g1.E],
                                            reverse=True), tol=cfg.bvp_tol)
    up = bstates.sweep_E(prob, g1, sorted([e for e in scan if e >= g1.E]),
                         tol=cfg.bvp_tol)
    states = {round(s.E, 12): s for s in down.states + up.states}

    rows = []
    crossing = None
    prev_stable_E = None
    for E in sorted(states):
        st = states[E]
        rep = stability.spectrum_JL(st, ops)
        b = stability.unstable_bound(st, norms)
        unstable = any(q.real > cfg.sigma_threshold_scale * (1 + E)
                       for q in rep.quartets)
        rows.append((j, E, st.mass, rep.sigma_max, len(rep.quartets),
                     b.bound))
        if unstable and crossing is None and prev_stable_E is not None:
            crossing = 0.5 * (prev_stable_E + E)
        if not unstable:
            prev_stable_E = E
        print(f"transition: E={E:.4f} mass={st.mass:.4f} "
              f"sigma_max={rep.sigma_max:.3e} quartets={len(rep.quartets)} "
              f"bound={b.bound:.3f}")
    outs = [io.write_csv(pipe.out(f"transition_branch{j}.csv"), "transition",
                         io.SCHEMAS["transition"][2], rows)]
    _manifest(pipe, "transition", outs, t0,
              crossing=crossing if crossing else "not-bracketed")
    if crossing:
        print(f"transition: instability onset bracketed near E={crossing:.4f}")
    return 0


def cmd_evolve(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    j = args.branch if args.branch is not None else 0
    E = args.E
    eps = cfg.eps if args.eps is None else args.eps
    prof = cfg.evolution_profile()

    st = pipe.state_at(j, E, cfg.state_n, cfg.state_rmax)
    ext = bstates.farfield_extend(st, prof["r_max"])
    emesh = fem.build_sinh_mesh(prof["n"], prof["r_max"])
    eops = fem.assemble(emesh, pipe.V)
    ev = evol.StrangEvolver(eops, prof["dt"], backend=cfg.stepper_backend)
    ic = evol.perturbed_ic(ext, emesh, eps=eps, dt=prof["dt"])
    res = evol.evolve(ev, ic, prof["t_final"],
                      snapshot_stride=cfg.snapshot_stride)

    tag = f"b{j}_E{E:g}_eps{eps:g}".replace(".", "p")
    tr = res.trace
    outs = [
        io.write_csv(pipe.out(f"trace_{tag}.csv"), "trace",
                     io.SCHEMAS["trace"][2],
                     zip(tr.t, tr.mass, tr.energy, tr.boundary_mag)),
        io.write_snapshots(pipe.out(f"snapshots_{tag}.csv"),
                           res.snapshots_t, res.snapshots_r,
                           res.snapshots_mag),
    ]
    dm, de = tr.drift()
    _manifest(pipe, "evolve", outs, t0,
              drift={"mass": dm, "energy": de},
              boundary_warning=res.boundary_warning,
              backend=ev.backend)
    print(f"evolve: branch {j} E={E:g} eps={eps:g} t={prof['t_final']:g} "
          f"({ev.backend}): drift mass={dm:.2e} energy={de:.2e} "
          f"boundary_warning={res.boundary_warning}")
    return 0


def cmd_rescale_check(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    j = args.branch if args.branch is not None else 0
    g1 = pipe.gamma_one(j, cfg.mesh_n, cfg.mesh_rmax)
    E_hi = args.E_max if args.E_max else 40.0
    curve = bstates.sweep_E(pipe.problem(cfg.mesh_n, cfg.mesh_rmax), g1,
                            bstates.geometric_E_grid(g1.E, E_hi,
                                                     cfg.E_per_decade),
                            tol=cfg.bvp_tol)
    rep = bstates.rescale_check(curve)
    rows = [(E, m, np.log(E), np.log(m))
            for E, m in zip(curve.E, curve.mass)]
    outs = [io.write_csv(pipe.out(f"rescale_branch{j}.csv"), "rescale",
                         io.SCHEMAS["rescale"][2], rows)]
    cauchy_drop = (rep.cauchy_sup[-1] < rep.cauchy_sup[0]
                   if len(rep.cauchy_sup) > 1 else True)
    _manifest(pipe, "rescale-check", outs, t0,
              slope=rep.slope, cauchy_decreasing=bool(cauchy_drop))
    print(f"rescale-check: branch {j} tail slope {rep.slope:.4f} "
          f"(limit 1/2), rescaled profiles Cauchy: {cauchy_drop}")
    return 0


def cmd_validate(pipe: Pipeline, args) -> int:
    t0 = time.time()
    cfg = pipe.cfg
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}" +
              (f"  ({detail})" if detail else ""))

    print("validate: oracle suite")
    # quadrature exactness
    mesh = fem.build_sinh_mesh(64, 10.0)
    opsq = fem.assemble(mesh, None)
    one = np.ones(mesh.n + 1)
    err = abs(one @ opsq.M_full.matvec(one) - 10.0 ** 3 / 3.0)
    check("quadrature: 1'M1 = r_max^3/3", err < 1e-10, f"err={err:.2e}")
    m2 = fem.RadialMesh(nodes=np.array([0.0, 1.0, 2.0]), n=2, r_max=2.0)
    err = abs(fem.stiffness_full(m2).d[1] - 8.0 / 3.0)
    check("quadrature: interior hat stiffness 8/3", err < 1e-14,
          f"err={err:.2e}")

    # hydrogen oracle on the tabulated point-Coulomb potential
    opsH = fem.assemble(fem.build_sinh_mesh(cfg.mesh_n, cfg.mesh_rmax),
                        potential.point_coulomb(1.0))
    ph = linear.solve_linear_states(opsH, 2)
    e0, e1 = ph[0].E, ph[1].E
    check("hydrogen: E_1 = 0.25", abs(e0 - 0.25) < TOLERANCES["hydrogen_abs"],
          f"E={e0:.8f}")
    check("hydrogen: E_2 = 0.0625",
          abs(e1 - 0.0625) < TOLERANCES["hydrogen_abs"], f"E={e1:.8f}")

    # linear spectrum vs the independent shooting oracle
    ops = pipe.ops(cfg.mesh_n, cfg.mesh_rmax)
    pairs = pipe.linear_pairs(cfg.mesh_n, cfg.mesh_rmax, 4)
    try:
        linear.sturm_check(pairs)
        check("sturm: node counts 0..3, simple eigenvalues", True,
              str([p.node_count for p in pairs]))
    except Exception as exc:
        check("sturm: node counts 0..3, simple eigenvalues", False, str(exc))
    es = shooting.shoot_spectrum_richardson(pipe.V, range(4), cfg.mesh_rmax)
    rel = np.abs(es - np.array([p.E for p in pairs])) / es
    check("linear spectrum matches shooting oracle to 1e-5",
          np.all(rel < TOLERANCES["oracle_rel"]),
          f"max rel {np.max(rel):.2e}")

    # virial identity on a quickly computed ground state
    nsm = min(cfg.mesh_n, 2000)
    small = pipe.problem(nsm, cfg.mesh_rmax)
    g1 = pipe.gamma_one(0, nsm, cfg.mesh_rmax)
    res = bstates.pohozaev_residual(g1, pipe.V)
    check("virial identity residual <= 1e-4",
          res <= TOLERANCES["pohozaev_pass"], f"res={res:.2e}")

    ok = all(c[1] for c in checks)
    _manifest(pipe, "validate", [], t0,
              checks=[{"name": n, "pass": p, "detail": d}
                      for n, p, d in checks])
    print(f"validate: {'all checks passed' if ok else 'FAILURES present'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="radialsp",
        description="Radial Schrodinger-Poisson bound-state laboratory")
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="K=V",
                    help="override one configuration key (flag wins)")
    ap.add_argument("--out", help="output directory override")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("linear", help="linear bound states + oracle table")
    p.add_argument("--k", type=int, default=4)

    p = sub.add_parser("continue-gamma", help="homotopy to the nonlinear "
                                              "states at fixed mass")
    p.add_argument("--branch", type=int)

    p = sub.add_parser("sweep-E", help="trace branch curves in E")
    p.add_argument("--branch", type=int)

    p = sub.add_parser("spectrum", help="L+- and JL spectra at one (j, E)")
    p.add_argument("--branch", type=int)
    p.add_argument("--E", type=float, default=1.0)

    p = sub.add_parser("transition", help="sigma_max(E) scan on one branch")
    p.add_argument("--branch", type=int)
    p.add_argument("--E-min", dest="E_min", type=float)
    p.add_argument("--E-max", dest="E_max", type=float)
    p.add_argument("--points", type=int, default=9)

    p = sub.add_parser("evolve", help="split-step time evolution")
    p.add_argument("--branch", type=int)
    p.add_argument("--E", type=float, default=1.0)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("rescale-check", help="large-E scaling diagnostics")
    p.add_argument("--branch", type=int)
    p.add_argument("--E-max", dest="E_max", type=float)

    sub.add_parser("validate", help="run the oracle suite")
    return ap


_DISPATCH = {
    "linear": cmd_linear,
    "continue-gamma": cmd_continue_gamma,
    "sweep-E": cmd_sweep_E,
    "spectrum": cmd_spectrum,
    "transition": cmd_transition,
    "evolve": cmd_evolve,
    "rescale-check": cmd_rescale_check,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for kv in args.set:
        if "=" not in kv:
            print(f"error: --set expects key=value, got {kv!r}",
                  file=sys.stderr)
            return 2
        k, v = kv.split("=", 1)
        overrides[k.strip()] = v.strip()
    out_env = os.environ.get("RADIALSP_OUT")
    if args.out:
        overrides["out_dir"] = args.out
    elif out_env and "out_dir" not in overrides:
        overrides["out_dir"] = out_env
    try:
        cfg = load_config(args.config, overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[args.subcommand](Pipeline(cfg), args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
