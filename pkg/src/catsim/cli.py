"""Experiment runner: one subcommand per study, CSV + manifest outputs.

Every command is deterministic for a given config (no randomness anywhere in
the pipeline); re-running a preset reproduces byte-identical CSV content.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analytics as an
from . import gates as gt
from . import reduction as rd
from . import wigner as wg
from .config import ExperimentConfig, RunWriter, load_config, preset_path
from .errors import CatsimError, ConfigError
from .hilbert import CatSpec, FockDim, cat, coherent, default_n_max, fock, parity
from .lindblad import (
    DensityMatrix,
    four_photon_model,
    integrate,
    purity,
    rhs,
    steady_state,
    two_photon_model,
)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _initial_state(spec: str, dim: FockDim):
    kind, _, arg = spec.partition(":")
    if kind == "vacuum":
        return DensityMatrix.from_ket(fock(0, dim))
    if kind == "fock":
        return DensityMatrix.from_ket(fock(int(arg), dim))
    if kind == "coherent":
        re, _, im = arg.partition(",")
        return DensityMatrix.from_ket(coherent(float(re) + 1j * float(im or 0.0), dim))
    raise ConfigError(f"unknown initial state spec {spec!r}")


def _alpha_grid(spec) -> list[float]:
    if isinstance(spec, str):
        start, stop, step = (float(x) for x in spec.split(":"))
        return list(np.round(np.arange(start, stop + step / 2, step), 12))
    if isinstance(spec, list) and len(spec) == 3 and all(
        isinstance(x, (int, float)) for x in spec
    ):
        start, stop, step = spec
        return list(np.round(np.arange(start, stop + step / 2, step), 12))
    return [float(x) for x in spec]


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def run_steady(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    process = ph.get("process", "two-photon")
    n_bar = float(ph.get("n_bar", 4.0))
    kappa = float(ph.get("kappa", 1.0))
    alpha = math.sqrt(n_bar)
    dim = FockDim(int(nm.get("n_max", default_n_max(max(alpha, 1.0)))))
    if process == "two-photon":
        eps = n_bar * kappa / 2.0
        model = two_photon_model(eps, kappa, dim,
                                 kappa_phi=float(ph.get("kappa_phi", 0.0)),
                                 kappa_1ph=float(ph.get("kappa_1ph", 0.0)))
        if n_bar == 0.0:
            # pure two-photon decay: tracks convergence to the vacuum sector
            target = fock(0, dim)
        else:
            idx = ph.get("target_index", "+")
            target = cat(CatSpec(alpha, 2, +1 if idx == "+" else -1), dim)
        t_final = float(nm.get("t_final", 20.0 / kappa))
    elif process == "four-photon":
        eps = n_bar**2 * kappa / 2.0
        model = four_photon_model(eps, kappa, dim,
                                  kappa_phi=float(ph.get("kappa_phi", 0.0)),
                                  kappa_1ph=float(ph.get("kappa_1ph", 0.0)))
        target = cat(CatSpec(alpha, 4, int(ph.get("target_index", 0))), dim)
        t_final = float(nm.get("t_final", 2.0 / kappa))
    else:
        raise ConfigError(f"unknown process {process!r}")

    rho0 = _initial_state(ph.get("initial", "vacuum"), dim)
    pi_op = parity(dim)
    traj = integrate(
        model, rho0, t_final,
        {"fidelity": lambda m: np.real(np.vdot(target.amplitudes, m @ target.amplitudes)),
         "purity": lambda m: np.real(np.einsum("ij,ji->", m, m)),
         "parity": lambda m: np.real(np.einsum("ij,ji->", pi_op.matrix, m))},
        n_out=int(nm.get("n_out", 400)),
        rtol=float(nm.get("rtol", 1e-8)),
        method=nm.get("method", "auto"),
        snapshot_times=[t_final],
    )
    final_rho = traj.snapshots[-1][1]
    resid = float(np.max(np.abs(rhs(model, final_rho))))
    writer.note(final_rhs_max=resid,
                final_fidelity=float(traj.observables["fidelity"][-1].real))
    steady_tol = float(nm.get("tol", 1e-4))
    if resid > steady_tol:
        from .errors import NoConvergence

        raise NoConvergence(
            f"generator residual {resid:.3e} above {steady_tol:.0e} at t={t_final:g}"
        )
    writer.emit(
        ["t", "fidelity", "purity", "parity"],
        ((t, traj.observables["fidelity"][i].real, traj.observables["purity"][i].real,
          traj.observables["parity"][i].real) for i, t in enumerate(traj.times)),
    )


def _sweep_point(args):
    alpha, beta_re, beta_im = args
    state = an.asymptotic_from_coherent(alpha, beta_re + 1j * beta_im)
    x = 2.0 * state.c_pm.real * math.sqrt(1.0 - math.exp(-4.0 * alpha**2))
    pur = state.c_pp**2 + state.c_mm**2 + 2.0 * abs(state.c_pm) ** 2
    return x, pur


def run_sweep(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    n_bars = ph.get("n_bar_values", [4.0])
    gre = ph.get("grid_re", [-3.0, 3.0, 41])
    gim = ph.get("grid_im", [-3.0, 3.0, 41])
    res = np.linspace(float(gre[0]), float(gre[1]), int(gre[2]))
    ims = np.linspace(float(gim[0]), float(gim[1]), int(gim[2]))
    verify_frac = min(cfg.verify_numeric, 0.05)

    for n_bar in n_bars:
        alpha = math.sqrt(float(n_bar))
        points = [(alpha, br, bi) for br in res for bi in ims]
        if cfg.effective_jobs > 1 and len(points) > 64:
            with ProcessPoolExecutor(max_workers=cfg.effective_jobs) as pool:
                values = list(pool.map(_sweep_point, points, chunksize=64))
        else:
            values = [_sweep_point(p) for p in points]
        writer.emit(
            ["beta_re", "beta_im", "x_coord", "purity"],
            ((p[1], p[2], v[0], v[1]) for p, v in zip(points, values)),
            suffix=f"nbar{n_bar:g}",
        )

        if verify_frac > 0.0:
            stride = max(1, round(1.0 / verify_frac))
            picked = points[::stride]
            dim = FockDim(int(nm.get("n_max", default_n_max(alpha * 1.3))))
            kappa = float(ph.get("kappa", 1.0))
            model = two_photon_model(alpha**2 * kappa / 2.0, kappa, dim)
            rows = []
            for _, br, bi in picked:
                rho0 = DensityMatrix.from_ket(coherent(br + 1j * bi, dim))
                rho_inf, _ = steady_state(model, rho0, tol=float(nm.get("tol", 1e-7)),
                                          max_time=2000.0 / kappa)
                plus = cat(CatSpec(alpha, 2, +1), dim)
                minus = cat(CatSpec(alpha, 2, -1), dim)
                x_num = 2.0 * np.real(
                    np.vdot(plus.amplitudes, rho_inf.matrix @ minus.amplitudes)
                ) * math.sqrt(1.0 - math.exp(-4.0 * alpha**2))
                x_ana, pur_ana = _sweep_point((alpha, br, bi))
                rows.append((br, bi, x_ana, x_num, pur_ana, purity(rho_inf)))
            writer.emit(
                ["beta_re", "beta_im", "x_analytic", "x_numeric", "purity_analytic",
                 "purity_numeric"],
                rows, suffix=f"nbar{n_bar:g}-verify",
            )
    writer.note(points_per_panel=len(res) * len(ims), panels=len(n_bars))


def run_rabi(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    kind = gt.X_ROTATION_2CAT if ph.get("kind", "2cat") == "2cat" else gt.X_ROTATION_4CAT
    n_bar = float(ph.get("n_bar", 4.0))
    kappa = float(ph.get("kappa", 1.0))
    eps_x = float(ph.get("eps_x_over_kappa", 0.05)) * kappa
    eps_pump = (n_bar if kind == gt.X_ROTATION_2CAT else n_bar**2) * kappa / 2.0
    proto = gt.GateProtocol(kind, eps_drive=eps_x, eps_pump=eps_pump, kappa_pump=kappa)
    period = gt.bloch_period(kind, eps_x, n_bar)
    t_final = float(ph.get("periods", 1.0)) * period
    dim = FockDim(int(nm["n_max"])) if "n_max" in nm else None
    traj, tomo = gt.run_x_rotation(
        proto, t_final=t_final, dim=dim,
        n_out=int(nm.get("n_out", 400)), rtol=float(nm.get("rtol", 1e-8)),
        method=nm.get("method", "auto"),
    )
    pz = traj.observables["pop_zero"].real
    i_flip = int(np.argmin(pz))
    writer.note(
        rabi_frequency=gt.effective_rabi(kind, eps_x, n_bar),
        population_period=period,
        measured_flip_time=float(traj.times[i_flip]),
        flip_fidelity=float(traj.observables["pop_one"].real[i_flip]),
    )
    writer.emit(
        ["t", "pop_zero", "pop_one", "coh_re", "coh_im", "bloch_x", "bloch_y",
         "bloch_z", "parity", "manifold_weight"],
        ((traj.times[i], tm.pop_zero, tm.pop_one, tm.coherence.real, tm.coherence.imag,
          *tm.bloch, traj.observables["parity"][i].real,
          traj.observables["manifold_weight"][i].real)
         for i, tm in enumerate(tomo)),
    )


def run_entangle(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    kind = gt.ENTANGLE_2CAT if ph.get("kind", "2cat") == "2cat" else gt.ENTANGLE_4CAT
    n_bar = float(ph.get("n_bar", 4.0))
    kappa = float(ph.get("kappa", 1.0))
    eps_xx = float(ph.get("eps_xx_over_kappa", 0.05)) * kappa
    eps_pump = (n_bar if kind == gt.ENTANGLE_2CAT else n_bar**2) * kappa / 2.0
    proto = gt.GateProtocol(kind, eps_drive=eps_xx, eps_pump=eps_pump, kappa_pump=kappa)
    omega = gt.effective_rabi(kind, eps_xx, n_bar)
    t_peak = math.pi / (4.0 * omega)
    t_final = float(ph.get("horizon_factor", 1.3)) * t_peak
    dims = None
    if "n_max" in nm:
        dims = (FockDim(int(nm["n_max"])), FockDim(int(nm["n_max"])))
    traj = gt.run_entangling(proto, t_final=t_final, dims=dims,
                             n_out=int(nm.get("n_out", 200)),
                             rtol=float(nm.get("rtol", 1e-8)))
    fm = traj.observables["fid_bell_minus"].real
    writer.note(predicted_peak_time=t_peak, peak_fidelity=float(fm.max()),
                peak_time=float(traj.times[int(np.argmax(fm))]))
    writer.emit(
        ["t", "fid_bell_plus", "fid_bell_minus"],
        ((t, traj.observables["fid_bell_plus"][i].real, fm[i])
         for i, t in enumerate(traj.times)),
    )


def run_kerr(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    beta = float(ph.get("beta_re", 2.0)) + 1j * float(ph.get("beta_im", 0.0))
    chi = float(ph.get("chi", 1.0))
    dim = FockDim(int(nm.get("n_max", default_n_max(beta))))
    rows = []
    worst = 0.0
    for q in ph.get("q_values", [1, 2, 3]):
        q = int(q)
        formula = gt.kerr_superposition_amplitudes(q, beta, dim)
        unitary = gt.kerr_evolve(chi, math.pi / (q * chi), coherent(beta, dim))
        resid = float(np.linalg.norm(formula - unitary.amplitudes))
        norm_dev = abs(float(np.linalg.norm(formula)) - 1.0)
        jump = gt.kerr_jump_commutation_residual(
            chi, math.pi / (8.0 * chi), cat(CatSpec(abs(beta), 4, 0), dim)
        )
        rows.append((q, resid, norm_dev, jump))
        worst = max(worst, resid)
    writer.note(worst_formula_residual=worst)
    writer.emit(["q", "formula_vs_unitary", "norm_deviation", "jump_residual"], rows)


def run_loss(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    n_bar = float(ph.get("n_bar", 4.0))
    kappa = float(ph.get("kappa", 1.0))
    eps_x = float(ph.get("eps_x_over_kappa", 0.05)) * kappa
    kappa_1 = float(ph.get("kappa_1ph_over_kappa", 0.005)) * kappa
    proto = gt.GateProtocol(gt.X_ROTATION_4CAT, eps_drive=eps_x,
                            eps_pump=n_bar**2 * kappa / 2.0, kappa_pump=kappa)
    t_final = float(nm.get("t_final", 10.0 / kappa))
    dim = FockDim(int(nm["n_max"])) if "n_max" in nm else None
    traj = gt.run_loss_during_gate(proto, kappa_1, t_final, dim=dim,
                                   n_out=int(nm.get("n_out", 200)),
                                   method=nm.get("method", "auto"))
    fit = an.fit_decay_rate(traj, "pop_sector_0", window=(0.0, t_final),
                            residual_threshold=5e-2)
    writer.note(sector0_decay_rate=fit.rate, fit_residual=fit.residual,
                bit_flip_scale=n_bar * kappa_1)
    writer.emit(
        ["t"] + [f"pop_sector_{k}" for k in range(4)],
        ((t, *(traj.observables[f"pop_sector_{k}"][i].real for k in range(4)))
         for i, t in enumerate(traj.times)),
        suffix="idle" if eps_x == 0.0 else "driven",
    )


def _phase_flip_point(args):
    kind, alpha, ratio, fit_window = args
    n_max = max(default_n_max(alpha), 14)
    dim = FockDim(n_max)
    if kind == "2cat":
        model = two_photon_model(alpha**2 / 2.0, 1.0, dim, kappa_phi=ratio)
        j_op = an.build_j_plus_minus(alpha, dim).op
        rho0 = DensityMatrix.from_ket(coherent(alpha, dim))
        rows = an.mod_sector_indices(n_max, 0, 2)
        cols = an.mod_sector_indices(n_max, 1, 2)
        reference = an.phase_flip_rate(alpha, ratio)
    else:
        model = four_photon_model(alpha**4 / 2.0, 1.0, dim, kappa_phi=ratio)
        c0 = cat(CatSpec(alpha, 4, 0), dim)
        c2 = cat(CatSpec(alpha, 4, 2), dim)
        from .hilbert import Operator

        j_op = Operator((dim,), np.outer(c0.amplitudes, c2.amplitudes.conj()))
        rho0 = DensityMatrix.from_ket(cat(CatSpec(alpha, 2, +1), dim))
        rows = an.mod_sector_indices(n_max, 0, 4)
        cols = an.mod_sector_indices(n_max, 2, 4)
        reference = 2.0 * ratio
    t0, t1 = fit_window
    traj = an.coherence_block_trajectory(model, rho0, rows, cols, j_op, t1,
                                         n_out=240, name="s")
    fit = an.fit_decay_rate(traj, "s", window=(t0, t1), residual_threshold=1e-2)
    return alpha, fit.rate, reference, fit.residual


def run_phase_flip_rate(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    kind = ph.get("kind", "2cat")
    ratio = float(ph.get("ratio", 0.01))
    alphas = _alpha_grid(ph.get("alphas", [1.0, 2.5, 0.25]))
    window = nm.get("fit_window", [30.0, 230.0] if kind == "2cat" else [100.0, 2000.0])
    tasks = [(kind, a, ratio, tuple(window)) for a in alphas]
    if cfg.effective_jobs > 1 and len(tasks) > 2:
        with ProcessPoolExecutor(max_workers=cfg.effective_jobs) as pool:
            results = list(pool.map(_phase_flip_point, tasks))
    else:
        results = [_phase_flip_point(t) for t in tasks]
    if kind == "2cat":
        header = ["alpha", "rate_fitted", "rate_analytic", "fit_residual"]
        rows = [(a, r, ref, res) for a, r, ref, res in results]
    else:
        header = ["alpha", "rate_fitted", "rate_scaled", "fit_residual"]
        rows = [(a, r, r / ref, res) for a, r, ref, res in results]
    writer.note(dephasing_ratio=ratio, kind=kind)
    writer.emit(header, rows, suffix=kind)


def run_adiabatic_compare(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    base = rd.CircuitParams(
        g_2ph=float(ph.get("g_2ph", 0.05)),
        eps_b=float(ph.get("eps_b", 0.2)),
        kappa_b=float(ph.get("kappa_b", 1.0)),
        chi_aa=float(ph.get("chi_aa", 0.0)),
        chi_bb=float(ph.get("chi_bb", 0.0)),
        chi_ab=float(ph.get("chi_ab", 0.0)),
    )
    factor = float(ph.get("scale_factor", 1.0))
    if factor != 1.0 or ph.get("zero_kerr", False):
        base = rd.scaled_down_variant(base, factor=factor,
                                      zero_kerr=bool(ph.get("zero_kerr", False)))
    dims = None
    if "n_max" in nm:
        dims = (FockDim(int(nm["n_max"])), FockDim(int(nm.get("n_max_b", 12))))
    t_final = nm.get("t_final")
    res = rd.compare_full_vs_reduced(
        base, float(t_final) if t_final else None, dims=dims,
        n_out=int(nm.get("n_out", 200)), rtol=float(nm.get("rtol", 1e-7)),
    )
    writer.note(terminal_gap=res.terminal_gap,
                terminal_fidelity_full=res.terminal_fidelities[0],
                terminal_fidelity_reduced=res.terminal_fidelities[1],
                max_buffer_occupation=float(res.buffer_occupation.max()))
    writer.emit(
        ["t", "fid_full", "fid_reduced", "n_buffer"],
        ((res.times[i], res.fidelity_full[i], res.fidelity_reduced[i],
          res.buffer_occupation[i]) for i in range(len(res.times))),
    )


def run_wigner(cfg: ExperimentConfig, writer: RunWriter) -> None:
    ph, nm = cfg.physics, cfg.numerics
    alpha = float(ph.get("alpha", 2.0))
    state = ph.get("state", "cat2+")
    dim = FockDim(int(nm.get("n_max", default_n_max(alpha))))
    if state == "vacuum":
        ket = fock(0, dim)
    elif state == "coherent":
        ket = coherent(alpha, dim)
    elif state.startswith("cat2"):
        ket = cat(CatSpec(alpha, 2, +1 if state.endswith("+") else -1), dim)
    elif state.startswith("cat4:"):
        ket = cat(CatSpec(alpha, 4, int(state.split(":")[1])), dim)
    else:
        raise ConfigError(f"unknown wigner state {state!r}")
    extent = float(ph.get("extent", 4.0))
    grid = wg.wigner(DensityMatrix.from_ket(ket), (-extent, extent), (-extent, extent),
                     int(ph.get("resolution", 121)))
    writer.note(normalization=grid.integral(),
                origin_value=float(wg.wigner_at(DensityMatrix.from_ket(ket),
                                                np.array([0.0 + 0.0j]))[0]))
    writer.emit(
        ["x", "p", "w"],
        ((x, p, grid.values[i, j]) for i, x in enumerate(grid.x)
         for j, p in enumerate(grid.p)),
    )


_RUNNERS = {
    "steady": run_steady,
    "sweep": run_sweep,
    "rabi": run_rabi,
    "entangle": run_entangle,
    "kerr": run_kerr,
    "loss": run_loss,
    "phase-flip-rate": run_phase_flip_rate,
    "adiabatic-compare": run_adiabatic_compare,
    "wigner": run_wigner,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catsim",
        description="cat-qubit process simulations: CSV artifacts per experiment",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--preset", help="named preset from the presets/ directory")
        p.add_argument("--config", help="path to a TOML config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=0,
                       help="worker processes (0 = all cores)")
        p.add_argument("--verify-numeric", type=float, default=None,
                       help="fraction of sweep points to verify by integration")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override a physics/numerics value")
        if name == "phase-flip-rate":
            p.add_argument("--alphas", help="alpha grid start:stop:step")
            p.add_argument("--ratio", type=float, help="kappa_phi / kappa_pump")
        if name == "kerr":
            p.add_argument("--q", type=int, help="single superposition order to check")
            p.add_argument("--beta", type=float, help="real coherent amplitude")
    return parser


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _config_from_args(args) -> ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset:
        cfg = load_config(preset_path(args.preset))
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig(experiment=args.command)
    if cfg.experiment != args.command:
        raise ConfigError(
            f"config is for experiment {cfg.experiment!r}, not {args.command!r}"
        )
    physics = dict(cfg.physics)
    numerics = dict(cfg.numerics)
    for item in args.set:
        key, _, value = item.partition("=")
        section, _, name = key.partition(".")
        if not value or section not in ("physics", "numerics") or not name:
            raise ConfigError(f"bad --set {item!r}; expected physics.key=value")
        (physics if section == "physics" else numerics)[name] = _parse_value(value)
    if getattr(args, "alphas", None):
        physics["alphas"] = args.alphas
    if getattr(args, "ratio", None) is not None:
        physics["ratio"] = args.ratio
    if getattr(args, "q", None) is not None:
        physics["q_values"] = [args.q]
    if getattr(args, "beta", None) is not None:
        physics["beta_re"] = args.beta
    return ExperimentConfig(
        experiment=cfg.experiment,
        physics=physics,
        numerics=numerics,
        out_dir=args.out,
        jobs=args.jobs,
        verify_numeric=(
            args.verify_numeric if args.verify_numeric is not None
            else cfg.verify_numeric
        ),
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    writer = RunWriter(cfg)
    try:
        _RUNNERS[cfg.experiment](cfg, writer)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CatsimError as exc:
        record = {"error": type(exc).__name__, "detail": str(exc)}
        print(f"numerical failure: {record}", file=sys.stderr)
        return 3
    manifest = writer.finalize()
    for out in writer.outputs:
        print(f"wrote {writer.out_dir / out['path']} ({out['rows']} rows)")
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
