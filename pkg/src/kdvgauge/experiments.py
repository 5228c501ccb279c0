"""Scripted studies that confront the transformation theory with the solver.

Six experiment kinds:

* transform_consistency -- solve the original form, transport through the
  gauge, and compare with the constant-dispersion solve of the transported
  datum (two independent discretizations of one solution).
* bona_smith -- convergence rate of solutions from frequency-truncated data
  against a fine-cutoff reference.
* wavepacket -- amplitude gain of packets crossing a compact anti-diffusion
  region, against the frequency-independent heuristic exp(2 R beta / alpha).
* continuity -- stability of the flow map under initial perturbations of
  shrinking size.
* commutator_survey -- empirical constants for the dyadic commutator
  bounds, the quadratic commutator identity, and the cubic resonance
  factorization.
* soliton_benchmark -- travelling-wave accuracy, conservation, and temporal
  order of the schemes.

Every report is reproducible bit-for-bit from (spec, seed).  Fitted slopes
report an RMS residual in log space; rate-claim verdicts (bona_smith,
commutator scaling, temporal order) fail when that residual exceeds 0.1,
while spectral-accuracy fits (transform consistency) only gate on sign and
monotonicity since they are not power laws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .coefficients import CoefficientSet
from .dyadic import (
    RESONANCE_SIGN_NOTE,
    ProjectorBank,
    commutator,
    comcom_residual,
    double_commutator,
    project,
    resonance_omega3,
)
from .gauge import GaugeSystem, TransformedCoefficients, forward_transform
from .solver import (
    SolverConfig,
    SpaceTimeBump,
    auto_dt,
    energy_monitor,
    solve,
    weak_residual,
)
from .spectral import (
    SpectralState,
    derivative as spectral_derivative,
    l2_norm,
    make_grid,
    mass,
    sobolev_norm,
)

__all__ = [
    "ExperimentSpec",
    "ExperimentReport",
    "Verdict",
    "run_experiment",
    "run_transform_consistency",
    "run_bona_smith",
    "run_wavepacket",
    "run_continuity",
    "run_commutator_survey",
    "run_soliton_benchmark",
    "fit_loglog",
    "gaussian_state",
    "soliton_state",
    "exact_soliton_values",
    "packet_state",
    "spectrum_state",
    "random_smooth_field",
    "envelope_peak",
    "write_report",
    "EXPERIMENT_KINDS",
]

EXPERIMENT_KINDS = (
    "transform_consistency",
    "bona_smith",
    "wavepacket",
    "continuity",
    "commutator_survey",
    "soliton_benchmark",
)


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    threshold: str  # human-readable statement of the gate


@dataclass
class ExperimentSpec:
    kind: str
    cset: CoefficientSet
    half_width: float = 8.0 * np.pi
    num_points: int = 512
    s: float = 1.0
    t_final: float = 0.5
    dt: float | str = "auto"
    dealias: bool = True
    blowup_threshold: float | str = "auto"
    monitor_stride: int = 10
    seed: int = 0
    hypothesis_violating: bool = False
    # transform consistency
    refine_sweep: tuple = (256, 512, 1024)
    gaussian_width: float = 2.0
    gaussian_amplitude: float = 1.0
    # bona-smith
    n_sweep: tuple = (8, 16, 32, 64, 128)
    reference_n: int = 512
    spectrum_decay_offset: float = 0.6
    # wavepacket
    xi0_sweep: tuple = (10.0, 15.0, 20.0)
    region_half_width: float = 2.0
    region_beta0: float = 0.225
    region_smoothing: float = 0.3
    packet_width: float = 1.5
    packet_launch: float = 8.0
    # continuity
    perturbation_sizes: tuple = (1e-2, 1e-3, 1e-4)
    # commutator survey
    band_sweep: tuple = (4, 8, 16, 32, 64, 128, 256)
    draws: int = 50
    identity_draws: int = 100
    resonance_draws: int = 1000
    # soliton
    kappa: float = 1.0
    order_kappa: float = 2.0
    dt_sweep: tuple = tuple(4e-4 * 10 ** (-j / 4) for j in range(5))
    order_t_final: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(
                f"unknown experiment kind {self.kind!r}; choose from {EXPERIMENT_KINDS}"
            )


@dataclass
class ExperimentReport:
    kind: str
    tables: dict = dc_field(default_factory=dict)  # name -> (header, rows)
    slopes: dict = dc_field(default_factory=dict)  # name -> dict(slope, residual)
    verdicts: list = dc_field(default_factory=list)
    notes: list = dc_field(default_factory=list)
    watermark: bool = False

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add_table(self, name: str, header: list, rows: list) -> None:
        self.tables[name] = (list(header), [list(r) for r in rows])

    def verdict(self, name: str, passed: bool, value: float, threshold: str) -> None:
        self.verdicts.append(Verdict(name, bool(passed), float(value), threshold))


def fit_loglog(xs, ys) -> tuple[float, float, float]:
    """Least-squares slope of log10 y against log10 x.

    Returns (slope, intercept, rms residual in log10 units).  Needs at
    least two points.
    """
    lx = np.log10(np.asarray(xs, dtype=float))
    ly = np.log10(np.clip(np.asarray(ys, dtype=float), 1e-300, None))
    if lx.size < 2:
        raise ValueError("slope fit needs at least two points")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), float(intercept), resid


# -- initial data ---------------------------------------------------------


def gaussian_state(grid, amplitude=1.0, width=1.0, center=0.0) -> SpectralState:
    vals = amplitude * np.exp(-((grid.x - center) ** 2) / (2.0 * width**2))
    return SpectralState.from_physical(grid, vals)


def exact_soliton_values(x, t, kappa=1.0, e=-6.0, center=0.0) -> np.ndarray:
    """Travelling wave of u_t + u_xxx = e u u_x: amplitude -12 kappa^2 / e,
    speed 4 kappa^2."""
    arg = kappa * (np.asarray(x) - center - 4.0 * kappa**2 * t)
    return (-12.0 * kappa**2 / e) / np.cosh(arg) ** 2


def soliton_state(grid, kappa=1.0, e=-6.0, center=0.0) -> SpectralState:
    return SpectralState.from_physical(
        grid, exact_soliton_values(grid.x, 0.0, kappa, e, center)
    )


def packet_state(grid, xi0, width=1.5, center=0.0, amplitude=1.0) -> SpectralState:
    env = np.exp(-((grid.x - center) ** 2) / (2.0 * width**2))
    return SpectralState.from_physical(
        grid, amplitude * env * np.cos(xi0 * (grid.x - center))
    )


def spectrum_state(grid, s, decay_offset, rng, target_hs=1.0) -> SpectralState:
    """Real field with |c(k)| ~ (1+|k|)^(-s-decay_offset), random phases."""
    n = grid.num_points
    k = grid.wavenumbers
    c = np.zeros(n, dtype=complex)
    pos = np.where(k > 0)[0]
    phases = rng.uniform(0.0, 2.0 * np.pi, size=pos.size)
    c[pos] = (1.0 + np.abs(k[pos])) ** (-(s + decay_offset)) * np.exp(1j * phases)
    neg = (n - pos) % n
    c[neg] = np.conj(c[pos])
    state = SpectralState(grid, c, True)
    norm = sobolev_norm(state, s)
    return SpectralState(grid, c * (target_hs / norm), True)


def random_smooth_field(grid, rng, decay=1.0, amplitude=1.0) -> SpectralState:
    return spectrum_state(grid, 0.0, decay, rng, target_hs=amplitude)


def envelope_peak(state: SpectralState) -> float:
    """Peak of the analytic-signal magnitude (carrier-free amplitude)."""
    k = state.grid.wavenumbers
    c = state.coefficients
    z = np.where(k > 0, 2.0 * c, 0.0)
    z[0] = c[0]
    analytic = np.fft.ifft(z * state.grid.num_points)
    return float(np.abs(analytic).max())


def _require_constant_benchmark(spec: ExperimentSpec, grid) -> TransformedCoefficients:
    """Constant-dispersion fast path: alpha == 1, beta = gamma = delta = 0."""
    cset = spec.cset
    if cset.is_time_dependent:
        raise ValueError(f"{spec.kind} needs time-independent coefficients")
    x = grid.x
    if np.abs(np.asarray(cset.alpha.eval(0.0, x)) - 1.0).max() > 1e-12:
        raise ValueError(f"{spec.kind} needs alpha identically 1")
    for name in ("beta", "gamma", "delta"):
        if np.abs(np.asarray(getattr(cset, name).eval(0.0, x))).max() > 1e-12:
            raise ValueError(f"{spec.kind} needs {name} identically 0")
    tc = TransformedCoefficients.constant_kdv(grid, epsilon=0.0)
    tc.e = np.asarray(cset.epsilon.eval(0.0, x), dtype=float) * np.ones(grid.num_points)
    return tc


# -- experiments ----------------------------------------------------------


def run_transform_consistency(spec: ExperimentSpec) -> ExperimentReport:
    """Mutual-oracle comparison of the two solution paths."""
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    T = spec.t_final
    # dense monitors: the weak-residual time quadrature needs to resolve the
    # test bump's transition
    monitor = np.linspace(0.0, T, 81)[1:]
    rows = []
    for n in spec.refine_sweep:
        grid = make_grid(spec.half_width, n)
        u0 = gaussian_state(grid, spec.gaussian_amplitude, spec.gaussian_width)
        system = GaugeSystem(spec.cset, grid, times=np.linspace(0.0, T, 3))
        cfg_o = SolverConfig("original", t_final=T, dt=spec.dt, s=spec.s,
                             dealias=spec.dealias,
                             blowup_threshold=spec.blowup_threshold)
        traj_o = solve(u0, cfg_o, spec.cset, monitor_times=monitor)
        gmap0 = system.map_at(0.0)
        v0 = forward_transform(u0, gmap0)
        cfg_t = SolverConfig("transformed", t_final=T, dt=spec.dt, s=spec.s,
                             dealias=spec.dealias,
                             blowup_threshold=spec.blowup_threshold)
        traj_t = solve(v0, cfg_t, system, monitor_times=monitor)
        disc = 0.0
        for i, t in enumerate(traj_o.times):
            vm = forward_transform(traj_o.states[i], system.map_at(float(t)))
            disc = max(disc, l2_norm(vm - traj_t.states[i]))
        bump_o = SpaceTimeBump(x0=0.0, x_width=0.2 * grid.half_width, t_width=0.4 * T)
        res_o = weak_residual(traj_o, bump_o, spec.cset, "original")
        bump_t = SpaceTimeBump(
            x0=0.0, x_width=0.2 * system.image_grid.half_width, t_width=0.4 * T
        )
        res_t = weak_residual(traj_t, bump_t, system, "transformed")
        rows.append([n, disc, res_o, res_t])
    report.add_table(
        "discrepancy", ["n", "sup_t_l2_discrepancy", "weak_residual_original",
                        "weak_residual_transformed"], rows
    )
    ns = [r[0] for r in rows]
    ds = [r[1] for r in rows]
    final_disc = ds[-1]
    report.verdict(
        "discrepancy_at_finest", final_disc < 1e-4, final_disc,
        "sup_t L2 discrepancy < 1e-4 at the finest grid",
    )
    if len(ns) >= 2:
        slope, _, resid = fit_loglog(ns, ds)
        order = -slope
        report.slopes["refinement_order"] = {"slope": slope, "residual": resid}
        monotone = all(ds[i + 1] < ds[i] for i in range(len(ds) - 1))
        report.verdict(
            "refinement_order_positive", order > 0.0 and monotone, order,
            "discrepancy decreases under refinement with positive fitted order",
        )
        report.notes.append(
            "refinement fit residual reported but not gated: spectral accuracy "
            "is not a power law"
        )
    else:
        report.notes.append("single-level sweep: no refinement fit")
    return report


def run_bona_smith(spec: ExperimentSpec) -> ExperimentReport:
    """Rate of convergence from frequency-truncated data."""
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    grid = make_grid(spec.half_width, spec.num_points)
    tc = _require_constant_benchmark(spec, grid)
    rng = np.random.default_rng(spec.seed)
    u0 = spectrum_state(grid, spec.s, spec.spectrum_decay_offset, rng, target_hs=1.0)
    bank = ProjectorBank(grid)
    T = spec.t_final
    monitor = np.linspace(0.0, T, 9)[1:]
    cfg = SolverConfig("transformed", t_final=T, dt=spec.dt, s=spec.s,
                       dealias=spec.dealias,
                       blowup_threshold=spec.blowup_threshold,
                       warn_domain_edge=False)  # datum fills the torus

    u0_ref = project(u0, bank.p_leq(spec.reference_n))
    if cfg.dt == "auto":
        # one shared step size so the runs are discretization-consistent
        cfg = SolverConfig(
            "transformed", t_final=T, dt=auto_dt(cfg, grid, tc, u0_ref),
            s=spec.s, dealias=spec.dealias,
            blowup_threshold=spec.blowup_threshold, warn_domain_edge=False,
        )
    traj_ref = solve(u0_ref, cfg, tc, monitor_times=monitor)

    rows = []
    for n in spec.n_sweep:
        u0_n = project(u0, bank.p_leq(n))
        traj_n = solve(u0_n, cfg, tc, monitor_times=monitor)
        diff = max(
            sobolev_norm(a - b, spec.s - 1.0)
            for a, b in zip(traj_n.states, traj_ref.states)
        )
        diff_hs = max(
            sobolev_norm(a - b, spec.s)
            for a, b in zip(traj_n.states, traj_ref.states)
        )
        tail = sobolev_norm(u0 - u0_n, spec.s)
        # structure of the smoothing-for-rate trade: the top-norm difference
        # is controlled by the datum tail plus n times the lower-norm one
        structure_ratio = diff_hs / (tail + n * diff)
        rows.append([n, diff, diff_hs, tail, structure_ratio])
    report.add_table(
        "convergence",
        ["n", "diff_linf_hsm1", "diff_linf_hs", "tail_hs", "structure_ratio"],
        rows,
    )
    slope, _, resid = fit_loglog([r[0] for r in rows], [r[1] for r in rows])
    report.slopes["bona_smith_rate"] = {"slope": slope, "residual": resid}
    tail_slope, _, _ = fit_loglog([r[0] for r in rows], [r[3] for r in rows])
    report.slopes["datum_tail"] = {"slope": tail_slope, "residual": 0.0}
    report.verdict(
        "bona_smith_slope", slope <= -0.75 and resid <= 0.1, slope,
        "fitted slope of ||u_n - u_ref|| vs n is <= -0.75 with log-fit residual <= 0.1",
    )
    ratios = [r[4] for r in rows]
    report.verdict(
        "difference_structure_bounded", max(ratios) <= 10.0, max(ratios),
        "top-norm difference bounded by tail + n x lower-norm difference "
        "(single constant across the sweep)",
    )
    return report


def run_wavepacket(spec: ExperimentSpec) -> ExperimentReport:
    """Packet amplitude gain across a compact anti-diffusion region.

    The run is linear (epsilon = 0).  The measured gain is the ratio of
    Hilbert-envelope peaks between the run and the dispersion-only
    evolution of the same datum (exact Fourier multiplier), which removes
    spreading from the bookkeeping.
    """
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    a_vals = spec.cset.alpha
    if a_vals.depends_on_x or a_vals.depends_on_t:
        raise ValueError("wavepacket study needs constant alpha")
    a0 = float(a_vals.eval(0.0, 0.0))
    R = spec.region_half_width
    beta0 = spec.region_beta0
    w = spec.region_smoothing
    if beta0 > 0:
        beta_text = (
            f"{0.5 * beta0!r}*(tanh((x+{R!r})/{w!r}) - tanh((x-{R!r})/{w!r}))"
        )
    else:
        beta_text = "0"
    cset = CoefficientSet.from_strings(
        alpha=repr(a0), beta=beta_text, epsilon="0",
        alpha0=min(a0, 1.0 / a0),
    )
    grid = make_grid(spec.half_width, spec.num_points)
    heuristic = float(np.exp(2.0 * R * beta0 / a0))
    rows = []
    gains = []
    for xi0 in spec.xi0_sweep:
        u0 = packet_state(grid, xi0, spec.packet_width, center=spec.packet_launch)
        T = 2.0 * spec.packet_launch / (3.0 * a0 * xi0**2)
        cfg = SolverConfig("original", t_final=T, dt=spec.dt, s=spec.s, dealias=False)
        traj = solve(u0, cfg, cset)
        # dispersion-only reference by the exact multiplier (alpha constant)
        k = grid.wavenumbers
        ref = SpectralState(
            grid, u0.coefficients * np.exp(1j * a0 * k**3 * T), True
        )
        gain = envelope_peak(traj.final_state) / envelope_peak(ref)
        gains.append(gain)
        rows.append([xi0, T, gain, heuristic, gain / heuristic])
    report.add_table(
        "gains", ["xi0", "traversal_time", "gain", "heuristic", "gain_over_heuristic"],
        rows,
    )
    if beta0 > 0:
        spread = max(gains) / min(gains) - 1.0
        report.verdict(
            "gain_frequency_independence", spread <= 0.25, spread,
            "packet gains mutually within 25% across the carrier sweep",
        )
        ratios = [g / heuristic for g in gains]
        ok = all(0.5 <= r <= 2.0 for r in ratios)
        report.verdict(
            "gain_matches_heuristic", ok, max(ratios, key=lambda r: abs(np.log(r))),
            "measured gain within a factor 2 of exp(2 R beta / alpha)",
        )
    else:
        worst = max(abs(g - 1.0) for g in gains)
        report.verdict(
            "no_antidiffusion_gain", worst <= 0.02, worst,
            "gain equals 1 within 2% when the region is off",
        )
    return report


def run_continuity(spec: ExperimentSpec) -> ExperimentReport:
    """Flow-map stability under initial perturbations of shrinking size."""
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    grid = make_grid(spec.half_width, spec.num_points)
    tc = _require_constant_benchmark(spec, grid)
    linear = bool(np.abs(tc.e).max() == 0.0)
    if linear:
        base = gaussian_state(grid, 1.0, 1.0)
    else:
        base = soliton_state(grid, spec.kappa, e=float(tc.e[0]))
    direction = gaussian_state(grid, 1.0, 1.0, center=1.0)
    direction = (1.0 / sobolev_norm(direction, spec.s)) * direction
    T = spec.t_final
    monitor = np.linspace(0.0, T, 9)[1:]
    cfg = SolverConfig("transformed", t_final=T, dt=spec.dt, s=spec.s,
                       dealias=spec.dealias,
                       blowup_threshold=spec.blowup_threshold)
    traj_base = solve(base, cfg, tc, monitor_times=monitor)
    rows = []
    ratios = []
    for eps in spec.perturbation_sizes:
        pert = base + eps * direction
        traj_p = solve(pert, cfg, tc, monitor_times=monitor)
        diff = max(
            sobolev_norm(a - b, spec.s)
            for a, b in zip(traj_p.states, traj_base.states)
        )
        ratios.append(diff / eps)
        rows.append([eps, diff, diff / eps])
    report.add_table("sensitivity", ["eps", "diff_linf_hs", "ratio"], rows)
    spread = max(ratios) / min(ratios)
    if linear:
        report.verdict(
            "linear_ratio_stable", spread <= 1.01, spread - 1.0,
            "linear problem: sensitivity ratio constant across sizes within 1%",
        )
    else:
        report.verdict(
            "ratio_bounded", spread <= 2.0, spread,
            "sensitivity ratios stable within a factor 2 as the size shrinks",
        )
    return report


def run_commutator_survey(spec: ExperimentSpec) -> ExperimentReport:
    """Empirical commutator constants, identity residual, resonance check."""
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    grid = make_grid(np.pi, max(spec.num_points, 8 * max(spec.band_sweep)))
    bank = ProjectorBank(grid)
    rng = np.random.default_rng(spec.seed)

    # single-bracket bound: ||[P_N, f_low] g|| * N / (||d_x f_low||_inf ||tilde g||)
    commu_rows = []
    all_ratios = []
    for N in spec.band_sweep:
        worst = 0.0
        for _ in range(spec.draws):
            f = random_smooth_field(grid, rng, decay=1.5)
            g = random_smooth_field(grid, rng, decay=1.0)
            com = commutator(f, g, N, bank)
            f_low = project(f, bank.p_ll(N))
            denom = float(
                np.abs(spectral_derivative(f_low, 1).physical()).max()
            ) * l2_norm(project(g, bank.p_tilde(N)))
            num = l2_norm(com) * N
            ratio = 0.0 if denom == 0.0 else num / denom
            worst = max(worst, ratio)
        commu_rows.append([N, worst])
        all_ratios.append(worst)
    single_bound = max(all_ratios)
    report.add_table(
        "commu", ["N", "measured_ratio", "bound"],
        [[N, r, single_bound] for N, r in commu_rows],
    )
    report.verdict(
        "commu_constant_bounded", single_bound < 10.0, single_bound,
        "single-bracket constant bounded (< 10) across the band sweep",
    )

    # double-bracket scaling with fixed low-frequency f (f_xx fixed)
    f_fixed = SpectralState.from_physical(
        grid, np.sin(grid.x) + 0.5 * np.cos(grid.x)
    )
    fxx_sup = float(
        np.abs(np.fft.ifft(
            (1j * grid.wavenumbers) ** 2 * f_fixed.coefficients * grid.num_points
        ).real).max()
    )
    commu2_rows = []
    sweep2 = [N for N in spec.band_sweep if N >= 8]
    for N in sweep2:
        vals = []
        for _ in range(max(8, spec.draws // 4)):
            g = random_smooth_field(grid, rng, decay=1.0)
            dcom = double_commutator(f_fixed, g, N, bank)
            denom = fxx_sup * l2_norm(project(g, bank.p_tilde(N)))
            vals.append(l2_norm(dcom) / denom)
        commu2_rows.append([N, float(np.median(vals))])
    slope2, _, resid2 = fit_loglog(
        [r[0] for r in commu2_rows], [r[1] for r in commu2_rows]
    )
    report.add_table("commu2", ["N", "median_normalized_magnitude"], commu2_rows)
    report.slopes["double_bracket_scaling"] = {"slope": slope2, "residual": resid2}
    report.verdict(
        "commu2_scaling", abs(slope2 + 2.0) <= 0.3 and resid2 <= 0.1, slope2,
        "double-bracket magnitude scales like N^-2 (slope -2 +/- 0.3, residual <= 0.1)",
    )

    # exact quadratic identity
    dyadics = [N for N in spec.band_sweep if N >= 8]
    residuals = []
    for i in range(spec.identity_draws):
        f = random_smooth_field(grid, rng, decay=1.2)
        g = random_smooth_field(grid, rng, decay=1.0)
        N = dyadics[int(rng.integers(0, len(dyadics)))]
        residuals.append([i, N, comcom_residual(f, g, N, bank)])
    worst_resid = max(r[2] for r in residuals)
    report.add_table("comcom", ["draw", "N", "relative_residual"], residuals)
    report.verdict(
        "comcom_identity", worst_resid < 1e-10, worst_resid,
        "quadratic commutator identity residual < 1e-10 over the seeded draws",
    )

    # cubic resonance factorization
    worst_res = 0.0
    for _ in range(spec.resonance_draws):
        xi = rng.uniform(-10.0, 10.0, size=3)
        om = resonance_omega3(*xi)
        fac = 3.0 * (xi[0] + xi[1]) * (xi[1] + xi[2]) * (xi[0] + xi[2])
        worst_res = max(worst_res, abs(om - fac) / max(1.0, abs(om)))
    report.add_table(
        "resonance", ["draws", "max_relative_factorization_error"],
        [[spec.resonance_draws, worst_res]],
    )
    report.verdict(
        "resonance_factorization", worst_res < 1e-12, worst_res,
        "|Omega3 - 3(xi1+xi2)(xi2+xi3)(xi1+xi3)| < 1e-12 relative over random triples",
    )
    report.notes.append(RESONANCE_SIGN_NOTE)
    return report


def run_soliton_benchmark(spec: ExperimentSpec) -> ExperimentReport:
    """Travelling-wave accuracy, conservation, and temporal order."""
    report = ExperimentReport(kind=spec.kind, watermark=spec.hypothesis_violating)
    grid = make_grid(spec.half_width, spec.num_points)
    tc = _require_constant_benchmark(spec, grid)
    e_val = float(tc.e[0])
    if e_val == 0.0 or np.abs(tc.e - e_val).max() > 1e-12:
        raise ValueError("soliton benchmark needs a nonzero constant epsilon")
    kappa = spec.kappa
    center = -1.0
    u0 = soliton_state(grid, kappa, e=e_val, center=center)
    T = spec.t_final
    dt = 1e-4 if spec.dt == "auto" else spec.dt
    monitor = np.linspace(0.0, T, 6)[1:]
    cfg = SolverConfig("transformed", t_final=T, dt=dt, s=spec.s,
                       dealias=spec.dealias,
                       blowup_threshold=spec.blowup_threshold)
    traj = solve(u0, cfg, tc, monitor_times=monitor)
    report.add_table(
        "norms",
        ["t", "hs_norm", "seminorm_cumulative", "sup_norm", "dissipation"],
        [
            [float(traj.times[i]), float(traj.hs_norms[i]),
             float(traj.seminorm_cumulative[i]), float(traj.sup_norms[i]),
             float(traj.dissipation[i])]
            for i in range(len(traj.times))
        ],
    )
    err_rows = []
    for t, st in zip(traj.times, traj.states):
        exact = SpectralState.from_physical(
            grid, exact_soliton_values(grid.x, float(t), kappa, e_val, center)
        )
        err_rows.append([float(t), l2_norm(st - exact)])
    final_err = err_rows[-1][1]
    l2s = np.array([l2_norm(st) for st in traj.states])
    masses = np.array([mass(st) for st in traj.states])
    l2_drift = float(np.abs(l2s - l2s[0]).max() / l2s[0])
    mass_drift = float(np.abs(masses - masses[0]).max() / abs(masses[0]))
    report.add_table("l2_error", ["t", "l2_error"], err_rows)
    report.add_table(
        "conservation", ["t", "l2_norm", "mass"],
        [[float(t), float(a), float(m)] for t, a, m in zip(traj.times, l2s, masses)],
    )
    report.verdict(
        "soliton_l2_error", final_err < 1e-6, final_err,
        "L2 error below 1e-6 at the final time",
    )
    report.verdict(
        "l2_conservation", l2_drift < 1e-7, l2_drift,
        "L2 norm conserved within 1e-7 relative",
    )
    report.verdict(
        "mass_conservation", mass_drift < 1e-7, mass_drift,
        "mass conserved within 1e-7 relative",
    )

    # temporal order by dt-self-convergence: the reference run shares the
    # grid, so the (tiny) spatial error cancels and the pure time error is
    # visible over a full decade; a faster wave strengthens the signal
    T_ord = spec.order_t_final
    kap_ord = spec.order_kappa
    u0_ord = soliton_state(grid, kap_ord, e=e_val, center=-1.0)
    dt_ref = min(spec.dt_sweep) / 8.0
    cfg_ref = SolverConfig("transformed", t_final=T_ord, dt=dt_ref, s=spec.s,
                           monitor_stride=10**9)
    ref_state = solve(u0_ord, cfg_ref, tc).final_state
    order_rows = []
    for dt_k in spec.dt_sweep:
        cfg_k = SolverConfig("transformed", t_final=T_ord, dt=dt_k, s=spec.s,
                             monitor_stride=10**9)
        traj_k = solve(u0_ord, cfg_k, tc)
        order_rows.append([dt_k, l2_norm(traj_k.final_state - ref_state)])
    slope, _, resid = fit_loglog(
        [r[0] for r in order_rows], [r[1] for r in order_rows]
    )
    report.add_table("temporal_order", ["dt", "l2_self_convergence_error"], order_rows)
    report.slopes["temporal_order"] = {"slope": slope, "residual": resid}
    report.verdict(
        "temporal_order_fourth", abs(slope - 4.0) <= 0.3 and resid <= 0.1, slope,
        "temporal convergence slope 4 +/- 0.3 over the dt decade, residual <= 0.1",
    )
    report.notes.append(
        f"temporal order measured by self-convergence against a dt/8 reference "
        f"with a kappa={kap_ord:g} wave; the absolute error gate is the "
        f"separate L2-error verdict"
    )

    # dissipation bookkeeping on the benchmark run (b == 0 here)
    rep = energy_monitor(traj, spec.s, np.zeros(grid.num_points))
    report.verdict(
        "dissipation_sign", rep.dissipation_nonpositive,
        float(np.max(rep.dissipation)),
        "dyadic dissipation term <= 1e-12 at every sample",
    )
    return report


_RUNNERS = {
    "transform_consistency": run_transform_consistency,
    "bona_smith": run_bona_smith,
    "wavepacket": run_wavepacket,
    "continuity": run_continuity,
    "commutator_survey": run_commutator_survey,
    "soliton_benchmark": run_soliton_benchmark,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return _RUNNERS[spec.kind](spec)


# -- report emission ------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_report(
    report: ExperimentReport,
    outdir,
    run_id: str,
    config_hash: str,
    gnuplot: bool = False,
) -> None:
    """Emit the report as CSV tables plus a JSON summary.

    Every file carries the run id and config hash in `#` comment headers;
    hypothesis-violating runs are watermarked in every data row.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    headers = [
        f"run_id: {run_id}",
        f"config_sha256: {config_hash}",
        f"experiment: {report.kind}",
    ]
    if report.watermark:
        headers.append("WARNING: hypothesis-violating configuration")
    for name, (cols, rows) in report.tables.items():
        out_cols = list(cols) + (["watermark"] if report.watermark else [])
        with open(outdir / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
            for line in headers:
                fh.write(f"# {line}\n")
            fh.write(",".join(out_cols) + "\n")
            for row in rows:
                cells = [_fmt(v) for v in row]
                if report.watermark:
                    cells.append("HYPOTHESIS-VIOLATING")
                fh.write(",".join(cells) + "\n")
        if gnuplot:
            with open(outdir / f"{name}.dat", "w", encoding="utf-8", newline="\n") as fh:
                for line in headers:
                    fh.write(f"# {line}\n")
                fh.write("# " + " ".join(cols) + "\n")
                for row in rows:
                    fh.write(" ".join(_fmt(v) for v in row) + "\n")
    summary = {
        "run_id": run_id,
        "config_sha256": config_hash,
        "experiment": report.kind,
        "hypothesis_violating": report.watermark,
        "passed": report.passed,
        "verdicts": [
            {
                "name": v.name,
                "passed": v.passed,
                "value": v.value,
                "threshold": v.threshold,
            }
            for v in report.verdicts
        ],
        "slopes": report.slopes,
        "notes": report.notes,
    }
    with open(outdir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
