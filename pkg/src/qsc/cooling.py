"""Measurement-driven cooling pipelines.

Three protocols share the machinery here:

  * the deterministic ladder: address band j = L..1 with a corrected bath
    detuning, evolve for a half Rabi period, measure the bath, repeat;
  * the reduced ladder, which skips bands with negligible fiducial overlap;
  * the probabilistic qutrit scheme, which trades spectral knowledge for
    random evolution times plus a verification oscillation.

Density-matrix propagation of the exact conditional-evolution map is the
primary mode: its output is deterministic.  Trajectory mode samples the
measurement record instead and must agree within Monte-Carlo error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import CouplingTooLarge
from .levelshift import DetuningSolution, solve_detuning
from .linalg import (
    DensityMatrix,
    Operator,
    StateVector,
    operator_norm,
)
from .models import (
    KET_B,
    KET_C,
    KET_D,
    KET_DOWN,
    KET_L,
    KET_R,
    KET_UP,
    PROJ_DOWN,
    PROJ_UP,
    BandStructure,
    BathSpec,
    ClockModel,
    GroverModel,
    build_bath_and_couplings,
    build_clock,
    build_grover,
    clock_band_structure,
    clock_coupling_direction,
    grover_band_structure,
    grover_fiducial,
    overlap_coefficients,
)

__all__ = [
    "CoolingSetup",
    "ExtensionSetup",
    "ScheduleStep",
    "CoolingSchedule",
    "RunReport",
    "ProbRunReport",
    "ErrorInjection",
    "ErrorBudgetReport",
    "grover_setup",
    "clock_setup",
    "clock_extension_setup",
    "build_schedule",
    "cooling_step",
    "run_deterministic",
    "run_reduced",
    "run_probabilistic",
    "inject_errors",
    "extension_error_budget",
    "cost_report",
    "trial_rng",
]


# ---------------------------------------------------------------------------
# Protocol setups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoolingSetup:
    """Everything the deterministic ladder needs about one system.

    `coupling` is the unit-norm coupling direction; the schedule scales it
    by Omega_0.  Within the band, coupling acts as |F><F| with overlaps xs.
    """

    h_s: Operator
    coupling: Operator
    band: BandStructure
    xs: np.ndarray
    fiducial: StateVector
    ground_projector: np.ndarray  # system-side projector, possibly degenerate
    label: str = ""

    @property
    def dim_s(self) -> int:
        return self.h_s.dim

    @property
    def n_bands(self) -> int:
        return self.band.size


def grover_setup(model: GroverModel, fiducial: StateVector | None = None,
                 kind: str = "uniform", seed: int | None = None) -> CoolingSetup:
    """Search-oracle setup: rank-one coupling along the fiducial state."""
    if fiducial is None:
        fiducial = grover_fiducial(model, kind=kind, seed=seed)
    band, xs = grover_band_structure(model, fiducial)
    h_s, p0, _ = build_grover(model)
    f = fiducial.amplitudes
    coupling = Operator(np.outer(f, f.conj()), hermitian=True)
    return CoolingSetup(
        h_s=h_s,
        coupling=coupling,
        band=band,
        xs=xs,
        fiducial=fiducial,
        ground_projector=p0.projector.matrix,
        label=f"grover(n={model.n})",
    )


def clock_setup(model: ClockModel) -> CoolingSetup:
    """Clock setup: single-qubit coupling on the first clock qubit, fiducial
    all-zeros product state."""
    h_s = build_clock(model)
    band = clock_band_structure(model, h_s)
    xs = overlap_coefficients(model.length)
    dim = h_s.dim
    fid = np.zeros(dim, dtype=complex)
    fid[0] = 1.0
    eta = band.vector(0)
    return CoolingSetup(
        h_s=h_s,
        coupling=clock_coupling_direction(model),
        band=band,
        xs=xs,
        fiducial=StateVector(fid),
        ground_projector=np.outer(eta, eta.conj()),
        label=f"clock(n={model.n},L={model.length})",
    )


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleStep:
    j: int
    omega_b: float
    tau: float
    rabi: float  # the rate actually used to set tau: tau = pi / (2 rabi)
    solution: DetuningSolution = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class CoolingSchedule:
    """Ordered cooling steps, j = L down to 1."""

    steps: tuple[ScheduleStep, ...]
    omega0: float
    r: float
    eps_target: float | None
    tau_mode: str

    @property
    def total_time(self) -> float:
        return float(sum(s.tau for s in self.steps))


def _exact_splitting(setup: CoolingSetup, omega0: float, sol: DetuningSolution) -> float:
    """True splitting of the two hybridized eigenstates of H_j + V nearest
    the addressed transition, found by eigenvector overlap."""
    h_j, v = _step_operators(setup, omega0, sol.omega_b)
    w, vecs = np.linalg.eigh(h_j.matrix + v.matrix)
    down = np.kron(setup.band.vector(sol.j), KET_DOWN)
    up = np.kron(setup.band.vector(0), KET_UP)
    weight = np.abs(vecs.conj().T @ down) ** 2 + np.abs(vecs.conj().T @ up) ** 2
    top = np.argsort(-weight)[:2]
    return float(abs(w[top[0]] - w[top[1]]))


def _step_operators(setup: CoolingSetup, omega0: float, omega_b: float):
    """H_j (system + detuned bath) and V = Omega_0 * coupling (x) sigma_x."""
    t_s = omega0 * setup.coupling
    h_j, v = build_bath_and_couplings(setup.h_s, BathSpec("qubit", omega_b), t_s)
    return h_j, v


def build_schedule(
    setup: CoolingSetup,
    omega0: float | None = None,
    eps: float | None = None,
    tau_mode: str = "exact",
    scaling_c: float = config.DEFAULT_SCHEDULE_CONSTANT,
) -> CoolingSchedule:
    """Solve per-band detunings and pulse times.

    Exactly one of `omega0` / `eps` must be given; with `eps`, the coupling
    is set through r = scaling_c * eps * L^(-5/2).  tau_mode "exact" reads
    the pulse time off the true eigen-splitting of H_j + V; "analytic" uses
    tau_j = pi / (2 Omega_0 x_0 x_j), which is exactly proportional to
    1/Omega_0 (so halving the coupling exactly doubles the time).
    """
    if (omega0 is None) == (eps is None):
        raise ValueError("give exactly one of omega0 or eps")
    n_steps = setup.n_bands - 1
    delta = setup.band.delta
    if omega0 is None:
        r = scaling_c * eps * n_steps ** (-2.5)
        omega0 = r * delta
    else:
        r = omega0 / delta
    if r >= config.MAX_COUPLING_RATIO:
        raise CouplingTooLarge(f"r = {r:.4f} >= 1/8; reduce the coupling or target")
    if tau_mode not in ("exact", "analytic"):
        raise ValueError("tau_mode must be 'exact' or 'analytic'")
    xs, omegas = setup.xs, setup.band.omegas
    steps = []
    for j in range(n_steps, 0, -1):
        sol = solve_detuning(xs, omegas, j, omega0, delta)
        if tau_mode == "exact":
            splitting = _exact_splitting(setup, omega0, sol)
            rabi = splitting / 2.0
        else:
            rabi = omega0 * xs[0] * xs[j]
        steps.append(
            ScheduleStep(j=j, omega_b=sol.omega_b, tau=math.pi / (2 * rabi),
                         rabi=rabi, solution=sol)
        )
    return CoolingSchedule(
        steps=tuple(steps), omega0=omega0, r=r, eps_target=eps, tau_mode=tau_mode
    )


# ---------------------------------------------------------------------------
# The conditional-evolution map and deterministic runs
# ---------------------------------------------------------------------------

def cooling_step(
    rho: DensityMatrix,
    step: ScheduleStep,
    h_j: Operator,
    v: Operator,
    delta_op: Operator | None = None,
) -> DensityMatrix:
    """One application of the measure-then-conditionally-evolve map:

        E_j(rho) = U_j D rho D U_j^+  +  P_up rho P_up

    with D = 1 (x) |down><down| and U_j the evolution under H_j + V (+ any
    injected error) for the step's pulse time.  Trace-preserving and
    completely positive by construction.
    """
    dim_s = rho.dim // 2
    h_total = h_j + v if delta_op is None else h_j + v + delta_op
    u = _evolve_matrix(h_total, step.tau)
    eye_s = np.eye(dim_s, dtype=complex)
    down = np.kron(eye_s, PROJ_DOWN)
    up = np.kron(eye_s, PROJ_UP)
    m = rho.entries
    out = u @ (down @ m @ down) @ u.conj().T + up @ m @ up
    out = (out + out.conj().T) / 2
    return DensityMatrix(out)


def _evolve_matrix(h: Operator, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(h.matrix)
    return v @ (np.exp(-1j * t * w)[:, None] * v.conj().T)


@dataclass(frozen=True)
class RunReport:
    """Outcome of one cooling run."""

    ground_fidelity: float
    per_step_up_probability: tuple[float, ...]
    per_step_retention: tuple[float, ...]
    trace_residual: float
    min_eigenvalue: float
    total_time: float
    h_norm: float
    cost: float
    error_budget: float  # 1 - product of per-step band retentions
    mode: str
    skipped_bands: tuple[int, ...] = ()
    f_perp: float = 0.0
    predicted_skip_penalty: float = 0.0  # O(L' * f_perp) infidelity add-on
    shots: int = 0
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "ground_fidelity": self.ground_fidelity,
            "per_step_up_probability": list(self.per_step_up_probability),
            "per_step_retention": list(self.per_step_retention),
            "trace_residual": self.trace_residual,
            "min_eigenvalue": self.min_eigenvalue,
            "total_time": self.total_time,
            "h_norm": self.h_norm,
            "cost": self.cost,
            "error_budget": self.error_budget,
            "mode": self.mode,
            "skipped_bands": list(self.skipped_bands),
            "f_perp": self.f_perp,
            "predicted_skip_penalty": self.predicted_skip_penalty,
            "shots": self.shots,
            "label": self.label,
        }


def _band_manifold_projector(setup: CoolingSetup, j: int) -> np.ndarray:
    """Projector onto span{|k,down>}_{k<=j} + |0,up> in the composite space."""
    cols = [np.kron(setup.band.vector(k), KET_DOWN) for k in range(j + 1)]
    cols.append(np.kron(setup.band.vector(0), KET_UP))
    b = np.column_stack(cols)
    return b @ b.conj().T


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent per-trial generator, stable under any execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial_index,)))


def run_deterministic(
    setup: CoolingSetup,
    schedule: CoolingSchedule,
    rho0: DensityMatrix | None = None,
    mode: str = "density",
    shots: int = 2000,
    seed: int = 0,
    delta_ops: dict[int, Operator] | None = None,
) -> RunReport:
    """Run the cooling ladder end to end.

    Density mode composes the exact conditional-evolution maps (the output
    is a deterministic number).  Trajectory mode samples the bath
    measurement record shot by shot with per-shot generators derived from
    the master seed, then samples a final ground-vs-not outcome per shot so
    the fidelity estimate carries plain binomial statistics.
    """
    dim_s = setup.dim_s
    eye_bath = np.eye(2, dtype=complex)
    m_ground = np.kron(setup.ground_projector, eye_bath)
    h_norm = 0.0
    for step in schedule.steps:
        h_j, v = _step_operators(setup, schedule.omega0, step.omega_b)
        h_tot = h_j + v
        if delta_ops and step.j in delta_ops:
            h_tot = h_tot + delta_ops[step.j]
        h_norm = max(h_norm, operator_norm(h_tot))
    total_time = schedule.total_time

    if mode == "density":
        if rho0 is None:
            psi0 = np.kron(setup.fiducial.amplitudes, KET_DOWN)
            rho = DensityMatrix(np.outer(psi0, psi0.conj()))
        else:
            rho = rho0
        up_proj = np.kron(np.eye(dim_s, dtype=complex), PROJ_UP)
        up_probs, retentions = [], []
        trace_residual = abs(rho.trace() - 1.0)
        min_eig = rho.min_eigenvalue()
        for step in schedule.steps:
            before = float(
                np.trace(_band_manifold_projector(setup, step.j) @ rho.entries).real
            )
            h_j, v = _step_operators(setup, schedule.omega0, step.omega_b)
            dop = delta_ops.get(step.j) if delta_ops else None
            rho = cooling_step(rho, step, h_j, v, dop)
            after = float(
                np.trace(_band_manifold_projector(setup, step.j - 1) @ rho.entries).real
            )
            retentions.append(min(1.0, after / before) if before > 0 else 1.0)
            up_probs.append(float(np.trace(up_proj @ rho.entries).real))
            trace_residual = max(trace_residual, abs(rho.trace() - 1.0))
            min_eig = min(min_eig, rho.min_eigenvalue())
        fidelity = float(np.trace(m_ground @ rho.entries).real)
        retention_product = float(np.prod(retentions)) if retentions else 1.0
        return RunReport(
            ground_fidelity=fidelity,
            per_step_up_probability=tuple(up_probs),
            per_step_retention=tuple(retentions),
            trace_residual=trace_residual,
            min_eigenvalue=min_eig,
            total_time=total_time,
            h_norm=h_norm,
            cost=h_norm * total_time,
            error_budget=1.0 - retention_product,
            mode="density",
            label=setup.label,
        )

    if mode != "trajectory":
        raise ValueError("mode must be 'density' or 'trajectory'")

    # trajectory mode: pure-state shots through the measurement record
    unitaries = []
    for step in schedule.steps:
        h_j, v = _step_operators(setup, schedule.omega0, step.omega_b)
        h_tot = h_j + v
        if delta_ops and step.j in delta_ops:
            h_tot = h_tot + delta_ops[step.j]
        unitaries.append(_evolve_matrix(h_tot, step.tau))
    psi_init = np.kron(setup.fiducial.amplitudes, KET_DOWN)
    down_proj = np.kron(np.eye(dim_s, dtype=complex), PROJ_DOWN)
    up_proj = np.kron(np.eye(dim_s, dtype=complex), PROJ_UP)
    successes = 0
    up_weights = np.zeros(len(schedule.steps))
    for t in range(shots):
        rng = trial_rng(seed, t)
        psi = psi_init.copy()
        for i, u in enumerate(unitaries):
            p_up = float(np.linalg.norm(up_proj @ psi) ** 2)
            if rng.random() < p_up:
                psi = up_proj @ psi / math.sqrt(p_up)
            else:
                psi = down_proj @ psi / math.sqrt(max(1e-300, 1.0 - p_up))
                psi = u @ psi
            # post-step pumped weight, comparable to the density-mode trace
            up_weights[i] += float(np.linalg.norm(up_proj @ psi) ** 2)
        p_ground = float(np.real(psi.conj() @ m_ground @ psi))
        if rng.random() < min(1.0, max(0.0, p_ground)):
            successes += 1
    return RunReport(
        ground_fidelity=successes / shots,
        per_step_up_probability=tuple(up_weights / shots),
        per_step_retention=(),
        trace_residual=0.0,
        min_eigenvalue=0.0,
        total_time=total_time,
        h_norm=h_norm,
        cost=h_norm * total_time,
        error_budget=float("nan"),
        mode="trajectory",
        shots=shots,
        label=setup.label,
    )


def run_reduced(
    setup: CoolingSetup,
    omega0: float | None = None,
    eps: float | None = None,
    eta: float | None = None,
    tau_mode: str = "exact",
    scaling_c: float = config.DEFAULT_SCHEDULE_CONSTANT,
) -> RunReport:
    """Deterministic ladder that skips bands with overlap x_j <= eta.

    With the default eta = eps / L^(3/2) the skipped weight keeps the
    final infidelity within O(eps) while shortening the total time.
    """
    full = build_schedule(setup, omega0=omega0, eps=eps, tau_mode=tau_mode,
                          scaling_c=scaling_c)
    n_steps = setup.n_bands - 1
    if eta is None:
        eta = (eps if eps is not None else 0.0) / n_steps ** 1.5
    kept = tuple(s for s in full.steps if setup.xs[s.j] > eta)
    skipped = tuple(s.j for s in full.steps if setup.xs[s.j] <= eta)
    reduced = CoolingSchedule(
        steps=kept, omega0=full.omega0, r=full.r,
        eps_target=full.eps_target, tau_mode=full.tau_mode,
    )
    report = run_deterministic(setup, reduced)
    f_perp = math.sqrt(float(np.sum(setup.xs[list(skipped)] ** 2))) if skipped else 0.0
    return RunReport(
        ground_fidelity=report.ground_fidelity,
        per_step_up_probability=report.per_step_up_probability,
        per_step_retention=report.per_step_retention,
        trace_residual=report.trace_residual,
        min_eigenvalue=report.min_eigenvalue,
        total_time=report.total_time,
        h_norm=report.h_norm,
        cost=report.cost,
        error_budget=report.error_budget,
        mode="density-reduced",
        skipped_bands=skipped,
        f_perp=f_perp,
        predicted_skip_penalty=len(kept) * f_perp,
        label=setup.label,
    )


# ---------------------------------------------------------------------------
# Probabilistic qutrit scheme
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionSetup:
    """System data for the probabilistic scheme: a nondegenerate ground
    state, an addressed band near omega1, and a Hermitian coupling whose
    strength Omega_0 is folded in by the caller."""

    h_s: Operator
    coupling: Operator        # unit norm
    ground: np.ndarray
    band1: np.ndarray         # columns spanning the addressed band
    omega1: float
    delta: float              # min{omega1, E, |E - omega1|} over the rest
    fiducial: StateVector
    f1: float                 # |<1|F>| with |1> the coupled band state
    label: str = ""


def clock_extension_setup(model: ClockModel) -> ExtensionSetup:
    """Treat the clock's k=1 band state as the addressed level; the history
    state is the ground state and the all-zeros product state the fiducial."""
    h_s = build_clock(model)
    band = clock_band_structure(model, h_s)
    eta = band.vector(0)
    k1 = band.vector(1)
    omega1 = float(band.omegas[1])
    evals = np.linalg.eigh(h_s.matrix)[0]
    delta = _extension_gap(evals, band, omega1)
    dim = h_s.dim
    fid = np.zeros(dim, dtype=complex)
    fid[0] = 1.0
    xs = overlap_coefficients(model.length)
    return ExtensionSetup(
        h_s=h_s,
        coupling=clock_coupling_direction(model),
        ground=eta,
        band1=k1[:, None],
        omega1=omega1,
        delta=delta,
        fiducial=StateVector(fid),
        f1=float(xs[1]),
        label=f"clock-ext(n={model.n},L={model.length})",
    )


def _extension_gap(evals: np.ndarray, band: BandStructure, omega1: float) -> float:
    """min{omega1, E, |E - omega1|} over the spectrum outside the ground
    state and the addressed band."""
    cands = [omega1]
    for e in evals:
        if abs(e - 0.0) < 1e-9 * max(1.0, abs(omega1)):
            continue
        if abs(e - omega1) < 1e-9 * max(1.0, abs(omega1)):
            continue
        cands.append(abs(e))
        cands.append(abs(e - omega1))
    return float(min(cands))


@dataclass(frozen=True)
class ProbRunReport:
    trials: int
    accept_count: int
    acceptance_rate: float
    conditional_success: float
    mean_time_per_success: float
    analytic_acceptance: float
    tau_doublings: tuple[tuple[int, float], ...]  # (trial index, new tau floor)
    round_limit_exceeded: bool
    b_measure_count: int
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "accept_count": self.accept_count,
            "acceptance_rate": self.acceptance_rate,
            "conditional_success": self.conditional_success,
            "mean_time_per_success": self.mean_time_per_success,
            "analytic_acceptance": self.analytic_acceptance,
            "tau_doublings": [list(x) for x in self.tau_doublings],
            "round_limit_exceeded": self.round_limit_exceeded,
            "b_measure_count": self.b_measure_count,
            "label": self.label,
        }


def analytic_acceptance(f1: float, rabi: float, omega_star: float) -> float:
    """f1^2 * E[sin^2(Omega tau)] for tau uniform on [pi/Omega*, 2 pi/Omega*]."""
    a, b = math.pi / omega_star, 2 * math.pi / omega_star
    mean_sin2 = 0.5 - (math.sin(2 * rabi * b) - math.sin(2 * rabi * a)) / (
        4 * rabi * (b - a)
    )
    return f1 ** 2 * mean_sin2


def run_probabilistic(
    ext: ExtensionSetup,
    omega0: float,
    omega_star: float | None = None,
    f1_lower: float | None = None,
    eps: float = 0.1,
    trials: int = 2000,
    seed: int = 0,
    max_rounds: int = 10 ** 6,
    delta_op: Operator | None = None,
) -> ProbRunReport:
    """Evolve-measure-verify trials with the qutrit bath.

    Each trial: evolve |F,C> under H + X for tau drawn uniformly from
    [pi/Omega*, 2 pi/Omega*]; measure the bath in the {B, D, C} basis; on
    outcome B swap B->L, D->R and evolve under H + Y for pi/(2 Omega_0); a
    final bath measurement of R accepts the trial.  After roughly 4/f1^2
    consecutive failures the sampling window doubles (Omega* halves).
    A static Hermitian `delta_op` (on the composite space) is added to both
    simulated evolutions.
    """
    rabi = float(
        np.abs(ext.band1[:, 0].conj() @ (omega0 * ext.coupling.matrix) @ ext.ground)
    )
    if omega_star is None:
        omega_star = 0.9 * rabi
    if f1_lower is None:
        f1_lower = ext.f1
    r = omega0 / ext.delta
    if r >= config.MAX_COUPLING_RATIO:
        raise CouplingTooLarge(f"r = {r:.4f} >= 1/8")

    t_s = omega0 * ext.coupling
    bath = BathSpec("qutrit", ext.omega1)
    h_full, x_op = build_bath_and_couplings(ext.h_s, bath, t_s)
    dim_s = ext.h_s.dim
    eye_s = np.eye(dim_s, dtype=complex)
    y_op = omega0 * np.kron(
        eye_s, np.outer(KET_L, KET_R.conj()) + np.outer(KET_R, KET_L.conj())
    )
    dmat = delta_op.matrix if delta_op is not None else 0.0
    wt, vt = np.linalg.eigh(h_full.matrix + x_op.matrix + dmat)
    wv, vv = np.linalg.eigh(h_full.matrix + y_op + dmat)
    tau_v = math.pi / (2 * omega0)
    u_verify = vv @ (np.exp(-1j * tau_v * wv)[:, None] * vv.conj().T)

    proj_b = np.kron(eye_s, np.outer(KET_B, KET_B.conj()))
    proj_r = np.kron(eye_s, np.outer(KET_R, KET_R.conj()))
    swap_bl = np.kron(
        eye_s,
        np.outer(KET_L, KET_B.conj())
        + np.outer(KET_R, KET_D.conj())
        + np.outer(KET_C, KET_C.conj()),
    )
    ground_proj = np.kron(np.outer(ext.ground, ext.ground.conj()), np.eye(3))
    psi_init = np.kron(ext.fiducial.amplitudes, KET_C)
    psi_init_t = vt.conj().T @ psi_init  # fiducial in the evolution eigenbasis

    doubling_threshold = max(1, math.ceil(4.0 / f1_lower ** 2))
    current_star = omega_star
    consecutive_failures = 0
    doublings: list[tuple[int, float]] = []
    limit_hit = False
    accepts = 0
    b_count = 0
    fidelity_sum = 0.0
    total_sim_time = 0.0
    analytic = analytic_acceptance(ext.f1, rabi, omega_star)

    for t in range(trials):
        rng = trial_rng(seed, t)
        tau = rng.uniform(math.pi / current_star, 2 * math.pi / current_star)
        total_sim_time += tau
        psi = vt @ (np.exp(-1j * tau * wt) * psi_init_t)
        p_b = float(np.linalg.norm(proj_b @ psi) ** 2)
        accepted = False
        if rng.random() < p_b:
            b_count += 1
            psi = proj_b @ psi / math.sqrt(p_b)
            psi = swap_bl @ psi
            total_sim_time += tau_v
            psi = u_verify @ psi
            p_r = float(np.linalg.norm(proj_r @ psi) ** 2)
            if rng.random() < p_r:
                accepted = True
                psi = proj_r @ psi / math.sqrt(p_r)
                fidelity_sum += float(np.real(psi.conj() @ ground_proj @ psi))
        if accepted:
            accepts += 1
            consecutive_failures = 0
            current_star = omega_star
        else:
            consecutive_failures += 1
            if consecutive_failures > max_rounds:
                limit_hit = True  # reported, not fatal
                consecutive_failures = 0
                current_star = omega_star
            elif consecutive_failures % doubling_threshold == 0:
                current_star /= 2.0
                doublings.append((t, current_star))

    return ProbRunReport(
        trials=trials,
        accept_count=accepts,
        acceptance_rate=accepts / trials if trials else 0.0,
        conditional_success=fidelity_sum / accepts if accepts else 0.0,
        mean_time_per_success=total_sim_time / accepts if accepts else float("inf"),
        analytic_acceptance=analytic,
        tau_doublings=tuple(doublings),
        round_limit_exceeded=limit_hit,
        b_measure_count=b_count,
        label=ext.label,
    )


# ---------------------------------------------------------------------------
# Error injection and cost accounting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorInjection:
    """Static Hermitian error terms, one per cooling step (keyed by band
    index j), to be added to the simulated step Hamiltonians."""

    deltas: dict[int, Operator]

    def __post_init__(self):
        for op in self.deltas.values():
            if not op.hermitian:
                raise ValueError("injected errors must be Hermitian")


@dataclass(frozen=True)
class ErrorBudgetReport:
    per_step: tuple[dict, ...]
    all_within_budget: bool

    def to_dict(self) -> dict:
        return {"per_step": list(self.per_step),
                "all_within_budget": self.all_within_budget}


def inject_errors(
    setup: CoolingSetup, schedule: CoolingSchedule, injection: ErrorInjection
) -> ErrorBudgetReport:
    """Measure the three error block norms per step against their budgets:

        R1 = |S1 d S1| / Delta          <  r * Omega_0 |x0 xj| / Delta
        Rx = |S1 (T+d) S2|^2 / Delta^2  <  r * Omega_0 |x0 xj| / Delta
        R2 = |S2 (T+d) S2| / Delta      <  1/2

    where S1 is the band (x) bath subspace.  Runs then proceed with the
    errors added; this function only reports the budgets.
    """
    dim_s = setup.dim_s
    band_bath = np.column_stack(
        [np.kron(setup.band.vector(k), e) for k in range(setup.n_bands)
         for e in (KET_DOWN, KET_UP)]
    )
    s1 = band_bath @ band_bath.conj().T
    s2 = np.eye(2 * dim_s, dtype=complex) - s1
    delta = setup.band.delta
    t_full = np.kron(schedule.omega0 * setup.coupling.matrix,
                     np.array([[0, 1], [1, 0]], dtype=complex))
    rows = []
    ok = True
    for step in schedule.steps:
        d = injection.deltas.get(step.j)
        dmat = d.matrix if d is not None else np.zeros_like(s1)
        budget = schedule.r * schedule.omega0 * setup.xs[0] * setup.xs[step.j] / delta
        r1 = np.linalg.norm(s1 @ dmat @ s1, 2) / delta
        rx = (np.linalg.norm(s1 @ (t_full + dmat) @ s2, 2) / delta) ** 2
        r2 = np.linalg.norm(s2 @ (t_full + dmat) @ s2, 2) / delta
        row = {
            "j": step.j,
            "R1": float(r1),
            "Rx": float(rx),
            "R2": float(r2),
            "budget": float(budget),
            "R1_ok": bool(r1 < budget),
            "Rx_ok": bool(rx < budget),
            "R2_ok": bool(r2 < 0.5),
        }
        ok = ok and row["R1_ok"] and row["Rx_ok"] and row["R2_ok"]
        rows.append(row)
    return ErrorBudgetReport(per_step=tuple(rows), all_within_budget=ok)


def extension_error_budget(
    ext: ExtensionSetup, omega0: float, delta_op: Operator | None = None
) -> ErrorBudgetReport:
    """Error budgets for the probabilistic scheme's two evolutions.

    The drive evolution budgets against the band coupling rate Omega and
    the verification evolution against Omega_0; otherwise the same three
    block norms as the deterministic ladder, with the system split at the
    addressed band (ground + band vs everything else) extended trivially
    over the qutrit.
    """
    dim_s = ext.h_s.dim
    cols = [np.kron(ext.ground, e) for e in np.eye(3, dtype=complex)]
    for k in range(ext.band1.shape[1]):
        cols.extend(np.kron(ext.band1[:, k], e) for e in np.eye(3, dtype=complex))
    b = np.column_stack(cols)
    s1 = b @ b.conj().T
    s2 = np.eye(3 * dim_s, dtype=complex) - s1
    t_s = omega0 * ext.coupling
    h_full, x_op = build_bath_and_couplings(ext.h_s, BathSpec("qutrit", ext.omega1), t_s)
    eye_s = np.eye(dim_s, dtype=complex)
    y_op = omega0 * np.kron(
        eye_s, np.outer(KET_L, KET_R.conj()) + np.outer(KET_R, KET_L.conj())
    )
    dmat = delta_op.matrix if delta_op is not None else np.zeros_like(s1)
    r = omega0 / ext.delta
    rabi = float(np.abs(ext.band1[:, 0].conj() @ t_s.matrix @ ext.ground))
    ground_shift = float(np.abs(ext.ground.conj() @ t_s.matrix @ ext.ground)) ** 2
    rows = []
    ok = r < config.MAX_COUPLING_RATIO
    for name, v_mat, rate in (("drive", x_op.matrix, rabi),
                              ("verification", y_op, omega0)):
        budget = r * rate / ext.delta
        r1 = np.linalg.norm(s1 @ dmat @ s1, 2) / ext.delta
        rx = (np.linalg.norm(s1 @ (v_mat + dmat) @ s2, 2) / ext.delta) ** 2
        r2 = np.linalg.norm(s2 @ (v_mat + dmat) @ s2, 2) / ext.delta
        shift_ok = bool(ground_shift / ext.omega1 < r * rate)
        row = {
            "evolution": name,
            "R1": float(r1),
            "Rx": float(rx),
            "R2": float(r2),
            "budget": float(budget),
            "R1_ok": bool(r1 < budget),
            "Rx_ok": bool(rx < budget),
            "R2_ok": bool(r2 < 0.5),
            "ground_shift_ok": shift_ok,
        }
        ok = ok and row["R1_ok"] and row["Rx_ok"] and row["R2_ok"] and shift_ok
        rows.append(row)
    return ErrorBudgetReport(per_step=tuple(rows), all_within_budget=ok)


@dataclass(frozen=True)
class CostReport:
    total_time: float
    h_norm: float
    cost: float

    def to_dict(self) -> dict:
        return {"total_time": self.total_time, "h_norm": self.h_norm, "cost": self.cost}


def cost_report(schedule: CoolingSchedule, h_ref: Operator) -> CostReport:
    """T = sum of pulse times; cost = |H| * T for the given reference
    Hamiltonian (typically the largest simulated step Hamiltonian)."""
    t = schedule.total_time
    norm = operator_norm(h_ref)
    return CostReport(total_time=t, h_norm=norm, cost=norm * t)
