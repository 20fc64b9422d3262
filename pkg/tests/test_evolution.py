import numpy as np
import pytest
import scipy.sparse as sp

from formheat.assembly import BlockField, CoefficientSet, build_pencil
from formheat.errors import SolveError
from formheat.evolution import (ThetaStepper, TimeSteppingConfig, evolve,
                                recover_interface_flux, theta_step)
from formheat.geometry import refine_uniform
from formheat.model_problems import (ManufacturedSolution, nodal_full_vector,
                                     standard_fixture_mesh, unit_square_mesh)


class ScalarPencil:
    """One-dof stand-in: relaxation zeta, stiffness a."""

    def __init__(self, zeta, a):
        self.T = sp.csr_matrix(np.array([[a]], dtype=float))
        self.J = sp.identity(1, format="csr")
        self.M_blk = sp.csr_matrix(np.array([[zeta]], dtype=float))
        self._mt = sp.csr_matrix(np.array([[zeta]], dtype=float))

    def mtilde(self):
        return self._mt

    def is_symmetric(self):
        return True


def test_scalar_implicit_euler():
    zeta, a, dt = 2.0, 3.0, 0.1
    pencil = ScalarPencil(zeta, a)
    cfg = TimeSteppingConfig(dt=dt, t_end=dt, theta=1.0, solver="direct")
    u1 = theta_step(pencil, np.array([1.0]), None, cfg)
    assert u1[0] == pytest.approx(1.0 / (1.0 + dt * a / zeta), rel=1e-14)


def test_scalar_trapezoidal():
    zeta, a, dt = 1.5, 2.0, 0.05
    pencil = ScalarPencil(zeta, a)
    cfg = TimeSteppingConfig(dt=dt, t_end=dt, theta=0.5, solver="direct")
    u1 = theta_step(pencil, np.array([1.0]), None, cfg)
    expected = (1.0 - 0.5 * dt * a / zeta) / (1.0 + 0.5 * dt * a / zeta)
    assert u1[0] == pytest.approx(expected, rel=1e-14)


def test_theta_range_enforced():
    with pytest.raises(ValueError):
        TimeSteppingConfig(dt=0.1, t_end=1.0, theta=0.3)
    with pytest.raises(ValueError):
        TimeSteppingConfig(dt=0.1, t_end=1.0, theta=1.2)
    with pytest.raises(ValueError):
        TimeSteppingConfig(dt=0.3, t_end=1.0).n_steps  # not a multiple


def test_constant_state_is_equilibrium(conserving_pencil_8):
    pencil = conserving_pencil_8
    cfg = TimeSteppingConfig(dt=0.02, t_end=0.2, theta=1.0)
    u0 = BlockField.from_functions(pencil.mesh, pencil.dofmap, 1.0, 1.0, 1.0)
    report = evolve(pencil, u0, None, cfg)
    assert np.abs(report.final.bulk - 1.0).max() <= 1e-12
    assert np.ptp(report.mass) <= 1e-12 * abs(report.mass[0])
    assert np.ptp(report.energy) <= 1e-11 * abs(report.energy[0])
    assert np.ptp(report.supnorm) <= 1e-12


def test_energy_monotone_backward_euler(conserving_pencil_8):
    pencil = conserving_pencil_8
    rng = np.random.default_rng(4)
    raw = BlockField(rng.uniform(0, 1, pencil.dofmap.n_free),
                     rng.uniform(0, 1, pencil.dofmap.n_gd),
                     rng.uniform(0, 1, pencil.dofmap.n_sigma))
    cfg = TimeSteppingConfig(dt=0.01, t_end=0.5, theta=1.0, solver="direct")
    report = evolve(pencil, raw, None, cfg)
    energies = np.sqrt(report.energy)
    assert np.all(np.diff(energies) <= 1e-12)


def test_forcing_sampled_at_intermediate_level():
    # du/dt = f(t) on one dof: theta sampling reproduces the midpoint rule
    pencil = ScalarPencil(1.0, 0.0)
    cfg = TimeSteppingConfig(dt=0.2, t_end=1.0, theta=0.5, solver="direct")
    forcing = lambda t: BlockField(np.array([np.cos(t)]), np.zeros(0),
                                   np.zeros(0))
    stepper = ThetaStepper(pencil, cfg)
    u = np.array([0.0])
    for n in range(cfg.n_steps):
        u, _ = stepper.step(u, forcing((n + cfg.theta) * cfg.dt))
    midpoint = sum(np.cos((n + 0.5) * cfg.dt) * cfg.dt for n in range(5))
    assert u[0] == pytest.approx(midpoint, rel=1e-13)


def test_time_order_theta_one_and_half():
    mesh = standard_fixture_mesh(8)
    pencil = build_pencil(mesh, CoefficientSet())
    ms = ManufacturedSolution()
    t_end = 0.4

    def run(theta, dt):
        cfg = TimeSteppingConfig(dt=dt, t_end=t_end, theta=theta,
                                 solver="direct")
        return evolve(pencil, ms.initial(pencil), ms.forcing(pencil),
                      cfg).final_vector

    ref = run(0.5, t_end / 512)
    mt = pencil.mtilde()

    for theta, expected_rate, window in ((1.0, 1.0, 0.25),
                                         (0.5, 2.0, 0.35)):
        errs = []
        for n in (8, 16, 32):
            diff = run(theta, t_end / n) - ref
            errs.append(np.sqrt(diff @ (mt @ diff)))
        rates = [np.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]
        for rate in rates:
            assert abs(rate - expected_rate) <= window, (theta, rates)


def test_flux_recovery_tent():
    mesh = unit_square_mesh(8, bottom="dirichlet", top="dirichlet",
                            interface_y=0.5)
    pencil = build_pencil(mesh, CoefficientSet())
    verts = mesh.vertices[pencil.dofmap.free_vertices]
    u = np.minimum(verts[:, 1], 1.0 - verts[:, 1])
    jump = recover_interface_flux(pencil, mesh, u)
    assert np.abs(np.abs(jump) - 2.0).max() <= 1e-10


def test_flux_recovery_zero_state(std_pencil_8):
    pencil = std_pencil_8
    jump = recover_interface_flux(pencil, pencil.mesh,
                                  np.zeros(pencil.n_free))
    assert np.abs(jump).max() == 0.0


def test_flux_recovery_smooth_refinement():
    # globally smooth profile: recovered jump is consistency error, O(h)
    ms = ManufacturedSolution()
    t = 0.0
    maxima = []
    for n in (8, 16, 32):
        mesh = standard_fixture_mesh(n)
        pencil = build_pencil(mesh, CoefficientSet())
        verts = mesh.vertices[pencil.dofmap.free_vertices]
        u = ms.u(verts, t)
        # quasi-steady right-hand side: f_bulk - du/dt = -div grad u,
        # and du/dt = -u for this profile
        f = BlockField.from_functions(
            mesh, pencil.dofmap, f_bulk=lambda p: ms.f_bulk(p, t) + ms.u(p, t))
        interior = np.abs(recover_interface_flux(pencil, mesh, u, f))
        maxima.append(interior.max())
    assert maxima[1] <= 0.7 * maxima[0]
    assert maxima[2] <= 0.7 * maxima[1]


def test_empty_interface_gives_empty_flux():
    mesh = unit_square_mesh(4)
    pencil = build_pencil(mesh, CoefficientSet())
    jump = recover_interface_flux(pencil, mesh, np.zeros(pencil.n_free))
    assert jump.size == 0


def test_solver_failure_carries_residual(conserving_pencil_8):
    pencil = conserving_pencil_8
    cfg = TimeSteppingConfig(dt=1e6, t_end=2e6, theta=1.0, solver="cg",
                             solver_tol=1e-300)
    rng = np.random.default_rng(0)
    raw = BlockField(rng.uniform(0, 1, pencil.dofmap.n_free),
                     rng.uniform(0, 1, pencil.dofmap.n_gd),
                     rng.uniform(0, 1, pencil.dofmap.n_sigma))
    with pytest.raises(SolveError):
        evolve(pencil, raw, None, cfg)


def test_monitor_toggles(conserving_pencil_8):
    pencil = conserving_pencil_8
    cfg = TimeSteppingConfig(dt=0.05, t_end=0.1, theta=1.0,
                             monitor_mass=False, monitor_supnorm=False)
    u0 = BlockField.from_functions(pencil.mesh, pencil.dofmap, 1.0, 1.0, 1.0)
    report = evolve(pencil, u0, None, cfg)
    assert np.all(np.isnan(report.mass))
    assert np.all(np.isnan(report.supnorm))
    assert np.all(np.isfinite(report.energy))
    assert np.all(np.isfinite(report.minval))


def test_snapshots_collected(conserving_pencil_8):
    pencil = conserving_pencil_8
    cfg = TimeSteppingConfig(dt=0.05, t_end=0.2, theta=1.0,
                             snapshot_times=(0.1, 0.2))
    u0 = BlockField.from_functions(pencil.mesh, pencil.dofmap, 1.0, 1.0, 1.0)
    report = evolve(pencil, u0, None, cfg)
    assert [t for t, _ in report.snapshots] == [0.1, 0.2]
