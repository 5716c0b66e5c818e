//! Backward Euler time stepping for the coupled parabolic problem, with
//! L2 initial projection and a temporal convergence study.

use crate::assembly1d::assemble_mass_1d;
use crate::assembly3d::assemble_mass_3d;
use crate::coupling::CoupledSystem;
use crate::linalg::{block_compose, cg_solve, SolverReport, SparseMatrix};
use crate::network1d::VesselGraph;
use crate::spaces::{gauss_interval, DgSpace1, DgSpace3, QuadSet};
use crate::{Error, Result};

/// Solve a small dense SPD system in place (Gaussian elimination with
/// partial pivoting); used for the local projection blocks.
fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * b[j];
        }
        b[i] = s / a[i][i];
    }
}

/// Elementwise L2 projection of a 3D function onto the broken P1 space.
pub fn l2_project_3d<F: Fn(crate::geometry::Vec3) -> f64>(
    space: &DgSpace3,
    quad: &QuadSet,
    f: F,
) -> Vec<f64> {
    let mesh = space.mesh;
    let mut coeffs = vec![0.0; space.num_dofs()];
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let vol = mesh.cell_volumes[ci];
        let mut mass = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                mass[i][j] = if i == j { vol / 10.0 } else { vol / 20.0 };
            }
        }
        let mut rhs = [0.0; 4];
        for (b, w) in quad
            .tet_elevated
            .points
            .iter()
            .zip(&quad.tet_elevated.weights)
        {
            let p = mesh.vertices[cell[0]] * b[0]
                + mesh.vertices[cell[1]] * b[1]
                + mesh.vertices[cell[2]] * b[2]
                + mesh.vertices[cell[3]] * b[3];
            let fv = f(p) * w * vol;
            for l in 0..4 {
                rhs[l] += fv * b[l];
            }
        }
        solve_small(&mut mass, &mut rhs);
        for l in 0..4 {
            coeffs[space.global_dof(ci, l)] = rhs[l];
        }
    }
    coeffs
}

/// Elementwise L2 projection onto the broken 1D space. The cross-section
/// weight is constant per interval, so it cancels and the projection is
/// the unweighted one.
pub fn l2_project_1d<F: Fn(usize, f64) -> f64>(space: &DgSpace1, f: F) -> Vec<f64> {
    let rule = gauss_interval(5).expect("fixed rule order");
    let p1 = space.dofs_per_cell();
    let mut coeffs = vec![0.0; space.num_dofs()];
    for (ei, m) in space.meshes.iter().enumerate() {
        for iv in 0..m.n_cells {
            let mut mass = vec![vec![0.0; p1]; p1];
            let mut rhs = vec![0.0; p1];
            let s0 = m.h * iv as f64;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let basis = space.ref_basis(*x);
                let fv = f(ei, s0 + m.h * x) * w;
                for i in 0..p1 {
                    rhs[i] += fv * basis[i];
                    for j in 0..p1 {
                        mass[i][j] += w * basis[i] * basis[j];
                    }
                }
            }
            solve_small(&mut mass, &mut rhs);
            for l in 0..p1 {
                coeffs[space.global_dof(ei, iv, l)] = rhs[l];
            }
        }
    }
    coeffs
}

/// Block mass matrix over [3D | 1D | multipliers]: broken P1 mass, the
/// A-weighted 1D mass, and no mass for the multipliers.
pub fn compose_mass(
    space3: &DgSpace3,
    space1: &DgSpace1,
    graph: &VesselGraph,
    n_mult: usize,
) -> Result<SparseMatrix> {
    let m3 = assemble_mass_3d(space3);
    let m1 = assemble_mass_1d(space1, graph);
    let n3 = space3.num_dofs();
    let total = n3 + space1.num_dofs() + n_mult;
    block_compose(total, total, &[(0, 0, &m3, 1.0), (n3, n3, &m1, 1.0)])
}

/// Backward Euler integrator over a fixed coupled stiffness operator. The
/// composed matrix M/tau + K is assembled once and reused every step.
pub struct BackwardEuler {
    pub system: SparseMatrix,
    pub mass: SparseMatrix,
    pub tau: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl BackwardEuler {
    pub fn new(
        stiffness: &SparseMatrix,
        mass: SparseMatrix,
        tau: f64,
        tol: f64,
        max_iterations: usize,
    ) -> Result<BackwardEuler> {
        if tau <= 0.0 {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        let n = stiffness.nrows;
        let system = block_compose(n, n, &[(0, 0, stiffness, 1.0), (0, 0, &mass, 1.0 / tau)])?;
        Ok(BackwardEuler {
            system,
            mass,
            tau,
            tol,
            max_iterations,
        })
    }

    /// Advance one step: solve (M/tau + K) u = M u_prev / tau + rhs(t_new).
    pub fn step(&self, u_prev: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, SolverReport)> {
        let mut b = self.mass.spmv(u_prev);
        for (bi, ri) in b.iter_mut().zip(rhs) {
            *bi = *bi / self.tau + ri;
        }
        cg_solve(&self.system, &b, self.tol, self.max_iterations, true)
    }

    /// Squared M-norm (discrete L2 energy; multipliers carry no mass).
    pub fn energy(&self, u: &[f64]) -> f64 {
        let mu = self.mass.spmv(u);
        u.iter().zip(&mu).map(|(a, b)| a * b).sum()
    }
}

/// Temporal convergence data for the decaying manufactured solution: the
/// steady coupled solution modulated by exp(-t).
pub struct HeatStudy {
    pub taus: Vec<f64>,
    /// M-norm differences at the final time against the reference run.
    pub errors: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Run the decaying-solution study on one mesh level. All runs share the
/// spatial discretization; errors are measured against a reference run
/// with step `tau_ref`, which isolates the temporal discretization error.
pub fn heat_temporal_study(
    sys: &CoupledSystem,
    mass: &SparseMatrix,
    rhs0: &[f64],
    u0: &[f64],
    t_end: f64,
    taus: &[f64],
    tau_ref: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<HeatStudy> {
    let run = |tau: f64| -> Result<Vec<f64>> {
        let stepper = BackwardEuler::new(&sys.matrix, mass.clone(), tau, tol, max_iterations)?;
        let n_steps = (t_end / tau).round() as usize;
        let mut u = u0.to_vec();
        for k in 1..=n_steps {
            let t = tau * k as f64;
            let scale = (-t).exp();
            let rhs: Vec<f64> = rhs0.iter().map(|r| r * scale).collect();
            let (next, _) = stepper.step(&u, &rhs)?;
            u = next;
        }
        Ok(u)
    };
    let reference = run(tau_ref)?;
    let stepper = BackwardEuler::new(&sys.matrix, mass.clone(), 1.0, tol, max_iterations)?;
    let mut errors = Vec::new();
    for &tau in taus {
        let u = run(tau)?;
        let diff: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
        errors.push(stepper.energy(&diff).sqrt());
    }
    let rates = errors
        .windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        .collect();
    Ok(HeatStudy {
        taus: taus.to_vec(),
        errors,
        rates,
    })
}

/// Time-dependent sources for the decaying manufactured pair: with the
/// steady solution pair (u_s, u_hat_s) and u(t) = exp(-t) u_s, the sources
/// are exp(-t) (f_s - u_s) and the boundary data scales by exp(-t). This
/// builds the t = 0 right-hand side; each step scales it by exp(-t_n).
pub fn decaying_rhs(
    sys: &CoupledSystem,
    space3: &DgSpace3,
    space1: &DgSpace1,
    graph: &VesselGraph,
    quad: &QuadSet,
    steady_rhs: &[f64],
    u_steady_exact: impl Fn(crate::geometry::Vec3) -> f64,
    u_hat_steady_exact: impl Fn(usize, f64) -> f64,
) -> Vec<f64> {
    let load_u = crate::assembly3d::assemble_load_3d(space3, quad, u_steady_exact);
    let load_uhat = crate::assembly1d::assemble_load_1d(space1, graph, u_hat_steady_exact);
    let mut rhs = steady_rhs.to_vec();
    for i in 0..sys.n3 {
        rhs[i] -= load_u[i];
    }
    for i in 0..sys.n1 {
        rhs[sys.n3 + i] -= load_uhat[i];
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::mesh3d::Mesh3;

    fn small_setup() -> (Mesh3, QuadSet) {
        let mesh = Mesh3::build_box(
            2,
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
        )
        .unwrap();
        (mesh, QuadSet::new().unwrap())
    }

    #[test]
    fn projection_of_affine_is_interpolant() {
        let (mesh, quad) = small_setup();
        let space = DgSpace3::new(&mesh);
        let f = |p: Vec3| 0.5 - p.x + 2.0 * p.y + p.z;
        let proj = l2_project_3d(&space, &quad, f);
        let interp = space.interpolate(f);
        for (a, b) in proj.iter().zip(&interp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_1d_reproduces_polynomials() {
        let graph = crate::network1d::VesselGraph::single_vessel(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.1,
            1.0,
        )
        .unwrap();
        let meshes =
            crate::network1d::build_edge_meshes(&graph, crate::network1d::MeshSpec::CellsPerEdge(3))
                .unwrap();
        let space = DgSpace1::new(meshes, 1).unwrap();
        let proj = l2_project_1d(&space, |_, s| 2.0 * s - 1.0);
        let interp = space.interpolate(|_, s| 2.0 * s - 1.0);
        for (a, b) in proj.iter().zip(&interp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_error_decays_second_order() {
        let quad = QuadSet::new().unwrap();
        let mut errs = Vec::new();
        for n in [2usize, 4] {
            let mesh = Mesh3::build_box(
                n,
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 1.0),
            )
            .unwrap();
            let space = DgSpace3::new(&mesh);
            let f = |p: Vec3| (std::f64::consts::PI * p.z).sin();
            let proj = l2_project_3d(&space, &quad, f);
            let (l2, _) = crate::verify::error_norms_3d(&space, &quad, &proj, f, |p| {
                Vec3::new(
                    0.0,
                    0.0,
                    std::f64::consts::PI * (std::f64::consts::PI * p.z).cos(),
                )
            });
            errs.push(l2);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.8, "rate {rate}");
    }

    #[test]
    fn stationary_solution_is_fixed_point() {
        // K u* = F; stepping from u* with constant rhs F stays at u*.
        let (mesh, quad) = small_setup();
        let space = DgSpace3::new(&mesh);
        let params = crate::assembly3d::IpdgParams::new(-1, 30.0).unwrap();
        let k = crate::assembly3d::assemble_a_h(&space, params, &quad);
        let g = |p: Vec3| 1.0 + p.x;
        let rhs = crate::assembly3d::dirichlet_rhs(&space, params, &quad, g);
        let (u_star, _) = cg_solve(&k, &rhs, 1e-13, 2000, true).unwrap();
        let mass = assemble_mass_3d(&space);
        let stepper = BackwardEuler::new(&k, mass, 0.05, 1e-13, 5000).unwrap();
        let (u1, _) = stepper.step(&u_star, &rhs).unwrap();
        let drift: f64 = u1
            .iter()
            .zip(&u_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(drift < 1e-9, "drift {drift}");
    }

    #[test]
    fn zero_forcing_energy_decays_monotonically() {
        let (mesh, quad) = small_setup();
        let space = DgSpace3::new(&mesh);
        let params = crate::assembly3d::IpdgParams::new(-1, 30.0).unwrap();
        let k = crate::assembly3d::assemble_a_h(&space, params, &quad);
        let mass = assemble_mass_3d(&space);
        let stepper = BackwardEuler::new(&k, mass, 0.1, 1e-12, 5000).unwrap();
        let mut u = l2_project_3d(&space, &quad, |p| {
            (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
        });
        let zero = vec![0.0; u.len()];
        let mut prev = stepper.energy(&u);
        for _ in 0..10 {
            let (next, _) = stepper.step(&u, &zero).unwrap();
            u = next;
            let e = stepper.energy(&u);
            assert!(e <= prev + 1e-14, "energy increased: {e} > {prev}");
            prev = e;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn small_solver_rejects_bad_tau() {
        let (mesh, quad) = small_setup();
        let space = DgSpace3::new(&mesh);
        let params = crate::assembly3d::IpdgParams::new(-1, 30.0).unwrap();
        let k = crate::assembly3d::assemble_a_h(&space, params, &quad);
        let mass = assemble_mass_3d(&space);
        assert!(BackwardEuler::new(&k, mass, 0.0, 1e-10, 100).is_err());
    }
}
