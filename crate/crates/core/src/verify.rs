//! Manufactured solutions, error norms, and convergence studies.

use crate::assembly1d::{Ipdg1Params, MultiplierSpace};
use crate::assembly3d::IpdgParams;
use crate::coupling::{assemble_coupled, solve_coupled, CoupledData};
use crate::geometry::Vec3;
use crate::linalg::{block_compose, cg_solve};
use crate::mesh3d::{GridIndex, Mesh3};
use crate::network1d::{
    build_edge_meshes, mms_network_graph, MeshSpec, VesselGraph,
};
use crate::spaces::{gauss_interval, DgSpace1, DgSpace3, QuadSet};
use crate::Result;

use std::f64::consts::PI;

/// Manufactured solution for the coupled box-and-axis problem:
/// a single vessel of radius R along the z-axis of the unit box centered
/// at the origin, with exchange coefficient xi.
///
/// The 1D solution is sin(pi z) + 2; the 3D solution matches its lateral
/// average on the section boundary and decays logarithmically outside.
#[derive(Debug, Clone, Copy)]
pub struct Mms3d1d {
    pub radius: f64,
    pub xi: f64,
}

impl Default for Mms3d1d {
    fn default() -> Self {
        Mms3d1d {
            radius: 0.05,
            xi: 1.0,
        }
    }
}

impl Mms3d1d {
    fn c(&self) -> f64 {
        self.xi / (self.xi + 1.0)
    }

    pub fn graph(&self) -> Result<VesselGraph> {
        VesselGraph::single_vessel(
            Vec3::new(0.0, 0.0, -0.5),
            Vec3::new(0.0, 0.0, 0.5),
            self.radius,
            self.xi,
        )
    }

    pub fn box_corners(&self) -> (Vec3, Vec3) {
        (Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.5, 0.5, 0.5))
    }

    /// 1D solution as a function of arclength s in [0, 1] (z = s - 1/2).
    pub fn u_hat(&self, s: f64) -> f64 {
        (PI * (s - 0.5)).sin() + 2.0
    }

    pub fn du_hat(&self, s: f64) -> f64 {
        PI * (PI * (s - 0.5)).cos()
    }

    fn radial(&self, r: f64) -> f64 {
        if r <= self.radius {
            1.0
        } else {
            1.0 - self.radius * (r / self.radius).ln()
        }
    }

    pub fn exact_u(&self, p: Vec3) -> f64 {
        let r = (p.x * p.x + p.y * p.y).sqrt();
        self.c() * self.radial(r) * self.u_hat(p.z + 0.5)
    }

    pub fn grad_u(&self, p: Vec3) -> Vec3 {
        let r = (p.x * p.x + p.y * p.y).sqrt();
        let s = p.z + 0.5;
        let dz = self.c() * self.radial(r) * self.du_hat(s);
        if r <= self.radius {
            Vec3::new(0.0, 0.0, dz)
        } else {
            // d/dr of the log profile is -R/r
            let dr = -self.c() * self.radius / r * self.u_hat(s);
            Vec3::new(dr * p.x / r, dr * p.y / r, dz)
        }
    }

    /// 3D source: the radial profile is harmonic in the plane, so only the
    /// axial second derivative survives.
    pub fn f3(&self, p: Vec3) -> f64 {
        let r = (p.x * p.x + p.y * p.y).sqrt();
        self.c() * self.radial(r) * PI * PI * (PI * p.z).sin()
    }

    /// 1D source: -u_hat'' plus the exchange with the lateral average,
    /// which equals c * u_hat on the section boundary.
    pub fn f1(&self, s: f64) -> f64 {
        let z = s - 0.5;
        let perimeter_over_area = 2.0 / self.radius;
        PI * PI * (PI * z).sin()
            + perimeter_over_area * self.xi * (1.0 - self.c()) * self.u_hat(s)
    }
}

/// Manufactured solution on the seven-edge, three-junction network. Unit
/// cross-sections, no exchange; piecewise solution with one oscillatory
/// trunk edge and linear branches, continuous with balanced fluxes at
/// every junction.
#[derive(Debug, Clone, Copy, Default)]
pub struct MmsNetwork;

impl MmsNetwork {
    pub fn graph(&self) -> VesselGraph {
        mms_network_graph()
    }

    /// Exact solution on edge `e` at arclength `s`.
    pub fn u_hat(&self, e: usize, s: f64) -> f64 {
        match e {
            0 => s + (2.0 * PI * s).cos(),
            1 | 2 => 2.0 + 0.5 * s,
            _ => 2.0 + 2.0f64.sqrt() / 2.0 + 0.25 * s,
        }
    }

    pub fn du_hat(&self, e: usize, s: f64) -> f64 {
        match e {
            0 => 1.0 - 2.0 * PI * (2.0 * PI * s).sin(),
            1 | 2 => 0.5,
            _ => 0.25,
        }
    }

    pub fn f1(&self, e: usize, s: f64) -> f64 {
        match e {
            0 => 4.0 * PI * PI * (2.0 * PI * s).cos(),
            _ => 0.0,
        }
    }

    /// Dirichlet datum at a boundary vertex: the exact trace there.
    pub fn g1(&self, graph: &VesselGraph, v: usize) -> f64 {
        let e = graph.adjacency[v][0];
        let s = if graph.edges[e].v_in == v {
            0.0
        } else {
            graph.edges[e].length
        };
        self.u_hat(e, s)
    }
}

/// L2 and broken H1-seminorm errors of a 3D DG field against an exact
/// solution, integrated with the elevated tet rule.
pub fn error_norms_3d<F, G>(
    space: &DgSpace3,
    quad: &QuadSet,
    coeffs: &[f64],
    exact: F,
    grad_exact: G,
) -> (f64, f64)
where
    F: Fn(Vec3) -> f64,
    G: Fn(Vec3) -> Vec3,
{
    let mesh = space.mesh;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let vol = mesh.cell_volumes[ci];
        let gh = space.eval_field_gradient(coeffs, ci);
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
            let uh: f64 = (0..4)
                .map(|l| coeffs[space.global_dof(ci, l)] * b[l])
                .sum();
            let du = uh - exact(p);
            l2 += w * vol * du * du;
            let dg = gh - grad_exact(p);
            h1 += w * vol * dg.dot(dg);
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// L2 and broken H1-seminorm errors of a 1D DG field (unweighted).
pub fn error_norms_1d<F, G>(space: &DgSpace1, coeffs: &[f64], exact: F, dexact: G) -> (f64, f64)
where
    F: Fn(usize, f64) -> f64,
    G: Fn(usize, f64) -> f64,
{
    let rule = gauss_interval(5).expect("fixed rule order");
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (ei, m) in space.meshes.iter().enumerate() {
        for iv in 0..m.n_cells {
            let s0 = m.h * iv as f64;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let s = s0 + m.h * x;
                let du = space.eval_local(coeffs, ei, iv, *x) - exact(ei, s);
                let dd = space.eval_local_deriv(coeffs, ei, iv, *x) - dexact(ei, s);
                l2 += w * m.h * du * du;
                h1 += w * m.h * dd * dd;
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// Network DG error norm: per-edge broken H1 with interior jump penalties
/// and weak-boundary penalties, plus junction mismatch terms against the
/// multipliers.
#[allow(clippy::too_many_arguments)]
pub fn dg_norm_network<F, G>(
    space: &DgSpace1,
    graph: &VesselGraph,
    mult: &MultiplierSpace,
    params: Ipdg1Params,
    u1: &[f64],
    um: &[f64],
    dirichlet_vertices: &[usize],
    exact: F,
    dexact: G,
) -> f64
where
    F: Fn(usize, f64) -> f64,
    G: Fn(usize, f64) -> f64,
{
    let rule = gauss_interval(5).expect("fixed rule order");
    let mut total = 0.0;
    for (ei, m) in space.meshes.iter().enumerate() {
        let a = graph.edges[ei].area;
        // broken gradient error
        for iv in 0..m.n_cells {
            let s0 = m.h * iv as f64;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let dd = space.eval_local_deriv(u1, ei, iv, *x) - dexact(ei, s0 + m.h * x);
                total += a * w * m.h * dd * dd;
            }
        }
        // interior node jumps (exact solution is continuous)
        for node in 1..m.n_cells {
            let jump =
                space.eval_local(u1, ei, node - 1, 1.0) - space.eval_local(u1, ei, node, 0.0);
            total += params.sigma / m.h * jump * jump;
        }
    }
    // weak Dirichlet ends
    for &v in dirichlet_vertices {
        let ei = graph.adjacency[v][0];
        let at_inflow = graph.edges[ei].v_in == v;
        let (val, _) = space.vertex_trace(u1, ei, at_inflow);
        let s = if at_inflow { 0.0 } else { graph.edges[ei].length };
        let e = val - exact(ei, s);
        total += params.sigma_v / space.meshes[ei].h * e * e;
    }
    // junction mismatch against the multiplier
    for (mi, &v) in mult.vertices.iter().enumerate() {
        for &ei in &graph.adjacency[v] {
            let at_inflow = graph.edges[ei].v_in == v;
            let (val, _) = space.vertex_trace(u1, ei, at_inflow);
            let d = val - um[mi];
            total += params.sigma / space.meshes[ei].h * d * d;
        }
    }
    total.sqrt()
}

/// Junction flux residual: max over junction vertices of
/// |sum_e u'_e(v) n_e(v)| (cross-sections not included).
pub fn flux_residual(space: &DgSpace1, graph: &VesselGraph, u1: &[f64]) -> f64 {
    let classes = graph.classify_vertices();
    let mut worst = 0.0f64;
    for &v in &classes.bifurcation {
        let mut sum = 0.0;
        for &ei in &graph.adjacency[v] {
            let sign = graph.orientation_sign(ei, v) as f64;
            let (_, der) = space.vertex_trace(u1, ei, sign > 0.0);
            sum += der * sign;
        }
        worst = worst.max(sum.abs());
    }
    worst
}

/// Penalized flux balance at every multiplier vertex:
/// sum_e [A_e u'_e(v) n_e(v) + (sigma_v/h_e)(u_e(v) - u~_v)]; zero by
/// construction of the multiplier equations up to solver tolerance.
pub fn conservation_residual(
    space: &DgSpace1,
    graph: &VesselGraph,
    mult: &MultiplierSpace,
    params: Ipdg1Params,
    u1: &[f64],
    um: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    for (mi, &v) in mult.vertices.iter().enumerate() {
        let mut balance = 0.0;
        for &ei in &graph.adjacency[v] {
            let sign = graph.orientation_sign(ei, v) as f64;
            let (val, der) = space.vertex_trace(u1, ei, sign > 0.0);
            balance += graph.edges[ei].area * der * sign
                + params.sigma_v / space.meshes[ei].h * (val - um[mi]);
        }
        worst = worst.max(balance.abs());
    }
    worst
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub h: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub labels: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Observed orders between consecutive rows: rates[i][k] compares rows
    /// i and i+1 in column k.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        self.rows
            .windows(2)
            .map(|w| {
                w[0].values
                    .iter()
                    .zip(&w[1].values)
                    .map(|(c, f)| (c / f).ln() / (w[0].h / w[1].h).ln())
                    .collect()
            })
            .collect()
    }
}

/// Configuration shared by the convergence studies.
#[derive(Debug, Clone, Copy)]
pub struct StudyConfig {
    pub params3: IpdgParams,
    pub params1: Ipdg1Params,
    pub circle_points: usize,
    pub degree1: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl StudyConfig {
    pub fn default_coupled() -> Result<StudyConfig> {
        Ok(StudyConfig {
            params3: IpdgParams::new(-1, 30.0)?,
            params1: Ipdg1Params::new(-1, 30.0, 10.0)?,
            circle_points: 16,
            degree1: 1,
            tol: 1e-10,
            max_iterations: 20_000,
        })
    }

    pub fn default_network() -> Result<StudyConfig> {
        Ok(StudyConfig {
            params3: IpdgParams::new(-1, 30.0)?,
            params1: Ipdg1Params::new(-1, 10.0, 10.0)?,
            circle_points: 16,
            degree1: 1,
            tol: 1e-12,
            max_iterations: 60_000,
        })
    }
}

/// Solve the coupled manufactured problem on one level (box split n per
/// axis, n intervals on the vessel) and return the four error norms.
pub fn mms3d1d_level(mms: &Mms3d1d, n: usize, cfg: &StudyConfig) -> Result<ConvergenceRow> {
    let (lo, hi) = mms.box_corners();
    let mesh = Mesh3::build_box(n, lo, hi)?;
    let space3 = DgSpace3::new(&mesh);
    let index = GridIndex::build(&mesh);
    let graph = mms.graph()?;
    let meshes = build_edge_meshes(&graph, MeshSpec::CellsPerEdge(n))?;
    let space1 = DgSpace1::new(meshes, cfg.degree1)?;
    let quad = QuadSet::new()?;

    let f3 = |p: Vec3| mms.f3(p);
    let g3 = |p: Vec3| mms.exact_u(p);
    let f1 = |_e: usize, s: f64| mms.f1(s);
    let g1 = |_v: usize| 0.0;
    let data = CoupledData {
        f3: &f3,
        g3: &g3,
        f1: &f1,
        dirichlet_vertices: &[],
        g1: &g1,
    };
    let sys = assemble_coupled(
        &space3,
        &index,
        &graph,
        &space1,
        cfg.params3,
        cfg.params1,
        cfg.circle_points,
        &quad,
        &data,
    )?;
    let (u, report) = solve_coupled(&sys, cfg.params3, cfg.params1, cfg.tol, cfg.max_iterations)?;
    let (l2_3, h1_3) = error_norms_3d(
        &space3,
        &quad,
        &u[..sys.n3],
        |p| mms.exact_u(p),
        |p| mms.grad_u(p),
    );
    let (l2_1, h1_1) = error_norms_1d(
        &space1,
        &u[sys.n3..sys.n3 + sys.n1],
        |_, s| mms.u_hat(s),
        |_, s| mms.du_hat(s),
    );
    Ok(ConvergenceRow {
        h: 1.0 / n as f64,
        values: vec![l2_3, h1_3, l2_1, h1_1],
        iterations: report.iterations,
    })
}

pub fn mms3d1d_study(mms: &Mms3d1d, levels: &[usize], cfg: &StudyConfig) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for &n in levels {
        rows.push(mms3d1d_level(mms, n, cfg)?);
    }
    Ok(ConvergenceTable {
        labels: vec![
            "l2_3d".into(),
            "h1_3d".into(),
            "l2_1d".into(),
            "h1_1d".into(),
        ],
        rows,
    })
}

/// Solve the network manufactured problem at one target mesh size; values
/// are the DG error norm and the junction flux residual.
pub fn network_level(mms: &MmsNetwork, target_h: f64, cfg: &StudyConfig) -> Result<ConvergenceRow> {
    let graph = mms.graph();
    let meshes = build_edge_meshes(&graph, MeshSpec::TargetH(target_h))?;
    let space1 = DgSpace1::new(meshes, cfg.degree1)?;
    let mult = MultiplierSpace::new(&graph);
    let p = cfg.params1;
    let n1 = space1.num_dofs();
    let total = n1 + mult.num_dofs();

    let a1 = crate::assembly1d::assemble_a_lambda(&space1, &graph, p);
    let bv = crate::assembly1d::assemble_b_v(&space1, &graph, &mult, p);
    let boundary = graph.classify_vertices().boundary;
    let (d1, rhs_d) =
        crate::assembly1d::vertex_dirichlet(&space1, &graph, p, &boundary, |v| mms.g1(&graph, v))?;
    let matrix = block_compose(
        total,
        total,
        &[(0, 0, &a1, 1.0), (0, 0, &bv, 1.0), (0, 0, &d1, 1.0)],
    )?;
    let load = crate::assembly1d::assemble_load_1d(&space1, &graph, |e, s| mms.f1(e, s));
    let mut rhs = vec![0.0; total];
    for i in 0..n1 {
        rhs[i] = load[i] + rhs_d[i];
    }
    let (u, report) = cg_solve(&matrix, &rhs, cfg.tol, cfg.max_iterations, true)?;
    let dg = dg_norm_network(
        &space1,
        &graph,
        &mult,
        p,
        &u[..n1],
        &u[n1..],
        &boundary,
        |e, s| mms.u_hat(e, s),
        |e, s| mms.du_hat(e, s),
    );
    let flux = flux_residual(&space1, &graph, &u[..n1]);
    // report h of the trunk edge (unit length, so h = L/ceil(L/target))
    Ok(ConvergenceRow {
        h: space1.meshes[0].h,
        values: vec![dg, flux],
        iterations: report.iterations,
    })
}

pub fn network_study(
    mms: &MmsNetwork,
    target_hs: &[f64],
    cfg: &StudyConfig,
) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for &h in target_hs {
        rows.push(network_level(mms, h, cfg)?);
    }
    Ok(ConvergenceTable {
        labels: vec!["dg_norm".into(), "flux_residual".into()],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mms3d1d_sources_match_finite_differences() {
        // Independent check of the closed-form sources: -laplacian(u) by
        // central differences away from the kink at r = R, and the 1D
        // source from the differential equation with the exact average.
        let mms = Mms3d1d::default();
        let h = 1e-4;
        for p in [
            Vec3::new(0.3, 0.1, 0.2),
            Vec3::new(-0.2, 0.25, -0.4),
            Vec3::new(0.01, 0.015, 0.1), // inside the section
            Vec3::new(0.0, 0.0, -0.3),
        ] {
            let mut lap = 0.0;
            for d in 0..3 {
                let mut dp = Vec3::default();
                match d {
                    0 => dp.x = h,
                    1 => dp.y = h,
                    _ => dp.z = h,
                }
                lap += (mms.exact_u(p + dp) - 2.0 * mms.exact_u(p) + mms.exact_u(p - dp))
                    / (h * h);
            }
            let err = (-lap - mms.f3(p)).abs();
            assert!(err < 1e-4, "at {p:?}: {err}");
        }
        // 1D: f1 = -u_hat'' + (P/A) xi (u_hat - average), average = c*u_hat
        for s in [0.1, 0.33, 0.5, 0.77] {
            let upp = (mms.u_hat(s + h) - 2.0 * mms.u_hat(s) + mms.u_hat(s - h)) / (h * h);
            let c = mms.xi / (mms.xi + 1.0);
            let exchange = 2.0 / mms.radius * mms.xi * (mms.u_hat(s) - c * mms.u_hat(s));
            let err = (-upp + exchange - mms.f1(s)).abs();
            assert!(err < 1e-4, "at {s}: {err}");
        }
        // gradient by finite differences
        for p in [Vec3::new(0.2, -0.15, 0.1), Vec3::new(0.02, 0.01, -0.2)] {
            let g = mms.grad_u(p);
            let gx = (mms.exact_u(p + Vec3::new(h, 0.0, 0.0))
                - mms.exact_u(p - Vec3::new(h, 0.0, 0.0)))
                / (2.0 * h);
            let gz = (mms.exact_u(p + Vec3::new(0.0, 0.0, h))
                - mms.exact_u(p - Vec3::new(0.0, 0.0, h)))
                / (2.0 * h);
            assert!((g.x - gx).abs() < 1e-6);
            assert!((g.z - gz).abs() < 1e-6);
        }
    }

    #[test]
    fn mms_network_continuous_and_flux_balanced() {
        let mms = MmsNetwork;
        let graph = mms.graph();
        // continuity at junctions: each adjacent edge trace agrees
        for v in [1usize, 2, 3] {
            let mut traces = Vec::new();
            for &ei in &graph.adjacency[v] {
                let s = if graph.edges[ei].v_in == v {
                    0.0
                } else {
                    graph.edges[ei].length
                };
                traces.push(mms.u_hat(ei, s));
            }
            for t in &traces {
                assert!((t - traces[0]).abs() < 1e-12, "vertex {v}: {traces:?}");
            }
        }
        // flux balance with the inflow-positive orientation signs
        for v in [1usize, 2, 3] {
            let mut sum = 0.0;
            for &ei in &graph.adjacency[v] {
                let sign = graph.orientation_sign(ei, v) as f64;
                let s = if sign > 0.0 { 0.0 } else { graph.edges[ei].length };
                sum += mms.du_hat(ei, s) * sign;
            }
            assert!(sum.abs() < 1e-12, "vertex {v}: {sum}");
        }
        // sources match -u'' by finite differences on each edge
        let h = 1e-5;
        for ei in 0..graph.edges.len() {
            for s in [0.2, 0.4 * graph.edges[ei].length] {
                let upp =
                    (mms.u_hat(ei, s + h) - 2.0 * mms.u_hat(ei, s) + mms.u_hat(ei, s - h))
                        / (h * h);
                assert!((-upp - mms.f1(ei, s)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn error_norms_exact_for_interpolated_affine() {
        let mms = Mms3d1d::default();
        let (lo, hi) = mms.box_corners();
        let mesh = Mesh3::build_box(2, lo, hi).unwrap();
        let space = DgSpace3::new(&mesh);
        let quad = QuadSet::new().unwrap();
        let u = space.interpolate(|p| 1.0 + p.x - p.z);
        let (l2, h1) = error_norms_3d(
            &space,
            &quad,
            &u,
            |p| 1.0 + p.x - p.z,
            |_| Vec3::new(1.0, 0.0, -1.0),
        );
        assert!(l2 < 1e-14);
        assert!(h1 < 1e-14);
    }

    #[test]
    fn network_level_solves_and_converges_fast() {
        let mms = MmsNetwork;
        let cfg = StudyConfig::default_network().unwrap();
        let table = network_study(&mms, &[0.25, 0.125, 0.0625], &cfg).unwrap();
        let rates = table.rates();
        // first-order in the DG norm and the flux residual
        let last = rates.last().unwrap();
        assert!((last[0] - 1.0).abs() < 0.2, "dg rate {}", last[0]);
        assert!((last[1] - 1.0).abs() < 0.35, "flux rate {}", last[1]);
    }

    #[test]
    fn network_conservation_identity_tight() {
        let mms = MmsNetwork;
        let cfg = StudyConfig::default_network().unwrap();
        let graph = mms.graph();
        let meshes = build_edge_meshes(&graph, MeshSpec::TargetH(0.125)).unwrap();
        let space1 = DgSpace1::new(meshes, 1).unwrap();
        let mult = MultiplierSpace::new(&graph);
        let p = cfg.params1;
        let n1 = space1.num_dofs();
        let total = n1 + mult.num_dofs();
        let a1 = crate::assembly1d::assemble_a_lambda(&space1, &graph, p);
        let bv = crate::assembly1d::assemble_b_v(&space1, &graph, &mult, p);
        let boundary = graph.classify_vertices().boundary;
        let (d1, rhs_d) = crate::assembly1d::vertex_dirichlet(&space1, &graph, p, &boundary, |v| {
            mms.g1(&graph, v)
        })
        .unwrap();
        let matrix = block_compose(
            total,
            total,
            &[(0, 0, &a1, 1.0), (0, 0, &bv, 1.0), (0, 0, &d1, 1.0)],
        )
        .unwrap();
        let load = crate::assembly1d::assemble_load_1d(&space1, &graph, |e, s| mms.f1(e, s));
        let mut rhs = vec![0.0; total];
        for i in 0..n1 {
            rhs[i] = load[i] + rhs_d[i];
        }
        let (u, _) = cg_solve(&matrix, &rhs, 1e-13, 60_000, true).unwrap();
        let res = conservation_residual(&space1, &graph, &mult, p, &u[..n1], &u[n1..]);
        assert!(res < 1e-8, "conservation residual {res}");
    }

    #[test]
    fn coupled_level_runs_small() {
        // smallest level sanity: errors are finite and the solve converges
        let mms = Mms3d1d::default();
        let cfg = StudyConfig::default_coupled().unwrap();
        let row = mms3d1d_level(&mms, 4, &cfg).unwrap();
        assert!(row.values.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(row.values[0] < 0.2, "3D L2 error {}", row.values[0]);
        assert!(row.values[2] < 0.2, "1D L2 error {}", row.values[2]);
    }

    #[test]
    fn rates_computed_from_synthetic_table() {
        let table = ConvergenceTable {
            labels: vec!["e".into()],
            rows: vec![
                ConvergenceRow {
                    h: 0.5,
                    values: vec![0.4],
                    iterations: 0,
                },
                ConvergenceRow {
                    h: 0.25,
                    values: vec![0.1],
                    iterations: 0,
                },
            ],
        };
        assert!((table.rates()[0][0] - 2.0).abs() < 1e-12);
    }
}
