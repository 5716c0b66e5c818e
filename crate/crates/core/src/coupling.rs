//! Lateral coupling between the 3D field and the vessel network: the
//! cross-section boundary average operator and the exchange bilinear form.

use crate::linalg::{CooBuilder, SparseMatrix};
use crate::mesh3d::{locate_point, GridIndex, Mesh3};
use crate::network1d::{circle_points, VesselGraph};
use crate::spaces::{gauss_interval, DgSpace1, DgSpace3};
use crate::{Error, Result};

pub const DEFAULT_CIRCLE_POINTS: usize = 16;

/// Boundary average of the 3D field along each vessel, sampled at the 1D
/// quadrature points. `matrix` maps 3D DOFs to averages at those points;
/// the per-point metadata drives the exchange form.
#[derive(Debug, Clone)]
pub struct AverageOperator {
    pub matrix: SparseMatrix,
    pub qp_edge: Vec<usize>,
    pub qp_interval: Vec<usize>,
    /// Reference coordinate of the point inside its interval.
    pub qp_xref: Vec<f64>,
    /// Arclength along the edge.
    pub qp_s: Vec<f64>,
    /// Exchange quadrature weight xi_e * P_e * h_e * w_q.
    pub qp_weight: Vec<f64>,
}

fn build_with_locator<L>(
    space3: &DgSpace3,
    graph: &VesselGraph,
    space1: &DgSpace1,
    circle_m: usize,
    locate: L,
) -> Result<AverageOperator>
where
    L: Fn(&Mesh3, crate::geometry::Vec3) -> Result<crate::mesh3d::PointLocation>,
{
    let mesh = space3.mesh;
    let rule = gauss_interval(3).expect("fixed rule order");
    let n_qp: usize = space1.meshes.iter().map(|m| m.n_cells * rule.points.len()).sum();
    let mut coo = CooBuilder::new(n_qp, space3.num_dofs());
    let mut qp_edge = Vec::with_capacity(n_qp);
    let mut qp_interval = Vec::with_capacity(n_qp);
    let mut qp_xref = Vec::with_capacity(n_qp);
    let mut qp_s = Vec::with_capacity(n_qp);
    let mut qp_weight = Vec::with_capacity(n_qp);
    let mut row = 0;
    for (ei, m) in space1.meshes.iter().enumerate() {
        let e = &graph.edges[ei];
        let frame = graph.frame(ei);
        for iv in 0..m.n_cells {
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let s = m.h * (iv as f64 + x);
                let center = graph.point_at(ei, s);
                let circle = circle_points(&frame, center, e.radius, circle_m)?;
                for (p, _) in &circle {
                    let loc = locate(mesh, *p).map_err(|err| match err {
                        Error::OutOfDomain(x, y, z) => Error::Geometry(format!(
                            "vessel edge {ei} at arclength {s:.6}: section point \
                             ({x:.6}, {y:.6}, {z:.6}) lies outside the 3D domain"
                        )),
                        other => other,
                    })?;
                    for (local, b) in loc.bary.iter().enumerate() {
                        coo.push(
                            row,
                            space3.global_dof(loc.cell, local),
                            b / circle_m as f64,
                        );
                    }
                }
                qp_edge.push(ei);
                qp_interval.push(iv);
                qp_xref.push(*x);
                qp_s.push(s);
                qp_weight.push(e.xi * e.perimeter * m.h * w);
                row += 1;
            }
        }
    }
    Ok(AverageOperator {
        matrix: coo.build(),
        qp_edge,
        qp_interval,
        qp_xref,
        qp_s,
        qp_weight,
    })
}

/// Build the average operator using the grid-accelerated point locator.
pub fn build_average_operator(
    space3: &DgSpace3,
    index: &GridIndex,
    graph: &VesselGraph,
    space1: &DgSpace1,
    circle_m: usize,
) -> Result<AverageOperator> {
    build_with_locator(space3, graph, space1, circle_m, |mesh, p| {
        locate_point(mesh, p, index)
    })
}

/// Reference build using the exhaustive cell scan; same result, slower.
pub fn build_average_operator_scan(
    space3: &DgSpace3,
    graph: &VesselGraph,
    space1: &DgSpace1,
    circle_m: usize,
) -> Result<AverageOperator> {
    build_with_locator(space3, graph, space1, circle_m, |mesh, p| {
        mesh.locate_point_scan(p)
    })
}

/// The four blocks of the exchange form
/// sum_e int xi P (u_bar - u_hat)(v_bar - v_hat) ds
/// over [3D dofs] x [1D dofs].
#[derive(Debug, Clone)]
pub struct CouplingBlocks {
    pub omega_omega: SparseMatrix,
    pub omega_lambda: SparseMatrix,
    pub lambda_omega: SparseMatrix,
    pub lambda_lambda: SparseMatrix,
}

pub fn assemble_coupling(
    avg: &AverageOperator,
    space3: &DgSpace3,
    space1: &DgSpace1,
) -> CouplingBlocks {
    let n3 = space3.num_dofs();
    let n1 = space1.num_dofs();
    let mut oo = CooBuilder::new(n3, n3);
    let mut ol = CooBuilder::new(n3, n1);
    let mut lo = CooBuilder::new(n1, n3);
    let mut ll = CooBuilder::new(n1, n1);
    let p1 = space1.dofs_per_cell();
    for q in 0..avg.qp_edge.len() {
        let w = avg.qp_weight[q];
        if w == 0.0 {
            continue;
        }
        let row3 = avg.matrix.row(q);
        let basis1 = space1.ref_basis(avg.qp_xref[q]);
        let dofs1: Vec<usize> = (0..p1)
            .map(|l| space1.global_dof(avg.qp_edge[q], avg.qp_interval[q], l))
            .collect();
        for (&ci, &vi) in row3.0.iter().zip(row3.1) {
            for (&cj, &vj) in row3.0.iter().zip(row3.1) {
                oo.push(ci, cj, w * vi * vj);
            }
            for l in 0..p1 {
                ol.push(ci, dofs1[l], -w * vi * basis1[l]);
                lo.push(dofs1[l], ci, -w * vi * basis1[l]);
            }
        }
        for i in 0..p1 {
            for j in 0..p1 {
                ll.push(dofs1[i], dofs1[j], w * basis1[i] * basis1[j]);
            }
        }
    }
    CouplingBlocks {
        omega_omega: oo.build(),
        omega_lambda: ol.build(),
        lambda_omega: lo.build(),
        lambda_lambda: ll.build(),
    }
}

/// Assembled coupled system with block layout [3D dofs | 1D dofs |
/// junction multipliers].
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub n3: usize,
    pub n1: usize,
    pub mult: crate::assembly1d::MultiplierSpace,
}

/// Problem data for the steady coupled solve.
pub struct CoupledData<'a> {
    pub f3: &'a dyn Fn(crate::geometry::Vec3) -> f64,
    /// Dirichlet datum on the 3D box boundary.
    pub g3: &'a dyn Fn(crate::geometry::Vec3) -> f64,
    pub f1: &'a dyn Fn(usize, f64) -> f64,
    /// Graph vertices with Dirichlet data (must be boundary vertices);
    /// the rest are natural.
    pub dirichlet_vertices: &'a [usize],
    pub g1: &'a dyn Fn(usize) -> f64,
}

pub fn assemble_coupled(
    space3: &DgSpace3,
    index: &GridIndex,
    graph: &VesselGraph,
    space1: &DgSpace1,
    params3: crate::assembly3d::IpdgParams,
    params1: crate::assembly1d::Ipdg1Params,
    circle_m: usize,
    quad: &crate::spaces::QuadSet,
    data: &CoupledData,
) -> Result<CoupledSystem> {
    use crate::assembly1d::{
        assemble_a_lambda, assemble_b_v, assemble_load_1d, vertex_dirichlet, MultiplierSpace,
    };
    use crate::assembly3d::{assemble_a_h, assemble_load_3d, dirichlet_rhs};
    use crate::linalg::block_compose;

    let mult = MultiplierSpace::new(graph);
    let n3 = space3.num_dofs();
    let n1 = space1.num_dofs();
    let total = n3 + n1 + mult.num_dofs();

    let a3 = assemble_a_h(space3, params3, quad);
    let a1 = assemble_a_lambda(space1, graph, params1);
    let bv = assemble_b_v(space1, graph, &mult, params1);
    let (d1, rhs1d) = vertex_dirichlet(space1, graph, params1, data.dirichlet_vertices, data.g1)?;
    let avg = build_average_operator(space3, index, graph, space1, circle_m)?;
    let c = assemble_coupling(&avg, space3, space1);

    let matrix = block_compose(
        total,
        total,
        &[
            (0, 0, &a3, 1.0),
            (0, 0, &c.omega_omega, 1.0),
            (0, n3, &c.omega_lambda, 1.0),
            (n3, 0, &c.lambda_omega, 1.0),
            (n3, n3, &c.lambda_lambda, 1.0),
            (n3, n3, &a1, 1.0),
            (n3, n3, &bv, 1.0),
            (n3, n3, &d1, 1.0),
        ],
    )?;

    let mut rhs = vec![0.0; total];
    let load3 = assemble_load_3d(space3, quad, data.f3);
    let bdry3 = dirichlet_rhs(space3, params3, quad, data.g3);
    for i in 0..n3 {
        rhs[i] = load3[i] + bdry3[i];
    }
    let load1 = assemble_load_1d(space1, graph, data.f1);
    for i in 0..n1 {
        rhs[n3 + i] = load1[i] + rhs1d[i];
    }
    Ok(CoupledSystem {
        matrix,
        rhs,
        n3,
        n1,
        mult,
    })
}

/// Solve the coupled system with preconditioned CG. Only the symmetric
/// variant (both epsilons -1) yields a symmetric matrix; anything else is
/// rejected.
pub fn solve_coupled(
    sys: &CoupledSystem,
    params3: crate::assembly3d::IpdgParams,
    params1: crate::assembly1d::Ipdg1Params,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, crate::linalg::SolverReport)> {
    if params3.epsilon != -1 || params1.epsilon != -1 {
        return Err(Error::NonsymmetricVariant);
    }
    crate::linalg::cg_solve(&sys.matrix, &sys.rhs, tol, max_iterations, true)
}
