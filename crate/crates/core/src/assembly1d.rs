//! Assembly of the 1D weighted interior-penalty form on vessel networks:
//! per-edge broken stiffness, vertex coupling through one multiplier per
//! junction, mass and load, and weak vertex Dirichlet data.

use crate::linalg::{CooBuilder, SparseMatrix};
use crate::network1d::VesselGraph;
use crate::spaces::{gauss_interval, DgSpace1};
use crate::{Error, Result};

/// 1D interior-penalty parameters: epsilon for the interior-node adjoint
/// term, sigma for interior-node jump penalties (scaled by 1/h), sigma_v
/// for vertex penalties (scaled by 1/h of the adjacent edge mesh).
#[derive(Debug, Clone, Copy)]
pub struct Ipdg1Params {
    pub epsilon: i32,
    pub sigma: f64,
    pub sigma_v: f64,
}

impl Ipdg1Params {
    pub fn new(epsilon: i32, sigma: f64, sigma_v: f64) -> Result<Ipdg1Params> {
        if !(-1..=1).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be -1, 0, or +1, got {epsilon}"
            )));
        }
        if sigma <= 0.0 || sigma_v <= 0.0 {
            return Err(Error::InvalidArgument(
                "1D penalties must be positive".into(),
            ));
        }
        Ok(Ipdg1Params {
            epsilon,
            sigma,
            sigma_v,
        })
    }

    /// Heuristic coercivity check: the vertex penalty should dominate the
    /// largest cross-section.
    pub fn coercivity_warnings(&self, graph: &VesselGraph) -> Vec<String> {
        let max_a = graph.edges.iter().fold(0.0f64, |m, e| m.max(e.area));
        let floor = 4.0 * max_a;
        if self.epsilon != 1 && self.sigma_v < floor {
            vec![format!(
                "vertex penalty {} below 4*max(A_e) = {floor}; junction coupling may lose coercivity",
                self.sigma_v
            )]
        } else {
            Vec::new()
        }
    }
}

/// One Lagrange-multiplier DOF per junction or pass-through vertex.
/// Boundary vertices carry no multiplier (their data enters weakly or
/// naturally).
#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    /// Graph vertex id of each multiplier, ascending.
    pub vertices: Vec<usize>,
    /// Graph vertex -> multiplier index.
    pub index: Vec<Option<usize>>,
}

impl MultiplierSpace {
    pub fn new(graph: &VesselGraph) -> MultiplierSpace {
        let mut vertices = Vec::new();
        let mut index = vec![None; graph.vertices.len()];
        for (v, adj) in graph.adjacency.iter().enumerate() {
            if adj.len() >= 2 {
                index[v] = Some(vertices.len());
                vertices.push(v);
            }
        }
        MultiplierSpace { vertices, index }
    }

    pub fn num_dofs(&self) -> usize {
        self.vertices.len()
    }
}

/// Trace data of one edge at a graph vertex: global dofs of the end
/// interval with basis values and physical one-sided derivatives there.
struct EdgeTrace {
    gdofs: Vec<usize>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// Mesh size of the edge's interval mesh (vertex penalty scale).
    h: f64,
    area: f64,
    /// Orientation sign: +1 at the inflow end, -1 at the outflow end.
    sign: f64,
}

fn edge_trace(space: &DgSpace1, graph: &VesselGraph, edge: usize, vertex: usize) -> EdgeTrace {
    let m = &space.meshes[edge];
    let sign = graph.orientation_sign(edge, vertex) as f64;
    let (interval, x) = if sign > 0.0 { (0, 0.0) } else { (m.n_cells - 1, 1.0) };
    let values = space.ref_basis(x);
    let derivs: Vec<f64> = space.ref_basis_deriv(x).iter().map(|d| d / m.h).collect();
    let gdofs = (0..space.dofs_per_cell())
        .map(|l| space.global_dof(edge, interval, l))
        .collect();
    EdgeTrace {
        gdofs,
        values,
        derivs,
        h: m.h,
        area: graph.edges[edge].area,
        sign,
    }
}

/// Per-edge interior-penalty stiffness: A-weighted broken gradients plus
/// consistency, adjoint, and penalty terms at interior mesh nodes of each
/// edge. No terms at edge endpoints; those belong to the vertex coupling.
pub fn assemble_a_lambda(
    space: &DgSpace1,
    graph: &VesselGraph,
    params: Ipdg1Params,
) -> SparseMatrix {
    let n = space.num_dofs();
    let mut coo = CooBuilder::new(n, n);
    let rule = gauss_interval(3).expect("fixed rule order");
    let p1 = space.dofs_per_cell();
    for (ei, m) in space.meshes.iter().enumerate() {
        let a = graph.edges[ei].area;
        // volume term: (A/h) * int ref phi'_i phi'_j
        let mut local = vec![vec![0.0; p1]; p1];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let d = space.ref_basis_deriv(*x);
            for i in 0..p1 {
                for j in 0..p1 {
                    local[i][j] += w * d[i] * d[j];
                }
            }
        }
        for iv in 0..m.n_cells {
            for i in 0..p1 {
                for j in 0..p1 {
                    coo.push(
                        space.global_dof(ei, iv, i),
                        space.global_dof(ei, iv, j),
                        a / m.h * local[i][j],
                    );
                }
            }
        }
        // interior nodes: jump = left limit - right limit
        let pen = params.sigma / m.h;
        for node in 1..m.n_cells {
            let left_vals = space.ref_basis(1.0);
            let right_vals = space.ref_basis(0.0);
            let left_der = space.ref_basis_deriv(1.0);
            let right_der = space.ref_basis_deriv(0.0);
            let mut gdofs = Vec::with_capacity(2 * p1);
            let mut jump = Vec::with_capacity(2 * p1);
            let mut avg_der = Vec::with_capacity(2 * p1);
            for l in 0..p1 {
                gdofs.push(space.global_dof(ei, node - 1, l));
                jump.push(left_vals[l]);
                avg_der.push(0.5 * left_der[l] / m.h);
            }
            for l in 0..p1 {
                gdofs.push(space.global_dof(ei, node, l));
                jump.push(-right_vals[l]);
                avg_der.push(0.5 * right_der[l] / m.h);
            }
            for t in 0..gdofs.len() {
                for u in 0..gdofs.len() {
                    let val = -a * avg_der[u] * jump[t]
                        + params.epsilon as f64 * a * avg_der[t] * jump[u]
                        + pen * jump[u] * jump[t];
                    coo.push(gdofs[t], gdofs[u], val);
                }
            }
        }
    }
    coo.build()
}

/// Vertex coupling form on the extended system [1D dofs | multipliers]:
/// for each multiplier vertex v and adjacent edge e,
///   A_e u'(v) n (w(v) - w~) + A_e w'(v) n (u(v) - u~)
///   + (sigma_v/h_e) (u(v) - u~)(w(v) - w~),
/// with n = +1 at the edge's inflow end and -1 at its outflow end.
pub fn assemble_b_v(
    space: &DgSpace1,
    graph: &VesselGraph,
    mult: &MultiplierSpace,
    params: Ipdg1Params,
) -> SparseMatrix {
    let n = space.num_dofs();
    let total = n + mult.num_dofs();
    let mut coo = CooBuilder::new(total, total);
    for (mi, &v) in mult.vertices.iter().enumerate() {
        let mdof = n + mi;
        for &ei in &graph.adjacency[v] {
            let tr = edge_trace(space, graph, ei, v);
            let pen = params.sigma_v / tr.h;
            let k = tr.gdofs.len();
            for t in 0..k {
                for u in 0..k {
                    let val = tr.area * tr.derivs[u] * tr.sign * tr.values[t]
                        + tr.area * tr.derivs[t] * tr.sign * tr.values[u]
                        + pen * tr.values[u] * tr.values[t];
                    coo.push(tr.gdofs[t], tr.gdofs[u], val);
                }
                // trial = multiplier: -A w'(v) n - (sigma_v/h) w(v)
                coo.push(
                    tr.gdofs[t],
                    mdof,
                    -tr.area * tr.derivs[t] * tr.sign - pen * tr.values[t],
                );
                // test = multiplier: -A u'(v) n - (sigma_v/h) u(v)
                coo.push(
                    mdof,
                    tr.gdofs[t],
                    -tr.area * tr.derivs[t] * tr.sign - pen * tr.values[t],
                );
            }
            coo.push(mdof, mdof, pen);
        }
    }
    coo.build()
}

/// A-weighted block mass matrix.
pub fn assemble_mass_1d(space: &DgSpace1, graph: &VesselGraph) -> SparseMatrix {
    let n = space.num_dofs();
    let mut coo = CooBuilder::new(n, n);
    let rule = gauss_interval(3).expect("fixed rule order");
    let p1 = space.dofs_per_cell();
    let mut local = vec![vec![0.0; p1]; p1];
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let b = space.ref_basis(*x);
        for i in 0..p1 {
            for j in 0..p1 {
                local[i][j] += w * b[i] * b[j];
            }
        }
    }
    for (ei, m) in space.meshes.iter().enumerate() {
        let scale = graph.edges[ei].area * m.h;
        for iv in 0..m.n_cells {
            for i in 0..p1 {
                for j in 0..p1 {
                    coo.push(
                        space.global_dof(ei, iv, i),
                        space.global_dof(ei, iv, j),
                        scale * local[i][j],
                    );
                }
            }
        }
    }
    coo.build()
}

/// A-weighted load vector for a per-edge right-hand side f(edge, s).
pub fn assemble_load_1d<F: Fn(usize, f64) -> f64>(
    space: &DgSpace1,
    graph: &VesselGraph,
    f: F,
) -> Vec<f64> {
    let mut load = vec![0.0; space.num_dofs()];
    let rule = gauss_interval(5).expect("fixed rule order");
    let p1 = space.dofs_per_cell();
    for (ei, m) in space.meshes.iter().enumerate() {
        let a = graph.edges[ei].area;
        for iv in 0..m.n_cells {
            let s0 = m.h * iv as f64;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let fv = a * m.h * w * f(ei, s0 + m.h * x);
                let b = space.ref_basis(*x);
                for l in 0..p1 {
                    load[space.global_dof(ei, iv, l)] += fv * b[l];
                }
            }
        }
    }
    load
}

/// Weak Dirichlet data at boundary vertices: mirrors the vertex coupling
/// form with the multiplier replaced by the datum g_v. Returns the matrix
/// contribution (over 1D dofs only) and the right-hand side.
pub fn vertex_dirichlet<G: Fn(usize) -> f64>(
    space: &DgSpace1,
    graph: &VesselGraph,
    params: Ipdg1Params,
    vertices: &[usize],
    g: G,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let n = space.num_dofs();
    let mut coo = CooBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for &v in vertices {
        if graph.adjacency[v].len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "vertex {v} has degree {}; Dirichlet data applies to boundary vertices only",
                graph.adjacency[v].len()
            )));
        }
        let gv = g(v);
        let ei = graph.adjacency[v][0];
        let tr = edge_trace(space, graph, ei, v);
        let pen = params.sigma_v / tr.h;
        for t in 0..tr.gdofs.len() {
            for u in 0..tr.gdofs.len() {
                let val = tr.area * tr.derivs[u] * tr.sign * tr.values[t]
                    + tr.area * tr.derivs[t] * tr.sign * tr.values[u]
                    + pen * tr.values[u] * tr.values[t];
                coo.push(tr.gdofs[t], tr.gdofs[u], val);
            }
            rhs[tr.gdofs[t]] += gv * (tr.area * tr.derivs[t] * tr.sign + pen * tr.values[t]);
        }
    }
    Ok((coo.build(), rhs))
}
